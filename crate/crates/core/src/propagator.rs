//! Strang split-operator integration of the driven washboard Hamiltonian
//!
//! ```text
//! H(t) = p^2 + r (1 + eta(t)) sin^2 x + (s / pi) x - (theta''(t) / 2) x
//! ```
//!
//! in the frame co-moving with the lattice displacement. Energies are in units
//! of `hbar omega_r`, so the dimensionless time is `omega_r t` and `theta''`
//! is the second derivative with respect to that time.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Representation, WaveState};
use crate::lattice::{eta, theta_ddot, DriveSchedule, LatticeParams};

/// Default number of steps per drive period.
pub const STEPS_PER_PERIOD: usize = 256;
/// Fewest steps per drive period accepted.
pub const MIN_STEPS_PER_PERIOD: usize = 64;
/// Default absorber width per edge, fraction of the domain.
pub const ABSORBER_WIDTH: f64 = 0.1;
/// Default peak absorption rate, units of `omega_r`.
pub const ABSORBER_STRENGTH: f64 = 6.0;

/// Converts SI time to the dimensionless time of the Hamiltonian, `omega_r t`.
///
/// With `p^2` as the kinetic term and energies in `hbar omega_r`, the
/// Schroedinger equation `i hbar d/dt psi = hbar omega_r H psi` becomes
/// `i d/dtau psi = H psi` for `tau = omega_r t`.
pub fn time_rescale(t_si: f64, params: &LatticeParams) -> f64 {
    params.omega_r * t_si
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationConfig {
    /// Time step, s.
    pub dt: f64,
    /// Absorber width per edge as a fraction of the domain.
    pub absorber_width: f64,
    /// Peak absorption rate in units of `omega_r`.
    pub absorber_strength: f64,
    /// Steps between recorded snapshots; 0 records nothing.
    pub record_stride: usize,
}

impl PropagationConfig {
    pub fn new(dt: f64, absorber_width: f64, absorber_strength: f64, record_stride: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter { name: "dt", reason: format!("must be > 0, got {dt}") });
        }
        if !(0.0..=0.2).contains(&absorber_width) {
            return Err(Error::InvalidParameter {
                name: "absorber_width",
                reason: format!("must lie in [0, 0.2], got {absorber_width}"),
            });
        }
        if !(absorber_strength.is_finite() && absorber_strength >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "absorber_strength",
                reason: format!("must be >= 0, got {absorber_strength}"),
            });
        }
        Ok(Self { dt, absorber_width, absorber_strength, record_stride })
    }

    /// `steps_per_period` steps per drive period with the default absorber.
    pub fn for_schedule(sched: &DriveSchedule, steps_per_period: usize) -> Result<Self> {
        Self::new(sched.period() / steps_per_period as f64, ABSORBER_WIDTH, ABSORBER_STRENGTH, 0)
    }

    pub fn without_absorber(mut self) -> Self {
        self.absorber_width = 0.0;
        self.absorber_strength = 0.0;
        self
    }

    fn check_against(&self, sched: &DriveSchedule) -> Result<()> {
        if sched.omega * self.dt > TAU / MIN_STEPS_PER_PERIOD as f64 * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("need at least {MIN_STEPS_PER_PERIOD} steps per drive period"),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub final_state: WaveState,
    /// Probability removed by the absorber.
    pub absorbed_norm: f64,
    /// `(t, state)` pairs, `t` in seconds.
    pub snapshots: Vec<(f64, WaveState)>,
    pub steps: usize,
}

/// Reusable split-operator stepper for one lattice and grid.
pub struct Propagator {
    params: LatticeParams,
    x: Vec<f64>,
    sin2: Vec<f64>,
    k2: Vec<f64>,
    absorber: Vec<f64>,
}

impl Propagator {
    pub fn new(params: &LatticeParams, grid: &crate::grid::SpectralGrid, absorber_width: f64) -> Self {
        let x = grid.x().to_vec();
        let sin2 = x.iter().map(|x| x.sin().powi(2)).collect();
        let k2 = grid.k().iter().map(|k| k * k).collect();
        let absorber = absorber_profile(grid, absorber_width);
        Self { params: *params, x, sin2, k2, absorber }
    }

    /// Evolves `psi` in place over `[t0, t1]` (SI seconds; `t1 < t0` runs
    /// backward) in `steps` Strang steps. Returns the absorbed probability.
    pub fn evolve(
        &self,
        psi: &mut WaveState,
        sched: &DriveSchedule,
        t0: f64,
        t1: f64,
        steps: usize,
        absorber_strength: f64,
        mut on_step: impl FnMut(usize, f64, &WaveState),
    ) -> Result<f64> {
        if psi.representation() != Representation::Position {
            *psi = psi.to_position()?;
        }
        let grid = psi.grid().clone();
        if grid.n_points() != self.x.len() {
            return Err(Error::GridMismatch);
        }
        let fft = grid.fft();
        let dx = grid.dx();
        let h = (t1 - t0) / steps as f64;
        let dtau = time_rescale(h, &self.params);
        let kinetic: Vec<Complex64> = self.k2.iter().map(|&k2| Complex64::from_polar(1.0, -k2 * dtau)).collect();
        // half-step absorber damping; only meaningful forward in time
        let damping: Vec<f64> = if absorber_strength > 0.0 && dtau > 0.0 {
            self.absorber.iter().map(|w| (-0.5 * absorber_strength * w * dtau).exp()).collect()
        } else {
            Vec::new()
        };
        let mut half = vec![Complex64::new(0.0, 0.0); self.x.len()];
        let mut absorbed = 0.0;
        let mut norm = psi.norm_sqr();
        let omega_r2 = self.params.omega_r * self.params.omega_r;
        for step in 0..steps {
            let t_mid = t0 + (step as f64 + 0.5) * h;
            let depth = self.params.r * (1.0 + eta(t_mid, sched));
            let force = 0.5 * theta_ddot(t_mid, sched) / omega_r2;
            let tilt = self.params.s / std::f64::consts::PI - force;
            for (i, z) in half.iter_mut().enumerate() {
                let v = depth * self.sin2[i] + tilt * self.x[i];
                *z = Complex64::from_polar(1.0, -0.5 * v * dtau);
                if !damping.is_empty() {
                    *z *= damping[i];
                }
            }
            let amps = psi.amplitudes_mut();
            for (a, p) in amps.iter_mut().zip(&half) {
                *a *= p;
            }
            fft.forward(amps);
            for (a, p) in amps.iter_mut().zip(&kinetic) {
                *a *= p;
            }
            fft.inverse(amps);
            for (a, p) in amps.iter_mut().zip(&half) {
                *a *= p;
            }
            let new_norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
            if !new_norm.is_finite() {
                return Err(Error::NonFinite { step, norm: new_norm });
            }
            if !damping.is_empty() {
                absorbed += norm - new_norm;
            }
            norm = new_norm;
            on_step(step + 1, t0 + (step + 1) as f64 * h, psi);
        }
        Ok(absorbed)
    }
}

/// `cos^2` ramp rising from 0 at the inner edge of each absorbing layer to 1 at the wall.
fn absorber_profile(grid: &crate::grid::SpectralGrid, width: f64) -> Vec<f64> {
    let layer = width * grid.length();
    grid.x()
        .iter()
        .map(|&x| {
            if layer <= 0.0 {
                return 0.0;
            }
            let depth = (x - grid.x_min()).min(grid.x_max() - x);
            if depth >= layer {
                0.0
            } else {
                (FRAC_PI_2 * depth / layer).cos().powi(2)
            }
        })
        .collect()
}

/// Evolves `psi0` from `t = 0` until both drives are off.
pub fn propagate(
    psi0: &WaveState,
    params: &LatticeParams,
    sched: &DriveSchedule,
    cfg: &PropagationConfig,
) -> Result<PropagationResult> {
    let prop = Propagator::new(params, psi0.grid(), cfg.absorber_width);
    propagate_with(&prop, psi0, sched, cfg)
}

/// Like [`propagate`] but reuses a prepared [`Propagator`].
pub fn propagate_with(
    prop: &Propagator,
    psi0: &WaveState,
    sched: &DriveSchedule,
    cfg: &PropagationConfig,
) -> Result<PropagationResult> {
    propagate_until(prop, psi0, sched, cfg, sched.end_time())
}

/// Evolves `psi0` from `t = 0` to `t_end`, which must not precede the end of
/// the drives.
pub fn propagate_until(
    prop: &Propagator,
    psi0: &WaveState,
    sched: &DriveSchedule,
    cfg: &PropagationConfig,
    t_end: f64,
) -> Result<PropagationResult> {
    cfg.check_against(sched)?;
    if !(t_end >= sched.end_time() * (1.0 - 1e-12)) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: format!("{t_end} s precedes the end of the drives at {} s", sched.end_time()),
        });
    }
    if !psi0.is_normalized() {
        return Err(Error::InvalidParameter {
            name: "psi0",
            reason: format!("initial state must be normalized, norm^2 = {}", psi0.norm_sqr()),
        });
    }
    let steps = ((t_end / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
    let mut psi = psi0.to_position()?;
    let mut snapshots = Vec::new();
    let stride = cfg.record_stride;
    let absorbed = prop.evolve(&mut psi, sched, 0.0, t_end, steps, cfg.absorber_strength, |step, t, state| {
        if stride > 0 && step % stride == 0 {
            snapshots.push((t, state.clone()));
        }
    })?;
    Ok(PropagationResult { final_state: psi, absorbed_norm: absorbed, snapshots, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpectralGrid;
    use crate::lattice::{REFERENCE_DRIVE_HZ, REFERENCE_RECOIL_HZ};
    use crate::stationary::solve_static;

    fn drive(a_pm: f64, a_am: f64, n: u32) -> DriveSchedule {
        DriveSchedule::new(a_pm, a_am, TAU * REFERENCE_DRIVE_HZ, n, 0.0).unwrap()
    }

    #[test]
    fn time_rescale_examples() {
        let p = LatticeParams::reference();
        assert!((time_rescale(1.0 / p.omega_r, &p) - 1.0).abs() < 1e-15);
        assert!((time_rescale(TAU / p.omega_r, &p) - TAU).abs() < 1e-14);
        let period = 1.0 / REFERENCE_DRIVE_HZ;
        let tau = time_rescale(period, &p);
        assert!((tau - TAU * REFERENCE_RECOIL_HZ / REFERENCE_DRIVE_HZ).abs() < 1e-12);
        assert!((tau - 0.863).abs() < 1e-3);
    }

    #[test]
    fn config_validation() {
        assert!(PropagationConfig::new(0.0, 0.1, 1.0, 0).is_err());
        assert!(PropagationConfig::new(1e-6, 0.3, 1.0, 0).is_err());
        assert!(PropagationConfig::new(1e-6, 0.1, -1.0, 0).is_err());
        let sched = drive(0.1, 0.0, 2);
        let coarse = PropagationConfig::new(sched.period() / 32.0, 0.1, 1.0, 0).unwrap();
        let grid = SpectralGrid::with_points(3, 64).unwrap();
        let psi = WaveState::from_fn(grid, |_| Complex64::new(1.0, 0.0)).normalized();
        assert!(propagate(&psi, &LatticeParams::reference(), &sched, &coarse).is_err());
    }

    #[test]
    fn ground_state_is_stationary() {
        let params = LatticeParams::reference();
        let grid = SpectralGrid::reference();
        let basis = solve_static(&params, &grid).unwrap();
        let sched = drive(0.0, 0.0, 4);
        let cfg = PropagationConfig::for_schedule(&sched, STEPS_PER_PERIOD).unwrap();
        let res = propagate(&basis.ground().wavefunction, &params, &sched, &cfg).unwrap();
        let p = basis.ground().wavefunction.inner(&res.final_state).unwrap().norm_sqr();
        assert!((p - 1.0).abs() < 1e-6, "population {p}");
    }

    #[test]
    fn snapshots_follow_stride() {
        let params = LatticeParams::reference();
        let grid = SpectralGrid::with_points(5, 256).unwrap();
        let psi = WaveState::from_fn(grid, |x| Complex64::new((-x * x).exp(), 0.0)).normalized();
        let sched = drive(0.05, 0.0, 1);
        let mut cfg = PropagationConfig::for_schedule(&sched, 64).unwrap();
        cfg.record_stride = 16;
        let res = propagate(&psi, &params, &sched, &cfg).unwrap();
        assert_eq!(res.steps, 64);
        assert_eq!(res.snapshots.len(), 4);
        assert!((res.snapshots[3].0 - sched.end_time()).abs() < 1e-15);
    }

    #[test]
    fn absorber_reflects_little() {
        // free wavepacket at the qubit-splitting energy heading into the absorber
        let flat = LatticeParams::new(1e-12, 0.0, TAU * REFERENCE_RECOIL_HZ, 1e-6, 1e-25).unwrap();
        let grid = SpectralGrid::with_points(17, 2048).unwrap();
        let k0 = 7.5f64.sqrt();
        let psi = WaveState::from_fn(grid.clone(), |x| {
            let y = x - 10.0;
            Complex64::from_polar((-y * y / 8.0).exp(), k0 * x)
        })
        .normalized();
        let sched = drive(0.0, 0.0, 1);
        let prop = Propagator::new(&flat, &grid, ABSORBER_WIDTH);
        let mut state = psi.clone();
        // long enough to cross the layer, reflect from the wall and come back out
        let t_end = 40.0 / flat.omega_r;
        let steps = 8000;
        let absorbed =
            prop.evolve(&mut state, &sched, 0.0, t_end, steps, ABSORBER_STRENGTH, |_, _, _| {}).unwrap();
        let left = state.norm_sqr();
        assert!(left < 1e-4, "reflected/transmitted norm {left}");
        assert!((left + absorbed - 1.0).abs() < 1e-9);
    }

    #[test]
    fn nan_input_is_reported() {
        let params = LatticeParams::reference();
        let grid = SpectralGrid::with_points(3, 64).unwrap();
        let mut psi = WaveState::from_fn(grid.clone(), |_| Complex64::new(1.0, 0.0));
        let sched = drive(0.0, 0.0, 1);
        let prop = Propagator::new(&params, &grid, 0.0);
        psi.amplitudes_mut()[3] = Complex64::new(f64::NAN, 0.0);
        let err = prop.evolve(&mut psi, &sched, 0.0, sched.end_time(), 10, 0.0, |_, _, _| {}).unwrap_err();
        assert!(matches!(err, Error::NonFinite { step: 0, .. }));
    }
}
