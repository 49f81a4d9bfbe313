//! Static lattice parameters, the PM/AM drive waveforms, and the lattice-depth
//! distribution used for inhomogeneous averaging.
//!
//! Units: positions are the dimensionless lattice coordinate `x = pi * X / a`
//! (one well per `pi`), energies are in units of `hbar * omega_r`, and SI seconds
//! are used for every time that crosses the public API.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = PLANCK / TAU;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Mass of a rubidium-85 atom, kg.
pub const RB85_MASS: f64 = 84.911_789_738 * AMU;
/// Standard gravity, m/s^2.
pub const STANDARD_GRAVITY: f64 = 9.806_65;

/// Lattice spacing of the reference setup, m.
pub const REFERENCE_SPACING: f64 = 0.930e-6;
/// Quoted effective recoil frequency of the reference setup, Hz.
pub const REFERENCE_RECOIL_HZ: f64 = 685.0;
/// Quoted qubit resonance of the reference setup, Hz.
pub const REFERENCE_DRIVE_HZ: f64 = 4990.0;
/// Reference depth, units of hbar * omega_r.
pub const REFERENCE_DEPTH: f64 = 19.0;
/// Reference tilt per lattice spacing, units of hbar * omega_r.
pub const REFERENCE_TILT: f64 = 2.86;

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: format!("must be finite and > 0, got {value}") })
    }
}

/// Recoil angular frequency `2 pi h / (8 m a^2)` in rad/s.
pub fn recoil_angular_frequency(mass: f64, spacing: f64) -> f64 {
    TAU * PLANCK / (8.0 * mass * spacing * spacing)
}

/// Degrees to radians. The result is used as-is as a displacement amplitude in
/// lattice units (8 degrees -> 0.1396).
pub fn deg_to_rad(deg: f64) -> f64 {
    deg.to_radians()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    /// Depth `U0 / (hbar omega_r)`.
    pub r: f64,
    /// Tilt `m g a / (hbar omega_r)`.
    pub s: f64,
    /// Recoil angular frequency, rad/s.
    pub omega_r: f64,
    /// Lattice spacing, m.
    pub a: f64,
    /// Atom mass, kg.
    pub mass: f64,
}

impl LatticeParams {
    pub fn new(r: f64, s: f64, omega_r: f64, a: f64, mass: f64) -> Result<Self> {
        positive("r", r)?;
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::InvalidParameter { name: "s", reason: format!("must be >= 0, got {s}") });
        }
        positive("omega_r", omega_r)?;
        positive("a", a)?;
        positive("mass", mass)?;
        Ok(Self { r, s, omega_r, a, mass })
    }

    /// Builds parameters with `omega_r` derived from mass and spacing.
    pub fn from_physical(r: f64, s: f64, a: f64, mass: f64) -> Result<Self> {
        positive("a", a)?;
        positive("mass", mass)?;
        Self::new(r, s, recoil_angular_frequency(mass, a), a, mass)
    }

    /// Depth 19, tilt 2.86, quoted recoil 2 pi x 685 Hz, Rb-85 in a 0.930 um lattice.
    pub fn reference() -> Self {
        Self {
            r: REFERENCE_DEPTH,
            s: REFERENCE_TILT,
            omega_r: TAU * REFERENCE_RECOIL_HZ,
            a: REFERENCE_SPACING,
            mass: RB85_MASS,
        }
    }

    pub fn with_depth(&self, r: f64) -> Result<Self> {
        Self::new(r, self.s, self.omega_r, self.a, self.mass)
    }

    /// Gravitational tilt `m g a / (hbar omega_r)` implied by mass, spacing and `omega_r`.
    pub fn gravity_tilt(&self) -> f64 {
        self.mass * STANDARD_GRAVITY * self.a / (HBAR * self.omega_r)
    }

    /// `r sin^2 x + (s / pi) x`.
    #[inline]
    pub fn static_potential(&self, x: f64) -> f64 {
        let sx = x.sin();
        self.r * sx * sx + self.s / PI * x
    }

    /// Offset of every local minimum of the tilted potential from `k pi`.
    ///
    /// Minima satisfy `r sin 2x = -s / pi` with `cos 2x > 0`.
    pub fn minimum_offset(&self) -> Result<f64> {
        let ratio = self.s / (PI * self.r);
        if ratio >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "s",
                reason: format!("tilt {} removes every local minimum at depth {}", self.s, self.r),
            });
        }
        Ok(-0.5 * ratio.asin())
    }

    /// Position of the local minimum of well `k`.
    pub fn well_center(&self, k: i64) -> Result<f64> {
        Ok(k as f64 * PI + self.minimum_offset()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSchedule {
    /// PM amplitude, lattice units (a full well is `pi`).
    pub a_pm: f64,
    /// Fractional AM amplitude.
    pub a_am: f64,
    /// Drive angular frequency, rad/s.
    pub omega: f64,
    /// Number of PM periods.
    pub n: u32,
    /// Delay of the AM window after the PM window opens, s.
    pub delta_tau: f64,
}

impl DriveSchedule {
    pub fn new(a_pm: f64, a_am: f64, omega: f64, n: u32, delta_tau: f64) -> Result<Self> {
        if !a_pm.is_finite() {
            return Err(Error::InvalidParameter { name: "a_pm", reason: "must be finite".into() });
        }
        if !(a_am.is_finite() && (0.0..1.0).contains(&a_am)) {
            return Err(Error::InvalidParameter { name: "a_am", reason: format!("must lie in [0, 1), got {a_am}") });
        }
        positive("omega", omega)?;
        if n == 0 {
            return Err(Error::InvalidParameter { name: "n", reason: "must be >= 1".into() });
        }
        if !(delta_tau.is_finite() && delta_tau >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "delta_tau",
                reason: format!("must be >= 0, got {delta_tau}"),
            });
        }
        Ok(Self { a_pm, a_am, omega, n, delta_tau })
    }

    pub fn with_delta_tau(&self, delta_tau: f64) -> Result<Self> {
        Self::new(self.a_pm, self.a_am, self.omega, self.n, delta_tau)
    }

    pub fn with_amplitudes(&self, a_pm: f64, a_am: f64) -> Result<Self> {
        Self::new(a_pm, a_am, self.omega, self.n, self.delta_tau)
    }

    /// Modulation duration `2 n pi / omega`.
    pub fn duration(&self) -> f64 {
        TAU * self.n as f64 / self.omega
    }

    /// Drive period `2 pi / omega`.
    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    /// Time at which both drives are off.
    pub fn end_time(&self) -> f64 {
        self.duration().max(self.delta_tau + self.duration())
    }

    fn in_pm_window(&self, t: f64) -> bool {
        (0.0..=self.duration()).contains(&t)
    }

    fn in_am_window(&self, t: f64) -> bool {
        t >= self.delta_tau && t <= self.delta_tau + self.duration()
    }
}

/// Lattice displacement `A_PM (1 - cos wt)` inside the PM window, zero outside.
pub fn theta(t: f64, sched: &DriveSchedule) -> f64 {
    if sched.in_pm_window(t) {
        sched.a_pm * (1.0 - (sched.omega * t).cos())
    } else {
        0.0
    }
}

/// Second time derivative of [`theta`], lattice units per s^2.
pub fn theta_ddot(t: f64, sched: &DriveSchedule) -> f64 {
    if sched.in_pm_window(t) {
        sched.a_pm * sched.omega * sched.omega * (sched.omega * t).cos()
    } else {
        0.0
    }
}

/// Fractional depth modulation `A_AM sin(2 w (t - dtau))` inside the AM window.
pub fn eta(t: f64, sched: &DriveSchedule) -> f64 {
    if sched.a_am != 0.0 && sched.in_am_window(t) {
        sched.a_am * (2.0 * sched.omega * (t - sched.delta_tau)).sin()
    } else {
        0.0
    }
}

/// Relative phase `2 w dtau` reduced to `[0, 2 pi)`.
pub fn phase_from_offset(sched: &DriveSchedule) -> f64 {
    wrap_phase(2.0 * sched.omega * sched.delta_tau)
}

/// Reduces an angle to `[0, 2 pi)`, snapping values within rounding of `2 pi` to 0.
pub fn wrap_phase(phi: f64) -> f64 {
    let p = phi.rem_euclid(TAU);
    if TAU - p <= 8.0 * f64::EPSILON * phi.abs().max(TAU) {
        0.0
    } else {
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthDistribution {
    entries: Vec<(f64, f64)>,
}

impl DepthDistribution {
    /// Normalizes the weights. Rejects negative weights, non-positive depths and
    /// an all-zero weight vector.
    pub fn new(entries: Vec<(f64, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter { name: "depth_distribution", reason: "no entries".into() });
        }
        let mut total = 0.0;
        for &(r, w) in &entries {
            positive("depth", r)?;
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "depth_weight",
                    reason: format!("weights must be >= 0, got {w}"),
                });
            }
            total += w;
        }
        if total <= 0.0 {
            return Err(Error::InvalidParameter { name: "depth_weight", reason: "weights sum to zero".into() });
        }
        let entries = entries.into_iter().map(|(r, w)| (r, w / total)).collect();
        Ok(Self { entries })
    }

    pub fn single(r: f64) -> Result<Self> {
        Self::new(vec![(r, 1.0)])
    }

    /// Gaussian in `r` (relative width `rel_sigma`) sampled at `nodes` equally
    /// spaced depths across `[lo, hi]`, weights proportional to the density.
    pub fn truncated_gaussian(mean: f64, rel_sigma: f64, lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        positive("mean", mean)?;
        positive("rel_sigma", rel_sigma)?;
        positive("lo", lo)?;
        if !(hi > lo) || nodes == 0 {
            return Err(Error::InvalidParameter {
                name: "depth_window",
                reason: format!("need hi > lo and nodes >= 1, got [{lo}, {hi}] with {nodes} nodes"),
            });
        }
        let sigma = rel_sigma * mean;
        let entries = (0..nodes)
            .map(|i| {
                let r = if nodes == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (nodes - 1) as f64 };
                let z = (r - mean) / sigma;
                (r, (-0.5 * z * z).exp())
            })
            .collect();
        Self::new(entries)
    }

    /// Mean 19, relative width 15 %, nine nodes on `[13, 25]`.
    pub fn reference() -> Self {
        Self::truncated_gaussian(REFERENCE_DEPTH, 0.15, 13.0, 25.0, 9).expect("static reference distribution")
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn mean(&self) -> f64 {
        self.entries.iter().map(|(r, w)| r * w).sum()
    }
}
