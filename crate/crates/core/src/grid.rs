//! Uniform periodic position grid spanning an odd number of lattice wells,
//! plus the wavefunction container and its momentum-space transform.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft;

/// Smallest allowed number of grid points per well.
pub const MIN_POINTS_PER_WELL: usize = 16;

#[derive(Debug)]
pub struct SpectralGrid {
    n_points: usize,
    n_wells: usize,
    x_min: f64,
    dx: f64,
    x: Vec<f64>,
    k: Vec<f64>,
    fft: Fft,
}

impl SpectralGrid {
    /// Strict constructor: `n_wells * points_per_well` must be a power of two.
    ///
    /// Because `n_wells` is odd this only succeeds for degenerate inputs; the
    /// error names the next valid total so callers can switch to
    /// [`SpectralGrid::with_points`] or [`SpectralGrid::auto`].
    pub fn new(n_wells: usize, points_per_well: usize) -> Result<Arc<Self>> {
        check_wells(n_wells)?;
        check_density(n_wells, points_per_well)?;
        let total = n_wells * points_per_well;
        if !total.is_power_of_two() {
            return Err(Error::NotPowerOfTwo { requested: total, suggested: total.next_power_of_two() });
        }
        Self::with_points(n_wells, total)
    }

    /// Rounds `n_wells * points_per_well` up to the next power of two.
    pub fn auto(n_wells: usize, points_per_well: usize) -> Result<Arc<Self>> {
        check_wells(n_wells)?;
        check_density(n_wells, points_per_well)?;
        Self::with_points(n_wells, (n_wells * points_per_well).next_power_of_two())
    }

    /// Grid over `[-n_wells pi / 2, n_wells pi / 2)` with exactly `n_points` samples.
    pub fn with_points(n_wells: usize, n_points: usize) -> Result<Arc<Self>> {
        check_wells(n_wells)?;
        if !n_points.is_power_of_two() {
            return Err(Error::NotPowerOfTwo { requested: n_points, suggested: n_points.next_power_of_two() });
        }
        if n_points < MIN_POINTS_PER_WELL * n_wells {
            return Err(Error::InvalidParameter {
                name: "n_points",
                reason: format!("{n_points} points give fewer than {MIN_POINTS_PER_WELL} per well"),
            });
        }
        let length = n_wells as f64 * PI;
        let x_min = -0.5 * length;
        let dx = length / n_points as f64;
        let x = (0..n_points).map(|j| x_min + j as f64 * dx).collect();
        let dk = TAU / length;
        let k = (0..n_points)
            .map(|j| {
                let m = if j < n_points / 2 { j as f64 } else { j as f64 - n_points as f64 };
                m * dk
            })
            .collect();
        Ok(Arc::new(Self { n_points, n_wells, x_min, dx, x, k, fft: Fft::new(n_points) }))
    }

    /// 17 wells, at least 64 points per well (2048 points).
    pub fn reference() -> Arc<Self> {
        Self::auto(17, 64).expect("static reference grid")
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_wells(&self) -> usize {
        self.n_wells
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.length()
    }

    pub fn length(&self) -> f64 {
        self.n_wells as f64 * PI
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dk(&self) -> f64 {
        TAU / self.length()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub(crate) fn fft(&self) -> &Fft {
        &self.fft
    }

    /// Well indices covered by the domain, `-(n_wells / 2) ..= n_wells / 2`.
    pub fn well_range(&self) -> std::ops::RangeInclusive<i64> {
        let half = (self.n_wells / 2) as i64;
        -half..=half
    }

    pub fn same_as(&self, other: &SpectralGrid) -> bool {
        std::ptr::eq(self, other)
            || (self.n_points == other.n_points && self.n_wells == other.n_wells && self.dx == other.dx)
    }
}

fn check_wells(n_wells: usize) -> Result<()> {
    if n_wells < 3 || n_wells % 2 == 0 {
        Err(Error::InvalidWellCount(n_wells))
    } else {
        Ok(())
    }
}

fn check_density(n_wells: usize, points_per_well: usize) -> Result<()> {
    if points_per_well < MIN_POINTS_PER_WELL {
        return Err(Error::InvalidParameter {
            name: "points_per_well",
            reason: format!("need at least {MIN_POINTS_PER_WELL}, got {points_per_well} for {n_wells} wells"),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Position,
    Momentum,
}

/// Complex amplitudes sampled on a [`SpectralGrid`].
///
/// Position amplitudes are normalized with weight `dx`; momentum amplitudes
/// with weight `dk`, so both representations share the same norm.
#[derive(Debug, Clone)]
pub struct WaveState {
    amplitudes: Vec<Complex64>,
    grid: Arc<SpectralGrid>,
    repr: Representation,
}

impl WaveState {
    pub fn new(grid: Arc<SpectralGrid>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::LengthMismatch { expected: grid.n_points(), actual: amplitudes.len() });
        }
        Ok(Self { amplitudes, grid, repr: Representation::Position })
    }

    pub fn from_real(grid: Arc<SpectralGrid>, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Arc<SpectralGrid>, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = grid.x().iter().map(|&x| f(x)).collect();
        Self { amplitudes, grid, repr: Representation::Position }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    fn weight(&self) -> f64 {
        match self.repr {
            Representation::Position => self.grid.dx(),
            Representation::Momentum => self.grid.dk(),
        }
    }

    /// `sum |psi_i|^2 * weight`.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.weight()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= 1e-9
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            for z in &mut self.amplitudes {
                *z /= n;
            }
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    /// `<self|other>` with the representation's weight.
    pub fn inner(&self, other: &WaveState) -> Result<Complex64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        if self.repr != other.repr {
            return Err(Error::InvalidParameter {
                name: "representation",
                reason: "inner product across position and momentum representations".into(),
            });
        }
        let s: Complex64 = self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.weight())
    }

    /// Momentum representation, `phi_k = dx / sqrt(2 pi) * sum_j psi_j exp(-2 pi i jk / N)`.
    pub fn to_momentum(&self) -> Result<WaveState> {
        self.check_len()?;
        match self.repr {
            Representation::Momentum => Ok(self.clone()),
            Representation::Position => {
                let mut out = self.amplitudes.clone();
                self.grid.fft().forward(&mut out);
                let scale = self.grid.dx() / TAU.sqrt();
                out.iter_mut().for_each(|z| *z *= scale);
                Ok(WaveState { amplitudes: out, grid: self.grid.clone(), repr: Representation::Momentum })
            }
        }
    }

    /// Inverse of [`WaveState::to_momentum`].
    pub fn to_position(&self) -> Result<WaveState> {
        self.check_len()?;
        match self.repr {
            Representation::Position => Ok(self.clone()),
            Representation::Momentum => {
                let mut out = self.amplitudes.clone();
                self.grid.fft().inverse(&mut out);
                let scale = TAU.sqrt() / self.grid.dx();
                out.iter_mut().for_each(|z| *z *= scale);
                Ok(WaveState { amplitudes: out, grid: self.grid.clone(), repr: Representation::Position })
            }
        }
    }

    fn check_len(&self) -> Result<()> {
        if self.amplitudes.len() != self.grid.n_points() {
            Err(Error::LengthMismatch { expected: self.grid.n_points(), actual: self.amplitudes.len() })
        } else {
            Ok(())
        }
    }
}
