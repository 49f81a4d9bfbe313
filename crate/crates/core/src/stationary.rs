//! Quasi-bound states of the static tilted washboard `p^2 + r sin^2 x + (s/pi) x`.
//!
//! The static Hamiltonian is diagonalized in a sine discrete-variable
//! representation (particle-in-a-box basis) spanning the same hard-walled
//! domain as the propagation grid. Eigenvectors are transferred to the
//! propagation grid by evaluating their sine series, which preserves inner
//! products exactly, so projections onto the basis are exact on the grid.
//!
//! In a hard-walled box the long-lived states of a well hybridize with the
//! continuum that forms downhill. Per well we therefore collect every box
//! eigenstate with appreciable weight in that well, split them into energy
//! groups, widen each group to every eigenstate inside its energy span, and keep the combination of each group that maximizes the
//! probability inside the well. A group made of a single eigenstate yields that
//! eigenstate unchanged; wider groups yield resonance-like states whose energy
//! spread is reported as `width`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft;
use crate::grid::{SpectralGrid, WaveState};
use crate::lattice::LatticeParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisConfig {
    /// Sine-DVR points per well used for the diagonalization.
    pub diag_points_per_well: usize,
    /// Minimum probability within `+-pi/2` of the well center.
    pub localization_threshold: f64,
    /// Box eigenstates with less weight than this in a well are ignored for it.
    pub membership_floor: f64,
    /// Energy gap (units of `hbar omega_r`) that separates groups.
    pub group_gap: f64,
    /// Largest accepted energy spread of a localized combination.
    pub max_width: f64,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            diag_points_per_well: 32,
            localization_threshold: 0.9,
            membership_floor: 0.02,
            group_gap: 1.0,
            max_width: 0.3,
        }
    }
}

/// Eigen-decomposition of the static Hamiltonian in the sine DVR.
#[derive(Debug, Clone)]
pub struct BoxSpectrum {
    /// DVR abscissae.
    pub points: Vec<f64>,
    /// Eigenvalues, ascending.
    pub energies: Vec<f64>,
    /// Column `a` holds eigenvector `a` (unit Euclidean norm).
    pub vectors: DMatrix<f64>,
    hamiltonian: DMatrix<f64>,
    x_min: f64,
    length: f64,
}

impl BoxSpectrum {
    /// Diagonalizes the static Hamiltonian on the hard-walled interval
    /// `[x_min, x_min + n_wells pi]` with `n_wells * points_per_well - 1`
    /// interior DVR points. Only eigenpairs below `energy_cap` are kept.
    pub fn solve(
        params: &LatticeParams,
        x_min: f64,
        n_wells: usize,
        points_per_well: usize,
        energy_cap: f64,
    ) -> Result<Self> {
        if points_per_well < 8 {
            return Err(Error::InvalidParameter {
                name: "diag_points_per_well",
                reason: format!("need at least 8, got {points_per_well}"),
            });
        }
        let intervals = n_wells * points_per_well;
        let m = intervals - 1;
        let length = n_wells as f64 * PI;
        let h = length / intervals as f64;
        let points: Vec<f64> = (1..=m).map(|i| x_min + i as f64 * h).collect();

        let nn = intervals as f64;
        let pref = PI * PI / (2.0 * length * length);
        let mut hmat = DMatrix::<f64>::zeros(m, m);
        for j in 1..=m {
            let sj = (PI * j as f64 / nn).sin();
            hmat[(j - 1, j - 1)] =
                pref * ((2.0 * nn * nn + 1.0) / 3.0 - 1.0 / (sj * sj)) + params.static_potential(points[j - 1]);
            for k in (j + 1)..=m {
                let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
                let a = (PI * (j as f64 - k as f64) / (2.0 * nn)).sin();
                let b = (PI * (j + k) as f64 / (2.0 * nn)).sin();
                let t = pref * sign * (1.0 / (a * a) - 1.0 / (b * b));
                hmat[(j - 1, k - 1)] = t;
                hmat[(k - 1, j - 1)] = t;
            }
        }
        let hamiltonian = hmat.clone();
        let eig = SymmetricEigen::new(hmat);
        let mut order: Vec<usize> = (0..m).filter(|&a| eig.eigenvalues[a] < energy_cap).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let energies = order.iter().map(|&a| eig.eigenvalues[a]).collect();
        let mut vectors = DMatrix::<f64>::zeros(m, order.len());
        for (col, &a) in order.iter().enumerate() {
            let mut v = eig.eigenvectors.column(a).clone_owned();
            // deterministic sign: largest component positive
            let imax = v.iamax();
            if v[imax] < 0.0 {
                v.neg_mut();
            }
            vectors.set_column(col, &v);
        }
        Ok(Self { points, energies, vectors, hamiltonian, x_min, length })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Probability of eigenvector `a` within `half_width` of `center`.
    pub fn weight_near(&self, a: usize, center: f64, half_width: f64) -> f64 {
        self.points
            .iter()
            .zip(self.vectors.column(a).iter())
            .filter(|(x, _)| (*x - center).abs() < half_width)
            .map(|(_, u)| u * u)
            .sum()
    }

    /// `<x>` of eigenvector `a`.
    pub fn mean_position(&self, a: usize) -> f64 {
        mean_position(&self.points, self.vectors.column(a).as_slice())
    }

    /// Evaluates the sine series of a DVR vector on `grid`.
    fn interpolate(&self, dvr: &[f64], grid: &SpectralGrid) -> Vec<f64> {
        let m = dvr.len();
        let intervals = (m + 1) as f64;
        // sine coefficients: c_n = sqrt(2 / (M + 1)) sum_i sin(n pi i / (M + 1)) u_i
        let norm = (2.0 / intervals).sqrt();
        let mut coeffs = vec![0.0; m];
        for (n, c) in coeffs.iter_mut().enumerate() {
            let theta = PI * (n + 1) as f64 / intervals;
            *c = norm * sine_series(dvr, theta);
        }
        // psi(x) = sum_n c_n sqrt(2 / L) sin(n pi (x - x_min) / L)
        let amp = (2.0 / self.length).sqrt();
        grid.x()
            .iter()
            .map(|&x| {
                let theta = PI * (x - self.x_min) / self.length;
                amp * sine_series(&coeffs, theta)
            })
            .collect()
    }
}

/// `sum_{n=1..} c_n sin(n theta)` (Clenshaw).
fn sine_series(c: &[f64], theta: f64) -> f64 {
    let two_cos = 2.0 * theta.cos();
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().rev() {
        let b0 = ck + two_cos * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    b1 * theta.sin()
}

fn mean_position(x: &[f64], u: &[f64]) -> f64 {
    let (num, den) = x.iter().zip(u).fold((0.0, 0.0), |(n, d), (x, u)| (n + x * u * u, d + u * u));
    num / den
}

#[derive(Debug, Clone)]
pub struct BasisState {
    /// Energy expectation, units of `hbar omega_r`.
    pub energy: f64,
    pub wavefunction: WaveState,
    pub well_index: i64,
    pub intra_well_rank: usize,
    /// Probability within `+-pi/2` of the well center.
    pub localization: f64,
    /// Energy standard deviation; zero for an exact box eigenstate.
    pub width: f64,
    /// DVR coefficients the state was built from.
    coefficients: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct StateBasis {
    states: Vec<BasisState>,
    qubit_ground: usize,
    qubit_excited: usize,
    params: LatticeParams,
    grid: Arc<SpectralGrid>,
    hamiltonian: Arc<DMatrix<f64>>,
}

impl StateBasis {
    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn qubit_ground(&self) -> usize {
        self.qubit_ground
    }

    pub fn qubit_excited(&self) -> usize {
        self.qubit_excited
    }

    pub fn ground(&self) -> &BasisState {
        &self.states[self.qubit_ground]
    }

    pub fn excited(&self) -> &BasisState {
        &self.states[self.qubit_excited]
    }

    /// `E_1 - E_0` of the qubit, units of `hbar omega_r`.
    pub fn qubit_splitting(&self) -> f64 {
        self.excited().energy - self.ground().energy
    }

    pub fn params(&self) -> &LatticeParams {
        &self.params
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    /// Index of the state with the given labels.
    pub fn find(&self, well_index: i64, rank: usize) -> Option<usize> {
        self.states.iter().position(|s| s.well_index == well_index && s.intra_well_rank == rank)
    }

    /// `|| H0 phi - E phi ||` for state `index`, with `H0` applied spectrally on the grid.
    /// `||H phi - E phi||` for the Hamiltonian the basis was diagonalized in.
    pub fn residual(&self, index: usize) -> Result<f64> {
        let st = self.states.get(index).ok_or(Error::IndexOutOfRange { index, len: self.states.len() })?;
        let v = &st.coefficients;
        Ok((&*self.hamiltonian * v - v * st.energy).norm())
    }

    /// `||H phi - E phi||` of the state as sampled on the propagation grid, with
    /// hard walls at the grid edges. Exceeds [`Self::residual`] for states whose
    /// tails reach a wall.
    pub fn grid_residual(&self, index: usize) -> Result<f64> {
        let st = self.states.get(index).ok_or(Error::IndexOutOfRange { index, len: self.states.len() })?;
        Ok(box_residual(&self.params, &self.grid, st.wavefunction.amplitudes(), st.energy))
    }

    /// `well_index,rank,energy,localization,width` rows, ordered by well then rank.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<&BasisState> = self.states.iter().collect();
        rows.sort_by_key(|s| (s.well_index, s.intra_well_rank));
        let mut out = String::from("well_index,rank,energy,localization,width\n");
        for s in rows {
            let _ = writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e}",
                s.well_index, s.intra_well_rank, s.energy, s.localization, s.width
            );
        }
        out
    }
}

/// [`solve_static_with`] using [`BasisConfig::default`].
pub fn solve_static(params: &LatticeParams, grid: &Arc<SpectralGrid>) -> Result<StateBasis> {
    solve_static_with(params, grid, &BasisConfig::default())
}

pub fn solve_static_with(params: &LatticeParams, grid: &Arc<SpectralGrid>, cfg: &BasisConfig) -> Result<StateBasis> {
    if !(1.0..=60.0).contains(&params.r) {
        return Err(Error::InvalidParameter { name: "r", reason: format!("must lie in [1, 60], got {}", params.r) });
    }
    let n_wells = grid.n_wells();
    if n_wells * cfg.diag_points_per_well >= grid.n_points() {
        return Err(Error::InvalidParameter {
            name: "diag_points_per_well",
            reason: format!(
                "{} DVR points per well do not fit under the {}-point propagation grid",
                cfg.diag_points_per_well,
                grid.n_points()
            ),
        });
    }
    let offset = params.minimum_offset()?;
    let cap = params.r + params.s * (n_wells as f64 / 2.0 + 1.0);
    let spec = BoxSpectrum::solve(params, grid.x_min(), n_wells, cfg.diag_points_per_well, cap)?;

    // wells ordered so the central well is orthogonalized first
    // wells whose localization window crosses a wall are left out
    let mut wells: Vec<i64> = grid
        .well_range()
        .filter(|&w| {
            let c = w as f64 * PI + offset;
            c - FRAC_PI_2 >= grid.x_min() && c + FRAC_PI_2 <= grid.x_max()
        })
        .collect();
    wells.sort_by_key(|w| (w.abs(), *w));

    struct Candidate {
        vector: DVector<f64>,
        energy: f64,
        width: f64,
    }
    let mut found: Vec<Candidate> = Vec::new();
    for &well in &wells {
        let center = well as f64 * PI + offset;
        let inside: Vec<bool> = spec.points.iter().map(|x| (x - center).abs() < FRAC_PI_2).collect();
        let members: Vec<usize> = (0..spec.len())
            .filter(|&a| spec.weight_near(a, center, FRAC_PI_2) >= cfg.membership_floor)
            .collect();
        for seed in split_groups(&members, &spec.energies, cfg.group_gap) {
            let group = span_of(&seed, &spec.energies);
            let g = group.len();
            let mut proj = DMatrix::<f64>::zeros(g, g);
            for (p, &a) in group.iter().enumerate() {
                for (q, &b) in group.iter().enumerate().skip(p) {
                    let val: f64 = spec
                        .vectors
                        .column(a)
                        .iter()
                        .zip(spec.vectors.column(b).iter())
                        .zip(&inside)
                        .filter(|(_, &ins)| ins)
                        .map(|((u, v), _)| u * v)
                        .sum();
                    proj[(p, q)] = val;
                    proj[(q, p)] = val;
                }
            }
            let (lambda, coeff) = top_eigenpair(proj);
            if lambda < cfg.localization_threshold {
                continue;
            }
            let energy: f64 = group.iter().zip(coeff.iter()).map(|(&a, c)| c * c * spec.energies[a]).sum();
            let var: f64 =
                group.iter().zip(coeff.iter()).map(|(&a, c)| c * c * (spec.energies[a] - energy).powi(2)).sum();
            let width = var.max(0.0).sqrt();
            if width > cfg.max_width {
                continue;
            }
            let mut vector = DVector::<f64>::zeros(spec.points.len());
            for (&a, c) in group.iter().zip(coeff.iter()) {
                vector.axpy(*c, &spec.vectors.column(a), 1.0);
            }
            found.push(Candidate { vector, energy, width });
        }
    }

    // Gram-Schmidt in DVR space; the central well comes first so the qubit
    // states are untouched.
    let mut accepted: Vec<Candidate> = Vec::with_capacity(found.len());
    for mut c in found {
        for prev in &accepted {
            let d = prev.vector.dot(&c.vector);
            c.vector.axpy(-d, &prev.vector, 1.0);
        }
        let n = c.vector.norm();
        if n < 0.5 {
            continue;
        }
        c.vector /= n;
        let imax = c.vector.iamax();
        if c.vector[imax] < 0.0 {
            c.vector.neg_mut();
        }
        let weights = spec.vectors.tr_mul(&c.vector).map(|w| w * w);
        c.energy = weights.iter().zip(&spec.energies).map(|(w, e)| w * e).sum();
        let var: f64 = weights.iter().zip(&spec.energies).map(|(w, e)| w * (e - c.energy).powi(2)).sum();
        c.width = var.max(0.0).sqrt();
        accepted.push(c);
    }

    let mut states: Vec<BasisState> = accepted
        .iter()
        .map(|c| {
            let mean = mean_position(&spec.points, c.vector.as_slice());
            let well_index = ((mean - offset) / PI).round() as i64;
            let center = well_index as f64 * PI + offset;
            let localization: f64 = spec
                .points
                .iter()
                .zip(c.vector.iter())
                .filter(|(x, _)| (*x - center).abs() < FRAC_PI_2)
                .map(|(_, u)| u * u)
                .sum();
            let values = spec.interpolate(c.vector.as_slice(), grid);
            let wavefunction = WaveState::from_real(grid.clone(), &values).expect("grid-sized vector");
            BasisState {
                energy: c.energy,
                wavefunction,
                well_index,
                intra_well_rank: 0,
                localization,
                width: c.width,
                coefficients: c.vector.clone(),
            }
        })
        .filter(|s| s.localization >= cfg.localization_threshold)
        .collect();

    states.sort_by(|a, b| a.well_index.cmp(&b.well_index).then(a.energy.total_cmp(&b.energy)));
    let mut rank = 0;
    for i in 0..states.len() {
        rank = if i > 0 && states[i - 1].well_index == states[i].well_index { rank + 1 } else { 0 };
        states[i].intra_well_rank = rank;
    }
    let ground = states.iter().position(|s| s.well_index == 0 && s.intra_well_rank == 0);
    let excited = states.iter().position(|s| s.well_index == 0 && s.intra_well_rank == 1);
    match (ground, excited) {
        (Some(g), Some(e)) => Ok(StateBasis {
            states,
            qubit_ground: g,
            qubit_excited: e,
            params: *params,
            grid: grid.clone(),
            hamiltonian: Arc::new(spec.hamiltonian),
        }),
        _ => Err(Error::TooShallow { r: params.r, found: states.iter().filter(|s| s.well_index == 0).count() }),
    }
}

/// Residual of `psi` under the static Hamiltonian with hard walls at the grid
/// edges, applying the kinetic term through an odd extension of the grid values.
fn box_residual(params: &LatticeParams, grid: &SpectralGrid, psi: &[Complex64], energy: f64) -> f64 {
    let n = psi.len();
    let mut ext = vec![Complex64::new(0.0, 0.0); 2 * n];
    for j in 1..n {
        ext[j] = psi[j];
        ext[2 * n - j] = -psi[j];
    }
    let fft = Fft::new(2 * n);
    fft.forward(&mut ext);
    let dk = PI / grid.length();
    for (m, z) in ext.iter_mut().enumerate() {
        let k = if m <= n { m as f64 } else { m as f64 - 2.0 * n as f64 } * dk;
        *z *= k * k;
    }
    fft.inverse(&mut ext);
    let r: f64 = ext[..n]
        .iter()
        .zip(psi)
        .zip(grid.x())
        .map(|((t, p), &x)| (t + p * (params.static_potential(x) - energy)).norm_sqr())
        .sum();
    (r * grid.dx()).sqrt()
}

fn split_groups(members: &[usize], energies: &[f64], gap: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &a in members {
        match groups.last_mut() {
            Some(g) if energies[a] - energies[*g.last().unwrap()] < gap => g.push(a),
            _ => groups.push(vec![a]),
        }
    }
    groups
}

/// Every eigenstate whose energy lies within the seed group's span, so that
/// near-degenerate partners with little weight in the well are not dropped.
fn span_of(seed: &[usize], energies: &[f64]) -> Vec<usize> {
    let lo = energies[seed[0]];
    let hi = energies[*seed.last().unwrap()];
    (0..energies.len()).filter(|&a| energies[a] >= lo && energies[a] <= hi).collect()
}

fn top_eigenpair(m: DMatrix<f64>) -> (f64, DVector<f64>) {
    if m.nrows() == 1 {
        return (m[(0, 0)], DVector::from_element(1, 1.0));
    }
    let eig = SymmetricEigen::new(m);
    let imax = eig.eigenvalues.imax();
    (eig.eigenvalues[imax], eig.eigenvectors.column(imax).clone_owned())
}

/// `<phi_index | psi>` with the grid weight.
pub fn overlap(psi: &WaveState, index: usize, basis: &StateBasis) -> Result<Complex64> {
    let st = basis.states.get(index).ok_or(Error::IndexOutOfRange { index, len: basis.states.len() })?;
    st.wavefunction.inner(psi)
}
