//! Fringe scans, visibility studies and branching-ratio sweeps.
//!
//! Every simulation starts in the qubit ground state of the static lattice and
//! is measured once both drives are off. Independent runs are evaluated with
//! rayon; results are always assembled in input order, so outputs do not
//! depend on the number of worker threads.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{fit_fringe, two_path_visibility_curve, FringeFit, TwoPathInputs};
use crate::error::{Error, Result};
use crate::grid::SpectralGrid;
use crate::lattice::{phase_from_offset, wrap_phase, DepthDistribution, DriveSchedule, LatticeParams};
use crate::measurement::{branching_ratio, measure, PopulationReport};
use crate::propagator::{propagate_until, PropagationConfig, Propagator, ABSORBER_STRENGTH, ABSORBER_WIDTH, STEPS_PER_PERIOD};
use crate::stationary::{solve_static_with, BasisConfig, StateBasis};

/// Default number of `delta_tau` samples per fringe period `pi / omega`.
pub const TAU_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub steps_per_period: usize,
    pub absorber_width: f64,
    pub absorber_strength: f64,
    pub basis: BasisConfig,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            steps_per_period: STEPS_PER_PERIOD,
            absorber_width: ABSORBER_WIDTH,
            absorber_strength: ABSORBER_STRENGTH,
            basis: BasisConfig::default(),
        }
    }
}

/// Static basis and stepper for one lattice depth.
pub struct Simulator {
    basis: StateBasis,
    propagator: Propagator,
    opts: SimOptions,
}

impl Simulator {
    pub fn new(params: &LatticeParams, grid: &Arc<SpectralGrid>, opts: SimOptions) -> Result<Self> {
        let basis = solve_static_with(params, grid, &opts.basis)?;
        let propagator = Propagator::new(params, grid, opts.absorber_width);
        Ok(Self { basis, propagator, opts })
    }

    pub fn basis(&self) -> &StateBasis {
        &self.basis
    }

    pub fn params(&self) -> &LatticeParams {
        self.basis.params()
    }

    /// Drives the qubit ground state with `sched` and measures at `t_end`
    /// (seconds, defaults to the end of the drives).
    pub fn run(&self, sched: &DriveSchedule, t_end: Option<f64>) -> Result<PopulationReport> {
        let base = PropagationConfig::for_schedule(sched, self.opts.steps_per_period)?;
        let cfg = PropagationConfig::new(base.dt, self.opts.absorber_width, self.opts.absorber_strength, 0)?;
        let t_end = t_end.unwrap_or(sched.end_time());
        let result = propagate_until(&self.propagator, &self.basis.ground().wavefunction, sched, &cfg, t_end)?;
        measure(&result, &self.basis)
    }
}

/// Simulators for every depth of a distribution, with their weights.
pub struct Ensemble {
    members: Vec<(f64, Simulator)>,
}

impl Ensemble {
    pub fn single(params: &LatticeParams, grid: &Arc<SpectralGrid>, opts: SimOptions) -> Result<Self> {
        Ok(Self { members: vec![(1.0, Simulator::new(params, grid, opts)?)] })
    }

    /// One simulator per depth node; the first depth that cannot be solved aborts.
    pub fn over_depths(
        base: &LatticeParams,
        dist: &DepthDistribution,
        grid: &Arc<SpectralGrid>,
        opts: SimOptions,
    ) -> Result<Self> {
        let members: Vec<Result<(f64, Simulator)>> = dist
            .entries()
            .par_iter()
            .map(|&(r, w)| {
                let sim = base
                    .with_depth(r)
                    .and_then(|p| Simulator::new(&p, grid, opts))
                    .map_err(|e| Error::DepthFailed { r, source: Box::new(e) })?;
                Ok((w, sim))
            })
            .collect();
        Ok(Self { members: members.into_iter().collect::<Result<_>>()? })
    }

    pub fn members(&self) -> &[(f64, Simulator)] {
        &self.members
    }

    pub fn is_single(&self) -> bool {
        self.members.len() == 1
    }

    /// Weighted mean report over all depths.
    pub fn run(&self, sched: &DriveSchedule, t_end: Option<f64>) -> Result<PopulationReport> {
        average_over_depths(&self.members, |sim| sim.run(sched, t_end))
    }

    /// Runs every schedule for every depth in parallel and averages per
    /// schedule. All runs are measured at the same time `t_end` when given.
    pub fn run_many(&self, scheds: &[DriveSchedule], t_end: Option<f64>) -> Vec<Result<PopulationReport>> {
        let d = self.members.len();
        let flat: Vec<Result<PopulationReport>> = (0..scheds.len() * d)
            .into_par_iter()
            .map(|k| self.members[k % d].1.run(&scheds[k / d], t_end))
            .collect();
        flat.chunks(d)
            .map(|chunk| {
                let mut items = Vec::with_capacity(d);
                for ((w, sim), rep) in self.members.iter().zip(chunk) {
                    match rep {
                        Ok(rep) => items.push((*w, *rep)),
                        Err(e) => {
                            return Err(Error::DepthFailed { r: sim.params().r, source: Box::new(e.clone()) })
                        }
                    }
                }
                PopulationReport::weighted_mean(&items)
            })
            .collect()
    }
}

/// Probability-weighted mean of `runner` over `(weight, item)` pairs.
pub fn average_over_depths<T: Sync>(
    items: &[(f64, T)],
    runner: impl Fn(&T) -> Result<PopulationReport> + Sync,
) -> Result<PopulationReport> {
    let reports: Vec<(f64, PopulationReport)> =
        items.par_iter().map(|(w, t)| runner(t).map(|r| (*w, r))).collect::<Result<_>>()?;
    PopulationReport::weighted_mean(&reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeScanSpec {
    /// Drive settings; its `delta_tau` is replaced by each scan value.
    pub sched_base: DriveSchedule,
    /// Seconds.
    pub tau_values: Vec<f64>,
}

impl FringeScanSpec {
    pub fn new(sched_base: DriveSchedule, tau_values: Vec<f64>) -> Result<Self> {
        if tau_values.is_empty() {
            return Err(Error::InvalidParameter { name: "tau_values", reason: "empty scan".into() });
        }
        if let Some(t) = tau_values.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::InvalidParameter { name: "tau_values", reason: format!("{t} is not >= 0") });
        }
        Ok(Self { sched_base, tau_values })
    }

    /// `points` equally spaced delays covering one fringe period `pi / omega`.
    pub fn one_period(sched_base: DriveSchedule, points: usize) -> Result<Self> {
        if points < 4 {
            return Err(Error::TooFewSamples(points));
        }
        let period = fringe_period(&sched_base);
        Self::new(sched_base, (0..points).map(|i| i as f64 * period / points as f64).collect())
    }

    pub fn schedules(&self) -> Result<Vec<DriveSchedule>> {
        self.tau_values.iter().map(|&t| self.sched_base.with_delta_tau(t)).collect()
    }

    /// Common measurement time: the end of the latest drive in the scan.
    pub fn end_time(&self) -> f64 {
        let latest = self.tau_values.iter().copied().fold(0.0, f64::max);
        self.sched_base.duration() + latest
    }
}

/// Period of the leakage fringe in `delta_tau`, `pi / omega`.
pub fn fringe_period(sched: &DriveSchedule) -> f64 {
    PI / sched.omega
}

/// Fixed fit frequency of a fringe, `2 omega` in Hz.
pub fn fringe_frequency(sched: &DriveSchedule) -> f64 {
    sched.omega / PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeRow {
    pub delta_tau: f64,
    /// `2 omega delta_tau` wrapped to `[0, 2 pi)`.
    pub delta_phi: f64,
    pub report: std::result::Result<PopulationReport, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeTable {
    pub sched_base: DriveSchedule,
    pub rows: Vec<FringeRow>,
}

impl FringeTable {
    /// `(delta_tau, P_L)` for the points that succeeded.
    pub fn leakage_samples(&self) -> Vec<(f64, f64)> {
        self.rows.iter().filter_map(|r| r.report.as_ref().ok().map(|p| (r.delta_tau, p.p_l))).collect()
    }

    pub fn fit(&self) -> Result<FringeFit> {
        fit_fringe(&self.leakage_samples(), fringe_frequency(&self.sched_base))
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.report.is_err()).count()
    }
}

pub fn run_fringe(ensemble: &Ensemble, spec: &FringeScanSpec) -> Result<FringeTable> {
    let scheds = spec.schedules()?;
    let reports = ensemble.run_many(&scheds, Some(spec.end_time()));
    let rows = scheds
        .iter()
        .zip(reports)
        .map(|(s, rep)| FringeRow {
            delta_tau: s.delta_tau,
            delta_phi: phase_from_offset(s),
            report: rep.map_err(|e| e.to_string()),
        })
        .collect();
    Ok(FringeTable { sched_base: spec.sched_base, rows })
}

/// Location of the leakage minimum found at reference settings; later
/// phases are quoted relative to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCalibration {
    /// `2 omega delta_tau` of the fitted minimum, `[0, 2 pi)`.
    pub phase_offset: f64,
    pub fit: FringeFit,
}

impl PhaseCalibration {
    pub fn from_fit(fit: FringeFit) -> Self {
        // 2 pi f t_min = pi - phase, and 2 pi f = 2 omega
        Self { phase_offset: wrap_phase(PI - fit.phase), fit }
    }

    /// Drive phase relative to the calibrated minimum, in `(-pi, pi]`.
    pub fn relative_phase(&self, delta_phi: f64) -> f64 {
        let d = (delta_phi - self.phase_offset).rem_euclid(TAU);
        if d > PI {
            d - TAU
        } else {
            d
        }
    }

    /// Smallest non-negative delay at the calibrated minimum.
    pub fn minimum_delay(&self, omega: f64) -> f64 {
        self.phase_offset / (2.0 * omega)
    }
}

pub fn calibrate_phase(ensemble: &Ensemble, sched_ref: &DriveSchedule, points: usize) -> Result<PhaseCalibration> {
    let table = run_fringe(ensemble, &FringeScanSpec::one_period(*sched_ref, points)?)?;
    Ok(PhaseCalibration::from_fit(table.fit()?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilitySpec {
    /// Drive template carrying `a_am`, `omega` and `n`; `a_pm` is scanned.
    pub sched_base: DriveSchedule,
    pub a_pm_values: Vec<f64>,
    pub tau_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityRow {
    pub a_pm: f64,
    pub p_l_pm: f64,
    pub p_l_am: f64,
    pub log2_ratio: f64,
    pub visibility: f64,
    pub p_max: f64,
    pub p_min: f64,
    pub model_visibility: f64,
    pub fit: FringeFit,
    pub fringe: FringeTable,
}

pub fn run_visibility_study(ensemble: &Ensemble, spec: &VisibilitySpec) -> Result<Vec<VisibilityRow>> {
    if spec.a_pm_values.is_empty() {
        return Err(Error::InvalidParameter { name: "a_pm_values", reason: "empty".into() });
    }
    let base = spec.sched_base.with_delta_tau(0.0)?;
    let t_end = FringeScanSpec::one_period(base, spec.tau_points)?.end_time();
    let am_only = ensemble.run(&base.with_amplitudes(0.0, base.a_am)?, Some(t_end))?;
    spec.a_pm_values
        .iter()
        .map(|&a_pm| {
            let sched = base.with_amplitudes(a_pm, base.a_am)?;
            let pm_only = ensemble.run(&sched.with_amplitudes(a_pm, 0.0)?, Some(t_end))?;
            let fringe = run_fringe(ensemble, &FringeScanSpec::one_period(sched, spec.tau_points)?)?;
            let fit = fringe.fit()?;
            let inputs = TwoPathInputs::new(pm_only.p_l, am_only.p_l)?;
            let log2_ratio = inputs.log2_ratio();
            Ok(VisibilityRow {
                a_pm,
                p_l_pm: pm_only.p_l,
                p_l_am: am_only.p_l,
                log2_ratio,
                visibility: fit.visibility()?,
                p_max: fit.p_max(),
                p_min: fit.p_min(),
                model_visibility: two_path_visibility_curve(log2_ratio),
                fit,
                fringe,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub a_pm_values: Vec<f64>,
    pub a_am_values: Vec<f64>,
    pub n_values: Vec<u32>,
    /// rad/s.
    pub omega: f64,
    /// Seconds; zero places the drives at their nominal relative phase.
    pub delta_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub a_pm: f64,
    pub a_am: f64,
    pub n: u32,
    pub report: std::result::Result<PopulationReport, String>,
    /// `P_e / P_L`; NaN when the point failed.
    pub b: f64,
    /// Branching ratio with PM alone on the same curve.
    pub baseline_b: f64,
    pub improvement: f64,
}

/// Evaluates the full grid; `a_am = 0` is added to every curve if missing.
pub fn run_branching_sweep(ensemble: &Ensemble, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.a_pm_values.is_empty() || spec.n_values.is_empty() {
        return Err(Error::InvalidParameter { name: "sweep", reason: "empty A_PM or n axis".into() });
    }
    let mut a_am: Vec<f64> = spec.a_am_values.clone();
    if !a_am.contains(&0.0) {
        a_am.push(0.0);
    }
    a_am.sort_by(f64::total_cmp);
    a_am.dedup();

    let mut keys = Vec::new();
    let mut scheds = Vec::new();
    for &n in &spec.n_values {
        for &a_pm in &spec.a_pm_values {
            for &am in &a_am {
                scheds.push(DriveSchedule::new(a_pm, am, spec.omega, n, spec.delta_tau)?);
                keys.push((a_pm, am, n));
            }
        }
    }
    let reports = ensemble.run_many(&scheds, None);
    let mut rows: Vec<SweepRow> = keys
        .into_iter()
        .zip(reports)
        .map(|((a_pm, a_am, n), rep)| {
            let b = rep.as_ref().map(branching_ratio).unwrap_or(f64::NAN);
            SweepRow { a_pm, a_am, n, report: rep.map_err(|e| e.to_string()), b, baseline_b: f64::NAN, improvement: f64::NAN }
        })
        .collect();
    for curve in rows.chunks_mut(a_am.len()) {
        let baseline = curve.iter().find(|r| r.a_am == 0.0).map(|r| r.b).unwrap_or(f64::NAN);
        for r in curve.iter_mut() {
            r.baseline_b = baseline;
            r.improvement = r.b / baseline;
        }
    }
    Ok(rows)
}

/// True when `values` never decrease and then never increase again, ignoring
/// wiggles smaller than `tol`.
pub fn is_unimodal(values: &[f64], tol: f64) -> bool {
    let Some(peak) = values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i) else {
        return true;
    };
    values[..=peak].windows(2).all(|w| w[1] >= w[0] - tol) && values[peak..].windows(2).all(|w| w[1] <= w[0] + tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::REFERENCE_DRIVE_HZ;
    use std::sync::OnceLock;

    fn ensemble() -> &'static Ensemble {
        static E: OnceLock<Ensemble> = OnceLock::new();
        E.get_or_init(|| {
            let opts = SimOptions { steps_per_period: 64, ..SimOptions::default() };
            Ensemble::single(&LatticeParams::reference(), &SpectralGrid::reference(), opts).unwrap()
        })
    }

    fn sched(a_pm: f64, a_am: f64, n: u32) -> DriveSchedule {
        DriveSchedule::new(a_pm, a_am, TAU * REFERENCE_DRIVE_HZ, n, 0.0).unwrap()
    }

    #[test]
    fn flat_fringe_without_am() {
        let spec = FringeScanSpec::one_period(sched(0.08, 0.0, 2), 4).unwrap();
        let table = run_fringe(ensemble(), &spec).unwrap();
        let pl: Vec<f64> = table.leakage_samples().iter().map(|s| s.1).collect();
        assert_eq!(pl.len(), 4);
        for p in &pl {
            assert!((p - pl[0]).abs() < 1e-6, "{pl:?}");
        }
    }

    #[test]
    fn scan_spec_validation() {
        assert!(FringeScanSpec::new(sched(0.1, 0.1, 2), vec![]).is_err());
        assert!(FringeScanSpec::new(sched(0.1, 0.1, 2), vec![0.0, -1e-6]).is_err());
        let spec = FringeScanSpec::one_period(sched(0.1, 0.1, 2), 16).unwrap();
        let period = PI / (TAU * REFERENCE_DRIVE_HZ);
        assert!((spec.tau_values[15] - period * 15.0 / 16.0).abs() < 1e-18);
        assert!((period - 100.2e-6).abs() < 0.05e-6);
    }

    #[test]
    fn sweep_includes_baseline_and_is_deterministic() {
        let spec = SweepSpec {
            a_pm_values: vec![0.08],
            a_am_values: vec![0.1],
            n_values: vec![2],
            omega: TAU * REFERENCE_DRIVE_HZ,
            delta_tau: 0.0,
        };
        let rows = run_branching_sweep(ensemble(), &spec).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].a_am, 0.0);
        assert_eq!(rows[0].improvement, 1.0);
        assert!(rows.iter().all(|r| r.baseline_b == rows[0].b));
        let again = run_branching_sweep(ensemble(), &spec).unwrap();
        assert_eq!(rows, again);
    }

    #[test]
    fn depth_average_of_one_depth_is_identity() {
        let items = [(1.0, 19.0)];
        let single = average_over_depths(&items, |_| Ok(PopulationReport { p_g: 0.9, p_e: 0.1, ..Default::default() })).unwrap();
        assert_eq!(single.p_g, 0.9);
        let two = [(0.5, 0.2), (0.5, 0.4)];
        let mid = average_over_depths(&two, |&p| Ok(PopulationReport { p_e: p, ..Default::default() })).unwrap();
        assert!((mid.p_e - 0.3).abs() < 1e-15);
        let failing = average_over_depths(&two, |_| Err(Error::RankDeficient));
        assert!(failing.is_err());
    }

    #[test]
    fn unimodality() {
        assert!(is_unimodal(&[1.0, 2.0, 3.0, 2.5, 1.0], 0.0));
        assert!(is_unimodal(&[1.0, 2.0, 3.0], 0.0));
        assert!(!is_unimodal(&[1.0, 3.0, 2.0, 2.5], 0.0));
        assert!(is_unimodal(&[1.0, 3.0, 2.0, 2.01], 0.05));
    }

    #[test]
    fn calibration_wraps_relative_phase() {
        let fit = FringeFit { amplitude: 0.01, offset: 0.05, phase: PI - 0.2, fixed_freq: 9980.0, residual_rms: 0.0 };
        let cal = PhaseCalibration::from_fit(fit);
        assert!((cal.phase_offset - 0.2).abs() < 1e-12);
        assert!((cal.relative_phase(0.2)).abs() < 1e-12);
        assert!((cal.relative_phase(0.1) + 0.1).abs() < 1e-12);
        assert!((cal.relative_phase(0.2 + PI) - PI).abs() < 1e-12);
        let omega = TAU * 4990.0;
        let s = DriveSchedule::new(0.1, 0.1, omega, 2, cal.minimum_delay(omega)).unwrap();
        assert!((phase_from_offset(&s) - 0.2).abs() < 1e-9);
    }
}
