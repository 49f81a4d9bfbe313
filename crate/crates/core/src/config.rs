//! `key = value` run configuration.
//!
//! ```text
//! # lattice
//! lattice.r = 19.0
//! lattice.s = 2.86
//! drive.omega_hz = 4990
//! drive.a_pm_deg = 8.0
//! sweep.a_am = 0, 0.02, 0.04
//! ```

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{SimOptions, SweepSpec, TAU_POINTS};
use crate::lattice::{deg_to_rad, DepthDistribution, DriveSchedule, LatticeParams};
use crate::propagator::{PropagationConfig, ABSORBER_STRENGTH, ABSORBER_WIDTH, MIN_STEPS_PER_PERIOD, STEPS_PER_PERIOD};
use crate::stationary::BasisConfig;

const KEYS: &[&str] = &[
    "lattice.r",
    "lattice.s",
    "lattice.recoil_hz",
    "drive.omega_hz",
    "drive.n",
    "drive.a_pm_deg",
    "drive.a_pm_rad",
    "drive.a_am",
    "drive.delta_tau_us",
    "grid.n_wells",
    "grid.points_per_well",
    "basis.diag_points_per_well",
    "propagation.steps_per_period",
    "propagation.absorber_width",
    "propagation.absorber_strength",
    "depth.mode",
    "depth.rel_sigma",
    "depth.min",
    "depth.max",
    "depth.nodes",
    "depth.file",
    "scan.tau_points",
    "visibility.a_pm_deg",
    "sweep.a_pm_deg",
    "sweep.a_am",
    "sweep.n",
    "output.dir",
];

const REQUIRED: &[&str] = &["lattice.r", "lattice.s", "drive.omega_hz"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DepthSource {
    Single,
    Gaussian { rel_sigma: f64, min: f64, max: f64, nodes: usize },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub lattice: LatticeParams,
    pub drive: DriveSchedule,
    pub n_wells: usize,
    pub points_per_well: usize,
    pub diag_points_per_well: usize,
    pub steps_per_period: usize,
    pub absorber_width: f64,
    pub absorber_strength: f64,
    pub depth: DepthSource,
    pub tau_points: usize,
    /// Radians.
    pub visibility_a_pm: Vec<f64>,
    pub sweep: SweepSpec,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults around the given lattice and drive frequency. Recoil
    /// frequency, spacing and mass are those of [`LatticeParams::reference`].
    pub fn with_required(r: f64, s: f64, omega_hz: f64) -> Result<Self> {
        let lattice = LatticeParams::reference();
        let lattice = LatticeParams::new(r, s, lattice.omega_r, lattice.a, lattice.mass)?;
        let omega = TAU * omega_hz;
        let drive = DriveSchedule::new(deg_to_rad(8.0), 0.10, omega, 4, 0.0)?;
        Ok(Self {
            lattice,
            drive,
            n_wells: 17,
            points_per_well: 64,
            diag_points_per_well: BasisConfig::default().diag_points_per_well,
            steps_per_period: STEPS_PER_PERIOD,
            absorber_width: ABSORBER_WIDTH,
            absorber_strength: ABSORBER_STRENGTH,
            depth: DepthSource::Gaussian { rel_sigma: 0.15, min: 13.0, max: 25.0, nodes: 9 },
            tau_points: TAU_POINTS,
            visibility_a_pm: [1.0, 2.0, 3.0, 4.0, 5.0, 6.0].map(deg_to_rad).to_vec(),
            sweep: SweepSpec {
                a_pm_values: [2.0, 4.0, 8.0].map(deg_to_rad).to_vec(),
                a_am_values: (0..=10).map(|i| 0.02 * i as f64).collect(),
                n_values: vec![2],
                omega,
                delta_tau: 0.0,
            },
            output_dir: None,
        })
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            steps_per_period: self.steps_per_period,
            absorber_width: self.absorber_width,
            absorber_strength: self.absorber_strength,
            basis: BasisConfig { diag_points_per_well: self.diag_points_per_well, ..BasisConfig::default() },
        }
    }

    pub fn propagation(&self) -> Result<PropagationConfig> {
        PropagationConfig::new(
            self.drive.period() / self.steps_per_period as f64,
            self.absorber_width,
            self.absorber_strength,
            0,
        )
    }

    pub fn depth_distribution(&self) -> Result<DepthDistribution> {
        match &self.depth {
            DepthSource::Single => DepthDistribution::single(self.lattice.r),
            DepthSource::Gaussian { rel_sigma, min, max, nodes } => {
                DepthDistribution::truncated_gaussian(self.lattice.r, *rel_sigma, *min, *max, *nodes)
            }
            DepthSource::File(path) => read_depth_file(path),
        }
    }
}

/// Reads `r,weight` lines; `#` starts a comment.
pub fn read_depth_file(path: &Path) -> Result<DepthDistribution> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| Error::Config { line: i + 1, key: "depth.file".into(), message };
        let (r, w) = line.split_once(',').ok_or_else(|| bad(format!("expected `r,weight`, got `{line}`")))?;
        let r: f64 = r.trim().parse().map_err(|_| bad(format!("bad depth `{}`", r.trim())))?;
        let w: f64 = w.trim().parse().map_err(|_| bad(format!("bad weight `{}`", w.trim())))?;
        entries.push((r, w));
    }
    DepthDistribution::new(entries)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

struct Entry {
    line: usize,
    value: String,
}

/// Parses configuration text; relative file references resolve against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig> {
    let mut entries: BTreeMap<&str, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Config { line, key: content.to_string(), message: "expected `key = value`".into() });
        };
        let key = key.trim();
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(Error::Config { line, key: key.to_string(), message: "unknown key".into() });
        };
        if let Some(prev) = entries.get(known) {
            return Err(Error::Config {
                line,
                key: key.to_string(),
                message: format!("already set on line {}", prev.line),
            });
        }
        entries.insert(known, Entry { line, value: value.trim().to_string() });
    }
    for key in REQUIRED {
        if !entries.contains_key(key) {
            return Err(Error::MissingKey((*key).to_string()));
        }
    }

    let get = |key: &'static str| entries.get(key);
    let fail = |key: &'static str, message: String| {
        let line = entries.get(key).map_or(0, |e| e.line);
        Error::Config { line, key: key.to_string(), message }
    };
    let num = |key: &'static str| -> Result<Option<f64>> {
        get(key)
            .map(|e| {
                e.value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| fail(key, format!("`{}` is not a number", e.value)))
            })
            .transpose()
    };
    let int = |key: &'static str| -> Result<Option<u64>> {
        get(key)
            .map(|e| e.value.parse::<u64>().map_err(|_| fail(key, format!("`{}` is not a non-negative integer", e.value))))
            .transpose()
    };
    let list = |key: &'static str| -> Result<Option<Vec<f64>>> {
        get(key)
            .map(|e| {
                e.value
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|_| fail(key, format!("`{}` is not a number", v.trim()))))
                    .collect::<Result<Vec<f64>>>()
            })
            .transpose()
    };
    // inner-module validation errors are re-labelled with the key they came from
    let check = |key: &'static str, res: Result<()>| res.map_err(|e| fail(key, e.to_string()));

    let r = num("lattice.r")?.unwrap();
    let s = num("lattice.s")?.unwrap();
    let omega_hz = num("drive.omega_hz")?.unwrap();
    if !(omega_hz > 0.0) {
        return Err(fail("drive.omega_hz", format!("must be > 0, got {omega_hz}")));
    }
    let mut cfg = RunConfig::with_required(1.0, 0.0, omega_hz).map_err(|e| fail("drive.omega_hz", e.to_string()))?;
    if let Some(hz) = num("lattice.recoil_hz")? {
        if !(hz > 0.0) {
            return Err(fail("lattice.recoil_hz", format!("must be > 0, got {hz}")));
        }
        cfg.lattice.omega_r = TAU * hz;
    }
    let l = cfg.lattice;
    check("lattice.r", LatticeParams::new(r, 0.0, l.omega_r, l.a, l.mass).map(|_| ()))?;
    cfg.lattice = LatticeParams::new(r, s, l.omega_r, l.a, l.mass).map_err(|e| fail("lattice.s", e.to_string()))?;
    check("lattice.s", cfg.lattice.minimum_offset().map(|_| ()))?;

    let mut a_pm = cfg.drive.a_pm;
    if let Some(deg) = num("drive.a_pm_deg")? {
        a_pm = deg_to_rad(deg);
    }
    if let Some(rad) = num("drive.a_pm_rad")? {
        if get("drive.a_pm_deg").is_some() {
            return Err(fail("drive.a_pm_rad", "conflicts with drive.a_pm_deg".into()));
        }
        a_pm = rad;
    }
    let a_am = num("drive.a_am")?.unwrap_or(cfg.drive.a_am);
    let n = match int("drive.n")? {
        Some(n) if n == 0 || n > u32::MAX as u64 => return Err(fail("drive.n", format!("must satisfy n >= 1, got {n}"))),
        Some(n) => n as u32,
        None => cfg.drive.n,
    };
    let delta_tau = num("drive.delta_tau_us")?.map_or(0.0, |us| us * 1e-6);
    cfg.drive = DriveSchedule::new(a_pm, a_am, TAU * omega_hz, n, delta_tau).map_err(|e| {
        let key = match &e {
            Error::InvalidParameter { name: "a_am", .. } => "drive.a_am",
            Error::InvalidParameter { name: "delta_tau", .. } => "drive.delta_tau_us",
            Error::InvalidParameter { name: "a_pm", .. } if get("drive.a_pm_rad").is_some() => "drive.a_pm_rad",
            Error::InvalidParameter { name: "a_pm", .. } => "drive.a_pm_deg",
            _ => "drive.omega_hz",
        };
        fail(key, e.to_string())
    })?;

    if let Some(v) = int("grid.n_wells")? {
        if v < 3 || v % 2 == 0 {
            return Err(fail("grid.n_wells", format!("must be odd and >= 3, got {v}")));
        }
        cfg.n_wells = v as usize;
    }
    if let Some(v) = int("grid.points_per_well")? {
        if v < 16 {
            return Err(fail("grid.points_per_well", format!("must be >= 16, got {v}")));
        }
        cfg.points_per_well = v as usize;
    }
    if let Some(v) = int("basis.diag_points_per_well")? {
        if v < 8 || v as usize >= cfg.points_per_well {
            return Err(fail(
                "basis.diag_points_per_well",
                format!("must lie in [8, grid.points_per_well), got {v}"),
            ));
        }
        cfg.diag_points_per_well = v as usize;
    }
    if let Some(v) = int("propagation.steps_per_period")? {
        cfg.steps_per_period = v as usize;
    }
    if let Some(v) = num("propagation.absorber_width")? {
        cfg.absorber_width = v;
    }
    if let Some(v) = num("propagation.absorber_strength")? {
        cfg.absorber_strength = v;
    }
    if cfg.steps_per_period < MIN_STEPS_PER_PERIOD {
        return Err(fail("propagation.steps_per_period", format!("must be >= {MIN_STEPS_PER_PERIOD}")));
    }
    let prop_key = if get("propagation.absorber_width").is_some() {
        "propagation.absorber_width"
    } else {
        "propagation.absorber_strength"
    };
    check(prop_key, cfg.propagation().map(|_| ()))?;

    if let Some(e) = get("depth.mode") {
        cfg.depth = match e.value.as_str() {
            "single" => DepthSource::Single,
            "gaussian" => cfg.depth.clone(),
            "file" => {
                let f = get("depth.file").ok_or_else(|| Error::MissingKey("depth.file".into()))?;
                DepthSource::File(base.join(&f.value))
            }
            other => return Err(fail("depth.mode", format!("expected single, gaussian or file, got `{other}`"))),
        };
    } else if let Some(f) = get("depth.file") {
        cfg.depth = DepthSource::File(base.join(&f.value));
    }
    if let DepthSource::Gaussian { rel_sigma, min, max, nodes } = &mut cfg.depth {
        if let Some(v) = num("depth.rel_sigma")? {
            *rel_sigma = v;
        }
        if let Some(v) = num("depth.min")? {
            *min = v;
        }
        if let Some(v) = num("depth.max")? {
            *max = v;
        }
        if let Some(v) = int("depth.nodes")? {
            *nodes = v as usize;
        }
    }
    if let DepthSource::File(path) = &cfg.depth {
        if !path.is_file() {
            return Err(fail("depth.file", format!("{} does not exist", path.display())));
        }
    }
    let depth_key = if get("depth.file").is_some() { "depth.file" } else { "depth.rel_sigma" };
    check(depth_key, cfg.depth_distribution().map(|_| ()))?;

    if let Some(v) = int("scan.tau_points")? {
        if v < 4 {
            return Err(fail("scan.tau_points", format!("must be >= 4, got {v}")));
        }
        cfg.tau_points = v as usize;
    }
    if let Some(v) = list("visibility.a_pm_deg")? {
        cfg.visibility_a_pm = v.into_iter().map(deg_to_rad).collect();
    }
    if let Some(v) = list("sweep.a_pm_deg")? {
        cfg.sweep.a_pm_values = v.into_iter().map(deg_to_rad).collect();
    }
    if let Some(v) = list("sweep.a_am")? {
        if let Some(bad) = v.iter().find(|a| !(0.0..1.0).contains(*a)) {
            return Err(fail("sweep.a_am", format!("{bad} is outside [0, 1)")));
        }
        cfg.sweep.a_am_values = v;
    }
    if let Some(v) = list("sweep.n")? {
        if let Some(bad) = v.iter().find(|n| !(n.fract() == 0.0 && **n >= 1.0)) {
            return Err(fail("sweep.n", format!("{bad} violates n >= 1")));
        }
        cfg.sweep.n_values = v.into_iter().map(|n| n as u32).collect();
    }
    for (key, empty) in [
        ("visibility.a_pm_deg", cfg.visibility_a_pm.is_empty()),
        ("sweep.a_pm_deg", cfg.sweep.a_pm_values.is_empty()),
        ("sweep.a_am", cfg.sweep.a_am_values.is_empty()),
        ("sweep.n", cfg.sweep.n_values.is_empty()),
    ] {
        if empty {
            return Err(fail(key, "list is empty".into()));
        }
    }
    cfg.sweep.omega = cfg.drive.omega;
    cfg.output_dir = get("output.dir").map(|e| base.join(&e.value));
    Ok(cfg)
}
