//! CSV tables and the JSON run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::{FringeTable, PhaseCalibration, SweepRow, VisibilityRow};
use crate::measurement::CSV_HEADER;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Full-precision float for CSV cells (17 significant digits).
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn fringe_csv(table: &FringeTable, calibration: Option<&PhaseCalibration>) -> String {
    let mut out = format!("delta_tau_s,delta_phi,relative_phi,{CSV_HEADER},error\n");
    for row in &table.rows {
        let rel = calibration.map_or(f64::NAN, |c| c.relative_phase(row.delta_phi));
        let _ = write!(out, "{},{},{},", num(row.delta_tau), num(row.delta_phi), num(rel));
        match &row.report {
            Ok(rep) => {
                let _ = writeln!(out, "{},", rep.csv_row());
            }
            Err(e) => {
                let _ = writeln!(out, ",,,,,,{}", quote(e));
            }
        }
    }
    out
}

pub fn visibility_csv(rows: &[VisibilityRow]) -> String {
    let mut out = String::from(
        "a_pm_rad,p_l_pm,p_l_am,log2_ratio,visibility,p_max,p_min,model_visibility,fit_offset,fit_amplitude,fit_phase,fit_residual_rms\n",
    );
    for r in rows {
        let cells = [
            r.a_pm,
            r.p_l_pm,
            r.p_l_am,
            r.log2_ratio,
            r.visibility,
            r.p_max,
            r.p_min,
            r.model_visibility,
            r.fit.offset,
            r.fit.amplitude,
            r.fit.phase,
            r.fit.residual_rms,
        ];
        out.push_str(&cells.map(num).join(","));
        out.push('\n');
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("a_pm_rad,a_am,n,{CSV_HEADER},B,B_baseline,improvement,error\n");
    for r in rows {
        let _ = write!(out, "{},{},{},", num(r.a_pm), num(r.a_am), r.n);
        match &r.report {
            Ok(rep) => {
                let _ = writeln!(out, "{},{},{},{},", rep.csv_row(), num(r.b), num(r.baseline_b), num(r.improvement));
            }
            Err(e) => {
                let _ = writeln!(out, ",,,,,,,,,{}", quote(e));
            }
        }
    }
    out
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, S: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub config: &'a RunConfig,
    pub spec: S,
    pub outputs: Vec<String>,
}

/// Writes named files and a manifest into `dir`, creating it if needed.
pub struct RunWriter {
    dir: PathBuf,
    outputs: Vec<String>,
}

impl RunWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), outputs: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }

    pub fn finish(self, command: &str, config: &RunConfig, spec: impl Serialize) -> Result<PathBuf> {
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            spec,
            outputs: self.outputs.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
        let path = self.dir.join(MANIFEST_NAME);
        fs::write(&path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::FringeRow;
    use crate::lattice::DriveSchedule;
    use crate::measurement::PopulationReport;

    #[test]
    fn numbers_round_trip_exactly() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt() * 1e-7, 123456.789e10, -0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn fringe_rows_keep_column_count() {
        let sched = DriveSchedule::new(0.14, 0.1, 2.0 * std::f64::consts::PI * 4990.0, 4, 0.0).unwrap();
        let table = FringeTable {
            sched_base: sched,
            rows: vec![
                FringeRow { delta_tau: 0.0, delta_phi: 0.0, report: Ok(PopulationReport { p_g: 1.0, ..Default::default() }) },
                FringeRow { delta_tau: 1e-5, delta_phi: 0.6, report: Err("step 3: norm, \"nan\"".into()) },
            ],
        };
        let csv = fringe_csv(&table, None);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), 10);
        assert_eq!(lines[1].split(',').count(), 10);
        assert!(lines[2].ends_with("\"step 3: norm, \"\"nan\"\"\""));
    }

    #[test]
    fn writer_records_outputs_in_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::with_required(19.0, 2.86, 4990.0).unwrap();
        let mut w = RunWriter::new(&dir.path().join("run")).unwrap();
        w.write("a.csv", "x\n1\n").unwrap();
        let path = w.finish("test", &cfg, serde_json::json!({"k": 1})).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(v["outputs"], serde_json::json!(["a.csv"]));
        assert_eq!(v["command"], "test");
        assert_eq!(v["config"]["lattice"]["r"], 19.0);
    }
}
