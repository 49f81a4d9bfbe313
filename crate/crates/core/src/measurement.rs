//! Projection of propagated states onto the static basis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::WaveState;
use crate::propagator::PropagationResult;
use crate::stationary::{overlap, StateBasis};

/// Leakage below this is treated as zero by [`branching_ratio`].
pub const LEAKAGE_FLOOR: f64 = 1e-10;

pub const CSV_HEADER: &str = "P_g,P_e,P_L,leak_intra,leak_inter,leak_absorbed";

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PopulationReport {
    #[serde(rename = "P_g")]
    pub p_g: f64,
    #[serde(rename = "P_e")]
    pub p_e: f64,
    /// Everything outside the qubit pair, `1 - P_g - P_e`.
    #[serde(rename = "P_L")]
    pub p_l: f64,
    /// Higher localized states of the central well.
    pub leak_intra: f64,
    /// Other wells plus anything no localized state captures.
    pub leak_inter: f64,
    /// Norm removed by the absorber.
    pub leak_absorbed: f64,
}

impl PopulationReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.p_g, self.p_e, self.p_l, self.leak_intra, self.leak_inter, self.leak_absorbed
        )
    }

    pub fn fields(&self) -> [f64; 6] {
        [self.p_g, self.p_e, self.p_l, self.leak_intra, self.leak_inter, self.leak_absorbed]
    }

    /// Weighted arithmetic mean of each field; weights are normalized here.
    pub fn weighted_mean(items: &[(f64, PopulationReport)]) -> Result<Self> {
        let total: f64 = items.iter().map(|(w, _)| w).sum();
        if items.is_empty() || !(total > 0.0) {
            return Err(Error::InvalidParameter { name: "weights", reason: "need a positive total weight".into() });
        }
        let mut acc = [0.0; 6];
        for (w, r) in items {
            for (a, f) in acc.iter_mut().zip(r.fields()) {
                *a += w / total * f;
            }
        }
        Ok(Self {
            p_g: acc[0],
            p_e: acc[1],
            p_l: acc[2],
            leak_intra: acc[3],
            leak_inter: acc[4],
            leak_absorbed: acc[5],
        })
    }

    pub fn branching_ratio(&self) -> f64 {
        branching_ratio(self)
    }
}

pub fn measure(result: &PropagationResult, basis: &StateBasis) -> Result<PopulationReport> {
    measure_state(&result.final_state, result.absorbed_norm, basis)
}

/// Populations of `psi`, counting `absorbed` as norm that already left the grid.
pub fn measure_state(psi: &WaveState, absorbed: f64, basis: &StateBasis) -> Result<PopulationReport> {
    if !psi.grid().same_as(basis.grid()) {
        return Err(Error::GridMismatch);
    }
    let pop = |i: usize| overlap(psi, i, basis).map(|z| z.norm_sqr());
    let p_g = pop(basis.qubit_ground())?.clamp(0.0, 1.0);
    let p_e = pop(basis.qubit_excited())?.clamp(0.0, 1.0 - p_g);
    let p_l = 1.0 - p_g - p_e;
    let mut leak_intra = 0.0;
    for (i, s) in basis.states().iter().enumerate() {
        if s.well_index == 0 && s.intra_well_rank >= 2 {
            leak_intra += pop(i)?;
        }
    }
    let leak_absorbed = absorbed.clamp(0.0, p_l);
    let leak_intra = leak_intra.clamp(0.0, p_l - leak_absorbed);
    let leak_inter = (p_l - leak_intra - leak_absorbed).max(0.0);
    Ok(PopulationReport { p_g, p_e, p_l, leak_intra, leak_inter, leak_absorbed })
}

/// `P_e / P_L`, or `+inf` when `P_L` is below [`LEAKAGE_FLOOR`].
pub fn branching_ratio(report: &PopulationReport) -> f64 {
    if report.p_l < LEAKAGE_FLOOR {
        f64::INFINITY
    } else {
        report.p_e / report.p_l
    }
}
