//! Two-path interference model and fixed-frequency fringe fitting.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Leakage with each drive applied alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPathInputs {
    pub p_pm: f64,
    pub p_am: f64,
}

impl TwoPathInputs {
    pub fn new(p_pm: f64, p_am: f64) -> Result<Self> {
        for (name, v) in [("p_pm", p_pm), ("p_am", p_am)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter { name, reason: format!("{v} is not a probability") });
            }
        }
        Ok(Self { p_pm, p_am })
    }

    pub fn log2_ratio(&self) -> f64 {
        (self.p_pm / self.p_am).log2()
    }
}

/// `(sqrt(a) + sqrt(b))^2` and `(sqrt(a) - sqrt(b))^2`.
pub fn two_path_extrema(inp: TwoPathInputs) -> (f64, f64) {
    let a = inp.p_pm.sqrt();
    let b = inp.p_am.sqrt();
    ((a + b).powi(2), (a - b).powi(2))
}

pub fn visibility(p_max: f64, p_min: f64) -> Result<f64> {
    if !(p_max > 0.0) {
        return Err(Error::UndefinedVisibility);
    }
    Ok((p_max - p_min) / (p_max + p_min))
}

/// Model visibility `2 sqrt(rho) / (1 + rho)` with `rho = 2^log2_ratio`.
pub fn two_path_visibility_curve(log2_ratio: f64) -> f64 {
    // evaluated in the symmetric form so that f(x) == f(-x) bit for bit
    let half = 0.5 * log2_ratio.abs() * std::f64::consts::LN_2;
    1.0 / half.cosh()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub amplitude: f64,
    pub offset: f64,
    /// Phase of `cos(2 pi f t + phase)`, in `[0, 2 pi)`.
    pub phase: f64,
    /// Hz.
    pub fixed_freq: f64,
    pub residual_rms: f64,
}

impl FringeFit {
    pub fn evaluate(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (TAU * self.fixed_freq * t + self.phase).cos()
    }

    pub fn p_max(&self) -> f64 {
        self.offset + self.amplitude
    }

    pub fn p_min(&self) -> f64 {
        self.offset - self.amplitude
    }

    /// False when the fitted curve dips below zero.
    pub fn is_physical(&self) -> bool {
        self.offset >= self.amplitude
    }

    pub fn visibility(&self) -> Result<f64> {
        visibility(self.p_max(), self.p_min())
    }

    /// First `t >= 0` of the fitted minimum.
    pub fn minimum_time(&self) -> f64 {
        (PI - self.phase).rem_euclid(TAU) / (TAU * self.fixed_freq)
    }

    /// First `t >= 0` of the fitted maximum.
    pub fn maximum_time(&self) -> f64 {
        (-self.phase).rem_euclid(TAU) / (TAU * self.fixed_freq)
    }
}

/// Least-squares fit of `offset + amplitude cos(2 pi f t + phase)` with `f`
/// held fixed.
pub fn fit_fringe(samples: &[(f64, f64)], fixed_freq: f64) -> Result<FringeFit> {
    if samples.len() < 4 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    if !(fixed_freq > 0.0 && fixed_freq.is_finite()) {
        return Err(Error::InvalidParameter { name: "fixed_freq", reason: format!("{fixed_freq} Hz") });
    }
    let basis = |t: f64| {
        let w = TAU * fixed_freq * t;
        Vector3::new(1.0, w.cos(), -w.sin())
    };
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for &(t, p) in samples {
        let row = basis(t);
        ata += row * row.transpose();
        atb += row * p;
    }
    let scale = ata.norm();
    let chol = ata.cholesky().ok_or(Error::RankDeficient)?;
    let diag_min = chol.l_dirty().diagonal().min();
    if diag_min * diag_min < 1e-12 * scale {
        return Err(Error::RankDeficient);
    }
    let c = chol.solve(&atb);
    let amplitude = c[1].hypot(c[2]);
    let phase = if amplitude > 0.0 { c[2].atan2(c[1]).rem_euclid(TAU) } else { 0.0 };
    let sse: f64 = samples.iter().map(|&(t, p)| (p - basis(t).dot(&c)).powi(2)).sum();
    Ok(FringeFit {
        amplitude,
        offset: c[0],
        phase,
        fixed_freq,
        residual_rms: (sse / samples.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn extrema_examples() {
        let (hi, lo) = two_path_extrema(TwoPathInputs::new(0.04, 0.04).unwrap());
        assert!(close(hi, 0.16, 1e-15) && close(lo, 0.0, 1e-15));
        let (hi, lo) = two_path_extrema(TwoPathInputs::new(0.09, 0.01).unwrap());
        assert!(close(hi, 0.16, 1e-15) && close(lo, 0.04, 1e-15));
        let (hi, lo) = two_path_extrema(TwoPathInputs::new(0.07, 0.0).unwrap());
        assert_eq!((hi, lo), (0.07, 0.07));
        assert!(TwoPathInputs::new(1.2, 0.0).is_err());
    }

    #[test]
    fn visibility_examples() {
        assert_eq!(visibility(0.16, 0.0).unwrap(), 1.0);
        assert!(close(visibility(0.16, 0.04).unwrap(), 0.6, 1e-15));
        assert_eq!(visibility(0.1, 0.1).unwrap(), 0.0);
        assert!(matches!(visibility(0.0, 0.0), Err(Error::UndefinedVisibility)));
    }

    #[test]
    fn curve_examples() {
        assert_eq!(two_path_visibility_curve(0.0), 1.0);
        assert!(close(two_path_visibility_curve(2.0), 0.8, 1e-15));
        for x in [0.5, 1.0, 3.0] {
            assert_eq!(two_path_visibility_curve(x), two_path_visibility_curve(-x));
        }
    }

    #[test]
    fn fit_recovers_noiseless_cosine() {
        let f = 2.0 * 4990.0;
        let period = 1.0 / f;
        let samples: Vec<_> = (0..16)
            .map(|i| {
                let t = i as f64 * period / 16.0;
                (t, 0.1 + 0.06 * (TAU * f * t + PI).cos())
            })
            .collect();
        let fit = fit_fringe(&samples, f).unwrap();
        assert!(close(fit.offset, 0.1, 1e-10));
        assert!(close(fit.amplitude, 0.06, 1e-10));
        assert!(close(fit.phase, PI, 1e-10));
        assert!(fit.residual_rms < 1e-12);
        assert!(close(fit.minimum_time(), 0.0, 1e-12 * period) || close(fit.minimum_time(), period, 1e-12 * period));
        assert!(close(fit.maximum_time(), period / 2.0, 1e-9 * period));
        assert!(fit.is_physical());
    }

    #[test]
    fn fit_of_constant_samples() {
        let samples: Vec<_> = (0..10).map(|i| (i as f64 * 1e-5, 0.3)).collect();
        let fit = fit_fringe(&samples, 10_000.0).unwrap();
        assert!(fit.amplitude < 1e-12);
        assert!(close(fit.offset, 0.3, 1e-12));
    }

    #[test]
    fn fit_detects_wrong_frequency() {
        let f = 9980.0;
        let samples: Vec<_> = (0..32)
            .map(|i| {
                let t = i as f64 * 2.0 / f / 32.0;
                (t, 0.1 + 0.06 * (TAU * 1.05 * f * t).cos())
            })
            .collect();
        let fit = fit_fringe(&samples, f).unwrap();
        assert!(fit.residual_rms > 1e-3, "rms {}", fit.residual_rms);
    }

    #[test]
    fn fit_errors() {
        let few = [(0.0, 0.1), (1e-5, 0.2), (2e-5, 0.1)];
        assert!(matches!(fit_fringe(&few, 1e4), Err(Error::TooFewSamples(3))));
        let same = [(1e-5, 0.1), (1e-5, 0.2), (1e-5, 0.1), (1e-5, 0.3)];
        assert!(matches!(fit_fringe(&same, 1e4), Err(Error::RankDeficient)));
    }

    proptest! {
        #[test]
        fn extrema_then_visibility_matches_curve(a in 1e-6f64..1.0, b in 1e-6f64..1.0) {
            let inp = TwoPathInputs::new(a, b).unwrap();
            let (hi, lo) = two_path_extrema(inp);
            let v = visibility(hi, lo).unwrap();
            prop_assert!((v - two_path_visibility_curve(inp.log2_ratio())).abs() < 1e-12);
        }

        #[test]
        fn equal_paths_are_fully_visible(x in 1e-9f64..1.0) {
            let (hi, lo) = two_path_extrema(TwoPathInputs::new(x, x).unwrap());
            prop_assert!((visibility(hi, lo).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn curve_is_symmetric_and_bounded(x in -20f64..20.0) {
            let v = two_path_visibility_curve(x);
            prop_assert_eq!(v, two_path_visibility_curve(-x));
            prop_assert!(v > 0.0 && v <= 1.0);
        }

        #[test]
        fn residual_is_orthogonal_to_basis(
            ps in proptest::collection::vec(0.0f64..1.0, 6..40),
            jitter in 0.0f64..1.0,
        ) {
            let f = 9980.0;
            let samples: Vec<_> = ps
                .iter()
                .enumerate()
                .map(|(i, &p)| ((i as f64 + 0.3 * jitter) / (ps.len() as f64 * f), p))
                .collect();
            let fit = fit_fringe(&samples, f).unwrap();
            let mut dots = [0.0; 3];
            for &(t, p) in &samples {
                let w = TAU * f * t;
                let r = p - fit.evaluate(t);
                dots[0] += r;
                dots[1] += r * w.cos();
                dots[2] += r * w.sin();
            }
            for d in dots {
                prop_assert!(d.abs() < 1e-10, "{:?}", dots);
            }
        }
    }
}
