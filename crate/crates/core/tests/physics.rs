mod common;

use std::f64::consts::PI;

use common::Numerov;
use proptest::prelude::*;
use washboard::analytic::fit_fringe;
use washboard::lattice::REFERENCE_DRIVE_HZ;
use washboard::propagator::{propagate, PropagationConfig};
use washboard::stationary::{solve_static, BoxSpectrum};
use washboard::{DriveSchedule, LatticeParams, SpectralGrid};

fn params(r: f64) -> LatticeParams {
    LatticeParams::reference().with_depth(r).unwrap()
}

#[test]
fn shooting_oracle_reproduces_free_box() {
    let zero = |_: f64| 0.0;
    let oracle = Numerov { a: 0.0, b: PI, intervals: 2000, potential: &zero };
    for n in 0..4 {
        let e = oracle.eigenvalue(n, 0.0, 30.0);
        let exact = ((n + 1) * (n + 1)) as f64;
        assert!((e - exact).abs() < 1e-8, "level {n}: {e}");
    }
}

#[test]
fn qubit_ground_energy_matches_oracle() {
    let grid = SpectralGrid::auto(9, 64).unwrap();
    for r in [15.0, 22.0] {
        let p = params(r);
        let basis = solve_static(&p, &grid).unwrap();
        let spec = BoxSpectrum::solve(&p, grid.x_min(), grid.n_wells(), 32, 2.0 * r).unwrap();
        let index = (0..spec.len()).position(|a| (spec.energies[a] - basis.ground().energy).abs() < 1e-9).unwrap();
        let v = common::washboard(r, p.s);
        let oracle = Numerov { a: grid.x_min(), b: grid.x_max(), intervals: 4096, potential: &v };
        let e = oracle.eigenvalue(index, basis.ground().energy - 0.5, basis.ground().energy + 0.5);
        assert!((e - basis.ground().energy).abs() < 1e-4, "r = {r}: {e} vs {}", basis.ground().energy);
    }
}

#[test]
fn ground_state_sits_at_tilted_minimum() {
    let grid = SpectralGrid::auto(9, 64).unwrap();
    let p = params(19.0);
    let basis = solve_static(&p, &grid).unwrap();
    let psi = &basis.ground().wavefunction;
    let dx = grid.dx();
    let mean: f64 = grid.x().iter().zip(psi.amplitudes()).map(|(x, a)| x * a.norm_sqr()).sum::<f64>() * dx;
    let x0 = common::minimum_offset(19.0, p.s);
    assert!((mean - x0).abs() < 0.05, "{mean} vs {x0}");
}

#[test]
fn harmonic_estimate_brackets_splitting() {
    let grid = SpectralGrid::auto(9, 64).unwrap();
    for r in [15.0, 19.0, 25.0] {
        let split = solve_static(&params(r), &grid).unwrap().qubit_splitting();
        let harmonic = 2.0 * r.sqrt();
        assert!(split < harmonic && split > harmonic - 1.5, "r = {r}: {split} vs {harmonic}");
    }
}

#[test]
fn absorbed_and_remaining_norm_sum_to_one() {
    let grid = SpectralGrid::auto(9, 64).unwrap();
    let p = params(19.0);
    let basis = solve_static(&p, &grid).unwrap();
    let sched = DriveSchedule::new(0.1, 0.1, 2.0 * PI * REFERENCE_DRIVE_HZ, 2, 1e-5).unwrap();
    let cfg = PropagationConfig::for_schedule(&sched, 128).unwrap();
    let res = propagate(&basis.ground().wavefunction, &p, &sched, &cfg).unwrap();
    let total = res.final_state.norm_sqr() + res.absorbed_norm;
    assert!((total - 1.0).abs() < 1e-9, "{total}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fit_phase_agrees_with_brute_force(
        offset in 0.1f64..0.6,
        amp in 0.01f64..0.1,
        phase in 0.0f64..(2.0 * PI),
        noise_seed in 0u64..1000,
    ) {
        let f = 9980.0;
        let samples: Vec<(f64, f64)> = (0..12)
            .map(|i| {
                let t = i as f64 / (12.0 * f);
                let noise = 0.002 * amp * (((noise_seed + i) as f64 * 1.618).sin());
                (t, offset + amp * (2.0 * PI * f * t + phase).cos() + noise)
            })
            .collect();
        let fit = fit_fringe(&samples, f).unwrap();
        let brute = common::brute_force_phase(&samples, 2.0 * PI * f);
        let d = (fit.phase - brute).rem_euclid(2.0 * PI);
        prop_assert!(d.min(2.0 * PI - d) < 1e-3, "fit {} brute {}", fit.phase, brute);
    }
}
