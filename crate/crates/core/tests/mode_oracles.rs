use std::f64::consts::PI;

use dielq_core::lattice::Grid;
use dielq_core::medium::{build_profile, Descriptor, Layer, MediumProfile};
use dielq_core::modes::{solve_modes, solve_modes_with, QOperator, SolveOptions};

/// Half trace of the one-period transfer matrix of the discrete 1D wave equation
/// `-(E[i+1] - 2 E[i] + E[i-1]) / s^2 = eps_i w^2 E[i]`.
fn half_trace(eps: &[f64], w: f64, s: f64) -> f64 {
    let (mut a, mut b, mut c, mut d) = (1.0, 0.0, 0.0, 1.0);
    for &e in eps {
        let t = 2.0 - e * w * w * s * s;
        (a, b, c, d) = (t * a - c, t * b - d, a, b);
    }
    0.5 * (a + d)
}

fn slab_medium() -> (MediumProfile, Vec<f64>) {
    let g = Grid::new([64, 1, 1], 1.0).unwrap();
    let layers = vec![Layer { thickness: 6.0, eps: 1.0 }, Layer { thickness: 2.0, eps: 13.0 }];
    let m = build_profile(&Descriptor::SlabStack { axis: 0, layers }, g).unwrap();
    // y-edge samples of one period, read back from the medium
    let n = g.cells();
    let period = m.eps()[n..n + 8].to_vec();
    (m, period)
}

#[test]
fn vacuum_lowest_shell_is_twelvefold() {
    let g = Grid::cubic(16, 1.0).unwrap();
    let bank = solve_modes(&QOperator::new(MediumProfile::vacuum(g)), 12, 1e-10).unwrap();
    let want = 2.0 * (PI / 16.0).sin();
    for &w in bank.frequencies() {
        assert!((w - want).abs() <= 1e-8 * want, "{w} vs {want}");
    }
    assert!((bank.band_top() - want).abs() <= 1e-8 * want);
    assert!(bank.gram_defect() < 1e-10);
    assert!(bank.report().max_divergence() < 1e-10);
}

#[test]
fn homogeneous_eps_halves_vacuum_frequencies() {
    let g = Grid::cubic(8, 0.5).unwrap();
    let vac = solve_modes(&QOperator::new(MediumProfile::vacuum(g)), 30, 1e-9).unwrap();
    let four = solve_modes(&QOperator::new(MediumProfile::homogeneous(g, 4.0).unwrap()), 30, 1e-9).unwrap();
    for (a, b) in vac.frequencies().iter().zip(four.frequencies()) {
        assert!((b - 0.5 * a).abs() <= 1e-10 * a, "{a} {b}");
    }
}

#[test]
fn slab_spectrum_obeys_the_transfer_matrix() {
    let (m, period) = slab_medium();
    assert_eq!(period, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 13.0, 13.0]);
    let bank = solve_modes(&QOperator::new(m), 126, 1e-10).unwrap();
    assert_eq!(bank.len(), 126);
    // an 8-period ring admits Bloch phases 2 pi j / 8 only
    let allowed: Vec<f64> = (0..=4).map(|j| (2.0 * PI * j as f64 / 8.0).cos()).collect();
    for &w in bank.frequencies() {
        let t = half_trace(&period, w, 1.0);
        let miss = allowed.iter().map(|c| (t - c).abs()).fold(f64::INFINITY, f64::min);
        assert!(miss < 1e-7, "w = {w}: half trace {t}");
    }
    // first gap: band edges where the half trace crosses -1
    let mut edges = Vec::new();
    let mut prev = half_trace(&period, 1e-6, 1.0).abs() > 1.0;
    let steps = 400_000;
    for i in 1..=steps {
        let w = 0.6 * i as f64 / steps as f64;
        let out = half_trace(&period, w, 1.0).abs() > 1.0;
        if out != prev {
            edges.push(w);
        }
        prev = out;
    }
    let (lo, hi) = (edges[0], edges[1]);
    let below = bank.frequencies().iter().cloned().filter(|&w| w < 0.5 * (lo + hi)).fold(0.0, f64::max);
    let above = bank.frequencies().iter().cloned().filter(|&w| w > 0.5 * (lo + hi)).fold(f64::INFINITY, f64::min);
    assert!((below - lo).abs() < 1e-5 * lo, "{below} vs {lo}");
    assert!((above - hi).abs() < 1e-5 * hi, "{above} vs {hi}");
}

#[test]
fn band_top_stops_below_a_cut_cluster() {
    let g = Grid::cubic(8, 1.0).unwrap();
    // the second vacuum shell holds 24 modes, so 20 cuts it
    let bank = solve_modes(&QOperator::new(MediumProfile::vacuum(g)), 20, 1e-9).unwrap();
    let first = 2.0 * (PI / 8.0).sin();
    assert!((bank.band_top() - first).abs() < 1e-8);
    let whole = solve_modes(&QOperator::new(MediumProfile::vacuum(g)), 36, 1e-9).unwrap();
    assert!((whole.band_top() - whole.max_frequency()).abs() < 1e-12);
}

#[test]
fn seeds_agree_on_an_inhomogeneous_medium() {
    let g = Grid::cubic(5, 1.0).unwrap();
    let m = build_profile(&Descriptor::SmoothRandom { seed: 9, eps_min: 1.0, eps_max: 4.0, terms: 6 }, g).unwrap();
    let op = QOperator::new(m);
    let a = solve_modes_with(&op, 24, &SolveOptions { seed: 1, ..SolveOptions::default() }).unwrap();
    let b = solve_modes_with(&op, 24, &SolveOptions { seed: 2, ..SolveOptions::default() }).unwrap();
    for (x, y) in a.frequencies().iter().zip(b.frequencies()) {
        assert!((x - y).abs() <= 1e-9 * x);
    }
}
