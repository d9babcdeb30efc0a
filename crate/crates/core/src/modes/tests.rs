use super::*;
use crate::lattice::{curl, grad, ScalarField};
use crate::medium::{build_profile, Descriptor};
use core::f64::consts::PI;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_edge(g: Grid, rng: &mut ChaCha8Rng) -> VectorField {
    VectorField::from_values(g, Placement::Edge, (0..g.vector_len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn smooth(g: Grid, seed: u64) -> Arc<MediumProfile> {
    Arc::new(build_profile(&Descriptor::SmoothRandom { seed, eps_min: 1.0, eps_max: 4.0, terms: 6 }, g).unwrap())
}

#[test]
fn vacuum_plane_wave_has_discrete_symbol() {
    let g = Grid::cubic(8, 0.5).unwrap();
    let op = QOperator::new(MediumProfile::vacuum(g));
    let k = 2.0 * PI / g.lengths()[0];
    let wave = VectorField::from_fn(g, Placement::Edge, |a, r| if a == 1 { libm::cos(k * r[0]) } else { 0.0 });
    let out = apply_q(&op, &wave).unwrap();
    let s = g.spacing();
    let lambda = 4.0 * libm::sin(k * s / 2.0).powi(2) / (s * s);
    assert!(out.sub(&wave.scaled(lambda)).unwrap().max_abs() < 1e-12);
}

#[test]
fn gradient_fields_are_annihilated() {
    let g = Grid::cubic(6, 1.0).unwrap();
    let m = smooth(g, 1);
    let op = QOperator::new(m.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let psi = ScalarField::from_values(g, (0..g.cells()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let null = grad(&psi).weighted(m.sqrt_eps());
    assert!(apply_q(&op, &null).unwrap().max_abs() < 1e-12 * null.max_abs());
}

#[test]
fn matches_dense_curl_assembly_and_is_symmetric() {
    let g = Grid::cubic(4, 1.0).unwrap();
    let m = smooth(g, 2);
    let op = QOperator::new(m.clone());
    let n = g.vector_len();
    // dense curl from unit-vector responses
    let mut c = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = VectorField::zeros(g, Placement::Edge);
        e.values_mut()[j] = 1.0;
        c.set_column(j, &nalgebra::DVector::from_vec(curl(&e).unwrap().into_values()));
    }
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(m.inv_sqrt_eps().to_vec()));
    let qd = &d * c.transpose() * &c * &d;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = random_edge(g, &mut rng);
    let v = random_edge(g, &mut rng);
    let qu = apply_q(&op, &u).unwrap();
    let want = &qd * nalgebra::DVector::from_vec(u.values().to_vec());
    for (a, b) in qu.values().iter().zip(want.iter()) {
        assert!((a - b).abs() < 1e-12 * want.amax());
    }
    let lhs = qu.inner(&v).unwrap();
    let rhs = u.inner(&apply_q(&op, &v).unwrap()).unwrap();
    assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
}

#[test]
fn magnetic_variant_with_unit_mu_is_identical() {
    let g = Grid::cubic(5, 1.0).unwrap();
    let m = smooth(g, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = random_edge(g, &mut rng);
    let a = apply_q(&QOperator::new(m.clone()), &u).unwrap();
    let b = apply_q(&QOperator::magnetic(m.clone()), &u).unwrap();
    assert_eq!(a, b);
    let with_mu = Arc::new((*m).clone().with_mu(&Descriptor::Homogeneous { eps: 1.0 }).unwrap());
    let c = apply_q(&QOperator::magnetic(with_mu), &u).unwrap();
    assert_eq!(a, c);
}

#[test]
fn magnetic_variant_scales_with_mu() {
    let g = Grid::cubic(4, 1.0).unwrap();
    let m = MediumProfile::vacuum(g).with_mu(&Descriptor::Homogeneous { eps: 2.0 }).unwrap();
    let bank = dense_mode_bank(&QOperator::magnetic(m)).unwrap();
    let vac = dense_mode_bank(&QOperator::new(MediumProfile::vacuum(g))).unwrap();
    for (a, b) in bank.frequencies().iter().zip(vac.frequencies()) {
        assert!((a * libm::sqrt(2.0) - b).abs() < 1e-12 * b.max(1.0));
    }
    assert!(bank.report().max_wave_residual() < 1e-10);
}

#[test]
fn projection_properties() {
    let g = Grid::cubic(6, 1.0).unwrap();
    let m = smooth(g, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_edge(g, &mut rng);
    let p1 = project_transverse_g(&x, &m, 1e-12).unwrap();
    let p2 = project_transverse_g(&p1, &m, 1e-12).unwrap();
    assert!(p2.sub(&p1).unwrap().norm() <= 2e-12 * x.norm());
    let d = crate::lattice::div(&p1.weighted(m.sqrt_eps())).unwrap();
    assert!(d.norm() <= 1e-11 * p1.norm());

    let psi = ScalarField::from_values(g, (0..g.cells()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let null = grad(&psi).weighted(m.sqrt_eps());
    assert!(project_transverse_g(&null, &m, 1e-12).unwrap().norm() <= 1e-11 * null.norm());
}

#[test]
fn vacuum_lowest_shell_has_twelve_modes() {
    let g = Grid::cubic(8, 1.0).unwrap();
    let op = QOperator::new(MediumProfile::vacuum(g));
    let bank = solve_modes(&op, 12, 1e-9).unwrap();
    let want = 2.0 * libm::sin(PI / 8.0);
    for &w in bank.frequencies() {
        assert!((w - want).abs() < 1e-10 * want, "{w} vs {want}");
    }
    assert!(bank.gram_defect() < 1e-10);
    assert!(bank.report().max_wave_residual() < 1e-6);
    assert!(bank.report().max_divergence() < 1e-8);
    assert_eq!(bank.band_top(), bank.max_frequency());
}

#[test]
fn iterative_and_dense_agree_on_inhomogeneous_media() {
    let g = Grid::cubic(5, 1.0).unwrap();
    let op = QOperator::new(smooth(g, 6));
    let dense = dense_mode_bank(&op).unwrap();
    assert!(dense.is_complete());
    assert_eq!(dense.len(), 2 * g.cells() + 1);
    assert_eq!(&dense.frequencies()[..3], &[0.0; 3]);
    let it = solve_modes_with(&op, 20, &SolveOptions { tol: 1e-9, ..SolveOptions::default() }).unwrap();
    for (a, b) in it.frequencies().iter().zip(&dense.frequencies()[3..]) {
        assert!((a - b).abs() <= 1e-8 * b, "{a} vs {b}");
    }
    assert!(it.gram_defect() < 1e-9);
    assert!(dense.gram_defect() < 1e-10);
}

#[test]
fn residual_report_matches_and_detects_corruption() {
    let g = Grid::cubic(4, 1.0).unwrap();
    let bank = dense_mode_bank(&QOperator::new(smooth(g, 7))).unwrap();
    assert_eq!(&mode_residual_report(&bank), bank.report());
    let mut raw = bank.g_values().to_vec();
    let n = g.vector_len();
    raw[5 * n..6 * n].iter_mut().for_each(|v| *v *= 2.0);
    let bad = ModeBank::from_parts(bank.medium().clone(), bank.variant(), bank.frequencies().to_vec(), raw, bank.extent())
        .unwrap();
    assert!((bad.gram_defect() - 3.0).abs() < 1e-10);
}

#[test]
fn too_many_modes_is_rejected() {
    let g = Grid::cubic(4, 1.0).unwrap();
    let op = QOperator::new(MediumProfile::vacuum(g));
    assert_eq!(
        solve_modes(&op, 2 * 64 - 1, 1e-8).unwrap_err(),
        Error::TooManyModes { requested: 127, available: 126 }
    );
    assert!(solve_modes(&op, 0, 1e-8).is_err());
}
