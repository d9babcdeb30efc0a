use dielq_core::electrostatics::helmholtz_decompose;
use dielq_core::lattice::{curl, curl_t, div, div_face, grad, Grid, Placement, ScalarField, VectorField};
use dielq_core::medium::{build_profile, Descriptor, MediumProfile};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid_strategy() -> impl Strategy<Value = Grid> {
    ([1usize..7, 1usize..7, 1usize..7], 0.2f64..2.0).prop_map(|(d, s)| Grid::new(d, s).unwrap())
}

fn random_scalar(g: Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    ScalarField::from_values(g, (0..g.cells()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn random_vector(g: Grid, p: Placement, rng: &mut ChaCha8Rng) -> VectorField {
    VectorField::from_values(g, p, (0..g.vector_len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn smooth(g: Grid, seed: u64) -> MediumProfile {
    build_profile(&Descriptor::SmoothRandom { seed, eps_min: 1.0, eps_max: 5.0, terms: 5 }, g).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn compositions_vanish(g in grid_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_scalar(g, &mut rng);
        let v = random_vector(g, Placement::Edge, &mut rng);
        let w = random_vector(g, Placement::Face, &mut rng);
        let scale = 1.0 / (g.spacing() * g.spacing());
        prop_assert!(curl(&grad(&phi)).unwrap().max_abs() <= 1e-13 * scale);
        prop_assert!(div(&curl_t(&w).unwrap()).unwrap().max_abs() <= 1e-13 * scale);
        prop_assert!(div_face(&curl(&v).unwrap()).unwrap().max_abs() <= 1e-13 * scale);
    }

    #[test]
    fn adjoint_pairs(g in grid_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_scalar(g, &mut rng);
        let v = random_vector(g, Placement::Edge, &mut rng);
        let w = random_vector(g, Placement::Face, &mut rng);
        let lhs = grad(&phi).inner(&v).unwrap();
        let rhs = -phi.inner(&div(&v).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (grad(&phi).norm() * v.norm()).max(f64::MIN_POSITIVE));
        let lhs = curl(&v).unwrap().inner(&w).unwrap();
        let rhs = v.inner(&curl_t(&w).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (curl(&v).unwrap().norm() * w.norm()).max(f64::MIN_POSITIVE));
    }

    #[test]
    fn operators_are_linear(g in grid_strategy(), seed in any::<u64>(), a in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_vector(g, Placement::Edge, &mut rng);
        let v = random_vector(g, Placement::Edge, &mut rng);
        let mut comb = u.clone();
        comb.axpy(a, &v).unwrap();
        let mut want = curl(&u).unwrap();
        want.axpy(a, &curl(&v).unwrap()).unwrap();
        prop_assert!(curl(&comb).unwrap().sub(&want).unwrap().max_abs() <= 1e-12 * (1.0 + a.abs()) / g.spacing());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn decomposition_is_unique_and_stable(n in 3usize..7, seed in any::<u64>()) {
        let g = Grid::cubic(n, 0.7).unwrap();
        let m = smooth(g, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let x = random_vector(g, Placement::Edge, &mut rng);
        let d = helmholtz_decompose(&x, &m, 1e-12).unwrap();
        prop_assert!(d.x1.add(&d.x2).unwrap().sub(&x).unwrap().max_abs() <= 1e-12);
        prop_assert!(div(&d.x1).unwrap().norm() * g.spacing() <= 1e-9 * x.norm());
        let again = helmholtz_decompose(&d.x1, &m, 1e-12).unwrap();
        prop_assert!(again.x1.sub(&d.x1).unwrap().max_abs() <= 2e-10 * x.max_abs());
        prop_assert!(again.x2.max_abs() <= 2e-10 * x.max_abs());
        let grad_only = helmholtz_decompose(&d.x2, &m, 1e-12).unwrap();
        prop_assert!(grad_only.x1.max_abs() <= 2e-10 * x.max_abs());
    }
}

#[test]
fn eps_gradient_fields_are_purely_longitudinal() {
    let g = Grid::cubic(6, 1.0).unwrap();
    let m = smooth(g, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let psi = random_scalar(g, &mut rng);
    let x = grad(&psi).weighted(m.eps());
    let d = helmholtz_decompose(&x, &m, 1e-12).unwrap();
    assert!(d.x1.max_abs() <= 1e-9 * x.max_abs());
    let vac = helmholtz_decompose(&grad(&psi), &MediumProfile::vacuum(g), 1e-12).unwrap();
    assert!(vac.x1.max_abs() <= 1e-9 * grad(&psi).max_abs());
}
