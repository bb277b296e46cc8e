use adiabat::diagnostics::{diagnose_sample, DEFAULT_MARGIN};
use adiabat::linalg::{
    hermitian_eigendecompose, inner, unitary_exponential, CMatrix, Complex, StateVector,
};
use adiabat::models::{random_hermitian, AnalyticSolution, ModelHandle, SchwingerParams};
use adiabat::propagator::{evolve, TimeGrid};
use adiabat::spectral::schwinger_analytic_frame;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn state(dim: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim).prop_map(|v| {
        StateVector::new(v.into_iter().map(|(re, im)| Complex::new(re, im)).collect()).unwrap()
    })
}

fn state_pair() -> impl Strategy<Value = (StateVector, StateVector)> {
    (2usize..=8).prop_flat_map(|d| (state(d), state(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_product_is_conjugate_symmetric((u, v) in state_pair()) {
        let uv = inner(&u, &v).unwrap();
        let vu = inner(&v, &u).unwrap();
        prop_assert!((uv - vu.conj()).norm() <= 1e-14);
        prop_assert!(inner(&u, &u).unwrap().im.abs() <= 1e-15);
    }

    #[test]
    fn exponentials_form_a_group(dim in 2usize..=6, seed: u64, s in -3.0f64..3.0, r in -3.0f64..3.0) {
        let h = random_hermitian(dim, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let us = unitary_exponential(&h, s).unwrap();
        let ur = unitary_exponential(&h, r).unwrap();
        let joint = unitary_exponential(&h, s + r).unwrap();
        let diff = us.compose(&ur).unwrap().matrix() - joint.matrix();
        prop_assert!(diff.max_abs() <= 1e-10);
        prop_assert!(us.unitarity_defect() <= 1e-12);
        let back = us.compose(&unitary_exponential(&h, -s).unwrap()).unwrap();
        prop_assert!(back.matrix().identity_deviation() <= 1e-12);
    }

    #[test]
    fn eigendecomposition_reconstructs(dim in 2usize..=10, seed: u64) {
        let h = random_hermitian(dim, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let es = hermitian_eigendecompose(&h).unwrap();
        prop_assert!((&es.reconstruct() - h.matrix()).max_abs() <= 1e-11);
        prop_assert!(es.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let v = CMatrix::from_fn(dim, |i, j| es.eigenvectors[j][i]).unwrap();
        prop_assert!(v.unitarity_defect() <= 1e-12);
        let trace: f64 = (0..dim).map(|i| h.matrix()[(i, i)].re).sum();
        prop_assert!((es.eigenvalues.iter().sum::<f64>() - trace).abs() <= 1e-11);
    }

    #[test]
    fn evolution_preserves_norm(dim in 2usize..=5, seed: u64, level in 0usize..2) {
        let model = ModelHandle::random_smooth(dim, seed).unwrap();
        let grid = TimeGrid::new(0.0, 2.0, 200).unwrap();
        let psi0 = StateVector::basis(dim, level).unwrap();
        let traj = evolve(&model, &psi0, &grid).unwrap();
        prop_assert!(traj.max_norm_error() <= 1e-12);
    }

    #[test]
    fn closed_form_inputs_satisfy_decomposition(
        omega in 0.0f64..12.0,
        theta in 0.0f64..std::f64::consts::PI,
        t in 0.0f64..50.0,
    ) {
        let p = SchwingerParams::new(1.0, omega, theta).unwrap();
        let sol = AnalyticSolution::new(p);
        let frame = schwinger_analytic_frame(&p, t);
        let s = diagnose_sample(&frame, &sol.state(t), sol.beta_ground(t), 0, t, DEFAULT_MARGIN).unwrap();
        prop_assert!(s.max_decomposition_residual() <= 1e-10);
        prop_assert!(s.lambda_residual <= 1e-10);
        prop_assert!(s.probability_error <= 1e-12);
        // first-order amplitude never exceeds twice the QAC ratio
        prop_assert!(s.schiff[1].unwrap().norm() <= 2.0 * s.qac[1].unwrap() + 1e-12);
    }
}
