mod common;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use qrbf_core::interpolation::{solve, InterpMatrix};
use qrbf_core::qcore::{kron, swap_operator, to_complex, CMatrix, CVector, PureState, C64};
use qrbf_core::qinvert::{
    invert_ideal, invert_quantized, perturbation_chain, sample_probability, swap_test, InversionConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Probability of reading 0 on the control after H, controlled swap, H.
fn swap_circuit(u: &PureState, v: &PureState) -> f64 {
    let n = u.dim();
    let h = CMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0)])
        * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let id = CMatrix::identity(n * n, n * n);
    let h_full = kron(&h, &id);
    let mut p0 = CMatrix::zeros(2, 2);
    p0[(0, 0)] = C64::new(1.0, 0.0);
    let mut p1 = CMatrix::zeros(2, 2);
    p1[(1, 1)] = C64::new(1.0, 0.0);
    let cswap = kron(&p0, &id) + kron(&p1, &to_complex(&swap_operator(n)));
    let mut start = CVector::zeros(2);
    start[0] = C64::new(1.0, 0.0);
    let psi = start.kronecker(&u.amplitudes().kronecker(v.amplitudes()));
    let out = &h_full * (&cswap * (&h_full * psi));
    out.rows(0, n * n).norm_squared()
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> PureState {
    PureState::normalized(CVector::from_fn(n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ideal_inversion_matches_classical(seed in any::<u64>(), m in 1usize..17, kappa in 1.0f64..1e3) {
        let (a, ev) = common::random_spd(seed, m, 1.0 / kappa, 1.0);
        let y = common::random_vector(seed, m);
        let r = invert_ideal(&a, &y, &InversionConfig::ideal()).unwrap();
        let c = solve(&InterpMatrix::from_dense(a.clone(), false), &y).unwrap();
        let fid: f64 = r.state_out.iter().zip(&c.c).map(|(s, c)| s * c).sum::<f64>().abs() / c.norm;
        prop_assert!(fid >= 1.0 - 1e-10);
        prop_assert!((r.c_norm_est - c.norm).abs() <= 1e-9 * c.norm);
        let lmin = r.eigvals[0];
        let lmax = r.eigvals[m - 1];
        prop_assert!((lmin - ev[0]).abs() <= 1e-10);
        prop_assert!(r.post_select_prob >= (lmin / lmax).powi(2) * (1.0 - 1e-12));
        prop_assert!(r.post_select_prob <= 1.0 + 1e-12);
        prop_assert!((r.f * r.f - r.post_select_prob).abs() <= 1e-15);
        let state_norm: f64 = r.state_out.iter().map(|v| v * v).sum();
        prop_assert!((state_norm - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn smaller_rotation_lowers_probability(seed in any::<u64>(), m in 1usize..8, frac in 0.05f64..1.0) {
        let (a, _) = common::random_spd(seed, m, 0.1, 1.0);
        let y = common::random_vector(seed, m);
        let full = invert_ideal(&a, &y, &InversionConfig::ideal()).unwrap();
        let cfg = InversionConfig { rotation: Some(frac * full.rotation), ..InversionConfig::ideal() };
        let part = invert_ideal(&a, &y, &cfg).unwrap();
        prop_assert!((part.post_select_prob - frac * frac * full.post_select_prob).abs() <= 1e-12);
        prop_assert!((part.c_norm_est - full.c_norm_est).abs() <= 1e-10 * full.c_norm_est);
        let lmax = full.eigvals[m - 1];
        prop_assert!(part.post_select_prob >= (part.rotation / lmax).powi(2) * (1.0 - 1e-12));
    }

    #[test]
    fn swap_test_matches_circuit(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_state(&mut rng, n);
        let v = random_state(&mut rng, n);
        prop_assert!((swap_test(&u, &v).unwrap() - swap_circuit(&u, &v)).abs() <= 1e-12);
    }

    #[test]
    fn quantized_report_is_consistent(seed in any::<u64>(), m in 1usize..5, bits in 3u32..8) {
        let (a, _) = common::random_spd(seed, m, 0.2, 1.0);
        let y = common::random_vector(seed, m);
        let t0 = 2.0 * PI * ((1u64 << bits) as f64 - 1.0);
        let r = invert_quantized(&a, &y, &InversionConfig::quantized(t0, bits)).unwrap();
        prop_assert!(r.post_select_prob > 0.0 && r.post_select_prob <= 1.0 + 1e-12);
        prop_assert!((r.f * r.f - r.post_select_prob).abs() <= 1e-15);
        prop_assert!(r.imaginary_residual <= 1e-10);
        let dev = r.deviation_from_ideal.unwrap();
        prop_assert!((0.0..=2.0).contains(&dev));
    }
}

#[test]
fn on_grid_spectra_stay_exact_as_clock_grows() {
    let q = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 2.0, 2.0, 2.0, -1.0, -1.0, 2.0, 2.0]) / 3.0;
    let a = &q * DMatrix::from_diagonal(&DVector::from_vec(vec![0.25, 0.5, 0.75])) * q.transpose();
    let y = [0.2, -0.5, 0.9];
    let mut prev = f64::INFINITY;
    for bits in 3..=8 {
        let t0 = 8.0 * PI * (1u64 << (bits - 3)) as f64;
        let r = invert_quantized(&a, &y, &InversionConfig::quantized(t0, bits)).unwrap();
        let dev = r.deviation_from_ideal.unwrap();
        assert!(dev <= 1e-10, "bits {bits}: {dev}");
        assert!(dev <= prev + 1e-12);
        prev = dev;
    }
}

#[test]
fn sampled_probability_covers_truth() {
    for &p in &[0.1, 0.5, 0.75, 0.93] {
        let covered = (0..100u64).filter(|&s| sample_probability(p, 100_000, s).unwrap().covers(p)).count();
        assert!(covered >= 97, "p {p}: {covered}");
    }
}

#[test]
fn perturbation_chain_on_random_perturbations() {
    for seed in 0..50u64 {
        let (a, _) = common::random_spd(seed, 6, 0.2, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let g = DMatrix::from_fn(6, 6, |_, _| rng.gen::<f64>() - 0.5);
        let e = (&g + g.transpose()) * 0.01;
        let y = common::random_vector(seed, 6);
        let r = perturbation_chain(&a, &(&a + e), &y).unwrap();
        assert!(r.holds(), "seed {seed}: {r:?}");
    }
}
