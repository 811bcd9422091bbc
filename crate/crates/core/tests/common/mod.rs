#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use qrbf_core::interpolation::DataSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `m` sites uniform in `[lo, hi]^d`, pairwise at least `min_sep` apart,
/// with uniform values in `[-1, 1]`.
pub fn random_dataset(seed: u64, m: usize, d: usize, lo: f64, hi: f64, min_sep: f64) -> DataSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sites: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut attempts = 0;
    while sites.len() < m {
        attempts += 1;
        assert!(attempts < 100_000, "cannot place {m} sites {min_sep} apart");
        let p: Vec<f64> = (0..d).map(|_| rng.gen_range(lo..hi)).collect();
        let far = sites.iter().all(|s| {
            s.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= min_sep
        });
        if far {
            sites.push(p);
        }
    }
    let values = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DataSet::new(sites, values).unwrap()
}

/// Random orthogonal conjugate of a diagonal with entries in `[lo, hi]`.
pub fn random_spd(seed: u64, m: usize, lo: f64, hi: f64) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(m, m, |_, _| rng.gen::<f64>() - 0.5);
    let q = g.qr().q();
    let mut ev: Vec<f64> = (0..m).map(|_| rng.gen_range(lo..hi)).collect();
    ev.sort_by(f64::total_cmp);
    let a = &q * DMatrix::from_diagonal(&DVector::from_column_slice(&ev)) * q.transpose();
    ((&a + a.transpose()) * 0.5, ev)
}

pub fn random_vector(seed: u64, m: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect()
}
