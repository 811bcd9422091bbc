//! Synthetic datasets and query points.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use qrbf_core::interpolation::DataSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

/// Sites closer than this count as coincident.
pub const MIN_SEPARATION: f64 = 1e-9;
const ATTEMPTS_PER_SITE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// Franke's blend of four Gaussian bumps.
    #[default]
    Franke,
    /// `prod_k cos(2 pi u_k)`.
    Cosine,
    Constant,
}

impl Target {
    /// Value at `u`, a point of the unit cube. Franke uses `u_1` and the mean
    /// of the remaining coordinates (or `u_1` again in one dimension).
    pub fn eval(self, u: &[f64]) -> f64 {
        match self {
            Target::Franke => {
                let x = 9.0 * u[0];
                let y = 9.0 * if u.len() > 1 { u[1..].iter().sum::<f64>() / (u.len() - 1) as f64 } else { u[0] };
                0.75 * (-((x - 2.0).powi(2) + (y - 2.0).powi(2)) / 4.0).exp()
                    + 0.75 * (-(x + 1.0).powi(2) / 49.0 - (y + 1.0) / 10.0).exp()
                    + 0.5 * (-((x - 7.0).powi(2) + (y - 3.0).powi(2)) / 4.0).exp()
                    - 0.2 * (-(x - 4.0).powi(2) - (y - 7.0).powi(2)).exp()
            }
            Target::Cosine => u.iter().map(|v| (2.0 * PI * v).cos()).product(),
            Target::Constant => 1.0,
        }
    }
}

fn unit(x: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    x.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// `m` distinct sites uniform in `[lo, hi]^d` with values from `target`.
pub fn gen_data(m: usize, d: usize, lo: f64, hi: f64, seed: u64, target: Target) -> Result<DataSet> {
    if m == 0 || d == 0 {
        return Err(HarnessError::Config("gen_data needs m >= 1 and d >= 1".into()));
    }
    if !lo.is_finite() || !hi.is_finite() || hi <= lo {
        return Err(HarnessError::Config(format!("empty box [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limit = ATTEMPTS_PER_SITE * m;
    let mut sites: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut attempts = 0;
    while sites.len() < m {
        if attempts == limit {
            return Err(HarnessError::Placement { m, attempts });
        }
        attempts += 1;
        let p: Vec<f64> = (0..d).map(|_| rng.gen_range(lo..=hi)).collect();
        let clear = sites
            .iter()
            .all(|s| s.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= MIN_SEPARATION);
        if clear {
            sites.push(p);
        }
    }
    let values = sites.iter().map(|s| target.eval(&unit(s, lo, hi))).collect();
    Ok(DataSet::new(sites, values)?)
}

/// `count` uniform points in the bounding box of the dataset.
pub fn random_queries(dataset: &DataSet, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = dataset.dim();
    let (mut lo, mut hi) = (vec![f64::INFINITY; d], vec![f64::NEG_INFINITY; d]);
    for site in dataset.sites() {
        for k in 0..d {
            lo[k] = lo[k].min(site[k]);
            hi[k] = hi[k].max(site[k]);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    (0..count).map(|_| (0..d).map(|k| lo[k] + (hi[k] - lo[k]) * rng.gen::<f64>()).collect()).collect()
}

/// Reads query points from a CSV with header `x1,...,xd`; a trailing `y`
/// column is ignored, so dataset files double as query files.
pub fn read_queries<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut cols = headers.len();
    if cols > 0 && &headers[cols - 1] == "y" {
        cols -= 1;
    }
    if cols == 0 {
        return Err(HarnessError::Config("query file has no coordinate columns".into()));
    }
    for (k, h) in headers.iter().take(cols).enumerate() {
        if h != format!("x{}", k + 1) {
            return Err(HarnessError::Config(format!("query column {} should be x{}, got {h}", k + 1, k + 1)));
        }
    }
    let mut points = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let point: std::result::Result<Vec<f64>, _> = record.iter().take(cols).map(str::parse::<f64>).collect();
        points.push(point.map_err(|e| HarnessError::Config(format!("query row {}: {e}", row + 1)))?);
    }
    Ok(points)
}

pub fn read_query_file(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    read_queries(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target() {
        let ds = gen_data(10, 3, -1.0, 1.0, 4, Target::Constant).unwrap();
        assert!(ds.values().iter().all(|&y| y == 1.0));
    }

    #[test]
    fn same_seed_same_file() {
        let a = gen_data(30, 2, 0.0, 1.0, 11, Target::Franke).unwrap();
        let b = gen_data(30, 2, 0.0, 1.0, 11, Target::Franke).unwrap();
        let (mut wa, mut wb) = (Vec::new(), Vec::new());
        a.to_writer(&mut wa).unwrap();
        b.to_writer(&mut wb).unwrap();
        assert_eq!(wa, wb);
        let c = gen_data(30, 2, 0.0, 1.0, 12, Target::Franke).unwrap();
        assert_ne!(c, a);
    }

    #[test]
    fn hundred_distinct_finite_rows() {
        let ds = gen_data(100, 2, 0.0, 1.0, 3, Target::Cosine).unwrap();
        assert_eq!(ds.len(), 100);
        assert!(ds.min_separation() >= MIN_SEPARATION);
        assert!(ds.values().iter().all(|y| y.is_finite()));
        assert!(ds.sites().iter().flatten().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn tiny_box_fails() {
        assert!(matches!(gen_data(3, 1, 0.0, 1e-12, 0, Target::Franke), Err(HarnessError::Placement { .. })));
        assert!(gen_data(3, 1, 1.0, 1.0, 0, Target::Franke).is_err());
        assert!(gen_data(0, 1, 0.0, 1.0, 0, Target::Franke).is_err());
    }

    #[test]
    fn franke_reference_values() {
        // Franke's function at the origin and at the centre of the square.
        let f0 = 0.75 * (-8.0f64 / 4.0).exp() + 0.75 * (-1.0f64 / 49.0 - 0.1).exp() + 0.5 * (-58.0f64 / 4.0).exp()
            - 0.2 * (-65.0f64).exp();
        assert!((Target::Franke.eval(&[0.0, 0.0]) - f0).abs() < 1e-15);
        assert!((Target::Franke.eval(&[0.5, 0.5]) - 0.325762089).abs() < 1e-9);
        assert_eq!(Target::Cosine.eval(&[0.5, 0.0]), -1.0);
    }

    #[test]
    fn query_file_accepts_dataset_layout() {
        let ds = gen_data(4, 2, 0.0, 1.0, 1, Target::Franke).unwrap();
        let mut buf = Vec::new();
        ds.to_writer(&mut buf).unwrap();
        let q = read_queries(buf.as_slice()).unwrap();
        assert_eq!(q, ds.sites());
        let q = read_queries("x1\n0.5\n0.25\n".as_bytes()).unwrap();
        assert_eq!(q, vec![vec![0.5], vec![0.25]]);
        assert!(read_queries("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn queries_stay_in_bounding_box() {
        let ds = gen_data(20, 3, 0.0, 2.0, 5, Target::Cosine).unwrap();
        for q in random_queries(&ds, 50, 5) {
            for (k, v) in q.iter().enumerate() {
                let col = ds.sites().iter().map(|s| s[k]);
                let lo = col.clone().fold(f64::INFINITY, f64::min);
                let hi = col.fold(f64::NEG_INFINITY, f64::max);
                assert!(*v >= lo && *v <= hi);
            }
        }
    }
}
