//! EM behavior on random data: monotone likelihood and exact K=1
//! moments, plus recovery of well-separated synthetic clusters.

use lipvsr_core::gmmhmm::{gmm_em, DEFAULT_VARIANCE_FLOOR_RATIO};
use lipvsr_core::rng::rng_from_seed;
use lipvsr_core::Mat;
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn em_loglik_never_decreases() {
    for seed in 0..10u64 {
        let mut rng = rng_from_seed(seed);
        let n = 40 + seed as usize * 7;
        let dim = 1 + (seed as usize % 3);
        let mut data = Mat::zeros(n, dim);
        for i in 0..n {
            for d in 0..dim {
                data.set(i, d, rng.random::<f64>() * 8.0 - 4.0);
            }
        }
        let k = 2 + (seed as usize % 3);
        let (_, trace) = gmm_em(&data, k, 20, seed, DEFAULT_VARIANCE_FLOOR_RATIO).unwrap();
        assert_eq!(trace.len(), 20);
        for w in trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-8,
                "seed {seed}: log-likelihood dropped {} -> {}",
                w[0],
                w[1]
            );
        }
    }
}

#[test]
fn single_component_is_exact_ml() {
    for seed in 0..10u64 {
        let mut rng = rng_from_seed(100 + seed);
        let n = 25;
        let dim = 3;
        let mut data = Mat::zeros(n, dim);
        for i in 0..n {
            for d in 0..dim {
                data.set(i, d, rng.random::<f64>() * 10.0 - 5.0);
            }
        }
        let (gmm, _) = gmm_em(&data, 1, 1, seed, DEFAULT_VARIANCE_FLOOR_RATIO).unwrap();
        for d in 0..dim {
            let mean: f64 = (0..n).map(|i| data.get(i, d)).sum::<f64>() / n as f64;
            let var: f64 =
                (0..n).map(|i| (data.get(i, d) - mean) * (data.get(i, d) - mean)).sum::<f64>()
                    / n as f64;
            assert!((gmm.means().get(0, d) - mean).abs() <= 1e-12, "seed {seed} dim {d}");
            assert!((gmm.variances().get(0, d) - var).abs() <= 1e-12, "seed {seed} dim {d}");
        }
        assert_eq!(gmm.weights(), &[1.0]);
    }
}

#[test]
fn separated_spherical_clusters_are_recovered() {
    let mut rng = rng_from_seed(42);
    let centers = [[-4.0, 0.0], [4.0, 1.0]];
    let noise = Normal::new(0.0, 0.4).unwrap();
    let n_each = 150;
    let mut data = Mat::zeros(2 * n_each, 2);
    for i in 0..2 * n_each {
        let c = centers[i % 2];
        data.set(i, 0, c[0] + noise.sample(&mut rng));
        data.set(i, 1, c[1] + noise.sample(&mut rng));
    }
    let (gmm, _) = gmm_em(&data, 2, 40, 7, DEFAULT_VARIANCE_FLOOR_RATIO).unwrap();

    let dist = |row: &[f64], c: [f64; 2]| -> f64 {
        ((row[0] - c[0]).powi(2) + (row[1] - c[1]).powi(2)).sqrt()
    };
    let m0 = gmm.means().row(0);
    let m1 = gmm.means().row(1);
    let direct = dist(m0, centers[0]).max(dist(m1, centers[1]));
    let crossed = dist(m0, centers[1]).max(dist(m1, centers[0]));
    assert!(direct.min(crossed) < 0.1, "means {m0:?} {m1:?}");
    for &w in gmm.weights() {
        assert!((w - 0.5).abs() < 0.05, "weights {:?}", gmm.weights());
    }
}
