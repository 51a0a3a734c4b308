//! Symmetric eigendecomposition via the cyclic Jacobi method.
//!
//! The matrices here are small (k² × k² patch scatters, 49×49 at the
//! default patch size), so Jacobi is plenty fast and, unlike iterative
//! Krylov solvers, has no tuning knobs that could perturb determinism.

use crate::mat::Mat;
use crate::math;
use alloc::vec;
use alloc::vec::Vec;

/// Eigendecomposition of a symmetric matrix.
///
/// Returns `(eigenvalues, eigenvectors)` where column `j` of the matrix is
/// the eigenvector for `eigenvalues[j]`, sorted by descending eigenvalue.
/// Ties keep the order in which the Jacobi sweep produced them.
pub fn symmetric_eigen(sym: &Mat) -> (Vec<f64>, Mat) {
    let n = sym.rows();
    assert_eq!(n, sym.cols(), "matrix must be square");
    let mut a = sym.clone();
    let mut v = Mat::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }

    let norm: f64 = sym.data().iter().map(|x| x * x).sum::<f64>();
    let tol = 1e-28 * norm.max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                off += apq * apq;
            }
        }
        if off * 2.0 <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                // Stable tangent of the rotation angle.
                let t = if theta >= 0.0 {
                    1.0 / (theta + math::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + math::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = t * c;

                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let eigs: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    order.sort_by(|&i, &j| eigs[j].partial_cmp(&eigs[i]).unwrap());

    let mut values = vec![0.0; n];
    let mut vectors = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eigs[src];
        for k in 0..n {
            vectors.set(k, dst, v.get(k, src));
        }
    }
    (values, vectors)
}
