//! Tandem observations: floored log-posteriors with delta and
//! acceleration regression coefficients, plus multi-view fusion.
//!
//! Fusion concatenates the per-view log-posteriors first and runs a
//! single delta/acceleration pass over the stacked columns. Delta is
//! linear, so this equals per-view delta followed by concatenation; the
//! composed form is fixed here so outputs stay byte-identical.

use crate::mat::Mat;
use crate::math;
use crate::{Error, Result};
use alloc::format;
use alloc::vec::Vec;

/// Default floor applied before the log; 32-bit round-trips can
/// underflow a softmax output to exactly zero.
pub const DEFAULT_FLOOR: f64 = 1e-8;

/// Default regression window (two frames each side).
pub const DEFAULT_WINDOW: usize = 2;

/// log(max(p, floor)) per entry. Posteriors must be non-negative.
pub fn log_features(posteriors: &Mat, floor: f64) -> Result<Mat> {
    if !(floor > 0.0) {
        return Err(Error::InvalidArgument(format!("floor must be positive, got {floor}")));
    }
    let mut out = Mat::zeros(posteriors.rows(), posteriors.cols());
    for t in 0..posteriors.rows() {
        let src = posteriors.row(t);
        let dst = out.row_mut(t);
        for (k, &p) in src.iter().enumerate() {
            if !(p >= 0.0) {
                return Err(Error::ValueOutOfRange(format!(
                    "posterior ({t},{k}) = {p} is negative or NaN"
                )));
            }
            dst[k] = math::ln(p.max(floor));
        }
    }
    Ok(out)
}

/// HTK-style regression coefficients over a ±Θ window with edge
/// replication:
///
/// d_t = Σ_{θ=1..Θ} θ·(c_{t+θ} − c_{t−θ}) / (2·Σ_{θ} θ²)
pub fn delta(seq: &Mat, window: usize) -> Result<Mat> {
    if window == 0 {
        return Err(Error::InvalidArgument("regression window must be ≥ 1".into()));
    }
    let t_len = seq.rows();
    let k_len = seq.cols();
    if t_len == 0 {
        return Err(Error::InvalidArgument("empty sequence".into()));
    }
    let denom: f64 = 2.0 * (1..=window).map(|th| (th * th) as f64).sum::<f64>();
    let clamp = |t: isize| -> usize { t.clamp(0, t_len as isize - 1) as usize };
    let mut out = Mat::zeros(t_len, k_len);
    for t in 0..t_len {
        let dst = out.row_mut(t);
        for th in 1..=window {
            let ahead = seq.row(clamp(t as isize + th as isize));
            let behind = seq.row(clamp(t as isize - th as isize));
            let w = th as f64;
            for k in 0..k_len {
                dst[k] += w * (ahead[k] - behind[k]);
            }
        }
        for v in dst.iter_mut() {
            *v /= denom;
        }
    }
    Ok(out)
}

/// Full tandem observation: columns `[log-post | delta | accel]`,
/// M = 3·C for a single view.
pub fn assemble(posteriors: &Mat, floor: f64, window: usize) -> Result<Mat> {
    let logs = log_features(posteriors, floor)?;
    let d = delta(&logs, window)?;
    let a = delta(&d, window)?;
    Ok(Mat::hcat(&[&logs, &d, &a]))
}

/// Multi-view fusion: stacks per-view log-posteriors column-wise in the
/// given order, then runs one delta/acceleration pass. M = 3·C·V.
pub fn concat_views(views: &[&Mat], floor: f64, window: usize) -> Result<Mat> {
    let first = *views
        .first()
        .ok_or_else(|| Error::InvalidArgument("no views given".into()))?;
    for (v, m) in views.iter().enumerate() {
        if m.rows() != first.rows() {
            return Err(Error::LengthMismatch(format!(
                "view 0 has {} frames but view {v} has {}",
                first.rows(),
                m.rows()
            )));
        }
    }
    let per_view: Vec<Mat> = views
        .iter()
        .map(|m| log_features(m, floor))
        .collect::<Result<_>>()?;
    let refs: Vec<&Mat> = per_view.iter().collect();
    let logs = Mat::hcat(&refs);
    let d = delta(&logs, window)?;
    let a = delta(&d, window)?;
    Ok(Mat::hcat(&[&logs, &d, &a]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::abs;

    fn uniform_posteriors(t: usize, c: usize) -> Mat {
        let mut m = Mat::zeros(t, c);
        let p = 1.0 / c as f64;
        for r in 0..t {
            m.row_mut(r).fill(p);
        }
        m
    }

    #[test]
    fn log_features_known_values() {
        let mut p = Mat::zeros(1, 3);
        p.set(0, 0, 1.0);
        p.set(0, 1, 0.0);
        p.set(0, 2, 0.5);
        let l = log_features(&p, DEFAULT_FLOOR).unwrap();
        assert_eq!(l.get(0, 0), 0.0);
        assert!(abs(l.get(0, 1) - math::ln(1e-8)) < 1e-12);
        assert!(abs(l.get(0, 2) + core::f64::consts::LN_2) < 1e-12);

        let u = log_features(&uniform_posteriors(4, 28), DEFAULT_FLOOR).unwrap();
        for t in 0..4 {
            for k in 0..28 {
                assert!(abs(u.get(t, k) + math::ln(28.0)) < 1e-12);
            }
        }
    }

    #[test]
    fn log_features_rejects_negative() {
        let mut p = Mat::zeros(1, 2);
        p.set(0, 1, -0.1);
        assert!(matches!(
            log_features(&p, DEFAULT_FLOOR),
            Err(Error::ValueOutOfRange(_))
        ));
    }

    #[test]
    fn constant_sequence_has_zero_delta() {
        let mut m = Mat::zeros(5, 3);
        for t in 0..5 {
            m.row_mut(t).copy_from_slice(&[2.0, -1.0, 0.25]);
        }
        let d = delta(&m, DEFAULT_WINDOW).unwrap();
        assert!(d.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_delta_is_unit_slope_inside() {
        let mut m = Mat::zeros(9, 1);
        for t in 0..9 {
            m.set(t, 0, t as f64);
        }
        let d = delta(&m, 2).unwrap();
        // Interior: (1·2 + 2·4)/10 = 1.
        for t in 2..7 {
            assert!(abs(d.get(t, 0) - 1.0) < 1e-12);
        }
        // Replicated edges, hand-evaluated.
        assert!(abs(d.get(0, 0) - 0.5) < 1e-12);
        assert!(abs(d.get(1, 0) - 0.8) < 1e-12);
    }

    #[test]
    fn single_frame_delta_is_zero() {
        let mut m = Mat::zeros(1, 4);
        m.row_mut(0).copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        let d = delta(&m, 2).unwrap();
        assert!(d.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn assemble_shape_and_static_block() {
        let p = uniform_posteriors(6, 28);
        let t = assemble(&p, DEFAULT_FLOOR, DEFAULT_WINDOW).unwrap();
        assert_eq!((t.rows(), t.cols()), (6, 84));
        let logs = log_features(&p, DEFAULT_FLOOR).unwrap();
        for r in 0..6 {
            assert_eq!(&t.row(r)[..28], logs.row(r));
            // Constant posteriors: delta and accel blocks vanish.
            assert!(t.row(r)[28..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn two_views_give_triple_width() {
        let a = uniform_posteriors(5, 28);
        let mut b = uniform_posteriors(5, 28);
        b.set(2, 0, 0.9);
        let fused = concat_views(&[&a, &b], DEFAULT_FLOOR, DEFAULT_WINDOW).unwrap();
        assert_eq!((fused.rows(), fused.cols()), (5, 168));
    }

    #[test]
    fn single_view_fusion_equals_assemble() {
        let mut p = uniform_posteriors(7, 4);
        p.set(3, 1, 0.7);
        p.set(3, 0, 0.1);
        let direct = assemble(&p, DEFAULT_FLOOR, DEFAULT_WINDOW).unwrap();
        let fused = concat_views(&[&p], DEFAULT_FLOOR, DEFAULT_WINDOW).unwrap();
        assert_eq!(direct, fused);
    }

    #[test]
    fn frame_count_mismatch_names_views() {
        let a = uniform_posteriors(45, 3);
        let b = uniform_posteriors(44, 3);
        let err = concat_views(&[&a, &b], DEFAULT_FLOOR, DEFAULT_WINDOW).unwrap_err();
        let msg = alloc::string::ToString::to_string(&err);
        assert!(msg.contains("45") && msg.contains("44"), "{msg}");
    }

    #[test]
    fn fused_equals_per_view_concatenation() {
        // Delta is linear and column-wise, so fusing before or after the
        // regression pass must agree exactly on the static+delta blocks.
        let mut a = uniform_posteriors(6, 3);
        let mut b = uniform_posteriors(6, 3);
        for t in 0..6 {
            a.set(t, 0, 0.2 + 0.1 * (t as f64) / 6.0);
            b.set(t, 2, 0.5 - 0.05 * (t as f64));
        }
        let fused = concat_views(&[&a, &b], DEFAULT_FLOOR, DEFAULT_WINDOW).unwrap();
        let la = log_features(&a, DEFAULT_FLOOR).unwrap();
        let lb = log_features(&b, DEFAULT_FLOOR).unwrap();
        let da = delta(&la, DEFAULT_WINDOW).unwrap();
        let db = delta(&lb, DEFAULT_WINDOW).unwrap();
        for t in 0..6 {
            assert_eq!(&fused.row(t)[0..3], la.row(t));
            assert_eq!(&fused.row(t)[3..6], lb.row(t));
            assert_eq!(&fused.row(t)[6..9], da.row(t));
            assert_eq!(&fused.row(t)[9..12], db.row(t));
        }
    }
}
