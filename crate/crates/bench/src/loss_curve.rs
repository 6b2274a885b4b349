use std::io::Write;

use mdl_svm::smoothing::smoothed_hinge;

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossPoint {
    pub h: f64,
    pub u: f64,
    pub smoothed: f64,
    pub hinge: f64,
}

/// `K_h(u)` and `u₊` on `points` evenly spaced values of `u` in
/// `[lo, hi]`, for each bandwidth.
pub fn loss_curve(bandwidths: &[f64], lo: f64, hi: f64, points: usize) -> Result<Vec<LossPoint>> {
    let mut out = Vec::with_capacity(bandwidths.len() * points);
    let step = if points > 1 {
        (hi - lo) / (points - 1) as f64
    } else {
        0.0
    };
    for &h in bandwidths {
        for i in 0..points {
            let u = lo + i as f64 * step;
            out.push(LossPoint {
                h,
                u,
                smoothed: smoothed_hinge(u, h)?,
                hinge: u.max(0.0),
            });
        }
    }
    Ok(out)
}

pub fn write_loss_curve<W: Write>(points: &[LossPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["h", "u", "smoothed_hinge", "hinge"])?;
    for p in points {
        w.write_record([
            p.h.to_string(),
            p.u.to_string(),
            p.smoothed.to_string(),
            p.hinge.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_outside_the_window() {
        let pts = loss_curve(&[0.5, 1.0, 2.0], -3.0, 3.0, 601).unwrap();
        assert_eq!(pts.len(), 3 * 601);
        for p in &pts {
            if p.u.abs() >= p.h {
                assert_eq!(p.smoothed, p.hinge, "{p:?}");
            } else {
                assert!(p.smoothed < p.hinge + p.h);
            }
        }
    }

    #[test]
    fn bad_bandwidth_is_an_error() {
        assert!(loss_curve(&[0.0], -1.0, 1.0, 5).is_err());
    }
}
