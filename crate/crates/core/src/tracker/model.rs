//! Iterative point tracker: each refinement step reads a window around the
//! current estimate and adds the network's 2-D correction.

use serde::{Deserialize, Serialize};

use super::{Frame, PixelPoint, TrackerError};
use crate::neural::{Gradients, Mlp, Trace};

/// Side length of the square intensity window.
pub const WINDOW: usize = 15;
/// Window intensities plus the two normalized coordinates.
pub const FEATURE_LEN: usize = WINDOW * WINDOW + 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackEstimate {
    /// Point after each refinement iteration.
    pub iterates: Vec<PixelPoint>,
}

impl TrackEstimate {
    pub fn final_point(&self) -> PixelPoint {
        *self.iterates.last().expect("at least one iterate")
    }
}

/// Window intensities (bilinear, one-pixel spacing, row-major) around `p`,
/// then `p` scaled to `[-1, 1]`.
pub fn extract_features(frame: &Frame, p: PixelPoint) -> Vec<f64> {
    let half = (WINDOW / 2) as f64;
    let mut out = Vec::with_capacity(FEATURE_LEN);
    for i in 0..WINDOW {
        for j in 0..WINDOW {
            out.push(frame.sample(p.offset(i as f64 - half, j as f64 - half)));
        }
    }
    out.push(2.0 * p.row / (frame.height - 1) as f64 - 1.0);
    out.push(2.0 * p.col / (frame.width - 1) as f64 - 1.0);
    out
}

/// Runs `n_refine` refinement iterations from `prev_point`.
pub fn track_step(
    net: &Mlp,
    frame: &Frame,
    prev_point: PixelPoint,
    n_refine: usize,
) -> Result<TrackEstimate, TrackerError> {
    Ok(TrackEstimate {
        iterates: rollout(net, frame, prev_point, n_refine)?.points,
    })
}

/// Forward pass of one tracked point, kept for backprop.
pub(crate) struct Rollout {
    pub points: Vec<PixelPoint>,
    traces: Vec<Trace>,
    /// Whether each coordinate was inside the image before clamping.
    free: Vec<(bool, bool)>,
}

pub(crate) fn rollout(
    net: &Mlp,
    frame: &Frame,
    start: PixelPoint,
    n_refine: usize,
) -> Result<Rollout, TrackerError> {
    if n_refine == 0 {
        return Err(TrackerError::Empty("n_refine must be >= 1"));
    }
    let mut p = frame.clamp_point(start);
    let mut out = Rollout {
        points: Vec::with_capacity(n_refine),
        traces: Vec::with_capacity(n_refine),
        free: Vec::with_capacity(n_refine),
    };
    let max_r = (frame.height - 1) as f64;
    let max_c = (frame.width - 1) as f64;
    for _ in 0..n_refine {
        let trace = net.trace(&extract_features(frame, p))?;
        let d = trace.output();
        let raw = p.offset(d[0], d[1]);
        out.free.push(((0.0..=max_r).contains(&raw.row), (0.0..=max_c).contains(&raw.col)));
        p = frame.clamp_point(raw);
        out.points.push(p);
        out.traces.push(trace);
    }
    Ok(out)
}

impl Rollout {
    /// Accumulates parameter gradients given `dL/dp_i` for every iterate.
    /// Features are treated as constants (no gradient through the window
    /// lookup), so each correction feeds every later iterate additively.
    pub fn backprop(
        &self,
        net: &Mlp,
        d_points: &[(f64, f64)],
        grads: &mut Gradients,
    ) -> Result<(), TrackerError> {
        let mut carry = (0.0, 0.0);
        for i in (0..self.points.len()).rev() {
            carry.0 += d_points[i].0;
            carry.1 += d_points[i].1;
            let (fr, fc) = self.free[i];
            if !fr {
                carry.0 = 0.0;
            }
            if !fc {
                carry.1 = 0.0;
            }
            if carry != (0.0, 0.0) {
                net.accumulate(&self.traces[i], &[carry.0, carry.1], grads)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::check_gradients;
    use crate::tracker::{render_frame, SkyScene};

    fn frame() -> Frame {
        let scene = SkyScene {
            height: 40,
            width: 40,
            sun_radius_px: 4.0,
            sun_peak: 1.0,
            sun_path: vec![PixelPoint::new(18.0, 22.0)],
            clouds: Vec::new(),
            distractors: Vec::new(),
            noise_sigma: 0.01,
            background: (0.2, 0.3),
        };
        render_frame(&scene, 0, 5).unwrap()
    }

    #[test]
    fn zero_net_is_identity() {
        let net = Mlp::zeros(&[FEATURE_LEN, 8, 2]).unwrap();
        let f = frame();
        let prev = PixelPoint::new(12.5, 30.25);
        let est = track_step(&net, &f, prev, 4).unwrap();
        assert_eq!(est.iterates, vec![prev; 4]);
        assert_eq!(track_step(&net, &f, prev, 1).unwrap().iterates.len(), 1);
    }

    #[test]
    fn iterates_stay_in_bounds() {
        let mut net = Mlp::zeros(&[FEATURE_LEN, 2]).unwrap();
        let last = net.param_count() - 2;
        // biases push far outside the image
        for (k, p) in net.params_mut().enumerate() {
            if k >= last {
                *p = 100.0;
            }
        }
        let f = frame();
        let est = track_step(&net, &f, PixelPoint::new(5.0, 5.0), 3).unwrap();
        assert!(est.iterates.iter().all(|q| f.in_bounds(q)));
        assert_eq!(est.final_point(), PixelPoint::new(39.0, 39.0));
    }

    #[test]
    fn feature_layout() {
        let f = frame();
        let p = PixelPoint::new(18.0, 22.0);
        let x = extract_features(&f, p);
        assert_eq!(x.len(), FEATURE_LEN);
        assert_eq!(x[WINDOW * WINDOW / 2], f.sample(p));
        assert!((x[FEATURE_LEN - 2] - (2.0 * 18.0 / 39.0 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn backprop_matches_finite_differences() {
        // Loss linear in the iterates; the windows are held fixed by
        // replaying the recorded features, matching the stop-gradient.
        let f = frame();
        let net = Mlp::new(&[FEATURE_LEN, 6, 2], 3).unwrap();
        let start = PixelPoint::new(14.0, 19.0);
        let ro = rollout(&net, &f, start, 3).unwrap();
        let feats: Vec<Vec<f64>> = std::iter::once(start)
            .chain(ro.points[..2].iter().copied())
            .map(|p| extract_features(&f, p))
            .collect();
        let w = [(0.3, -0.2), (0.5, 0.1), (-1.0, 0.7)];
        let mut grads = Gradients::zeros_like(&net);
        ro.backprop(&net, &w, &mut grads).unwrap();
        let loss = |m: &Mlp| {
            let mut p = start;
            let mut total = 0.0;
            for (x, wi) in feats.iter().zip(&w) {
                let d = m.forward(x).unwrap();
                p = p.offset(d[0], d[1]);
                total += wi.0 * p.row + wi.1 * p.col;
            }
            total
        };
        assert!(check_gradients(&net, &grads, loss, 0).unwrap() < 1e-5);
    }
}
