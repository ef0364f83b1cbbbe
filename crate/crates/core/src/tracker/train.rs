//! Tracker training on synthetic scenes, and hit-rate evaluation sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::rollout;
use super::{
    refinement_loss, render_frame, track_step, Blob, Cloud, Frame, LossConfig, PixelPoint,
    SceneConfig, SkyScene, TrackerError, FEATURE_LEN,
};
use crate::neural::{self, Gradients, Mlp, OptimState};
use crate::seeding::{derive_seed, indexed_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Optimizer steps in total.
    pub steps: usize,
    pub steps_per_epoch: usize,
    /// Frames per optimizer step.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden_sizes: Vec<usize>,
    pub n_refine: usize,
    /// Training starts are drawn uniformly from a disc of this radius around the sun.
    pub start_radius_px: f64,
    /// Frames per validation set (clean and occluded) scored after each epoch.
    pub validation_frames: usize,
    pub scene: SceneConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            steps_per_epoch: 100,
            batch_size: 16,
            learning_rate: 1e-3,
            hidden_sizes: vec![64, 64],
            n_refine: 4,
            start_radius_px: 10.0,
            validation_frames: 100,
            scene: SceneConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        let bad = |m: &str| Err(TrackerError::TrainConfig(m.into()));
        if self.steps_per_epoch == 0 {
            return bad("steps_per_epoch: must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size: must be >= 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate: must be > 0");
        }
        if self.hidden_sizes.contains(&0) {
            return bad("hidden_sizes: every layer must be >= 1");
        }
        if self.n_refine == 0 {
            return bad("n_refine: must be >= 1");
        }
        if !(self.start_radius_px >= 0.0) {
            return bad("start_radius_px: must be >= 0");
        }
        self.scene.validate().map_err(TrackerError::TrainConfig)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![FEATURE_LEN];
        sizes.extend(&self.hidden_sizes);
        sizes.push(2);
        sizes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerEpoch {
    pub epoch: usize,
    /// Mean training loss over the epoch's steps.
    pub loss: f64,
    /// Validation hit-rate on clean frames.
    pub hit_rate: f64,
    /// Validation hit-rate on partly occluded frames.
    pub occluded_hit_rate: f64,
}

/// The tracked points for one frame: `center`, then `n - 1` points evenly
/// spaced on a circle of `radius` around it.
pub fn start_points(center: PixelPoint, n: usize, radius: f64) -> Vec<PixelPoint> {
    let mut pts = vec![center];
    for k in 1..n {
        let a = std::f64::consts::TAU * (k - 1) as f64 / (n - 1) as f64;
        pts.push(center.offset(radius * a.sin(), radius * a.cos()));
    }
    pts
}

fn uniform_in_disc(rng: &mut ChaCha8Rng, radius: f64) -> (f64, f64) {
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    (r * a.sin(), r * a.cos())
}

/// Loss of one frame and its parameter gradient, added into `grads` with
/// weight `scale`.
///
/// Every point is pulled toward the sun centre by the objectness term on its
/// final iterate. The refinement term weights the per-iteration photometric
/// loss `1 - I(p_i)`, which needs no labels and on its own is drawn to any
/// bright spot.
fn frame_loss(
    net: &Mlp,
    frame: &Frame,
    starts: &[PixelPoint],
    loss: &LossConfig,
    n_refine: usize,
    scale: f64,
    grads: &mut Gradients,
) -> Result<f64, TrackerError> {
    let gt = frame.gt_point;
    let n = starts.len() as f64;
    let mut total = 0.0;
    for &start in starts {
        let ro = rollout(net, frame, start, n_refine)?;
        let last = *ro.points.last().expect("n_refine >= 1");
        let es = last.chebyshev(&gt);
        let photometric: Vec<f64> = ro.points.iter().map(|p| 1.0 - frame.sample(*p)).collect();
        let er = refinement_loss(&photometric, loss.chi)?;
        total += (loss.alpha * es + loss.beta * er) / n;

        let mut d: Vec<(f64, f64)> = ro
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let w = loss.beta / n * loss.chi.powi((n_refine - 1 - i) as i32);
                let (gr, gc) = frame.sample_gradient(*p);
                (-w * gr, -w * gc)
            })
            .collect();
        let (dr, dc) = (last.row - gt.row, last.col - gt.col);
        let g = loss.alpha / n;
        if dr.abs() >= dc.abs() {
            d[n_refine - 1].0 += g * sign(dr);
        } else {
            d[n_refine - 1].1 += g * sign(dc);
        }
        for v in &mut d {
            v.0 *= scale;
            v.1 *= scale;
        }
        ro.backprop(net, &d, grads)?;
    }
    Ok(total)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Trains a tracker network with Adam on freshly generated scenes; returns
/// the network and one metrics row per epoch.
pub fn train_tracker(
    cfg: &TrainConfig,
    loss: &LossConfig,
    seed: u64,
) -> Result<(Mlp, Vec<TrackerEpoch>), TrackerError> {
    cfg.validate()?;
    loss.validate()?;
    let mut net = Mlp::new(&cfg.layer_sizes(), derive_seed(seed, "tracker-init"))?;
    let mut opt = OptimState::adam(cfg.learning_rate, &net);
    let data_seed = derive_seed(seed, "tracker-data");
    let val_seed = derive_seed(seed, "tracker-validation");
    let clean = eval_frames(&cfg.scene, EvalKind::Clean, cfg.validation_frames, indexed_seed(val_seed, 0));
    let occluded = eval_frames(&cfg.scene, EvalKind::Occluded, cfg.validation_frames, indexed_seed(val_seed, 1));

    let mut metrics = Vec::new();
    let mut epoch_loss = 0.0;
    let mut epoch_steps = 0;
    for s in 0..cfg.steps {
        let mut rng = ChaCha8Rng::seed_from_u64(indexed_seed(data_seed, s as u64));
        let mut grads = Gradients::zeros_like(&net);
        let mut step_loss = 0.0;
        let scale = 1.0 / cfg.batch_size as f64;
        for _ in 0..cfg.batch_size {
            let (scene, t) = cfg.scene.random_scene(&mut rng);
            let frame = render_frame(&scene, t, rng.random())?;
            let (dr, dc) = uniform_in_disc(&mut rng, cfg.start_radius_px);
            let starts = start_points(frame.gt_point.offset(dr, dc), loss.n_points, scene.sun_radius_px);
            step_loss += scale * frame_loss(&net, &frame, &starts, loss, cfg.n_refine, scale, &mut grads)?;
        }
        neural::step(&mut net, &grads, &mut opt)?;
        epoch_loss += step_loss;
        epoch_steps += 1;
        if epoch_steps == cfg.steps_per_epoch || s + 1 == cfg.steps {
            metrics.push(TrackerEpoch {
                epoch: metrics.len(),
                loss: epoch_loss / epoch_steps as f64,
                hit_rate: evaluate_hit_rate(&net, &clean, cfg.n_refine)?,
                occluded_hit_rate: evaluate_hit_rate(&net, &occluded, cfg.n_refine)?,
            });
            epoch_loss = 0.0;
            epoch_steps = 0;
        }
    }
    Ok((net, metrics))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalKind {
    /// No clouds or distractors; start within 10 px.
    Clean,
    /// One cloud covering more than 0 and at most half of the disc; start within 10 px.
    Occluded,
    /// A cloud over the sun centre and a sharper blob, brighter than the
    /// dimmed sun, 6 to 10 px away; start within 3 px.
    Distractor,
}

#[derive(Debug, Clone)]
pub struct EvalCase {
    pub frame: Frame,
    pub start: PixelPoint,
}

/// Seeded evaluation set of `count` frames of the given kind.
pub fn eval_frames(cfg: &SceneConfig, kind: EvalKind, count: usize, seed: u64) -> Vec<EvalCase> {
    let bare = SceneConfig {
        max_clouds: 0,
        max_distractors: 0,
        ..cfg.clone()
    };
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(indexed_seed(seed, i as u64));
            loop {
                let (mut scene, t) = bare.random_scene(&mut rng);
                let sun = scene.sun_path[t];
                let ok = match kind {
                    EvalKind::Clean => true,
                    EvalKind::Occluded => add_partial_cloud(&mut scene, t, &mut rng),
                    EvalKind::Distractor => add_distractor(&mut scene, t, &mut rng),
                };
                if !ok {
                    continue;
                }
                let radius = if kind == EvalKind::Distractor { 3.0 } else { 10.0 };
                let (dr, dc) = uniform_in_disc(&mut rng, radius);
                let frame = render_frame(&scene, t, rng.random()).expect("t sampled in range");
                let start = frame.clamp_point(sun.offset(dr, dc));
                break EvalCase { frame, start };
            }
        })
        .collect()
}

fn add_partial_cloud(scene: &mut SkyScene, t: usize, rng: &mut ChaCha8Rng) -> bool {
    let r = scene.sun_radius_px;
    let sun = scene.sun_path[t];
    let semi = (rng.random_range(r..3.0 * r), rng.random_range(r..2.0 * r));
    let reach = semi.0 + r;
    scene.clouds = vec![Cloud {
        center: sun.offset(rng.random_range(-reach..reach), rng.random_range(-reach..reach)),
        semi_axes: semi,
        angle_rad: rng.random_range(0.0..std::f64::consts::PI),
        velocity: (0.0, 0.0),
        opacity: rng.random_range(0.3..0.9),
    }];
    let occ = scene.occlusion(t);
    occ > 0.0 && occ <= 0.5
}

fn add_distractor(scene: &mut SkyScene, t: usize, rng: &mut ChaCha8Rng) -> bool {
    let r = scene.sun_radius_px;
    let sun = scene.sun_path[t];
    let opacity = rng.random_range(0.3..0.6);
    let semi = (rng.random_range(1.5 * r..3.0 * r), rng.random_range(1.5 * r..3.0 * r));
    scene.clouds = vec![Cloud {
        center: sun.offset(rng.random_range(-0.5 * r..0.5 * r), rng.random_range(-0.5 * r..0.5 * r)),
        semi_axes: semi,
        angle_rad: rng.random_range(0.0..std::f64::consts::PI),
        velocity: (0.0, 0.0),
        opacity,
    }];
    let dist = rng.random_range(6.0..10.0);
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    let center = sun.offset(dist * a.sin(), dist * a.cos());
    scene.distractors = vec![Blob {
        center,
        sigma_px: rng.random_range(0.7..1.3),
        peak: rng.random_range(0.85..1.0),
    }];
    let inside = (0.0..=(scene.height - 1) as f64).contains(&center.row)
        && (0.0..=(scene.width - 1) as f64).contains(&center.col);
    // whole disc under the cloud, blob outside it and brighter than the dimmed sun
    inside
        && scene.occlusion(t) >= opacity - 1e-12
        && scene.transmission(t, center) == 1.0
        && scene.distractors[0].peak > scene.sun_peak * (1.0 - opacity)
}

/// Fraction of cases whose final tracked point lies inside the sun disc.
pub fn evaluate_hit_rate(net: &Mlp, cases: &[EvalCase], n_refine: usize) -> Result<f64, TrackerError> {
    if cases.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for c in cases {
        let est = track_step(net, &c.frame, c.start, n_refine)?;
        if c.frame.hits_sun(&est.final_point()) {
            hits += 1;
        }
    }
    Ok(hits as f64 / cases.len() as f64)
}
