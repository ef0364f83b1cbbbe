//! Synthetic grayscale sky frames with a known sun position.

use chrono::NaiveDate;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::TrackerError;
use crate::ephemeris::{self, GeoLocation, SolarAngles, Timestamp};
use crate::seeding::indexed_seed;
use crate::Vec3;

/// Image coordinates in pixels; (0, 0) is the centre of the top-left pixel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelPoint {
    pub row: f64,
    pub col: f64,
}

impl PixelPoint {
    pub fn new(row: f64, col: f64) -> Self {
        Self { row, col }
    }

    pub fn offset(&self, d_row: f64, d_col: f64) -> Self {
        Self::new(self.row + d_row, self.col + d_col)
    }

    pub fn distance(&self, other: &PixelPoint) -> f64 {
        (self.row - other.row).hypot(self.col - other.col)
    }

    /// Chebyshev distance, `max(|Δrow|, |Δcol|)`.
    pub fn chebyshev(&self, other: &PixelPoint) -> f64 {
        (self.row - other.row).abs().max((self.col - other.col).abs())
    }
}

/// Upward-looking fisheye camera with an azimuthal-equidistant projection:
/// zenith at the image centre, north up, east right, the horizon on a circle
/// of `horizon_radius_px`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkyCamera {
    pub height: usize,
    pub width: usize,
    pub horizon_radius_px: f64,
}

impl SkyCamera {
    /// Camera whose horizon circle leaves `margin_px` to the nearest edge.
    pub fn fitted(height: usize, width: usize, margin_px: f64) -> Self {
        let half = (height.min(width) as f64 - 1.0) / 2.0;
        Self {
            height,
            width,
            horizon_radius_px: half - margin_px,
        }
    }

    fn centre(&self) -> (f64, f64) {
        ((self.height as f64 - 1.0) / 2.0, (self.width as f64 - 1.0) / 2.0)
    }

    pub fn project(&self, a: SolarAngles) -> PixelPoint {
        let (cy, cx) = self.centre();
        let rho = (90.0 - a.elevation_deg()) / 90.0 * self.horizon_radius_px;
        let az = a.azimuth_deg().to_radians();
        PixelPoint::new(cy - rho * az.cos(), cx + rho * az.sin())
    }

    pub fn back_project(&self, p: PixelPoint) -> SolarAngles {
        let (cy, cx) = self.centre();
        let (north, east) = (cy - p.row, p.col - cx);
        let rho = north.hypot(east);
        let elevation = (90.0 - rho / self.horizon_radius_px * 90.0).clamp(-90.0, 90.0);
        let azimuth = if rho == 0.0 {
            0.0
        } else {
            ephemeris::wrap_degrees(east.atan2(north).to_degrees())
        };
        SolarAngles::new(azimuth, elevation).expect("wrapped azimuth and clamped elevation")
    }

    pub fn back_project_vector(&self, p: PixelPoint) -> Vec3 {
        ephemeris::sun_unit_vector(self.back_project(p))
    }
}

/// Moving ellipse attenuating whatever lies beneath it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cloud {
    pub center: PixelPoint,
    pub semi_axes: (f64, f64),
    pub angle_rad: f64,
    /// Displacement per step (rows, cols).
    pub velocity: (f64, f64),
    pub opacity: f64,
}

impl Cloud {
    fn center_at(&self, t: usize) -> PixelPoint {
        self.center.offset(self.velocity.0 * t as f64, self.velocity.1 * t as f64)
    }

    fn covers(&self, center: PixelPoint, p: PixelPoint) -> bool {
        let (dr, dc) = (p.row - center.row, p.col - center.col);
        let (s, c) = self.angle_rad.sin_cos();
        let u = c * dc + s * dr;
        let v = -s * dc + c * dr;
        (u / self.semi_axes.0).powi(2) + (v / self.semi_axes.1).powi(2) <= 1.0
    }
}

/// Static bright Gaussian blob (glint, reflection, street light).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub center: PixelPoint,
    pub sigma_px: f64,
    pub peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkyScene {
    pub height: usize,
    pub width: usize,
    pub sun_radius_px: f64,
    pub sun_peak: f64,
    /// Sun centre per step.
    pub sun_path: Vec<PixelPoint>,
    pub clouds: Vec<Cloud>,
    pub distractors: Vec<Blob>,
    pub noise_sigma: f64,
    /// Background intensity at the top and bottom rows.
    pub background: (f64, f64),
}

/// One rendered frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub height: usize,
    pub width: usize,
    /// Row-major intensities in `[0, 1]`.
    pub pixels: Vec<f64>,
    pub gt_point: PixelPoint,
    /// Opacity-weighted fraction of the sun disc under cloud.
    pub occluded: f64,
    pub sun_radius_px: f64,
}

impl SkyScene {
    pub fn len(&self) -> usize {
        self.sun_path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sun_path.is_empty()
    }

    pub fn validate(&self) -> Result<(), TrackerError> {
        let inside = |p: &PixelPoint| {
            (0.0..=(self.height - 1) as f64).contains(&p.row)
                && (0.0..=(self.width - 1) as f64).contains(&p.col)
        };
        if let Some(t) = self.sun_path.iter().position(|p| !inside(p)) {
            return Err(TrackerError::Scene(format!("sun_path[{t}] lies outside the image")));
        }
        if let Some(c) = self.clouds.iter().position(|c| !(0.0..=1.0).contains(&c.opacity)) {
            return Err(TrackerError::Scene(format!("cloud {c} opacity outside [0, 1]")));
        }
        if self.sun_radius_px <= 0.0 {
            return Err(TrackerError::Scene("sun_radius_px must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn transmission(&self, t: usize, p: PixelPoint) -> f64 {
        self.clouds.iter().fold(1.0, |acc, c| {
            if c.covers(c.center_at(t), p) {
                acc * (1.0 - c.opacity)
            } else {
                acc
            }
        })
    }

    /// Opacity-weighted cloud cover of the sun disc at step `t`, sampled on a
    /// quarter-pixel grid.
    pub fn occlusion(&self, t: usize) -> f64 {
        let sun = self.sun_path[t];
        let r = self.sun_radius_px;
        let n = (r * 4.0).ceil() as i64;
        let (mut covered, mut total) = (0.0, 0.0);
        for i in -n..=n {
            for j in -n..=n {
                let (dr, dc) = (i as f64 / 4.0, j as f64 / 4.0);
                if dr * dr + dc * dc <= r * r {
                    total += 1.0;
                    covered += 1.0 - self.transmission(t, sun.offset(dr, dc));
                }
            }
        }
        covered / total
    }
}

/// Renders step `t`: sky gradient plus sun and blobs, cloud attenuation,
/// seeded Gaussian noise, clamped to `[0, 1]`.
pub fn render_frame(scene: &SkyScene, t: usize, seed: u64) -> Result<Frame, TrackerError> {
    if t >= scene.len() {
        return Err(TrackerError::StepOutOfRange {
            step: t,
            len: scene.len(),
        });
    }
    let (h, w) = (scene.height, scene.width);
    let sun = scene.sun_path[t];
    let sun_sigma = scene.sun_radius_px / 2.0;
    let clouds: Vec<(Cloud, PixelPoint)> = scene.clouds.iter().map(|c| (*c, c.center_at(t))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(indexed_seed(seed, t as u64));
    let noise = Normal::new(0.0, scene.noise_sigma.max(0.0)).expect("finite sigma");

    let mut pixels = Vec::with_capacity(h * w);
    for r in 0..h {
        let bg = scene.background.0 + (scene.background.1 - scene.background.0) * r as f64 / (h.max(2) - 1) as f64;
        for c in 0..w {
            let p = PixelPoint::new(r as f64, c as f64);
            let mut v = bg + gaussian(scene.sun_peak, sun_sigma, sun.distance(&p));
            for b in &scene.distractors {
                v += gaussian(b.peak, b.sigma_px, b.center.distance(&p));
            }
            for (cloud, centre) in &clouds {
                if cloud.covers(*centre, p) {
                    v *= 1.0 - cloud.opacity;
                }
            }
            if scene.noise_sigma > 0.0 {
                v += noise.sample(&mut rng);
            }
            pixels.push(v.clamp(0.0, 1.0));
        }
    }
    Ok(Frame {
        height: h,
        width: w,
        pixels,
        gt_point: sun,
        occluded: scene.occlusion(t),
        sun_radius_px: scene.sun_radius_px,
    })
}

fn gaussian(peak: f64, sigma: f64, d: f64) -> f64 {
    let z = d / sigma;
    if z > 6.0 {
        0.0
    } else {
        peak * (-0.5 * z * z).exp()
    }
}

impl Frame {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.width + c]
    }

    /// Bilinear intensity, with coordinates clamped to the image.
    pub fn sample(&self, p: PixelPoint) -> f64 {
        let (r0, c0, fr, fc) = self.cell(p);
        let top = self.at(r0, c0) * (1.0 - fc) + self.at(r0, c0 + 1) * fc;
        let bottom = self.at(r0 + 1, c0) * (1.0 - fc) + self.at(r0 + 1, c0 + 1) * fc;
        top * (1.0 - fr) + bottom * fr
    }

    /// Gradient (d/drow, d/dcol) of [`Frame::sample`] inside the current cell.
    pub fn sample_gradient(&self, p: PixelPoint) -> (f64, f64) {
        let (r0, c0, fr, fc) = self.cell(p);
        let (a, b) = (self.at(r0, c0), self.at(r0, c0 + 1));
        let (c, d) = (self.at(r0 + 1, c0), self.at(r0 + 1, c0 + 1));
        let d_row = (c * (1.0 - fc) + d * fc) - (a * (1.0 - fc) + b * fc);
        let d_col = (b - a) * (1.0 - fr) + (d - c) * fr;
        (d_row, d_col)
    }

    fn cell(&self, p: PixelPoint) -> (usize, usize, f64, f64) {
        let max_r = (self.height - 1) as f64;
        let max_c = (self.width - 1) as f64;
        let r = p.row.clamp(0.0, max_r);
        let c = p.col.clamp(0.0, max_c);
        let r0 = (r.floor() as usize).min(self.height - 2);
        let c0 = (c.floor() as usize).min(self.width - 2);
        (r0, c0, r - r0 as f64, c - c0 as f64)
    }

    pub fn clamp_point(&self, p: PixelPoint) -> PixelPoint {
        PixelPoint::new(
            p.row.clamp(0.0, (self.height - 1) as f64),
            p.col.clamp(0.0, (self.width - 1) as f64),
        )
    }

    pub fn in_bounds(&self, p: &PixelPoint) -> bool {
        (0.0..=(self.height - 1) as f64).contains(&p.row) && (0.0..=(self.width - 1) as f64).contains(&p.col)
    }

    /// Whether `p` falls inside the rendered sun disc.
    pub fn hits_sun(&self, p: &PixelPoint) -> bool {
        p.distance(&self.gt_point) <= self.sun_radius_px
    }
}

/// Randomization ranges for synthetic training and evaluation scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    pub sun_radius_px: f64,
    pub noise_sigma: f64,
    /// Minutes between consecutive path samples.
    pub path_step_minutes: u32,
    pub max_clouds: usize,
    /// Probability that one cloud is steered onto the sun at the sampled step.
    pub cloud_on_sun_prob: f64,
    pub max_distractors: usize,
    /// Probability that one distractor is placed within a few radii of the sun.
    pub distractor_near_sun_prob: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            height: 96,
            width: 96,
            sun_radius_px: 4.0,
            noise_sigma: 0.02,
            path_step_minutes: 10,
            max_clouds: 2,
            cloud_on_sun_prob: 0.4,
            max_distractors: 2,
            distractor_near_sun_prob: 0.4,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.height < 16 || self.width < 16 {
            return Err("height/width: must be at least 16 pixels".into());
        }
        if !(self.sun_radius_px > 0.0) {
            return Err("sun_radius_px: must be > 0".into());
        }
        if !(self.noise_sigma >= 0.0) {
            return Err("noise_sigma: must be >= 0".into());
        }
        if self.path_step_minutes == 0 {
            return Err("path_step_minutes: must be > 0".into());
        }
        for (name, p) in [
            ("cloud_on_sun_prob", self.cloud_on_sun_prob),
            ("distractor_near_sun_prob", self.distractor_near_sun_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name}: must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn camera(&self) -> SkyCamera {
        SkyCamera::fitted(self.height, self.width, self.sun_radius_px + 1.0)
    }

    /// Clean scene following the real sun over one day at `loc`.
    pub fn day_scene(&self, date: NaiveDate, loc: GeoLocation) -> Option<SkyScene> {
        let (rise, set) = ephemeris::daylight_window(date, loc).ok()?.window()?;
        let camera = self.camera();
        let step = i64::from(self.path_step_minutes) * 60;
        let mut sun_path = Vec::new();
        let mut t = rise;
        while t <= set {
            let a = ephemeris::solar_direction(t, loc).ok()?;
            sun_path.push(camera.project(a));
            t = t.plus_seconds(step);
        }
        Some(SkyScene {
            height: self.height,
            width: self.width,
            sun_radius_px: self.sun_radius_px,
            sun_peak: 1.0,
            sun_path,
            clouds: Vec::new(),
            distractors: Vec::new(),
            noise_sigma: self.noise_sigma,
            background: (0.25, 0.4),
        })
    }

    /// Random day and place, plus random clouds and distractors; returns the
    /// scene and the step the perturbations were arranged around.
    pub fn random_scene(&self, rng: &mut ChaCha8Rng) -> (SkyScene, usize) {
        let mut scene = loop {
            let lat = rng.random_range(-60.0..60.0);
            let lon = rng.random_range(-180.0..180.0);
            let date = NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date")
                + chrono::Duration::days(rng.random_range(0..366));
            let loc = GeoLocation::new(lat, lon).expect("sampled in range");
            if let Some(s) = self.day_scene(date, loc) {
                if s.len() >= 2 {
                    break s;
                }
            }
        };
        let t = rng.random_range(0..scene.len());
        let sun = scene.sun_path[t];
        let r = self.sun_radius_px;
        scene.background = {
            let top = rng.random_range(0.15..0.4);
            (top, top + rng.random_range(0.0..0.15))
        };

        for k in 0..rng.random_range(0..=self.max_clouds) {
            let velocity = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            let semi_axes = (rng.random_range(r..4.0 * r), rng.random_range(r..3.0 * r));
            let at_t = if k == 0 && rng.random_bool(self.cloud_on_sun_prob) {
                let reach = semi_axes.0.max(semi_axes.1) + r;
                sun.offset(rng.random_range(-reach..reach), rng.random_range(-reach..reach))
            } else {
                PixelPoint::new(
                    rng.random_range(0.0..self.height as f64),
                    rng.random_range(0.0..self.width as f64),
                )
            };
            scene.clouds.push(Cloud {
                center: at_t.offset(-velocity.0 * t as f64, -velocity.1 * t as f64),
                semi_axes,
                angle_rad: rng.random_range(0.0..std::f64::consts::PI),
                velocity,
                opacity: rng.random_range(0.2..0.9),
            });
        }

        for k in 0..rng.random_range(0..=self.max_distractors) {
            let center = if k == 0 && rng.random_bool(self.distractor_near_sun_prob) {
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                let dist = rng.random_range(1.5 * r..3.0 * r);
                sun.offset(dist * angle.sin(), dist * angle.cos())
            } else {
                PixelPoint::new(
                    rng.random_range(0.0..self.height as f64),
                    rng.random_range(0.0..self.width as f64),
                )
            };
            scene.distractors.push(Blob {
                center,
                sigma_px: rng.random_range(0.7..1.3),
                peak: rng.random_range(0.4..1.0),
            });
        }
        (scene, t)
    }
}

/// Convenience for tests and the environment: angles at an instant.
pub fn sun_pixel(camera: &SkyCamera, t: Timestamp, loc: GeoLocation) -> Option<PixelPoint> {
    ephemeris::solar_direction(t, loc).ok().map(|a| camera.project(a))
}
