//! Synthetic straight-line pedestrian data.
//!
//! Every trajectory is a constant-speed walk with at most one heading
//! change, optionally perturbed by Gaussian positional jitter.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{parse_value, KeyValue};
use crate::data::{written_start_frame, Point, Scene, Trajectory, DT};
use crate::error::{Error, Result};

/// Closed interval `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range<T> {
    pub low: T,
    pub high: T,
}

impl<T: PartialOrd + Copy> Range<T> {
    pub fn new(low: T, high: T) -> Self {
        Self { low, high }
    }

    pub fn is_ordered(&self) -> bool {
        self.low <= self.high
    }

    pub fn contains(&self, v: T) -> bool {
        self.low <= v && v <= self.high
    }
}

impl Range<f64> {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.low == self.high {
            self.low
        } else {
            rng.gen_range(self.low..=self.high)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_scenes: usize,
    pub peds_per_scene: Range<usize>,
    /// Meters per second.
    pub speed: Range<f64>,
    /// Radians.
    pub heading: Range<f64>,
    pub turn_probability: f64,
    /// Radians, signed.
    pub turn_angle: Range<f64>,
    /// Standard deviation of positional noise, meters.
    pub jitter_std: f64,
    /// Start positions are drawn uniformly from `[0, extent]^2`, meters.
    pub extent: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_scenes: 200,
            peds_per_scene: Range::new(1, 3),
            speed: Range::new(0.8, 1.6),
            heading: Range::new(-std::f64::consts::PI, std::f64::consts::PI),
            turn_probability: 0.0,
            turn_angle: Range::new(-0.6, 0.6),
            jitter_std: 0.0,
            extent: 10.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !self.peds_per_scene.is_ordered() || self.peds_per_scene.low == 0 {
            return bad("peds_per_scene must be an ordered range starting at 1 or more");
        }
        if !self.speed.is_ordered() || self.speed.low < 0.0 {
            return bad("speed range must be ordered and non-negative");
        }
        if !self.heading.is_ordered() || !self.turn_angle.is_ordered() {
            return bad("heading and turn_angle ranges must be ordered");
        }
        if !(0.0..=1.0).contains(&self.turn_probability) {
            return bad("turn_probability must lie in [0, 1]");
        }
        if !(self.jitter_std >= 0.0) || !self.jitter_std.is_finite() {
            return bad("jitter_std must be finite and non-negative");
        }
        if !(self.extent >= 0.0) {
            return bad("extent must be non-negative");
        }
        Ok(())
    }
}

impl KeyValue for SynthConfig {
    fn set(&mut self, key: &str, v: &str) -> Result<bool> {
        match key {
            "n_scenes" => self.n_scenes = parse_value(key, v)?,
            "peds_min" => self.peds_per_scene.low = parse_value(key, v)?,
            "peds_max" => self.peds_per_scene.high = parse_value(key, v)?,
            "speed_min" => self.speed.low = parse_value(key, v)?,
            "speed_max" => self.speed.high = parse_value(key, v)?,
            "heading_min" => self.heading.low = parse_value(key, v)?,
            "heading_max" => self.heading.high = parse_value(key, v)?,
            "turn_probability" => self.turn_probability = parse_value(key, v)?,
            "turn_angle_min" => self.turn_angle.low = parse_value(key, v)?,
            "turn_angle_max" => self.turn_angle.high = parse_value(key, v)?,
            "jitter_std" => self.jitter_std = parse_value(key, v)?,
            "extent" => self.extent = parse_value(key, v)?,
            "synth_seed" => self.seed = parse_value(key, v)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n_scenes", self.n_scenes.to_string()),
            ("peds_min", self.peds_per_scene.low.to_string()),
            ("peds_max", self.peds_per_scene.high.to_string()),
            ("speed_min", self.speed.low.to_string()),
            ("speed_max", self.speed.high.to_string()),
            ("heading_min", self.heading.low.to_string()),
            ("heading_max", self.heading.high.to_string()),
            ("turn_probability", self.turn_probability.to_string()),
            ("turn_angle_min", self.turn_angle.low.to_string()),
            ("turn_angle_max", self.turn_angle.high.to_string()),
            ("jitter_std", self.jitter_std.to_string()),
            ("extent", self.extent.to_string()),
            ("synth_seed", self.seed.to_string()),
        ]
    }
}

/// `points[k] = start + k * dt * velocity`.
pub fn generate_linear_trajectory(
    start: Point,
    velocity: Point,
    t_pred: usize,
    dt: f64,
) -> Trajectory {
    let points = (0..t_pred)
        .map(|k| start + velocity.scale(k as f64 * dt))
        .collect();
    Trajectory::new(0, points)
}

fn heading_vector(speed: f64, heading: f64) -> Point {
    Point::new(speed * heading.cos(), speed * heading.sin())
}

/// Generates `cfg.n_scenes` scenes of `t_pred` points each.
///
/// Scene `i` carries the start frame it would get from
/// [`crate::data::write_dataset`], so writing and re-reading reproduces the
/// scenes exactly. Pedestrian ids are unique across the dataset.
pub fn generate_synthetic_dataset(cfg: &SynthConfig, t_pred: usize) -> Result<Vec<Scene>> {
    cfg.validate()?;
    if t_pred < 2 {
        return Err(Error::Argument(format!(
            "t_pred must be >= 2, got {t_pred}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter = Normal::new(0.0, cfg.jitter_std).map_err(|e| Error::Config(e.to_string()))?;
    let mut next_ped = 0u64;
    let mut scenes = Vec::with_capacity(cfg.n_scenes);
    for i in 0..cfg.n_scenes {
        let n = rng.gen_range(cfg.peds_per_scene.low..=cfg.peds_per_scene.high);
        let mut trajectories = Vec::with_capacity(n);
        for _ in 0..n {
            let start = Point::new(
                rng.gen_range(0.0..=cfg.extent),
                rng.gen_range(0.0..=cfg.extent),
            );
            let speed = cfg.speed.sample(&mut rng);
            let heading = cfg.heading.sample(&mut rng);
            let turn = if rng.gen_bool(cfg.turn_probability) {
                // turn after step k, 1 <= k <= t_pred - 2
                let k = rng.gen_range(1..=(t_pred - 2).max(1));
                Some((k, cfg.turn_angle.sample(&mut rng)))
            } else {
                None
            };
            let vel = heading_vector(speed, heading);
            let mut points = generate_linear_trajectory(start, vel, t_pred, DT).points;
            if let Some((tk, angle)) = turn {
                let turned = heading_vector(speed, heading + angle);
                let tail = generate_linear_trajectory(points[tk], turned, t_pred - tk, DT);
                points.truncate(tk);
                points.extend(tail.points);
            }
            if cfg.jitter_std > 0.0 {
                for p in &mut points {
                    p.x += jitter.sample(&mut rng);
                    p.y += jitter.sample(&mut rng);
                }
            }
            trajectories.push(Trajectory::new(next_ped, points));
            next_ped += 1;
        }
        scenes.push(Scene::new(written_start_frame(i, t_pred), trajectories));
    }
    Ok(scenes)
}
