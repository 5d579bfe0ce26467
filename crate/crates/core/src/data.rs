//! Trajectory files, scene windows and coordinate normalization.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::ops::{Add, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling interval of every dataset handled here, in seconds.
pub const DT: f64 = 0.4;

/// Frame stride used when this crate writes datasets (ETH/UCY convention).
pub const WRITE_FRAME_STRIDE: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn sq_norm(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point::new(x, y)
    }
}

/// One `(frame, pedestrian, x, y)` observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub frame_id: u64,
    pub ped_id: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub ped_id: u64,
    pub points: Vec<Point>,
}

impl Trajectory {
    pub fn new(ped_id: u64, points: Vec<Point>) -> Self {
        Self { ped_id, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// All pedestrians fully present over one window of frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub start_frame: u64,
    pub trajectories: Vec<Trajectory>,
}

impl Scene {
    pub fn new(start_frame: u64, trajectories: Vec<Trajectory>) -> Self {
        Self {
            start_frame,
            trajectories,
        }
    }

    pub fn num_peds(&self) -> usize {
        self.trajectories.len()
    }

    /// Common trajectory length, or `None` for an empty or ragged scene.
    pub fn len(&self) -> Option<usize> {
        let first = self.trajectories.first()?.len();
        self.trajectories
            .iter()
            .all(|t| t.len() == first)
            .then_some(first)
    }

    pub fn to_relative(&self) -> Result<Vec<RelativeTrajectory>> {
        self.trajectories.iter().map(to_relative).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativeTrajectory {
    pub ped_id: u64,
    pub origin: Point,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitTrajectory {
    pub obs: Vec<Point>,
    pub pred: Vec<Point>,
}

fn parse_field<T>(tok: &str, what: &str, path: &Path, line: usize) -> Result<T>
where
    T: std::str::FromStr,
{
    tok.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("bad {what} {tok:?}"),
    })
}

fn parse_index(tok: &str, what: &str, path: &Path, line: usize) -> Result<u64> {
    if let Ok(v) = tok.parse::<u64>() {
        return Ok(v);
    }
    // ETH/UCY processed files write indices as floats ("780.0").
    let v: f64 = parse_field(tok, what, path, line)?;
    if v < 0.0 || v.fract() != 0.0 || !v.is_finite() || v > u64::MAX as f64 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("{what} must be a non-negative integer, got {tok:?}"),
        });
    }
    Ok(v as u64)
}

/// Parses dataset text. `path` is only used in error messages.
pub fn parse_trajectory_str(text: &str, path: &Path) -> Result<Vec<TrajectorySample>> {
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: format!(
                    "expected 4 fields (frame_id ped_id x y), found {}",
                    fields.len()
                ),
            });
        }
        let frame_id = parse_index(fields[0], "frame_id", path, line_no)?;
        let ped_id = parse_index(fields[1], "ped_id", path, line_no)?;
        let x: f64 = parse_field(fields[2], "x", path, line_no)?;
        let y: f64 = parse_field(fields[3], "y", path, line_no)?;
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: "non-finite coordinate".into(),
            });
        }
        samples.push(TrajectorySample {
            frame_id,
            ped_id,
            x,
            y,
        });
    }
    samples.sort_by_key(|s| (s.ped_id, s.frame_id));
    if let Some(w) = samples
        .windows(2)
        .find(|w| (w[0].ped_id, w[0].frame_id) == (w[1].ped_id, w[1].frame_id))
    {
        return Err(Error::Data(format!(
            "{}: duplicate observation of pedestrian {} at frame {}",
            path.display(),
            w[0].ped_id,
            w[0].frame_id
        )));
    }
    Ok(samples)
}

/// Reads a whitespace-separated `frame_id ped_id x y` file, sorted by
/// `(ped_id, frame_id)`.
pub fn parse_trajectory_file(path: impl AsRef<Path>) -> Result<Vec<TrajectorySample>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory_str(&text, path)
}

/// Groups samples into per-pedestrian tracks (sorted by frame).
fn tracks(samples: &[TrajectorySample]) -> BTreeMap<u64, Vec<TrajectorySample>> {
    let mut by_ped: BTreeMap<u64, Vec<TrajectorySample>> = BTreeMap::new();
    for s in samples {
        by_ped.entry(s.ped_id).or_default().push(*s);
    }
    for track in by_ped.values_mut() {
        track.sort_by_key(|s| s.frame_id);
    }
    by_ped
}

/// Frame stride shared by every pedestrian track.
pub fn infer_frame_stride(samples: &[TrajectorySample]) -> Result<Option<u64>> {
    let mut stride: Option<u64> = None;
    for (ped, track) in tracks(samples) {
        for w in track.windows(2) {
            let d = w[1].frame_id - w[0].frame_id;
            if d == 0 {
                return Err(Error::Data(format!(
                    "pedestrian {ped}: duplicate frame {}",
                    w[0].frame_id
                )));
            }
            match stride {
                None => stride = Some(d),
                Some(s) if s != d => {
                    return Err(Error::Data(format!(
                        "pedestrian {ped}: frame step {d} between frames {} and {} differs from stride {s}",
                        w[0].frame_id, w[1].frame_id
                    )))
                }
                _ => {}
            }
        }
    }
    Ok(stride)
}

/// Slides a `t_pred`-frame window one frame step at a time and keeps every
/// pedestrian present at all frames of the window.
pub fn extract_scenes(
    samples: &[TrajectorySample],
    t_obs: usize,
    t_pred: usize,
) -> Result<Vec<Scene>> {
    if t_obs == 0 || t_obs >= t_pred {
        return Err(Error::Argument(format!(
            "need 0 < t_obs < t_pred, got t_obs={t_obs}, t_pred={t_pred}"
        )));
    }
    let Some(stride) = infer_frame_stride(samples)? else {
        // No pedestrian has two samples, so no window of length >= 2 fits.
        return Ok(Vec::new());
    };
    let span = (t_pred as u64 - 1) * stride;

    let mut windows: BTreeMap<u64, Vec<Trajectory>> = BTreeMap::new();
    for (ped, track) in tracks(samples) {
        if track.len() < t_pred {
            continue;
        }
        for (k, start) in track.iter().enumerate() {
            if k + t_pred > track.len() {
                break;
            }
            debug_assert_eq!(track[k + t_pred - 1].frame_id - start.frame_id, span);
            let points = track[k..k + t_pred]
                .iter()
                .map(|s| Point::new(s.x, s.y))
                .collect();
            windows
                .entry(start.frame_id)
                .or_default()
                .push(Trajectory::new(ped, points));
        }
    }
    Ok(windows
        .into_iter()
        .map(|(start_frame, trajectories)| Scene::new(start_frame, trajectories))
        .collect())
}

pub fn load_scenes(path: impl AsRef<Path>, t_obs: usize, t_pred: usize) -> Result<Vec<Scene>> {
    let samples = parse_trajectory_file(path)?;
    extract_scenes(&samples, t_obs, t_pred)
}

pub fn to_relative(t: &Trajectory) -> Result<RelativeTrajectory> {
    let origin = *t
        .points
        .first()
        .ok_or_else(|| Error::Argument(format!("pedestrian {}: empty trajectory", t.ped_id)))?;
    Ok(RelativeTrajectory {
        ped_id: t.ped_id,
        origin,
        points: t.points.iter().map(|&p| p - origin).collect(),
    })
}

pub fn to_absolute(r: &RelativeTrajectory) -> Trajectory {
    Trajectory::new(r.ped_id, r.points.iter().map(|&p| p + r.origin).collect())
}

pub fn split_obs_pred(points: &[Point], t_obs: usize) -> Result<SplitTrajectory> {
    if t_obs == 0 || t_obs >= points.len() {
        return Err(Error::Argument(format!(
            "t_obs={t_obs} must lie strictly between 0 and the trajectory length {}",
            points.len()
        )));
    }
    Ok(SplitTrajectory {
        obs: points[..t_obs].to_vec(),
        pred: points[t_obs..].to_vec(),
    })
}

/// Writes scenes back to back in the common text format.
///
/// Pedestrian ids are renumbered and scenes are laid out on disjoint frame
/// ranges separated by one empty frame, so re-parsing and re-windowing with
/// the same `t_pred` yields exactly these scenes in order.
pub fn write_dataset(scenes: &[Scene], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("# frame_id ped_id x y\n");
    let mut frame = 0u64;
    let mut ped = 0u64;
    for scene in scenes {
        let len = scene.len().unwrap_or(0) as u64;
        for t in &scene.trajectories {
            for (k, p) in t.points.iter().enumerate() {
                out.push_str(&format!(
                    "{} {} {} {}\n",
                    frame + k as u64 * WRITE_FRAME_STRIDE,
                    ped,
                    p.x,
                    p.y
                ));
            }
            ped += 1;
        }
        frame += (len + 1) * WRITE_FRAME_STRIDE;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Frame of the first sample of scene `index` as laid out by [`write_dataset`].
pub fn written_start_frame(index: usize, t_pred: usize) -> u64 {
    index as u64 * (t_pred as u64 + 1) * WRITE_FRAME_STRIDE
}
