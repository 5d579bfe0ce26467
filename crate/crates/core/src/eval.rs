//! Displacement metrics, best-of-N evaluation, leave-one-out benchmarking
//! and SVG scene plots.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Point, Scene};
use crate::error::{Error, Result};
use crate::models::{GeneratorModel, SceneBatch};
use crate::nn::{sample_standard_normal, Tensor};

/// Samples drawn per scene by default.
pub const DEFAULT_N: usize = 20;

fn check_lengths(pred: &[Point], gt: &[Point]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!(
            "prediction has {} points, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Shape("empty trajectories".into()));
    }
    Ok(())
}

/// Mean Euclidean distance over timesteps.
pub fn ade(pred: &[Point], gt: &[Point]) -> Result<f64> {
    check_lengths(pred, gt)?;
    let sum: f64 = pred.iter().zip(gt).map(|(&p, &g)| (p - g).norm()).sum();
    Ok(sum / pred.len() as f64)
}

/// Euclidean distance at the last timestep.
pub fn fde(pred: &[Point], gt: &[Point]) -> Result<f64> {
    check_lengths(pred, gt)?;
    Ok((pred[pred.len() - 1] - gt[gt.len() - 1]).norm())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "dataset")]
    pub dataset_name: String,
    pub ade: f64,
    pub fde: f64,
    pub n_scenes: usize,
    #[serde(rename = "N")]
    pub n_samples: usize,
    pub seed: u64,
}

/// Best sample of one scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneScore {
    /// Index of the selected sample.
    pub sample: usize,
    /// Pedestrian-mean ADE of that sample.
    pub ade: f64,
    /// Pedestrian-mean FDE of that same sample.
    pub fde: f64,
}

/// Absolute predictions of `n` samples for one scene:
/// `out[sample][ped]` is the predicted continuation.
pub fn sample_predictions(
    g: &GeneratorModel,
    scene: &Scene,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<Vec<Point>>>> {
    if n == 0 {
        return Err(Error::Argument("N must be at least 1".into()));
    }
    let batch = SceneBatch::from_scenes(std::slice::from_ref(scene))?;
    if batch.len() != g.t_pred {
        return Err(Error::Shape(format!(
            "scene has {} points, model expects {}",
            batch.len(),
            g.t_pred
        )));
    }
    let peds = batch.num_peds();
    let obs = batch.prefix(g.t_obs).repeat(n);
    // Row-major draw: sample j uses rows j*peds.., so a smaller N sees a
    // prefix of the same noise.
    let z: Tensor = sample_standard_normal(&[n * peds, g.net.noise_dim()], rng);
    let pred = g.predict(&obs, &z)?;
    let mut out = vec![vec![Vec::with_capacity(pred.len()); peds]; n];
    for step in &pred {
        for (j, sample) in out.iter_mut().enumerate() {
            for (i, path) in sample.iter_mut().enumerate() {
                let r = j * peds + i;
                let o = Point::new(batch.origins.get(i, 0), batch.origins.get(i, 1));
                path.push(Point::new(step.get(r, 0), step.get(r, 1)) + o);
            }
        }
    }
    Ok(out)
}

/// Per-scene noise stream, independent of evaluation order.
pub fn scene_rng(seed: u64, scene_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(scene_index as u64);
    rng
}

/// Minimum-ADE sample of each scene, scored in absolute coordinates.
pub fn best_of_n_scores(
    g: &GeneratorModel,
    scenes: &[Scene],
    n: usize,
    seed: u64,
) -> Result<Vec<SceneScore>> {
    if n == 0 {
        return Err(Error::Argument("N must be at least 1".into()));
    }
    scenes
        .iter()
        .enumerate()
        .map(|(idx, scene)| {
            let samples = sample_predictions(g, scene, n, &mut scene_rng(seed, idx))?;
            let mut best: Option<SceneScore> = None;
            for (j, sample) in samples.iter().enumerate() {
                let (mut a, mut f) = (0.0, 0.0);
                for (path, traj) in sample.iter().zip(&scene.trajectories) {
                    let gt = &traj.points[g.t_obs..];
                    a += ade(path, gt)?;
                    f += fde(path, gt)?;
                }
                let peds = sample.len() as f64;
                let s = SceneScore {
                    sample: j,
                    ade: a / peds,
                    fde: f / peds,
                };
                if best.map_or(true, |b| s.ade < b.ade) {
                    best = Some(s);
                }
            }
            Ok(best.expect("n >= 1"))
        })
        .collect()
}

/// Best-of-N ADE/FDE averaged over scenes.
pub fn best_of_n_eval(
    g: &GeneratorModel,
    name: &str,
    scenes: &[Scene],
    n: usize,
    seed: u64,
) -> Result<MetricsReport> {
    if scenes.is_empty() {
        return Err(Error::Argument(format!("no scenes to evaluate in {name}")));
    }
    let scores = best_of_n_scores(g, scenes, n, seed)?;
    let k = scores.len() as f64;
    Ok(MetricsReport {
        dataset_name: name.to_string(),
        ade: scores.iter().map(|s| s.ade).sum::<f64>() / k,
        fde: scores.iter().map(|s| s.fde).sum::<f64>() / k,
        n_scenes: scores.len(),
        n_samples: n,
        seed,
    })
}

/// A named evaluation corpus.
#[derive(Debug, Clone)]
pub struct NamedDataset {
    pub name: String,
    pub scenes: Vec<Scene>,
}

/// Per-split reports followed by the average row.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub splits: Vec<MetricsReport>,
    pub average: MetricsReport,
}

impl Benchmark {
    pub fn rows(&self) -> Vec<MetricsReport> {
        let mut v = self.splits.clone();
        v.push(self.average.clone());
        v
    }
}

pub fn average_row(reports: &[MetricsReport]) -> Result<MetricsReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Argument("no reports to average".into()))?;
    let k = reports.len() as f64;
    Ok(MetricsReport {
        dataset_name: "average".into(),
        ade: reports.iter().map(|r| r.ade).sum::<f64>() / k,
        fde: reports.iter().map(|r| r.fde).sum::<f64>() / k,
        n_scenes: reports.iter().map(|r| r.n_scenes).sum(),
        n_samples: first.n_samples,
        seed: first.seed,
    })
}

/// For every split, trains on the union of the others via `train` and
/// evaluates best-of-N on the held-out split.
pub fn leave_one_out<F>(
    datasets: &[NamedDataset],
    n: usize,
    seed: u64,
    mut train: F,
) -> Result<Benchmark>
where
    F: FnMut(&str, &[Scene]) -> Result<GeneratorModel>,
{
    if datasets.len() < 2 {
        return Err(Error::Argument(format!(
            "leave-one-out needs at least 2 datasets, got {}",
            datasets.len()
        )));
    }
    let mut splits = Vec::with_capacity(datasets.len());
    for (i, held) in datasets.iter().enumerate() {
        let train_scenes: Vec<Scene> = datasets
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, d)| d.scenes.iter().cloned())
            .collect();
        let g = train(&held.name, &train_scenes)?;
        splits.push(best_of_n_eval(&g, &held.name, &held.scenes, n, seed)?);
    }
    let average = average_row(&splits)?;
    Ok(Benchmark { splits, average })
}

/// Fixed-width text table.
pub fn format_table(rows: &[MetricsReport]) -> String {
    let w = rows
        .iter()
        .map(|r| r.dataset_name.len())
        .max()
        .unwrap_or(0)
        .max("dataset".len());
    let mut s = format!(
        "{:<w$}  {:>8}  {:>8}  {:>8}  {:>4}  {:>6}\n",
        "dataset", "ADE", "FDE", "scenes", "N", "seed"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<w$}  {:>8.4}  {:>8.4}  {:>8}  {:>4}  {:>6}",
            r.dataset_name, r.ade, r.fde, r.n_scenes, r.n_samples, r.seed
        );
    }
    s
}

pub fn to_csv(rows: &[MetricsReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

pub fn write_csv(rows: &[MetricsReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_csv(rows)?).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsReport>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Data(format!("{}: {e}", path.display()))))
        .collect()
}

/// A named set of per-pedestrian predicted paths, absolute coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedPrediction {
    pub name: String,
    pub paths: Vec<Vec<Point>>,
}

const PALETTE: [&str; 6] = [
    "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];
const SIZE: f64 = 600.0;
const MARGIN: f64 = 40.0;

/// SVG of the scene: observed history solid, ground-truth future dashed,
/// one colored style per prediction, plus a legend.
pub fn render_svg(scene: &Scene, t_obs: usize, predictions: &[NamedPrediction]) -> String {
    let all = scene
        .trajectories
        .iter()
        .flat_map(|t| t.points.iter())
        .chain(predictions.iter().flat_map(|p| p.paths.iter().flatten()));
    let (mut lo, mut hi) = (
        Point::new(f64::INFINITY, f64::INFINITY),
        Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for p in all {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    if !lo.x.is_finite() {
        lo = Point::ORIGIN;
        hi = Point::new(1.0, 1.0);
    }
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-6);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let map = |p: &Point| {
        (
            MARGIN + (p.x - lo.x) * scale,
            SIZE - MARGIN - (p.y - lo.y) * scale,
        )
    };
    let poly = |pts: &[Point]| -> String {
        pts.iter()
            .map(|p| {
                let (x, y) = map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for t in &scene.trajectories {
        let split = t_obs.min(t.points.len());
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="black" stroke-width="2"/>"#,
            poly(&t.points[..split])
        );
        if split < t.points.len() {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="black" stroke-width="2" stroke-dasharray="6,4"/>"#,
                poly(&t.points[split.saturating_sub(1)..])
            );
        }
    }
    for (k, p) in predictions.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        for path in &p.paths {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                poly(path)
            );
        }
    }
    let mut legend: Vec<(String, String, &str)> = vec![
        ("observed".into(), "black".into(), ""),
        (
            "ground truth".into(),
            "black".into(),
            r#" stroke-dasharray="6,4""#,
        ),
    ];
    for (k, p) in predictions.iter().enumerate() {
        legend.push((p.name.clone(), PALETTE[k % PALETTE.len()].into(), ""));
    }
    for (k, (name, color, dash)) in legend.iter().enumerate() {
        let y = 16.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="8" y1="{y}" x2="32" y2="{y}" stroke="{color}" stroke-width="2"{dash}/><text x="38" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            y + 4.0,
            escape_xml(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn plot_scene(
    scene: &Scene,
    t_obs: usize,
    predictions: &[NamedPrediction],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_svg(scene, t_obs, predictions)).map_err(|e| Error::io(path, e))
}
