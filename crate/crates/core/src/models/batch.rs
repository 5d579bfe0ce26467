use crate::data::{Point, Scene, Trajectory};
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Scenes stacked row-wise: every pedestrian of every scene is one row.
///
/// Coordinates are stored relative to each trajectory's first point; the
/// absolute first points are kept in `origins`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBatch {
    /// One `n x 2` tensor per timestep.
    pub steps: Vec<Tensor>,
    /// `n x 2` absolute start positions.
    pub origins: Tensor,
    /// Row range `[start, end)` of each scene.
    pub spans: Vec<(usize, usize)>,
    pub ped_ids: Vec<u64>,
    pub start_frames: Vec<u64>,
}

/// Ordered neighbor pairs `(i, j)`, `i != j`, within each scene.
#[derive(Debug, Clone, PartialEq)]
pub struct PairIndex {
    pub src: Vec<usize>,
    pub nbr: Vec<usize>,
    /// For every pedestrian, the pair rows where it is the source.
    pub groups: Vec<Vec<usize>>,
}

impl PairIndex {
    pub fn from_spans(spans: &[(usize, usize)], n: usize) -> Self {
        let mut src = Vec::new();
        let mut nbr = Vec::new();
        let mut groups = vec![Vec::new(); n];
        for &(start, end) in spans {
            for i in start..end {
                for j in start..end {
                    if i != j {
                        groups[i].push(src.len());
                        src.push(i);
                        nbr.push(j);
                    }
                }
            }
        }
        Self { src, nbr, groups }
    }
}

impl SceneBatch {
    pub fn from_scenes(scenes: &[Scene]) -> Result<Self> {
        if scenes.is_empty() {
            return Err(Error::Argument("empty batch".into()));
        }
        let len = scenes[0]
            .len()
            .ok_or_else(|| Error::Data("scene without trajectories".into()))?;
        let mut rows: Vec<&Trajectory> = Vec::new();
        let mut spans = Vec::with_capacity(scenes.len());
        for s in scenes {
            match s.len() {
                Some(l) if l == len => {}
                other => {
                    return Err(Error::Contract(format!(
                        "scene at frame {} has length {:?}, batch length is {len}",
                        s.start_frame, other
                    )))
                }
            }
            spans.push((rows.len(), rows.len() + s.num_peds()));
            rows.extend(&s.trajectories);
        }
        let n = rows.len();
        let mut origins = Vec::with_capacity(2 * n);
        for t in &rows {
            origins.push(t.points[0].x);
            origins.push(t.points[0].y);
        }
        let steps = (0..len)
            .map(|k| {
                let mut data = Vec::with_capacity(2 * n);
                for t in &rows {
                    let p = t.points[k] - t.points[0];
                    data.push(p.x);
                    data.push(p.y);
                }
                Tensor::matrix(n, 2, data)
            })
            .collect();
        Ok(Self {
            steps,
            origins: Tensor::matrix(n, 2, origins),
            spans,
            ped_ids: rows.iter().map(|t| t.ped_id).collect(),
            start_frames: scenes.iter().map(|s| s.start_frame).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn num_peds(&self) -> usize {
        self.origins.rows()
    }

    pub fn num_scenes(&self) -> usize {
        self.spans.len()
    }

    pub fn pairs(&self) -> PairIndex {
        PairIndex::from_spans(&self.spans, self.num_peds())
    }

    /// Same pedestrians with different per-step coordinates.
    pub fn with_steps(&self, steps: Vec<Tensor>) -> Self {
        Self {
            steps,
            origins: self.origins.clone(),
            spans: self.spans.clone(),
            ped_ids: self.ped_ids.clone(),
            start_frames: self.start_frames.clone(),
        }
    }

    pub fn prefix(&self, t: usize) -> Self {
        self.with_steps(self.steps[..t].to_vec())
    }

    pub fn suffix(&self, t: usize) -> Vec<Tensor> {
        self.steps[t..].to_vec()
    }

    /// `copies` back-to-back replicas, each replica a separate set of scenes.
    pub fn repeat(&self, copies: usize) -> Self {
        let n = self.num_peds();
        let mut steps = Vec::with_capacity(self.len());
        for s in &self.steps {
            let mut d = Vec::with_capacity(s.len() * copies);
            for _ in 0..copies {
                d.extend_from_slice(s.data());
            }
            steps.push(Tensor::matrix(n * copies, 2, d));
        }
        let mut o = Vec::with_capacity(self.origins.len() * copies);
        let mut spans = Vec::with_capacity(self.spans.len() * copies);
        let mut ids = Vec::with_capacity(n * copies);
        let mut frames = Vec::with_capacity(self.spans.len() * copies);
        for c in 0..copies {
            o.extend_from_slice(self.origins.data());
            spans.extend(self.spans.iter().map(|&(a, b)| (a + c * n, b + c * n)));
            ids.extend_from_slice(&self.ped_ids);
            frames.extend_from_slice(&self.start_frames);
        }
        Self {
            steps,
            origins: Tensor::matrix(n * copies, 2, o),
            spans,
            ped_ids: ids,
            start_frames: frames,
        }
    }

    /// Back to absolute-coordinate scenes.
    pub fn to_scenes(&self) -> Vec<Scene> {
        self.spans
            .iter()
            .zip(&self.start_frames)
            .map(|(&(a, b), &frame)| {
                let trajectories = (a..b)
                    .map(|i| {
                        let o = Point::new(self.origins.get(i, 0), self.origins.get(i, 1));
                        let points = self
                            .steps
                            .iter()
                            .map(|s| Point::new(s.get(i, 0), s.get(i, 1)) + o)
                            .collect();
                        Trajectory::new(self.ped_ids[i], points)
                    })
                    .collect();
                Scene::new(frame, trajectories)
            })
            .collect()
    }
}

/// Relative points of row `i` across `steps`.
pub fn row_points(steps: &[Tensor], i: usize) -> Vec<Point> {
    steps
        .iter()
        .map(|s| Point::new(s.get(i, 0), s.get(i, 1)))
        .collect()
}
