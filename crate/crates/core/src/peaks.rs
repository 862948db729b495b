//! Candidate selection on a likelihood map.
//!
//! The map stores distances, so it is flipped into scores (`max - value`) and
//! local maxima are picked with a suppression queue: candidates leave a binary
//! heap best-first, and each accepted peak suppresses its square neighborhood
//! for everything still queued.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::features::{FeatureMask, LikelihoodMap};

/// Inverted likelihood values. Invalid positions hold `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGrid {
    width: usize,
    height: usize,
    scores: Vec<f64>,
    /// Largest valid map value; `raw = offset - score`.
    offset: f64,
}

impl ScoreGrid {
    /// Wraps raw scores, using `-inf` (or NaN) for positions that may never be picked.
    pub fn new(width: usize, height: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != width * height {
            return Err(Error::DimensionMismatch(format!("{} scores for a {width}x{height} grid", scores.len())));
        }
        let scores = scores.into_iter().map(|s| if s.is_nan() { f64::NEG_INFINITY } else { s }).collect();
        Ok(Self { width, height, scores, offset: 0.0 })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.scores[y * self.width + x]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub x: usize,
    pub y: usize,
    /// Inverted value; higher is more likely.
    pub score: f64,
    /// The likelihood-map distance at this position.
    pub raw_distance: f64,
}

/// `score = max_valid - value` at valid positions, `-inf` elsewhere.
pub fn invert_map(map: &LikelihoodMap) -> Result<ScoreGrid> {
    let max = map
        .values()
        .iter()
        .flatten()
        .copied()
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        .ok_or(Error::NoValidEntries)?;
    let scores = map.values().iter().map(|v| v.map_or(f64::NEG_INFINITY, |v| max - v)).collect();
    Ok(ScoreGrid { width: map.width(), height: map.height(), scores, offset: max })
}

/// Suppression radius for a feature: half the larger stencil side, rounded up.
pub fn default_radius(mask: &FeatureMask) -> usize {
    mask.max_side().div_ceil(2).max(1)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    score: f64,
    x: usize,
    y: usize,
}

// Max-heap order: higher score first, then smaller (y, x).
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score).then_with(|| (other.y, other.x).cmp(&(self.y, self.x)))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

/// Priority queue whose accepted elements suppress lower-ranked elements in
/// their square domain.
struct SuppressionQueue {
    heap: BinaryHeap<Candidate>,
    suppressed: Vec<bool>,
    width: usize,
    height: usize,
    radius: usize,
}

impl SuppressionQueue {
    fn new(width: usize, height: usize, radius: usize) -> Self {
        Self { heap: BinaryHeap::new(), suppressed: vec![false; width * height], width, height, radius }
    }

    fn push(&mut self, c: Candidate) {
        self.heap.push(c);
    }

    /// Next unsuppressed candidate; it then suppresses its own domain.
    fn pop_accepted(&mut self) -> Option<Candidate> {
        while let Some(c) = self.heap.pop() {
            if self.suppressed[c.y * self.width + c.x] {
                continue;
            }
            let (x0, x1) = (c.x.saturating_sub(self.radius), (c.x + self.radius).min(self.width - 1));
            let (y0, y1) = (c.y.saturating_sub(self.radius), (c.y + self.radius).min(self.height - 1));
            for y in y0..=y1 {
                self.suppressed[y * self.width + x0..=y * self.width + x1].fill(true);
            }
            return Some(c);
        }
        None
    }
}

/// Sliding maximum over a `2r + 1` window along rows, then columns.
fn window_max(grid: &ScoreGrid, radius: usize) -> Vec<f64> {
    let (w, h) = (grid.width, grid.height);
    let mut rows = vec![f64::NEG_INFINITY; w * h];
    for y in 0..h {
        let line = &grid.scores[y * w..(y + 1) * w];
        for x in 0..w {
            let (a, b) = (x.saturating_sub(radius), (x + radius).min(w - 1));
            rows[y * w + x] = line[a..=b].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
    }
    let mut out = vec![f64::NEG_INFINITY; w * h];
    for x in 0..w {
        for y in 0..h {
            let (a, b) = (y.saturating_sub(radius), (y + radius).min(h - 1));
            out[y * w + x] = (a..=b).map(|yy| rows[yy * w + x]).fold(f64::NEG_INFINITY, f64::max);
        }
    }
    out
}

/// Up to `max_peaks` peaks, best first. Every peak scores at least as high as
/// anything within Chebyshev distance `radius`, and no two peaks are that
/// close. Ties go to the smaller `(y, x)`.
pub fn suppress_non_maxima(scores: &ScoreGrid, radius: usize, max_peaks: usize) -> Result<Vec<Peak>> {
    if scores.width == 0 || scores.height == 0 {
        return Err(Error::InvalidParameter("empty score grid".into()));
    }
    if radius == 0 || max_peaks == 0 {
        return Err(Error::InvalidParameter(format!("radius {radius} and max_peaks {max_peaks} must be positive")));
    }
    let local_max = window_max(scores, radius);
    let mut queue = SuppressionQueue::new(scores.width, scores.height, radius);
    for (i, (&s, &m)) in scores.scores.iter().zip(&local_max).enumerate() {
        if s.is_finite() && s >= m {
            queue.push(Candidate { score: s, x: i % scores.width, y: i / scores.width });
        }
    }
    let mut peaks = Vec::new();
    while peaks.len() < max_peaks {
        let Some(c) = queue.pop_accepted() else { break };
        peaks.push(Peak { x: c.x, y: c.y, score: c.score, raw_distance: scores.offset - c.score });
    }
    Ok(peaks)
}
