//! Temporal segmentation of multi-gesture videos.
//!
//! Test videos are reduced to time-ordered motion maps at a very coarse grid
//! (default 3x3, no motion expansion). A left-to-right scan aligns every
//! training sequence against the test subsequence at the current cut with
//! open-end DTW and commits the span with the lowest length-normalized cost;
//! committed spans whose mean step energy falls under a fraction of the
//! video's median step energy are discarded as quiescent padding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frameio::Video;
use crate::motion::{difference_images, pool_to_dims, pool_to_grid, MotionError, MotionMap};

/// Errors from coarse-sequence extraction and segmentation.
#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("coarse sequence is empty")]
    EmptySequence,
    #[error("coarse grid mismatch: {a_rows}x{a_cols} vs {b_rows}x{b_cols}")]
    GridMismatch {
        a_rows: usize,
        a_cols: usize,
        b_rows: usize,
        b_cols: usize,
    },
    #[error("no training sequences supplied")]
    NoTrainingSequences,
    #[error("invalid segmentation options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Motion(#[from] MotionError),
}

/// Time-ordered coarse motion maps of one video, one map per difference
/// image (the first is the conventional zero map).
#[derive(Debug, Clone)]
pub struct CoarseSequence {
    maps: Vec<MotionMap>,
    video_id: String,
}

impl CoarseSequence {
    pub fn new(maps: Vec<MotionMap>, video_id: impl Into<String>) -> Result<Self, SegmentError> {
        if maps.is_empty() {
            return Err(SegmentError::EmptySequence);
        }
        let (r, c) = (maps[0].rows(), maps[0].cols());
        for m in &maps {
            if m.rows() != r || m.cols() != c {
                return Err(SegmentError::GridMismatch {
                    a_rows: r,
                    a_cols: c,
                    b_rows: m.rows(),
                    b_cols: m.cols(),
                });
            }
        }
        Ok(CoarseSequence { maps, video_id: video_id.into() })
    }

    pub fn maps(&self) -> &[MotionMap] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.maps[0].rows(), self.maps[0].cols())
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    /// Mean motion energy per step.
    fn energies(&self) -> Vec<f64> {
        self.maps
            .iter()
            .map(|m| m.values().iter().sum::<f64>() / m.len() as f64)
            .collect()
    }
}

/// Coarse motion maps at scale `coarse_gamma`: the bag-of-frames pipeline
/// without motion expansion, order preserved. A single-frame video yields
/// one zero map.
pub fn coarse_sequence(video: &Video, coarse_gamma: f64) -> Result<CoarseSequence, SegmentError> {
    build_coarse(video, |d| pool_to_grid(d, coarse_gamma))
}

/// [`coarse_sequence`] with an explicit target grid instead of a scale.
pub fn coarse_sequence_dims(
    video: &Video,
    rows: usize,
    cols: usize,
) -> Result<CoarseSequence, SegmentError> {
    build_coarse(video, |d| pool_to_dims(d, rows, cols))
}

fn build_coarse(
    video: &Video,
    pool: impl Fn(&crate::motion::Grid) -> Result<MotionMap, MotionError>,
) -> Result<CoarseSequence, SegmentError> {
    let diffs = difference_images(video);
    let maps = if diffs.is_empty() {
        vec![pool(&crate::motion::Grid::zeros(video.width(), video.height()))?]
    } else {
        diffs.iter().map(&pool).collect::<Result<Vec<_>, _>>()?
    };
    CoarseSequence::new(maps, video.id())
}

#[derive(Clone, Copy)]
struct DtwCell {
    cost: f64,
    len: u32,
}

/// Cumulative-cost table for aligning `a` (rows) against `b` (columns) with
/// Euclidean local cost and steps {(1,0),(0,1),(1,1)}. `dp[i][j]` aligns
/// `a[..i]` with `b[..j]`; `len` counts matched pairs along the chosen path
/// (diagonal preferred on ties, then vertical, then horizontal).
fn dtw_table(a: &[MotionMap], b: &[MotionMap]) -> Vec<Vec<DtwCell>> {
    let (m, n) = (a.len(), b.len());
    let inf = DtwCell { cost: f64::INFINITY, len: 0 };
    let mut dp = vec![vec![inf; n + 1]; m + 1];
    dp[0][0] = DtwCell { cost: 0.0, len: 0 };
    for i in 1..=m {
        for j in 1..=n {
            let mut best = dp[i - 1][j - 1];
            if dp[i - 1][j].cost < best.cost {
                best = dp[i - 1][j];
            }
            if dp[i][j - 1].cost < best.cost {
                best = dp[i][j - 1];
            }
            if best.cost.is_finite() {
                dp[i][j] = DtwCell {
                    cost: best.cost + a[i - 1].distance(&b[j - 1]),
                    len: best.len + 1,
                };
            }
        }
    }
    dp
}

/// DTW distance between two coarse sequences: minimum cumulative Euclidean
/// cost over monotone alignments, normalized by the warping-path length.
pub fn dtw_distance(a: &CoarseSequence, b: &CoarseSequence) -> Result<f64, SegmentError> {
    if a.is_empty() || b.is_empty() {
        return Err(SegmentError::EmptySequence);
    }
    let (ar, ac) = a.grid();
    let (br, bc) = b.grid();
    if (ar, ac) != (br, bc) {
        return Err(SegmentError::GridMismatch { a_rows: ar, a_cols: ac, b_rows: br, b_cols: bc });
    }
    let dp = dtw_table(a.maps(), b.maps());
    let cell = dp[a.len()][b.len()];
    Ok(cell.cost / cell.len as f64)
}

/// Options for [`segment_video`]. Defaults were calibrated on synthetic
/// batches: 3x3 coarse grid, span length 8..=60 steps, quiescence threshold
/// 0.15 of the median step energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentOptions {
    pub coarse_rows: usize,
    pub coarse_cols: usize,
    pub l_min: usize,
    pub l_max: usize,
    pub theta_q: f64,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        SegmentOptions { coarse_rows: 3, coarse_cols: 3, l_min: 8, l_max: 60, theta_q: 0.15 }
    }
}

impl SegmentOptions {
    fn validate(&self) -> Result<(), SegmentError> {
        if self.coarse_rows == 0 || self.coarse_cols == 0 {
            return Err(SegmentError::InvalidOptions("coarse grid must be at least 1x1".into()));
        }
        if self.l_min == 0 || self.l_max < self.l_min {
            return Err(SegmentError::InvalidOptions(format!(
                "need 1 <= l_min <= l_max, got l_min={} l_max={}",
                self.l_min, self.l_max
            )));
        }
        if !(self.theta_q >= 0.0) {
            return Err(SegmentError::InvalidOptions(format!(
                "theta_q must be nonnegative, got {}",
                self.theta_q
            )));
        }
        Ok(())
    }
}

/// Temporal spans of single gestures: half-open 0-based frame ranges, in
/// order, non-overlapping. Quiescent padding is not covered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationResult {
    pub spans: Vec<(usize, usize)>,
}

/// Per-video spans as exchanged on disk: the `segment` output format and
/// the manual-segmentation input format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSpans {
    pub video: String,
    pub spans: Vec<(usize, usize)>,
}

/// Split a test video into single-gesture frame spans.
///
/// The video's coarse sequence is scanned left to right; at each cut, every
/// training sequence is aligned with open-end DTW against the window
/// starting there, and the `(gesture, end)` pair minimizing the normalized
/// cost over span lengths in `[l_min, l_max]` is committed. A tail shorter
/// than `l_min` merges into the previous span. Videos shorter than
/// `l_min + 1` frames come back as one whole-video span. Spans whose mean
/// step energy is at most `theta_q` times the video's median step energy
/// are discarded as quiescent.
pub fn segment_video(
    video: &Video,
    train_coarse: &[CoarseSequence],
    opts: &SegmentOptions,
) -> Result<SegmentationResult, SegmentError> {
    opts.validate()?;
    if train_coarse.is_empty() {
        return Err(SegmentError::NoTrainingSequences);
    }
    let test_seq = coarse_sequence_dims(video, opts.coarse_rows, opts.coarse_cols)?;
    for g in train_coarse {
        if g.grid() != test_seq.grid() {
            return Err(SegmentError::GridMismatch {
                a_rows: g.grid().0,
                a_cols: g.grid().1,
                b_rows: test_seq.grid().0,
                b_cols: test_seq.grid().1,
            });
        }
    }

    let m = test_seq.len();
    let mut step_spans: Vec<(usize, usize)> = Vec::new();
    if m < opts.l_min {
        step_spans.push((0, m));
    } else {
        let mut cut = 0;
        while cut < m {
            let remaining = m - cut;
            if remaining < opts.l_min {
                // Tail too short for its own span.
                match step_spans.last_mut() {
                    Some(last) => last.1 = m,
                    None => step_spans.push((0, m)),
                }
                break;
            }
            let l_cap = remaining.min(opts.l_max);
            let window = &test_seq.maps()[cut..cut + l_cap];
            let mut best: Option<(f64, usize)> = None;
            for g in train_coarse {
                let dp = dtw_table(g.maps(), window);
                let full = g.len();
                for l in opts.l_min..=l_cap {
                    let cell = dp[full][l];
                    if !cell.cost.is_finite() {
                        continue;
                    }
                    let norm = cell.cost / cell.len as f64;
                    let better = match best {
                        None => true,
                        Some((bc, bl)) => norm < bc || (norm == bc && l < bl),
                    };
                    if better {
                        best = Some((norm, l));
                    }
                }
            }
            let (_, l) = best.expect("window at least l_min steps long");
            step_spans.push((cut, cut + l));
            cut += l;
        }
    }

    // Steps to frames: step k pairs frames k and k+1, the final frame rides
    // with the last span.
    let last = step_spans.len() - 1;
    let frame_spans: Vec<(usize, usize)> = step_spans
        .iter()
        .enumerate()
        .map(|(i, &(s, e))| if i == last { (s, e + 1) } else { (s, e) })
        .collect();

    // Quiescence discard.
    let energies = test_seq.energies();
    let median = median(&energies);
    let spans = step_spans
        .iter()
        .zip(&frame_spans)
        .filter(|((s, e), _)| {
            let span = &energies[*s..*e];
            let mean = span.iter().sum::<f64>() / span.len() as f64;
            mean > opts.theta_q * median
        })
        .map(|(_, &fs)| fs)
        .collect();
    Ok(SegmentationResult { spans })
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
