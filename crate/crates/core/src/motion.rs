//! Bag-of-frames motion maps.
//!
//! A video of `N` frames becomes a matrix with `N-1` rows: absolute
//! differences of consecutive frames (the first difference is defined as the
//! zero image), expanded by summing four copies translated by `tau` pixels,
//! then pooled onto a `round(h*gamma) x round(w*gamma)` grid of near-equal
//! rectangular patches by per-patch averaging. Each pooled map is flattened
//! row-wise; temporal order of the rows is deliberately not meaningful.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::frameio::Video;

/// Parameter and shape errors in the motion pipeline.
#[derive(Debug, Error)]
pub enum MotionError {
    #[error("tau {tau} must be smaller than the shortest frame side {min_dim}")]
    InvalidTau { tau: usize, min_dim: usize },
    #[error("gamma {gamma} outside (0,1]")]
    InvalidGamma { gamma: f64 },
    #[error("pooled grid would be {rows}x{cols}; both dims must be at least 1")]
    EmptyPooledGrid { rows: usize, cols: usize },
    #[error("inconsistent map lengths: expected {expected}, got {got} in row {row}")]
    RaggedRows { expected: usize, got: usize, row: usize },
}

/// A dense `height x width` grid of real values, row-major. Used for
/// difference images, where values are nonnegative motion energies.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Grid {
    pub fn zeros(width: usize, height: usize) -> Self {
        Grid { width, height, values: vec![0.0; width * height] }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height, "grid value count");
        Grid { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.values[y * self.width + x] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One pooled motion map: per-patch average motion energy, rows concatenated.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionMap {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl MotionMap {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * cols, "motion map length");
        MotionMap { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Euclidean distance to another map of the same length.
    pub fn distance(&self, other: &MotionMap) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// The motion-map matrix of one video: one row per difference image, one
/// column per patch.
#[derive(Debug, Clone, PartialEq)]
pub struct BagOfFrames {
    matrix: DMatrix<f64>,
    map_rows: usize,
    map_cols: usize,
    video_id: String,
}

impl BagOfFrames {
    /// Build a bag from explicit rows. Rows must all have length
    /// `map_rows * map_cols`.
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        map_rows: usize,
        map_cols: usize,
        video_id: impl Into<String>,
    ) -> Result<Self, MotionError> {
        let n_b = map_rows * map_cols;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_b {
                return Err(MotionError::RaggedRows { expected: n_b, got: row.len(), row: i });
            }
        }
        let matrix = DMatrix::from_row_iterator(rows.len(), n_b, rows.iter().flatten().copied());
        Ok(BagOfFrames { matrix, map_rows, map_cols, video_id: video_id.into() })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Number of motion maps (matrix rows).
    pub fn num_maps(&self) -> usize {
        self.matrix.nrows()
    }

    /// Length of each motion map (matrix columns).
    pub fn map_len(&self) -> usize {
        self.matrix.ncols()
    }

    /// Pooled grid dimensions `(rows, cols)`.
    pub fn grid(&self) -> (usize, usize) {
        (self.map_rows, self.map_cols)
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    #[inline]
    pub fn value(&self, map: usize, patch: usize) -> f64 {
        self.matrix[(map, patch)]
    }

    pub fn map(&self, index: usize) -> MotionMap {
        let values = self.matrix.row(index).iter().copied().collect();
        MotionMap::new(self.map_rows, self.map_cols, values)
    }

    /// Copy with rows reordered by `perm` (a permutation of `0..num_maps`).
    /// The representation is orderless, so this must not affect any
    /// downstream classification.
    pub fn permuted(&self, perm: &[usize]) -> BagOfFrames {
        assert_eq!(perm.len(), self.num_maps());
        let mut matrix = DMatrix::zeros(self.matrix.nrows(), self.matrix.ncols());
        for (dst, &src) in perm.iter().enumerate() {
            matrix.set_row(dst, &self.matrix.row(src));
        }
        BagOfFrames { matrix, ..self.clone() }
    }
}

/// Absolute difference images of consecutive frames.
///
/// For a video of `N >= 2` frames the result has `N-1` grids: grid 0 is all
/// zeros by convention, and grid `i >= 1` is `|frame[i+1] - frame[i]|`. A
/// single-frame video yields an empty list; [`bag_of_frames`] turns that into
/// one all-zero row so downstream classification stays defined.
pub fn difference_images(video: &Video) -> Vec<Grid> {
    let frames = video.frames();
    if frames.len() < 2 {
        return Vec::new();
    }
    let (w, h) = (video.width(), video.height());
    let mut grids = Vec::with_capacity(frames.len() - 1);
    grids.push(Grid::zeros(w, h));
    for i in 1..frames.len() - 1 {
        let a = frames[i].pixels();
        let b = frames[i + 1].pixels();
        let values = a.iter().zip(b).map(|(x, y)| (y - x).abs()).collect();
        grids.push(Grid::from_values(w, h, values));
    }
    grids
}

/// Grow motion regions by summing the grid with four copies translated by
/// `tau` pixels (left, right, up, down). Out-of-range taps read as zero, so
/// `tau = 0` returns `5 * d`.
pub fn expand_motion(d: &Grid, tau: usize) -> Result<Grid, MotionError> {
    let (w, h) = (d.width(), d.height());
    if tau >= w.min(h) {
        return Err(MotionError::InvalidTau { tau, min_dim: w.min(h) });
    }
    let mut out = Grid::zeros(w, h);
    let t = tau as isize;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut sum = 0.0;
            for (dx, dy) in [(0, 0), (t, 0), (-t, 0), (0, t), (0, -t)] {
                let (sx, sy) = (x + dx, y + dy);
                if sx >= 0 && sx < w as isize && sy >= 0 && sy < h as isize {
                    sum += d.get(sx as usize, sy as usize);
                }
            }
            out.set(x as usize, y as usize, sum);
        }
    }
    Ok(out)
}

/// Pool a difference image onto a `round(h*gamma) x round(w*gamma)` grid of
/// patches, averaging `|motion|` within each patch, rows concatenated.
pub fn pool_to_grid(d: &Grid, gamma: f64) -> Result<MotionMap, MotionError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(MotionError::InvalidGamma { gamma });
    }
    let rows = (d.height() as f64 * gamma).round() as usize;
    let cols = (d.width() as f64 * gamma).round() as usize;
    pool_to_dims(d, rows, cols)
}

/// Pool onto an explicit `rows x cols` grid. Patch boundaries sit at
/// `round(k*h/rows)` and `round(k*w/cols)`, so patch sides differ by at most
/// one pixel and every pixel lands in exactly one patch.
pub fn pool_to_dims(d: &Grid, rows: usize, cols: usize) -> Result<MotionMap, MotionError> {
    if rows == 0 || cols == 0 || rows > d.height() || cols > d.width() {
        return Err(MotionError::EmptyPooledGrid { rows, cols });
    }
    let h = d.height() as f64;
    let w = d.width() as f64;
    let row_edge = |k: usize| (k as f64 * h / rows as f64).round() as usize;
    let col_edge = |k: usize| (k as f64 * w / cols as f64).round() as usize;

    let mut values = Vec::with_capacity(rows * cols);
    for pr in 0..rows {
        let (y0, y1) = (row_edge(pr), row_edge(pr + 1));
        for pc in 0..cols {
            let (x0, x1) = (col_edge(pc), col_edge(pc + 1));
            let mut sum = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += d.get(x, y).abs();
                }
            }
            values.push(sum / ((y1 - y0) * (x1 - x0)) as f64);
        }
    }
    Ok(MotionMap::new(rows, cols, values))
}

/// Full motion pipeline for one video: difference images, motion expansion,
/// grid pooling, stacked into the `(N-1) x N_b` bag-of-frames matrix. A
/// single-frame video yields one all-zero row.
pub fn bag_of_frames(video: &Video, tau: usize, gamma: f64) -> Result<BagOfFrames, MotionError> {
    let diffs = difference_images(video);
    let probe = Grid::zeros(video.width(), video.height());
    // Validate parameters against frame dims even for single-frame videos.
    expand_motion(&probe, tau)?;
    let zero_map = pool_to_grid(&probe, gamma)?;
    let (map_rows, map_cols) = (zero_map.rows(), zero_map.cols());

    let mut rows = Vec::with_capacity(diffs.len().max(1));
    if diffs.is_empty() {
        rows.push(zero_map.values().to_vec());
    } else {
        for d in &diffs {
            let expanded = expand_motion(d, tau)?;
            let map = pool_to_grid(&expanded, gamma)?;
            rows.push(map.values().to_vec());
        }
    }
    BagOfFrames::from_rows(rows, map_rows, map_cols, video.id())
}
