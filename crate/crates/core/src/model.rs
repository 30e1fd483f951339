//! Per-gesture PCA models over motion-map bags and reconstruction-error
//! classification.
//!
//! Training centers the bag's columns, takes a thin SVD of the centered
//! matrix, and keeps the top `c` singular values with their right singular
//! vectors. A test bag is projected into each model's whitened component
//! space, reconstructed back, and assigned the label whose model yields the
//! lowest mean row-wise reconstruction distance. The whitening exponents
//! cancel, so reconstruct-after-project is exactly the orthogonal projection
//! onto the component span plus the mean.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frameio::{load_video_as, BatchManifest, Modality};
use crate::motion::{bag_of_frames, BagOfFrames, MotionError};

/// Relative floor under which singular values count as numerically zero:
/// `SV_FLOOR_REL * s_max`. Keeps `s^(-1/2)` away from blowup.
pub const SV_FLOOR_REL: f64 = 1e-10;

/// Errors from model fitting, projection, and classification.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bag of frames has no rows")]
    EmptyBag,
    #[error("component count must be at least 1")]
    InvalidComponentCount,
    #[error(
        "grid mismatch: bag is {bag_rows}x{bag_cols}, model expects {model_rows}x{model_cols}"
    )]
    GridMismatch {
        bag_rows: usize,
        bag_cols: usize,
        model_rows: usize,
        model_cols: usize,
    },
    #[error("projection has {got} columns, model keeps {expected} components")]
    ProjectionShape { expected: usize, got: usize },
    #[error("model is degenerate (no component above the numerical floor)")]
    DegenerateModel,
    #[error("vocabulary has no models")]
    EmptyVocabulary,
    #[error("singular value decomposition did not converge")]
    SvdFailed,
    #[error("training gesture {label} failed: {reason}")]
    Train { label: u32, reason: String },
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error(transparent)]
    Motion(#[from] MotionError),
}

/// Motion and model parameters used at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    /// Translation gap for motion expansion, in pixels.
    pub tau: usize,
    /// Downsizing scale for grid pooling.
    pub gamma: f64,
    /// Requested number of principal components per gesture.
    pub c: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { tau: 5, gamma: 0.1, c: 10 }
    }
}

/// PCA model of one gesture: column means of the training bag, top singular
/// values, and the matching right singular vectors (orthonormal columns).
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: DVector<f64>,
    singular_values: Vec<f64>,
    components: DMatrix<f64>,
    c_effective: usize,
    grid: (usize, usize),
}

impl PcaModel {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Kept singular values, strictly descending, all above the floor.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// `N_b x c_effective` matrix with orthonormal columns.
    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn c_effective(&self) -> usize {
        self.c_effective
    }

    /// Pooled grid dimensions `(rows, cols)` of the motion maps.
    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    /// True when the centered training matrix was numerically zero and the
    /// model holds only the mean.
    pub fn is_degenerate(&self) -> bool {
        self.c_effective == 0
    }

    fn check_grid(&self, bag: &BagOfFrames) -> Result<(), ModelError> {
        if bag.grid() != self.grid {
            return Err(ModelError::GridMismatch {
                bag_rows: bag.grid().0,
                bag_cols: bag.grid().1,
                model_rows: self.grid.0,
                model_cols: self.grid.1,
            });
        }
        Ok(())
    }
}

/// Fit a PCA model from one gesture's bag of frames.
///
/// Columns are centered by their means, the centered matrix is factored with
/// a thin SVD, and the top `min(c, rank)` singular values and right singular
/// vectors are kept, where the rank counts singular values above
/// [`SV_FLOOR_REL`] times the largest one. Component signs are normalized so
/// each column's largest-magnitude entry is positive. A bag of identical
/// rows yields a degenerate mean-only model.
pub fn fit_pca(bag: &BagOfFrames, c: usize) -> Result<PcaModel, ModelError> {
    if c == 0 {
        return Err(ModelError::InvalidComponentCount);
    }
    let h = bag.matrix();
    let (q, nb) = (h.nrows(), h.ncols());
    if q == 0 {
        return Err(ModelError::EmptyBag);
    }

    let mut mean = DVector::zeros(nb);
    for j in 0..nb {
        mean[j] = h.column(j).sum() / q as f64;
    }
    let mut centered = h.clone();
    for j in 0..nb {
        let mu = mean[j];
        for i in 0..q {
            centered[(i, j)] -= mu;
        }
    }

    let (sv, vectors) = thin_right_svd(&centered);

    let s_max = sv.first().copied().unwrap_or(0.0);
    let floor = SV_FLOOR_REL * s_max;
    let rank = sv.iter().filter(|s| **s > floor).count();
    let c_effective = c.min(rank);
    if rank == 0 {
        log::warn!("degenerate model for {}: centered bag is zero", bag.video_id());
    } else if c_effective < c {
        log::warn!(
            "requested c={c} clamped to rank {rank} for {}",
            bag.video_id()
        );
    }

    let mut singular_values = Vec::with_capacity(c_effective);
    let mut components = DMatrix::zeros(nb, c_effective);
    for k in 0..c_effective {
        singular_values.push(sv[k]);
        let mut col: DVector<f64> = vectors.column(k).into();
        orient_component(&mut col);
        components.set_column(k, &col);
    }

    Ok(PcaModel {
        mean,
        singular_values,
        components,
        c_effective,
        grid: bag.grid(),
    })
}

/// Singular values (descending) and right singular vectors of `a` by
/// one-sided Jacobi orthogonalization. Returns `min(q, nb)` pairs; vectors
/// belonging to numerically zero singular values are zeroed out.
///
/// Jacobi handles the exact zero singular value every centered bag carries
/// without the accuracy loss bidiagonalization-based routines can show on
/// rank-deficient input.
fn thin_right_svd(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (q, nb) = (a.nrows(), a.ncols());
    let k = q.min(nb);
    if q <= nb {
        // Orthogonalize the columns of a^T (length nb, q of them); the
        // converged columns are the right singular vectors of `a` scaled by
        // the singular values.
        let mut work = a.transpose();
        jacobi_orthogonalize(&mut work, None);
        finish_from_columns(work, k)
    } else {
        // Orthogonalize the columns of `a` itself while accumulating the
        // rotations; the accumulated matrix holds the right singular
        // vectors and the column norms the singular values.
        let mut work = a.clone();
        let mut v = DMatrix::identity(nb, nb);
        jacobi_orthogonalize(&mut work, Some(&mut v));
        let mut pairs: Vec<(f64, usize)> =
            (0..nb).map(|j| (work.column(j).norm(), j)).collect();
        pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
        let mut sigma = Vec::with_capacity(k);
        let mut vectors = DMatrix::zeros(nb, k);
        for (out, &(s, j)) in pairs.iter().take(k).enumerate() {
            sigma.push(s);
            vectors.set_column(out, &v.column(j));
        }
        (sigma, vectors)
    }
}

fn finish_from_columns(work: DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = work.ncols();
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|j| (work.column(j).norm(), j)).collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
    let s_max = pairs.first().map(|p| p.0).unwrap_or(0.0);
    let mut sigma = Vec::with_capacity(k);
    let mut vectors = DMatrix::zeros(work.nrows(), k);
    for (out, &(s, j)) in pairs.iter().take(k).enumerate() {
        sigma.push(s);
        if s > SV_FLOOR_REL * s_max && s > 0.0 {
            let col = work.column(j) / s;
            vectors.set_column(out, &col);
        }
    }
    (sigma, vectors)
}

/// Hestenes one-sided Jacobi: rotate column pairs of `work` until all are
/// mutually orthogonal; the same rotations are applied to `accumulate`.
fn jacobi_orthogonalize(work: &mut DMatrix<f64>, mut accumulate: Option<&mut DMatrix<f64>>) {
    let n = work.ncols();
    let tol = 1e-15;
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let ci = work.column(i);
                let cj = work.column(j);
                let alpha = ci.dot(&ci);
                let beta = cj.dot(&cj);
                let gamma = ci.dot(&cj);
                if gamma.abs() <= tol * (alpha * beta).sqrt() || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(work, i, j, c, s);
                if let Some(v) = accumulate.as_deref_mut() {
                    rotate_columns(v, i, j, c, s);
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

fn rotate_columns(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let u = m[(r, i)];
        let v = m[(r, j)];
        m[(r, i)] = c * u - s * v;
        m[(r, j)] = s * u + c * v;
    }
}

/// Flip a component so its largest-magnitude entry (first such index on
/// ties) is positive. Makes serialized models reproducible across SVD
/// backends.
fn orient_component(col: &mut DVector<f64>) {
    let mut max_abs = 0.0;
    let mut max_idx = 0;
    for (j, &v) in col.iter().enumerate() {
        if v.abs() > max_abs {
            max_abs = v.abs();
            max_idx = j;
        }
    }
    if col[max_idx] < 0.0 {
        col.neg_mut();
    }
}

/// Project a test bag into a model's whitened component space:
/// `(H_T - mean) V_c S_c^(-1/2)`, one row per motion map.
pub fn project(bag_t: &BagOfFrames, model: &PcaModel) -> Result<DMatrix<f64>, ModelError> {
    model.check_grid(bag_t)?;
    if model.is_degenerate() {
        return Err(ModelError::DegenerateModel);
    }
    let centered = centered_matrix(bag_t.matrix(), &model.mean);
    let mut proj = &centered * &model.components;
    for (k, s) in model.singular_values.iter().enumerate() {
        let scale = 1.0 / s.sqrt();
        for v in proj.column_mut(k).iter_mut() {
            *v *= scale;
        }
    }
    Ok(proj)
}

/// Reconstruct motion maps from their projection:
/// `proj S_c^(1/2) V_c^T + mean`. The `S^(1/2)` factor undoes the whitening
/// applied by [`project`], so the round trip is the orthogonal projection
/// onto the component span.
pub fn reconstruct(proj: &DMatrix<f64>, model: &PcaModel) -> Result<DMatrix<f64>, ModelError> {
    if model.is_degenerate() {
        return Err(ModelError::DegenerateModel);
    }
    if proj.ncols() != model.c_effective {
        return Err(ModelError::ProjectionShape {
            expected: model.c_effective,
            got: proj.ncols(),
        });
    }
    let mut scaled = proj.clone();
    for (k, s) in model.singular_values.iter().enumerate() {
        let scale = s.sqrt();
        for v in scaled.column_mut(k).iter_mut() {
            *v *= scale;
        }
    }
    let mut rec = scaled * model.components.transpose();
    for j in 0..rec.ncols() {
        let mu = model.mean[j];
        for i in 0..rec.nrows() {
            rec[(i, j)] += mu;
        }
    }
    Ok(rec)
}

/// Mean over rows of the Euclidean distance between the reconstructed and
/// the original motion maps. A degenerate model reconstructs every row as
/// the mean.
pub fn reconstruction_error(bag_t: &BagOfFrames, model: &PcaModel) -> Result<f64, ModelError> {
    model.check_grid(bag_t)?;
    let h = bag_t.matrix();
    let q = h.nrows();
    if q == 0 {
        return Err(ModelError::EmptyBag);
    }
    let rec = if model.is_degenerate() {
        DMatrix::from_fn(q, h.ncols(), |_, j| model.mean[j])
    } else {
        reconstruct(&project(bag_t, model)?, model)?
    };
    let mut total = 0.0;
    for i in 0..q {
        let mut sq = 0.0;
        for j in 0..h.ncols() {
            let d = rec[(i, j)] - h[(i, j)];
            sq += d * d;
        }
        total += sq.sqrt();
    }
    Ok(total / q as f64)
}

fn centered_matrix(h: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut centered = h.clone();
    for j in 0..centered.ncols() {
        let mu = mean[j];
        for i in 0..centered.nrows() {
            centered[(i, j)] -= mu;
        }
    }
    centered
}

/// Labeled models for one batch, labels contiguous `1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    models: Vec<(u32, PcaModel)>,
    params: TrainParams,
}

impl Vocabulary {
    pub fn new(models: Vec<(u32, PcaModel)>, params: TrainParams) -> Result<Self, ModelError> {
        if models.is_empty() {
            return Err(ModelError::EmptyVocabulary);
        }
        for (i, (label, model)) in models.iter().enumerate() {
            if *label != i as u32 + 1 {
                return Err(ModelError::InvalidVocabulary(format!(
                    "expected label {} at position {i}, got {label}",
                    i + 1
                )));
            }
            if model.grid != models[0].1.grid {
                return Err(ModelError::InvalidVocabulary(format!(
                    "model {label} grid {:?} differs from {:?}",
                    model.grid, models[0].1.grid
                )));
            }
        }
        Ok(Vocabulary { models, params })
    }

    pub fn models(&self) -> &[(u32, PcaModel)] {
        &self.models
    }

    pub fn params(&self) -> &TrainParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn get(&self, label: u32) -> Option<&PcaModel> {
        self.models
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, m)| m)
    }

    /// Serialize to the vocabulary JSON format (full-precision decimal
    /// floats, components listed one principal component per row).
    pub fn to_json(&self) -> String {
        let file = VocabularyFile {
            params: self.params.clone(),
            models: self
                .models
                .iter()
                .map(|(label, m)| ModelFile {
                    label: *label,
                    mean: m.mean.iter().copied().collect(),
                    singular_values: m.singular_values.clone(),
                    components: (0..m.c_effective)
                        .map(|k| m.components.column(k).iter().copied().collect())
                        .collect(),
                    grid: [m.grid.0, m.grid.1],
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("vocabulary serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: VocabularyFile = serde_json::from_str(text)
            .map_err(|e| ModelError::InvalidVocabulary(e.to_string()))?;
        let mut models = Vec::with_capacity(file.models.len());
        for entry in file.models {
            let nb = entry.grid[0] * entry.grid[1];
            if entry.mean.len() != nb {
                return Err(ModelError::InvalidVocabulary(format!(
                    "model {}: mean has {} entries, grid implies {nb}",
                    entry.label,
                    entry.mean.len()
                )));
            }
            if entry.components.len() != entry.singular_values.len() {
                return Err(ModelError::InvalidVocabulary(format!(
                    "model {}: {} components but {} singular values",
                    entry.label,
                    entry.components.len(),
                    entry.singular_values.len()
                )));
            }
            let c_eff = entry.singular_values.len();
            let mut components = DMatrix::zeros(nb, c_eff);
            for (k, comp) in entry.components.iter().enumerate() {
                if comp.len() != nb {
                    return Err(ModelError::InvalidVocabulary(format!(
                        "model {}: component {k} has {} entries, expected {nb}",
                        entry.label,
                        comp.len()
                    )));
                }
                components.set_column(k, &DVector::from_column_slice(comp));
            }
            let model = PcaModel {
                mean: DVector::from_vec(entry.mean),
                singular_values: entry.singular_values,
                components,
                c_effective: c_eff,
                grid: (entry.grid[0], entry.grid[1]),
            };
            validate_model(entry.label, &model)?;
            models.push((entry.label, model));
        }
        Vocabulary::new(models, file.params)
    }
}

fn validate_model(label: u32, model: &PcaModel) -> Result<(), ModelError> {
    let sv = &model.singular_values;
    if sv.windows(2).any(|w| w[0] < w[1]) {
        return Err(ModelError::InvalidVocabulary(format!(
            "model {label}: singular values not descending"
        )));
    }
    if let Some(first) = sv.first() {
        let floor = SV_FLOOR_REL * first;
        if sv.iter().any(|s| *s <= floor) {
            return Err(ModelError::InvalidVocabulary(format!(
                "model {label}: singular value at or below the numerical floor"
            )));
        }
    }
    // Orthonormal columns within 1e-9.
    let gram = model.components.transpose() * &model.components;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let expected = if i == j { 1.0 } else { 0.0 };
            if (gram[(i, j)] - expected).abs() > 1e-9 {
                return Err(ModelError::InvalidVocabulary(format!(
                    "model {label}: components not orthonormal"
                )));
            }
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    params: TrainParams,
    models: Vec<ModelFile>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    label: u32,
    mean: Vec<f64>,
    singular_values: Vec<f64>,
    components: Vec<Vec<f64>>,
    grid: [usize; 2],
}

/// Train one PCA model per gesture of the manifest, labels preserved.
/// Deterministic given the manifest contents and parameters.
pub fn train_vocabulary(
    manifest: &BatchManifest,
    params: &TrainParams,
    modality: Modality,
) -> Result<Vocabulary, ModelError> {
    let mut entries: Vec<_> = manifest.train.iter().collect();
    entries.sort_by_key(|e| e.label);
    let mut models = Vec::with_capacity(entries.len());
    for entry in entries {
        let annotate = |reason: String| ModelError::Train { label: entry.label, reason };
        let video = load_video_as(&manifest.resolve(&entry.path), modality, entry.path.clone())
            .map_err(|e| annotate(e.to_string()))?;
        let bag = bag_of_frames(&video, params.tau, params.gamma)
            .map_err(|e| annotate(e.to_string()))?;
        let model = fit_pca(&bag, params.c).map_err(|e| annotate(e.to_string()))?;
        models.push((entry.label, model));
    }
    Vocabulary::new(models, params.clone())
}

/// Classify a test bag: the label whose model reconstructs it with the
/// lowest error, plus the full error vector indexed by label order. Ties
/// break toward the lowest label.
pub fn classify(bag_t: &BagOfFrames, vocab: &Vocabulary) -> Result<(u32, Vec<f64>), ModelError> {
    if vocab.models.is_empty() {
        return Err(ModelError::EmptyVocabulary);
    }
    let mut errors = Vec::with_capacity(vocab.models.len());
    for (_, model) in &vocab.models {
        errors.push(reconstruction_error(bag_t, model)?);
    }
    let best = argmin_index(&errors);
    Ok((vocab.models[best].0, errors))
}

/// Index of the smallest value; the first one wins on exact ties.
fn argmin_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}
