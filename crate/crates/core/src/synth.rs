//! Synthetic batch generation.
//!
//! Each gesture class is a parametric trajectory of a Gaussian blob over a
//! blank background: band-confined sweeps, diagonals, circles, a zig-zag, a
//! V-path, plus two deliberately confusable static classes where the blob
//! pops in, holds, and pops out (minimal motion, the hard case for a
//! motion-energy classifier). Training videos are noise-free renderings;
//! test videos concatenate one to five gesture renderings with independent
//! clamped Gaussian pixel noise and quiescent gaps of 5 to 15 frames.
//! Output (PGM trees, manifest, truth spans) is byte-deterministic given the
//! seed.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frameio::{BatchManifest, FrameIoError, TestEntry, TrainEntry, Video};
use crate::segment::VideoSpans;

/// Number of distinct trajectory families; class labels beyond
/// [`DYNAMIC_FAMILIES`] are the static ones.
pub const MAX_FAMILIES: usize = 12;

/// Families `1..=DYNAMIC_FAMILIES` are dynamic trajectories; the rest are
/// static appear-hold-disappear classes.
pub const DYNAMIC_FAMILIES: usize = 10;

/// True for labels of static (appear-hold-disappear) classes.
pub fn is_static_class(label: u32) -> bool {
    label as usize > DYNAMIC_FAMILIES
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("{requested} classes requested but only {available} trajectory families exist")]
    TooManyClasses { requested: usize, available: usize },
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Frame(#[from] FrameIoError),
}

/// Parameters of one synthetic batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Gesture count (vocabulary size), at most [`MAX_FAMILIES`].
    pub k: usize,
    pub frame_width: usize,
    pub frame_height: usize,
    pub frames_per_gesture: usize,
    pub test_videos: usize,
    /// Inclusive range of gestures per test video, within `[1,5]`.
    pub gestures_min: usize,
    pub gestures_max: usize,
    /// Standard deviation of per-pixel Gaussian noise on test videos.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            k: 8,
            frame_width: 64,
            frame_height: 64,
            frames_per_gesture: 20,
            test_videos: 40,
            gestures_min: 1,
            gestures_max: 5,
            noise_sigma: 0.0,
            seed: 1,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if self.k == 0 {
            return Err(SynthError::InvalidSpec("k must be at least 1".into()));
        }
        if self.k > MAX_FAMILIES {
            return Err(SynthError::TooManyClasses { requested: self.k, available: MAX_FAMILIES });
        }
        if self.frame_width < 16 || self.frame_height < 16 {
            return Err(SynthError::InvalidSpec(format!(
                "frames must be at least 16x16, got {}x{}",
                self.frame_width, self.frame_height
            )));
        }
        if self.frames_per_gesture < 4 {
            return Err(SynthError::InvalidSpec("need at least 4 frames per gesture".into()));
        }
        if self.test_videos == 0 {
            return Err(SynthError::InvalidSpec("need at least one test video".into()));
        }
        if self.gestures_min < 1 || self.gestures_min > self.gestures_max || self.gestures_max > 5
        {
            return Err(SynthError::InvalidSpec(format!(
                "gestures per video must satisfy 1 <= min <= max <= 5, got [{}, {}]",
                self.gestures_min, self.gestures_max
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(SynthError::InvalidSpec(format!(
                "noise sigma must be finite and nonnegative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Blob state at trajectory parameter `s` in `[0,1]`: unit-square center,
/// amplitude, and spread as a fraction of the shorter frame side.
struct BlobState {
    u: f64,
    v: f64,
    amplitude: f64,
    spread: f64,
}

/// The static classes pop in at `s >= 0.12` and out at `s >= 0.85`, so a
/// 20-frame rendering has exactly two motion steps.
fn family_state(family: usize, s: f64) -> BlobState {
    let dynamic = |u: f64, v: f64| BlobState { u, v, amplitude: 0.9, spread: 0.10 };
    match family {
        1 => dynamic(0.1 + 0.8 * s, 0.22),
        2 => dynamic(0.9 - 0.8 * s, 0.78),
        3 => dynamic(0.22, 0.1 + 0.8 * s),
        4 => dynamic(0.78, 0.9 - 0.8 * s),
        5 => dynamic(0.1 + 0.8 * s, 0.1 + 0.8 * s),
        6 => dynamic(0.9 - 0.8 * s, 0.1 + 0.8 * s),
        7 => dynamic(0.5 + 0.32 * (2.0 * PI * s).cos(), 0.5 + 0.32 * (2.0 * PI * s).sin()),
        8 => dynamic(0.1 + 0.8 * s, 0.5 + 0.18 * (6.0 * PI * s).sin()),
        9 => dynamic(
            0.32 + 0.14 * (4.0 * PI * s).cos(),
            0.6 + 0.14 * (4.0 * PI * s).sin(),
        ),
        10 => {
            if s < 0.5 {
                let t = s * 2.0;
                dynamic(0.1 + 0.4 * t, 0.15 + 0.7 * t)
            } else {
                let t = (s - 0.5) * 2.0;
                dynamic(0.5 + 0.4 * t, 0.85 - 0.7 * t)
            }
        }
        // Two static classes at the same position with matched integrated
        // energy but different spreads: near-identical motion signatures,
        // hard to tell apart from a single example.
        11 => BlobState { u: 0.5, v: 0.5, amplitude: 0.9 * hold(s), spread: 0.09 },
        12 => BlobState {
            u: 0.5,
            v: 0.5,
            amplitude: 0.9 * (0.09f64 / 0.105).powi(2) * hold(s),
            spread: 0.105,
        },
        other => unreachable!("family {other} out of range"),
    }
}

fn hold(s: f64) -> f64 {
    if (0.12..0.85).contains(&s) {
        1.0
    } else {
        0.0
    }
}

/// Noise-free rendering of one class as raw intensity grids.
fn render_class(family: usize, w: usize, h: usize, frames: usize) -> Vec<Vec<f64>> {
    let min_dim = w.min(h) as f64;
    (0..frames)
        .map(|j| {
            let s = if frames > 1 { j as f64 / (frames - 1) as f64 } else { 0.0 };
            let state = family_state(family, s);
            render_blob(w, h, &state, min_dim)
        })
        .collect()
}

fn render_blob(w: usize, h: usize, state: &BlobState, min_dim: f64) -> Vec<f64> {
    let mut pixels = vec![0.0; w * h];
    if state.amplitude == 0.0 {
        return pixels;
    }
    let cx = state.u * w as f64;
    let cy = state.v * h as f64;
    let sigma_b = state.spread * min_dim;
    let cutoff = (4.0 * sigma_b) * (4.0 * sigma_b);
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            let r2 = dx * dx + dy * dy;
            if r2 < cutoff {
                pixels[y * w + x] = state.amplitude * (-r2 / (2.0 * sigma_b * sigma_b)).exp();
            }
        }
    }
    pixels
}

/// Write a video as a directory of `frame_NNNNN.pgm` files (the format
/// [`crate::frameio::load_video`] reads back).
pub fn write_video_pgm(dir: &Path, video: &Video) -> Result<(), SynthError> {
    write_frames(dir, video.width(), video.height(), video.frames().iter().map(|f| f.pixels()))
}

fn write_frames<'a>(
    dir: &Path,
    w: usize,
    h: usize,
    frames: impl Iterator<Item = &'a [f64]>,
) -> Result<(), SynthError> {
    fs::create_dir_all(dir).map_err(|source| SynthError::Io { path: dir.to_path_buf(), source })?;
    for (i, pixels) in frames.enumerate() {
        let path = dir.join(crate::frameio::frame_file_name(i + 1));
        let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
        bytes.extend(pixels.iter().map(|&v| (v * 255.0).round() as u8));
        fs::write(&path, bytes).map_err(|source| SynthError::Io { path, source })?;
    }
    Ok(())
}

/// Generate one batch under `out`: `train/gNN` and `test/vNNN` PGM trees, a
/// `manifest.json`, and a `truth_spans.json` with the ground-truth gesture
/// spans of every test video. Fully deterministic given the spec.
pub fn generate_batch(spec: &SynthSpec, out: &Path) -> Result<BatchManifest, SynthError> {
    spec.validate()?;
    let (w, h, f) = (spec.frame_width, spec.frame_height, spec.frames_per_gesture);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = if spec.noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.noise_sigma).expect("validated sigma"))
    } else {
        None
    };

    let renders: Vec<Vec<Vec<f64>>> =
        (1..=spec.k).map(|family| render_class(family, w, h, f)).collect();

    let mut train = Vec::with_capacity(spec.k);
    for label in 1..=spec.k {
        let rel = format!("train/g{label:02}");
        write_frames(&out.join(&rel), w, h, renders[label - 1].iter().map(|p| p.as_slice()))?;
        train.push(TrainEntry { path: rel, label: label as u32 });
    }

    let mut test = Vec::with_capacity(spec.test_videos);
    let mut truth_spans = Vec::with_capacity(spec.test_videos);
    for video_index in 0..spec.test_videos {
        let count = rng.random_range(spec.gestures_min..=spec.gestures_max);
        let labels: Vec<u32> =
            (0..count).map(|_| rng.random_range(1..=spec.k as u32)).collect();
        let gaps: Vec<usize> =
            (0..count.saturating_sub(1)).map(|_| rng.random_range(5..=15)).collect();

        let mut frames: Vec<Vec<f64>> = Vec::new();
        let mut spans = Vec::with_capacity(count);
        for (slot, &label) in labels.iter().enumerate() {
            let start = frames.len();
            for clean in &renders[label as usize - 1] {
                frames.push(apply_noise(clean, &noise, &mut rng));
            }
            spans.push((start, frames.len()));
            if slot + 1 < count {
                for _ in 0..gaps[slot] {
                    frames.push(apply_noise(&vec![0.0; w * h], &noise, &mut rng));
                }
            }
        }

        let rel = format!("test/v{video_index:03}");
        write_frames(&out.join(&rel), w, h, frames.iter().map(|p| p.as_slice()))?;
        truth_spans.push(VideoSpans { video: rel.clone(), spans });
        test.push(TestEntry { path: rel, truth: labels });
    }

    let manifest = BatchManifest::new(w, h, train, test, out.to_path_buf())?;
    let manifest_path = out.join("manifest.json");
    let manifest_json =
        serde_json::to_string_pretty(&manifest).expect("manifest serialization");
    fs::write(&manifest_path, manifest_json)
        .map_err(|source| SynthError::Io { path: manifest_path, source })?;
    let spans_path = out.join("truth_spans.json");
    let spans_json =
        serde_json::to_string_pretty(&truth_spans).expect("truth spans serialization");
    fs::write(&spans_path, spans_json)
        .map_err(|source| SynthError::Io { path: spans_path, source })?;
    Ok(manifest)
}

fn apply_noise(clean: &[f64], noise: &Option<Normal<f64>>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match noise {
        None => clean.to_vec(),
        Some(dist) => clean
            .iter()
            .map(|&v| (v + dist.sample(rng)).clamp(0.0, 1.0))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frameio::{load_manifest, load_video, Frame, Modality};
    use crate::segment::{coarse_sequence_dims, dtw_distance};

    fn spec(k: usize, sigma: f64, seed: u64) -> SynthSpec {
        SynthSpec {
            k,
            test_videos: 6,
            noise_sigma: sigma,
            seed,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn batch_contract() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_batch(&spec(8, 0.0, 3), dir.path()).unwrap();
        assert_eq!(manifest.train.len(), 8);
        assert_eq!(manifest.test.len(), 6);
        for entry in &manifest.test {
            assert!(!entry.truth.is_empty() && entry.truth.len() <= 5);
            assert!(entry.truth.iter().all(|&l| (1..=8).contains(&l)));
        }
        // The written manifest re-loads and validates.
        let reloaded = load_manifest(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(reloaded.vocabulary_size(), 8);
        let video = load_video(&reloaded.resolve("train/g01"), Modality::RgbGray).unwrap();
        assert_eq!(video.num_frames(), 20);
    }

    #[test]
    fn too_many_classes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = generate_batch(&spec(13, 0.0, 3), dir.path()).unwrap_err();
        assert!(matches!(err, SynthError::TooManyClasses { .. }));
    }

    fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
        let mut files = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    let rel = path.strip_prefix(root).unwrap().display().to_string();
                    files.push((rel, fs::read(&path).unwrap()));
                }
            }
        }
        files.sort();
        files
    }

    #[test]
    fn same_seed_gives_identical_trees() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_batch(&spec(5, 0.04, 99), a.path()).unwrap();
        generate_batch(&spec(5, 0.04, 99), b.path()).unwrap();
        let ta = tree_bytes(a.path());
        let tb = tree_bytes(b.path());
        assert_eq!(ta.len(), tb.len());
        for ((na, ba), (nb, bb)) in ta.iter().zip(&tb) {
            assert_eq!(na, nb);
            assert_eq!(ba, bb, "file {na} differs");
        }
    }

    #[test]
    fn round_trip_preserves_intensities() {
        let rendered = render_class(7, 32, 32, 6);
        let dir = tempfile::tempdir().unwrap();
        write_frames(dir.path(), 32, 32, rendered.iter().map(|p| p.as_slice())).unwrap();
        let video = load_video(dir.path(), Modality::RgbGray).unwrap();
        for (frame, clean) in video.frames().iter().zip(&rendered) {
            for (a, b) in frame.pixels().iter().zip(clean) {
                assert!((a - b).abs() <= 1.0 / 255.0, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn static_classes_have_two_motion_steps() {
        let rendered = render_class(11, 64, 64, 20);
        let mut motion_steps = 0;
        for pair in rendered.windows(2) {
            let delta: f64 = pair[0].iter().zip(&pair[1]).map(|(a, b)| (a - b).abs()).sum();
            if delta > 1e-9 {
                motion_steps += 1;
            }
        }
        assert_eq!(motion_steps, 2);
    }

    /// The segmentation precondition of the noisy end-to-end runs: for the
    /// dynamic vocabulary, a noisy rerendering stays closer (coarse DTW) to
    /// its own training sequence than to any other class.
    #[test]
    fn dynamic_classes_separable_at_sigma_005() {
        let (w, h, f) = (64, 64, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let noise = Some(Normal::new(0.0, 0.05).unwrap());
        let make_video = |pixels: &[Vec<f64>], id: &str| {
            let frames = pixels
                .iter()
                .map(|p| Frame::new(w, h, p.clone()).unwrap())
                .collect();
            Video::new(id, Modality::RgbGray, frames).unwrap()
        };
        let trains: Vec<_> = (1..=DYNAMIC_FAMILIES)
            .map(|fam| {
                let v = make_video(&render_class(fam, w, h, f), "train");
                coarse_sequence_dims(&v, 3, 3).unwrap()
            })
            .collect();
        for fam in 1..=DYNAMIC_FAMILIES {
            let noisy: Vec<Vec<f64>> = render_class(fam, w, h, f)
                .iter()
                .map(|p| apply_noise(p, &noise, &mut rng))
                .collect();
            let seq = coarse_sequence_dims(&make_video(&noisy, "noisy"), 3, 3).unwrap();
            let own = dtw_distance(&seq, &trains[fam - 1]).unwrap();
            for (other, train) in trains.iter().enumerate() {
                if other + 1 == fam {
                    continue;
                }
                let cross = dtw_distance(&seq, train).unwrap();
                assert!(
                    cross > own,
                    "class {fam} vs {}: cross {cross} <= own {own}",
                    other + 1
                );
            }
        }
    }
}
