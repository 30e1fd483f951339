//! Loading and validation of frame sequences and batch manifests.
//!
//! Videos live on disk as directories of binary PGM files (`P5`, maxval 255)
//! named `frame_00001.pgm`, `frame_00002.pgm`, ... with consecutive 1-based
//! indices. Intensities are normalized to `[0,1]` on load. A batch manifest
//! is a JSON file describing one training video per gesture label plus test
//! videos with their truth label sequences; relative video paths are resolved
//! against the manifest's directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from loading videos or manifests.
#[derive(Debug, Error)]
pub enum FrameIoError {
    /// File could not be read.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// File exists but is not a valid frame in the expected format.
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    /// A frame's dimensions disagree with the first frame of the video.
    #[error(
        "dimension mismatch in {path}: expected {expected_width}x{expected_height}, \
         got {got_width}x{got_height}"
    )]
    DimensionMismatch {
        path: PathBuf,
        expected_width: usize,
        expected_height: usize,
        got_width: usize,
        got_height: usize,
    },
    /// Frame intensity or dimension invariants violated on construction.
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    /// Video-level invariant violated on construction.
    #[error("invalid video {id}: {reason}")]
    InvalidVideo { id: String, reason: String },
    /// Manifest JSON could not be parsed.
    #[error("manifest parse error in {path}: {source}")]
    ManifestParse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    /// Manifest parsed but violates batch invariants; all violations listed.
    #[error("invalid manifest: {}", violations.join("; "))]
    ManifestInvalid { violations: Vec<String> },
}

/// Video modality. Both are treated as single-channel intensity; the
/// distinction is carried through for bookkeeping only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "rgb-gray")]
    RgbGray,
    #[serde(rename = "depth")]
    Depth,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modality::RgbGray => write!(f, "rgb-gray"),
            Modality::Depth => write!(f, "depth"),
        }
    }
}

impl std::str::FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rgb-gray" => Ok(Modality::RgbGray),
            "depth" => Ok(Modality::Depth),
            other => Err(format!("unknown modality {other:?} (expected rgb-gray or depth)")),
        }
    }
}

/// A single grayscale frame, row-major, intensities in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, FrameIoError> {
        if width == 0 || height == 0 {
            return Err(FrameIoError::InvalidFrame(format!(
                "dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(FrameIoError::InvalidFrame(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(FrameIoError::InvalidFrame(format!(
                "intensity {bad} outside [0,1]"
            )));
        }
        Ok(Frame { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }
}

/// An ordered sequence of same-sized frames.
#[derive(Debug, Clone)]
pub struct Video {
    id: String,
    modality: Modality,
    frames: Vec<Frame>,
}

impl Video {
    pub fn new(
        id: impl Into<String>,
        modality: Modality,
        frames: Vec<Frame>,
    ) -> Result<Self, FrameIoError> {
        let id = id.into();
        if frames.is_empty() {
            return Err(FrameIoError::InvalidVideo {
                id,
                reason: "a video needs at least one frame".into(),
            });
        }
        let (w, h) = (frames[0].width(), frames[0].height());
        for (i, f) in frames.iter().enumerate() {
            if f.width() != w || f.height() != h {
                return Err(FrameIoError::InvalidVideo {
                    id,
                    reason: format!(
                        "frame {} is {}x{}, expected {w}x{h}",
                        i + 1,
                        f.width(),
                        f.height()
                    ),
                });
            }
        }
        Ok(Video { id, modality, frames })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    /// Sub-video over the half-open frame range `[start, end)`, for
    /// classifying one segmented gesture span.
    pub fn slice(&self, start: usize, end: usize) -> Result<Video, FrameIoError> {
        if start >= end || end > self.frames.len() {
            return Err(FrameIoError::InvalidVideo {
                id: self.id.clone(),
                reason: format!(
                    "span [{start},{end}) out of range for {} frames",
                    self.frames.len()
                ),
            });
        }
        Video::new(
            format!("{}[{start},{end})", self.id),
            self.modality,
            self.frames[start..end].to_vec(),
        )
    }

    /// Copy with all intensities multiplied by `alpha` (result must stay in
    /// `[0,1]`). Useful for scale-equivariance checks.
    pub fn scaled(&self, alpha: f64) -> Result<Video, FrameIoError> {
        let frames = self
            .frames
            .iter()
            .map(|f| {
                Frame::new(
                    f.width(),
                    f.height(),
                    f.pixels().iter().map(|v| v * alpha).collect(),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Video::new(self.id.clone(), self.modality, frames)
    }
}

/// One training video with its gesture label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainEntry {
    pub path: String,
    pub label: u32,
}

/// One test video with its truth label sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestEntry {
    pub path: String,
    pub truth: Vec<u32>,
}

/// Description of one batch: K training videos (one per label 1..=K) and a
/// set of test videos with truth label sequences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchManifest {
    pub frame_width: usize,
    pub frame_height: usize,
    pub train: Vec<TrainEntry>,
    pub test: Vec<TestEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl BatchManifest {
    pub fn new(
        frame_width: usize,
        frame_height: usize,
        train: Vec<TrainEntry>,
        test: Vec<TestEntry>,
        base_dir: PathBuf,
    ) -> Result<Self, FrameIoError> {
        let manifest = BatchManifest { frame_width, frame_height, train, test, base_dir };
        manifest.validate()?;
        Ok(manifest)
    }

    /// Number of gestures in the vocabulary.
    pub fn vocabulary_size(&self) -> u32 {
        self.train.len() as u32
    }

    /// Resolve a manifest-relative video path against the manifest location.
    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn validate(&self) -> Result<(), FrameIoError> {
        let mut violations = Vec::new();
        if self.frame_width == 0 || self.frame_height == 0 {
            violations.push(format!(
                "frame dimensions must be at least 1x1, got {}x{}",
                self.frame_width, self.frame_height
            ));
        }
        if self.train.is_empty() {
            violations.push("no training videos".into());
        }
        let k = self.train.len() as u32;
        let mut seen = vec![0usize; self.train.len() + 1];
        for entry in &self.train {
            if entry.label == 0 || entry.label > k {
                violations.push(format!(
                    "training label {} outside 1..={k} ({})",
                    entry.label, entry.path
                ));
            } else {
                seen[entry.label as usize] += 1;
            }
        }
        for (label, count) in seen.iter().enumerate().skip(1) {
            match count {
                0 => violations.push(format!("no training video for label {label} (gap)")),
                1 => {}
                n => violations.push(format!("{n} training videos for label {label} (duplicate)")),
            }
        }
        for entry in &self.test {
            if entry.truth.is_empty() || entry.truth.len() > 5 {
                violations.push(format!(
                    "truth sequence length {} outside [1,5] ({})",
                    entry.truth.len(),
                    entry.path
                ));
            }
            for &label in &entry.truth {
                if label == 0 || label > k {
                    violations.push(format!(
                        "truth label {label} outside 1..={k} ({})",
                        entry.path
                    ));
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(FrameIoError::ManifestInvalid { violations })
        }
    }
}

/// Load and validate a batch manifest from a JSON file.
///
/// Relative video paths in the manifest are resolved against the manifest
/// file's directory. All invariant violations are collected and reported
/// together.
pub fn load_manifest(path: &Path) -> Result<BatchManifest, FrameIoError> {
    let text = fs::read_to_string(path).map_err(|source| FrameIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut manifest: BatchManifest =
        serde_json::from_str(&text).map_err(|source| FrameIoError::ManifestParse {
            path: path.to_path_buf(),
            source,
        })?;
    manifest.base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    manifest.validate()?;
    Ok(manifest)
}

/// Load a video from a directory of `frame_NNNNN.pgm` files, consecutively
/// numbered from 1. The video id is the directory path as given.
pub fn load_video(dir: &Path, modality: Modality) -> Result<Video, FrameIoError> {
    load_video_as(dir, modality, dir.display().to_string())
}

/// [`load_video`] with an explicit video id (e.g. the manifest-relative path).
pub fn load_video_as(
    dir: &Path,
    modality: Modality,
    id: impl Into<String>,
) -> Result<Video, FrameIoError> {
    let count = count_frames(dir)?;
    if count == 0 {
        return Err(FrameIoError::Format {
            path: dir.to_path_buf(),
            reason: "no frame_*.pgm files found".into(),
        });
    }
    let mut frames = Vec::with_capacity(count);
    let mut dims: Option<(usize, usize)> = None;
    for index in 1..=count {
        let path = dir.join(frame_file_name(index));
        let frame = read_pgm(&path)?;
        match dims {
            None => dims = Some((frame.width(), frame.height())),
            Some((w, h)) => {
                if frame.width() != w || frame.height() != h {
                    return Err(FrameIoError::DimensionMismatch {
                        path,
                        expected_width: w,
                        expected_height: h,
                        got_width: frame.width(),
                        got_height: frame.height(),
                    });
                }
            }
        }
        frames.push(frame);
    }
    Video::new(id, modality, frames)
}

/// File name for the 1-based frame `index`: `frame_00001.pgm` etc.
pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.pgm")
}

/// Count `frame_NNNNN.pgm` entries and check they are consecutive from 1.
/// Insensitive to directory listing order.
fn count_frames(dir: &Path) -> Result<usize, FrameIoError> {
    let entries = fs::read_dir(dir).map_err(|source| FrameIoError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut indices = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| FrameIoError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(index) = parse_frame_name(name) {
            indices.push(index);
        }
    }
    indices.sort_unstable();
    for (i, &index) in indices.iter().enumerate() {
        if index != i + 1 {
            return Err(FrameIoError::Format {
                path: dir.join(frame_file_name(i + 1)),
                reason: format!("frame indices not consecutive from 1 (found frame {index})"),
            });
        }
    }
    Ok(indices.len())
}

fn parse_frame_name(name: &str) -> Option<usize> {
    let rest = name.strip_prefix("frame_")?.strip_suffix(".pgm")?;
    if rest.len() != 5 || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

/// Read a binary PGM (`P5`, maxval 255) file into a normalized frame.
fn read_pgm(path: &Path) -> Result<Frame, FrameIoError> {
    let bytes = fs::read(path).map_err(|source| FrameIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let err = |reason: String| FrameIoError::Format { path: path.to_path_buf(), reason };

    let mut pos = 0usize;
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(err("missing P5 magic".into()));
    }
    pos += 2;
    let width = read_header_value(&bytes, &mut pos).ok_or_else(|| err("bad width".into()))?;
    let height = read_header_value(&bytes, &mut pos).ok_or_else(|| err("bad height".into()))?;
    let maxval = read_header_value(&bytes, &mut pos).ok_or_else(|| err("bad maxval".into()))?;
    if maxval != 255 {
        return Err(err(format!("maxval {maxval} unsupported, expected 255")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(err("missing whitespace before raster".into())),
    }
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| err("dimensions overflow".into()))?;
    let raster = &bytes[pos..];
    if raster.len() != expected {
        return Err(err(format!(
            "raster has {} bytes, expected {expected} for {width}x{height}",
            raster.len()
        )));
    }
    let pixels = raster.iter().map(|&b| f64::from(b) / 255.0).collect();
    Frame::new(width, height, pixels)
}

/// Parse the next decimal value in a PNM header, skipping whitespace and
/// `#` comments.
fn read_header_value(bytes: &[u8], pos: &mut usize) -> Option<usize> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if *pos == start {
        return None;
    }
    std::str::from_utf8(&bytes[start..*pos]).ok()?.parse().ok()
}
