//! One-shot gesture recognition from motion-map bags.
//!
//! A video is reduced to a bag of per-frame motion maps: consecutive frames
//! are differenced, motion regions are expanded by a translation gap `tau`,
//! and each difference image is pooled onto a coarse grid at scale `gamma`.
//! One PCA model is fitted per gesture from the single training video of that
//! gesture; test bags are assigned to the model with the lowest average
//! reconstruction error. Multi-gesture test videos are split beforehand with
//! a DTW segmenter over coarse, time-ordered motion maps, and predictions are
//! scored against truth with a normalized Levenshtein distance.
//!
//! Modules follow the pipeline: [`frameio`] loads frame sequences and batch
//! manifests, [`motion`] builds bags of motion maps, [`model`] trains and
//! classifies, [`segment`] splits multi-gesture videos, [`eval`] scores
//! predictions, and [`synth`] generates deterministic synthetic batches for
//! testing.

pub mod eval;
pub mod frameio;
pub mod model;
pub mod motion;
pub mod segment;
pub mod synth;

pub use eval::{batch_score, levenshtein, EvalError, PredictionEntry, ScoreReport, VideoScore};
pub use frameio::{
    load_manifest, load_video, load_video_as, BatchManifest, Frame, FrameIoError, Modality,
    TestEntry, TrainEntry, Video,
};
pub use model::{
    classify, fit_pca, project, reconstruct, reconstruction_error, train_vocabulary, ModelError,
    PcaModel, TrainParams, Vocabulary,
};
pub use motion::{
    bag_of_frames, difference_images, expand_motion, pool_to_dims, pool_to_grid, BagOfFrames,
    Grid, MotionError, MotionMap,
};
pub use segment::{
    coarse_sequence, coarse_sequence_dims, dtw_distance, segment_video, CoarseSequence,
    SegmentError, SegmentOptions, SegmentationResult, VideoSpans,
};
pub use synth::{generate_batch, write_video_pgm, SynthError, SynthSpec};

pub use nalgebra;
