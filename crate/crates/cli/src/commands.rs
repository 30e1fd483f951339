//! Subcommand implementations.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use pmc_core::{
    bag_of_frames, batch_score, classify as classify_bag, coarse_sequence_dims, generate_batch,
    load_manifest, load_video, load_video_as, segment_video, train_vocabulary, BatchManifest,
    CoarseSequence, FrameIoError, MotionError, PredictionEntry, SynthSpec, VideoSpans, Vocabulary,
};
use rayon::prelude::*;

use crate::config::Config;
use crate::{
    ClassifyArgs, CliError, DumpComponentsArgs, DumpMotionArgs, ScoreArgs, SegmentArgs, SynthArgs,
    TrainArgs,
};

fn read_manifest(path: &Path) -> Result<BatchManifest, CliError> {
    load_manifest(path).map_err(|e| match e {
        FrameIoError::ManifestInvalid { .. } | FrameIoError::ManifestParse { .. } => {
            CliError::usage(e)
        }
        other => CliError::runtime(other),
    })
}

fn motion_error_kind(e: &MotionError) -> bool {
    matches!(
        e,
        MotionError::InvalidTau { .. }
            | MotionError::InvalidGamma { .. }
            | MotionError::EmptyPooledGrid { .. }
    )
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let config = args.params.resolve()?;
    let manifest = read_manifest(&args.manifest)?;
    let vocab = train_vocabulary(&manifest, &config.params, config.modality).map_err(|e| {
        // Parameter problems surface as training failures annotated with the
        // gesture label; treat everything else as runtime.
        CliError::runtime(anyhow!(e).context("training failed"))
    })?;
    fs::write(&args.out, vocab.to_json())
        .with_context(|| format!("writing {}", args.out.display()))
        .map_err(CliError::runtime)?;
    Ok(())
}

fn load_vocabulary(path: &Path) -> Result<Vocabulary, CliError> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading model {}", path.display()))
        .map_err(CliError::runtime)?;
    Vocabulary::from_json(&text)
        .with_context(|| format!("loading model {}", path.display()))
        .map_err(CliError::runtime)
}

enum Segmentation {
    Auto,
    Manual(HashMap<String, Vec<(usize, usize)>>),
}

fn parse_segmentation(value: &str) -> Result<Segmentation, CliError> {
    if value == "auto" {
        return Ok(Segmentation::Auto);
    }
    if let Some(path) = value.strip_prefix("manual:") {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading spans {path}"))
            .map_err(CliError::runtime)?;
        let spans: Vec<VideoSpans> = serde_json::from_str(&text)
            .with_context(|| format!("parsing spans {path}"))
            .map_err(CliError::usage)?;
        return Ok(Segmentation::Manual(
            spans.into_iter().map(|s| (s.video, s.spans)).collect(),
        ));
    }
    Err(CliError::usage(anyhow!(
        "--segmentation must be `auto` or `manual:<spans.json>`, got {value:?}"
    )))
}

fn training_coarse_sequences(
    manifest: &BatchManifest,
    config: &Config,
) -> Result<Vec<CoarseSequence>, CliError> {
    let mut entries: Vec<_> = manifest.train.iter().collect();
    entries.sort_by_key(|e| e.label);
    entries
        .iter()
        .map(|e| {
            let video = load_video_as(&manifest.resolve(&e.path), config.modality, e.path.clone())
                .map_err(CliError::runtime)?;
            coarse_sequence_dims(&video, config.segment.coarse_rows, config.segment.coarse_cols)
                .map_err(CliError::runtime)
        })
        .collect()
}

fn worker_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::usage(anyhow!("--jobs must be at least 1")));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(CliError::runtime)
}

/// Predict the label sequence of one test video.
fn predict_video(
    manifest: &BatchManifest,
    path: &str,
    vocab: &Vocabulary,
    segmentation: &Segmentation,
    coarse_refs: &[CoarseSequence],
    config: &Config,
) -> anyhow::Result<Vec<u32>> {
    let video = load_video_as(&manifest.resolve(path), config.modality, path)?;
    let spans = match segmentation {
        Segmentation::Manual(map) => map
            .get(path)
            .ok_or_else(|| anyhow!("no spans for {path} in the manual segmentation file"))?
            .clone(),
        Segmentation::Auto => segment_video(&video, coarse_refs, &config.segment)?.spans,
    };
    let mut labels = Vec::with_capacity(spans.len());
    for &(start, end) in &spans {
        let sub = video.slice(start, end)?;
        let bag = bag_of_frames(&sub, vocab.params().tau, vocab.params().gamma)?;
        labels.push(classify_bag(&bag, vocab)?.0);
    }
    Ok(labels)
}

pub fn classify(args: ClassifyArgs) -> Result<(), CliError> {
    let config = args.params.resolve()?;
    let vocab = load_vocabulary(&args.model)?;
    let manifest = read_manifest(&args.manifest)?;
    let segmentation = parse_segmentation(&args.segmentation)?;
    let coarse_refs = match segmentation {
        Segmentation::Auto => training_coarse_sequences(&manifest, &config)?,
        Segmentation::Manual(_) => Vec::new(),
    };
    let pool = worker_pool(args.jobs)?;

    let results: Vec<(String, anyhow::Result<Vec<u32>>)> = pool.install(|| {
        manifest
            .test
            .par_iter()
            .map(|entry| {
                let labels = predict_video(
                    &manifest,
                    &entry.path,
                    &vocab,
                    &segmentation,
                    &coarse_refs,
                    &config,
                );
                (entry.path.clone(), labels)
            })
            .collect()
    });

    let mut predictions = Vec::with_capacity(results.len());
    let mut failures = 0usize;
    for (video, result) in results {
        match result {
            Ok(labels) => predictions.push(PredictionEntry { video, labels }),
            Err(e) => {
                failures += 1;
                eprintln!("error: {video}: {e:#}");
            }
        }
    }
    let json = serde_json::to_string_pretty(&predictions).expect("predictions serialization");
    fs::write(&args.out, json)
        .with_context(|| format!("writing {}", args.out.display()))
        .map_err(CliError::runtime)?;
    if failures > 0 {
        return Err(CliError::runtime(anyhow!("{failures} video(s) failed")));
    }
    Ok(())
}

pub fn segment(args: SegmentArgs) -> Result<(), CliError> {
    let config = args.params.resolve()?;
    let manifest = read_manifest(&args.manifest)?;
    let coarse_refs = training_coarse_sequences(&manifest, &config)?;
    let mut out = Vec::with_capacity(manifest.test.len());
    for entry in &manifest.test {
        let video = load_video_as(
            &manifest.resolve(&entry.path),
            config.modality,
            entry.path.clone(),
        )
        .map_err(CliError::runtime)?;
        let result = segment_video(&video, &coarse_refs, &config.segment).map_err(|e| {
            if matches!(e, pmc_core::segment::SegmentError::InvalidOptions(_)) {
                CliError::usage(e)
            } else {
                CliError::runtime(e)
            }
        })?;
        out.push(VideoSpans { video: entry.path.clone(), spans: result.spans });
    }
    let json = serde_json::to_string_pretty(&out).expect("spans serialization");
    fs::write(&args.out, json)
        .with_context(|| format!("writing {}", args.out.display()))
        .map_err(CliError::runtime)?;
    Ok(())
}

pub fn score(args: ScoreArgs) -> Result<(), CliError> {
    let manifest = read_manifest(&args.manifest)?;
    let text = fs::read_to_string(&args.predictions)
        .with_context(|| format!("reading predictions {}", args.predictions.display()))
        .map_err(CliError::runtime)?;
    let predictions: Vec<PredictionEntry> = serde_json::from_str(&text)
        .with_context(|| format!("parsing predictions {}", args.predictions.display()))
        .map_err(CliError::usage)?;
    let started = Instant::now();
    let mut report = batch_score(&manifest, &predictions, 0.0).map_err(CliError::runtime)?;
    report.wall_time_seconds = args.wall_time.unwrap_or_else(|| started.elapsed().as_secs_f64());
    let json = serde_json::to_string_pretty(&report).expect("report serialization");
    fs::write(&args.out, json)
        .with_context(|| format!("writing {}", args.out.display()))
        .map_err(CliError::runtime)?;
    println!("{}", report.tsv_line());
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.spec)
        .with_context(|| format!("reading spec {}", args.spec.display()))
        .map_err(CliError::usage)?;
    let mut spec: SynthSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing spec {}", args.spec.display()))
        .map_err(CliError::usage)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    generate_batch(&spec, &args.out).map_err(|e| match e {
        pmc_core::SynthError::TooManyClasses { .. } | pmc_core::SynthError::InvalidSpec(_) => {
            CliError::usage(e)
        }
        other => CliError::runtime(other),
    })?;
    Ok(())
}

pub fn dump_motion_maps(args: DumpMotionArgs) -> Result<(), CliError> {
    let config = args.params.resolve()?;
    let video = load_video(&args.video, config.modality).map_err(CliError::runtime)?;
    let bag = bag_of_frames(&video, config.params.tau, config.params.gamma).map_err(|e| {
        if motion_error_kind(&e) {
            CliError::usage(e)
        } else {
            CliError::runtime(e)
        }
    })?;
    let mut csv = String::new();
    for i in 0..bag.num_maps() {
        let row: Vec<String> = (0..bag.map_len()).map(|j| bag.value(i, j).to_string()).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    write_text(args.out.as_deref(), &csv)
}

pub fn dump_components(args: DumpComponentsArgs) -> Result<(), CliError> {
    let vocab = load_vocabulary(&args.model)?;
    let model = vocab
        .get(args.label)
        .ok_or_else(|| CliError::usage(anyhow!("label {} not in vocabulary", args.label)))?;
    let (rows, cols) = model.grid();
    let top = args.top.min(model.c_effective());
    if top == 0 {
        return Err(CliError::runtime(anyhow!(
            "model {} is degenerate, nothing to dump",
            args.label
        )));
    }
    for k in 0..top {
        let mut csv = String::new();
        for r in 0..rows {
            let row: Vec<String> = (0..cols)
                .map(|c| model.components()[(r * cols + c, k)].to_string())
                .collect();
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
        match &args.out_prefix {
            Some(prefix) => {
                let path = PathBuf::from(format!("{}_c{}.csv", prefix.display(), k + 1));
                fs::write(&path, csv)
                    .with_context(|| format!("writing {}", path.display()))
                    .map_err(CliError::runtime)?;
            }
            None => {
                println!("# component {} (singular value {})", k + 1, model.singular_values()[k]);
                print!("{csv}");
            }
        }
    }
    Ok(())
}

fn write_text(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(CliError::runtime),
        None => {
            std::io::stdout().write_all(text.as_bytes()).map_err(CliError::runtime)?;
            Ok(())
        }
    }
}
