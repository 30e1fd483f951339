//! Challenge-style scoring: label-sequence edit distance, normalized over a
//! batch by the total number of truth labels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frameio::BatchManifest;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no prediction for test video {0}")]
    MissingPrediction(String),
    #[error("duplicate prediction for test video {0}")]
    DuplicatePrediction(String),
}

/// Minimum number of single-label insertions, deletions and substitutions
/// (unit costs) transforming `a` into `b`.
pub fn levenshtein(a: &[u32], b: &[u32]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Predicted label sequence for one test video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionEntry {
    pub video: String,
    pub labels: Vec<u32>,
}

/// Scoring detail for one test video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoScore {
    pub video: String,
    pub truth: Vec<u32>,
    pub predicted: Vec<u32>,
    pub edits: usize,
    /// Per-video edit distance over the video's own truth length, emitted
    /// for transparency alongside the batch-normalized score.
    pub normalized: f64,
}

/// Batch score: total edits over total truth labels, plus per-video detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub per_video: Vec<VideoScore>,
    pub total_edits: usize,
    pub total_truth_labels: usize,
    pub score: f64,
    pub wall_time_seconds: f64,
}

impl ScoreReport {
    /// One-line tab-separated summary for tabulation across batches:
    /// score, total edits, total truth labels, video count, wall time.
    pub fn tsv_line(&self) -> String {
        format!(
            "{:.6}\t{}\t{}\t{}\t{:.3}",
            self.score,
            self.total_edits,
            self.total_truth_labels,
            self.per_video.len(),
            self.wall_time_seconds
        )
    }
}

/// Score predictions against the manifest's truth sequences. Every test
/// video must have exactly one prediction entry (matched by video id);
/// extra predictions are ignored. The batch score divides the summed edit
/// distances by the total number of truth labels.
pub fn batch_score(
    manifest: &BatchManifest,
    predictions: &[PredictionEntry],
    wall_time_seconds: f64,
) -> Result<ScoreReport, EvalError> {
    let mut per_video = Vec::with_capacity(manifest.test.len());
    let mut total_edits = 0usize;
    let mut total_truth = 0usize;
    for entry in &manifest.test {
        let mut found = None;
        for p in predictions {
            if p.video == entry.path {
                if found.is_some() {
                    return Err(EvalError::DuplicatePrediction(entry.path.clone()));
                }
                found = Some(p);
            }
        }
        let predicted = found
            .ok_or_else(|| EvalError::MissingPrediction(entry.path.clone()))?
            .labels
            .clone();
        let edits = levenshtein(&entry.truth, &predicted);
        total_edits += edits;
        total_truth += entry.truth.len();
        per_video.push(VideoScore {
            video: entry.path.clone(),
            truth: entry.truth.clone(),
            predicted,
            edits,
            normalized: edits as f64 / entry.truth.len() as f64,
        });
    }
    let score = if total_truth == 0 {
        0.0
    } else {
        total_edits as f64 / total_truth as f64
    };
    Ok(ScoreReport {
        per_video,
        total_edits,
        total_truth_labels: total_truth,
        score,
        wall_time_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frameio::{BatchManifest, TestEntry, TrainEntry};
    use proptest::prelude::*;

    // Exhaustive edit-script search, no memoization.
    fn lev_brute(a: &[u32], b: &[u32]) -> usize {
        if a.is_empty() {
            return b.len();
        }
        if b.is_empty() {
            return a.len();
        }
        let sub = lev_brute(&a[1..], &b[1..]) + usize::from(a[0] != b[0]);
        let del = lev_brute(&a[1..], b) + 1;
        let ins = lev_brute(a, &b[1..]) + 1;
        sub.min(del).min(ins)
    }

    #[test]
    fn identity_and_insertions() {
        assert_eq!(levenshtein(&[1, 2, 3], &[1, 2, 3]), 0);
        assert_eq!(levenshtein(&[1, 2], &[1, 3, 2]), 1);
        assert_eq!(levenshtein(&[], &[4, 4]), 2);
        assert_eq!(levenshtein(&[4, 4], &[]), 2);
    }

    fn all_sequences(max_len: usize, alphabet: u32) -> Vec<Vec<u32>> {
        let mut out = vec![vec![]];
        let mut frontier = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for seq in &frontier {
                for s in 1..=alphabet {
                    let mut e = seq.clone();
                    e.push(s);
                    next.push(e);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    #[test]
    fn dp_equals_exhaustive_search() {
        let seqs = all_sequences(4, 3);
        assert_eq!(seqs.len(), 121);
        for a in &seqs {
            for b in &seqs {
                assert_eq!(levenshtein(a, b), lev_brute(a, b), "a={a:?} b={b:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn metric_properties(
            a in prop::collection::vec(1u32..6, 0..8),
            b in prop::collection::vec(1u32..6, 0..8),
            c in prop::collection::vec(1u32..6, 0..8),
        ) {
            let ab = levenshtein(&a, &b);
            prop_assert_eq!(ab, levenshtein(&b, &a));
            prop_assert_eq!(levenshtein(&a, &a), 0);
            prop_assert!(ab <= a.len().max(b.len()));
            if ab == 0 { prop_assert_eq!(&a, &b); }
            let ac = levenshtein(&a, &c);
            let cb = levenshtein(&c, &b);
            prop_assert!(ab <= ac + cb);
        }
    }

    fn manifest(truths: Vec<Vec<u32>>) -> BatchManifest {
        let test = truths
            .into_iter()
            .enumerate()
            .map(|(i, truth)| TestEntry { path: format!("test/v{i}"), truth })
            .collect();
        BatchManifest::new(
            8,
            8,
            (1..=8).map(|l| TrainEntry { path: format!("train/g{l}"), label: l }).collect(),
            test,
            std::path::PathBuf::new(),
        )
        .unwrap()
    }

    fn predict(manifest: &BatchManifest, f: impl Fn(usize, &[u32]) -> Vec<u32>) -> Vec<PredictionEntry> {
        manifest
            .test
            .iter()
            .enumerate()
            .map(|(i, e)| PredictionEntry { video: e.path.clone(), labels: f(i, &e.truth) })
            .collect()
    }

    #[test]
    fn perfect_predictions_score_zero() {
        let m = manifest(vec![vec![1, 2], vec![3], vec![4, 5, 6]]);
        let preds = predict(&m, |_, t| t.to_vec());
        let report = batch_score(&m, &preds, 0.0).unwrap();
        assert_eq!(report.score, 0.0);
        assert_eq!(report.total_truth_labels, 6);
    }

    #[test]
    fn one_substitution_in_twenty() {
        let truths: Vec<Vec<u32>> = (0..10).map(|_| vec![1, 2]).collect();
        let m = manifest(truths);
        let preds = predict(&m, |i, t| {
            let mut p = t.to_vec();
            if i == 0 {
                p[0] = 3;
            }
            p
        });
        let report = batch_score(&m, &preds, 0.0).unwrap();
        assert_eq!(report.total_edits, 1);
        assert_eq!(report.total_truth_labels, 20);
        assert!((report.score - 0.05).abs() < 1e-15);
    }

    #[test]
    fn degenerate_predictions_match_dp_sum() {
        let m = manifest(vec![vec![1, 2, 3], vec![2, 2], vec![5, 4, 3, 2, 1]]);
        let preds = predict(&m, |_, _| vec![8]);
        let report = batch_score(&m, &preds, 0.0).unwrap();
        let expected: usize = m.test.iter().map(|e| lev_brute(&e.truth, &[8])).sum();
        assert_eq!(report.total_edits, expected);
        assert_eq!(report.score, expected as f64 / 10.0);
    }

    #[test]
    fn missing_prediction_names_video() {
        let m = manifest(vec![vec![1], vec![2]]);
        let preds = vec![PredictionEntry { video: "test/v0".into(), labels: vec![1] }];
        match batch_score(&m, &preds, 0.0).unwrap_err() {
            EvalError::MissingPrediction(v) => assert_eq!(v, "test/v1"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn score_invariant_to_video_order() {
        let m = manifest(vec![vec![1, 2], vec![3, 4, 5], vec![6]]);
        let preds = predict(&m, |i, t| if i == 1 { vec![7] } else { t.to_vec() });
        let report = batch_score(&m, &preds, 0.0).unwrap();

        let mut reordered = manifest(vec![vec![6], vec![1, 2], vec![3, 4, 5]]);
        // Rebuild ids so predictions still match by path.
        reordered.test[0].path = "test/v2".into();
        reordered.test[1].path = "test/v0".into();
        reordered.test[2].path = "test/v1".into();
        let report2 = batch_score(&reordered, &preds, 0.0).unwrap();
        assert_eq!(report.score, report2.score);
        assert_eq!(report.total_edits, report2.total_edits);
    }
}
