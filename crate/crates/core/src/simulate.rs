//! Synthetic ground truth and corrupted prediction streams.
//!
//! Ground truth is a Markov chain over classes with log-normal segment
//! lengths. Corruption models three error modes of frame-wise online
//! classifiers: shifted boundaries, short wrong-label blips inside a
//! segment, and isolated per-frame substitutions.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::LogNormal;
use serde::{Deserialize, Serialize};

use crate::baselines::SoftmaxFrame;
use crate::error::{Error, Result};
use crate::stream::{rle_segments, ClassId, ClassMap, LabelStream};

#[derive(Debug, Clone)]
pub struct GenModel {
    class_map: Arc<ClassMap>,
    lengths: Vec<LogNormal<f64>>,
    transitions: Vec<WeightedIndex<f64>>,
}

impl GenModel {
    /// `lengths[c] = (mu_log, sigma_log)`; `transitions` is row-stochastic
    /// with a zero diagonal (ignored for a single class).
    pub fn new(
        class_map: Arc<ClassMap>,
        lengths: &[(f64, f64)],
        transitions: &[Vec<f64>],
    ) -> Result<Self> {
        let c = class_map.len();
        if c == 0 {
            return Err(Error::InvalidParameter("generative model needs at least one class".into()));
        }
        if lengths.len() != c || transitions.len() != c {
            return Err(Error::InvalidParameter(format!(
                "expected {c} length distributions and {c} transition rows"
            )));
        }
        let lengths = lengths
            .iter()
            .map(|&(mu, sigma)| {
                if !(mu.is_finite() && sigma.is_finite() && sigma >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "length distribution needs finite mu_log and sigma_log >= 0, got ({mu}, {sigma})"
                    )));
                }
                LogNormal::new(mu, sigma)
                    .map_err(|e| Error::InvalidParameter(format!("length distribution: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::with_capacity(c);
        if c > 1 {
            for (i, row) in transitions.iter().enumerate() {
                let sum: f64 = row.iter().sum();
                if row.len() != c || (sum - 1.0).abs() > 1e-9 || row[i] != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "transition row {i} must have {c} entries, sum to 1 and a zero diagonal"
                    )));
                }
                rows.push(
                    WeightedIndex::new(row)
                        .map_err(|e| Error::InvalidParameter(format!("transition row {i}: {e}")))?,
                );
            }
        }
        Ok(Self {
            class_map,
            lengths,
            transitions: rows,
        })
    }

    /// Every class shares one length distribution; transitions are uniform
    /// over the other classes.
    pub fn uniform(class_map: Arc<ClassMap>, mu_log: f64, sigma_log: f64) -> Result<Self> {
        let c = class_map.len();
        let lengths = vec![(mu_log, sigma_log); c];
        let transitions: Vec<Vec<f64>> = (0..c)
            .map(|i| {
                (0..c)
                    .map(|j| if i == j || c == 1 { 0.0 } else { 1.0 / (c - 1) as f64 })
                    .collect()
            })
            .collect();
        Self::new(class_map, &lengths, &transitions)
    }

    pub fn class_map(&self) -> &Arc<ClassMap> {
        &self.class_map
    }
}

/// Markov-chain segments with log-normal lengths, truncated to `total_frames`.
pub fn gen_ground_truth<R: Rng + ?Sized>(model: &GenModel, total_frames: usize, rng: &mut R) -> LabelStream {
    let mut labels = Vec::with_capacity(total_frames);
    let classes = model.class_map.len();
    let mut class = rng.random_range(0..classes);
    while labels.len() < total_frames {
        let len = (model.lengths[class].sample(rng).round() as usize).max(1);
        let take = len.min(total_frames - labels.len());
        labels.extend(std::iter::repeat_n(class, take));
        if classes > 1 {
            class = model.transitions[class].sample(rng);
        }
    }
    LabelStream::from_parts(labels, model.class_map.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct NoiseConfig {
    /// Probability that a segment receives one wrong-label blip.
    pub blip_rate: f64,
    /// Blip lengths are uniform in `1..=blip_len_max`.
    pub blip_len_max: usize,
    /// Each boundary moves by up to this many frames either way.
    pub boundary_jitter_max: usize,
    /// Per-frame probability of a random wrong label.
    pub sub_rate: f64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("blip_rate", self.blip_rate), ("sub_rate", self.sub_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

fn other_class<R: Rng + ?Sized>(label: ClassId, classes: usize, rng: &mut R) -> ClassId {
    let pick = rng.random_range(0..classes - 1);
    if pick >= label {
        pick + 1
    } else {
        pick
    }
}

/// Applies boundary jitter, then blips, then substitutions. The output has
/// the same length and vocabulary as `gt`.
pub fn corrupt<R: Rng + ?Sized>(gt: &LabelStream, noise: &NoiseConfig, rng: &mut R) -> Result<LabelStream> {
    noise.validate()?;
    let classes = gt.class_map().len();
    let n = gt.len();
    let mut segments = rle_segments(gt.labels());

    if noise.boundary_jitter_max > 0 && segments.len() > 1 {
        let j = noise.boundary_jitter_max as i64;
        for k in 1..segments.len() {
            let lo = segments[k - 1].start as i64 + 1;
            let hi = segments[k].end as i64;
            let moved = (segments[k].start as i64 + rng.random_range(-j..=j)).clamp(lo, hi);
            segments[k].start = moved as usize;
            segments[k - 1].end = moved as usize - 1;
        }
    }

    let mut labels = Vec::with_capacity(n);
    for seg in &segments {
        labels.extend(std::iter::repeat_n(seg.label, seg.len()));
    }

    if classes > 1 && noise.blip_rate > 0.0 && noise.blip_len_max > 0 {
        for seg in &segments {
            if !rng.random_bool(noise.blip_rate) {
                continue;
            }
            let len = rng.random_range(1..=noise.blip_len_max);
            // strictly inside the segment so the blip never merges with a neighbour
            if seg.len() < len + 2 {
                continue;
            }
            let start = rng.random_range(seg.start + 1..=seg.end - len);
            let label = other_class(seg.label, classes, rng);
            labels[start..start + len].fill(label);
        }
    }

    if classes > 1 && noise.sub_rate > 0.0 {
        for l in labels.iter_mut() {
            if rng.random_bool(noise.sub_rate) {
                *l = other_class(*l, classes, rng);
            }
        }
    }

    Ok(LabelStream::from_parts(labels, gt.class_map().clone()))
}

/// Softmax frames with `1 - eps` on the given label and the rest spread evenly.
pub fn softmax_frames(stream: &LabelStream, eps: f64) -> Result<Vec<SoftmaxFrame>> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("eps must lie in [0, 1], got {eps}")));
    }
    let c = stream.class_map().len();
    let off = if c > 1 { eps / (c - 1) as f64 } else { 0.0 };
    stream
        .labels()
        .iter()
        .map(|&l| {
            let mut probs = vec![off; c];
            probs[l] = if c > 1 { 1.0 - eps } else { 1.0 };
            SoftmaxFrame::new(probs)
        })
        .collect()
}
