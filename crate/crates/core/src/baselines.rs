//! Online smoothing baselines: recursive (exponential) averaging of softmax
//! frames and sliding-window modal smoothing of hard labels.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::stream::ClassId;

const SUM_TOLERANCE: f64 = 1e-6;

/// One frame of class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxFrame {
    probs: Vec<f64>,
}

impl SoftmaxFrame {
    /// Checks non-negativity and unit sum (within 1e-6).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Softmax("no classes".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::Softmax(format!("invalid probability {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Softmax(format!("probabilities sum to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative scores to unit sum.
    pub fn from_scores(scores: Vec<f64>) -> Result<Self> {
        let sum: f64 = scores.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::Softmax(format!("scores sum to {sum}")));
        }
        Self::new(scores.into_iter().map(|s| s / sum).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }
}

/// Index of the largest value; ties go to the lowest index.
fn argmax(values: &[f64]) -> ClassId {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `state <- alpha * state + (1 - alpha) * p_t`, seeded with the first frame.
#[derive(Debug, Clone)]
pub struct RecursiveAverage {
    alpha: f64,
    state: Option<Vec<f64>>,
}

impl RecursiveAverage {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1), got {alpha}")));
        }
        Ok(Self { alpha, state: None })
    }

    pub fn push(&mut self, frame: &SoftmaxFrame) -> Result<ClassId> {
        match &mut self.state {
            None => self.state = Some(frame.probs.clone()),
            Some(state) => {
                if state.len() != frame.num_classes() {
                    return Err(Error::Softmax(format!(
                        "expected {} classes, got {}",
                        state.len(),
                        frame.num_classes()
                    )));
                }
                for (s, p) in state.iter_mut().zip(&frame.probs) {
                    *s = self.alpha * *s + (1.0 - self.alpha) * p;
                }
            }
        }
        Ok(argmax(self.state.as_deref().unwrap()))
    }

    pub fn state(&self) -> Option<&[f64]> {
        self.state.as_deref()
    }
}

/// Mode of the last `w` labels; ties go to the most recently seen label.
#[derive(Debug, Clone)]
pub struct ModalSmoother {
    window: usize,
    recent: VecDeque<ClassId>,
    counts: Vec<usize>,
}

impl ModalSmoother {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidParameter("modal window must be at least 1".into()));
        }
        Ok(Self {
            window,
            recent: VecDeque::with_capacity(window),
            counts: Vec::new(),
        })
    }

    pub fn push(&mut self, label: ClassId) -> ClassId {
        if self.recent.len() == self.window {
            let old = self.recent.pop_front().unwrap();
            self.counts[old] -= 1;
        }
        if label >= self.counts.len() {
            self.counts.resize(label + 1, 0);
        }
        self.counts[label] += 1;
        self.recent.push_back(label);

        let best = self.recent.iter().map(|&l| self.counts[l]).max().unwrap();
        *self
            .recent
            .iter()
            .rev()
            .find(|&&l| self.counts[l] == best)
            .unwrap()
    }
}

/// Parses a headerless CSV with one row of `C` probabilities per frame.
pub fn parse_softmax_csv(text: &str) -> Result<Vec<SoftmaxFrame>> {
    let mut frames = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: i + 1, message };
        let probs = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(e.to_string()))?;
        match width {
            None => width = Some(probs.len()),
            Some(w) if w != probs.len() => {
                return Err(parse_err(format!("expected {w} columns, found {}", probs.len())))
            }
            _ => {}
        }
        frames.push(SoftmaxFrame::new(probs).map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(frames)
}
