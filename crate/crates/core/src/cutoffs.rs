//! Per-class segment-length statistics and minimum-segment cutoffs.
//!
//! Class statistics are a log-normal fit to ground-truth segment lengths.
//! A class-based cutoff is `max(C_abs, round(mean - kappa * std))` where the
//! mean and std are the frame-space moments of the fitted distribution.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{ClassId, LabelStream};

/// Log-normal fit for one class. `count == 0` marks an absent class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassStat {
    pub count: usize,
    pub mu_log: f64,
    pub sigma_log: f64,
    pub mu_frames: f64,
    pub sigma_frames: f64,
}

impl ClassStat {
    pub const ABSENT: ClassStat = ClassStat {
        count: 0,
        mu_log: 0.0,
        sigma_log: 0.0,
        mu_frames: 0.0,
        sigma_frames: 0.0,
    };

    pub fn from_log_params(count: usize, mu_log: f64, sigma_log: f64) -> Self {
        if count == 0 {
            return Self::ABSENT;
        }
        let (mu_frames, sigma_frames) = lognormal_moments(mu_log, sigma_log);
        Self {
            count,
            mu_log,
            sigma_log,
            mu_frames,
            sigma_frames,
        }
    }

    /// Moment-matches `ln(length)`; sample std uses `n - 1` and is 0 for a
    /// single observation.
    pub fn fit(lengths: &[usize]) -> Self {
        let n = lengths.len();
        if n == 0 {
            return Self::ABSENT;
        }
        let logs: Vec<f64> = lengths.iter().map(|&l| (l as f64).ln()).collect();
        let mu = logs.iter().sum::<f64>() / n as f64;
        let sigma = if n == 1 {
            0.0
        } else {
            (logs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self::from_log_params(n, mu, sigma)
    }

    pub fn is_present(&self) -> bool {
        self.count > 0
    }
}

/// Mean and standard deviation (in frames) of `exp(N(mu_log, sigma_log^2))`.
pub fn lognormal_moments(mu_log: f64, sigma_log: f64) -> (f64, f64) {
    let s2 = sigma_log * sigma_log;
    let mean = (mu_log + s2 / 2.0).exp();
    let var = s2.exp_m1() * (2.0 * mu_log + s2).exp();
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassLengthStats {
    classes: Vec<ClassStat>,
}

#[derive(Serialize, Deserialize)]
struct StatsDocument {
    classes: Vec<StatsEntry>,
}

#[derive(Serialize, Deserialize)]
struct StatsEntry {
    id: ClassId,
    count: usize,
    mu_log: f64,
    sigma_log: f64,
}

impl ClassLengthStats {
    pub fn new(classes: Vec<ClassStat>) -> Self {
        Self { classes }
    }

    /// Fits every class from per-class segment lengths.
    pub fn from_lengths(per_class: &[Vec<usize>]) -> Self {
        Self::new(per_class.iter().map(|l| ClassStat::fit(l)).collect())
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Statistics for `class`, or `None` when the class was never observed.
    pub fn get(&self, class: ClassId) -> Option<&ClassStat> {
        self.classes.get(class).filter(|s| s.is_present())
    }

    pub fn iter(&self) -> impl Iterator<Item = &ClassStat> {
        self.classes.iter()
    }

    pub fn to_json(&self) -> String {
        let doc = StatsDocument {
            classes: self
                .classes
                .iter()
                .enumerate()
                .map(|(id, s)| StatsEntry {
                    id,
                    count: s.count,
                    mu_log: s.mu_log,
                    sigma_log: s.sigma_log,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("stats serialize")
    }

    /// Parses the JSON document; frame-space moments are recomputed.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StatsDocument = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        let mut classes = vec![None; doc.classes.len()];
        for entry in doc.classes {
            if entry.id >= classes.len() || classes[entry.id].is_some() {
                return Err(Error::InvalidParameter(format!(
                    "class ids in stats must be unique and dense, found {}",
                    entry.id
                )));
            }
            if !entry.mu_log.is_finite() || !entry.sigma_log.is_finite() || entry.sigma_log < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "class {} has invalid log-normal parameters",
                    entry.id
                )));
            }
            classes[entry.id] = Some(ClassStat::from_log_params(
                entry.count,
                entry.mu_log,
                entry.sigma_log,
            ));
        }
        Ok(Self::new(classes.into_iter().map(Option::unwrap).collect()))
    }
}

/// Pools ground-truth segment lengths per class across all streams.
pub fn fit_class_stats(gt_streams: &[LabelStream]) -> Result<ClassLengthStats> {
    let Some(first) = gt_streams.first() else {
        return Ok(ClassLengthStats::default());
    };
    let class_map = first.class_map();
    let mut lengths = vec![Vec::new(); class_map.len()];
    for stream in gt_streams {
        if stream.class_map() != class_map {
            return Err(Error::InvalidParameter(
                "ground-truth streams do not share one class map".into(),
            ));
        }
        stream.validate()?;
        for seg in stream.segments() {
            lengths[seg.label].push(seg.len());
        }
    }
    Ok(ClassLengthStats::from_lengths(&lengths))
}

/// Which pair of moments the class-based formula subtracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MomentSpace {
    /// `mu_frames - kappa * sigma_frames`.
    #[default]
    Frames,
    /// `exp(mu_log - kappa * sigma_log)`, i.e. the formula applied to the
    /// log-space parameters and mapped back to frames.
    Log,
}

/// Rounds half up to whole frames.
fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Class-based cutoff with frame-space moments; absent classes get `c_abs_min`.
pub fn class_cutoff(stats: &ClassLengthStats, class: ClassId, kappa: f64, c_abs_min: usize) -> usize {
    class_cutoff_in(stats, class, kappa, c_abs_min, MomentSpace::Frames)
}

pub fn class_cutoff_in(
    stats: &ClassLengthStats,
    class: ClassId,
    kappa: f64,
    c_abs_min: usize,
    space: MomentSpace,
) -> usize {
    let floor = c_abs_min.max(1);
    let Some(s) = stats.get(class) else {
        return floor;
    };
    let raw = match space {
        MomentSpace::Frames => s.mu_frames - kappa * s.sigma_frames,
        MomentSpace::Log => (s.mu_log - kappa * s.sigma_log).exp(),
    };
    let rounded = round_half_up(raw);
    if rounded <= floor as i64 {
        floor
    } else {
        rounded as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CutoffPolicy {
    Static {
        c_min: usize,
    },
    ClassBased {
        kappa: f64,
        c_abs_min: usize,
        stats: Arc<ClassLengthStats>,
        space: MomentSpace,
    },
}

impl CutoffPolicy {
    pub fn fixed(c_min: usize) -> Result<Self> {
        if c_min == 0 {
            return Err(Error::InvalidParameter("static C_min must be at least 1".into()));
        }
        Ok(CutoffPolicy::Static { c_min })
    }

    pub fn class_based(kappa: f64, c_abs_min: usize, stats: Arc<ClassLengthStats>) -> Result<Self> {
        Self::class_based_in(kappa, c_abs_min, stats, MomentSpace::Frames)
    }

    pub fn class_based_in(
        kappa: f64,
        c_abs_min: usize,
        stats: Arc<ClassLengthStats>,
        space: MomentSpace,
    ) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!("kappa must be >= 0, got {kappa}")));
        }
        if c_abs_min == 0 {
            return Err(Error::InvalidParameter("C_abs_min must be at least 1".into()));
        }
        Ok(CutoffPolicy::ClassBased {
            kappa,
            c_abs_min,
            stats,
            space,
        })
    }

    /// Minimum candidate span (frames) needed to confirm a segment of `class`.
    pub fn resolve(&self, class: ClassId) -> usize {
        match self {
            CutoffPolicy::Static { c_min } => *c_min,
            CutoffPolicy::ClassBased {
                kappa,
                c_abs_min,
                stats,
                space,
            } => class_cutoff_in(stats, class, *kappa, *c_abs_min, *space),
        }
    }

    /// Cutoffs for classes `0..num_classes`.
    pub fn resolve_all(&self, num_classes: usize) -> Vec<usize> {
        (0..num_classes).map(|c| self.resolve(c)).collect()
    }
}

pub fn resolve_cutoff(policy: &CutoffPolicy, class: ClassId) -> usize {
    policy.resolve(class)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{ClassMap, Segment};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn zero_variance_fit() {
        let s = ClassStat::fit(&[10, 10, 10, 10]);
        assert!(close(s.mu_log, 10f64.ln(), 1e-12));
        assert_eq!(s.sigma_log, 0.0);
        assert!(close(s.mu_frames, 10.0, 1e-9));
        assert!(close(s.sigma_frames, 0.0, 1e-9));
    }

    #[test]
    fn geometric_lengths_fit() {
        // ln 3, ln 9, ln 27 are equally spaced by ln 3 around ln 9.
        let s = ClassStat::fit(&[3, 9, 27]);
        assert!(close(s.mu_log, 2.1972, 1e-4));
        assert!(close(s.sigma_log, 1.0986, 1e-4));
        assert!(close(s.mu_frames, 16.456147, 1e-6));
        assert!(close(s.sigma_frames, 25.190639, 1e-6));
    }

    #[test]
    fn single_observation_has_zero_spread() {
        let s = ClassStat::fit(&[7]);
        assert_eq!(s.sigma_log, 0.0);
        assert!(close(s.mu_frames, 7.0, 1e-9));
    }

    #[test]
    fn absent_classes_are_flagged() {
        let map = Arc::new(ClassMap::anonymous(3));
        let gt = LabelStream::from_segments(
            &[Segment::new(0, 0, 4), Segment::new(2, 5, 9)],
            map,
        )
        .unwrap();
        let stats = fit_class_stats(&[gt]).unwrap();
        assert_eq!(stats.num_classes(), 3);
        assert!(stats.get(1).is_none());
        assert_eq!(stats.get(0).unwrap().count, 1);
    }

    #[test]
    fn fit_rejects_mixed_class_maps() {
        let a = LabelStream::new(vec![0], Arc::new(ClassMap::anonymous(1))).unwrap();
        let b = LabelStream::new(vec![0], Arc::new(ClassMap::anonymous(2))).unwrap();
        assert!(fit_class_stats(&[a, b]).is_err());
    }

    #[test]
    fn cutoff_examples() {
        let flat = ClassLengthStats::from_lengths(&[vec![10, 10, 10, 10]]);
        assert_eq!(class_cutoff(&flat, 0, 2.0, 2), 10);
        let spread = ClassLengthStats::from_lengths(&[vec![3, 9, 27]]);
        assert_eq!(class_cutoff(&spread, 0, 1.5, 4), 4);
        assert_eq!(class_cutoff(&spread, 7, 1.0, 5), 5);
        assert_eq!(class_cutoff(&spread, 0, 0.0, 1), 16);
    }

    #[test]
    fn cutoff_rounds_half_up() {
        // mean 12.5 exactly: zero variance at length 12.5 is impossible with
        // integer lengths, so build the stat from log parameters.
        let stats = ClassLengthStats::new(vec![ClassStat::from_log_params(1, 12.5f64.ln(), 0.0)]);
        assert_eq!(class_cutoff(&stats, 0, 0.0, 1), 13);
    }

    #[test]
    fn log_space_variant() {
        let spread = ClassLengthStats::from_lengths(&[vec![3, 9, 27]]);
        // exp(ln 9 - 1 * ln 3) = 3
        assert_eq!(class_cutoff_in(&spread, 0, 1.0, 1, MomentSpace::Log), 3);
    }

    #[test]
    fn resolve_examples() {
        assert_eq!(CutoffPolicy::fixed(9).unwrap().resolve(3), 9);
        let stats = Arc::new(ClassLengthStats::from_lengths(&[vec![10, 10, 10, 10]]));
        let p = CutoffPolicy::class_based(2.0, 2, stats).unwrap();
        assert_eq!(p.resolve(0), 10);
        assert_eq!(p.resolve(4), 2);
        assert!(CutoffPolicy::fixed(0).is_err());
        assert!(CutoffPolicy::class_based(-1.0, 2, Arc::default()).is_err());
        assert!(CutoffPolicy::class_based(1.0, 0, Arc::default()).is_err());
    }

    #[test]
    fn json_round_trip_recomputes_moments() {
        let stats = ClassLengthStats::from_lengths(&[vec![3, 9, 27], vec![], vec![5]]);
        let back = ClassLengthStats::from_json(&stats.to_json()).unwrap();
        assert_eq!(back.num_classes(), 3);
        assert!(back.get(1).is_none());
        let (a, b) = (stats.get(0).unwrap(), back.get(0).unwrap());
        assert!(close(a.mu_frames, b.mu_frames, 1e-9));
        assert!(close(a.sigma_frames, b.sigma_frames, 1e-9));
    }

    #[test]
    fn json_rejects_sparse_ids() {
        let doc = r#"{"classes":[{"id":1,"count":1,"mu_log":1.0,"sigma_log":0.0}]}"#;
        assert!(ClassLengthStats::from_json(doc).is_err());
        let neg = r#"{"classes":[{"id":0,"count":2,"mu_log":1.0,"sigma_log":-1.0}]}"#;
        assert!(ClassLengthStats::from_json(neg).is_err());
        assert!(ClassLengthStats::from_json("not json").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cutoffs_respect_floor_and_monotone_in_kappa(
                lengths in proptest::collection::vec(1usize..200, 1..30),
                k1 in 0.0f64..4.0, dk in 0.0f64..4.0, abs_min in 1usize..20,
            ) {
                let stats = ClassLengthStats::from_lengths(&[lengths]);
                let lo = class_cutoff(&stats, 0, k1, abs_min);
                let hi = class_cutoff(&stats, 0, k1 + dk, abs_min);
                prop_assert!(lo >= abs_min && hi >= abs_min);
                prop_assert!(hi <= lo);
            }
        }
    }
}
