//! Exhaustive grid search over cleaner hyper-parameters on validation pairs.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cleaner::{clean_stream, CleanerConfig, FinalizePolicy};
use crate::cutoffs::{ClassLengthStats, CutoffPolicy};
use crate::error::{Error, Result};
use crate::metrics::{f1_column, Accumulator, MetricsReport, DEFAULT_THRESHOLDS};
use crate::stream::LabelStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    F1At(f64),
    Edit,
    Acc,
    /// Average of the mean F1 (as a percentage) and the edit score.
    MeanF1PlusEdit,
}

impl Default for Objective {
    fn default() -> Self {
        Objective::F1At(0.5)
    }
}

impl Objective {
    fn score(&self, report: &MetricsReport) -> f64 {
        match *self {
            Objective::F1At(t) => report.f1_at(t).map_or(0.0, |p| p.f1),
            Objective::Edit => report.edit,
            Objective::Acc => report.acc,
            Objective::MeanF1PlusEdit => {
                let mean = report.f1.iter().map(|(_, p)| p.f1).sum::<f64>() / report.f1.len() as f64;
                (100.0 * mean + report.edit) / 2.0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub static_c_min: Vec<usize>,
    pub static_b: Vec<usize>,
    pub kappa: Vec<f64>,
    pub c_abs_min: Vec<usize>,
    pub class_b: Vec<usize>,
    /// Only pair class-based `b` values with `C_abs >= b`.
    pub class_b_up_to_c_abs: bool,
    pub objective: Objective,
}

impl GridSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grid serialize")
    }

    fn has_static(&self) -> bool {
        !self.static_c_min.is_empty() && !self.static_b.is_empty()
    }

    fn has_class_based(&self) -> bool {
        !self.kappa.is_empty() && !self.c_abs_min.is_empty() && !self.class_b.is_empty()
    }

    /// Every grid point, valid or not, in a fixed order.
    pub fn points(&self) -> Vec<TunePoint> {
        let mut points = Vec::new();
        if self.has_static() {
            for &c_min in &self.static_c_min {
                for &b in &self.static_b {
                    points.push(TunePoint::Static { c_min, b });
                }
            }
        }
        if self.has_class_based() {
            for &kappa in &self.kappa {
                for &c_abs_min in &self.c_abs_min {
                    for &b in &self.class_b {
                        if self.class_b_up_to_c_abs && b > c_abs_min {
                            continue;
                        }
                        points.push(TunePoint::ClassBased { kappa, c_abs_min, b });
                    }
                }
            }
        }
        points
    }

    /// CBAA grid: static `C_min` x `b`, and class-based with `b` up to `C_abs`.
    pub fn cbaa() -> Self {
        Self {
            static_c_min: vec![2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 15, 20],
            static_b: vec![1, 2, 3, 4, 5, 6],
            kappa: vec![1.0, 1.5, 2.0, 2.5, 3.0],
            c_abs_min: vec![1, 2, 3, 4, 5],
            class_b: vec![1, 2, 3, 4, 5],
            class_b_up_to_c_abs: true,
            objective: Objective::default(),
        }
    }

    pub fn fifty_salads() -> Self {
        Self {
            static_c_min: vec![5, 10, 20, 50, 75, 100, 125, 150, 200, 300],
            static_b: vec![1, 3, 5, 10, 15, 20, 50],
            kappa: vec![1.5, 2.0, 2.5, 3.0],
            c_abs_min: vec![10, 30, 40],
            class_b: vec![1, 3, 5, 10, 15, 20],
            class_b_up_to_c_abs: false,
            objective: Objective::default(),
        }
    }

    pub fn assembly101() -> Self {
        Self {
            static_c_min: vec![20, 50, 70, 90, 110, 150, 200],
            static_b: vec![1, 2, 5, 10, 20],
            kappa: vec![1.0, 1.5, 2.0, 2.5],
            c_abs_min: vec![20, 30, 40, 50],
            class_b: vec![2, 5, 10, 20],
            class_b_up_to_c_abs: false,
            objective: Objective::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TunePoint {
    Static { c_min: usize, b: usize },
    ClassBased { kappa: f64, c_abs_min: usize, b: usize },
}

impl TunePoint {
    pub fn b(&self) -> usize {
        match *self {
            TunePoint::Static { b, .. } | TunePoint::ClassBased { b, .. } => b,
        }
    }

    /// `C_min` for static points, `C_abs` for class-based ones.
    fn cutoff_param(&self) -> usize {
        match *self {
            TunePoint::Static { c_min, .. } => c_min,
            TunePoint::ClassBased { c_abs_min, .. } => c_abs_min,
        }
    }

    pub fn policy(&self, stats: Option<&Arc<ClassLengthStats>>) -> Result<CutoffPolicy> {
        match *self {
            TunePoint::Static { c_min, .. } => CutoffPolicy::fixed(c_min),
            TunePoint::ClassBased { kappa, c_abs_min, .. } => {
                CutoffPolicy::class_based(kappa, c_abs_min, stats.ok_or(Error::MissingStats)?.clone())
            }
        }
    }

    /// `mode,c_min,kappa,c_abs_min,b` with blanks for unused parameters.
    fn csv_params(&self) -> String {
        match *self {
            TunePoint::Static { c_min, b } => format!("static,{c_min},,,{b}"),
            TunePoint::ClassBased { kappa, c_abs_min, b } => format!("class,,{kappa},{c_abs_min},{b}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TuneRow {
    pub point: TunePoint,
    pub config: Arc<CleanerConfig>,
    pub report: MetricsReport,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    /// Valid grid points, best first.
    pub rows: Vec<TuneRow>,
}

impl TuneResult {
    pub fn best(&self) -> &TuneRow {
        &self.rows[0]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,c_min,kappa,c_abs_min,b");
        if let Some(first) = self.rows.first() {
            let _ = write!(out, ",{}", first.report.csv_header());
        }
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(out, "{},{}", row.point.csv_params(), row.report.csv_row());
        }
        out
    }
}

fn rank(a: &TuneRow, b: &TuneRow, objective: &Objective) -> Ordering {
    let kind = |p: &TunePoint| matches!(p, TunePoint::ClassBased { .. }) as u8;
    let kappa = |p: &TunePoint| match *p {
        TunePoint::ClassBased { kappa, .. } => kappa,
        TunePoint::Static { .. } => 0.0,
    };
    let secondary = |r: &TuneRow| match objective {
        Objective::F1At(_) => r.report.edit,
        _ => 0.0,
    };
    b.objective
        .total_cmp(&a.objective)
        .then_with(|| secondary(b).total_cmp(&secondary(a)))
        .then_with(|| b.report.acc.total_cmp(&a.report.acc))
        .then_with(|| a.point.cutoff_param().cmp(&b.point.cutoff_param()))
        .then_with(|| a.point.b().cmp(&b.point.b()))
        .then_with(|| kind(&a.point).cmp(&kind(&b.point)))
        .then_with(|| kappa(&a.point).total_cmp(&kappa(&b.point)))
}

/// Cleans every raw stream with every valid grid point and scores the pooled
/// result against the ground truth. Points violating `b < cutoff` are skipped.
pub fn grid_search(
    pairs: &[(LabelStream, LabelStream)],
    grid: &GridSpec,
    stats: Option<&Arc<ClassLengthStats>>,
) -> Result<TuneResult> {
    let Some((first, _)) = pairs.first() else {
        return Err(Error::InvalidParameter("grid search needs at least one validation pair".into()));
    };
    if !grid.has_static() && !grid.has_class_based() {
        return Err(Error::InvalidParameter(
            "grid needs static_c_min and static_b, or kappa, c_abs_min and class_b".into(),
        ));
    }
    if grid.has_class_based() && stats.is_none() {
        return Err(Error::MissingStats);
    }
    let mut thresholds = DEFAULT_THRESHOLDS.to_vec();
    if let Objective::F1At(t) = grid.objective {
        if !thresholds.iter().any(|x| f1_column(*x) == f1_column(t)) {
            thresholds.push(t);
        }
    }
    let class_map = first.class_map().clone();

    let configs: Vec<(TunePoint, Arc<CleanerConfig>)> = grid
        .points()
        .into_iter()
        .filter_map(|point| {
            let policy = point.policy(stats).ok()?;
            let config = CleanerConfig::new(policy, point.b(), class_map.clone()).ok()?;
            Some((point, Arc::new(config)))
        })
        .collect();
    if configs.is_empty() {
        return Err(Error::EmptyGrid);
    }

    let mut rows = configs
        .into_par_iter()
        .map(|(point, config)| {
            let mut acc = Accumulator::new(&thresholds)?;
            for (raw, gt) in pairs {
                let tidy = clean_stream(raw, &config, FinalizePolicy::DiscardUnconfirmed)?;
                acc.add(&tidy, gt)?;
            }
            let report = acc.report();
            let objective = grid.objective.score(&report);
            Ok(TuneRow {
                point,
                config,
                report,
                objective,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| rank(a, b, &grid.objective));
    Ok(TuneResult { rows })
}
