//! Segmentation metrics: frame accuracy (MoF), segmental F1 at IoU
//! thresholds, segmental edit score and per-class segment P/R/F1.
//!
//! Division conventions: a ratio whose numerator and denominator are both
//! zero is 1 when prediction and ground truth are both empty and 0 otherwise.

use std::fmt::Write as _;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::stream::{rle_segments, ClassId, LabelStream, Segment};

pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.1, 0.25, 0.5];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub const PERFECT: Prf = Prf {
        precision: 1.0,
        recall: 1.0,
        f1: 1.0,
    };
}

/// Segment-level true positive / false positive / false negative tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SegmentCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl SegmentCounts {
    pub fn prf(&self) -> Prf {
        let predicted = self.tp + self.fp;
        let actual = self.tp + self.fn_;
        if predicted == 0 && actual == 0 {
            return Prf::PERFECT;
        }
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(self.tp, predicted);
        let recall = ratio(self.tp, actual);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

impl std::ops::AddAssign for SegmentCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

fn check_lengths(pred: &LabelStream, gt: &LabelStream) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    Ok(())
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "IoU threshold must lie in (0, 1], got {threshold}"
        )));
    }
    Ok(())
}

/// Fraction of frames where prediction equals ground truth; 1 for empty streams.
pub fn mof_accuracy(pred: &LabelStream, gt: &LabelStream) -> Result<f64> {
    check_lengths(pred, gt)?;
    if gt.is_empty() {
        return Ok(1.0);
    }
    Ok(correct_frames(pred.labels(), gt.labels()) as f64 / gt.len() as f64)
}

fn correct_frames(pred: &[ClassId], gt: &[ClassId]) -> usize {
    pred.iter().zip(gt).filter(|(p, g)| p == g).count()
}

/// Greedy segment matching. Predicted segments are visited in temporal
/// order; each takes the unmatched same-class ground-truth segment with the
/// highest IoU and counts as a true positive when that IoU reaches the
/// threshold.
pub fn segment_counts(pred: &[Segment], gt: &[Segment], threshold: f64) -> SegmentCounts {
    let mut matched = vec![false; gt.len()];
    let mut counts = SegmentCounts::default();
    for p in pred {
        // ground-truth segments are sorted and disjoint; only overlapping
        // ones can have nonzero IoU
        let first = gt.partition_point(|g| g.end < p.start);
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gt.iter().enumerate().skip(first) {
            if g.start > p.end {
                break;
            }
            if g.label != p.label || matched[j] {
                continue;
            }
            let iou = p.iou(g);
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((j, iou));
            }
        }
        match best {
            Some((j, iou)) if iou >= threshold => {
                matched[j] = true;
                counts.tp += 1;
            }
            _ => counts.fp += 1,
        }
    }
    counts.fn_ = matched.iter().filter(|m| !**m).count();
    counts
}

pub fn f1_at_iou(pred: &LabelStream, gt: &LabelStream, threshold: f64) -> Result<Prf> {
    check_lengths(pred, gt)?;
    check_threshold(threshold)?;
    Ok(segment_counts(&pred.segments(), &gt.segments(), threshold).prf())
}

/// Levenshtein distance between two label sequences.
pub fn levenshtein(a: &[ClassId], b: &[ClassId]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut row = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            row[j + 1] = sub.min(prev[j + 1] + 1).min(row[j] + 1);
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[b.len()]
}

fn segment_labels(labels: &[ClassId]) -> Vec<ClassId> {
    rle_segments(labels).iter().map(|s| s.label).collect()
}

/// `100 * (1 - lev / max_len)` over segment label sequences; 100 when both
/// are empty. Frame counts may differ.
pub fn edit_score(pred: &LabelStream, gt: &LabelStream) -> f64 {
    edit_score_labels(&segment_labels(pred.labels()), &segment_labels(gt.labels()))
}

fn edit_score_labels(pred: &[ClassId], gt: &[ClassId]) -> f64 {
    let longest = pred.len().max(gt.len());
    if longest == 0 {
        return 100.0;
    }
    100.0 * (1.0 - levenshtein(pred, gt) as f64 / longest as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSegmentReport {
    /// Classes that occur as a ground-truth or predicted segment label.
    pub per_class: Vec<(ClassId, Prf)>,
    pub mean: Prf,
    pub min: Prf,
}

/// Segment-level classification: every ground-truth segment is assigned
/// the majority predicted label over its frames (ties to the lowest id).
pub fn per_class_segment_prf(pred: &LabelStream, gt: &LabelStream) -> Result<ClassSegmentReport> {
    check_lengths(pred, gt)?;
    let classes = gt
        .class_map()
        .len()
        .max(pred.class_map().len())
        .max(pred.labels().iter().chain(gt.labels()).max().map_or(0, |m| m + 1));
    let mut counts = vec![SegmentCounts::default(); classes];
    let mut seen = vec![false; classes];
    let mut votes = vec![0usize; classes];
    for seg in gt.segments() {
        votes.fill(0);
        for &l in &pred.labels()[seg.start..=seg.end] {
            votes[l] += 1;
        }
        let majority = votes
            .iter()
            .enumerate()
            .fold(0, |best, (c, &v)| if v > votes[best] { c } else { best });
        seen[seg.label] = true;
        seen[majority] = true;
        if majority == seg.label {
            counts[seg.label].tp += 1;
        } else {
            counts[seg.label].fn_ += 1;
            counts[majority].fp += 1;
        }
    }
    let per_class: Vec<(ClassId, Prf)> = (0..classes)
        .filter(|&c| seen[c])
        .map(|c| (c, counts[c].prf()))
        .collect();
    if per_class.is_empty() {
        return Ok(ClassSegmentReport {
            per_class,
            mean: Prf::PERFECT,
            min: Prf::PERFECT,
        });
    }
    let n = per_class.len() as f64;
    let mean = Prf {
        precision: per_class.iter().map(|(_, p)| p.precision).sum::<f64>() / n,
        recall: per_class.iter().map(|(_, p)| p.recall).sum::<f64>() / n,
        f1: per_class.iter().map(|(_, p)| p.f1).sum::<f64>() / n,
    };
    let min = Prf {
        precision: per_class.iter().map(|(_, p)| p.precision).fold(f64::INFINITY, f64::min),
        recall: per_class.iter().map(|(_, p)| p.recall).fold(f64::INFINITY, f64::min),
        f1: per_class.iter().map(|(_, p)| p.f1).fold(f64::INFINITY, f64::min),
    };
    Ok(ClassSegmentReport {
        per_class,
        mean,
        min,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub acc: f64,
    /// `(threshold, scores)` in ascending threshold order.
    pub f1: Vec<(f64, Prf)>,
    pub edit: f64,
}

/// Column name for a threshold: `0.25` becomes `f1_025`.
pub fn f1_column(threshold: f64) -> String {
    format!("f1_{:03}", (threshold * 100.0).round() as u32)
}

impl MetricsReport {
    pub fn f1_at(&self, threshold: f64) -> Option<Prf> {
        self.f1
            .iter()
            .find(|(t, _)| (t - threshold).abs() < 1e-12)
            .map(|(_, p)| *p)
    }

    /// `acc,f1_010,f1_025,f1_050,edit` for the report's thresholds.
    pub fn csv_header(&self) -> String {
        let mut out = String::from("acc");
        for (t, _) in &self.f1 {
            let _ = write!(out, ",{}", f1_column(*t));
        }
        out.push_str(",edit");
        out
    }

    /// Values with 4 decimal places, in header order.
    pub fn csv_row(&self) -> String {
        let mut out = format!("{:.4}", self.acc);
        for (_, p) in &self.f1 {
            let _ = write!(out, ",{:.4}", p.f1);
        }
        let _ = write!(out, ",{:.4}", self.edit);
        out
    }

    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        map.insert("acc".into(), self.acc.into());
        for (t, p) in &self.f1 {
            map.insert(f1_column(*t), p.f1.into());
        }
        map.insert("edit".into(), self.edit.into());
        Value::Object(map)
    }
}

fn sorted_thresholds(thresholds: &[f64]) -> Result<Vec<f64>> {
    let mut ts = thresholds.to_vec();
    for &t in &ts {
        check_threshold(t)?;
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    Ok(ts)
}

/// Accuracy, F1 at each threshold and edit score for one sequence.
pub fn report(pred: &LabelStream, gt: &LabelStream, thresholds: &[f64]) -> Result<MetricsReport> {
    let mut acc = Accumulator::new(thresholds)?;
    acc.add(pred, gt)?;
    Ok(acc.report())
}

/// Pools metrics over many sequences: frames and segment counts are summed
/// before computing ratios, edit scores are averaged per sequence.
#[derive(Debug, Clone)]
pub struct Accumulator {
    thresholds: Vec<f64>,
    ignored: Vec<ClassId>,
    frames: usize,
    correct: usize,
    counts: Vec<SegmentCounts>,
    edit_sum: f64,
    sequences: usize,
}

impl Accumulator {
    pub fn new(thresholds: &[f64]) -> Result<Self> {
        let thresholds = sorted_thresholds(thresholds)?;
        Ok(Self {
            counts: vec![SegmentCounts::default(); thresholds.len()],
            thresholds,
            ignored: Vec::new(),
            frames: 0,
            correct: 0,
            edit_sum: 0.0,
            sequences: 0,
        })
    }

    /// Excludes the given classes (e.g. background) from scoring: their
    /// ground-truth frames do not count toward accuracy and their segments
    /// are dropped from both sides before F1 and edit.
    pub fn with_ignored(mut self, classes: &[ClassId]) -> Self {
        self.ignored = classes.to_vec();
        self
    }

    pub fn add(&mut self, pred: &LabelStream, gt: &LabelStream) -> Result<()> {
        check_lengths(pred, gt)?;
        let keep = |l: &ClassId| !self.ignored.contains(l);
        for (p, g) in pred.labels().iter().zip(gt.labels()) {
            if keep(g) {
                self.frames += 1;
                self.correct += usize::from(p == g);
            }
        }
        let pred_segs: Vec<Segment> = pred.segments().into_iter().filter(|s| keep(&s.label)).collect();
        let gt_segs: Vec<Segment> = gt.segments().into_iter().filter(|s| keep(&s.label)).collect();
        for (t, counts) in self.thresholds.iter().zip(self.counts.iter_mut()) {
            *counts += segment_counts(&pred_segs, &gt_segs, *t);
        }
        let labels = |segs: &[Segment]| segs.iter().map(|s| s.label).collect::<Vec<_>>();
        self.edit_sum += edit_score_labels(&labels(&pred_segs), &labels(&gt_segs));
        self.sequences += 1;
        Ok(())
    }

    pub fn sequences(&self) -> usize {
        self.sequences
    }

    pub fn report(&self) -> MetricsReport {
        MetricsReport {
            acc: if self.frames == 0 {
                1.0
            } else {
                self.correct as f64 / self.frames as f64
            },
            f1: self
                .thresholds
                .iter()
                .zip(&self.counts)
                .map(|(t, c)| (*t, c.prf()))
                .collect(),
            edit: if self.sequences == 0 {
                100.0
            } else {
                self.edit_sum / self.sequences as f64
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::ClassMap;
    use std::sync::Arc;

    const A: ClassId = 0;
    const B: ClassId = 1;
    const C: ClassId = 2;

    fn stream(labels: &[ClassId]) -> LabelStream {
        LabelStream::new(labels.to_vec(), Arc::new(ClassMap::anonymous(3))).unwrap()
    }

    fn segs(segs: &[(ClassId, usize, usize)]) -> LabelStream {
        let s: Vec<Segment> = segs.iter().map(|&(l, a, b)| Segment::new(l, a, b)).collect();
        LabelStream::from_segments(&s, Arc::new(ClassMap::anonymous(3))).unwrap()
    }

    /// gt A[0..9] B[10..19]; pred A[0..9] B[10..13] A[14] B[15..19]
    fn blip_pair() -> (LabelStream, LabelStream) {
        let gt = segs(&[(A, 0, 9), (B, 10, 19)]);
        let pred = segs(&[(A, 0, 9), (B, 10, 13), (A, 14, 14), (B, 15, 19)]);
        (pred, gt)
    }

    #[test]
    fn mof_examples() {
        let s = stream(&[A, B, B, C]);
        assert_eq!(mof_accuracy(&s, &s).unwrap(), 1.0);
        assert_eq!(mof_accuracy(&stream(&[A, A, B, B]), &stream(&[A, B, B, B])).unwrap(), 0.75);
        assert_eq!(mof_accuracy(&stream(&[B, B]), &stream(&[A, A])).unwrap(), 0.0);
        assert_eq!(mof_accuracy(&stream(&[]), &stream(&[])).unwrap(), 1.0);
        assert!(matches!(
            mof_accuracy(&stream(&[A]), &stream(&[A, A])),
            Err(Error::LengthMismatch { pred: 1, gt: 2 })
        ));
    }

    #[test]
    fn f1_examples() {
        let s = stream(&[A, A, B, C, C]);
        assert_eq!(f1_at_iou(&s, &s, 0.5).unwrap(), Prf::PERFECT);

        let (pred, gt) = blip_pair();
        for t in [0.5, 0.25] {
            let counts = segment_counts(&pred.segments(), &gt.segments(), t);
            assert_eq!(counts, SegmentCounts { tp: 2, fp: 2, fn_: 0 });
            let prf = f1_at_iou(&pred, &gt, t).unwrap();
            assert!((prf.precision - 0.5).abs() < 1e-12);
            assert!((prf.recall - 1.0).abs() < 1e-12);
            assert!((prf.f1 - 2.0 / 3.0).abs() < 1e-12);
        }
        // above every blip IoU only A survives
        let counts = segment_counts(&pred.segments(), &gt.segments(), 0.6);
        assert_eq!(counts, SegmentCounts { tp: 1, fp: 3, fn_: 1 });
    }

    #[test]
    fn f1_conventions_and_errors() {
        let e = stream(&[]);
        assert_eq!(f1_at_iou(&e, &e, 0.5).unwrap(), Prf::PERFECT);
        assert!(f1_at_iou(&e, &e, 0.0).is_err());
        assert!(f1_at_iou(&e, &e, 1.5).is_err());
        assert!(f1_at_iou(&stream(&[A]), &e, 0.5).is_err());
        let none = SegmentCounts { tp: 0, fp: 0, fn_: 3 }.prf();
        assert_eq!((none.precision, none.recall, none.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn edit_examples() {
        let s = stream(&[A, B, B, C]);
        assert_eq!(edit_score(&s, &s), 100.0);
        let pred = stream(&[A, A, C]);
        let gt = stream(&[A, B, C, C]);
        assert!((edit_score(&pred, &gt) - 100.0 * (1.0 - 1.0 / 3.0)).abs() < 1e-9);
        assert_eq!(edit_score(&stream(&[A, B, A]), &stream(&[B, C, B])), 0.0);
        assert_eq!(edit_score(&stream(&[]), &stream(&[])), 100.0);
        assert_eq!(edit_score(&stream(&[A]), &stream(&[])), 0.0);
    }

    #[test]
    fn levenshtein_table() {
        assert_eq!(levenshtein(&[], &[]), 0);
        assert_eq!(levenshtein(&[1, 2, 3], &[]), 3);
        assert_eq!(levenshtein(&[0, 2], &[0, 1, 2]), 1);
        assert_eq!(levenshtein(&[0, 1, 2, 3], &[1, 2, 3, 4]), 2);
    }

    #[test]
    fn per_class_examples() {
        let gt = segs(&[(A, 0, 4), (B, 5, 9)]);
        let pred = stream(&[A, A, A, B, B, B, B, B, B, B]);
        let r = per_class_segment_prf(&pred, &gt).unwrap();
        assert!(r.per_class.iter().all(|(_, p)| *p == Prf::PERFECT));
        assert_eq!(r.mean, Prf::PERFECT);

        let r = per_class_segment_prf(&gt, &gt).unwrap();
        assert_eq!(r.min, Prf::PERFECT);

        let swapped = segs(&[(B, 0, 4), (A, 5, 9)]);
        let r = per_class_segment_prf(&swapped, &gt).unwrap();
        assert_eq!(r.per_class.len(), 2);
        for (_, p) in &r.per_class {
            assert_eq!((p.precision, p.recall), (0.0, 0.0));
        }
    }

    #[test]
    fn per_class_majority_ties_go_low() {
        let gt = segs(&[(C, 0, 3)]);
        let pred = stream(&[B, B, A, A]);
        let r = per_class_segment_prf(&pred, &gt).unwrap();
        let ids: Vec<ClassId> = r.per_class.iter().map(|(c, _)| *c).collect();
        assert_eq!(ids, vec![A, C]);
    }

    #[test]
    fn report_examples() {
        let s = stream(&[A, B, C]);
        let r = report(&s, &s, &DEFAULT_THRESHOLDS).unwrap();
        assert_eq!(r.csv_header(), "acc,f1_010,f1_025,f1_050,edit");
        assert_eq!(r.csv_row(), "1.0000,1.0000,1.0000,1.0000,100.0000");

        let (pred, gt) = blip_pair();
        let r = report(&pred, &gt, &DEFAULT_THRESHOLDS).unwrap();
        assert!((r.f1_at(0.5).unwrap().f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.acc, 0.95);
        assert!((r.edit - 50.0).abs() < 1e-12);
        assert_eq!(r.csv_row(), "0.9500,0.6667,0.6667,0.6667,50.0000");
        let json = r.to_json();
        assert_eq!(json["acc"], 0.95);
        assert!(json.get("f1_025").is_some());

        let e = stream(&[]);
        let r = report(&e, &e, &DEFAULT_THRESHOLDS).unwrap();
        assert_eq!(r.csv_row(), "1.0000,1.0000,1.0000,1.0000,100.0000");
    }

    #[test]
    fn pooling_sums_counts_and_averages_edit() {
        let (pred, gt) = blip_pair();
        let mut acc = Accumulator::new(&[0.5]).unwrap();
        acc.add(&pred, &gt).unwrap();
        acc.add(&gt, &gt).unwrap();
        let r = acc.report();
        // TP 2+2, FP 2+0, FN 0
        assert!((r.f1[0].1.precision - 4.0 / 6.0).abs() < 1e-12);
        assert!((r.edit - 75.0).abs() < 1e-12);
        assert!((r.acc - 39.0 / 40.0).abs() < 1e-12);
        assert_eq!(acc.sequences(), 2);
    }

    #[test]
    fn ignored_classes_are_not_scored() {
        let gt = segs(&[(C, 0, 4), (A, 5, 9)]);
        let pred = segs(&[(B, 0, 4), (A, 5, 9)]);
        let mut acc = Accumulator::new(&[0.5]).unwrap().with_ignored(&[C]);
        acc.add(&pred, &gt).unwrap();
        let r = acc.report();
        assert_eq!(r.acc, 1.0);
        // the B segment has no ground-truth counterpart once C is dropped
        assert_eq!(r.f1[0].1.recall, 1.0);
        assert_eq!(r.f1[0].1.precision, 0.5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn runs(len: usize) -> impl Strategy<Value = Vec<ClassId>> {
            proptest::collection::vec((0usize..3, 1usize..8), 1..30).prop_map(move |r| {
                let mut v: Vec<ClassId> =
                    r.into_iter().flat_map(|(l, n)| std::iter::repeat_n(l, n)).collect();
                v.resize(len, v.last().copied().unwrap_or(0));
                v
            })
        }

        proptest! {
            #[test]
            fn f1_monotone_in_threshold(pred in runs(60), gt in runs(60)) {
                let (p, g) = (stream(&pred), stream(&gt));
                let mut last = f64::INFINITY;
                for t in [0.05, 0.1, 0.25, 0.5, 0.75, 1.0] {
                    let f = f1_at_iou(&p, &g, t).unwrap().f1;
                    prop_assert!(f <= last + 1e-12);
                    last = f;
                }
            }

            #[test]
            fn edit_ignores_durations(gt in runs(60), stretch in 1usize..4) {
                let stretched: Vec<ClassId> =
                    gt.iter().flat_map(|&l| std::iter::repeat_n(l, stretch)).collect();
                prop_assert_eq!(edit_score(&stream(&stretched), &stream(&gt)), 100.0);
            }

            #[test]
            fn perfection_iff_identical(pred in runs(40), gt in runs(40)) {
                let r = report(&stream(&pred), &stream(&gt), &DEFAULT_THRESHOLDS).unwrap();
                let perfect = r.acc == 1.0 && r.edit == 100.0 && r.f1.iter().all(|(_, p)| p.f1 == 1.0);
                prop_assert_eq!(perfect, pred == gt);
                prop_assert_eq!(r.edit == 100.0, segment_labels(&pred) == segment_labels(&gt));
            }
        }
    }
}
