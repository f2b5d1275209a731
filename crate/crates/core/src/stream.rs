//! Label streams, class vocabularies and run-length segments.
//!
//! Frames are indexed from 0 and segment ends are inclusive, so a segment
//! covering frames `start..=end` has length `end - start + 1`.

use std::collections::HashSet;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Dense class identifier in `0..C`.
pub type ClassId = usize;

/// Ordered class vocabulary. Ids are the positions `0..C`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassMap {
    names: Vec<String>,
}

impl ClassMap {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut seen = HashSet::with_capacity(names.len());
        for (id, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::ClassMap(format!("class {id} has an empty name")));
            }
            if name.chars().any(char::is_whitespace) {
                return Err(Error::ClassMap(format!(
                    "class {id} name {name:?} contains whitespace"
                )));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::ClassMap(format!("duplicate class name {name:?}")));
            }
        }
        Ok(Self { names })
    }

    /// Anonymous vocabulary `c0, c1, ...` of the given size.
    pub fn anonymous(classes: usize) -> Self {
        Self {
            names: (0..classes).map(|c| format!("c{c}")).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Option<ClassId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }
}

/// Maximal run of one label, `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Segment {
    pub label: ClassId,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn new(label: ClassId, start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "segment start {start} after end {end}");
        Self { label, start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Frames shared with `other`.
    pub fn intersection(&self, other: &Segment) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        if lo > hi {
            0
        } else {
            hi - lo + 1
        }
    }

    pub fn iou(&self, other: &Segment) -> f64 {
        let inter = self.intersection(other);
        let union = self.len() + other.len() - inter;
        inter as f64 / union as f64
    }
}

/// Per-frame class predictions (or ground truth) over a shared vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelStream {
    labels: Vec<ClassId>,
    class_map: Arc<ClassMap>,
}

impl LabelStream {
    /// Builds a stream, rejecting labels outside the vocabulary.
    pub fn new(labels: Vec<ClassId>, class_map: Arc<ClassMap>) -> Result<Self> {
        let stream = Self::from_parts(labels, class_map);
        stream.validate()?;
        Ok(stream)
    }

    /// Builds a stream without checking labels; see [`LabelStream::validate`].
    pub fn from_parts(labels: Vec<ClassId>, class_map: Arc<ClassMap>) -> Self {
        Self { labels, class_map }
    }

    /// Checks every label against the vocabulary, reporting the first bad frame.
    pub fn validate(&self) -> Result<()> {
        let classes = self.class_map.len();
        match self.labels.iter().position(|&l| l >= classes) {
            None => Ok(()),
            Some(frame) => Err(Error::LabelOutOfRange {
                frame,
                label: self.labels[frame],
                classes,
            }),
        }
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<ClassId> {
        self.labels
    }

    pub fn class_map(&self) -> &Arc<ClassMap> {
        &self.class_map
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn segments(&self) -> Vec<Segment> {
        rle_segments(&self.labels)
    }

    /// Rebuilds a stream from segments that tile `0..N` contiguously.
    pub fn from_segments(segments: &[Segment], class_map: Arc<ClassMap>) -> Result<Self> {
        let mut labels = Vec::with_capacity(segments.last().map_or(0, |s| s.end + 1));
        for (i, seg) in segments.iter().enumerate() {
            if seg.start > seg.end {
                return Err(Error::SegmentLayout(format!(
                    "segment {i} starts at {} after its end {}",
                    seg.start, seg.end
                )));
            }
            if seg.start != labels.len() {
                let kind = if seg.start > labels.len() { "gap" } else { "overlap" };
                return Err(Error::SegmentLayout(format!(
                    "{kind} before segment {i}: expected start {}, found {}",
                    labels.len(),
                    seg.start
                )));
            }
            labels.extend(std::iter::repeat_n(seg.label, seg.len()));
        }
        Self::new(labels, class_map)
    }
}

/// Run-length encodes raw labels into maximal segments.
pub fn rle_segments(labels: &[ClassId]) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut iter = labels.iter().copied().enumerate();
    let Some((_, mut current)) = iter.next() else {
        return segments;
    };
    let mut start = 0;
    for (frame, label) in iter {
        if label != current {
            segments.push(Segment::new(current, start, frame - 1));
            current = label;
            start = frame;
        }
    }
    segments.push(Segment::new(current, start, labels.len() - 1));
    segments
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(c: usize) -> Arc<ClassMap> {
        Arc::new(ClassMap::anonymous(c))
    }

    #[test]
    fn rle_examples() {
        assert!(rle_segments(&[]).is_empty());
        assert_eq!(rle_segments(&[2, 2, 2]), vec![Segment::new(2, 0, 2)]);
        assert_eq!(
            rle_segments(&[0, 0, 1, 0]),
            vec![Segment::new(0, 0, 1), Segment::new(1, 2, 2), Segment::new(0, 3, 3)]
        );
    }

    #[test]
    fn from_segments_examples() {
        let empty = LabelStream::from_segments(&[], map(2)).unwrap();
        assert!(empty.is_empty());
        let single = LabelStream::from_segments(&[Segment::new(1, 0, 4)], map(2)).unwrap();
        assert_eq!(single.labels(), &[1, 1, 1, 1, 1]);
        let segs = [Segment::new(0, 0, 1), Segment::new(1, 2, 2), Segment::new(0, 3, 3)];
        let s = LabelStream::from_segments(&segs, map(2)).unwrap();
        assert_eq!(s.labels(), &[0, 0, 1, 0]);
    }

    #[test]
    fn from_segments_rejects_gaps_overlaps_and_bad_labels() {
        let gap = [Segment::new(0, 0, 1), Segment::new(1, 3, 4)];
        assert!(matches!(
            LabelStream::from_segments(&gap, map(2)),
            Err(Error::SegmentLayout(m)) if m.contains("gap")
        ));
        let overlap = [Segment::new(0, 0, 2), Segment::new(1, 2, 4)];
        assert!(matches!(
            LabelStream::from_segments(&overlap, map(2)),
            Err(Error::SegmentLayout(m)) if m.contains("overlap")
        ));
        let late = [Segment::new(0, 1, 2)];
        assert!(LabelStream::from_segments(&late, map(2)).is_err());
        let bad = [Segment::new(5, 0, 2)];
        assert!(matches!(
            LabelStream::from_segments(&bad, map(2)),
            Err(Error::LabelOutOfRange { frame: 0, label: 5, .. })
        ));
    }

    #[test]
    fn validate_examples() {
        assert!(LabelStream::from_parts(vec![0, 1, 0], map(2)).validate().is_ok());
        assert_eq!(
            LabelStream::from_parts(vec![0, 5], map(2)).validate(),
            Err(Error::LabelOutOfRange { frame: 1, label: 5, classes: 2 })
        );
        assert!(LabelStream::from_parts(vec![], map(0)).validate().is_ok());
        assert!(LabelStream::from_parts(vec![0], map(0)).validate().is_err());
    }

    #[test]
    fn class_map_rejects_bad_names() {
        assert!(ClassMap::new(["cut", "peel"]).is_ok());
        assert!(ClassMap::new(["cut", "cut"]).is_err());
        assert!(ClassMap::new(["cut", ""]).is_err());
        assert!(ClassMap::new(["cut it"]).is_err());
        let m = ClassMap::new(["cut", "peel"]).unwrap();
        assert_eq!(m.id("peel"), Some(1));
        assert_eq!(m.name(0), Some("cut"));
        assert_eq!(m.id("mix"), None);
    }

    #[test]
    fn iou_of_overlapping_segments() {
        let a = Segment::new(1, 10, 19);
        let b = Segment::new(1, 15, 19);
        assert_eq!(a.intersection(&b), 5);
        assert!((a.iou(&b) - 0.5).abs() < 1e-12);
        assert_eq!(a.iou(&Segment::new(1, 20, 25)), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rle_round_trips(labels in proptest::collection::vec(0usize..4, 0..200)) {
                let m = map(4);
                let segs = rle_segments(&labels);
                prop_assert_eq!(segs.iter().map(Segment::len).sum::<usize>(), labels.len());
                prop_assert!(segs.len() <= labels.len());
                for w in segs.windows(2) {
                    prop_assert_ne!(w[0].label, w[1].label);
                    prop_assert_eq!(w[0].end + 1, w[1].start);
                }
                let back = LabelStream::from_segments(&segs, m.clone()).unwrap();
                prop_assert_eq!(back.labels(), &labels[..]);
            }
        }
    }
}
