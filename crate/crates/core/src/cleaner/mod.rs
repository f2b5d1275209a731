//! Online temporally aware label cleaning.
//!
//! The [`Cleaner`] consumes one raw prediction per frame and emits tidied
//! labels as [`CleanEvent`]s. A new label is withheld (the last confirmed
//! label is emitted instead) until its candidate span reaches the class
//! cutoff; it is then confirmed and the withheld frames are backdated.
//!
//! A candidate span is the chain of runs of one label ending at the current
//! frame, where two runs are merged when the gap between them is shorter
//! than the bridging width `b`. Confirmation also requires the current
//! contiguous run to be at least `b` frames long.
//!
//! [`reference_clean`] recomputes the same output with a per-frame backward
//! scan over the raw history and is used to check the engine.

mod reference;

use std::fmt;
use std::sync::Arc;

use crate::cutoffs::CutoffPolicy;
use crate::error::{Error, Result};
use crate::stream::{ClassId, ClassMap, LabelStream};

pub use reference::{reference_clean, reference_clean_with, Emission};

#[derive(Debug, Clone, PartialEq)]
pub struct CleanerConfig {
    policy: CutoffPolicy,
    b: usize,
    class_map: Arc<ClassMap>,
    cutoffs: Vec<usize>,
}

impl CleanerConfig {
    /// Fails unless `1 <= b < cutoff(c)` for every class `c` in the map.
    pub fn new(policy: CutoffPolicy, b: usize, class_map: Arc<ClassMap>) -> Result<Self> {
        let cutoffs = policy.resolve_all(class_map.len());
        if b == 0 {
            return Err(Error::InvalidParameter("bridging width b must be at least 1".into()));
        }
        if let Some((class, &cutoff)) = cutoffs.iter().enumerate().find(|(_, &c)| b >= c) {
            return Err(Error::BridgeTooWide { b, class, cutoff });
        }
        Ok(Self {
            policy,
            b,
            class_map,
            cutoffs,
        })
    }

    pub fn policy(&self) -> &CutoffPolicy {
        &self.policy
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn class_map(&self) -> &Arc<ClassMap> {
        &self.class_map
    }

    pub fn cutoff(&self, class: ClassId) -> usize {
        self.cutoffs[class]
    }

    pub fn num_classes(&self) -> usize {
        self.cutoffs.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CleanEvent {
    /// Tidy label for the frame just pushed.
    Append { frame: usize, label: ClassId },
    /// Revision of already emitted frames `from..=to`.
    Backdate { from: usize, to: usize, label: ClassId },
}

impl CleanEvent {
    /// Applies the event to a tidy buffer.
    pub fn apply(&self, tidy: &mut Vec<ClassId>) {
        match *self {
            CleanEvent::Append { frame, label } => {
                debug_assert_eq!(frame, tidy.len());
                tidy.push(label);
            }
            CleanEvent::Backdate { from, to, label } => tidy[from..=to].fill(label),
        }
    }

    /// Line form `A <t> <name>` / `B <from> <to> <name>` (without newline).
    pub fn wire<'a>(&'a self, class_map: &'a ClassMap) -> WireEvent<'a> {
        WireEvent {
            event: self,
            class_map,
        }
    }
}

pub struct WireEvent<'a> {
    event: &'a CleanEvent,
    class_map: &'a ClassMap,
}

impl fmt::Display for WireEvent<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |l: ClassId| self.class_map.name(l).unwrap_or("?");
        match *self.event {
            CleanEvent::Append { frame, label } => write!(f, "A {frame} {}", name(label)),
            CleanEvent::Backdate { from, to, label } => write!(f, "B {from} {to} {}", name(label)),
        }
    }
}

/// End-of-stream handling of an unconfirmed candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FinalizePolicy {
    /// Leave the emitted output as is.
    #[default]
    DiscardUnconfirmed,
    /// Backdate the trailing candidate span to its label.
    ConfirmTrailing,
}

/// The unconfirmed label currently being tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub label: ClassId,
    pub start: usize,
    pub current_run: usize,
    pub full_length: usize,
}

/// Run/chain bookkeeping for one class.
#[derive(Debug, Clone, Copy, Default)]
struct Track {
    last_seen: Option<usize>,
    chain_start: usize,
    run_start: usize,
}

#[derive(Debug, Clone, Default)]
struct History {
    raw: Vec<ClassId>,
    tidy: Vec<ClassId>,
}

/// Streaming cleaner for a single label stream.
///
/// Per-push work and state are O(1) in the stream length (O(C) state in
/// total). Histories are only kept when built with [`Cleaner::new`].
#[derive(Debug, Clone)]
pub struct Cleaner {
    config: Arc<CleanerConfig>,
    frames: usize,
    last_confirmed: Option<ClassId>,
    last_raw: Option<ClassId>,
    tracks: Vec<Track>,
    history: Option<History>,
}

impl Cleaner {
    /// Cleaner that records raw and tidy histories for [`Cleaner::tidy_snapshot`].
    pub fn new(config: Arc<CleanerConfig>) -> Self {
        let mut cleaner = Self::streaming(config);
        cleaner.history = Some(History::default());
        cleaner
    }

    /// Cleaner without histories; memory does not grow with the stream.
    pub fn streaming(config: Arc<CleanerConfig>) -> Self {
        let tracks = vec![Track::default(); config.num_classes()];
        Self {
            config,
            frames: 0,
            last_confirmed: None,
            last_raw: None,
            tracks,
            history: None,
        }
    }

    pub fn config(&self) -> &CleanerConfig {
        &self.config
    }

    /// Frames pushed so far.
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn last_confirmed(&self) -> Option<ClassId> {
        self.last_confirmed
    }

    pub fn candidate(&self) -> Option<Candidate> {
        let label = self.last_raw?;
        if Some(label) == self.last_confirmed {
            return None;
        }
        let track = &self.tracks[label];
        let t = self.frames - 1;
        Some(Candidate {
            label,
            start: track.chain_start,
            current_run: t - track.run_start + 1,
            full_length: t - track.chain_start + 1,
        })
    }

    pub fn push(&mut self, label: ClassId) -> Result<Vec<CleanEvent>> {
        let mut events = Vec::with_capacity(2);
        self.push_into(label, &mut events)?;
        Ok(events)
    }

    /// Like [`Cleaner::push`] but appends the events to `out`.
    pub fn push_into(&mut self, label: ClassId, out: &mut Vec<CleanEvent>) -> Result<()> {
        let classes = self.config.num_classes();
        if label >= classes {
            return Err(Error::LabelOutOfRange {
                frame: self.frames,
                label,
                classes,
            });
        }
        let t = self.frames;
        let b = self.config.b;

        let track = &mut self.tracks[label];
        match track.last_seen {
            Some(prev) if prev + 1 == t => {}
            // gap of t - prev - 1 frames, bridged when shorter than b
            Some(prev) if t - prev <= b => track.run_start = t,
            _ => {
                track.chain_start = t;
                track.run_start = t;
            }
        }
        track.last_seen = Some(t);
        let (chain_start, run_start) = (track.chain_start, track.run_start);

        let start = out.len();
        match self.last_confirmed {
            None => {
                self.last_confirmed = Some(label);
                out.push(CleanEvent::Append { frame: t, label });
            }
            Some(confirmed) if confirmed == label => {
                out.push(CleanEvent::Append { frame: t, label });
            }
            Some(confirmed) => {
                let full = t - chain_start + 1;
                let run = t - run_start + 1;
                if full >= self.config.cutoff(label) && run >= b {
                    out.push(CleanEvent::Backdate {
                        from: chain_start,
                        to: t - 1,
                        label,
                    });
                    out.push(CleanEvent::Append { frame: t, label });
                    self.last_confirmed = Some(label);
                } else {
                    out.push(CleanEvent::Append {
                        frame: t,
                        label: confirmed,
                    });
                }
            }
        }

        self.frames += 1;
        self.last_raw = Some(label);
        if let Some(history) = &mut self.history {
            history.raw.push(label);
            for event in &out[start..] {
                event.apply(&mut history.tidy);
            }
        }
        Ok(())
    }

    /// Closes the stream. With [`FinalizePolicy::ConfirmTrailing`] an active
    /// candidate is backdated over its whole span.
    pub fn finalize(&mut self, policy: FinalizePolicy) -> Vec<CleanEvent> {
        let mut events = Vec::new();
        if policy == FinalizePolicy::ConfirmTrailing {
            if let Some(c) = self.candidate() {
                events.push(CleanEvent::Backdate {
                    from: c.start,
                    to: self.frames - 1,
                    label: c.label,
                });
                self.last_confirmed = Some(c.label);
            }
        }
        if let Some(history) = &mut self.history {
            for event in &events {
                event.apply(&mut history.tidy);
            }
        }
        events
    }

    /// Current tidy output; `None` for a cleaner built with [`Cleaner::streaming`].
    pub fn tidy_snapshot(&self) -> Option<LabelStream> {
        self.history.as_ref().map(|h| {
            LabelStream::from_parts(h.tidy.clone(), self.config.class_map.clone())
        })
    }

    /// Raw predictions received so far, when histories are kept.
    pub fn raw_history(&self) -> Option<&[ClassId]> {
        self.history.as_ref().map(|h| h.raw.as_slice())
    }
}

/// Runs the streaming engine over a whole stream and returns the final tidy
/// output.
pub fn clean_stream(
    raw: &LabelStream,
    config: &Arc<CleanerConfig>,
    finalize: FinalizePolicy,
) -> Result<LabelStream> {
    let mut cleaner = Cleaner::streaming(config.clone());
    let mut tidy = Vec::with_capacity(raw.len());
    let mut events = Vec::with_capacity(2);
    for &label in raw.labels() {
        events.clear();
        cleaner.push_into(label, &mut events)?;
        for e in &events {
            e.apply(&mut tidy);
        }
    }
    for e in cleaner.finalize(finalize) {
        e.apply(&mut tidy);
    }
    Ok(LabelStream::from_parts(tidy, config.class_map.clone()))
}
