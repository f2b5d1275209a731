//! Per-frame backward-scan cleaner, O(N^2) in the worst case.

use super::CleanerConfig;
use crate::error::{Error, Result};
use crate::stream::{ClassId, LabelStream};

/// Label appended when a candidate is not yet long enough.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Emission {
    /// The previous tidy label, which is always a confirmed label.
    #[default]
    LastConfirmed,
    /// The raw label just before the candidate span, as written in the
    /// original pseudo-code. Unconfirmed blips can leak into the output.
    LastRawSegment,
}

/// Result of scanning back from frame `t`.
struct Scan {
    /// First frame of the bridged chain of `raw[t]`.
    chain_start: usize,
    /// Length of the contiguous run ending at `t`.
    run: usize,
    /// The scan walked all the way to frame 0.
    reached_origin: bool,
}

fn scan_back(raw: &[ClassId], t: usize, b: usize) -> Scan {
    let target = raw[t];
    let mut run = None;
    let mut i = t;
    loop {
        if i == 0 {
            return Scan {
                chain_start: 0,
                run: run.unwrap_or(t + 1),
                reached_origin: true,
            };
        }
        if raw[i] != raw[i - 1] {
            let run = *run.get_or_insert(t - i + 1);
            let lo = i.saturating_sub(b);
            match raw[lo..i].iter().position(|&l| l == target) {
                // jump back to the earliest reoccurrence inside the window
                Some(offset) => {
                    i = lo + offset;
                    continue;
                }
                None => {
                    return Scan {
                        chain_start: i,
                        run,
                        reached_origin: false,
                    }
                }
            }
        }
        i -= 1;
    }
}

pub fn reference_clean(raw: &LabelStream, config: &CleanerConfig) -> Result<LabelStream> {
    reference_clean_with(raw, config, Emission::LastConfirmed)
}

/// Recomputes the tidy stream frame by frame from the raw history alone.
pub fn reference_clean_with(
    raw: &LabelStream,
    config: &CleanerConfig,
    emission: Emission,
) -> Result<LabelStream> {
    let labels = raw.labels();
    if let Some(frame) = labels.iter().position(|&l| l >= config.num_classes()) {
        return Err(Error::LabelOutOfRange {
            frame,
            label: labels[frame],
            classes: config.num_classes(),
        });
    }
    let b = config.b();
    let mut tidy: Vec<ClassId> = Vec::with_capacity(labels.len());
    for t in 0..labels.len() {
        let y = labels[t];
        if t == 0 {
            tidy.push(y);
            continue;
        }
        if y != labels[t - 1] {
            tidy.push(tidy[t - 1]);
            continue;
        }
        let scan = scan_back(labels, t, b);
        if scan.reached_origin {
            tidy.push(labels[0]);
            continue;
        }
        let full = t - scan.chain_start + 1;
        if full >= config.cutoff(y) && scan.run >= b {
            tidy[scan.chain_start..t].fill(y);
            tidy.push(y);
        } else {
            tidy.push(match emission {
                Emission::LastConfirmed => tidy[t - 1],
                Emission::LastRawSegment => labels[scan.chain_start - 1],
            });
        }
    }
    Ok(LabelStream::from_parts(tidy, config.class_map().clone()))
}
