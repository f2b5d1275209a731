//! Clip frame-index generation for training (dense and surround starts) and
//! for causal sliding-window inference.

use rand::Rng;

use crate::error::{Error, Result};
use crate::stream::Segment;

/// Clip shape: `frames` samples taken every `stride` frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClipSpec {
    frames: usize,
    stride: usize,
}

impl ClipSpec {
    pub fn new(frames: usize, stride: usize) -> Result<Self> {
        if frames == 0 || stride == 0 {
            return Err(Error::InvalidParameter(format!(
                "clip needs at least one frame and a positive stride (got T={frames}, tau={stride})"
            )));
        }
        Ok(Self { frames, stride })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// `T * tau`.
    pub fn span(&self) -> i64 {
        (self.frames * self.stride) as i64
    }

    /// `floor(T * tau / 2)`.
    pub fn half_span(&self) -> i64 {
        self.span() / 2
    }
}

/// Repair rule for raw indices that fall outside the video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    /// Repeat the first/last frame.
    #[default]
    ClampRepeat,
    /// Wrap around modulo the video length.
    Wrap,
}

/// Training-time start selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingStrategy {
    Dense,
    Surround,
}

/// Where the inference clip ends relative to the current frame `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InferenceAnchor {
    /// First index at `t - T*tau`; the last index is `t - tau`.
    #[default]
    Exclusive,
    /// Shifted one stride later so the last index is `t` itself.
    Inclusive,
}

impl SamplingStrategy {
    /// Inclusive range of raw start values the strategy draws from, before
    /// clamping at frame 0.
    pub fn start_range(self, seg: &Segment, spec: &ClipSpec) -> (i64, i64) {
        let (ns, ne) = (seg.start as i64, seg.end as i64);
        match self {
            SamplingStrategy::Dense => {
                if ne - ns > spec.span() {
                    (ns, ne - spec.span())
                } else {
                    (ns, ns)
                }
            }
            SamplingStrategy::Surround => (ns - spec.half_span(), ne - spec.half_span()),
        }
    }

    pub fn draw_start<R: Rng + ?Sized>(self, seg: &Segment, spec: &ClipSpec, rng: &mut R) -> i64 {
        let (lo, hi) = self.start_range(seg, spec);
        rng.random_range(lo..=hi).max(0)
    }
}

/// Dense start: uniform over `{N_s, ..., N_e - T*tau}` for long segments,
/// otherwise `N_s`.
pub fn dense_train_start<R: Rng + ?Sized>(seg: &Segment, spec: &ClipSpec, rng: &mut R) -> i64 {
    SamplingStrategy::Dense.draw_start(seg, spec, rng)
}

/// Surround start: uniform over `{N_s - T*tau/2, ..., N_e - T*tau/2}`,
/// clamped below at frame 0.
pub fn surround_train_start<R: Rng + ?Sized>(seg: &Segment, spec: &ClipSpec, rng: &mut R) -> i64 {
    SamplingStrategy::Surround.draw_start(seg, spec, rng)
}

/// Indices `start + k*tau` for `k in 0..T`, repaired into `0..video_len`.
pub fn clip_indices(
    start: i64,
    spec: &ClipSpec,
    policy: BoundaryPolicy,
    video_len: usize,
) -> Result<Vec<usize>> {
    if video_len == 0 {
        return Err(Error::InvalidParameter("video length must be positive".into()));
    }
    let n = video_len as i64;
    Ok(raw_indices(start, spec)
        .map(|i| match policy {
            BoundaryPolicy::ClampRepeat => i.clamp(0, n - 1) as usize,
            BoundaryPolicy::Wrap => i.rem_euclid(n) as usize,
        })
        .collect())
}

/// Causal clip for the prediction at frame `t`; indices below 0 clamp to 0.
pub fn inference_clip_indices(t: usize, spec: &ClipSpec) -> Vec<usize> {
    inference_clip_indices_with(t, spec, InferenceAnchor::Exclusive)
}

pub fn inference_clip_indices_with(
    t: usize,
    spec: &ClipSpec,
    anchor: InferenceAnchor,
) -> Vec<usize> {
    raw_indices(inference_start(t, spec, anchor), spec)
        .map(|i| i.max(0) as usize)
        .collect()
}

/// Raw (unclamped) first index of the inference clip at frame `t`.
pub fn inference_start(t: usize, spec: &ClipSpec, anchor: InferenceAnchor) -> i64 {
    let t = t as i64;
    match anchor {
        InferenceAnchor::Exclusive => t - spec.span(),
        InferenceAnchor::Inclusive => t - spec.span() + spec.stride as i64,
    }
}

fn raw_indices(start: i64, spec: &ClipSpec) -> impl Iterator<Item = i64> {
    let stride = spec.stride as i64;
    (0..spec.frames as i64).map(move |k| start + k * stride)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(t: usize, tau: usize) -> ClipSpec {
        ClipSpec::new(t, tau).unwrap()
    }

    #[test]
    fn rejects_degenerate_spec() {
        assert!(ClipSpec::new(0, 8).is_err());
        assert!(ClipSpec::new(8, 0).is_err());
        assert_eq!(spec(8, 8).span(), 64);
        assert_eq!(spec(3, 3).half_span(), 4);
    }

    #[test]
    fn dense_long_segment_stays_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let seg = Segment::new(0, 0, 100);
        let draws: Vec<i64> = (0..5000).map(|_| dense_train_start(&seg, &spec(8, 8), &mut rng)).collect();
        assert!(draws.iter().all(|&s| (0..=36).contains(&s)));
        assert!(draws.contains(&0) && draws.contains(&36));
    }

    #[test]
    fn dense_short_segment_returns_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            assert_eq!(dense_train_start(&Segment::new(0, 10, 40), &spec(8, 8), &mut rng), 10);
            assert_eq!(dense_train_start(&Segment::new(0, 0, 64), &spec(8, 8), &mut rng), 0);
        }
    }

    #[test]
    fn surround_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws: Vec<i64> = (0..5000)
            .map(|_| surround_train_start(&Segment::new(0, 50, 70), &spec(8, 8), &mut rng))
            .collect();
        assert!(draws.iter().all(|&s| (18..=38).contains(&s)));
        assert!(draws.contains(&18) && draws.contains(&38));
        for _ in 0..100 {
            assert_eq!(surround_train_start(&Segment::new(0, 0, 10), &spec(8, 8), &mut rng), 0);
            assert_eq!(surround_train_start(&Segment::new(0, 32, 32), &spec(8, 8), &mut rng), 0);
        }
    }

    #[test]
    fn clip_index_examples() {
        let s = spec(4, 2);
        assert_eq!(clip_indices(0, &s, BoundaryPolicy::ClampRepeat, 100).unwrap(), vec![0, 2, 4, 6]);
        assert_eq!(clip_indices(-3, &s, BoundaryPolicy::ClampRepeat, 100).unwrap(), vec![0, 0, 1, 3]);
        assert_eq!(clip_indices(-3, &s, BoundaryPolicy::Wrap, 10).unwrap(), vec![7, 9, 1, 3]);
        assert_eq!(clip_indices(7, &s, BoundaryPolicy::ClampRepeat, 10).unwrap(), vec![7, 9, 9, 9]);
        assert_eq!(clip_indices(7, &s, BoundaryPolicy::Wrap, 10).unwrap(), vec![7, 9, 1, 3]);
        assert!(clip_indices(0, &s, BoundaryPolicy::Wrap, 0).is_err());
    }

    #[test]
    fn inference_examples() {
        assert_eq!(
            inference_clip_indices(640, &spec(8, 8)),
            vec![576, 584, 592, 600, 608, 616, 624, 632]
        );
        assert_eq!(inference_clip_indices(0, &spec(4, 2)), vec![0, 0, 0, 0]);
        assert_eq!(inference_clip_indices(6, &spec(4, 2)), vec![0, 0, 2, 4]);
        assert_eq!(
            inference_clip_indices_with(6, &spec(4, 2), InferenceAnchor::Inclusive),
            vec![0, 2, 4, 6]
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn inference_is_causal(t in 0usize..5000, frames in 1usize..20, stride in 1usize..10) {
                let s = spec(frames, stride);
                let idx = inference_clip_indices(t, &s);
                prop_assert_eq!(idx.len(), frames);
                prop_assert!(idx.iter().all(|&i| i <= t));
                prop_assert!(idx.windows(2).all(|w| w[0] <= w[1]));
            }

            #[test]
            fn raw_stride_is_constant(start in -500i64..500, frames in 1usize..20, stride in 1usize..10) {
                let s = spec(frames, stride);
                let raw: Vec<i64> = raw_indices(start, &s).collect();
                prop_assert!(raw.windows(2).all(|w| w[1] - w[0] == stride as i64));
            }

            #[test]
            fn clamp_output_is_sorted_and_sized(
                start in -500i64..500, frames in 1usize..20, stride in 1usize..10, n in 1usize..300,
            ) {
                let s = spec(frames, stride);
                let idx = clip_indices(start, &s, BoundaryPolicy::ClampRepeat, n).unwrap();
                prop_assert_eq!(idx.len(), frames);
                prop_assert!(idx.windows(2).all(|w| w[0] <= w[1]));
                prop_assert!(idx.iter().all(|&i| i < n));
                let wrapped = clip_indices(start, &s, BoundaryPolicy::Wrap, n).unwrap();
                prop_assert!(wrapped.iter().all(|&i| i < n));
            }

            #[test]
            fn dense_clips_stay_inside_long_segments(
                ns in 0usize..200, extra in 1usize..300, frames in 1usize..10, stride in 1usize..8, seed: u64,
            ) {
                let s = spec(frames, stride);
                let ne = ns + s.span() as usize + extra;
                let seg = Segment::new(0, ns, ne);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let start = dense_train_start(&seg, &s, &mut rng);
                let idx = clip_indices(start, &s, BoundaryPolicy::ClampRepeat, ne + 100).unwrap();
                prop_assert!(idx.iter().all(|&i| i >= ns && i <= ne));
            }
        }
    }
}
