//! Throughput measurement for the streaming cleaner.

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cleaner::{CleanEvent, Cleaner, CleanerConfig};
use crate::cutoffs::CutoffPolicy;
use crate::error::Result;
use crate::simulate::{corrupt, gen_ground_truth, GenModel, NoiseConfig};
use crate::stream::ClassMap;

#[derive(Debug, Clone, Copy)]
pub struct BenchReport {
    pub frames: usize,
    pub seconds: f64,
    pub frames_per_second: f64,
    pub backdates: usize,
}

/// Pushes a blip-corrupted synthetic stream through a static cleaner
/// (`C_min = 9`, `b = 2`) and times the push loop only.
pub fn cleaner_throughput(frames: usize, seed: u64) -> Result<BenchReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class_map = Arc::new(ClassMap::anonymous(8));
    let model = GenModel::uniform(class_map.clone(), 60f64.ln(), 0.5)?;
    let gt = gen_ground_truth(&model, frames, &mut rng);
    let noise = NoiseConfig {
        blip_rate: 0.5,
        blip_len_max: 4,
        boundary_jitter_max: 2,
        sub_rate: 0.01,
    };
    let raw = corrupt(&gt, &noise, &mut rng)?;
    let config = Arc::new(CleanerConfig::new(CutoffPolicy::fixed(9)?, 2, class_map)?);

    let mut cleaner = Cleaner::streaming(config);
    let mut events = Vec::with_capacity(2);
    let mut backdates = 0;
    let started = Instant::now();
    for &label in raw.labels() {
        events.clear();
        cleaner.push_into(label, &mut events)?;
        backdates += events
            .iter()
            .filter(|e| matches!(e, CleanEvent::Backdate { .. }))
            .count();
    }
    let seconds = started.elapsed().as_secs_f64();
    Ok(BenchReport {
        frames,
        seconds,
        frames_per_second: frames as f64 / seconds.max(f64::MIN_POSITIVE),
        backdates,
    })
}
