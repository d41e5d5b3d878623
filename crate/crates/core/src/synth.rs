//! Seeded synthetic annotation sets for experiments, examples and load tests.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::annotations::{ActionInstance, VideoRecord, Vocabulary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub videos: usize,
    pub actions_per_video: usize,
    pub verb_count: u32,
    pub noun_count: u32,
    /// Mean gap between consecutive action starts, seconds.
    pub mean_gap: f64,
    /// Mean action length, seconds.
    pub mean_length: f64,
    /// Zipf exponent of the action class frequencies (0 = uniform).
    pub class_skew: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            videos: 50,
            actions_per_video: 40,
            verb_count: 4,
            noun_count: 5,
            mean_gap: 2.5,
            mean_length: 3.0,
            class_skew: 1.0,
            seed: 0,
        }
    }
}

fn centis(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Generates videos whose action starts follow a Poisson process and whose
/// action classes follow a Zipf law. Times are rounded to 0.01 s.
pub fn generate(cfg: &SynthConfig) -> Result<(Vocabulary, Vec<VideoRecord>)> {
    if !(cfg.mean_gap > 0.0 && cfg.mean_length > 0.0) {
        return Err(Error::Argument("mean gap and length must be positive".into()));
    }
    let vocab = Vocabulary::new(cfg.verb_count, cfg.noun_count)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_classes = vocab.action_count() as usize;
    // Shuffle which action gets which frequency rank.
    let mut ranks: Vec<usize> = (0..n_classes).collect();
    for i in (1..n_classes).rev() {
        ranks.swap(i, rng.random_range(0..=i));
    }
    let weights: Vec<f64> = ranks
        .iter()
        .map(|&r| 1.0 / ((r + 1) as f64).powf(cfg.class_skew))
        .collect();
    let classes = WeightedIndex::new(&weights).map_err(|e| Error::Internal(e.to_string()))?;
    let gap = Exp::new(1.0 / cfg.mean_gap).map_err(|e| Error::Internal(e.to_string()))?;
    let length = Exp::new(1.0 / cfg.mean_length).map_err(|e| Error::Internal(e.to_string()))?;

    let mut videos = Vec::with_capacity(cfg.videos);
    for v in 0..cfg.videos {
        let id = format!("S{:02}_{:03}", v % 37, v);
        let mut t = 0.0;
        let mut actions = Vec::with_capacity(cfg.actions_per_video);
        for _ in 0..cfg.actions_per_video {
            t += gap.sample(&mut rng);
            let start = centis(t).max(0.01);
            let stop = centis(start + 0.1 + length.sample(&mut rng));
            let action = classes.sample(&mut rng) as u32;
            let (verb, noun) = vocab.decode_action(action);
            actions.push(ActionInstance::new(id.clone(), start, stop, verb, noun, &vocab)?);
        }
        let last_stop = actions.iter().map(|a| a.stop).fold(0.0, f64::max);
        let duration = centis(last_stop + rng.random_range(1.0..10.0));
        videos.push(VideoRecord::new(id, duration, actions)?);
    }
    Ok((vocab, videos))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let cfg = SynthConfig {
            videos: 3,
            ..Default::default()
        };
        let (vocab, a) = generate(&cfg).unwrap();
        let (_, b) = generate(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(vocab.action_count(), 20);
        for v in &a {
            assert_eq!(v.actions.len(), 40);
            assert!(v.actions.windows(2).all(|w| w[0].start <= w[1].start));
            assert!(v.actions.iter().all(|x| x.stop > x.start && x.start < v.duration));
        }
    }
}
