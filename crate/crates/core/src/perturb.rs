//! Synthetic predictions made by perturbing ground truth.
//!
//! Every window item becomes one prediction with score 1. Its class is
//! replaced, with probability `p_swap`, by a draw from the empirical class
//! distribution of the training set, and its time-to-action receives
//! Gaussian noise of standard deviation `sigma`.
//!
//! Randomness comes from two ChaCha8 streams derived from one seed: stream 0
//! drives class swaps, stream 1 drives time noise. Class outcomes therefore
//! do not depend on `sigma`, and a fixed `(seed, p_swap)` yields the same
//! classes for every noise level.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::Prediction;
use crate::windowing::WindowSet;

const CLASS_STREAM: u64 = 0;
const TIME_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub p_swap: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl PerturbConfig {
    pub fn new(p_swap: f64, sigma: f64, seed: u64) -> Result<Self> {
        let cfg = Self { p_swap, sigma, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_swap) {
            return Err(Error::Argument(format!(
                "swap probability {} outside [0, 1]",
                self.p_swap
            )));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Argument(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Swap probabilities of the controlled experiments.
pub const GRID_P_SWAP: [f64; 3] = [0.25, 0.5, 0.75];
/// Time-to-action noise levels of the controlled experiments.
pub const GRID_SIGMA: [f64; 3] = [0.33, 0.5, 1.0];

/// Empirical class distribution, sampled by exact integer inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEdf {
    classes: Vec<u32>,
    /// Running totals of the class counts.
    cumulative: Vec<u64>,
}

impl ClassEdf {
    pub fn from_counts(counts: &BTreeMap<u32, u64>) -> Result<Self> {
        let mut classes = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0u64;
        for (&c, &n) in counts {
            if n == 0 {
                continue;
            }
            total += n;
            classes.push(c);
            cumulative.push(total);
        }
        if total == 0 {
            return Err(Error::Argument("class distribution needs at least one instance".into()));
        }
        Ok(Self { classes, cumulative })
    }

    pub fn total(&self) -> u64 {
        self.cumulative.last().copied().unwrap_or(0)
    }

    pub fn probability(&self, class: u32) -> f64 {
        match self.classes.binary_search(&class) {
            Ok(i) => {
                let prev = if i == 0 { 0 } else { self.cumulative[i - 1] };
                (self.cumulative[i] - prev) as f64 / self.total() as f64
            }
            Err(_) => 0.0,
        }
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u = rng.random_range(0..self.total());
        self.classes[self.cumulative.partition_point(|&c| c <= u)]
    }
}

/// Class distribution over every ground-truth window item of a training set.
pub fn build_edf(training: &WindowSet) -> Result<ClassEdf> {
    let mut counts = BTreeMap::new();
    for &c in training.item_classes() {
        *counts.entry(c).or_insert(0u64) += 1;
    }
    ClassEdf::from_counts(&counts)
}

/// One prediction per window item, in window order.
pub fn perturb_windows(windows: &WindowSet, edf: &ClassEdf, cfg: &PerturbConfig) -> Result<Vec<Prediction>> {
    cfg.validate()?;
    let mut class_rng = stream(cfg.seed, CLASS_STREAM);
    let mut time_rng = stream(cfg.seed, TIME_STREAM);
    let mut out = Vec::with_capacity(windows.total_items());
    for w in 0..windows.len() {
        let (classes, taus) = windows.items(w);
        if classes.is_empty() {
            continue;
        }
        let video = &windows.videos()[windows.position(w).0];
        let t = windows.t_a(w);
        for (&class, &tau) in classes.iter().zip(taus) {
            let x: f64 = class_rng.random();
            let class = if x < cfg.p_swap {
                edf.sample(&mut class_rng)
            } else {
                class
            };
            let z: f64 = time_rng.sample(StandardNormal);
            out.push(Prediction::new(video.clone(), t, class, tau + cfg.sigma * z, 1.0));
        }
    }
    Ok(out)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{ActionInstance, LabelKind, VideoRecord, Vocabulary};
    use crate::windowing::GridConfig;

    fn counts(pairs: &[(u32, u64)]) -> BTreeMap<u32, u64> {
        pairs.iter().copied().collect()
    }

    fn windows(classes: &[u32]) -> WindowSet {
        let vocab = Vocabulary::new(8, 1).unwrap();
        let actions = classes
            .iter()
            .enumerate()
            .map(|(i, &c)| ActionInstance::new("v", 1.0 + i as f64, 1.5 + i as f64, c, 0, &vocab).unwrap())
            .collect();
        let video = VideoRecord::new("v", classes.len() as f64 + 2.0, actions).unwrap();
        WindowSet::build(&[video], &GridConfig::default(), LabelKind::Verb).unwrap()
    }

    #[test]
    fn edf_probabilities() {
        let e = ClassEdf::from_counts(&counts(&[(0, 3), (1, 1)])).unwrap();
        assert_eq!((e.probability(0), e.probability(1)), (0.75, 0.25));
        let e = ClassEdf::from_counts(&counts(&[(4, 9)])).unwrap();
        assert_eq!(e.probability(4), 1.0);
        let e = ClassEdf::from_counts(&counts(&[(0, 2), (1, 2), (2, 2), (3, 2)])).unwrap();
        assert!(e.classes().iter().all(|&c| e.probability(c) == 0.25));
        assert!(ClassEdf::from_counts(&BTreeMap::new()).is_err());
        assert!(ClassEdf::from_counts(&counts(&[(1, 0)])).is_err());
    }

    #[test]
    fn edf_sampling_frequencies() {
        let e = ClassEdf::from_counts(&counts(&[(0, 3), (5, 1)])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40_000;
        let zeros = (0..n).filter(|_| e.sample(&mut rng) == 0).count() as f64;
        // 3 standard deviations of a binomial(40000, 0.75)
        let sd = (n as f64 * 0.75 * 0.25).sqrt();
        assert!((zeros - 0.75 * n as f64).abs() < 3.0 * sd);
    }

    #[test]
    fn no_perturbation_reproduces_ground_truth() {
        let ws = windows(&[1, 2, 3]);
        let edf = build_edf(&ws).unwrap();
        let preds = perturb_windows(&ws, &edf, &PerturbConfig::new(0.0, 0.0, 1).unwrap()).unwrap();
        let mut expected = Vec::new();
        for w in ws.iter() {
            for item in &w.items {
                expected.push(Prediction::new("v", w.t_a, item.class_id, item.tau, 1.0));
            }
        }
        assert_eq!(preds, expected);
    }

    #[test]
    fn single_class_swap_is_identity() {
        let ws = windows(&[2, 2, 2]);
        let edf = build_edf(&ws).unwrap();
        let preds = perturb_windows(&ws, &edf, &PerturbConfig::new(1.0, 0.5, 3).unwrap()).unwrap();
        assert!(preds.iter().all(|p| p.class_id == 2));
    }

    #[test]
    fn classes_do_not_depend_on_sigma() {
        let ws = windows(&[0, 1, 2, 3, 4, 5, 6, 7]);
        let edf = build_edf(&ws).unwrap();
        let a = perturb_windows(&ws, &edf, &PerturbConfig::new(0.5, 0.33, 11).unwrap()).unwrap();
        let b = perturb_windows(&ws, &edf, &PerturbConfig::new(0.5, 1.0, 11).unwrap()).unwrap();
        let classes = |v: &[Prediction]| v.iter().map(|p| p.class_id).collect::<Vec<_>>();
        assert_eq!(classes(&a), classes(&b));
        assert_ne!(a, b);
    }

    #[test]
    fn invalid_config() {
        assert!(PerturbConfig::new(1.5, 0.0, 0).is_err());
        assert!(PerturbConfig::new(0.5, -0.1, 0).is_err());
    }
}
