use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ClassLabel, Dataset, TargetFeatures};
use crate::error::{Error, Result};
use crate::rng::{stream, tag};
use crate::NUM_FEATURES;

/// `train : held_out` proportions, e.g. 9:1 or 7:3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub train: u32,
    pub held_out: u32,
}

impl SplitRatio {
    pub const NINE_TO_ONE: SplitRatio = SplitRatio {
        train: 9,
        held_out: 1,
    };
    pub const SEVEN_TO_THREE: SplitRatio = SplitRatio {
        train: 7,
        held_out: 3,
    };

    fn held_out_count(&self, n: usize) -> usize {
        let total = (self.train + self.held_out) as f64;
        (n as f64 * self.held_out as f64 / total).round() as usize
    }
}

/// Stratified split: each class is shuffled with its own seeded stream and
/// cut at the rounded ratio. Both parts keep the original sample order.
pub fn split(source: &Dataset, ratio: SplitRatio, seed: u64) -> Result<(Dataset, Dataset)> {
    if source.len() < 10 {
        return Err(Error::Config(format!(
            "need at least 10 samples to split, got {}",
            source.len()
        )));
    }
    let labels = source.labels()?;
    let mut held = vec![false; source.len()];
    for class in 0..ClassLabel::COUNT {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        match members.len() {
            0 => continue,
            1 => return Err(Error::Stratification { class, count: 1 }),
            n => {
                members.shuffle(&mut stream(seed, &[tag("split"), class as u64]));
                let k = ratio.held_out_count(n).clamp(1, n - 1);
                members[..k].iter().for_each(|&i| held[i] = true);
            }
        }
    }
    Ok(partition(source, &held))
}

/// Unstratified fallback used when some class is too small to stratify.
pub fn split_unstratified(
    source: &Dataset,
    ratio: SplitRatio,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let n = source.len();
    if n < 2 {
        return Err(Error::Config(format!(
            "need at least 2 samples to split, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, &[tag("split"), u64::MAX]));
    let k = ratio.held_out_count(n).clamp(1, n - 1);
    let mut held = vec![false; n];
    order[..k].iter().for_each(|&i| held[i] = true);
    Ok(partition(source, &held))
}

fn partition(source: &Dataset, held: &[bool]) -> (Dataset, Dataset) {
    let train: Vec<usize> = (0..held.len()).filter(|&i| !held[i]).collect();
    let rest: Vec<usize> = (0..held.len()).filter(|&i| held[i]).collect();
    (
        source.subset(&train, "train split"),
        source.subset(&rest, "held-out split"),
    )
}

/// Per-feature affine map fitted on source training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: [f64; NUM_FEATURES],
    pub std: [f64; NUM_FEATURES],
}

pub const STD_FLOOR: f64 = 1e-8;

impl Standardizer {
    /// Mean and population std over every time step of every sample.
    pub fn fit(train: &Dataset) -> Result<Self> {
        let Some(first) = train.samples.first() else {
            return Err(Error::Config(
                "cannot standardise on an empty dataset".into(),
            ));
        };
        // Shift by the first row so constant columns come out exactly.
        let pivot: [f64; NUM_FEATURES] = std::array::from_fn(|c| first.features[c]);
        let mut sum = [0.0; NUM_FEATURES];
        let mut count = 0usize;
        for s in &train.samples {
            for row in s.features.chunks(NUM_FEATURES) {
                for c in 0..NUM_FEATURES {
                    sum[c] += row[c] - pivot[c];
                }
                count += 1;
            }
        }
        let mean: [f64; NUM_FEATURES] = std::array::from_fn(|c| pivot[c] + sum[c] / count as f64);
        let mut sq = [0.0; NUM_FEATURES];
        for s in &train.samples {
            for row in s.features.chunks(NUM_FEATURES) {
                for c in 0..NUM_FEATURES {
                    sq[c] += (row[c] - mean[c]).powi(2);
                }
            }
        }
        let std = std::array::from_fn(|c| (sq[c] / count as f64).sqrt().max(STD_FLOOR));
        Ok(Self { mean, std })
    }

    fn apply_slice(&self, features: &mut [f64]) {
        for row in features.chunks_mut(NUM_FEATURES) {
            for c in 0..NUM_FEATURES {
                row[c] = (row[c] - self.mean[c]) / self.std[c];
            }
        }
    }

    pub fn apply(&self, ds: &mut Dataset) {
        ds.samples
            .iter_mut()
            .for_each(|s| self.apply_slice(&mut s.features));
    }

    pub fn apply_features(&self, ds: &mut TargetFeatures) {
        ds.samples
            .iter_mut()
            .for_each(|s| self.apply_slice(&mut s.features));
    }
}

/// Fits on `train` and applies the same map to `train` and every dataset in
/// `others`.
pub fn standardize(train: &mut Dataset, others: &mut [&mut Dataset]) -> Result<Standardizer> {
    let stats = Standardizer::fit(train)?;
    stats.apply(train);
    for ds in others.iter_mut() {
        stats.apply(ds);
    }
    Ok(stats)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchMode {
    /// Final short batch dropped.
    Train,
    /// Final short batch kept.
    Eval,
}

/// Index batches over `n` samples; shuffled with `seed` when given.
pub fn make_batches(
    n: usize,
    batch_size: usize,
    shuffle_seed: Option<u64>,
    mode: BatchMode,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be ≥ 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut stream(seed, &[tag("batches")]));
    }
    Ok(order
        .chunks(batch_size)
        .filter(|c| mode == BatchMode::Eval || c.len() == batch_size)
        .map(<[usize]>::to_vec)
        .collect())
}
