//! Sequence datasets: the digital-twin generator, splitting, standardisation,
//! batching and on-disk formats.

mod io;
mod labels;
mod prep;
pub mod twin;

use serde::{Deserialize, Serialize};

pub use io::{import_csv_dir, load_dataset, save_dataset, CSV_COLUMNS, DEFAULT_CSV_LEN};
pub use labels::{ClassLabel, DomainLabel, FaultMode};
pub use prep::{
    make_batches, split, split_unstratified, standardize, BatchMode, SplitRatio, Standardizer,
};
pub use twin::{
    generate_corpus, simulate_sample, simulate_trace, FaultConfig, GapConfig, ServoParams,
    SimulationTrace, TwinConfig,
};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::NUM_FEATURES;

/// One `seq_len × 6` sequence stored time-major: row `t` holds desired x, y, z
/// then residual (desired − realized) x, y, z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceSample {
    pub features: Vec<f64>,
    pub seq_len: usize,
    pub class_label: Option<ClassLabel>,
    pub domain: DomainLabel,
}

impl SequenceSample {
    pub fn new(
        features: Vec<f64>,
        seq_len: usize,
        class_label: Option<ClassLabel>,
        domain: DomainLabel,
    ) -> Result<Self> {
        if features.len() != seq_len * NUM_FEATURES {
            return Err(Error::Shape {
                op: "sequence sample",
                lhs: vec![seq_len, NUM_FEATURES],
                rhs: vec![features.len()],
            });
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!(
                "non-finite feature at step {}, column {}",
                i / NUM_FEATURES,
                i % NUM_FEATURES
            )));
        }
        Ok(Self {
            features,
            seq_len,
            class_label,
            domain,
        })
    }

    pub fn at(&self, step: usize, column: usize) -> f64 {
        self.features[step * NUM_FEATURES + column]
    }
}

/// Where a dataset came from; embedded in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Generated {
        root_seed: u64,
        n_source_traj: usize,
        n_target_traj: usize,
        twin: Box<TwinConfig>,
        /// The trajectory sampler is an assumption of this generator.
        trajectory_sampler: String,
    },
    Loaded {
        path: String,
    },
    Derived {
        parent: Box<Provenance>,
        note: String,
    },
}

impl Provenance {
    pub fn derived(&self, note: impl Into<String>) -> Provenance {
        Provenance::Derived {
            parent: Box::new(self.clone()),
            note: note.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<SequenceSample>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn seq_len(&self) -> Option<usize> {
        self.samples.first().map(|s| s.seq_len)
    }

    /// Class ids of every sample; errors if any sample is unlabeled.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.class_label
                    .map(ClassLabel::id)
                    .ok_or_else(|| Error::Contract(format!("sample {i} carries no class label")))
            })
            .collect()
    }

    pub fn class_counts(&self) -> [usize; ClassLabel::COUNT] {
        let mut counts = [0; ClassLabel::COUNT];
        for s in &self.samples {
            if let Some(c) = s.class_label {
                counts[c.id()] += 1;
            }
        }
        counts
    }

    pub fn subset(&self, indices: &[usize], note: &str) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            provenance: self.provenance.derived(note),
        }
    }

    /// Drops class labels, keeping only what adaptation may see.
    pub fn features_only(&self) -> TargetFeatures {
        TargetFeatures {
            samples: self
                .samples
                .iter()
                .map(|s| UnlabeledSample {
                    features: s.features.clone(),
                    seq_len: s.seq_len,
                })
                .collect(),
        }
    }

    /// Every sample must share one sequence length.
    pub fn check_uniform(&self) -> Result<usize> {
        let len = self
            .seq_len()
            .ok_or_else(|| Error::Config("dataset is empty".into()))?;
        if let Some((i, s)) = self
            .samples
            .iter()
            .enumerate()
            .find(|(_, s)| s.seq_len != len)
        {
            return Err(Error::Contract(format!(
                "sample {i} has length {} but the dataset uses {len}",
                s.seq_len
            )));
        }
        Ok(len)
    }

    pub fn batch(&self, indices: &[usize]) -> Result<Batch> {
        let refs: Vec<(&[f64], usize)> = indices
            .iter()
            .map(|&i| (self.samples[i].features.as_slice(), self.samples[i].seq_len))
            .collect();
        let inputs = stack_channels(&refs)?;
        let labels = indices
            .iter()
            .map(|&i| {
                self.samples[i]
                    .class_label
                    .map(ClassLabel::id)
                    .ok_or_else(|| Error::Contract(format!("sample {i} carries no class label")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Batch {
            inputs,
            labels: Some(labels),
            domains: indices
                .iter()
                .map(|&i| self.samples[i].domain.id())
                .collect(),
        })
    }
}

/// A sequence with no class label field at all.
#[derive(Clone, Debug, PartialEq)]
pub struct UnlabeledSample {
    pub features: Vec<f64>,
    pub seq_len: usize,
}

/// Target-domain features for adaptation. The type has no label storage, so
/// training code cannot read target labels.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TargetFeatures {
    pub samples: Vec<UnlabeledSample>,
}

impl TargetFeatures {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn batch(&self, indices: &[usize]) -> Result<Batch> {
        let refs: Vec<(&[f64], usize)> = indices
            .iter()
            .map(|&i| (self.samples[i].features.as_slice(), self.samples[i].seq_len))
            .collect();
        Ok(Batch {
            inputs: stack_channels(&refs)?,
            labels: None,
            domains: vec![DomainLabel::Target.id(); indices.len()],
        })
    }
}

/// Network-ready minibatch: `inputs` is `[batch, 6, seq_len]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub inputs: Tensor,
    pub labels: Option<Vec<usize>>,
    pub domains: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }
}

fn stack_channels(samples: &[(&[f64], usize)]) -> Result<Tensor> {
    let Some(&(_, len)) = samples.first() else {
        return Ok(Tensor::zeros(&[0, NUM_FEATURES, 0]));
    };
    let plane = NUM_FEATURES * len;
    let mut data = vec![0.0; samples.len() * plane];
    for (b, &(features, l)) in samples.iter().enumerate() {
        if l != len {
            return Err(Error::Contract(format!(
                "batch mixes sequence lengths {len} and {l}"
            )));
        }
        let out = &mut data[b * plane..][..plane];
        for (t, row) in features.chunks(NUM_FEATURES).enumerate() {
            for (c, &v) in row.iter().enumerate() {
                out[c * len + t] = v;
            }
        }
    }
    Tensor::new(vec![samples.len(), NUM_FEATURES, len], data)
}
