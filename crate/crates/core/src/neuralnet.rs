//! Layered feed-forward network and the flat genome that parameterizes it.
//!
//! Every non-input neuron computes
//! `a = -threshold + Σ_k (prev_k - 0.5) · weight_k` and outputs
//! `1 / (1 + exp(-a))`. Layer 0 holds the raw inputs, which are centered by
//! the same `- 0.5` as hidden activations.
//!
//! Genome parameter order: layers in order, neurons in order within a layer,
//! and for each neuron its threshold followed by its incoming weights.

use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sigmoid arguments are clamped to this magnitude before `exp`. Above
/// roughly 36.7 the sigmoid rounds to exactly 1.0, so 36 keeps every output
/// strictly inside (0, 1) while staying within an ulp of the exact value.
pub const SIGMOID_CLAMP: f64 = 36.0;

/// Bound of the uniform distribution random genomes are drawn from.
pub const INIT_RANGE: f64 = 2.0;

pub const GENOME_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("architecture needs at least two layers, got {0}")]
    TooFewLayers(usize),
    #[error("layer {0} has zero neurons")]
    EmptyLayer(usize),
    #[error("params: expected {expected} values for layer_sizes {layer_sizes:?}, found {found}")]
    ParamCount {
        layer_sizes: Vec<usize>,
        expected: usize,
        found: usize,
    },
    #[error("params[{0}] is not finite")]
    NonFiniteParam(usize),
    #[error("input has length {found}, network expects {expected}")]
    InputLength { expected: usize, found: usize },
    #[error("architectures differ: {0:?} vs {1:?}")]
    ArchitectureMismatch(Vec<usize>, Vec<usize>),
    #[error("format_version: unsupported version {0} (expected {GENOME_FORMAT_VERSION})")]
    FormatVersion(u32),
    #[error("genome file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Architecture {
    layer_sizes: Vec<usize>,
}

impl Default for Architecture {
    /// 45 inputs, 30 hidden, 15 outputs.
    fn default() -> Self {
        Architecture {
            layer_sizes: vec![45, 30, 15],
        }
    }
}

impl Architecture {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self, NetError> {
        if layer_sizes.len() < 2 {
            return Err(NetError::TooFewLayers(layer_sizes.len()));
        }
        if let Some(i) = layer_sizes.iter().position(|&n| n == 0) {
            return Err(NetError::EmptyLayer(i));
        }
        Ok(Architecture { layer_sizes })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[1] * (1 + w[0])).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Genome {
    architecture: Architecture,
    params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GenomeFile {
    format_version: u32,
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

impl Genome {
    pub fn new(architecture: Architecture, params: Vec<f64>) -> Result<Self, NetError> {
        let expected = architecture.param_count();
        if params.len() != expected {
            return Err(NetError::ParamCount {
                layer_sizes: architecture.layer_sizes.clone(),
                expected,
                found: params.len(),
            });
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(NetError::NonFiniteParam(i));
        }
        Ok(Genome {
            architecture,
            params,
        })
    }

    pub fn zeros(architecture: Architecture) -> Self {
        let params = vec![0.0; architecture.param_count()];
        Genome {
            architecture,
            params,
        }
    }

    /// Every parameter i.i.d. uniform on [-2, 2].
    pub fn random<R: Rng + ?Sized>(architecture: Architecture, rng: &mut R) -> Self {
        let params = (0..architecture.param_count())
            .map(|_| rng.random_range(-INIT_RANGE..=INIT_RANGE))
            .collect();
        Genome {
            architecture,
            params,
        }
    }

    /// The random genome for `seed`, as used by the CLI and the gallery.
    pub fn from_seed(architecture: Architecture, seed: u64) -> Self {
        Self::random(architecture, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Replaces the parameter vector, keeping the architecture.
    pub fn with_params(&self, params: Vec<f64>) -> Result<Self, NetError> {
        Genome::new(self.architecture.clone(), params)
    }

    pub fn to_json(&self) -> String {
        let file = GenomeFile {
            format_version: GENOME_FORMAT_VERSION,
            layer_sizes: self.architecture.layer_sizes.clone(),
            params: self.params.clone(),
        };
        serde_json::to_string(&file).expect("genome serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NetError> {
        let file: GenomeFile = serde_json::from_str(text)?;
        if file.format_version != GENOME_FORMAT_VERSION {
            return Err(NetError::FormatVersion(file.format_version));
        }
        Genome::new(Architecture::new(file.layer_sizes)?, file.params)
    }

    pub fn read(path: &Path) -> Result<Self, NetError> {
        Genome::from_json(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), NetError> {
        let mut text = self.to_json();
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Layer {
    n_out: usize,
    thresholds: Vec<f64>,
    /// Input-major: the weights from input k to every neuron are
    /// contiguous, so all neurons accumulate side by side.
    weights: Vec<f64>,
}

/// Immutable evaluator realized from a [`Genome`].
#[derive(Debug, Clone)]
pub struct Network {
    architecture: Architecture,
    layers: Vec<Layer>,
}

/// Reusable buffers for [`Network::evaluate_into`].
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    centered: Vec<f64>,
    values: Vec<f64>,
}

#[inline]
pub fn sigmoid(a: f64) -> f64 {
    1.0 / (1.0 + (-a.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP)).exp())
}

impl Network {
    pub fn realize(genome: &Genome) -> Result<Self, NetError> {
        let arch = genome.architecture.clone();
        if genome.params.len() != arch.param_count() {
            return Err(NetError::ParamCount {
                layer_sizes: arch.layer_sizes.clone(),
                expected: arch.param_count(),
                found: genome.params.len(),
            });
        }
        let mut rest = genome.params.as_slice();
        let mut layers = Vec::with_capacity(arch.layer_sizes.len() - 1);
        for w in arch.layer_sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let mut thresholds = Vec::with_capacity(n_out);
            let mut weights = vec![0.0; n_out * n_in];
            for j in 0..n_out {
                let (neuron, tail) = rest.split_at(1 + n_in);
                thresholds.push(neuron[0]);
                for (k, &w) in neuron[1..].iter().enumerate() {
                    weights[k * n_out + j] = w;
                }
                rest = tail;
            }
            layers.push(Layer {
                n_out,
                thresholds,
                weights,
            });
        }
        debug_assert!(rest.is_empty());
        Ok(Network {
            architecture: arch,
            layers,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn evaluate(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        let mut scratch = Scratch::default();
        self.evaluate_into(input, &mut scratch)?;
        Ok(scratch.values)
    }

    /// Allocation-free evaluation; the result is left in (and returned
    /// from) `scratch`.
    pub fn evaluate_into<'s>(
        &self,
        input: &[f64],
        scratch: &'s mut Scratch,
    ) -> Result<&'s [f64], NetError> {
        if input.len() != self.architecture.inputs() {
            return Err(NetError::InputLength {
                expected: self.architecture.inputs(),
                found: input.len(),
            });
        }
        scratch.values.clear();
        scratch.values.extend_from_slice(input);
        for layer in &self.layers {
            scratch.centered.clear();
            scratch
                .centered
                .extend(scratch.values.iter().map(|v| v - 0.5));
            // each neuron still sums -threshold, then inputs in order k = 0, 1, ...
            let acc = &mut scratch.values;
            acc.clear();
            acc.extend(layer.thresholds.iter().map(|t| -t));
            for (x, column) in scratch
                .centered
                .iter()
                .zip(layer.weights.chunks_exact(layer.n_out))
            {
                for (a, w) in acc.iter_mut().zip(column) {
                    *a += x * w;
                }
            }
            acc.iter_mut().for_each(|a| *a = sigmoid(*a));
        }
        Ok(&scratch.values)
    }
}
