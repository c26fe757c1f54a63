//! Small neural building blocks with hand-written gradients: a dense layer,
//! a hashed-embedding sentence encoder and the AdamW optimizer.
//!
//! Everything is generic over [`Real`] and deterministic for a fixed seed.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::num::Real;
use crate::text::word_tokens;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("unknown encoder id `{0}` (expected hash-embed-small|base|large or hash-embed-d<dim>-b<buckets>)")]
    UnknownEncoder(String),
}

/// Failure to start or run training.
#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Encoder(#[from] NnError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0} set is empty")]
    Empty(&'static str),
    #[error("training data has a single class ({0})")]
    OneClass(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
    /// Macro-F1 for the appraisal model, binary F1 for the alignment model.
    pub dev_f1: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch of the returned checkpoint.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Fully connected layer, weights stored row-major as `[out][in]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    /// Xavier-uniform weights, zero bias.
    pub fn new<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
        let weight = (0..inputs * outputs).map(|_| T::of(dist.sample(rng))).collect();
        Dense { inputs, outputs, weight, bias: vec![T::zero(); outputs] }
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.inputs);
        (0..self.outputs)
            .map(|o| {
                let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
                self.bias[o] + row.iter().zip(x).map(|(&w, &v)| w * v).sum::<T>()
            })
            .collect()
    }

    /// Accumulates parameter gradients into `grad` and returns d(loss)/dx.
    pub fn backward(&self, x: &[T], grad_out: &[T], grad: &mut DenseGrad<T>) -> Vec<T> {
        let mut grad_in = vec![T::zero(); self.inputs];
        for (o, &g) in grad_out.iter().enumerate() {
            if g == T::zero() {
                continue;
            }
            grad.bias[o] += g;
            let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
            let grow = &mut grad.weight[o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                grow[i] += g * x[i];
                grad_in[i] += g * row[i];
            }
        }
        grad_in
    }

    pub fn zero_grad(&self) -> DenseGrad<T> {
        DenseGrad { weight: vec![T::zero(); self.weight.len()], bias: vec![T::zero(); self.bias.len()] }
    }
}

#[derive(Clone, Debug)]
pub struct DenseGrad<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// Shape of a hashed-embedding encoder, resolved from an encoder id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub id: String,
    pub dim: usize,
    pub buckets: usize,
    /// Longest token sequence kept; longer inputs lose their leading tokens.
    pub max_tokens: usize,
    pub bigrams: bool,
}

impl EncoderSpec {
    pub fn resolve(id: &str) -> Result<Self, NnError> {
        let (dim, buckets) = match id {
            "hash-embed-small" => (32, 4096),
            "hash-embed-base" => (64, 8192),
            "hash-embed-large" => (128, 16384),
            other => Self::parse_custom(other).ok_or_else(|| NnError::UnknownEncoder(id.to_string()))?,
        };
        Ok(EncoderSpec { id: id.to_string(), dim, buckets, max_tokens: 512, bigrams: true })
    }

    fn parse_custom(id: &str) -> Option<(usize, usize)> {
        let rest = id.strip_prefix("hash-embed-d")?;
        let (d, b) = rest.split_once("-b")?;
        let (d, b) = (d.parse().ok()?, b.parse().ok()?);
        (d > 0 && b > 0).then_some((d, b))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Bag of hashed unigrams and bigrams, mean-pooled and passed through a
/// `tanh` projection. Shared by both sides of the twin alignment model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HashedEncoder<T> {
    pub spec: EncoderSpec,
    pub embedding: Vec<T>,
    pub projection: Dense<T>,
}

/// Intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct EncodeCache<T> {
    pub ids: Vec<usize>,
    pub pooled: Vec<T>,
    pub output: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct EncoderGrad<T> {
    pub embedding: Vec<T>,
    pub projection: DenseGrad<T>,
}

impl<T: Real> HashedEncoder<T> {
    pub fn new<R: Rng>(spec: EncoderSpec, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, 0.5).expect("valid std");
        let embedding = (0..spec.buckets * spec.dim).map(|_| T::of(normal.sample(rng))).collect();
        let projection = Dense::new(spec.dim, spec.dim, rng);
        HashedEncoder { spec, embedding, projection }
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(token.as_bytes()) % self.spec.buckets as u64) as usize
    }

    pub fn token_ids(&self, text: &str) -> Vec<usize> {
        let mut words = word_tokens(text);
        if words.len() > self.spec.max_tokens {
            words.drain(..words.len() - self.spec.max_tokens);
        }
        let mut ids: Vec<usize> = words.iter().map(|w| self.bucket(w)).collect();
        if self.spec.bigrams {
            for pair in words.windows(2) {
                ids.push(self.bucket(&format!("{}\u{1f}{}", pair[0], pair[1])));
            }
        }
        ids
    }

    pub fn row(&self, id: usize) -> &[T] {
        &self.embedding[id * self.spec.dim..(id + 1) * self.spec.dim]
    }

    pub fn forward_ids(&self, ids: Vec<usize>) -> EncodeCache<T> {
        let d = self.spec.dim;
        let mut pooled = vec![T::zero(); d];
        if !ids.is_empty() {
            for &id in &ids {
                for (p, &e) in pooled.iter_mut().zip(self.row(id)) {
                    *p += e;
                }
            }
            let n = T::of_usize(ids.len());
            pooled.iter_mut().for_each(|p| *p /= n);
        }
        let output = self.projection.forward(&pooled).into_iter().map(|z| z.tanh()).collect();
        EncodeCache { ids, pooled, output }
    }

    pub fn forward(&self, text: &str) -> EncodeCache<T> {
        self.forward_ids(self.token_ids(text))
    }

    pub fn encode(&self, text: &str) -> Vec<T> {
        self.forward(text).output
    }

    pub fn backward(&self, cache: &EncodeCache<T>, grad_out: &[T], grad: &mut EncoderGrad<T>) {
        let d_pre: Vec<T> = grad_out.iter().zip(&cache.output).map(|(&g, &y)| g * (T::one() - y * y)).collect();
        let d_pooled = self.projection.backward(&cache.pooled, &d_pre, &mut grad.projection);
        if cache.ids.is_empty() {
            return;
        }
        let n = T::of_usize(cache.ids.len());
        let d = self.spec.dim;
        for &id in &cache.ids {
            let row = &mut grad.embedding[id * d..(id + 1) * d];
            for (r, &g) in row.iter_mut().zip(&d_pooled) {
                *r += g / n;
            }
        }
    }

    pub fn zero_grad(&self) -> EncoderGrad<T> {
        EncoderGrad { embedding: vec![T::zero(); self.embedding.len()], projection: self.projection.zero_grad() }
    }
}

/// Decoupled-weight-decay Adam over a fixed list of parameter tensors.
#[derive(Clone, Debug)]
pub struct AdamW<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub weight_decay: T,
    step: i32,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> AdamW<T> {
    pub fn new(learning_rate: f64, weight_decay: f64, shapes: &[usize]) -> Self {
        AdamW {
            learning_rate: T::of(learning_rate),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            weight_decay: T::of(weight_decay),
            step: 0,
            first: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            second: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    /// `params[k]` and `grads[k]` must have the shape registered at
    /// construction.
    pub fn step(&mut self, params: Vec<&mut Vec<T>>, grads: Vec<&Vec<T>>) {
        self.step += 1;
        let bias1 = T::one() - self.beta1.powi(self.step);
        let bias2 = T::one() - self.beta2.powi(self.step);
        for (k, (param, grad)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.first[k], &mut self.second[k]);
            for i in 0..param.len() {
                let g = grad[i];
                let p = &mut param[i];
                *p -= self.learning_rate * self.weight_decay * *p;
                m[i] = self.beta1 * m[i] + (T::one() - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (T::one() - self.beta2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

pub fn sigmoid<T: Real>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

/// Numerically stable softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn cosine<T: Real>(a: &[T], b: &[T]) -> T {
    let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na: T = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let nb: T = b.iter().map(|&x| x * x).sum::<T>().sqrt();
    if na == T::zero() || nb == T::zero() {
        T::zero()
    } else {
        dot / (na * nb)
    }
}
