use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::evaluate_alignment;
use super::pairs::SpanPairInstance;
use crate::nn::{sigmoid, AdamW, Dense, DenseGrad, EncoderGrad, EncoderSpec, EpochLog, HashedEncoder, TrainError, TrainingLog};
use crate::num::Real;
use crate::persist::{load_json, save_json, PersistError};

pub const MODEL_FILE: &str = "alignment_model.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignmentModelConfig {
    pub encoder_id: String,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Scores at or above this are predicted aligned.
    pub decision_threshold: f64,
    pub neg_ratio: usize,
    pub seed: u64,
    pub hidden: usize,
    pub weight_decay: f64,
}

impl Default for AlignmentModelConfig {
    fn default() -> Self {
        AlignmentModelConfig {
            encoder_id: "hash-embed-base".into(),
            learning_rate: 2e-3,
            batch_size: 16,
            max_epochs: 300,
            patience: 15,
            decision_threshold: 0.3,
            neg_ratio: 11,
            seed: 0,
            hidden: 256,
            weight_decay: 0.01,
        }
    }
}

impl AlignmentModelConfig {
    pub fn check(&self) -> Result<EncoderSpec, TrainError> {
        let spec = EncoderSpec::resolve(&self.encoder_id)?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.hidden == 0 {
            return Err(TrainError::Config("batch_size, max_epochs and hidden must be positive".into()));
        }
        if self.patience > self.max_epochs {
            return Err(TrainError::Config(format!("patience {} exceeds max_epochs {}", self.patience, self.max_epochs)));
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return Err(TrainError::Config(format!("decision_threshold {} outside (0, 1)", self.decision_threshold)));
        }
        if self.neg_ratio == 0 {
            return Err(TrainError::Config("neg_ratio must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.weight_decay) {
            return Err(TrainError::Config(format!("weight_decay {} outside [0, 1)", self.weight_decay)));
        }
        Ok(spec)
    }
}

/// Twin encoder with shared weights; `[u; v; |u-v|; u*v]` feeds one ReLU
/// hidden layer and a sigmoid output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AlignmentModel<T> {
    pub config: AlignmentModelConfig,
    pub encoder: HashedEncoder<T>,
    pub hidden: Dense<T>,
    pub output: Dense<T>,
}

struct Grads<T> {
    encoder: EncoderGrad<T>,
    hidden: DenseGrad<T>,
    output: DenseGrad<T>,
}

fn combine<T: Real>(u: &[T], v: &[T]) -> Vec<T> {
    let mut f = Vec::with_capacity(4 * u.len());
    f.extend_from_slice(u);
    f.extend_from_slice(v);
    f.extend(u.iter().zip(v).map(|(&a, &b)| (a - b).abs()));
    f.extend(u.iter().zip(v).map(|(&a, &b)| a * b));
    f
}

impl<T: Real> AlignmentModel<T> {
    pub fn new(config: AlignmentModelConfig) -> Result<Self, TrainError> {
        let spec = config.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let encoder = HashedEncoder::new(spec, &mut rng);
        let hidden = Dense::new(4 * encoder.dim(), config.hidden, &mut rng);
        let output = Dense::new(config.hidden, 1, &mut rng);
        Ok(AlignmentModel { config, encoder, hidden, output })
    }

    /// Probability that the Observer span aligns to the Target span.
    pub fn score(&self, target_text: &str, observer_text: &str) -> T {
        let f = combine(&self.encoder.encode(target_text), &self.encoder.encode(observer_text));
        let h: Vec<T> = self.hidden.forward(&f).into_iter().map(|z| z.max(T::zero())).collect();
        sigmoid(self.output.forward(&h)[0])
    }

    fn accumulate(&self, pair: &SpanPairInstance, scale: T, grads: &mut Grads<T>) -> T {
        let cu = self.encoder.forward(&pair.target_span.text);
        let cv = self.encoder.forward(&pair.observer_span.text);
        let (u, v) = (&cu.output, &cv.output);
        let f = combine(u, v);
        let pre = self.hidden.forward(&f);
        let h: Vec<T> = pre.iter().map(|&z| z.max(T::zero())).collect();
        let p = sigmoid(self.output.forward(&h)[0]);
        let y = if pair.is_aligned { T::one() } else { T::zero() };
        let loss = (p - y) * (p - y);

        let dz = scale * (T::one() + T::one()) * (p - y) * p * (T::one() - p);
        let mut dh = self.output.backward(&h, &[dz], &mut grads.output);
        for (g, &z) in dh.iter_mut().zip(&pre) {
            if z <= T::zero() {
                *g = T::zero();
            }
        }
        let df = self.hidden.backward(&f, &dh, &mut grads.hidden);
        let d = u.len();
        let mut du = vec![T::zero(); d];
        let mut dv = vec![T::zero(); d];
        for j in 0..d {
            let sign = if u[j] > v[j] {
                T::one()
            } else if u[j] < v[j] {
                -T::one()
            } else {
                T::zero()
            };
            du[j] = df[j] + df[2 * d + j] * sign + df[3 * d + j] * v[j];
            dv[j] = df[d + j] - df[2 * d + j] * sign + df[3 * d + j] * u[j];
        }
        self.encoder.backward(&cu, &du, &mut grads.encoder);
        self.encoder.backward(&cv, &dv, &mut grads.encoder);
        loss
    }

    fn zero_grads(&self) -> Grads<T> {
        Grads { encoder: self.encoder.zero_grad(), hidden: self.hidden.zero_grad(), output: self.output.zero_grad() }
    }

    fn shapes(&self) -> Vec<usize> {
        vec![
            self.encoder.embedding.len(),
            self.encoder.projection.weight.len(),
            self.encoder.projection.bias.len(),
            self.hidden.weight.len(),
            self.hidden.bias.len(),
            self.output.weight.len(),
            self.output.bias.len(),
        ]
    }

    fn step(&mut self, opt: &mut AdamW<T>, g: &Grads<T>) {
        opt.step(
            vec![
                &mut self.encoder.embedding,
                &mut self.encoder.projection.weight,
                &mut self.encoder.projection.bias,
                &mut self.hidden.weight,
                &mut self.hidden.bias,
                &mut self.output.weight,
                &mut self.output.bias,
            ],
            vec![
                &g.encoder.embedding,
                &g.encoder.projection.weight,
                &g.encoder.projection.bias,
                &g.hidden.weight,
                &g.hidden.bias,
                &g.output.weight,
                &g.output.bias,
            ],
        );
    }

    /// Mean squared error and binary F1 at the configured threshold.
    pub fn evaluate_loss(&self, data: &[SpanPairInstance]) -> (f64, f64) {
        let mut loss = 0.0;
        let mut preds = Vec::with_capacity(data.len());
        for pair in data {
            let p = self.score(&pair.target_span.text, &pair.observer_span.text).as_f64();
            let y = if pair.is_aligned { 1.0 } else { 0.0 };
            loss += (p - y) * (p - y);
            preds.push(p >= self.config.decision_threshold);
        }
        let gold: Vec<bool> = data.iter().map(|p| p.is_aligned).collect();
        let f1 = evaluate_alignment::<f64>(&preds, &gold).expect("equal lengths").f1;
        (loss / data.len().max(1) as f64, f1)
    }

    pub fn save(&self, dir: &Path) -> Result<(), PersistError> {
        save_json(self, &dir.join(MODEL_FILE))
    }

    pub fn load(dir: &Path) -> Result<Self, PersistError> {
        load_json(&dir.join(MODEL_FILE))
    }
}

/// `(probability, probability >= threshold)`.
pub fn score_pair<T: Real>(target_text: &str, observer_text: &str, model: &AlignmentModel<T>, threshold: f64) -> (f64, bool) {
    let p = model.score(target_text, observer_text).as_f64();
    (p, p >= threshold)
}

/// Trains on mean squared error with AdamW, early stopping on dev loss.
pub fn train_alignment<T: Real>(
    train: &[SpanPairInstance],
    dev: &[SpanPairInstance],
    config: &AlignmentModelConfig,
) -> Result<(AlignmentModel<T>, TrainingLog), TrainError> {
    if train.is_empty() {
        return Err(TrainError::Empty("train"));
    }
    if dev.is_empty() {
        return Err(TrainError::Empty("dev"));
    }
    let positives = train.iter().filter(|p| p.is_aligned).count();
    if positives == 0 {
        return Err(TrainError::OneClass("no aligned pairs".into()));
    }
    if positives == train.len() {
        return Err(TrainError::OneClass("no unaligned pairs".into()));
    }
    let mut model = AlignmentModel::<T>::new(config.clone())?;
    let mut opt = AdamW::new(config.learning_rate, config.weight_decay, &model.shapes());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainingLog::default();
    let mut best: Option<(f64, AlignmentModel<T>)> = None;
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = model.zero_grads();
            let scale = T::one() / T::of_usize(batch.len());
            for &i in batch {
                total += model.accumulate(&train[i], scale, &mut grads).as_f64();
            }
            model.step(&mut opt, &grads);
        }
        let (dev_loss, dev_f1) = model.evaluate_loss(dev);
        let train_loss = total / train.len() as f64;
        log::debug!("epoch {epoch}: train {train_loss:.4} dev {dev_loss:.4} f1 {dev_f1:.4}");
        log.epochs.push(EpochLog { epoch, train_loss, dev_loss, dev_f1 });

        if best.as_ref().is_none_or(|(b, _)| dev_loss < *b) {
            best = Some((dev_loss, model.clone()));
            log.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    let (_, model) = best.expect("at least one epoch");
    Ok((model, log))
}
