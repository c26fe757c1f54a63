use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::evaluate_labels;
use super::projection::SentenceInstance;
use crate::data::AppraisalLabel;
use crate::nn::{
    softmax, AdamW, Dense, DenseGrad, EncodeCache, EncoderGrad, EncoderSpec, EpochLog, HashedEncoder, TrainError, TrainingLog,
};
use crate::num::Real;
use crate::persist::{load_json, save_json, PersistError};
use crate::text::{segment_sentences, Sentence};

const K: usize = AppraisalLabel::MODEL_CLASSES.len();
pub const MODEL_FILE: &str = "appraisal_model.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelMode {
    /// Linear classification head over the sentence vector.
    #[serde(rename = "head-classifier")]
    HeadClassifier,
    /// The sentence is wrapped in a template and each class is scored by the
    /// similarity of the sentence vector to its verbalizer word embedding.
    #[serde(rename = "prompt-template")]
    PromptTemplate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppraisalModelConfig {
    pub encoder_id: String,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub mode: ModelMode,
    pub weight_decay: f64,
    /// Inverse-frequency class weights in the loss. Off by default.
    pub class_weighting: bool,
    /// Prompt-mode input; `{sentence}` is replaced by the sentence.
    pub template: String,
    pub verbalizers: BTreeMap<AppraisalLabel, String>,
}

pub fn default_verbalizers() -> BTreeMap<AppraisalLabel, String> {
    use AppraisalLabel::*;
    [
        (NoLabel, "nothing"),
        (Pleasantness, "feeling"),
        (AnticipatedEffort, "effort"),
        (Certainty, "certainty"),
        (ObjectiveExperience, "event"),
        (SelfOtherAgency, "responsibility"),
        (SituationalControl, "control"),
        (Advice, "advice"),
        (Trope, "sympathy"),
    ]
    .into_iter()
    .map(|(l, w)| (l, w.to_string()))
    .collect()
}

impl Default for AppraisalModelConfig {
    /// Settings tuned for the built-in hashed encoders, which train from
    /// scratch and need a far larger step size than a pre-trained encoder.
    fn default() -> Self {
        AppraisalModelConfig {
            encoder_id: "hash-embed-base".into(),
            learning_rate: 5e-3,
            batch_size: 16,
            max_epochs: 50,
            patience: 5,
            seed: 0,
            mode: ModelMode::HeadClassifier,
            weight_decay: 0.01,
            class_weighting: false,
            template: "{sentence} The appraisal expressed is [MASK].".into(),
            verbalizers: default_verbalizers(),
        }
    }
}

impl AppraisalModelConfig {
    /// Fine-tuning settings for a pre-trained encoder in prompt mode.
    pub fn published_prompt(encoder_id: &str) -> Self {
        AppraisalModelConfig {
            encoder_id: encoder_id.into(),
            learning_rate: 1e-7,
            patience: 20,
            max_epochs: 300,
            mode: ModelMode::PromptTemplate,
            ..Self::default()
        }
    }

    /// Fine-tuning settings for a pre-trained encoder with a classification head.
    pub fn published_head(encoder_id: &str) -> Self {
        AppraisalModelConfig {
            encoder_id: encoder_id.into(),
            learning_rate: 1e-6,
            patience: 20,
            max_epochs: 300,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<EncoderSpec, TrainError> {
        let spec = EncoderSpec::resolve(&self.encoder_id)?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(TrainError::Config("batch_size and max_epochs must be positive".into()));
        }
        if self.patience > self.max_epochs {
            return Err(TrainError::Config(format!("patience {} exceeds max_epochs {}", self.patience, self.max_epochs)));
        }
        if !(0.0..1.0).contains(&self.weight_decay) {
            return Err(TrainError::Config(format!("weight_decay {} outside [0, 1)", self.weight_decay)));
        }
        if self.mode == ModelMode::PromptTemplate {
            if !self.template.contains("{sentence}") {
                return Err(TrainError::Config("template lacks {sentence}".into()));
            }
            for label in AppraisalLabel::MODEL_CLASSES {
                if self.verbalizers.get(&label).is_none_or(|w| w.trim().is_empty()) {
                    return Err(TrainError::Config(format!("no verbalizer for {label}")));
                }
            }
        }
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub enum AppraisalHead<T> {
    Linear(Dense<T>),
    Verbalizer { token_ids: Vec<usize>, bias: Vec<T> },
}

/// Sentence-level appraisal classifier over the nine model classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AppraisalModel<T> {
    pub config: AppraisalModelConfig,
    pub encoder: HashedEncoder<T>,
    pub head: AppraisalHead<T>,
}

struct Grads<T> {
    encoder: EncoderGrad<T>,
    head: DenseGrad<T>,
}

/// One sentence's predicted label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentencePrediction {
    pub sentence: Sentence,
    pub label: AppraisalLabel,
    pub confidence: f64,
}

impl<T: Real> AppraisalModel<T> {
    /// Randomly initialized model.
    pub fn new(config: AppraisalModelConfig) -> Result<Self, TrainError> {
        let spec = config.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let encoder = HashedEncoder::new(spec, &mut rng);
        let head = match config.mode {
            ModelMode::HeadClassifier => AppraisalHead::Linear(Dense::new(encoder.dim(), K, &mut rng)),
            ModelMode::PromptTemplate => AppraisalHead::Verbalizer {
                token_ids: AppraisalLabel::MODEL_CLASSES
                    .iter()
                    .map(|l| encoder.bucket(&config.verbalizers[l].to_lowercase()))
                    .collect(),
                bias: vec![T::zero(); K],
            },
        };
        Ok(AppraisalModel { config, encoder, head })
    }

    fn input_text(&self, sentence: &str) -> String {
        match self.config.mode {
            ModelMode::HeadClassifier => sentence.to_string(),
            ModelMode::PromptTemplate => self.config.template.replace("{sentence}", sentence),
        }
    }

    fn forward(&self, sentence: &str) -> (EncodeCache<T>, Vec<T>) {
        let cache = self.encoder.forward(&self.input_text(sentence));
        let logits = match &self.head {
            AppraisalHead::Linear(dense) => dense.forward(&cache.output),
            AppraisalHead::Verbalizer { token_ids, bias } => token_ids
                .iter()
                .zip(bias)
                .map(|(&id, &b)| b + self.encoder.row(id).iter().zip(&cache.output).map(|(&e, &h)| e * h).sum::<T>())
                .collect(),
        };
        (cache, logits)
    }

    /// Class probabilities in [`AppraisalLabel::MODEL_CLASSES`] order.
    pub fn probabilities(&self, sentence: &str) -> Vec<T> {
        softmax(&self.forward(sentence).1)
    }

    /// Argmax class and its probability; ties go to the lower class index.
    pub fn predict_sentence(&self, sentence: &str) -> (AppraisalLabel, T) {
        let p = self.probabilities(sentence);
        let mut best = 0;
        for c in 1..K {
            if p[c] > p[best] {
                best = c;
            }
        }
        (AppraisalLabel::MODEL_CLASSES[best], p[best])
    }

    /// Adds this example's gradient (scaled by `scale`) and returns its loss.
    fn accumulate(&self, sentence: &str, class: usize, weight: T, scale: T, grads: &mut Grads<T>) -> T {
        let (cache, logits) = self.forward(sentence);
        let p = softmax(&logits);
        let loss = -weight * p[class].max(T::of(1e-12)).ln();
        let d_logits: Vec<T> =
            p.iter().enumerate().map(|(c, &pc)| scale * weight * (pc - if c == class { T::one() } else { T::zero() })).collect();
        let d_h = match &self.head {
            AppraisalHead::Linear(dense) => dense.backward(&cache.output, &d_logits, &mut grads.head),
            AppraisalHead::Verbalizer { token_ids, .. } => {
                let d = self.encoder.dim();
                let mut d_h = vec![T::zero(); d];
                for (c, &id) in token_ids.iter().enumerate() {
                    let g = d_logits[c];
                    grads.head.bias[c] += g;
                    let row = self.encoder.row(id);
                    let grow = &mut grads.encoder.embedding[id * d..(id + 1) * d];
                    for j in 0..d {
                        d_h[j] += g * row[j];
                        grow[j] += g * cache.output[j];
                    }
                }
                d_h
            }
        };
        self.encoder.backward(&cache, &d_h, &mut grads.encoder);
        loss
    }

    fn zero_grads(&self) -> Grads<T> {
        let head = match &self.head {
            AppraisalHead::Linear(dense) => dense.zero_grad(),
            AppraisalHead::Verbalizer { bias, .. } => DenseGrad { weight: Vec::new(), bias: vec![T::zero(); bias.len()] },
        };
        Grads { encoder: self.encoder.zero_grad(), head }
    }

    fn shapes(&self) -> Vec<usize> {
        let mut v = vec![self.encoder.embedding.len(), self.encoder.projection.weight.len(), self.encoder.projection.bias.len()];
        match &self.head {
            AppraisalHead::Linear(d) => v.extend([d.weight.len(), d.bias.len()]),
            AppraisalHead::Verbalizer { bias, .. } => v.push(bias.len()),
        }
        v
    }

    fn step(&mut self, opt: &mut AdamW<T>, grads: &Grads<T>) {
        let mut params =
            vec![&mut self.encoder.embedding, &mut self.encoder.projection.weight, &mut self.encoder.projection.bias];
        let mut gs = vec![&grads.encoder.embedding, &grads.encoder.projection.weight, &grads.encoder.projection.bias];
        match &mut self.head {
            AppraisalHead::Linear(d) => {
                params.push(&mut d.weight);
                params.push(&mut d.bias);
                gs.push(&grads.head.weight);
                gs.push(&grads.head.bias);
            }
            AppraisalHead::Verbalizer { bias, .. } => {
                params.push(bias);
                gs.push(&grads.head.bias);
            }
        }
        opt.step(params, gs);
    }

    /// Mean unweighted cross-entropy and macro-F1 on a labeled set.
    pub fn evaluate_loss(&self, data: &[SentenceInstance]) -> (f64, f64) {
        let mut loss = 0.0;
        let mut preds = Vec::with_capacity(data.len());
        for inst in data {
            let p = self.probabilities(&inst.text);
            let c = class_of(inst.gold_label);
            loss -= p[c].max(T::of(1e-12)).ln().as_f64();
            let mut best = 0;
            for k in 1..K {
                if p[k] > p[best] {
                    best = k;
                }
            }
            preds.push(AppraisalLabel::MODEL_CLASSES[best]);
        }
        let gold: Vec<_> = data.iter().map(|s| s.gold_label).collect();
        let f1 = evaluate_labels::<f64>(&preds, &gold).expect("equal lengths").macro_f1;
        (loss / data.len().max(1) as f64, f1)
    }

    pub fn save(&self, dir: &Path) -> Result<(), PersistError> {
        save_json(self, &dir.join(MODEL_FILE))
    }

    pub fn load(dir: &Path) -> Result<Self, PersistError> {
        load_json(&dir.join(MODEL_FILE))
    }
}

fn class_of(label: AppraisalLabel) -> usize {
    super::fold_label(label).model_class_index().expect("model class")
}

/// Trains with AdamW on cross-entropy, stopping when dev loss has not
/// improved for `patience` epochs. Returns the best-dev-loss checkpoint.
pub fn train_appraisal<T: Real>(
    train: &[SentenceInstance],
    dev: &[SentenceInstance],
    config: &AppraisalModelConfig,
) -> Result<(AppraisalModel<T>, TrainingLog), TrainError> {
    if train.is_empty() {
        return Err(TrainError::Empty("train"));
    }
    if dev.is_empty() {
        return Err(TrainError::Empty("dev"));
    }
    let mut model = AppraisalModel::<T>::new(config.clone())?;
    let classes: Vec<usize> = train.iter().map(|s| class_of(s.gold_label)).collect();
    let mut counts = [0usize; K];
    classes.iter().for_each(|&c| counts[c] += 1);
    let weights: Vec<T> = if config.class_weighting {
        let present = counts.iter().filter(|&&n| n > 0).count();
        counts.iter().map(|&n| if n == 0 { T::zero() } else { T::of(train.len() as f64 / (present * n) as f64) }).collect()
    } else {
        vec![T::one(); K]
    };

    let mut opt = AdamW::new(config.learning_rate, config.weight_decay, &model.shapes());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainingLog::default();
    let mut best: Option<(f64, AppraisalModel<T>)> = None;
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = model.zero_grads();
            let scale = T::one() / T::of_usize(batch.len());
            for &i in batch {
                total += model.accumulate(&train[i].text, classes[i], weights[classes[i]], scale, &mut grads).as_f64();
            }
            model.step(&mut opt, &grads);
        }
        let (dev_loss, dev_macro_f1) = model.evaluate_loss(dev);
        log.epochs.push(EpochLog { epoch, train_loss: total / train.len() as f64, dev_loss, dev_f1: dev_macro_f1 });
        log::debug!("epoch {epoch}: train {:.4} dev {dev_loss:.4} f1 {dev_macro_f1:.4}", total / train.len() as f64);

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

/// Segments `text` and labels each sentence.
pub fn predict_appraisals<T: Real>(text: &str, model: &AppraisalModel<T>) -> Vec<SentencePrediction> {
    segment_sentences(text)
        .into_iter()
        .map(|sentence| {
            let (label, confidence) = model.predict_sentence(&sentence.text);
            SentencePrediction { sentence, label, confidence: confidence.as_f64() }
        })
        .collect()
}
