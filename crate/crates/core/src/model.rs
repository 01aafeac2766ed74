//! Hyperparameters, the shared training loop and checkpoint files.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conllu::Edu;
use crate::error::{Error, Result};
use crate::eval::uas;
use crate::graph::parser::BiaffineModel;
use crate::graph::Decoder;
use crate::neural::{adam_step, AdamConfig, AdamState, Params, Tensor, Vocabularies};
use crate::transition::parser::TransitionModel;
use crate::treebank::HeadVector;

pub const CHECKPOINT_MAGIC: &str = "EDUDEP-CHECKPOINT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "EDP")]
    Edp,
    #[serde(rename = "IMPROVED_EDP")]
    ImprovedEdp,
    #[serde(rename = "DEEP_BIAFFINE")]
    DeepBiaffine,
}

impl Architecture {
    pub fn is_transition(self) -> bool {
        !matches!(self, Architecture::DeepBiaffine)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::Edp => "edp",
            Architecture::ImprovedEdp => "improved-edp",
            Architecture::DeepBiaffine => "biaffine",
        })
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edp" => Ok(Architecture::Edp),
            "improved-edp" => Ok(Architecture::ImprovedEdp),
            "biaffine" => Ok(Architecture::DeepBiaffine),
            other => Err(Error::InvalidArgument(format!("unknown architecture {:?}", other))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub word_dim: usize,
    pub pos_dim: usize,
    pub hidden_dim: usize,
    pub arc_dim: usize,
    pub mlp_hidden: usize,
    pub adam: AdamConfig,
    /// Maximum number of epochs.
    pub epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub min_word_count: usize,
    pub init_scale: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            word_dim: 64,
            pos_dim: 32,
            hidden_dim: 128,
            arc_dim: 128,
            mlp_hidden: 128,
            adam: AdamConfig::default(),
            epochs: 200,
            patience: 10,
            seed: 0,
            min_word_count: 2,
            init_scale: 0.1,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("word_dim", self.word_dim),
            ("pos_dim", self.pos_dim),
            ("hidden_dim", self.hidden_dim),
            ("arc_dim", self.arc_dim),
            ("mlp_hidden", self.mlp_hidden),
            ("epochs", self.epochs),
            ("patience", self.patience),
            ("min_word_count", self.min_word_count),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{} must be positive", name)));
        }
        let a = &self.adam;
        let positive = [a.learning_rate, a.epsilon, self.init_scale];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0))
            || !(0.0..1.0).contains(&a.beta1)
            || !(0.0..1.0).contains(&a.beta2)
        {
            return Err(Error::InvalidArgument("invalid optimizer or initialization setting".into()));
        }
        Ok(())
    }
}

/// A trainable parser: weights plus everything needed to turn an EDU into
/// a loss and a parse.
pub(crate) trait Trainable: Clone {
    type Weights: Params;
    type Example;

    /// `Ok(None)` marks an EDU the model cannot learn from.
    fn prepare(&self, edu: &Edu) -> Result<Option<Self::Example>>;
    fn loss_and_grad(&self, weights: &Self::Weights, example: &Self::Example) -> Result<(f64, Self::Weights)>;
    fn weights(&self) -> &Self::Weights;
    fn weights_mut(&mut self) -> &mut Self::Weights;
    fn parse_edu(&self, edu: &Edu) -> Result<HeadVector>;
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions<'a> {
    /// Held-out EDUs for early stopping; without them every epoch runs.
    pub dev: Option<&'a [Edu]>,
    /// Stop as soon as dev UAS reaches this value.
    pub target_dev_uas: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainingReport {
    pub epochs_run: usize,
    pub skipped: usize,
    pub used: usize,
    pub epoch_losses: Vec<f64>,
    pub initial_loss: f64,
    /// Full-corpus loss evaluated after the first epoch's updates.
    pub loss_after_first_epoch: Option<f64>,
    pub best_epoch: Option<usize>,
    pub best_dev_uas: Option<f64>,
}

pub(crate) fn parse_all<M: Trainable>(model: &M, edus: &[Edu]) -> Result<Vec<HeadVector>> {
    edus.iter().map(|e| model.parse_edu(e)).collect()
}

/// Per-EDU Adam updates over shuffled epochs, keeping the weights with the
/// best dev UAS when a dev set is supplied.
pub(crate) fn train_loop<M: Trainable>(
    model: &mut M,
    corpus: &[Edu],
    hyper: &Hyper,
    options: &TrainOptions<'_>,
) -> Result<TrainingReport> {
    let mut examples = Vec::new();
    let mut skipped = 0;
    for edu in corpus {
        match model.prepare(edu)? {
            Some(ex) => examples.push(ex),
            None => skipped += 1,
        }
    }
    if examples.is_empty() {
        return Err(Error::Training(format!(
            "no usable EDUs ({} skipped of {})",
            skipped,
            corpus.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed.wrapping_add(1));
    let mut state = AdamState::new(model.weights(), hyper.adam);
    let mut initial_loss = 0.0;
    for ex in &examples {
        initial_loss += model.loss_and_grad(model.weights(), ex)?.0;
    }

    let mut report = TrainingReport {
        epochs_run: 0,
        skipped,
        used: examples.len(),
        epoch_losses: Vec::new(),
        initial_loss,
        loss_after_first_epoch: None,
        best_epoch: None,
        best_dev_uas: None,
    };
    let mut best_weights: Option<M::Weights> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let (loss, grad) = model.loss_and_grad(model.weights(), &examples[i])?;
            if !loss.is_finite() {
                return Err(Error::Training(format!("non-finite loss in epoch {}", epoch + 1)));
            }
            total += loss;
            adam_step(model.weights_mut(), &grad, &mut state)?;
        }
        report.epoch_losses.push(total);
        report.epochs_run = epoch + 1;
        if epoch == 0 {
            let mut after = 0.0;
            for ex in &examples {
                after += model.loss_and_grad(model.weights(), ex)?.0;
            }
            report.loss_after_first_epoch = Some(after);
        }

        if let Some(dev) = options.dev {
            let gold: Vec<HeadVector> = dev
                .iter()
                .map(|e| e.heads().ok_or_else(|| Error::Training("dev EDU without gold heads".into())))
                .collect::<Result<_>>()?;
            let dev_uas = uas(&gold, &parse_all(model, dev)?)?;
            if report.best_dev_uas.is_none_or(|b| dev_uas > b) {
                report.best_dev_uas = Some(dev_uas);
                report.best_epoch = Some(epoch + 1);
                best_weights = Some(model.weights().clone());
                since_best = 0;
            } else {
                since_best += 1;
            }
            if options.target_dev_uas.is_some_and(|t| dev_uas >= t) || since_best >= hyper.patience {
                break;
            }
        }
    }
    if let Some(w) = best_weights {
        *model.weights_mut() = w;
    }
    Ok(report)
}

/// Any trained parser.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Transition(TransitionModel),
    Graph(BiaffineModel),
}

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointBody {
    architecture: Architecture,
    hyper: Hyper,
    vocab: Vocabularies,
    tensors: Vec<NamedTensor>,
}

/// Copies stored tensors into `target`, requiring identical names and shapes.
fn load_tensors<P: Params>(target: &mut P, tensors: Vec<NamedTensor>) -> Result<()> {
    let expected: Vec<(String, Vec<usize>)> = target
        .named_tensors()
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    if expected.len() != tensors.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {}",
            expected.len(),
            tensors.len()
        )));
    }
    let mut loaded = Vec::with_capacity(tensors.len());
    for ((name, shape), t) in expected.iter().zip(tensors) {
        if *name != t.name || *shape != t.shape {
            return Err(Error::Checkpoint(format!(
                "tensor {} {:?} does not match expected {} {:?}",
                t.name, t.shape, name, shape
            )));
        }
        loaded.push(Tensor::from_vec(&t.shape, t.values)?);
    }
    let mut it = loaded.into_iter();
    target.visit_mut(&mut |t| *t = it.next().expect("counted above"));
    Ok(())
}

impl Model {
    pub fn train(arch: Architecture, corpus: &[Edu], hyper: &Hyper, options: &TrainOptions<'_>) -> Result<(Model, TrainingReport)> {
        hyper.validate()?;
        if arch.is_transition() {
            let (m, r) = TransitionModel::train(corpus, arch, hyper, options)?;
            Ok((Model::Transition(m), r))
        } else {
            let (m, r) = BiaffineModel::train(corpus, hyper, options)?;
            Ok((Model::Graph(m), r))
        }
    }

    /// Untrained model with freshly initialized weights.
    pub fn untrained(arch: Architecture, corpus: &[Edu], hyper: &Hyper) -> Model {
        let vocab = Vocabularies::build(corpus, hyper.min_word_count);
        if arch.is_transition() {
            Model::Transition(TransitionModel::new(arch, vocab, hyper.clone()))
        } else {
            Model::Graph(BiaffineModel::new(vocab, hyper.clone()))
        }
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            Model::Transition(m) => m.architecture(),
            Model::Graph(_) => Architecture::DeepBiaffine,
        }
    }

    pub fn hyper(&self) -> &Hyper {
        match self {
            Model::Transition(m) => m.hyper(),
            Model::Graph(m) => m.hyper(),
        }
    }

    /// Parses with the architecture's own decoder; graph models use `decoder`
    /// (MST when `None`).
    pub fn parse(&self, edu: &Edu, decoder: Option<Decoder>) -> Result<HeadVector> {
        match self {
            Model::Transition(m) => m.parse(edu),
            Model::Graph(m) => m.parse(edu, decoder.unwrap_or(Decoder::Mst)),
        }
    }

    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        let (vocab, tensors) = match self {
            Model::Transition(m) => (m.vocab(), m.weights().named_tensors()),
            Model::Graph(m) => (m.vocab(), m.weights().named_tensors()),
        };
        let body = CheckpointBody {
            architecture: self.architecture(),
            hyper: self.hyper().clone(),
            vocab: vocab.clone(),
            tensors: tensors
                .into_iter()
                .map(|(name, t)| NamedTensor {
                    name,
                    shape: t.shape().to_vec(),
                    values: t.values().to_vec(),
                })
                .collect(),
        };
        writeln!(out, "{}\t{}", CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        serde_json::to_writer(&mut out, &body)?;
        writeln!(out)?;
        Ok(())
    }

    pub fn load<R: BufRead>(mut input: R) -> Result<Model> {
        let mut header = String::new();
        input.read_line(&mut header)?;
        let expected = format!("{}\t{}", CHECKPOINT_MAGIC, CHECKPOINT_VERSION);
        if header.trim_end_matches('\n') != expected {
            return Err(Error::Checkpoint(format!("bad header {:?}", header.trim_end())));
        }
        let body: CheckpointBody =
            serde_json::from_reader(input).map_err(|e| Error::Checkpoint(e.to_string()))?;
        body.hyper.validate()?;
        match body.architecture {
            arch if arch.is_transition() => {
                let mut m = TransitionModel::new(arch, body.vocab, body.hyper);
                load_tensors(m.weights_mut(), body.tensors)?;
                Ok(Model::Transition(m))
            }
            _ => {
                let mut m = BiaffineModel::new(body.vocab, body.hyper);
                load_tensors(m.weights_mut(), body.tensors)?;
                Ok(Model::Graph(m))
            }
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.save(&mut buf)?;
        Ok(buf)
    }
}
