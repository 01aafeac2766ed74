//! Neural transition classifiers.
//!
//! Both architectures look at the same four positions: the top three stack
//! elements `s2, s1, s0` and the buffer front `b0`. A missing position is
//! filled with a learned NULL vector.
//!
//! * EDP runs a single LSTM layer over the four word+POS embeddings and
//!   classifies its final hidden state with a linear layer.
//! * Improved EDP encodes the whole EDU once with a Bi-LSTM, concatenates
//!   the four encodings and classifies them with an MLP.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{apply_in_place, derive_sequence, Configuration, Transition};
use crate::conllu::Edu;
use crate::error::{Error, Result};
use crate::model::{train_loop, Architecture, Hyper, TrainOptions, Trainable, TrainingReport};
use crate::neural::lstm::{BiLstmTrace, LstmTrace};
use crate::neural::params::join;
use crate::neural::tensor::axpy;
use crate::neural::{
    softmax_cross_entropy, BiLstm, EmbeddingTables, Linear, LstmParams, LstmState, Mlp, Params, Tensor,
    Vocabularies,
};
use crate::treebank::HeadVector;

const N_SLOTS: usize = 4;
const N_TRANSITIONS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TransitionEncoder {
    Edp {
        null: Tensor,
        lstm: LstmParams,
        output: Linear,
    },
    ImprovedEdp {
        bilstm: BiLstm,
        null: Tensor,
        mlp: Mlp,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionWeights {
    pub embeddings: EmbeddingTables,
    pub encoder: TransitionEncoder,
}

impl Params for TransitionWeights {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.embeddings.visit(&join(prefix, "embeddings"), f);
        match &self.encoder {
            TransitionEncoder::Edp { null, lstm, output } => {
                f(join(prefix, "null"), null);
                lstm.visit(&join(prefix, "lstm"), f);
                output.visit(&join(prefix, "output"), f);
            }
            TransitionEncoder::ImprovedEdp { bilstm, null, mlp } => {
                bilstm.visit(&join(prefix, "bilstm"), f);
                f(join(prefix, "null"), null);
                mlp.visit(&join(prefix, "mlp"), f);
            }
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor)) {
        self.embeddings.visit_mut(f);
        match &mut self.encoder {
            TransitionEncoder::Edp { null, lstm, output } => {
                f(null);
                lstm.visit_mut(f);
                output.visit_mut(f);
            }
            TransitionEncoder::ImprovedEdp { bilstm, null, mlp } => {
                bilstm.visit_mut(f);
                f(null);
                mlp.visit_mut(f);
            }
        }
    }
}

/// Positions `[s2, s1, s0, b0]`; `None` where the slot is empty.
pub fn feature_slots(c: &Configuration) -> [Option<usize>; N_SLOTS] {
    [c.stack_from_top(2), c.stack_from_top(1), c.stack_from_top(0), c.buffer_front()]
}

/// An EDU ready for training: vocabulary indices and the oracle derivation.
#[derive(Clone, Debug)]
pub struct TransitionExample {
    pub indices: Vec<(usize, usize)>,
    pub derivation: Vec<(Configuration, Transition)>,
}

/// Per-EDU state shared by all configurations: the Bi-LSTM encodings for
/// Improved EDP, nothing for EDP.
enum Context {
    Edp,
    Improved { encodings: Vec<Vec<f64>>, trace: BiLstmTrace },
}

enum StepCache {
    Edp { trace: LstmTrace, last: Vec<f64> },
    Improved { mlp: crate::neural::layers::MlpCache },
}

impl TransitionWeights {
    pub fn new(arch: Architecture, vocab: &Vocabularies, hyper: &Hyper, rng: &mut ChaCha8Rng) -> Self {
        let s = hyper.init_scale;
        let embeddings = EmbeddingTables::new(vocab, hyper.word_dim, hyper.pos_dim, s, rng);
        let dim = embeddings.dim();
        let h = hyper.hidden_dim;
        let encoder = match arch {
            Architecture::Edp => {
                let null = Tensor::uniform(&[dim], s, rng);
                let lstm = LstmParams::new(dim, h, s, rng);
                let output = Linear::new(h, N_TRANSITIONS, s, rng);
                TransitionEncoder::Edp { null, lstm, output }
            }
            Architecture::ImprovedEdp => {
                let bilstm = BiLstm::new(dim, h, s, rng);
                let null = Tensor::uniform(&[2 * h], s, rng);
                let mlp = Mlp::new(N_SLOTS * 2 * h, hyper.mlp_hidden, N_TRANSITIONS, s, rng);
                TransitionEncoder::ImprovedEdp { bilstm, null, mlp }
            }
            Architecture::DeepBiaffine => unreachable!("not a transition architecture"),
        };
        TransitionWeights { embeddings, encoder }
    }

    fn context(&self, indices: &[(usize, usize)]) -> Result<Context> {
        match &self.encoder {
            TransitionEncoder::Edp { .. } => Ok(Context::Edp),
            TransitionEncoder::ImprovedEdp { bilstm, .. } => {
                let inputs: Vec<Vec<f64>> = indices.iter().map(|&ix| self.embeddings.lookup(ix)).collect();
                let (encodings, trace) = bilstm.run(&inputs)?;
                Ok(Context::Improved { encodings, trace })
            }
        }
    }

    /// Feature vector for one configuration.
    fn features(&self, ctx: &Context, indices: &[(usize, usize)], c: &Configuration) -> Result<(Vec<f64>, Option<LstmTrace>)> {
        let slots = feature_slots(c);
        match (&self.encoder, ctx) {
            (TransitionEncoder::Edp { null, lstm, .. }, Context::Edp) => {
                let seq: Vec<Vec<f64>> = slots
                    .iter()
                    .map(|s| s.map_or_else(|| null.values().to_vec(), |i| self.embeddings.lookup(indices[i])))
                    .collect();
                let (mut out, trace) = lstm.forward(&seq, &LstmState::zeros(lstm.hidden_size()))?;
                Ok((out.pop().expect("four steps"), Some(trace)))
            }
            (TransitionEncoder::ImprovedEdp { null, .. }, Context::Improved { encodings, .. }) => {
                let mut v = Vec::with_capacity(N_SLOTS * null.len());
                for s in slots {
                    v.extend_from_slice(s.map_or(null.values(), |i| &encodings[i]));
                }
                Ok((v, None))
            }
            _ => unreachable!("context built from the same encoder"),
        }
    }

    fn logits(&self, ctx: &Context, indices: &[(usize, usize)], c: &Configuration) -> Result<(Vec<f64>, StepCache)> {
        let (feat, trace) = self.features(ctx, indices, c)?;
        match &self.encoder {
            TransitionEncoder::Edp { output, .. } => Ok((
                output.forward(&feat),
                StepCache::Edp {
                    trace: trace.expect("EDP features carry a trace"),
                    last: feat,
                },
            )),
            TransitionEncoder::ImprovedEdp { mlp, .. } => {
                let (y, cache) = mlp.forward(&feat);
                Ok((y, StepCache::Improved { mlp: cache }))
            }
        }
    }

    /// Summed transition cross-entropy over an oracle derivation.
    pub fn loss_and_grad(&self, example: &TransitionExample) -> Result<(f64, TransitionWeights)> {
        let indices = &example.indices;
        let ctx = self.context(indices)?;
        let mut grad = self.zeros_like();
        let mut d_encodings = match &ctx {
            Context::Improved { encodings, .. } => vec![vec![0.0; encodings[0].len()]; encodings.len()],
            Context::Edp => Vec::new(),
        };
        let mut loss = 0.0;
        for (c, t) in &example.derivation {
            let (logits, cache) = self.logits(&ctx, indices, c)?;
            let (l, d_logits) = softmax_cross_entropy(&logits, t.index());
            loss += l;
            let slots = feature_slots(c);
            match (&self.encoder, &mut grad.encoder, cache) {
                (
                    TransitionEncoder::Edp { lstm, output, .. },
                    TransitionEncoder::Edp {
                        null: g_null,
                        lstm: g_lstm,
                        output: g_output,
                    },
                    StepCache::Edp { trace, last },
                ) => {
                    let d_last = output.backward(&last, &d_logits, g_output);
                    let mut d_out = vec![vec![0.0; d_last.len()]; N_SLOTS];
                    d_out[N_SLOTS - 1] = d_last;
                    let d_inputs = lstm.backward(&trace, &d_out, g_lstm);
                    for (slot, dx) in slots.iter().zip(&d_inputs) {
                        match slot {
                            Some(i) => self.embeddings.accumulate(indices[*i], dx, &mut grad.embeddings),
                            None => axpy(1.0, dx, g_null.values_mut()),
                        }
                    }
                }
                (
                    TransitionEncoder::ImprovedEdp { mlp, .. },
                    TransitionEncoder::ImprovedEdp {
                        null: g_null, mlp: g_mlp, ..
                    },
                    StepCache::Improved { mlp: cache },
                ) => {
                    let d_feat = mlp.backward(&cache, &d_logits, g_mlp);
                    let width = g_null.len();
                    for (k, slot) in slots.iter().enumerate() {
                        let part = &d_feat[k * width..(k + 1) * width];
                        match slot {
                            Some(i) => axpy(1.0, part, &mut d_encodings[*i]),
                            None => axpy(1.0, part, g_null.values_mut()),
                        }
                    }
                }
                _ => unreachable!("gradient mirrors weights"),
            }
        }
        if let (Context::Improved { trace, .. }, TransitionEncoder::ImprovedEdp { bilstm, .. }) = (&ctx, &self.encoder) {
            let TransitionEncoder::ImprovedEdp { bilstm: g_bilstm, .. } = &mut grad.encoder else {
                unreachable!("gradient mirrors weights")
            };
            let d_inputs = bilstm.backward_pass(trace, &d_encodings, g_bilstm);
            for (&ix, dx) in indices.iter().zip(&d_inputs) {
                self.embeddings.accumulate(ix, dx, &mut grad.embeddings);
            }
        }
        Ok((loss, grad))
    }

    /// Greedy decoding restricted to legal transitions.
    pub fn parse_indices(&self, indices: &[(usize, usize)]) -> Result<HeadVector> {
        let n = indices.len() - 1;
        let ctx = self.context(indices)?;
        let mut c = Configuration::initial(n);
        while !c.is_terminal() {
            let (logits, _) = self.logits(&ctx, indices, &c)?;
            let mut best: Option<Transition> = None;
            for t in Transition::ALL {
                if c.is_legal(t) && best.is_none_or(|b| logits[t.index()] > logits[b.index()]) {
                    best = Some(t);
                }
            }
            let t = best.expect("a non-terminal configuration has a legal transition");
            apply_in_place(&mut c, t)?;
        }
        Ok(c.heads().expect("terminal"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionModel {
    arch: Architecture,
    vocab: Vocabularies,
    hyper: Hyper,
    weights: TransitionWeights,
}

impl TransitionModel {
    /// Randomly initialized model; the generator is seeded from `hyper.seed`.
    pub fn new(arch: Architecture, vocab: Vocabularies, hyper: Hyper) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let weights = TransitionWeights::new(arch, &vocab, &hyper, &mut rng);
        TransitionModel {
            arch,
            vocab,
            hyper,
            weights,
        }
    }

    /// Trains on a corpus; non-projective EDUs are skipped and counted.
    pub fn train(
        corpus: &[Edu],
        arch: Architecture,
        hyper: &Hyper,
        options: &TrainOptions<'_>,
    ) -> Result<(TransitionModel, TrainingReport)> {
        if !arch.is_transition() {
            return Err(Error::InvalidArgument(format!("{} is not a transition architecture", arch)));
        }
        if corpus.is_empty() {
            return Err(Error::Training("empty training corpus".into()));
        }
        hyper.validate()?;
        let vocab = Vocabularies::build(corpus, hyper.min_word_count);
        let mut model = TransitionModel::new(arch, vocab, hyper.clone());
        let report = train_loop(&mut model, corpus, hyper, options)?;
        Ok((model, report))
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn hyper(&self) -> &Hyper {
        &self.hyper
    }

    pub fn vocab(&self) -> &Vocabularies {
        &self.vocab
    }

    pub fn weights(&self) -> &TransitionWeights {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut TransitionWeights {
        &mut self.weights
    }

    pub fn example(&self, edu: &Edu) -> Result<Option<TransitionExample>> {
        let gold = edu
            .heads()
            .ok_or_else(|| Error::Training("training EDU without gold heads".into()))?;
        Ok(derive_sequence(&gold)?.map(|derivation| TransitionExample {
            indices: self.vocab.index(edu),
            derivation,
        }))
    }

    /// Feature vector the classifier sees for configuration `c`.
    pub fn featurize(&self, c: &Configuration, edu: &Edu) -> Result<Vec<f64>> {
        let indices = self.vocab.index(edu);
        let ctx = self.weights.context(&indices)?;
        Ok(self.weights.features(&ctx, &indices, c)?.0)
    }

    /// Unnormalized transition scores, in [`Transition::ALL`] order.
    pub fn transition_scores(&self, c: &Configuration, edu: &Edu) -> Result<Vec<f64>> {
        let indices = self.vocab.index(edu);
        let ctx = self.weights.context(&indices)?;
        Ok(self.weights.logits(&ctx, &indices, c)?.0)
    }

    pub fn parse(&self, edu: &Edu) -> Result<HeadVector> {
        if edu.is_empty() {
            return Err(Error::InvalidArgument("cannot parse an empty EDU".into()));
        }
        self.weights.parse_indices(&self.vocab.index(edu))
    }
}

impl Trainable for TransitionModel {
    type Weights = TransitionWeights;
    type Example = TransitionExample;

    fn prepare(&self, edu: &Edu) -> Result<Option<TransitionExample>> {
        self.example(edu)
    }

    fn loss_and_grad(&self, weights: &TransitionWeights, example: &TransitionExample) -> Result<(f64, TransitionWeights)> {
        weights.loss_and_grad(example)
    }

    fn weights(&self) -> &TransitionWeights {
        &self.weights
    }

    fn weights_mut(&mut self) -> &mut TransitionWeights {
        &mut self.weights
    }

    fn parse_edu(&self, edu: &Edu) -> Result<HeadVector> {
        self.parse(edu)
    }
}

/// Trains an EDP or Improved EDP model for `hyper.epochs` epochs.
pub fn train_transition(corpus: &[Edu], arch: Architecture, hyper: &Hyper) -> Result<TransitionModel> {
    Ok(TransitionModel::train(corpus, arch, hyper, &TrainOptions::default())?.0)
}

/// Greedy legal-transition decoding.
pub fn parse_transition(edu: &Edu, model: &TransitionModel) -> Result<HeadVector> {
    model.parse(edu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::Token;
    use crate::neural::grad_check;

    fn edu(heads: &[usize]) -> Edu {
        let pos = ["NOUN", "VERB", "ADJ", "DET", "ADP"];
        Edu::new(
            vec![],
            heads
                .iter()
                .enumerate()
                .map(|(i, &h)| Token::new(i + 1, format!("w{}", i % 3), pos[i % pos.len()], Some(h)))
                .collect(),
        )
    }

    fn small_hyper() -> Hyper {
        Hyper {
            word_dim: 3,
            pos_dim: 2,
            hidden_dim: 4,
            mlp_hidden: 5,
            arc_dim: 3,
            min_word_count: 1,
            init_scale: 0.5,
            ..Hyper::default()
        }
    }

    #[test]
    fn improved_feature_slots_and_width() {
        let e = edu(&[2, 0]);
        let m = TransitionModel::new(Architecture::ImprovedEdp, Vocabularies::build(std::slice::from_ref(&e), 1), small_hyper());
        let c = Configuration::initial(2);
        let f = m.featurize(&c, &e).unwrap();
        assert_eq!(f.len(), 4 * 2 * 4);
        let TransitionEncoder::ImprovedEdp { bilstm, null, .. } = &m.weights.encoder else { panic!() };
        let inputs: Vec<Vec<f64>> = m.vocab.index(&e).iter().map(|&ix| m.weights.embeddings.lookup(ix)).collect();
        let enc = bilstm.run(&inputs).unwrap().0;
        let expected: Vec<f64> = [null.values(), null.values(), &enc[0], &enc[1]].concat();
        assert_eq!(f, expected);

        let terminal = super::super::replay(2, [Transition::Shift, Transition::Shift, Transition::LeftArc, Transition::RightArc]).unwrap();
        let f = m.featurize(&terminal, &e).unwrap();
        let expected: Vec<f64> = [null.values(), null.values(), &enc[0], null.values()].concat();
        assert_eq!(f, expected);
    }

    #[test]
    fn edp_feature_is_lstm_state() {
        let e = edu(&[2, 0]);
        let m = TransitionModel::new(Architecture::Edp, Vocabularies::build(std::slice::from_ref(&e), 1), small_hyper());
        let f = m.featurize(&Configuration::initial(2), &e).unwrap();
        assert_eq!(f.len(), 4);
    }

    #[test]
    fn single_token_always_root() {
        let e = edu(&[0]);
        for arch in [Architecture::Edp, Architecture::ImprovedEdp] {
            let m = TransitionModel::new(arch, Vocabularies::build(std::slice::from_ref(&e), 1), small_hyper());
            assert_eq!(m.parse(&e).unwrap().as_slice(), &[0]);
        }
    }

    #[test]
    fn untrained_parses_are_projective_trees() {
        let e = edu(&[2, 0, 2, 3, 2, 5, 2]);
        for arch in [Architecture::Edp, Architecture::ImprovedEdp] {
            for seed in 0..5 {
                let hyper = Hyper { seed, ..small_hyper() };
                let m = TransitionModel::new(arch, Vocabularies::build(std::slice::from_ref(&e), 1), hyper);
                let h = m.parse(&e).unwrap();
                assert!(h.is_tree());
                assert!(h.is_projective().unwrap());
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let e = edu(&[2, 0, 4, 2, 2]);
        for arch in [Architecture::Edp, Architecture::ImprovedEdp] {
            let m = TransitionModel::new(arch, Vocabularies::build(std::slice::from_ref(&e), 1), small_hyper());
            let ex = m.example(&e).unwrap().unwrap();
            let report = grad_check(&m.weights, |w| w.loss_and_grad(&ex)).unwrap();
            assert!(report.max_relative_error <= 1e-3, "{:?}: {:?}", arch, report);
        }
    }

    #[test]
    fn training_rejects_unusable_corpora() {
        let nonproj = edu(&[3, 0, 4, 2]);
        let err = train_transition(&[nonproj], Architecture::Edp, &small_hyper()).unwrap_err();
        assert!(matches!(err, Error::Training(_)));
        assert!(train_transition(&[], Architecture::Edp, &small_hyper()).is_err());
    }

    #[test]
    fn overfits_one_edu() {
        let e = edu(&[2, 0]);
        for arch in [Architecture::Edp, Architecture::ImprovedEdp] {
            let hyper = Hyper {
                epochs: 50,
                adam: crate::neural::AdamConfig {
                    learning_rate: 0.01,
                    ..Default::default()
                },
                ..small_hyper()
            };
            let (m, report) = TransitionModel::train(std::slice::from_ref(&e), arch, &hyper, &TrainOptions::default()).unwrap();
            assert_eq!(report.epochs_run, 50);
            assert_eq!(m.parse(&e).unwrap().as_slice(), &[2, 0]);
            let again = train_transition(std::slice::from_ref(&e), arch, &hyper).unwrap();
            assert_eq!(m, again);
        }
    }
}
