//! Bi-LSTM encoder + biaffine arc scorer, decoded by any graph decoder.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Decoder, ScoreMatrix};
use crate::conllu::Edu;
use crate::error::{Error, Result};
use crate::model::{train_loop, Hyper, TrainOptions, Trainable, TrainingReport};
use crate::neural::params::join;
use crate::neural::{head_cross_entropy, BiLstm, BiaffineParams, EmbeddingTables, Params, Tensor, Vocabularies};
use crate::treebank::HeadVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiaffineWeights {
    pub embeddings: EmbeddingTables,
    pub bilstm: BiLstm,
    pub scorer: BiaffineParams,
}

impl Params for BiaffineWeights {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.embeddings.visit(&join(prefix, "embeddings"), f);
        self.bilstm.visit(&join(prefix, "bilstm"), f);
        self.scorer.visit(&join(prefix, "scorer"), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor)) {
        self.embeddings.visit_mut(f);
        self.bilstm.visit_mut(f);
        self.scorer.visit_mut(f);
    }
}

#[derive(Clone, Debug)]
pub struct GraphExample {
    pub indices: Vec<(usize, usize)>,
    pub gold: HeadVector,
}

impl BiaffineWeights {
    pub fn new(vocab: &Vocabularies, hyper: &Hyper, rng: &mut ChaCha8Rng) -> Self {
        let s = hyper.init_scale;
        let embeddings = EmbeddingTables::new(vocab, hyper.word_dim, hyper.pos_dim, s, rng);
        let bilstm = BiLstm::new(embeddings.dim(), hyper.hidden_dim, s, rng);
        let scorer = BiaffineParams::new(bilstm.output_size(), hyper.mlp_hidden, hyper.arc_dim, s, rng);
        BiaffineWeights {
            embeddings,
            bilstm,
            scorer,
        }
    }

    pub fn scores(&self, indices: &[(usize, usize)]) -> Result<ScoreMatrix> {
        let inputs: Vec<Vec<f64>> = indices.iter().map(|&ix| self.embeddings.lookup(ix)).collect();
        let (enc, _) = self.bilstm.run(&inputs)?;
        Ok(self.scorer.forward(&enc)?.0)
    }

    pub fn loss_and_grad(&self, example: &GraphExample) -> Result<(f64, BiaffineWeights)> {
        let inputs: Vec<Vec<f64>> = example.indices.iter().map(|&ix| self.embeddings.lookup(ix)).collect();
        let (enc, trace) = self.bilstm.run(&inputs)?;
        let (scores, cache) = self.scorer.forward(&enc)?;
        let (loss, d_scores) = head_cross_entropy(&scores, &example.gold)?;
        let mut grad = self.zeros_like();
        let d_enc = self.scorer.backward(&cache, &d_scores, &mut grad.scorer);
        let d_inputs = self.bilstm.backward_pass(&trace, &d_enc, &mut grad.bilstm);
        for (&ix, dx) in example.indices.iter().zip(&d_inputs) {
            self.embeddings.accumulate(ix, dx, &mut grad.embeddings);
        }
        Ok((loss, grad))
    }
}

/// The deep biaffine parser. The graph decoder is chosen at parse time.
#[derive(Clone, Debug, PartialEq)]
pub struct BiaffineModel {
    vocab: Vocabularies,
    hyper: Hyper,
    weights: BiaffineWeights,
    /// Decoder used when measuring dev UAS during training.
    dev_decoder: Decoder,
}

impl BiaffineModel {
    pub fn new(vocab: Vocabularies, hyper: Hyper) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let weights = BiaffineWeights::new(&vocab, &hyper, &mut rng);
        BiaffineModel {
            vocab,
            hyper,
            weights,
            dev_decoder: Decoder::Mst,
        }
    }

    /// Trains with per-dependent head cross-entropy. Non-projective trees
    /// are usable here.
    pub fn train(corpus: &[Edu], hyper: &Hyper, options: &TrainOptions<'_>) -> Result<(BiaffineModel, TrainingReport)> {
        BiaffineModel::train_with_decoder(corpus, hyper, options, Decoder::Mst)
    }

    /// As [`BiaffineModel::train`], early-stopping on dev UAS under `decoder`.
    pub fn train_with_decoder(
        corpus: &[Edu],
        hyper: &Hyper,
        options: &TrainOptions<'_>,
        decoder: Decoder,
    ) -> Result<(BiaffineModel, TrainingReport)> {
        if corpus.is_empty() {
            return Err(Error::Training("empty training corpus".into()));
        }
        hyper.validate()?;
        let vocab = Vocabularies::build(corpus, hyper.min_word_count);
        let mut model = BiaffineModel::new(vocab, hyper.clone());
        model.dev_decoder = decoder;
        let report = train_loop(&mut model, corpus, hyper, options)?;
        Ok((model, report))
    }

    pub fn hyper(&self) -> &Hyper {
        &self.hyper
    }

    pub fn vocab(&self) -> &Vocabularies {
        &self.vocab
    }

    pub fn weights(&self) -> &BiaffineWeights {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut BiaffineWeights {
        &mut self.weights
    }

    pub fn example(&self, edu: &Edu) -> Result<GraphExample> {
        let gold = edu
            .heads()
            .ok_or_else(|| Error::Training("training EDU without gold heads".into()))?;
        Ok(GraphExample {
            indices: self.vocab.index(edu),
            gold,
        })
    }

    pub fn scores(&self, edu: &Edu) -> Result<ScoreMatrix> {
        if edu.is_empty() {
            return Err(Error::InvalidArgument("cannot score an empty EDU".into()));
        }
        self.weights.scores(&self.vocab.index(edu))
    }

    pub fn parse(&self, edu: &Edu, decoder: Decoder) -> Result<HeadVector> {
        Ok(decoder.decode(&self.scores(edu)?).heads)
    }
}

impl Trainable for BiaffineModel {
    type Weights = BiaffineWeights;
    type Example = GraphExample;

    fn prepare(&self, edu: &Edu) -> Result<Option<GraphExample>> {
        self.example(edu).map(Some)
    }

    fn loss_and_grad(&self, weights: &BiaffineWeights, example: &GraphExample) -> Result<(f64, BiaffineWeights)> {
        weights.loss_and_grad(example)
    }

    fn weights(&self) -> &BiaffineWeights {
        &self.weights
    }

    fn weights_mut(&mut self) -> &mut BiaffineWeights {
        &mut self.weights
    }

    fn parse_edu(&self, edu: &Edu) -> Result<HeadVector> {
        self.parse(edu, self.dev_decoder)
    }
}

/// Trains the deep biaffine model for `hyper.epochs` epochs.
pub fn train_biaffine(corpus: &[Edu], hyper: &Hyper) -> Result<BiaffineModel> {
    Ok(BiaffineModel::train(corpus, hyper, &TrainOptions::default())?.0)
}

/// Scores with the trained biaffine model and decodes with `decoder`.
pub fn parse_graph(edu: &Edu, model: &BiaffineModel, decoder: Decoder) -> Result<HeadVector> {
    model.parse(edu, decoder)
}
