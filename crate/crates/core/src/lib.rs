//! Dependency parsing toolkit for elementary discourse units (EDUs).
//!
//! CoNLL-U I/O, cleansing of raw EDUs, tree utilities, the arc-standard
//! transition system with two neural scorers, a deep biaffine graph parser
//! with Eisner, greedy and Chu-Liu-Edmonds decoding, and an evaluation
//! harness for k-fold cross-validation.

pub mod cli;
pub mod conllu;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod neural;
pub mod preprocess;
pub mod synth;
pub mod transition;
pub mod treebank;

pub use conllu::{parse_conllu, read_conllu, validate, write_conllu, Edu, Token, ValidationReport};
pub use error::{Error, Result};
pub use eval::{kfold_split, length_error_analysis, run_cv, uas, EvalReport, FoldSplit, LengthAnalysis, ModelSpec};
pub use graph::{DecodeResult, Decoder, ScoreMatrix};
pub use model::{Architecture, Hyper, Model, TrainOptions, TrainingReport};
pub use treebank::{enumerate_projective_trees, enumerate_trees, HeadVector};
