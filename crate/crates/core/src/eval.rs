//! Attachment scores, k-fold cross-validation and the length/error analysis.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conllu::Edu;
use crate::error::{Error, Result};
use crate::graph::parser::BiaffineModel;
use crate::graph::Decoder;
use crate::model::{Architecture, Hyper, Model, TrainOptions};
use crate::transition::parser::TransitionModel;
use crate::treebank::HeadVector;

/// Correct and total head counts, pooled over all tokens.
pub fn uas_counts(gold: &[HeadVector], pred: &[HeadVector]) -> Result<(usize, usize)> {
    if gold.len() != pred.len() {
        return Err(Error::Eval(format!("{} gold EDUs but {} predictions", gold.len(), pred.len())));
    }
    let mut correct = 0;
    let mut total = 0;
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Eval(format!(
                "EDU {}: {} gold tokens but {} predicted",
                i + 1,
                g.len(),
                p.len()
            )));
        }
        correct += g.as_slice().iter().zip(p.as_slice()).filter(|(a, b)| a == b).count();
        total += g.len();
    }
    Ok((correct, total))
}

/// Micro-averaged unlabeled attachment score.
pub fn uas(gold: &[HeadVector], pred: &[HeadVector]) -> Result<f64> {
    let (correct, total) = uas_counts(gold, pred)?;
    if total == 0 {
        return Err(Error::Eval("no heads to score".into()));
    }
    Ok(correct as f64 / total as f64)
}

/// Gold heads of every EDU, failing on the first unannotated one.
pub fn gold_heads(edus: &[Edu]) -> Result<Vec<HeadVector>> {
    edus.iter()
        .enumerate()
        .map(|(i, e)| {
            e.heads()
                .ok_or_else(|| Error::Eval(format!("EDU {} has missing or invalid heads", i + 1)))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FoldSplit {
    pub fold_id: usize,
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles once, cuts `k` near-equal blocks and rotates them: fold `i`
/// tests on block `i`, develops on block `i+1 mod k` and trains on the rest.
pub fn kfold_split(n_edus: usize, k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if k < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 folds, got {}", k)));
    }
    if n_edus < k {
        return Err(Error::InvalidArgument(format!("{} EDUs cannot fill {} folds", n_edus, k)));
    }
    let mut order: Vec<usize> = (0..n_edus).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut blocks = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = n_edus / k + usize::from(i < n_edus % k);
        blocks.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok((0..k)
        .map(|i| {
            let dev_block = (i + 1) % k;
            let train = (0..k)
                .filter(|&b| b != i && b != dev_block)
                .flat_map(|b| blocks[b].iter().copied())
                .collect();
            FoldSplit {
                fold_id: i,
                train,
                dev: blocks[dev_block].clone(),
                test: blocks[i].clone(),
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LengthRow {
    pub length: usize,
    pub count: usize,
    pub mean_error_rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LengthAnalysis {
    pub per_length: Vec<LengthRow>,
    pub regression: Option<Regression>,
}

/// Ordinary least squares `y = slope·x + intercept`; `None` when all `x` coincide.
pub fn fit_line(points: &[(f64, f64)]) -> Option<Regression> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let var_x: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if var_x == 0.0 {
        return None;
    }
    let cov: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = cov / var_x;
    Some(Regression {
        slope,
        intercept: mean_y - slope * mean_x,
    })
}

/// Mean per-EDU error rate grouped by EDU length, and a line fitted
/// through the per-length means.
pub fn length_error_analysis(gold: &[HeadVector], pred: &[HeadVector]) -> Result<LengthAnalysis> {
    uas_counts(gold, pred)?;
    let mut groups: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        if g.is_empty() {
            continue;
        }
        let wrong = g.as_slice().iter().zip(p.as_slice()).filter(|(a, b)| a != b).count();
        let entry = groups.entry(g.len()).or_default();
        entry.0 += 1;
        entry.1 += wrong as f64 / g.len() as f64;
    }
    let per_length: Vec<LengthRow> = groups
        .into_iter()
        .map(|(length, (count, sum))| LengthRow {
            length,
            count,
            mean_error_rate: sum / count as f64,
        })
        .collect();
    let points: Vec<(f64, f64)> = per_length.iter().map(|r| (r.length as f64, r.mean_error_rate)).collect();
    Ok(LengthAnalysis {
        regression: fit_line(&points),
        per_length,
    })
}

/// `length,count,mean_error_rate` rows with a header.
pub fn length_table_csv(rows: &[LengthRow]) -> String {
    let mut out = String::from("length,count,mean_error_rate\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.length, r.count, r.mean_error_rate).expect("writing to a String");
    }
    out
}

/// Architecture, decoder and hyperparameters for one cross-validation run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    /// Graph decoder for the biaffine architecture; ignored otherwise.
    pub decoder: Option<Decoder>,
    pub hyper: Hyper,
}

impl ModelSpec {
    fn train(&self, train: &[Edu], dev: &[Edu], seed: u64) -> Result<(Model, usize, usize)> {
        let hyper = Hyper {
            seed,
            ..self.hyper.clone()
        };
        let options = TrainOptions {
            dev: Some(dev),
            target_dev_uas: None,
        };
        if self.architecture.is_transition() {
            let (m, r) = TransitionModel::train(train, self.architecture, &hyper, &options)?;
            Ok((Model::Transition(m), r.epochs_run, r.skipped))
        } else {
            let decoder = self.decoder.unwrap_or(Decoder::Mst);
            let (m, r) = BiaffineModel::train_with_decoder(train, &hyper, &options, decoder)?;
            Ok((Model::Graph(m), r.epochs_run, r.skipped))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold_id: usize,
    pub train_size: usize,
    pub dev_size: usize,
    pub test_size: usize,
    pub uas: Option<f64>,
    pub correct_heads: usize,
    pub total_heads: usize,
    pub epochs_run: usize,
    pub skipped_train: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub model: ModelSpec,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    /// UAS of every fold that trained successfully, in fold order.
    pub per_fold_uas: Vec<f64>,
    pub mean_uas: Option<f64>,
    pub correct_heads: usize,
    pub total_heads: usize,
    pub per_length: Vec<LengthRow>,
    pub regression: Option<Regression>,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let decoder = self.model.decoder.map(|d| format!("{:?}", d).to_lowercase());
        let _ = writeln!(
            out,
            "{}-fold cross-validation, architecture {}{}, seed {}",
            self.k,
            self.model.architecture,
            decoder.map(|d| format!(", decoder {}", d)).unwrap_or_default(),
            self.seed
        );
        let _ = writeln!(out, "{:>4}  {:>6}  {:>5}  {:>5}  {:>8}  {:>6}", "fold", "train", "dev", "test", "UAS", "epochs");
        for f in &self.folds {
            let score = match (&f.uas, &f.error) {
                (Some(u), _) => format!("{:.4}", u),
                (None, Some(_)) => "failed".into(),
                _ => "-".into(),
            };
            let _ = writeln!(
                out,
                "{:>4}  {:>6}  {:>5}  {:>5}  {:>8}  {:>6}",
                f.fold_id, f.train_size, f.dev_size, f.test_size, score, f.epochs_run
            );
            if let Some(e) = &f.error {
                let _ = writeln!(out, "      error: {}", e);
            }
        }
        match self.mean_uas {
            Some(m) => {
                let _ = writeln!(out, "mean UAS {:.4} ({} / {} heads)", m, self.correct_heads, self.total_heads);
            }
            None => {
                let _ = writeln!(out, "mean UAS unavailable: every fold failed");
            }
        }
        if let Some(r) = self.regression {
            let _ = writeln!(out, "error rate ~ {:.6} * length + {:.6}", r.slope, r.intercept);
        }
        out
    }
}

/// A fold's result with its `(gold, predicted)` test trees.
type FoldOutput = (FoldResult, Vec<(HeadVector, HeadVector)>);

fn run_fold(corpus: &[Edu], gold: &[HeadVector], split: &FoldSplit, spec: &ModelSpec, seed: u64) -> FoldOutput {
    let pick = |idx: &[usize]| idx.iter().map(|&i| corpus[i].clone()).collect::<Vec<_>>();
    let (train, dev, test) = (pick(&split.train), pick(&split.dev), pick(&split.test));
    let mut result = FoldResult {
        fold_id: split.fold_id,
        train_size: train.len(),
        dev_size: dev.len(),
        test_size: test.len(),
        uas: None,
        correct_heads: 0,
        total_heads: 0,
        epochs_run: 0,
        skipped_train: 0,
        error: None,
    };
    let outcome = spec.train(&train, &dev, seed.wrapping_add(split.fold_id as u64)).and_then(|(model, epochs, skipped)| {
        result.epochs_run = epochs;
        result.skipped_train = skipped;
        let pred: Vec<HeadVector> = test
            .iter()
            .map(|e| model.parse(e, spec.decoder))
            .collect::<Result<_>>()?;
        let test_gold: Vec<HeadVector> = split.test.iter().map(|&i| gold[i].clone()).collect();
        let (c, t) = uas_counts(&test_gold, &pred)?;
        Ok((c, t, test_gold.into_iter().zip(pred).collect::<Vec<_>>()))
    });
    match outcome {
        Ok((c, t, pairs)) => {
            result.correct_heads = c;
            result.total_heads = t;
            result.uas = Some(c as f64 / t as f64);
            (result, pairs)
        }
        Err(e) => {
            result.error = Some(e.to_string());
            (result, Vec::new())
        }
    }
}

/// Trains and tests one model per fold. Failed folds are recorded in the
/// report and excluded from the aggregates. `workers` bounds how many
/// folds train at once.
pub fn run_cv(corpus: &[Edu], spec: &ModelSpec, k: usize, seed: u64, workers: usize) -> Result<EvalReport> {
    spec.hyper.validate()?;
    let gold = gold_heads(corpus)?;
    let splits = kfold_split(corpus.len(), k, seed)?;
    let results: Mutex<Vec<Option<FoldOutput>>> = Mutex::new(vec![None; k]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, k) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= k {
                    break;
                }
                let r = run_fold(corpus, &gold, &splits[i], spec, spec.hyper.seed);
                results.lock().expect("fold results lock")[i] = Some(r);
            });
        }
    });
    let results: Vec<_> = results
        .into_inner()
        .expect("fold results lock")
        .into_iter()
        .map(|r| r.expect("every fold ran"))
        .collect();

    let mut folds = Vec::with_capacity(k);
    let mut pooled_gold = Vec::new();
    let mut pooled_pred = Vec::new();
    for (fold, pairs) in results {
        for (g, p) in pairs {
            pooled_gold.push(g);
            pooled_pred.push(p);
        }
        folds.push(fold);
    }
    let per_fold_uas: Vec<f64> = folds.iter().filter_map(|f| f.uas).collect();
    let mean_uas = (!per_fold_uas.is_empty()).then(|| per_fold_uas.iter().sum::<f64>() / per_fold_uas.len() as f64);
    let analysis = length_error_analysis(&pooled_gold, &pooled_pred)?;
    Ok(EvalReport {
        model: spec.clone(),
        k,
        seed,
        correct_heads: folds.iter().map(|f| f.correct_heads).sum(),
        total_heads: folds.iter().map(|f| f.total_heads).sum(),
        folds,
        per_fold_uas,
        mean_uas,
        per_length: analysis.per_length,
        regression: analysis.regression,
    })
}
