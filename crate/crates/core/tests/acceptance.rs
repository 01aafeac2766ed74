//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use edudep::conllu::{Edu, Token};
use edudep::eval::{fit_line, kfold_split, length_error_analysis, uas};
use edudep::graph::parser::BiaffineModel;
use edudep::graph::{cle_decode, eisner_decode, greedy_decode, Decoder, ScoreMatrix};
use edudep::model::{Architecture, Hyper, Model, TrainOptions};
use edudep::neural::{grad_check, AdamConfig, Vocabularies};
use edudep::synth::{random_tree, synthetic_corpus};
use edudep::transition::parser::TransitionModel;
use edudep::transition::{derive_gold_sequence, replay};
use edudep::treebank::{enumerate_projective_trees, enumerate_trees, HeadVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Best tree by brute force; among equal scores the lexicographically
/// smallest head vector wins.
fn brute_force(scores: &ScoreMatrix, trees: &[HeadVector]) -> (f64, HeadVector) {
    let mut best: Option<(f64, &HeadVector)> = None;
    for t in trees {
        let s = scores.tree_score(t.as_slice());
        match best {
            Some((b, bt)) if s < b || (s == b && t >= bt) => {}
            _ => best = Some((s, t)),
        }
    }
    let (s, t) = best.expect("at least one tree");
    (s, t.clone())
}

fn matrices(n: usize, count: usize, seed: u64) -> Vec<ScoreMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| ScoreMatrix::random(n, &mut rng)).collect()
}

fn eisner_optimality() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for n in 1..=7 {
        let trees = enumerate_projective_trees(n).unwrap();
        for (i, s) in matrices(n, 300, 100 + n as u64).iter().enumerate() {
            let (best, best_heads) = brute_force(s, &trees);
            let got = eisner_decode(s);
            if got.total_score != best || got.heads != best_heads {
                return outcome(
                    false,
                    format!("n={} matrix {}: eisner {} {} vs brute force {} {}", n, i, got.heads, got.total_score, best_heads, best),
                );
            }
            checked += 1;
        }
    }
    let t = start.elapsed();
    outcome(t < Duration::from_secs(30), format!("{} matrices, n=1..7, {:.2?}", checked, t))
}

fn cle_optimality() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    let mut heads_equal = 0;
    for n in 1..=6 {
        let trees = enumerate_trees(n).unwrap();
        for (i, s) in matrices(n, 300, 200 + n as u64).iter().enumerate() {
            let (best, best_heads) = brute_force(s, &trees);
            let got = cle_decode(s);
            if got.total_score != best || !got.is_tree {
                return outcome(false, format!("n={} matrix {}: cle {} vs brute force {}", n, i, got.total_score, best));
            }
            heads_equal += usize::from(got.heads == best_heads);
            checked += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        t < Duration::from_secs(60),
        format!("{} matrices, n=1..6, identical heads {}/{}, {:.2?}", checked, heads_equal, checked, t),
    )
}

fn dominance_chain() -> Outcome {
    let mut checked = 0;
    for n in 1..=7 {
        for seed in [100 + n as u64, 200 + n as u64, 300 + n as u64] {
            for (i, s) in matrices(n, 300, seed).iter().enumerate() {
                let g = greedy_decode(s).total_score;
                let c = cle_decode(s).total_score;
                let e = eisner_decode(s).total_score;
                if !(g >= c && c >= e) {
                    return outcome(false, format!("n={} seed {} matrix {}: greedy {} cle {} eisner {}", n, seed, i, g, c, e));
                }
                checked += 1;
            }
        }
    }
    outcome(true, format!("greedy >= cle >= eisner on {} matrices", checked))
}

fn edu_with_heads(heads: &[usize]) -> Edu {
    let tags = ["NOUN", "VERB", "DET", "ADJ", "ADP", "ADV"];
    Edu::new(
        vec![],
        heads
            .iter()
            .enumerate()
            .map(|(i, &h)| Token::new(i + 1, format!("word{}", i + 1), tags[i % tags.len()], Some(h)))
            .collect(),
    )
}

fn oracle_completeness() -> Outcome {
    let mut checked = 0;
    for n in 1..=6 {
        for tree in enumerate_projective_trees(n).unwrap() {
            let seq = match derive_gold_sequence(&edu_with_heads(tree.as_slice())) {
                Ok(Some(seq)) => seq,
                other => return outcome(false, format!("{}: no derivation ({:?})", tree, other.err())),
            };
            if seq.len() != 2 * n {
                return outcome(false, format!("{}: derivation of length {}", tree, seq.len()));
            }
            let end = replay(n, seq.into_iter().map(|(_, t)| t)).unwrap();
            if end.heads().as_ref() != Some(&tree) {
                return outcome(false, format!("{}: replay gives {:?}", tree, end.heads()));
            }
            checked += 1;
        }
    }
    outcome(true, format!("{} projective trees, n=1..6", checked))
}

fn grad_hyper(seed: u64) -> Hyper {
    // Weights of scale 0.5 keep every gradient well above the ~1e-10
    // resolution of central differences on a loss of magnitude ~10.
    Hyper {
        word_dim: 4,
        pos_dim: 3,
        hidden_dim: 5,
        arc_dim: 4,
        mlp_hidden: 5,
        min_word_count: 1,
        init_scale: 0.5,
        seed,
        ..Hyper::default()
    }
}

fn gradient_correctness() -> Outcome {
    let edu = edu_with_heads(&[2, 0, 4, 2, 2]);
    let corpus = [edu.clone()];
    let mut worst = [(0.0f64, 0usize); 3];
    for seed in 0..3 {
        let hyper = grad_hyper(seed);
        let vocab = Vocabularies::build(&corpus, hyper.min_word_count);
        let mut reports = Vec::new();
        for arch in [Architecture::Edp, Architecture::ImprovedEdp] {
            let m = TransitionModel::new(arch, vocab.clone(), hyper.clone());
            let ex = m.example(&edu).unwrap().expect("projective");
            reports.push(grad_check(m.weights(), |w| w.loss_and_grad(&ex)).unwrap());
        }
        let m = BiaffineModel::new(vocab, hyper);
        let ex = m.example(&edu).unwrap();
        reports.push(grad_check(m.weights(), |w| w.loss_and_grad(&ex)).unwrap());
        for (w, r) in worst.iter_mut().zip(&reports) {
            *w = (w.0.max(r.max_relative_error), r.checked);
        }
    }
    let pass = worst.iter().all(|w| w.0 <= 1e-3);
    let names = ["edp", "improved-edp", "biaffine"];
    let details: Vec<String> = names
        .iter()
        .zip(&worst)
        .map(|(n, (e, c))| format!("{} {:.2e} ({} parameters)", n, e, c))
        .collect();
    outcome(pass, format!("worst relative error over 3 seeds: {}", details.join(", ")))
}

fn uas_exactness() -> Outcome {
    let g = HeadVector::new(vec![2, 0, 2]).unwrap();
    let p = HeadVector::new(vec![2, 0, 1]).unwrap();
    let small = uas(&[g], &[p]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let corpus: Vec<HeadVector> = (0..100).map(|i| random_tree(1 + i % 24, &mut rng)).collect();
    let same = uas(&corpus, &corpus).unwrap();
    outcome(small == 2.0 / 3.0 && same == 1.0, format!("uas example {}, self-agreement {}", small, same))
}

fn fold_protocol() -> Outcome {
    let folds = kfold_split(1000, 10, 42).unwrap();
    let sizes_ok = folds.len() == 10
        && folds
            .iter()
            .all(|f| (f.train.len(), f.dev.len(), f.test.len()) == (800, 100, 100));
    let mut seen = vec![0; 1000];
    for f in &folds {
        for &i in &f.test {
            seen[i] += 1;
        }
    }
    let partition = seen.iter().all(|&c| c == 1);
    outcome(sizes_ok && partition, format!("10 folds of 800/100/100: {}, test sets partition: {}", sizes_ok, partition))
}

fn overfit_hyper() -> Hyper {
    Hyper {
        word_dim: 16,
        pos_dim: 16,
        hidden_dim: 32,
        arc_dim: 32,
        mlp_hidden: 32,
        epochs: 200,
        patience: 200,
        seed: 11,
        adam: AdamConfig {
            learning_rate: 5e-3,
            ..AdamConfig::default()
        },
        ..Hyper::default()
    }
}

fn corpus_uas(model: &Model, edus: &[Edu]) -> f64 {
    let gold: Vec<HeadVector> = edus.iter().map(|e| e.heads().unwrap()).collect();
    let pred: Vec<HeadVector> = edus.iter().map(|e| model.parse(e, Some(Decoder::Mst)).unwrap()).collect();
    uas(&gold, &pred).unwrap()
}

/// Trains all three architectures on the overfit corpus; reused by the
/// held-out comparison.
fn overfit(train: &[Edu]) -> (Outcome, Vec<(Architecture, Model)>) {
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    let mut models = Vec::new();
    for (arch, threshold) in [
        (Architecture::Edp, 0.85),
        (Architecture::ImprovedEdp, 0.95),
        (Architecture::DeepBiaffine, 0.95),
    ] {
        let options = TrainOptions {
            dev: Some(train),
            target_dev_uas: Some(threshold),
        };
        let t0 = Instant::now();
        let (model, report) = Model::train(arch, train, &overfit_hyper(), &options).unwrap();
        let score = corpus_uas(&model, train);
        pass &= score >= threshold;
        details.push(format!(
            "{} {:.4} (>= {}) in {} epochs, {:.1?}",
            arch,
            score,
            threshold,
            report.epochs_run,
            t0.elapsed()
        ));
        models.push((arch, model));
    }
    let t = start.elapsed();
    pass &= t < Duration::from_secs(300);
    (outcome(pass, format!("{}; total {:.1?}", details.join("; "), t)), models)
}

fn regression_exactness() -> Outcome {
    // 20 EDUs per length; the number of wrong heads is chosen so the
    // per-length mean error rate is 0.05 * length exactly
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for len in [2usize, 4, 6, 8] {
        let mut wrong_left = len * len;
        for _ in 0..20 {
            let g: Vec<usize> = (0..len).collect();
            let mut p = g.clone();
            for d in 1..=len {
                if wrong_left == 0 {
                    break;
                }
                p[d - 1] = (0..=len).find(|&h| h != g[d - 1] && h != d).unwrap();
                wrong_left -= 1;
            }
            gold.push(HeadVector::new(g).unwrap());
            pred.push(HeadVector::new(p).unwrap());
        }
    }
    let analysis = length_error_analysis(&gold, &pred).unwrap();
    let r = analysis.regression.unwrap();
    let points: Vec<(f64, f64)> = analysis.per_length.iter().map(|row| (row.length as f64, row.mean_error_rate)).collect();
    let (slope, intercept) = cramer(&points);
    let mut ok = (r.slope - slope).abs() <= 1e-9
        && (r.intercept - intercept).abs() <= 1e-9
        && (r.slope - 0.05).abs() <= 1e-9
        && r.intercept.abs() <= 1e-9;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        use rand::Rng;
        let pts: Vec<(f64, f64)> = (0..10).map(|_| (rng.gen_range(1..30) as f64, rng.gen_range(0.0..1.0))).collect();
        if let Some(fit) = fit_line(&pts) {
            let (s, i) = cramer(&pts);
            ok &= (fit.slope - s).abs() <= 1e-9 && (fit.intercept - i).abs() <= 1e-9;
        }
    }
    outcome(ok, format!("slope {} intercept {} (closed form {} {})", r.slope, r.intercept, slope, intercept))
}

/// Least squares through the normal equations solved by Cramer's rule.
fn cramer(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let det = n * sxx - sx * sx;
    ((n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
}

fn beats_untrained(train: &[Edu], models: &[(Architecture, Model)]) -> Outcome {
    let held_out = synthetic_corpus(100, 2, 24, 77).unwrap();
    let mut pass = true;
    let mut details = Vec::new();
    for (arch, trained) in models {
        let untrained = Model::untrained(*arch, train, &overfit_hyper());
        let (t, u) = (corpus_uas(trained, &held_out), corpus_uas(&untrained, &held_out));
        pass &= t - u >= 0.20;
        details.push(format!("{} {:.4} vs untrained {:.4}", arch, t, u));
    }
    outcome(pass, details.join("; "))
}

fn main() {
    let train = synthetic_corpus(50, 2, 24, 2024).unwrap();
    let mut results: Vec<(&str, Outcome)> = vec![
        ("eisner matches brute force", eisner_optimality()),
        ("chu-liu-edmonds matches brute force", cle_optimality()),
        ("decoder dominance chain", dominance_chain()),
        ("oracle completeness", oracle_completeness()),
        ("gradient correctness", gradient_correctness()),
        ("uas exactness", uas_exactness()),
        ("fold protocol", fold_protocol()),
    ];
    let (fit, models) = overfit(&train);
    results.push(("overfit synthetic corpus", fit));
    results.push(("regression exactness", regression_exactness()));
    results.push(("trained beats untrained on held-out data", beats_untrained(&train, &models)));

    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!("{} {:>2} {}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, name, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
