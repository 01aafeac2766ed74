//! Python bindings for the edudep toolkit.

use std::fs::File;
use std::io::BufReader;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use edudep::conllu::{self, Token};
use edudep::eval;
use edudep::graph::{Decoder, ScoreMatrix};
use edudep::model::{self, Architecture, Hyper, TrainOptions};
use edudep::preprocess::{self, RemovableChars};
use edudep::treebank::{self, HeadVector};

create_exception!(pyedudep, EdudepError, PyValueError);

fn to_py(e: edudep::Error) -> PyErr {
    EdudepError::new_err(e.to_string())
}

fn heads(v: Vec<usize>) -> PyResult<HeadVector> {
    HeadVector::new(v).map_err(to_py)
}

fn head_lists(vs: Vec<Vec<usize>>) -> PyResult<Vec<HeadVector>> {
    vs.into_iter().map(heads).collect()
}

/// One EDU in CoNLL-U form.
#[pyclass(module = "pyedudep", name = "Edu", from_py_object)]
#[derive(Clone)]
struct PyEdu {
    inner: conllu::Edu,
}

#[pymethods]
impl PyEdu {
    #[new]
    #[pyo3(signature = (forms, upos, heads=None, comments=None))]
    fn new(forms: Vec<String>, upos: Vec<String>, heads: Option<Vec<usize>>, comments: Option<Vec<String>>) -> PyResult<Self> {
        if forms.len() != upos.len() || heads.as_ref().is_some_and(|h| h.len() != forms.len()) {
            return Err(EdudepError::new_err("forms, upos and heads must have equal length"));
        }
        let tokens = forms
            .into_iter()
            .zip(upos)
            .enumerate()
            .map(|(i, (f, p))| Token::new(i + 1, f, p, heads.as_ref().map(|h| h[i])))
            .collect();
        let edu = conllu::Edu::new(comments.unwrap_or_default(), tokens);
        // reject anything the writer would refuse
        conllu::write_conllu(std::slice::from_ref(&edu)).map_err(to_py)?;
        Ok(PyEdu { inner: edu })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let forms: Vec<&str> = self.inner.tokens.iter().map(|t| t.form.as_str()).collect();
        format!("Edu({:?})", forms)
    }

    #[getter]
    fn forms(&self) -> Vec<String> {
        self.inner.tokens.iter().map(|t| t.form.clone()).collect()
    }

    #[getter]
    fn upos(&self) -> Vec<String> {
        self.inner.tokens.iter().map(|t| t.upos.clone()).collect()
    }

    /// Head per token, `None` where unannotated.
    #[getter]
    fn heads(&self) -> Vec<Option<usize>> {
        self.inner.tokens.iter().map(|t| t.head).collect()
    }

    #[getter]
    fn comments(&self) -> Vec<String> {
        self.inner.comments.clone()
    }

    fn with_heads(&self, heads: Vec<usize>) -> PyResult<PyEdu> {
        let hv = HeadVector::new(heads).map_err(to_py)?;
        Ok(PyEdu {
            inner: self.inner.with_heads(&hv).map_err(to_py)?,
        })
    }

    fn without_heads(&self) -> PyEdu {
        PyEdu {
            inner: self.inner.without_heads(),
        }
    }

    /// `(format_ok, is_tree, root_count, is_projective, messages)`
    #[pyo3(signature = (strict=false))]
    fn validate(&self, strict: bool) -> (bool, bool, usize, bool, Vec<String>) {
        let r = conllu::validate(&self.inner, strict);
        (r.format_ok, r.is_tree, r.root_count, r.is_projective, r.messages)
    }
}

fn unwrap_edus(edus: Vec<PyEdu>) -> Vec<conllu::Edu> {
    edus.into_iter().map(|e| e.inner).collect()
}

fn wrap_edus(edus: Vec<conllu::Edu>) -> Vec<PyEdu> {
    edus.into_iter().map(|inner| PyEdu { inner }).collect()
}

#[pyfunction]
fn parse_conllu(text: &str) -> PyResult<Vec<PyEdu>> {
    conllu::parse_conllu(text).map(wrap_edus).map_err(to_py)
}

#[pyfunction]
fn read_conllu(path: &str) -> PyResult<Vec<PyEdu>> {
    let file = File::open(path).map_err(|e| to_py(e.into()))?;
    conllu::read_conllu(BufReader::new(file)).map(wrap_edus).map_err(to_py)
}

#[pyfunction]
fn write_conllu(edus: Vec<PyEdu>) -> PyResult<String> {
    conllu::write_conllu(&unwrap_edus(edus)).map_err(to_py)
}

/// Cleanses JSON-lines EDUs and converts them to CoNLL-U.
#[pyfunction]
#[pyo3(signature = (jsonl, remove_chars=None))]
fn convert(jsonl: &str, remove_chars: Option<&str>) -> PyResult<Vec<PyEdu>> {
    let removable = match remove_chars {
        Some(spec) => RemovableChars::parse(spec).map_err(to_py)?,
        None => RemovableChars::default(),
    };
    let raws = preprocess::read_jsonl(jsonl.as_bytes()).map_err(to_py)?;
    preprocess::convert(&raws, &removable).map(wrap_edus).map_err(to_py)
}

fn decoder(name: &str) -> PyResult<Decoder> {
    name.parse().map_err(to_py)
}

/// Decodes an `(n+1) × (n+1)` head-by-dependent score matrix. Column 0 and
/// the diagonal are ignored. Returns `(heads, total_score, is_tree)`.
#[pyfunction]
#[pyo3(signature = (scores, decoder="mst"))]
fn decode(scores: Vec<Vec<f64>>, decoder: &str) -> PyResult<(Vec<usize>, f64, bool)> {
    let d = self::decoder(decoder)?;
    let m = ScoreMatrix::from_rows(&scores).map_err(to_py)?;
    let r = d.decode(&m);
    Ok((r.heads.into_vec(), r.total_score, r.is_tree))
}

#[pyfunction]
fn uas(gold: Vec<Vec<usize>>, pred: Vec<Vec<usize>>) -> PyResult<f64> {
    eval::uas(&head_lists(gold)?, &head_lists(pred)?).map_err(to_py)
}

/// `(fold_id, train, dev, test)`
type Fold = (usize, Vec<usize>, Vec<usize>, Vec<usize>);

#[pyfunction]
fn kfold_split(n_edus: usize, k: usize, seed: u64) -> PyResult<Vec<Fold>> {
    let folds = eval::kfold_split(n_edus, k, seed).map_err(to_py)?;
    Ok(folds.into_iter().map(|f| (f.fold_id, f.train, f.dev, f.test)).collect())
}

/// `([(length, count, mean_error_rate)], (slope, intercept) or None)`
#[pyfunction]
#[allow(clippy::type_complexity)]
fn length_error_analysis(
    gold: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
) -> PyResult<(Vec<(usize, usize, f64)>, Option<(f64, f64)>)> {
    let a = eval::length_error_analysis(&head_lists(gold)?, &head_lists(pred)?).map_err(to_py)?;
    let rows = a.per_length.iter().map(|r| (r.length, r.count, r.mean_error_rate)).collect();
    Ok((rows, a.regression.map(|r| (r.slope, r.intercept))))
}

#[pyfunction]
fn enumerate_trees(n: usize) -> PyResult<Vec<Vec<usize>>> {
    Ok(treebank::enumerate_trees(n).map_err(to_py)?.into_iter().map(HeadVector::into_vec).collect())
}

#[pyfunction]
fn enumerate_projective_trees(n: usize) -> PyResult<Vec<Vec<usize>>> {
    Ok(treebank::enumerate_projective_trees(n)
        .map_err(to_py)?
        .into_iter()
        .map(HeadVector::into_vec)
        .collect())
}

#[pyfunction]
fn is_tree(h: Vec<usize>) -> PyResult<bool> {
    Ok(heads(h)?.is_tree())
}

#[pyfunction]
fn is_projective(h: Vec<usize>) -> PyResult<bool> {
    heads(h)?.is_projective().map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (n_edus, seed, min_len=2, max_len=24))]
fn synthetic_corpus(n_edus: usize, seed: u64, min_len: usize, max_len: usize) -> PyResult<Vec<PyEdu>> {
    edudep::synth::synthetic_corpus(n_edus, min_len, max_len, seed)
        .map(wrap_edus)
        .map_err(to_py)
}

/// A trained parser.
#[pyclass(module = "pyedudep", name = "Model")]
struct PyModel {
    inner: model::Model,
}

#[pymethods]
impl PyModel {
    /// Trains `arch` ("edp", "improved-edp" or "biaffine") on annotated EDUs.
    #[staticmethod]
    #[pyo3(signature = (
        arch, edus, seed, dev=None, epochs=200, patience=10, lr=1e-3, word_dim=64, pos_dim=32,
        hidden_dim=128, arc_dim=128, mlp_hidden=128, min_word_count=2, init_scale=0.1
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        arch: &str,
        edus: Vec<PyEdu>,
        seed: u64,
        dev: Option<Vec<PyEdu>>,
        epochs: usize,
        patience: usize,
        lr: f64,
        word_dim: usize,
        pos_dim: usize,
        hidden_dim: usize,
        arc_dim: usize,
        mlp_hidden: usize,
        min_word_count: usize,
        init_scale: f64,
    ) -> PyResult<PyModel> {
        let arch: Architecture = arch.parse().map_err(to_py)?;
        let mut hyper = Hyper {
            word_dim,
            pos_dim,
            hidden_dim,
            arc_dim,
            mlp_hidden,
            epochs,
            patience,
            seed,
            min_word_count,
            init_scale,
            ..Hyper::default()
        };
        hyper.adam.learning_rate = lr;
        let corpus = unwrap_edus(edus);
        let dev = dev.map(unwrap_edus);
        let trained = py.detach(|| {
            let options = TrainOptions {
                dev: dev.as_deref(),
                target_dev_uas: None,
            };
            model::Model::train(arch, &corpus, &hyper, &options)
        });
        Ok(PyModel {
            inner: trained.map_err(to_py)?.0,
        })
    }

    #[getter]
    fn architecture(&self) -> String {
        self.inner.architecture().to_string()
    }

    /// Predicted heads; `decoder` applies to the biaffine architecture only.
    #[pyo3(signature = (edu, decoder=None))]
    fn parse(&self, edu: &PyEdu, decoder: Option<&str>) -> PyResult<Vec<usize>> {
        let d = decoder.map(self::decoder).transpose()?;
        if d.is_some() && self.inner.architecture().is_transition() {
            return Err(EdudepError::new_err("transition models take no graph decoder"));
        }
        Ok(self.inner.parse(&edu.inner, d).map_err(to_py)?.into_vec())
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let file = File::create(path).map_err(|e| to_py(e.into()))?;
        self.inner.save(std::io::BufWriter::new(file)).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<PyModel> {
        let file = File::open(path).map_err(|e| to_py(e.into()))?;
        Ok(PyModel {
            inner: model::Model::load(BufReader::new(file)).map_err(to_py)?,
        })
    }

    fn to_bytes(&self) -> PyResult<Vec<u8>> {
        self.inner.to_bytes().map_err(to_py)
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<PyModel> {
        Ok(PyModel {
            inner: model::Model::load(data).map_err(to_py)?,
        })
    }
}

#[pymodule]
fn pyedudep(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("EdudepError", m.py().get_type::<EdudepError>())?;
    m.add_class::<PyEdu>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(parse_conllu, m)?)?;
    m.add_function(wrap_pyfunction!(read_conllu, m)?)?;
    m.add_function(wrap_pyfunction!(write_conllu, m)?)?;
    m.add_function(wrap_pyfunction!(convert, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(uas, m)?)?;
    m.add_function(wrap_pyfunction!(kfold_split, m)?)?;
    m.add_function(wrap_pyfunction!(length_error_analysis, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_trees, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_projective_trees, m)?)?;
    m.add_function(wrap_pyfunction!(is_tree, m)?)?;
    m.add_function(wrap_pyfunction!(is_projective, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    Ok(())
}
