//! CoNLL-U reading, writing and tree validation.
//!
//! Only plain word rows are supported. Columns the toolkit does not use
//! (lemma, xpos, feats, deprel, deps, misc) are kept as opaque text so that
//! reading and writing a canonical file reproduces it byte for byte.

use std::fmt::Write as _;
use std::io::{self, BufRead};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::treebank::{self, HeadVector};

/// Placeholder for an empty column.
pub const EMPTY: &str = "_";

const N_COLUMNS: usize = 10;

/// One word row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    /// `None` for unannotated input (`_` in the head column).
    pub head: Option<usize>,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// A row with every unused column set to `_`.
    pub fn new(id: usize, form: impl Into<String>, upos: impl Into<String>, head: Option<usize>) -> Self {
        Token {
            id,
            form: form.into(),
            lemma: EMPTY.into(),
            upos: upos.into(),
            xpos: EMPTY.into(),
            feats: EMPTY.into(),
            head,
            deprel: EMPTY.into(),
            deps: EMPTY.into(),
            misc: EMPTY.into(),
        }
    }
}

/// One parsing unit. ROOT is implicit at index 0.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Edu {
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
}

impl Edu {
    pub fn new(comments: Vec<String>, tokens: Vec<Token>) -> Self {
        Edu { comments, tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Gold heads, if every token carries one.
    pub fn heads(&self) -> Option<HeadVector> {
        let heads: Option<Vec<usize>> = self.tokens.iter().map(|t| t.head).collect();
        heads.and_then(|h| HeadVector::new(h).ok())
    }

    /// Overwrites the head column, leaving all other columns untouched.
    pub fn with_heads(&self, heads: &HeadVector) -> Result<Edu> {
        if heads.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "{} heads for a {}-token EDU",
                heads.len(),
                self.len()
            )));
        }
        let mut edu = self.clone();
        for (tok, &h) in edu.tokens.iter_mut().zip(heads.as_slice()) {
            tok.head = Some(h);
        }
        Ok(edu)
    }

    /// Copy with every head cleared.
    pub fn without_heads(&self) -> Edu {
        let mut edu = self.clone();
        for tok in &mut edu.tokens {
            tok.head = None;
        }
        edu
    }

    fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.len();
        for c in &self.comments {
            if !c.starts_with('#') || c.contains('\n') {
                return Err(format!("malformed comment line {:?}", c));
            }
        }
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.id != i + 1 {
                return Err(format!("token {} has id {}", i + 1, tok.id));
            }
            if tok.form.is_empty() {
                return Err(format!("token {} has an empty form", tok.id));
            }
            let columns = [
                &tok.form, &tok.lemma, &tok.upos, &tok.xpos, &tok.feats, &tok.deprel, &tok.deps, &tok.misc,
            ];
            if columns.iter().any(|c| c.is_empty() || c.contains(['\t', '\n'])) {
                return Err(format!("token {} has an empty column or embedded tab/newline", tok.id));
            }
            if let Some(h) = tok.head {
                if h > n {
                    return Err(format!("token {} has head {} beyond {} tokens", tok.id, h, n));
                }
                if h == tok.id {
                    return Err(format!("token {} heads itself", tok.id));
                }
            }
        }
        Ok(())
    }
}

/// Reads every EDU from a CoNLL-U stream.
pub fn read_conllu<R: BufRead>(reader: R) -> Result<Vec<Edu>> {
    let mut edus = Vec::new();
    let mut comments = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut block_start = 0;
    let mut line_no = 0;

    for line in reader.lines() {
        let line = line?;
        line_no += 1;
        if line.is_empty() {
            if !tokens.is_empty() || !comments.is_empty() {
                edus.push(finish_edu(&mut comments, &mut tokens, block_start)?);
            }
            continue;
        }
        if comments.is_empty() && tokens.is_empty() {
            block_start = line_no;
        }
        if line.starts_with('#') {
            if !tokens.is_empty() {
                return Err(Error::parse(line_no, "comment line after token lines"));
            }
            comments.push(line);
            continue;
        }
        tokens.push(parse_token(&line, line_no, tokens.len() + 1)?);
    }
    if !tokens.is_empty() || !comments.is_empty() {
        edus.push(finish_edu(&mut comments, &mut tokens, block_start)?);
    }
    Ok(edus)
}

/// Convenience wrapper over [`read_conllu`] for in-memory text.
pub fn parse_conllu(text: &str) -> Result<Vec<Edu>> {
    read_conllu(io::Cursor::new(text))
}

fn parse_token(line: &str, line_no: usize, expected_id: usize) -> Result<Token> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != N_COLUMNS {
        return Err(Error::parse(
            line_no,
            format!("expected {} tab-separated columns, found {}", N_COLUMNS, cols.len()),
        ));
    }
    if cols[0].contains('-') {
        return Err(Error::parse(line_no, format!("multiword token range {} is not supported", cols[0])));
    }
    if cols[0].contains('.') {
        return Err(Error::parse(line_no, format!("empty node {} is not supported", cols[0])));
    }
    let id: usize = cols[0]
        .parse()
        .map_err(|_| Error::parse(line_no, format!("non-integer id {:?}", cols[0])))?;
    if id != expected_id {
        return Err(Error::parse(line_no, format!("expected id {}, found {}", expected_id, id)));
    }
    let head = if cols[6] == EMPTY {
        None
    } else {
        Some(
            cols[6]
                .parse::<usize>()
                .map_err(|_| Error::parse(line_no, format!("non-integer head {:?}", cols[6])))?,
        )
    };
    if head == Some(id) {
        return Err(Error::parse(line_no, format!("token {} heads itself", id)));
    }
    if cols[1].is_empty() {
        return Err(Error::parse(line_no, "empty form"));
    }
    Ok(Token {
        id,
        form: cols[1].into(),
        lemma: cols[2].into(),
        upos: cols[3].into(),
        xpos: cols[4].into(),
        feats: cols[5].into(),
        head,
        deprel: cols[7].into(),
        deps: cols[8].into(),
        misc: cols[9].into(),
    })
}

fn finish_edu(comments: &mut Vec<String>, tokens: &mut Vec<Token>, block_start: usize) -> Result<Edu> {
    if tokens.is_empty() {
        return Err(Error::parse(block_start, "sentence block has no token lines"));
    }
    let n = tokens.len();
    for (i, tok) in tokens.iter().enumerate() {
        if let Some(h) = tok.head {
            if h > n {
                let line = block_start + comments.len() + i;
                return Err(Error::parse(line, format!("head {} out of range for {} tokens", h, n)));
            }
        }
    }
    Ok(Edu {
        comments: std::mem::take(comments),
        tokens: std::mem::take(tokens),
    })
}

/// Serializes EDUs; each block is followed by one blank line.
pub fn write_conllu(edus: &[Edu]) -> Result<String> {
    let mut out = String::new();
    for (i, edu) in edus.iter().enumerate() {
        edu.check_invariants().map_err(|message| Error::Serialize {
            sentence: i + 1,
            message,
        })?;
        for c in &edu.comments {
            out.push_str(c);
            out.push('\n');
        }
        for t in &edu.tokens {
            let head = t.head.map_or_else(|| EMPTY.to_string(), |h| h.to_string());
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                t.id, t.form, t.lemma, t.upos, t.xpos, t.feats, head, t.deprel, t.deps, t.misc
            )
            .expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub format_ok: bool,
    pub is_tree: bool,
    pub root_count: usize,
    pub is_projective: bool,
    pub messages: Vec<String>,
}

/// Checks format and tree constraints. Findings go into the report, never
/// into an error. Multiple roots are a warning unless `strict_single_root`.
pub fn validate(edu: &Edu, strict_single_root: bool) -> ValidationReport {
    let mut messages = Vec::new();
    let mut format_ok = true;
    if let Err(m) = edu.check_invariants() {
        format_ok = false;
        messages.push(m);
    }
    if edu.is_empty() {
        format_ok = false;
        messages.push("EDU has no tokens".into());
    }
    let root_count = edu.tokens.iter().filter(|t| t.head == Some(0)).count();

    let heads: Option<Vec<usize>> = edu.tokens.iter().map(|t| t.head).collect();
    let (is_tree, is_projective) = match heads {
        None => {
            format_ok = false;
            messages.push("some tokens have no head".into());
            (false, false)
        }
        Some(h) => {
            let tree = format_ok && treebank::is_tree(&h);
            if format_ok && !tree {
                messages.push("heads contain a cycle".into());
            }
            let proj = tree
                && HeadVector::new_unchecked(h)
                    .is_projective()
                    .unwrap_or(false);
            (tree, proj)
        }
    };
    if is_tree && !is_projective {
        messages.push("tree is non-projective".into());
    }
    if root_count != 1 {
        let m = format!("{} tokens attach to ROOT", root_count);
        if strict_single_root {
            format_ok = false;
            messages.push(format!("error: {}", m));
        } else {
            messages.push(format!("warning: {}", m));
        }
    }
    ValidationReport {
        format_ok,
        is_tree,
        root_count,
        is_projective,
        messages,
    }
}
