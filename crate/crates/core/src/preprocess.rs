//! Text cleansing and conversion of segmented, tagged EDUs to CoNLL-U.
//!
//! Input is JSON lines, one [`RawEdu`] per line:
//!
//! ```text
//! {"edu_id": "s1", "tokens": [{"form": "กิน", "upos": "VERB", "head": 0}, ...]}
//! ```
//!
//! Heads, when present, are 1-based positions in the raw token list.

use std::io::BufRead;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::conllu::{Edu, Token};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawToken {
    pub form: String,
    pub upos: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEdu {
    pub edu_id: String,
    pub tokens: Vec<RawToken>,
}

/// Code points stripped from forms during cleansing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemovableChars {
    ranges: Vec<RangeInclusive<char>>,
}

impl Default for RemovableChars {
    fn default() -> Self {
        RemovableChars {
            ranges: vec![
                '\u{0000}'..='\u{001F}',
                '\u{200B}'..='\u{200D}',
                '\u{FEFF}'..='\u{FEFF}',
            ],
        }
    }
}

impl RemovableChars {
    pub fn new(ranges: Vec<RangeInclusive<char>>) -> Self {
        RemovableChars { ranges }
    }

    /// Parses a comma-separated list of code points or ranges, e.g.
    /// `U+0000-U+001F,U+200B-U+200D,U+FEFF`.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |item: &str| Error::InvalidArgument(format!("bad character range {:?}", item));
        let code_point = |s: &str| -> Option<char> {
            let hex = s.trim().strip_prefix("U+").or_else(|| s.trim().strip_prefix("u+"))?;
            char::from_u32(u32::from_str_radix(hex, 16).ok()?)
        };
        let mut ranges = Vec::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let range = match item.split_once('-') {
                Some((lo, hi)) => {
                    let (lo, hi) = (code_point(lo).ok_or_else(|| bad(item))?, code_point(hi).ok_or_else(|| bad(item))?);
                    if lo > hi {
                        return Err(bad(item));
                    }
                    lo..=hi
                }
                None => {
                    let c = code_point(item).ok_or_else(|| bad(item))?;
                    c..=c
                }
            };
            ranges.push(range);
        }
        Ok(RemovableChars { ranges })
    }

    pub fn contains(&self, c: char) -> bool {
        self.ranges.iter().any(|r| r.contains(&c))
    }
}

fn is_digit_form(form: &str) -> bool {
    !form.is_empty() && form.chars().all(|c| c.is_ascii_digit() || ('\u{0E50}'..='\u{0E59}').contains(&c))
}

fn clean_form(form: &str, removable: &RemovableChars) -> String {
    form.chars()
        .filter(|&c| !removable.contains(c) && !c.is_whitespace())
        .collect()
}

/// Cleanses with the default removable character set.
pub fn clean_tokens(raw: &RawEdu) -> Result<RawEdu> {
    clean_tokens_with(raw, &RemovableChars::default())
}

/// Strips removable and whitespace characters from forms, drops tokens left
/// empty, merges adjacent digit-only tokens and reindexes heads.
pub fn clean_tokens_with(raw: &RawEdu, removable: &RemovableChars) -> Result<RawEdu> {
    let err = |message: String| Error::Cleanse {
        edu_id: raw.edu_id.clone(),
        message,
    };
    let n = raw.tokens.len();
    for (i, t) in raw.tokens.iter().enumerate() {
        if let Some(h) = t.head {
            if h > n || h == i + 1 {
                return Err(err(format!("token {} has invalid head {}", i + 1, h)));
            }
        }
    }

    // Group surviving raw positions (1-based) into output tokens.
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, t) in raw.tokens.iter().enumerate() {
        let form = clean_form(&t.form, removable);
        if form.is_empty() {
            continue;
        }
        match groups.last_mut() {
            Some((prev, members)) if is_digit_form(prev) && is_digit_form(&form) => {
                prev.push_str(&form);
                members.push(i + 1);
            }
            _ => groups.push((form, vec![i + 1])),
        }
    }

    // raw position -> output position (1-based), 0 for dropped
    let mut new_index = vec![0usize; n + 1];
    for (g, (_, members)) in groups.iter().enumerate() {
        for &m in members {
            new_index[m] = g + 1;
        }
    }

    let mut tokens = Vec::with_capacity(groups.len());
    for (g, (form, members)) in groups.into_iter().enumerate() {
        let lead = &raw.tokens[members[0] - 1];
        // the group's head is the first member head that leaves the group
        let head = members
            .iter()
            .filter_map(|&m| raw.tokens[m - 1].head)
            .find(|&h| h == 0 || new_index[h] != g + 1);
        let head = match head {
            None if lead.head.is_some() => {
                return Err(err(format!("merged token {} has no head outside itself", g + 1)))
            }
            None => None,
            Some(0) => Some(0),
            Some(h) if new_index[h] == 0 => {
                return Err(err(format!(
                    "token {} ({:?}) depends on dropped token {}",
                    members[0], lead.form, h
                )))
            }
            Some(h) => Some(new_index[h]),
        };
        tokens.push(RawToken {
            form,
            upos: lead.upos.clone(),
            head,
        });
    }
    Ok(RawEdu {
        edu_id: raw.edu_id.clone(),
        tokens,
    })
}

/// Maps a cleansed EDU onto CoNLL-U rows. Either every token has a head or
/// none does; the latter yields an unannotated parse request.
pub fn to_conllu(raw: &RawEdu) -> Result<Edu> {
    let err = |message: String| Error::Convert {
        edu_id: raw.edu_id.clone(),
        message,
    };
    let n = raw.tokens.len();
    if n == 0 {
        return Err(err("no tokens".into()));
    }
    let annotated = raw.tokens.iter().filter(|t| t.head.is_some()).count();
    if annotated != 0 && annotated != n {
        return Err(err(format!("{} of {} tokens have heads", annotated, n)));
    }
    let mut tokens = Vec::with_capacity(n);
    for (i, t) in raw.tokens.iter().enumerate() {
        if t.form.is_empty() || t.form.contains(['\t', '\n']) {
            return Err(err(format!("token {} has an unusable form {:?}", i + 1, t.form)));
        }
        if let Some(h) = t.head {
            if h > n {
                return Err(err(format!("token {} has head {} beyond {} tokens", i + 1, h, n)));
            }
            if h == i + 1 {
                return Err(err(format!("token {} heads itself", i + 1)));
            }
        }
        let upos = if t.upos.is_empty() { "_" } else { t.upos.as_str() };
        tokens.push(Token::new(i + 1, t.form.clone(), upos, t.head));
    }
    Ok(Edu::new(vec![format!("# sent_id = {}", raw.edu_id)], tokens))
}

/// Reads JSON-lines records, skipping blank lines.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<RawEdu>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let edu = serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        out.push(edu);
    }
    Ok(out)
}

/// Cleanses and converts a batch of raw EDUs.
pub fn convert(raws: &[RawEdu], removable: &RemovableChars) -> Result<Vec<Edu>> {
    raws.iter()
        .map(|r| to_conllu(&clean_tokens_with(r, removable)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::validate;
    use proptest::prelude::*;

    fn raw(forms: &[(&str, &str, Option<usize>)]) -> RawEdu {
        RawEdu {
            edu_id: "t".into(),
            tokens: forms
                .iter()
                .map(|&(f, p, h)| RawToken {
                    form: f.into(),
                    upos: p.into(),
                    head: h,
                })
                .collect(),
        }
    }

    fn forms(r: &RawEdu) -> Vec<&str> {
        r.tokens.iter().map(|t| t.form.as_str()).collect()
    }

    #[test]
    fn merges_split_numbers() {
        let r = raw(&[("10", "NUM", None), ("0", "NUM", None), ("บาท", "NOUN", None)]);
        assert_eq!(forms(&clean_tokens(&r).unwrap()), ["100", "บาท"]);
    }

    #[test]
    fn drops_zero_width_tokens() {
        let r = raw(&[("กิน", "VERB", None), ("\u{200B}", "PUNCT", None), ("ข้าว", "NOUN", None)]);
        assert_eq!(forms(&clean_tokens(&r).unwrap()), ["กิน", "ข้าว"]);
    }

    #[test]
    fn clean_input_unchanged() {
        let r = raw(&[("กิน", "VERB", Some(0)), ("ข้าว", "NOUN", Some(1))]);
        assert_eq!(clean_tokens(&r).unwrap(), r);
    }

    #[test]
    fn collapses_inner_whitespace() {
        let r = raw(&[("ก  ิน ", "VERB", None), ("\t", "X", None)]);
        assert_eq!(forms(&clean_tokens(&r).unwrap()), ["กิน"]);
    }

    #[test]
    fn reindexes_heads_after_drop_and_merge() {
        // 1 กิน <- root, 2 " " dropped, 3 "1" -> 5, 4 "2" -> 3, 5 บาท -> 1
        let r = raw(&[
            ("กิน", "VERB", Some(0)),
            (" ", "PUNCT", Some(1)),
            ("1", "NUM", Some(5)),
            ("2", "NUM", Some(3)),
            ("บาท", "NOUN", Some(1)),
        ]);
        let c = clean_tokens(&r).unwrap();
        assert_eq!(forms(&c), ["กิน", "12", "บาท"]);
        let heads: Vec<_> = c.tokens.iter().map(|t| t.head).collect();
        assert_eq!(heads, [Some(0), Some(3), Some(1)]);
        assert_eq!(c.tokens[1].upos, "NUM");
    }

    #[test]
    fn head_on_dropped_token_is_an_error() {
        let r = raw(&[("กิน", "VERB", Some(0)), ("\u{FEFF}", "X", Some(1)), ("ข้าว", "NOUN", Some(2))]);
        assert!(matches!(clean_tokens(&r), Err(Error::Cleanse { .. })));
    }

    #[test]
    fn custom_removable_set() {
        let set = RemovableChars::parse("U+0041-U+0043, U+005F").unwrap();
        let r = raw(&[("ABx_", "X", None)]);
        assert_eq!(forms(&clean_tokens_with(&r, &set).unwrap()), ["x"]);
        assert!(RemovableChars::parse("U+0043-U+0041").is_err());
        assert!(RemovableChars::parse("zz").is_err());
    }

    #[test]
    fn conversion_examples() {
        let edu = to_conllu(&raw(&[("กิน", "VERB", Some(0)), ("ข้าว", "NOUN", Some(1))])).unwrap();
        assert_eq!(edu.heads().unwrap().as_slice(), &[0, 1]);
        assert_eq!(edu.tokens[0].lemma, "_");

        let single = to_conllu(&raw(&[("กิน", "VERB", Some(0))])).unwrap();
        let report = validate(&single, true);
        assert!(report.format_ok && report.is_tree);

        assert!(to_conllu(&raw(&[("a", "X", Some(3)), ("b", "X", Some(0))])).is_err());
        assert!(to_conllu(&raw(&[("a", "X", Some(0)), ("b", "X", None)])).is_err());

        let bare = to_conllu(&raw(&[("a", "X", None), ("b", "X", None)])).unwrap();
        assert!(bare.tokens.iter().all(|t| t.head.is_none()));
    }

    #[test]
    fn reads_jsonl() {
        let text = "{\"edu_id\":\"a\",\"tokens\":[{\"form\":\"x\",\"upos\":\"X\",\"head\":0}]}\n\n{\"edu_id\":\"b\",\"tokens\":[{\"form\":\"y\",\"upos\":\"X\"}]}\n";
        let raws = read_jsonl(std::io::Cursor::new(text)).unwrap();
        assert_eq!(raws.len(), 2);
        assert_eq!(raws[1].tokens[0].head, None);
        assert!(read_jsonl(std::io::Cursor::new("{oops}\n")).is_err());
    }

    fn dirty_form() -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop_oneof![
                Just("1".to_string()),
                Just("๒".to_string()),
                Just("ก".to_string()),
                Just("a".to_string()),
                Just(" ".to_string()),
                Just("\u{200B}".to_string()),
                Just("\u{0007}".to_string()),
            ],
            0..4,
        )
        .prop_map(|parts| parts.concat())
    }

    fn digits(r: &RawEdu) -> String {
        r.tokens
            .iter()
            .flat_map(|t| t.form.chars())
            .filter(|c| c.is_ascii_digit() || ('\u{0E50}'..='\u{0E59}').contains(c))
            .collect()
    }

    proptest! {
        #[test]
        fn cleansing_is_idempotent(forms in prop::collection::vec(dirty_form(), 0..10)) {
            let r = RawEdu {
                edu_id: "p".into(),
                tokens: forms.into_iter().map(|form| RawToken { form, upos: "X".into(), head: None }).collect(),
            };
            let once = clean_tokens(&r).unwrap();
            let twice = clean_tokens(&once).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.tokens.len() <= r.tokens.len());
            prop_assert_eq!(digits(&once), digits(&r));
            if !once.tokens.is_empty() {
                let edu = to_conllu(&once).unwrap();
                prop_assert!(validate(&edu, false).messages.iter().all(|m| !m.contains("column")));
            }
        }
    }
}
