//! Narrative ingestion.
//!
//! A corpus is a directory of UTF-8 `.txt` files, one narrative per file,
//! paragraphs separated by one or more blank lines. Files are read in
//! lexicographic order of their stem, which doubles as the narrative id.
//! Narratives that do not have exactly `n` paragraphs, contain a paragraph
//! shorter than `min_words`, or disagree on an anchor paragraph are rejected
//! (never truncated) and itemized in a [`ValidationReport`].

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream_rng;

pub const DEFAULT_MIN_WORDS: usize = 40;

fn default_min_words() -> usize {
    DEFAULT_MIN_WORDS
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("anchors must satisfy 1 <= anchor_a < anchor_b <= n (got a={anchor_a}, b={anchor_b}, n={n})")]
    InvalidAnchors {
        anchor_a: usize,
        anchor_b: usize,
        n: usize,
    },
    #[error("a group needs at least 2 narratives, {accepted} accepted")]
    InsufficientNarratives {
        accepted: usize,
        report: Box<ValidationReport>,
    },
    #[error("malformed group: {0}")]
    Malformed(String),
}

/// Shape and filtering rules for a narrative group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConfig {
    #[serde(rename = "n")]
    pub n_paragraphs: usize,
    pub anchor_a: usize,
    pub anchor_b: usize,
    #[serde(default = "default_min_words")]
    pub min_words: usize,
    #[serde(default)]
    pub label: String,
}

impl GroupConfig {
    pub fn new(n_paragraphs: usize, anchor_a: usize, anchor_b: usize) -> Self {
        GroupConfig {
            n_paragraphs,
            anchor_a,
            anchor_b,
            min_words: DEFAULT_MIN_WORDS,
            label: String::new(),
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        check_anchors(self.anchor_a, self.anchor_b, self.n_paragraphs)
    }
}

fn check_anchors(anchor_a: usize, anchor_b: usize, n: usize) -> Result<(), CorpusError> {
    if anchor_a >= 1 && anchor_a < anchor_b && anchor_b <= n {
        Ok(())
    } else {
        Err(CorpusError::InvalidAnchors { anchor_a, anchor_b, n })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Narrative {
    pub id: String,
    pub paragraphs: Vec<String>,
}

/// Everything about a group except its text: ids, length and anchors.
/// Synthetic ensembles that never had text carry only this.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupMeta {
    pub ids: Vec<String>,
    pub n_paragraphs: usize,
    /// 1-based.
    pub anchor_a: usize,
    /// 1-based.
    pub anchor_b: usize,
    pub label: String,
}

impl GroupMeta {
    pub fn n_narratives(&self) -> usize {
        self.ids.len()
    }

    /// Meta for `n_narratives` unnamed narratives, ids zero-padded indices.
    pub fn numbered(
        n_narratives: usize,
        n_paragraphs: usize,
        anchor_a: usize,
        anchor_b: usize,
        label: &str,
    ) -> Result<Self, CorpusError> {
        check_anchors(anchor_a, anchor_b, n_paragraphs)?;
        let width = n_narratives.max(1).to_string().len().max(4);
        Ok(GroupMeta {
            ids: (0..n_narratives)
                .map(|i| format!("n{:0width$}", i, width = width))
                .collect(),
            n_paragraphs,
            anchor_a,
            anchor_b,
            label: label.to_string(),
        })
    }
}

/// An ensemble of narratives of equal length sharing two anchor paragraphs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NarrativeGroup {
    narratives: Vec<Narrative>,
    n_paragraphs: usize,
    anchor_a: usize,
    anchor_b: usize,
    label: String,
}

impl NarrativeGroup {
    /// Builds a group, checking every structural invariant (not word counts,
    /// which are an ingestion rule).
    pub fn new(
        narratives: Vec<Narrative>,
        n_paragraphs: usize,
        anchor_a: usize,
        anchor_b: usize,
        label: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        check_anchors(anchor_a, anchor_b, n_paragraphs)?;
        if narratives.len() < 2 {
            return Err(CorpusError::Malformed(format!(
                "{} narratives, need at least 2",
                narratives.len()
            )));
        }
        for nar in &narratives {
            if nar.paragraphs.len() != n_paragraphs {
                return Err(CorpusError::Malformed(format!(
                    "narrative {} has {} paragraphs, expected {}",
                    nar.id,
                    nar.paragraphs.len(),
                    n_paragraphs
                )));
            }
        }
        let group = NarrativeGroup {
            narratives,
            n_paragraphs,
            anchor_a,
            anchor_b,
            label: label.into(),
        };
        for anchor in [anchor_a, anchor_b] {
            let first = normalize_whitespace(&group.narratives[0].paragraphs[anchor - 1]);
            if let Some(bad) = group
                .narratives
                .iter()
                .find(|nar| normalize_whitespace(&nar.paragraphs[anchor - 1]) != first)
            {
                return Err(CorpusError::Malformed(format!(
                    "narrative {} differs at anchor paragraph {}",
                    bad.id, anchor
                )));
            }
        }
        Ok(group)
    }

    pub fn narratives(&self) -> &[Narrative] {
        &self.narratives
    }

    pub fn n_narratives(&self) -> usize {
        self.narratives.len()
    }

    pub fn n_paragraphs(&self) -> usize {
        self.n_paragraphs
    }

    pub fn anchor_a(&self) -> usize {
        self.anchor_a
    }

    pub fn anchor_b(&self) -> usize {
        self.anchor_b
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn meta(&self) -> GroupMeta {
        GroupMeta {
            ids: self.narratives.iter().map(|n| n.id.clone()).collect(),
            n_paragraphs: self.n_paragraphs,
            anchor_a: self.anchor_a,
            anchor_b: self.anchor_b,
            label: self.label.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RejectReason {
    WrongParagraphCount { found: usize, expected: usize },
    /// `position` is 1-based.
    ShortParagraph { position: usize, words: usize, min_words: usize },
    AnchorMismatch { anchor: usize },
    Unreadable { message: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub reason: RejectReason,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub candidates: usize,
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
    pub anchor_mismatches: Vec<String>,
}

impl ValidationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Number of maximal whitespace-delimited tokens.
pub fn word_count(paragraph: &str) -> usize {
    paragraph.split_whitespace().count()
}

pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits text on blank lines. Lines inside a paragraph are trimmed and
/// rejoined with `\n`.
pub fn split_paragraphs(text: &str) -> Vec<String> {
    let mut paragraphs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            if !current.is_empty() {
                paragraphs.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        paragraphs.push(current.join("\n"));
    }
    paragraphs
}

/// `.txt` files in `dir`, sorted by stem.
pub fn candidate_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, CorpusError> {
    let entries = fs::read_dir(dir).map_err(|source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| CorpusError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                files.push((stem.to_string(), path.clone()));
            }
        }
    }
    files.sort();
    Ok(files)
}

/// Loads and filters a narrative group from `dir`.
pub fn load_group(
    dir: &Path,
    config: &GroupConfig,
) -> Result<(NarrativeGroup, ValidationReport), CorpusError> {
    config.validate()?;
    let files = candidate_files(dir)?;
    let n = config.n_paragraphs;

    let parsed: Vec<(String, Result<Vec<String>, String>)> = files
        .par_iter()
        .map(|(id, path)| {
            let text = fs::read(path)
                .map_err(|e| e.to_string())
                .and_then(|bytes| String::from_utf8(bytes).map_err(|e| e.to_string()));
            (id.clone(), text.map(|t| split_paragraphs(&t)))
        })
        .collect();

    let mut report = ValidationReport {
        candidates: files.len(),
        ..Default::default()
    };
    let mut survivors: Vec<Narrative> = Vec::new();
    for (id, result) in parsed {
        let paragraphs = match result {
            Ok(p) => p,
            Err(message) => {
                report.rejected.push(Rejection {
                    id,
                    reason: RejectReason::Unreadable { message },
                });
                continue;
            }
        };
        if paragraphs.len() != n {
            report.rejected.push(Rejection {
                id,
                reason: RejectReason::WrongParagraphCount {
                    found: paragraphs.len(),
                    expected: n,
                },
            });
            continue;
        }
        if let Some((pos, words)) = paragraphs
            .iter()
            .map(|p| word_count(p))
            .enumerate()
            .find(|&(_, w)| w < config.min_words)
        {
            report.rejected.push(Rejection {
                id,
                reason: RejectReason::ShortParagraph {
                    position: pos + 1,
                    words,
                    min_words: config.min_words,
                },
            });
            continue;
        }
        survivors.push(Narrative { id, paragraphs });
    }

    // The reference anchor text is the most common one among survivors;
    // ties go to the text seen first in id order.
    let references: Vec<(usize, Option<String>)> = [config.anchor_a, config.anchor_b]
        .into_iter()
        .map(|anchor| (anchor, majority_text(&survivors, anchor - 1)))
        .collect();

    let mut accepted = Vec::with_capacity(survivors.len());
    for nar in survivors {
        let mismatch = references.iter().find(|(anchor, reference)| {
            reference.as_deref() != Some(normalize_whitespace(&nar.paragraphs[anchor - 1]).as_str())
        });
        match mismatch {
            Some(&(anchor, _)) => {
                report.anchor_mismatches.push(nar.id.clone());
                report.rejected.push(Rejection {
                    id: nar.id,
                    reason: RejectReason::AnchorMismatch { anchor },
                });
            }
            None => accepted.push(nar),
        }
    }
    report.rejected.sort_by(|a, b| a.id.cmp(&b.id));
    report.accepted = accepted.len();

    if accepted.len() < 2 {
        return Err(CorpusError::InsufficientNarratives {
            accepted: accepted.len(),
            report: Box::new(report),
        });
    }
    let group = NarrativeGroup::new(
        accepted,
        n,
        config.anchor_a,
        config.anchor_b,
        config.label.clone(),
    )?;
    Ok((group, report))
}

fn majority_text(narratives: &[Narrative], index: usize) -> Option<String> {
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    for (order, nar) in narratives.iter().enumerate() {
        let entry = counts
            .entry(normalize_whitespace(&nar.paragraphs[index]))
            .or_insert((0, order));
        entry.0 += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(text, _)| text)
}

/// One permutation per narrative. `perms[i][j]` is the original index of
/// the paragraph placed at position `j` of narrative `i`. Positions listed
/// in `pinned` (0-based) stay fixed. Narrative `i` draws from stream `i` of
/// `seed`, so the result does not depend on evaluation order.
pub fn narrative_permutations(
    n_narratives: usize,
    n_paragraphs: usize,
    seed: u64,
    pinned: &[usize],
) -> Vec<Vec<usize>> {
    let free: Vec<usize> = (0..n_paragraphs).filter(|j| !pinned.contains(j)).collect();
    (0..n_narratives)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let mut shuffled = free.clone();
            shuffled.shuffle(&mut rng);
            let mut perm: Vec<usize> = (0..n_paragraphs).collect();
            for (slot, value) in free.iter().zip(shuffled) {
                perm[*slot] = value;
            }
            perm
        })
        .collect()
}

/// Independently permutes the paragraphs of every narrative. With
/// `pin_anchors` the two anchor positions stay in place.
pub fn permute_group(group: &NarrativeGroup, seed: u64, pin_anchors: bool) -> NarrativeGroup {
    let pinned = if pin_anchors {
        vec![group.anchor_a - 1, group.anchor_b - 1]
    } else {
        Vec::new()
    };
    let perms = narrative_permutations(group.n_narratives(), group.n_paragraphs, seed, &pinned);
    let narratives = group
        .narratives
        .iter()
        .zip(perms)
        .map(|(nar, perm)| Narrative {
            id: nar.id.clone(),
            paragraphs: perm.iter().map(|&k| nar.paragraphs[k].clone()).collect(),
        })
        .collect();
    // Anchor agreement no longer holds after shuffling, so skip `new`.
    NarrativeGroup {
        narratives,
        n_paragraphs: group.n_paragraphs,
        anchor_a: group.anchor_a,
        anchor_b: group.anchor_b,
        label: group.label.clone(),
    }
}
