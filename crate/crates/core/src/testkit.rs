//! Synthetic ensembles with a known correct order.
//!
//! `brownian_bridge_group` produces embeddings directly; `text_synth_group`
//! writes a text corpus whose paragraphs drift through a chain of word
//! pools, so the full text pipeline can be checked end to end.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{GroupConfig, GroupMeta, DEFAULT_MIN_WORDS};
use crate::rng::{stream_rng, sub_seed};
use crate::semantic::{EmbeddingSet, MethodTag};

#[derive(Debug, Error)]
pub enum TestkitError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGroupSpec {
    pub n_narratives: usize,
    pub n_paragraphs: usize,
    pub k: usize,
    /// Per-step, per-component standard deviation.
    pub sigma: f64,
    pub anchor_a_vec: Vec<f64>,
    pub anchor_b_vec: Vec<f64>,
    pub seed: u64,
}

impl SyntheticGroupSpec {
    /// Anchors at the origin and at `(n - 1) * step` along the first axis,
    /// so consecutive mean points are `step` apart.
    pub fn along_axis(
        n_narratives: usize,
        n_paragraphs: usize,
        k: usize,
        step: f64,
        sigma: f64,
        seed: u64,
    ) -> Self {
        let mut anchor_b_vec = vec![0.0; k];
        if k > 0 {
            anchor_b_vec[0] = step * n_paragraphs.saturating_sub(1) as f64;
        }
        SyntheticGroupSpec {
            n_narratives,
            n_paragraphs,
            k,
            sigma,
            anchor_a_vec: vec![0.0; k],
            anchor_b_vec,
            seed,
        }
    }

    /// Mean distance between consecutive points of the straight path.
    pub fn mean_step(&self) -> f64 {
        let span: f64 = self
            .anchor_a_vec
            .iter()
            .zip(&self.anchor_b_vec)
            .map(|(a, b)| (b - a).powi(2))
            .sum::<f64>()
            .sqrt();
        span / (self.n_paragraphs - 1) as f64
    }

    /// The `sigma` whose per-step noise norm (`sigma * sqrt(k)`) is
    /// `ratio` times the mean step.
    pub fn sigma_for_noise_ratio(&self, ratio: f64) -> f64 {
        ratio * self.mean_step() / (self.k as f64).sqrt()
    }

    pub fn validate(&self) -> Result<(), TestkitError> {
        let fail = |m: String| Err(TestkitError::InvalidSpec(m));
        if self.n_narratives < 2 {
            return fail(format!("need at least 2 narratives, got {}", self.n_narratives));
        }
        if self.n_paragraphs < 2 {
            return fail(format!("need at least 2 paragraphs, got {}", self.n_paragraphs));
        }
        if self.k == 0 {
            return fail("k must be positive".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma must be finite and >= 0, got {}", self.sigma));
        }
        if self.anchor_a_vec.len() != self.k || self.anchor_b_vec.len() != self.k {
            return fail(format!("anchor vectors must have length {}", self.k));
        }
        if self
            .anchor_a_vec
            .iter()
            .chain(&self.anchor_b_vec)
            .any(|x| !x.is_finite())
        {
            return fail("anchor vectors must be finite".into());
        }
        Ok(())
    }

    pub fn meta(&self) -> GroupMeta {
        GroupMeta::numbered(
            self.n_narratives,
            self.n_paragraphs,
            1,
            self.n_paragraphs,
            "brownian-bridge",
        )
        .expect("n >= 2 gives valid anchors")
    }
}

/// One discrete bridge per narrative: a random walk with step noise
/// `sigma`, pinned to zero at both ends, added to the straight line from
/// `anchor_a_vec` to `anchor_b_vec`. Narrative `i` draws from stream `i`.
pub fn brownian_bridge_group(
    spec: &SyntheticGroupSpec,
) -> Result<(EmbeddingSet, GroupMeta), TestkitError> {
    spec.validate()?;
    let n = spec.n_paragraphs;
    let k = spec.k;
    let last = (n - 1) as f64;
    let vectors: Vec<Vec<Vec<f64>>> = (0..spec.n_narratives)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(spec.seed, i as u64);
            let mut walk = vec![vec![0.0; k]; n];
            for j in 1..n {
                for c in 0..k {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    walk[j][c] = walk[j - 1][c] + spec.sigma * z;
                }
            }
            let end = walk[n - 1].clone();
            (0..n)
                .map(|j| {
                    if j == 0 {
                        return spec.anchor_a_vec.clone();
                    }
                    if j == n - 1 {
                        return spec.anchor_b_vec.clone();
                    }
                    let t = j as f64 / last;
                    (0..k)
                        .map(|c| {
                            let a = spec.anchor_a_vec[c];
                            let b = spec.anchor_b_vec[c];
                            a + t * (b - a) + walk[j][c] - t * end[c]
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let meta = spec.meta();
    let set = EmbeddingSet::new(meta.ids.clone(), vectors, MethodTag::Synthetic)
        .expect("finite inputs give finite vectors");
    Ok((set, meta))
}

/// Word pools, one per topic. Words are made-up syllable strings, unique
/// across the whole lexicon.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub pools: Vec<Vec<String>>,
}

const ONSETS: [&str; 16] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "tr",
];
const NUCLEI: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];

impl Lexicon {
    pub fn synthetic(n_pools: usize, pool_size: usize, seed: u64) -> Self {
        let mut rng = stream_rng(sub_seed(seed, "lexicon"), 0);
        let mut seen = std::collections::HashSet::new();
        let mut pools = Vec::with_capacity(n_pools);
        for _ in 0..n_pools {
            let mut pool = Vec::with_capacity(pool_size);
            while pool.len() < pool_size {
                let syllables = rng.random_range(2..=4);
                let word: String = (0..syllables)
                    .map(|_| {
                        let o = ONSETS[rng.random_range(0..ONSETS.len())];
                        let v = NUCLEI[rng.random_range(0..NUCLEI.len())];
                        format!("{o}{v}")
                    })
                    .collect();
                if seen.insert(word.clone()) {
                    pool.push(word);
                }
            }
            pools.push(pool);
        }
        Lexicon { pools }
    }

    pub fn n_pools(&self) -> usize {
        self.pools.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextSynthSpec {
    pub n_narratives: usize,
    pub n_paragraphs: usize,
    pub words_per_paragraph: usize,
    /// Per-step std of each narrative's bridge offset, in pool units.
    pub drift: f64,
    /// Per-word std of the pool choice around the narrative's center.
    pub spread: f64,
    pub seed: u64,
}

impl TextSynthSpec {
    pub fn new(n_narratives: usize, n_paragraphs: usize, seed: u64) -> Self {
        TextSynthSpec {
            n_narratives,
            n_paragraphs,
            words_per_paragraph: 50,
            drift: 0.15,
            spread: 0.6,
            seed,
        }
    }

    pub fn group_config(&self) -> GroupConfig {
        let mut config = GroupConfig::new(self.n_paragraphs, 1, self.n_paragraphs);
        config.label = "synthetic-text".to_string();
        config
    }

    pub fn validate(&self, lexicon: &Lexicon) -> Result<(), TestkitError> {
        let fail = |m: String| Err(TestkitError::InvalidSpec(m));
        if self.n_narratives < 2 || self.n_paragraphs < 2 {
            return fail("need at least 2 narratives and 2 paragraphs".into());
        }
        if lexicon.n_pools() < self.n_paragraphs {
            return fail(format!(
                "lexicon has {} pools, need {}",
                lexicon.n_pools(),
                self.n_paragraphs
            ));
        }
        if lexicon.pools.iter().any(Vec::is_empty) {
            return fail("lexicon has an empty pool".into());
        }
        if self.words_per_paragraph < DEFAULT_MIN_WORDS {
            return fail(format!(
                "words_per_paragraph must be at least {DEFAULT_MIN_WORDS}"
            ));
        }
        if !(self.drift >= 0.0 && self.spread >= 0.0) {
            return fail("drift and spread must be >= 0".into());
        }
        Ok(())
    }
}

fn paragraph<R: Rng>(
    rng: &mut R,
    lexicon: &Lexicon,
    center: f64,
    spread: f64,
    words: usize,
) -> String {
    let top = (lexicon.n_pools() - 1) as f64;
    (0..words)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            let pool = &lexicon.pools[(center + spread * z).round().clamp(0.0, top) as usize];
            pool[rng.random_range(0..pool.len())].as_str()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Writes `n_narratives` files into `dir` and returns the matching group
/// config. Paragraph `j` draws its words around pool `j` plus a
/// per-narrative bridge offset; the first and last paragraphs are fixed
/// text shared by every narrative.
pub fn text_synth_group(
    spec: &TextSynthSpec,
    lexicon: &Lexicon,
    dir: &Path,
) -> Result<GroupConfig, TestkitError> {
    spec.validate(lexicon)?;
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| TestkitError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;

    let n = spec.n_paragraphs;
    let mut anchor_rng = stream_rng(sub_seed(spec.seed, "anchors"), 0);
    let first = paragraph(&mut anchor_rng, lexicon, 0.0, 0.0, spec.words_per_paragraph);
    let last = paragraph(&mut anchor_rng, lexicon, (n - 1) as f64, 0.0, spec.words_per_paragraph);

    let meta = GroupMeta::numbered(spec.n_narratives, n, 1, n, "").expect("n >= 2");
    let body_seed = sub_seed(spec.seed, "narratives");
    meta.ids
        .par_iter()
        .enumerate()
        .try_for_each(|(i, id)| {
            let mut rng = stream_rng(body_seed, i as u64);
            let mut walk = vec![0.0; n];
            for j in 1..n {
                let z: f64 = StandardNormal.sample(&mut rng);
                walk[j] = walk[j - 1] + spec.drift * z;
            }
            let mut paragraphs = Vec::with_capacity(n);
            paragraphs.push(first.clone());
            for j in 1..n - 1 {
                let offset = walk[j] - walk[n - 1] * j as f64 / (n - 1) as f64;
                paragraphs.push(paragraph(
                    &mut rng,
                    lexicon,
                    j as f64 + offset,
                    spec.spread,
                    spec.words_per_paragraph,
                ));
            }
            paragraphs.push(last.clone());
            let path = dir.join(format!("{id}.txt"));
            fs::write(&path, paragraphs.join("\n\n") + "\n").map_err(io(&path))
        })?;
    Ok(spec.group_config())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_group;
    use crate::pathspace::average_path;

    #[test]
    fn noiseless_bridge_is_the_straight_line() {
        let spec = SyntheticGroupSpec::along_axis(4, 6, 3, 1.0, 0.0, 1);
        let (set, meta) = brownian_bridge_group(&spec).unwrap();
        let avg = average_path(&set, &meta).unwrap();
        for (j, p) in avg.points.iter().enumerate() {
            assert_eq!(p, &vec![j as f64, 0.0, 0.0]);
        }
    }

    #[test]
    fn endpoints_are_exact() {
        let mut spec = SyntheticGroupSpec::along_axis(20, 7, 4, 2.0, 3.0, 9);
        spec.anchor_a_vec = vec![0.1, -0.2, 0.3, 0.7];
        let (set, _) = brownian_bridge_group(&spec).unwrap();
        for i in 0..20 {
            assert_eq!(set.vector(i, 0), spec.anchor_a_vec.as_slice());
            assert_eq!(set.vector(i, 6), spec.anchor_b_vec.as_slice());
        }
    }

    #[test]
    fn bridge_is_seed_deterministic() {
        let spec = SyntheticGroupSpec::along_axis(10, 5, 2, 1.0, 1.0, 42);
        assert_eq!(brownian_bridge_group(&spec).unwrap(), brownian_bridge_group(&spec).unwrap());
        let mut other = spec.clone();
        other.seed = 43;
        assert_ne!(brownian_bridge_group(&spec).unwrap().0, brownian_bridge_group(&other).unwrap().0);
    }

    #[test]
    fn bridge_mean_converges() {
        // with n = 5 the bridge variance peaks at sigma^2 in the middle, so
        // each component of the mean has std at most sigma / sqrt(N)
        let spec = SyntheticGroupSpec::along_axis(2000, 5, 2, 1.0, 1.0, 11);
        let (set, meta) = brownian_bridge_group(&spec).unwrap();
        let avg = average_path(&set, &meta).unwrap();
        let bound = 5.0 * spec.sigma / (2000f64).sqrt();
        for (j, p) in avg.points.iter().enumerate() {
            assert!((p[0] - j as f64).abs() < bound);
            assert!(p[1].abs() < bound);
        }
    }

    #[test]
    fn sigma_from_noise_ratio() {
        let spec = SyntheticGroupSpec::along_axis(2, 20, 50, 1.0, 0.0, 0);
        assert!((spec.mean_step() - 1.0).abs() < 1e-12);
        let s = spec.sigma_for_noise_ratio(3.0);
        assert!((s * 50f64.sqrt() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs() {
        let ok = SyntheticGroupSpec::along_axis(2, 2, 1, 1.0, 0.0, 0);
        assert!(ok.validate().is_ok());
        let mut s = ok.clone();
        s.n_narratives = 1;
        assert!(s.validate().is_err());
        let mut s = ok.clone();
        s.sigma = -1.0;
        assert!(s.validate().is_err());
        let mut s = ok.clone();
        s.anchor_b_vec.push(0.0);
        assert!(s.validate().is_err());
    }

    #[test]
    fn lexicon_words_are_unique() {
        let lex = Lexicon::synthetic(12, 25, 3);
        let all: std::collections::HashSet<&String> = lex.pools.iter().flatten().collect();
        assert_eq!(all.len(), 300);
        assert_eq!(lex, Lexicon::synthetic(12, 25, 3));
    }

    #[test]
    fn synthetic_text_loads_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let lex = Lexicon::synthetic(6, 20, 1);
        let spec = TextSynthSpec::new(8, 6, 5);
        let config = text_synth_group(&spec, &lex, dir.path()).unwrap();
        let (group, report) = load_group(dir.path(), &config).unwrap();
        assert_eq!(report.accepted, 8);
        assert!(report.rejected.is_empty());
        assert_eq!(group.n_paragraphs(), 6);
    }

    #[test]
    fn text_needs_enough_pools() {
        let dir = tempfile::tempdir().unwrap();
        let lex = Lexicon::synthetic(3, 5, 1);
        let spec = TextSynthSpec::new(4, 6, 5);
        assert!(matches!(
            text_synth_group(&spec, &lex, dir.path()),
            Err(TestkitError::InvalidSpec(_))
        ));
    }
}
