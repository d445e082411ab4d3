//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! out_dir = "runs/demo"
//! models = ["scca", "kcca", "random"]
//!
//! [corpus]
//! source = "synthetic"
//! n_docs = 300
//!
//! [split]
//! n_train = 100
//! n_test = 200
//! repeats = 10
//! ```
//!
//! Every section is optional. The top-level seed drives the synthetic
//! generator, the splits and the random control.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::PreprocessOptions;
use crate::deflation::{DeflationOptions, KSelection};
use crate::error::{Error, Result};
use crate::kcca::DEFAULT_KAPPA;
use crate::lasso::{mu_grid, SelectionMode};
use crate::scca::SccaParams;
use crate::synthetic::SyntheticSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CorpusSource {
    Synthetic(SyntheticCorpus),
    /// One document per line, whitespace-separated tokens.
    Tokens { path_a: PathBuf, path_b: PathBuf },
    /// Term-by-document count matrices in the text matrix format.
    Counts { path_a: PathBuf, path_b: PathBuf },
}

/// The generator spec minus its seed, which comes from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticCorpus {
    pub n_docs: usize,
    pub vocab_a: usize,
    pub vocab_b: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    pub topic_concentration: f64,
    pub noise: f64,
    pub zipf_exponent: f64,
    pub doc_len_min: usize,
    pub doc_len_max: usize,
}

impl Default for SyntheticCorpus {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        Self {
            n_docs: s.n_docs,
            vocab_a: s.vocab_a,
            vocab_b: s.vocab_b,
            topics: s.topics,
            words_per_topic: s.words_per_topic,
            topic_concentration: s.topic_concentration,
            noise: s.noise,
            zipf_exponent: s.zipf_exponent,
            doc_len_min: s.doc_len_min,
            doc_len_max: s.doc_len_max,
        }
    }
}

impl SyntheticCorpus {
    pub fn spec(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_docs: self.n_docs,
            vocab_a: self.vocab_a,
            vocab_b: self.vocab_b,
            topics: self.topics,
            words_per_topic: self.words_per_topic,
            topic_concentration: self.topic_concentration,
            noise: self.noise,
            zipf_exponent: self.zipf_exponent,
            doc_len_min: self.doc_len_min,
            doc_len_max: self.doc_len_max,
            seed,
        }
    }
}

impl Default for CorpusSource {
    fn default() -> Self {
        CorpusSource::Synthetic(SyntheticCorpus::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub repeats: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            n_train: 100,
            n_test: 200,
            repeats: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub mu: Option<f64>,
    pub gamma: Option<f64>,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub tol_objective: f64,
    pub tol_kkt: f64,
    pub tol_inner: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = SccaParams::default();
        Self {
            mu: p.mu,
            gamma: p.gamma,
            max_outer_iters: p.max_outer_iters,
            max_inner_iters: p.max_inner_iters,
            tol_objective: p.tol_objective,
            tol_kkt: p.tol_kkt,
            tol_inner: p.tol_inner,
        }
    }
}

impl SolverConfig {
    pub fn params(&self) -> SccaParams {
        SccaParams {
            k: 0,
            mu: self.mu,
            gamma: self.gamma,
            max_outer_iters: self.max_outer_iters,
            max_inner_iters: self.max_inner_iters,
            tol_objective: self.tol_objective,
            tol_kkt: self.tol_kkt,
            tol_inner: self.tol_inner,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeflationConfig {
    pub d_max: usize,
    /// Explicit pinned indices per stage; numerical order when absent.
    pub k_list: Option<Vec<usize>>,
    pub advance_on_collapse: bool,
    pub normalize_directions: bool,
}

impl Default for DeflationConfig {
    fn default() -> Self {
        Self {
            d_max: 30,
            k_list: None,
            advance_on_collapse: true,
            normalize_directions: true,
        }
    }
}

impl DeflationConfig {
    pub fn options(&self) -> DeflationOptions {
        DeflationOptions {
            k_selection: match &self.k_list {
                Some(list) => KSelection::Explicit(list.clone()),
                None => KSelection::NumericalOrder,
            },
            advance_on_collapse: self.advance_on_collapse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KccaConfig {
    pub kappa: f64,
}

impl Default for KccaConfig {
    fn default() -> Self {
        Self { kappa: DEFAULT_KAPPA }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoConfig {
    /// Any of "auto", "sweep", "none".
    pub modes: Vec<String>,
    pub grid_start: f64,
    pub grid_step: f64,
    pub grid_end: f64,
    /// Limit the leave-one-out loop to the first documents.
    pub max_docs: Option<usize>,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            modes: vec!["auto".into(), "sweep".into(), "none".into()],
            grid_start: 0.001,
            grid_step: 0.001,
            grid_end: 1.0,
            max_docs: None,
        }
    }
}

impl LassoConfig {
    pub fn selection_modes(&self) -> Result<Vec<SelectionMode>> {
        self.modes
            .iter()
            .map(|m| match m.as_str() {
                "auto" => Ok(SelectionMode::Auto),
                "none" => Ok(SelectionMode::None),
                "sweep" => Ok(SelectionMode::Sweep(mu_grid(self.grid_start, self.grid_step, self.grid_end)?)),
                other => Err(Error::Config(format!("unknown lasso mode '{other}'"))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Projection counts to evaluate; `1..=d_max` when absent.
    pub d_values: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub models: Vec<String>,
    pub corpus: CorpusSource,
    pub split: SplitConfig,
    pub preprocess: PreprocessOptions,
    pub solver: SolverConfig,
    pub deflation: DeflationConfig,
    pub kcca: KccaConfig,
    pub lasso: LassoConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            out_dir: PathBuf::from("out"),
            models: vec!["scca".into(), "kcca".into(), "random".into()],
            corpus: CorpusSource::default(),
            split: SplitConfig::default(),
            preprocess: PreprocessOptions::default(),
            solver: SolverConfig::default(),
            deflation: DeflationConfig::default(),
            kcca: KccaConfig::default(),
            lasso: LassoConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string().replace('\n', " ")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative corpus paths resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.display().to_string()));
        }
        let mut cfg = Self::from_toml(&fs::read_to_string(path)?)?;
        if let Some(base) = path.parent() {
            match &mut cfg.corpus {
                CorpusSource::Tokens { path_a, path_b } | CorpusSource::Counts { path_a, path_b } => {
                    for p in [path_a, path_b] {
                        if p.is_relative() {
                            *p = base.join(&*p);
                        }
                    }
                }
                CorpusSource::Synthetic(_) => {}
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.split.n_train == 0 || self.split.n_test == 0 || self.split.repeats == 0 {
            return bad("split sizes and repeats must be positive".into());
        }
        if self.deflation.d_max == 0 || self.deflation.d_max > self.split.n_train {
            return bad(format!("d_max must be in 1..={}", self.split.n_train));
        }
        if self.models.is_empty() {
            return bad("no models selected".into());
        }
        if !(self.kcca.kappa >= 0.0) {
            return bad("kappa must be non-negative".into());
        }
        if let Some(ds) = &self.eval.d_values {
            if ds.iter().any(|&d| d == 0 || d > self.deflation.d_max) {
                return bad(format!("eval.d_values must lie in 1..={}", self.deflation.d_max));
            }
        }
        if let CorpusSource::Synthetic(s) = &self.corpus {
            s.spec(self.seed).validate()?;
        }
        self.solver.params().validate(self.split.n_train)?;
        self.lasso.selection_modes()?;
        Ok(())
    }

    pub fn d_values(&self) -> Vec<usize> {
        self.eval
            .d_values
            .clone()
            .unwrap_or_else(|| (1..=self.deflation.d_max).collect())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}
