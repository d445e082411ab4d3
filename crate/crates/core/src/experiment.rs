//! End-to-end experiment steps. Each step reads what the previous one left
//! under the output directory and writes its own subdirectory plus a
//! `manifest.json`:
//!
//! ```text
//! preprocess/  counts_a.txt counts_b.txt vocab_a.txt vocab_b.txt splits.json
//! train/       repeat_XX/<model>/...
//! evaluate/    repeat_XX.csv retrieval.csv
//! lasso/       <mode>.csv summary.csv
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CorpusSource, RunConfig};
use crate::corpus::{apply_preprocessing, fit_view, split, RawPairedCorpus, SplitSpec, View};
use crate::error::{Error, Result};
use crate::eval::{mate_retrieval, random_precision};
use crate::lasso::{mean_std, selection_ratio_experiment, SelectionTable};
use crate::linalg::{cross_kernel, linear_kernel};
use crate::matrix_io::{read_matrix, write_matrix};
use crate::model::{FitSettings, ModelRegistry, TestViews, TrainViews};
use crate::synthetic::generate;

/// Bumped whenever an artifact layout changes.
pub const FORMAT_VERSION: u32 = 1;

const STREAM_CORPUS: u64 = 0;
const STREAM_SPLIT: u64 = 1;
const STREAM_MODEL: u64 = 2;

/// Independent 64-bit seed for one consumer of the run seed.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub step: String,
    pub version: String,
    pub format: u32,
    pub seed: u64,
    pub config_hash: String,
    /// Full configuration as TOML.
    pub config: String,
    pub details: serde_json::Value,
}

impl Manifest {
    fn new(step: &str, cfg: &RunConfig, details: serde_json::Value) -> Self {
        Self {
            step: step.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            format: FORMAT_VERSION,
            seed: cfg.seed,
            config_hash: cfg.hash(),
            config: cfg.to_toml(),
            details,
        }
    }

    fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("manifest.json"), self)
    }

    fn read(dir: &Path) -> Result<Self> {
        read_json(&dir.join("manifest.json"))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.display().to_string()));
    }
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn preprocess_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("preprocess")
}

pub fn train_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("train")
}

pub fn evaluate_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("evaluate")
}

pub fn lasso_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("lasso")
}

fn repeat_dir(cfg: &RunConfig, repeat: usize) -> PathBuf {
    train_dir(cfg).join(format!("repeat_{repeat:02}"))
}

/// Reads or generates the corpus named by the config.
pub fn load_corpus(cfg: &RunConfig) -> Result<RawPairedCorpus> {
    match &cfg.corpus {
        CorpusSource::Synthetic(s) => generate(&s.spec(sub_seed(cfg.seed, STREAM_CORPUS))),
        CorpusSource::Tokens { path_a, path_b } => {
            for p in [path_a, path_b] {
                if !p.exists() {
                    return Err(Error::MissingArtifact(p.display().to_string()));
                }
            }
            RawPairedCorpus::from_token_files(path_a, path_b)
        }
        CorpusSource::Counts { path_a, path_b } => {
            RawPairedCorpus::from_count_matrices(&read_matrix(path_a)?, &read_matrix(path_b)?)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepeatSplit {
    pub repeat: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn write_vocab(path: &Path, vocab: &[String]) -> Result<()> {
    let mut text = vocab.join("\n");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_vocab(path: &Path) -> Result<Vec<String>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.display().to_string()));
    }
    Ok(fs::read_to_string(path)?.lines().map(str::to_string).collect())
}

/// Writes the corpus as count matrices plus the per-repeat splits.
pub fn cmd_preprocess(cfg: &RunConfig) -> Result<()> {
    let corpus = load_corpus(cfg)?;
    let splits = (0..cfg.split.repeats)
        .map(|r| {
            let spec = SplitSpec {
                seed: sub_seed(cfg.seed, STREAM_SPLIT),
                n_train: cfg.split.n_train,
                n_test: cfg.split.n_test,
                repeat_index: r as u64,
            };
            let (train, test) = split(corpus.len(), &spec)?;
            Ok(RepeatSplit { repeat: r, train, test })
        })
        .collect::<Result<Vec<_>>>()?;

    let dir = preprocess_dir(cfg);
    fs::create_dir_all(&dir)?;
    write_matrix(&dir.join("counts_a.txt"), &corpus.count_matrix(View::A))?;
    write_matrix(&dir.join("counts_b.txt"), &corpus.count_matrix(View::B))?;
    write_vocab(&dir.join("vocab_a.txt"), corpus.vocab(View::A))?;
    write_vocab(&dir.join("vocab_b.txt"), corpus.vocab(View::B))?;
    write_json(&dir.join("splits.json"), &splits)?;
    Manifest::new(
        "preprocess",
        cfg,
        serde_json::json!({
            "n_docs": corpus.len(),
            "vocab_a": corpus.vocab(View::A).len(),
            "vocab_b": corpus.vocab(View::B).len(),
            "repeats": splits.len(),
        }),
    )
    .write(&dir)?;
    info!(
        "preprocess: {} documents, vocabularies {} / {}",
        corpus.len(),
        corpus.vocab(View::A).len(),
        corpus.vocab(View::B).len()
    );
    Ok(())
}

/// The corpus and splits written by [`cmd_preprocess`].
pub fn load_preprocessed(cfg: &RunConfig) -> Result<(RawPairedCorpus, Vec<RepeatSplit>)> {
    let dir = preprocess_dir(cfg);
    let corpus = RawPairedCorpus::from_count_matrices(
        &read_matrix(&dir.join("counts_a.txt"))?,
        &read_matrix(&dir.join("counts_b.txt"))?,
    )?
    .with_vocab(read_vocab(&dir.join("vocab_a.txt"))?, read_vocab(&dir.join("vocab_b.txt"))?)?;
    let splits: Vec<RepeatSplit> = read_json(&dir.join("splits.json"))?;
    if splits.len() < cfg.split.repeats {
        return Err(Error::ArtifactMismatch(format!(
            "{} holds {} splits, config asks for {}; rerun preprocess",
            dir.display(),
            splits.len(),
            cfg.split.repeats
        )));
    }
    Ok((corpus, splits))
}

/// Fits preprocessing on the training half and maps the test half with it.
pub fn build_views(cfg: &RunConfig, corpus: &RawPairedCorpus, s: &RepeatSplit) -> Result<(TrainViews, TestViews)> {
    let opts = cfg.preprocess;
    let fa = fit_view(&corpus.select(View::A, &s.train), corpus.vocab(View::A).len(), opts)?;
    let fb = fit_view(&corpus.select(View::B, &s.train), corpus.vocab(View::B).len(), opts)?;
    let ta = apply_preprocessing(&corpus.select(View::A, &s.test), &fa)?;
    let tb = apply_preprocessing(&corpus.select(View::B, &s.test), &fb)?;
    let test = TestViews {
        ks_a: cross_kernel(&ta, &fa.matrix)?,
        ks_b: cross_kernel(&tb, &fb.matrix)?,
        xa: ta,
    };
    let train = TrainViews {
        ka: linear_kernel(&fa.matrix),
        kb: linear_kernel(&fb.matrix),
        xa: fa.matrix,
        xb: fb.matrix,
    };
    Ok((train, test))
}

pub fn fit_settings(cfg: &RunConfig, repeat: usize) -> FitSettings {
    FitSettings {
        d_max: cfg.deflation.d_max,
        scca: cfg.solver.params(),
        deflation: cfg.deflation.options(),
        normalize_directions: cfg.deflation.normalize_directions,
        kappa: cfg.kcca.kappa,
        seed: sub_seed(cfg.seed, STREAM_MODEL + repeat as u64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStatus {
    pub model: String,
    pub ok: bool,
    pub error: Option<String>,
    pub diagnostics: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatTraining {
    pub repeat: usize,
    pub models: Vec<ModelStatus>,
}

/// Fits every configured model on every repeat. A failing model is logged
/// and recorded; the other models and repeats still run.
pub fn cmd_train(cfg: &RunConfig, registry: &ModelRegistry) -> Result<Vec<RepeatTraining>> {
    let learners = cfg
        .models
        .iter()
        .map(|m| registry.get(m))
        .collect::<Result<Vec<_>>>()?;
    let (corpus, splits) = load_preprocessed(cfg)?;
    let results = splits[..cfg.split.repeats]
        .par_iter()
        .map(|s| {
            let (train, _) = build_views(cfg, &corpus, s)?;
            let settings = fit_settings(cfg, s.repeat);
            let dir = repeat_dir(cfg, s.repeat);
            let models = learners
                .iter()
                .map(|learner| {
                    let fitted = learner.fit(&train, &settings).and_then(|space| {
                        space.save(&dir.join(learner.name()))?;
                        Ok(space)
                    });
                    match fitted {
                        Ok(space) => {
                            info!("repeat {}: {} fitted with {} projections", s.repeat, learner.name(), space.n_projections());
                            Ok(ModelStatus {
                                model: learner.name().to_string(),
                                ok: true,
                                error: None,
                                diagnostics: space.diagnostics(),
                            })
                        }
                        Err(e @ (Error::Io(_) | Error::Json(_))) => Err(e),
                        Err(e) => {
                            warn!("repeat {}: {} failed: {e}", s.repeat, learner.name());
                            Ok(ModelStatus {
                                model: learner.name().to_string(),
                                ok: false,
                                error: Some(e.to_string()),
                                diagnostics: serde_json::Value::Null,
                            })
                        }
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RepeatTraining { repeat: s.repeat, models })
        })
        .collect::<Result<Vec<_>>>()?;

    let dir = train_dir(cfg);
    fs::create_dir_all(&dir)?;
    Manifest::new("train", cfg, serde_json::to_value(&results)?).write(&dir)?;
    Ok(results)
}

/// One model at one projection count on one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub repeat: usize,
    pub model: String,
    pub d: usize,
    pub p_ab: f64,
    pub p_ba: f64,
    pub p: f64,
    pub words_used: usize,
    pub docs_used: usize,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalRow {
    pub d: usize,
    pub model: String,
    pub direction: String,
    pub p: f64,
    pub std_over_repeats: f64,
    pub avg_words: f64,
    pub avg_docs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub rows: Vec<RetrievalRow>,
    pub records: Vec<RepeatRecord>,
    /// Expected precision of a random ranking of the test set.
    pub random_expectation: f64,
}

fn evaluate_repeat(
    cfg: &RunConfig,
    registry: &ModelRegistry,
    corpus: &RawPairedCorpus,
    s: &RepeatSplit,
    trained: &RepeatTraining,
) -> Result<Vec<RepeatRecord>> {
    let (_, test) = build_views(cfg, corpus, s)?;
    let mut records = Vec::new();
    for name in &cfg.models {
        match trained.models.iter().find(|m| &m.model == name) {
            Some(status) if status.ok => {}
            Some(_) => {
                warn!("repeat {}: skipping {name}, training failed", s.repeat);
                continue;
            }
            None => {
                return Err(Error::ArtifactMismatch(format!(
                    "model {name} was not trained for repeat {}",
                    s.repeat
                )))
            }
        }
        let space = registry.get(name)?.load(&repeat_dir(cfg, s.repeat).join(name))?;
        for d in cfg.d_values() {
            if d > space.n_projections() {
                warn!("repeat {}: {name} has only {} projections", s.repeat, space.n_projections());
                break;
            }
            let (pa, pb) = space.project(&test, d)?;
            let r = mate_retrieval(&pa, &pb, name)?;
            let sp = space.sparsity(d)?;
            records.push(RepeatRecord {
                repeat: s.repeat,
                model: name.clone(),
                d,
                p_ab: r.p_ab,
                p_ba: r.p_ba,
                p: r.average_precision,
                words_used: sp.words_used,
                docs_used: sp.docs_used,
                n_features: sp.n_features,
            });
        }
    }
    Ok(records)
}

fn aggregate(cfg: &RunConfig, records: &[RepeatRecord]) -> Vec<RetrievalRow> {
    let mut rows = Vec::new();
    for model in &cfg.models {
        for d in cfg.d_values() {
            let group: Vec<&RepeatRecord> = records.iter().filter(|r| &r.model == model && r.d == d).collect();
            if group.is_empty() {
                continue;
            }
            let n = group.len() as f64;
            let avg_words = group.iter().map(|r| r.words_used as f64).sum::<f64>() / n;
            let avg_docs = group.iter().map(|r| r.docs_used as f64).sum::<f64>() / n;
            let directions: [(&str, fn(&RepeatRecord) -> f64); 3] =
                [("a->b", |r| r.p_ab), ("b->a", |r| r.p_ba), ("both", |r| r.p)];
            for (direction, get) in directions {
                let values: Vec<f64> = group.iter().map(|r| get(r)).collect();
                let (p, std) = mean_std(&values);
                rows.push(RetrievalRow {
                    d,
                    model: model.clone(),
                    direction: direction.to_string(),
                    p,
                    std_over_repeats: std,
                    avg_words,
                    avg_docs,
                });
            }
        }
    }
    rows
}

/// Mate retrieval for every trained model, repeat and projection count.
pub fn cmd_evaluate(cfg: &RunConfig, registry: &ModelRegistry) -> Result<EvaluationReport> {
    let (corpus, splits) = load_preprocessed(cfg)?;
    let manifest = Manifest::read(&train_dir(cfg))?;
    let trained: Vec<RepeatTraining> = serde_json::from_value(manifest.details)?;
    let per_repeat = splits[..cfg.split.repeats]
        .par_iter()
        .map(|s| {
            let t = trained.iter().find(|t| t.repeat == s.repeat).ok_or_else(|| {
                Error::MissingArtifact(format!("{} (repeat {})", repeat_dir(cfg, s.repeat).display(), s.repeat))
            })?;
            evaluate_repeat(cfg, registry, &corpus, s, t)
        })
        .collect::<Result<Vec<_>>>()?;

    let dir = evaluate_dir(cfg);
    fs::create_dir_all(&dir)?;
    for (s, recs) in splits.iter().zip(&per_repeat) {
        write_csv(&dir.join(format!("repeat_{:02}.csv", s.repeat)), recs)?;
    }
    let records: Vec<RepeatRecord> = per_repeat.into_iter().flatten().collect();
    let rows = aggregate(cfg, &records);
    write_csv(&dir.join("retrieval.csv"), &rows)?;
    let random_expectation = random_precision(cfg.split.n_test);
    Manifest::new(
        "evaluate",
        cfg,
        serde_json::json!({ "random_expectation": random_expectation, "rows": rows.len() }),
    )
    .write(&dir)?;
    Ok(EvaluationReport {
        rows,
        records,
        random_expectation,
    })
}

/// Leave-one-out selection ratios in each configured penalty mode.
pub fn cmd_lasso_validate(cfg: &RunConfig) -> Result<Vec<SelectionTable>> {
    let (corpus, _) = load_preprocessed(cfg)?;
    let params = cfg.solver.params();
    let tables = cfg
        .lasso
        .selection_modes()?
        .iter()
        .map(|mode| {
            let t = selection_ratio_experiment(&corpus, cfg.preprocess, mode, &params, cfg.lasso.max_docs)?;
            if let Some(s) = t.summary.first() {
                info!("lasso {}: mean ratio {:.3} ± {:.3}", t.mode, s.mean_ratio, s.std_ratio);
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;

    let dir = lasso_dir(cfg);
    fs::create_dir_all(&dir)?;
    for t in &tables {
        write_csv(&dir.join(format!("{}.csv", t.mode)), &t.rows)?;
    }
    let summary: Vec<_> = tables.iter().flat_map(|t| t.summary.iter().cloned()).collect();
    write_csv(&dir.join("summary.csv"), &summary)?;
    Manifest::new("lasso-validate", cfg, serde_json::json!({ "modes": cfg.lasso.modes })).write(&dir)?;
    Ok(tables)
}

pub fn cmd_all(cfg: &RunConfig, registry: &ModelRegistry) -> Result<EvaluationReport> {
    cmd_preprocess(cfg)?;
    cmd_train(cfg, registry)?;
    let report = cmd_evaluate(cfg, registry)?;
    cmd_lasso_validate(cfg)?;
    Ok(report)
}
