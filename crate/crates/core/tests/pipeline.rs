use std::fs;
use std::path::Path;
use std::time::Instant;

use scca_core::config::{CorpusSource, RunConfig};
use scca_core::experiment::{cmd_all, cmd_evaluate, cmd_lasso_validate, cmd_preprocess, cmd_train};
use scca_core::model::ModelRegistry;
use scca_core::Error;

const SMALL: &str = r#"
seed = 3
[corpus]
source = "synthetic"
n_docs = 50
vocab_a = 150
vocab_b = 160
topics = 4
words_per_topic = 10
doc_len_min = 30
doc_len_max = 60
[split]
n_train = 25
n_test = 20
repeats = 2
[deflation]
d_max = 4
[lasso]
modes = ["auto", "sweep", "none"]
grid_start = 0.1
grid_step = 0.1
grid_end = 0.3
max_docs = 3
"#;

fn small(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_toml(SMALL).unwrap();
    cfg.out_dir = dir.to_path_buf();
    cfg
}

#[test]
fn later_steps_need_earlier_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let registry = ModelRegistry::default();
    assert!(matches!(cmd_train(&cfg, &registry), Err(Error::MissingArtifact(_))));
    assert!(matches!(cmd_lasso_validate(&cfg), Err(Error::MissingArtifact(_))));
    cmd_preprocess(&cfg).unwrap();
    assert!(matches!(cmd_evaluate(&cfg, &registry), Err(Error::MissingArtifact(_))));
}

#[test]
fn full_run_reports_every_model_and_projection_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let report = cmd_all(&cfg, &ModelRegistry::default()).unwrap();
    for model in ["scca", "kcca", "random"] {
        for d in 1..=4 {
            let both = report
                .rows
                .iter()
                .find(|r| r.model == model && r.d == d && r.direction == "both")
                .unwrap_or_else(|| panic!("no row for {model} at d = {d}"));
            assert!(both.p > 0.0 && both.p <= 1.0);
            assert!(both.std_over_repeats.is_finite());
        }
    }
    assert_eq!(report.records.iter().filter(|r| r.model == "scca" && r.d == 4).count(), 2);
    assert!((report.random_expectation - scca_core::eval::random_precision(20)).abs() < 1e-15);

    let retrieval = fs::read_to_string(dir.path().join("evaluate/retrieval.csv")).unwrap();
    assert!(retrieval.starts_with("d,model,direction,p,std_over_repeats,avg_words,avg_docs"));
    let sweep = fs::read_to_string(dir.path().join("lasso/sweep.csv")).unwrap();
    // three grid points for each of three documents
    assert_eq!(sweep.lines().count(), 1 + 9);
    assert!(dir.path().join("lasso/summary.csv").exists());
}

#[test]
fn counts_and_token_sources_load() {
    let dir = tempfile::tempdir().unwrap();
    let lines_a: Vec<String> = (0..12).map(|i| format!("apple w{} w{} common", i % 4, i % 3)).collect();
    let lines_b: Vec<String> = (0..12).map(|i| format!("pomme m{} m{} commun", i % 4, i % 3)).collect();
    fs::write(dir.path().join("a.txt"), lines_a.join("\n")).unwrap();
    fs::write(dir.path().join("b.txt"), lines_b.join("\n")).unwrap();
    let mut cfg = small(&dir.path().join("tokens"));
    cfg.corpus = CorpusSource::Tokens {
        path_a: dir.path().join("a.txt"),
        path_b: dir.path().join("b.txt"),
    };
    cfg.split.n_train = 6;
    cfg.split.n_test = 6;
    cfg.deflation.d_max = 1;
    cfg.models = vec!["kcca".into()];
    cfg.validate().unwrap();
    cmd_preprocess(&cfg).unwrap();
    cmd_train(&cfg, &ModelRegistry::default()).unwrap();
    let report = cmd_evaluate(&cfg, &ModelRegistry::default()).unwrap();
    assert!(!report.rows.is_empty());

    // the preprocess step writes counts that read back as a counts source
    let pre = dir.path().join("tokens/preprocess");
    let mut counts = cfg.clone();
    counts.out_dir = dir.path().join("counts");
    counts.corpus = CorpusSource::Counts {
        path_a: pre.join("counts_a.txt"),
        path_b: pre.join("counts_b.txt"),
    };
    cmd_preprocess(&counts).unwrap();
    assert_eq!(
        fs::read_to_string(pre.join("counts_a.txt")).unwrap(),
        fs::read_to_string(counts.out_dir.join("preprocess/counts_a.txt")).unwrap()
    );
}

#[test]
fn single_projection_on_a_tiny_corpus_is_quick() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.deflation.d_max = 1;
    cfg.lasso.modes = vec!["auto".into()];
    let start = Instant::now();
    cmd_all(&cfg, &ModelRegistry::default()).unwrap();
    assert!(start.elapsed().as_secs() < 10);
}
