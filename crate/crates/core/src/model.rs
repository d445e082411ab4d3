//! Interchangeable semantic-space learners behind a name-keyed registry.
//!
//! A learner fits on paired training views and yields a [`SemanticSpace`]
//! that projects test documents of both views into a shared coordinate
//! system. The experiment pipeline only sees these traits, so a new model
//! needs one registration and nothing else.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::deflation::{run_sequence, DeflationOptions, StageReport};
use crate::error::{Error, Result};
use crate::eval::{nonzero_rows, SparsityReport};
use crate::kcca::fit_kcca;
use crate::linalg::{CrossKernel, DataMatrix, KernelMatrix};
use crate::matrix_io::{read_matrix, write_matrix};
use crate::scca::SccaParams;

/// Training views: view A enters the primal side, view B the kernel side.
pub struct TrainViews {
    pub xa: DataMatrix,
    pub xb: DataMatrix,
    pub ka: KernelMatrix,
    pub kb: KernelMatrix,
}

/// Test documents and their cross kernels against the training set.
pub struct TestViews {
    pub xa: DataMatrix,
    pub ks_a: CrossKernel,
    pub ks_b: CrossKernel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub d_max: usize,
    pub scca: SccaParams,
    pub deflation: DeflationOptions,
    /// Scale each projection so its training scores have unit norm.
    pub normalize_directions: bool,
    pub kappa: f64,
    pub seed: u64,
}

pub trait SemanticSpace: Send + Sync {
    fn model(&self) -> &'static str;

    fn n_projections(&self) -> usize;

    /// `n_test × d` coordinates of the test documents of view A and view B.
    fn project(&self, test: &TestViews, d: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)>;

    fn sparsity(&self, d: usize) -> Result<SparsityReport>;

    fn save(&self, dir: &Path) -> Result<()>;

    /// Free-form fit diagnostics for the run manifest.
    fn diagnostics(&self) -> serde_json::Value {
        serde_json::Value::Null
    }
}

pub trait SpaceLearner: Send + Sync {
    fn name(&self) -> &'static str;

    fn fit(&self, train: &TrainViews, settings: &FitSettings) -> Result<Box<dyn SemanticSpace>>;

    fn load(&self, dir: &Path) -> Result<Box<dyn SemanticSpace>>;
}

pub struct ModelRegistry {
    learners: Vec<Box<dyn SpaceLearner>>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(SccaLearner));
        r.register(Box::new(KccaLearner));
        r.register(Box::new(RandomLearner));
        r
    }
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self { learners: Vec::new() }
    }

    /// Adds a learner, replacing any previous one with the same name.
    pub fn register(&mut self, learner: Box<dyn SpaceLearner>) {
        self.learners.retain(|l| l.name() != learner.name());
        self.learners.push(learner);
    }

    pub fn get(&self, name: &str) -> Result<&dyn SpaceLearner> {
        self.learners
            .iter()
            .find(|l| l.name() == name)
            .map(|l| l.as_ref())
            .ok_or_else(|| Error::UnknownModel(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.learners.iter().map(|l| l.name()).collect()
    }
}

fn check_d(d: usize, available: usize) -> Result<()> {
    if d == 0 || d > available {
        return Err(Error::InvalidParameter(format!("d = {d} must be in 1..={available}")));
    }
    Ok(())
}

fn check_test(test: &TestViews, m: usize, l: usize) -> Result<()> {
    if test.xa.n_features() != m || test.ks_a.n_train() != l || test.ks_b.n_train() != l {
        return Err(Error::ArtifactMismatch(format!(
            "model expects {m} features and {l} training documents"
        )));
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.display().to_string()));
    }
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn column_scales(scores: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        scores.ncols(),
        scores.column_iter().map(|c| {
            let n = c.norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        }),
    )
}

fn scale_columns(mut m: DMatrix<f64>, scales: &DVector<f64>) -> DMatrix<f64> {
    for (j, mut col) in m.column_iter_mut().enumerate() {
        col /= scales[j];
    }
    m
}

pub struct SccaLearner;

pub struct SccaSpace {
    w_eff: DMatrix<f64>,
    e_eff: DMatrix<f64>,
    w_raw: DMatrix<f64>,
    e_raw: DMatrix<f64>,
    /// Row 0: primal column scales; row 1: dual column scales.
    scales: DMatrix<f64>,
    stages: Vec<StageReport>,
}

impl SpaceLearner for SccaLearner {
    fn name(&self) -> &'static str {
        "scca"
    }

    fn fit(&self, train: &TrainViews, settings: &FitSettings) -> Result<Box<dyn SemanticSpace>> {
        let basis = run_sequence(&train.xa, &train.kb, settings.d_max, &settings.scca, &settings.deflation)?;
        let d = basis.n_stages();
        let scales = if settings.normalize_directions {
            let a = column_scales(&train.xa.matrix().tr_mul(&basis.w_eff));
            let b = column_scales(&(train.kb.matrix() * &basis.e_eff));
            DMatrix::from_fn(2, d, |i, j| if i == 0 { a[j] } else { b[j] })
        } else {
            DMatrix::from_element(2, d, 1.0)
        };
        Ok(Box::new(SccaSpace {
            w_eff: basis.w_eff,
            e_eff: basis.e_eff,
            w_raw: basis.w_raw,
            e_raw: basis.e_raw,
            scales,
            stages: basis.stages,
        }))
    }

    fn load(&self, dir: &Path) -> Result<Box<dyn SemanticSpace>> {
        let space = SccaSpace {
            w_eff: read_matrix(&dir.join("w_eff.txt"))?,
            e_eff: read_matrix(&dir.join("e_eff.txt"))?,
            w_raw: read_matrix(&dir.join("w_raw.txt"))?,
            e_raw: read_matrix(&dir.join("e_raw.txt"))?,
            scales: read_matrix(&dir.join("scales.txt"))?,
            stages: read_json(&dir.join("stages.json"))?,
        };
        let d = space.w_eff.ncols();
        if [space.e_eff.ncols(), space.w_raw.ncols(), space.e_raw.ncols(), space.scales.ncols()]
            .iter()
            .any(|&c| c != d)
        {
            return Err(Error::ArtifactMismatch(format!("{}: inconsistent stage counts", dir.display())));
        }
        Ok(Box::new(space))
    }
}

impl SemanticSpace for SccaSpace {
    fn model(&self) -> &'static str {
        "scca"
    }

    fn n_projections(&self) -> usize {
        self.w_eff.ncols()
    }

    fn project(&self, test: &TestViews, d: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        check_d(d, self.n_projections())?;
        check_test(test, self.w_eff.nrows(), self.e_eff.nrows())?;
        let sa = self.scales.row(0).columns(0, d).transpose();
        let sb = self.scales.row(1).columns(0, d).transpose();
        let a = test.xa.matrix().tr_mul(&self.w_eff.columns(0, d));
        let b = test.ks_b.matrix() * self.e_eff.columns(0, d);
        Ok((scale_columns(a, &sa), scale_columns(b, &sb)))
    }

    fn sparsity(&self, d: usize) -> Result<SparsityReport> {
        check_d(d, self.n_projections())?;
        Ok(SparsityReport {
            n_projections: d,
            words_used: nonzero_rows(&self.w_raw, d),
            docs_used: nonzero_rows(&self.e_raw, d),
            n_features: self.w_raw.nrows(),
            n_samples: self.e_raw.nrows(),
        })
    }

    fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_matrix(&dir.join("w_eff.txt"), &self.w_eff)?;
        write_matrix(&dir.join("e_eff.txt"), &self.e_eff)?;
        write_matrix(&dir.join("w_raw.txt"), &self.w_raw)?;
        write_matrix(&dir.join("e_raw.txt"), &self.e_raw)?;
        write_matrix(&dir.join("scales.txt"), &self.scales)?;
        write_json(&dir.join("stages.json"), &self.stages)
    }

    fn diagnostics(&self) -> serde_json::Value {
        serde_json::json!({
            "d": self.stages.len(),
            "k": self.stages.iter().map(|s| s.k).collect::<Vec<_>>(),
            "converged": self.stages.iter().map(|s| s.converged).collect::<Vec<_>>(),
        })
    }
}

pub struct KccaLearner;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct KccaMeta {
    kappa: f64,
    correlations: Vec<f64>,
    /// Features with nonzero primal weight `X_aα` for each prefix of directions.
    words_used: Vec<usize>,
    n_features: usize,
}

pub struct KccaSpace {
    alpha: DMatrix<f64>,
    beta: DMatrix<f64>,
    meta: KccaMeta,
}

impl SpaceLearner for KccaLearner {
    fn name(&self) -> &'static str {
        "kcca"
    }

    fn fit(&self, train: &TrainViews, settings: &FitSettings) -> Result<Box<dyn SemanticSpace>> {
        let model = fit_kcca(&train.ka, &train.kb, settings.kappa, settings.d_max)?;
        let primal = train.xa.matrix() * &model.alpha_dirs;
        let words_used = (1..=model.alpha_dirs.ncols()).map(|d| nonzero_rows(&primal, d)).collect();
        Ok(Box::new(KccaSpace {
            alpha: model.alpha_dirs,
            beta: model.beta_dirs,
            meta: KccaMeta {
                kappa: model.kappa,
                correlations: model.correlations,
                words_used,
                n_features: train.xa.n_features(),
            },
        }))
    }

    fn load(&self, dir: &Path) -> Result<Box<dyn SemanticSpace>> {
        let space = KccaSpace {
            alpha: read_matrix(&dir.join("alpha.txt"))?,
            beta: read_matrix(&dir.join("beta.txt"))?,
            meta: read_json(&dir.join("kcca.json"))?,
        };
        if space.alpha.shape() != space.beta.shape() || space.meta.words_used.len() != space.alpha.ncols() {
            return Err(Error::ArtifactMismatch(format!("{}: inconsistent KCCA model", dir.display())));
        }
        Ok(Box::new(space))
    }
}

impl SemanticSpace for KccaSpace {
    fn model(&self) -> &'static str {
        "kcca"
    }

    fn n_projections(&self) -> usize {
        self.alpha.ncols()
    }

    fn project(&self, test: &TestViews, d: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        check_d(d, self.n_projections())?;
        check_test(test, self.meta.n_features, self.alpha.nrows())?;
        Ok((
            test.ks_a.matrix() * self.alpha.columns(0, d),
            test.ks_b.matrix() * self.beta.columns(0, d),
        ))
    }

    fn sparsity(&self, d: usize) -> Result<SparsityReport> {
        check_d(d, self.n_projections())?;
        Ok(SparsityReport {
            n_projections: d,
            words_used: self.meta.words_used[d - 1],
            docs_used: nonzero_rows(&self.alpha, d).max(nonzero_rows(&self.beta, d)),
            n_features: self.meta.n_features,
            n_samples: self.alpha.nrows(),
        })
    }

    fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_matrix(&dir.join("alpha.txt"), &self.alpha)?;
        write_matrix(&dir.join("beta.txt"), &self.beta)?;
        write_json(&dir.join("kcca.json"), &self.meta)
    }

    fn diagnostics(&self) -> serde_json::Value {
        serde_json::json!({ "kappa": self.meta.kappa, "correlations": self.meta.correlations })
    }
}

/// Gaussian random directions on both sides; a chance-level control.
pub struct RandomLearner;

pub struct RandomSpace {
    w: DMatrix<f64>,
    e: DMatrix<f64>,
}

impl SpaceLearner for RandomLearner {
    fn name(&self) -> &'static str {
        "random"
    }

    fn fit(&self, train: &TrainViews, settings: &FitSettings) -> Result<Box<dyn SemanticSpace>> {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        let mut draw = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
        let w = draw(train.xa.n_features(), settings.d_max);
        let e = draw(train.kb.size(), settings.d_max);
        Ok(Box::new(RandomSpace { w, e }))
    }

    fn load(&self, dir: &Path) -> Result<Box<dyn SemanticSpace>> {
        let space = RandomSpace {
            w: read_matrix(&dir.join("w.txt"))?,
            e: read_matrix(&dir.join("e.txt"))?,
        };
        if space.w.ncols() != space.e.ncols() {
            return Err(Error::ArtifactMismatch(format!("{}: inconsistent random model", dir.display())));
        }
        Ok(Box::new(space))
    }
}

impl SemanticSpace for RandomSpace {
    fn model(&self) -> &'static str {
        "random"
    }

    fn n_projections(&self) -> usize {
        self.w.ncols()
    }

    fn project(&self, test: &TestViews, d: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        check_d(d, self.n_projections())?;
        check_test(test, self.w.nrows(), self.e.nrows())?;
        Ok((
            test.xa.matrix().tr_mul(&self.w.columns(0, d)),
            test.ks_b.matrix() * self.e.columns(0, d),
        ))
    }

    fn sparsity(&self, d: usize) -> Result<SparsityReport> {
        check_d(d, self.n_projections())?;
        Ok(SparsityReport {
            n_projections: d,
            words_used: nonzero_rows(&self.w, d),
            docs_used: nonzero_rows(&self.e, d),
            n_features: self.w.nrows(),
            n_samples: self.e.nrows(),
        })
    }

    fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_matrix(&dir.join("w.txt"), &self.w)?;
        write_matrix(&dir.join("e.txt"), &self.e)
    }
}
