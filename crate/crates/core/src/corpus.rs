//! Paired document collections and their TFIDF representation.
//!
//! A [`RawPairedCorpus`] holds term counts for two aligned views. Fitting a
//! view on training documents produces a [`ProcessedView`] that carries the
//! idf weights, feature means and column norms needed to map unseen
//! documents into the same feature space with [`apply_preprocessing`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DataMatrix;

/// Sparse bag of words: term index → raw count.
pub type Document = BTreeMap<usize, u32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum View {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawPairedCorpus {
    docs_a: Vec<Document>,
    docs_b: Vec<Document>,
    vocab_a: Vec<String>,
    vocab_b: Vec<String>,
}

impl RawPairedCorpus {
    pub fn new(
        docs_a: Vec<Document>,
        docs_b: Vec<Document>,
        vocab_a: Vec<String>,
        vocab_b: Vec<String>,
    ) -> Result<Self> {
        if docs_a.len() != docs_b.len() {
            return Err(Error::DimensionMismatch(format!(
                "paired corpus has {} documents in view A but {} in view B",
                docs_a.len(),
                docs_b.len()
            )));
        }
        for (docs, vocab, name) in [(&docs_a, &vocab_a, "A"), (&docs_b, &vocab_b, "B")] {
            for (d, doc) in docs.iter().enumerate() {
                if let Some((&t, _)) = doc.iter().next_back() {
                    if t >= vocab.len() {
                        return Err(Error::DimensionMismatch(format!(
                            "view {name} document {d} uses term {t} outside a vocabulary of {}",
                            vocab.len()
                        )));
                    }
                }
            }
        }
        Ok(Self {
            docs_a,
            docs_b,
            vocab_a,
            vocab_b,
        })
    }

    /// Builds a corpus from two term-by-document count matrices.
    pub fn from_count_matrices(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Self> {
        let to_docs = |m: &DMatrix<f64>| -> Result<Vec<Document>> {
            m.column_iter()
                .enumerate()
                .map(|(d, col)| {
                    let mut doc = Document::new();
                    for (t, &v) in col.iter().enumerate() {
                        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                            return Err(Error::InvalidParameter(format!(
                                "count matrix entry ({t}, {d}) = {v} is not a count"
                            )));
                        }
                        if v > 0.0 {
                            doc.insert(t, v as u32);
                        }
                    }
                    Ok(doc)
                })
                .collect()
        };
        let names = |n: usize, p: &str| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        Self::new(
            to_docs(a)?,
            to_docs(b)?,
            names(a.nrows(), "a"),
            names(b.nrows(), "b"),
        )
    }

    /// Replaces the generated term names of [`Self::from_count_matrices`].
    pub fn with_vocab(mut self, vocab_a: Vec<String>, vocab_b: Vec<String>) -> Result<Self> {
        if vocab_a.len() != self.vocab_a.len() || vocab_b.len() != self.vocab_b.len() {
            return Err(Error::DimensionMismatch(format!(
                "vocabularies of {} and {} terms for count matrices with {} and {} rows",
                vocab_a.len(),
                vocab_b.len(),
                self.vocab_a.len(),
                self.vocab_b.len()
            )));
        }
        self.vocab_a = vocab_a;
        self.vocab_b = vocab_b;
        Ok(self)
    }

    /// Reads two whitespace-tokenized files, one document per line, paired
    /// by line number. Vocabularies are the sorted distinct tokens.
    pub fn from_token_files(path_a: &Path, path_b: &Path) -> Result<Self> {
        let a = read_token_lines(path_a)?;
        let b = read_token_lines(path_b)?;
        if a.len() != b.len() {
            return Err(Error::Parse {
                path: path_b.display().to_string(),
                line: a.len().min(b.len()) + 1,
                msg: format!(
                    "paired files have {} and {} documents",
                    a.len(),
                    b.len()
                ),
            });
        }
        let (docs_a, vocab_a) = index_tokens(&a);
        let (docs_b, vocab_b) = index_tokens(&b);
        Self::new(docs_a, docs_b, vocab_a, vocab_b)
    }

    pub fn len(&self) -> usize {
        self.docs_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs_a.is_empty()
    }

    pub fn docs(&self, view: View) -> &[Document] {
        match view {
            View::A => &self.docs_a,
            View::B => &self.docs_b,
        }
    }

    pub fn vocab(&self, view: View) -> &[String] {
        match view {
            View::A => &self.vocab_a,
            View::B => &self.vocab_b,
        }
    }

    /// Documents of one view at the given indices, in order.
    pub fn select(&self, view: View, indices: &[usize]) -> Vec<Document> {
        let docs = self.docs(view);
        indices.iter().map(|&i| docs[i].clone()).collect()
    }

    /// Term-by-document count matrix of one view.
    pub fn count_matrix(&self, view: View) -> DMatrix<f64> {
        let docs = self.docs(view);
        let mut m = DMatrix::zeros(self.vocab(view).len(), docs.len());
        for (d, doc) in docs.iter().enumerate() {
            for (&t, &c) in doc {
                m[(t, d)] = c as f64;
            }
        }
        m
    }
}

fn read_token_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.display().to_string()));
    }
    let bytes = fs::read(path)?;
    let mut docs = Vec::new();
    let body = bytes.strip_suffix(b"\n").unwrap_or(&bytes);
    if body.is_empty() {
        return Ok(docs);
    }
    for (i, line) in body.split(|&b| b == b'\n').enumerate() {
        let line = std::str::from_utf8(line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            msg: format!("invalid UTF-8: {e}"),
        })?;
        if let Some(c) = line.chars().find(|c| c.is_control() && !c.is_whitespace()) {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg: format!("control character {c:?} in document"),
            });
        }
        docs.push(line.split_whitespace().map(str::to_owned).collect());
    }
    Ok(docs)
}

fn index_tokens(docs: &[Vec<String>]) -> (Vec<Document>, Vec<String>) {
    let vocab: Vec<String> = docs
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let indexed = docs
        .iter()
        .map(|toks| {
            let mut doc = Document::new();
            for t in toks {
                let id = vocab.binary_search(t).expect("token is in vocabulary");
                *doc.entry(id).or_insert(0) += 1;
            }
            doc
        })
        .collect();
    (indexed, vocab)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdfVariant {
    /// `ln(ℓ / df)`
    #[default]
    Log,
    /// `ln((1 + ℓ) / (1 + df)) + 1`
    Smooth,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnNorm {
    #[default]
    L2,
    None,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessOptions {
    #[serde(default)]
    pub idf: IdfVariant,
    #[serde(default)]
    pub norm: ColumnNorm,
}

/// One view after TFIDF weighting, optionally centered and normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedView {
    pub matrix: DataMatrix,
    /// Vocabulary index of each feature row (terms with df = 0 are dropped).
    pub feature_terms: Vec<usize>,
    pub idf: Vec<f64>,
    /// Row means removed by centering; zero before centering.
    pub feature_means: DVector<f64>,
    /// Column scaling applied by normalization; one before normalization.
    pub norms: Vec<f64>,
    /// Nonzero TFIDF entries per document, counted before centering.
    pub raw_nonzero_counts: Vec<usize>,
    pub centered: bool,
    pub norm: ColumnNorm,
}

pub fn tfidf(raw: &RawPairedCorpus, view: View) -> Result<ProcessedView> {
    tfidf_docs(raw.docs(view), raw.vocab(view).len(), IdfVariant::Log)
}

pub fn tfidf_docs(
    docs: &[Document],
    vocab_len: usize,
    variant: IdfVariant,
) -> Result<ProcessedView> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if vocab_len == 0 {
        return Err(Error::EmptyVocabulary);
    }
    let mut df = vec![0usize; vocab_len];
    for doc in docs {
        for (&t, &c) in doc {
            if c > 0 {
                df[t] += 1;
            }
        }
    }
    let feature_terms: Vec<usize> = (0..vocab_len).filter(|&t| df[t] > 0).collect();
    if feature_terms.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let n = docs.len() as f64;
    let idf: Vec<f64> = feature_terms
        .iter()
        .map(|&t| {
            let df = df[t] as f64;
            match variant {
                IdfVariant::Log => (n / df).ln(),
                IdfVariant::Smooth => ((1.0 + n) / (1.0 + df)).ln() + 1.0,
            }
        })
        .collect();
    let row_of = row_lookup(&feature_terms, vocab_len);

    let mut m = DMatrix::zeros(feature_terms.len(), docs.len());
    let mut raw_nonzero_counts = vec![0; docs.len()];
    for (d, doc) in docs.iter().enumerate() {
        for (&t, &c) in doc {
            if let Some(r) = row_of[t] {
                let v = c as f64 * idf[r];
                m[(r, d)] = v;
                if v != 0.0 {
                    raw_nonzero_counts[d] += 1;
                }
            }
        }
    }
    let rows = feature_terms.len();
    Ok(ProcessedView {
        matrix: DataMatrix::new(m)?,
        feature_terms,
        idf,
        feature_means: DVector::zeros(rows),
        norms: vec![1.0; docs.len()],
        raw_nonzero_counts,
        centered: false,
        norm: ColumnNorm::None,
    })
}

pub fn center_and_normalize(view: ProcessedView) -> ProcessedView {
    center_and_scale(view, ColumnNorm::L2)
}

/// Subtracts row means, then scales columns by the chosen norm. Zero
/// columns are left untouched.
pub fn center_and_scale(mut view: ProcessedView, norm: ColumnNorm) -> ProcessedView {
    let mut m = view.matrix.into_inner();
    let means = m.column_mean();
    for mut col in m.column_iter_mut() {
        col -= &means;
    }
    let norms: Vec<f64> = m
        .column_iter_mut()
        .map(|mut col| scale_column(&mut col, norm))
        .collect();
    view.matrix = DataMatrix::new(m).expect("centering keeps entries finite");
    view.feature_means = &view.feature_means + means;
    view.norms = norms;
    view.centered = true;
    view.norm = norm;
    view
}

fn scale_column(col: &mut nalgebra::DVectorViewMut<'_, f64>, norm: ColumnNorm) -> f64 {
    match norm {
        ColumnNorm::None => 1.0,
        ColumnNorm::L2 => {
            let n = col.norm();
            if n > 0.0 {
                *col /= n;
                n
            } else {
                1.0
            }
        }
    }
}

/// Fits TFIDF + centering + normalization on training documents.
pub fn fit_view(docs: &[Document], vocab_len: usize, opts: PreprocessOptions) -> Result<ProcessedView> {
    let raw = tfidf_docs(docs, vocab_len, opts.idf)?;
    Ok(center_and_scale(raw, opts.norm))
}

/// Maps unseen documents with the training idf and means. Terms that were
/// not training features are dropped; each column then gets its own norm.
pub fn apply_preprocessing(test_docs: &[Document], fitted: &ProcessedView) -> Result<DataMatrix> {
    if test_docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let vocab_len = fitted
        .feature_terms
        .last()
        .map_or(0, |&t| t + 1)
        .max(test_docs.iter().filter_map(|d| d.keys().next_back()).map(|&t| t + 1).max().unwrap_or(0));
    let row_of = row_lookup(&fitted.feature_terms, vocab_len);
    let rows = fitted.feature_terms.len();
    let mut m = DMatrix::zeros(rows, test_docs.len());
    for (d, doc) in test_docs.iter().enumerate() {
        for (&t, &c) in doc {
            if let Some(r) = row_of[t] {
                m[(r, d)] = c as f64 * fitted.idf[r];
            }
        }
    }
    if fitted.centered {
        for mut col in m.column_iter_mut() {
            col -= &fitted.feature_means;
            scale_column(&mut col, fitted.norm);
        }
    }
    DataMatrix::new(m)
}

fn row_lookup(feature_terms: &[usize], vocab_len: usize) -> Vec<Option<usize>> {
    let mut row_of = vec![None; vocab_len];
    for (r, &t) in feature_terms.iter().enumerate() {
        row_of[t] = Some(r);
    }
    row_of
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub repeat_index: u64,
}

/// Random disjoint train/test index sets, each sorted ascending.
/// Deterministic in `(seed, repeat_index)`.
pub fn split(n_docs: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if spec.n_train == 0 || spec.n_test == 0 {
        return Err(Error::InvalidSplit("train and test sizes must be positive".into()));
    }
    if spec.n_train + spec.n_test > n_docs {
        return Err(Error::InvalidSplit(format!(
            "{} train + {} test exceeds corpus size {n_docs}",
            spec.n_train, spec.n_test
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(spec.repeat_index);
    let mut idx: Vec<usize> = (0..n_docs).collect();
    idx.shuffle(&mut rng);
    let mut train = idx[..spec.n_train].to_vec();
    let mut test = idx[spec.n_train..spec.n_train + spec.n_test].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(pairs: &[(usize, u32)]) -> Document {
        pairs.iter().copied().collect()
    }

    #[test]
    fn single_doc_has_zero_idf() {
        let c = RawPairedCorpus::new(
            vec![doc(&[(0, 2), (1, 1)])],
            vec![doc(&[(0, 1)])],
            vec!["x".into(), "y".into()],
            vec!["z".into()],
        )
        .unwrap();
        let v = tfidf(&c, View::A).unwrap();
        assert_eq!(v.matrix.matrix().amax(), 0.0);
        assert_eq!(v.raw_nonzero_counts, vec![0]);
    }

    #[test]
    fn two_doc_tfidf_by_hand() {
        let c = RawPairedCorpus::new(
            vec![doc(&[(0, 3), (1, 1)]), doc(&[(1, 2)])],
            vec![doc(&[]), doc(&[])],
            vec!["a".into(), "b".into()],
            vec!["z".into()],
        )
        .unwrap();
        let v = tfidf(&c, View::A).unwrap();
        let m = v.matrix.matrix();
        assert!((m[(0, 0)] - 3.0 * 2f64.ln()).abs() < 1e-12);
        assert!((m[(0, 0)] - 2.079).abs() < 1e-3);
        assert_eq!(m[(0, 1)], 0.0);
        // "b" is in every document
        assert_eq!(m[(1, 0)], 0.0);
        assert_eq!(m[(1, 1)], 0.0);
    }

    #[test]
    fn empty_corpus_is_error() {
        assert!(matches!(
            tfidf_docs(&[], 3, IdfVariant::Log),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn zero_token_document_is_zero_column() {
        let v = tfidf_docs(&[doc(&[(0, 1)]), doc(&[])], 1, IdfVariant::Log).unwrap();
        assert_eq!(v.matrix.matrix()[(0, 1)], 0.0);
        assert_eq!(v.raw_nonzero_counts, vec![1, 0]);
    }

    #[test]
    fn nonzero_counts_match_distinct_terms() {
        // 10 docs; term t appears in docs d where (d + t) % 3 != 0, so no
        // term is universal and every present term has nonzero tfidf
        let docs: Vec<Document> = (0..10)
            .map(|d| {
                (0..7)
                    .filter(|t| (d + t) % 3 != 0)
                    .map(|t| (t, (1 + (d * t) % 4) as u32))
                    .collect()
            })
            .collect();
        let v = tfidf_docs(&docs, 7, IdfVariant::Log).unwrap();
        let expected: Vec<usize> = docs.iter().map(|d| d.len()).collect();
        assert_eq!(v.raw_nonzero_counts, expected);
        let centered = center_and_normalize(v.clone());
        assert_eq!(centered.raw_nonzero_counts, expected);
    }

    fn view_from(m: DMatrix<f64>) -> ProcessedView {
        let (r, c) = m.shape();
        ProcessedView {
            matrix: DataMatrix::new(m).unwrap(),
            feature_terms: (0..r).collect(),
            idf: vec![1.0; r],
            feature_means: DVector::zeros(r),
            norms: vec![1.0; c],
            raw_nonzero_counts: vec![0; c],
            centered: false,
            norm: ColumnNorm::None,
        }
    }

    #[test]
    fn centering_examples() {
        let v = center_and_normalize(view_from(DMatrix::from_row_slice(1, 2, &[1.0, -1.0])));
        assert_eq!(v.matrix.matrix(), &DMatrix::from_row_slice(1, 2, &[1.0, -1.0]));

        let v = center_and_normalize(view_from(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0])));
        assert_eq!(v.feature_means.as_slice(), &[1.0, 1.0]);
        let s = 1.0 / 2f64.sqrt();
        let expected = DMatrix::from_row_slice(2, 2, &[s, -s, -s, s]);
        assert!((v.matrix.matrix() - expected).amax() < 1e-15);
        assert_eq!(v.norms, vec![2f64.sqrt(), 2f64.sqrt()]);

        let v = center_and_normalize(view_from(DMatrix::from_row_slice(2, 3, &[4.0, 4.0, 4.0, 1.0, 2.0, 3.0])));
        assert!(v.matrix.matrix().row(0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn centering_is_idempotent() {
        let m = DMatrix::from_fn(5, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.3);
        let once = center_and_scale(view_from(m), ColumnNorm::None);
        let twice = center_and_scale(once.clone(), ColumnNorm::None);
        assert!((once.matrix.matrix() - twice.matrix.matrix()).amax() <= 1e-12);
        for row in once.matrix.matrix().row_iter() {
            assert!(row.sum().abs() <= 1e-9 * 6.0 * once.matrix.matrix().amax());
        }
    }

    fn small_fit() -> (Vec<Document>, ProcessedView) {
        let docs = vec![
            doc(&[(0, 2), (1, 1)]),
            doc(&[(1, 3), (2, 1)]),
            doc(&[(0, 1), (2, 2), (3, 1)]),
        ];
        let fitted = fit_view(&docs, 5, PreprocessOptions::default()).unwrap();
        (docs, fitted)
    }

    #[test]
    fn test_doc_identical_to_train_doc() {
        let (docs, fitted) = small_fit();
        let t = apply_preprocessing(&docs[1..2], &fitted).unwrap();
        let diff = (t.matrix().column(0) - fitted.matrix.matrix().column(1)).amax();
        assert!(diff < 1e-14);
    }

    #[test]
    fn empty_and_unseen_test_docs() {
        let (_, fitted) = small_fit();
        let t = apply_preprocessing(&[doc(&[]), doc(&[(4, 5)])], &fitted).unwrap();
        // oracle: explicit -mean then unit norm
        let mut expected = -fitted.feature_means.clone();
        let n = expected.norm();
        expected /= n;
        assert!((t.matrix().column(0) - &expected).amax() < 1e-14);
        assert_eq!(t.matrix().column(0), t.matrix().column(1));
    }

    #[test]
    fn split_determinism_and_sizes() {
        let spec = SplitSpec { seed: 42, n_train: 50, n_test: 250, repeat_index: 3 };
        let (tr, te) = split(300, &spec).unwrap();
        assert_eq!(split(300, &spec).unwrap(), (tr.clone(), te.clone()));
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..300).collect::<Vec<_>>());

        let spec = SplitSpec { seed: 1, n_train: 100, n_test: 900, repeat_index: 0 };
        let (tr, te) = split(1000, &spec).unwrap();
        assert_eq!((tr.len(), te.len()), (100, 900));
        assert!(tr.iter().all(|i| te.binary_search(i).is_err()));

        let other = split(1000, &SplitSpec { repeat_index: 1, ..spec }).unwrap();
        assert_ne!(other.0, tr);
    }

    #[test]
    fn split_too_large() {
        let spec = SplitSpec { seed: 0, n_train: 10, n_test: 11, repeat_index: 0 };
        assert!(matches!(split(20, &spec), Err(Error::InvalidSplit(_))));
    }

    #[test]
    fn token_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        fs::write(&a, "the cat sat\nthe dog\n").unwrap();
        fs::write(&b, "le chat\nle chien le\n").unwrap();
        let c = RawPairedCorpus::from_token_files(&a, &b).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.vocab(View::A), &["cat", "dog", "sat", "the"]);
        let le = c.vocab(View::B).iter().position(|t| t == "le").unwrap();
        assert_eq!(c.docs(View::B)[1][&le], 2);
    }

    #[test]
    fn token_file_errors_carry_line() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        fs::write(&a, b"ok\nbad \xff byte\n").unwrap();
        fs::write(&b, "x\ny\n").unwrap();
        match RawPairedCorpus::from_token_files(&a, &b) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&a, "one\n").unwrap();
        assert!(matches!(
            RawPairedCorpus::from_token_files(&a, &b),
            Err(Error::Parse { .. })
        ));
    }

    proptest::proptest! {
        #[test]
        fn absent_term_has_zero_weight(counts in proptest::collection::vec(0u32..4, 24)) {
            let docs: Vec<Document> = counts
                .chunks(6)
                .map(|c| c.iter().enumerate().filter(|(_, &v)| v > 0).map(|(t, &v)| (t, v)).collect())
                .collect();
            if let Ok(v) = tfidf_docs(&docs, 6, IdfVariant::Log) {
                for (r, &t) in v.feature_terms.iter().enumerate() {
                    for (d, doc) in docs.iter().enumerate() {
                        if !doc.contains_key(&t) {
                            proptest::prop_assert_eq!(v.matrix.matrix()[(r, d)], 0.0);
                        }
                    }
                }
            }
        }
    }
}
