//! Paired synthetic corpora with shared latent topics.
//!
//! Each topic owns a small random word set in each vocabulary. A document
//! draws topic proportions once and emits tokens in both views from them,
//! mixed with a Zipf-shaped background that carries no shared signal.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, RawPairedCorpus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_docs: usize,
    pub vocab_a: usize,
    pub vocab_b: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    /// Dirichlet concentration of per-document topic proportions.
    pub topic_concentration: f64,
    /// Fraction of tokens drawn from the background distribution.
    pub noise: f64,
    pub zipf_exponent: f64,
    pub doc_len_min: usize,
    pub doc_len_max: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_docs: 300,
            vocab_a: 5000,
            vocab_b: 5500,
            topics: 50,
            words_per_topic: 15,
            topic_concentration: 0.05,
            noise: 0.4,
            zipf_exponent: 0.8,
            doc_len_min: 100,
            doc_len_max: 200,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("synthetic: {msg}")));
        if self.n_docs == 0 || self.topics == 0 {
            return bad("n_docs and topics must be positive");
        }
        if self.words_per_topic == 0 || self.words_per_topic > self.vocab_a.min(self.vocab_b) {
            return bad("words_per_topic must be in 1..=min(vocab_a, vocab_b)");
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad("noise must be in [0, 1]");
        }
        if !(self.topic_concentration > 0.0) || !(self.zipf_exponent >= 0.0) {
            return bad("concentration must be positive and the Zipf exponent non-negative");
        }
        if self.doc_len_min == 0 || self.doc_len_max <= self.doc_len_min {
            return bad("need 0 < doc_len_min < doc_len_max");
        }
        Ok(())
    }
}

fn dirichlet(rng: &mut ChaCha8Rng, alpha: f64, n: usize) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("positive shape");
    let mut v: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    } else {
        v[rng.random_range(0..n)] = 1.0;
    }
    v
}

struct Language {
    topics: Vec<Vec<(usize, f64)>>,
    background: Vec<f64>,
}

impl Language {
    fn new(rng: &mut ChaCha8Rng, spec: &SyntheticSpec, vocab: usize) -> Self {
        let topics = (0..spec.topics)
            .map(|_| {
                let words = sample(rng, vocab, spec.words_per_topic).into_vec();
                let weights = dirichlet(rng, 1.0, words.len());
                words.into_iter().zip(weights).collect()
            })
            .collect();
        let mut ranks: Vec<usize> = (0..vocab).collect();
        rand::seq::SliceRandom::shuffle(ranks.as_mut_slice(), rng);
        let raw: Vec<f64> = ranks
            .iter()
            .map(|&r| 1.0 / ((r + 1) as f64).powf(spec.zipf_exponent))
            .collect();
        let total: f64 = raw.iter().sum();
        Self {
            topics,
            background: raw.into_iter().map(|p| p / total).collect(),
        }
    }

    fn document(&self, rng: &mut ChaCha8Rng, theta: &[f64], noise: f64, len: usize) -> Document {
        let mut p: Vec<f64> = self.background.iter().map(|b| noise * b).collect();
        for (t, words) in self.topics.iter().enumerate() {
            for &(w, weight) in words {
                p[w] += (1.0 - noise) * theta[t] * weight;
            }
        }
        let dist = WeightedIndex::new(&p).expect("weights are non-negative with positive sum");
        let mut doc = Document::new();
        for _ in 0..len {
            *doc.entry(dist.sample(rng)).or_insert(0) += 1;
        }
        doc
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<RawPairedCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lang_a = Language::new(&mut rng, spec, spec.vocab_a);
    let lang_b = Language::new(&mut rng, spec, spec.vocab_b);
    let mut docs_a = Vec::with_capacity(spec.n_docs);
    let mut docs_b = Vec::with_capacity(spec.n_docs);
    for _ in 0..spec.n_docs {
        let theta = dirichlet(&mut rng, spec.topic_concentration, spec.topics);
        let len_a = rng.random_range(spec.doc_len_min..spec.doc_len_max);
        docs_a.push(lang_a.document(&mut rng, &theta, spec.noise, len_a));
        let len_b = rng.random_range(spec.doc_len_min..spec.doc_len_max);
        docs_b.push(lang_b.document(&mut rng, &theta, spec.noise, len_b));
    }
    let names = |prefix: &str, n: usize| (0..n).map(|i| format!("{prefix}{i:05}")).collect();
    RawPairedCorpus::new(docs_a, docs_b, names("a", spec.vocab_a), names("b", spec.vocab_b))
}
