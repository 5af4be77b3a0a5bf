//! BM25 relevance scoring and candidate pool construction.

use std::collections::HashMap;

use crate::catalog::Catalog;
use crate::error::{Error, Result};

/// Okapi BM25 parameters.
#[derive(Debug, Clone, Copy)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// Splits on non-alphanumeric characters and case-folds.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Immutable corpus statistics over `Item.text` tokens.
///
/// Scoring uses the non-negative idf variant
/// `ln(1 + (N - df + 0.5) / (df + 0.5))`, so scores are always >= 0 and query
/// terms absent from the corpus contribute 0.
pub struct Bm25Index {
    postings: HashMap<String, Vec<(u32, u32)>>, // term -> (doc, tf), sorted by doc
    doc_len: Vec<u32>,
    avg_len: f64,
}

impl Bm25Index {
    pub fn build(catalog: &Catalog) -> Self {
        let n = catalog.len();
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        let mut doc_len = vec![0u32; n];
        for (i, item) in catalog.items().iter().enumerate() {
            let tokens = tokenize(&item.text);
            doc_len[i] = tokens.len() as u32;
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in tokens {
                *tf.entry(t).or_insert(0) += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push((i as u32, count));
            }
        }
        for list in postings.values_mut() {
            list.sort_unstable_by_key(|&(doc, _)| doc);
        }
        let total: u64 = doc_len.iter().map(|&l| l as u64).sum();
        let avg_len = if n == 0 { 0.0 } else { total as f64 / n as f64 };
        Self { postings, doc_len, avg_len }
    }

    pub fn num_docs(&self) -> usize {
        self.doc_len.len()
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.num_docs() as f64;
        (1.0 + (n - df as f64 + 0.5) / (df as f64 + 0.5)).ln()
    }

    fn term_score(&self, tf: u32, dl: u32, df: usize, params: &Bm25Params) -> f64 {
        let tf = tf as f64;
        let norm = if self.avg_len > 0.0 { dl as f64 / self.avg_len } else { 0.0 };
        self.idf(df) * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm))
    }

    /// BM25 score of one item against `query`.
    pub fn score(&self, query: &str, item: usize, params: &Bm25Params) -> f64 {
        let mut total = 0.0;
        for term in tokenize(query) {
            if let Some(list) = self.postings.get(&term) {
                if let Ok(pos) = list.binary_search_by_key(&(item as u32), |&(doc, _)| doc) {
                    total += self.term_score(list[pos].1, self.doc_len[item], list.len(), params);
                }
            }
        }
        total
    }

    /// BM25 scores of every item against `query`.
    pub fn score_all(&self, query: &str, params: &Bm25Params) -> Vec<f64> {
        let mut scores = vec![0.0; self.num_docs()];
        for term in tokenize(query) {
            if let Some(list) = self.postings.get(&term) {
                let df = list.len();
                for &(doc, tf) in list {
                    scores[doc as usize] += self.term_score(tf, self.doc_len[doc as usize], df, params);
                }
            }
        }
        scores
    }
}

/// The top-N relevant items for one query: the working search space.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    pub query: String,
    /// Catalog indices, descending raw score, ties broken by ascending index.
    pub items: Vec<usize>,
    pub raw_scores: Vec<f64>,
    /// Min-max normalized scores over the pool; all 1.0 when every raw score
    /// is equal.
    pub norm_scores: Vec<f64>,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Builds the candidate pool of the top `pool_size` items by BM25 score.
pub fn build_pool(
    index: &Bm25Index,
    query: &str,
    pool_size: usize,
    params: &Bm25Params,
) -> Result<CandidatePool> {
    if index.num_docs() == 0 {
        return Err(Error::InvalidParam("cannot build a pool over an empty catalog".into()));
    }
    if pool_size == 0 {
        return Err(Error::InvalidParam("pool_size must be >= 1".into()));
    }
    let scores = index.score_all(query, params);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(pool_size.min(scores.len()));

    let raw_scores: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    let max = raw_scores[0];
    let min = *raw_scores.last().unwrap();
    let norm_scores = if max == min {
        vec![1.0; raw_scores.len()]
    } else {
        raw_scores.iter().map(|&s| (s - min) / (max - min)).collect()
    };
    Ok(CandidatePool { query: query.to_string(), items: order, raw_scores, norm_scores })
}
