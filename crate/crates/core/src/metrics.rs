//! Evaluation measures: coverage rate, NDCG@10, alpha-NDCG and the evenness
//! variance.
//!
//! Selections have no inherent order, so the ranking metrics first sort the
//! subset by raw relevance (descending, ties toward the lower pool slot).

use std::collections::HashMap;

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::relevance::CandidatePool;

/// One evaluation row. `wall_ms` is filled by the caller that timed the
/// selection; the metric functions themselves leave it at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub cr: f64,
    pub ndcg10: f64,
    pub alpha_ndcg: f64,
    pub variance: f64,
    pub wall_ms: f64,
}

/// Coverage rate: per aspect, the fraction of attainable distinct values the
/// subset covers, `|A'_p| / min(|S'|, |A_p|)`, averaged over aspects. `|A_p|`
/// counts the distinct values present in the pool; aspects with none are
/// skipped (and the average shrinks accordingly).
///
/// `subset` holds pool slots; `aspects` holds catalog aspect indices.
pub fn coverage_rate(
    catalog: &Catalog,
    pool: &CandidatePool,
    subset: &[usize],
    aspects: &[usize],
) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::InvalidParam("coverage of an empty subset".into()));
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for &p in aspects {
        let pool_values = distinct_values(catalog, p, pool.items.iter().copied());
        if pool_values == 0 {
            continue;
        }
        let sub_values =
            distinct_values(catalog, p, subset.iter().map(|&s| pool.items[s]));
        total += sub_values as f64 / pool_values.min(subset.len()) as f64;
        counted += 1;
    }
    Ok(if counted == 0 { 0.0 } else { total / counted as f64 })
}

fn distinct_values(catalog: &Catalog, p: usize, items: impl Iterator<Item = usize>) -> usize {
    let mut seen = std::collections::HashSet::new();
    for i in items {
        if let Some(id) = catalog.value_id(p, i) {
            seen.insert(id);
        }
    }
    seen.len()
}

/// Sorts pool slots by raw relevance descending, ties toward the lower slot.
fn by_relevance(pool: &CandidatePool, subset: &[usize]) -> Vec<usize> {
    let mut order = subset.to_vec();
    order.sort_by(|&a, &b| pool.raw_scores[b].total_cmp(&pool.raw_scores[a]).then(a.cmp(&b)));
    order
}

/// NDCG@10 with normalized-relevance gains and a `log2(rank + 1)` discount.
/// The ideal ranking takes the subset-many most relevant pool items. Returns
/// 1.0 when the ideal DCG is zero.
pub fn ndcg_at_10(pool: &CandidatePool, subset: &[usize]) -> f64 {
    let depth = subset.len().min(10);
    let ranked = by_relevance(pool, subset);
    let dcg: f64 = ranked
        .iter()
        .take(depth)
        .enumerate()
        .map(|(r, &s)| pool.norm_scores[s] / ((r + 2) as f64).log2())
        .sum();
    // Pool items are already in relevance order.
    let idcg: f64 = (0..depth.min(pool.len()))
        .map(|r| pool.norm_scores[r] / ((r + 2) as f64).log2())
        .sum();
    if idcg == 0.0 {
        1.0
    } else {
        dcg / idcg
    }
}

fn subtopics_of(catalog: &Catalog, item: usize, aspects: &[usize]) -> Vec<(usize, u32)> {
    aspects
        .iter()
        .filter_map(|&p| catalog.value_id(p, item).map(|v| (p, v)))
        .collect()
}

fn alpha_dcg_of_ranking(
    catalog: &Catalog,
    pool: &CandidatePool,
    ranking: &[usize],
    aspects: &[usize],
    alpha: f64,
) -> f64 {
    let mut seen: HashMap<(usize, u32), u32> = HashMap::new();
    let mut dcg = 0.0;
    for (r, &slot) in ranking.iter().enumerate() {
        let mut gain = 0.0;
        for t in subtopics_of(catalog, pool.items[slot], aspects) {
            let c = seen.entry(t).or_insert(0);
            gain += (1.0 - alpha).powi(*c as i32);
            *c += 1;
        }
        dcg += gain / ((r + 2) as f64).log2();
    }
    dcg
}

/// alpha-NDCG over (aspect, value) subtopics.
///
/// The subset is ranked by relevance; the gain of a document at rank r is
/// `sum_t (1 - alpha)^(times t was already covered)`. The ideal ranking is
/// built greedily over the whole pool at the same depth, ties toward the
/// lower slot. Returns 1.0 when the ideal DCG is zero.
pub fn alpha_ndcg(
    catalog: &Catalog,
    pool: &CandidatePool,
    subset: &[usize],
    alpha: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::InvalidParam(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let aspects: Vec<usize> = (0..catalog.aspect_count()).collect();
    let ranked = by_relevance(pool, subset);
    let dcg = alpha_dcg_of_ranking(catalog, pool, &ranked, &aspects, alpha);

    // Greedy ideal: at each rank take the pool item with the largest
    // discounted gain given what is already covered.
    let depth = subset.len();
    let mut seen: HashMap<(usize, u32), u32> = HashMap::new();
    let mut used = vec![false; pool.len()];
    let mut idcg = 0.0;
    for r in 0..depth {
        let mut best_slot = None;
        let mut best_gain = f64::NEG_INFINITY;
        for slot in 0..pool.len() {
            if used[slot] {
                continue;
            }
            let gain: f64 = subtopics_of(catalog, pool.items[slot], &aspects)
                .into_iter()
                .map(|t| (1.0 - alpha).powi(*seen.get(&t).unwrap_or(&0) as i32))
                .sum();
            if gain > best_gain {
                best_gain = gain;
                best_slot = Some(slot);
            }
        }
        let Some(slot) = best_slot else { break };
        used[slot] = true;
        for t in subtopics_of(catalog, pool.items[slot], &aspects) {
            *seen.entry(t).or_insert(0) += 1;
        }
        idcg += best_gain / ((r + 2) as f64).log2();
    }
    Ok(if idcg == 0.0 { 1.0 } else { (dcg / idcg).min(1.0) })
}

/// Evenness: the population variance of each aspect's per-value counts over
/// the subset, averaged across aspects with at least one present value.
/// Lower is more even. `subset` holds catalog item indices here.
pub fn evenness_variance(catalog: &Catalog, subset: &[usize], aspects: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::InvalidParam("evenness of an empty subset".into()));
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for &p in aspects {
        let mut counts: HashMap<u32, f64> = HashMap::new();
        for &i in subset {
            if let Some(id) = catalog.value_id(p, i) {
                *counts.entry(id).or_insert(0.0) += 1.0;
            }
        }
        if counts.is_empty() {
            continue;
        }
        let m = counts.len() as f64;
        let mean = counts.values().sum::<f64>() / m;
        let var = counts.values().map(|c| (c - mean) * (c - mean)).sum::<f64>() / m;
        total += var;
        counted += 1;
    }
    Ok(if counted == 0 { 0.0 } else { total / counted as f64 })
}

/// Computes all four measures for a pool-slot subset. `wall_ms` stays zero.
pub fn report(
    catalog: &Catalog,
    pool: &CandidatePool,
    subset: &[usize],
    alpha: f64,
) -> Result<MetricsReport> {
    let aspects: Vec<usize> = (0..catalog.aspect_count()).collect();
    let items: Vec<usize> = subset.iter().map(|&s| pool.items[s]).collect();
    Ok(MetricsReport {
        cr: coverage_rate(catalog, pool, subset, &aspects)?,
        ndcg10: ndcg_at_10(pool, subset),
        alpha_ndcg: alpha_ndcg(catalog, pool, subset, alpha)?,
        variance: evenness_variance(catalog, &items, &aspects)?,
        wall_ms: 0.0,
    })
}
