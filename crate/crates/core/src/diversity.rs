//! Simpson-style diversity measures and the quadratic objective they induce.
//!
//! Two index forms are implemented. The classic form over class counts is
//! `D = sum_i n_i (n_i - 1) / (N (N - 1))`. The self-pair form over a subset
//! counts each item's pair with itself as a match:
//! `D(p, S') = 2 * sum_{i <= j} match_p(i, j) / (|S'| (|S'| + 1))`.
//! Smaller values mean a more diverse set; both forms reward richness and
//! evenness at once.
//!
//! Aspects are combined as `H(S') = sum_p phi_p * D(p, S')` with
//! `phi_p = omega_p / D(p, S)`, which normalizes each aspect's index by its
//! value over the whole candidate pool and down-weights aspects the query
//! already concentrates on. `H` expands into a quadratic form over subset
//! indicator vectors, which is what [`build_qp`] assembles.

use std::collections::HashMap;
use std::io::Write;

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::relevance::CandidatePool;

/// Classic diversity index over class counts. Needs at least two elements in
/// total; zero counts are permitted and ignored.
pub fn sdi_classic<C: IntoIterator<Item = usize>>(counts: C) -> Result<f64> {
    let mut total = 0usize;
    let mut same_pairs = 0usize;
    for c in counts {
        total += c;
        same_pairs += c * c.saturating_sub(1);
    }
    if total < 2 {
        return Err(Error::InvalidParam(format!(
            "diversity index needs N >= 2 elements, got {total}"
        )));
    }
    Ok(same_pairs as f64 / (total * (total - 1)) as f64)
}

fn counts_by_value_id(catalog: &Catalog, subset: &[usize], p: usize) -> HashMap<u32, usize> {
    let mut counts = HashMap::new();
    for &i in subset {
        if let Some(id) = catalog.value_id(p, i) {
            *counts.entry(id).or_insert(0) += 1;
        }
    }
    counts
}

/// Self-pair diversity index of `aspect` (a catalog aspect index) over a
/// subset of catalog item indices.
///
/// Pairs `(i, j)` with `i <= j` match when both items carry the same present
/// value; a missing value never matches, not even with itself. With every
/// subset item carrying some value the result lies in `(0, 1]`; it is 0 when
/// no subset item has the aspect at all.
pub fn sdi_self_pair_at(catalog: &Catalog, subset: &[usize], aspect: usize) -> Result<f64> {
    let s = subset.len();
    if s == 0 {
        return Err(Error::InvalidParam("self-pair diversity of an empty subset".into()));
    }
    // Matching is an equivalence over present values, so the pair sum reduces
    // to per-class counts: sum_v c_v (c_v + 1) / 2 pairs including self-pairs.
    let same: usize = counts_by_value_id(catalog, subset, aspect)
        .values()
        .map(|&c| c * (c + 1) / 2)
        .sum();
    Ok(2.0 * same as f64 / (s * (s + 1)) as f64)
}

/// Name-addressed variant of [`sdi_self_pair_at`].
pub fn sdi_self_pair(catalog: &Catalog, subset: &[usize], aspect: &str) -> Result<f64> {
    let p = catalog
        .aspect_index(aspect)
        .ok_or_else(|| Error::UnknownAspect(aspect.to_string()))?;
    sdi_self_pair_at(catalog, subset, p)
}

/// Per-aspect weighting of the diversity objective.
#[derive(Debug, Clone)]
pub struct AspectWeight {
    /// Penalty weight: 1 - (k_top - 1) / (k - 1), in [0, 1].
    pub omega: f64,
    /// Self-pair index of the aspect over the whole candidate pool.
    pub base_sdi: f64,
    /// omega / base_sdi, or 0 for aspects no pool item carries.
    pub phi: f64,
    /// Count of the most common value among the top-k relevant items.
    pub k_top: usize,
}

/// Aspect weights for one (pool, k) pair, in catalog aspect order.
#[derive(Debug, Clone)]
pub struct AspectWeighting {
    pub k: usize,
    pub per_aspect: Vec<AspectWeight>,
}

/// Computes aspect weights from the candidate pool.
///
/// `k_top` is measured over the `k` most relevant pool items. An aspect whose
/// top-k count concentrates on one value gets omega near 0 (the ranking
/// already pins that aspect down); fully spread values get omega 1. Aspects
/// carried by no pool item get `phi = 0` and drop out of the objective; any
/// carried aspect has `base_sdi > 0` because self-pairs always match.
pub fn compute_weights(catalog: &Catalog, pool: &CandidatePool, k: usize) -> Result<AspectWeighting> {
    if k < 2 {
        return Err(Error::InvalidParam(format!("subset size k must be >= 2, got {k}")));
    }
    if pool.len() < k {
        return Err(Error::InvalidParam(format!(
            "pool of {} items cannot fill a subset of {k}",
            pool.len()
        )));
    }
    let top: &[usize] = &pool.items[..k];
    let mut per_aspect = Vec::with_capacity(catalog.aspect_count());
    for p in 0..catalog.aspect_count() {
        let base_sdi = sdi_self_pair_at(catalog, &pool.items, p)?;
        // Most common value among the top-k; an aspect absent from the top-k
        // is unconstrained by relevance, so its penalty stays at zero.
        let k_top = counts_by_value_id(catalog, top, p)
            .values()
            .copied()
            .max()
            .unwrap_or(1)
            .max(1);
        let omega = 1.0 - (k_top as f64 - 1.0) / (k as f64 - 1.0);
        let phi = if base_sdi > 0.0 { omega / base_sdi } else { 0.0 };
        per_aspect.push(AspectWeight { omega, base_sdi, phi, k_top });
    }
    Ok(AspectWeighting { k, per_aspect })
}

/// One aspect's contribution to the quadratic term, with value ids remapped
/// to a dense pool-local range.
#[derive(Debug, Clone)]
struct AspectFactor {
    phi: f64,
    /// Pool-local item -> dense value id.
    values: Vec<Option<u32>>,
    n_values: usize,
}

/// The cardinality-constrained quadratic objective
/// `T(x) = 1/2 x^T Q x + b^T x` over `x in {0,1}^n, sum x = k`.
///
/// `Q_{ij} = (1 - theta) * 2/(k(k+1)) * sum_p phi_p * match_p(i, j)` off the
/// diagonal; diagonal entries carry the self-pair matches twice, so that for
/// every binary indicator `1/2 x^T Q x` equals the pairwise-with-self-pairs
/// diversity sum exactly. `b_i = -theta * norm_score_i`. Q is a nonnegative
/// combination of Gram matrices plus a nonnegative diagonal, hence PSD, and
/// the quadratic term is stored in that factored form: gradients cost
/// O(n * #aspects) instead of O(n^2).
#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    n: usize,
    k: usize,
    theta: f64,
    /// 2 / (k (k + 1))
    scale: f64,
    factors: Vec<AspectFactor>,
    /// sum_p phi_p * [item i carries aspect p], the extra diagonal mass.
    diag: Vec<f64>,
    /// Normalized relevance of each pool item, in pool order.
    norm_scores: Vec<f64>,
}

/// Reusable per-value accumulation buffers for gradient and value evaluation.
#[derive(Debug)]
pub struct QpScratch {
    masses: Vec<Vec<f64>>,
}

/// Assembles the quadratic program for a pool, its weights, subset size `k`
/// and trade-off `theta` (0 = pure diversity, 1 = pure relevance).
pub fn build_qp(
    catalog: &Catalog,
    pool: &CandidatePool,
    weights: &AspectWeighting,
    k: usize,
    theta: f64,
) -> Result<QuadraticProgram> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParam(format!("theta must lie in [0, 1], got {theta}")));
    }
    if weights.k != k {
        return Err(Error::InvalidParam(format!(
            "weights were computed for k = {}, requested k = {k}",
            weights.k
        )));
    }
    if weights.per_aspect.len() != catalog.aspect_count() {
        return Err(Error::InvalidParam("weights do not match catalog aspects".into()));
    }
    let n = pool.len();
    if k > n {
        return Err(Error::InvalidParam(format!("k = {k} exceeds pool size {n}")));
    }

    let mut factors = Vec::new();
    let mut diag = vec![0.0; n];
    for (p, w) in weights.per_aspect.iter().enumerate() {
        if w.phi <= 0.0 {
            continue;
        }
        let mut remap: HashMap<u32, u32> = HashMap::new();
        let mut values = Vec::with_capacity(n);
        for (slot, &item) in pool.items.iter().enumerate() {
            let dense = catalog.value_id(p, item).map(|id| {
                let next = remap.len() as u32;
                *remap.entry(id).or_insert(next)
            });
            if dense.is_some() {
                diag[slot] += w.phi;
            }
            values.push(dense);
        }
        if !remap.is_empty() {
            factors.push(AspectFactor { phi: w.phi, values, n_values: remap.len() });
        }
    }

    Ok(QuadraticProgram {
        n,
        k,
        theta,
        scale: 2.0 / (k as f64 * (k + 1) as f64),
        factors,
        diag,
        norm_scores: pool.norm_scores.clone(),
    })
}

impl QuadraticProgram {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn scratch(&self) -> QpScratch {
        QpScratch { masses: self.factors.iter().map(|f| vec![0.0; f.n_values]).collect() }
    }

    /// The linear term: negated normalized relevance, so minimizing favors
    /// relevant items.
    pub fn b(&self) -> Vec<f64> {
        self.norm_scores.iter().map(|&s| -self.theta * s).collect()
    }

    fn quad_coeff(&self) -> f64 {
        (1.0 - self.theta) * self.scale
    }

    /// Dense row-major Q, for inspection and small-instance checks.
    pub fn q_dense(&self) -> Vec<f64> {
        let c = self.quad_coeff();
        let mut q = vec![0.0; self.n * self.n];
        for f in &self.factors {
            for i in 0..self.n {
                let Some(vi) = f.values[i] else { continue };
                for j in 0..self.n {
                    if f.values[j] == Some(vi) {
                        q[i * self.n + j] += c * f.phi;
                    }
                }
            }
        }
        for i in 0..self.n {
            q[i * self.n + i] += c * self.diag[i];
        }
        q
    }

    /// `out = Q x + b`.
    pub fn grad_into(&self, x: &[f64], scratch: &mut QpScratch, out: &mut [f64]) {
        let c = self.quad_coeff();
        for (f, mass) in self.factors.iter().zip(scratch.masses.iter_mut()) {
            mass.iter_mut().for_each(|m| *m = 0.0);
            for (i, v) in f.values.iter().enumerate() {
                if let Some(v) = v {
                    mass[*v as usize] += x[i];
                }
            }
        }
        for i in 0..self.n {
            let mut acc = self.diag[i] * x[i];
            for (f, mass) in self.factors.iter().zip(scratch.masses.iter()) {
                if let Some(v) = f.values[i] {
                    acc += f.phi * mass[v as usize];
                }
            }
            out[i] = c * acc - self.theta * self.norm_scores[i];
        }
    }

    /// `d^T Q d` for an arbitrary direction `d`.
    pub fn quad_form(&self, d: &[f64], scratch: &mut QpScratch) -> f64 {
        let mut acc = 0.0;
        for (f, mass) in self.factors.iter().zip(scratch.masses.iter_mut()) {
            mass.iter_mut().for_each(|m| *m = 0.0);
            for (i, v) in f.values.iter().enumerate() {
                if let Some(v) = v {
                    mass[*v as usize] += d[i];
                }
            }
            acc += f.phi * mass.iter().map(|m| m * m).sum::<f64>();
        }
        acc += self.diag.iter().zip(d).map(|(&di, &xi)| di * xi * xi).sum::<f64>();
        self.quad_coeff() * acc
    }

    /// Diversity component `H(x) = 1/2 x^T (Q / (1 - theta)) x`, the
    /// theta-free weighted diversity sum.
    pub fn h_value(&self, x: &[f64], scratch: &mut QpScratch) -> f64 {
        let mut acc = 0.0;
        for (f, mass) in self.factors.iter().zip(scratch.masses.iter_mut()) {
            mass.iter_mut().for_each(|m| *m = 0.0);
            for (i, v) in f.values.iter().enumerate() {
                if let Some(v) = v {
                    mass[*v as usize] += x[i];
                }
            }
            acc += f.phi * mass.iter().map(|m| m * m).sum::<f64>();
        }
        acc += self.diag.iter().zip(x).map(|(&di, &xi)| di * xi * xi).sum::<f64>();
        0.5 * self.scale * acc
    }

    /// Relevance component `R(x) = -sum_i norm_score_i x_i`.
    pub fn r_value(&self, x: &[f64]) -> f64 {
        -self.norm_scores.iter().zip(x).map(|(&s, &xi)| s * xi).sum::<f64>()
    }

    /// Full objective `T(x) = (1 - theta) H(x) + theta R(x)`.
    pub fn t_value(&self, x: &[f64], scratch: &mut QpScratch) -> f64 {
        (1.0 - self.theta) * self.h_value(x, scratch) + self.theta * self.r_value(x)
    }

    /// `H` at a binary subset of pool slots, without materializing a vector.
    pub fn h_of_subset(&self, subset: &[usize]) -> f64 {
        let mut acc = 0.0;
        let mut counts: HashMap<u32, f64> = HashMap::new();
        for f in &self.factors {
            counts.clear();
            for &i in subset {
                if let Some(v) = f.values[i] {
                    *counts.entry(v).or_insert(0.0) += 1.0;
                }
            }
            acc += f.phi * counts.values().map(|c| c * c).sum::<f64>();
        }
        acc += subset.iter().map(|&i| self.diag[i]).sum::<f64>();
        0.5 * self.scale * acc
    }

    pub fn r_of_subset(&self, subset: &[usize]) -> f64 {
        -subset.iter().map(|&i| self.norm_scores[i]).sum::<f64>()
    }

    pub fn t_of_subset(&self, subset: &[usize]) -> f64 {
        (1.0 - self.theta) * self.h_of_subset(subset) + self.theta * self.r_of_subset(subset)
    }

    /// True when every coefficient is finite.
    pub fn is_finite(&self) -> bool {
        self.norm_scores.iter().all(|s| s.is_finite())
            && self.diag.iter().all(|d| d.is_finite())
            && self.factors.iter().all(|f| f.phi.is_finite())
    }

    /// Writes Q (row-major, one row per line) followed by a blank line and b.
    pub fn write_debug<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let q = self.q_dense();
        for row in q.chunks(self.n) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        writeln!(w)?;
        let b: Vec<String> = self.b().iter().map(|v| format!("{v:.12e}")).collect();
        writeln!(w, "{}", b.join(" "))
    }
}
