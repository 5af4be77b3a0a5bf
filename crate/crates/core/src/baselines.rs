//! Determinantal point process baselines: exact greedy MAP, incremental
//! (fast) greedy MAP, and exact k-DPP sampling.
//!
//! The kernel is built from shared-aspect similarity. For items i, j the
//! similarity is the number of aspects on which both carry the same present
//! value, divided by the total aspect count; the diagonal is fixed at 1.
//! Relevance enters through a quality vector `q_i = exp(alpha * norm_score_i)`
//! with `alpha = theta / (1 - theta)` clamped to [0, 20], giving
//! `L = diag(q) S diag(q) + 1e-8 I`. At theta = 1 every selector bypasses the
//! DPP and returns the relevance top-k directly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nalgebra::DMatrix;

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::relevance::CandidatePool;

const JITTER: f64 = 1e-8;
const ALPHA_CAP: f64 = 20.0;

/// Kernel construction options.
#[derive(Debug, Clone, Copy)]
pub struct KernelOptions {
    /// Divide shared-aspect counts by the total aspect count. Off, the raw
    /// counts are used and the diagonal holds each item's own aspect count.
    pub normalize: bool,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { normalize: true }
    }
}

/// A symmetric PSD DPP kernel over the pool items.
#[derive(Debug, Clone)]
pub struct DppKernel {
    n: usize,
    theta: f64,
    /// Row-major n x n.
    l: Vec<f64>,
    pure_relevance: bool,
}

impl DppKernel {
    /// Wraps an existing symmetric row-major matrix as a kernel.
    pub fn from_dense(l: Vec<f64>) -> Result<Self> {
        let n = (l.len() as f64).sqrt() as usize;
        if n * n != l.len() {
            return Err(Error::InvalidParam("kernel matrix must be square".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (l[i * n + j] - l[j * n + i]).abs() > 1e-9 {
                    return Err(Error::InvalidParam(format!(
                        "kernel not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { n, theta: 0.0, l, pure_relevance: false })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// True when theta = 1 reduces selection to the relevance top-k.
    pub fn is_pure_relevance(&self) -> bool {
        self.pure_relevance
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.l[i * self.n..(i + 1) * self.n]
    }
}

/// Builds the shared-aspect kernel for a pool at trade-off `theta`.
pub fn build_kernel(catalog: &Catalog, pool: &CandidatePool, theta: f64) -> Result<DppKernel> {
    build_kernel_with(catalog, pool, theta, &KernelOptions::default())
}

pub fn build_kernel_with(
    catalog: &Catalog,
    pool: &CandidatePool,
    theta: f64,
    options: &KernelOptions,
) -> Result<DppKernel> {
    if pool.is_empty() {
        return Err(Error::InvalidParam("cannot build a kernel over an empty pool".into()));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParam(format!("theta must lie in [0, 1], got {theta}")));
    }
    let n = pool.len();
    let p_total = catalog.aspect_count().max(1) as f64;
    let pure_relevance = theta >= 1.0;
    let alpha = if pure_relevance { ALPHA_CAP } else { (theta / (1.0 - theta)).clamp(0.0, ALPHA_CAP) };
    let quality: Vec<f64> = pool.norm_scores.iter().map(|&s| (alpha * s).exp()).collect();

    // Per-aspect value ids of the pool items, aspect-major.
    let ids: Vec<Vec<Option<u32>>> = (0..catalog.aspect_count())
        .map(|p| pool.items.iter().map(|&i| catalog.value_id(p, i)).collect())
        .collect();

    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let s = if i == j {
                if options.normalize {
                    1.0
                } else {
                    ids.iter().filter(|col| col[i].is_some()).count() as f64
                }
            } else {
                let shared = ids
                    .iter()
                    .filter(|col| col[i].is_some() && col[i] == col[j])
                    .count() as f64;
                if options.normalize {
                    shared / p_total
                } else {
                    shared
                }
            };
            let mut v = quality[i] * s * quality[j];
            if i == j {
                v += JITTER;
            }
            l[i * n + j] = v;
            l[j * n + i] = v;
        }
    }
    Ok(DppKernel { n, theta, l, pure_relevance })
}

/// Cholesky-based determinant of the principal submatrix indexed by `subset`.
/// Returns `None` when a pivot is not strictly positive.
fn submatrix_det(kernel: &DppKernel, subset: &[usize], buf: &mut Vec<f64>) -> Option<f64> {
    let s = subset.len();
    buf.clear();
    buf.resize(s * s, 0.0);
    for (a, &i) in subset.iter().enumerate() {
        let row = kernel.row(i);
        for (b, &j) in subset.iter().enumerate() {
            buf[a * s + b] = row[j];
        }
    }
    let mut det = 1.0;
    for c in 0..s {
        let mut pivot = buf[c * s + c];
        for t in 0..c {
            pivot -= buf[c * s + t] * buf[c * s + t];
        }
        if pivot <= 0.0 {
            return None;
        }
        let root = pivot.sqrt();
        buf[c * s + c] = root;
        det *= pivot;
        for r in (c + 1)..s {
            let mut v = buf[r * s + c];
            for t in 0..c {
                v -= buf[r * s + t] * buf[c * s + t];
            }
            buf[r * s + c] = v / root;
        }
    }
    Some(det)
}

fn top_k_diagonal(kernel: &DppKernel, k: usize, taken: &[bool]) -> Vec<usize> {
    let mut rest: Vec<usize> = (0..kernel.n).filter(|&i| !taken[i]).collect();
    rest.sort_by(|&a, &b| kernel.entry(b, b).total_cmp(&kernel.entry(a, a)).then(a.cmp(&b)));
    rest.truncate(k);
    rest
}

/// Greedy MAP inference: at each step adds the item that maximizes the
/// determinant of the augmented submatrix, recomputing every candidate's
/// determinant from scratch. Ties break toward the smaller index. If no
/// candidate keeps the determinant positive the remaining picks fall back to
/// the largest diagonal entries.
pub fn greedy_dpp(kernel: &DppKernel, k: usize) -> Result<Vec<usize>> {
    let n = kernel.n;
    if k > n {
        return Err(Error::InvalidParam(format!("k = {k} exceeds kernel size {n}")));
    }
    if kernel.pure_relevance {
        return Ok((0..k).collect());
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut probe = Vec::with_capacity(k);
    let mut buf = Vec::new();
    while chosen.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            probe.clear();
            probe.extend_from_slice(&chosen);
            probe.push(i);
            if let Some(det) = submatrix_det(kernel, &probe, &mut buf) {
                if det > 0.0 && best.is_none_or(|(_, b)| det > b) {
                    best = Some((i, det));
                }
            }
        }
        match best {
            Some((i, _)) => {
                chosen.push(i);
                taken[i] = true;
            }
            None => {
                // Degenerate tail: every augmented determinant collapsed.
                let fill = top_k_diagonal(kernel, k - chosen.len(), &taken);
                chosen.extend(fill);
                break;
            }
        }
    }
    Ok(chosen)
}

/// Greedy MAP via incremental Cholesky updates.
///
/// Keeps, per candidate, the marginal-gain term `d_i^2` (the squared Cholesky
/// residual) and the row `c_i` of update coefficients, so a step costs
/// O(n * |selected|) instead of a fresh determinant per candidate. Selects
/// exactly the same sequence as [`greedy_dpp`]. Candidates whose `d_i^2`
/// drops to zero or below are excluded as numerically degenerate.
pub fn fast_map_dpp(kernel: &DppKernel, k: usize) -> Result<Vec<usize>> {
    let n = kernel.n;
    if k > n {
        return Err(Error::InvalidParam(format!("k = {k} exceeds kernel size {n}")));
    }
    if kernel.pure_relevance {
        return Ok((0..k).collect());
    }
    let mut d2: Vec<f64> = (0..n).map(|i| kernel.entry(i, i)).collect();
    let mut cvecs: Vec<Vec<f64>> = (0..n).map(|_| Vec::with_capacity(k)).collect();
    let mut taken = vec![false; n];
    let mut chosen = Vec::with_capacity(k);
    while chosen.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if taken[i] || d2[i] <= 0.0 {
                continue;
            }
            if best.is_none_or(|(_, b)| d2[i] > b) {
                best = Some((i, d2[i]));
            }
        }
        let Some((j, dj2)) = best else {
            let fill = top_k_diagonal(kernel, k - chosen.len(), &taken);
            chosen.extend(fill);
            break;
        };
        taken[j] = true;
        chosen.push(j);
        if chosen.len() == k {
            break;
        }
        let dj = dj2.sqrt();
        let row_j = kernel.row(j);
        let cj = std::mem::take(&mut cvecs[j]);
        for i in 0..n {
            if taken[i] {
                continue;
            }
            let dot: f64 = cj.iter().zip(cvecs[i].iter()).map(|(a, b)| a * b).sum();
            let e = (row_j[i] - dot) / dj;
            cvecs[i].push(e);
            d2[i] -= e * e;
        }
        cvecs[j] = cj;
    }
    Ok(chosen)
}

/// Eigendecomposition of a kernel, reusable across samples.
pub struct KdppSampler {
    n: usize,
    eigvals: Vec<f64>,
    /// Column-major n x n eigenvector matrix.
    eigvecs: Vec<f64>,
    pure_relevance: bool,
}

impl KdppSampler {
    pub fn new(kernel: &DppKernel) -> Result<Self> {
        let n = kernel.n;
        if kernel.pure_relevance {
            return Ok(Self { n, eigvals: Vec::new(), eigvecs: Vec::new(), pure_relevance: true });
        }
        let m = DMatrix::from_row_slice(n, n, &kernel.l);
        let eig = m.symmetric_eigen();
        let eigvals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        if eigvals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("eigendecomposition produced non-finite values".into()));
        }
        let eigvecs: Vec<f64> = eig.eigenvectors.as_slice().to_vec();
        Ok(Self { n, eigvals, eigvecs, pure_relevance: false })
    }

    /// Elementary symmetric polynomial table: `e[s][j]` over the first `j`
    /// eigenvalues. Eigenvalues are rescaled by their maximum first; the
    /// selection probabilities are ratios, so the scaling cancels.
    fn esp_table(&self, k: usize) -> Vec<Vec<f64>> {
        let n = self.n;
        let lmax = self.eigvals.iter().cloned().fold(f64::MIN, f64::max).max(f64::MIN_POSITIVE);
        let mut e = vec![vec![0.0; n + 1]; k + 1];
        e[0].iter_mut().for_each(|v| *v = 1.0);
        for j in 1..=n {
            let lam = (self.eigvals[j - 1] / lmax).max(0.0);
            for s in 1..=k {
                e[s][j] = e[s][j - 1] + lam * e[s - 1][j - 1];
            }
        }
        e
    }

    /// Draws one exact k-DPP sample. Returns ascending indices.
    pub fn sample<R: Rng>(&self, k: usize, rng: &mut R) -> Result<Vec<usize>> {
        let n = self.n;
        if k > n {
            return Err(Error::InvalidParam(format!("k = {k} exceeds kernel size {n}")));
        }
        if self.pure_relevance {
            return Ok((0..k).collect());
        }
        if k == 0 {
            return Ok(Vec::new());
        }

        // Phase 1: pick the eigenvector subset via the symmetric polynomials.
        let e = self.esp_table(k);
        if e[k][n] <= 0.0 {
            return Err(Error::Numerical("kernel rank below k".into()));
        }
        let lmax = self.eigvals.iter().cloned().fold(f64::MIN, f64::max).max(f64::MIN_POSITIVE);
        let mut cols: Vec<usize> = Vec::with_capacity(k);
        let mut s = k;
        for j in (1..=n).rev() {
            if s == 0 {
                break;
            }
            let lam = (self.eigvals[j - 1] / lmax).max(0.0);
            let p = if e[s][j] > 0.0 { lam * e[s - 1][j - 1] / e[s][j] } else { 1.0 };
            if rng.gen::<f64>() < p {
                cols.push(j - 1);
                s -= 1;
            }
        }
        if s != 0 {
            return Err(Error::Numerical("eigenvector selection starved".into()));
        }

        // Phase 2: project-and-eliminate sampling from the chosen basis.
        let mut basis: Vec<Vec<f64>> = cols
            .iter()
            .map(|&c| self.eigvecs[c * n..(c + 1) * n].to_vec())
            .collect();
        let mut selected = Vec::with_capacity(k);
        while !basis.is_empty() {
            let m = basis.len();
            let mut probs = vec![0.0; n];
            let mut total = 0.0;
            for col in &basis {
                for (i, v) in col.iter().enumerate() {
                    probs[i] += v * v;
                }
            }
            for p in &probs {
                total += p;
            }
            if total <= 0.0 {
                return Err(Error::Numerical("degenerate projection in sampling".into()));
            }
            let mut target = rng.gen::<f64>() * total;
            let mut item = n - 1;
            for (i, p) in probs.iter().enumerate() {
                target -= p;
                if target <= 0.0 {
                    item = i;
                    break;
                }
            }
            selected.push(item);

            // Eliminate coordinate `item`: pivot on the column with the
            // largest component there, subtract it from the others, then
            // re-orthonormalize what remains (modified Gram-Schmidt).
            let pivot = (0..m)
                .max_by(|&a, &b| basis[a][item].abs().total_cmp(&basis[b][item].abs()))
                .unwrap();
            let pivot_col = basis.swap_remove(pivot);
            let pv = pivot_col[item];
            if pv != 0.0 {
                for col in basis.iter_mut() {
                    let f = col[item] / pv;
                    if f != 0.0 {
                        for (c, p) in col.iter_mut().zip(&pivot_col) {
                            *c -= f * p;
                        }
                    }
                }
            }
            for t in 0..basis.len() {
                for prev in 0..t {
                    let dot: f64 =
                        basis[t].iter().zip(&basis[prev]).map(|(a, b)| a * b).sum();
                    if dot != 0.0 {
                        let (head, tail) = basis.split_at_mut(t);
                        let prev_col = &head[prev];
                        for (c, p) in tail[0].iter_mut().zip(prev_col) {
                            *c -= dot * p;
                        }
                    }
                }
                let norm: f64 = basis[t].iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm <= 1e-12 {
                    return Err(Error::Numerical("basis collapsed during sampling".into()));
                }
                basis[t].iter_mut().for_each(|v| *v /= norm);
            }
        }
        selected.sort_unstable();
        Ok(selected)
    }
}

impl KdppSampler {
    /// Like [`KdppSampler::sample`] with a fresh seeded generator.
    pub fn sample_seeded(&self, k: usize, seed: u64) -> Result<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample(k, &mut rng)
    }
}

/// Convenience wrapper: eigendecompose and draw a single seeded sample.
pub fn kdpp_sample(kernel: &DppKernel, k: usize, seed: u64) -> Result<Vec<usize>> {
    KdppSampler::new(kernel)?.sample_seeded(k, seed)
}
