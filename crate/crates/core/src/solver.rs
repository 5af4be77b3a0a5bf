//! Frank-Wolfe relaxation of the cardinality-constrained quadratic program
//! and randomized rounding back to a feasible subset.
//!
//! The binary constraint set `{x in {0,1}^n : sum x = k}` relaxes to the
//! polytope `{x in [0,1]^n : sum x = k}`. Linear minimization over that
//! polytope is exact and cheap: take the k smallest gradient coordinates.
//! Each iteration moves toward the oracle vertex with an exact line search
//! (closed form for quadratics) and the duality gap `g(x)^T (x - s)` is a
//! certificate: the relaxed optimum lies within `gap` of the current value.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diversity::QuadraticProgram;
use crate::error::{Error, Result};

/// Solver settings. `epsilon` is the duality-gap target; `max_iters` caps the
/// iteration count as a safety net.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    pub rounding_samples: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::for_epsilon(1e-4)
    }
}

impl SolverConfig {
    /// Derives the iteration cap from the gap target: 10 * ceil(1 / epsilon).
    pub fn for_epsilon(epsilon: f64) -> Self {
        let cap = (10.0 * (1.0 / epsilon).ceil()).min(usize::MAX as f64) as usize;
        Self { epsilon, max_iters: cap.max(1), rounding_samples: 32, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParam(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.rounding_samples < 1 {
            return Err(Error::InvalidParam("rounding_samples must be >= 1".into()));
        }
        Ok(())
    }
}

/// Output of [`solve_relaxation`].
#[derive(Debug, Clone)]
pub struct Relaxation {
    /// Final feasible fractional point.
    pub x: Vec<f64>,
    /// Certified lower bound on the relaxed (hence also the integer) optimum:
    /// the objective at `x` minus the final duality gap.
    pub relax_value: f64,
    /// Final duality gap at `x`.
    pub gap: f64,
    /// Line-search steps taken.
    pub iters: usize,
    /// False when the gap target was not reached within `max_iters`.
    pub converged: bool,
}

/// A rounded subset with its objective decomposition and solver diagnostics.
#[derive(Debug, Clone)]
pub struct Selection {
    /// Chosen pool slots, ascending.
    pub indices: Vec<usize>,
    pub t_value: f64,
    pub h_value: f64,
    pub r_value: f64,
    pub relax_value: f64,
    pub gap: f64,
    pub iters: usize,
    pub converged: bool,
}

/// Linear minimization oracle over the relaxed polytope: the indicator of the
/// `k` smallest gradient coordinates, ties broken by ascending index.
/// Returns the selected indices in ascending order.
pub fn lmo_topk(gradient: &[f64], k: usize) -> Result<Vec<usize>> {
    let n = gradient.len();
    if k > n {
        return Err(Error::InvalidParam(format!("k = {k} exceeds dimension {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    if k > 0 && k < n {
        idx.select_nth_unstable_by(k - 1, |&a, &b| {
            gradient[a].total_cmp(&gradient[b]).then(a.cmp(&b))
        });
    }
    let mut chosen = idx[..k].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Minimizes the relaxed program with Frank-Wolfe and exact line search.
///
/// Starts from the uniform feasible point `k/n * 1` and stops once the duality
/// gap drops to `cfg.epsilon` or the iteration cap is hit.
pub fn solve_relaxation(qp: &QuadraticProgram, cfg: &SolverConfig) -> Result<Relaxation> {
    cfg.validate()?;
    if !qp.is_finite() {
        return Err(Error::Numerical("non-finite coefficients in the program".into()));
    }
    let n = qp.n();
    let k = qp.k();
    let mut scratch = qp.scratch();

    if n == k {
        // The polytope is a single point.
        let x = vec![1.0; n];
        let value = qp.t_value(&x, &mut scratch);
        return Ok(Relaxation { x, relax_value: value, gap: 0.0, iters: 0, converged: true });
    }

    let mut x = vec![k as f64 / n as f64; n];
    let mut grad = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut iters = 0usize;
    let gap = loop {
        qp.grad_into(&x, &mut scratch, &mut grad);
        let vertex = lmo_topk(&grad, k)?;
        let gx: f64 = grad.iter().zip(&x).map(|(g, xi)| g * xi).sum();
        let gs: f64 = vertex.iter().map(|&i| grad[i]).sum();
        let gap = gx - gs;
        if gap <= cfg.epsilon || iters >= cfg.max_iters {
            break gap;
        }
        for i in 0..n {
            dir[i] = -x[i];
        }
        for &i in &vertex {
            dir[i] += 1.0;
        }
        // Exact line search: gamma* = -g.d / d'Qd with g.d = -gap.
        let curvature = qp.quad_form(&dir, &mut scratch);
        let gamma = if curvature > 0.0 { (gap / curvature).min(1.0) } else { 1.0 };
        for i in 0..n {
            x[i] += gamma * dir[i];
        }
        iters += 1;
    };

    let value = qp.t_value(&x, &mut scratch);
    Ok(Relaxation {
        x,
        relax_value: value - gap.max(0.0),
        gap,
        iters,
        converged: gap <= cfg.epsilon,
    })
}

/// Draws `k` distinct indices with inclusion proportional to `x` (which sums
/// to `k`) by randomized systematic sampling: a fresh permutation of the
/// items, then thresholds `u, u+1, ..., u+k-1` against the running prefix
/// sum. The permutation leaves the inclusion probabilities untouched but
/// decorrelates successive draws.
fn systematic_sample<R: Rng>(
    x: &[f64],
    k: usize,
    rng: &mut R,
    perm: &mut Vec<usize>,
    out: &mut Vec<usize>,
) {
    out.clear();
    let n = x.len();
    perm.clear();
    perm.extend(0..n);
    for i in (1..n).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    let mut pos = 0;
    for m in 0..k {
        let t = u + m as f64;
        while pos < n && cum + x[perm[pos]] <= t {
            cum += x[perm[pos]];
            pos += 1;
        }
        if pos >= n {
            break;
        }
        out.push(perm[pos]);
        cum += x[perm[pos]];
        pos += 1;
    }
    if out.len() < k {
        // Floating-point shortfall at the tail: fill with the largest
        // remaining mass, deterministically.
        let mut rest: Vec<usize> = (0..n).filter(|i| !out.contains(i)).collect();
        rest.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
        out.extend(rest.into_iter().take(k - out.len()));
    }
}

fn top_k_by_mass(x: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Rounds a fractional relaxation point to a feasible subset.
///
/// Evaluates one deterministic top-k-by-mass candidate plus
/// `cfg.rounding_samples` systematic draws and keeps the best objective.
/// An already-integral point always rounds to its own support.
pub fn round_solution(
    qp: &QuadraticProgram,
    relaxation: &Relaxation,
    cfg: &SolverConfig,
) -> Result<Selection> {
    cfg.validate()?;
    let n = qp.n();
    let k = qp.k();
    let x = &relaxation.x;
    if x.len() != n {
        return Err(Error::InvalidParam("fractional point has the wrong dimension".into()));
    }
    let sum: f64 = x.iter().sum();
    if (sum - k as f64).abs() > 1e-6 || x.iter().any(|&v| !(-1e-9..=1.0 + 1e-9).contains(&v)) {
        return Err(Error::InvalidParam(format!(
            "infeasible fractional point: sum = {sum}, expected {k}"
        )));
    }

    let mut best = top_k_by_mass(x, k);
    let mut best_t = qp.t_of_subset(&best);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut perm = Vec::with_capacity(n);
    let mut draw = Vec::with_capacity(k);
    for _ in 0..cfg.rounding_samples {
        systematic_sample(x, k, &mut rng, &mut perm, &mut draw);
        let t = qp.t_of_subset(&draw);
        if t < best_t {
            best_t = t;
            best.clear();
            best.extend_from_slice(&draw);
        }
    }
    best.sort_unstable();

    Ok(Selection {
        t_value: best_t,
        h_value: qp.h_of_subset(&best),
        r_value: qp.r_of_subset(&best),
        relax_value: relaxation.relax_value,
        gap: relaxation.gap,
        iters: relaxation.iters,
        converged: relaxation.converged,
        indices: best,
    })
}

/// End-to-end pipeline for one pool: weights, program assembly, relaxation
/// and rounding. Deterministic given `cfg.seed`.
pub fn diversify(
    catalog: &crate::catalog::Catalog,
    pool: &crate::relevance::CandidatePool,
    k: usize,
    theta: f64,
    cfg: &SolverConfig,
) -> Result<Selection> {
    let weights = crate::diversity::compute_weights(catalog, pool, k)?;
    let qp = crate::diversity::build_qp(catalog, pool, &weights, k, theta)?;
    let relaxation = solve_relaxation(&qp, cfg)?;
    round_solution(&qp, &relaxation, cfg)
}
