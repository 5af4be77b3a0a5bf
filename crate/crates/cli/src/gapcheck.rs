//! Optimality-gap harness: seeded synthetic instances solved by relaxation +
//! rounding and checked against exhaustive enumeration.

use anyhow::{bail, Result};

use sdiv_core::oracle::{brute_force_bqp, count_combinations, ORACLE_CAP};
use sdiv_core::solver::{round_solution, solve_relaxation, SolverConfig};
use sdiv_core::synth::random_instance;

use crate::bench::mix_seed;

#[derive(Debug, Clone, Copy)]
pub struct GapParams {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct GapRow {
    pub trial: usize,
    pub theta: f64,
    pub relax_value: f64,
    pub optimum: f64,
    pub t_value: f64,
    /// `t_value / optimum`, reported only for strictly positive optima.
    pub ratio: Option<f64>,
    pub gap: f64,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GapSummary {
    pub trials: usize,
    pub converged: usize,
    /// Trials with relax_value <= optimum <= t_value.
    pub sound: usize,
    pub positive_optima: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub mean_excess: f64,
}

/// Trade-off for a trial: sweeps the standard 0..1 grid.
fn theta_for(trial: usize) -> f64 {
    (trial % 11) as f64 / 10.0
}

pub fn run_gapcheck(params: &GapParams) -> Result<(Vec<GapRow>, GapSummary)> {
    match count_combinations(params.n, params.k) {
        Some(c) if c <= ORACLE_CAP => {}
        _ => bail!(
            "C({}, {}) exceeds the enumeration cap of {ORACLE_CAP}",
            params.n,
            params.k
        ),
    }
    if params.k < 2 || params.k > params.n {
        bail!("need 2 <= k <= n, got k = {}, n = {}", params.k, params.n);
    }

    let mut rows = Vec::with_capacity(params.trials);
    let mut summary = GapSummary { trials: params.trials, ..Default::default() };
    let mut ratio_sum = 0.0;
    let mut excess_sum = 0.0;
    for trial in 0..params.trials {
        let theta = theta_for(trial);
        let instance_seed = mix_seed(params.seed, &[trial as u64]);
        let qp = random_instance(params.n, params.k, theta, instance_seed);
        let cfg = SolverConfig::for_epsilon(params.epsilon).with_seed(instance_seed);
        let relax = solve_relaxation(&qp, &cfg)?;
        let sel = round_solution(&qp, &relax, &cfg)?;
        let (_, optimum) = brute_force_bqp(&qp)?;

        if relax.converged {
            summary.converged += 1;
        }
        if sel.relax_value <= optimum + 1e-12 && optimum <= sel.t_value + 1e-12 {
            summary.sound += 1;
        }
        let ratio = if optimum > 1e-9 {
            let r = sel.t_value / optimum;
            summary.positive_optima += 1;
            summary.max_ratio = summary.max_ratio.max(r);
            ratio_sum += r;
            Some(r)
        } else {
            None
        };
        excess_sum += sel.t_value - optimum;
        rows.push(GapRow {
            trial,
            theta,
            relax_value: sel.relax_value,
            optimum,
            t_value: sel.t_value,
            ratio,
            gap: sel.gap,
            iters: sel.iters,
            converged: sel.converged,
        });
    }
    if summary.positive_optima > 0 {
        summary.mean_ratio = ratio_sum / summary.positive_optima as f64;
    }
    if params.trials > 0 {
        summary.mean_excess = excess_sum / params.trials as f64;
    }
    Ok((rows, summary))
}

pub const GAP_CSV_HEADER: &str =
    "trial,theta,relax_value,optimum,t_value,ratio,gap,iters,converged";

pub fn gap_rows_to_csv(rows: &[GapRow]) -> String {
    let mut out = String::from(GAP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let ratio = r.ratio.map(|v| format!("{v:.6}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{:.9},{:.9},{:.9},{},{:.6e},{},{}\n",
            r.trial, r.theta, r.relax_value, r.optimum, r.t_value, ratio, r.gap, r.iters, r.converged
        ));
    }
    out
}
