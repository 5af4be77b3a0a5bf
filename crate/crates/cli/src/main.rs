mod bench;
mod config;
mod gapcheck;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use sdiv_core::catalog::{load_catalog, AspectFilter, IngestConfig, QuerySet};
use sdiv_core::metrics;
use sdiv_core::relevance::{build_pool, Bm25Index, Bm25Params};

use bench::{mix_seed, run_model, BenchParams, Model};
use config::{resolve, FileConfig};

#[derive(Parser)]
#[command(
    name = "sdiv",
    version,
    about = "Multi-aspect search result diversification: quadratic reranking, DPP baselines, benchmark sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Subset size returned per query.
    #[arg(long)]
    k: Option<usize>,
    /// Candidate pool size per query.
    #[arg(long)]
    pool_size: Option<usize>,
    /// Duality-gap target of the relaxation solver.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Base RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// alpha of the alpha-NDCG metric.
    #[arg(long)]
    alpha: Option<f64>,
    /// Items need at least this many aspect values to survive ingest.
    #[arg(long)]
    min_aspects: Option<usize>,
    /// key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Load a catalog and report ingest statistics.
    Ingest {
        #[arg(long)]
        catalog: PathBuf,
        /// Drop items where an aspect equals a value, as `aspect=value`.
        #[arg(long)]
        exclude: Vec<String>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Diversify one query and print the selection with its metrics.
    Search {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long, value_enum)]
        model: Option<Model>,
        /// Relevance-diversity trade-off in [0, 1].
        #[arg(long)]
        theta: Option<f64>,
        /// Write the quadratic program (Q then b) to a text file.
        #[arg(long)]
        dump_qp: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Sweep models over a theta grid for every query; write a CSV.
    Bench {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        /// `start:step:end` or a comma list of values in [0, 1].
        #[arg(long)]
        theta_grid: Option<String>,
        /// Comma list from: sdi, dpp_greedy, kdpp, fast_map_dpp.
        #[arg(long)]
        models: Option<String>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Measure selection wall time (median of 3); makes output
        /// nondeterministic in the wall_ms column.
        #[arg(long)]
        timing: bool,
        /// Also write the selected item ids per row to this CSV.
        #[arg(long)]
        log_selections: Option<PathBuf>,
        /// Worker threads for query parallelism (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Solve seeded synthetic instances and compare against brute force.
    Gapcheck {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        /// Output CSV path for the per-trial report.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn usage_error(msg: &str) -> ! {
    eprintln!("error: {msg}");
    std::process::exit(2);
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

struct Settings {
    k: usize,
    pool_size: usize,
    epsilon: f64,
    seed: u64,
    alpha: f64,
    min_aspects: usize,
    file: FileConfig,
}

fn settings(common: &CommonOpts) -> Result<Settings> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    Ok(Settings {
        k: resolve(common.k, &file, "k", 10)?,
        pool_size: resolve(common.pool_size, &file, "pool-size", 100)?,
        epsilon: resolve(common.epsilon, &file, "epsilon", 1e-4)?,
        seed: resolve(common.seed, &file, "seed", 42)?,
        alpha: resolve(common.alpha, &file, "alpha", 0.5)?,
        min_aspects: resolve(common.min_aspects, &file, "min-aspects", 1)?,
        file,
    })
}

fn parse_excludes(raw: &[String]) -> Vec<AspectFilter> {
    raw.iter()
        .map(|spec| match spec.split_once('=') {
            Some((aspect, value)) => AspectFilter {
                aspect: aspect.trim().to_string(),
                value: value.trim().to_string(),
            },
            None => usage_error(&format!("--exclude expects aspect=value, got `{spec}`")),
        })
        .collect()
}

/// Parses `start:step:end` or a comma list; values are snapped to 9 decimals
/// so grid arithmetic prints cleanly.
fn parse_theta_grid(raw: &str) -> Result<Vec<f64>> {
    let snap = |v: f64| (v * 1e9).round() / 1e9;
    let values: Vec<f64> = if let Some((start, rest)) = raw.split_once(':') {
        let (step, end) = rest
            .split_once(':')
            .ok_or_else(|| anyhow!("theta grid `{raw}` should be start:step:end"))?;
        let (start, step, end): (f64, f64, f64) =
            (start.trim().parse()?, step.trim().parse()?, end.trim().parse()?);
        if step <= 0.0 {
            return Err(anyhow!("theta grid step must be positive"));
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| snap(start + i as f64 * step)).collect()
    } else {
        raw.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>().map(snap))
            .collect::<std::result::Result<_, _>>()?
    };
    if values.is_empty() {
        return Err(anyhow!("theta grid is empty"));
    }
    if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(anyhow!("theta values must lie in [0, 1]"));
    }
    Ok(values)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { catalog, exclude, common } => {
            let s = settings(&common)?;
            let cfg = IngestConfig { min_aspects: s.min_aspects, exclude: parse_excludes(&exclude) };
            let (cat, stats) = load_catalog(&catalog, &cfg)
                .with_context(|| format!("loading {}", catalog.display()))?;
            println!("read:    {}", stats.read);
            println!("kept:    {}", stats.kept);
            println!("dropped: {}", stats.dropped);
            println!("aspects: {}", cat.aspect_count());
            for (p, name) in cat.aspect_names().iter().enumerate() {
                println!("  {name}: {} distinct values", cat.value_vocab_len(p));
            }
            Ok(())
        }
        Command::Search { catalog, query, model, theta, dump_qp, common } => {
            let s = settings(&common)?;
            let model = model.unwrap_or_else(|| {
                s.file
                    .get("model")
                    .map(|raw| match Model::parse_list(raw) {
                        Ok(models) if models.len() == 1 => models[0],
                        _ => usage_error(&format!("config key `model`: bad value `{raw}`")),
                    })
                    .unwrap_or(Model::Sdi)
            });
            let theta = resolve(theta, &s.file, "theta", 0.5)?;
            let cfg = IngestConfig { min_aspects: s.min_aspects, exclude: Vec::new() };
            let (cat, _) = load_catalog(&catalog, &cfg)?;
            let index = Bm25Index::build(&cat);
            let pool = build_pool(&index, &query, s.pool_size, &Bm25Params::default())?;
            if pool.len() < s.k {
                return Err(anyhow!(
                    "pool of {} items is smaller than k = {}",
                    pool.len(),
                    s.k
                ));
            }

            if let Some(path) = &dump_qp {
                let weights = sdiv_core::compute_weights(&cat, &pool, s.k)?;
                let qp = sdiv_core::build_qp(&cat, &pool, &weights, s.k, theta)?;
                let file = std::fs::File::create(path)?;
                qp.write_debug(std::io::BufWriter::new(file))?;
            }

            let seed = mix_seed(s.seed, &[0]);
            let run = run_model(&cat, &pool, model, s.k, theta, s.epsilon, seed, false)?;
            let report = metrics::report(&cat, &pool, &run.indices, s.alpha)?;

            println!("query: {query}");
            println!("model: {}  theta: {theta}  k: {}  seed: {seed}", model.name(), s.k);
            println!("selected:");
            for (rank, &slot) in run.indices.iter().enumerate() {
                let item = cat.item(pool.items[slot]);
                let aspects: Vec<String> =
                    item.aspects.iter().map(|(a, v)| format!("{a}={v}")).collect();
                println!(
                    "  {:>2}. {}  score={:.4}  {}",
                    rank + 1,
                    item.id,
                    pool.norm_scores[slot],
                    aspects.join(" ")
                );
            }
            let gap = run.gap.map(|g| format!("  gap={g:.6e}")).unwrap_or_default();
            println!(
                "metrics: cr={:.6} ndcg10={:.6} alpha_ndcg={:.6} variance={:.6}{gap}",
                report.cr, report.ndcg10, report.alpha_ndcg, report.variance
            );
            Ok(())
        }
        Command::Bench {
            catalog,
            queries,
            theta_grid,
            models,
            out,
            timing,
            log_selections,
            jobs,
            common,
        } => {
            let s = settings(&common)?;
            let grid_raw = theta_grid
                .or_else(|| s.file.get("theta-grid").map(str::to_string))
                .unwrap_or_else(|| "0:0.1:1".to_string());
            let thetas = parse_theta_grid(&grid_raw)
                .unwrap_or_else(|e| usage_error(&format!("{e:#}")));
            let models_raw = models
                .or_else(|| s.file.get("models").map(str::to_string))
                .unwrap_or_else(|| "sdi,dpp_greedy,kdpp,fast_map_dpp".to_string());
            let models = Model::parse_list(&models_raw)
                .unwrap_or_else(|e| usage_error(&e));

            let cfg = IngestConfig { min_aspects: s.min_aspects, exclude: Vec::new() };
            let (cat, stats) = load_catalog(&catalog, &cfg)?;
            let query_set = QuerySet::load(&queries)?;
            if query_set.is_empty() {
                return Err(anyhow!("query file {} holds no queries", queries.display()));
            }
            eprintln!(
                "catalog: {} items ({} read, {} dropped), {} aspects",
                stats.kept,
                stats.read,
                stats.dropped,
                cat.aspect_count()
            );
            let index = Bm25Index::build(&cat);
            let params = BenchParams {
                k: s.k,
                pool_size: s.pool_size,
                epsilon: s.epsilon,
                alpha: s.alpha,
                seed: s.seed,
                thetas,
                models,
                timing,
            };
            let output = {
                let work = || bench::run_bench(&cat, &index, &query_set.queries, &params);
                match jobs {
                    Some(j) => rayon::ThreadPoolBuilder::new()
                        .num_threads(j)
                        .build()
                        .context("building worker pool")?
                        .install(work),
                    None => work(),
                }
            }?;

            for (query, reason) in &output.skipped {
                eprintln!("warning: skipping query `{query}`: {reason}");
            }
            eprintln!(
                "ran {} of {} queries ({} skipped)",
                query_set.len() - output.skipped.len(),
                query_set.len(),
                output.skipped.len()
            );
            std::fs::write(&out, bench::rows_to_csv(&output.rows))
                .with_context(|| format!("writing {}", out.display()))?;
            if let Some(path) = log_selections {
                std::fs::write(&path, bench::selections_to_csv(&output.rows))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
        Command::Gapcheck { n, trials, out, common } => {
            let s = settings(&common)?;
            let n = n
                .or(s.file.get_parsed("n")?)
                .unwrap_or(12);
            let trials = trials.or(s.file.get_parsed("trials")?).unwrap_or(1000);
            // gap checks default to small subsets so enumeration stays the
            // dominant reference, not the boundary case
            let k = resolve(common.k, &s.file, "k", 4)?;
            let params = gapcheck::GapParams {
                n,
                k: k.min(n),
                trials,
                seed: s.seed,
                epsilon: s.epsilon,
            };
            let (rows, summary) = gapcheck::run_gapcheck(&params)?;
            println!(
                "trials: {}  n: {}  k: {}  epsilon: {:.0e}",
                summary.trials, params.n, params.k, params.epsilon
            );
            if summary.trials > 0 {
                println!(
                    "converged: {}/{} ({:.1}%)",
                    summary.converged,
                    summary.trials,
                    100.0 * summary.converged as f64 / summary.trials as f64
                );
                println!("sound (relax <= optimum <= rounded): {}/{}", summary.sound, summary.trials);
                println!("mean rounded excess over optimum: {:.6}", summary.mean_excess);
                if summary.positive_optima > 0 {
                    println!(
                        "positive-optimum trials: {}  ratio max: {:.6}  mean: {:.6}",
                        summary.positive_optima, summary.max_ratio, summary.mean_ratio
                    );
                }
            }
            if let Some(path) = out {
                std::fs::write(&path, gapcheck::gap_rows_to_csv(&rows))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
    }
}
