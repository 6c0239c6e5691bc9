use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use edgenet::filters::{param_count, ArmaRational, FilterKind};
use edgenet::graph::{build_shift, diffusion_centrality, read_edge_list, CsrMatrix, Normalization};
use edgenet::harness::{
    build_dataset, evaluate, metrics_csv, train, ExperimentConfig, Split, TaskConfig,
};
use edgenet::nn::{gradcheck_suite, load_model, save_model, GraphContext};
use edgenet::spectral::{arma_response, poly_response, shift_eigen};

#[derive(Parser)]
#[command(name = "edgenet", version, about = "Edge-varying graph neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the dataset described by a config and write it as an edge list
    /// plus a signals CSV.
    Generate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        signals: PathBuf,
    },
    /// Train the configured model; writes the best model and per-epoch metrics.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        metrics: PathBuf,
    },
    /// Evaluate a saved model on one split of the configured dataset.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
    },
    /// Print `lambda,response` pairs of a filter on a symmetric graph.
    Spectrum {
        #[command(flatten)]
        graph: GraphArgs,
        /// Polynomial coefficients a_0,a_1,...
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with_all = ["den", "num"])]
        coeffs: Option<Vec<f64>>,
        /// ARMA denominator a_1,...,a_P of 1 + sum a_p x^p.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "num")]
        den: Option<Vec<f64>>,
        /// ARMA numerator b_0,...,b_Q.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "den")]
        num: Option<Vec<f64>>,
    },
    /// Print `node,centrality` for the diffusion centrality of order K.
    Centrality {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 3)]
        order: usize,
        /// Only print the highest-scoring nodes.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Number of trainable scalars in one layer.
    Paramcount(CountArgs),
    /// Finite-difference check of every parameter class on a small model suite.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GraphArgs {
    /// Edge list: `src dst [weight]` per line.
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    directed: bool,
    #[arg(long, value_enum, default_value_t = NormArg::MaxEigenvalue)]
    normalization: NormArg,
}

#[derive(Args)]
struct CountArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Filter order K.
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// ARMA poles P.
    #[arg(long, default_value_t = 1)]
    poles: usize,
    /// Output features; input features default to the same value.
    #[arg(long, default_value_t = 1)]
    features: usize,
    #[arg(long)]
    in_features: Option<usize>,
    /// Block count B.
    #[arg(long, default_value_t = 1)]
    blocks: usize,
    /// Node count N.
    #[arg(long, default_value_t = 0)]
    nodes: usize,
    /// Stored off-diagonal entries M of the shift operator.
    #[arg(long, default_value_t = 0)]
    edge_count: usize,
    /// Important nodes |I|.
    #[arg(long, default_value_t = 0)]
    important: usize,
    /// Stored off-diagonal entries in the rows of important nodes.
    #[arg(long, default_value_t = 0)]
    important_edges: usize,
    /// Share each attention transform with its mixing matrix.
    #[arg(long)]
    tied: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    None,
    MaxEigenvalue,
    RowStochastic,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Polynomial,
    EdgeVarying,
    BlockVarying,
    Hybrid,
    Arma,
    Gat,
    Gcat,
    EdgeVaryingGat,
    HybridGcat,
}

fn load_config(run: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&run.config)
        .with_context(|| format!("reading config {}", run.config.display()))?;
    if let Some(seed) = run.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn load_shift(g: &GraphArgs) -> Result<CsrMatrix> {
    let graph = read_edge_list(&g.edges, g.directed)
        .with_context(|| format!("reading edge list {}", g.edges.display()))?;
    let norm = match g.normalization {
        NormArg::None => Normalization::None,
        NormArg::MaxEigenvalue => Normalization::MaxEigenvalue,
        NormArg::RowStochastic => Normalization::RowStochastic,
    };
    Ok(build_shift(&graph, norm)?)
}

fn smooth_l1_delta(cfg: &ExperimentConfig) -> f64 {
    match &cfg.task {
        TaskConfig::RatingsRegression(r) => r.delta,
        _ => 1.0,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn count(a: &CountArgs) -> usize {
    let kind = match a.family {
        FamilyArg::Polynomial => FilterKind::Polynomial { order: a.order },
        FamilyArg::EdgeVarying => FilterKind::EdgeVarying {
            order: a.order,
            edges: a.edge_count,
            nodes: a.nodes,
        },
        FamilyArg::BlockVarying => FilterKind::BlockVarying {
            blocks: a.blocks,
            order: a.order,
        },
        FamilyArg::Hybrid => FilterKind::Hybrid {
            important: a.important,
            important_edges: a.important_edges,
            order: a.order,
        },
        FamilyArg::Arma => FilterKind::Arma {
            poles: a.poles,
            order: a.order,
        },
        FamilyArg::Gat => FilterKind::Gat { tied: a.tied },
        FamilyArg::Gcat => FilterKind::Gcat {
            order: a.order,
            tied: a.tied,
        },
        FamilyArg::EdgeVaryingGat => FilterKind::EdgeVaryingGat {
            order: a.order,
            tied: a.tied,
        },
        FamilyArg::HybridGcat => FilterKind::HybridGcat {
            order: a.order,
            tied: a.tied,
        },
    };
    param_count(kind, a.in_features.unwrap_or(a.features), a.features)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate { run, edges, signals } => {
            let cfg = load_config(&run)?;
            let data = build_dataset(&cfg)?;
            data.export(&edges, &signals)?;
            println!(
                "nodes {} samples {} (train {}, val {}, test {}) hash {}",
                data.n(),
                data.samples.len(),
                data.splits.train.len(),
                data.splits.val.len(),
                data.splits.test.len(),
                data.hash()
            );
        }
        Command::Train {
            run,
            model,
            metrics,
        } => {
            let cfg = load_config(&run)?;
            let data = build_dataset(&cfg)?;
            let outcome = train(&cfg, &data)?;
            save_model(&outcome.model, &model)?;
            write_file(&metrics, &metrics_csv(&outcome.metrics))?;
            let ctx = GraphContext::new(data.shift.clone())?;
            let test = evaluate(&outcome.model, &ctx, &data, Split::Test, smooth_l1_delta(&cfg))?;
            let best = outcome
                .best_epoch
                .map_or_else(|| "none".to_string(), |e| e.to_string());
            println!(
                "best epoch {best}; test loss {:.6} metric {:.6} over {} samples",
                test.loss, test.metric, test.samples
            );
        }
        Command::Eval { run, model, split } => {
            let cfg = load_config(&run)?;
            let data = build_dataset(&cfg)?;
            let ctx = GraphContext::new(data.shift.clone())?;
            let m = load_model(&model, &ctx)?;
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Val => Split::Val,
                SplitArg::Test => Split::Test,
            };
            let e = evaluate(&m, &ctx, &data, split, smooth_l1_delta(&cfg))?;
            println!("loss {:.6} metric {:.6} samples {}", e.loss, e.metric, e.samples);
        }
        Command::Spectrum {
            graph,
            coeffs,
            den,
            num,
        } => {
            let s = load_shift(&graph)?;
            let eig = shift_eigen(&s)?;
            let response = match (coeffs, den, num) {
                (Some(c), None, None) => poly_response(&c, &eig.eigenvalues),
                (None, Some(a), Some(b)) => arma_response(&ArmaRational::new(a, b), &eig.eigenvalues)?,
                _ => bail!("give either --coeffs or both --den and --num"),
            };
            let mut out = String::from("lambda,response\n");
            for (l, r) in eig.eigenvalues.iter().zip(&response) {
                let _ = writeln!(out, "{l},{r}");
            }
            print!("{out}");
        }
        Command::Centrality { graph, order, top } => {
            let s = load_shift(&graph)?;
            let scores = diffusion_centrality(&s, order)?;
            let mut idx: Vec<usize> = (0..scores.len()).collect();
            if let Some(k) = top {
                idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
                idx.truncate(k);
            }
            println!("node,centrality");
            for i in idx {
                println!("{i},{}", scores[i]);
            }
        }
        Command::Paramcount(args) => println!("{}", count(&args)),
        Command::Gradcheck { seed, step, tol } => {
            let report = gradcheck_suite(seed, step, tol)?;
            for (class, err) in &report.per_class {
                let verdict = if *err <= tol { "ok" } else { "FAIL" };
                println!("{class:?}: {err:.3e} {verdict}");
            }
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
