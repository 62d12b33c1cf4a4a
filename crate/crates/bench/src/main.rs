use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use qls_core::Kind;
use qlsbench::config::{Method, SweepConfig, SweepMode};
use qlsbench::fixed::{fixed_steps_table, FixedRow};
use qlsbench::report::{self, Provenance};
use qlsbench::{ingest, run_sweep};

#[derive(Parser)]
#[command(name = "qlsbench", version, about = "Adiabatic linear-system solver benchmarks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (overrides the config file).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a sweep described by a JSON config.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Shared-resource table for one method.
    Fixed {
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_kind)]
        kind: Option<Kind>,
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        kappas: Option<Vec<f64>>,
        #[arg(long)]
        instances: Option<usize>,
        /// One resource per κ; auto-tuned when omitted.
        #[arg(long, value_delimiter = ',')]
        resources: Option<Vec<usize>>,
    },
    /// Optimal adiabatic error and cost split over a range of final errors.
    Filtercost {
        #[arg(long, default_value_t = 1e-12)]
        eps_min: f64,
        #[arg(long, default_value_t = 0.1)]
        eps_max: f64,
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// Solve a Matrix Market matrix with both methods.
    Ingest {
        mtx: PathBuf,
        /// Rescale the matrix to unit spectral norm.
        #[arg(long)]
        normalize: bool,
        /// Right-hand side (single-column Matrix Market); random if omitted.
        #[arg(long)]
        rhs: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', value_parser = parse_method)]
        methods: Option<Vec<Method>>,
        #[arg(long)]
        target: Option<f64>,
    },
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    match s {
        "qw" => Ok(Method::Qw),
        "rm" => Ok(Method::Rm),
        _ => Err(format!("unknown method '{s}' (expected qw or rm)")),
    }
}

fn parse_kind(s: &str) -> std::result::Result<Kind, String> {
    match s {
        "pd" => Ok(Kind::Pd),
        "general" => Ok(Kind::General),
        _ => Err(format!("unknown kind '{s}' (expected pd or general)")),
    }
}

fn load_config(path: Option<&Path>, common: &Common) -> Result<SweepConfig> {
    let mut cfg = match path {
        Some(p) => SweepConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => SweepConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.master_seed = s;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &SweepConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Cmd::Sweep { config } => {
            let cfg = load_config(config.as_deref(), &cli.common)?;
            let dir = out_dir(&cfg);
            let (cells, fixed) = match cfg.mode {
                SweepMode::Incremental => (run_sweep(&cfg)?, Vec::new()),
                SweepMode::FixedSteps => {
                    let mut rows: Vec<FixedRow> = Vec::new();
                    for &m in &cfg.methods {
                        rows.extend(fixed_steps_table(&cfg, m, None)?);
                    }
                    (Vec::new(), rows)
                }
            };
            report::write_bundle(&dir, &cells, &fixed, &Provenance::new(&cfg))?;
            println!("wrote {}", dir.join("report.md").display());
        }
        Cmd::Fixed {
            method,
            config,
            kind,
            dims,
            kappas,
            instances,
            resources,
        } => {
            let mut cfg = load_config(config.as_deref(), &cli.common)?;
            if let Some(k) = kind {
                cfg.kinds = vec![k];
            }
            if let Some(d) = dims {
                cfg.dims = d;
            }
            if let Some(k) = kappas {
                cfg.kappas = k;
            }
            if let Some(n) = instances {
                cfg.instances = n;
            }
            cfg.methods = vec![method];
            cfg.validate()?;
            let rows = fixed_steps_table(&cfg, method, resources.as_deref())?;
            let dir = out_dir(&cfg);
            report::write_bundle(&dir, &[], &rows, &Provenance::new(&cfg))?;
            print!("{}", report::fixed_table(&rows));
        }
        Cmd::Filtercost {
            eps_min,
            eps_max,
            points,
        } => {
            let dir = cli.common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            report::write_filtercost(&dir, eps_min, eps_max, points)?;
            println!("wrote optdelta.csv, costsplit.csv, interpolation.json to {}", dir.display());
        }
        Cmd::Ingest {
            mtx,
            normalize,
            rhs,
            methods,
            target,
        } => {
            let mut cfg = load_config(None, &cli.common)?;
            if let Some(m) = methods {
                cfg.methods = m;
            }
            if let Some(t) = target {
                cfg.target_error = t;
            }
            cfg.validate()?;
            let inst = ingest::load(&mtx, normalize, rhs.as_deref(), cfg.master_seed)?;
            let rep = ingest::solve_loaded(&cfg, &inst)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
        }
    }
    Ok(())
}
