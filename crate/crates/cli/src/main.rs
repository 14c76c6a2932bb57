use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use reqgrid::backend::server;
use reqgrid::runner::compare::write_comparisons;
use reqgrid::runner::config::ModelConfig;
use reqgrid::runner::exec::mock_backend;
use reqgrid::runner::report::{friedman_rows, write_friedman};
use reqgrid::runner::summary::write_summaries;
use reqgrid::runner::{self, audit, compare_best, load_results, Config, Factor, FamilyFilter, Harness, Measure};
use reqgrid::{synth, Error, Pipeline};

#[derive(Parser)]
#[command(name = "reqgrid", version, about = "Zero-shot requirements classification experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Binary,
    Multiclass,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum PipelineArg {
    Inference,
    Embedding,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment grid and write results and reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        family: FamilyArg,
        #[arg(long, value_enum, default_value = "all")]
        pipeline: PipelineArg,
        /// Results directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Skip finished settings and continue partial ones.
        #[arg(long)]
        resume: bool,
        /// Print the planned settings and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Factor summary and Friedman test over an existing results directory.
    Stats {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        factor: String,
        #[arg(long, default_value = "wF1")]
        measure: String,
    },
    /// Wilcoxon comparison of the best settings of two results directories.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        task: String,
    },
    /// Serve the deterministic mock backend over HTTP.
    MockServe {
        #[arg(long, default_value_t = 8088)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Take the label lexicon, salt and dimension from this config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Model alias in `--config` whose mock settings to use.
        #[arg(long)]
        model: Option<String>,
    },
    /// Recompute every score in results.csv from the prediction files.
    Audit {
        #[arg(long)]
        results: PathBuf,
    },
    /// Write the bundled synthetic datasets.
    Synth {
        #[arg(long, default_value = "data")]
        out: PathBuf,
        #[arg(long, default_value_t = synth::DEFAULT_SEED)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.chain().find_map(|e| e.downcast_ref::<Error>()).map_or(1, Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run {
            config,
            family,
            pipeline,
            out,
            resume,
            dry_run,
        } => run(&config, family, pipeline, &out, resume, dry_run),
        Command::Stats {
            results,
            factor,
            measure,
        } => stats(&results, &factor, &measure),
        Command::Compare { a, b, task } => {
            let c = compare_best(&a, &b, &task, None)?;
            write_comparisons(std::io::stdout().lock(), std::slice::from_ref(&c))?;
            eprintln!(
                "{} groups; group wF1 means {:.4} vs {:.4}",
                c.groups.len(),
                mean(&c.a_scores),
                mean(&c.b_scores)
            );
            Ok(())
        }
        Command::MockServe {
            port,
            host,
            config,
            model,
        } => mock_serve(&host, port, config.as_deref(), model.as_deref()),
        Command::Audit { results } => {
            let report = audit(&results)?;
            for m in &report.mismatches {
                eprintln!("mismatch: {m}");
            }
            if !report.is_clean() {
                bail!("{} of {} values do not match", report.mismatches.len(), report.checked);
            }
            println!("{} values match their prediction files", report.checked);
            Ok(())
        }
        Command::Synth { out, seed } => {
            for path in synth::write_bundled(&out, seed)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

fn run(
    config: &Path,
    family: FamilyArg,
    pipeline: PipelineArg,
    out: &Path,
    resume: bool,
    dry_run: bool,
) -> anyhow::Result<()> {
    let config = Config::load(config)?;
    let family = match family {
        FamilyArg::Binary => FamilyFilter::Binary,
        FamilyArg::Multiclass => FamilyFilter::Multiclass,
        FamilyArg::All => FamilyFilter::All,
    };
    let pipeline = match pipeline {
        PipelineArg::Inference => Some(Pipeline::Inference),
        PipelineArg::Embedding => Some(Pipeline::Embedding),
        PipelineArg::All => None,
    };
    if dry_run {
        for s in runner::plan_grid(&config, family, pipeline)? {
            println!("{s}");
        }
        return Ok(());
    }
    let harness = Harness::from_config(config)?;
    for w in harness.warnings() {
        eprintln!("warning: {w}");
    }
    let outcome = runner::run(&harness, family, pipeline, out, resume, |i, planned, r| {
        eprintln!(
            "[{}/{}] {} wF1={:.4} calls={}",
            i + 1,
            planned,
            r.setting,
            r.report.weighted.f1,
            r.backend_calls
        );
    })
    .with_context(|| format!("run into {}", out.display()))?;
    println!(
        "planned {} settings, executed {}; report at {}",
        outcome.planned,
        outcome.results.len(),
        out.join("report.md").display()
    );
    Ok(())
}

fn stats(results: &Path, factor: &str, measure: &str) -> anyhow::Result<()> {
    let factor: Factor = factor.parse()?;
    let measure: Measure = measure.parse()?;
    let records = load_results(runner::RunLayout::new(results).results_csv())?;
    let rows = friedman_rows(&records, factor, measure)?;
    if rows.is_empty() {
        bail!("{}: no inference results to summarize", results.display());
    }
    let summaries: Vec<_> = rows.iter().map(|(s, _)| s).collect();
    let tests: Vec<_> = rows.iter().map(|(_, t)| t.clone()).collect();
    let mut out = std::io::stdout().lock();
    write_summaries(&mut out, &summaries)?;
    println!();
    write_friedman(&mut out, &tests)?;
    Ok(())
}

fn mock_serve(host: &str, port: u16, config: Option<&Path>, model: Option<&str>) -> anyhow::Result<()> {
    let config = match config {
        Some(path) => Config::load(path)?,
        None => Config::canonical("data"),
    };
    let default_model;
    let model: &ModelConfig = match model {
        Some(id) => config.model(id)?,
        None => {
            default_model = ModelConfig {
                id: "mock".into(),
                pipeline: Pipeline::Inference,
                backend: Default::default(),
                url: None,
                salt: None,
                dim: None,
                normalize: reqgrid::backend::Normalize::MeanLogProb,
            };
            &default_model
        }
    };
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .with_context(|| format!("invalid address {host}:{port}"))?;
    eprintln!("mock backend listening on http://{addr} (POST /v1/score, /v1/embed)");
    server::serve(addr, mock_backend(&config, model))?;
    Ok(())
}
