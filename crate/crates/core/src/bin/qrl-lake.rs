use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use qrl_lake::bench::{
    correlate, correlations_csv, parse_only, parse_summary_csv, published_summary, render_report,
    run_grid, scatter_csv, GridPlan, DEFAULT_SEEDS,
};
use qrl_lake::circuits::benchmark_circuit;
use qrl_lake::lake::{
    policy_grid, reward_threshold, success_probability, value_iteration, LakeModel,
};
use qrl_lake::models::ModelSpec;
use qrl_lake::ppo::{train, PpoConfig};
use qrl_lake::qmetrics::{metrics_csv, solution_metrics, MetricsConfig};

#[derive(Parser)]
#[command(name = "qrl-lake", version, about = "Hybrid quantum-classical PPO on a slippery FrozenLake")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the lake exactly and derive the reward threshold.
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train one model and write its run directory.
    Train {
        /// e.g. pqc6 or nn4
        #[arg(long, value_parser = parse_spec)]
        model: ModelSpec,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out/run")]
        out: PathBuf,
    },
    /// Ent, Exp and ED for circuits (ED only for MLPs); writes metrics.csv.
    Metrics {
        /// Comma-separated solutions, e.g. pqc2,pqc6,nn4
        #[arg(long, value_parser = parse_spec_list)]
        only: Option<SpecList>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Train every (solution, seed) pair not yet completed.
    Grid {
        /// Comma-separated solutions, e.g. pqc2,pqc6,nn4
        #[arg(long, value_parser = parse_spec_list)]
        only: Option<SpecList>,
        /// Run a single seed instead of 1, 2, 3.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Summary, correlations and SVG figures from grid and metrics outputs.
    Report {
        /// Comma-separated solutions, e.g. pqc2,pqc6,nn4
        #[arg(long, value_parser = parse_spec_list)]
        only: Option<SpecList>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Correlations from summary.csv, or from the published table.
    Correlate {
        #[arg(long)]
        published: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Circuit inspection.
    Circuits {
        #[command(subcommand)]
        action: CircuitsAction,
    },
}

#[derive(Subcommand)]
enum CircuitsAction {
    /// Print the gate table of one circuit, or all of them.
    Dump {
        #[arg(long)]
        id: Option<usize>,
    },
}

fn parse_spec(s: &str) -> Result<ModelSpec, String> {
    s.parse().map_err(|e: qrl_lake::Error| e.to_string())
}

#[derive(Clone)]
struct SpecList(Vec<ModelSpec>);

fn parse_spec_list(s: &str) -> Result<SpecList, String> {
    parse_only(s).map(SpecList).map_err(|e| e.to_string())
}

fn ppo_config(path: Option<&Path>) -> anyhow::Result<PpoConfig> {
    Ok(match path {
        Some(p) => PpoConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => PpoConfig::default(),
    })
}

fn plan(only: Option<SpecList>, seed: Option<u64>, config: PpoConfig) -> GridPlan {
    GridPlan {
        specs: only.map(|l| l.0).unwrap_or_else(ModelSpec::full_grid),
        seeds: seed.map(|s| vec![s]).unwrap_or_else(|| DEFAULT_SEEDS.to_vec()),
        config,
    }
}

fn oracle(config: &PpoConfig) -> anyhow::Result<()> {
    let lake = LakeModel::standard(config.slip_prob)?.with_max_episode_steps(config.max_episode_steps);
    let undiscounted = value_iteration(&lake, 1.0, 1e-12)?;
    let report = reward_threshold(&lake)?;
    let horizon = success_probability(&lake, &report.policy, config.max_episode_steps)[lake.start()];
    println!("slip probability          {}", config.slip_prob);
    println!("V[start], gamma = 1       {:.6}", undiscounted.values[lake.start()]);
    println!("threshold policy gamma    {}", report.options.gamma);
    println!("P(goal within {} steps)  {:.6}", config.max_episode_steps, horizon);
    println!("Monte Carlo mean reward   {:.6} ({} episodes)", report.optimal_mean, report.options.episodes);
    println!("reward threshold          {:.4}", report.threshold);
    println!("policy:\n{}", policy_grid(&lake, &report.policy));
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Oracle { config } => oracle(&ppo_config(config.as_deref())?),
        Command::Train { model, seed, config, out } => {
            let spec = model;
            let mut cfg = ppo_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let outcome = train(spec, &cfg)?;
            outcome.write_run_dir(&out)?;
            let mr = qrl_lake::bench::max_reward(&outcome.series);
            println!("{spec} seed {}: MR {mr:.3}, {} episodes, wrote {}", cfg.seed, outcome.episodes, out.display());
            Ok(())
        }
        Command::Metrics { only, seed, config, jobs, out } => {
            let mut cfg = match config {
                Some(p) => MetricsConfig::from_toml_str(&fs::read_to_string(&p)?)
                    .with_context(|| format!("reading {}", p.display()))?,
                None => MetricsConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let specs = only.map(|l| l.0).unwrap_or_else(ModelSpec::full_grid);
            let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
            let records = pool.install(|| {
                specs.par_iter().map(|&s| solution_metrics(s, &cfg)).collect::<Result<Vec<_>, _>>()
            })?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("metrics.csv"), metrics_csv(&records))?;
            for r in &records {
                let show = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
                println!("{:<7} Ent {:>6}  Exp {:>6}  ED {:.3}/{}", r.solution.to_string(), show(r.ent), show(r.exp), r.ed, r.ed_dim);
            }
            Ok(())
        }
        Command::Grid { only, seed, config, jobs, out } => {
            let plan = plan(only, seed, ppo_config(config.as_deref())?);
            let report = run_grid(&plan, &out, jobs)?;
            println!(
                "{} runs: {} trained, {} already done, {} failed",
                plan.runs().len(),
                report.completed.len(),
                report.skipped.len(),
                report.failed.len()
            );
            for (key, err) in &report.failed {
                eprintln!("{key}: {err}");
            }
            if !report.failed.is_empty() {
                bail!("{} runs failed", report.failed.len());
            }
            Ok(())
        }
        Command::Report { only, seed, out } => {
            let plan = plan(only, seed, PpoConfig::default());
            let files = render_report(&out, &plan)?;
            for f in files.files {
                println!("{}", out.join(f).display());
            }
            Ok(())
        }
        Command::Correlate { published, out } => {
            let rows = if published {
                published_summary()
            } else {
                let path = out.join("summary.csv");
                parse_summary_csv(&fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?)?
            };
            let table = correlations_csv(&correlate(&rows));
            fs::create_dir_all(&out)?;
            fs::write(out.join("correlations.csv"), &table)?;
            fs::write(out.join("scatter.csv"), scatter_csv(&rows)?)?;
            print!("{table}");
            Ok(())
        }
        Command::Circuits { action: CircuitsAction::Dump { id } } => {
            match id {
                Some(id) => print!("{}", benchmark_circuit(id)?.dump()),
                None => {
                    for id in 1..=qrl_lake::circuits::NUM_CIRCUITS {
                        println!("{}", benchmark_circuit(id)?.dump());
                    }
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
