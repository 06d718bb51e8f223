use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kvlink_cli::config::{
    Experiment, ModelSource, Multiround, Policy, RatioSweep, SingleScenario, Sweep, Threshold,
};
use kvlink_cli::experiments;
use kvlink_cli::output::OutputDir;
use kvlink_cli::validate;
use kvlink_cli::{CliError, CliResult, ExperimentConfig};
use kvlink_core::static_e2e::SweepAxis;

#[derive(Parser)]
#[command(
    name = "kvlink",
    version,
    about = "NL vs KV-cache transmission latency experiments"
)]
struct Cli {
    /// Experiment config (JSON). Flags given on the command line override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Model preset name.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Static NL/KV latency ratio sweep.
    Compare(CompareArgs),
    /// Single-link decision function and bandwidth threshold.
    Threshold(ThresholdArgs),
    /// One sampled scenario solved by JMSRA and the baselines.
    Jmsra(JmsraArgs),
    /// Median objective over a bandwidth or agent-count grid.
    Sweep(SweepArgs),
    /// Multi-round dialogue under one or more policies.
    Multiround(MultiroundArgs),
    /// Run the acceptance criteria and write a JSON report.
    Validate,
    /// Run whatever experiment the config file describes.
    Run,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, value_parser = parse_ratio_axis)]
    axis: Option<SweepAxis>,
    /// `start:stop:count` or a comma list.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<Grid>,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    theta_r: Option<f64>,
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long)]
    receiver_tflops: Option<f64>,
    #[arg(long)]
    bandwidth_hz: Option<f64>,
}

#[derive(Args)]
struct JmsraArgs {
    #[arg(long)]
    c0_tflops: Option<f64>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Bandwidth,
    Agents,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    axis: Option<SweepKind>,
    #[arg(long, value_parser = parse_grid)]
    grid: Option<Grid>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    c0_tflops: Option<f64>,
}

#[derive(Args)]
struct MultiroundArgs {
    #[arg(long)]
    rounds: Option<u32>,
    /// Repeat to run several policies.
    #[arg(long, value_enum)]
    policy: Vec<Policy>,
}

/// Grid values parsed from one argument.
#[derive(Clone)]
struct Grid(Vec<f64>);

fn parse_ratio_axis(s: &str) -> Result<SweepAxis, String> {
    SweepAxis::parse(s).ok_or_else(|| {
        let names: Vec<&str> = SweepAxis::ALL.iter().map(|a| a.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

/// `start:stop:count` is inclusive and evenly spaced.
fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err("expected start:stop:count".into());
        };
        let (a, b) = (num(a)?, num(b)?);
        let n: usize = n.trim().parse().map_err(|e| format!("count `{n}`: {e}"))?;
        return match n {
            0 => Err("count must be positive".into()),
            1 => Ok(Grid(vec![a])),
            _ => Ok(Grid(
                (0..n)
                    .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                    .collect(),
            )),
        };
    }
    s.split(',').map(num).collect::<Result<_, _>>().map(Grid)
}

fn base_config(cli: &Cli, default: impl FnOnce() -> Experiment) -> CliResult<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(default()),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    if let Some(p) = &cli.preset {
        cfg.model = ModelSource::Preset(p.clone());
    }
    Ok(cfg)
}

fn mismatch(cfg: &ExperimentConfig, want: &str) -> CliError {
    CliError::Invalid(format!(
        "subcommand `{want}` does not match the config's `{}` block",
        cfg.experiment.kind()
    ))
}

fn build(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut cfg = match &cli.command {
        Command::Compare(_) => base_config(cli, || Experiment::RatioSweep(RatioSweep::default()))?,
        Command::Threshold(_) => base_config(cli, || Experiment::Threshold(Threshold::default()))?,
        Command::Jmsra(_) => {
            base_config(
                cli,
                || Experiment::SingleScenario(SingleScenario::default()),
            )?
        }
        Command::Sweep(a) => base_config(cli, || match a.axis {
            Some(SweepKind::Agents) => Experiment::AgentSweep(Sweep::agents()),
            _ => Experiment::BandwidthSweep(Sweep::bandwidth()),
        })?,
        Command::Multiround(_) => {
            base_config(cli, || Experiment::Multiround(Multiround::default()))?
        }
        Command::Run => {
            if cli.config.is_none() {
                return Err(CliError::Invalid("`run` needs --config".into()));
            }
            base_config(cli, || unreachable!("config is present"))?
        }
        Command::Validate => unreachable!("validate builds no experiment"),
    };
    if let Command::Sweep(SweepArgs {
        axis: Some(kind), ..
    }) = &cli.command
    {
        let same = matches!(
            (kind, &cfg.experiment),
            (SweepKind::Bandwidth, Experiment::BandwidthSweep(_))
                | (SweepKind::Agents, Experiment::AgentSweep(_))
        );
        if !same {
            return Err(mismatch(&cfg, "sweep --axis"));
        }
    }
    match (&cli.command, &mut cfg.experiment) {
        (Command::Compare(a), Experiment::RatioSweep(s)) => {
            if let Some(axis) = a.axis {
                if axis != s.axis {
                    s.grid = None;
                }
                s.axis = axis;
            }
            if let Some(g) = &a.grid {
                s.grid = Some(g.0.clone());
            }
        }
        (Command::Threshold(a), Experiment::Threshold(t)) => {
            let set = |dst: &mut f64, v: Option<f64>| {
                if let Some(v) = v {
                    *dst = v;
                }
            };
            set(&mut t.alpha, a.alpha);
            set(&mut t.xi, a.xi);
            set(&mut t.theta_r, a.theta_r);
            set(&mut t.snr_db, a.snr_db);
            set(&mut t.receiver_tflops, a.receiver_tflops);
            set(&mut t.bandwidth_hz, a.bandwidth_hz);
        }
        (Command::Jmsra(a), Experiment::SingleScenario(p)) => {
            if let Some(c) = a.c0_tflops {
                p.scenario.ea_compute_tflops = c;
            }
            if let Some(n) = a.agents {
                p.scenario.agents = n;
            }
            if let Some(d) = a.delta {
                p.delta = d;
            }
        }
        (Command::Sweep(a), Experiment::BandwidthSweep(s) | Experiment::AgentSweep(s)) => {
            if let Some(g) = &a.grid {
                s.grid = g.0.clone();
            }
            if let Some(t) = a.trials {
                s.trials = t;
            }
            if let Some(c) = a.c0_tflops {
                s.scenario.ea_compute_tflops = c;
            }
        }
        (Command::Multiround(a), Experiment::Multiround(m)) => {
            if let Some(r) = a.rounds {
                m.rounds = r;
            }
            if !a.policy.is_empty() {
                m.policies = a.policy.clone();
            }
        }
        (Command::Run, _) => {}
        (Command::Compare(_), _) => return Err(mismatch(&cfg, "compare")),
        (Command::Threshold(_), _) => return Err(mismatch(&cfg, "threshold")),
        (Command::Jmsra(_), _) => return Err(mismatch(&cfg, "jmsra")),
        (Command::Sweep(_), _) => return Err(mismatch(&cfg, "sweep")),
        (Command::Multiround(_), _) => return Err(mismatch(&cfg, "multiround")),
        (Command::Validate, _) => unreachable!("validate builds no experiment"),
    }
    Ok(cfg)
}

impl Cli {
    fn out_dir(&self, cfg: Option<&ExperimentConfig>) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.and_then(|c| c.output.clone()))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn run_validate(cli: &Cli) -> CliResult<()> {
    let mut out = OutputDir::create(&cli.out_dir(None))?;
    let report = validate::run_all(|c| println!("{}", c.line()));
    let path = out.write_json("validation_report", &report)?;
    println!("report: {}", path.display());
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::ValidationFailed(format!(
            "criteria {:?}",
            report.failed_ids()
        )))
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    if let Command::Validate = cli.command {
        return run_validate(cli);
    }
    let cfg = build(cli)?;
    cfg.constants()?;
    if cfg.experiment.is_stochastic() {
        cfg.require_seed()?;
    }
    let mut out = OutputDir::create(&cli.out_dir(Some(&cfg)))?;
    experiments::run(&cfg, &mut out)?;
    for p in out.written() {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kvlink: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
