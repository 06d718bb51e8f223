//! Experiment drivers: each turns a resolved config into CSV/JSON artifacts.

use kvlink_core::channel::LinkSnr;
use kvlink_core::decision::{
    bandwidth_threshold, decision_poly, f_of_rho, Mode, TransmissionContext,
};
use kvlink_core::optimizer::{Assignment, Direction};
use kvlink_core::scenario::{run_multi_round, sample_single_round, RoundTrace, SingleRoundConfig};
use kvlink_core::static_e2e::{ratio_sweep, RatioRow};
use kvlink_core::{AgentCompute, Registry, WorkloadConstants};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    Experiment, ExperimentConfig, Multiround, Policy, RatioSweep, SingleScenario, Sweep, Threshold,
};
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RatioCsvRow {
    pub axis_name: &'static str,
    pub axis_value: f64,
    pub t_nl_s: f64,
    pub t_kv_s: f64,
    pub ratio: f64,
    pub bottleneck_aa_nl: usize,
    pub bottleneck_aa_kv: usize,
}

impl From<RatioRow> for RatioCsvRow {
    fn from(r: RatioRow) -> Self {
        Self {
            axis_name: r.axis.name(),
            axis_value: r.x,
            t_nl_s: r.t_nl,
            t_kv_s: r.t_kv,
            ratio: r.ratio,
            bottleneck_aa_nl: r.bottleneck_nl,
            bottleneck_aa_kv: r.bottleneck_kv,
        }
    }
}

/// One row per grid point, in grid order.
pub fn ratio_rows(k: &WorkloadConstants, sweep: &RatioSweep) -> CliResult<Vec<RatioCsvRow>> {
    let grid = sweep.grid();
    if grid.is_empty() {
        return Err(CliError::Invalid("ratio sweep grid is empty".into()));
    }
    grid.par_iter()
        .map(|&x| {
            let row = ratio_sweep(k, sweep.axis, &[x], &sweep.defaults)?;
            Ok(row.into_iter().next().expect("one grid point").into())
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdSummary {
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub f_at_full_band: f64,
    pub rho_star: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub rho: f64,
    pub f_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceRow {
    pub xi: f64,
    pub alpha: f64,
    pub rho_star: Option<f64>,
}

fn threshold_context(t: &Threshold) -> CliResult<TransmissionContext> {
    let ctx = TransmissionContext {
        alpha: t.alpha,
        xi: t.xi,
        theta_r: t.theta_r,
        gamma: t.gamma,
        bits_per_token: t.bits_per_token,
        receiver_compute: AgentCompute::from_tflops(t.receiver_tflops)?,
        snr: LinkSnr::from_db(t.snr_db)?,
        bandwidth_hz: t.bandwidth_hz,
        rho: 1.0,
    };
    ctx.validate()?;
    Ok(ctx)
}

pub fn threshold_summary(k: &WorkloadConstants, t: &Threshold) -> CliResult<ThresholdSummary> {
    let ctx = threshold_context(t)?;
    let p = decision_poly(k, &ctx)?;
    Ok(ThresholdSummary {
        k4: p.k4,
        k5: p.k5,
        k6: p.k6,
        f_at_full_band: f_of_rho(k, &ctx, 1.0)?,
        rho_star: bandwidth_threshold(k, &ctx)?,
    })
}

pub fn threshold_curve(k: &WorkloadConstants, t: &Threshold) -> CliResult<Vec<CurveRow>> {
    let ctx = threshold_context(t)?;
    if t.rho_points == 0 {
        return Err(CliError::Invalid("rho_points must be positive".into()));
    }
    (1..=t.rho_points)
        .map(|i| {
            let rho = i as f64 / t.rho_points as f64;
            Ok(CurveRow {
                rho,
                f_s: f_of_rho(k, &ctx, rho)?,
            })
        })
        .collect()
}

pub fn threshold_surface(k: &WorkloadConstants, t: &Threshold) -> CliResult<Vec<SurfaceRow>> {
    let base = threshold_context(t)?;
    let mut rows = Vec::with_capacity(t.xi_grid.len() * t.alpha_grid.len());
    for &xi in &t.xi_grid {
        for &alpha in &t.alpha_grid {
            let ctx = TransmissionContext { xi, alpha, ..base };
            rows.push(SurfaceRow {
                xi,
                alpha,
                rho_star: bandwidth_threshold(k, &ctx)?,
            });
        }
    }
    Ok(rows)
}

/// Every requested strategy on one sampled instance.
#[derive(Debug, Clone, Serialize)]
pub struct StrategyResult {
    pub strategy: String,
    pub assignment: Assignment,
}

fn solve_all(
    registry: &Registry,
    names: &[String],
    instance: &kvlink_core::ScenarioInstance,
    delta: f64,
) -> CliResult<Vec<StrategyResult>> {
    names
        .iter()
        .map(|name| {
            Ok(StrategyResult {
                strategy: name.clone(),
                assignment: registry.get(name)?.solve(instance, delta)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub direction: &'static str,
    pub step: usize,
    pub flipped_agent: Option<usize>,
    #[serde(rename = "J_s")]
    pub j_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TopologyRow {
    pub agent_id: usize,
    pub distance_m: f64,
    pub tx_power_dbm: f64,
    pub snr_db: f64,
    pub mode: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineRow {
    pub strategy: String,
    #[serde(rename = "J_s")]
    pub j_s: f64,
    pub tau_s: f64,
    pub prefill_s: f64,
    pub kv_agents: usize,
}

#[derive(Debug, Clone, Serialize)]
struct TraceJson {
    direction: Direction,
    step: usize,
    flipped_agent: Option<usize>,
    #[serde(rename = "J_s")]
    j_s: f64,
}

#[derive(Debug, Clone, Serialize)]
struct ResultJson<'a> {
    strategy: &'a str,
    x: Vec<u8>,
    rho: &'a [f64],
    #[serde(rename = "J_s")]
    j_s: f64,
    tau_s: f64,
    prefill_s: f64,
    trace: Vec<TraceJson>,
    evaluations: usize,
    bisection_iters: u32,
}

impl<'a> ResultJson<'a> {
    fn new(r: &'a StrategyResult) -> Self {
        let a = &r.assignment;
        Self {
            strategy: &r.strategy,
            x: a.bits(),
            rho: &a.rho,
            j_s: a.j,
            tau_s: a.tau,
            prefill_s: a.prefill,
            trace: a
                .trace
                .iter()
                .map(|t| TraceJson {
                    direction: t.direction,
                    step: t.step,
                    flipped_agent: t.flipped_agent,
                    j_s: t.j,
                })
                .collect(),
            evaluations: a.stats.evaluations,
            bisection_iters: a.stats.max_bisection_iters,
        }
    }
}

fn single_scenario(
    k: &WorkloadConstants,
    cfg: &ExperimentConfig,
    p: &SingleScenario,
    out: &mut OutputDir,
) -> CliResult<()> {
    let seed = cfg.require_seed()?;
    if p.strategies.is_empty() {
        return Err(CliError::Invalid("no strategies requested".into()));
    }
    let sampled = sample_single_round(k, &p.scenario, seed)?;
    let registry = Registry::standard();
    let results = solve_all(&registry, &p.strategies, &sampled.instance, p.delta)?;

    let primary = &results[0];
    let trace: Vec<TraceRow> = primary
        .assignment
        .trace
        .iter()
        .map(|t| TraceRow {
            direction: t.direction.as_str(),
            step: t.step,
            flipped_agent: t.flipped_agent,
            j_s: t.j,
        })
        .collect();
    if trace.is_empty() {
        out.write_header_only(
            "jmsra_trace",
            &["direction", "step", "flipped_agent", "J_s"],
            cfg,
        )?;
    } else {
        out.write_csv("jmsra_trace", &trace, cfg)?;
    }
    let topology: Vec<TopologyRow> = sampled
        .draws
        .iter()
        .zip(&primary.assignment.x)
        .enumerate()
        .map(|(i, (d, m))| TopologyRow {
            agent_id: i + 1,
            distance_m: d.distance_m,
            tx_power_dbm: d.tx_power_dbm,
            snr_db: d.snr.db(),
            mode: m.as_str(),
        })
        .collect();
    out.write_csv("topology", &topology, cfg)?;
    let baselines: Vec<BaselineRow> = results
        .iter()
        .map(|r| BaselineRow {
            strategy: r.strategy.clone(),
            j_s: r.assignment.j,
            tau_s: r.assignment.tau,
            prefill_s: r.assignment.prefill,
            kv_agents: r.assignment.kv_count(),
        })
        .collect();
    out.write_csv("strategies", &baselines, cfg)?;
    let json: Vec<ResultJson> = results.iter().map(ResultJson::new).collect();
    out.write_json("jmsra_result", &json)?;
    Ok(())
}

/// Parameter varied by a scenario sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioAxis {
    Bandwidth,
    Agents,
}

impl ScenarioAxis {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioAxis::Bandwidth => "bandwidth_hz",
            ScenarioAxis::Agents => "agents",
        }
    }

    pub fn apply(self, base: &SingleRoundConfig, x: f64) -> CliResult<SingleRoundConfig> {
        let mut c = base.clone();
        match self {
            ScenarioAxis::Bandwidth => c.bandwidth_hz = x,
            ScenarioAxis::Agents => {
                if !(x >= 1.0) || x.fract() != 0.0 {
                    return Err(CliError::Invalid(format!(
                        "agent count {x} is not a positive integer"
                    )));
                }
                c.agents = x as usize;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

/// Results of every strategy over every trial at one grid point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub x: f64,
    /// `results[t][s]`: trial `t`, strategy `s`.
    pub results: Vec<Vec<StrategyResult>>,
}

impl SweepPoint {
    pub fn objective(&self, strategy: &str) -> Vec<f64> {
        self.results
            .iter()
            .flat_map(|trial| trial.iter().filter(|r| r.strategy == strategy))
            .map(|r| r.assignment.j)
            .collect()
    }
}

pub fn run_sweep(
    k: &WorkloadConstants,
    axis: ScenarioAxis,
    sweep: &Sweep,
    seed: u64,
) -> CliResult<Vec<SweepPoint>> {
    if sweep.grid.is_empty() || sweep.trials == 0 {
        return Err(CliError::Invalid(
            "sweep needs a non-empty grid and at least one trial".into(),
        ));
    }
    let registry = Registry::standard();
    for name in &sweep.strategies {
        registry.get(name)?;
    }
    let configs: Vec<SingleRoundConfig> = sweep
        .grid
        .iter()
        .map(|&x| axis.apply(&sweep.scenario, x))
        .collect::<CliResult<_>>()?;
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|g| (0..sweep.trials as u64).map(move |t| (g, t)))
        .collect();
    let solved: Vec<Vec<StrategyResult>> = jobs
        .par_iter()
        .map(|&(g, t)| {
            let inst = sample_single_round(k, &configs[g], seed.wrapping_add(t))?.instance;
            solve_all(&registry, &sweep.strategies, &inst, sweep.delta)
        })
        .collect::<CliResult<_>>()?;
    let mut solved = solved.into_iter();
    Ok(sweep
        .grid
        .iter()
        .map(|&x| SweepPoint {
            x,
            results: solved.by_ref().take(sweep.trials).collect(),
        })
        .collect())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCsvRow {
    pub axis_name: &'static str,
    pub axis_value: f64,
    pub strategy: String,
    pub j_median_s: f64,
    pub j_mean_s: f64,
    pub trials: usize,
}

pub fn sweep_rows(axis: ScenarioAxis, sweep: &Sweep, points: &[SweepPoint]) -> Vec<SweepCsvRow> {
    points
        .iter()
        .flat_map(|p| {
            sweep.strategies.iter().map(move |s| {
                let j = p.objective(s);
                SweepCsvRow {
                    axis_name: axis.name(),
                    axis_value: p.x,
                    strategy: s.clone(),
                    j_median_s: median(&j),
                    j_mean_s: mean(&j),
                    trials: j.len(),
                }
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiTraceRow {
    pub round: u32,
    pub agent_id: usize,
    pub active: bool,
    pub mode: &'static str,
    pub rho: f64,
    pub prefill_s: f64,
    pub decode_s: f64,
    pub comm_s: f64,
    pub theta: f64,
    pub xi: f64,
}

/// Agent 0 is the EA; AAs are numbered from 1.
pub fn multiround_rows(trace: &[RoundTrace]) -> Vec<MultiTraceRow> {
    let mut rows = Vec::new();
    for t in trace {
        let ea = t.ea;
        rows.push(MultiTraceRow {
            round: t.round,
            agent_id: 0,
            active: ea.is_some(),
            mode: ea.map_or("", |e| e.mode.as_str()),
            rho: if ea.is_some() { 1.0 } else { 0.0 },
            prefill_s: ea.map_or(0.0, |e| e.prefill),
            decode_s: ea.map_or(0.0, |e| e.decode),
            comm_s: ea.map_or(0.0, |e| e.comm),
            theta: ea.map_or(0.0, |e| e.theta),
            xi: ea.map_or(0.0, |e| e.xi),
        });
        for (i, a) in t.agents.iter().enumerate() {
            rows.push(MultiTraceRow {
                round: t.round,
                agent_id: i + 1,
                active: a.active,
                mode: a.mode.map_or("", Mode::as_str),
                rho: a.rho,
                prefill_s: a.prefill,
                decode_s: a.decode,
                comm_s: a.comm,
                theta: a.theta,
                xi: a.xi,
            });
        }
    }
    rows
}

#[derive(Debug, Clone, Serialize)]
pub struct EaBreakdownRow {
    pub policy: &'static str,
    pub round: u32,
    pub theta0: f64,
    pub prefill_s: f64,
    pub decode_s: f64,
    pub total_s: f64,
}

pub fn ea_breakdown(policy: Policy, trace: &[RoundTrace]) -> Vec<EaBreakdownRow> {
    trace
        .iter()
        .filter_map(|t| {
            t.ea.map(|e| EaBreakdownRow {
                policy: policy.as_str(),
                round: t.round,
                theta0: e.theta,
                prefill_s: e.prefill,
                decode_s: e.decode,
                total_s: e.prefill + e.decode,
            })
        })
        .collect()
}

pub fn run_policies(
    k: &WorkloadConstants,
    m: &Multiround,
    seed: u64,
) -> CliResult<Vec<(Policy, Vec<RoundTrace>)>> {
    let registry = Registry::standard();
    m.policies
        .par_iter()
        .map(|&p| {
            let strategy = registry.get(p.strategy_name())?;
            Ok((
                p,
                run_multi_round(k, &m.scenario, m.rounds, seed, strategy)?,
            ))
        })
        .collect()
}

/// Runs the configured experiment, writing into `out`.
pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> CliResult<()> {
    let k = cfg.constants()?;
    match &cfg.experiment {
        Experiment::RatioSweep(s) => {
            let rows = ratio_rows(&k, s)?;
            out.write_csv(&format!("ratio_{}", s.axis.name()), &rows, cfg)?;
        }
        Experiment::Threshold(t) => {
            let summary = threshold_summary(&k, t)?;
            out.write_json("threshold", &summary)?;
            out.write_csv("threshold_curve", &threshold_curve(&k, t)?, cfg)?;
            out.write_csv("threshold_surface", &threshold_surface(&k, t)?, cfg)?;
        }
        Experiment::SingleScenario(p) => single_scenario(&k, cfg, p, out)?,
        Experiment::BandwidthSweep(s) | Experiment::AgentSweep(s) => {
            let axis = match cfg.experiment {
                Experiment::BandwidthSweep(_) => ScenarioAxis::Bandwidth,
                _ => ScenarioAxis::Agents,
            };
            let points = run_sweep(&k, axis, s, cfg.require_seed()?)?;
            out.write_csv(
                &format!("sweep_{}", axis.name()),
                &sweep_rows(axis, s, &points),
                cfg,
            )?;
        }
        Experiment::Multiround(m) => {
            let runs = run_policies(&k, m, cfg.require_seed()?)?;
            let mut breakdown = Vec::new();
            for (policy, trace) in &runs {
                out.write_csv(
                    &format!("multiround_trace_{}", policy.as_str()),
                    &multiround_rows(trace),
                    cfg,
                )?;
                breakdown.extend(ea_breakdown(*policy, trace));
            }
            out.write_csv("ea_breakdown", &breakdown, cfg)?;
        }
    }
    Ok(())
}
