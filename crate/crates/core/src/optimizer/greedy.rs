use serde::Serialize;

use super::{calc_latency, Assignment, Evaluation, ScenarioInstance, SolveStats};
use crate::decision::Mode;
use crate::error::{Error, Result};

/// Largest agent count [`exhaustive_search`] accepts.
pub const EXHAUSTIVE_LIMIT: usize = 20;

/// Search direction of the bidirectional greedy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    /// Starts all-NL, flips agents to KV.
    #[serde(rename = "forward")]
    Forward,
    /// Starts all-KV, flips agents to NL.
    #[serde(rename = "backward")]
    Backward,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }

    fn endpoints(self) -> (Mode, Mode) {
        match self {
            Direction::Forward => (Mode::Nl, Mode::Kv),
            Direction::Backward => (Mode::Kv, Mode::Nl),
        }
    }
}

/// Objective after one accepted flip; step 0 is the starting vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStep {
    pub direction: Direction,
    pub step: usize,
    pub flipped_agent: Option<usize>,
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOutcome {
    pub x: Vec<Mode>,
    pub eval: Evaluation,
    pub trace: Vec<TraceStep>,
    pub stats: SolveStats,
}

/// Repeatedly flips the agent whose flip lowers `J` the most, stopping at the
/// first step with no strict improvement.
pub fn greedy_search(
    scenario: &ScenarioInstance,
    direction: Direction,
    delta: f64,
) -> Result<GreedyOutcome> {
    scenario.validate()?;
    let (from, to) = direction.endpoints();
    let mut stats = SolveStats::default();
    let mut x = vec![from; scenario.len()];
    let mut current = calc_latency(&x, scenario, delta)?;
    stats.record(&current.allocation, delta);
    let mut trace = vec![TraceStep {
        direction,
        step: 0,
        flipped_agent: None,
        j: current.j,
    }];
    let mut candidates: Vec<usize> = (0..scenario.len()).collect();

    while !candidates.is_empty() {
        let mut best: Option<(usize, Evaluation)> = None;
        for (pos, &agent) in candidates.iter().enumerate() {
            x[agent] = to;
            let eval = calc_latency(&x, scenario, delta)?;
            x[agent] = from;
            stats.record(&eval.allocation, delta);
            // strict comparison keeps the lowest index on ties
            if best.as_ref().is_none_or(|(_, b)| eval.j < b.j) {
                best = Some((pos, eval));
            }
        }
        let Some((pos, eval)) = best else { break };
        if !(eval.j < current.j) {
            break;
        }
        let agent = candidates.remove(pos);
        x[agent] = to;
        current = eval;
        trace.push(TraceStep {
            direction,
            step: trace.len(),
            flipped_agent: Some(agent),
            j: current.j,
        });
    }
    Ok(GreedyOutcome {
        x,
        eval: current,
        trace,
        stats,
    })
}

/// Runs both greedy directions and keeps the better end point (ties go to
/// the forward run).
pub fn jmsra(scenario: &ScenarioInstance, delta: f64) -> Result<Assignment> {
    let fwd = greedy_search(scenario, Direction::Forward, delta)?;
    let bwd = greedy_search(scenario, Direction::Backward, delta)?;
    let mut stats = fwd.stats;
    stats.merge(&bwd.stats);
    let mut trace = fwd.trace;
    trace.extend(bwd.trace);
    let best = if bwd.eval.j < fwd.eval.j {
        (bwd.x, bwd.eval)
    } else {
        (fwd.x, fwd.eval)
    };
    Ok(Assignment::from_evaluation(best.0, best.1, trace, stats))
}

/// Evaluates all `2^I` mode vectors.
pub fn exhaustive_search(scenario: &ScenarioInstance, delta: f64) -> Result<Assignment> {
    scenario.validate()?;
    let n = scenario.len();
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::TooManyAgents {
            agents: n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let mut stats = SolveStats::default();
    let mut best: Option<(Vec<Mode>, Evaluation)> = None;
    for mask in 0u32..(1u32 << n) {
        let x: Vec<Mode> = (0..n)
            .map(|i| {
                if mask >> i & 1 == 1 {
                    Mode::Kv
                } else {
                    Mode::Nl
                }
            })
            .collect();
        let eval = calc_latency(&x, scenario, delta)?;
        stats.record(&eval.allocation, delta);
        if best.as_ref().is_none_or(|(_, b)| eval.j < b.j) {
            best = Some((x, eval));
        }
    }
    let (x, eval) = best.expect("at least one agent");
    Ok(Assignment::from_evaluation(x, eval, Vec::new(), stats))
}

#[cfg(test)]
mod tests {
    use super::super::tests::toy;
    use super::super::{baseline, evaluation_bound, Split, DEFAULT_DELTA};
    use super::*;

    #[test]
    fn single_agent_matches_exhaustive() {
        for c0 in [1.0, 10.0, 100.0] {
            let s = toy(1, c0);
            let j = jmsra(&s, DEFAULT_DELTA).unwrap();
            let e = exhaustive_search(&s, DEFAULT_DELTA).unwrap();
            assert_eq!(j.x, e.x);
            assert_eq!(j.j, e.j);
        }
    }

    #[test]
    fn trace_strictly_decreases() {
        let s = toy(6, 5.0);
        for dir in [Direction::Forward, Direction::Backward] {
            let g = greedy_search(&s, dir, DEFAULT_DELTA).unwrap();
            assert!(g.trace.windows(2).all(|w| w[1].j < w[0].j));
            assert!(g.trace.len() <= s.len() + 1);
            assert_eq!(g.trace.last().unwrap().j, g.eval.j);
        }
    }

    #[test]
    fn jmsra_dominates_fixed_modes() {
        for c0 in [2.0, 10.0, 40.0] {
            let s = toy(5, c0);
            let j = jmsra(&s, DEFAULT_DELTA).unwrap();
            for m in [Mode::Nl, Mode::Kv] {
                for split in [Split::Uniform, Split::Optimized] {
                    assert!(j.j <= baseline(&s, m, split, DEFAULT_DELTA).unwrap().j);
                }
            }
            assert!(j.stats.evaluations <= evaluation_bound(5));
            assert_eq!(j.stats.bisection_overruns, 0);
            let e = exhaustive_search(&s, DEFAULT_DELTA).unwrap();
            assert!(e.j <= j.j);
        }
    }

    #[test]
    fn exhaustive_guard() {
        let s = toy(21, 10.0);
        assert!(matches!(
            exhaustive_search(&s, DEFAULT_DELTA),
            Err(Error::TooManyAgents { agents: 21, .. })
        ));
    }
}
