//! Randomized batches of quantized consensus or formation runs and their
//! per-time envelope statistics.
//!
//! Sample `i` draws everything from a ChaCha stream seeded by a hash of
//! `(master_seed, i)`, and per-sample results are stored by index before
//! any reduction, so a batch is bit-for-bit reproducible at any degree of
//! parallelism.

use std::f64::consts::TAU;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actions::ActionSet;
use crate::control::{
    consensus_bound, formation_bound, formation_error, relative_positions, FormationSpec,
    StackedVector,
};
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphKind};
use crate::sim::{self, Mode, SimConfig, SlackCheck, DEFAULT_STEP};
use crate::vecops::norm;

/// Initial draws per sample before a formation scenario gives up on
/// reaching `‖e(0)‖ < c1`.
pub const MAX_BASIN_DRAWS: usize = 1_000_000;

/// Agents start equidistant on a circle of this radius; formation targets
/// are the chords of the same polygon.
pub const CIRCLE_RADIUS: f64 = 1.0;

/// An agent's speed equals its `δ_i`; without a floor the slowest agents
/// of a uniform simplex draw need hundreds of seconds to settle.
pub const DEFAULT_DELTA_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub samples: usize,
    pub master_seed: u64,
    pub mode: Mode,
    /// Inclusive `[min, max]` agent count.
    pub agent_range: [usize; 2],
    pub delta_total: f64,
    /// Each `δ_i` is at least `delta_floor · delta_total / N`; `0` draws
    /// uniformly from the whole simplex.
    pub delta_floor: f64,
    pub perturbation: f64,
    pub step: f64,
    pub horizon: f64,
    pub record_stride: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self::for_mode(Mode::ConsensusQuantized)
    }
}

impl McConfig {
    pub fn for_mode(mode: Mode) -> Self {
        McConfig {
            samples: 1000,
            master_seed: 0,
            mode,
            agent_range: [3, 7],
            delta_total: 1.0,
            delta_floor: DEFAULT_DELTA_FLOOR,
            perturbation: 0.5,
            step: DEFAULT_STEP,
            horizon: mode.default_horizon(),
            record_stride: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidConfig(msg));
        if !self.mode.is_quantized() {
            return invalid(format!(
                "Monte Carlo batches run quantized modes, not {}",
                self.mode
            ));
        }
        if self.samples == 0 {
            return invalid("samples must be at least 1".into());
        }
        let [lo, hi] = self.agent_range;
        if lo > hi || lo < 2 || hi > 32 {
            return invalid(format!("agent range [{lo}, {hi}] must lie within [2, 32]"));
        }
        if lo < 3 && self.mode.is_formation() {
            return invalid("formation batches need at least 3 agents".into());
        }
        if !(self.delta_total > 0.0 && self.delta_total.is_finite()) {
            return invalid("delta_total must be positive".into());
        }
        if !(0.0..1.0).contains(&self.delta_floor) {
            return invalid("delta_floor must lie in [0, 1)".into());
        }
        if !(self.perturbation >= 0.0 && self.perturbation.is_finite()) {
            return invalid("perturbation must be nonnegative".into());
        }
        if !(self.step > 0.0 && self.horizon > self.step && self.horizon.is_finite()) {
            return invalid("need 0 < step < horizon".into());
        }
        if self.record_stride == 0 {
            return invalid("record_stride must be positive".into());
        }
        Ok(())
    }

    fn topology(&self, n_agents: usize) -> Result<Graph> {
        if n_agents == 2 {
            return Graph::from_edges(2, &[(1, 2)]);
        }
        let kind = if self.mode.is_formation() {
            GraphKind::TriangulatedPolygon
        } else {
            GraphKind::Ring
        };
        Graph::generate(kind, n_agents)
    }
}

/// Seed of sample `index`: SplitMix64 finalizer over both inputs.
pub fn sample_seed(master_seed: u64, index: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(master_seed ^ mix(index as u64))
}

/// A drawn scenario and how it was drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub index: usize,
    pub seed: u64,
    pub sim: SimConfig,
    /// Rejected initial draws before one landed in the formation basin.
    pub basin_retries: usize,
}

impl Scenario {
    /// Practical-stability radius of this scenario; `None` when the
    /// formation bound degenerates.
    pub fn bound(&self) -> Option<f64> {
        match &self.sim.spec {
            Some(spec) if self.sim.mode.is_formation() => {
                formation_bound(&self.sim.sets, spec).ok().map(|b| b.bound)
            }
            _ => Some(consensus_bound(&self.sim.sets)),
        }
    }
}

/// Uniform on `{δ : Σ δ_i = total, δ_i ≥ floor · total / n}`.
fn simplex_draw(rng: &mut ChaCha8Rng, n: usize, total: f64, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let sum: f64 = raw.iter().sum();
    let base = floor / n as f64;
    raw.into_iter()
        .map(|v| total * (base + (1.0 - floor) * v / sum))
        .collect()
}

fn circle_positions(rng: &mut ChaCha8Rng, n: usize, perturbation: f64) -> Vec<f64> {
    let mut x = Vec::with_capacity(2 * n);
    for i in 0..n {
        let angle = TAU * i as f64 / n as f64;
        for base in [CIRCLE_RADIUS * angle.cos(), CIRCLE_RADIUS * angle.sin()] {
            let jitter = if perturbation > 0.0 {
                rng.random_range(-perturbation..=perturbation)
            } else {
                0.0
            };
            x.push(base + jitter);
        }
    }
    x
}

/// Jittered unit-circle start; with a formation spec, redraws until
/// `‖e(0)‖ < c₁`. Returns the state and the number of rejected draws.
pub fn draw_initial_state(
    rng: &mut ChaCha8Rng,
    graph: &Graph,
    spec: Option<&FormationSpec>,
    perturbation: f64,
) -> Result<(StackedVector, usize)> {
    let n = graph.n_agents();
    let mut retries = 0;
    loop {
        let x0 = StackedVector::agents(circle_positions(rng, n, perturbation), 2)?;
        let Some(spec) = spec else {
            return Ok((x0, retries));
        };
        let c1 = spec
            .distances()
            .iter()
            .map(|d| d * d)
            .fold(f64::INFINITY, f64::min);
        let e0 = formation_error(&relative_positions(graph, &x0)?, spec)?;
        if norm(&e0) < c1 {
            return Ok((x0, retries));
        }
        retries += 1;
        if retries >= MAX_BASIN_DRAWS {
            return Err(Error::BasinNotReached { attempts: retries });
        }
    }
}

/// Draws scenario `index` of the batch.
pub fn sample_scenario(cfg: &McConfig, index: usize) -> Result<Scenario> {
    cfg.validate()?;
    let seed = sample_seed(cfg.master_seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n = rng.random_range(cfg.agent_range[0]..=cfg.agent_range[1]);
    let graph = cfg.topology(n)?;
    let thetas: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
    let deltas = simplex_draw(&mut rng, n, cfg.delta_total, cfg.delta_floor);
    let sets = deltas
        .iter()
        .zip(&thetas)
        .map(|(&r, &theta)| ActionSet::triangle(r, theta))
        .collect::<Result<Vec<_>>>()?;

    let spec = if cfg.mode.is_formation() {
        Some(FormationSpec::regular_polygon(&graph, CIRCLE_RADIUS)?)
    } else {
        None
    };

    let (x0, basin_retries) =
        draw_initial_state(&mut rng, &graph, spec.as_ref(), cfg.perturbation)?;

    Ok(Scenario {
        index,
        seed,
        sim: SimConfig {
            graph,
            sets,
            mode: cfg.mode,
            spec,
            x0,
            step: cfg.step,
            horizon: cfg.horizon,
            record_stride: cfg.record_stride,
        },
        basin_retries,
    })
}

/// Per-sample summary kept after the trajectory is dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub seed: u64,
    pub n_agents: usize,
    pub bound: Option<f64>,
    pub steady_state_error: f64,
    pub terminated_stationary: bool,
    pub basin_retries: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slack: Option<SlackCheck>,
}

impl SampleRecord {
    /// `None` when the sample has no finite bound.
    pub fn within_bound(&self) -> Option<bool> {
        self.bound.map(|b| self.steady_state_error < b)
    }
}

/// Order statistics of one set of values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub lower95: f64,
    pub upper95: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl Spread {
    /// Nearest-rank 2.5th/97.5th percentiles, extremes and mean.
    pub fn of(values: &[f64]) -> Spread {
        assert!(!values.is_empty(), "spread of an empty sample");
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let rank = |per_mille: usize| (n * per_mille).div_ceil(1000).clamp(1, n) - 1;
        let (min, max) = (sorted[0], sorted[n - 1]);
        let mean = values.iter().sum::<f64>() / n as f64;
        Spread {
            lower95: sorted[rank(25)],
            upper95: sorted[rank(975)],
            min,
            max,
            // rounding guard: the exact mean lies in [min, max]
            mean: mean.clamp(min, max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub config: McConfig,
    pub times: Vec<f64>,
    pub lower95: Vec<f64>,
    pub upper95: Vec<f64>,
    pub minimum: Vec<f64>,
    pub maximum: Vec<f64>,
    pub mean: Vec<f64>,
    /// Bound shared by every sample, if they all agree.
    pub bound: Option<f64>,
    pub bound_min: Option<f64>,
    pub bound_max: Option<f64>,
    /// Samples whose formation bound degenerates (`c2 = 0`).
    pub degenerate_samples: usize,
    /// Share of samples with a finite bound whose steady-state error is
    /// strictly below it.
    pub fraction_within_bound: f64,
    pub steady_state: Spread,
    pub stationary_samples: usize,
    pub basin_retries: usize,
    pub slack_violations: usize,
    pub slack_steps: usize,
    pub samples: Vec<SampleRecord>,
}

impl McSummary {
    /// Writes `t,lower95,upper95,min,max,mean`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,lower95,upper95,min,max,mean")?;
        for r in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.times[r],
                self.lower95[r],
                self.upper95[r],
                self.minimum[r],
                self.maximum[r],
                self.mean[r]
            )?;
        }
        Ok(())
    }
}

fn run_sample(cfg: &McConfig, index: usize) -> Result<(SampleRecord, Vec<f64>)> {
    let wrap = |source: Error| Error::SampleFailed {
        index,
        seed: sample_seed(cfg.master_seed, index),
        source: Box::new(source),
    };
    let scenario = sample_scenario(cfg, index).map_err(wrap)?;
    let traj = sim::run(&scenario.sim).map_err(wrap)?;
    let record = SampleRecord {
        index,
        seed: scenario.seed,
        n_agents: scenario.sim.graph.n_agents(),
        bound: scenario.bound(),
        steady_state_error: traj.steady_state_error,
        terminated_stationary: traj.terminated_stationary,
        basin_retries: scenario.basin_retries,
        slack: traj.slack,
    };
    Ok((record, traj.tracked_on_grid()))
}

/// Runs the batch on rayon's current pool.
pub fn run_batch(cfg: &McConfig) -> Result<McSummary> {
    cfg.validate()?;
    let results: Vec<Result<(SampleRecord, Vec<f64>)>> = (0..cfg.samples)
        .into_par_iter()
        .map(|index| run_sample(cfg, index))
        .collect();
    summarize(cfg, results)
}

/// Runs the batch on a dedicated pool of `threads` workers (`0` picks the
/// rayon default).
pub fn run_batch_with_threads(cfg: &McConfig, threads: usize) -> Result<McSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| run_batch(cfg))
}

fn summarize(cfg: &McConfig, results: Vec<Result<(SampleRecord, Vec<f64>)>>) -> Result<McSummary> {
    let mut records = Vec::with_capacity(results.len());
    let mut series = Vec::with_capacity(results.len());
    for result in results {
        let (record, values) = result?;
        records.push(record);
        series.push(values);
    }

    let grid = SimConfig::grid_steps_for(cfg.step, cfg.horizon, cfg.record_stride);
    let times: Vec<f64> = grid.iter().map(|&k| k as f64 * cfg.step).collect();
    let mut bands = Vec::with_capacity(times.len());
    let mut column = vec![0.0; series.len()];
    for t in 0..times.len() {
        for (slot, values) in column.iter_mut().zip(&series) {
            *slot = values[t];
        }
        bands.push(Spread::of(&column));
    }

    let bounds: Vec<f64> = records.iter().filter_map(|r| r.bound).collect();
    let bound_min = bounds.iter().copied().reduce(f64::min);
    let bound_max = bounds.iter().copied().reduce(f64::max);
    let bound = match (bound_min, bound_max) {
        (Some(lo), Some(hi)) if hi - lo <= 1e-12 * hi && bounds.len() == records.len() => Some(hi),
        _ => None,
    };
    let judged: Vec<bool> = records
        .iter()
        .filter_map(SampleRecord::within_bound)
        .collect();
    let fraction_within_bound = if judged.is_empty() {
        0.0
    } else {
        judged.iter().filter(|&&ok| ok).count() as f64 / judged.len() as f64
    };
    let steady: Vec<f64> = records.iter().map(|r| r.steady_state_error).collect();

    Ok(McSummary {
        config: cfg.clone(),
        lower95: bands.iter().map(|b| b.lower95).collect(),
        upper95: bands.iter().map(|b| b.upper95).collect(),
        minimum: bands.iter().map(|b| b.min).collect(),
        maximum: bands.iter().map(|b| b.max).collect(),
        mean: bands.iter().map(|b| b.mean).collect(),
        times,
        bound,
        bound_min,
        bound_max,
        degenerate_samples: records.len() - bounds.len(),
        fraction_within_bound,
        steady_state: Spread::of(&steady),
        stationary_samples: records.iter().filter(|r| r.terminated_stationary).count(),
        basin_retries: records.iter().map(|r| r.basin_retries).sum(),
        slack_violations: records
            .iter()
            .filter_map(|r| r.slack)
            .map(|s| s.violations)
            .sum(),
        slack_steps: records
            .iter()
            .filter_map(|r| r.slack)
            .map(|s| s.steps)
            .sum(),
        samples: records,
    })
}
