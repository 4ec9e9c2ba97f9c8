//! Fixed-step integration of the single-integrator closed loops
//! `ẋ = u(x)`.
//!
//! The quantized right-hand sides are piecewise constant and discontinuous
//! across Voronoi boundaries. They are integrated with explicit Euler; a
//! step at which every agent selects its zero action leaves the state, and
//! hence every later control, unchanged, so the run stops there and is
//! flagged stationary.

use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::actions::ActionSet;
use crate::control::{
    formation_error_slice, formation_field_into, neg_incidence_apply, quantize_into,
    relative_positions_into, validate_sets, FormationSpec, Layout, StackedVector,
};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::vecops::{norm, sq_norm};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_CONSENSUS_HORIZON: f64 = 20.0;
pub const DEFAULT_FORMATION_HORIZON: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ConsensusQuantized,
    ConsensusContinuous,
    FormationQuantized,
    FormationContinuous,
}

impl Mode {
    pub fn is_quantized(self) -> bool {
        matches!(self, Mode::ConsensusQuantized | Mode::FormationQuantized)
    }

    pub fn is_formation(self) -> bool {
        matches!(self, Mode::FormationQuantized | Mode::FormationContinuous)
    }

    pub fn default_horizon(self) -> f64 {
        if self.is_formation() {
            DEFAULT_FORMATION_HORIZON
        } else {
            DEFAULT_CONSENSUS_HORIZON
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::ConsensusQuantized => "consensus_quantized",
            Mode::ConsensusContinuous => "consensus_continuous",
            Mode::FormationQuantized => "formation_quantized",
            Mode::FormationContinuous => "formation_continuous",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub graph: Graph,
    /// One per agent; may be empty in continuous modes.
    pub sets: Vec<ActionSet>,
    pub mode: Mode,
    pub spec: Option<FormationSpec>,
    pub x0: StackedVector,
    pub step: f64,
    pub horizon: f64,
    pub record_stride: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.step > 0.0 && self.step.is_finite()) {
            return invalid("step must be positive");
        }
        if !(self.horizon > self.step && self.horizon.is_finite()) {
            return invalid("horizon must exceed the step");
        }
        if self.record_stride == 0 {
            return invalid("record_stride must be positive");
        }
        if self.x0.layout() != Layout::AgentMajor || self.x0.n_blocks() != self.graph.n_agents() {
            return Err(Error::DimensionMismatch {
                expected: self.graph.n_agents() * self.x0.dim(),
                found: self.x0.as_slice().len(),
            });
        }
        if self.x0.as_slice().iter().any(|v| !v.is_finite()) {
            return invalid("initial state is not finite");
        }
        if self.mode.is_quantized() || !self.sets.is_empty() {
            validate_sets(&self.sets, self.graph.n_agents(), self.x0.dim())?;
        }
        if self.mode.is_formation() {
            match &self.spec {
                None => return invalid("formation modes need desired distances"),
                Some(spec) if spec.len() != self.graph.n_edges() => {
                    return Err(Error::DimensionMismatch {
                        expected: self.graph.n_edges(),
                        found: spec.len(),
                    })
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Number of Euler steps covering the horizon.
    pub fn total_steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    /// Step indices a full-length run records: multiples of the stride plus
    /// the final step.
    pub fn grid_steps(&self) -> Vec<usize> {
        Self::grid_steps_for(self.step, self.horizon, self.record_stride)
    }

    pub fn grid_steps_for(step: f64, horizon: f64, record_stride: usize) -> Vec<usize> {
        let total = (horizon / step).round() as usize;
        let mut steps: Vec<usize> = (0..=total).step_by(record_stride).collect();
        if steps.last() != Some(&total) {
            steps.push(total);
        }
        steps
    }
}

/// Result of the per-step check `V(k+1) − V(k) ≤ (h²/2)·‖Bᵀ‖²·Σ‖u_i(k)‖²`
/// on consensus runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SlackCheck {
    pub steps: usize,
    pub violations: usize,
    /// Largest `ΔV / allowance` seen on a step with nonzero control.
    pub worst_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub mode: Mode,
    pub times: Vec<f64>,
    /// Euler step index of each record.
    pub steps: Vec<usize>,
    pub states: Vec<StackedVector>,
    pub controls: Vec<StackedVector>,
    pub z_norms: Vec<f64>,
    pub e_norms: Option<Vec<f64>>,
    /// `½‖z‖²` in consensus modes, `¼‖e‖²` in formation modes.
    pub lyapunov: Vec<f64>,
    pub terminated_stationary: bool,
    pub steady_state_error: f64,
    /// Present for consensus modes.
    pub slack: Option<SlackCheck>,
    grid: Vec<usize>,
}

impl Trajectory {
    /// `‖z‖` in consensus modes, `‖e‖` in formation modes.
    pub fn tracked(&self) -> &[f64] {
        self.e_norms.as_deref().unwrap_or(&self.z_norms)
    }

    /// The tracked norm sampled on the full-horizon recording grid, holding
    /// the final value past an early stop.
    pub fn tracked_on_grid(&self) -> Vec<f64> {
        let tracked = self.tracked();
        let last = *tracked.last().expect("trajectory has at least one record");
        let mut out = Vec::with_capacity(self.grid.len());
        let mut cursor = 0;
        for &g in &self.grid {
            while cursor < self.steps.len() && self.steps[cursor] < g {
                cursor += 1;
            }
            match self.steps.get(cursor) {
                Some(&s) if s == g => out.push(tracked[cursor]),
                _ => out.push(last),
            }
        }
        out
    }

    pub fn grid_steps(&self) -> &[usize] {
        &self.grid
    }

    /// Writes `t,x_1_1..x_N_m,u_1_1..u_N_m,z_norm,e_norm,lyapunov`, one row
    /// per record. `e_norm` is empty in consensus modes.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let (agents, dim) = self
            .states
            .first()
            .map_or((0, 0), |x| (x.n_blocks(), x.dim()));
        let mut header = vec!["t".to_string()];
        for prefix in ["x", "u"] {
            for i in 1..=agents {
                for c in 1..=dim {
                    header.push(format!("{prefix}_{i}_{c}"));
                }
            }
        }
        header.extend(["z_norm", "e_norm", "lyapunov"].map(String::from));
        writeln!(w, "{}", header.join(","))?;

        for r in 0..self.times.len() {
            let mut row = Vec::with_capacity(header.len());
            row.push(self.times[r].to_string());
            row.extend(self.states[r].as_slice().iter().map(f64::to_string));
            row.extend(self.controls[r].as_slice().iter().map(f64::to_string));
            row.push(self.z_norms[r].to_string());
            row.push(
                self.e_norms
                    .as_ref()
                    .map_or(String::new(), |e| e[r].to_string()),
            );
            row.push(self.lyapunov[r].to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Scratch buffers for one closed-loop evaluation.
struct Loop<'a> {
    cfg: &'a SimConfig,
    dim: usize,
    z: Vec<f64>,
    e: Vec<f64>,
    field: Vec<f64>,
    u: Vec<f64>,
}

impl<'a> Loop<'a> {
    fn new(cfg: &'a SimConfig) -> Self {
        let dim = cfg.x0.dim();
        let (n, m) = (cfg.graph.n_agents(), cfg.graph.n_edges());
        Loop {
            cfg,
            dim,
            z: vec![0.0; m * dim],
            e: Vec::new(),
            field: vec![0.0; n * dim],
            u: vec![0.0; n * dim],
        }
    }

    /// Fills `z`, `e`, `field` and `u` at state `x`; returns whether any
    /// control is nonzero.
    fn evaluate(&mut self, x: &[f64]) -> bool {
        let g = &self.cfg.graph;
        relative_positions_into(g, x, self.dim, &mut self.z);
        match &self.cfg.spec {
            Some(spec) if self.cfg.mode.is_formation() => {
                self.e = formation_error_slice(&self.z, self.dim, spec.distances());
                formation_field_into(g, &self.z, &self.e, self.dim, &mut self.field);
            }
            _ => neg_incidence_apply(g, &self.z, self.dim, &mut self.field),
        }
        if self.cfg.mode.is_quantized() {
            quantize_into(&self.field, &self.cfg.sets, self.dim, &mut self.u)
        } else {
            self.u.copy_from_slice(&self.field);
            self.u.iter().any(|&v| v != 0.0)
        }
    }

    fn lyapunov(&self) -> f64 {
        if self.cfg.mode.is_formation() {
            0.25 * sq_norm(&self.e)
        } else {
            0.5 * sq_norm(&self.z)
        }
    }
}

/// One explicit Euler step: the mode's control `u` at `x` and
/// `x + h·u`.
pub fn step_once(cfg: &SimConfig, x: &StackedVector) -> Result<(StackedVector, StackedVector)> {
    cfg.validate()?;
    if x.layout() != Layout::AgentMajor
        || x.n_blocks() != cfg.graph.n_agents()
        || x.dim() != cfg.x0.dim()
    {
        return Err(Error::DimensionMismatch {
            expected: cfg.graph.n_agents() * cfg.x0.dim(),
            found: x.as_slice().len(),
        });
    }
    let mut lp = Loop::new(cfg);
    lp.evaluate(x.as_slice());
    let next: Vec<f64> = x
        .as_slice()
        .iter()
        .zip(&lp.u)
        .map(|(xi, ui)| xi + cfg.step * ui)
        .collect();
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalDivergence { step: 0 });
    }
    Ok((
        StackedVector::agents(next, x.dim())?,
        StackedVector::agents(lp.u, x.dim())?,
    ))
}

/// Integrates the closed loop over the horizon, or until a quantized run
/// becomes stationary.
pub fn run(cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let dim = cfg.x0.dim();
    let total = cfg.total_steps();
    let h = cfg.step;
    let formation = cfg.mode.is_formation();
    // ‖Bᵀ‖² for the Euler remainder of V
    let slack_gain = (!formation).then(|| 0.5 * h * h * cfg.graph.spectral_radius());

    let mut traj = Trajectory {
        mode: cfg.mode,
        times: Vec::new(),
        steps: Vec::new(),
        states: Vec::new(),
        controls: Vec::new(),
        z_norms: Vec::new(),
        e_norms: formation.then(Vec::new),
        lyapunov: Vec::new(),
        terminated_stationary: false,
        steady_state_error: 0.0,
        slack: slack_gain.map(|_| SlackCheck::default()),
        grid: cfg.grid_steps(),
    };

    let mut lp = Loop::new(cfg);
    let mut x = cfg.x0.as_slice().to_vec();
    let mut previous: Option<(f64, f64)> = None;
    for k in 0..=total {
        let moving = lp.evaluate(&x);
        let v = lp.lyapunov();

        if let (Some(gain), Some((v_prev, u_sq_prev)), Some(check)) =
            (slack_gain, previous, traj.slack.as_mut())
        {
            let allowance = gain * u_sq_prev;
            let increase = v - v_prev;
            check.steps += 1;
            if increase > allowance {
                check.violations += 1;
            }
            if allowance > 0.0 {
                let ratio = increase / allowance;
                check.worst_ratio = Some(check.worst_ratio.map_or(ratio, |w| w.max(ratio)));
            }
        }

        let stationary = cfg.mode.is_quantized() && !moving;
        if k % cfg.record_stride == 0 || k == total || stationary {
            traj.times.push(k as f64 * h);
            traj.steps.push(k);
            traj.states.push(StackedVector::agents(x.clone(), dim)?);
            traj.controls
                .push(StackedVector::agents(lp.u.clone(), dim)?);
            traj.z_norms.push(norm(&lp.z));
            if let Some(e_norms) = traj.e_norms.as_mut() {
                e_norms.push(norm(&lp.e));
            }
            traj.lyapunov.push(v);
        }
        if stationary {
            traj.terminated_stationary = true;
            break;
        }
        if k == total {
            break;
        }

        for (xi, ui) in x.iter_mut().zip(&lp.u) {
            *xi += h * ui;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDivergence { step: k });
        }
        previous = Some((v, sq_norm(&lp.u)));
    }

    traj.steady_state_error = tail_mean(&traj.tracked_on_grid());
    Ok(traj)
}

/// Mean over the final tenth (at least one sample).
pub fn tail_mean(series: &[f64]) -> f64 {
    let count = series.len().div_ceil(10).max(1);
    let tail = &series[series.len() - count..];
    tail.iter().sum::<f64>() / count as f64
}
