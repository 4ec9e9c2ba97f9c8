//! Config file schema, flag overlay and resolution into core configs.
//!
//! Every key is optional. A flag replaces the file key of the same name and
//! any file key it would contradict (`--agents`/`--topology` drop a file
//! `graph`, `--delta-total` drops file `sets`). Keys that do not apply to
//! the chosen subcommand are rejected rather than ignored.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use qmas_core::{
    consensus_bound, draw_initial_state, formation_bound, ActionSet, FormationBound, FormationSpec,
    Graph, GraphKind, McConfig, Mode, SimConfig, StackedVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_AGENTS: usize = 4;
pub const DEFAULT_PERTURBATION: f64 = 0.5;
pub const DEFAULT_FORMATION_RADIUS: f64 = 1.0;
pub const DEFAULT_RUN_STRIDE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Consensus,
    Formation,
    Montecarlo,
    Bound,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Consensus => "consensus",
            Command::Formation => "formation",
            Command::Montecarlo => "montecarlo",
            Command::Bound => "bound",
        }
    }

    fn accepts(self, key: &str) -> bool {
        const SINGLE: &[&str] = &[
            "mode",
            "seed",
            "agents",
            "topology",
            "graph",
            "sets",
            "delta_total",
            "perturbation",
            "x0",
            "step",
            "horizon",
            "record_stride",
        ];
        const SHAPE: &[&str] = &["distances", "formation_radius"];
        const BATCH: &[&str] = &[
            "mode",
            "samples",
            "seed",
            "agents",
            "agent_range",
            "delta_total",
            "delta_floor",
            "perturbation",
            "step",
            "horizon",
            "record_stride",
        ];
        const BOUND: &[&str] = &[
            "seed",
            "agents",
            "topology",
            "graph",
            "sets",
            "delta_total",
            "distances",
            "formation_radius",
        ];
        match self {
            Command::Consensus => SINGLE.contains(&key),
            Command::Formation => SINGLE.contains(&key) || SHAPE.contains(&key),
            Command::Montecarlo => BATCH.contains(&key),
            Command::Bound => BOUND.contains(&key),
        }
    }
}

/// On-disk config. Field names double as the flag names (`_` ↔ `-`).
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Option<String>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub agents: Option<usize>,
    pub agent_range: Option<[usize; 2]>,
    pub topology: Option<GraphKind>,
    pub graph: Option<Graph>,
    pub sets: Option<Vec<ActionSet>>,
    pub delta_total: Option<f64>,
    pub delta_floor: Option<f64>,
    pub distances: Option<FormationSpec>,
    pub formation_radius: Option<f64>,
    pub perturbation: Option<f64>,
    pub x0: Option<Vec<Vec<f64>>>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub record_stride: Option<usize>,
}

/// Values given on the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub mode: Option<String>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub agents: Option<AgentCount>,
    pub topology: Option<GraphKind>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub delta_total: Option<f64>,
    pub perturbation: Option<f64>,
}

/// `--agents N` or `--agents LO-HI` (batches only).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentCount {
    Exactly(usize),
    Range(usize, usize),
}

impl std::str::FromStr for AgentCount {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("expected N or LO-HI, got `{s}`"))
        };
        match s.split_once('-') {
            Some((lo, hi)) => Ok(AgentCount::Range(parse(lo)?, parse(hi)?)),
            None => Ok(AgentCount::Exactly(parse(s)?)),
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Invalid(format!("config {}: {e}", path.display())))
    }

    fn present_keys(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        let mut note = |present: bool, key| {
            if present {
                keys.push(key)
            }
        };
        note(self.mode.is_some(), "mode");
        note(self.samples.is_some(), "samples");
        note(self.seed.is_some(), "seed");
        note(self.agents.is_some(), "agents");
        note(self.agent_range.is_some(), "agent_range");
        note(self.topology.is_some(), "topology");
        note(self.graph.is_some(), "graph");
        note(self.sets.is_some(), "sets");
        note(self.delta_total.is_some(), "delta_total");
        note(self.delta_floor.is_some(), "delta_floor");
        note(self.distances.is_some(), "distances");
        note(self.formation_radius.is_some(), "formation_radius");
        note(self.perturbation.is_some(), "perturbation");
        note(self.x0.is_some(), "x0");
        note(self.step.is_some(), "step");
        note(self.horizon.is_some(), "horizon");
        note(self.record_stride.is_some(), "record_stride");
        keys
    }

    /// Applies `flags` on top of the file values for `cmd`.
    pub fn overlay(mut self, flags: &Overrides, cmd: Command) -> Result<Self, CliError> {
        for key in self.present_keys() {
            if !cmd.accepts(key) {
                return Err(CliError::Invalid(format!(
                    "config key `{key}` does not apply to `{}`",
                    cmd.name()
                )));
            }
        }
        let flag_keys = [
            (flags.mode.is_some(), "mode"),
            (flags.samples.is_some(), "samples"),
            (flags.seed.is_some(), "seed"),
            (flags.agents.is_some(), "agents"),
            (flags.topology.is_some(), "topology"),
            (flags.step.is_some(), "step"),
            (flags.horizon.is_some(), "horizon"),
            (flags.delta_total.is_some(), "delta_total"),
            (flags.perturbation.is_some(), "perturbation"),
        ];
        for (present, key) in flag_keys {
            if present && !cmd.accepts(key) {
                return Err(CliError::Invalid(format!(
                    "--{} does not apply to `{}`",
                    key.replace('_', "-"),
                    cmd.name()
                )));
            }
        }

        if flags.mode.is_some() {
            self.mode.clone_from(&flags.mode);
        }
        self.samples = flags.samples.or(self.samples);
        self.seed = flags.seed.or(self.seed);
        match flags.agents {
            Some(AgentCount::Exactly(n)) => {
                self.agents = Some(n);
                self.agent_range = None;
                self.graph = None;
            }
            Some(AgentCount::Range(lo, hi)) => {
                if cmd != Command::Montecarlo {
                    return Err(CliError::Invalid(
                        "an agent range applies to `montecarlo` only".into(),
                    ));
                }
                self.agents = None;
                self.agent_range = Some([lo, hi]);
            }
            None => {}
        }
        if flags.topology.is_some() {
            self.topology = flags.topology;
            self.graph = None;
        }
        self.step = flags.step.or(self.step);
        self.horizon = flags.horizon.or(self.horizon);
        if flags.delta_total.is_some() {
            self.delta_total = flags.delta_total;
            self.sets = None;
        }
        self.perturbation = flags.perturbation.or(self.perturbation);
        Ok(self)
    }
}

fn single_mode(family: Command, mode: Option<&str>) -> Result<Mode, CliError> {
    let formation = family == Command::Formation;
    let mode = match (mode.unwrap_or("quantized"), formation) {
        ("quantized" | "consensus_quantized", false) => Mode::ConsensusQuantized,
        ("continuous" | "consensus_continuous", false) => Mode::ConsensusContinuous,
        ("quantized" | "formation_quantized", true) => Mode::FormationQuantized,
        ("continuous" | "formation_continuous", true) => Mode::FormationContinuous,
        (other, _) => {
            return Err(CliError::Invalid(format!(
                "unknown mode `{other}` for `{}` (expected quantized or continuous)",
                family.name()
            )))
        }
    };
    Ok(mode)
}

fn batch_mode(mode: Option<&str>) -> Result<Mode, CliError> {
    match mode.unwrap_or("consensus") {
        "consensus" | "consensus_quantized" => Ok(Mode::ConsensusQuantized),
        "formation" | "formation_quantized" => Ok(Mode::FormationQuantized),
        other => Err(CliError::Invalid(format!(
            "unknown mode `{other}` for `montecarlo` (expected consensus or formation)"
        ))),
    }
}

/// Graph and per-agent inputs shared by single runs and `bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Setup {
    pub seed: u64,
    /// Generator used for the graph; absent when the graph was given.
    pub topology: Option<GraphKind>,
    /// Scale of the generated triangle sets; absent when sets were given.
    pub triangle_scale: Option<f64>,
    pub formation_radius: Option<f64>,
    pub graph: Graph,
    pub sets: Vec<ActionSet>,
    pub spec: Option<FormationSpec>,
}

impl Setup {
    fn resolve(
        cfg: &FileConfig,
        rng: &mut ChaCha8Rng,
        formation: bool,
        n_hint: Option<usize>,
    ) -> Result<Self, CliError> {
        let seed = cfg.seed.unwrap_or(0);
        let (graph, topology) = match (&cfg.graph, cfg.topology) {
            (Some(_), Some(_)) => {
                return Err(CliError::Invalid(
                    "config gives both `graph` and `topology`".into(),
                ))
            }
            (Some(g), None) => {
                if let Some(n) = cfg.agents.filter(|&n| n != g.n_agents()) {
                    return Err(CliError::Invalid(format!(
                        "`agents` = {n} but the graph has {} agents",
                        g.n_agents()
                    )));
                }
                (g.clone(), None)
            }
            (None, kind) => {
                let n = cfg.agents.or(n_hint).unwrap_or(DEFAULT_AGENTS);
                let kind = kind.unwrap_or(if formation {
                    GraphKind::TriangulatedPolygon
                } else {
                    GraphKind::Ring
                });
                let graph = if n == 2 {
                    Graph::from_edges(2, &[(1, 2)])?
                } else {
                    Graph::generate(kind, n)?
                };
                (graph, Some(kind))
            }
        };
        let n = graph.n_agents();

        // the angles are drawn even for given sets so the later draws
        // do not depend on how the sets were specified
        let thetas: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
        let (sets, triangle_scale) = match (&cfg.sets, cfg.delta_total) {
            (Some(_), Some(_)) => {
                return Err(CliError::Invalid(
                    "config gives both `sets` and `delta_total`".into(),
                ))
            }
            (Some(sets), None) if sets.len() == 1 => (vec![sets[0].clone(); n], None),
            (Some(sets), None) => (sets.clone(), None),
            (None, total) => {
                let scale = total.map_or(1.0, |t| t / n as f64);
                let sets = thetas
                    .iter()
                    .map(|&theta| ActionSet::triangle(scale, theta))
                    .collect::<qmas_core::Result<Vec<_>>>()?;
                (sets, Some(scale))
            }
        };

        let (spec, formation_radius) = match (&cfg.distances, cfg.formation_radius) {
            (Some(_), Some(_)) => {
                return Err(CliError::Invalid(
                    "config gives both `distances` and `formation_radius`".into(),
                ))
            }
            _ if !formation => (None, None),
            (Some(spec), None) => (Some(spec.clone()), None),
            (None, radius) => {
                let radius = radius.unwrap_or(DEFAULT_FORMATION_RADIUS);
                (
                    Some(FormationSpec::regular_polygon(&graph, radius)?),
                    Some(radius),
                )
            }
        };

        Ok(Setup {
            seed,
            topology,
            triangle_scale,
            formation_radius,
            graph,
            sets,
            spec,
        })
    }
}

/// Fully resolved single run, echoed into `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedRun {
    pub seed: u64,
    pub topology: Option<GraphKind>,
    pub triangle_scale: Option<f64>,
    pub formation_radius: Option<f64>,
    /// Jitter of the drawn initial state; absent when `x0` was given.
    pub perturbation: Option<f64>,
    /// Initial draws rejected for lying outside the formation basin.
    pub basin_retries: usize,
    pub sim: SimConfig,
}

pub fn resolve_run(cfg: &FileConfig, family: Command) -> Result<ResolvedRun, CliError> {
    let mode = single_mode(family, cfg.mode.as_deref())?;
    let seed = cfg.seed.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_hint = cfg.x0.as_ref().map(Vec::len);
    let setup = Setup::resolve(cfg, &mut rng, mode.is_formation(), n_hint)?;

    let (x0, perturbation, basin_retries) = match &cfg.x0 {
        Some(rows) => {
            if cfg.perturbation.is_some() {
                return Err(CliError::Invalid(
                    "config gives both `x0` and `perturbation`".into(),
                ));
            }
            (StackedVector::from_blocks(rows)?, None, 0)
        }
        None => {
            let rho = cfg.perturbation.unwrap_or(DEFAULT_PERTURBATION);
            if !(rho >= 0.0 && rho.is_finite()) {
                return Err(CliError::Invalid("perturbation must be nonnegative".into()));
            }
            let (x0, retries) =
                draw_initial_state(&mut rng, &setup.graph, setup.spec.as_ref(), rho)?;
            (x0, Some(rho), retries)
        }
    };

    let sim = SimConfig {
        graph: setup.graph,
        sets: setup.sets,
        mode,
        spec: setup.spec,
        x0,
        step: cfg.step.unwrap_or(qmas_core::sim::DEFAULT_STEP),
        horizon: cfg.horizon.unwrap_or(mode.default_horizon()),
        record_stride: cfg.record_stride.unwrap_or(DEFAULT_RUN_STRIDE),
    };
    sim.validate()?;
    Ok(ResolvedRun {
        seed,
        topology: setup.topology,
        triangle_scale: setup.triangle_scale,
        formation_radius: setup.formation_radius,
        perturbation,
        basin_retries,
        sim,
    })
}

pub fn resolve_batch(cfg: &FileConfig) -> Result<McConfig, CliError> {
    let mode = batch_mode(cfg.mode.as_deref())?;
    let defaults = McConfig::for_mode(mode);
    if cfg.agents.is_some() && cfg.agent_range.is_some() {
        return Err(CliError::Invalid(
            "config gives both `agents` and `agent_range`".into(),
        ));
    }
    let mc = McConfig {
        samples: cfg.samples.unwrap_or(defaults.samples),
        master_seed: cfg.seed.unwrap_or(defaults.master_seed),
        mode,
        agent_range: cfg
            .agents
            .map(|n| [n, n])
            .or(cfg.agent_range)
            .unwrap_or(defaults.agent_range),
        delta_total: cfg.delta_total.unwrap_or(defaults.delta_total),
        delta_floor: cfg.delta_floor.unwrap_or(defaults.delta_floor),
        perturbation: cfg.perturbation.unwrap_or(defaults.perturbation),
        step: cfg.step.unwrap_or(defaults.step),
        horizon: cfg.horizon.unwrap_or(defaults.horizon),
        record_stride: cfg.record_stride.unwrap_or(defaults.record_stride),
    };
    mc.validate()?;
    Ok(mc)
}

/// Output of `bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
    /// `δ / c₂`; null when every desired distance is equal.
    pub bound: Option<f64>,
    pub lambda2: f64,
    /// `δ / sqrt(λ₂)`.
    pub spectral_bound: f64,
    pub config: Setup,
}

pub fn resolve_bound(cfg: &FileConfig) -> Result<BoundReport, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
    let setup = Setup::resolve(cfg, &mut rng, true, None)?;
    let spec = setup.spec.as_ref().expect("bound always resolves a shape");
    if spec.len() != setup.graph.n_edges() {
        return Err(qmas_core::Error::DimensionMismatch {
            expected: setup.graph.n_edges(),
            found: spec.len(),
        }
        .into());
    }
    if setup.sets.len() != setup.graph.n_agents() {
        return Err(qmas_core::Error::AgentSetMismatch {
            expected: setup.graph.n_agents(),
            found: setup.sets.len(),
        }
        .into());
    }
    let delta = consensus_bound(&setup.sets);
    let FormationBound { c1, c2, bound, .. } = match formation_bound(&setup.sets, spec) {
        Ok(b) => b,
        Err(qmas_core::Error::DegenerateBound { c1, .. }) => FormationBound {
            delta,
            c1,
            c2: 0.0,
            bound: f64::NAN,
        },
        Err(e) => return Err(e.into()),
    };
    let lambda2 = setup.graph.algebraic_connectivity();
    Ok(BoundReport {
        delta,
        c1,
        c2,
        bound: bound.is_finite().then_some(bound),
        lambda2,
        spectral_bound: delta / lambda2.sqrt(),
        config: setup,
    })
}
