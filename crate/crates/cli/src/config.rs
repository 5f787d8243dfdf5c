//! Experiment configs and their translation into validated library inputs.

use std::fmt;
use std::path::{Path, PathBuf};

use abstraction_core::abstractability::TargetDensity;
use abstraction_core::bridge::JointDistribution;
use abstraction_core::dynamics::MarkovSystem;
use abstraction_core::learn::LearningConfig;
use abstraction_core::{
    AbstractionModel, ConstraintSet, DiscreteDistribution, DivergenceSpec, FeatureFunction, Query, QuerySet,
    SolverOptions, StateSpace,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Solve,
    Eval,
    Learn,
    Dynamics,
    Abstractability,
    Mi,
    Verify,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Solve => "solve",
            Kind::Eval => "eval",
            Kind::Learn => "learn",
            Kind::Dynamics => "dynamics",
            Kind::Abstractability => "abstractability",
            Kind::Mi => "mi",
            Kind::Verify => "verify",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// May be omitted when the subcommand names the kind.
    #[serde(default)]
    pub kind: Option<Kind>,
    #[serde(default)]
    pub system: Option<SystemSpec>,
    #[serde(default)]
    pub constraints: Option<ConstraintSpec>,
    #[serde(default)]
    pub abstraction: Option<AbstractionSpec>,
    #[serde(default)]
    pub queryset: Option<QuerySetSpec>,
    #[serde(default)]
    pub learner: LearningConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub divergence: DivergenceSpec,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub dynamics: Option<DynamicsSpec>,
    #[serde(default)]
    pub abstractability: Option<AbstractabilitySpec>,
    #[serde(default)]
    pub mi: Option<MiSpec>,
    #[serde(default)]
    pub verify: Option<VerifySpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

/// A finite system. The state space comes from `states`, `grid` or
/// `n_states`, in that order, else from the length of `weights`/`transition`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default)]
    pub states: Option<Vec<String>>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub n_states: Option<usize>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub transition: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureSpec {
    Table { name: String, values: Vec<f64> },
    Indicator { name: Option<String>, state: usize },
    Coordinate { name: Option<String> },
    SquaredDeviation { name: Option<String>, center: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub features: Vec<FeatureSpec>,
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractionSpec {
    pub features: Vec<FeatureSpec>,
    /// Omitted: the system's own feature means.
    #[serde(default)]
    pub targets: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySetSpec {
    pub queries: Vec<serde_json::Value>,
    /// Omitted: uniform.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    pub horizon: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Table {
        coordinates: Vec<f64>,
        weights: Vec<f64>,
        #[serde(default)]
        spacing: Option<f64>,
    },
    /// `x,density` rows; relative paths resolve against the config file.
    Csv { path: PathBuf },
    /// Components are `[weight, mean, sd]`.
    GaussianMixture { grid: GridSpec, components: Vec<[f64; 3]> },
}

fn default_max_components() -> usize {
    10
}

fn default_eps() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractabilitySpec {
    pub target: TargetSpec,
    #[serde(default = "default_max_components")]
    pub max_components: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiSpec {
    /// Joint table; `I[a_axes; b_axes]` is reported, plus the chain-rule
    /// decomposition when the joint has three axes `(x, a, φ)`.
    #[serde(default)]
    pub joint: Option<serde_json::Value>,
    #[serde(default)]
    pub a_axes: Option<Vec<usize>>,
    #[serde(default)]
    pub b_axes: Option<Vec<usize>>,
    /// Enumerate every encoder of `system.weights` into this many symbols.
    #[serde(default)]
    pub infomax_alphabet: Option<usize>,
    /// Check `I[g(X); X] ≤ H[X]` for every deterministic query in `queryset`.
    #[serde(default)]
    pub hardest_query: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default = "default_profile")]
    pub profile: String,
}

fn default_profile() -> String {
    "default".into()
}

/// Parses config bytes, collecting a readable diagnostic on failure.
pub fn parse_config(bytes: &[u8]) -> CliResult<ExperimentConfig> {
    serde_json::from_slice(bytes).map_err(|e| CliError::config(format!("config: {e}")))
}

fn core<T>(what: &str, r: abstraction_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::config(format!("{what}: {e}")))
}

fn require<'a, T>(field: &'a Option<T>, name: &str, kind: Kind) -> CliResult<&'a T> {
    field
        .as_ref()
        .ok_or_else(|| CliError::config(format!("`{name}` is required for kind `{kind}`")))
}

impl SystemSpec {
    pub fn space(&self) -> CliResult<StateSpace> {
        if let Some(states) = &self.states {
            return core("system.states", StateSpace::new(states.clone()));
        }
        if let Some(g) = &self.grid {
            return core("system.grid", StateSpace::uniform_grid(g.lo, g.hi, g.step));
        }
        let n = self
            .n_states
            .or_else(|| self.weights.as_ref().map(Vec::len))
            .or_else(|| self.transition.as_ref().map(Vec::len))
            .ok_or_else(|| CliError::config("system needs states, grid, n_states, weights or transition"))?;
        core("system.n_states", StateSpace::indexed(n))
    }

    pub fn distribution(&self, kind: Kind) -> CliResult<DiscreteDistribution> {
        let w = require(&self.weights, "system.weights", kind)?;
        let d = core("system.weights", DiscreteDistribution::new(w.clone()))?;
        let n = self.space()?.len();
        if n != d.len() {
            return Err(CliError::config(format!(
                "system.weights has {} entries but the state space has {n}",
                d.len()
            )));
        }
        Ok(d)
    }

    pub fn markov(&self, kind: Kind) -> CliResult<MarkovSystem> {
        let t = require(&self.transition, "system.transition", kind)?;
        let init = require(&self.initial, "system.initial", kind)?;
        let init = core("system.initial", DiscreteDistribution::new(init.clone()))?;
        core("system.transition", MarkovSystem::new(self.space()?, t.clone(), init))
    }
}

impl FeatureSpec {
    pub fn build(&self, space: &StateSpace) -> CliResult<FeatureFunction> {
        let f = match self {
            FeatureSpec::Table { name, values } => {
                if values.len() != space.len() {
                    return Err(CliError::config(format!(
                        "feature `{name}` has {} values but the state space has {}",
                        values.len(),
                        space.len()
                    )));
                }
                FeatureFunction::new(name.clone(), values.clone())
            }
            FeatureSpec::Indicator { name, state } => FeatureFunction::indicator(
                name.clone().unwrap_or_else(|| format!("is_{state}")),
                space.len(),
                *state,
            ),
            FeatureSpec::Coordinate { name } => FeatureFunction::coordinate(space).map(|mut f| {
                if let Some(n) = name {
                    f.name = n.clone();
                }
                f
            }),
            FeatureSpec::SquaredDeviation { name, center } => {
                FeatureFunction::squared_deviation(space, *center).map(|mut f| {
                    if let Some(n) = name {
                        f.name = n.clone();
                    }
                    f
                })
            }
        };
        core("feature", f)
    }
}

pub fn build_features(specs: &[FeatureSpec], space: &StateSpace) -> CliResult<Vec<FeatureFunction>> {
    specs.iter().map(|s| s.build(space)).collect()
}

impl ConstraintSpec {
    pub fn build(&self, space: &StateSpace) -> CliResult<ConstraintSet> {
        let features = build_features(&self.features, space)?;
        core("constraints", ConstraintSet::new(features, self.targets.clone()))
    }
}

impl QuerySetSpec {
    pub fn build(&self, n_states: usize) -> CliResult<QuerySet> {
        let queries = self
            .queries
            .iter()
            .enumerate()
            .map(|(i, v)| {
                serde_json::from_value::<Query>(v.clone()).map_err(|e| CliError::config(format!("queryset.queries[{i}]: {e}")))
            })
            .collect::<CliResult<Vec<Query>>>()?;
        for q in &queries {
            if let Some(n) = q.input_len() {
                if n != n_states {
                    return Err(CliError::config(format!(
                        "query `{}` expects {n} states but the system has {n_states}",
                        q.name
                    )));
                }
            }
        }
        let qs = match &self.weights {
            Some(w) => QuerySet::new(queries, w.clone()),
            None => QuerySet::uniform(queries),
        };
        core("queryset", qs)
    }
}

impl TargetSpec {
    /// Builds the density and reports any file it read.
    pub fn build(&self, base: &Path) -> CliResult<(TargetDensity, Option<PathBuf>)> {
        match self {
            TargetSpec::Table {
                coordinates,
                weights,
                spacing,
            } => Ok((
                core(
                    "abstractability.target",
                    TargetDensity::from_masses(coordinates.clone(), weights.clone(), *spacing),
                )?,
                None,
            )),
            TargetSpec::Csv { path } => {
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                let text = std::fs::read_to_string(&full).map_err(|e| CliError::io(&full, e))?;
                Ok((core("abstractability.target", TargetDensity::from_csv(&text))?, Some(full)))
            }
            TargetSpec::GaussianMixture { grid, components } => {
                let space = core("abstractability.target.grid", StateSpace::uniform_grid(grid.lo, grid.hi, grid.step))?;
                let comps: Vec<(f64, f64, f64)> = components.iter().map(|c| (c[0], c[1], c[2])).collect();
                Ok((core("abstractability.target", TargetDensity::gaussian_mixture(space, &comps))?, None))
            }
        }
    }
}

/// Validated inputs, one variant per kind.
#[derive(Debug, Clone)]
pub enum Plan {
    Solve {
        space: StateSpace,
        constraints: ConstraintSet,
    },
    Eval {
        space: StateSpace,
        system: DiscreteDistribution,
        model: AbstractionModel,
        queryset: QuerySet,
    },
    Learn {
        space: StateSpace,
        system: DiscreteDistribution,
        features: Vec<FeatureFunction>,
        queryset: QuerySet,
    },
    Dynamics {
        system: MarkovSystem,
        horizon: usize,
        features: Vec<FeatureFunction>,
        queryset: QuerySet,
    },
    Abstractability {
        target: TargetDensity,
        max_components: usize,
        eps: f64,
    },
    Mi {
        joint: Option<(JointDistribution, Vec<usize>, Vec<usize>)>,
        system: Option<DiscreteDistribution>,
        infomax_alphabet: Option<usize>,
        hardest: Option<Vec<Query>>,
    },
    Verify {
        profile: String,
    },
}

/// Everything a run needs after validation.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub kind: Kind,
    pub seed: u64,
    pub learner: LearningConfig,
    pub solver: SolverOptions,
    pub divergence: DivergenceSpec,
    pub plan: Plan,
    /// Files read while building inputs, besides the config itself.
    pub extra_inputs: Vec<PathBuf>,
}

fn default_queryset(spec: &Option<QuerySetSpec>, n: usize) -> CliResult<QuerySet> {
    match spec {
        Some(s) => s.build(n),
        None => Ok(QuerySet::single(core("queryset", Query::reconstruction("reconstruction", n))?)),
    }
}

impl ExperimentConfig {
    /// Resolves the kind against the subcommand and validates every section
    /// the kind uses. `base` is the directory relative paths resolve against.
    pub fn prepare(&self, subcommand: Kind, seed_override: Option<u64>, base: &Path) -> CliResult<Prepared> {
        let kind = match self.kind {
            Some(k) if k != subcommand => {
                return Err(CliError::config(format!(
                    "config kind `{k}` does not match subcommand `{subcommand}`"
                )))
            }
            _ => subcommand,
        };
        let seed = seed_override.or(self.seed).unwrap_or(0);
        let mut learner = self.learner.clone();
        learner.seed = seed;
        core("learner", learner.validate())?;
        let mut solver = self.solver.clone();
        solver.seed = seed;
        if !(solver.tolerance > 0.0 && solver.max_iters > 0) {
            return Err(CliError::config("solver needs a positive tolerance and max_iters"));
        }
        if let DivergenceSpec::SmoothedKl { epsilon } = self.divergence {
            if !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(CliError::config("divergence.epsilon must lie in (0, 1)"));
            }
        }
        let mut extra_inputs = Vec::new();
        let system = || require(&self.system, "system", kind);
        let plan = match kind {
            Kind::Solve => {
                let space = system()?.space()?;
                let constraints = require(&self.constraints, "constraints", kind)?.build(&space)?;
                Plan::Solve { space, constraints }
            }
            Kind::Eval => {
                let sys = system()?;
                let space = sys.space()?;
                let dist = sys.distribution(kind)?;
                let spec = require(&self.abstraction, "abstraction", kind)?;
                let features = build_features(&spec.features, &space)?;
                let model = match &spec.targets {
                    Some(t) => core("abstraction", AbstractionModel::new(features, t.clone()))?,
                    None => AbstractionModel::matching(features, &dist),
                };
                Plan::Eval {
                    queryset: default_queryset(&self.queryset, space.len())?,
                    space,
                    system: dist,
                    model,
                }
            }
            Kind::Learn => {
                let sys = system()?;
                let space = sys.space()?;
                let dist = sys.distribution(kind)?;
                let spec = require(&self.abstraction, "abstraction", kind)?;
                if spec.targets.is_some() {
                    return Err(CliError::config("abstraction.targets is learned and must be omitted for kind `learn`"));
                }
                Plan::Learn {
                    features: build_features(&spec.features, &space)?,
                    queryset: default_queryset(&self.queryset, space.len())?,
                    space,
                    system: dist,
                }
            }
            Kind::Dynamics => {
                let markov = system()?.markov(kind)?;
                let spec = require(&self.abstraction, "abstraction", kind)?;
                let features = build_features(&spec.features, &markov.space)?;
                let horizon = require(&self.dynamics, "dynamics", kind)?.horizon;
                if horizon == 0 {
                    return Err(CliError::config("dynamics.horizon must be at least 1"));
                }
                Plan::Dynamics {
                    queryset: default_queryset(&self.queryset, markov.n_states())?,
                    system: markov,
                    horizon,
                    features,
                }
            }
            Kind::Abstractability => {
                let spec = require(&self.abstractability, "abstractability", kind)?;
                if spec.max_components == 0 {
                    return Err(CliError::config("abstractability.max_components must be at least 1"));
                }
                if !(spec.eps > 0.0 && spec.eps.is_finite()) {
                    return Err(CliError::config("abstractability.eps must be positive"));
                }
                let (target, file) = spec.target.build(base)?;
                extra_inputs.extend(file);
                Plan::Abstractability {
                    target,
                    max_components: spec.max_components,
                    eps: spec.eps,
                }
            }
            Kind::Mi => {
                let spec = require(&self.mi, "mi", kind)?;
                let joint = match &spec.joint {
                    Some(v) => {
                        let j: JointDistribution =
                            serde_json::from_value(v.clone()).map_err(|e| CliError::config(format!("mi.joint: {e}")))?;
                        let rank = j.shape().len();
                        if rank < 2 {
                            return Err(CliError::config("mi.joint needs at least two axes"));
                        }
                        let a = spec.a_axes.clone().unwrap_or_else(|| vec![0]);
                        let b = spec.b_axes.clone().unwrap_or_else(|| (0..rank).filter(|x| !a.contains(x)).collect());
                        Some((j, a, b))
                    }
                    None => None,
                };
                let needs_system = spec.infomax_alphabet.is_some() || spec.hardest_query;
                let dist = if needs_system { Some(system()?.distribution(kind)?) } else { None };
                let hardest = if spec.hardest_query {
                    let n = dist.as_ref().map_or(0, |d| d.len());
                    Some(require(&self.queryset, "queryset", kind)?.build(n)?.queries().to_vec())
                } else {
                    None
                };
                if joint.is_none() && !needs_system {
                    return Err(CliError::config("mi needs `joint`, `infomax_alphabet` or `hardest_query`"));
                }
                Plan::Mi {
                    joint,
                    system: dist,
                    infomax_alphabet: spec.infomax_alphabet,
                    hardest,
                }
            }
            Kind::Verify => {
                let profile = self.verify.as_ref().map_or_else(default_profile, |v| v.profile.clone());
                crate::verify::Profile::parse(&profile)?;
                Plan::Verify { profile }
            }
        };
        Ok(Prepared {
            kind,
            seed,
            learner,
            solver,
            divergence: self.divergence,
            plan,
            extra_inputs,
        })
    }
}
