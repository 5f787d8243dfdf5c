//! End-to-end verification suite. Every check compares library output against
//! an oracle computed here by a different route.

use std::time::Instant;

use abstraction_core::abstractability::{abstractability_score, TargetDensity};
use abstraction_core::bridge::{
    hardest_query_check, info_decomposition_check, infomax_bruteforce_check, mle_map_reduction_check,
    vi_maxent_check, Dataset, JointDistribution, PriorSpec, VIProblem,
};
use abstraction_core::dynamics::{
    dynamical_loss, learn_abstract_dynamics, rollout_ensemble, solve_maxcal, ExpectationEncoder, MarkovSystem,
    PathConstraintSet, PathSpace,
};
use abstraction_core::eval::perfect_abstraction_check;
use abstraction_core::learn::{fd_step_halving_ratio, learn_encoder, learn_targets, EncoderMode, LearningConfig};
use abstraction_core::maxent::{analytic_gaussian_with, gaussian_constraints, solve_soft_maxent};
use abstraction_core::query::kl_divergence;
use abstraction_core::{
    queryset_loss, solve_maxent, solve_maxent_on, AbstractionModel, ConstraintSet, DiscreteDistribution,
    DivergenceSpec, Error, FeatureFunction, Query, QuerySet, SolverOptions, StateSpace,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Default,
    /// Every tolerance divided by ten.
    Strict,
}

impl Profile {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "default" => Ok(Profile::Default),
            "strict" => Ok(Profile::Strict),
            other => Err(CliError::config(format!("unknown tolerance profile `{other}` (default|strict)"))),
        }
    }

    fn scale(self) -> f64 {
        match self {
            Profile::Default => 1.0,
            Profile::Strict => 0.1,
        }
    }
}

/// Deliberate defects used to confirm the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Perturbs the closed-form Gaussian multiplier by 1%.
    GaussianMultiplier,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// `limit − value`; negative means failure.
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub metrics: Vec<Metric>,
    /// Set when the check could not run to completion.
    pub error: Option<String>,
    pub seconds: f64,
}

impl CheckResult {
    /// Smallest margin over all metrics.
    pub fn margin(&self) -> Option<f64> {
        self.metrics.iter().map(|m| m.margin).reduce(f64::min)
    }

    pub fn summary_line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let detail = match &self.error {
            Some(e) => e.clone(),
            None => self
                .metrics
                .iter()
                .map(|m| format!("{} = {:.3e} (limit {:.1e})", m.name, m.value, m.limit))
                .collect::<Vec<_>>()
                .join(", "),
        };
        format!("{status}  {} {}: {detail} ({:.2}s)", self.id, self.name, self.seconds)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub profile: Profile,
    pub fault: Option<Fault>,
    pub checks: Vec<CheckResult>,
    pub passed: usize,
    pub total: usize,
    pub all_passed: bool,
}

impl VerifyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,name,metric,value,limit,margin,passed\n");
        for c in &self.checks {
            for m in &c.metrics {
                out.push_str(&format!(
                    "{},{},{},{:.16e},{:.16e},{:.16e},{}\n",
                    c.id, c.name, m.name, m.value, m.limit, m.margin, m.passed
                ));
            }
            if let Some(e) = &c.error {
                out.push_str(&format!("{},{},error,,,,false # {}\n", c.id, c.name, e.replace(',', ";")));
            }
        }
        out
    }
}

struct Ctx {
    scale: f64,
    fault: Option<Fault>,
}

impl Ctx {
    /// Metric that passes when `value ≤ base · scale`.
    fn tol(&self, name: &str, value: f64, base: f64) -> Metric {
        exact(name, value, base * self.scale)
    }
}

fn exact(name: &str, value: f64, limit: f64) -> Metric {
    Metric {
        name: name.into(),
        value,
        limit,
        margin: limit - value,
        passed: value <= limit,
    }
}

type Outcome = std::result::Result<Vec<Metric>, String>;

fn err(e: impl ToString) -> String {
    e.to_string()
}

fn feat(name: &str, v: Vec<f64>) -> FeatureFunction {
    FeatureFunction::new(name, v).expect("finite feature")
}

fn entropy_of(w: &[f64]) -> f64 {
    -w.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

fn bisect_lambda(e: &[f64], target: f64) -> f64 {
    let mean = |l: f64| {
        let m = e.iter().map(|x| -l * x).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = e.iter().map(|x| (-l * x - m).exp()).collect();
        let z: f64 = w.iter().sum();
        w.iter().zip(e).map(|(w, x)| w * x).sum::<f64>() / z
    };
    let (mut lo, mut hi) = (-200.0, 200.0);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn spread(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn boltzmann(ctx: &Ctx) -> Outcome {
    let cases: [(&[f64], f64); 6] = [
        (&[0.0, 1.0], 0.25),
        (&[0.0, 1.0], 0.8),
        (&[0.0, 1.0, 3.0], 0.7),
        (&[0.0, 1.0, 3.0], 2.1),
        (&[0.0, 0.5, 2.0, 3.0], 1.0),
        (&[-1.0, 0.2, 0.9, 4.0], 0.1),
    ];
    let (mut dl, mut res, mut form) = (0.0f64, 0.0f64, 0.0f64);
    for (e, c) in cases {
        let space = StateSpace::indexed(e.len()).map_err(err)?;
        let cs = ConstraintSet::new(vec![feat("E", e.to_vec())], vec![c]).map_err(err)?;
        let sol = solve_maxent(&space, &cs, &SolverOptions::default()).map_err(err)?;
        let oracle = bisect_lambda(e, c);
        dl = dl.max((sol.multipliers[0] - oracle).abs());
        let mean: f64 = sol.distribution.weights().iter().zip(e).map(|(p, x)| p * x).sum();
        res = res.max((mean - c).abs());
        let consts: Vec<f64> = sol.distribution.weights().iter().zip(e).map(|(p, x)| p.ln() + oracle * x).collect();
        form = form.max(spread(&consts));
    }
    Ok(vec![
        ctx.tol("max residual", res, 1e-8),
        ctx.tol("max |dλ|", dl, 1e-6),
        ctx.tol("Boltzmann-form spread", form, 1e-6),
    ])
}

fn gaussian(ctx: &Ctx) -> Outcome {
    let (mut rel, mut worst_kl) = (0.0f64, 0.0f64);
    for sigma in [0.5, 1.0, 2.0] {
        let h = sigma / 20.0;
        let grid = StateSpace::uniform_grid(-6.0 * sigma, 6.0 * sigma, h).map_err(err)?;
        let var = sigma * sigma;
        let cs = gaussian_constraints(var, &grid).map_err(err)?;
        let sol = solve_maxent(&grid, &cs, &SolverOptions::default()).map_err(err)?;
        let analytic = match ctx.fault {
            Some(Fault::GaussianMultiplier) => analytic_gaussian_with(var, &grid, |v| 1.01 / (2.0 * v)),
            None => analytic_gaussian_with(var, &grid, |v| 1.0 / (2.0 * v)),
        }
        .map_err(err)?;
        let expected = analytic.multipliers[0];
        rel = rel.max((sol.multipliers[0] - expected).abs() / expected);
        let kl = kl_divergence(sol.distribution.weights(), analytic.distribution.weights()).map_err(err)?;
        worst_kl = worst_kl.max(kl);
    }
    Ok(vec![ctx.tol("rel |dλ₁|", rel, 1e-6), ctx.tol("KL to analytic", worst_kl, 1e-6)])
}

fn log_binom(n: usize, k: usize) -> f64 {
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

fn families() -> Vec<(&'static str, DiscreteDistribution, Vec<FeatureFunction>)> {
    let boltz = DiscreteDistribution::from_unnormalized([0.0f64, 1.0, 2.0, 3.0].iter().map(|x| (-x).exp()).collect())
        .expect("positive masses");
    let n = 6;
    let theta: f64 = 0.35;
    let binom = DiscreteDistribution::from_unnormalized(
        (0..=n)
            .map(|k| log_binom(n, k).exp() * theta.powi(k as i32) * (1.0 - theta).powi((n - k) as i32))
            .collect(),
    )
    .expect("positive masses");
    let xs: Vec<f64> = (0..13).map(|i| -3.0 + 0.5 * i as f64).collect();
    let gauss = DiscreteDistribution::from_unnormalized(xs.iter().map(|x| (-(x - 0.5f64).powi(2) / 2.0).exp()).collect())
        .expect("positive masses");
    vec![
        ("boltzmann", boltz, vec![feat("E", vec![0.0, 1.0, 2.0, 3.0])]),
        (
            "binomial",
            binom,
            vec![
                feat("k", (0..=n).map(|k| k as f64).collect()),
                feat("lnC", (0..=n).map(|k| log_binom(n, k)).collect()),
            ],
        ),
        (
            "grid-gaussian",
            gauss,
            vec![feat("x", xs.clone()), feat("x2", xs.iter().map(|x| x * x).collect())],
        ),
    ]
}

fn perfect(ctx: &Ctx) -> Outcome {
    let opts = SolverOptions::default();
    let (mut loss, mut gap) = (0.0f64, 0.0f64);
    for (name, sys, feats) in families() {
        let n = sys.len();
        let push: Vec<usize> = (0..n).map(|i| (i * 7 + 1) % 5 % n.min(5)).collect();
        let n_push = push.iter().max().map_or(1, |m| m + 1);
        let queries = vec![
            Query::reconstruction("reconstruction", n).map_err(err)?,
            Query::coarse_grain("halves", (0..n).map(|i| usize::from(i >= n / 2)).collect()).map_err(err)?,
            Query::coarse_grain("mod3", (0..n).map(|i| i % 3).collect()).map_err(err)?,
            Query::pushforward("hash", push, n_push).map_err(err)?,
            Query::constant("const", DiscreteDistribution::new(vec![0.3, 0.7]).map_err(err)?).map_err(err)?,
        ];
        let qs = QuerySet::uniform(queries.clone()).map_err(err)?;
        let model = AbstractionModel::matching(feats, &sys);
        let rep = queryset_loss(&sys, &model, &qs, DivergenceSpec::Kl, &opts).map_err(|e| format!("{name}: {e}"))?;
        loss = loss.max(rep.total);
        for q in &queries[1..3] {
            let pc = perfect_abstraction_check(&sys, &model, q, DivergenceSpec::Kl, &opts).map_err(err)?;
            gap = gap.max(pc.gap);
        }
    }
    Ok(vec![ctx.tol("max queryset loss", loss, 1e-8), ctx.tol("max |ΔI|", gap, 1e-6)])
}

fn mle_map(ctx: &Ctx) -> Outcome {
    let cfg = LearningConfig {
        tolerance: 1e-10,
        ..Default::default()
    };
    let opts = SolverOptions::default();
    let (mut gap, mut moment) = (0.0f64, 0.0f64);
    let mut prior_violations = 0.0;
    for (i, (name, sys, feats)) in families().into_iter().enumerate() {
        let ds = Dataset::sample(&sys, 200, 100 + i as u64).map_err(err)?;
        let rep = mle_map_reduction_check(&ds, &feats, None, &cfg, &opts).map_err(|e| format!("{name}: {e}"))?;
        gap = gap.max(rep.gap);
        for (f, a) in feats.iter().zip(&rep.argmin_loss_targets) {
            let m = ds.samples.iter().map(|&s| f.values[s]).sum::<f64>() / ds.samples.len() as f64;
            moment = moment.max((m - a).abs());
        }
        if i == 0 {
            let atom = vec![2.2];
            let delta = PriorSpec::Delta { atom: atom.clone() };
            let r = mle_map_reduction_check(&ds, &feats, Some(&delta), &cfg, &opts).map_err(err)?;
            if r.argmax_likelihood_targets != atom || r.argmin_loss_targets != atom {
                prior_violations += 1.0;
            }
            let uni = PriorSpec::Uniform {
                candidates: (1..60).map(|j| vec![j as f64 * 0.05]).collect(),
            };
            let r = mle_map_reduction_check(&ds, &feats, Some(&uni), &cfg, &opts).map_err(err)?;
            if Some(r.argmax_likelihood_targets.clone()) != r.prior_free_targets || r.gap != 0.0 {
                prior_violations += 1.0;
            }
        }
    }
    Ok(vec![
        ctx.tol("max argmin/argmax gap", gap, 1e-6),
        ctx.tol("max |a − sample mean|", moment, 1e-6),
        exact("prior violations", prior_violations, 0.0),
    ])
}

fn hardest(ctx: &Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut violations, mut oracle_gap) = (0.0, 0.0f64);
    for trial in 0..1000 {
        let n = rng.random_range(2..=8);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let sys = DiscreteDistribution::from_unnormalized(w).map_err(err)?;
        let map: Vec<usize> = if trial % 4 == 0 {
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            perm
        } else {
            let bins = rng.random_range(1..=n);
            (0..n).map(|_| rng.random_range(0..bins)).collect()
        };
        let bins = map.iter().max().map_or(1, |m| m + 1);
        let mut distinct = map.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let injective = distinct.len() == n;
        let rep = hardest_query_check(&sys, &[Query::pushforward("g", map.clone(), bins).map_err(err)?]).map_err(err)?;
        let h = entropy_of(sys.weights());
        let mut pg = vec![0.0; bins];
        for (x, &g) in map.iter().enumerate() {
            pg[g] += sys.weights()[x];
        }
        let i = rep.queries[0].information;
        oracle_gap = oracle_gap.max((i - entropy_of(&pg)).abs());
        if i > h + 1e-12 || ((h - i).abs() < 1e-12) != injective || !rep.all_hold {
            violations += 1.0;
        }
    }
    Ok(vec![
        exact("inequality/equality violations", violations, 0.0),
        ctx.tol("max |I − H[g(X)]|", oracle_gap, 1e-10),
    ])
}

fn infomax(_: &Ctx) -> Outcome {
    let systems = [
        vec![0.4, 0.3, 0.2, 0.1],
        vec![0.05, 0.15, 0.35, 0.45],
        vec![0.37, 0.11, 0.29, 0.23],
    ];
    let mut mismatches = 0.0;
    for w in &systems {
        let rep = infomax_bruteforce_check(&DiscreteDistribution::new(w.clone()).map_err(err)?, 2).map_err(err)?;
        let mut best = f64::NEG_INFINITY;
        let mut set = Vec::new();
        for code in 0..16usize {
            let enc: Vec<usize> = (0..4).map(|x| (code >> x) & 1).collect();
            let mut pa = [0.0; 2];
            for x in 0..4 {
                pa[enc[x]] += w[x];
            }
            let h = entropy_of(&pa);
            if h > best + 1e-12 {
                best = h;
                set = vec![enc];
            } else if (h - best).abs() <= 1e-12 {
                set.push(enc);
            }
        }
        set.sort();
        let mut got = rep.argmin_loss_set.clone();
        got.sort();
        if !rep.equal || got != set || rep.encoders.len() != 16 {
            mismatches += 1.0;
        }
    }
    Ok(vec![exact("set mismatches", mismatches, 0.0)])
}

fn chain_rule(ctx: &Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut residual, mut oracle) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let shape = vec![rng.random_range(2..=4), rng.random_range(2..=4), rng.random_range(2..=4)];
        let len = shape.iter().product();
        let masses: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        let joint = JointDistribution::from_masses(shape.clone(), masses).map_err(err)?;
        let rep = info_decomposition_check(&joint).map_err(err)?;
        residual = residual.max(rep.residual);
        let t = joint.table();
        let (nx, na, nf) = (shape[0], shape[1], shape[2]);
        let marg = |key: &dyn Fn(usize, usize, usize) -> usize, size: usize| {
            let mut m = vec![0.0; size];
            for x in 0..nx {
                for a in 0..na {
                    for f in 0..nf {
                        m[key(x, a, f)] += t[(x * na + a) * nf + f];
                    }
                }
            }
            entropy_of(&m)
        };
        let h_xaf = entropy_of(t);
        let h_x = marg(&|x, _, _| x, nx);
        let h_f = marg(&|_, _, f| f, nf);
        let h_af = marg(&|_, a, f| a * nf + f, na * nf);
        let h_xf = marg(&|x, _, f| x * nf + f, nx * nf);
        oracle = oracle
            .max((rep.joint_information - (h_x + h_af - h_xaf)).abs())
            .max((rep.parameter_information - (h_x + h_f - h_xf)).abs())
            .max((rep.redundancy - (h_xf + h_af - h_xaf - h_f)).abs());
    }
    Ok(vec![
        ctx.tol("max chain-rule residual", residual, 1e-10),
        ctx.tol("max disagreement with entropy oracle", oracle, 1e-10),
    ])
}

fn maxcal(ctx: &Ctx) -> Outcome {
    let opts = SolverOptions::default();
    let free = solve_maxcal(2, 3, &PathConstraintSet::empty(), &opts).map_err(err)?;
    let uniform_dev = if free.paths.len() == 16 {
        free.distribution().weights().iter().map(|w| (w - 1.0 / 16.0).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let sys = MarkovSystem::new(
        StateSpace::indexed(3).map_err(err)?,
        vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.5, 0.3], vec![0.25, 0.25, 0.5]],
        DiscreteDistribution::new(vec![0.7, 0.2, 0.1]).map_err(err)?,
    )
    .map_err(err)?;
    let traj = rollout_ensemble(&sys, 3).map_err(err)?;
    let pc = PathSpace::new(3, 3).map_err(err)?.marginal_constraints(&traj.marginals).map_err(err)?;
    let sol = solve_maxcal(3, 3, &pc, &opts).map_err(err)?;
    let mut worst = 0.0f64;
    for t in 0..=3 {
        let m = sol.marginal(t).map_err(err)?;
        let feats = (0..2)
            .map(|s| FeatureFunction::indicator(format!("is{s}"), 3, s))
            .collect::<abstraction_core::Result<Vec<_>>>()
            .map_err(err)?;
        let targets = traj.marginals[t].weights()[..2].to_vec();
        let step = solve_maxent_on(3, &ConstraintSet::new(feats, targets).map_err(err)?, &opts).map_err(err)?;
        for (a, b) in m.weights().iter().zip(step.distribution.weights()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(vec![
        exact("max deviation from uniform over 16 paths", uniform_dev, 0.0),
        ctx.tol("max per-step marginal mismatch", worst, 1e-8),
    ])
}

fn reconstruction_qs(n: usize) -> std::result::Result<QuerySet, String> {
    Ok(QuerySet::single(Query::reconstruction("r", n).map_err(err)?))
}

fn dynamics(ctx: &Ctx) -> Outcome {
    let (mut coef, mut loss) = (0.0f64, 0.0f64);
    let opts = SolverOptions::default();
    for (alpha, beta) in [(0.2, 0.1), (0.35, 0.25)] {
        let sys = MarkovSystem::two_state(alpha, beta, DiscreteDistribution::new(vec![0.9, 0.1]).map_err(err)?)
            .map_err(err)?;
        let f = vec![FeatureFunction::indicator("in0", 2, 0).map_err(err)?];
        let enc = ExpectationEncoder { features: f.clone() };
        let qs = reconstruction_qs(2)?;
        let fit = learn_abstract_dynamics(&sys, 10, &enc, &f, &qs, DivergenceSpec::Kl, &LearningConfig::default(), &opts)
            .map_err(err)?;
        coef = coef
            .max((fit.dynamics.weights[0][0] - (1.0 - alpha - beta)).abs())
            .max((fit.dynamics.offset[0] - beta).abs());
        let path = dynamical_loss(&fit.trajectory, &fit.dynamics.rollout(10), &f, &qs, DivergenceSpec::Kl, &opts)
            .map_err(err)?;
        loss = loss.max(path.total);
    }
    Ok(vec![
        ctx.tol("max |W − (1−α−β)|, |b − β|", coef, 1e-4),
        ctx.tol("max path loss", loss, 1e-8),
    ])
}

fn abstractability(ctx: &Ctx) -> Outcome {
    let cfg = LearningConfig::default();
    let normal = TargetDensity::gaussian_mixture(StateSpace::uniform_grid(-6.0, 6.0, 0.05).map_err(err)?, &[(1.0, 0.0, 1.0)])
        .map_err(err)?;
    let r = abstractability_score(&normal, 10, 1e-3, &cfg).map_err(err)?;
    let mut metrics = vec![ctx.tol("N(0,1) score", r.score, 0.05)];
    let mut excess = r.score - entropy_of(normal.weights.weights());
    for m in [2usize, 4, 8] {
        let comps: Vec<(f64, f64, f64)> = (0..m).map(|i| (1.0, 6.0 * i as f64, 0.5)).collect();
        let hi = 6.0 * (m - 1) as f64 + 4.0;
        let t = TargetDensity::gaussian_mixture(StateSpace::uniform_grid(-4.0, hi, 0.1).map_err(err)?, &comps)
            .map_err(err)?;
        let r = abstractability_score(&t, 10, 1e-3, &cfg).map_err(err)?;
        metrics.push(ctx.tol(&format!("|score − ln {m}|"), (r.score - (m as f64).ln()).abs(), 0.05));
        excess = excess.max(r.score - entropy_of(t.weights.weights()));
    }
    metrics.push(ctx.tol("max score − H[p]", excess, 1e-9));
    Ok(metrics)
}

fn vi(ctx: &Ctx) -> Outcome {
    let e = [0.0, 1.0, 2.0, 3.0];
    let problem = VIProblem {
        n_states: 4,
        features: vec![feat("E", e.to_vec())],
        observations: vec![0.9],
    };
    let schedule = [1.0, 10.0, 100.0, 1000.0, 1e4];
    let opts = SolverOptions::default();
    let rep = vi_maxent_check(&problem, &schedule, &opts).map_err(err)?;
    let kls: Vec<f64> = rep.steps.iter().map(|s| s.kl_to_maxent).collect();
    let rise = kls.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let cs = problem.constraints().map_err(err)?;
    let mut not_minimal = 0.0;
    for &lambda in &schedule {
        let q = solve_soft_maxent(4, &cs, lambda, None, &opts).map_err(err)?.distribution;
        let free = |w: &[f64]| {
            let mean: f64 = w.iter().zip(&e).map(|(p, x)| p * x).sum();
            -entropy_of(w) + lambda * (0.9 - mean).powi(2)
        };
        let f0 = free(q.weights());
        for dir in [[1.0, -1.0, 0.0, 0.0], [0.0, 1.0, 0.0, -1.0], [0.5, 0.5, -0.5, -0.5]] {
            for eps in [1e-4, -1e-4] {
                let w: Vec<f64> = q.weights().iter().zip(&dir).map(|(p, d)| p + eps * d * p.min(0.1)).collect();
                if free(&w) < f0 - 1e-14 {
                    not_minimal += 1.0;
                }
            }
        }
    }
    Ok(vec![
        exact("max KL increase along schedule", rise, 0.0),
        ctx.tol("KL at λ = 1e4", kls.last().copied().unwrap_or(f64::INFINITY), 1e-3),
        exact("free-energy perturbations that improve on q*", not_minimal, 0.0),
    ])
}

fn hygiene(ctx: &Ctx) -> Outcome {
    let cfg = LearningConfig::default();
    let opts = SolverOptions::default();
    let mut traces = Vec::new();
    for (_, sys, feats) in families() {
        let n = sys.len();
        let qs = QuerySet::uniform(vec![
            Query::reconstruction("r", n).map_err(err)?,
            Query::coarse_grain("h", (0..n).map(|i| usize::from(i >= n / 2)).collect()).map_err(err)?,
        ])
        .map_err(err)?;
        traces.push(learn_targets(&sys, &feats[..1], &qs, DivergenceSpec::Kl, &cfg, &opts).map_err(err)?.trace);
    }
    let systems = [[0.5, 0.2, 0.2, 0.1], [0.1, 0.3, 0.2, 0.4], [0.25, 0.25, 0.4, 0.1]]
        .iter()
        .map(|w| DiscreteDistribution::new(w.to_vec()))
        .collect::<abstraction_core::Result<Vec<_>>>()
        .map_err(err)?;
    let shared = vec![feat("x", vec![0.0, 1.0, 2.0, 3.0])];
    let local = vec![feat("odd", vec![0.0, 1.0, 0.0, 1.0])];
    let qs4 = reconstruction_qs(4)?;
    let enc = learn_encoder(&systems, &shared, &local, &qs4, DivergenceSpec::Kl, EncoderMode::PerDatapoint, &cfg, &opts)
        .map_err(err)?;
    traces.push(enc.trace);
    let sys = MarkovSystem::two_state(0.2, 0.1, DiscreteDistribution::new(vec![0.9, 0.1]).map_err(err)?).map_err(err)?;
    let f = vec![FeatureFunction::indicator("in0", 2, 0).map_err(err)?];
    let dynfit = learn_abstract_dynamics(
        &sys,
        10,
        &ExpectationEncoder { features: f.clone() },
        &f,
        &reconstruction_qs(2)?,
        DivergenceSpec::Kl,
        &cfg,
        &opts,
    )
    .map_err(err)?;
    traces.push(dynfit.trace);
    let rise = traces
        .iter()
        .flat_map(|t| t.windows(2).map(|w| w[1].loss - w[0].loss))
        .fold(0.0, f64::max);

    let (_, sys, feats) = families().swap_remove(0);
    let mut objective = |a: &[f64]| {
        let m = AbstractionModel::new(feats.clone(), a.to_vec())?;
        Ok(queryset_loss(&sys, &m, &qs4, DivergenceSpec::Kl, &opts)?.total)
    };
    let mut ratio_dev = 0.0f64;
    for a in [0.8, 1.2, 1.9] {
        for r in fd_step_halving_ratio(&mut objective, &[a], 0.05).map_err(|e: Error| e.to_string())? {
            ratio_dev = ratio_dev.max((r - 4.0).abs());
        }
    }
    Ok(vec![
        ctx.tol("max trace increase", rise, 1e-9),
        ctx.tol("max |step-halving ratio − 4|", ratio_dev, 0.5),
    ])
}

pub const CHECKS: [&str; 12] = [
    "Boltzmann recovery",
    "Gaussian derivation",
    "Perfect-abstraction fixed point",
    "MLE/MAP reduction",
    "Hardest-query inequality",
    "InfoMax set identity",
    "MI chain rule",
    "Maximum caliber",
    "Abstract-dynamics recovery",
    "Abstractability extremes",
    "VI limit",
    "Learner hygiene",
];

/// Runs every check; `on_check` sees each result as it completes.
pub fn verify_suite(profile: Profile, fault: Option<Fault>, mut on_check: impl FnMut(&CheckResult)) -> VerifyReport {
    let ctx = Ctx {
        scale: profile.scale(),
        fault,
    };
    let runners: [fn(&Ctx) -> Outcome; 12] = [
        boltzmann,
        gaussian,
        perfect,
        mle_map,
        hardest,
        infomax,
        chain_rule,
        maxcal,
        dynamics,
        abstractability,
        vi,
        hygiene,
    ];
    let mut checks = Vec::with_capacity(runners.len());
    for (i, (run, name)) in runners.iter().zip(CHECKS).enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(|| run(&ctx)).unwrap_or_else(|_| Err("check panicked".into()));
        let seconds = start.elapsed().as_secs_f64();
        let result = match outcome {
            Ok(metrics) => CheckResult {
                id: i + 1,
                name: name.into(),
                passed: metrics.iter().all(|m| m.passed),
                metrics,
                error: None,
                seconds,
            },
            Err(e) => CheckResult {
                id: i + 1,
                name: name.into(),
                passed: false,
                metrics: Vec::new(),
                error: Some(e),
                seconds,
            },
        };
        on_check(&result);
        checks.push(result);
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    VerifyReport {
        profile,
        fault,
        total: checks.len(),
        all_passed: passed == checks.len(),
        passed,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_margin_sign() {
        let ok = exact("a", 1e-9, 1e-8);
        assert!(ok.passed && ok.margin > 0.0);
        let bad = Ctx { scale: 0.1, fault: None }.tol("b", 5e-9, 1e-8);
        assert!(!bad.passed && bad.margin < 0.0);
    }

    #[test]
    fn fault_breaks_gaussian_check() {
        let clean = gaussian(&Ctx { scale: 1.0, fault: None }).unwrap();
        assert!(clean.iter().all(|m| m.passed));
        let broken = gaussian(&Ctx {
            scale: 1.0,
            fault: Some(Fault::GaussianMultiplier),
        })
        .unwrap();
        assert!(broken.iter().any(|m| !m.passed));
    }

    #[test]
    fn boltzmann_check_passes_strict() {
        let m = boltzmann(&Ctx { scale: 0.1, fault: None }).unwrap();
        assert!(m.iter().all(|m| m.passed), "{m:?}");
    }
}
