//! Episode simulation, exact regret accounting and seeded multi-run experiments.
//!
//! Each seed owns a `ChaCha8Rng` keyed by `master_seed` with the seed as its
//! stream id, so a run's output depends only on `(config, seed)` and never on
//! scheduling or on the seed's position in the list.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{beta, AgentSnapshot, BetaKind, BetaSchedule, LeaderState, Transition, OPTIMISM_TOL};
use crate::bounds::{g_worstcase, growth_bound_rhs, width_envelope, ProblemConstants};
use crate::error::{Error, Result};
use crate::io;
use crate::linalg::{SpanBasis, DEFAULT_RANK_TOL};
use crate::mdp::{self, DeterministicPolicy, NoiseModel, OptimalSolution, TabularMdp};
use crate::repr::builtin::builtin_example;
use crate::repr::{optimal_covariance, FeatureMap, min_positive_eigenvalue};

pub const DEFAULT_PLATEAU_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdpSource {
    Builtin(String),
    File(PathBuf),
}

/// A builtin representation is named `phi1`..`phi4` and requires a builtin MDP.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepSource {
    Builtin(String),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentSpec {
    LsviUcb { rep: usize },
    LsviLeader { reps: Vec<usize> },
}

impl AgentSpec {
    pub fn rep_indices(&self) -> Vec<usize> {
        match self {
            AgentSpec::LsviUcb { rep } => vec![*rep],
            AgentSpec::LsviLeader { reps } => reps.clone(),
        }
    }
}

/// Which cumulative-regret bound enters the design-growth check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthBound {
    #[default]
    WorstCase,
    Observed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub per_seed: bool,
    #[serde(default)]
    pub dump_agent_state: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: None,
            per_seed: true,
            dump_agent_state: false,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mdp: MdpSource,
    pub representations: Vec<RepSource>,
    pub agent: AgentSpec,
    pub schedule: BetaSchedule,
    pub episodes: u64,
    /// Explicit seed list; when absent, seeds are `0..num_seeds`.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_num_seeds")]
    pub num_seeds: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_lambda")]
    pub lambda_reg: f64,
    #[serde(default = "yes")]
    pub floor_at_zero: bool,
    /// `0` disables diagnostics.
    #[serde(default = "default_diag_every")]
    pub diagnostics_every: u64,
    /// Position within the agent's representation list used for diagnostics.
    #[serde(default)]
    pub diagnostics_rep: usize,
    #[serde(default)]
    pub growth_bound: GrowthBound,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
    /// Defaults to a third of the episodes.
    #[serde(default)]
    pub plateau_window: Option<u64>,
    #[serde(default = "default_plateau_eps")]
    pub plateau_eps: f64,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_num_seeds() -> u64 {
    20
}
fn default_lambda() -> f64 {
    1.0
}
fn default_diag_every() -> u64 {
    100
}
fn default_rank_tol() -> f64 {
    DEFAULT_RANK_TOL
}
fn default_plateau_eps() -> f64 {
    DEFAULT_PLATEAU_EPS
}

impl ExperimentConfig {
    /// Minimal configuration with every optional field at its default.
    pub fn new(mdp: MdpSource, representations: Vec<RepSource>, agent: AgentSpec, schedule: BetaSchedule, episodes: u64) -> Self {
        ExperimentConfig {
            mdp,
            representations,
            agent,
            schedule,
            episodes,
            seeds: None,
            num_seeds: default_num_seeds(),
            master_seed: 0,
            lambda_reg: default_lambda(),
            floor_at_zero: true,
            diagnostics_every: default_diag_every(),
            diagnostics_rep: 0,
            growth_bound: GrowthBound::WorstCase,
            rank_tol: default_rank_tol(),
            plateau_window: None,
            plateau_eps: default_plateau_eps(),
            output: OutputSpec::default(),
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.num_seeds).collect(),
        }
    }

    pub fn plateau_window(&self) -> u64 {
        self.plateau_window.unwrap_or(self.episodes / 3).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes < 1 {
            return Err(Error::invalid("episodes", "must be at least 1"));
        }
        if self.seed_list().is_empty() {
            return Err(Error::invalid("seeds", "must be non-empty"));
        }
        if self.representations.is_empty() {
            return Err(Error::invalid("representations", "must be non-empty"));
        }
        let idx = self.agent.rep_indices();
        if idx.is_empty() {
            return Err(Error::invalid("agent.reps", "must reference at least one representation"));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.representations.len()) {
            return Err(Error::invalid(
                "agent",
                format!("representation index {bad} out of range ({} given)", self.representations.len()),
            ));
        }
        if self.diagnostics_rep >= idx.len() {
            return Err(Error::invalid("diagnostics_rep", "must index the agent's representation list"));
        }
        if !(self.lambda_reg > 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::invalid("lambda_reg", "must be finite and positive"));
        }
        if !(self.rank_tol > 0.0) {
            return Err(Error::invalid("rank_tol", "must be positive"));
        }
        if self.plateau_window == Some(0) {
            return Err(Error::invalid("plateau_window", "must be at least 1"));
        }
        if !(self.plateau_eps >= 0.0) {
            return Err(Error::invalid("plateau_eps", "must be non-negative"));
        }
        self.resolved_schedule().validate()
    }

    /// The schedule with `n_reps` taken from the agent and, for the fixed-K
    /// kind, `k_total` defaulting to `episodes`.
    pub fn resolved_schedule(&self) -> BetaSchedule {
        let mut s = self.schedule;
        s.n_reps = self.agent.rep_indices().len();
        if s.kind == BetaKind::ExperimentFixedK && s.k_total.is_none() {
            s.k_total = Some(self.episodes);
        }
        s
    }

    /// Loads, validates and materializes every referenced object. Relative
    /// file paths are taken relative to `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<Experiment> {
        self.validate()?;
        let builtin = match &self.mdp {
            MdpSource::Builtin(name) => Some(builtin_example(name)?),
            MdpSource::File(_) => None,
        };
        let mdp = match (&self.mdp, &builtin) {
            (MdpSource::Builtin(_), Some(ex)) => ex.mdp.clone(),
            (MdpSource::File(p), _) => io::load_mdp(&base_dir.join(p))?,
            _ => unreachable!(),
        };
        let mut all = Vec::with_capacity(self.representations.len());
        for (i, src) in self.representations.iter().enumerate() {
            let fm = match src {
                RepSource::File(p) => io::load_feature_map(&base_dir.join(p))?,
                RepSource::Builtin(name) => {
                    let ex = builtin.as_ref().ok_or_else(|| {
                        Error::invalid(format!("representations[{i}]"), "builtin representations need a builtin mdp")
                    })?;
                    let pos = name
                        .strip_prefix("phi")
                        .and_then(|n| n.parse::<usize>().ok())
                        .filter(|&n| (1..=ex.reps.len()).contains(&n))
                        .ok_or_else(|| Error::invalid(format!("representations[{i}]"), format!("unknown builtin `{name}`")))?;
                    ex.reps[pos - 1].clone()
                }
            };
            fm.check_against(&mdp)?;
            all.push(fm);
        }
        let reps: Vec<FeatureMap> = self.agent.rep_indices().iter().map(|&i| all[i].clone()).collect();
        Experiment::new(self.clone(), mdp, reps)
    }
}

/// Precomputed quantities for the growth and width diagnostics.
#[derive(Debug, Clone)]
pub struct DiagnosticContext {
    pub rep: usize,
    pub lambda_star: Vec<DMatrix<f64>>,
    pub spans: Vec<SpanBasis>,
    /// `λ_h⁺`, `None` where `Λ*_h` vanishes.
    pub lambda_plus: Vec<Option<f64>>,
    pub reachable: Vec<Vec<(usize, usize)>>,
    pub constants: ProblemConstants,
}

impl DiagnosticContext {
    pub fn new(mdp: &TabularMdp, fm: &FeatureMap, rep: usize, optimal: &OptimalSolution, schedule: &BetaSchedule, lambda_reg: f64, rank_tol: f64) -> Result<Self> {
        let lambda_star = optimal_covariance(mdp, fm)?;
        let spans = lambda_star.iter().map(|m| SpanBasis::from_columns(m, rank_tol)).collect::<Vec<_>>();
        let mut lambda_plus = Vec::with_capacity(lambda_star.len());
        for m in &lambda_star {
            let lp = min_positive_eigenvalue(m, rank_tol)?;
            lambda_plus.push((lp > 0.0).then_some(lp));
        }
        let d = fm.dims.iter().copied().max().unwrap_or(1);
        let overall = lambda_plus.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let constants = ProblemConstants {
            lambda_reg,
            c_beta: schedule.c_beta,
            // No suboptimal action: the Δ_min term vanishes.
            delta_min: optimal.gaps.delta_min.unwrap_or(f64::INFINITY),
            ..ProblemConstants::new(d, mdp.horizon, schedule.delta, 1.0, if overall.is_finite() { overall } else { 1.0 })
        };
        Ok(DiagnosticContext {
            rep,
            lambda_star,
            spans,
            lambda_plus,
            reachable: mdp::reachable_sets(mdp),
            constants,
        })
    }
}

/// A fully materialized experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub mdp: TabularMdp,
    /// The agent's representations, in agent order.
    pub reps: Vec<FeatureMap>,
    pub schedule: BetaSchedule,
    pub optimal: OptimalSolution,
    pub diagnostics: Option<DiagnosticContext>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig, mdp: TabularMdp, reps: Vec<FeatureMap>) -> Result<Self> {
        mdp.validate()?;
        for fm in &reps {
            fm.check_against(&mdp)?;
        }
        let schedule = config.resolved_schedule();
        let optimal = mdp::backward_induction(&mdp);
        let diagnostics = if config.diagnostics_every > 0 {
            let j = config.diagnostics_rep;
            let fm = reps.get(j).ok_or_else(|| Error::invalid("diagnostics_rep", "out of range"))?;
            Some(DiagnosticContext::new(&mdp, fm, j, &optimal, &schedule, config.lambda_reg, config.rank_tol)?)
        } else {
            None
        };
        Ok(Experiment {
            config,
            mdp,
            reps,
            schedule,
            optimal,
            diagnostics,
        })
    }

    pub fn fresh_agent(&self) -> Result<LeaderState> {
        Ok(LeaderState::new(self.reps.clone(), self.mdp.shape(), self.config.lambda_reg)?.with_floor_at_zero(self.config.floor_at_zero))
    }
}

enum RewardSampler {
    Fixed(f64),
    Bernoulli(Bernoulli),
    Gaussian(f64, Normal<f64>),
}

impl RewardSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            RewardSampler::Fixed(r) => *r,
            RewardSampler::Bernoulli(b) => f64::from(u8::from(b.sample(rng))),
            RewardSampler::Gaussian(mean, n) => mean + n.sample(rng),
        }
    }
}

/// Samplers for initial states, rewards and transitions, built once per MDP.
pub struct Simulator<'a> {
    mdp: &'a TabularMdp,
    init: WeightedIndex<f64>,
    rewards: Vec<Vec<Vec<RewardSampler>>>,
    next: Vec<Vec<Vec<WeightedIndex<f64>>>>,
}

impl<'a> Simulator<'a> {
    pub fn new(mdp: &'a TabularMdp) -> Result<Self> {
        mdp.validate()?;
        let weighted = |p: &[f64], what: &str| {
            WeightedIndex::new(p.iter().copied()).map_err(|e| Error::invalid(what.to_string(), e.to_string()))
        };
        let rewards = mdp
            .reward
            .iter()
            .map(|stage| {
                stage
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|&r| match mdp.noise_model {
                                NoiseModel::Deterministic => RewardSampler::Fixed(r),
                                NoiseModel::Bernoulli => RewardSampler::Bernoulli(Bernoulli::new(r).expect("validated mean in [0,1]")),
                                NoiseModel::Gaussian { sigma } => {
                                    RewardSampler::Gaussian(r, Normal::new(0.0, sigma).expect("validated sigma"))
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let next = mdp
            .transition
            .iter()
            .map(|stage| {
                stage
                    .iter()
                    .map(|row| row.iter().map(|p| weighted(p, "transition")).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Simulator {
            mdp,
            init: weighted(&mdp.init_dist, "init_dist")?,
            rewards,
            next,
        })
    }

    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.init.sample(rng)
    }

    /// Executes `policy` for `H` steps from `s1`.
    pub fn episode_from<R: Rng + ?Sized>(&self, policy: &DeterministicPolicy, s1: usize, rng: &mut R) -> Vec<Transition> {
        let h_n = self.mdp.horizon;
        let mut out = Vec::with_capacity(h_n);
        let mut s = s1;
        for h in 0..h_n {
            let a = policy.act(h, s);
            let reward = self.rewards[h][s][a].sample(rng);
            let next_state = (h + 1 < h_n).then(|| self.next[h][s][a].sample(rng));
            out.push(Transition {
                stage: h,
                state: s,
                action: a,
                reward,
                next_state,
            });
            if let Some(sp) = next_state {
                s = sp;
            }
        }
        out
    }
}

/// `s_1 ∼ μ`, then `H` steps of `policy` with sampled rewards and transitions.
pub fn run_episode<R: Rng + ?Sized>(mdp: &TabularMdp, policy: &DeterministicPolicy, rng: &mut R) -> Result<Vec<Transition>> {
    policy.validate(mdp)?;
    let sim = Simulator::new(mdp)?;
    let s1 = sim.initial_state(rng);
    Ok(sim.episode_from(policy, s1, rng))
}

pub fn seed_rng(master_seed: u64, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(seed);
    rng
}

/// One row of the diagnostics CSV; `stage` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub episode: u64,
    pub stage: usize,
    pub min_eig_on_span: Option<f64>,
    pub growth_bound_rhs: f64,
    pub max_conf_width: f64,
    pub width_envelope: Option<f64>,
    pub optimism_ok: bool,
}

impl DiagnosticRow {
    /// A negative right-hand side makes the growth inequality trivially true.
    pub fn growth_vacuous(&self) -> bool {
        self.growth_bound_rhs <= 0.0
    }

    pub fn growth_holds(&self) -> bool {
        match self.min_eig_on_span {
            Some(lhs) => lhs >= self.growth_bound_rhs - 1e-9,
            None => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRecord {
    pub stage: usize,
    /// `λ_min(Uᵀ Λ_h U)`; `None` when `Λ*_h = 0`.
    pub lhs_min_eig_on_span: Option<f64>,
    pub rhs_bound: f64,
    pub holds: bool,
    pub vacuous: bool,
}

/// Compares the design matrix of representation `j`, after `n` episodes of
/// data, with `n λ_h⁺ + λ − g/Δ_min − 8√(n log(2dHn/δ))` on the optimal span.
pub fn design_growth_diagnostic(state: &LeaderState, ctx: &DiagnosticContext, n: u64, g_n: f64) -> Vec<GrowthRecord> {
    (0..ctx.spans.len())
        .map(|h| {
            let lhs = ctx.spans[h].min_eig_restricted(state.design(h, ctx.rep));
            let lp = ctx.lambda_plus[h].unwrap_or(0.0);
            let rhs = growth_bound_rhs(n, lp, g_n, &ctx.constants);
            GrowthRecord {
                stage: h,
                lhs_min_eig_on_span: lhs,
                rhs_bound: rhs,
                holds: lhs.is_none_or(|l| l >= rhs - 1e-9),
                vacuous: rhs <= 0.0,
            }
        })
        .collect()
}

/// Per stage, the largest `β_k ‖φ_h(s,a)‖_{Λ_h⁻¹}` over the given pairs.
pub fn confidence_width_diagnostic(state: &LeaderState, j: usize, schedule: &BetaSchedule, reachable: &[Vec<(usize, usize)>]) -> Result<Vec<f64>> {
    let (_, _, h_n) = state.shape();
    let k = state.episode().max(1);
    (0..h_n)
        .map(|h| {
            let b = beta(schedule, k, state.reps()[j].dims[h], h_n)?;
            let norms = state.inverse_norms(j, h)?;
            Ok(reachable[h].iter().map(|&(s, a)| b * norms[s][a]).fold(0.0, f64::max))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub seed: u64,
    pub initial_state: Vec<usize>,
    pub instant_regret: Vec<f64>,
    pub cum_regret: Vec<f64>,
    /// `V̄_1(s_1^k) ≥ V*_1(s_1^k) − tol`.
    pub optimistic: Vec<bool>,
    pub diagnostics: Vec<DiagnosticRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub episode: u64,
    pub instant_regret: f64,
    pub cum_regret: f64,
}

impl RegretTrace {
    pub fn episodes(&self) -> u64 {
        self.instant_regret.len() as u64
    }

    pub fn final_regret(&self) -> f64 {
        self.cum_regret.last().copied().unwrap_or(0.0)
    }

    pub fn optimism_violation_fraction(&self) -> f64 {
        if self.optimistic.is_empty() {
            return 0.0;
        }
        self.optimistic.iter().filter(|&&o| !o).count() as f64 / self.optimistic.len() as f64
    }

    pub fn rows(&self) -> Vec<TraceRow> {
        self.instant_regret
            .iter()
            .zip(&self.cum_regret)
            .enumerate()
            .map(|(i, (&r, &c))| TraceRow {
                episode: i as u64 + 1,
                instant_regret: r,
                cum_regret: c,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plateau {
    /// Last episode (1-based) with instantaneous regret above `eps`.
    pub kappa_hat: Option<u64>,
    pub plateaued: bool,
}

pub fn plateau_detector(trace: &RegretTrace, window: u64, eps: f64) -> Result<Plateau> {
    if window < 1 {
        return Err(Error::invalid("window", "must be at least 1"));
    }
    let kappa_hat = trace.instant_regret.iter().rposition(|&r| r > eps).map(|i| i as u64 + 1);
    let k = trace.episodes();
    let plateaued = kappa_hat.is_none_or(|kh| kh + window <= k);
    Ok(Plateau { kappa_hat, plateaued })
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    pub trace: RegretTrace,
    pub plateau: Plateau,
    pub final_state: Option<AgentSnapshot>,
}

/// Runs one seed of `exp` to completion.
pub fn run_seed(exp: &Experiment, seed: u64) -> Result<SeedRun> {
    let cfg = &exp.config;
    let mdp = &exp.mdp;
    let sim = Simulator::new(mdp)?;
    let mut rng = seed_rng(cfg.master_seed, seed);
    let mut agent = exp.fresh_agent()?;
    let k_total = cfg.episodes as usize;
    let v_star = &exp.optimal.values.v[0];
    let mut trace = RegretTrace {
        seed,
        initial_state: Vec::with_capacity(k_total),
        instant_regret: Vec::with_capacity(k_total),
        cum_regret: Vec::with_capacity(k_total),
        optimistic: Vec::with_capacity(k_total),
        diagnostics: Vec::new(),
    };
    let mut cum = 0.0;
    for k in 1..=cfg.episodes {
        let plan = agent.plan(&exp.schedule)?;
        if let Some(ctx) = &exp.diagnostics {
            if k == 1 || k % cfg.diagnostics_every == 0 {
                trace.diagnostics.extend(diagnostic_rows(exp, ctx, &agent, &plan.q, k, cum)?);
            }
        }
        let s1 = sim.initial_state(&mut rng);
        let regret = v_star[s1] - mdp::policy_value_from(mdp, &plan.policy, s1);
        cum += regret;
        trace.initial_state.push(s1);
        trace.instant_regret.push(regret);
        trace.cum_regret.push(cum);
        trace.optimistic.push(plan.value(0, s1) >= v_star[s1] - OPTIMISM_TOL);
        for t in sim.episode_from(&plan.policy, s1, &mut rng) {
            agent.update(&t)?;
        }
        agent.advance_episode();
    }
    let plateau = plateau_detector(&trace, cfg.plateau_window(), cfg.plateau_eps)?;
    let final_state = cfg.output.dump_agent_state.then(|| agent.snapshot());
    Ok(SeedRun {
        seed,
        trace,
        plateau,
        final_state,
    })
}

fn diagnostic_rows(exp: &Experiment, ctx: &DiagnosticContext, agent: &LeaderState, q: &[Vec<Vec<f64>>], k: u64, cum: f64) -> Result<Vec<DiagnosticRow>> {
    let n = k - 1;
    let pc = &ctx.constants;
    let h_n = exp.mdp.horizon;
    let g_n = match exp.config.growth_bound {
        _ if n == 0 => 0.0,
        GrowthBound::Observed => cum,
        GrowthBound::WorstCase => g_worstcase(n, pc, beta(&exp.schedule, n, pc.d, h_n)?)?,
    };
    let growth = design_growth_diagnostic(agent, ctx, n, g_n);
    let widths = confidence_width_diagnostic(agent, ctx.rep, &exp.schedule, &ctx.reachable)?;
    let qstar = &exp.optimal.values.q;
    (0..h_n)
        .map(|h| {
            let beta_k = beta(&exp.schedule, k, exp.reps[ctx.rep].dims[h], h_n)?;
            let envelope = ctx.lambda_plus[h].and_then(|lp| width_envelope(n, beta_k, lp, g_n, pc));
            let optimism_ok = q[h]
                .iter()
                .zip(&qstar[h])
                .all(|(row, row_star)| row.iter().zip(row_star).all(|(a, b)| *a >= b - OPTIMISM_TOL));
            Ok(DiagnosticRow {
                episode: k,
                stage: h + 1,
                min_eig_on_span: growth[h].lhs_min_eig_on_span,
                growth_bound_rhs: growth[h].rhs_bound,
                max_conf_width: widths[h],
                width_envelope: envelope,
                optimism_ok,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub episode: u64,
    pub mean_cum_regret: f64,
    pub std_cum_regret: f64,
}

/// Mean and sample standard deviation of cumulative regret across runs, per
/// episode; reduction order follows `runs`.
pub fn summarize(runs: &[SeedRun]) -> Vec<SummaryRow> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let n = runs.len() as f64;
    (0..first.trace.cum_regret.len())
        .map(|i| {
            let mean = runs.iter().map(|r| r.trace.cum_regret[i]).sum::<f64>() / n;
            let var = if runs.len() > 1 {
                runs.iter().map(|r| (r.trace.cum_regret[i] - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            SummaryRow {
                episode: i as u64 + 1,
                mean_cum_regret: mean,
                std_cum_regret: var.sqrt(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    /// In the order of the configured seed list.
    pub runs: Vec<SeedRun>,
    pub summary: Vec<SummaryRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedMetadata {
    pub seed: u64,
    pub final_cum_regret: f64,
    pub kappa_hat: Option<u64>,
    pub plateaued: bool,
    pub optimism_violation_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: ExperimentConfig,
    pub schedule: BetaSchedule,
    pub seeds: Vec<SeedMetadata>,
}

/// Runs every seed on a pool of `threads` workers (`None`: rayon default).
/// With `out_dir`, each seed's CSVs are written as soon as it finishes, then
/// `summary.csv` and `run.json`.
pub fn run_experiment(exp: &Experiment, threads: Option<usize>, out_dir: Option<&Path>) -> Result<ExperimentResult> {
    let seeds = exp.config.seed_list();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder.build().map_err(|e| Error::invalid("threads", e.to_string()))?;
    let runs = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let run = run_seed(exp, seed)?;
                if let Some(dir) = out_dir {
                    write_seed_outputs(exp, &run, dir)?;
                }
                Ok(run)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let summary = summarize(&runs);
    let result = ExperimentResult { runs, summary };
    if let Some(dir) = out_dir {
        io::save_csv(&dir.join("summary.csv"), &result.summary)?;
        io::save_json(&dir.join("run.json"), &metadata(exp, &result))?;
    }
    Ok(result)
}

pub fn metadata(exp: &Experiment, result: &ExperimentResult) -> RunMetadata {
    RunMetadata {
        config: exp.config.clone(),
        schedule: exp.schedule,
        seeds: result
            .runs
            .iter()
            .map(|r| SeedMetadata {
                seed: r.seed,
                final_cum_regret: r.trace.final_regret(),
                kappa_hat: r.plateau.kappa_hat,
                plateaued: r.plateau.plateaued,
                optimism_violation_fraction: r.trace.optimism_violation_fraction(),
            })
            .collect(),
    }
}

fn write_seed_outputs(exp: &Experiment, run: &SeedRun, dir: &Path) -> Result<()> {
    let seed = run.seed;
    if exp.config.output.per_seed {
        io::save_csv(&dir.join(format!("seed_{seed}.csv")), &run.trace.rows())?;
        if !run.trace.diagnostics.is_empty() {
            io::save_csv(&dir.join(format!("diagnostics_seed_{seed}.csv")), &run.trace.diagnostics)?;
        }
    }
    if let Some(snap) = &run.final_state {
        io::save_json(&dir.join(format!("agent_state_seed_{seed}.json")), snap)?;
    }
    Ok(())
}
