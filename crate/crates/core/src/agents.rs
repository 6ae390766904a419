//! Optimistic least-squares value iteration over one (LSVI-UCB) or several
//! (LSVI-LEADER) representations.
//!
//! Data is kept as tabular sufficient statistics: reward sums, visit counts
//! and next-state counts per `(h, s, a)`. Because the regression target of a
//! planning pass depends on the current optimistic values `V̄_{h+1}`, the
//! target is assembled from these aggregates instead of replaying every
//! past transition, which keeps one planning pass independent of the
//! episode count:
//!
//! ```text
//! b_h(j) = Σ_{s,a} φ_h^j(s,a) · ( R_h(s,a) + Σ_{s'} N_h(s,a,s') V̄_{h+1}(s') )
//! w_h(j) = Λ_h(j)^{-1} b_h(j)
//! Q̄_h(s,a) = min{ H, min_j φ_h^j(s,a)ᵀ w_h(j) + β_h(j) ‖φ_h^j(s,a)‖_{Λ_h(j)^{-1}} }
//! ```

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mdp::{argmax_lowest, DeterministicPolicy, ValueTables};
use crate::repr::{matrix_rows, FeatureMap};

pub use crate::linalg::ridge_solve;

/// Slack used when comparing optimistic and true values.
pub const OPTIMISM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaKind {
    /// `c·d·H·√(log(2dHk/δ))`
    AnytimeLsvi,
    /// `c·d·H·√(N·log(2dNHk/δ))`
    AnytimeLeader,
    /// `c·d·H·√(log(dK))`, or `c·d·H·√(N·log(NdK))` when `N > 1`.
    ExperimentFixedK,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule {
    pub kind: BetaKind,
    pub c_beta: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Number of representations `N`.
    #[serde(default = "default_n")]
    pub n_reps: usize,
    /// Total episodes, required by [`BetaKind::ExperimentFixedK`].
    #[serde(default)]
    pub k_total: Option<u64>,
}

fn default_delta() -> f64 {
    0.05
}

fn default_n() -> usize {
    1
}

impl BetaSchedule {
    pub fn fixed_k(c_beta: f64, n_reps: usize, k_total: u64) -> Self {
        BetaSchedule {
            kind: BetaKind::ExperimentFixedK,
            c_beta,
            delta: default_delta(),
            n_reps,
            k_total: Some(k_total),
        }
    }

    pub fn anytime_lsvi(c_beta: f64, delta: f64) -> Self {
        BetaSchedule {
            kind: BetaKind::AnytimeLsvi,
            c_beta,
            delta,
            n_reps: 1,
            k_total: None,
        }
    }

    pub fn anytime_leader(c_beta: f64, delta: f64, n_reps: usize) -> Self {
        BetaSchedule {
            kind: BetaKind::AnytimeLeader,
            c_beta,
            delta,
            n_reps,
            k_total: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_beta >= 0.0 && self.c_beta.is_finite()) {
            return Err(Error::invalid("schedule.c_beta", "must be finite and non-negative"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("schedule.delta", "must lie in (0, 1)"));
        }
        if self.n_reps == 0 {
            return Err(Error::invalid("schedule.n_reps", "must be at least 1"));
        }
        if self.kind == BetaKind::ExperimentFixedK && !matches!(self.k_total, Some(k) if k >= 1) {
            return Err(Error::invalid("schedule.k_total", "required (≥ 1) for experiment_fixed_k"));
        }
        Ok(())
    }
}

/// Confidence multiplier for episode `k` (1-based) at a stage of dimension `d`.
pub fn beta(schedule: &BetaSchedule, k: u64, d: usize, horizon: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::invalid("k", "episode index starts at 1"));
    }
    schedule.validate()?;
    let (c, dh) = (schedule.c_beta, (d * horizon) as f64);
    let (d, h, k, n) = (d as f64, horizon as f64, k as f64, schedule.n_reps as f64);
    let delta = schedule.delta;
    let inner = match schedule.kind {
        BetaKind::AnytimeLsvi => (2.0 * d * h * k / delta).ln(),
        BetaKind::AnytimeLeader => n * (2.0 * d * n * h * k / delta).ln(),
        BetaKind::ExperimentFixedK => {
            let big_k = schedule.k_total.unwrap_or(1) as f64;
            if schedule.n_reps == 1 {
                (d * big_k).ln()
            } else {
                n * (n * d * big_k).ln()
            }
        }
    };
    Ok(c * dh * inner.max(0.0).sqrt())
}

/// One observed step. `next_state` is `None` at the last stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub stage: usize,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: Option<usize>,
}

/// Optimistic action values of one planning pass and their greedy policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub episode: u64,
    pub q: Vec<Vec<Vec<f64>>>,
    pub policy: DeterministicPolicy,
}

impl Plan {
    pub fn value(&self, h: usize, s: usize) -> f64 {
        self.q[h][s][self.policy.act(h, s)]
    }
}

/// Learner state shared by LSVI-UCB (one representation) and LSVI-LEADER.
#[derive(Debug, Clone)]
pub struct LeaderState {
    reps: Vec<FeatureMap>,
    /// `[j][h][s][a]`
    feats: Vec<Vec<Vec<Vec<DVector<f64>>>>>,
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    lambda_reg: f64,
    /// `[h][j]`
    design: Vec<Vec<DMatrix<f64>>>,
    reward_sum: Vec<Vec<Vec<f64>>>,
    visit_count: Vec<Vec<Vec<u64>>>,
    /// `[h][s][a][s']` for stages with a successor.
    transition_count: Vec<Vec<Vec<Vec<u64>>>>,
    episode: u64,
    floor_at_zero: bool,
}

impl LeaderState {
    pub fn new(reps: Vec<FeatureMap>, shape: (usize, usize, usize), lambda_reg: f64) -> Result<Self> {
        let (s_n, a_n, h_n) = shape;
        if reps.is_empty() {
            return Err(Error::Empty("representation list"));
        }
        if !(lambda_reg > 0.0) {
            return Err(Error::invalid("lambda_reg", "must be positive"));
        }
        for (j, fm) in reps.iter().enumerate() {
            fm.validate()?;
            if fm.horizon() != h_n {
                return Err(Error::mismatch(format!("representation {j} horizon"), h_n, fm.horizon()));
            }
            for (h, stage) in fm.phi.iter().enumerate() {
                if stage.len() != s_n || stage.iter().any(|r| r.len() != a_n) {
                    return Err(Error::invalid(
                        format!("representation {j} stage {h}"),
                        format!("expected {s_n} states × {a_n} actions"),
                    ));
                }
            }
        }
        let feats = reps
            .iter()
            .map(|fm| {
                (0..h_n)
                    .map(|h| (0..s_n).map(|s| (0..a_n).map(|a| fm.vector(h, s, a)).collect()).collect())
                    .collect()
            })
            .collect();
        let design = (0..h_n)
            .map(|h| {
                reps.iter()
                    .map(|fm| DMatrix::identity(fm.dims[h], fm.dims[h]) * lambda_reg)
                    .collect()
            })
            .collect();
        Ok(LeaderState {
            reps,
            feats,
            num_states: s_n,
            num_actions: a_n,
            horizon: h_n,
            lambda_reg,
            design,
            reward_sum: vec![vec![vec![0.0; a_n]; s_n]; h_n],
            visit_count: vec![vec![vec![0; a_n]; s_n]; h_n],
            transition_count: vec![vec![vec![vec![0; s_n]; a_n]; s_n]; h_n.saturating_sub(1)],
            episode: 1,
            floor_at_zero: true,
        })
    }

    /// Disables the `Q̄ ≥ 0` floor, leaving only the `min{H, ·}` clip.
    pub fn with_floor_at_zero(mut self, floor: bool) -> Self {
        self.floor_at_zero = floor;
        self
    }

    pub fn reps(&self) -> &[FeatureMap] {
        &self.reps
    }

    pub fn num_reps(&self) -> usize {
        self.reps.len()
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.num_states, self.num_actions, self.horizon)
    }

    pub fn lambda_reg(&self) -> f64 {
        self.lambda_reg
    }

    /// Index `k` of the episode about to be planned (starts at 1).
    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn advance_episode(&mut self) {
        self.episode += 1;
    }

    pub fn design(&self, h: usize, j: usize) -> &DMatrix<f64> {
        &self.design[h][j]
    }

    pub fn feature(&self, j: usize, h: usize, s: usize, a: usize) -> &DVector<f64> {
        &self.feats[j][h][s][a]
    }

    pub fn visit_count(&self, h: usize, s: usize, a: usize) -> u64 {
        self.visit_count[h][s][a]
    }

    pub fn reward_sum(&self, h: usize, s: usize, a: usize) -> f64 {
        self.reward_sum[h][s][a]
    }

    pub fn transition_count(&self, h: usize, s: usize, a: usize, sp: usize) -> u64 {
        self.transition_count[h][s][a][sp]
    }

    /// Adds one observed step to the statistics and to every design matrix.
    pub fn update(&mut self, t: &Transition) -> Result<()> {
        let (h, s, a) = (t.stage, t.state, t.action);
        if h >= self.horizon || s >= self.num_states || a >= self.num_actions {
            return Err(Error::OutOfRange(format!("transition (h={h}, s={s}, a={a})")));
        }
        match (t.next_state, h + 1 < self.horizon) {
            (Some(sp), true) if sp < self.num_states => self.transition_count[h][s][a][sp] += 1,
            (None, false) => {}
            _ => {
                return Err(Error::OutOfRange(format!(
                    "next state {:?} at stage {h} of {}",
                    t.next_state, self.horizon
                )))
            }
        }
        self.visit_count[h][s][a] += 1;
        self.reward_sum[h][s][a] += t.reward;
        for (j, m) in self.design[h].iter_mut().enumerate() {
            let phi = &self.feats[j][h][s][a];
            m.ger(1.0, phi, phi, 1.0);
        }
        Ok(())
    }

    /// `b_h(j)` from the aggregated statistics.
    pub fn regression_target(&self, j: usize, h: usize, v_next: &[f64]) -> DVector<f64> {
        let d = self.reps[j].dims[h];
        let mut b = DVector::zeros(d);
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                if self.visit_count[h][s][a] == 0 {
                    continue;
                }
                let mut y = self.reward_sum[h][s][a];
                if let Some(counts) = self.transition_count.get(h) {
                    y += counts[s][a].iter().zip(v_next).map(|(&n, v)| n as f64 * v).sum::<f64>();
                }
                b.axpy(y, &self.feats[j][h][s][a], 1.0);
            }
        }
        b
    }

    fn factor(&self, h: usize, j: usize) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.design[h][j].clone()).ok_or(Error::NotPositiveDefinite)
    }

    /// `‖φ_h^j(s,a)‖_{Λ_h(j)^{-1}}` for every `(s, a)` of a stage.
    pub fn inverse_norms(&self, j: usize, h: usize) -> Result<Vec<Vec<f64>>> {
        let chol = self.factor(h, j)?;
        Ok(self.feats[j][h]
            .iter()
            .map(|row| row.iter().map(|phi| inverse_norm(&chol, phi)).collect())
            .collect())
    }

    fn clip(&self, x: f64) -> f64 {
        let top = x.min(self.horizon as f64);
        if self.floor_at_zero {
            top.max(0.0)
        } else {
            top
        }
    }

    /// Backward optimistic planning for the current episode.
    pub fn plan(&self, schedule: &BetaSchedule) -> Result<Plan> {
        let (s_n, a_n, h_n) = self.shape();
        let k = self.episode;
        let mut q = vec![vec![vec![0.0; a_n]; s_n]; h_n];
        let mut action = vec![vec![0; s_n]; h_n];
        let mut v_next = vec![0.0; s_n];
        for h in (0..h_n).rev() {
            for row in q[h].iter_mut() {
                row.fill(f64::INFINITY);
            }
            for j in 0..self.reps.len() {
                let chol = self.factor(h, j)?;
                let w = chol.solve(&self.regression_target(j, h, &v_next));
                let b = beta(schedule, k, self.reps[j].dims[h], h_n)?;
                for s in 0..s_n {
                    for a in 0..a_n {
                        let phi = &self.feats[j][h][s][a];
                        let est = phi.dot(&w) + b * inverse_norm(&chol, phi);
                        let cell = &mut q[h][s][a];
                        *cell = cell.min(est);
                    }
                }
            }
            for s in 0..s_n {
                for a in 0..a_n {
                    q[h][s][a] = self.clip(q[h][s][a]);
                }
                let best = argmax_lowest(&q[h][s]);
                action[h][s] = best;
                v_next[s] = q[h][s][best];
            }
        }
        Ok(Plan {
            episode: k,
            q,
            policy: DeterministicPolicy { action },
        })
    }

    pub fn snapshot(&self) -> AgentSnapshot {
        AgentSnapshot {
            episode: self.episode,
            lambda_reg: self.lambda_reg,
            design: self
                .design
                .iter()
                .map(|per_rep| per_rep.iter().map(matrix_rows).collect())
                .collect(),
            reward_sum: self.reward_sum.clone(),
            visit_count: self.visit_count.clone(),
            transition_count: self.transition_count.clone(),
        }
    }
}

fn inverse_norm(chol: &Cholesky<f64, Dyn>, phi: &DVector<f64>) -> f64 {
    phi.dot(&chol.solve(phi)).max(0.0).sqrt()
}

/// Serializable view of a [`LeaderState`] for debugging and regression fixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub episode: u64,
    pub lambda_reg: f64,
    /// `[h][j]` design matrices as row lists.
    pub design: Vec<Vec<Vec<Vec<f64>>>>,
    pub reward_sum: Vec<Vec<Vec<f64>>>,
    pub visit_count: Vec<Vec<Vec<u64>>>,
    pub transition_count: Vec<Vec<Vec<Vec<u64>>>>,
}

pub fn leader_plan(state: &LeaderState, schedule: &BetaSchedule) -> Result<Plan> {
    state.plan(schedule)
}

pub fn leader_update(state: &mut LeaderState, transition: &Transition) -> Result<()> {
    state.update(transition)
}

/// Single-representation LSVI-UCB planning written out directly, without the
/// minimum over representations. Used as a reference for [`leader_plan`].
pub fn lsvi_ucb_plan(state: &LeaderState, j: usize, schedule: &BetaSchedule) -> Result<Plan> {
    let (s_n, a_n, h_n) = state.shape();
    let k = state.episode();
    let mut q = vec![vec![vec![0.0; a_n]; s_n]; h_n];
    let mut action = vec![vec![0; s_n]; h_n];
    let mut v_next = vec![0.0; s_n];
    for h in (0..h_n).rev() {
        let chol = state.factor(h, j)?;
        let w = chol.solve(&state.regression_target(j, h, &v_next));
        let b = beta(schedule, k, state.reps[j].dims[h], h_n)?;
        for s in 0..s_n {
            for a in 0..a_n {
                let phi = state.feature(j, h, s, a);
                q[h][s][a] = state.clip(phi.dot(&w) + b * inverse_norm(&chol, phi));
            }
            let best = argmax_lowest(&q[h][s]);
            action[h][s] = best;
            v_next[s] = q[h][s][best];
        }
    }
    Ok(Plan {
        episode: k,
        q,
        policy: DeterministicPolicy { action },
    })
}

/// `Σ_i φ(s_i,a_i)(r_i + V̄(s'_i))` by replaying individual stage-`h` samples.
pub fn per_sample_target(fm: &FeatureMap, h: usize, samples: &[Transition], v_next: &[f64]) -> DVector<f64> {
    let mut b = DVector::zeros(fm.dims[h]);
    for t in samples.iter().filter(|t| t.stage == h) {
        let y = t.reward + t.next_state.map_or(0.0, |sp| v_next[sp]);
        b.axpy(y, &fm.vector(h, t.state, t.action), 1.0);
    }
    b
}

/// `λI + Σ_i φ(s_i,a_i)φ(s_i,a_i)ᵀ` by replaying individual stage-`h` samples.
pub fn per_sample_design(fm: &FeatureMap, h: usize, samples: &[Transition], lambda_reg: f64) -> DMatrix<f64> {
    let d = fm.dims[h];
    let mut m = DMatrix::identity(d, d) * lambda_reg;
    for t in samples.iter().filter(|t| t.stage == h) {
        m += linalg::outer(&fm.vector(h, t.state, t.action));
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimismAudit {
    /// Share of start states (positive initial mass) with `V̄_1 ≥ V*_1 − tol`.
    pub fraction: f64,
    /// `(h, s, a)` with `Q̄ < Q* − tol`.
    pub violations: Vec<(usize, usize, usize)>,
}

pub fn optimism_audit(plan_q: &[Vec<Vec<f64>>], optimal: &ValueTables, init_dist: &[f64]) -> Result<OptimismAudit> {
    if plan_q.len() != optimal.q.len() {
        return Err(Error::mismatch("plan stages", optimal.q.len(), plan_q.len()));
    }
    let mut violations = Vec::new();
    for (h, (ph, oh)) in plan_q.iter().zip(&optimal.q).enumerate() {
        if ph.len() != oh.len() {
            return Err(Error::mismatch(format!("plan stage {h} states"), oh.len(), ph.len()));
        }
        for (s, (ps, os)) in ph.iter().zip(oh).enumerate() {
            for (a, (p, o)) in ps.iter().zip(os).enumerate() {
                if *p < o - OPTIMISM_TOL {
                    violations.push((h, s, a));
                }
            }
        }
    }
    let starts: Vec<usize> = (0..init_dist.len()).filter(|&s| init_dist[s] > 0.0).collect();
    let ok = starts
        .iter()
        .filter(|&&s| {
            let v_bar = plan_q[0][s].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            v_bar >= optimal.v[0][s] - OPTIMISM_TOL
        })
        .count();
    let fraction = if starts.is_empty() { 1.0 } else { ok as f64 / starts.len() as f64 };
    Ok(OptimismAudit { fraction, violations })
}
