//! Finite-horizon tabular MDPs and exact dynamic programming.
//!
//! Stages are 0-based in code (`h = 0..H`). Transitions are stored only for
//! stages that have a successor, so `transition.len() == horizon - 1`; the
//! value of the stage after the last one is identically zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::repr::FeatureMap;

/// Tolerance on probability sums.
pub const PROB_TOL: f64 = 1e-12;
/// Two action values closer than this are treated as tied.
pub const TIE_TOL: f64 = 1e-9;

/// How a sampled reward is drawn around its mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseModel {
    Bernoulli,
    Gaussian { sigma: f64 },
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    /// Mean rewards, `[h][s][a]`.
    pub reward: Vec<Vec<Vec<f64>>>,
    /// `[h][s][a][s']` for `h < horizon - 1`.
    pub transition: Vec<Vec<Vec<Vec<f64>>>>,
    pub init_dist: Vec<f64>,
    pub noise_model: NoiseModel,
}

impl TabularMdp {
    /// Builds an MDP and checks every structural invariant.
    pub fn new(
        reward: Vec<Vec<Vec<f64>>>,
        transition: Vec<Vec<Vec<Vec<f64>>>>,
        init_dist: Vec<f64>,
        noise_model: NoiseModel,
    ) -> Result<Self> {
        let horizon = reward.len();
        let num_states = init_dist.len();
        let num_actions = reward.first().and_then(|r| r.first()).map_or(0, Vec::len);
        let mdp = TabularMdp {
            num_states,
            num_actions,
            horizon,
            reward,
            transition,
            init_dist,
            noise_model,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn validate(&self) -> Result<()> {
        let (s_n, a_n, h_n) = (self.num_states, self.num_actions, self.horizon);
        if s_n == 0 {
            return Err(Error::invalid("num_states", "must be positive"));
        }
        if a_n == 0 {
            return Err(Error::invalid("num_actions", "must be positive"));
        }
        if h_n == 0 {
            return Err(Error::invalid("horizon", "must be positive"));
        }
        if self.reward.len() != h_n {
            return Err(Error::mismatch("reward stages", h_n, self.reward.len()));
        }
        for (h, rh) in self.reward.iter().enumerate() {
            if rh.len() != s_n {
                return Err(Error::mismatch(format!("reward[{h}] states"), s_n, rh.len()));
            }
            for (s, rs) in rh.iter().enumerate() {
                if rs.len() != a_n {
                    return Err(Error::mismatch(format!("reward[{h}][{s}] actions"), a_n, rs.len()));
                }
                for (a, &r) in rs.iter().enumerate() {
                    if !r.is_finite() {
                        return Err(Error::invalid(format!("reward[{h}][{s}][{a}]"), "not finite"));
                    }
                    if self.noise_model == NoiseModel::Bernoulli && !(0.0..=1.0).contains(&r) {
                        return Err(Error::invalid(
                            format!("reward[{h}][{s}][{a}]"),
                            format!("{r} outside [0,1] under Bernoulli noise"),
                        ));
                    }
                }
            }
        }
        if self.transition.len() != h_n - 1 {
            return Err(Error::mismatch("transition stages (horizon - 1)", h_n - 1, self.transition.len()));
        }
        for (h, ph) in self.transition.iter().enumerate() {
            if ph.len() != s_n {
                return Err(Error::mismatch(format!("transition[{h}] states"), s_n, ph.len()));
            }
            for (s, ps) in ph.iter().enumerate() {
                if ps.len() != a_n {
                    return Err(Error::mismatch(format!("transition[{h}][{s}] actions"), a_n, ps.len()));
                }
                for (a, row) in ps.iter().enumerate() {
                    check_distribution(&format!("transition[{h}][{s}][{a}]"), row, s_n)?;
                }
            }
        }
        check_distribution("init_dist", &self.init_dist, s_n)?;
        if let NoiseModel::Gaussian { sigma } = self.noise_model {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::invalid("noise_model.sigma", "must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// `Σ_{s'} p_h(s'|s,a) v(s')`, zero at the last stage.
    pub fn expected_next(&self, h: usize, s: usize, a: usize, v_next: &[f64]) -> f64 {
        match self.transition.get(h) {
            Some(ph) => ph[s][a].iter().zip(v_next).map(|(p, v)| p * v).sum(),
            None => 0.0,
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.num_states, self.num_actions, self.horizon)
    }
}

fn check_distribution(field: &str, row: &[f64], n: usize) -> Result<()> {
    if row.len() != n {
        return Err(Error::mismatch(field, n, row.len()));
    }
    if let Some(p) = row.iter().find(|p| !(**p >= 0.0)) {
        return Err(Error::invalid(field, format!("negative or NaN probability {p}")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::invalid(field, format!("sums to {total}, not 1")));
    }
    Ok(())
}

/// `action[h][s]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicPolicy {
    pub action: Vec<Vec<usize>>,
}

impl DeterministicPolicy {
    pub fn constant(mdp: &TabularMdp, a: usize) -> Self {
        DeterministicPolicy {
            action: vec![vec![a; mdp.num_states]; mdp.horizon],
        }
    }

    pub fn validate(&self, mdp: &TabularMdp) -> Result<()> {
        if self.action.len() != mdp.horizon {
            return Err(Error::mismatch("policy stages", mdp.horizon, self.action.len()));
        }
        for (h, row) in self.action.iter().enumerate() {
            if row.len() != mdp.num_states {
                return Err(Error::mismatch(format!("policy[{h}] states"), mdp.num_states, row.len()));
            }
            if let Some((s, a)) = row.iter().enumerate().find(|(_, &a)| a >= mdp.num_actions) {
                return Err(Error::OutOfRange(format!("policy[{h}][{s}] = {a}")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn act(&self, h: usize, s: usize) -> usize {
        self.action[h][s]
    }
}

/// Action-value and state-value tables; the stage after the last is implicitly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTables {
    pub q: Vec<Vec<Vec<f64>>>,
    pub v: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieWarning {
    pub stage: usize,
    pub state: usize,
    pub actions: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTable {
    pub gap: Vec<Vec<Vec<f64>>>,
    /// Smallest gap above the tie tolerance; `None` when every gap is zero.
    pub delta_min: Option<f64>,
    pub optimal_unique: bool,
    pub ties: Vec<TieWarning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalSolution {
    pub values: ValueTables,
    pub policy: DeterministicPolicy,
    pub gaps: GapTable,
}

/// Index of the largest entry, lowest index on exact ties.
pub fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (a, &q) in row.iter().enumerate().skip(1) {
        if q > row[best] {
            best = a;
        }
    }
    best
}

pub fn backward_induction(mdp: &TabularMdp) -> OptimalSolution {
    let (s_n, a_n, h_n) = mdp.shape();
    let mut q = vec![vec![vec![0.0; a_n]; s_n]; h_n];
    let mut v = vec![vec![0.0; s_n]; h_n];
    let mut action = vec![vec![0; s_n]; h_n];
    let zeros = vec![0.0; s_n];
    for h in (0..h_n).rev() {
        let v_next = if h + 1 < h_n { v[h + 1].clone() } else { zeros.clone() };
        for s in 0..s_n {
            for a in 0..a_n {
                q[h][s][a] = mdp.reward[h][s][a] + mdp.expected_next(h, s, a, &v_next);
            }
            let best = argmax_lowest(&q[h][s]);
            action[h][s] = best;
            v[h][s] = q[h][s][best];
        }
    }

    let mut gap = vec![vec![vec![0.0; a_n]; s_n]; h_n];
    let mut ties = Vec::new();
    let mut delta_min: Option<f64> = None;
    for h in 0..h_n {
        for s in 0..s_n {
            let best = action[h][s];
            for a in 0..a_n {
                let g = v[h][s] - q[h][s][a];
                gap[h][s][a] = g.max(0.0);
                if a == best {
                    continue;
                }
                if g.abs() < TIE_TOL {
                    ties.push(TieWarning {
                        stage: h,
                        state: s,
                        actions: (best, a),
                    });
                } else {
                    delta_min = Some(delta_min.map_or(g, |m| m.min(g)));
                }
            }
        }
    }

    OptimalSolution {
        values: ValueTables { q, v },
        policy: DeterministicPolicy { action },
        gaps: GapTable {
            gap,
            delta_min,
            optimal_unique: ties.is_empty(),
            ties,
        },
    }
}

pub fn policy_evaluation(mdp: &TabularMdp, policy: &DeterministicPolicy) -> ValueTables {
    let (s_n, a_n, h_n) = mdp.shape();
    let mut q = vec![vec![vec![0.0; a_n]; s_n]; h_n];
    let mut v = vec![vec![0.0; s_n]; h_n];
    let zeros = vec![0.0; s_n];
    for h in (0..h_n).rev() {
        let v_next = if h + 1 < h_n { v[h + 1].clone() } else { zeros.clone() };
        for s in 0..s_n {
            for a in 0..a_n {
                q[h][s][a] = mdp.reward[h][s][a] + mdp.expected_next(h, s, a, &v_next);
            }
            v[h][s] = q[h][s][policy.act(h, s)];
        }
    }
    ValueTables { q, v }
}

/// `V^π_1(s)` for one start state, evaluating only the policy's own actions.
pub fn policy_value_from(mdp: &TabularMdp, policy: &DeterministicPolicy, s1: usize) -> f64 {
    let (s_n, _, h_n) = mdp.shape();
    let mut v_next = vec![0.0; s_n];
    let mut v = vec![0.0; s_n];
    for h in (0..h_n).rev() {
        for s in 0..s_n {
            let a = policy.act(h, s);
            v[s] = mdp.reward[h][s][a] + mdp.expected_next(h, s, a, &v_next);
        }
        std::mem::swap(&mut v, &mut v_next);
    }
    v_next[s1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMeasure {
    pub rho: Vec<Vec<f64>>,
    pub rho_sa: Vec<Vec<Vec<f64>>>,
}

pub fn occupancy(mdp: &TabularMdp, policy: &DeterministicPolicy) -> OccupancyMeasure {
    occupancy_from(mdp, policy, &mdp.init_dist)
}

/// Occupancy of `policy` started from an arbitrary initial distribution.
pub fn occupancy_from(mdp: &TabularMdp, policy: &DeterministicPolicy, start: &[f64]) -> OccupancyMeasure {
    let (s_n, a_n, h_n) = mdp.shape();
    let mut rho = Vec::with_capacity(h_n);
    rho.push(start.to_vec());
    for h in 0..h_n.saturating_sub(1) {
        let mut next = vec![0.0; s_n];
        for (s, &mass) in rho[h].iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let row = &mdp.transition[h][s][policy.act(h, s)];
            for (n, p) in next.iter_mut().zip(row) {
                *n += mass * p;
            }
        }
        rho.push(next);
    }
    let rho_sa = rho
        .iter()
        .enumerate()
        .map(|(h, rh)| {
            rh.iter()
                .enumerate()
                .map(|(s, &m)| {
                    let mut row = vec![0.0; a_n];
                    row[policy.act(h, s)] = m;
                    row
                })
                .collect()
        })
        .collect();
    OccupancyMeasure { rho, rho_sa }
}

/// Per stage, the state-action pairs some deterministic policy visits with
/// positive probability.
pub fn reachable_sets(mdp: &TabularMdp) -> Vec<Vec<(usize, usize)>> {
    reachable_states(mdp)
        .iter()
        .map(|states| {
            states
                .iter()
                .enumerate()
                .filter(|(_, &r)| r)
                .flat_map(|(s, _)| (0..mdp.num_actions).map(move |a| (s, a)))
                .collect()
        })
        .collect()
}

/// Per stage, which states can be reached under some action sequence.
pub fn reachable_states(mdp: &TabularMdp) -> Vec<Vec<bool>> {
    let (s_n, a_n, h_n) = mdp.shape();
    let mut out = Vec::with_capacity(h_n);
    out.push(mdp.init_dist.iter().map(|&p| p > 0.0).collect::<Vec<_>>());
    for h in 0..h_n.saturating_sub(1) {
        let mut next = vec![false; s_n];
        for s in (0..s_n).filter(|&s| out[h][s]) {
            for a in 0..a_n {
                for (n, &p) in next.iter_mut().zip(&mdp.transition[h][s][a]) {
                    *n |= p > 0.0;
                }
            }
        }
        out.push(next);
    }
    out
}

/// `Ψ_h^π = Σ_{s,a} ρ_h^π(s,a) φ_h(s,a)` for every stage.
pub fn expected_features(
    mdp: &TabularMdp,
    policy: &DeterministicPolicy,
    fm: &FeatureMap,
) -> Result<Vec<Vec<f64>>> {
    fm.check_against(mdp)?;
    let occ = occupancy(mdp, policy);
    Ok((0..mdp.horizon)
        .map(|h| {
            let mut psi = vec![0.0; fm.dims[h]];
            for s in 0..mdp.num_states {
                let m = occ.rho[h][s];
                if m == 0.0 {
                    continue;
                }
                for (p, f) in psi.iter_mut().zip(&fm.phi[h][s][policy.act(h, s)]) {
                    *p += m * f;
                }
            }
            psi
        })
        .collect())
}

/// `E_π[Σ_h Δ_h(s_h, a_h) | s_1 = s1]`, computed exactly through the occupancy
/// of `policy` started at `s1`.
pub fn gap_decomposition(mdp: &TabularMdp, gaps: &GapTable, policy: &DeterministicPolicy, s1: usize) -> f64 {
    let mut start = vec![0.0; mdp.num_states];
    start[s1] = 1.0;
    let occ = occupancy_from(mdp, policy, &start);
    occ.rho
        .iter()
        .enumerate()
        .map(|(h, rh)| {
            rh.iter()
                .enumerate()
                .map(|(s, &m)| m * gaps.gap[h][s][policy.act(h, s)])
                .sum::<f64>()
        })
        .sum()
}

/// Every deterministic time-inhomogeneous policy, `A^(S·H)` of them.
pub fn all_policies(mdp: &TabularMdp) -> impl Iterator<Item = DeterministicPolicy> + '_ {
    let (s_n, a_n, h_n) = mdp.shape();
    let cells = s_n * h_n;
    let total = (a_n as u128).checked_pow(cells as u32).unwrap_or(u128::MAX);
    (0..total).map(move |mut code| {
        let mut action = vec![vec![0; s_n]; h_n];
        for cell in 0..cells {
            action[cell / s_n][cell % s_n] = (code % a_n as u128) as usize;
            code /= a_n as u128;
        }
        DeterministicPolicy { action }
    })
}
