//! Feature maps and the diagnostics that decide whether a representation
//! supports constant regret: low-rank realizability, Bellman closure,
//! UniSOFT (every reachable feature lies in the span of optimal features
//! on optimally-visited states) and its multi-representation relaxation.

pub mod builtin;

use nalgebra::{DMatrix, DVector, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SpanBasis};
use crate::mdp::{self, DeterministicPolicy, OptimalSolution, TabularMdp};

pub use crate::linalg::min_positive_eigenvalue;

/// Slack on the unit-norm convention for features.
pub const NORM_TOL: f64 = 1e-9;
/// Default certification tolerance for low-rank fits.
pub const DEFAULT_CERT_TOL: f64 = 1e-8;

/// Time-inhomogeneous feature map `φ_h(s,a) ∈ R^{d_h}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub dims: Vec<usize>,
    /// `[h][s][a] -> vector of length dims[h]`.
    pub phi: Vec<Vec<Vec<Vec<f64>>>>,
}

impl FeatureMap {
    pub fn new(phi: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self> {
        let dims = phi
            .iter()
            .map(|stage| stage.first().and_then(|s| s.first()).map_or(0, Vec::len))
            .collect();
        let fm = FeatureMap { dims, phi };
        fm.validate()?;
        Ok(fm)
    }

    pub fn horizon(&self) -> usize {
        self.dims.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.phi.len() != self.dims.len() {
            return Err(Error::mismatch("feature map stages", self.dims.len(), self.phi.len()));
        }
        for (h, stage) in self.phi.iter().enumerate() {
            if self.dims[h] == 0 {
                return Err(Error::invalid(format!("dims[{h}]"), "must be positive"));
            }
            for (s, row) in stage.iter().enumerate() {
                for (a, v) in row.iter().enumerate() {
                    if v.len() != self.dims[h] {
                        return Err(Error::mismatch(format!("phi[{h}][{s}][{a}]"), self.dims[h], v.len()));
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::invalid(format!("phi[{h}][{s}][{a}]"), "not finite"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks the stage/state/action layout against an MDP.
    pub fn check_against(&self, mdp: &TabularMdp) -> Result<()> {
        self.validate()?;
        if self.horizon() != mdp.horizon {
            return Err(Error::mismatch("feature map horizon", mdp.horizon, self.horizon()));
        }
        for (h, stage) in self.phi.iter().enumerate() {
            if stage.len() != mdp.num_states {
                return Err(Error::mismatch(format!("phi[{h}] states"), mdp.num_states, stage.len()));
            }
            for (s, row) in stage.iter().enumerate() {
                if row.len() != mdp.num_actions {
                    return Err(Error::mismatch(format!("phi[{h}][{s}] actions"), mdp.num_actions, row.len()));
                }
            }
        }
        Ok(())
    }

    pub fn vector(&self, h: usize, s: usize, a: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.phi[h][s][a])
    }

    /// Entries `(h, s, a, ‖φ‖)` breaking the `‖φ‖₂ ≤ 1` convention.
    pub fn norm_violations(&self) -> Vec<(usize, usize, usize, f64)> {
        let mut out = Vec::new();
        for (h, stage) in self.phi.iter().enumerate() {
            for (s, row) in stage.iter().enumerate() {
                for (a, v) in row.iter().enumerate() {
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if n > 1.0 + NORM_TOL {
                        out.push((h, s, a, n));
                    }
                }
            }
        }
        out
    }

    /// Stacked `(S·A) × d_h` design of stage `h`, rows ordered by `(s, a)`.
    pub fn stage_matrix(&self, h: usize) -> DMatrix<f64> {
        let rows: Vec<&Vec<f64>> = self.phi[h].iter().flatten().collect();
        DMatrix::from_fn(rows.len(), self.dims[h], |i, j| rows[i][j])
    }
}

/// Parameters `θ_h` and `μ_h(s')` of a low-rank factorization. `mu_vecs` has
/// one entry per stage with a successor (`horizon - 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankModel {
    pub theta: Vec<Vec<f64>>,
    pub mu_vecs: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankReport {
    pub model: LowRankModel,
    pub reward_residual: f64,
    pub transition_residual: f64,
    pub max_residual: f64,
    pub certified: bool,
}

/// Checks (or fits, when `model` is `None`) `r = φᵀθ` and `p(s'|·) = φᵀμ(s')`.
pub fn verify_low_rank(
    mdp: &TabularMdp,
    fm: &FeatureMap,
    model: Option<&LowRankModel>,
    tol: f64,
) -> Result<LowRankReport> {
    fm.check_against(mdp)?;
    let (s_n, a_n, h_n) = mdp.shape();
    let model = match model {
        Some(m) => {
            check_model_shape(mdp, fm, m)?;
            m.clone()
        }
        None => fit_low_rank(mdp, fm),
    };

    let mut reward_residual = 0.0_f64;
    let mut transition_residual = 0.0_f64;
    for h in 0..h_n {
        for s in 0..s_n {
            for a in 0..a_n {
                let phi = &fm.phi[h][s][a];
                reward_residual = reward_residual.max((dot(phi, &model.theta[h]) - mdp.reward[h][s][a]).abs());
                if h + 1 < h_n {
                    for (sp, mu) in model.mu_vecs[h].iter().enumerate() {
                        let err = (dot(phi, mu) - mdp.transition[h][s][a][sp]).abs();
                        transition_residual = transition_residual.max(err);
                    }
                }
            }
        }
    }
    let max_residual = reward_residual.max(transition_residual);
    Ok(LowRankReport {
        model,
        reward_residual,
        transition_residual,
        max_residual,
        certified: max_residual <= tol,
    })
}

fn check_model_shape(mdp: &TabularMdp, fm: &FeatureMap, m: &LowRankModel) -> Result<()> {
    if m.theta.len() != mdp.horizon {
        return Err(Error::mismatch("theta stages", mdp.horizon, m.theta.len()));
    }
    if m.mu_vecs.len() != mdp.horizon - 1 {
        return Err(Error::mismatch("mu_vecs stages", mdp.horizon - 1, m.mu_vecs.len()));
    }
    for h in 0..mdp.horizon {
        if m.theta[h].len() != fm.dims[h] {
            return Err(Error::mismatch(format!("theta[{h}]"), fm.dims[h], m.theta[h].len()));
        }
    }
    for (h, stage) in m.mu_vecs.iter().enumerate() {
        if stage.len() != mdp.num_states {
            return Err(Error::mismatch(format!("mu_vecs[{h}] states"), mdp.num_states, stage.len()));
        }
        if let Some(mu) = stage.iter().find(|mu| mu.len() != fm.dims[h]) {
            return Err(Error::mismatch(format!("mu_vecs[{h}]"), fm.dims[h], mu.len()));
        }
    }
    Ok(())
}

fn fit_low_rank(mdp: &TabularMdp, fm: &FeatureMap) -> LowRankModel {
    let (s_n, a_n, h_n) = mdp.shape();
    let mut theta = Vec::with_capacity(h_n);
    let mut mu_vecs = Vec::with_capacity(h_n.saturating_sub(1));
    for h in 0..h_n {
        let design = fm.stage_matrix(h);
        let svd = SVD::new(design, true, true);
        let lstsq = |target: DVector<f64>| -> Vec<f64> {
            let eps = svd.singular_values.max() * 1e-12;
            svd.solve(&target, eps).map(|w| w.iter().copied().collect()).unwrap_or_else(|_| vec![0.0; fm.dims[h]])
        };
        let rewards = DVector::from_iterator(s_n * a_n, mdp.reward[h].iter().flatten().copied());
        theta.push(lstsq(rewards));
        if h + 1 < h_n {
            let per_next = (0..s_n)
                .map(|sp| {
                    let col = DVector::from_iterator(
                        s_n * a_n,
                        mdp.transition[h].iter().flat_map(|row| row.iter().map(move |p| p[sp])),
                    );
                    lstsq(col)
                })
                .collect();
            mu_vecs.push(per_next);
        }
    }
    LowRankModel { theta, mu_vecs }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `φ*_h(s) = φ_h(s, π*_h(s))`.
pub fn optimal_feature(fm: &FeatureMap, policy: &DeterministicPolicy, h: usize, s: usize) -> DVector<f64> {
    fm.vector(h, s, policy.act(h, s))
}

/// Second moment `Σ_s ρ^π_h(s) φ_h(s,π_h(s)) φ_h(s,π_h(s))ᵀ` per stage.
pub fn policy_covariance(mdp: &TabularMdp, fm: &FeatureMap, policy: &DeterministicPolicy) -> Result<Vec<DMatrix<f64>>> {
    fm.check_against(mdp)?;
    let occ = mdp::occupancy(mdp, policy);
    Ok((0..mdp.horizon)
        .map(|h| {
            let mut m = DMatrix::zeros(fm.dims[h], fm.dims[h]);
            for s in 0..mdp.num_states {
                let w = occ.rho[h][s];
                if w > 0.0 {
                    let phi = optimal_feature(fm, policy, h, s);
                    m += linalg::outer(&phi) * w;
                }
            }
            m
        })
        .collect())
}

/// `Λ*_h` for every stage, under the optimal policy of `mdp`.
pub fn optimal_covariance(mdp: &TabularMdp, fm: &FeatureMap) -> Result<Vec<DMatrix<f64>>> {
    let sol = mdp::backward_induction(mdp);
    policy_covariance(mdp, fm, &sol.policy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDiagnostics {
    pub reachable_span_rank: usize,
    pub optimal_span_rank: usize,
    pub is_unisoft: bool,
    /// Largest distance of a reachable feature to the optimal span, relative to its norm.
    pub max_relative_residual: f64,
    pub optimal_cov: Vec<Vec<f64>>,
    pub lambda_plus: f64,
    pub lambda_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReprDiagnostics {
    pub stages: Vec<StageDiagnostics>,
    pub lambda_plus_overall: f64,
    pub norm_warnings: usize,
}

impl ReprDiagnostics {
    pub fn is_unisoft(&self) -> bool {
        self.stages.iter().all(|s| s.is_unisoft)
    }

    pub fn unisoft_verdicts(&self) -> Vec<bool> {
        self.stages.iter().map(|s| s.is_unisoft).collect()
    }
}

/// Basis of `span{φ*_h(s) : ρ*_h(s) > 0}`.
fn optimal_span(fm: &FeatureMap, sol: &OptimalSolution, rho_star: &[f64], h: usize, rank_tol: f64) -> SpanBasis {
    let feats: Vec<DVector<f64>> = rho_star
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(s, _)| optimal_feature(fm, &sol.policy, h, s))
        .collect();
    SpanBasis::from_vectors(fm.dims[h], &feats, rank_tol)
}

fn in_span(basis: &SpanBasis, v: &DVector<f64>, rank_tol: f64) -> (bool, f64) {
    let norm = v.norm();
    if norm == 0.0 {
        return (true, 0.0);
    }
    let res = basis.residual(v);
    (res <= rank_tol * norm, res / norm)
}

pub fn unisoft_check(mdp: &TabularMdp, fm: &FeatureMap, rank_tol: f64) -> Result<ReprDiagnostics> {
    fm.check_against(mdp)?;
    let sol = mdp::backward_induction(mdp);
    let occ = mdp::occupancy(mdp, &sol.policy);
    let covs = policy_covariance(mdp, fm, &sol.policy)?;
    let reach = mdp::reachable_sets(mdp);

    let mut stages = Vec::with_capacity(mdp.horizon);
    for h in 0..mdp.horizon {
        let basis = optimal_span(fm, &sol, &occ.rho[h], h, rank_tol);
        let reach_feats: Vec<DVector<f64>> = reach[h].iter().map(|&(s, a)| fm.vector(h, s, a)).collect();
        let reachable_span_rank = linalg::span_rank(fm.dims[h], &reach_feats, rank_tol);
        let mut is_unisoft = true;
        let mut worst = 0.0_f64;
        for v in &reach_feats {
            let (ok, rel) = in_span(&basis, v, rank_tol);
            is_unisoft &= ok;
            worst = worst.max(rel);
        }
        let cov = &covs[h];
        stages.push(StageDiagnostics {
            reachable_span_rank,
            optimal_span_rank: basis.rank(),
            is_unisoft,
            max_relative_residual: worst,
            optimal_cov: matrix_rows(cov),
            lambda_plus: min_positive_eigenvalue(cov, rank_tol)?,
            lambda_min: linalg::min_eigenvalue(cov),
        });
    }
    let lambda_plus_overall = stages.iter().map(|s| s.lambda_plus).fold(f64::INFINITY, f64::min);
    Ok(ReprDiagnostics {
        stages,
        lambda_plus_overall,
        norm_warnings: fm.norm_violations().len(),
    })
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    /// `[h][s][a]`: index of the first representation whose optimal span
    /// contains the feature; `None` for unreachable pairs and failures.
    pub witness: Vec<Vec<Vec<Option<usize>>>>,
    /// Reachable `(h, s, a)` not covered by any representation.
    pub failures: Vec<(usize, usize, usize)>,
}

impl MixingReport {
    pub fn holds(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn unisoft_mixing_check(mdp: &TabularMdp, fms: &[FeatureMap], rank_tol: f64) -> Result<MixingReport> {
    if fms.is_empty() {
        return Err(Error::Empty("representation list"));
    }
    for fm in fms {
        fm.check_against(mdp)?;
    }
    let sol = mdp::backward_induction(mdp);
    let occ = mdp::occupancy(mdp, &sol.policy);
    let reach = mdp::reachable_sets(mdp);
    let (s_n, a_n, h_n) = mdp.shape();
    let mut witness = vec![vec![vec![None; a_n]; s_n]; h_n];
    let mut failures = Vec::new();
    for h in 0..h_n {
        let bases: Vec<SpanBasis> = fms.iter().map(|fm| optimal_span(fm, &sol, &occ.rho[h], h, rank_tol)).collect();
        for &(s, a) in &reach[h] {
            let found = fms
                .iter()
                .zip(&bases)
                .position(|(fm, basis)| in_span(basis, &fm.vector(h, s, a), rank_tol).0);
            match found {
                Some(j) => witness[h][s][a] = Some(j),
                None => failures.push((h, s, a)),
            }
        }
    }
    Ok(MixingReport { witness, failures })
}

/// Lifts stage `h` to dimension `2 d_h`: optimal-action features move to the
/// lower block, all others to the upper block, and the model parameters are
/// duplicated so inner products are unchanged.
pub fn make_non_unisoft(
    fm: &FeatureMap,
    model: &LowRankModel,
    mdp: &TabularMdp,
    stage: usize,
) -> Result<(FeatureMap, LowRankModel)> {
    if stage >= mdp.horizon {
        return Err(Error::OutOfRange(format!("stage {stage} with horizon {}", mdp.horizon)));
    }
    let report = verify_low_rank(mdp, fm, Some(model), DEFAULT_CERT_TOL)?;
    if !report.certified {
        return Err(Error::NotCertified(report.max_residual));
    }
    let sol = mdp::backward_induction(mdp);
    let d = fm.dims[stage];

    let mut out = fm.clone();
    out.dims[stage] = 2 * d;
    for (s, row) in out.phi[stage].iter_mut().enumerate() {
        let best = sol.policy.act(stage, s);
        for (a, v) in row.iter_mut().enumerate() {
            let zeros = vec![0.0; d];
            *v = if a == best {
                [zeros, v.clone()].concat()
            } else {
                [v.clone(), zeros].concat()
            };
        }
    }

    let mut lifted = model.clone();
    lifted.theta[stage] = [model.theta[stage].clone(), model.theta[stage].clone()].concat();
    if let Some(mus) = lifted.mu_vecs.get_mut(stage) {
        for mu in mus.iter_mut() {
            *mu = [mu.clone(), mu.clone()].concat();
        }
    }
    Ok((out, lifted))
}

/// Monte-Carlo estimate of the inherent Bellman error of the linear class
/// `{φ_hᵀθ : |φ_hᵀθ| ≤ bound}`: the largest ∞-norm distance between
/// `L_h Q_{h+1}` and its least-squares projection onto the stage-`h`
/// features, over `n_samples` random `Q_{h+1}` per stage.
pub fn ibe_monte_carlo(mdp: &TabularMdp, fm: &FeatureMap, n_samples: usize, bound: f64, seed: u64) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be at least 1"));
    }
    fm.check_against(mdp)?;
    let (s_n, a_n, h_n) = mdp.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bases: Vec<SpanBasis> = (0..h_n)
        .map(|h| SpanBasis::from_columns(&fm.stage_matrix(h), linalg::DEFAULT_RANK_TOL))
        .collect();

    let residual_at = |h: usize, v_next: Option<&[f64]>| -> f64 {
        let target = DVector::from_fn(s_n * a_n, |i, _| {
            let (s, a) = (i / a_n, i % a_n);
            mdp.reward[h][s][a] + v_next.map_or(0.0, |v| mdp.expected_next(h, s, a, v))
        });
        (&target - bases[h].project(&target)).amax()
    };

    // The last stage backs up the zero function.
    let mut worst = residual_at(h_n - 1, None);
    for h in 0..h_n - 1 {
        let next = fm.stage_matrix(h + 1);
        let row_space = SpanBasis::from_columns(&next.transpose(), linalg::DEFAULT_RANK_TOL);
        let r = row_space.rank();
        if r == 0 {
            return Err(Error::DegenerateSpan(h + 1));
        }
        let reduced = &next * &row_space.basis;
        let sigma_min = SVD::new(reduced.clone(), false, false).singular_values.min();
        // {c : ‖Φ U c‖∞ ≤ bound} sits inside the ball of radius √n·bound/σ_min.
        let radius = ((s_n * a_n) as f64).sqrt() * bound / sigma_min;
        for _ in 0..n_samples {
            let q = loop {
                let c = sample_ball(&mut rng, r, radius);
                let q = &reduced * c;
                if q.amax() <= bound {
                    break q;
                }
            };
            let v_next: Vec<f64> = (0..s_n)
                .map(|s| (0..a_n).map(|a| q[s * a_n + a]).fold(f64::NEG_INFINITY, f64::max))
                .collect();
            worst = worst.max(residual_at(h, Some(&v_next)));
        }
    }
    Ok(worst)
}

fn sample_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> DVector<f64> {
    let dir = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = dir.norm().max(f64::MIN_POSITIVE);
    let u: f64 = rng.random();
    dir * (radius * u.powf(1.0 / dim as f64) / norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessityWitness {
    pub stage: usize,
    pub policy: DeterministicPolicy,
    pub psi: Vec<f64>,
    pub psi_star: Vec<f64>,
    /// Distance of `Ψ^π_h − Ψ*_h` to the optimal-feature span.
    pub residual: f64,
}

/// Builds a suboptimal policy whose expected features at a non-UniSOFT stage
/// leave the optimal span. Returns `None` when the map is UniSOFT.
pub fn find_necessity_witness(mdp: &TabularMdp, fm: &FeatureMap, rank_tol: f64) -> Result<Option<NecessityWitness>> {
    fm.check_against(mdp)?;
    let sol = mdp::backward_induction(mdp);
    let occ = mdp::occupancy(mdp, &sol.policy);
    let reach = mdp::reachable_sets(mdp);
    let psi_star_all = mdp::expected_features(mdp, &sol.policy, fm)?;

    for h in 0..mdp.horizon {
        let basis = optimal_span(fm, &sol, &occ.rho[h], h, rank_tol);
        let psi_star = &psi_star_all[h];
        for &(s, a) in &reach[h] {
            if in_span(&basis, &fm.vector(h, s, a), rank_tol).0 {
                continue;
            }
            let mut policy = sol.policy.clone();
            if occ.rho[h][s] <= 0.0 {
                // Steer the earlier stages toward s; π* is kept from stage h on.
                let prefix = reach_policy(mdp, h, s);
                policy.action[..h].clone_from_slice(&prefix.action[..h]);
            }
            policy.action[h][s] = a;
            let psi = mdp::expected_features(mdp, &policy, fm)?.swap_remove(h);
            let diff = DVector::from_iterator(psi.len(), psi.iter().zip(psi_star).map(|(x, y)| x - y));
            let residual = basis.residual(&diff);
            if residual > rank_tol {
                return Ok(Some(NecessityWitness {
                    stage: h,
                    policy,
                    psi,
                    psi_star: psi_star.clone(),
                    residual,
                }));
            }
        }
    }
    Ok(None)
}

/// Deterministic policy maximizing the probability of being in `target` at `stage`.
fn reach_policy(mdp: &TabularMdp, stage: usize, target: usize) -> DeterministicPolicy {
    let (s_n, a_n, h_n) = mdp.shape();
    let mut action = vec![vec![0; s_n]; h_n];
    let mut v: Vec<f64> = (0..s_n).map(|s| if s == target { 1.0 } else { 0.0 }).collect();
    for h in (0..stage).rev() {
        let mut next_v = vec![0.0; s_n];
        for s in 0..s_n {
            let q: Vec<f64> = (0..a_n).map(|a| mdp.expected_next(h, s, a, &v)).collect();
            let best = mdp::argmax_lowest(&q);
            action[h][s] = best;
            next_v[s] = q[best];
        }
        v = next_v;
    }
    DeterministicPolicy { action }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCovariance {
    pub matrix: Vec<Vec<f64>>,
    pub rank: usize,
    pub lambda_min: f64,
}

/// `Λ_m = (1/m) Σ_i Σ_t φ_{i,t} φ_{i,t}ᵀ` over `m` trajectories of feature vectors.
pub fn empirical_covariance(trajectories: &[Vec<Vec<f64>>], d: usize, rank_tol: f64) -> Result<EmpiricalCovariance> {
    if trajectories.is_empty() {
        return Err(Error::Empty("trajectory list"));
    }
    let mut m = DMatrix::<f64>::zeros(d, d);
    for (i, traj) in trajectories.iter().enumerate() {
        for (t, phi) in traj.iter().enumerate() {
            if phi.len() != d {
                return Err(Error::mismatch(format!("trajectory {i} step {t}"), d, phi.len()));
            }
            let v = DVector::from_column_slice(phi);
            m += linalg::outer(&v);
        }
    }
    m /= trajectories.len() as f64;
    Ok(EmpiricalCovariance {
        rank: linalg::psd_rank(&m, rank_tol),
        lambda_min: linalg::min_eigenvalue(&m),
        matrix: matrix_rows(&m),
    })
}
