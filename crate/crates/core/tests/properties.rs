mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unisoft_lab::agents::{BetaSchedule, LeaderState};
use unisoft_lab::harness::{seed_rng, Simulator};
use unisoft_lab::linalg::DEFAULT_RANK_TOL;
use unisoft_lab::mdp::{backward_induction, gap_decomposition, occupancy_from, policy_value_from};
use unisoft_lab::repr::{find_necessity_witness, unisoft_check, FeatureMap};

fn rotate(fm: &FeatureMap, rng: &mut ChaCha8Rng) -> FeatureMap {
    let phi = fm
        .phi
        .iter()
        .enumerate()
        .map(|(h, stage)| {
            let d = fm.dims[h];
            let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            let q = m.qr().q();
            stage
                .iter()
                .map(|row| row.iter().map(|v| (&q * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec()).collect())
                .collect()
        })
        .collect();
    FeatureMap::new(phi).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unisoft_is_orthogonally_invariant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s_n, a_n, h_n) = (rng.random_range(1..=4), rng.random_range(1..=3), rng.random_range(1..=3));
        let mdp = common::random_mdp(&mut rng, s_n, a_n, h_n);
        let d = rng.random_range(1..=4);
        let fm = common::random_features(&mut rng, &mdp, d);
        let rot = rotate(&fm, &mut rng);
        let a = unisoft_check(&mdp, &fm, DEFAULT_RANK_TOL).unwrap();
        let b = unisoft_check(&mdp, &rot, DEFAULT_RANK_TOL).unwrap();
        prop_assert_eq!(a.unisoft_verdicts(), b.unisoft_verdicts());
        for (x, y) in a.stages.iter().zip(&b.stages) {
            prop_assert_eq!(x.reachable_span_rank, y.reachable_span_rank);
            prop_assert_eq!(x.optimal_span_rank, y.optimal_span_rank);
            prop_assert!((x.lambda_plus - y.lambda_plus).abs() <= 1e-9 * x.lambda_plus.max(1.0));
        }
    }

    #[test]
    fn witness_exists_iff_not_unisoft(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s_n, a_n, h_n) = (rng.random_range(1..=4), rng.random_range(1..=3), rng.random_range(1..=3));
        let mdp = common::random_mdp(&mut rng, s_n, a_n, h_n);
        let fm = if rng.random_bool(0.3) {
            common::tabular_features(&mdp)
        } else {
            let d = rng.random_range(1..=4);
            common::random_features(&mut rng, &mdp, d)
        };
        let diag = unisoft_check(&mdp, &fm, DEFAULT_RANK_TOL).unwrap();
        let w = find_necessity_witness(&mdp, &fm, DEFAULT_RANK_TOL).unwrap();
        prop_assert_eq!(w.is_some(), !diag.is_unisoft());
        if let Some(w) = w {
            prop_assert!(!diag.stages[w.stage].is_unisoft);
            prop_assert!(w.residual > 0.0);
        }
    }

    /// Along an LSVI-UCB run: exact regret matches the gap decomposition, is
    /// non-negative, and vanishes exactly when the greedy policy only takes
    /// zero-gap actions where it can go.
    #[test]
    fn regret_accounting_along_runs(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s_n, a_n, h_n) = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3));
        let mdp = common::random_mdp(&mut rng, s_n, a_n, h_n);
        let fm = common::tabular_features(&mdp);
        let sol = backward_induction(&mdp);
        let sim = Simulator::new(&mdp).unwrap();
        let mut agent = LeaderState::new(vec![fm], mdp.shape(), 1.0).unwrap();
        let schedule = BetaSchedule::fixed_k(0.2, 1, 60);
        let mut ep_rng = seed_rng(0, seed);
        let mut cum = 0.0;
        for _ in 0..60 {
            let plan = agent.plan(&schedule).unwrap();
            let s1 = sim.initial_state(&mut ep_rng);
            let regret = sol.values.v[0][s1] - policy_value_from(&mdp, &plan.policy, s1);
            prop_assert!(regret >= -1e-9);
            prop_assert!((regret - gap_decomposition(&mdp, &sol.gaps, &plan.policy, s1)).abs() <= 1e-10);
            let mut start = vec![0.0; s_n];
            start[s1] = 1.0;
            let occ = occupancy_from(&mdp, &plan.policy, &start);
            let only_optimal = (0..h_n).all(|h| (0..s_n).all(|s| occ.rho[h][s] == 0.0 || sol.gaps.gap[h][s][plan.policy.act(h, s)] <= 1e-12));
            prop_assert_eq!(regret.abs() <= 1e-12, only_optimal);
            let next = cum + regret;
            prop_assert!(next >= cum - 1e-9);
            cum = next;
            for t in sim.episode_from(&plan.policy, s1, &mut ep_rng) {
                agent.update(&t).unwrap();
            }
            agent.advance_episode();
        }
    }
}
