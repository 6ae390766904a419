//! Empirical feature covariance of trajectories from the optimal policy
//! converges to the optimal covariance; its rank tells whether the optimal
//! features alone explore the span.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unisoft_lab::harness::Simulator;
use unisoft_lab::linalg::DEFAULT_RANK_TOL;
use unisoft_lab::mdp::backward_induction;
use unisoft_lab::repr::builtin::{builtin_example, APPENDIX_F};
use unisoft_lab::repr::{empirical_covariance, optimal_covariance, matrix_rows};

fn main() -> unisoft_lab::Result<()> {
    let ex = builtin_example(APPENDIX_F)?;
    let sol = backward_induction(&ex.mdp);
    let sim = Simulator::new(&ex.mdp)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (i, fm) in ex.reps.iter().take(2).enumerate() {
        let exact = optimal_covariance(&ex.mdp, fm)?;
        for h in 0..ex.mdp.horizon {
            let trajs: Vec<Vec<Vec<f64>>> = (0..20_000)
                .map(|_| {
                    let s1 = sim.initial_state(&mut rng);
                    let t = &sim.episode_from(&sol.policy, s1, &mut rng)[h];
                    vec![fm.phi[h][t.state][t.action].clone()]
                })
                .collect();
            let emp = empirical_covariance(&trajs, fm.dims[h], DEFAULT_RANK_TOL)?;
            println!("phi{} stage {}: empirical rank {}, lambda_min {:.4}", i + 1, h + 1, emp.rank, emp.lambda_min);
            println!("  empirical {:?}\n  exact     {:?}", emp.matrix, matrix_rows(&exact[h]));
        }
    }
    Ok(())
}
