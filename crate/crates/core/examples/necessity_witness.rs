//! A suboptimal policy whose expected features leave the optimal span, for
//! each non-UniSOFT representation.

use unisoft_lab::linalg::DEFAULT_RANK_TOL;
use unisoft_lab::mdp::policy_value_from;
use unisoft_lab::repr::builtin::{builtin_example, APPENDIX_F};
use unisoft_lab::repr::find_necessity_witness;

fn main() -> unisoft_lab::Result<()> {
    let ex = builtin_example(APPENDIX_F)?;
    for (i, fm) in ex.reps.iter().enumerate() {
        match find_necessity_witness(&ex.mdp, fm, DEFAULT_RANK_TOL)? {
            None => println!("phi{}: UniSOFT, no witness", i + 1),
            Some(w) => {
                let values: Vec<f64> = (0..ex.mdp.num_states).map(|s| policy_value_from(&ex.mdp, &w.policy, s)).collect();
                println!("phi{}: stage {} policy {:?}", i + 1, w.stage + 1, w.policy.action);
                println!("  psi {:?} vs psi* {:?}, residual {:.4e}, values {:?}", w.psi, w.psi_star, w.residual, values);
            }
        }
    }
    Ok(())
}
