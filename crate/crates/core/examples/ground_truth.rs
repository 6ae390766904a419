//! Exact optimal values, gaps and occupancy for the two-stage example MDP,
//! cross-checked against brute-force enumeration of every deterministic policy.

use unisoft_lab::mdp::{all_policies, backward_induction, occupancy, policy_value_from};
use unisoft_lab::repr::builtin::appendix_f_mdp;

fn main() {
    let mdp = appendix_f_mdp();
    let sol = backward_induction(&mdp);
    for h in 0..mdp.horizon {
        println!("stage {}: V* = {:?}, greedy actions = {:?}", h + 1, sol.values.v[h], sol.policy.action[h]);
        for s in 0..mdp.num_states {
            println!("  s{} gaps {:?}", s + 1, sol.gaps.gap[h][s]);
        }
    }
    println!("delta_min = {:?} (3/32 = {})", sol.gaps.delta_min, 3.0 / 32.0);
    for t in &sol.gaps.ties {
        println!("tie at stage {} state {} between actions {:?}", t.stage + 1, t.state + 1, t.actions);
    }

    let occ = occupancy(&mdp, &sol.policy);
    for (h, rho) in occ.rho.iter().enumerate() {
        println!("optimal occupancy at stage {}: {:?}", h + 1, rho);
    }

    let mut best = vec![f64::NEG_INFINITY; mdp.num_states];
    let mut count = 0;
    for p in all_policies(&mdp) {
        count += 1;
        for (s, b) in best.iter_mut().enumerate() {
            *b = b.max(policy_value_from(&mdp, &p, s));
        }
    }
    println!("enumerated {count} policies; best values {best:?}");
}
