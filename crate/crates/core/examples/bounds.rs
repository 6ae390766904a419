//! Critical times and constant-regret expressions for the example instance,
//! and how they react to the minimum positive eigenvalue.

use unisoft_lab::agents::{beta, BetaSchedule};
use unisoft_lab::bounds::{constant_regret_expressions, g_worstcase, kappa_bar_eleanor, kappa_bar_lsvi, ProblemConstants};

fn main() -> unisoft_lab::Result<()> {
    let lambda_plus = (13.0 - 3.0 * 17f64.sqrt()) / 32.0;
    let pc = ProblemConstants::new(2, 2, 0.05, 3.0 / 32.0, lambda_plus);
    let kl = kappa_bar_lsvi(&pc)?;
    let ke = kappa_bar_eleanor(&pc)?;
    println!("kappa_bar LSVI-UCB {:.4e} (growth {:.3e}, gap {:.3e}, binding {:?})", kl.value, kl.growth_branch, kl.gap_branch, kl.binding);
    println!("kappa_bar ELEANOR  {:.4e} (binding {:?})", ke.value, ke.binding);
    println!("constant regret, order-level: LSVI-UCB {:.4e}, ELEANOR {:.4e}",
        constant_regret_expressions(&pc, kl.value)?.lsvi,
        constant_regret_expressions(&pc, ke.value)?.eleanor);

    let schedule = BetaSchedule::anytime_lsvi(1.0, pc.delta);
    for k in [1_000u64, 30_000, 1_000_000] {
        let b = beta(&schedule, k, pc.d, pc.horizon)?;
        let g = g_worstcase(k, &pc, b)?;
        println!("k = {k:>8}: beta {b:.3}, g(k) {g:.4e}, g(k)/k {:.4}", g / k as f64);
    }
    for lp in [0.2, 0.02, 0.002] {
        let v = kappa_bar_lsvi(&ProblemConstants { lambda_plus: lp, ..pc })?.value;
        println!("lambda_plus {lp:<6} -> kappa_bar {v:.3e}");
    }
    Ok(())
}
