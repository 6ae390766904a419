//! LSVI-UCB on a UniSOFT and a non-UniSOFT representation of the same MDP.
//!
//! `cargo run --release --example lsvi_ucb_regret -- [episodes] [seeds]`

use std::path::Path;

use unisoft_lab::agents::BetaSchedule;
use unisoft_lab::harness::{run_experiment, AgentSpec, ExperimentConfig, MdpSource, RepSource};

fn main() -> unisoft_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes: u64 = args.next().map_or(30_000, |a| a.parse().expect("episodes"));
    let seeds: u64 = args.next().map_or(20, |a| a.parse().expect("seeds"));
    for rep in ["phi1", "phi2"] {
        let mut cfg = ExperimentConfig::new(
            MdpSource::Builtin("appendix-f".into()),
            vec![RepSource::Builtin(rep.into())],
            AgentSpec::LsviUcb { rep: 0 },
            BetaSchedule { k_total: None, ..BetaSchedule::fixed_k(0.2, 1, 1) },
            episodes,
        );
        cfg.num_seeds = seeds;
        cfg.diagnostics_every = 0;
        let exp = cfg.resolve(Path::new("."))?;
        let res = run_experiment(&exp, None, None)?;
        println!("LSVI-UCB on {rep}, beta = {:.4}", unisoft_lab::agents::beta(&exp.schedule, 1, 2, 2)?);
        for frac in [0.1, 0.25, 0.5, 1.0] {
            let k = ((episodes as f64 * frac) as usize).max(1);
            let row = &res.summary[k - 1];
            println!("  K = {:>6}: mean cum regret {:>10.3} ± {:.3}", row.episode, row.mean_cum_regret, row.std_cum_regret);
        }
        let plateaued = res.runs.iter().filter(|r| r.plateau.plateaued).count();
        let last_kappa = res.runs.iter().filter_map(|r| r.plateau.kappa_hat).max();
        println!("  plateaued seeds {plateaued}/{seeds}, largest kappa_hat {last_kappa:?}");
    }
    Ok(())
}
