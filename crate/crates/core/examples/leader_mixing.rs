//! LSVI-LEADER combining representations that are each non-UniSOFT but whose
//! union covers every reachable feature.

use std::path::Path;

use unisoft_lab::agents::BetaSchedule;
use unisoft_lab::harness::{run_experiment, AgentSpec, ExperimentConfig, MdpSource, RepSource};
use unisoft_lab::linalg::DEFAULT_RANK_TOL;
use unisoft_lab::repr::builtin::{builtin_example, APPENDIX_F};
use unisoft_lab::repr::{unisoft_check, unisoft_mixing_check};

fn main() -> unisoft_lab::Result<()> {
    let episodes: u64 = std::env::args().nth(1).map_or(30_000, |a| a.parse().expect("episodes"));
    let ex = builtin_example(APPENDIX_F)?;
    let family: Vec<_> = ex.reps[1..].to_vec();
    for (i, fm) in family.iter().enumerate() {
        println!("phi{} unisoft per stage {:?}", i + 2, unisoft_check(&ex.mdp, fm, DEFAULT_RANK_TOL)?.unisoft_verdicts());
    }
    let mix = unisoft_mixing_check(&ex.mdp, &family, DEFAULT_RANK_TOL)?;
    println!("mixing holds: {}", mix.holds());
    for (h, stage) in mix.witness.iter().enumerate() {
        let cover: Vec<_> = stage.iter().map(|row| row.iter().map(|w| w.map(|j| j + 2)).collect::<Vec<_>>()).collect();
        println!("  stage {} covering representation per (s, a): {:?}", h + 1, cover);
    }

    let reps: Vec<RepSource> = (1..=4).map(|i| RepSource::Builtin(format!("phi{i}"))).collect();
    for agent in [AgentSpec::LsviUcb { rep: 0 }, AgentSpec::LsviLeader { reps: vec![1, 2, 3] }] {
        let mut cfg = ExperimentConfig::new(
            MdpSource::Builtin(APPENDIX_F.into()),
            reps.clone(),
            agent.clone(),
            BetaSchedule { k_total: None, ..BetaSchedule::fixed_k(0.2, 1, 1) },
            episodes,
        );
        cfg.diagnostics_every = 0;
        let res = run_experiment(&cfg.resolve(Path::new("."))?, None, None)?;
        let last = res.summary.last().expect("episodes >= 1");
        let plateaued = res.runs.iter().filter(|r| r.plateau.plateaued).count();
        println!("{agent:?}: mean cum regret {:.2} at K = {}, plateaued {}/{}", last.mean_cum_regret, last.episode, plateaued, res.runs.len());
    }
    Ok(())
}
