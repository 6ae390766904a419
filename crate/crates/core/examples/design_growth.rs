//! Theory-facing diagnostics along an LSVI-UCB run: the design matrix on the
//! optimal span against its linear-growth lower bound, and the decay of the
//! largest confidence width.

use std::path::Path;

use unisoft_lab::agents::BetaSchedule;
use unisoft_lab::harness::{run_seed, AgentSpec, ExperimentConfig, GrowthBound, MdpSource, RepSource};

fn main() -> unisoft_lab::Result<()> {
    let mut cfg = ExperimentConfig::new(
        MdpSource::Builtin("appendix-f".into()),
        vec![RepSource::Builtin("phi1".into())],
        AgentSpec::LsviUcb { rep: 0 },
        BetaSchedule { k_total: None, ..BetaSchedule::fixed_k(0.2, 1, 1) },
        30_000,
    );
    cfg.diagnostics_every = 3_000;
    cfg.growth_bound = GrowthBound::Observed;
    let exp = cfg.resolve(Path::new("."))?;
    let ctx = exp.diagnostics.as_ref().expect("diagnostics enabled");
    println!("lambda_h^+ per stage: {:?}", ctx.lambda_plus);
    let run = run_seed(&exp, 0)?;
    println!("{:>7} {:>5} {:>14} {:>14} {:>12} {:>12}", "episode", "stage", "min_eig_span", "growth_rhs", "width", "width*sqrt(k)");
    for r in &run.trace.diagnostics {
        println!(
            "{:>7} {:>5} {:>14.3} {:>14.3} {:>12.5} {:>12.4}",
            r.episode,
            r.stage,
            r.min_eig_on_span.unwrap_or(f64::NAN),
            r.growth_bound_rhs,
            r.max_conf_width,
            r.max_conf_width * (r.episode as f64).sqrt()
        );
    }
    println!("kappa_hat {:?}", run.plateau.kappa_hat);
    Ok(())
}
