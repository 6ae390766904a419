//! Low-rank certification, spectra of the optimal covariance and per-stage
//! UniSOFT verdicts for the four builtin representations.

use unisoft_lab::linalg::DEFAULT_RANK_TOL;
use unisoft_lab::repr::builtin::{builtin_example, APPENDIX_F};
use unisoft_lab::repr::{ibe_monte_carlo, unisoft_check, verify_low_rank, DEFAULT_CERT_TOL};

fn main() -> unisoft_lab::Result<()> {
    let ex = builtin_example(APPENDIX_F)?;
    for (i, (fm, model)) in ex.reps.iter().zip(&ex.models).enumerate() {
        let cert = verify_low_rank(&ex.mdp, fm, Some(model), DEFAULT_CERT_TOL)?;
        let diag = unisoft_check(&ex.mdp, fm, DEFAULT_RANK_TOL)?;
        let ibe = ibe_monte_carlo(&ex.mdp, fm, 200, 2.0, 0)?;
        println!("phi{} dims {:?}", i + 1, fm.dims);
        println!("  certified {} (max residual {:.2e}), IBE estimate {:.2e}", cert.certified, cert.max_residual, ibe);
        println!("  unisoft per stage {:?}", diag.unisoft_verdicts());
        for (h, st) in diag.stages.iter().enumerate() {
            println!(
                "  stage {}: ranks reachable/optimal {}/{}, lambda_plus {:.6}, lambda_min {:.6}",
                h + 1,
                st.reachable_span_rank,
                st.optimal_span_rank,
                st.lambda_plus,
                st.lambda_min
            );
            println!("    optimal covariance {:?}", st.optimal_cov);
        }
    }
    println!("closed forms: (13-3*sqrt(17))/32 = {:.10}, (61-sqrt(2713))/128 = {:.10}",
        (13.0 - 3.0 * 17f64.sqrt()) / 32.0,
        (61.0 - 2713f64.sqrt()) / 128.0);
    Ok(())
}
