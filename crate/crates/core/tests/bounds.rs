use serde::Deserialize;
use unisoft_lab::bounds::{
    constant_regret_expressions, g_worstcase, kappa_bar_eleanor, kappa_bar_lsvi, Branch, ProblemConstants,
};

#[derive(Deserialize)]
struct Golden {
    d: usize,
    horizon: usize,
    delta: f64,
    delta_min: f64,
    lambda_plus: f64,
    c1: f64,
    c2: f64,
    k: u64,
    beta_k: f64,
    g: String,
    kappa_lsvi: String,
    kappa_lsvi_binding: Branch,
    kappa_eleanor: String,
    const_lsvi: String,
    const_eleanor: String,
}

fn rel(a: f64, b: &str) -> f64 {
    let b: f64 = b.parse().unwrap();
    ((a - b) / b).abs()
}

#[test]
fn matches_extended_precision_oracle() {
    let rows: Vec<Golden> = serde_json::from_str(include_str!("data/bounds_golden.json")).unwrap();
    assert_eq!(rows.len(), 20);
    for r in &rows {
        let pc = ProblemConstants {
            c1: r.c1,
            c2: r.c2,
            ..ProblemConstants::new(r.d, r.horizon, r.delta, r.delta_min, r.lambda_plus)
        };
        assert!(rel(g_worstcase(r.k, &pc, r.beta_k).unwrap(), &r.g) <= 1e-9);
        let kl = kappa_bar_lsvi(&pc).unwrap();
        assert!(rel(kl.value, &r.kappa_lsvi) <= 1e-9);
        assert_eq!(kl.binding, r.kappa_lsvi_binding);
        assert!(rel(kappa_bar_eleanor(&pc).unwrap().value, &r.kappa_eleanor) <= 1e-9);
        let cr = constant_regret_expressions(&pc, kl.value).unwrap();
        assert!(rel(cr.lsvi, &r.const_lsvi) <= 1e-9);
        assert!(rel(cr.eleanor, &r.const_eleanor) <= 1e-9);
    }
}

#[test]
fn kappa_monotone_sweeps() {
    let base = ProblemConstants::new(2, 2, 0.05, 3.0 / 32.0, 0.0197);
    let grid: Vec<f64> = (1..=40).map(|i| i as f64 * 0.025).collect();
    let check = |f: &dyn Fn(f64) -> ProblemConstants, decreasing: bool| {
        let vals: Vec<f64> = grid.iter().map(|&x| kappa_bar_lsvi(&f(x)).unwrap().value).collect();
        for w in vals.windows(2) {
            if decreasing {
                assert!(w[1] <= w[0]);
            } else {
                assert!(w[1] >= w[0]);
            }
        }
    };
    check(&|x| ProblemConstants { lambda_plus: x * 0.1, ..base }, true);
    check(&|x| ProblemConstants { delta_min: x, ..base }, true);
    check(&|x| ProblemConstants { delta: x * 0.9, ..base }, true);
    check(&|x| ProblemConstants { c1: 8.0 + x * 10.0, ..base }, false);
    for d in 1..8 {
        let lo = kappa_bar_lsvi(&ProblemConstants { d, ..base }).unwrap().value;
        let hi = kappa_bar_lsvi(&ProblemConstants { d: d + 1, ..base }).unwrap().value;
        assert!(hi >= lo);
    }
    for h in 1..8 {
        let lo = kappa_bar_lsvi(&ProblemConstants { horizon: h, ..base }).unwrap().value;
        let hi = kappa_bar_lsvi(&ProblemConstants { horizon: h + 1, ..base }).unwrap().value;
        assert!(hi >= lo);
    }
}
