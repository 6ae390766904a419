use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use unisoft_lab::cli::{check_repr, BoundsReport, CheckReport, WitnessReport};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unisoft-lab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixtures() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fixtures");
    let o = bin(&["example", "--name", "appendix-f", "--out", fx.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    (dir, fx)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_lists_subcommands() {
    let o = bin(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for sub in ["example", "check-repr", "run", "bounds", "witness"] {
        assert!(text.contains(sub), "missing {sub}");
    }
}

#[test]
fn example_writes_fixtures() {
    let (_d, fx) = fixtures();
    for f in ["mdp.json", "phi1.json", "phi2.json", "phi3.json", "phi4.json", "model.json"] {
        assert!(fx.join(f).is_file(), "{f}");
    }
    assert_eq!(bin(&["example", "--name", "nope", "--out", p(&fx)]).status.code(), Some(2));
}

#[test]
fn check_repr_reports_and_round_trips() {
    let (_d, fx) = fixtures();
    let o = bin(&["check-repr", p(&fx.join("mdp.json")), p(&fx.join("phi2.json"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("unisoft: [true, false]"));

    let report_path = fx.join("report.json");
    let files = [fx.join("phi1.json"), fx.join("phi2.json")];
    let o = bin(&["check-repr", p(&fx.join("mdp.json")), p(&files[0]), p(&files[1]), "--json", "--report", p(&report_path)]);
    assert_eq!(o.status.code(), Some(0));
    let printed: CheckReport = serde_json::from_str(&stdout(&o)).unwrap();
    let written: CheckReport = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let direct = check_repr(&fx.join("mdp.json"), &files, 1e-8).unwrap();
    assert_eq!(printed, direct);
    assert_eq!(written, direct);
    assert_eq!(direct.representations[1].unisoft, vec![true, false]);
    assert!(direct.mixing.as_ref().unwrap().holds());
}

#[test]
fn witness_command() {
    let (_d, fx) = fixtures();
    let run = |fm: &str| {
        let o = bin(&["witness", p(&fx.join("mdp.json")), p(&fx.join(fm)), "--json"]);
        assert_eq!(o.status.code(), Some(0));
        serde_json::from_str::<WitnessReport>(&stdout(&o)).unwrap()
    };
    assert!(run("phi1.json").witness.is_none());
    let w = run("phi2.json").witness.unwrap();
    assert_eq!(w.stage, 1);
    assert!(w.residual > 0.01);
}

#[test]
fn bounds_command() {
    let o = bin(&["bounds", "--d", "2", "--horizon", "2", "--delta", "0.05", "--delta-min", "0.09375", "--lambda-plus", "0.0197", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let r: BoundsReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(r.kappa_bar_lsvi.value >= r.kappa_bar_eleanor.value);
    assert!(!r.c1_below_floor);

    let o = bin(&["bounds", "--d", "2", "--horizon", "2", "--delta-min", "0.09375", "--lambda-plus", "0.0197", "--c1", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("warning: c1 < 8"));

    let (_d, fx) = fixtures();
    let o = bin(&["bounds", "--mdp", p(&fx.join("mdp.json")), "--fm", p(&fx.join("phi1.json")), "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let r: BoundsReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((r.constants.delta_min - 3.0 / 32.0).abs() < 1e-15);
    assert!((r.constants.lambda_plus - (13.0 - 3.0 * 17f64.sqrt()) / 32.0).abs() < 1e-12);

    assert_eq!(r.unisoft, Some(true));
    let o = bin(&["bounds", "--mdp", p(&fx.join("mdp.json")), "--fm", p(&fx.join("phi2.json"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("not UniSOFT"));

    assert_eq!(bin(&["bounds", "--d", "2"]).status.code(), Some(2));
    let o = bin(&["bounds", "--d", "2", "--horizon", "2", "--delta", "1.5", "--delta-min", "0.1", "--lambda-plus", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_exit_codes_and_outputs() {
    assert_eq!(bin(&["run", "--config", "missing.json"]).status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"mdp": {"builtin": "appendix-f"}, "representations": [{"builtin": "phi1"}],
            "agent": {"lsvi_ucb": {"rep": 0}}, "schedule": {"kind": "experiment_fixed_k", "c_beta": 0.2},
            "episodes": 200, "num_seeds": 3}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = bin(&["run", "--config", p(&cfg), "--out", p(&out), "--seeds", "4,9", "--threads", "2", "--dump-agent-state"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["seed_4.csv", "seed_9.csv", "diagnostics_seed_4.csv", "summary.csv", "run.json", "agent_state_seed_9.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert!(!out.join("seed_0.csv").exists());
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("episode,mean_cum_regret,std_cum_regret\n"));
    assert_eq!(summary.lines().count(), 201);
    let diag = std::fs::read_to_string(out.join("diagnostics_seed_4.csv")).unwrap();
    assert!(diag.starts_with("episode,stage,min_eig_on_span,growth_bound_rhs,max_conf_width,width_envelope,optimism_ok\n"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, std::fs::read_to_string(&cfg).unwrap().replace("\"episodes\": 200", "\"episodes\": 0")).unwrap();
    let o = bin(&["run", "--config", p(&bad), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("episodes"));

    let o = bin(&["run", "--config", p(&cfg), "--out", p(&out), "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(bin(&["run", "--config", p(&bad)]).status.code(), Some(2));
}

#[test]
fn malformed_inputs_are_validation_errors() {
    let (_d, fx) = fixtures();
    let broken = fx.join("broken.json");
    std::fs::write(&broken, r#"{"dims": [2], "phi": [[[[1.0, 0.0]]]]}"#).unwrap();
    let o = bin(&["check-repr", p(&fx.join("mdp.json")), p(&broken)]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["check-repr", p(&fx.join("mdp.json")), p(&fx.join("absent.json"))]);
    assert_eq!(o.status.code(), Some(3));
}
