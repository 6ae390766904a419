//! `unisoft-lab` command-line interface.
//!
//! Exit codes: 0 success, 2 validation failure (including bad arguments),
//! 3 I/O failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bounds::{self, ConstantRegret, KappaBar, ProblemConstants};
use crate::error::{Error, Result};
use crate::harness::{self, ExperimentConfig};
use crate::linalg::DEFAULT_RANK_TOL;
use crate::mdp;
use crate::repr::builtin::builtin_example;
use crate::repr::{self, LowRankReport, MixingReport, NecessityWitness, ReprDiagnostics};
use crate::io;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "unisoft-lab", version, about = "Representation diagnostics and optimistic LSVI experiments for finite-horizon MDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a builtin MDP, its feature maps and model as JSON fixtures.
    Example {
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Certify feature maps and report per-stage UniSOFT verdicts and spectra.
    CheckRepr {
        mdp: PathBuf,
        #[arg(required = true)]
        feature_maps: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        rank_tol: f64,
        #[command(flatten)]
        out: ReportArgs,
    },
    /// Run a seeded regret experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seed list, replacing the config's seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Also write each seed's final design matrices and aggregates.
        #[arg(long)]
        dump_agent_state: bool,
    },
    /// Evaluate critical times and constant-regret expressions.
    Bounds(BoundsArgs),
    /// Search for a suboptimal policy certifying that a map is not UniSOFT.
    Witness {
        mdp: PathBuf,
        feature_map: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        rank_tol: f64,
        #[command(flatten)]
        out: ReportArgs,
    },
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Print the JSON report instead of the human-readable one.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON report to this path.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, required_unless_present = "mdp")]
    pub d: Option<usize>,
    #[arg(long, required_unless_present = "mdp")]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, required_unless_present = "mdp")]
    pub delta_min: Option<f64>,
    #[arg(long, required_unless_present = "mdp")]
    pub lambda_plus: Option<f64>,
    #[arg(long, default_value_t = 8.0)]
    pub c1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_reg: f64,
    /// Take `d`, `H`, `Δ_min` and `λ₊` from this MDP and `--fm`.
    #[arg(long, requires = "fm", conflicts_with_all = ["d", "horizon", "delta_min", "lambda_plus"])]
    pub mdp: Option<PathBuf>,
    #[arg(long, requires = "mdp")]
    pub fm: Option<PathBuf>,
    /// Also evaluate the worst-case bound g(k) at this episode, with `--beta`.
    #[arg(long, requires = "beta")]
    pub k: Option<u64>,
    #[arg(long, requires = "k")]
    pub beta: Option<f64>,
    #[command(flatten)]
    pub out: ReportArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepReport {
    pub path: PathBuf,
    pub dims: Vec<usize>,
    pub low_rank: LowRankReport,
    pub unisoft: Vec<bool>,
    pub diagnostics: ReprDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub rank_tol: f64,
    pub representations: Vec<RepReport>,
    /// Present when several maps are checked together.
    pub mixing: Option<MixingReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub constants: ProblemConstants,
    pub c1_below_floor: bool,
    pub kappa_bar_lsvi: KappaBar,
    pub kappa_bar_eleanor: KappaBar,
    /// Order-level: unit hidden constants. `lsvi` uses the LSVI-UCB critical
    /// time, `eleanor` the ELEANOR one.
    pub constant_regret: ConstantRegret,
    pub g_at_k: Option<f64>,
    /// With `--mdp/--fm`: whether the map is UniSOFT, without which the
    /// constant-regret results do not apply.
    pub unisoft: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub unisoft: Vec<bool>,
    pub witness: Option<NecessityWitness>,
}

pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    dispatch(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

/// Parses `argv` (including the program name) and runs the command.
pub fn dispatch<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_IO
            }
        }
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, args: &ReportArgs, report: &T, human: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    if let Some(path) = &args.report {
        io::save_json(path, report)?;
    }
    let res = if args.json {
        serde_json::to_writer_pretty(&mut *out, report)
            .map_err(std::io::Error::other)
            .and_then(|()| writeln!(out))
    } else {
        human(out)
    };
    res.map_err(stdout_err)
}

fn stdout_err(source: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source,
    }
}

pub fn execute(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Example { name, out: dir } => {
            let ex = builtin_example(&name)?;
            io::save_json(&dir.join("mdp.json"), &ex.mdp)?;
            for (i, fm) in ex.reps.iter().enumerate() {
                io::save_json(&dir.join(format!("phi{}.json", i + 1)), fm)?;
            }
            io::save_json(&dir.join("model.json"), ex.model())?;
            writeln!(out, "wrote {name} fixtures to {}", dir.display()).map_err(stdout_err)
        }
        Command::CheckRepr {
            mdp,
            feature_maps,
            rank_tol,
            out: args,
        } => {
            let report = check_repr(&mdp, &feature_maps, rank_tol)?;
            emit(out, &args, &report, |w| write_check_report(w, &report))
        }
        Command::Run {
            config,
            seeds,
            out: out_dir,
            threads,
            dump_agent_state,
        } => run(&config, seeds, out_dir, threads, dump_agent_state, out),
        Command::Bounds(args) => {
            let report = bounds_report(&args)?;
            emit(out, &args.out, &report, |w| write_bounds_report(w, &report))
        }
        Command::Witness {
            mdp,
            feature_map,
            rank_tol,
            out: args,
        } => {
            let m = io::load_mdp(&mdp)?;
            let fm = io::load_feature_map(&feature_map)?;
            let diag = repr::unisoft_check(&m, &fm, rank_tol)?;
            let report = WitnessReport {
                unisoft: diag.unisoft_verdicts(),
                witness: repr::find_necessity_witness(&m, &fm, rank_tol)?,
            };
            emit(out, &args, &report, |w| write_witness_report(w, &report))
        }
    }
}

pub fn check_repr(mdp_path: &Path, fm_paths: &[PathBuf], rank_tol: f64) -> Result<CheckReport> {
    if !(rank_tol > 0.0) {
        return Err(Error::invalid("rank_tol", "must be positive"));
    }
    let m = io::load_mdp(mdp_path)?;
    let mut fms = Vec::with_capacity(fm_paths.len());
    let mut representations = Vec::with_capacity(fm_paths.len());
    for path in fm_paths {
        let fm = io::load_feature_map(path)?;
        let low_rank = repr::verify_low_rank(&m, &fm, None, repr::DEFAULT_CERT_TOL)?;
        let diagnostics = repr::unisoft_check(&m, &fm, rank_tol)?;
        representations.push(RepReport {
            path: path.clone(),
            dims: fm.dims.clone(),
            low_rank,
            unisoft: diagnostics.unisoft_verdicts(),
            diagnostics,
        });
        fms.push(fm);
    }
    let mixing = if fms.len() > 1 {
        Some(repr::unisoft_mixing_check(&m, &fms, rank_tol)?)
    } else {
        None
    };
    Ok(CheckReport {
        rank_tol,
        representations,
        mixing,
    })
}

fn write_check_report(w: &mut dyn Write, r: &CheckReport) -> std::io::Result<()> {
    for rep in &r.representations {
        writeln!(w, "{}", rep.path.display())?;
        writeln!(w, "  dims: {:?}", rep.dims)?;
        writeln!(
            w,
            "  low-rank fit: max residual {:.3e} ({})",
            rep.low_rank.max_residual,
            if rep.low_rank.certified { "certified" } else { "NOT certified" }
        )?;
        writeln!(w, "  unisoft: {:?}", rep.unisoft)?;
        for (h, st) in rep.diagnostics.stages.iter().enumerate() {
            writeln!(
                w,
                "  stage {}: reachable rank {}, optimal rank {}, lambda_plus {:.6e}, lambda_min {:.6e}, max residual {:.3e}",
                h + 1,
                st.reachable_span_rank,
                st.optimal_span_rank,
                st.lambda_plus,
                st.lambda_min,
                st.max_relative_residual
            )?;
        }
        if rep.diagnostics.norm_warnings > 0 {
            writeln!(w, "  warning: {} features with norm above 1", rep.diagnostics.norm_warnings)?;
        }
    }
    if let Some(m) = &r.mixing {
        writeln!(w, "mixing: {} ({} uncovered pairs)", m.holds(), m.failures.len())?;
    }
    Ok(())
}

pub fn bounds_report(args: &BoundsArgs) -> Result<BoundsReport> {
    let mut unisoft = None;
    let mut pc = match (&args.mdp, &args.fm) {
        (Some(mp), Some(fp)) => {
            let m = io::load_mdp(mp)?;
            let fm = io::load_feature_map(fp)?;
            let sol = mdp::backward_induction(&m);
            let delta_min = sol
                .gaps
                .delta_min
                .ok_or_else(|| Error::invalid("delta_min", "every action is optimal; no positive gap"))?;
            let diag = repr::unisoft_check(&m, &fm, DEFAULT_RANK_TOL)?;
            unisoft = Some(diag.is_unisoft());
            let d = fm.dims.iter().copied().max().unwrap_or(0);
            ProblemConstants::new(d, m.horizon, args.delta, delta_min, diag.lambda_plus_overall)
        }
        _ => ProblemConstants::new(
            args.d.unwrap_or(0),
            args.horizon.unwrap_or(0),
            args.delta,
            args.delta_min.unwrap_or(0.0),
            args.lambda_plus.unwrap_or(0.0),
        ),
    };
    pc.c1 = args.c1;
    pc.c2 = args.c2;
    pc.lambda_reg = args.lambda_reg;
    pc.validate()?;
    let kl = bounds::kappa_bar_lsvi(&pc)?;
    let ke = bounds::kappa_bar_eleanor(&pc)?;
    let constant_regret = ConstantRegret {
        lsvi: bounds::constant_regret_expressions(&pc, kl.value)?.lsvi,
        eleanor: bounds::constant_regret_expressions(&pc, ke.value)?.eleanor,
    };
    let g_at_k = match (args.k, args.beta) {
        (Some(k), Some(b)) => Some(bounds::g_worstcase(k, &pc, b)?),
        _ => None,
    };
    Ok(BoundsReport {
        constants: pc,
        c1_below_floor: pc.c1_below_floor(),
        kappa_bar_lsvi: kl,
        kappa_bar_eleanor: ke,
        constant_regret,
        g_at_k,
        unisoft,
    })
}

fn write_bounds_report(w: &mut dyn Write, r: &BoundsReport) -> std::io::Result<()> {
    let pc = &r.constants;
    writeln!(
        w,
        "d={} H={} delta={} delta_min={} lambda_plus={} c1={} c2={}",
        pc.d, pc.horizon, pc.delta, pc.delta_min, pc.lambda_plus, pc.c1, pc.c2
    )?;
    if r.unisoft == Some(false) {
        writeln!(w, "warning: the representation is not UniSOFT; constant regret is not guaranteed")?;
    }
    if r.c1_below_floor {
        writeln!(w, "warning: c1 < 8 is below the floor assumed by the critical-time derivation")?;
    }
    let b = |k: &KappaBar| match k.binding {
        bounds::Branch::Growth => "growth",
        bounds::Branch::Gap => "gap",
    };
    writeln!(w, "{:<28} {:>14}  note", "quantity", "value")?;
    writeln!(w, "{:<28} {:>14.6e}  binding: {}", "kappa_bar_lsvi", r.kappa_bar_lsvi.value, b(&r.kappa_bar_lsvi))?;
    writeln!(w, "{:<28} {:>14.6e}  binding: {}", "kappa_bar_eleanor", r.kappa_bar_eleanor.value, b(&r.kappa_bar_eleanor))?;
    writeln!(w, "{:<28} {:>14.6e}  order-level", "constant_regret_lsvi", r.constant_regret.lsvi)?;
    writeln!(w, "{:<28} {:>14.6e}  order-level", "constant_regret_eleanor", r.constant_regret.eleanor)?;
    if let Some(g) = r.g_at_k {
        writeln!(w, "{:<28} {:>14.6e}", "g(k)", g)?;
    }
    Ok(())
}

fn write_witness_report(w: &mut dyn Write, r: &WitnessReport) -> std::io::Result<()> {
    writeln!(w, "unisoft: {:?}", r.unisoft)?;
    match &r.witness {
        None => writeln!(w, "witness: none"),
        Some(wt) => {
            writeln!(w, "witness: stage {}", wt.stage + 1)?;
            for (h, row) in wt.policy.action.iter().enumerate() {
                writeln!(w, "  policy stage {}: {:?}", h + 1, row)?;
            }
            writeln!(w, "  psi:      {:?}", wt.psi)?;
            writeln!(w, "  psi_star: {:?}", wt.psi_star)?;
            writeln!(w, "  residual: {:.6e}", wt.residual)
        }
    }
}

fn run(config: &Path, seeds: Option<Vec<u64>>, out_dir: Option<PathBuf>, threads: Option<usize>, dump: bool, out: &mut dyn Write) -> Result<()> {
    let mut cfg: ExperimentConfig = io::load_json(config)?;
    if let Some(s) = seeds {
        cfg.seeds = Some(s);
    }
    if dump {
        cfg.output.dump_agent_state = true;
    }
    if threads == Some(0) {
        return Err(Error::invalid("threads", "must be at least 1"));
    }
    let dir = out_dir.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| {
        let stem = config.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        PathBuf::from("runs").join(stem)
    });
    let base = config.parent().unwrap_or(Path::new("."));
    let exp = cfg.resolve(base)?;
    let result = harness::run_experiment(&exp, threads, Some(&dir))?;
    let w = &mut *out;
    (|| -> std::io::Result<()> {
        writeln!(w, "{:>8} {:>16} {:>12} {:>10} {:>10}", "seed", "cum_regret", "kappa_hat", "plateau", "opt_viol")?;
        for r in &result.runs {
            let kh = r.plateau.kappa_hat.map_or("-".to_string(), |k| k.to_string());
            writeln!(
                w,
                "{:>8} {:>16.6} {:>12} {:>10} {:>10.4}",
                r.seed,
                r.trace.final_regret(),
                kh,
                r.plateau.plateaued,
                r.trace.optimism_violation_fraction()
            )?;
        }
        if let Some(last) = result.summary.last() {
            writeln!(w, "mean cumulative regret {:.6} (std {:.6}) after {} episodes", last.mean_cum_regret, last.std_cum_regret, last.episode)?;
        }
        writeln!(w, "outputs in {}", dir.display())
    })()
    .map_err(stdout_err)
}
