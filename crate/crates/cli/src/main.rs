//! Command-line front end: solve one realization, run a sweep, or run the
//! oracle suites.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hetcran::equilibrium::{solve_che, Concept};
use hetcran::experiments::{emit_csv, realize, run_sweep, solve_concept, RowKind, SweepSpec};
use hetcran::oracle::{self, CertificateReport, SuiteReport};
use hetcran::{EquilibriumResult, Error, NeOptions, Scenario};

const EXIT_INVALID: u8 = 1;
const EXIT_NO_CONVERGENCE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "hetcran",
    version,
    about = "CRAN/HetNet downlink power game solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Scenario file of `key = value` lines; defaults to the desk-scale profile.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Convergence tolerance for best responses and Nash sweeps.
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<f64>,
    /// Poisson mean of the cognitive-hierarchy level distribution.
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one realization and print per-type rates.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "ne", value_parser = parse_concept)]
        concept: Concept,
        /// Exit with status 2 when the Nash dynamics do not settle.
        #[arg(long)]
        strict: bool,
        /// Write a JSON dump of the result (and the level table for CHE).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo sweep described by a spec file and write CSV.
    Sweep {
        /// Sweep spec of `key = value` lines.
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the oracle suites and equilibrium certificates.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seeds per equilibrium certificate.
        #[arg(long, default_value_t = 50)]
        realizations: usize,
    },
}

fn parse_concept(s: &str) -> Result<Concept, String> {
    Concept::parse(s).ok_or_else(|| format!("unknown concept `{s}` (expected ne, che or equal)"))
}

enum Failure {
    Invalid(String),
    NoConvergence(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_non_convergence() {
            Failure::NoConvergence(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

fn scenario(common: &Common) -> Result<Scenario, Failure> {
    let mut s = match &common.scenario {
        Some(path) => Scenario::load(path)?,
        None => Scenario::default(),
    };
    if let Some(tau) = common.tau {
        s.ch_tau = tau;
    }
    s.validate()?;
    Ok(s)
}

fn options(common: &Common) -> Result<NeOptions, Failure> {
    let mut opts = NeOptions::default();
    if let Some(tol) = common.tol {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Failure::Invalid(format!(
                "--tol must lie in (0, 1), got {tol}"
            )));
        }
        opts.solver.tol_kkt = tol;
        opts.tol_outer = tol;
    }
    Ok(opts)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn print_rates(res: &EquilibriumResult) {
    println!("concept {}", res.concept.name());
    println!("converged {}", res.converged);
    println!("iterations {}", res.iterations);
    println!("max_residual {:e}", res.max_residual);
    println!("kind,mean_rate_bps");
    for (&kind, &rate) in &res.per_type_rates {
        println!("{},{}", RowKind::from(kind).name(), rate);
    }
    println!("{},{}", RowKind::Total.name(), res.total_rate);
}

fn solve(
    common: &Common,
    seed: u64,
    concept: Concept,
    strict: bool,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let s = scenario(common)?;
    let opts = options(common)?;
    let net = realize(&s, seed)?;
    let (res, table) = match concept {
        Concept::Che => {
            let (r, t) = solve_che(&net, &opts.solver)?;
            (r, Some(t))
        }
        _ => (solve_concept(&net, concept, &opts)?, None),
    };
    print_rates(&res);
    if let Some(path) = out {
        let json = res.to_json(&net, table.as_ref());
        let text = serde_json::to_string_pretty(&json).expect("JSON values always serialize");
        write_file(path, &format!("{text}\n"))?;
    }
    if strict && !res.converged {
        return Err(Failure::NoConvergence(format!(
            "Nash dynamics did not settle within {} sweeps (last change {:e})",
            res.iterations, res.max_residual
        )));
    }
    if !res.converged {
        eprintln!("warning: Nash dynamics did not settle; rates are from the last sweep");
    }
    Ok(())
}

fn sweep(
    spec_path: &Path,
    common: &Common,
    out: &Path,
    realizations: Option<usize>,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let base = match &common.scenario {
        Some(path) => Scenario::load(path)?,
        None => Scenario::default(),
    };
    let mut spec = SweepSpec::load(spec_path, base)?;
    if let Some(n) = realizations {
        spec.n_realizations = n;
    }
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(tau) = common.tau {
        spec.scenario.ch_tau = tau;
    }
    spec.options = options(common)?;
    let res = run_sweep(&spec)?;
    emit_csv(&res, out)?;
    for ((v, concept), n) in &res.failures {
        eprintln!(
            "warning: {n} failed realization(s) skipped at {}={} ({})",
            spec.variable.name(),
            spec.values[*v],
            concept.name()
        );
    }
    for ((v, concept), n) in &res.non_converged {
        eprintln!(
            "note: {n} Nash run(s) hit the sweep limit at {}={} ({})",
            spec.variable.name(),
            spec.values[*v],
            concept.name()
        );
    }
    Ok(())
}

fn certificate_line(
    name: &str,
    rep: &CertificateReport,
    need_fraction: f64,
    max_excluded: f64,
) -> (bool, String) {
    let checked = rep.seeds - rep.non_converged;
    let ok = rep.errors == 0
        && (rep.non_converged as f64) <= max_excluded * rep.seeds as f64
        && (rep.certified as f64) >= need_fraction * checked as f64;
    let line = format!(
        "{} {name}: {}/{} certified, {} not converged, {} errors, worst {:.3e}",
        if ok { "PASS" } else { "FAIL" },
        rep.certified,
        checked,
        rep.non_converged,
        rep.errors,
        rep.worst
    );
    (ok, line)
}

fn verify(common: &Common, seed: u64, realizations: usize) -> Result<bool, Failure> {
    let s = scenario(common)?;
    let opts = options(common)?;
    let suites: Vec<SuiteReport> = vec![
        oracle::waterfill_suite(100, seed),
        oracle::cu_grid_suite(25, seed),
        oracle::bs_ch_grid_suite(25, seed),
        oracle::gradient_suite(100, seed),
        oracle::concavity_suite(500, seed),
    ];
    let mut all = true;
    for rep in &suites {
        println!("{rep}");
        all &= rep.passed();
    }
    let seeds: Vec<u64> = (0..realizations as u64).map(|r| seed + r).collect();
    let ne = oracle::ne_certificates(&s, &seeds, &opts, 1e-6);
    let (ok, line) = certificate_line("Nash certificate", &ne, 0.95, 0.10);
    println!("{line}");
    all &= ok;
    let che = oracle::che_certificates(&s, &seeds, &opts.solver, 1e-6);
    let (ok, line) = certificate_line("cognitive-hierarchy certificate", &che, 1.0, 0.0);
    println!("{line}");
    all &= ok;
    Ok(all)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match &cli.command {
        Command::Solve {
            common,
            seed,
            concept,
            strict,
            out,
        } => solve(common, *seed, *concept, *strict, out.as_deref()).map(|_| true),
        Command::Sweep {
            spec,
            common,
            out,
            realizations,
            seed,
        } => sweep(spec, common, out, *realizations, *seed).map(|_| true),
        Command::Verify {
            common,
            seed,
            realizations,
        } => verify(common, *seed, *realizations),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_INVALID),
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::NoConvergence(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NO_CONVERGENCE)
        }
    }
}
