//! Command-line front end. Every report-writing command needs an explicit seed;
//! stdout carries a one-line JSON summary and the full report goes to `--out`.

use crate::certify::{
    cheating_strategies, run_certification_with, run_edqc_game, separable_edqc_source, CertError,
    EdqcSource,
};
use crate::games::{chsh_demo, run_rounds, run_sqg_experiment, GameError, SeparableSource, Source, SqgStrategy, SCHEMA};
use crate::lhv::{hirsch_exact, sample_hirsch, sample_werner_mix, werner_mix_exact, HirschModel, LhvError, MixTarget};
use crate::par::default_workers;
use crate::postsim::{dot_product_estimate, Ext, PostError, Real};
use crate::qcore::{fine_grain, named_state, qubit_state_by_name, DensityMatrix, Povm, PovmJson, QError, RngState};
use crate::rsp::{run_rounds_with, summarize, write_jsonl, HonestProver, Prover, RspError, WrongPreimageProver};
use crate::selftest::run_selftest;
use crate::witness::{ppt_witness, WitnessError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_ABORT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("malformed JSON in {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Q(#[from] QError),
    #[error(transparent)]
    Witness(#[from] WitnessError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Lhv(#[from] LhvError),
    #[error(transparent)]
    Post(#[from] PostError),
    #[error(transparent)]
    Rsp(#[from] RspError),
    #[error(transparent)]
    Cert(#[from] CertError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Parser)]
#[command(name = "nelsim", version, about = "Nonlocality protocol simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Seed of every random stream used by the run.
    #[arg(long)]
    seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Report file.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn workers(&self) -> usize {
        self.workers.unwrap_or_else(default_workers)
    }

    fn rng(&self) -> RngState {
        RngState::new(self.seed, 0)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SourceKind {
    Entangled,
    /// Product of the target's marginals.
    Separable,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProverKind {
    Honest,
    WrongPreimage,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LhvModel {
    Hirsch,
    Werner,
    Rho0,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendKind {
    Float,
    Extended,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EdqcMode {
    Honest,
    Separable,
    /// Input-dependent auxiliary states on the separable source.
    Cheating,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// CHSH game: classical sweep and quantum Monte Carlo.
    Chsh {
        #[arg(long, default_value_t = 1_000_000)]
        rounds: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Semi-quantum game with honest φ⁺ players.
    Sqg {
        #[arg(long)]
        state: String,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Fixed round count instead of the one derived from delta.
        #[arg(long)]
        rounds: Option<u64>,
        #[arg(long, value_enum, default_value = "entangled")]
        source: SourceKind,
        #[command(flatten)]
        common: Common,
    },
    /// Local hidden-variable sampling against the exact table; writes CSV.
    Lhv {
        #[arg(long, value_enum, default_value = "hirsch")]
        model: LhvModel,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value = "ket0")]
        sigma_a: String,
        #[arg(long, default_value = "ket0")]
        sigma_b: String,
        /// POVM JSON; defaults to the computational basis.
        #[arg(long)]
        povm_a: Option<PathBuf>,
        #[arg(long)]
        povm_b: Option<PathBuf>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Postselection-based estimate of |⟨ψ|ψ′⟩|².
    Dotprod {
        /// JSON array [g1, g2] of a real qubit state.
        #[arg(long)]
        psi: PathBuf,
        /// JSON array [re1, im1, re2, im2].
        #[arg(long)]
        psi_prime: PathBuf,
        #[arg(long, default_value_t = 12)]
        ell: u32,
        #[arg(long, value_enum, default_value = "float")]
        backend: BackendKind,
        #[command(flatten)]
        common: Common,
    },
    /// Remote state preparation rounds; writes a JSONL transcript.
    Rsp {
        #[arg(long, default_value_t = 12)]
        n: u32,
        #[arg(long, default_value_t = 10_000)]
        rounds: u64,
        #[arg(long, value_enum, default_value = "honest")]
        prover: ProverKind,
        #[command(flatten)]
        common: Common,
    },
    /// Full certification: RSP-prepared inputs and answer collection.
    Certify {
        #[arg(long)]
        state: String,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[arg(long, default_value_t = 12)]
        tcf_n: u32,
        #[arg(long, value_enum, default_value = "entangled")]
        source: SourceKind,
        #[arg(long, value_enum, default_value = "honest")]
        prover: ProverKind,
        #[command(flatten)]
        common: Common,
    },
    /// Game compiled through an ideal delegation functionality.
    Edqc {
        #[arg(long)]
        state: String,
        #[arg(long, value_enum, default_value = "honest")]
        mode: EdqcMode,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Invariant suites.
    Selftest {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Outcome {
    summary: serde_json::Value,
    code: i32,
}

impl Outcome {
    fn ok(summary: serde_json::Value) -> Self {
        Outcome { summary, code: EXIT_OK }
    }
}

fn check_delta(delta: f64) -> Result<(), CliError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("--delta must lie in (0,1), got {delta}")))
    }
}

fn check_positive(name: &str, v: u64) -> Result<(), CliError> {
    if v == 0 {
        return Err(CliError::Invalid(format!("--{name} must be positive")));
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}

fn write_report<T: Serialize>(out: &Option<PathBuf>, report: &T) -> Result<(), CliError> {
    if let Some(path) = out {
        let mut s = serde_json::to_string_pretty(report).expect("serializable report");
        s.push('\n');
        write_file(path, s.as_bytes())?;
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })
}

fn load_povm(path: &Option<PathBuf>) -> Result<Povm, CliError> {
    match path {
        Some(p) => Ok(read_json::<PovmJson>(p)?.to_povm()?),
        None => Ok(Povm::computational(2)?),
    }
}

fn source_for(rho: &DensityMatrix, kind: SourceKind) -> Result<Source, CliError> {
    Ok(match kind {
        SourceKind::Entangled => Source::Entangled(rho.clone()),
        SourceKind::Separable => Source::Separable(SeparableSource::marginals_of(rho)?),
    })
}

fn chsh(rounds: u64, c: &Common) -> Result<Outcome, CliError> {
    check_positive("rounds", rounds)?;
    let r = chsh_demo(c.rng(), rounds, c.workers())?;
    write_report(&c.out, &r)?;
    Ok(Outcome::ok(json!({
        "schema": SCHEMA, "command": "chsh", "seed": c.seed, "rounds": rounds,
        "classical_sweep_max": r.classical_sweep_max, "quantum_win": r.quantum_win, "quantum_exact": r.quantum_exact,
    })))
}

fn sqg(state: &str, delta: f64, rounds: Option<u64>, source: SourceKind, c: &Common) -> Result<Outcome, CliError> {
    check_delta(delta)?;
    let rho = named_state(state)?;
    let w = ppt_witness(&rho)?.with_spec(state);
    let src = source_for(&rho, source)?;
    let h = SqgStrategy::honest_bell();
    let r = match rounds {
        Some(n) => {
            check_positive("rounds", n)?;
            run_rounds(&src, &w, &h, &h, n, c.rng(), c.workers())?
        }
        None => run_sqg_experiment(&src, &w, &h, &h, delta, c.rng(), c.workers())?,
    };
    write_report(&c.out, &r)?;
    Ok(Outcome::ok(json!({
        "schema": SCHEMA, "command": "sqg", "seed": c.seed, "state": state, "rounds": r.rounds,
        "i_hat": r.i_hat, "expected_i": r.expected_i, "verdict": r.verdict,
    })))
}

fn first_element(p: &Povm) -> crate::qcore::Mat {
    p.elements()[0].matrix().clone()
}

#[allow(clippy::too_many_arguments)]
fn lhv(model: LhvModel, q: f64, sigma_a: &str, sigma_b: &str, povm_a: &Option<PathBuf>, povm_b: &Option<PathBuf>, samples: u64, c: &Common) -> Result<Outcome, CliError> {
    check_positive("samples", samples)?;
    let (pa, pb) = (load_povm(povm_a)?, load_povm(povm_b)?);
    let (table, exact) = match model {
        LhvModel::Hirsch => {
            let m = HirschModel::new(q, qubit_state_by_name(sigma_a)?, qubit_state_by_name(sigma_b)?)?;
            let (fa, fb) = (fine_grain(&pa)?, fine_grain(&pb)?);
            (sample_hirsch(&m, &fa, &fb, samples, c.rng(), c.workers())?, hirsch_exact(&m, &fa, &fb)?)
        }
        LhvModel::Werner | LhvModel::Rho0 => {
            let target = if matches!(model, LhvModel::Werner) { MixTarget::Werner } else { MixTarget::Rho0 };
            let (p, qp) = (first_element(&pa), first_element(&pb));
            let exact = werner_mix_exact(target, q, &p, &qp)?.iter().map(|r| r.to_vec()).collect::<Vec<_>>();
            (sample_werner_mix(target, q, &p, &qp, samples, c.rng(), c.workers())?, exact)
        }
    };
    if let Some(path) = &c.out {
        write_file(path, table.to_csv(&exact)?.as_bytes())?;
    }
    Ok(Outcome::ok(json!({
        "schema": SCHEMA, "command": "lhv", "seed": c.seed, "samples": samples,
        "tv": table.tv_to(&exact), "within_3_sigma": table.within_sigma(&exact, 3.0),
    })))
}

fn read_reals<const N: usize>(path: &Path) -> Result<[f64; N], CliError> {
    let v: Vec<f64> = read_json(path)?;
    v.try_into().map_err(|v: Vec<f64>| CliError::Invalid(format!("{} holds {} numbers, expected {N}", path.display(), v.len())))
}

fn estimate<R: Real>(psi: [f64; 2], prime: [f64; 4], ell: u32, rng: RngState) -> Result<Option<f64>, CliError> {
    let psi = psi.map(R::from_f64);
    let prime = prime.map(R::from_f64);
    match dot_product_estimate(&psi, &prime, ell, &mut rng.rng()) {
        Ok(v) => Ok(Some(v.to_f64())),
        Err(PostError::Undetermined) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn dotprod(psi: &Path, psi_prime: &Path, ell: u32, backend: BackendKind, c: &Common) -> Result<Outcome, CliError> {
    let g = read_reals::<2>(psi)?;
    let p = read_reals::<4>(psi_prime)?;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    if (norm(&g) - 1.0).abs() > 1e-9 || (norm(&p) - 1.0).abs() > 1e-9 {
        return Err(CliError::Invalid("states must be normalised".into()));
    }
    let est = match backend {
        BackendKind::Float => estimate::<f64>(g, p, ell, c.rng())?,
        BackendKind::Extended => estimate::<Ext>(g, p, ell, c.rng())?,
    };
    let (re, im) = (g[0] * p[0] + g[1] * p[2], g[0] * p[1] + g[1] * p[3]);
    let exact = re * re + im * im;
    let report = json!({
        "schema": SCHEMA, "command": "dotprod", "seed": c.seed, "ell": ell,
        "backend": match backend { BackendKind::Float => "float", BackendKind::Extended => "extended" },
        "estimate": est, "exact": exact, "error": est.map(|e| (e - exact).abs()), "undetermined": est.is_none(),
    });
    write_report(&c.out, &report)?;
    Ok(Outcome::ok(report))
}

fn rsp_with<P: Prover + Clone + Sync>(prover: &P, n: u32, rounds: u64, c: &Common) -> Result<Outcome, CliError> {
    let transcripts = run_rounds_with(prover, n, rounds, c.rng(), c.workers())?;
    if let Some(path) = &c.out {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &transcripts)?;
        write_file(path, &buf)?;
    }
    let s = summarize(n, c.seed, &transcripts);
    let code = if s.aborts > 0 { EXIT_ABORT } else { EXIT_OK };
    let mut summary = serde_json::to_value(&s).expect("serializable");
    summary["command"] = json!("rsp");
    Ok(Outcome { summary, code })
}

fn rsp(n: u32, rounds: u64, prover: ProverKind, c: &Common) -> Result<Outcome, CliError> {
    check_positive("rounds", rounds)?;
    match prover {
        ProverKind::Honest => rsp_with(&HonestProver::new(), n, rounds, c),
        ProverKind::WrongPreimage => rsp_with(&WrongPreimageProver::new(), n, rounds, c),
    }
}

fn certify(state: &str, delta: f64, tcf_n: u32, source: SourceKind, prover: ProverKind, c: &Common) -> Result<Outcome, CliError> {
    check_delta(delta)?;
    let rho = named_state(state)?;
    let w = ppt_witness(&rho)?;
    let src = source_for(&rho, source)?;
    let r = match prover {
        ProverKind::Honest => run_certification_with(&w, &src, &HonestProver::new(), delta, tcf_n, c.rng(), c.workers())?,
        ProverKind::WrongPreimage => run_certification_with(&w, &src, &WrongPreimageProver::new(), delta, tcf_n, c.rng(), c.workers())?,
    };
    write_report(&c.out, &r)?;
    let code = if r.aborted_at.is_some() { EXIT_ABORT } else { EXIT_OK };
    Ok(Outcome {
        summary: json!({
            "schema": SCHEMA, "command": "certify", "seed": c.seed, "state": state, "planned": r.planned,
            "executed": r.executed, "collected": r.collected, "aborted_at": r.aborted_at, "i_hat": r.i_hat, "verdict": r.verdict,
        }),
        code,
    })
}

fn edqc(state: &str, mode: EdqcMode, delta: f64, c: &Common) -> Result<Outcome, CliError> {
    check_delta(delta)?;
    let rho = named_state(state)?;
    let w = ppt_witness(&rho)?;
    let src = match mode {
        EdqcMode::Honest => EdqcSource::Honest(rho),
        EdqcMode::Separable => separable_edqc_source(&rho)?,
        EdqcMode::Cheating => {
            let (a, b, _) = cheating_strategies(&w)?;
            EdqcSource::Separable { source: SeparableSource::marginals_of(&rho)?, a, b }
        }
    };
    let r = run_edqc_game(&w, &src, delta, c.rng(), c.workers())?;
    write_report(&c.out, &r)?;
    Ok(Outcome::ok(json!({
        "schema": SCHEMA, "command": "edqc", "seed": c.seed, "state": state, "source": r.source,
        "rounds": r.rounds, "i_hat": r.i_hat, "expected_i": r.expected_i, "verdict": r.verdict,
    })))
}

fn selftest(out: &Option<PathBuf>) -> Result<Outcome, CliError> {
    let r = run_selftest();
    write_report(out, &r)?;
    let code = if r.passed { EXIT_OK } else { EXIT_FAILED };
    let checks: serde_json::Map<String, serde_json::Value> = r.checks.iter().map(|c| (c.name.clone(), json!(c.passed))).collect();
    Ok(Outcome { summary: json!({ "schema": SCHEMA, "command": "selftest", "passed": r.passed, "checks": checks }), code })
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Chsh { rounds, common } => chsh(*rounds, common),
        Command::Sqg { state, delta, rounds, source, common } => sqg(state, *delta, *rounds, *source, common),
        Command::Lhv { model, q, sigma_a, sigma_b, povm_a, povm_b, samples, common } => {
            lhv(*model, *q, sigma_a, sigma_b, povm_a, povm_b, *samples, common)
        }
        Command::Dotprod { psi, psi_prime, ell, backend, common } => dotprod(psi, psi_prime, *ell, *backend, common),
        Command::Rsp { n, rounds, prover, common } => rsp(*n, *rounds, *prover, common),
        Command::Certify { state, delta, tcf_n, source, prover, common } => certify(state, *delta, *tcf_n, *source, *prover, common),
        Command::Edqc { state, mode, delta, common } => edqc(state, *mode, *delta, common),
        Command::Selftest { out } => selftest(out),
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(o) => {
            println!("{}", serde_json::to_string(&o.summary).expect("serializable summary"));
            o.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}
