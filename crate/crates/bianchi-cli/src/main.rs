use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bianchi::fixtures::{read_json, CurveFile};
use bianchi::recovery::OracleFile;
use bianchi::Error;
use bianchi_cli::compare::{CompareRequest, SystemsInput};
use bianchi_cli::recover::RecoverRequest;
use bianchi_cli::{
    bundle_path, compare, exit_code, field, load_bundle, recover, to_json, verify, Output, BUNDLE_ENV, EXIT_INPUT,
};

#[derive(Parser)]
#[command(name = "bianchi", version, about = "Hecke eigensystems over imaginary quadratic fields")]
struct Cli {
    /// Fixture bundle directory.
    #[arg(long, global = true, env = BUNDLE_ENV)]
    bundle: Option<PathBuf>,
    /// Print JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Class group, characters and genus data of Q(sqrt(-d)).
    Field {
        d: Option<i64>,
        #[arg(long = "field")]
        field: Option<i64>,
    },
    /// Recover a full eigensystem from principal eigenvalues.
    Recover {
        #[arg(long)]
        level: String,
        /// Oracle file; defaults to the bundle's oracle for the level.
        #[arg(long)]
        oracle: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        bound: u64,
        /// Eigensystem file the result should be a twist of.
        #[arg(long)]
        source: Option<PathBuf>,
    },
    /// Run the regression suite over the bundle.
    Verify {
        /// Append per-check wall time.
        #[arg(long)]
        timing: bool,
    },
    /// Compare eigenvalues with elliptic curve traces of Frobenius.
    CompareAp {
        /// Eigensystem file, single system, or recovery report.
        #[arg(long)]
        eigensystem: Option<PathBuf>,
        /// Curve file with a_p values.
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long)]
        level: Option<String>,
        /// System name inside the eigensystem file.
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        bound: Option<u64>,
    },
}

fn read<T: serde::de::DeserializeOwned>(p: &Option<PathBuf>) -> Result<Option<T>, Error> {
    p.as_deref().map(|p: &Path| read_json(p)).transpose()
}

fn emit<T: serde::Serialize>(json: bool, v: &T, text: String, ok: bool) -> Output {
    Output::new(if json { to_json(v) } else { text }, ok)
}

fn run(cli: Cli) -> Result<Output, Error> {
    let path = bundle_path(cli.bundle);
    match cli.cmd {
        Cmd::Field { d, field } => {
            let d = d.or(field).ok_or_else(|| Error::Invalid("give d".into()))?;
            let r = field::field_report(d)?;
            Ok(emit(cli.json, &r, r.render(), true))
        }
        Cmd::Recover { level, oracle, bound, source } => {
            let bundle = load_bundle(path.as_deref())?;
            let oracle: Option<OracleFile> = read(&oracle)?;
            let sources = read::<SystemsInput>(&source)?.map(|s| s.systems()).unwrap_or_default();
            let r = recover::run(RecoverRequest { bundle: bundle.as_ref(), level, oracle, bound, sources })?;
            Ok(emit(cli.json, &r, r.render(), r.ok()))
        }
        Cmd::Verify { timing } => {
            let dir = path.ok_or_else(|| Error::Invalid(format!("give --bundle or set {BUNDLE_ENV}")))?;
            let b = load_bundle(Some(&dir))?.expect("path given");
            let r = verify::run(&b, timing);
            Ok(emit(cli.json, &r, r.render(), r.ok()))
        }
        Cmd::CompareAp { eigensystem, curve, level, name, bound } => {
            let bundle = load_bundle(path.as_deref())?;
            let systems: Option<SystemsInput> = read(&eigensystem)?;
            let curve: Option<CurveFile> = read(&curve)?;
            let r = compare::run(CompareRequest { bundle: bundle.as_ref(), level, name, systems, curve, bound })?;
            Ok(emit(cli.json, &r, r.render(), r.ok()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{}", out.text);
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
