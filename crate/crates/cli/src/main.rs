//! `ledgerdp`: run JSON query scripts against CSV tables under a fixed
//! privacy budget.
//!
//! Exit codes: 0 success, 2 configuration, parse or type errors (always
//! detected before private rows are read), 3 budget exhausted, 4 other
//! compilation or evaluation errors.

mod config;
mod output;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ledgerdp::exact::ExtRational;
use ledgerdp::session::Catalog;
use ledgerdp::tabledata::{check_csv_header, load_csv};
use ledgerdp::{Error, Measure, PrivacyBudget, PrivacyUnit, Session, Table};

use config::{load_manifest, load_script, Manifest, Script};
use output::{Format, Sink};

#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn config(message: impl fmt::Display) -> Self {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }

    pub fn budget(message: impl fmt::Display) -> Self {
        Failure {
            code: 3,
            message: message.to_string(),
        }
    }

    pub fn runtime(message: impl fmt::Display) -> Self {
        Failure {
            code: 4,
            message: message.to_string(),
        }
    }

    fn compile(query: &str, e: Error) -> Self {
        let message = format!("query `{query}`: {e}");
        match e {
            Error::TypeCheckError(_)
            | Error::TypeMismatch(_)
            | Error::InvalidSpend(_)
            | Error::MeasureMismatch(_) => Failure::config(message),
            _ => Failure::runtime(message),
        }
    }
}

#[derive(Parser)]
#[command(name = "ledgerdp", version, about = "Differentially private queries over CSV tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every query of a script and print noisy results.
    Run(RunArgs),
    /// Report the budget a script would leave, without reading any rows.
    Budget(BudgetArgs),
    /// Check CSV files against the schema.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MeasureArg {
    Pure,
    Zcdp,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Measure {
        match m {
            MeasureArg::Pure => Measure::Pure,
            MeasureArg::Zcdp => Measure::Zcdp,
        }
    }
}

#[derive(Args)]
struct Accounting {
    /// Schema manifest (JSON).
    #[arg(long)]
    schema: PathBuf,
    /// Query script (JSON).
    #[arg(long)]
    script: PathBuf,
    /// `add-max-rows:<k>` or `add-remove-id:<column>`.
    #[arg(long)]
    unit: String,
    #[arg(long, value_enum)]
    measure: MeasureArg,
    /// Total budget: a decimal, `a/b`, or `inf`.
    #[arg(long)]
    budget: String,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    accounting: Accounting,
    /// Directory holding `<table>.csv` files.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Directory receiving one file per query; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct BudgetArgs {
    #[command(flatten)]
    accounting: Accounting,
    /// Needed for headers and public tables only.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

struct Prepared {
    manifest: Manifest,
    script: Script,
    unit: PrivacyUnit,
    total: PrivacyBudget,
}

fn prepare(a: &Accounting) -> Result<Prepared, Failure> {
    let unit: PrivacyUnit = a.unit.parse().map_err(Failure::config)?;
    let total = PrivacyBudget::parse(a.measure.into(), &a.budget).map_err(Failure::config)?;
    let manifest = load_manifest(&a.schema)?;
    manifest.check_unit(&unit)?;
    let script = load_script(&a.script)?;
    Ok(Prepared {
        manifest,
        script,
        unit,
        total,
    })
}

fn load_public(manifest: &Manifest, data: Option<&Path>) -> Result<BTreeMap<String, Table>, Failure> {
    let mut out = BTreeMap::new();
    for (name, domain) in &manifest.public_tables {
        let dir = data.ok_or_else(|| Failure::config(format!("public table `{name}` needs --data")))?;
        let path = Manifest::csv_path(dir, name);
        let table = load_csv(&path, &domain.schema).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        out.insert(name.clone(), table);
    }
    Ok(out)
}

fn compile_all(p: &Prepared, catalog: &Catalog) -> Result<(), Failure> {
    for q in &p.script.queries {
        let spend = PrivacyBudget::new(p.total.measure(), q.spend.clone());
        catalog.compile(&q.expr, &spend).map_err(|e| Failure::compile(&q.name, e))?;
    }
    Ok(())
}

fn cmd_run(args: &RunArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let p = prepare(&args.accounting)?;
    if !args.data.is_dir() {
        return Err(Failure::config(format!("{}: not a directory", args.data.display())));
    }
    for name in p.manifest.tables.keys().chain(p.manifest.public_tables.keys()) {
        let path = Manifest::csv_path(&args.data, name);
        if !path.is_file() {
            return Err(Failure::config(format!("missing file: {}", path.display())));
        }
    }
    let public = load_public(&p.manifest, Some(&args.data))?;
    compile_all(&p, &p.manifest.catalog(p.unit.clone(), &public)?)?;

    let mut tables = Vec::with_capacity(p.manifest.tables.len());
    for (name, domain) in &p.manifest.tables {
        let path = Manifest::csv_path(&args.data, name);
        let t = load_csv(&path, &domain.schema).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        tables.push((name.clone(), t));
    }
    let mut session = Session::new(tables, p.unit.clone(), p.total.clone(), args.seed).map_err(Failure::config)?;
    for (name, t) in public {
        session.add_public_table(name, t).map_err(Failure::config)?;
    }

    let mut sink = Sink::new(args.format, args.out.clone(), stdout)?;
    for q in &p.script.queries {
        let spend = PrivacyBudget::new(p.total.measure(), q.spend.clone());
        match session.evaluate(&q.expr, &spend) {
            Ok(table) => sink.result(&q.name, &table, &session.remaining_budget().to_string())?,
            Err(e @ Error::InsufficientBudget { .. }) => {
                sink.remaining(&session.remaining_budget().to_string())?;
                return Err(Failure::budget(format!("query `{}`: {e}", q.name)));
            }
            Err(e) => return Err(Failure::compile(&q.name, e)),
        }
    }
    sink.remaining(&session.remaining_budget().to_string())
}

fn cmd_budget(args: &BudgetArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let p = prepare(&args.accounting)?;
    if let Some(dir) = &args.data {
        for (name, domain) in &p.manifest.tables {
            let path = Manifest::csv_path(dir, name);
            check_csv_header(&path, &domain.schema).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        }
    }
    let public = load_public(&p.manifest, args.data.as_deref())?;
    compile_all(&p, &p.manifest.catalog(p.unit.clone(), &public)?)?;

    let spent = p
        .script
        .queries
        .iter()
        .fold(ExtRational::zero(), |acc, q| &acc + &q.spend);
    let print = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(|e| Failure::runtime(e));
    match p.total.amount().checked_sub(&spent) {
        Some(left) => print(stdout, left.to_string()),
        None => {
            let deficit = spent.checked_sub(p.total.amount()).expect("spent exceeds total");
            print(stdout, format!("deficit {deficit}"))?;
            Err(Failure::budget(format!(
                "script spends {spent} but the budget is {}",
                p.total.amount()
            )))
        }
    }
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), Failure> {
    let manifest = load_manifest(&args.schema)?;
    let mut failures = Vec::new();
    for (name, domain) in manifest.tables.iter().chain(&manifest.public_tables) {
        let path = Manifest::csv_path(&args.data, name);
        if let Err(e) = load_csv(&path, &domain.schema) {
            failures.push(format!("{}: {e}", path.display()));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::config(failures.join("\n")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, &mut out),
        Command::Budget(a) => cmd_budget(a, &mut out),
        Command::Validate(a) => cmd_validate(a),
    };
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
