//! `plurilab` command-line front end.
//!
//! Exit codes: 0 success, 1 numerical error, 2 failed verification,
//! 64 usage error.

mod args;
mod commands;
mod config;

use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{CommandFactory, FromArgMatches};
use serde_json::Value;

use args::{Cli, Command, PrecisionArg};
use commands::{CliError, Outcome};
use plurilab::linalg::PrecisionPolicy;
use plurilab::report::{format_f64, render};

const EXIT_ERROR: u8 = 1;
const EXIT_FAIL: u8 = 2;
const EXIT_USAGE: u8 = 64;

fn main() -> ExitCode {
    let mut argv: Vec<String> = std::env::args().collect();
    match run(&mut argv) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(argv: &mut Vec<String>) -> Result<u8, CliError> {
    let cmd = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    if let Some(path) = config::take_config_path(argv) {
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))?;
        let entries = config::parse(&text).map_err(|e| CliError::Usage(e.0))?;
        config::splice(&cmd, argv, &entries).map_err(|e| CliError::Usage(e.0))?;
    }
    let matches = match cmd.try_get_matches_from(argv.iter()) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return Ok(code);
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    let common = cli.command.common().clone();
    if common.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(common.threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set up {} threads: {e}", common.threads)))?;
    }
    match common.precision {
        PrecisionArg::Auto => PrecisionPolicy::Auto,
        PrecisionArg::Double => PrecisionPolicy::Double,
        PrecisionArg::Dd => PrecisionPolicy::DoubleDouble,
    }
    .set_global();
    plurilab::reset_precision_escalations();

    let outcome = match &cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Envelope(a) => commands::envelope(a),
        Command::Transfinite(a) => commands::transfinite(a),
        Command::Bergman(a) => commands::bergman(a),
        Command::Energy(a) => commands::energy(a),
        Command::Dynamics(a) => commands::dynamics(a),
        Command::Verify(a) => commands::verify(a),
    }?;
    emit(outcome, cli.command.name(), &common)
}

fn emit(mut o: Outcome, name: &str, c: &args::Common) -> Result<u8, CliError> {
    if !c.no_timestamp {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        o.report.diagnostics.timestamp = Some(format!("unix:{secs}"));
    }
    o.report.diagnostics.seed = c.seed;
    let mut value = o.report.to_value()?;
    if let Value::Object(m) = &mut value {
        if let Some(Value::Object(cfg)) = m.get_mut("config") {
            cfg.insert("subcommand".into(), Value::String(name.into()));
        }
    }
    let text = render(&value);
    if let Some(path) = &c.out {
        std::fs::write(path, &text).map_err(|e| CliError::Usage(format!("cannot write {path}: {e}")))?;
    }
    if let (Some(path), Some(rows)) = (&c.csv, &o.table) {
        write_csv(path, rows)?;
    }
    if c.json {
        print!("{text}");
    } else {
        for line in &o.summary {
            println!("{line}");
        }
    }
    Ok(if o.pass { 0 } else { EXIT_FAIL })
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Number(n) if n.is_f64() => format_f64(n.as_f64().unwrap()),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        other => other.to_string(),
    }
}

/// Writes an array of flat objects as CSV, columns from the first row.
fn write_csv(path: &str, rows: &[Value]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Usage(format!("cannot write {path}: {e}"));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let Some(Value::Object(first)) = rows.first() else {
        return w.flush().map_err(|e| CliError::Usage(e.to_string()));
    };
    let cols: Vec<String> = first.keys().cloned().collect();
    w.write_record(&cols).map_err(io)?;
    for r in rows {
        w.write_record(cols.iter().map(|k| cell(&r[k.as_str()]))).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Usage(e.to_string()))
}
