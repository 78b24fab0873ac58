//! Command-line front end: run named checks on built-in or file models and
//! emit human-readable or machine-readable reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use gvc_core::checks::{run_check, BoundOverrides, CheckReport, Verdict, CHECK_NAMES};
use gvc_core::models::{builtin, load_model, FieldModel};

#[derive(Parser)]
#[command(name = "gvc")]
#[command(about = "Exact checks for Grassmann-graded Lagrangian field models")]
#[command(version)]
struct Cli {
    /// Check to run: el, decomposition, symmetry, current, superpotential,
    /// noether-id, derive-id, kt, gauge-stages, brst, master-eq,
    /// proper-solution, or all
    command: String,

    /// Built-in model (yang_mills_su2, maxwell, chern_simons_su2,
    /// chern_simons_u1, `bf:<n>:<p>`) or a model file path (file:PATH or a
    /// path ending in .gvc)
    model: String,

    /// Override the ansatz jet-order bound
    #[arg(long, value_name = "K")]
    max_order: Option<usize>,

    /// Override the ansatz polynomial-degree bound
    #[arg(long, value_name = "D")]
    max_degree: Option<usize>,

    /// Also write the reports as a JSON document
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,

    /// Suppress witness output
    #[arg(long)]
    quiet: bool,
}

fn resolve_model(reference: &str) -> Result<FieldModel, String> {
    if let Some(path) = reference.strip_prefix("file:") {
        return load_model(path).map_err(|e| e.to_string());
    }
    if reference.ends_with(".gvc") {
        return load_model(reference).map_err(|e| e.to_string());
    }
    match builtin(reference) {
        Some(result) => result.map_err(|e| e.to_string()),
        None => Err(format!(
            "unknown model `{reference}`; use a builtin name or a .gvc file path"
        )),
    }
}

fn print_report(report: &CheckReport, quiet: bool) {
    println!(
        "[{}] {} on {} ({} ms, order<={}, degree<={})",
        report.verdict, report.check, report.model, report.elapsed_ms, report.bounds.order,
        report.bounds.degree
    );
    if let Some(residual) = &report.residual {
        println!("    residual: {residual}");
    }
    if !quiet {
        if let Some(witness) = &report.witness {
            println!("    {witness}");
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.command != "all" && !CHECK_NAMES.contains(&cli.command.as_str()) {
        eprintln!(
            "error: unknown check `{}`; expected one of: all, {}",
            cli.command,
            CHECK_NAMES.join(", ")
        );
        return ExitCode::from(2);
    }
    let model = match resolve_model(&cli.model) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let overrides = BoundOverrides { order: cli.max_order, degree: cli.max_degree };
    let reports = match run_check(&model, &cli.command, overrides) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for report in &reports {
        print_report(report, cli.quiet);
    }
    if let Some(path) = &cli.json {
        let doc = match serde_json::to_string_pretty(&reports) {
            Ok(d) => d,
            Err(e) => {
                eprintln!("error: cannot render JSON: {e}");
                return ExitCode::from(2);
            }
        };
        if let Err(e) = std::fs::write(path, doc) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    let any_fail = reports.iter().any(|r| r.verdict == Verdict::Fail);
    let any_inconclusive = reports.iter().any(|r| r.verdict == Verdict::Inconclusive);
    if any_fail {
        ExitCode::from(1)
    } else if any_inconclusive {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}
