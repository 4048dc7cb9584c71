mod args;
mod commands;
mod manifest;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use esv_core::EsvError;
use serde_json::json;

use args::{Cli, Command};

/// Caps the worker pool at `ESV_THREADS` when set.
fn configure_threads() -> Result<(), EsvError> {
    let Ok(value) = std::env::var("ESV_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| EsvError::validation("ESV_THREADS", format!("'{value}' is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| EsvError::validation("ESV_THREADS", e.to_string()))
}

fn run(cli: &Cli) -> Result<serde_json::Map<String, serde_json::Value>, EsvError> {
    configure_threads()?;
    let started = Instant::now();
    let product = match &cli.command {
        Command::Attribute(a) => commands::attribute(a)?,
        Command::Contrast(a) => commands::contrast(a)?,
        Command::Ablate(a) => commands::ablate(a)?,
        Command::EvalApprox(a) => commands::eval_approx(a)?,
        Command::GenModel(a) => commands::gen_model(a)?,
        Command::GenFeatures(a) => commands::gen_features(a)?,
        Command::Rerun(a) => commands::rerun(a)?,
    };
    commands::finish(product, started)
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn report_error(json: bool, class: &str, code: i32, message: &str) -> ExitCode {
    let message = one_line(message);
    if json {
        eprintln!(
            "{}",
            json!({"error": {"class": class, "exit_code": code, "message": message}})
        );
    } else {
        eprintln!("error[{class}]: {message}");
    }
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // help and version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let json = std::env::args().any(|a| a == "--json");
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            return report_error(json, "validation", 2, first);
        }
    };
    match run(&cli) {
        Ok(summary) => {
            if !cli.quiet {
                if cli.json {
                    println!("{}", serde_json::Value::Object(summary));
                } else if let Some(path) = summary.get("output").and_then(|o| o.as_str()) {
                    let details: Vec<String> = summary
                        .iter()
                        .filter(|(k, _)| *k != "command" && *k != "output")
                        .map(|(k, v)| format!("{k}={v}"))
                        .collect();
                    println!(
                        "{}: wrote {path} ({})",
                        summary["command"].as_str().unwrap_or(""),
                        details.join(", ")
                    );
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => report_error(cli.json, e.class(), e.exit_code(), &e.to_string()),
    }
}
