//! `dfw-lab`: experiment CLI for multi-task linear operator recovery.
//!
//! Subcommands:
//!   run --config <path>       run an experiment, writing CSVs + summary.json
//!   transfer --config <path>  evaluate transfer fine-tuning of a finished run
//!   presets [name]            print stock configs as JSON

use std::process::ExitCode;

use dfw_lab::config::ExperimentConfig;
use dfw_lab::{experiment, presets, transfer};

const USAGE: &str = "\
dfw-lab: multi-task operator recovery experiments

USAGE:
  dfw-lab run --config <path>       run the experiment described by a config
  dfw-lab transfer --config <path>  fine-tune held-out tasks on a finished run
  dfw-lab presets [name]            print stock configs (regression|sysid|imitation)

Environment:
  DFW_LAB_THREADS   worker count for variant x trial jobs (default 1);
                    outputs are identical for any worker count.
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.first().map(String::as_str) {
        Some("run") => match config_from_args(&args[1..]) {
            Ok(config) => match experiment::run_experiment(&config) {
                Ok(artifacts) => {
                    println!(
                        "wrote {} CSV files and {}",
                        artifacts.csv_paths.len(),
                        artifacts.summary_path.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e.to_string()),
            },
            Err(msg) => usage_error(&msg),
        },
        Some("transfer") => match config_from_args(&args[1..]) {
            Ok(config) => match transfer::run_transfer_eval(&config) {
                Ok(path) => {
                    println!("wrote {}", path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e.to_string()),
            },
            Err(msg) => usage_error(&msg),
        },
        Some("presets") => match args.get(1).map(String::as_str) {
            None => {
                println!("{}", presets::presets_document());
                ExitCode::SUCCESS
            }
            Some(name) => match presets::preset(name) {
                Some(config) => {
                    println!("{}", config.to_json());
                    ExitCode::SUCCESS
                }
                None => usage_error(&format!(
                    "unknown preset {name:?}; available: {}",
                    presets::PRESET_NAMES.join(", ")
                )),
            },
        },
        Some("--help") | Some("-h") | Some("help") => {
            print!("{USAGE}");
            ExitCode::SUCCESS
        }
        Some(other) => usage_error(&format!("unknown subcommand {other:?}")),
        None => usage_error("missing subcommand"),
    }
}

fn config_from_args(args: &[String]) -> Result<ExperimentConfig, String> {
    let path = match args {
        [flag, path] if flag == "--config" => path,
        _ => return Err("expected: --config <path>".into()),
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {path}: {e}"))?;
    ExperimentConfig::from_json(&text).map_err(|e| e.to_string())
}

fn fail(message: &str) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::FAILURE
}

fn usage_error(message: &str) -> ExitCode {
    eprintln!("error: {message}\n\n{USAGE}");
    ExitCode::from(2)
}
