use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use fracblow_cli::{run, Cli};

/// Caps the rayon pool when `FRACBLOW_THREADS` is set.
fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("FRACBLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("FRACBLOW_THREADS = {value:?} is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(message) = configure_threads() {
        println!("{}", json!({ "error": { "kind": "config", "message": message }, "exit_code": 2 }));
        return ExitCode::from(2);
    }
    match run(&cli.common, &cli.command) {
        Ok(outcome) => {
            println!("{}", outcome.verdict);
            for path in &outcome.artifacts {
                eprintln!("wrote {}", path.display());
            }
            ExitCode::from(outcome.exit_code)
        }
        Err(e) => {
            let code = e.exit_code();
            println!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() }, "exit_code": code }));
            ExitCode::from(code)
        }
    }
}
