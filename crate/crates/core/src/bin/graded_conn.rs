//! Batch checker for weighted-connection manifests.
//!
//! Usage: `graded-conn <manifest> <command> [--dump] [--seed N]`
//!
//! Exit codes: 0 all checks pass, 1 a mathematical check failed, 2 input
//! error (bad file, parse or semantic error, unknown names).

use std::process::ExitCode;

use clap::Parser;

#[derive(Parser)]
#[command(
    name = "graded-conn",
    about = "Exact symbolic checker for weighted A-connections on graded bundles"
)]
struct Cli {
    /// Manifest file
    manifest: String,
    /// Command: validate, curvature, gauge, lift, act, project, report,
    /// or selfcheck (seeded randomized identity suite)
    command: String,
    /// Extra command arguments (e.g. a connection name)
    args: Vec<String>,
    /// Emit a machine-readable structured report with stable keys
    #[arg(long)]
    dump: bool,
    /// Seed for the randomized property suites (selfcheck)
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = if cli.command == "selfcheck" {
        graded_conn::random::selfcheck(cli.seed)
    } else {
        let text = match std::fs::read_to_string(&cli.manifest) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read `{}`: {e}", cli.manifest);
                return ExitCode::from(2);
            }
        };
        graded_conn::manifest::execute(&text, &cli.command, &cli.args)
    };
    match report {
        Ok(rep) => {
            if cli.dump {
                println!("{}", rep.render_dump());
            } else {
                print!("{}", rep.render_text());
            }
            if rep.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
