use std::path::PathBuf;

use clap::Parser;
use mpsolve_cli::{run, Command};

/// Mountain-pass solver for singular semilinear elliptic equations on tori.
#[derive(Parser)]
#[command(name = "mpsolve", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration.
    config: PathBuf,
}

fn main() {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { mpsolve_cli::EXIT_CONFIG } else { 0 };
            std::process::exit(code);
        }
    };
    std::process::exit(run(args.command, &args.config));
}
