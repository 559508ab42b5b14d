use clap::Parser;
use edfluid::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = execute(cli) {
        eprintln!("error [{}]: {e}", e.kind());
        std::process::exit(e.exit_code());
    }
}
