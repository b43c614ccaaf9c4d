use clap::Parser;
use pwave::cli::{exit_code, run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("pwave: {e}");
        std::process::exit(exit_code(&e));
    }
}
