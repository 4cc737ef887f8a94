use clap::Parser;
use slan_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = slan_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
