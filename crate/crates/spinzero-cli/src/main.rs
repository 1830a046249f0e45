use clap::Parser;

fn main() {
    std::process::exit(spinzero_cli::app::run(spinzero_cli::app::Cli::parse()));
}
