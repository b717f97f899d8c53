use clap::Parser;
use ntupled::cli::{emit, run, Cli};

fn main() {
    let cli = Cli::parse();
    let out = run(&cli);
    std::process::exit(emit(&cli, &out));
}
