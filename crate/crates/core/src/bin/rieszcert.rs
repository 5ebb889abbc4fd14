use clap::Parser;
use rieszcert::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
