use clap::Parser;

fn main() {
    std::process::exit(toral_lab_cli::main_with(toral_lab_cli::Cli::parse()));
}
