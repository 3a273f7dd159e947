use clap::Parser;

fn main() {
    let cli = hilfer::cli::Cli::parse();
    std::process::exit(hilfer::cli::run(cli));
}
