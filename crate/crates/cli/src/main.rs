use clap::Parser;

fn main() {
    let cli = lrcorr_cli::Cli::parse();
    std::process::exit(lrcorr_cli::run(&cli));
}
