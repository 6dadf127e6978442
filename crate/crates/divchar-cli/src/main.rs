use clap::Parser;

fn main() {
    let cli = divchar_cli::Cli::parse();
    std::process::exit(divchar_cli::run(cli));
}
