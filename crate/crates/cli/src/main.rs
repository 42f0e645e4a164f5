use clap::Parser;

fn main() {
    let cli = ovaug_cli::Cli::parse();
    std::process::exit(ovaug_cli::run(cli));
}
