use clap::Parser;

fn main() {
    let cli = volvol_cli::Cli::parse();
    std::process::exit(volvol_cli::execute(&cli));
}
