use clap::Parser;

fn main() {
    let cli = nmrb_cli::Cli::parse();
    if let Err(e) = nmrb_cli::run(cli) {
        eprintln!("nmrb: {e}");
        std::process::exit(e.exit_code());
    }
}
