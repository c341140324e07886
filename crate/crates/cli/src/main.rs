use clap::Parser;

fn main() {
    let cli = imdd_cli::Cli::parse();
    if let Err(e) = imdd_cli::run(&cli) {
        eprintln!("imdd: {e}");
        std::process::exit(e.exit_code());
    }
}
