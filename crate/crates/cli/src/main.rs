use clap::Parser;
use diffcoarsen_cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    let (status, code) = execute(&cli);
    if code != 0 {
        eprintln!("error: {}", status["message"].as_str().unwrap_or_default());
    }
    println!("{status}");
    std::process::exit(code);
}
