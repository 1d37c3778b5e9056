use clap::Parser;

use mixlayer::cli::{exit_code, print_summary, run, Cli};

fn main() {
    let cli = Cli::parse();
    let result = run(cli);
    match &result {
        Ok(out) => print_summary(out),
        Err(e) => eprintln!("error: {e}"),
    }
    std::process::exit(exit_code(&result));
}
