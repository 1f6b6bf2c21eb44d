use clap::Parser;

use qtat_cli::commands::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let result = qtat_cli::init_threads(cli.threads).and_then(|_| run(cli.command));
    if let Err(e) = result {
        eprintln!("error: {e}");
        if let Some(hint) = e.hint() {
            eprintln!("{hint}");
        }
        std::process::exit(e.exit_code());
    }
}
