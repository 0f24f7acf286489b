use clap::Parser;
use holorealize_cli::{exit, init_logging, run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version exit cleanly; usage errors are I/O-class
            // failures, since code 2 is reserved for contrary verdicts.
            let code = if e.use_stderr() { exit::IO } else { exit::OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    init_logging();
    std::process::exit(run(&cli));
}
