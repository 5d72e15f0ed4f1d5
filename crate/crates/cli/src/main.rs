use clap::Parser;
use privleak_cli::{execute, Cli};
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            if cli.opts.out.is_none() {
                print!("{}", report.csv);
            }
            if report.success() {
                ExitCode::SUCCESS
            } else {
                eprintln!("privleak: {} infeasible row(s)", report.infeasible);
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("privleak: {e:#}");
            ExitCode::from(2)
        }
    }
}
