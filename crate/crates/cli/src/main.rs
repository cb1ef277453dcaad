mod args;
mod commands;
mod failure;
mod io;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use failure::Failure;

fn run(cli: &Cli) -> Result<String, Failure> {
    let mut out = String::new();
    match &cli.command {
        Command::Detect(a) => commands::detect_cmd(a, &mut out)?,
        Command::Path(a) => commands::path_cmd(a, &mut out)?,
        Command::Estimate(a) => commands::estimate_cmd(a, &mut out)?,
        Command::Infer(a) => commands::infer_cmd(a, &mut out)?,
        Command::Simulate(a) => commands::simulate_cmd(a, &mut out)?,
        Command::Bench(a) => commands::bench_cmd(a, &mut out)?,
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => Failure::Usage(String::new()).exit_code(),
            };
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("{}", Failure::Usage("--threads must be positive".into()));
            return Failure::Usage(String::new()).exit_code();
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("warning: thread pool already configured: {e}");
        }
    }
    let result = run(&cli).and_then(|text| match &cli.output {
        Some(path) => io::write_text(path, &text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Data(format!("cannot write output: {e}"))),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mcscan: {f}");
            f.exit_code()
        }
    }
}
