use std::process::ExitCode;

use clap::Parser;
use qdarwin_cli::{execute, write_output, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok((report, cfg)) => {
            if let Err(e) = write_output(&report, cfg.output_path.as_deref()) {
                eprintln!("qdarwin: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
            if report.exit_code != 0 {
                eprintln!(
                    "qdarwin: {} exited with status {}",
                    cfg.command, report.exit_code
                );
            }
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            eprintln!("qdarwin: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
