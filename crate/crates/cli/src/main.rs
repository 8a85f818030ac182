use std::process::ExitCode;

use cfaug_cli::exit::{status_of, OK};

fn main() -> ExitCode {
    match cfaug_cli::run_from(std::env::args_os().collect()) {
        Ok(()) => ExitCode::from(OK),
        Err(e) => {
            if let Some(clap_err) = e.downcast_ref::<clap::Error>() {
                let _ = clap_err.print();
                return ExitCode::from(if clap_err.use_stderr() { status_of(&e) } else { OK });
            }
            eprintln!("error: {e:#}");
            ExitCode::from(status_of(&e))
        }
    }
}
