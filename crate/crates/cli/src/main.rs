use std::process::ExitCode;

use hasimoto_cli::{parse_args, run};

fn main() -> ExitCode {
    match run(parse_args()) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serialises"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.report()).expect("error serialises"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
