use std::process::ExitCode;

fn main() -> ExitCode {
    match taxokg::cli::run_from(std::env::args_os()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            print!("{}", e.output);
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
