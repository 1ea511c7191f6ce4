use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = wahkon_cli::parse_args();
    match wahkon_cli::run(&cli) {
        Ok(dir) => {
            println!("run directory: {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
