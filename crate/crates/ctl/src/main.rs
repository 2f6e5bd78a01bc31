use clap::Parser;
use oticctl::cli::{run, Cli, EXIT_USAGE};

fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Exit 1 on usage errors (clap defaults to 2); --help/--version stay 0.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = err.print();
            return std::process::ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(outcome) => std::process::ExitCode::from(outcome.exit_code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::ExitCode::from(EXIT_USAGE)
        }
    }
}
