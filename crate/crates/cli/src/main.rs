use clap::Parser;
use taxel_cli::{dispatch, exit_code, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TAXEL_LOG", "warn")).init();
    let result = dispatch(Cli::parse().command);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    std::process::exit(exit_code(&result));
}
