use clap::Parser;

use conefix_cli::{execute, Cli, RunConfig, EXIT_INPUT_ERROR, SEED_ENV};

fn main() {
    let cli = Cli::parse();
    let env_seed = std::env::var(SEED_ENV).ok();
    let code = match RunConfig::from_cli(cli, env_seed.as_deref()) {
        Ok(config) => execute(&config),
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT_ERROR
        }
    };
    std::process::exit(code);
}
