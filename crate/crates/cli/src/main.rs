use std::process::ExitCode;

use clap::Parser;
use simrag_cli::commands::Context;
use simrag_cli::settings::Settings;
use simrag_cli::{Category, Cli, Failure};
use simrag_core::llm::API_KEY_ENV;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let lookup = |name: &str| std::env::var(name).ok();
    let outcome = Settings::load(cli.opts.layer(), cli.opts.config.as_deref(), lookup)
        .map_err(|e| Failure::new(Category::Config, e))
        .and_then(|settings| {
            let ctx = Context {
                settings,
                api_key: lookup(API_KEY_ENV).filter(|k| !k.is_empty()),
            };
            ctx.dispatch(cli.command)
        });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.category.code())
        }
    }
}
