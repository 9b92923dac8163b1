use clap::Parser;
use divfree::cli::{run, Cli, Command};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Run(args) => run(args),
    };
    std::process::exit(code);
}
