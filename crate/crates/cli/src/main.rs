use clap::Parser;
use patchregen_cli::exit::classify;
use patchregen_cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        let class = classify(&e);
        eprintln!("error: {e:#}");
        std::process::exit(class.code());
    }
}
