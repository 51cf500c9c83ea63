use clap::Parser;

use survanchor::cli::{
    cmd_analyze, cmd_render, cmd_synth, cmd_train, resolve_analyze_config, resolve_config, Cli,
    Command,
};

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(args) => resolve_config(args).and_then(|c| cmd_synth(&c)),
        Command::Train(args) => resolve_config(args).and_then(|c| cmd_train(&c)),
        Command::Analyze(args) => resolve_analyze_config(args).and_then(|c| cmd_analyze(&c)),
        Command::Render(args) => resolve_config(args).and_then(|c| cmd_render(&c)),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
