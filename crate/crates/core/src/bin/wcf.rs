use std::process::ExitCode;

use clap::Parser;
use wcf::cli::{argmax_x, cmd_cheat_alice, Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.run() {
        Ok(paths) => {
            for path in paths {
                println!("wrote {}", path.display());
            }
            if matches!(cli.command, Command::CheatAlice { .. }) {
                if let Some((x, step)) = cli
                    .resolve_config()
                    .and_then(|c| cmd_cheat_alice(&c))
                    .ok()
                    .and_then(|t| argmax_x(&t, "p_alice_wins"))
                {
                    println!("argmax p_alice_wins at x = {x:.4} (grid step {step:.4})");
                }
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
