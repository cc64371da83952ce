use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sonichole_cli::{recipes, run};

/// Runs a sonichole experiment described by a flat `key = value` config.
#[derive(Parser)]
#[command(version, about)]
struct Args {
    /// Config file, or the name of a bundled recipe.
    #[arg(long, required_unless_present = "list_recipes")]
    config: Option<PathBuf>,
    /// Output directory [default: out/<name>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
    /// Prints the bundled recipes and exits.
    #[arg(long)]
    list_recipes: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list_recipes {
        print!("{}", recipes::listing());
        return ExitCode::SUCCESS;
    }
    let config = args.config.expect("clap enforces --config");
    match run(&config, args.out.as_deref(), args.seed) {
        Ok(o) => {
            for c in &o.manifest.checks {
                println!("[{}] {}: {:e} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.rule);
            }
            println!("artifacts in {}", o.out.display());
            ExitCode::from(o.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
