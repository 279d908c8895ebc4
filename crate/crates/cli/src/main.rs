//! `hypokit` command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hypokit_cli::{catalog, compare, run_path, EXIT_CONFIG, EXIT_OK};

#[derive(Parser)]
#[command(name = "hypokit", version, about = "Spectral experiments for hypoelliptic kinetic operators")]
struct Cli {
    /// Worker threads; 1 gives bit-identical results.
    #[arg(long, global = true, env = "HYPOKIT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Print the experiment catalog with default configs.
    List {
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Compare two run directories.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("config error: threads must be positive");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot configure threads: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let code = match cli.command {
        Command::Run { config } => run_path(&config, &mut std::io::stderr()),
        Command::List { json } => {
            if json {
                println!("{}", serde_json::to_string_pretty(&catalog::catalog()).expect("catalog serializes"));
            } else {
                print!("{}", catalog::render_text());
            }
            EXIT_OK
        }
        Command::Compare { a, b, json } => match compare::compare_runs(&a, &b) {
            Ok(r) => {
                if json {
                    println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
                } else {
                    print!("{}", r.render());
                }
                EXIT_OK
            }
            Err(e) => {
                eprintln!("{e}");
                EXIT_CONFIG
            }
        },
    };
    ExitCode::from(code as u8)
}
