use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use feller_lab::config::{parse_config_with, Overrides};
use feller_lab::run::run_experiment;
use feller_lab::schema::bundle_text;

#[derive(Parser)]
#[command(name = "feller", version, about = "Run stability experiments for Markov-Feller models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `master_seed` from the file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the config value, then $FELLER_OUT_DIR.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for path simulation.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config file and print the resolved form.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the JSON schema of configs and reports.
    Schema {
        #[arg(long)]
        print: bool,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            out,
            threads,
        } => {
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            let cfg = match parse_config_with(&config, seed) {
                Ok(c) => c.resolve(&Overrides { seed, out }),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match run_experiment(&cfg) {
                Ok(m) => {
                    for e in &m.experiments {
                        let verdicts: Vec<String> =
                            e.verdicts.iter().map(|v| format!("{}={:?}", v.condition, v.verdict)).collect();
                        match &e.error {
                            None => println!("{:<28} ok    {:>8.2}s  {}", e.name, e.seconds, verdicts.join(" ")),
                            Some(err) => println!("{:<28} ERROR {err}", e.name),
                        }
                    }
                    println!("wrote {}", cfg.out_dir().display());
                    if m.succeeded() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Validate { config } => match parse_config_with(&config, None) {
            Ok(c) => {
                let resolved = c.resolve(&Overrides::default());
                emit(&format!("{}\n", serde_json::to_string_pretty(&resolved).expect("config serializes")));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Schema { print } => {
            if print {
                emit(&bundle_text());
            } else {
                println!("use --print to write the schema to stdout");
            }
            ExitCode::SUCCESS
        }
    }
}

/// Writes to stdout; a closed pipe (`feller schema --print | head`) is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}
