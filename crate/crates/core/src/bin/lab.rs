use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;
use stoplab::harness::{
    raw_samples_csv, report_csv, report_json, Format, Lab, LabConfig, Report, Verdict, REGISTRY,
};
use stoplab::LabError;

#[derive(Parser)]
#[command(name = "lab", about = "Run the stopping-theorem experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment (E1..E14) or `all`.
    Run {
        id: String,
        /// key=value file; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        seed: Option<u128>,
        #[arg(long)]
        tree_steps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = ["json", "csv"])]
        format: Option<String>,
        /// Raw-sample CSV of the simulated batches.
        #[arg(long)]
        raw: Option<PathBuf>,
    },
    /// Print the registry.
    List,
}

fn usage(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("lab: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.command {
        Command::List => {
            for e in &REGISTRY {
                println!("{:<4} {:<70} {}", e.id, e.anchor, e.title);
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            id,
            config,
            n,
            dt,
            seed,
            tree_steps,
            out,
            format,
            raw,
        } => {
            let mut cfg = match config {
                Some(p) => match LabConfig::from_file(&p) {
                    Ok(c) => c,
                    Err(e) => return usage(e),
                },
                None => LabConfig::default(),
            };
            cfg.n = n.unwrap_or(cfg.n);
            cfg.dt = dt.unwrap_or(cfg.dt);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.tree_steps = tree_steps.unwrap_or(cfg.tree_steps);
            if let Some(f) = format {
                cfg.format = if f == "csv" {
                    Format::Csv
                } else {
                    Format::Json
                };
            }
            cfg.out = out.or(cfg.out);
            cfg.raw = raw.or(cfg.raw);
            run(cfg, &id)
        }
    }
}

fn run(cfg: LabConfig, id: &str) -> ExitCode {
    let lab = match Lab::new(cfg.clone()) {
        Ok(l) => l,
        Err(e) => return usage(e),
    };
    let ids: Vec<&str> = if id.eq_ignore_ascii_case("all") {
        REGISTRY.iter().map(|e| e.id).collect()
    } else {
        match stoplab::harness::lookup(id) {
            Ok(e) => vec![e.id],
            Err(e) => return usage(e),
        }
    };
    let mut experiments = Vec::new();
    let mut failed = false;
    for id in ids {
        let start = Instant::now();
        match lab.run(id) {
            Ok(e) => {
                eprintln!(
                    "{id}: {} ({:.1} s)",
                    e.verdict.as_str(),
                    start.elapsed().as_secs_f64()
                );
                failed |= e.verdict == Verdict::Fail;
                experiments.push(e);
            }
            Err(e @ LabError::InvalidConfig(_)) => return usage(e),
            Err(e) => {
                eprintln!("{id}: error: {e}");
                failed = true;
            }
        }
    }
    let report = Report::new(&cfg, experiments);
    let text = match cfg.format {
        Format::Json => report_json(&report),
        Format::Csv => report_csv(&report),
    };
    let written = match &cfg.out {
        Some(p) => std::fs::write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("lab: cannot write report: {e}");
        return ExitCode::from(1);
    }
    if let Some(p) = &cfg.raw {
        if let Err(e) = std::fs::write(p, raw_samples_csv(&lab.raw_rows())) {
            eprintln!("lab: cannot write raw samples: {e}");
            return ExitCode::from(1);
        }
    }
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
