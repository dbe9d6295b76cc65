//! `qrframe` command line: run scenarios, list presets, run the invariant suite.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qrframe::cli::{
    emit_report, error_exit_code, exit, exit_code, load, preset, verify_all, Format, Overrides,
    RunReport, PRESETS,
};

#[derive(Parser)]
#[command(
    name = "qrframe",
    version,
    about = "Relational lattice reference-frame simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file, or `preset:NAME`.
    Run {
        scenario: String,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run the structural invariant suite and every preset.
    Verify {
        #[command(flatten)]
        opts: Opts,
    },
    /// List shipped scenarios.
    Presets,
}

#[derive(Args)]
struct Opts {
    /// Write reports into this directory instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Overrides every tolerance in the scenario.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_dimension: Option<usize>,
}

impl Opts {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            tolerance: self.tolerance,
            max_dimension: self.max_dimension,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { scenario, opts } => run(&scenario, &opts),
        Command::Verify { opts } => verify(&opts),
        Command::Presets => {
            for (name, _) in PRESETS {
                let description = preset(name).map(|c| c.description).unwrap_or_default();
                println!("{name:<30} {description}");
            }
            exit::OK
        }
    };
    ExitCode::from(code)
}

fn run(source: &str, opts: &Opts) -> u8 {
    let report = load(source).and_then(|mut cfg| {
        cfg.apply(&opts.overrides());
        qrframe::cli::run_scenario(&cfg)
    });
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit_code(&e);
        }
    };
    if let Err(code) = write(&report, opts) {
        return code;
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!(
            "FAIL {}: defect {:e} (tolerance {:e}) {}",
            c.name, c.defect, c.tolerance, c.detail
        );
    }
    if report.degenerate {
        eprintln!("degenerate: the evolved state has no physical component");
    }
    exit_code(&report)
}

fn write(report: &RunReport, opts: &Opts) -> Result<(), u8> {
    match &opts.output {
        Some(dir) => match emit_report(report, opts.format, dir) {
            Ok(files) => {
                for f in files {
                    eprintln!("wrote {}", f.display());
                }
                Ok(())
            }
            Err(e) => {
                eprintln!("error: {e}");
                Err(error_exit_code(&e))
            }
        },
        None => {
            match opts.format {
                Format::Json => print!("{}", report.to_json()),
                Format::Csv => print!("{}\n{}", report.probability_csv(), report.checks_csv()),
            }
            Ok(())
        }
    }
}

fn verify(opts: &Opts) -> u8 {
    let overrides = opts.overrides();
    let entries = verify_all(&overrides);
    let mut failed = 0;
    for e in &entries {
        let mark = if e.check.passed { "PASS" } else { "FAIL" };
        println!(
            "{mark} {:<28} {:<32} defect {:>10.3e}  tolerance {:.1e}",
            e.suite, e.check.name, e.check.defect, e.check.tolerance
        );
        if !e.check.passed {
            failed += 1;
            println!("     {}", e.check.detail);
        }
    }
    println!("{} checks, {} failed", entries.len(), failed);

    if let Some(dir) = &opts.output {
        for (name, _) in PRESETS {
            let report = preset(name).and_then(|mut cfg| {
                cfg.apply(&overrides);
                qrframe::cli::run_scenario(&cfg)
            });
            let written = report.and_then(|r| emit_report(&r, opts.format, dir));
            if let Err(e) = written {
                eprintln!("error: {name}: {e}");
                return error_exit_code(&e);
            }
        }
    }
    if failed == 0 {
        exit::OK
    } else {
        exit::CHECK_FAILED
    }
}
