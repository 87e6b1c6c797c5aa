use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pencil_cli::{
    audit_config, audit_random, print_audit, reproduce_fig2, reproduce_fig3, run_config, Builtin, CliError,
    CliResult, RunConfig,
};
use pencil_core::io::Format;

#[derive(Parser)]
#[command(name = "pencil", version, about = "Eigenvalue curves of symmetric pencils A v = λ(B − tC)v")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    Fig2,
    Fig3,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in problem used when no config is given: pencil5x5 or fig2.
    #[arg(long, conflicts_with = "config")]
    builtin: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the randomized audits.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

impl Common {
    fn config(&self) -> CliResult<RunConfig> {
        let mut cfg = match (&self.config, &self.builtin) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => RunConfig::builtin(name.parse::<Builtin>()?),
            (None, None) => return Err(CliError::Input("give --config PATH or --builtin NAME".into())),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sweep, classify, audit and write curves.
    Run(Common),
    /// Write the data behind a figure.
    Reproduce {
        #[arg(value_enum)]
        which: Figure,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the audit suite and print per-check margins.
    Audit {
        #[command(flatten)]
        common: Common,
        /// Audit this many random pencils instead of a configured problem.
        #[arg(long, conflicts_with_all = ["config", "builtin"])]
        random: Option<usize>,
    },
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.config()?;
            let format = common.format.map(Format::from);
            let outcome = run_config(&cfg, common.out.as_deref(), format).map_err(|e| {
                if let CliError::AuditFailed(_) = &e {
                    eprintln!("one or more audits failed");
                }
                e
            })?;
            println!("curves written to {}", outcome.curves_path.display());
            if let Some(a) = &outcome.audit {
                print_audit(a);
            }
            Ok(())
        }
        Command::Reproduce { which, out, format, seed } => match which {
            Figure::Fig2 => {
                for p in reproduce_fig2(&out, format.into())? {
                    println!("wrote {}", p.display());
                }
                Ok(())
            }
            Figure::Fig3 => {
                let outcome = reproduce_fig3(&out, format.into(), seed)?;
                println!("wrote {}", outcome.curves_path.display());
                println!("wrote {}", outcome.summary_path.display());
                Ok(())
            }
        },
        Command::Audit { common, random } => match random {
            Some(n) => {
                let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
                audit_random(n, common.seed.unwrap_or(0), &out).map(|_| ())
            }
            None => audit_config(&common.config()?, common.out.as_deref()).map(|_| ()),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
