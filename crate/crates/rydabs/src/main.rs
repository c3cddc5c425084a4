use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use rydabs::{commands, output, RunConfig};

/// Monte-Carlo and steady-state models of a single-photon absorber.
#[derive(Parser, Debug)]
#[command(name = "rydabs", version)]
struct Cli {
    /// TOML or JSON run configuration.
    #[arg(long, global = true, conflicts_with = "paper_defaults")]
    config: Option<PathBuf>,
    /// Use the built-in measured parameter set (the default when no config is given).
    #[arg(long, global = true)]
    paper_defaults: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    shots: Option<u64>,
    /// Results root; each invocation gets its own subdirectory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override any config key, e.g. `--set absorber.p_ryd=0.5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Output photons and ion statistics against input photon number.
    Sweep,
    /// Input and transmitted pulse shapes.
    Pulse,
    /// Intensity correlation map of the transmitted light.
    G2,
    /// Steady-state transmission spectrum.
    Spectrum,
    /// Fit the dephasing rate to a measured spectrum.
    FitGamma {
        #[arg(long)]
        data: PathBuf,
    },
    /// Absorbers in series.
    Cascade {
        /// Fock-state input instead of a coherent pulse.
        #[arg(long)]
        fock: Option<u32>,
        #[arg(long)]
        stages: Option<usize>,
    },
    /// Check the Monte-Carlo against closed forms.
    Validate {
        /// Compare against a different absorption probability (negative control).
        #[arg(long)]
        oracle_p_ryd: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sweep => "sweep",
            Command::Pulse => "pulse",
            Command::G2 => "g2",
            Command::Spectrum => "spectrum",
            Command::FitGamma { .. } => "fit-gamma",
            Command::Cascade { .. } => "cascade",
            Command::Validate { .. } => "validate",
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut overrides = Vec::new();
    if let Some(s) = cli.seed {
        overrides.push(format!("run.seed={s}"));
    }
    if let Some(s) = cli.shots {
        overrides.push(format!("run.shots={s}"));
    }
    if let Some(o) = &cli.out {
        overrides.push(format!("run.out={:?}", o.display().to_string()));
    }
    if let Command::Cascade { fock, stages } = &cli.command {
        if let Some(n) = fock {
            overrides.push(format!("cascade.fock={n}"));
        }
        if let Some(n) = stages {
            overrides.push(format!("cascade.default_stages={n}"));
        }
    }
    overrides.extend(cli.set.iter().cloned());
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    if cfg.run.shots == 0 {
        bail!("run.shots must be at least 1");
    }
    for w in cfg.validate()? {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn execute(cli: &Cli, cfg: &RunConfig) -> Result<output::CommandOutput> {
    match &cli.command {
        Command::Sweep => commands::sweep(cfg),
        Command::Pulse => commands::pulse(cfg),
        Command::G2 => commands::g2(cfg),
        Command::Spectrum => commands::spectrum(cfg),
        Command::FitGamma { data } => commands::fit_gamma(cfg, data),
        Command::Cascade { .. } => commands::cascade(cfg),
        Command::Validate { oracle_p_ryd } => commands::validate(cfg, *oracle_p_ryd),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let result = execute(&cli, &cfg).and_then(|out| {
        let dir = output::invocation_dir(&cfg.run.out, cli.command.name())?;
        output::write_all(&dir, &cfg, &out)?;
        println!("{}", serde_json::to_string_pretty(&out.summary)?);
        eprintln!("wrote {}", dir.display());
        Ok(out.passed)
    });
    match result {
        Ok(Some(false)) => ExitCode::from(2),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
