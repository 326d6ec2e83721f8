use clap::{Parser, Subcommand, ValueEnum};
use pairsim_cli::commands::{cmd_device, cmd_fit, cmd_sweep, cmd_zwm, write_rows, FitModelChoice};
use pairsim_cli::config::{AlphaScaling, ExperimentConfig, Overrides, Statistics};
use pairsim_cli::error::Result;
use std::path::PathBuf;

/// Correlated photon-pair experiment simulator.
#[derive(Parser)]
#[command(name = "pairsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the derived device parameters and efficiency budget
    Device {
        /// Experiment description (TOML)
        #[arg(long)]
        config: PathBuf,
        /// How waveguide loss responds to slow light
        #[arg(long, value_enum, default_value_t)]
        alpha_scaling: AlphaScalingArg,
    },
    /// Run the coincidence measurement over the power sweep, write CSV
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        /// Override the config's master seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's pulses per sweep point
        #[arg(long)]
        pulses: Option<u64>,
        /// Override the pair-number statistics
        #[arg(long, value_enum)]
        stats: Option<StatsArg>,
        #[arg(long, value_enum, default_value_t)]
        alpha_scaling: AlphaScalingArg,
    },
    /// Run the nonclassicality witness (pair + both self runs) per point
    Zwm {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        pulses: Option<u64>,
        #[arg(long, value_enum)]
        stats: Option<StatsArg>,
        #[arg(long, value_enum, default_value_t)]
        alpha_scaling: AlphaScalingArg,
    },
    /// Least-squares fit of a results-CSV column against pump power
    Fit {
        /// Results CSV produced by `sweep` or `zwm`
        csv: PathBuf,
        /// Fit model
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Column holding the pump power
        #[arg(long, default_value = "power_w")]
        x_col: String,
        /// Column to fit
        #[arg(long, default_value = "mu_c_est")]
        y_col: String,
        /// Column holding per-point uncertainties (omit for unit weights)
        #[arg(long)]
        sigma_col: Option<String>,
        /// Device config: with --model pure-quadratic, also extract the
        /// effective nonlinearity from the fitted coefficient
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        alpha_scaling: AlphaScalingArg,
    },
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
enum AlphaScalingArg {
    /// Loss stays at its configured value
    #[default]
    Fixed,

    /// Loss scales with the slowdown factor
    ProportionalS,
}

impl From<AlphaScalingArg> for AlphaScaling {
    fn from(a: AlphaScalingArg) -> Self {
        match a {
            AlphaScalingArg::Fixed => AlphaScaling::Fixed,
            AlphaScalingArg::ProportionalS => AlphaScaling::ProportionalS,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StatsArg {
    Poisson,
    Thermal,
}

impl From<StatsArg> for Statistics {
    fn from(s: StatsArg) -> Self {
        match s {
            StatsArg::Poisson => Statistics::Poisson,
            StatsArg::Thermal => Statistics::Thermal,
        }
    }
}

fn overrides(
    seed: Option<u64>,
    pulses: Option<u64>,
    stats: Option<StatsArg>,
    alpha_scaling: AlphaScalingArg,
) -> Overrides {
    Overrides {
        seed,
        pulses,
        statistics: stats.map(Into::into),
        alpha_scaling: alpha_scaling.into(),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Device { config, alpha_scaling } => {
            let config = ExperimentConfig::load(&config)?;
            println!("{}", cmd_device(&config, alpha_scaling.into())?);
        }
        Command::Sweep { config, out, seed, pulses, stats, alpha_scaling } => {
            let config = ExperimentConfig::load(&config)?;
            let over = overrides(seed, pulses, stats, alpha_scaling);
            let rows = cmd_sweep(&config, &over)?;
            write_rows(&rows, &out)?;
            println!("wrote {} sweep point(s) to {}", rows.len(), out.display());
        }
        Command::Zwm { config, out, seed, pulses, stats, alpha_scaling } => {
            let config = ExperimentConfig::load(&config)?;
            let over = overrides(seed, pulses, stats, alpha_scaling);
            let rows = cmd_zwm(&config, &over)?;
            write_rows(&rows, &out)?;
            println!("wrote {} witness point(s) to {}", rows.len(), out.display());
            for row in &rows {
                let (v, s) = (row.v.unwrap_or(f64::NAN), row.v_significance.unwrap_or(f64::NAN));
                println!("P = {:>10.4e} W   V = {v:>12.4}   significance {s:>8.2}σ", row.power_w);
            }
        }
        Command::Fit { csv, model, x_col, y_col, sigma_col, config, alpha_scaling } => {
            let model = match model {
                ModelArg::PureQuadratic => FitModelChoice::PureQuadratic,
                ModelArg::Poly2 => FitModelChoice::Poly2,
            };
            let config = config.map(|p| ExperimentConfig::load(&p)).transpose()?;
            let context = config.as_ref().map(|c| (c, alpha_scaling.into()));
            let report = cmd_fit(&csv, model, &x_col, &y_col, sigma_col.as_deref(), context)?;
            println!("{report}");
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    /// mu = c·P²
    PureQuadratic,
    /// mu = a·P + b·P²
    Poly2,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("{err}");
        std::process::exit(err.exit_code());
    }
}
