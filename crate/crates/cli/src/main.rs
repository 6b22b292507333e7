use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use windops::pipeline::{self, PipelineConfig, PolicySet, TrainedModels};
use windops::regress::Family;
use windops::synthgen::GeneratorConfig;

#[derive(Parser)]
#[command(name = "windops", version, about = "Wind forecasts and production recommendations for pollution-aware plant operations")]
struct Cli {
    /// Pipeline config file (TOML key-value)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// Directory with sensors.csv, forecasts.csv and hourly.csv
    #[arg(long)]
    data: Option<PathBuf>,
    /// Directory for models, policies and reports
    #[arg(long)]
    artifacts: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated lead times in hours
    #[arg(long, value_delimiter = ',')]
    leads: Option<Vec<u32>>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sensor world and official forecasts
    Synth {
        #[arg(long, default_value_t = 2000)]
        hours: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (defaults to the config's data directory)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Target fraction of dangerous hours
        #[arg(long)]
        dangerous_rate: Option<f64>,
        /// Generator settings file (TOML), overridden by the flags above
        #[arg(long)]
        generator: Option<PathBuf>,
    },
    /// Aggregate minute sensor records into an hourly file
    Ingest {
        #[arg(long)]
        sensors: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train model banks and the stacked ensemble
    Train {
        /// Comma-separated model families
        #[arg(long, value_delimiter = ',')]
        families: Option<Vec<Family>>,
        /// Use every fourth grid point instead of the full search grids
        #[arg(long)]
        reduced_grid: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Per-lead forecast error tables on the test split
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
    /// Policy-tree commands
    Policy {
        #[command(subcommand)]
        command: PolicyCommand,
    },
    /// Replay the test period through the operational state machine
    Backtest {
        #[arg(long)]
        health_cost: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Serve the HTTP JSON API
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum PolicyCommand {
    /// Train policy trees over the health-cost grid and the given cost
    Train {
        #[arg(long)]
        health_cost: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
}

fn base_config(path: &Option<PathBuf>) -> Result<PipelineConfig> {
    let config = match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => {
            let mut c = PipelineConfig::default();
            c.apply_env()?;
            c
        }
    };
    config.validate()?;
    Ok(config)
}

fn apply(config: &mut PipelineConfig, common: &Common) -> Result<()> {
    if let Some(d) = &common.data {
        config.data_dir = d.clone();
    }
    if let Some(a) = &common.artifacts {
        config.artifacts_dir = a.clone();
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if let Some(l) = &common.leads {
        config.lead_times = l.clone();
        if !l.contains(&config.policy_lead) {
            config.policy_lead = *l.iter().min().context("empty lead list")?;
        }
    }
    config.validate()?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut config = base_config(&cli.config)?;
    match cli.command {
        Command::Synth {
            hours,
            seed,
            out,
            dangerous_rate,
            generator,
        } => {
            let mut g = match generator {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    toml::from_str::<GeneratorConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => GeneratorConfig::default(),
            };
            g.hours = hours;
            g.seed = seed;
            if let Some(r) = dangerous_rate {
                g.dangerous_rate = r;
            }
            let out = out.unwrap_or(config.data_dir.clone());
            let summary = pipeline::synth(&g, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Ingest { sensors, out, common } => {
            apply(&mut config, &common)?;
            let sensors = sensors.unwrap_or_else(|| config.data_dir.join(pipeline::SENSORS_FILE));
            let out = out.unwrap_or_else(|| config.data_dir.join(pipeline::HOURLY_FILE));
            let series = pipeline::ingest_file(&sensors, &out, &config)?;
            println!(
                "{} hours written to {} ({} still missing)",
                series.len(),
                out.display(),
                series.missing_hours()
            );
        }
        Command::Train {
            families,
            reduced_grid,
            common,
        } => {
            apply(&mut config, &common)?;
            if let Some(f) = families {
                config.families = f;
            }
            if reduced_grid {
                config.grid = pipeline::GridChoice::Reduced;
            }
            config.validate()?;
            let (series, archive) = pipeline::load_inputs(&config)?;
            let models = pipeline::train_models(&series, &archive, &config)?;
            models.save(&config.artifacts_dir)?;
            for bank in &models.banks {
                println!("{}: {} models", bank.family, bank.len());
            }
        }
        Command::Evaluate { common } => {
            apply(&mut config, &common)?;
            let (series, archive) = pipeline::load_inputs(&config)?;
            let models = TrainedModels::load(&config.artifacts_dir)?;
            let report = pipeline::evaluate(&series, &archive, &models, &config)?;
            pipeline::write_error_report(&report, &config.artifacts_dir)?;
            report.write_csv(std::io::stdout())?;
        }
        Command::Policy {
            command: PolicyCommand::Train { health_cost, common },
        } => {
            apply(&mut config, &common)?;
            if let Some(h) = health_cost {
                config.health_cost = h;
            }
            config.validate()?;
            let (series, archive) = pipeline::load_inputs(&config)?;
            let models = TrainedModels::load(&config.artifacts_dir)?;
            let set = pipeline::train_policies(&series, &archive, &models, &config, &config.policy_health_costs())?;
            set.save(config.artifacts_dir.join(pipeline::POLICIES_FILE))?;
            for p in &set.policies {
                println!("H={}: depth {}, {} leaves", p.health_cost, p.tree.depth(), p.tree.n_leaves());
            }
        }
        Command::Backtest { health_cost, common } => {
            apply(&mut config, &common)?;
            if let Some(h) = health_cost {
                config.health_cost = h;
            }
            config.validate()?;
            let (series, archive) = pipeline::load_inputs(&config)?;
            let models = TrainedModels::load(&config.artifacts_dir)?;
            let policies = PolicySet::load(config.artifacts_dir.join(pipeline::POLICIES_FILE))?;
            let (report, ledger) =
                pipeline::backtest(&series, &archive, &models, &policies, &config, config.health_cost)?;
            pipeline::write_backtest(&report, &ledger, &config.artifacts_dir)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Serve { port, common } => {
            apply(&mut config, &common)?;
            if let Some(p) = port {
                config.port = p;
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(windops::service::serve(config))?;
        }
    }
    Ok(())
}
