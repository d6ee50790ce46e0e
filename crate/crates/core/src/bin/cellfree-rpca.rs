use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cellfree_rpca::geometry::generate_layout;
use cellfree_rpca::sim::{layout_schedule, layout_seed, run_experiment, write_results, ExperimentConfig};
use cellfree_rpca::uplink_receiver::EstimatorKind;
use cellfree_rpca::Result;

#[derive(Parser)]
#[command(name = "cellfree-rpca", version, about = "Cell-free uplink simulator with R-PCA subspace estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full Monte-Carlo experiment and write result files.
    Simulate(Overrides),
    /// Export the SRS hopping schedule of one layout as CSV.
    Schedule {
        #[command(flatten)]
        overrides: Overrides,
    /// Layout index whose UE positions drive the square allocation.
        #[arg(long, default_value_t = 0)]
        layout: usize,
    /// Destination CSV file.
        #[arg(long, default_value = "schedule.csv")]
        csv: PathBuf,
    },
    /// Print the fully resolved configuration as TOML.
    Config(Overrides),
}

#[derive(Args)]
#[allow(non_snake_case)]
struct Overrides {
    /// TOML (or .json) configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of RUs.
    #[arg(long = "L")]
    L: Option<usize>,
    /// Antennas per RU.
    #[arg(long = "M")]
    M: Option<usize>,
    /// Number of UEs.
    #[arg(long = "K")]
    K: Option<usize>,
    /// Latin square order (must be prime).
    #[arg(long = "N")]
    N: Option<usize>,
    /// SRS slots per subspace estimate.
    #[arg(long = "S")]
    S: Option<usize>,
    /// Column-sparsity weight of the outlier-pursuit program.
    #[arg(long)]
    lambda: Option<f64>,
    /// Number of orthogonal DMRS pilots.
    #[arg(long = "tau-p")]
    tau_p: Option<usize>,
    /// Random RU/UE layouts.
    #[arg(long)]
    layouts: Option<usize>,
    /// Fading draws per layout.
    #[arg(long)]
    fading: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated estimator kinds: ideal, sp, pp, pm.
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<EstimatorKind>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! apply {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$field = v; })*
            };
        }
        apply!(L => rus, M => antennas, K => ues, N => hopping_order, lambda => lambda, tau_p => tau_p,
               layouts => layouts, fading => fading, seed => seed, kinds => kinds, out => output_dir);
        if let Some(s) = self.S {
            cfg.srs_slots = Some(s);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(o) => {
            let cfg = o.resolve()?;
            log::info!("running {} layouts with kinds {:?}", cfg.layouts, cfg.kinds);
            let results = run_experiment(&cfg)?;
            for path in write_results(&results, &cfg.output_dir)? {
                println!("{}", path.display());
            }
        }
        Command::Schedule { overrides, layout, csv } => {
            let cfg = overrides.resolve()?;
            let positions = generate_layout(cfg.rus, cfg.ues, cfg.area_side, &cfg.pathloss, layout_seed(cfg.seed, layout))?;
            layout_schedule(&cfg, &positions)?.write_csv(&csv)?;
            println!("{}", csv.display());
        }
        Command::Config(o) => print!("{}", o.resolve()?.to_toml()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
