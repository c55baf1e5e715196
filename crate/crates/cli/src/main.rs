use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pvpayback::catalog::ProductCatalog;
use pvpayback::dispatch::TerminalSoc;
use pvpayback::profile::{generate_synthetic, LOAD_COLUMN, PV_COLUMN};
use pvpayback::run::{explain, run, Inputs, RunConfig};
use pvpayback::scenario::{enumerate_scenarios, worst_case_count, write_scenarios_csv};
use pvpayback::subsidy::CapMode;
use pvpayback::tariff::ContractId;
use pvpayback::{Error, Result};

#[derive(Parser)]
#[command(
    name = "pvpayback",
    version,
    about = "PV, battery and inverter payback under Flemish tariffs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the admissible scenarios.
    Scenarios {
        #[command(flatten)]
        opts: Options,
        /// Write the list here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Simulate every scenario and write reports.
    Run {
        #[command(flatten)]
        opts: Options,
    },
    /// Write synthetic load and PV profiles.
    SynthProfiles {
        #[command(flatten)]
        opts: Options,
    },
    /// Break down cost, subsidy and payback of one scenario.
    Explain {
        id: usize,
        #[command(flatten)]
        opts: Options,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Cap {
    Combined,
    PerTechnology,
}

#[derive(Clone, Copy, ValueEnum)]
enum Terminal {
    Free,
    ReturnToStart,
}

/// Flags override values from `--config`.
#[derive(Args)]
struct Options {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    contracts: Option<PathBuf>,
    #[arg(long)]
    subsidies: Option<PathBuf>,
    /// C1, C2, C3 or C4.
    #[arg(long)]
    contract: Option<ContractId>,
    /// Comma-separated subsidy years.
    #[arg(long, value_delimiter = ',')]
    years: Option<Vec<u16>>,
    /// Interval length in minutes.
    #[arg(long)]
    interval: Option<u32>,
    #[arg(long)]
    calendar_year: Option<i32>,
    /// Load profile CSV (requires --pv).
    #[arg(long)]
    load: Option<PathBuf>,
    /// PV generation per kWp CSV (requires --load).
    #[arg(long)]
    pv: Option<PathBuf>,
    /// Seed of the synthetic profiles.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    annual_load_kwh: Option<f64>,
    #[arg(long)]
    pv_yield: Option<f64>,
    #[arg(long)]
    pv_cap: Option<f64>,
    #[arg(long)]
    band_low: Option<f64>,
    #[arg(long)]
    band_high: Option<f64>,
    #[arg(long, value_enum)]
    cap_mode: Option<Cap>,
    #[arg(long, value_enum)]
    terminal: Option<Terminal>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write the price series.
    #[arg(long)]
    prices: bool,
    /// Write the dispatch of this scenario (repeatable).
    #[arg(long = "trace")]
    traces: Vec<usize>,
}

impl Options {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_path(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value.clone() {
                    $field = v;
                }
            };
        }
        if self.catalog.is_some() {
            c.catalog = self.catalog.clone();
        }
        if self.contracts.is_some() {
            c.contracts = self.contracts.clone();
        }
        if self.subsidies.is_some() {
            c.subsidies = self.subsidies.clone();
        }
        if self.load.is_some() || self.pv.is_some() {
            c.load_profile = self.load.clone();
            c.pv_profile = self.pv.clone();
        }
        set!(c.contract, self.contract);
        set!(c.years, self.years);
        set!(c.interval_minutes, self.interval);
        set!(c.calendar_year, self.calendar_year);
        set!(c.synthetic.seed, self.seed);
        set!(c.synthetic.annual_load_kwh, self.annual_load_kwh);
        set!(c.synthetic.pv_yield_kwh_per_kwp, self.pv_yield);
        set!(c.sizing.pv_cap, self.pv_cap);
        set!(c.sizing.band_low, self.band_low);
        set!(c.sizing.band_high, self.band_high);
        set!(c.threads, self.threads);
        set!(c.output_dir, self.out);
        if let Some(m) = self.cap_mode {
            c.cap_mode = match m {
                Cap::Combined => CapMode::Combined,
                Cap::PerTechnology => CapMode::PerTechnology,
            };
        }
        if let Some(t) = self.terminal {
            c.simulation.terminal = match t {
                Terminal::Free => TerminalSoc::Free,
                Terminal::ReturnToStart => TerminalSoc::ReturnToStart,
            };
        }
        c.write_prices |= self.prices;
        if !self.traces.is_empty() {
            c.dispatch_traces = self.traces.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn scenarios(opts: &Options, output: Option<&PathBuf>) -> Result<()> {
    let c = opts.config()?;
    let catalog = match &c.catalog {
        Some(p) => ProductCatalog::from_path(p)?,
        None => ProductCatalog::bundled(),
    };
    let list = enumerate_scenarios(&catalog, &c.sizing)?;
    let worst = worst_case_count(&catalog, &c.sizing)?;
    match output {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?;
            write_scenarios_csv(&list, f)?;
        }
        None => write_scenarios_csv(&list, std::io::stdout().lock())?,
    }
    eprintln!("{} admissible scenarios (worst case {worst})", list.len());
    Ok(())
}

fn synth(opts: &Options) -> Result<()> {
    let c = opts.config()?;
    let (load, pv) = generate_synthetic(&c.synthetic, &c.calendar(), c.interval_minutes)?;
    let dir = &c.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    for (name, column, profile) in [("load.csv", LOAD_COLUMN, &load), ("pv.csv", PV_COLUMN, &pv)] {
        let path = dir.join(name);
        let f = fs::File::create(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        profile.write_csv(column, std::io::BufWriter::new(f))?;
        println!("{}", path.display());
    }
    eprintln!(
        "load {:.1} kWh/yr, pv {:.1} kWh/kWp/yr",
        load.total(),
        pv.total()
    );
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Scenarios { opts, output } => scenarios(&opts, output.as_ref()),
        Command::Run { opts } => {
            let c = opts.config()?;
            let outcome = run(&c)?;
            for f in &outcome.files {
                println!("{}", f.display());
            }
            let s = &outcome.summary.results;
            eprintln!(
                "{} scenarios ({} PV only), baseline {:.2} EUR/yr",
                s.scenarios, s.pv_only, s.baseline_cost
            );
            for (y, ys) in &s.by_year {
                if let Some(b) = ys.best_overall {
                    eprintln!(
                        "  {y}: best payback {:.2} yr (scenario {})",
                        b.years, b.scenario_id
                    );
                }
            }
            Ok(())
        }
        Command::SynthProfiles { opts } => synth(&opts),
        Command::Explain { id, opts } => {
            let c = opts.config()?;
            let inputs = Inputs::load(&c)?;
            print!("{}", explain(&inputs, id)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
