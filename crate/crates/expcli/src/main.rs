use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pima::SchedulerKind;
use pima_exp::{emit_plot_script, output, preset, run_calibration, run_sweep, to_csv, ExpError, ExpResult, Figure, SweepSpec};

const EXIT_CONFIG: u8 = 2;
const EXIT_ORACLE: u8 = 3;

#[derive(Parser)]
#[command(name = "pima-exp", version, about = "PIMA scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a traffic sweep and write the result table as CSV.
    Simulate(Box<SimulateArgs>),
    /// Run the oracle differential suites.
    Calibrate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Sweep spec (JSON). With --preset, only the overridden fields are needed.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<Figure>,
    /// CSV destination; defaults to the spec's output_path, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a matplotlib script next to the CSV.
    #[arg(long)]
    plot: bool,
    /// Figure style of the plot script; defaults to the preset.
    #[arg(long)]
    figure: Option<Figure>,
    /// Use seeds 0..k.
    #[arg(long)]
    seeds: Option<u64>,
    /// Frames per run (slots for SALOHA).
    #[arg(long)]
    frames: Option<u64>,
    #[arg(long, num_args = 1..)]
    scheduler: Vec<SchedulerKind>,
    /// Comma-separated total arrival rates.
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    #[arg(long)]
    n_users: Option<usize>,
    #[arg(long)]
    pia_len: Option<f64>,
    #[arg(long)]
    slot_ms: Option<f64>,
    #[arg(long)]
    belief_capacity: Option<usize>,
    #[arg(long)]
    warmup_fraction: Option<f64>,
    #[arg(long)]
    gfeo_max_users: Option<usize>,
}

impl SimulateArgs {
    fn spec(&self) -> ExpResult<SweepSpec> {
        let defaults = self.preset.map(preset);
        let mut spec = match (&self.config, defaults) {
            (Some(path), d) => SweepSpec::load(path, d.as_ref())?,
            (None, Some(d)) => d,
            (None, None) => return Err(ExpError::config("config", "either --config or --preset is required")),
        };
        if let Some(k) = self.seeds {
            spec.seeds = (0..k).collect();
        }
        if let Some(m) = self.frames {
            spec.base.horizon_frames = m;
        }
        if !self.scheduler.is_empty() {
            spec.schedulers = self.scheduler.clone();
        }
        if !self.lambda.is_empty() {
            spec.lambda_grid = self.lambda.clone();
        }
        let base = &mut spec.base;
        if let Some(v) = self.n_users {
            base.n_users = v;
        }
        if let Some(v) = self.pia_len {
            base.pia_len = v;
        }
        if let Some(v) = self.slot_ms {
            base.slot_ms = v;
        }
        if let Some(v) = self.belief_capacity {
            base.belief_capacity = v;
        }
        if let Some(v) = self.warmup_fraction {
            base.warmup_fraction = v;
        }
        if let Some(v) = self.gfeo_max_users {
            base.gfeo_max_users = v;
        }
        if let Some(out) = &self.out {
            spec.output_path = Some(out.clone());
        }
        Ok(spec)
    }
}

fn simulate(args: &SimulateArgs) -> ExpResult<()> {
    let spec = args.spec()?;
    let figure = args.figure.or(args.preset);
    if args.plot {
        if figure.is_none() {
            return Err(ExpError::config("figure", "--plot needs --figure or --preset"));
        }
        if spec.output_path.is_none() {
            return Err(ExpError::config("output_path", "--plot needs a CSV file (--out)"));
        }
    }
    let rows = run_sweep(&spec)?;
    let csv = to_csv(&rows);
    match &spec.output_path {
        Some(path) => {
            output::write_file(path, &csv)?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
            if let (true, Some(figure)) = (args.plot, figure) {
                let script = emit_plot_script(&rows, figure, path)?;
                let script_path = path.with_extension("py");
                output::write_file(&script_path, &script)?;
                eprintln!("wrote plot script {}", script_path.display());
            }
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => match simulate(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                if e.is_config() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::FAILURE }
            }
        },
        Command::Calibrate { seed } => {
            let reports = run_calibration(seed);
            for r in &reports {
                println!("{r}");
            }
            if reports.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_ORACLE)
            }
        }
    }
}
