use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dispersive_breakup::catalog::run_experiment;
use dispersive_breakup::error::Error;
use dispersive_breakup::io::{DtScaling, ExperimentId, ModelConfig, RecordStatus, RunConfig, RunRecord};
use dispersive_breakup::time_stepping::Integrator;

/// Small-dispersion breakup experiments.
///
/// Each subcommand starts from its catalog defaults. Flags override the
/// defaults and a `--config` TOML file overrides the flags. Exit status is
/// 0 on success, 2 when some run did not complete and 1 on a configuration
/// error. The worker count is read from `BREAKUP_WORKERS`.
#[derive(Parser)]
#[command(name = "breakup", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the PDE and write snapshots.
    Evolve(Flags),
    /// Critical point and dispersionless profile.
    Hopf(Flags),
    /// Tabulate the Painlevé-I2 solution.
    Pi2(Flags),
    /// Multiscale comparison at the gradient catastrophe.
    Multiscale(Flags),
    /// Quasitriviality comparison before breakup.
    Quasitriv(Flags),
    /// PDE-versus-Hopf error scaling at breakup.
    Scaling(Flags),
    /// Bracket and integrability checks.
    Hamcheck(Flags),
    /// Long runs past breakup for the blowup study.
    Blowup(Flags),
    /// Run a catalog entry by name.
    CatalogRun {
        /// One of evolve, hopf, pi2, breakup-universality, scaling,
        /// quasitriviality, blowup, kdv2-transition, hamiltonian-checks.
        id: ExperimentId,
        #[command(flatten)]
        flags: Flags,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DtScalingArg {
    Fixed,
    SqrtEps,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegratorArg {
    Etdrk4,
    GaussIrk4,
}

#[derive(Args, Default)]
struct Flags {
    /// Model, repeatable: genkdv:N, sinh-kdv, kawahara:A,B, kdv2:A, nld:C..;P..
    #[arg(long = "model", short)]
    models: Vec<ModelConfig>,
    /// Comma-separated ε values.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// Grid half-width L.
    #[arg(long)]
    half_width: Option<f64>,
    /// Grid nodes N (even).
    #[arg(long, short = 'n')]
    nodes: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum)]
    dt_scaling: Option<DtScalingArg>,
    #[arg(long, value_enum)]
    integrator: Option<IntegratorArg>,
    /// End times, one for all models or one per model.
    #[arg(long, value_delimiter = ',')]
    t_end: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    snapshots: Vec<f64>,
    /// Fixed x-window as LO,HI.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    window: Vec<f64>,
    /// Multiscale trust-window half-width in PI2 units.
    #[arg(long)]
    window_scaled: Option<f64>,
    #[arg(long)]
    hopf_tol: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pi2_times: Vec<f64>,
    #[arg(long)]
    pi2_x_max: Option<f64>,
    #[arg(long)]
    pi2_nodes: Option<usize>,
    /// Random (f, g) pairs for the bracket checks.
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// TOML file with RunConfig keys, applied last.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Flags {
    fn apply(self, mut cfg: RunConfig) -> Result<RunConfig, Error> {
        fn set<T>(slot: &mut T, v: Option<T>) {
            if let Some(v) = v {
                *slot = v;
            }
        }
        fn set_vec<T>(slot: &mut Vec<T>, v: Vec<T>) {
            if !v.is_empty() {
                *slot = v;
            }
        }
        set_vec(&mut cfg.models, self.models);
        set_vec(&mut cfg.eps, self.eps);
        set(&mut cfg.half_width, self.half_width);
        set(&mut cfg.nodes, self.nodes);
        set(&mut cfg.dt, self.dt);
        set(
            &mut cfg.dt_scaling,
            self.dt_scaling.map(|d| match d {
                DtScalingArg::Fixed => DtScaling::Fixed,
                DtScalingArg::SqrtEps => DtScaling::SqrtEps,
            }),
        );
        if let Some(i) = self.integrator {
            cfg.integrator = Some(match i {
                IntegratorArg::Etdrk4 => Integrator::Etdrk4,
                IntegratorArg::GaussIrk4 => Integrator::GaussIrk4,
            });
        }
        set_vec(&mut cfg.t_end, self.t_end);
        set_vec(&mut cfg.snapshots, self.snapshots);
        if let [lo, hi] = self.window[..] {
            cfg.window = Some((lo, hi));
        }
        set(&mut cfg.window_scaled, self.window_scaled);
        set(&mut cfg.hopf_tol, self.hopf_tol);
        set_vec(&mut cfg.pi2_times, self.pi2_times);
        set(&mut cfg.pi2_x_max, self.pi2_x_max);
        set(&mut cfg.pi2_nodes, self.pi2_nodes);
        set(&mut cfg.pairs, self.pairs);
        set(&mut cfg.seed, self.seed);
        if self.output.is_some() {
            cfg.output = self.output;
        }
        if let Some(path) = self.config {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            cfg = cfg.overlay_toml(&text, &path)?;
        }
        Ok(cfg)
    }
}

fn report(rec: &RunRecord) {
    println!("experiment {}", rec.config.experiment.name());
    for r in &rec.runs {
        println!(
            "run {} eps={:e} steps={} energy_drift={:.3e} mass_drift={:.3e} status={:?}",
            r.model, r.eps, r.steps, r.energy_drift, r.mass_drift, r.status
        );
    }
    for (k, f) in &rec.fits {
        println!("fit {k} slope={:.4} r={:.5} points={}", f.slope, f.r, f.points);
    }
    for (k, v) in &rec.values {
        println!("value {k} = {v:.10e}");
    }
    for (k, v) in &rec.flags {
        println!("flag {k} = {v}");
    }
    for t in &rec.tables {
        println!("table {} ({} rows)", t.name, t.rows.len());
    }
    if let Some(dir) = &rec.config.output {
        println!("written to {}", dir.display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (id, flags) = match cli.command {
        Command::Evolve(f) => (ExperimentId::Evolve, f),
        Command::Hopf(f) => (ExperimentId::Hopf, f),
        Command::Pi2(f) => (ExperimentId::Pi2, f),
        Command::Multiscale(f) => (ExperimentId::BreakupUniversality, f),
        Command::Quasitriv(f) => (ExperimentId::Quasitriviality, f),
        Command::Scaling(f) => (ExperimentId::Scaling, f),
        Command::Hamcheck(f) => (ExperimentId::HamiltonianChecks, f),
        Command::Blowup(f) => (ExperimentId::Blowup, f),
        Command::CatalogRun { id, flags } => (id, flags),
    };
    let rec = match flags.apply(RunConfig::catalog(id)).and_then(|cfg| run_experiment(&cfg)) {
        Ok(rec) => rec,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    report(&rec);
    match rec.status() {
        RecordStatus::Completed => ExitCode::SUCCESS,
        RecordStatus::Partial { reasons } => {
            for r in reasons {
                eprintln!("incomplete: {r}");
            }
            ExitCode::from(2)
        }
    }
}
