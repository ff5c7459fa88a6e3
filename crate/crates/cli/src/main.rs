//! `layercir` — run layered-sphere diffusion scenarios from the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use layercir::artifacts::{write_run, write_sweep, ArtifactWriter, RunManifest};
use layercir::config::{ScenarioFile, SweepSection};
use layercir::harness::{compare, porosity_sweep, run_analytic, run_pbs, Engine, Scale, Scenario};
use layercir::Error;

#[derive(Parser)]
#[command(name = "layercir", version, about = "Channel impulse responses of multi-layer porous spheres")]
struct Cli {
    /// Worker threads (defaults to LAYERCIR_THREADS, then to all cores).
    #[arg(long, global = true, env = "LAYERCIR_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and list every problem found.
    Validate { scenario: PathBuf },
    /// Run one scenario and write its artifacts.
    Run(RunArgs),
    /// Vary one layer's porosity and write one artifact set per value.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// One-based layer to vary (overrides `[sweep].layer`).
        #[arg(long)]
        layer: Option<usize>,
        /// Comma-separated porosities (overrides `[sweep].porosities`).
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        porosities: Option<Vec<f64>>,
        /// Time after emission at which retention is compared, in s.
        #[arg(long)]
        retention_time: Option<f64>,
    },
    /// Print a built-in scenario as TOML.
    Preset {
        #[arg(value_enum)]
        name: Preset,
        /// Use the full 275 μm geometry instead of the 10× reduced one.
        #[arg(long)]
        full_scale: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Internal,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Analytic,
    Pbs,
    Both,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Analytic => Engine::Analytic,
            EngineArg::Pbs => Engine::Pbs,
            EngineArg::Both => Engine::Both,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    engine: EngineArg,
    /// Output directory (default: `out/<scenario name>`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Particle time step in s.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    molecules: Option<u64>,
    /// Simulated duration in s.
    #[arg(long)]
    duration: Option<f64>,
    /// Analytic window T in s (same for every receiver).
    #[arg(long)]
    window: Option<f64>,
    /// Analytic samples N_t.
    #[arg(long)]
    samples: Option<usize>,
}

/// Failure with its exit code: 2 for bad input, 1 for engine failures.
struct Failure {
    code: u8,
    message: String,
}

fn input(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn engine(e: Error) -> Failure {
    Failure {
        code: 1,
        message: format!("engine failure: {e}"),
    }
}

fn read_scenario(path: &Path) -> Result<(ScenarioFile, Vec<u8>), Failure> {
    ScenarioFile::load(path).map_err(|e| match e {
        Error::Io(io) => input(format!("cannot read scenario `{}`: {io}", path.display())),
        other => input(format!("{}: {other}", path.display())),
    })
}

fn apply_overrides(file: &mut ScenarioFile, args: &RunArgs) -> BTreeMap<String, String> {
    let mut applied = BTreeMap::new();
    if let Some(v) = args.seed {
        file.pbs.seed = v;
        applied.insert("seed".into(), v.to_string());
    }
    if let Some(v) = args.dt {
        file.pbs.dt = v;
        applied.insert("dt".into(), v.to_string());
    }
    if let Some(v) = args.molecules {
        file.pbs.molecules = v;
        applied.insert("molecules".into(), v.to_string());
    }
    if let Some(v) = args.duration {
        file.pbs.duration = v;
        applied.insert("duration".into(), v.to_string());
    }
    if let Some(v) = args.window {
        file.analytic.window = Some(v);
        applied.insert("window".into(), v.to_string());
    }
    if let Some(v) = args.samples {
        file.analytic.samples = v;
        applied.insert("samples".into(), v.to_string());
    }
    applied
}

fn to_scenario(file: &ScenarioFile, path: &Path) -> Result<Scenario, Failure> {
    file.to_scenario()
        .map_err(|e| input(format!("{}: {e}", path.display())))
}

fn output_writer(args: &RunArgs, scenario: &Scenario) -> Result<ArtifactWriter, Failure> {
    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name));
    ArtifactWriter::new(&dir).map_err(|e| input(format!("cannot create output directory `{}`: {e}", dir.display())))
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let (file, _) = read_scenario(path)?;
    let problems = file.violations();
    if !problems.is_empty() {
        let lines: Vec<String> = problems.iter().map(|v| format!("  {v}")).collect();
        return Err(input(format!(
            "{}: {} problem(s)\n{}",
            path.display(),
            problems.len(),
            lines.join("\n")
        )));
    }
    let scenario = to_scenario(&file, path)?;
    println!(
        "{}: valid ({} finite layers, {} receivers)",
        scenario.name,
        scenario.stack.finite_count(),
        scenario.receivers.len()
    );
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let (mut file, bytes) = read_scenario(&args.scenario)?;
    let overrides = apply_overrides(&mut file, args);
    let scenario = to_scenario(&file, &args.scenario)?;
    let mut w = output_writer(args, &scenario)?;
    let engine_sel: Engine = args.engine.into();

    let analytic = engine_sel
        .analytic()
        .then(|| run_analytic(&scenario, true))
        .transpose()
        .map_err(engine)?;
    let pbs = engine_sel.pbs().then(|| run_pbs(&scenario)).transpose().map_err(engine)?;
    let report = match (&analytic, &pbs) {
        (Some(a), Some(p)) => Some(compare(&scenario, a, p).map_err(engine)?),
        _ => None,
    };

    let io = |e: Error| Failure {
        code: 1,
        message: format!("writing artifacts: {e}"),
    };
    write_run(&mut w, "", &scenario, analytic.as_ref(), pbs.as_ref(), report.as_deref()).map_err(io)?;
    w.write("scenario.toml", file.to_toml().as_bytes()).map_err(io)?;
    let root = w.root().to_path_buf();
    let mut manifest = RunManifest::new("run", &scenario, &args.scenario.display().to_string(), &bytes, engine_sel);
    manifest.overrides = overrides;
    w.finish(manifest).map_err(io)?;

    if let Some(rows) = &report {
        for r in rows {
            println!(
                "{:<12} nrmse {:.4}  peak-time error {:.4}  (counting noise {:.4})",
                r.receiver, r.nrmse, r.peak_time_error, r.noise_nrmse
            );
        }
    }
    println!("artifacts written to {}", root.display());
    Ok(())
}

fn cmd_sweep(args: &RunArgs, layer: Option<usize>, porosities: Option<Vec<f64>>, retention: Option<f64>) -> Result<(), Failure> {
    let (mut file, bytes) = read_scenario(&args.scenario)?;
    let mut overrides = apply_overrides(&mut file, args);
    if layer.is_some() || porosities.is_some() || retention.is_some() {
        let base = file.sweep.clone().unwrap_or(SweepSection {
            layer: file.medium.layers.len(),
            porosities: Vec::new(),
            retention_time: None,
        });
        let mut sw = base;
        if let Some(l) = layer {
            sw.layer = l;
            overrides.insert("sweep.layer".into(), l.to_string());
        }
        if let Some(p) = porosities {
            overrides.insert(
                "sweep.porosities".into(),
                p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
            );
            sw.porosities = p;
        }
        if let Some(t) = retention {
            sw.retention_time = Some(t);
            overrides.insert("sweep.retention_time".into(), t.to_string());
        }
        file.sweep = Some(sw);
    }
    if file.sweep.is_none() {
        return Err(input(format!(
            "{}: no [sweep] section and no --porosities given",
            args.scenario.display()
        )));
    }
    let scenario = to_scenario(&file, &args.scenario)?;
    let sw = scenario.sweep.clone().expect("checked above");
    let mut w = output_writer(args, &scenario)?;
    let engine_sel: Engine = args.engine.into();

    let result = porosity_sweep(&scenario, sw.layer, &sw.porosities, engine_sel, sw.retention_time).map_err(engine)?;
    let reports = result
        .points
        .iter()
        .map(|p| match (&p.analytic, &p.pbs) {
            (Some(a), Some(b)) => compare(&p.scenario, a, b).map(Some),
            _ => Ok(None),
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(engine)?;

    let io = |e: Error| Failure {
        code: 1,
        message: format!("writing artifacts: {e}"),
    };
    write_sweep(&mut w, &result, &reports).map_err(io)?;
    w.write("scenario.toml", file.to_toml().as_bytes()).map_err(io)?;
    let root = w.root().to_path_buf();
    let mut manifest = RunManifest::new("sweep", &scenario, &args.scenario.display().to_string(), &bytes, engine_sel);
    manifest.overrides = overrides;
    w.finish(manifest).map_err(io)?;

    for o in &result.orderings {
        println!("{:<9} {:<10} {:<10} {:?}", format!("{:?}", o.engine).to_lowercase(), o.target, o.quantity, o.trend);
    }
    println!("artifacts written to {}", root.display());
    Ok(())
}

fn cmd_preset(name: Preset, full: bool) {
    let scale = if full { Scale::Full } else { Scale::Desk };
    let scenario = match name {
        Preset::Internal => Scenario::internal_source(scale),
        Preset::External => Scenario::external_source(scale),
    };
    print!("{}", ScenarioFile::from_scenario(&scenario).to_toml());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: thread count must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Validate { scenario } => cmd_validate(scenario),
        Command::Run(args) => cmd_run(args),
        Command::Sweep {
            run,
            layer,
            porosities,
            retention_time,
        } => cmd_sweep(run, *layer, porosities.clone(), *retention_time),
        Command::Preset { name, full_scale } => {
            cmd_preset(*name, *full_scale);
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
