//! On-disk outputs of runs and sweeps.
//!
//! Every file is produced deterministically (no timestamps, fixed column
//! order, shortest round-trip float formatting), so identical inputs give
//! byte-identical directories. `manifest.json` lists each file with its
//! SHA-256 digest together with everything needed to repeat the run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::harness::{AnalyticRun, Engine, ReceiverComparison, Scenario, SweepResult};
use crate::pbs::PbsRun;
use crate::timedomain::TemporalCir;

/// Version of every CSV and metadata layout written here.
pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        write!(s, "{b:02x}").expect("writing to a String cannot fail");
    }
    s
}

/// Writes files under one root and remembers their digests.
#[derive(Debug)]
pub struct ArtifactWriter {
    root: PathBuf,
    files: BTreeMap<String, String>,
}

impl ArtifactWriter {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(ArtifactWriter {
            root,
            files: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `bytes` to `rel` (a `/`-separated path below the root).
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&path, bytes)?;
        self.files.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn files(&self) -> &BTreeMap<String, String> {
        &self.files
    }

    /// Writes `manifest.json` describing everything written so far.
    pub fn finish(mut self, mut manifest: RunManifest) -> Result<BTreeMap<String, String>> {
        manifest.files = self.files.clone();
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        self.write("manifest.json", text.as_bytes())?;
        Ok(self.files)
    }
}

/// Reproducibility record stored next to the artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub scenario_path: String,
    /// SHA-256 of the scenario file as read.
    pub scenario_sha256: String,
    pub engine: Engine,
    pub seed: u64,
    pub dt: f64,
    pub molecules: u64,
    pub duration: f64,
    pub analytic_samples: usize,
    pub analytic_damping: f64,
    /// Analytic window per receiver, in s.
    pub analytic_windows: BTreeMap<String, f64>,
    /// Command-line overrides applied on top of the file.
    pub overrides: BTreeMap<String, String>,
    /// Relative path → SHA-256 of every other artifact.
    pub files: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, scenario: &Scenario, scenario_path: &str, scenario_bytes: &[u8], engine: Engine) -> Self {
        RunManifest {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            tool: "layercir".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            scenario_path: scenario_path.into(),
            scenario_sha256: sha256_hex(scenario_bytes),
            engine,
            seed: scenario.pbs.seed,
            dt: scenario.pbs.dt,
            molecules: scenario.pbs.molecules,
            duration: scenario.pbs.duration,
            analytic_samples: scenario.analytic.samples,
            analytic_damping: scenario.analytic.damping,
            analytic_windows: scenario
                .receivers
                .iter()
                .enumerate()
                .map(|(i, r)| (r.name.clone(), scenario.receiver_window(i)))
                .collect(),
            overrides: BTreeMap::new(),
            files: BTreeMap::new(),
        }
    }
}

fn csv_bytes<F>(header: &[&str], rows: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    rows(&mut w)?;
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text.into_bytes())
}

pub const ANALYTIC_HEADER: [&str; 2] = ["t_s", "concentration_per_um3"];
pub const PBS_HEADER: [&str; 3] = ["t_s", "count", "concentration_per_um3"];
pub const SUMMARY_HEADER: [&str; 4] = ["t_s", "inside", "outside", "dead"];
pub const RETENTION_HEADER: [&str; 2] = ["t_s", "inside_fraction"];
pub const REPORT_HEADER: [&str; 11] = [
    "receiver",
    "nrmse",
    "noise_nrmse",
    "peak_value_rel_error",
    "peak_time_rel_error",
    "raw_peak_time_rel_error",
    "analytic_peak_per_um3",
    "analytic_peak_time_s",
    "pbs_peak_per_um3",
    "pbs_peak_time_s",
    "pass",
];
pub const LONG_HEADER: [&str; 5] = ["scenario", "engine", "receiver", "t_s", "value"];
pub const ORDERING_HEADER: [&str; 6] = ["engine", "target", "quantity", "porosities", "values", "trend"];
pub const SWEEP_SUMMARY_HEADER: [&str; 5] = ["porosity", "engine", "target", "quantity", "value"];

/// Agreement thresholds used for the `pass` column of `report.csv`.
pub const NRMSE_LIMIT: f64 = 0.10;
pub const PEAK_TIME_LIMIT: f64 = 0.15;

fn cir_csv(cir: &TemporalCir) -> Result<Vec<u8>> {
    csv_bytes(&ANALYTIC_HEADER, |w| {
        for (t, v) in cir.times.iter().zip(&cir.values) {
            w.write_record([f(*t), f(*v)])?;
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct AnalyticMeta<'a> {
    schema_version: u32,
    engine: &'static str,
    receiver: &'a crate::pbs::Receiver,
    columns: [&'static str; 2],
    window_s: f64,
    samples: usize,
    damping: f64,
    peak_per_um3: Option<f64>,
    peak_time_s: Option<f64>,
    fwhm_s: Option<f64>,
    tail_warning: bool,
    imaginary_residual: f64,
}

#[derive(Serialize)]
struct PbsMeta<'a> {
    schema_version: u32,
    engine: &'static str,
    receiver: &'a crate::pbs::Receiver,
    columns: [&'static str; 3],
    dt_s: f64,
    molecules: u64,
    seed: u64,
    volume_um3: f64,
}

/// Per-receiver analytic CSVs with metadata sidecars and the retention series.
pub fn write_analytic(w: &mut ArtifactWriter, prefix: &str, scenario: &Scenario, run: &AnalyticRun) -> Result<()> {
    for (r, cir) in scenario.receivers.iter().zip(&run.receivers) {
        let pm = cir.peak_metrics().ok();
        w.write(&format!("{prefix}analytic/{}.csv", r.name), &cir_csv(cir)?)?;
        let meta = AnalyticMeta {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            engine: "analytic",
            receiver: r,
            columns: ANALYTIC_HEADER,
            window_s: cir.grid.window,
            samples: cir.grid.samples,
            damping: cir.grid.damping,
            peak_per_um3: pm.map(|p| p.peak),
            peak_time_s: pm.map(|p| p.peak_time),
            fwhm_s: pm.map(|p| p.fwhm),
            tail_warning: cir.tail_warning,
            imaginary_residual: cir.imaginary_residual,
        };
        w.write(&format!("{prefix}analytic/{}.meta.json", r.name), &json_bytes(&meta)?)?;
    }
    if let Some(ret) = &run.retention {
        let bytes = csv_bytes(&RETENTION_HEADER, |wr| {
            for (t, v) in ret.times.iter().zip(&ret.values) {
                wr.write_record([f(*t), f(*v)])?;
            }
            Ok(())
        })?;
        w.write(&format!("{prefix}analytic/retention.csv"), &bytes)?;
    }
    Ok(())
}

/// Per-receiver particle CSVs and the population summary.
pub fn write_pbs(w: &mut ArtifactWriter, prefix: &str, scenario: &Scenario, run: &PbsRun) -> Result<()> {
    for (r, s) in scenario.receivers.iter().zip(&run.receivers) {
        let bytes = csv_bytes(&PBS_HEADER, |wr| {
            for ((t, c), v) in run.times.iter().zip(&s.counts).zip(&s.concentration) {
                wr.write_record([f(*t), c.to_string(), f(*v)])?;
            }
            Ok(())
        })?;
        w.write(&format!("{prefix}pbs/{}.csv", r.name), &bytes)?;
        let meta = PbsMeta {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            engine: "pbs",
            receiver: r,
            columns: PBS_HEADER,
            dt_s: scenario.pbs.dt,
            molecules: run.molecules,
            seed: scenario.pbs.seed,
            volume_um3: r.volume(),
        };
        w.write(&format!("{prefix}pbs/{}.meta.json", r.name), &json_bytes(&meta)?)?;
    }
    let bytes = csv_bytes(&SUMMARY_HEADER, |wr| {
        for j in 0..run.times.len() {
            wr.write_record([
                f(run.times[j]),
                run.inside[j].to_string(),
                run.outside[j].to_string(),
                run.dead[j].to_string(),
            ])?;
        }
        Ok(())
    })?;
    w.write(&format!("{prefix}pbs/summary.csv"), &bytes)
}

/// `report.csv` with one row per receiver.
pub fn write_report(w: &mut ArtifactWriter, prefix: &str, rows: &[ReceiverComparison]) -> Result<()> {
    let bytes = csv_bytes(&REPORT_HEADER, |wr| {
        for r in rows {
            let pass = r.nrmse < NRMSE_LIMIT && r.peak_time_error < PEAK_TIME_LIMIT;
            wr.write_record([
                r.receiver.clone(),
                f(r.nrmse),
                f(r.noise_nrmse),
                f(r.peak_value_error),
                f(r.peak_time_error),
                f(r.raw_peak_time_error),
                f(r.analytic_peak),
                f(r.analytic_peak_time),
                f(r.pbs_peak),
                f(r.pbs_peak_time),
                pass.to_string(),
            ])?;
        }
        Ok(())
    })?;
    w.write(&format!("{prefix}report.csv"), &bytes)
}

/// Plot-ready long-format table of every series.
pub fn write_long(
    w: &mut ArtifactWriter,
    prefix: &str,
    scenario: &Scenario,
    analytic: Option<&AnalyticRun>,
    pbs: Option<&PbsRun>,
) -> Result<()> {
    let bytes = csv_bytes(&LONG_HEADER, |wr| {
        if let Some(a) = analytic {
            for (r, cir) in scenario.receivers.iter().zip(&a.receivers) {
                for (t, v) in cir.times.iter().zip(&cir.values) {
                    wr.write_record([scenario.name.as_str(), "analytic", &r.name, &f(*t), &f(*v)])?;
                }
            }
        }
        if let Some(p) = pbs {
            for s in &p.receivers {
                for (t, v) in p.times.iter().zip(&s.concentration) {
                    wr.write_record([scenario.name.as_str(), "pbs", &s.name, &f(*t), &f(*v)])?;
                }
            }
        }
        Ok(())
    })?;
    w.write(&format!("{prefix}long.csv"), &bytes)
}

/// Gnuplot script that overlays both engines per receiver from `long.csv`.
pub fn plot_script(scenario: &Scenario) -> String {
    let mut s = String::new();
    s.push_str("# gnuplot -persist plot.gp\n");
    s.push_str("set datafile separator ','\n");
    s.push_str("set xlabel 't [s]'\nset ylabel 'concentration per molecule [1/um^3]'\n");
    s.push_str("set key top right\n");
    let n = scenario.receivers.len();
    let _ = writeln!(s, "set multiplot layout {n},1");
    for r in &scenario.receivers {
        let _ = writeln!(s, "set title '{}'", r.name);
        let _ = writeln!(
            s,
            "plot 'long.csv' using ((stringcolumn(2) eq 'pbs' && stringcolumn(3) eq '{0}') ? $4 : 1/0):5 \
             with lines lc rgb '#999999' title 'PBS', \\\n     'long.csv' using ((stringcolumn(2) eq 'analytic' && \
             stringcolumn(3) eq '{0}') ? $4 : 1/0):5 with lines lw 2 lc rgb '#1f77b4' title 'analytic'",
            r.name
        );
    }
    s.push_str("unset multiplot\n");
    s
}

/// Full artifact set of one scenario run under `prefix` (empty or ending in `/`).
pub fn write_run(
    w: &mut ArtifactWriter,
    prefix: &str,
    scenario: &Scenario,
    analytic: Option<&AnalyticRun>,
    pbs: Option<&PbsRun>,
    report: Option<&[ReceiverComparison]>,
) -> Result<()> {
    if let Some(a) = analytic {
        write_analytic(w, prefix, scenario, a)?;
    }
    if let Some(p) = pbs {
        write_pbs(w, prefix, scenario, p)?;
    }
    if let Some(r) = report {
        write_report(w, prefix, r)?;
    }
    write_long(w, prefix, scenario, analytic, pbs)?;
    w.write(&format!("{prefix}plot.gp"), plot_script(scenario).as_bytes())
}

fn joined(values: &[f64]) -> String {
    values.iter().map(|v| f(*v)).collect::<Vec<_>>().join(";")
}

/// Directory name of one sweep point.
pub fn sweep_label(porosity: f64) -> String {
    format!("porosity_{porosity}")
}

/// Per-point artifact sets plus `orderings.csv` and `sweep_summary.csv`.
pub fn write_sweep(w: &mut ArtifactWriter, result: &SweepResult, reports: &[Option<Vec<ReceiverComparison>>]) -> Result<()> {
    for (p, report) in result.points.iter().zip(reports) {
        let prefix = format!("{}/", sweep_label(p.porosity));
        write_run(
            w,
            &prefix,
            &p.scenario,
            p.analytic.as_ref(),
            p.pbs.as_ref(),
            report.as_deref(),
        )?;
    }
    let bytes = csv_bytes(&ORDERING_HEADER, |wr| {
        for o in &result.orderings {
            let engine = match o.engine {
                Engine::Analytic => "analytic",
                Engine::Pbs => "pbs",
                Engine::Both => "both",
            };
            let trend = serde_json::to_value(o.trend)?;
            wr.write_record([
                engine,
                &o.target,
                &o.quantity,
                &joined(&o.porosities),
                &joined(&o.values),
                trend.as_str().unwrap_or("mixed"),
            ])?;
        }
        Ok(())
    })?;
    w.write("orderings.csv", &bytes)?;
    let bytes = csv_bytes(&SWEEP_SUMMARY_HEADER, |wr| {
        for p in &result.points {
            let names = p.scenario.receivers.iter().map(|r| r.name.as_str());
            for (name, pk) in names.clone().zip(&p.analytic_peaks) {
                wr.write_record([&f(p.porosity), "analytic", name, "peak_time", &f(pk.peak_time)])?;
                wr.write_record([&f(p.porosity), "analytic", name, "peak_value", &f(pk.peak)])?;
            }
            for (name, pk) in names.zip(&p.pbs_peaks) {
                wr.write_record([&f(p.porosity), "pbs", name, "peak_time", &f(pk.peak_time)])?;
                wr.write_record([&f(p.porosity), "pbs", name, "peak_value", &f(pk.peak)])?;
            }
            if let Some(v) = p.analytic_retention {
                wr.write_record([&f(p.porosity), "analytic", "spheroid", "retention", &f(v)])?;
            }
            if let Some(v) = p.pbs_retention {
                wr.write_record([&f(p.porosity), "pbs", "spheroid", "retention", &f(v)])?;
            }
        }
        Ok(())
    })?;
    w.write("sweep_summary.csv", &bytes)
}
