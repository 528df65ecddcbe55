use formation_core::report::CertificationReport;
use formation_core::sim::montecarlo::{monte_carlo, MonteCarloReport};
use formation_core::sim::{final_errors, run, FinalErrors, RunStatus, TrajectoryLog};
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::schema::ScenarioFile;

/// Default output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "FORMATION_OUT_DIR";

/// A run counts as converged once the formation error stays below this
/// fraction of its initial value.
pub const CONVERGED_FRACTION: f64 = 1e-2;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const MONTECARLO_FILE: &str = "montecarlo.json";

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, f: &mut ScenarioFile) {
        if let Some(seed) = self.seed {
            f.sim.seed = seed;
            if let Some(m) = &mut f.montecarlo {
                m.master_seed = seed;
            }
        }
        if let Some(dt) = self.dt {
            f.sim.dt_s = dt;
        }
        if let Some(t) = self.t_end {
            f.sim.t_end_s = t;
        }
        if let (Some(n), Some(m)) = (self.samples, &mut f.montecarlo) {
            m.samples = n;
        }
    }
}

pub fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"))
}

pub fn load(path: &Path) -> Result<ScenarioFile, CliError> {
    let src = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    ScenarioFile::parse(&src)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub status: RunStatus,
    pub t_final_s: f64,
    pub initial_formation_error: f64,
    pub final_errors: FinalErrors,
    /// First recorded time after which the formation error stays below
    /// `CONVERGED_FRACTION` of its initial value.
    pub convergence_time_s: Option<f64>,
    pub collision_count: usize,
    pub saturation_events: usize,
    /// Final formation error above the certified steady-state bound.
    pub steady_state_bound_exceeded: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsDocument {
    pub scenario: String,
    pub n: usize,
    pub certified: bool,
    pub certification: CertificationReport,
    /// Checks whose sufficient condition does not hold.
    pub bound_violations: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunMetrics>,
}

pub fn certify(f: &ScenarioFile) -> Result<MetricsDocument, CliError> {
    let s = f.to_scenario()?;
    let report = s.certify()?;
    Ok(MetricsDocument {
        scenario: f.meta.name.clone(),
        n: s.n(),
        certified: report.all_certified(),
        bound_violations: report.entries.iter().filter(|e| !e.certified).map(|e| e.check.clone()).collect(),
        certification: report,
        run: None,
    })
}

fn convergence_time(log: &TrajectoryLog) -> Option<f64> {
    let fe0 = *log.formation_error.first()?;
    let limit = CONVERGED_FRACTION * fe0;
    let last_above = log.formation_error.iter().rposition(|&e| !(e <= limit));
    match last_above {
        None => log.times.first().copied(),
        Some(i) => log.times.get(i + 1).copied(),
    }
}

pub fn run_metrics(log: &TrajectoryLog, cert: &CertificationReport) -> RunMetrics {
    use formation_core::sim::EventKind;
    let fe = final_errors(log);
    let count = |pred: fn(&EventKind) -> bool| log.events.iter().filter(|e| pred(&e.kind)).count();
    RunMetrics {
        status: log.status,
        t_final_s: *log.times.last().unwrap_or(&0.0),
        initial_formation_error: *log.formation_error.first().unwrap_or(&f64::NAN),
        final_errors: fe,
        convergence_time_s: convergence_time(log),
        collision_count: count(|k| matches!(k, EventKind::Collision { .. })),
        saturation_events: count(|k| matches!(k, EventKind::SaturationOn { .. })),
        steady_state_bound_exceeded: cert.steady_state_bound.map(|b| fe.formation_error > b),
    }
}

/// One header row, then `t` and `x, y, z, vx, vy, vz` per robot in index order.
pub fn write_trajectory_csv(log: &TrajectoryLog, n: usize, w: impl Write) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    for i in 0..n {
        for c in ["x", "y", "z", "vx", "vy", "vz"] {
            header.push(format!("{c}{i}"));
        }
    }
    out.write_record(&header)?;
    let mut row = Vec::with_capacity(1 + 6 * n);
    for (k, t) in log.times.iter().enumerate() {
        row.clear();
        row.push(t.to_string());
        let (x, v) = (&log.positions[k], &log.velocities[k]);
        for i in 0..n {
            row.extend((0..3).map(|c| x[3 * i + c].to_string()));
            row.extend((0..3).map(|c| v[3 * i + c].to_string()));
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, fs::File), CliError> {
    let p = dir.join(name);
    let file = fs::File::create(&p).map_err(|e| CliError::io(&p, e))?;
    Ok((p, file))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), CliError> {
    let (p, mut file) = create(dir, name)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Schema(e.to_string()))?;
    text.push('\n');
    file.write_all(text.as_bytes()).map_err(|e| CliError::io(&p, e))
}

/// Runs the scenario and writes the trajectory, metrics and events into
/// `dir`. Fatal runs are written out in full before returning.
pub fn simulate(f: &ScenarioFile, dir: &Path) -> Result<MetricsDocument, CliError> {
    let s = f.to_scenario()?;
    let mut doc = certify(f)?;
    let log = run(&s)?;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;

    let (p, file) = create(dir, TRAJECTORY_FILE)?;
    write_trajectory_csv(&log, s.n(), std::io::BufWriter::new(file)).map_err(|e| CliError::io(&p, e.into()))?;

    let (p, file) = create(dir, EVENTS_FILE)?;
    let mut w = std::io::BufWriter::new(file);
    for e in &log.events {
        let line = serde_json::to_string(e).map_err(|e| CliError::Schema(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| CliError::io(&p, e))?;
    }
    w.flush().map_err(|e| CliError::io(&p, e))?;

    doc.run = Some(run_metrics(&log, &doc.certification));
    write_json(dir, METRICS_FILE, &doc)?;
    Ok(doc)
}

pub fn montecarlo(f: &ScenarioFile, dir: &Path) -> Result<MonteCarloReport, CliError> {
    let s = f.to_scenario()?;
    let cfg = f
        .monte_carlo_config()
        .ok_or_else(|| CliError::Schema(format!("scenario '{}' has no [montecarlo] section", f.meta.name)))?;
    let report = monte_carlo(&s, &cfg)?;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_json(dir, MONTECARLO_FILE, &report)?;
    Ok(report)
}
