//! Monte Carlo campaigns over random initial positions. Runs are independent
//! and seeded from the master seed and the run id, so reports do not depend
//! on scheduling or thread count.

use nalgebra::Vector3;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitBall};
use serde::{Deserialize, Serialize};

use super::assign::assign_indices;
use super::{final_errors, run, FinalErrors, FormationKind, RunStatus, Scenario};
use crate::error::{Error, Result};
use crate::extensions::center::geometric_center;
use crate::linalg::stack_points;

/// Placement attempts per run before giving up on the separation constraint.
pub const MAX_PLACEMENT_TRIES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCriteria {
    pub formation_error: f64,
    pub side_error: f64,
    pub center_error: f64,
}

impl Default for ConvergenceCriteria {
    fn default() -> Self {
        Self { formation_error: 1e-2, side_error: 1e-2, center_error: 5e-2 }
    }
}

impl ConvergenceCriteria {
    pub fn accepts(&self, f: &FinalErrors) -> bool {
        f.formation_error <= self.formation_error
            && f.side_error.is_none_or(|e| e <= self.side_error)
            && f.center_error.is_none_or(|e| e <= self.center_error)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub samples: usize,
    pub radius: f64,
    /// Ball center; defaults to the center-control target, else the centroid
    /// of the base initial positions.
    pub center: Option<Vector3<f64>>,
    /// Redraw a placement while any pair is at or within this distance;
    /// defaults to the collision detection radius.
    pub min_separation: Option<f64>,
    pub criteria: ConvergenceCriteria,
    pub master_seed: u64,
}

impl MonteCarloConfig {
    pub fn new(samples: usize, radius: f64, master_seed: u64) -> Self {
        Self {
            samples,
            radius,
            center: None,
            min_separation: None,
            criteria: ConvergenceCriteria::default(),
            master_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub id: usize,
    pub seed: u64,
    pub converged: bool,
    pub status: RunStatus,
    pub collisions: usize,
    pub final_errors: FinalErrors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean_formation_error: f64,
    pub max_formation_error: f64,
    pub max_side_error: Option<f64>,
    pub max_center_error: Option<f64>,
    pub min_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub samples: usize,
    pub converged: usize,
    pub collision_count: usize,
    pub runs: Vec<RunSummary>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Execution::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Execution::Sequential
        }
    }
}

/// Initial positions for run `id`, uniform in the ball and separated by more
/// than `sep`, plus the seed handed to the run itself.
pub fn sample_run(n: usize, center: &Vector3<f64>, radius: f64, sep: f64, master_seed: u64, id: usize) -> Result<(Vec<Vector3<f64>>, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(id as u64);
    let run_seed = rng.next_u64();
    if radius == 0.0 {
        return Ok((vec![*center; n], run_seed));
    }
    for _ in 0..MAX_PLACEMENT_TRIES {
        let pts: Vec<Vector3<f64>> = (0..n)
            .map(|_| {
                let p: [f64; 3] = UnitBall.sample(&mut rng);
                center + Vector3::from(p) * radius
            })
            .collect();
        let ok = (0..n).all(|i| (i + 1..n).all(|j| (pts[i] - pts[j]).norm() > sep));
        if ok {
            return Ok((pts, run_seed));
        }
    }
    Err(Error::Parameter(format!(
        "could not place {n} robots with separation {sep} in a ball of radius {radius}"
    )))
}

fn one_run(base: &Scenario, cfg: &MonteCarloConfig, center: &Vector3<f64>, sep: f64, id: usize) -> Result<RunSummary> {
    let n = base.n();
    let (mut pts, seed) = sample_run(n, center, cfg.radius, sep, cfg.master_seed, id)?;
    if let FormationKind::Polygon(p) = &base.formation {
        if cfg.radius > 0.0 {
            pts = assign_indices(&pts, &p.plane_rotation)?.apply(&pts);
        }
    }
    let mut s = base.clone();
    s.initial = pts;
    s.seed = seed;
    // only the endpoints are needed
    s.sim.record_every = usize::MAX;
    let log = run(&s)?;
    let fe = final_errors(&log);
    let collisions = usize::from(log.status == RunStatus::Collision);
    let converged = !log.status.is_fatal() && cfg.criteria.accepts(&fe);
    Ok(RunSummary { id, seed, converged, status: log.status, collisions, final_errors: fe })
}

pub fn monte_carlo(base: &Scenario, cfg: &MonteCarloConfig) -> Result<MonteCarloReport> {
    monte_carlo_with(base, cfg, Execution::default())
}

pub fn monte_carlo_with(base: &Scenario, cfg: &MonteCarloConfig, exec: Execution) -> Result<MonteCarloReport> {
    if cfg.samples == 0 {
        return Err(Error::Parameter("Monte Carlo needs at least one sample".into()));
    }
    if !(cfg.radius >= 0.0) || !cfg.radius.is_finite() {
        return Err(Error::Parameter(format!("radius must be nonnegative, got {}", cfg.radius)));
    }
    base.validate()?;
    let center = cfg
        .center
        .or_else(|| base.controllers.center.map(|c| c.x_c))
        .unwrap_or_else(|| geometric_center(&stack_points(&base.initial)));
    let sep = cfg.min_separation.or_else(|| base.controllers.collision.map(|c| c.r2)).unwrap_or(0.0);
    let ids = 0..cfg.samples;
    let mut runs: Vec<RunSummary> = match exec {
        Execution::Sequential => ids.map(|id| one_run(base, cfg, &center, sep, id)).collect::<Result<_>>()?,
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            ids.into_par_iter().map(|id| one_run(base, cfg, &center, sep, id)).collect::<Result<_>>()?
        }
    };
    runs.sort_by_key(|r| r.id);
    Ok(summarize(runs))
}

fn summarize(runs: Vec<RunSummary>) -> MonteCarloReport {
    let m = runs.len() as f64;
    let fes: Vec<f64> = runs.iter().map(|r| r.final_errors.formation_error).collect();
    let opt_max = |f: fn(&FinalErrors) -> Option<f64>| {
        runs.iter().filter_map(|r| f(&r.final_errors)).reduce(f64::max)
    };
    let aggregate = Aggregate {
        mean_formation_error: fes.iter().sum::<f64>() / m,
        max_formation_error: fes.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_side_error: opt_max(|f| f.side_error),
        max_center_error: opt_max(|f| f.center_error),
        min_distance: runs.iter().map(|r| r.final_errors.min_distance).fold(f64::INFINITY, f64::min),
    };
    MonteCarloReport {
        samples: runs.len(),
        converged: runs.iter().filter(|r| r.converged).count(),
        collision_count: runs.iter().map(|r| r.collisions).sum(),
        runs,
        aggregate,
    }
}
