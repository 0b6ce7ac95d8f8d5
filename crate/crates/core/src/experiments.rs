//! Parameter sweeps and model comparisons built from independent runs.
//!
//! Sweep members are executed concurrently; results are assembled in input
//! order, so every output is independent of scheduling.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, ScalarField};
use crate::hyperbolic::{run, RunResult, SolverConfig};
use crate::model::{InitialDatum, Locality, ModelSpec, Penalization, VelocitySpec};
use crate::viscous::{viscous_run, ViscousConfig, ViscousResult};

/// Times at which a comparison is made: the snapshot times, or `t_final`.
fn comparison_times(config: &SolverConfig) -> Vec<f64> {
    if config.snapshot_times.is_empty() {
        vec![config.t_final]
    } else {
        config.snapshot_times.clone()
    }
}

/// State of `run` at `time`: a snapshot, or the final state at `t_final`.
pub fn state_at(run: &RunResult, time: f64) -> Option<&ScalarField> {
    match run.snapshot_at(time) {
        Some(s) => Some(&s.q),
        None if (run.final_time - time).abs() <= 1e-12 * time.abs().max(1.0) => Some(&run.final_state),
        None => None,
    }
}

fn require_state(run: &RunResult, time: f64) -> Result<&ScalarField> {
    state_at(run, time).ok_or_else(|| Error::InvalidParameter(format!("no state recorded at t = {time}")))
}

fn check_nonincreasing(name: &str, values: &[f64], strict: bool) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} list is empty")));
    }
    let bad = values
        .windows(2)
        .any(|w| if strict { w[1] >= w[0] } else { w[1] > w[0] });
    if bad {
        let order = if strict { "strictly decreasing" } else { "nonincreasing" };
        return Err(Error::InvalidParameter(format!("{name} list must be {order}")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub parameter: &'static str,
    pub values: Vec<f64>,
    pub runs: Vec<RunResult>,
    pub times: Vec<f64>,
    /// `pairwise_l1[t][i][j]`: L1 distance between runs `i` and `j` at `times[t]`.
    pub pairwise_l1: Vec<Vec<Vec<f64>>>,
}

impl SweepResult {
    /// `d_k = L1(q_k, q_{k+1})` at `times[t]`.
    pub fn successive(&self, t: usize) -> Vec<f64> {
        let m = &self.pairwise_l1[t];
        (1..m.len()).map(|k| m[k - 1][k]).collect()
    }

    /// Whether `d_k` is nonincreasing at `times[t]`.
    pub fn cauchy(&self, t: usize) -> bool {
        self.successive(t).windows(2).all(|w| w[1] <= w[0])
    }

    pub fn time_index(&self, time: f64) -> Option<usize> {
        self.times
            .iter()
            .position(|t| (t - time).abs() <= 1e-12 * time.abs().max(1.0))
    }
}

fn pairwise(runs: &[RunResult], times: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
    times
        .iter()
        .map(|&t| {
            let states = runs.iter().map(|r| require_state(r, t)).collect::<Result<Vec<_>>>()?;
            let m = states.len();
            let mut d = vec![vec![0.0; m]; m];
            for i in 0..m {
                for j in i + 1..m {
                    let v = states[i].l1_distance(states[j])?;
                    d[i][j] = v;
                    d[j][i] = v;
                }
            }
            Ok(d)
        })
        .collect()
}

/// Runs `template` for each `epsilon` (nonincreasing) and compares the
/// members at every snapshot time.
pub fn eps_sweep(template: &ModelSpec, grid: &Grid1D, config: &SolverConfig, eps_list: &[f64]) -> Result<SweepResult> {
    check_nonincreasing("epsilon", eps_list, false)?;
    let specs = eps_list
        .iter()
        .map(|&eps| Ok(template.clone().with_penalization(Some(Penalization::new(eps)?))))
        .collect::<Result<Vec<_>>>()?;
    let runs = specs
        .par_iter()
        .map(|spec| run(spec, grid, config))
        .collect::<Result<Vec<_>>>()?;
    let times = comparison_times(config);
    let pairwise_l1 = pairwise(&runs, &times)?;
    Ok(SweepResult {
        parameter: "epsilon",
        values: eps_list.to_vec(),
        runs,
        times,
        pairwise_l1,
    })
}

#[derive(Debug, Clone)]
pub struct NuSweepResult {
    pub values: Vec<f64>,
    pub hyperbolic: RunResult,
    pub runs: Vec<ViscousResult>,
    pub times: Vec<f64>,
    /// `distances[t][k]`: L1 distance of viscous run `k` to the hyperbolic run.
    pub distances: Vec<Vec<f64>>,
}

impl NuSweepResult {
    /// `None` for a single member; otherwise whether the distances strictly decrease.
    pub fn monotone(&self, t: usize) -> Option<bool> {
        let d = &self.distances[t];
        (d.len() > 1).then(|| d.windows(2).all(|w| w[1] < w[0]))
    }

    /// `d_k / d_{k+1}` at `times[t]`.
    pub fn ratios(&self, t: usize) -> Vec<f64> {
        self.distances[t].windows(2).map(|w| w[0] / w[1]).collect()
    }
}

/// Viscous runs for each `nu` (strictly decreasing) against the hyperbolic
/// run of the same model.
pub fn nu_sweep(spec: &ModelSpec, grid: &Grid1D, template: &ViscousConfig, nu_list: &[f64]) -> Result<NuSweepResult> {
    check_nonincreasing("nu", nu_list, true)?;
    let configs: Vec<ViscousConfig> = nu_list
        .iter()
        .map(|&nu| ViscousConfig { nu, ..template.clone() })
        .collect();
    let (hyperbolic, runs) = rayon::join(
        || run(spec, grid, &template.base),
        || {
            configs
                .par_iter()
                .map(|c| viscous_run(spec, grid, c))
                .collect::<Result<Vec<_>>>()
        },
    );
    let (hyperbolic, runs) = (hyperbolic?, runs?);
    let times = comparison_times(&template.base);
    let distances = times
        .iter()
        .map(|&t| {
            let reference = require_state(&hyperbolic, t)?;
            runs.iter()
                .map(|r| require_state(&r.run, t)?.l1_distance(reference))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NuSweepResult {
        values: nu_list.to_vec(),
        hyperbolic,
        runs,
        times,
        distances,
    })
}

/// Output times of the three-model comparison.
pub const COMPARISON_TIMES: [f64; 4] = [0.0, 0.81, 1.59, 4.5];
/// Level whose rightmost crossing defines the front position.
pub const FRONT_LEVEL: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ComparisonModel {
    NonlocalLwr,
    LocalLwr,
    LocalUnit,
}

impl ComparisonModel {
    pub const ALL: [ComparisonModel; 3] = [Self::NonlocalLwr, Self::LocalLwr, Self::LocalUnit];

    pub fn label(&self) -> &'static str {
        match self {
            Self::NonlocalLwr => "nonlocal-lwr",
            Self::LocalLwr => "local-lwr",
            Self::LocalUnit => "local-unit",
        }
    }

    pub fn spec(&self, epsilon: f64) -> Result<ModelSpec> {
        let base = ModelSpec::reference_preset(epsilon)?.with_initial(InitialDatum::Q01);
        Ok(match self {
            Self::NonlocalLwr => base,
            Self::LocalLwr => base.with_locality(Locality::Local),
            Self::LocalUnit => base.with_locality(Locality::Local).with_velocity(VelocitySpec::unit()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub model: ComparisonModel,
    pub time: f64,
    pub front: f64,
    pub min_clearance: f64,
    pub tv: f64,
}

#[derive(Debug, Clone)]
pub struct ModelComparison {
    pub epsilon: f64,
    pub runs: Vec<(ComparisonModel, RunResult)>,
    pub table: Vec<ComparisonRow>,
}

impl ModelComparison {
    pub fn run(&self, model: ComparisonModel) -> &RunResult {
        &self.runs.iter().find(|(m, _)| *m == model).expect("all models are run").1
    }

    pub fn row(&self, model: ComparisonModel, time: f64) -> Option<&ComparisonRow> {
        self.table
            .iter()
            .find(|r| r.model == model && (r.time - time).abs() <= 1e-12 * time.max(1.0))
    }
}

/// Rightmost position where `q` crosses `level` from above, linearly
/// interpolated between cell centers; `None` if `q < level` everywhere.
pub fn front_position(q: &ScalarField, level: f64) -> Option<f64> {
    let v = q.values();
    let grid = q.grid();
    let i = v.iter().rposition(|x| *x >= level)?;
    if i + 1 == v.len() {
        return Some(grid.center(i as isize));
    }
    let t = (v[i] - level) / (v[i] - v[i + 1]);
    Some(grid.center(i as isize) + t * grid.dx())
}

/// Nonlocal `U1`, local `U1` and local `U2` from the shared datum `q01`,
/// with snapshots at [`COMPARISON_TIMES`] (those not beyond `config.t_final`
/// are kept; `t_final` is raised to 4.5 when shorter).
pub fn model_comparison(grid: &Grid1D, config: &SolverConfig, epsilon: f64) -> Result<ModelComparison> {
    let mut config = config.clone();
    config.t_final = config.t_final.max(COMPARISON_TIMES[3]);
    config.snapshot_times = COMPARISON_TIMES.to_vec();
    let specs = ComparisonModel::ALL
        .iter()
        .map(|m| Ok((*m, m.spec(epsilon)?)))
        .collect::<Result<Vec<_>>>()?;
    let runs = specs
        .par_iter()
        .map(|(m, spec)| Ok((*m, run(spec, grid, &config)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Vec::new();
    for (model, result) in &runs {
        for s in &result.snapshots {
            let q = &s.q;
            let clearance = q.values().iter().zip(s.o.values()).map(|(q, o)| o - q).fold(f64::INFINITY, f64::min);
            table.push(ComparisonRow {
                model: *model,
                time: s.time,
                front: front_position(q, FRONT_LEVEL).unwrap_or(f64::NAN),
                min_clearance: clearance,
                tv: q.total_variation(),
            });
        }
    }
    Ok(ModelComparison { epsilon, runs, table })
}

/// Dense time-space dump of `q` and `V(o - q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OslSurface {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    /// `q[row][cell]`.
    pub q: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

fn forward_slopes(row: &[f64], dx: f64) -> impl Iterator<Item = f64> + '_ {
    row.windows(2).map(move |w| (w[1] - w[0]) / dx)
}

impl OslSurface {
    fn dx(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    /// Per-row `max_i (v_{i+1} - v_i) / dx`.
    pub fn max_slope_v(&self) -> Vec<f64> {
        let dx = self.dx();
        self.v
            .iter()
            .map(|r| forward_slopes(r, dx).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// Per-row `min_i (q_{i+1} - q_i) / dx`.
    pub fn min_slope_q(&self) -> Vec<f64> {
        let dx = self.dx();
        self.q
            .iter()
            .map(|r| forward_slopes(r, dx).fold(f64::INFINITY, f64::min))
            .collect()
    }
}

/// `count` equally spaced times in `[0, t_final]`, both ends included.
pub fn uniform_times(t_final: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![t_final],
        _ => (0..count)
            .map(|k| {
                if k + 1 == count {
                    t_final
                } else {
                    t_final * k as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

/// Runs `spec` and stacks its snapshots; `config.snapshot_times` sets the rows.
pub fn osl_surface(spec: &ModelSpec, grid: &Grid1D, config: &SolverConfig) -> Result<OslSurface> {
    if config.snapshot_times.is_empty() || grid.n_cells() < 2 {
        return Err(Error::InvalidParameter("surface dump needs snapshot times and two cells".into()));
    }
    let result = run(spec, grid, config)?;
    Ok(OslSurface {
        times: result.snapshots.iter().map(|s| s.time).collect(),
        x: grid.centers().collect(),
        q: result.snapshots.iter().map(|s| s.q.values().to_vec()).collect(),
        v: result.snapshots.iter().map(|s| s.v.values().to_vec()).collect(),
    })
}
