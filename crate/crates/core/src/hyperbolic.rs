//! Explicit Godunov finite-volume integrator with Neumann ghost cells.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::diagnostics::{self, CoincidenceReport, DiagnosticsRow, DiagnosticsSeries, RowAccumulator};
use crate::error::{Error, Result};
use crate::flux::{FluxModel, FluxSide, SideEval, DEFAULT_FLUX_TOL};
use crate::grid::{Grid1D, ScalarField};
use crate::model::{validate, Locality, ModelSpec, ValidationReport, VelocitySpec};
use crate::nonlocal::{build_weights, eval_nonlocal_into, Extension, KernelWeights, DEFAULT_MASS_TOL};

pub const DEFAULT_CFL: f64 = 0.45;
const MIN_DT: f64 = 1e-14;
/// Share of the obstacle clearance one step may consume.
pub const CLEARANCE_FRACTION: f64 = 0.5;

/// Where the obstacle is read when building an interface flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ObstacleSampling {
    /// `o` at each cell center; the interface flux is `min(demand_left, supply_right)`.
    #[default]
    Cell,
    /// `o` at the interface coordinate for both neighbours.
    Interface,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub cfl: f64,
    pub t_final: f64,
    pub snapshot_times: Vec<f64>,
    pub extension: Extension,
    pub flux_opt_tol: f64,
    /// Velocity argument interval; defaults to `[0, max o]` on the window.
    pub clamp_interval: Option<(f64, f64)>,
    pub obstacle_sampling: ObstacleSampling,
    pub kernel_mass_tol: f64,
    /// Record a full diagnostics row every `series_stride` steps.
    pub series_stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: DEFAULT_CFL,
            t_final: 1.0,
            snapshot_times: Vec::new(),
            extension: Extension::Constant,
            flux_opt_tol: DEFAULT_FLUX_TOL,
            clamp_interval: None,
            obstacle_sampling: ObstacleSampling::Cell,
            kernel_mass_tol: DEFAULT_MASS_TOL,
            series_stride: 1,
        }
    }
}

impl SolverConfig {
    pub fn new(t_final: f64, snapshot_times: Vec<f64>) -> Self {
        Self {
            t_final,
            snapshot_times,
            ..Self::default()
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.series_stride = stride;
        self
    }

    pub fn check(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::InvalidParameter(format!("cfl = {} must lie in (0, 1)", self.cfl)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidParameter(format!("t_final = {} must be >= 0", self.t_final)));
        }
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("snapshot_times must be sorted".into()));
        }
        if let Some(t) = self
            .snapshot_times
            .iter()
            .find(|t| !(**t >= 0.0 && **t <= self.t_final))
        {
            return Err(Error::InvalidParameter(format!(
                "snapshot time {t} lies outside [0, {}]",
                self.t_final
            )));
        }
        if !(self.flux_opt_tol > 0.0) {
            return Err(Error::InvalidParameter("flux_opt_tol must be > 0".into()));
        }
        if self.series_stride == 0 {
            return Err(Error::InvalidParameter("series_stride must be >= 1".into()));
        }
        if let Some((lo, hi)) = self.clamp_interval {
            if !(lo <= hi) {
                return Err(Error::InvalidParameter(format!("empty clamp interval [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// State and derived fields at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub q: ScalarField,
    pub w: ScalarField,
    pub o: ScalarField,
    /// `V(o - q)`.
    pub v: ScalarField,
}

/// Running extrema over every step of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunExtremes {
    pub min_clearance: f64,
    pub min_q: f64,
    pub max_tv: f64,
    pub min_osl_lower_q: f64,
    pub max_osl_upper_v: f64,
    pub max_rel_mass_drift: f64,
    pub max_wave_speed: f64,
    pub min_dt: f64,
}

impl RunExtremes {
    fn new() -> Self {
        Self {
            min_clearance: f64::INFINITY,
            min_q: f64::INFINITY,
            max_tv: 0.0,
            min_osl_lower_q: f64::INFINITY,
            max_osl_upper_v: f64::NEG_INFINITY,
            max_rel_mass_drift: 0.0,
            max_wave_speed: 0.0,
            min_dt: f64::INFINITY,
        }
    }

    pub(crate) fn absorb(&mut self, row: &DiagnosticsRow, initial_mass: f64) {
        self.min_clearance = self.min_clearance.min(row.min_clearance);
        self.min_q = self.min_q.min(row.min_q);
        self.max_tv = self.max_tv.max(row.tv);
        self.min_osl_lower_q = self.min_osl_lower_q.min(row.osl_lower_q);
        self.max_osl_upper_v = self.max_osl_upper_v.max(row.osl_upper_v);
        if initial_mass > 0.0 {
            let drift = ((row.mass - initial_mass) / initial_mass).abs();
            self.max_rel_mass_drift = self.max_rel_mass_drift.max(drift);
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub snapshots: Vec<Snapshot>,
    pub series: DiagnosticsSeries,
    pub step_count: usize,
    pub wall_time: Duration,
    pub extremes: RunExtremes,
    pub initial_mass: f64,
    pub final_state: ScalarField,
    pub final_time: f64,
}

impl RunResult {
    /// Snapshot recorded at `time` (exact match up to `1e-12`).
    pub fn snapshot_at(&self, time: f64) -> Option<&Snapshot> {
        self.snapshots
            .iter()
            .find(|s| (s.time - time).abs() <= 1e-12 * time.abs().max(1.0))
    }
}

/// Reusable buffers for one run.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    pub w: Vec<f64>,
    pub reduced: Vec<f64>,
    pub speed: Vec<f64>,
    pub flux: Vec<f64>,
    /// Face velocity factors.
    pub u: Vec<f64>,
    /// Cell relaxation values.
    pub v: Vec<f64>,
    /// Per-cell side evaluations including both ghosts.
    pub sides: Vec<SideEval>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        let blank = SideEval { demand: 0.0, supply: 0.0, speed: 0.0, relaxation: 0.0 };
        Self {
            w: vec![0.0; n],
            reduced: vec![0.0; n + 1],
            speed: vec![0.0; n + 1],
            flux: vec![0.0; n + 1],
            u: vec![0.0; n + 1],
            v: vec![0.0; n],
            sides: vec![blank; n + 2],
        }
    }
}

/// A model discretized on a grid: kernel weights, obstacle samples and the
/// per-face flux data that stay fixed during a run.
#[derive(Debug, Clone)]
pub struct Scheme {
    model: ModelSpec,
    grid: Grid1D,
    config: SolverConfig,
    flux: FluxModel,
    obstacle: ScalarField,
    faces: Vec<(FluxSide, FluxSide)>,
    /// Cell sides with ghosts; empty unless sampling at cell centers.
    cells: Vec<FluxSide>,
    /// Evaluations of `cells` at `q = 0`.
    vacuum: Vec<SideEval>,
    weights: KernelWeights,
    report: ValidationReport,
}

impl Scheme {
    pub fn new(model: &ModelSpec, grid: &Grid1D, config: &SolverConfig) -> Result<Self> {
        let cells: Vec<f64> = (-1..=grid.n_cells() as isize)
            .map(|i| model.obstacle.value(grid.center(i)))
            .collect();
        let faces: Vec<f64> = (0..=grid.n_cells()).map(|j| model.obstacle.value(grid.face(j))).collect();
        Self::with_obstacle(model, grid, config, &cells, &faces)
    }

    /// Builds the scheme on explicit obstacle samples: `cells` has one ghost
    /// value on each side (`n + 2` entries), `faces` has `n + 1` entries.
    pub fn with_obstacle(
        model: &ModelSpec,
        grid: &Grid1D,
        config: &SolverConfig,
        cells: &[f64],
        faces: &[f64],
    ) -> Result<Self> {
        config.check()?;
        let n = grid.n_cells();
        if cells.len() != n + 2 || faces.len() != n + 1 {
            return Err(Error::InvalidParameter("obstacle sample arrays have the wrong length".into()));
        }
        let report = validate(model, grid);
        if !report.passed() {
            let failed: Vec<String> = report
                .failures()
                .iter()
                .map(|c| format!("{} {} = {:.6e}", c.assumption.label(), c.quantity, c.measured))
                .collect();
            return Err(Error::InvalidModel(failed.join("; ")));
        }
        let clamp = config.clamp_interval.unwrap_or((0.0, report.o_max));
        let flux = FluxModel::new(model, clamp);
        let tol = config.flux_opt_tol;
        let (faces, cells) = match config.obstacle_sampling {
            ObstacleSampling::Cell => {
                let sides = cells
                    .iter()
                    .map(|&o| FluxSide::new(&flux, o, tol))
                    .collect::<Result<Vec<_>>>()?;
                ((0..=n).map(|j| (sides[j], sides[j + 1])).collect(), sides)
            }
            ObstacleSampling::Interface => {
                let faces = faces
                    .iter()
                    .map(|&o| FluxSide::new(&flux, o, tol).map(|s| (s, s)))
                    .collect::<Result<Vec<_>>>()?;
                (faces, Vec::new())
            }
        };
        let vacuum = cells.iter().map(|c| c.evaluate(&flux, 0.0)).collect();
        let weights = build_weights(&model.kernel, grid, config.kernel_mass_tol)?;
        let obstacle = model.sample_obstacle(grid)?;
        Ok(Self {
            model: model.clone(),
            grid: *grid,
            config: config.clone(),
            flux,
            obstacle,
            faces,
            cells,
            vacuum,
            weights,
            report,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn flux_model(&self) -> &FluxModel {
        &self.flux
    }

    /// `o` at cell centers.
    pub fn obstacle(&self) -> &ScalarField {
        &self.obstacle
    }

    pub fn weights(&self) -> &KernelWeights {
        &self.weights
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    pub fn initial_state(&self) -> Result<ScalarField> {
        self.model.sample_initial(&self.grid)
    }

    pub fn nonlocal(&self, q: &ScalarField) -> ScalarField {
        let mut w = vec![0.0; q.len()];
        eval_nonlocal_into(q.values(), &self.weights, self.config.extension, &mut w);
        ScalarField::from_finite(self.grid, w)
    }

    /// `W` seen by the ghost cell right of the window.
    fn ghost_nonlocal(&self, q: &[f64]) -> f64 {
        self.config.extension.value(q)
    }

    /// Reduced interface fluxes `min(demand, supply)` and reduced speeds,
    /// i.e. everything except the `U(W)` factor.
    pub(crate) fn reduced_fluxes(&self, q: &[f64], ws: &mut Workspace) {
        let n = q.len();
        if self.cells.is_empty() {
            for (j, (left, right)) in self.faces.iter().enumerate() {
                let l = left.evaluate(&self.flux, q[j.saturating_sub(1)]);
                let r = right.evaluate(&self.flux, q[j.min(n - 1)]);
                ws.reduced[j] = l.demand.min(r.supply);
                ws.speed[j] = l.speed.max(r.speed);
            }
            return;
        }
        let state = |k: usize| q[k.saturating_sub(1).min(n - 1)];
        let sides = &mut ws.sides[..self.cells.len()];
        match (self.flux.locality(), self.flux.penalization()) {
            (Locality::Nonlocal, Some(p)) => {
                let eps = p.epsilon();
                for (k, (side, out)) in self.cells.iter().zip(sides.iter_mut()).enumerate() {
                    let s = state(k);
                    *out = if s >= 0.0 {
                        side.evaluate_nonlocal(s, eps)
                    } else {
                        side.evaluate(&self.flux, s)
                    };
                }
            }
            _ => {
                for (k, (side, out)) in self.cells.iter().zip(sides.iter_mut()).enumerate() {
                    *out = side.evaluate(&self.flux, state(k));
                }
            }
        }
        for (j, pair) in ws.sides.windows(2).enumerate() {
            let (l, r) = (pair[0], pair[1]);
            ws.reduced[j] = if l.demand < r.supply { l.demand } else { r.supply };
            ws.speed[j] = if l.speed > r.speed { l.speed } else { r.speed };
        }
    }

    /// Interface fluxes for state `q` with nonlocal field `ws.w`; returns the
    /// maximal characteristic speed.
    pub(crate) fn fluxes(&self, q: &[f64], ws: &mut Workspace) -> f64 {
        if let (true, Some(p)) = (self.cached_relaxation(), self.flux.penalization()) {
            return self.fluxes_nonlocal_cells(q, p.epsilon(), ws);
        }
        self.reduced_fluxes(q, ws);
        let ghost = self.ghost_nonlocal(q);
        self.flux.velocity_factors(&ws.w, ghost, &mut ws.u);
        let mut speed = 0.0f64;
        for (((f, r), c), u) in ws.flux.iter_mut().zip(&ws.reduced).zip(&ws.speed).zip(&ws.u) {
            *f = r * u;
            let a = c * u.abs();
            if a > speed {
                speed = a;
            }
        }
        speed
    }

    /// [`Scheme::fluxes`] in one sweep for cell-sampled obstacles in nonlocal
    /// mode, also filling `ws.v`.
    fn fluxes_nonlocal_cells(&self, q: &[f64], eps: f64, ws: &mut Workspace) -> f64 {
        let (lo, hi) = self.flux.clamp();
        match self.model.velocity {
            VelocitySpec::Lwr { slope, capacity } => {
                self.sweep_nonlocal_cells(q, eps, ws, |w| slope * (capacity - w.clamp(lo, hi)))
            }
            _ => self.sweep_nonlocal_cells(q, eps, ws, |w| self.flux.velocity(w)),
        }
    }

    #[inline(always)]
    fn sweep_nonlocal_cells<U: Fn(f64) -> f64>(&self, q: &[f64], eps: f64, ws: &mut Workspace, velocity: U) -> f64 {
        let n = q.len();
        let ghost = self.ghost_nonlocal(q);
        let w = &ws.w[..n];
        let cells = &self.cells[..n + 2];
        let vacuum = &self.vacuum[..n + 2];
        let eval = |k: usize, s: f64| {
            if s == 0.0 {
                vacuum[k]
            } else if s > 0.0 {
                cells[k].evaluate_nonlocal(s, eps)
            } else {
                cells[k].evaluate(&self.flux, s)
            }
        };
        let flux = &mut ws.flux[..n + 1];
        let v = &mut ws.v[..n];
        let mut left = eval(0, q[0]);
        let mut speed = 0.0f64;
        for j in 0..=n {
            let right = eval(j + 1, q[j.min(n - 1)]);
            if j < n {
                v[j] = right.relaxation;
            }
            let r = if left.demand < right.supply { left.demand } else { right.supply };
            let c = if left.speed > right.speed { left.speed } else { right.speed };
            let u = velocity(if j < n { w[j] } else { ghost });
            flux[j] = r * u;
            let a = c * u.abs();
            if a > speed {
                speed = a;
            }
            left = right;
        }
        speed
    }

    /// Upper bound of the interface characteristic speeds.
    pub fn max_wave_speed(&self, q: &ScalarField, w: &ScalarField) -> f64 {
        let mut ws = Workspace::new(q.len());
        ws.w.copy_from_slice(w.values());
        self.fluxes(q.values(), &mut ws)
    }

    pub fn time_step(&self, speed: f64) -> f64 {
        let dx = self.grid.dx();
        if speed > f64::MIN_POSITIVE {
            self.config.cfl * dx / speed
        } else {
            self.config.cfl * dx
        }
    }

    /// One forward-Euler step of length at most `dt_cap`.
    pub(crate) fn advance(
        &self,
        q: &ScalarField,
        next: &mut ScalarField,
        ws: &mut Workspace,
        dt_cap: f64,
        step: usize,
    ) -> Result<StepOutcome> {
        let values = q.values();
        eval_nonlocal_into(values, &self.weights, self.config.extension, &mut ws.w);
        let speed = self.fluxes(values, ws);
        let dt_cfl = self.time_step(speed);
        if dt_cfl < MIN_DT {
            return Err(Error::TimeStepUnderflow { dt: dt_cfl, step });
        }
        let n = values.len();
        let flux = &ws.flux[..n + 1];
        let mut dt = dt_cfl.min(dt_cap);
        let mut ratio = dt / self.grid.dx();
        let o = &self.obstacle.values()[..n];
        let mut finite = true;
        // largest rise beyond the allowed share of the clearance
        let mut worst = f64::NEG_INFINITY;
        let row = if self.cached_relaxation() {
            let v = &ws.v[..n];
            let out = &mut next.values_mut()[..n];
            let mut acc = RowAccumulator::start(values[0], o[0], v[0]);
            for i in 0..n {
                if i > 0 {
                    acc.push(values[i], o[i], v[i]);
                }
                let rise = ratio * (flux[i] - flux[i + 1]);
                let excess = rise - CLEARANCE_FRACTION * (o[i] - values[i]);
                worst = if excess > worst { excess } else { worst };
                let next_q = values[i] + rise;
                finite &= next_q.is_finite();
                out[i] = next_q;
            }
            acc.finish(0.0, self.grid.dx())
        } else {
            for (i, out) in next.values_mut()[..n].iter_mut().enumerate() {
                let rise = ratio * (flux[i] - flux[i + 1]);
                let excess = rise - CLEARANCE_FRACTION * (o[i] - values[i]);
                worst = if excess > worst { excess } else { worst };
                let next_q = values[i] + rise;
                finite &= next_q.is_finite();
                *out = next_q;
            }
            self.record(q, 0.0)
        };
        if !finite {
            return Err(Error::NonFiniteState { step });
        }
        if self.flux.penalization().is_some() && worst > 0.0 {
            let rate = (0..n)
                .filter(|&i| o[i] > values[i])
                .map(|i| (flux[i] - flux[i + 1]) / (o[i] - values[i]))
                .fold(0.0, f64::max);
            ratio = ratio.min(CLEARANCE_FRACTION / rate);
            dt = ratio * self.grid.dx();
            for (i, out) in next.values_mut()[..n].iter_mut().enumerate() {
                *out = values[i] + ratio * (flux[i] - flux[i + 1]);
            }
        }
        Ok(StepOutcome { dt, speed, row })
    }

    /// Whether [`Scheme::fluxes`] leaves the cell relaxation values in `ws.v`.
    fn cached_relaxation(&self) -> bool {
        !self.cells.is_empty()
            && self.flux.locality() == Locality::Nonlocal
            && self.flux.penalization().is_some()
    }

    /// One unconstrained time step from `state`.
    pub fn step(&self, state: &ScalarField) -> Result<(ScalarField, f64)> {
        let mut next = state.clone();
        let mut ws = Workspace::new(state.len());
        let outcome = self.advance(state, &mut next, &mut ws, f64::INFINITY, 0)?;
        Ok((next, outcome.dt))
    }

    pub fn record(&self, q: &ScalarField, time: f64) -> DiagnosticsRow {
        diagnostics::record(q, &self.obstacle, &self.model, time)
    }

    pub fn snapshot(&self, q: &ScalarField, time: f64) -> Snapshot {
        let w = self.nonlocal(q);
        let v: Vec<f64> = q
            .values()
            .iter()
            .zip(self.obstacle.values())
            .map(|(qi, oi)| self.model.relaxation(oi - qi))
            .collect();
        Snapshot {
            time,
            q: q.clone(),
            w,
            o: self.obstacle.clone(),
            v: ScalarField::from_finite(self.grid, v),
        }
    }

    pub fn coincidence(&self, q: &ScalarField, tol: f64) -> CoincidenceReport {
        let w = self.nonlocal(q);
        diagnostics::coincidence(q, &self.obstacle, &w, &self.flux, tol)
    }

    /// Integrates from the sampled initial datum to `t_final`.
    pub fn run(&self) -> Result<RunResult> {
        let q0 = self.initial_state()?;
        self.run_from(q0)
    }

    pub fn run_from(&self, q0: ScalarField) -> Result<RunResult> {
        let mut ws = Workspace::new(q0.len());
        let mut stepper = |q: &ScalarField, next: &mut ScalarField, cap: f64, step: usize| {
            self.advance(q, next, &mut ws, cap, step)
        };
        march(self, q0, self.config.t_final, &self.config.snapshot_times, self.config.series_stride, &mut stepper)
    }
}

/// Outcome of one step: its length, the wave speed bound used and the
/// diagnostics of the state it started from.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepOutcome {
    pub dt: f64,
    pub speed: f64,
    pub row: DiagnosticsRow,
}

/// Generic time loop shared by the hyperbolic and viscous solvers. The
/// stepper receives the current state, the buffer for the next one, the time
/// left to the next stop and the step index.
pub(crate) fn march<F>(
    scheme: &Scheme,
    q0: ScalarField,
    t_final: f64,
    snapshot_times: &[f64],
    stride: usize,
    stepper: &mut F,
) -> Result<RunResult>
where
    F: FnMut(&ScalarField, &mut ScalarField, f64, usize) -> Result<StepOutcome>,
{
    let started = Instant::now();
    let mut targets: Vec<f64> = snapshot_times.iter().copied().filter(|t| *t <= t_final).collect();
    targets.dedup();
    let initial_mass = q0.mass();
    let mut series = DiagnosticsSeries::default();
    let mut extremes = RunExtremes::new();
    let mut snapshots = Vec::new();

    let mut next_target = 0;
    while next_target < targets.len() && targets[next_target] <= 0.0 {
        snapshots.push(scheme.snapshot(&q0, 0.0));
        next_target += 1;
    }

    let mut q = q0;
    let mut next = q.clone();
    let mut t = 0.0;
    let mut step = 0usize;
    let mut keep_row = true;
    while t < t_final {
        let stop = targets.get(next_target).copied().unwrap_or(t_final).min(t_final);
        let remaining = stop - t;
        let slack = 1e-14 * stop.abs().max(1.0);
        let outcome = stepper(&q, &mut next, remaining, step)?;
        let row = DiagnosticsRow { time: t, ..outcome.row };
        if !row.is_finite() {
            return Err(Error::NonFiniteState { step });
        }
        extremes.absorb(&row, initial_mass);
        if keep_row || step % stride == 0 {
            series.push(row);
        }
        extremes.min_dt = extremes.min_dt.min(outcome.dt);
        extremes.max_wave_speed = extremes.max_wave_speed.max(outcome.speed);
        std::mem::swap(&mut q, &mut next);
        step += 1;
        let hit = outcome.dt >= remaining - slack;
        t = if hit { stop } else { t + outcome.dt };
        keep_row = hit;
        while next_target < targets.len() && targets[next_target] <= t {
            snapshots.push(scheme.snapshot(&q, t));
            next_target += 1;
        }
    }
    let row = scheme.record(&q, t);
    if !row.is_finite() {
        return Err(Error::NonFiniteState { step });
    }
    extremes.absorb(&row, initial_mass);
    series.push(row);
    Ok(RunResult {
        snapshots,
        series,
        step_count: step,
        wall_time: started.elapsed(),
        extremes,
        initial_mass,
        final_state: q,
        final_time: t,
    })
}

/// Validates, discretizes and integrates `spec` on `grid`.
pub fn run(spec: &ModelSpec, grid: &Grid1D, config: &SolverConfig) -> Result<RunResult> {
    Scheme::new(spec, grid, config)?.run()
}
