//! Semi-implicit solver for the viscosity approximation
//! `q_t + (V(o_nu - q) q U(W[q]))_x = nu (q_xx - o_nu'')` with mollified data.
//!
//! Each step freezes the reduced interface fluxes of the current state, then
//! runs a Picard loop on the nonlocal argument: every iterate solves the
//! implicit diffusion system with `U(W[previous iterate])`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, ScalarField};
use crate::hyperbolic::{march, RunResult, Scheme, SolverConfig, StepOutcome, Workspace};
use crate::model::ModelSpec;
use crate::nonlocal::eval_nonlocal_into;

pub const DEFAULT_PICARD_TOL: f64 = 1e-10;
pub const DEFAULT_PICARD_MAX: usize = 50;
const SOLVE_RESIDUAL_TOL: f64 = 1e-12;

/// Explicit interface flux inside the viscous step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ViscousFlux {
    /// Same demand/supply flux as the hyperbolic solver.
    #[default]
    Godunov,
    /// `f(q_left)`; only stable while the diffusion dominates `|f'| dx`.
    Upwind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViscousConfig {
    pub nu: f64,
    /// Support radius of the mollifier; `None` means `max(nu, dx)`.
    pub mollifier_width: Option<f64>,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub flux: ViscousFlux,
    pub base: SolverConfig,
}

impl ViscousConfig {
    pub fn new(nu: f64, base: SolverConfig) -> Self {
        Self {
            nu,
            mollifier_width: None,
            picard_tol: DEFAULT_PICARD_TOL,
            picard_max: DEFAULT_PICARD_MAX,
            flux: ViscousFlux::Godunov,
            base,
        }
    }

    pub fn width(&self, grid: &Grid1D) -> f64 {
        self.mollifier_width.unwrap_or(self.nu.max(grid.dx()))
    }

    pub fn check(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::InvalidParameter(format!("nu must lie in (0, 1], got {}", self.nu)));
        }
        if !(self.picard_tol > 0.0) || self.picard_max == 0 {
            return Err(Error::InvalidParameter("Picard tolerance and iteration cap must be positive".into()));
        }
        self.base.check()
    }
}

/// Standard bump `exp(-1 / (1 - r^2))` on `|r| < 1`.
fn bump(r: f64) -> f64 {
    if r.abs() < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// Normalized discrete mollifier weights for offsets `-r..=r`.
pub fn mollifier_weights(width: f64, dx: f64) -> Result<Vec<f64>> {
    if !(width >= dx) {
        return Err(Error::MollifierTooNarrow { width, dx });
    }
    let r = (width / dx).floor() as isize;
    let mut w: Vec<f64> = (-r..=r).map(|k| bump(k as f64 * dx / width)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Discrete convolution with the bump of support radius `width`, reflecting
/// evenly at both window edges. The averaging matrix is doubly stochastic, so
/// mass is kept and no new extrema appear.
pub fn mollify(f: &ScalarField, width: f64) -> Result<ScalarField> {
    let grid = *f.grid();
    let weights = mollifier_weights(width, grid.dx())?;
    let n = f.len() as isize;
    let r = (weights.len() / 2) as isize;
    if r >= n {
        return Err(Error::InvalidParameter(format!("mollifier radius of {r} cells exceeds the window")));
    }
    let reflect = |j: isize| {
        if j < 0 {
            -j - 1
        } else if j >= n {
            2 * n - 1 - j
        } else {
            j
        }
    };
    let v = f.values();
    let out = (0..n)
        .map(|i| {
            weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * v[reflect(i + k as isize - r) as usize])
                .sum()
        })
        .collect();
    Ok(ScalarField::from_finite(grid, out))
}

/// `phi_nu * g` from the closed form of `g` (no reflection), at cell centers
/// `i = -1..=n` including both ghosts.
fn mollify_closed_form(g: impl Fn(f64) -> f64, grid: &Grid1D, width: f64) -> Result<Vec<f64>> {
    let weights = mollifier_weights(width, grid.dx())?;
    let r = (weights.len() / 2) as isize;
    Ok((-1..=grid.n_cells() as isize)
        .map(|i| {
            weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * g(grid.center(i + k as isize - r)))
                .sum()
        })
        .collect())
}

/// Solves a tridiagonal system by the Thomas algorithm; `lower[0]` and
/// `upper[n - 1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64], out: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut m = diag[0];
    if m == 0.0 {
        return Err(Error::SingularSystem { row: 0 });
    }
    c[0] = upper[0] / m;
    d[0] = rhs[0] / m;
    for i in 1..n {
        m = diag[i] - lower[i] * c[i - 1];
        if m == 0.0 {
            return Err(Error::SingularSystem { row: i });
        }
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    out[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = d[i] - c[i] * out[i + 1];
    }
    Ok(())
}

/// Bands of `I - a D2` with the homogeneous Neumann closure; every column
/// sums to one, so the implicit solve conserves mass.
pub fn neumann_diffusion(a: f64, lower: &mut [f64], diag: &mut [f64], upper: &mut [f64]) {
    let n = diag.len();
    for i in 0..n {
        let neighbours = usize::from(i > 0) + usize::from(i + 1 < n);
        lower[i] = if i > 0 { -a } else { 0.0 };
        upper[i] = if i + 1 < n { -a } else { 0.0 };
        diag[i] = 1.0 + a * neighbours as f64;
    }
}

/// `max |A x - b| / max(|b|, tiny)` for the tridiagonal `A`.
fn relative_residual(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64], x: &[f64]) -> f64 {
    let n = diag.len();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..n {
        let mut ax = diag[i] * x[i];
        if i > 0 {
            ax += lower[i] * x[i - 1];
        }
        if i + 1 < n {
            ax += upper[i] * x[i + 1];
        }
        worst = worst.max((ax - rhs[i]).abs());
        scale = scale.max(rhs[i].abs());
    }
    worst / scale.max(f64::MIN_POSITIVE)
}

/// Per-run bookkeeping specific to the viscous solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViscousStats {
    /// Net mass injected by the source `-nu o_nu''` over the run.
    pub source_mass: f64,
    /// Net mass through the two window edges over the run.
    pub boundary_mass: f64,
    pub max_picard: usize,
    pub mean_picard: f64,
    pub max_solve_residual: f64,
}

#[derive(Debug, Clone)]
pub struct ViscousResult {
    pub run: RunResult,
    pub stats: ViscousStats,
    /// Mollified initial datum actually integrated.
    pub initial: ScalarField,
}

/// Discretized viscous problem.
#[derive(Debug, Clone)]
pub struct ViscousScheme {
    scheme: Scheme,
    config: ViscousConfig,
    /// Mollified obstacle at cell centers with both ghosts.
    obstacle_nu: Vec<f64>,
    /// Discrete second difference of `obstacle_nu` at the cells.
    source: Vec<f64>,
    width: f64,
}

struct Buffers {
    ws: Workspace,
    iterate: Vec<f64>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    picard_total: usize,
    max_picard: usize,
    max_residual: f64,
    source_mass: f64,
    boundary_mass: f64,
}

impl ViscousScheme {
    pub fn new(model: &ModelSpec, grid: &Grid1D, config: &ViscousConfig) -> Result<Self> {
        config.check()?;
        let width = config.width(grid);
        let obstacle = &model.obstacle;
        let cells = mollify_closed_form(|x| obstacle.value(x), grid, width)?;
        let faces: Vec<f64> = mollify_closed_form(|x| obstacle.value(x + 0.5 * grid.dx()), grid, width)?[..=grid.n_cells()].to_vec();
        let scheme = Scheme::with_obstacle(model, grid, &config.base, &cells, &faces)?;
        let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
        let source = cells
            .windows(3)
            .map(|w| (w[2] - 2.0 * w[1] + w[0]) * inv_dx2)
            .collect();
        Ok(Self {
            scheme,
            config: config.clone(),
            obstacle_nu: cells,
            source,
            width,
        })
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    pub fn config(&self) -> &ViscousConfig {
        &self.config
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// `o_nu` at the cells (without ghosts).
    pub fn mollified_obstacle(&self) -> ScalarField {
        let n = self.scheme.grid().n_cells();
        ScalarField::from_finite(*self.scheme.grid(), self.obstacle_nu[1..=n].to_vec())
    }

    pub fn initial_state(&self) -> Result<ScalarField> {
        mollify(&self.scheme.initial_state()?, self.width)
    }

    fn buffers(&self) -> Buffers {
        let n = self.scheme.grid().n_cells();
        Buffers {
            ws: Workspace::new(n),
            iterate: vec![0.0; n],
            rhs: vec![0.0; n],
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            picard_total: 0,
            max_picard: 0,
            max_residual: 0.0,
            source_mass: 0.0,
            boundary_mass: 0.0,
        }
    }

    /// Reduced fluxes and speeds of `q` under the configured flux choice.
    fn reduced(&self, q: &[f64], ws: &mut Workspace) {
        match self.config.flux {
            ViscousFlux::Godunov => self.scheme.reduced_fluxes(q, ws),
            ViscousFlux::Upwind => {
                let flux = self.scheme.flux_model();
                let n = q.len();
                for j in 0..=n {
                    let (s, o) = (q[j.saturating_sub(1)], self.obstacle_nu[j]);
                    let (g, dg) = flux.reduced_with_deriv(s, o);
                    ws.reduced[j] = g;
                    ws.speed[j] = dg.abs();
                }
            }
        }
    }

    fn advance(&self, q: &ScalarField, next: &mut ScalarField, b: &mut Buffers, dt_cap: f64, step: usize) -> Result<StepOutcome> {
        let scheme = &self.scheme;
        let grid = scheme.grid();
        let values = q.values();
        let n = values.len();
        let flux = scheme.flux_model();
        let extension = scheme.config().extension;
        let row = scheme.record(q, 0.0);

        self.reduced(values, &mut b.ws);
        eval_nonlocal_into(values, scheme.weights(), extension, &mut b.ws.w);
        let face_speed = |ws: &Workspace, j: usize, ghost: f64| {
            let w = if j < n { ws.w[j] } else { ghost };
            flux.velocity_factor(w)
        };
        let ghost = extension.value(values);
        let mut speed = 0.0f64;
        for j in 0..=n {
            speed = speed.max(b.ws.speed[j] * face_speed(&b.ws, j, ghost).abs());
        }
        let dt_cfl = scheme.time_step(speed);
        if dt_cfl < 1e-14 {
            return Err(Error::TimeStepUnderflow { dt: dt_cfl, step });
        }
        let dt = dt_cfl.min(dt_cap);
        let ratio = dt / grid.dx();
        let nu = self.config.nu;
        let a = nu * dt / (grid.dx() * grid.dx());
        neumann_diffusion(a, &mut b.lower, &mut b.diag, &mut b.upper);

        b.iterate.copy_from_slice(values);
        let mut iterations = 0;
        let mut residual = f64::INFINITY;
        while iterations < self.config.picard_max {
            iterations += 1;
            if iterations > 1 {
                eval_nonlocal_into(&b.iterate, scheme.weights(), extension, &mut b.ws.w);
            }
            let ghost = extension.value(&b.iterate);
            for j in 0..=n {
                b.ws.flux[j] = b.ws.reduced[j] * face_speed(&b.ws, j, ghost);
            }
            for i in 0..n {
                b.rhs[i] = values[i] - ratio * (b.ws.flux[i + 1] - b.ws.flux[i]) - dt * nu * self.source[i];
            }
            let out = next.values_mut();
            solve_tridiagonal(&b.lower, &b.diag, &b.upper, &b.rhs, out)?;
            b.max_residual = b.max_residual.max(relative_residual(&b.lower, &b.diag, &b.upper, &b.rhs, out));
            residual = out
                .iter()
                .zip(&b.iterate)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            b.iterate.copy_from_slice(out);
            if !residual.is_finite() {
                return Err(Error::NonFiniteState { step });
            }
            if residual <= self.config.picard_tol {
                break;
            }
        }
        if residual > self.config.picard_tol && residual > 1e3 * self.config.picard_tol {
            return Err(Error::PicardStalled { step, residual, iterations });
        }
        if b.max_residual > SOLVE_RESIDUAL_TOL {
            return Err(Error::SingularSystem { row: n });
        }
        b.picard_total += iterations;
        b.max_picard = b.max_picard.max(iterations);
        b.boundary_mass -= dt * (b.ws.flux[n] - b.ws.flux[0]);
        b.source_mass -= dt * nu * self.source.iter().sum::<f64>() * grid.dx();
        Ok(StepOutcome { dt, speed, row })
    }

    pub fn run(&self) -> Result<ViscousResult> {
        let q0 = self.initial_state()?;
        let mut b = self.buffers();
        let base = &self.config.base;
        let mut stepper = |q: &ScalarField, next: &mut ScalarField, cap: f64, step: usize| self.advance(q, next, &mut b, cap, step);
        let run = march(&self.scheme, q0.clone(), base.t_final, &base.snapshot_times, base.series_stride, &mut stepper)?;
        let steps = run.step_count.max(1);
        let stats = ViscousStats {
            source_mass: b.source_mass,
            boundary_mass: b.boundary_mass,
            max_picard: b.max_picard,
            mean_picard: b.picard_total as f64 / steps as f64,
            max_solve_residual: b.max_residual,
        };
        Ok(ViscousResult { run, stats, initial: q0 })
    }
}

/// Validates, discretizes and integrates the viscous problem.
pub fn viscous_run(spec: &ModelSpec, grid: &Grid1D, config: &ViscousConfig) -> Result<ViscousResult> {
    ViscousScheme::new(spec, grid, config)?.run()
}

/// One viscous step from `state` (no time cap).
pub fn viscous_step(spec: &ModelSpec, grid: &Grid1D, config: &ViscousConfig, state: &ScalarField) -> Result<(ScalarField, f64)> {
    let vs = ViscousScheme::new(spec, grid, config)?;
    let mut b = vs.buffers();
    let mut next = state.clone();
    let out = vs.advance(state, &mut next, &mut b, f64::INFINITY, 0)?;
    Ok((next, out.dt))
}
