//! Pointwise flux `V(o - q) q U(w)` and its Godunov interface flux.
//!
//! For fixed `o` the reduced flux `g(s) = V(o - s) s` (nonlocal mode) or
//! `g(s) = V(o - s) s U(s)` (local mode) rises to a single maximum and then
//! falls, so the Godunov extremum is either an endpoint value or `g(s*)`.

use crate::error::{Error, Result};
use crate::model::{Locality, ModelSpec, Penalization, VelocitySpec, SATURATION};

pub const DEFAULT_FLUX_TOL: f64 = 1e-10;
pub const MAX_BISECTIONS: usize = 200;
const PRESCAN_POINTS: usize = 64;

/// Flux law with the velocity argument clamped to `[clamp.0, clamp.1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxModel {
    penalization: Option<Penalization>,
    velocity: VelocitySpec,
    locality: Locality,
    clamp: (f64, f64),
    u_max: f64,
    u_deriv_max: f64,
}

impl FluxModel {
    pub fn new(spec: &ModelSpec, clamp: (f64, f64)) -> Self {
        let (lo, hi) = clamp;
        let u_max = spec.velocity.eval(lo).abs().max(spec.velocity.eval(hi).abs());
        Self {
            penalization: spec.penalization,
            velocity: spec.velocity.clone(),
            locality: spec.locality,
            clamp,
            u_max,
            u_deriv_max: spec.velocity.deriv_bound(lo, hi),
        }
    }

    pub fn locality(&self) -> Locality {
        self.locality
    }

    pub fn clamp(&self) -> (f64, f64) {
        self.clamp
    }

    pub fn penalization(&self) -> Option<&Penalization> {
        self.penalization.as_ref()
    }

    #[inline]
    pub fn velocity(&self, w: f64) -> f64 {
        self.velocity.eval(w.clamp(self.clamp.0, self.clamp.1))
    }

    #[inline]
    fn velocity_deriv(&self, w: f64) -> f64 {
        if w < self.clamp.0 || w > self.clamp.1 {
            0.0
        } else {
            self.velocity.deriv(w)
        }
    }

    /// Factor multiplying the reduced flux at an interface: `U(w)` in
    /// nonlocal mode, one in local mode.
    #[inline]
    pub fn velocity_factor(&self, w: f64) -> f64 {
        match self.locality {
            Locality::Nonlocal => self.velocity(w),
            Locality::Local => 1.0,
        }
    }

    /// Writes `velocity_factor(w[j])` for every face, using `ghost` past the
    /// last cell.
    pub(crate) fn velocity_factors(&self, w: &[f64], ghost: f64, out: &mut [f64]) {
        let (lo, hi) = self.clamp;
        let value = |j: usize| if j < w.len() { w[j] } else { ghost }.clamp(lo, hi);
        match (self.locality, &self.velocity) {
            (Locality::Local, _) => out.fill(1.0),
            (Locality::Nonlocal, VelocitySpec::Lwr { slope, capacity }) => {
                for (j, u) in out.iter_mut().enumerate() {
                    *u = slope * (capacity - value(j));
                }
            }
            (Locality::Nonlocal, spec) => {
                for (j, u) in out.iter_mut().enumerate() {
                    *u = spec.eval(value(j));
                }
            }
        }
    }

    /// `(V(o - s), V'(o - s))`.
    #[inline]
    pub(crate) fn relaxation(&self, s: f64, o: f64) -> (f64, f64) {
        match &self.penalization {
            Some(p) => {
                let x = (o - s) / p.epsilon();
                if x > SATURATION {
                    return (1.0, 0.0);
                }
                let e = (-x).exp();
                (1.0 - e, e / p.epsilon())
            }
            None => (1.0, 0.0),
        }
    }

    /// Reduced flux `g(s)` for obstacle height `o`.
    #[inline]
    pub fn reduced(&self, s: f64, o: f64) -> f64 {
        let v = match &self.penalization {
            Some(p) => p.value(o - s),
            None => 1.0,
        };
        match self.locality {
            Locality::Nonlocal => v * s,
            Locality::Local => v * s * self.velocity(s),
        }
    }

    /// `(g(s), g'(s))` sharing one exponential.
    #[inline]
    pub fn reduced_with_deriv(&self, s: f64, o: f64) -> (f64, f64) {
        let (v, dv) = self.relaxation(s, o);
        match self.locality {
            Locality::Nonlocal => (v * s, v - s * dv),
            Locality::Local => {
                let u = self.velocity(s);
                (v * s * u, -dv * s * u + v * (u + s * self.velocity_deriv(s)))
            }
        }
    }

    /// `dg/ds`.
    pub fn reduced_deriv(&self, s: f64, o: f64) -> f64 {
        let (v, dv) = self.relaxation(s, o);
        match self.locality {
            Locality::Nonlocal => v - s * dv,
            Locality::Local => {
                let u = self.velocity(s);
                -dv * s * u + v * (u + s * self.velocity_deriv(s))
            }
        }
    }

    /// `f = V(o - q) q U(w)`; in local mode `w` is ignored and `U(q)` is used.
    pub fn cell_flux(&self, q: f64, o: f64, w: f64) -> f64 {
        self.reduced(q, o) * self.velocity_factor(w)
    }

    /// Upper right end of the range scanned for the maximiser of `g`.
    fn search_hi(&self, o: f64) -> f64 {
        match (&self.penalization, self.locality) {
            (Some(_), _) => o,
            (None, Locality::Local) => self.clamp.1,
            (None, Locality::Nonlocal) => 0.0,
        }
    }

    /// Maximiser `s*` of `g` on its increasing-then-decreasing range, or
    /// `None` when `g` is increasing on everything the solver can reach.
    pub fn critical_point(&self, o: f64, tol: f64) -> Result<Option<f64>> {
        let hi = self.search_hi(o);
        if hi <= 0.0 {
            return Ok(None);
        }
        let roots = self.derivative_roots(0.0, hi, o, tol)?;
        Ok(roots.into_iter().next())
    }

    /// Roots of `g'` on `[lo, hi]` bracketed by a uniform pre-scan.
    fn derivative_roots(&self, lo: f64, hi: f64, o: f64, tol: f64) -> Result<Vec<f64>> {
        let mut roots = Vec::new();
        if hi <= lo {
            return Ok(roots);
        }
        let node = |k: usize| lo + (hi - lo) * k as f64 / PRESCAN_POINTS as f64;
        let mut a = lo;
        let mut da = self.reduced_deriv(a, o);
        for k in 1..=PRESCAN_POINTS {
            let b = node(k);
            let db = self.reduced_deriv(b, o);
            if da == 0.0 {
                roots.push(a);
            } else if da.signum() != db.signum() && db != 0.0 {
                roots.push(self.bisect(a, b, da, o, tol)?);
            }
            a = b;
            da = db;
        }
        if da == 0.0 {
            roots.push(hi);
        }
        Ok(roots)
    }

    fn bisect(&self, mut a: f64, mut b: f64, da: f64, o: f64, tol: f64) -> Result<f64> {
        let (lo0, hi0) = (a, b);
        let sign_a = da.signum();
        for _ in 0..MAX_BISECTIONS {
            if b - a <= tol {
                return Ok(0.5 * (a + b));
            }
            let m = 0.5 * (a + b);
            let dm = self.reduced_deriv(m, o);
            if dm == 0.0 {
                return Ok(m);
            }
            if dm.signum() == sign_a {
                a = m;
            } else {
                b = m;
            }
        }
        Err(Error::BisectionFailed {
            lo: lo0,
            hi: hi0,
            iterations: MAX_BISECTIONS,
        })
    }

    /// Godunov flux by explicit search: min of `f` over `[q_l, q_r]` when
    /// `q_l <= q_r`, max over `[q_r, q_l]` otherwise.
    pub fn godunov_search(&self, q_l: f64, q_r: f64, o: f64, w: f64, tol: f64) -> Result<f64> {
        let (lo, hi) = if q_l <= q_r { (q_l, q_r) } else { (q_r, q_l) };
        let mut best = if q_l <= q_r {
            self.reduced(q_l, o).min(self.reduced(q_r, o))
        } else {
            self.reduced(q_l, o).max(self.reduced(q_r, o))
        };
        for s in self.derivative_roots(lo, hi, o, tol)? {
            let g = self.reduced(s, o);
            best = if q_l <= q_r { best.min(g) } else { best.max(g) };
        }
        Ok(best * self.velocity_factor(w))
    }

    /// Bound of `|g'|` over `[min(q, 0), q]`.
    pub fn speed_bound(&self, q: f64, o: f64) -> f64 {
        let lo = q.min(0.0);
        let hi = q.max(0.0);
        match self.locality {
            Locality::Nonlocal => {
                // g' decreases on s >= -2 eps
                let mut m = self.reduced_deriv(hi, o).abs().max(self.reduced_deriv(0.0, o).abs());
                if lo < 0.0 {
                    m = m.max(self.reduced_deriv(lo, o).abs());
                    if let Some(p) = &self.penalization {
                        let turn = -2.0 * p.epsilon();
                        if turn > lo {
                            m = m.max(self.reduced_deriv(turn, o).abs());
                        }
                    }
                }
                m
            }
            Locality::Local => {
                let (v_hi, dv_hi) = self.relaxation(hi, o);
                let (v_lo, _) = self.relaxation(lo, o);
                let s_abs = lo.abs().max(hi);
                let v_abs = v_hi.abs().max(v_lo.abs());
                dv_hi * s_abs * self.u_max + v_abs * (self.u_max + s_abs * self.u_deriv_max)
            }
        }
    }
}

/// Precomputed monotone pieces of the reduced flux on one side of a face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxSide {
    pub obstacle: f64,
    /// Maximiser of `g`, `+∞` if `g` is increasing on the reachable range.
    pub peak: f64,
    pub peak_value: f64,
    /// `|g'(0)|`.
    pub speed_at_zero: f64,
}

/// Reduced flux and speed bound of one state on one side of a face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideEval {
    pub demand: f64,
    pub supply: f64,
    pub speed: f64,
    /// `V(o - q)`.
    pub relaxation: f64,
}

impl FluxSide {
    pub fn new(model: &FluxModel, obstacle: f64, tol: f64) -> Result<Self> {
        let peak = model.critical_point(obstacle, tol)?.unwrap_or(f64::INFINITY);
        let peak_value = if peak.is_finite() {
            model.reduced(peak, obstacle)
        } else {
            f64::INFINITY
        };
        Ok(Self {
            obstacle,
            peak,
            peak_value,
            speed_at_zero: model.reduced_deriv(0.0, obstacle).abs(),
        })
    }

    /// Demand, supply and `max |g'|` over `[min(q, 0), q]` in one pass.
    #[inline]
    pub fn evaluate(&self, model: &FluxModel, q: f64) -> SideEval {
        let (g, dg) = model.reduced_with_deriv(q, self.obstacle);
        let speed = if q >= 0.0 && model.locality() == Locality::Nonlocal {
            dg.abs().max(self.speed_at_zero)
        } else {
            model.speed_bound(q, self.obstacle)
        };
        SideEval {
            demand: if q < self.peak { g } else { self.peak_value },
            supply: if q > self.peak { g } else { self.peak_value },
            speed,
            relaxation: model.relaxation(q, self.obstacle).0,
        }
    }

    /// [`FluxSide::evaluate`] specialised to nonlocal mode with a
    /// penalization of width `eps` and `q >= 0`; bitwise identical results.
    #[inline(always)]
    pub(crate) fn evaluate_nonlocal(&self, q: f64, eps: f64) -> SideEval {
        let x = (self.obstacle - q) / eps;
        let (v, dv) = if x > SATURATION {
            (1.0, 0.0)
        } else {
            let e = (-x).exp();
            (1.0 - e, e / eps)
        };
        let g = v * q;
        let slope = (v - q * dv).abs();
        SideEval {
            demand: if q < self.peak { g } else { self.peak_value },
            supply: if q > self.peak { g } else { self.peak_value },
            speed: if slope > self.speed_at_zero { slope } else { self.speed_at_zero },
            relaxation: v,
        }
    }

    /// Monotone increasing envelope `g(min(q, s*))`.
    #[inline]
    pub fn demand(&self, model: &FluxModel, q: f64) -> f64 {
        if q < self.peak {
            model.reduced(q, self.obstacle)
        } else {
            self.peak_value
        }
    }

    /// Monotone decreasing envelope `g(max(q, s*))`.
    #[inline]
    pub fn supply(&self, model: &FluxModel, q: f64) -> f64 {
        if q > self.peak {
            model.reduced(q, self.obstacle)
        } else {
            self.peak_value
        }
    }
}

/// Godunov flux between two sides whose obstacle heights may differ.
/// With equal heights this is the classical min/max formula.
#[inline]
pub fn demand_supply_flux(model: &FluxModel, left: &FluxSide, right: &FluxSide, q_l: f64, q_r: f64, w: f64) -> f64 {
    left.demand(model, q_l).min(right.supply(model, q_r)) * model.velocity_factor(w)
}

/// Free-function form of [`FluxModel::cell_flux`].
pub fn cell_flux(model: &FluxModel, q: f64, o_x: f64, w: f64) -> f64 {
    model.cell_flux(q, o_x, w)
}

/// Free-function form of [`FluxModel::godunov_search`].
pub fn godunov_interface_flux(
    model: &FluxModel,
    q_left: f64,
    q_right: f64,
    o_face: f64,
    w_face: f64,
    tol: f64,
) -> Result<f64> {
    model.godunov_search(q_left, q_right, o_face, w_face, tol)
}
