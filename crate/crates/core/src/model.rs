//! Closed-form model data: kernel, velocity, obstacle, penalization and
//! initial datum, together with the checks of the well-posedness hypotheses.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{sample_function, Grid1D, SampleMode, ScalarField};

/// Velocity relaxation factor `V(s) = 1 - exp(-s / epsilon)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalization {
    epsilon: f64,
}

/// Beyond `s / epsilon > SATURATION`, `1 - exp(-s / epsilon)` rounds to one.
pub const SATURATION: f64 = 40.0;

impl Penalization {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be > 0, got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `V(s)`; negative for `s < 0`.
    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        let x = s / self.epsilon;
        if x > SATURATION {
            return 1.0;
        }
        -(-x).exp_m1()
    }

    #[inline]
    pub fn deriv(&self, s: f64) -> f64 {
        (-s / self.epsilon).exp() / self.epsilon
    }
}

pub fn penalize(p: &Penalization, s: f64) -> f64 {
    p.value(s)
}

pub fn penalize_deriv(p: &Penalization, s: f64) -> f64 {
    p.deriv(s)
}

/// Nonnegative, nonincreasing kernel on the half line with unit mass.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `gamma(x) = rate * exp(-rate * x)`.
    Exponential { rate: f64 },
    /// Samples `values[k] = gamma(k * spacing)`, linearly interpolated; the
    /// mass beyond the last sample is declared as `tail_mass`.
    Tabulated {
        spacing: f64,
        values: Vec<f64>,
        tail_mass: f64,
    },
}

impl KernelSpec {
    pub fn exponential() -> Self {
        KernelSpec::Exponential { rate: 1.0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            KernelSpec::Exponential { rate } => rate * (-rate * x).exp(),
            KernelSpec::Tabulated { spacing, values, .. } => {
                let pos = x / spacing;
                let k = pos.floor() as usize;
                if k + 1 >= values.len() {
                    return if k + 1 == values.len() && pos == k as f64 {
                        values[k]
                    } else {
                        0.0
                    };
                }
                let t = pos - k as f64;
                values[k] * (1.0 - t) + values[k + 1] * t
            }
        }
    }

    /// `∫_0^∞ gamma`: analytic for the exponential, trapezoid plus tail otherwise.
    pub fn mass(&self) -> f64 {
        match self {
            KernelSpec::Exponential { .. } => 1.0,
            KernelSpec::Tabulated {
                spacing,
                values,
                tail_mass,
            } => {
                let inner: f64 = values.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum();
                inner * spacing + tail_mass
            }
        }
    }

    fn is_nonincreasing(&self) -> bool {
        match self {
            KernelSpec::Exponential { rate } => *rate > 0.0 && rate.is_finite(),
            KernelSpec::Tabulated { values, spacing, tail_mass } => {
                *spacing > 0.0
                    && *tail_mass >= 0.0
                    && values.len() >= 2
                    && values.iter().all(|v| *v >= 0.0 && v.is_finite())
                    && values.windows(2).all(|w| w[1] <= w[0])
            }
        }
    }
}

/// Velocity law `U`.
#[derive(Debug, Clone, PartialEq)]
pub enum VelocitySpec {
    /// `U(w) = slope * (capacity - w)`; the LWR-type preset is slope 2/3, capacity 3/2.
    Lwr { slope: f64, capacity: f64 },
    Constant(f64),
    /// `U(w) = Σ c_k w^k`.
    Polynomial(Vec<f64>),
}

impl VelocitySpec {
    pub fn lwr() -> Self {
        VelocitySpec::Lwr {
            slope: 2.0 / 3.0,
            capacity: 1.5,
        }
    }

    pub fn unit() -> Self {
        VelocitySpec::Constant(1.0)
    }

    #[inline]
    pub fn eval(&self, w: f64) -> f64 {
        match self {
            VelocitySpec::Lwr { slope, capacity } => slope * (capacity - w),
            VelocitySpec::Constant(c) => *c,
            VelocitySpec::Polynomial(c) => c.iter().rev().fold(0.0, |acc, ck| acc * w + ck),
        }
    }

    pub fn deriv(&self, w: f64) -> f64 {
        match self {
            VelocitySpec::Lwr { slope, .. } => -slope,
            VelocitySpec::Constant(_) => 0.0,
            VelocitySpec::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, ck)| acc * w + k as f64 * ck),
        }
    }

    /// Upper bound of `|U'|` on `[lo, hi]`.
    pub fn deriv_bound(&self, lo: f64, hi: f64) -> f64 {
        match self {
            VelocitySpec::Lwr { slope, .. } => slope.abs(),
            VelocitySpec::Constant(_) => 0.0,
            VelocitySpec::Polynomial(c) => {
                let r = lo.abs().max(hi.abs());
                c.iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, ck)| k as f64 * ck.abs() * r.powi(k as i32 - 1))
                    .sum()
            }
        }
    }
}

pub fn velocity_eval(v: &VelocitySpec, w: f64) -> f64 {
    v.eval(w)
}

pub fn velocity_deriv(v: &VelocitySpec, w: f64) -> f64 {
    v.deriv(w)
}

/// Space-dependent ceiling `o(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObstacleSpec {
    /// `o(x) = level - depth * exp(-((x - center) / width)^2)`.
    Gaussian {
        level: f64,
        depth: f64,
        center: f64,
        width: f64,
    },
    Constant(f64),
}

impl ObstacleSpec {
    /// `o(x) = 1.2 - exp(-(x - 1)^2)`.
    pub fn gauss_dip() -> Self {
        ObstacleSpec::Gaussian {
            level: 1.2,
            depth: 1.0,
            center: 1.0,
            width: 1.0,
        }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            ObstacleSpec::Gaussian {
                level,
                depth,
                center,
                width,
            } => {
                let z = (x - center) / width;
                level - depth * (-z * z).exp()
            }
            ObstacleSpec::Constant(c) => c,
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match *self {
            ObstacleSpec::Gaussian {
                depth,
                center,
                width,
                ..
            } => {
                let z = (x - center) / width;
                2.0 * depth * z / width * (-z * z).exp()
            }
            ObstacleSpec::Constant(_) => 0.0,
        }
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        match *self {
            ObstacleSpec::Gaussian {
                depth,
                center,
                width,
                ..
            } => {
                let z = (x - center) / width;
                2.0 * depth / (width * width) * (1.0 - 2.0 * z * z) * (-z * z).exp()
            }
            ObstacleSpec::Constant(_) => 0.0,
        }
    }
}

/// Initial datum `q0`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    /// `χ_[-1.5,-1](x) - x χ_(-1,0](x)`.
    Q01,
    /// `χ_[-1.5,-1](x)`.
    Q02,
    Zero,
    /// `height * exp(-((x - center) / width)^2)`.
    Gaussian { center: f64, width: f64, height: f64 },
    /// Piecewise-linear interpolation of `(x, q)` nodes, zero outside.
    Table { x: Vec<f64>, q: Vec<f64> },
}

impl InitialDatum {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialDatum::Q01 => {
                if (-1.5..=-1.0).contains(&x) {
                    1.0
                } else if x > -1.0 && x <= 0.0 {
                    -x
                } else {
                    0.0
                }
            }
            InitialDatum::Q02 => {
                if (-1.5..=-1.0).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            InitialDatum::Zero => 0.0,
            InitialDatum::Gaussian {
                center,
                width,
                height,
            } => {
                let z = (x - center) / width;
                height * (-z * z).exp()
            }
            InitialDatum::Table { x: xs, q } => {
                if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
                    return 0.0;
                }
                let k = xs.partition_point(|&node| node <= x);
                if k == 0 {
                    return q[0];
                }
                if k >= xs.len() {
                    return q[xs.len() - 1];
                }
                let (x0, x1) = (xs[k - 1], xs[k]);
                let t = (x - x0) / (x1 - x0);
                q[k - 1] * (1.0 - t) + q[k] * t
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Locality {
    #[default]
    Nonlocal,
    /// Velocity evaluated at the local density instead of the nonlocal mean.
    Local,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kernel: KernelSpec,
    pub velocity: VelocitySpec,
    pub obstacle: ObstacleSpec,
    /// `None` removes the obstacle coupling (`V ≡ 1`).
    pub penalization: Option<Penalization>,
    pub initial: InitialDatum,
    pub locality: Locality,
    pub sampling: SampleMode,
}

impl ModelSpec {
    /// Gaussian obstacle, unit exponential kernel, LWR velocity, `q0 = Q01`, nonlocal.
    pub fn reference_preset(epsilon: f64) -> Result<Self> {
        Ok(Self {
            kernel: KernelSpec::exponential(),
            velocity: VelocitySpec::lwr(),
            obstacle: ObstacleSpec::gauss_dip(),
            penalization: Some(Penalization::new(epsilon)?),
            initial: InitialDatum::Q01,
            locality: Locality::Nonlocal,
            sampling: SampleMode::Midpoint,
        })
    }

    pub fn with_initial(mut self, initial: InitialDatum) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_velocity(mut self, velocity: VelocitySpec) -> Self {
        self.velocity = velocity;
        self
    }

    pub fn with_locality(mut self, locality: Locality) -> Self {
        self.locality = locality;
        self
    }

    pub fn with_penalization(mut self, penalization: Option<Penalization>) -> Self {
        self.penalization = penalization;
        self
    }

    pub fn with_obstacle(mut self, obstacle: ObstacleSpec) -> Self {
        self.obstacle = obstacle;
        self
    }

    pub fn with_kernel(mut self, kernel: KernelSpec) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.penalization.map(|p| p.epsilon())
    }

    /// `V(o - q)`, identically one without penalization.
    #[inline]
    pub fn relaxation(&self, clearance: f64) -> f64 {
        match &self.penalization {
            Some(p) => p.value(clearance),
            None => 1.0,
        }
    }

    pub fn sample_initial(&self, grid: &Grid1D) -> Result<ScalarField> {
        sample_function(grid, |x| self.initial.eval(x), self.sampling)
    }

    pub fn sample_obstacle(&self, grid: &Grid1D) -> Result<ScalarField> {
        sample_function(grid, |x| self.obstacle.value(x), SampleMode::Midpoint)
    }
}

/// The five hypotheses on the data, plus positivity of the relaxation scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Assumption {
    Velocity,
    Kernel,
    Obstacle,
    Initial,
    Feasibility,
    Relaxation,
}

impl Assumption {
    pub fn label(&self) -> &'static str {
        match self {
            Assumption::Velocity => "(U)",
            Assumption::Kernel => "(K)",
            Assumption::Obstacle => "(O)",
            Assumption::Initial => "(I)",
            Assumption::Feasibility => "(D)",
            Assumption::Relaxation => "(V)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    pub passed: bool,
    pub quantity: &'static str,
    pub measured: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
    pub u_min: f64,
    pub kernel_mass: f64,
    pub o_min: f64,
    pub o_max: f64,
    pub tv_initial: f64,
    pub feasibility_margin: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, assumption: Assumption) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.assumption == assumption)
    }

    pub fn failures(&self) -> Vec<&AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<4} {:<5} {} = {:.6e}  {}",
                c.assumption.label(),
                if c.passed { "pass" } else { "FAIL" },
                c.quantity,
                c.measured,
                c.detail
            )?;
        }
        Ok(())
    }
}

/// Audit-mesh refinement factor for the sampled assumption checks.
const AUDIT_REFINEMENT: usize = 10;
const KERNEL_MASS_TOL: f64 = 1e-8;

pub fn validate(spec: &ModelSpec, grid: &Grid1D) -> ValidationReport {
    let audit_n = grid.n_cells() * AUDIT_REFINEMENT;
    let audit_dx = (grid.x_right() - grid.x_left()) / audit_n as f64;
    let audit: Vec<f64> = (0..=audit_n)
        .map(|k| grid.x_left() + k as f64 * audit_dx)
        .collect();
    let mut checks = Vec::with_capacity(6);

    // (O)
    let mut o_min = f64::INFINITY;
    let mut o_max = f64::NEG_INFINITY;
    let mut o_finite = true;
    for &x in &audit {
        let (o, d1, d2) = (
            spec.obstacle.value(x),
            spec.obstacle.deriv(x),
            spec.obstacle.second_deriv(x),
        );
        o_finite &= o.is_finite() && d1.is_finite() && d2.is_finite();
        o_min = o_min.min(o);
        o_max = o_max.max(o);
    }
    checks.push(AssumptionCheck {
        assumption: Assumption::Obstacle,
        passed: o_finite && o_min > 0.0,
        quantity: "o_min",
        measured: o_min,
        detail: format!("o in [{o_min:.6}, {o_max:.6}] on the audit mesh"),
    });

    // (U) on the reachable range [0, ||o||]
    let w_hi = o_max.max(0.0);
    let n_u = audit_n.max(16);
    let mut u_min = f64::INFINITY;
    let mut u_max_deriv = f64::NEG_INFINITY;
    for k in 0..=n_u {
        let w = w_hi * k as f64 / n_u as f64;
        u_min = u_min.min(spec.velocity.eval(w));
        u_max_deriv = u_max_deriv.max(spec.velocity.deriv(w));
    }
    checks.push(AssumptionCheck {
        assumption: Assumption::Velocity,
        passed: u_min > 0.0 && u_max_deriv <= 0.0 && u_min.is_finite(),
        quantity: "U_min",
        measured: u_min,
        detail: format!("on [0, {w_hi:.6}], max U' = {u_max_deriv:.3e}"),
    });

    // (K)
    let kernel_mass = spec.kernel.mass();
    let monotone = spec.kernel.is_nonincreasing();
    checks.push(AssumptionCheck {
        assumption: Assumption::Kernel,
        passed: monotone && (kernel_mass - 1.0).abs() <= KERNEL_MASS_TOL,
        quantity: "kernel mass",
        measured: kernel_mass,
        detail: if monotone {
            "nonnegative and nonincreasing".into()
        } else {
            "kernel is negative or increasing somewhere".into()
        },
    });

    // (I) and (D): on the grid samples and on the audit mesh
    let (tv_initial, q_min, grid_margin) = match spec.sample_initial(grid) {
        Ok(q0) => {
            let margin = q0
                .values()
                .iter()
                .zip(grid.centers())
                .map(|(q, x)| spec.obstacle.value(x) - q)
                .fold(f64::INFINITY, f64::min);
            (q0.total_variation(), q0.min(), margin)
        }
        Err(_) => (f64::NAN, f64::NAN, f64::NAN),
    };
    let audit_margin = audit
        .iter()
        .map(|&x| spec.obstacle.value(x) - spec.initial.eval(x))
        .fold(f64::INFINITY, f64::min);
    let audit_q_min = audit
        .iter()
        .map(|&x| spec.initial.eval(x))
        .fold(f64::INFINITY, f64::min);
    checks.push(AssumptionCheck {
        assumption: Assumption::Initial,
        passed: tv_initial.is_finite() && q_min >= 0.0 && audit_q_min >= 0.0,
        quantity: "TV(q0)",
        measured: tv_initial,
        detail: format!("min q0 = {:.3e}", q_min.min(audit_q_min)),
    });
    checks.push(AssumptionCheck {
        assumption: Assumption::Feasibility,
        passed: grid_margin > 0.0 && audit_margin > 0.0,
        quantity: "d_o",
        measured: grid_margin,
        detail: format!("audit-mesh margin {audit_margin:.6}"),
    });

    if let Some(p) = &spec.penalization {
        checks.push(AssumptionCheck {
            assumption: Assumption::Relaxation,
            passed: p.epsilon() > 0.0,
            quantity: "epsilon",
            measured: p.epsilon(),
            detail: String::new(),
        });
    }

    ValidationReport {
        checks,
        u_min,
        kernel_mass,
        o_min,
        o_max,
        tv_initial,
        feasibility_margin: grid_margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn window() -> Grid1D {
        Grid1D::new(-3.0, 4.0, 3500).unwrap()
    }

    #[test]
    fn penalization_closed_forms() {
        for eps in [2f64.powi(-10), 0.1, 3.0] {
            let p = Penalization::new(eps).unwrap();
            assert_eq!(p.value(0.0), 0.0);
            assert!((p.value(eps * 2f64.ln()) - 0.5).abs() < 1e-15);
        }
        let p = Penalization::new(1.0 / 16.0).unwrap();
        assert!((p.value(0.5) - (1.0 - (-8f64).exp())).abs() < 1e-15);
        assert!((p.value(0.5) - 0.999665).abs() < 1e-6);
        assert!(p.value(-0.1) < 0.0);
        assert!(Penalization::new(0.0).is_err());
        assert!(Penalization::new(-1.0).is_err());
    }

    #[test]
    fn velocity_presets() {
        let u1 = VelocitySpec::lwr();
        assert!((u1.eval(0.0) - 1.0).abs() < 1e-15);
        assert!(u1.eval(1.5).abs() < 1e-15);
        assert_eq!(u1.deriv(0.3), -2.0 / 3.0);
        let u2 = VelocitySpec::unit();
        assert_eq!(u2.eval(-4.0), 1.0);
        assert_eq!(u2.eval(17.0), 1.0);
        let poly = VelocitySpec::Polynomial(vec![1.0, -0.5, 0.25]);
        assert!((poly.eval(2.0) - 1.0).abs() < 1e-15);
        assert!((poly.deriv(2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn obstacle_preset_and_derivatives() {
        let o = ObstacleSpec::gauss_dip();
        assert!((o.value(1.0) - 0.2).abs() < 1e-15);
        let h = 1e-5;
        for x in [-2.0, -0.3, 0.9, 1.7, 3.2] {
            let fd1 = (o.value(x + h) - o.value(x - h)) / (2.0 * h);
            let fd2 = (o.value(x + h) - 2.0 * o.value(x) + o.value(x - h)) / (h * h);
            assert!((fd1 - o.deriv(x)).abs() < 1e-9);
            assert!((fd2 - o.second_deriv(x)).abs() < 1e-4);
        }
    }

    #[test]
    fn reference_preset_passes_with_expected_margin() {
        let g = window();
        let r = validate(&ModelSpec::reference_preset(2f64.powi(-10)).unwrap(), &g);
        assert!(r.passed(), "{r}");
        // o(-1) - 1 = 0.2 - exp(-4), attained at the jump
        let oracle = {
            let o = ObstacleSpec::gauss_dip();
            let mut m = f64::INFINITY;
            let mut x = -3.0;
            while x <= 4.0 {
                m = m.min(o.value(x) - InitialDatum::Q01.eval(x));
                x += 1e-5;
            }
            m
        };
        assert!((oracle - (0.2 - (-4f64).exp())).abs() < 1e-4);
        assert!((r.feasibility_margin - oracle).abs() < 2e-3);
        assert!((r.feasibility_margin - 0.18).abs() < 0.01);
        assert!((r.o_max - 1.2).abs() < 1e-6);
        assert!((r.o_min - 0.2).abs() < 1e-9);
        assert!((r.u_min - 0.2).abs() < 1e-6);
    }

    #[test]
    fn epsilon_does_not_affect_validation() {
        let g = Grid1D::new(-3.0, 4.0, 700).unwrap();
        for k in 6..=10 {
            let r = validate(&ModelSpec::reference_preset(2f64.powi(-k)).unwrap(), &g);
            assert!(r.passed());
        }
    }

    #[test]
    fn infeasible_datum_fails_margin() {
        let g = Grid1D::new(-3.0, 4.0, 700).unwrap();
        let spec = ModelSpec::reference_preset(0.01)
            .unwrap()
            .with_obstacle(ObstacleSpec::Constant(0.7))
            .with_initial(InitialDatum::Table {
                x: vec![-3.0, 4.0],
                q: vec![0.7, 0.7],
            });
        let r = validate(&spec, &g);
        let d = r.check(Assumption::Feasibility).unwrap();
        assert!(!d.passed);
        assert!(d.measured <= 0.0);
    }

    #[test]
    fn negative_velocity_fails() {
        let g = Grid1D::new(-3.0, 4.0, 700).unwrap();
        let spec = ModelSpec::reference_preset(0.01)
            .unwrap()
            .with_velocity(VelocitySpec::Constant(-1.0));
        let r = validate(&spec, &g);
        let u = r.check(Assumption::Velocity).unwrap();
        assert!(!u.passed);
        assert!(r.u_min <= 0.0);
    }

    #[test]
    fn increasing_table_kernel_fails() {
        let g = Grid1D::new(-3.0, 4.0, 700).unwrap();
        let spec = ModelSpec::reference_preset(0.01).unwrap().with_kernel(KernelSpec::Tabulated {
            spacing: 0.5,
            values: vec![0.5, 1.5],
            tail_mass: 0.0,
        });
        assert!(!validate(&spec, &g).check(Assumption::Kernel).unwrap().passed);
    }

    #[test]
    fn table_initial_datum_interpolates() {
        let d = InitialDatum::Table {
            x: vec![0.0, 1.0, 2.0],
            q: vec![0.0, 1.0, 0.0],
        };
        assert_eq!(d.eval(0.5), 0.5);
        assert_eq!(d.eval(1.0), 1.0);
        assert_eq!(d.eval(1.75), 0.25);
        assert_eq!(d.eval(-0.1), 0.0);
        assert_eq!(d.eval(2.5), 0.0);
    }

    proptest! {
        #[test]
        fn penalization_derivative_matches_central_difference(
            k in 0usize..5, s in -0.05f64..2.0
        ) {
            let eps = [2f64.powi(-10), 2f64.powi(-6), 0.1, 0.5, 2.0][k];
            let p = Penalization::new(eps).unwrap();
            let h = 1e-3 * eps;
            let fd = (p.value(s + h) - p.value(s - h)) / (2.0 * h);
            // third derivative of V is exp(-s/eps)/eps^3
            let bound = (-(s - h) / eps).exp() / eps.powi(3) * h * h + 1e-9 * p.deriv(s).max(1.0);
            prop_assert!((fd - p.deriv(s)).abs() <= bound);
            prop_assert!(p.deriv(s) >= 0.0);
            if s / eps < 30.0 {
                prop_assert!(p.deriv(s) > 0.0);
                prop_assert!(p.value(s + h) > p.value(s));
            }
        }
    }
}
