//! Discrete downstream average `W[q](x) = ∫_x^∞ gamma(y - x) q(y) dy`.
//!
//! `q` is treated as piecewise constant on cells and the kernel enters through
//! its exact cell masses, so `W_i = Σ_k gamma_k q_{i+k}` plus the tail.

use crate::error::{Error, Result};
use crate::grid::{Grid1D, ScalarField};
use crate::model::KernelSpec;

/// Default bound on the kernel mass dropped by the cutoff.
pub const DEFAULT_MASS_TOL: f64 = 1e-12;

/// How `q` continues past the right edge of the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extension {
    /// Repeat the last cell value (matches the Neumann closure).
    #[default]
    Constant,
    Zero,
}

impl Extension {
    pub fn value(&self, q: &[f64]) -> f64 {
        match self {
            Extension::Constant => q.last().copied().unwrap_or(0.0),
            Extension::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights {
    /// `gamma_k = ∫_{k dx}^{(k+1) dx} gamma`.
    pub gamma: Vec<f64>,
    /// `∫_{K dx}^∞ gamma`.
    pub tail_mass: f64,
    /// Ratio `gamma_{k+1} / gamma_k` when the kernel is exponential.
    decay: Option<f64>,
    grid: Grid1D,
}

impl KernelWeights {
    pub fn cutoff(&self) -> usize {
        self.gamma.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.gamma.iter().sum::<f64>() + self.tail_mass
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn is_exponential(&self) -> bool {
        self.decay.is_some()
    }
}

pub fn build_weights(kernel: &KernelSpec, grid: &Grid1D, mass_tol: f64) -> Result<KernelWeights> {
    if !(mass_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mass tolerance must be positive, got {mass_tol}"
        )));
    }
    let dx = grid.dx();
    let limit = 10 * grid.n_cells();
    match kernel {
        KernelSpec::Exponential { rate } => {
            if !(*rate > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "exponential kernel rate must be positive, got {rate}"
                )));
            }
            let needed = (-mass_tol.ln() / (rate * dx)).ceil().max(1.0) as usize;
            if needed > limit {
                return Err(Error::KernelCutoff { needed, limit });
            }
            let ratio = (-rate * dx).exp();
            let first = -(-rate * dx).exp_m1();
            let gamma: Vec<f64> = (0..needed)
                .map(|k| (-rate * dx * k as f64).exp() * first)
                .collect();
            let tail_mass = (-rate * dx * needed as f64).exp();
            Ok(KernelWeights {
                gamma,
                tail_mass,
                decay: Some(ratio),
                grid: *grid,
            })
        }
        KernelSpec::Tabulated { .. } => {
            let total = kernel.mass();
            let mut gamma = Vec::new();
            let mut accumulated = 0.0;
            loop {
                let k = gamma.len();
                let mass = integrate_table(kernel, k as f64 * dx, (k + 1) as f64 * dx);
                accumulated += mass;
                gamma.push(mass);
                let remaining = (total - accumulated).max(0.0);
                let exhausted = table_end(kernel) <= (k + 1) as f64 * dx;
                if remaining <= mass_tol || exhausted {
                    if gamma.len() > limit {
                        return Err(Error::KernelCutoff {
                            needed: gamma.len(),
                            limit,
                        });
                    }
                    return Ok(KernelWeights {
                        gamma,
                        tail_mass: remaining,
                        decay: None,
                        grid: *grid,
                    });
                }
                if gamma.len() > limit {
                    return Err(Error::KernelCutoff {
                        needed: gamma.len() + 1,
                        limit,
                    });
                }
            }
        }
    }
}

fn table_end(kernel: &KernelSpec) -> f64 {
    match kernel {
        KernelSpec::Tabulated { spacing, values, .. } => spacing * (values.len() - 1) as f64,
        KernelSpec::Exponential { .. } => f64::INFINITY,
    }
}

/// Exact integral of the piecewise-linear table over `[a, b]`.
fn integrate_table(kernel: &KernelSpec, a: f64, b: f64) -> f64 {
    let KernelSpec::Tabulated { spacing, values, .. } = kernel else {
        unreachable!("only tabulated kernels are integrated piecewise")
    };
    let end = table_end(kernel);
    let b = b.min(end);
    if b <= a {
        return 0.0;
    }
    let mut total = 0.0;
    let mut lo = a;
    while lo < b {
        let mut k = (lo / spacing).floor() as usize;
        if (k + 1) as f64 * spacing <= lo {
            k += 1;
        }
        let k = k.min(values.len() - 2);
        let hi = ((k + 1) as f64 * spacing).min(b).max(lo.next_up());
        total += 0.5 * (kernel.eval(lo) + kernel.eval(hi)) * (hi - lo);
        lo = hi;
    }
    total
}

/// Evaluates `W` at cell centers using the fastest available path.
pub fn eval_nonlocal(q: &ScalarField, weights: &KernelWeights, extension: Extension) -> ScalarField {
    let mut out = vec![0.0; q.len()];
    eval_nonlocal_into(q.values(), weights, extension, &mut out);
    ScalarField::from_finite(*q.grid(), out)
}

/// Slice form of [`eval_nonlocal`] writing into `out`.
pub fn eval_nonlocal_into(q: &[f64], weights: &KernelWeights, extension: Extension, out: &mut [f64]) {
    match weights.decay {
        Some(ratio) => recurrence(q, weights.gamma[0], ratio, extension.value(q), out),
        None => direct_sum_into(q, weights, extension, out),
    }
}

/// `W_i = ratio · W_{i+1} + gamma_0 · q_i`, seeded with the extension value.
/// Unrolled by four so the serial dependency is one multiply-add per block.
fn recurrence(q: &[f64], gamma0: f64, ratio: f64, ext: f64, out: &mut [f64]) {
    let (r1, r2) = (ratio, ratio * ratio);
    let (r3, r4) = (r2 * ratio, r2 * r2);
    let mut w = ext;
    let mut blocks = q.rchunks_exact(4).zip(out.rchunks_exact_mut(4));
    for (qc, wc) in &mut blocks {
        let p3 = gamma0 * qc[3];
        let p2 = gamma0 * qc[2] + r1 * p3;
        let p1 = gamma0 * qc[1] + r1 * p2;
        let p0 = gamma0 * qc[0] + r1 * p1;
        wc[3] = r1 * w + p3;
        wc[2] = r2 * w + p2;
        wc[1] = r3 * w + p1;
        wc[0] = r4 * w + p0;
        w = wc[0];
    }
    let head = q.len() % 4;
    for (qi, wi) in q[..head].iter().zip(out[..head].iter_mut()).rev() {
        w = ratio * w + gamma0 * qi;
        *wi = w;
    }
}

/// Direct `O(N K)` evaluation of the truncated convolution.
pub fn eval_nonlocal_direct(q: &ScalarField, weights: &KernelWeights, extension: Extension) -> ScalarField {
    let mut out = vec![0.0; q.len()];
    direct_sum_into(q.values(), weights, extension, &mut out);
    ScalarField::from_finite(*q.grid(), out)
}

fn direct_sum_into(q: &[f64], weights: &KernelWeights, extension: Extension, out: &mut [f64]) {
    let n = q.len();
    let ext = extension.value(q);
    let gamma = &weights.gamma;
    // suffix sums of gamma for the part of the stencil beyond the window
    let mut beyond = vec![0.0; gamma.len() + 1];
    for k in (0..gamma.len()).rev() {
        beyond[k] = beyond[k + 1] + gamma[k];
    }
    for (i, wi) in out.iter_mut().enumerate() {
        let inside = gamma.len().min(n - i);
        let mut acc: f64 = gamma[..inside]
            .iter()
            .zip(&q[i..i + inside])
            .map(|(g, v)| g * v)
            .sum();
        acc += ext * (beyond[inside] + weights.tail_mass);
        *wi = acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample_function, SampleMode};
    use proptest::prelude::*;

    fn grid() -> Grid1D {
        Grid1D::new(-3.0, 4.0, 700).unwrap()
    }

    fn rel_dev(a: &ScalarField, b: &ScalarField) -> f64 {
        a.linf_distance(b).unwrap() / b.norm_linf().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn exponential_weights_close_the_mass() {
        let g = Grid1D::new(-3.0, 4.0, 3500).unwrap();
        let w = build_weights(&KernelSpec::exponential(), &g, DEFAULT_MASS_TOL).unwrap();
        assert!(w.cutoff() as f64 * g.dx() >= 27.0);
        assert!(w.tail_mass <= 1e-12);
        assert!((w.total_mass() - 1.0).abs() <= 1e-12);
        assert!(w.gamma.windows(2).all(|p| p[1] <= p[0]));
        let k = 17;
        let exact = (-(k as f64) * g.dx()).exp() - (-((k + 1) as f64) * g.dx()).exp();
        assert!((w.gamma[k] - exact).abs() < 1e-15);
    }

    #[test]
    fn slowly_decaying_kernel_is_rejected() {
        let g = Grid1D::new(0.0, 1.0, 8).unwrap();
        let err = build_weights(&KernelSpec::Exponential { rate: 0.01 }, &g, 1e-12).unwrap_err();
        assert!(matches!(err, Error::KernelCutoff { .. }));
    }

    #[test]
    fn tabulated_exponential_matches_analytic_masses() {
        let h = 1e-4;
        let values: Vec<f64> = (0..=300_000).map(|k| (-(k as f64) * h).exp()).collect();
        let tail = (-(300_000.0 * h)).exp();
        let kernel = KernelSpec::Tabulated {
            spacing: h,
            values,
            tail_mass: tail,
        };
        assert!((kernel.mass() - 1.0).abs() < 1e-8);
        let g = grid();
        let w = build_weights(&kernel, &g, 1e-9).unwrap();
        for (k, gk) in w.gamma.iter().enumerate() {
            let exact = (-(k as f64) * g.dx()).exp() - (-((k + 1) as f64) * g.dx()).exp();
            assert!((gk - exact).abs() < 1e-8, "k = {k}");
        }
        assert!((w.total_mass() - kernel.mass()).abs() < 1e-12);
    }

    #[test]
    fn zero_and_constant_states() {
        let g = grid();
        let w = build_weights(&KernelSpec::exponential(), &g, DEFAULT_MASS_TOL).unwrap();
        let z = eval_nonlocal(&ScalarField::zeros(g), &w, Extension::Constant);
        assert_eq!(z.norm_linf(), 0.0);
        let c = eval_nonlocal(&ScalarField::constant(g, 0.7), &w, Extension::Constant);
        assert!(c.values().iter().all(|v| (v - 0.7).abs() < 1e-13));
        let cd = eval_nonlocal_direct(&ScalarField::constant(g, 0.7), &w, Extension::Constant);
        assert!(cd.values().iter().all(|v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn indicator_matches_closed_form() {
        let g = Grid1D::new(-3.0, 4.0, 3500).unwrap();
        let q = sample_function(&g, |x| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }, SampleMode::Midpoint)
            .unwrap();
        let w = build_weights(&KernelSpec::exponential(), &g, DEFAULT_MASS_TOL).unwrap();
        let field = eval_nonlocal(&q, &w, Extension::Constant);
        // oracle: fine midpoint quadrature of ∫ e^{-(y-x)} χ_[0,1](y) dy
        let oracle = |x: f64| {
            let h = 1e-6;
            let lo = x.max(0.0);
            if lo >= 1.0 {
                return 0.0;
            }
            let n = ((1.0 - lo) / h).ceil() as usize;
            let step = (1.0 - lo) / n as f64;
            (0..n).map(|k| (-(lo + (k as f64 + 0.5) * step - x)).exp()).sum::<f64>() * step
        };
        assert!((oracle(0.0) - (1.0 - (-1f64).exp())).abs() < 1e-10);
        assert!((oracle(-1.0) - (-1f64).exp() * (1.0 - (-1f64).exp())).abs() < 1e-10);
        for x in [0.0, -1.0] {
            let i = g.locate(x);
            let interp = {
                // linear interpolation between the two centers around x
                let j = if g.center(i as isize) > x { i - 1 } else { i };
                let t = (x - g.center(j as isize)) / g.dx();
                field.values()[j] * (1.0 - t) + field.values()[j + 1] * t
            };
            assert!((interp - oracle(x)).abs() <= 2.0 * g.dx(), "x = {x}");
        }
        let worst = g
            .centers()
            .zip(field.values())
            .map(|(x, v)| (v - oracle(x)).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 2.0 * g.dx(), "worst {worst}");
    }

    #[test]
    fn zero_extension_drops_the_tail() {
        let g = grid();
        let w = build_weights(&KernelSpec::exponential(), &g, DEFAULT_MASS_TOL).unwrap();
        let c = ScalarField::constant(g, 1.0);
        let fast = eval_nonlocal(&c, &w, Extension::Zero);
        let direct = eval_nonlocal_direct(&c, &w, Extension::Zero);
        assert!(rel_dev(&fast, &direct) <= 1e-12);
        let last = fast.values()[g.n_cells() - 1];
        assert!((last - w.gamma[0]).abs() < 1e-15);
    }

    fn random_field(values: Vec<f64>) -> ScalarField {
        ScalarField::from_values(grid(), values).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn fast_path_agrees_with_direct_sum(
            values in proptest::collection::vec(0.0f64..1.2, 700),
            zero_ext in any::<bool>(),
        ) {
            let g = grid();
            let w = build_weights(&KernelSpec::exponential(), &g, DEFAULT_MASS_TOL).unwrap();
            let ext = if zero_ext { Extension::Zero } else { Extension::Constant };
            let q = random_field(values);
            let fast = eval_nonlocal(&q, &w, ext);
            let direct = eval_nonlocal_direct(&q, &w, ext);
            prop_assert!(rel_dev(&fast, &direct) <= 1e-12);
            prop_assert!(fast.min() >= 0.0 && fast.max() <= q.max() * (1.0 + 1e-14));
        }

        #[test]
        fn linear_monotone_and_one_sided(
            a in proptest::collection::vec(0.0f64..1.0, 700),
            b in proptest::collection::vec(0.0f64..1.0, 700),
            alpha in -2.0f64..2.0,
            beta in -2.0f64..2.0,
            cut in 1usize..699,
        ) {
            let g = grid();
            let w = build_weights(&KernelSpec::exponential(), &g, DEFAULT_MASS_TOL).unwrap();
            let fa = random_field(a.clone());
            let fb = random_field(b.clone());
            let combo = fa.zip_map(&fb, |x, y| alpha * x + beta * y).unwrap();
            let wa = eval_nonlocal(&fa, &w, Extension::Constant);
            let wb = eval_nonlocal(&fb, &w, Extension::Constant);
            let wc = eval_nonlocal(&combo, &w, Extension::Constant);
            for i in 0..700 {
                let lin = alpha * wa.values()[i] + beta * wb.values()[i];
                prop_assert!((wc.values()[i] - lin).abs() <= 1e-12);
            }
            // b + a >= b pointwise
            let sum = fa.zip_map(&fb, |x, y| x + y).unwrap();
            let ws = eval_nonlocal(&sum, &w, Extension::Constant);
            prop_assert!(ws.values().iter().zip(wb.values()).all(|(s, t)| *s >= *t));
            // modifying cells left of `cut` leaves W on [cut, n) untouched
            let mut modified = a;
            for v in modified.iter_mut().take(cut) {
                *v = 1.0 - *v;
            }
            let wm = eval_nonlocal(&random_field(modified), &w, Extension::Constant);
            prop_assert_eq!(&wm.values()[cut..], &wa.values()[cut..]);
        }
    }
}
