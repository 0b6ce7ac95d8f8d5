//! Per-step observables: mass, variation, obstacle clearance, one-sided
//! slopes, and the flux on the coincidence set.

use serde::Serialize;

use crate::flux::FluxModel;
use crate::grid::ScalarField;
use crate::model::{Locality, ModelSpec};

pub const DEFAULT_COINCIDENCE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub time: f64,
    pub mass: f64,
    pub tv: f64,
    /// `min_i (o_i - q_i)`.
    pub min_clearance: f64,
    /// `min_i (q_{i+1} - q_i) / dx`.
    pub osl_lower_q: f64,
    /// `max_i (v_{i+1} - v_i) / dx` with `v = V(o - q)`.
    pub osl_upper_v: f64,
    pub min_q: f64,
}

impl DiagnosticsRow {
    pub const COLUMNS: [&'static str; 7] = [
        "time",
        "mass",
        "tv",
        "min_clearance",
        "osl_lower_q",
        "osl_upper_v",
        "min_q",
    ];

    pub fn as_array(&self) -> [f64; 7] {
        [
            self.time,
            self.mass,
            self.tv,
            self.min_clearance,
            self.osl_lower_q,
            self.osl_upper_v,
            self.min_q,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Column-oriented time series of [`DiagnosticsRow`]s.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DiagnosticsSeries {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub tv: Vec<f64>,
    pub min_clearance: Vec<f64>,
    pub osl_lower_q: Vec<f64>,
    pub osl_upper_v: Vec<f64>,
    pub min_q: Vec<f64>,
}

impl DiagnosticsSeries {
    pub fn push(&mut self, row: DiagnosticsRow) {
        self.times.push(row.time);
        self.mass.push(row.mass);
        self.tv.push(row.tv);
        self.min_clearance.push(row.min_clearance);
        self.osl_lower_q.push(row.osl_lower_q);
        self.osl_upper_v.push(row.osl_upper_v);
        self.min_q.push(row.min_q);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, i: usize) -> DiagnosticsRow {
        DiagnosticsRow {
            time: self.times[i],
            mass: self.mass[i],
            tv: self.tv[i],
            min_clearance: self.min_clearance[i],
            osl_lower_q: self.osl_lower_q[i],
            osl_upper_v: self.osl_upper_v[i],
            min_q: self.min_q[i],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = DiagnosticsRow> + '_ {
        (0..self.len()).map(|i| self.row(i))
    }

    pub fn last(&self) -> Option<DiagnosticsRow> {
        self.len().checked_sub(1).map(|i| self.row(i))
    }

    /// Rows with `lo <= time <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> impl Iterator<Item = DiagnosticsRow> + '_ {
        self.rows().filter(move |r| r.time >= lo && r.time <= hi)
    }
}

/// Diagnostics of one state; `obstacle` holds `o` at the cell centers.
pub fn record(state: &ScalarField, obstacle: &ScalarField, model: &ModelSpec, time: f64) -> DiagnosticsRow {
    let v: Vec<f64> = state
        .values()
        .iter()
        .zip(obstacle.values())
        .map(|(q, o)| model.relaxation(o - q))
        .collect();
    summarize(state, obstacle, &v, time)
}

/// [`record`] with the relaxation `V(o - q)` per cell supplied by the caller.
pub(crate) fn summarize(state: &ScalarField, obstacle: &ScalarField, v: &[f64], time: f64) -> DiagnosticsRow {
    let q = state.values();
    let n = q.len();
    let (o, v) = (&obstacle.values()[..n], &v[..n]);
    let mut acc = RowAccumulator::start(q[0], o[0], v[0]);
    for i in 1..n {
        acc.push(q[i], o[i], v[i]);
    }
    acc.finish(time, state.grid().dx())
}

/// Running form of [`summarize`] fed one cell at a time, left to right.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RowAccumulator {
    prev_q: f64,
    prev_v: f64,
    sum: f64,
    tv: f64,
    min_clearance: f64,
    min_q: f64,
    min_dq: f64,
    max_dv: f64,
}

impl RowAccumulator {
    #[inline]
    pub fn start(q: f64, o: f64, v: f64) -> Self {
        Self {
            prev_q: q,
            prev_v: v,
            sum: q,
            tv: 0.0,
            min_clearance: o - q,
            min_q: q,
            min_dq: f64::INFINITY,
            max_dv: f64::NEG_INFINITY,
        }
    }

    #[inline(always)]
    pub fn push(&mut self, q: f64, o: f64, v: f64) {
        let c = o - q;
        if c < self.min_clearance {
            self.min_clearance = c;
        }
        if q < self.min_q {
            self.min_q = q;
        }
        let dq = q - self.prev_q;
        self.tv += dq.abs();
        if dq < self.min_dq {
            self.min_dq = dq;
        }
        let dv = v - self.prev_v;
        if dv > self.max_dv {
            self.max_dv = dv;
        }
        self.sum += q;
        self.prev_q = q;
        self.prev_v = v;
    }

    pub fn finish(self, time: f64, dx: f64) -> DiagnosticsRow {
        DiagnosticsRow {
            time,
            mass: self.sum * dx,
            tv: self.tv,
            min_clearance: self.min_clearance,
            osl_lower_q: self.min_dq / dx,
            osl_upper_v: self.max_dv / dx,
            min_q: self.min_q,
        }
    }
}

/// One maximal run of cells with `o - q <= tol`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoincidenceInterval {
    /// First and last cell index (inclusive).
    pub start: usize,
    pub end: usize,
    pub x_start: f64,
    pub x_end: f64,
    /// `V(o - q) q U(W)` per cell of the interval.
    pub flux: Vec<f64>,
    /// `o(b) U(W(b))` at the right end cell `b`.
    pub c_ref: f64,
    pub rel_spread: f64,
}

impl CoincidenceInterval {
    pub fn min_flux(&self) -> f64 {
        self.flux.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_flux(&self) -> f64 {
        self.flux.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean_flux(&self) -> f64 {
        self.flux.iter().sum::<f64>() / self.flux.len() as f64
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoincidenceReport {
    pub tol: f64,
    pub intervals: Vec<CoincidenceInterval>,
}

impl CoincidenceReport {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Widest interval.
    pub fn widest(&self) -> Option<&CoincidenceInterval> {
        self.intervals.iter().max_by_key(|i| i.len())
    }
}

pub fn coincidence(
    state: &ScalarField,
    obstacle: &ScalarField,
    nonlocal: &ScalarField,
    flux: &FluxModel,
    tol: f64,
) -> CoincidenceReport {
    let q = state.values();
    let o = obstacle.values();
    let w = nonlocal.values();
    let grid = state.grid();
    let n = q.len();
    let mut intervals = Vec::new();
    let mut i = 0;
    while i < n {
        if o[i] - q[i] > tol {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && o[i] - q[i] <= tol {
            i += 1;
        }
        let end = i - 1;
        let values: Vec<f64> = (start..=end).map(|k| flux.cell_flux(q[k], o[k], w[k])).collect();
        let u_b = match flux.locality() {
            Locality::Nonlocal => flux.velocity(w[end]),
            Locality::Local => flux.velocity(q[end]),
        };
        let c_ref = o[end] * u_b;
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        intervals.push(CoincidenceInterval {
            start,
            end,
            x_start: grid.center(start as isize),
            x_end: grid.center(end as isize),
            flux: values,
            c_ref,
            rel_spread: (hi - lo) / c_ref.abs().max(1e-14),
        });
    }
    CoincidenceReport { tol, intervals }
}
