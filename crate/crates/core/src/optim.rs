//! Nelder-Mead simplex search with dimension-adaptive coefficients.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::exec::Executor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub max_evaluations: usize,
    /// Stop once every vertex lies within this distance of the best one.
    pub diameter_tol: f64,
    /// Stop after this many evaluations without an improvement of at least
    /// `stall_improvement`.
    pub stall_evaluations: usize,
    pub stall_improvement: f64,
    /// Stop as soon as the objective drops to this value.
    pub target: Option<f64>,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_evaluations: 5000,
            diameter_tol: 1e-6,
            stall_evaluations: 200,
            stall_improvement: 1e-6,
            target: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    TargetReached,
    SimplexCollapsed,
    NoImprovement,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub termination: Termination,
    /// `(evaluation, best value so far)` at every improvement.
    pub history: Vec<(usize, f64)>,
}

/// Reflection, expansion, contraction and shrink coefficients for
/// dimension `n`.
pub fn adaptive_coefficients(n: usize) -> (f64, f64, f64, f64) {
    let n = n.max(2) as f64;
    (1.0, 1.0 + 2.0 / n, 0.75 - 0.5 / n, 1.0 - 1.0 / n)
}

struct Tracker {
    evaluations: usize,
    best: f64,
    history: Vec<(usize, f64)>,
}

impl Tracker {
    fn record(&mut self, value: f64) {
        self.evaluations += 1;
        if value < self.best {
            self.best = value;
            self.history.push((self.evaluations, value));
        }
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() { f64::INFINITY } else { v }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn affine(c: &[f64], x: &[f64], k: f64) -> Vec<f64> {
    c.iter().zip(x).map(|(ci, xi)| ci + k * (xi - ci)).collect()
}

/// Minimizes `f` starting from the given simplex of `n + 1` points.
/// Independent evaluations (initial vertices, shrink steps) go through
/// `exec`; results are identical for any executor.
pub fn nelder_mead<F, E>(
    f: F,
    simplex: Vec<Vec<f64>>,
    opts: &NelderMeadOptions,
    exec: &E,
) -> NelderMeadResult
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
    E: Executor,
{
    let n = simplex.len() - 1;
    assert!(n >= 1 && simplex.iter().all(|v| v.len() == n), "simplex must have n + 1 points of dimension n");
    let (alpha, beta, gamma, delta) = adaptive_coefficients(n);

    let mut tracker = Tracker {
        evaluations: 0,
        best: f64::INFINITY,
        history: Vec::new(),
    };
    let mut since_improvement = 0usize;
    let mut reference = f64::INFINITY;
    let mut observe = |tracker: &mut Tracker, v: f64| {
        tracker.record(v);
        if v.is_finite() && (reference.is_infinite() || v <= reference - opts.stall_improvement) {
            reference = v;
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        since_improvement
    };

    let values = exec.map_indexed(simplex.len(), |i| sanitize(f(&simplex[i])));
    let mut stall = 0;
    for &v in &values {
        stall = observe(&mut tracker, v);
    }
    let mut verts: Vec<(Vec<f64>, f64)> = simplex.into_iter().zip(values).collect();

    let termination = loop {
        verts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = verts[0].1;
        if opts.target.is_some_and(|t| best <= t) {
            break Termination::TargetReached;
        }
        if verts.iter().skip(1).all(|v| distance(&v.0, &verts[0].0) < opts.diameter_tol) {
            break Termination::SimplexCollapsed;
        }
        if stall >= opts.stall_evaluations {
            break Termination::NoImprovement;
        }
        if tracker.evaluations >= opts.max_evaluations {
            break Termination::BudgetExhausted;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &verts[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let (worst, f_worst) = (verts[n].0.clone(), verts[n].1);
        let f_second = verts[n - 1].1;

        let xr = affine(&centroid, &worst, -alpha);
        let fr = sanitize(f(&xr));
        stall = observe(&mut tracker, fr);

        if fr < best {
            let xe = affine(&centroid, &xr, beta);
            let fe = sanitize(f(&xe));
            stall = observe(&mut tracker, fe);
            verts[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second {
            verts[n] = (xr, fr);
            continue;
        }
        let (xc, fc, accept) = if fr < f_worst {
            let xc = affine(&centroid, &xr, gamma);
            let fc = sanitize(f(&xc));
            (xc, fc, fc <= fr)
        } else {
            let xc = affine(&centroid, &worst, gamma);
            let fc = sanitize(f(&xc));
            (xc, fc, fc < f_worst)
        };
        stall = observe(&mut tracker, fc);
        if accept {
            verts[n] = (xc, fc);
            continue;
        }

        let anchor = verts[0].0.clone();
        let shrunk: Vec<Vec<f64>> = verts[1..].iter().map(|(x, _)| affine(&anchor, x, delta)).collect();
        let values = exec.map_indexed(shrunk.len(), |i| sanitize(f(&shrunk[i])));
        for (i, (x, v)) in shrunk.into_iter().zip(values).enumerate() {
            stall = observe(&mut tracker, v);
            verts[i + 1] = (x, v);
        }
    };

    verts.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = verts.swap_remove(0);
    NelderMeadResult { x, value, evaluations: tracker.evaluations, termination, history: tracker.history }
}
