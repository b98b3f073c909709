use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [−1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureOptions {
    /// Gauss–Legendre points per dimension and cell.
    pub order: usize,
    pub max_depth: u32,
    /// Accept a cell when its estimate and the sum over its 2^m children differ by less
    /// than tol times the cell's share of the box volume.
    pub tol: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { order: 10, max_depth: 12, tol: 1e-8 }
    }
}

impl QuadratureOptions {
    pub fn with_tol(tol: f64) -> Self {
        QuadratureOptions { tol, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub cells: usize,
}

struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    fn cell<F: Fn(&[f64]) -> f64>(&self, f: &F, lo: &[f64], hi: &[f64]) -> f64 {
        let m = lo.len();
        let p = self.nodes.len();
        let half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
        let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b + a)).collect();
        let jac: f64 = half.iter().product();
        let total = p.pow(m as u32);
        let mut x = vec![0.0; m];
        let mut acc = 0.0;
        for idx in 0..total {
            let mut w = 1.0;
            let mut r = idx;
            for d in 0..m {
                let k = r % p;
                r /= p;
                x[d] = mid[d] + half[d] * self.nodes[k];
                w *= self.weights[k];
            }
            acc += w * f(&x);
        }
        acc * jac
    }
}

fn children(lo: &[f64], hi: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let m = lo.len();
    (0..1usize << m)
        .map(|mask| {
            let mut a = lo.to_vec();
            let mut b = hi.to_vec();
            for d in 0..m {
                let mid = 0.5 * (lo[d] + hi[d]);
                if mask >> d & 1 == 1 {
                    a[d] = mid;
                } else {
                    b[d] = mid;
                }
            }
            (a, b)
        })
        .collect()
}

struct Ctx<'a, F> {
    f: &'a F,
    rule: Rule,
    opts: &'a QuadratureOptions,
    volume: f64,
}

fn refine<F: Fn(&[f64]) -> f64 + Sync>(ctx: &Ctx<F>, lo: &[f64], hi: &[f64], coarse: f64, depth: u32) -> Result<QuadResult> {
    let kids = children(lo, hi);
    let estimates: Vec<f64> = if depth < 3 {
        kids.par_iter().map(|(a, b)| ctx.rule.cell(ctx.f, a, b)).collect()
    } else {
        kids.iter().map(|(a, b)| ctx.rule.cell(ctx.f, a, b)).collect()
    };
    let fine: f64 = estimates.iter().sum();
    let change = (fine - coarse).abs();
    let share: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product::<f64>() / ctx.volume;
    if !fine.is_finite() {
        return Err(Error::QuadratureNoConvergence { depth, change: f64::NAN });
    }
    if change <= ctx.opts.tol * share.max(f64::MIN_POSITIVE) || change <= 1e-15 * fine.abs() {
        return Ok(QuadResult { value: fine, error: change, cells: kids.len() });
    }
    if depth >= ctx.opts.max_depth {
        return Err(Error::QuadratureNoConvergence { depth, change });
    }
    let sub: Vec<Result<QuadResult>> = if depth < 3 {
        kids.par_iter().zip(estimates.par_iter()).map(|((a, b), e)| refine(ctx, a, b, *e, depth + 1)).collect()
    } else {
        kids.iter().zip(&estimates).map(|((a, b), e)| refine(ctx, a, b, *e, depth + 1)).collect()
    };
    let mut out = QuadResult { value: 0.0, error: 0.0, cells: 0 };
    for r in sub {
        let r = r?;
        out.value += r.value;
        out.error += r.error;
        out.cells += r.cells;
    }
    Ok(out)
}

/// Adaptive tensor-product Gauss–Legendre over a box. Cells are refined dyadically
/// until each agrees with its children; children are summed in a fixed order so the
/// result does not depend on the thread count.
pub fn integrate<F: Fn(&[f64]) -> f64 + Sync>(f: &F, lower: &[f64], upper: &[f64], opts: &QuadratureOptions) -> Result<QuadResult> {
    if lower.len() != upper.len() {
        return Err(Error::ShapeMismatch("quadrature box bounds differ in length".into()));
    }
    if lower.is_empty() {
        return Ok(QuadResult { value: f(&[]), error: 0.0, cells: 1 });
    }
    if lower.iter().zip(upper).any(|(a, b)| !(b > a)) {
        return Err(Error::ShapeMismatch("quadrature box is degenerate".into()));
    }
    let (nodes, weights) = gauss_legendre(opts.order);
    let ctx = Ctx { f, rule: Rule { nodes, weights }, opts, volume: lower.iter().zip(upper).map(|(a, b)| b - a).product() };
    let coarse = ctx.rule.cell(f, lower, upper);
    refine(&ctx, lower, upper, coarse, 1)
}
