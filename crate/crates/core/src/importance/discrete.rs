//! The joint-importance objectives on finite tables, where expectations are
//! exact sums and the factors are free positive vectors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::theory::{DiscreteJoint, FactorPair};

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `p ln(1 + e^t) + q ln(1 + e^-t)` and its derivative in `t`.
fn pointwise(p: f64, q: f64, t: f64) -> (f64, f64) {
    (p * softplus(t) + q * softplus(-t), p * sigmoid(t) - q * sigmoid(-t))
}

fn check_pair(source: &DiscreteJoint, target: &DiscreteJoint) -> Result<()> {
    crate::theory::joint_importance(source, target).map(|_| ())
}

/// `sum p(x,y) ln(1 + u v) + sum q(x,y) ln(1 + 1/(u v))` over the source support.
pub fn table_l_sup(source: &DiscreteJoint, target: &DiscreteJoint, u: &[f64], v: &[f64]) -> f64 {
    let (a, b) = logs(u, v);
    sup_value_grad(source, target, &a, &b).0
}

/// As [`table_l_sup`] with `v(y)` replaced by `sum_y D_S(y|x) v(y)` and the
/// target mass aggregated over labels.
pub fn table_l_unsup(source: &DiscreteJoint, target: &DiscreteJoint, u: &[f64], v: &[f64]) -> f64 {
    let (a, b) = logs(u, v);
    unsup_value_grad(source, target, &a, &b).0
}

fn logs(u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (u.iter().map(|x| x.ln()).collect(), v.iter().map(|x| x.ln()).collect())
}

fn sup_value_grad(source: &DiscreteJoint, target: &DiscreteJoint, a: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    let (nx, ny) = (source.nx(), source.ny());
    let mut value = 0.0;
    let mut grad = vec![0.0; nx + ny];
    for (x, y) in source.support() {
        let (f, d) = pointwise(source.get(x, y), target.get(x, y), a[x] + b[y]);
        value += f;
        grad[x] += d;
        grad[nx + y] += d;
    }
    (value, grad)
}

fn unsup_value_grad(source: &DiscreteJoint, target: &DiscreteJoint, a: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    let (nx, ny) = (source.nx(), source.ny());
    let (px, qx) = (source.marginal_x(), target.marginal_x());
    let mut value = 0.0;
    let mut grad = vec![0.0; nx + ny];
    for x in 0..nx {
        let Some(cond) = source.conditional_y(x) else {
            continue;
        };
        let terms: Vec<f64> = (0..ny).map(|y| cond[y] * b[y].exp()).collect();
        let vt: f64 = terms.iter().sum();
        let (f, d) = pointwise(px[x], qx[x], a[x] + vt.ln());
        value += f;
        grad[x] += d;
        for y in 0..ny {
            grad[nx + y] += d * terms[y] / vt;
        }
    }
    (value, grad)
}

/// Quasi-Newton minimisation with an Armijo backtracking line search.
fn bfgs(f: impl Fn(&[f64]) -> (f64, Vec<f64>), x0: Vec<f64>, grad_tol: f64, max_iter: usize) -> Vec<f64> {
    let n = x0.len();
    let mut x = DVector::from_vec(x0);
    let (mut fx, g) = f(x.as_slice());
    let mut g = DVector::from_vec(g);
    let mut h = DMatrix::<f64>::identity(n, n);
    for _ in 0..max_iter {
        if g.amax() <= grad_tol {
            break;
        }
        let mut dir = -(&h * &g);
        if dir.dot(&g) >= 0.0 {
            h = DMatrix::identity(n, n);
            dir = -g.clone();
        }
        let slope = dir.dot(&g);
        let mut step = 1.0;
        let (x_new, f_new, g_new) = loop {
            let cand = &x + &dir * step;
            let (fc, gc) = f(cand.as_slice());
            if fc <= fx + 1e-4 * step * slope || step < 1e-16 {
                break (cand, fc, DVector::from_vec(gc));
            }
            step *= 0.5;
        };
        let s = &x_new - &x;
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            h += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    x.as_slice().to_vec()
}

const GRAD_TOL: f64 = 1e-12;
const MAX_ITER: usize = 2000;

fn split(x: &[f64], nx: usize) -> FactorPair {
    FactorPair {
        u: x[..nx].iter().map(|a| a.exp()).collect(),
        v: x[nx..].iter().map(|b| b.exp()).collect(),
    }
}

/// Minimiser of [`table_l_sup`] from `u = v = 1`, in the log domain.
pub fn minimize_table_l_sup(source: &DiscreteJoint, target: &DiscreteJoint) -> Result<FactorPair> {
    check_pair(source, target)?;
    let nx = source.nx();
    let x = bfgs(
        |p| sup_value_grad(source, target, &p[..nx], &p[nx..]),
        vec![0.0; nx + source.ny()],
        GRAD_TOL,
        MAX_ITER,
    );
    Ok(split(&x, nx))
}

/// Minimiser of [`table_l_unsup`] starting from `u = 1` and the given `v`.
pub fn minimize_table_l_unsup(source: &DiscreteJoint, target: &DiscreteJoint, v_init: &[f64]) -> Result<FactorPair> {
    check_pair(source, target)?;
    if v_init.len() != source.ny() || v_init.iter().any(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::Config("initial label factor must be positive with one entry per label".into()));
    }
    let nx = source.nx();
    let mut x0 = vec![0.0; nx];
    x0.extend(v_init.iter().map(|v| v.ln()));
    let x = bfgs(
        |p| unsup_value_grad(source, target, &p[..nx], &p[nx..]),
        x0,
        GRAD_TOL,
        MAX_ITER,
    );
    Ok(split(&x, nx))
}

/// `sum_y D_S(x, y) u(x) v(y)` for each x.
pub fn implied_target_marginal(source: &DiscreteJoint, factors: &FactorPair) -> Vec<f64> {
    (0..source.nx())
        .map(|x| (0..source.ny()).map(|y| source.get(x, y) * factors.product(x, y)).sum())
        .collect()
}
