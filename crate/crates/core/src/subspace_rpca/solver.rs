//! Outlier pursuit: `min ||H||_* + lambda ||E||_{2,1}` with `Y = H + E`.
//!
//! Two schemes share the same proximal maps (singular-value soft thresholding
//! for `H`, column-wise l2 shrinkage for `E`):
//!
//! * [`Scheme::ProximalGradient`] minimises the penalised form
//!   `mu (||H||_* + lambda ||E||_{2,1}) + 1/2 ||Y - H - E||_F^2` with monotone
//!   FISTA steps while `mu` is driven geometrically down to a small floor. The
//!   tracked objective at the current `mu` never increases.
//! * [`Scheme::Admm`] runs the exact-fit augmented Lagrangian with a multiplier
//!   update and residual-balanced penalty.
//!
//! Both work on `Y / ||Y||_F` and rescale the result, so thresholds do not
//! depend on the absolute channel gain.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{is_finite, singular_values, sorted_svd, CMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ProximalGradient,
    Admm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub scheme: Scheme,
    pub max_iter: usize,
    pub tol: f64,
    /// Initial ADMM penalty.
    pub rho: f64,
    /// Geometric decay of the continuation weight per iteration.
    pub mu_decay: f64,
    /// Final continuation weight relative to the spectral norm of `Y`.
    pub mu_floor: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            scheme: Scheme::ProximalGradient,
            max_iter: 500,
            tol: 1e-6,
            rho: 1.0,
            mu_decay: 0.9,
            mu_floor: 1e-6,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || !(self.tol > 0.0) || !(self.rho > 0.0) {
            return Err(invalid("solver needs max_iter >= 1, tol > 0 and rho > 0"));
        }
        if !(self.mu_decay > 0.0 && self.mu_decay < 1.0) || !(self.mu_floor > 0.0 && self.mu_floor < 1.0) {
            return Err(invalid("mu_decay and mu_floor must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RpcaResult {
    pub h: CMatrix,
    pub e: CMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// `||Y - H - E||_F`.
    pub residual: f64,
    /// Objective per iteration on the normalised problem.
    pub objective: Vec<f64>,
    pub input_norm: f64,
}

impl RpcaResult {
    /// Columns of `E` whose norm exceeds `rel_tol * ||Y||_F`.
    pub fn outlier_columns(&self, rel_tol: f64) -> Vec<usize> {
        column_norms(&self.e)
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > rel_tol * self.input_norm)
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn column_norms(m: &CMatrix) -> Vec<f64> {
    m.column_iter().map(|c| c.norm()).collect()
}

pub fn l21_norm(m: &CMatrix) -> f64 {
    column_norms(m).iter().sum()
}

pub fn nuclear_norm(m: &CMatrix) -> f64 {
    singular_values(m).iter().sum()
}

/// `U max(S - tau, 0) V^H`, returned with its nuclear norm.
pub fn singular_value_threshold(m: &CMatrix, tau: f64) -> (CMatrix, f64) {
    let svd = sorted_svd(m);
    let kept: Vec<(usize, f64)> = svd
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, &s)| (i, s - tau))
        .filter(|&(_, s)| s > 0.0)
        .collect();
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for &(i, s) in &kept {
        let u = svd.u.column(i) * Complex64::new(s, 0.0);
        out += u * svd.v_t.row(i);
    }
    (out, kept.iter().map(|&(_, s)| s).sum())
}

/// Scales each column `c` by `max(1 - tau / ||c||, 0)`; returns the l2,1 norm.
pub fn column_shrink(m: &CMatrix, tau: f64) -> (CMatrix, f64) {
    let mut out = m.clone();
    let mut l21 = 0.0;
    for mut col in out.column_iter_mut() {
        let norm = col.norm();
        if norm <= tau {
            col.fill(Complex64::new(0.0, 0.0));
        } else {
            col *= Complex64::new(1.0 - tau / norm, 0.0);
            l21 += norm - tau;
        }
    }
    (out, l21)
}

pub fn outlier_pursuit(y: &CMatrix, lambda: f64, params: &SolverParams) -> Result<RpcaResult> {
    if !(lambda > 0.0) {
        return Err(invalid("lambda must be positive"));
    }
    if !is_finite(y) {
        return Err(Error::NonFinite);
    }
    params.validate()?;
    let scale = y.norm();
    if scale == 0.0 {
        let zero = CMatrix::zeros(y.nrows(), y.ncols());
        return Ok(RpcaResult {
            h: zero.clone(),
            e: zero,
            iterations: 0,
            converged: true,
            residual: 0.0,
            objective: Vec::new(),
            input_norm: 0.0,
        });
    }
    let yn = y / Complex64::new(scale, 0.0);
    let mut out = match params.scheme {
        Scheme::ProximalGradient => proximal_gradient(&yn, lambda, params),
        Scheme::Admm => admm(&yn, lambda, params),
    };
    out.h *= Complex64::new(scale, 0.0);
    out.e *= Complex64::new(scale, 0.0);
    out.residual = (y - &out.h - &out.e).norm();
    out.input_norm = scale;
    Ok(out)
}

struct Iterate {
    h: CMatrix,
    e: CMatrix,
    nuclear: f64,
    l21: f64,
}

impl Iterate {
    fn penalised(&self, y: &CMatrix, lambda: f64, mu: f64) -> f64 {
        let r = y - &self.h - &self.e;
        mu * (self.nuclear + lambda * self.l21) + 0.5 * r.norm_squared()
    }
}

fn proximal_gradient(y: &CMatrix, lambda: f64, params: &SolverParams) -> RpcaResult {
    // gradient of 1/2 ||Y - H - E||^2 in (H, E) is 2-Lipschitz
    const STEP: f64 = 0.5;
    let (rows, cols) = y.shape();
    let spectral = singular_values(y)[0];
    let mut mu = 0.99 * spectral;
    let mu_min = params.mu_floor * spectral;

    let mut x = Iterate { h: CMatrix::zeros(rows, cols), e: CMatrix::zeros(rows, cols), nuclear: 0.0, l21: 0.0 };
    let mut x_prev_h = x.h.clone();
    let mut x_prev_e = x.e.clone();
    let mut yh = x.h.clone();
    let mut ye = x.e.clone();
    let mut t = 1.0f64;
    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..params.max_iter {
        iterations += 1;
        let g = (y - &yh - &ye) * Complex64::new(STEP, 0.0);
        let (zh, z_nuc) = singular_value_threshold(&(&yh + &g), mu * STEP);
        let (ze, z_l21) = column_shrink(&(&ye + &g), lambda * mu * STEP);
        let step_norm = ((&zh - &yh).norm_squared() + (&ze - &ye).norm_squared()).sqrt();
        let z = Iterate { h: zh, e: ze, nuclear: z_nuc, l21: z_l21 };

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let keep_z = z.penalised(y, lambda, mu) <= x.penalised(y, lambda, mu);
        x_prev_h.copy_from(&x.h);
        x_prev_e.copy_from(&x.e);
        if keep_z {
            x.h.copy_from(&z.h);
            x.e.copy_from(&z.e);
            x.nuclear = z.nuclear;
            x.l21 = z.l21;
        }
        objective.push(x.penalised(y, lambda, mu));

        let a = Complex64::new(t / t_next, 0.0);
        let b = Complex64::new((t - 1.0) / t_next, 0.0);
        yh = &x.h + (&z.h - &x.h) * a + (&x.h - &x_prev_h) * b;
        ye = &x.e + (&z.e - &x.e) * a + (&x.e - &x_prev_e) * b;
        t = t_next;

        if mu <= mu_min && step_norm < params.tol {
            converged = true;
            break;
        }
        mu = (mu * params.mu_decay).max(mu_min);
    }

    RpcaResult { h: x.h, e: x.e, iterations, converged, residual: 0.0, objective, input_norm: 1.0 }
}

fn admm(y: &CMatrix, lambda: f64, params: &SolverParams) -> RpcaResult {
    let (rows, cols) = y.shape();
    let mut h = CMatrix::zeros(rows, cols);
    let mut e = CMatrix::zeros(rows, cols);
    let mut dual = CMatrix::zeros(rows, cols);
    let mut rho = params.rho;
    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..params.max_iter {
        iterations += 1;
        let inv = Complex64::new(1.0 / rho, 0.0);
        let (h_new, nuc) = singular_value_threshold(&(y - &e + &dual * inv), 1.0 / rho);
        let (e_new, l21) = column_shrink(&(y - &h_new + &dual * inv), lambda / rho);
        let r = y - &h_new - &e_new;
        dual += &r * Complex64::new(rho, 0.0);

        let primal = r.norm();
        let change = (&h_new - &h).norm().max((&e_new - &e).norm());
        let dual_res = rho * (&e_new - &e).norm();
        h = h_new;
        e = e_new;
        objective.push(nuc + lambda * l21);

        if primal < params.tol && change < params.tol {
            converged = true;
            break;
        }
        if primal > 10.0 * dual_res {
            rho *= 2.0;
        } else if dual_res > 10.0 * primal {
            rho /= 2.0;
        }
    }

    RpcaResult { h, e, iterations, converged, residual: 0.0, objective, input_norm: 1.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_normal, stream};

    fn random(r: usize, c: usize, seed: u64) -> CMatrix {
        let mut rng = stream(seed, "solver-test", &[]);
        CMatrix::from_fn(r, c, |_, _| complex_normal(&mut rng))
    }

    #[test]
    fn svt_matches_definition() {
        let m = random(5, 7, 1);
        let sv = sorted_svd(&m).singular_values;
        let tau = sv[2];
        let (out, nuc) = singular_value_threshold(&m, tau);
        let out_sv = sorted_svd(&out).singular_values;
        for i in 0..2 {
            assert!((out_sv[i] - (sv[i] - tau)).abs() < 1e-10);
        }
        assert!(out_sv[2..].iter().all(|&s| s < 1e-10));
        assert!((nuc - (sv[0] + sv[1] - 2.0 * tau)).abs() < 1e-10);
    }

    #[test]
    fn column_shrink_zeroes_small_columns() {
        let m = CMatrix::from_fn(2, 2, |r, c| Complex64::new(if c == 0 { 0.1 } else { 3.0 * (r + 1) as f64 }, 0.0));
        let (out, l21) = column_shrink(&m, 1.0);
        assert_eq!(out.column(0).norm(), 0.0);
        let n1 = m.column(1).norm();
        assert!((out.column(1).norm() - (n1 - 1.0)).abs() < 1e-12);
        assert!((l21 - (n1 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let mut y = random(3, 3, 2);
        assert!(outlier_pursuit(&y, 0.0, &SolverParams::default()).is_err());
        y[(1, 1)] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(outlier_pursuit(&y, 0.25, &SolverParams::default()), Err(Error::NonFinite)));
    }

    #[test]
    fn zero_input_is_trivial() {
        let r = outlier_pursuit(&CMatrix::zeros(4, 6), 0.25, &SolverParams::default()).unwrap();
        assert!(r.converged && r.h.norm() == 0.0 && r.e.norm() == 0.0);
    }

    #[test]
    fn max_iter_exhaustion_is_reported() {
        let y = random(8, 20, 3);
        let params = SolverParams { max_iter: 3, ..Default::default() };
        let r = outlier_pursuit(&y, 0.25, &params).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
        assert!(r.residual.is_finite());
    }

    #[test]
    fn proximal_gradient_objective_never_increases() {
        let y = random(8, 30, 4);
        let r = outlier_pursuit(&y, 0.25, &SolverParams::default()).unwrap();
        assert!(r.objective.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn huge_lambda_sends_everything_to_h() {
        let y = random(6, 12, 5);
        let r = outlier_pursuit(&y, 1e6, &SolverParams::default()).unwrap();
        assert_eq!(r.e.norm(), 0.0);
        assert!((&r.h - &y).norm() / y.norm() < 1e-4);
    }

    #[test]
    fn result_is_scale_equivariant() {
        let y = random(6, 16, 6);
        let params = SolverParams::default();
        let a = outlier_pursuit(&y, 0.3, &params).unwrap();
        let b = outlier_pursuit(&(&y * Complex64::new(1e-5, 0.0)), 0.3, &params).unwrap();
        assert!((&a.h * Complex64::new(1e-5, 0.0) - &b.h).norm() < 1e-12);
    }
}
