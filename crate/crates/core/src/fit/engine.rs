//! Damped Gauss-Newton (Levenberg-Marquardt) least squares.
//!
//! Free parameters are optimized in an internal coordinate system: linear
//! parameters as-is, positive parameters through their logarithm. Bounds
//! are enforced by projection in internal coordinates. The Jacobian is
//! taken by central differences.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const COST_TOLERANCE: f64 = 1e-10;
/// Reciprocal condition number below which the normal matrix is singular.
pub const SINGULAR_RCOND: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    Linear,
    /// Optimized as ln(p); p stays strictly positive.
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
    pub transform: Transform,
    pub fixed: bool,
    /// Typical magnitude of a linear parameter, sizing its finite-difference
    /// step when the initial value is near zero.
    #[serde(default)]
    pub typical: Option<f64>,
}

impl ParamSpec {
    /// Unbounded linear parameter.
    pub fn free(name: &str, initial: f64) -> Self {
        Self {
            name: name.into(),
            initial,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            transform: Transform::Linear,
            fixed: false,
            typical: None,
        }
    }

    /// Strictly positive parameter, fitted in log space.
    pub fn positive(name: &str, initial: f64) -> Self {
        Self {
            lower: 0.0,
            transform: Transform::Log,
            ..Self::free(name, initial)
        }
    }

    pub fn fixed(name: &str, value: f64) -> Self {
        Self {
            fixed: true,
            ..Self::free(name, value)
        }
    }

    pub fn typical(mut self, magnitude: f64) -> Self {
        self.typical = Some(magnitude.abs());
        self
    }

    pub fn bounded(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    fn validate(&self) -> Result<()> {
        if !self.initial.is_finite() {
            return Err(Error::input(format!(
                "initial value of `{}` is not finite",
                self.name
            )));
        }
        if self.lower > self.upper || self.initial < self.lower || self.initial > self.upper {
            return Err(Error::input(format!(
                "initial value {} of `{}` outside bounds [{}, {}]",
                self.initial, self.name, self.lower, self.upper
            )));
        }
        if self.transform == Transform::Log && !(self.initial > 0.0) {
            return Err(Error::input(format!(
                "log-transformed `{}` needs a positive initial value",
                self.name
            )));
        }
        Ok(())
    }

    fn to_internal(&self, p: f64) -> f64 {
        match self.transform {
            Transform::Linear => p,
            Transform::Log => p.ln(),
        }
    }

    fn to_external(&self, t: f64) -> f64 {
        match self.transform {
            Transform::Linear => t,
            Transform::Log => t.exp(),
        }
    }

    /// dp/dθ
    fn jacobian(&self, t: f64) -> f64 {
        match self.transform {
            Transform::Linear => 1.0,
            Transform::Log => t.exp(),
        }
    }

    fn internal_bounds(&self) -> (f64, f64) {
        match self.transform {
            Transform::Linear => (self.lower, self.upper),
            Transform::Log => (
                if self.lower > 0.0 {
                    self.lower.ln()
                } else {
                    f64::NEG_INFINITY
                },
                self.upper.ln(),
            ),
        }
    }
}

/// Model identifier plus its parameter table, fixed and free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: String,
    pub params: Vec<ParamSpec>,
}

impl ModelSpec {
    pub fn new(model: &str) -> Self {
        Self {
            model: model.into(),
            params: vec![],
        }
    }

    pub fn param(mut self, p: ParamSpec) -> Self {
        self.params.push(p);
        self
    }

    pub fn free_count(&self) -> usize {
        self.params.iter().filter(|p| !p.fixed).count()
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.params {
            p.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub names: Vec<String>,
    pub params: Vec<f64>,
    /// 1σ uncertainties; zero for fixed parameters.
    pub sigma: Vec<f64>,
    /// Covariance of the free parameters (external units), row-major.
    pub covariance: Vec<Vec<f64>>,
    /// Condition number of the covariance in internal coordinates.
    pub covariance_condition: f64,
    pub r_squared: f64,
    /// `y - model(x)`, unweighted.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub initial_cost: f64,
    pub cost: f64,
    /// Quantities computed from the parameters, as (name, value, sigma).
    pub derived: Vec<(String, f64, f64)>,
    /// Reasons for a non-converged flag.
    pub diagnostics: Vec<String>,
    /// Non-fatal findings, e.g. near-degenerate parameters.
    pub warnings: Vec<String>,
}

impl FitResult {
    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.index(name)
            .map(|i| self.params[i])
            .or_else(|| self.derived.iter().find(|d| d.0 == name).map(|d| d.1))
    }

    pub fn sigma_of(&self, name: &str) -> Option<f64> {
        self.index(name)
            .map(|i| self.sigma[i])
            .or_else(|| self.derived.iter().find(|d| d.0 == name).map(|d| d.2))
    }

    pub fn value(&self, name: &str) -> f64 {
        self.get(name)
            .unwrap_or_else(|| panic!("fit result has no parameter `{name}`"))
    }

    pub(crate) fn fail(&mut self, reason: impl Into<String>) {
        self.converged = false;
        self.diagnostics.push(reason.into());
    }
}

struct Problem<'a, F> {
    spec: &'a ModelSpec,
    free: Vec<usize>,
    model: &'a F,
    x: &'a [f64],
    y: &'a [f64],
    sqrt_w: Vec<f64>,
}

impl<F: Fn(f64, &[f64]) -> f64> Problem<'_, F> {
    fn external(&self, theta: &DVector<f64>) -> Vec<f64> {
        let mut p: Vec<f64> = self.spec.params.iter().map(|p| p.initial).collect();
        for (k, &i) in self.free.iter().enumerate() {
            p[i] = self.spec.params[i].to_external(theta[k]);
        }
        p
    }

    fn residuals(&self, theta: &DVector<f64>) -> DVector<f64> {
        let p = self.external(theta);
        DVector::from_iterator(
            self.x.len(),
            self.x
                .iter()
                .zip(self.y)
                .zip(&self.sqrt_w)
                .map(|((&x, &y), &w)| w * (y - (self.model)(x, &p))),
        )
    }

    fn cost(&self, theta: &DVector<f64>) -> f64 {
        let r = self.residuals(theta);
        let c = r.norm_squared();
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    }

    /// Jacobian of the weighted model values, ∂(√w·f)/∂θ.
    fn jacobian(&self, theta: &DVector<f64>, scale: &[f64]) -> DMatrix<f64> {
        let m = self.x.len();
        let n = theta.len();
        let mut j = DMatrix::zeros(m, n);
        for k in 0..n {
            let h = 1e-6 * theta[k].abs().max(scale[k]);
            let mut tp = theta.clone();
            tp[k] += h;
            let mut tm = theta.clone();
            tm[k] -= h;
            // residual = √w(y - f) so ∂f = -(r+ - r-)
            let rp = self.residuals(&tp);
            let rm = self.residuals(&tm);
            for i in 0..m {
                j[(i, k)] = -(rp[i] - rm[i]) / (2.0 * h);
            }
        }
        j
    }

    fn clamp(&self, theta: &mut DVector<f64>) {
        for (k, &i) in self.free.iter().enumerate() {
            let (lo, hi) = self.spec.params[i].internal_bounds();
            theta[k] = theta[k].clamp(lo, hi);
        }
    }
}

/// Minimizes `Σ w_i (y_i - model(x_i, p))²`.
///
/// `model` receives the full parameter vector in the order of
/// `spec.params`, fixed ones included. `weights` are inverse variances.
pub fn nlls_fit<F>(
    spec: &ModelSpec,
    model: &F,
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
) -> Result<FitResult>
where
    F: Fn(f64, &[f64]) -> f64,
{
    spec.validate()?;
    if x.len() != y.len() {
        return Err(Error::input(format!(
            "x and y lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != x.len() {
            return Err(Error::input("weights length differs from data length"));
        }
        if w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::input("weights must be finite and non-negative"));
        }
    }
    let n_free = spec.free_count();
    if x.len() < n_free {
        return Err(Error::input(format!(
            "{} data points cannot determine {n_free} free parameters",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::input("data must be finite"));
    }

    let free: Vec<usize> = (0..spec.params.len())
        .filter(|&i| !spec.params[i].fixed)
        .collect();
    let sqrt_w: Vec<f64> = match weights {
        Some(w) => w.iter().map(|v| v.sqrt()).collect(),
        None => vec![1.0; x.len()],
    };
    let prob = Problem {
        spec,
        free: free.clone(),
        model,
        x,
        y,
        sqrt_w,
    };
    let y_scale = y
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let scale: Vec<f64> = free
        .iter()
        .map(|&i| {
            let p = &spec.params[i];
            match p.transform {
                Transform::Log => 1.0,
                Transform::Linear => match p.typical {
                    Some(t) if t > 0.0 => p.initial.abs().max(t),
                    _ => p.initial.abs().max(1e-3 * y_scale),
                },
            }
        })
        .collect();

    let mut theta = DVector::from_iterator(
        free.len(),
        free.iter()
            .map(|&i| spec.params[i].to_internal(spec.params[i].initial)),
    );
    let initial_cost = prob.cost(&theta);
    if !initial_cost.is_finite() {
        return Err(Error::input(
            "model is not finite at the initial parameters",
        ));
    }
    let mut cost = initial_cost;
    let data_norm: f64 = y
        .iter()
        .zip(&prob.sqrt_w)
        .map(|(y, w)| (w * y).powi(2))
        .sum();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = n_free == 0;
    let mut diagnostics = vec![];

    while !converged && iterations < MAX_ITERATIONS {
        iterations += 1;
        if cost <= 1e-28 * data_norm {
            converged = true;
            break;
        }
        let j = prob.jacobian(&theta, &scale);
        let r = prob.residuals(&theta);
        let a = j.transpose() * &j;
        let g = j.transpose() * r;
        let diag: Vec<f64> = (0..n_free).map(|k| a[(k, k)].max(1e-300)).collect();

        let mut accepted = false;
        while lambda < 1e20 {
            let mut damped = a.clone();
            for k in 0..n_free {
                damped[(k, k)] += lambda * diag[k];
            }
            let step = damped
                .clone()
                .cholesky()
                .map(|c| c.solve(&g))
                .or_else(|| damped.lu().solve(&g));
            if let Some(step) = step {
                let mut trial = &theta + step;
                prob.clamp(&mut trial);
                let trial_cost = prob.cost(&trial);
                if trial_cost < cost {
                    let rel = (cost - trial_cost) / cost;
                    theta = trial;
                    cost = trial_cost;
                    let near_gauss_newton = lambda <= 1.0;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if rel < COST_TOLERANCE && near_gauss_newton {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no direction reduces the cost: local minimum to machine precision
            converged = true;
        }
    }
    if !converged {
        diagnostics.push(format!("no convergence after {MAX_ITERATIONS} iterations"));
    }

    // Statistics at the optimum.
    let p_ext = prob.external(&theta);
    let residuals: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| yi - model(xi, &p_ext))
        .collect();
    let dof = x.len().saturating_sub(n_free);
    let variance = if dof > 0 { cost / dof as f64 } else { 0.0 };

    let mut sigma = vec![0.0; spec.params.len()];
    let mut covariance = vec![vec![0.0; n_free]; n_free];
    let mut covariance_condition = 1.0;
    let mut warnings = vec![];
    if dof == 0 && n_free > 0 {
        warnings.push("zero degrees of freedom; uncertainties are undefined".into());
    }
    if n_free > 0 {
        let j = prob.jacobian(&theta, &scale);
        let a = j.transpose() * &j;
        let d: Vec<f64> = (0..n_free).map(|k| a[(k, k)]).collect();
        if d.iter().any(|&v| !(v > 0.0)) {
            let names: Vec<&str> = free
                .iter()
                .zip(&d)
                .filter(|(_, &v)| !(v > 0.0))
                .map(|(&i, _)| spec.params[i].name.as_str())
                .collect();
            diagnostics.push(format!(
                "singular Jacobian: model insensitive to {}",
                names.join(", ")
            ));
            converged = false;
        } else {
            // equilibrate before inverting
            let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
            let scaled = DMatrix::from_fn(n_free, n_free, |r, c| a[(r, c)] * s[r] * s[c]);
            let eig = SymmetricEigen::new(scaled.clone());
            let max_ev = eig.eigenvalues.max();
            let min_ev = eig.eigenvalues.min();
            if !(min_ev > SINGULAR_RCOND * max_ev) {
                diagnostics.push(format!(
                    "singular Jacobian at optimum (reciprocal condition {:e})",
                    min_ev / max_ev
                ));
                converged = false;
            } else {
                let inv_scaled = eig.eigenvectors.clone()
                    * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v))
                    * eig.eigenvectors.transpose();
                let cov_int =
                    DMatrix::from_fn(n_free, n_free, |r, c| inv_scaled[(r, c)] * s[r] * s[c])
                        * variance;
                let cov_eig = SymmetricEigen::new(cov_int.clone()).eigenvalues;
                let (lo, hi) = (cov_eig.min(), cov_eig.max());
                covariance_condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
                let dp: Vec<f64> = free
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| spec.params[i].jacobian(theta[k]))
                    .collect();
                for r in 0..n_free {
                    for c in 0..n_free {
                        let v = cov_int[(r, c)] * dp[r] * dp[c];
                        covariance[r][c] = if r == c { v.max(0.0) } else { v };
                    }
                    sigma[free[r]] = covariance[r][r].sqrt();
                }
                // exact symmetry
                #[allow(clippy::needless_range_loop)]
                for r in 0..n_free {
                    for c in 0..r {
                        let v = 0.5 * (covariance[r][c] + covariance[c][r]);
                        covariance[r][c] = v;
                        covariance[c][r] = v;
                    }
                }
            }
        }
        for (k, &i) in free.iter().enumerate() {
            let (lo, hi) = spec.params[i].internal_bounds();
            let tol = 1e-9 * theta[k].abs().max(1.0);
            if (theta[k] - lo).abs() <= tol || (hi - theta[k]).abs() <= tol {
                diagnostics.push(format!(
                    "parameter `{}` ended at its bound ({})",
                    spec.params[i].name, p_ext[i]
                ));
                converged = false;
            }
        }
    }

    let w_sum: f64 = prob.sqrt_w.iter().map(|w| w * w).sum();
    let y_mean = if w_sum > 0.0 {
        y.iter()
            .zip(&prob.sqrt_w)
            .map(|(y, w)| w * w * y)
            .sum::<f64>()
            / w_sum
    } else {
        0.0
    };
    let sst: f64 = y
        .iter()
        .zip(&prob.sqrt_w)
        .map(|(y, w)| (w * (y - y_mean)).powi(2))
        .sum();
    let r_squared = if sst > 0.0 {
        1.0 - cost / sst
    } else if cost == 0.0 {
        1.0
    } else {
        0.0
    };

    Ok(FitResult {
        model: spec.model.clone(),
        names: spec.params.iter().map(|p| p.name.clone()).collect(),
        params: p_ext,
        sigma,
        covariance,
        covariance_condition,
        r_squared,
        residuals,
        converged,
        iterations,
        initial_cost,
        cost,
        derived: vec![],
        diagnostics,
        warnings,
    })
}
