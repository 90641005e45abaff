//! Gaussian-process regression with four stationary kernels.
//!
//! Zero-mean prior on normalized targets; posterior mean via a Cholesky
//! solve of the noisy kernel matrix. Hyperparameters are either taken
//! from configuration or tuned by maximizing the log marginal likelihood
//! with a deterministic multi-start Nelder-Mead search in log space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Jitter ladder tried when the noisy kernel matrix fails to factorize.
/// Absolute additions to the diagonal, escalating tenfold.
const JITTER_LADDER: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];
const MAX_JITTER: f64 = 1e-6;

/// Nelder-Mead settings: fixed iteration budget, initial simplex edge in
/// log units, and the conventional reflect/expand/contract/shrink factors.
const NM_MAX_ITER: usize = 200;
const NM_STEP: f64 = 0.5;

/// Length-scale multipliers for the fixed multi-start grid, applied to
/// sqrt(input_dim) (the natural distance scale of z-scored features).
const LENGTH_STARTS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GprKernel {
    SquaredExponential,
    Matern52,
    Exponential,
    RationalQuadratic,
}

impl GprKernel {
    pub fn as_str(&self) -> &'static str {
        match self {
            GprKernel::SquaredExponential => "se",
            GprKernel::Matern52 => "matern52",
            GprKernel::Exponential => "exp",
            GprKernel::RationalQuadratic => "rq",
        }
    }

    /// Number of tunable log-parameters: (σf, ℓ, σn) plus α for RQ.
    fn n_log_params(&self) -> usize {
        match self {
            GprKernel::RationalQuadratic => 4,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GprHyper {
    pub sigma_f: f64,
    pub length: f64,
    pub sigma_n: f64,
    /// RQ shape; ignored by the other kernels.
    pub alpha: f64,
}

impl Default for GprHyper {
    fn default() -> Self {
        GprHyper {
            sigma_f: 1.0,
            length: 1.0,
            sigma_n: 0.1,
            alpha: 1.0,
        }
    }
}

impl GprHyper {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidInput {
                    what: "gpr hyperparameters".into(),
                    why: format!("{name} must be positive and finite, got {v}"),
                })
            }
        };
        positive("sigma_f", self.sigma_f)?;
        positive("length", self.length)?;
        positive("sigma_n", self.sigma_n)?;
        positive("alpha", self.alpha)
    }

    fn to_log(self, kernel: GprKernel) -> Vec<f64> {
        let mut theta = vec![self.sigma_f.ln(), self.length.ln(), self.sigma_n.ln()];
        if kernel.n_log_params() == 4 {
            theta.push(self.alpha.ln());
        }
        theta
    }

    fn from_log(kernel: GprKernel, theta: &[f64]) -> GprHyper {
        GprHyper {
            sigma_f: theta[0].exp(),
            length: theta[1].exp(),
            sigma_n: theta[2].exp(),
            alpha: if kernel.n_log_params() == 4 {
                theta[3].exp()
            } else {
                1.0
            },
        }
    }
}

/// Kernel value as a function of Euclidean distance; σf² at d = 0.
pub fn kernel_value(kernel: GprKernel, hyper: &GprHyper, d: f64) -> f64 {
    let sf2 = hyper.sigma_f * hyper.sigma_f;
    let l = hyper.length;
    match kernel {
        GprKernel::SquaredExponential => sf2 * (-0.5 * (d / l) * (d / l)).exp(),
        GprKernel::Matern52 => {
            let s = 5.0_f64.sqrt() * d / l;
            sf2 * (1.0 + s + s * s / 3.0) * (-s).exp()
        }
        GprKernel::Exponential => sf2 * (-d / l).exp(),
        GprKernel::RationalQuadratic => {
            sf2 * (1.0 + d * d / (2.0 * hyper.alpha * l * l)).powf(-hyper.alpha)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GprModel {
    pub kernel: GprKernel,
    pub hyper: GprHyper,
    /// Training inputs, one row per sample.
    pub x_train: DMatrix<f64>,
    /// Solved coefficients (K + σn²I)⁻¹ y.
    pub coeffs: DVector<f64>,
    /// Diagonal jitter the factorization needed (0 when clean).
    pub jitter_used: f64,
    pub log_marginal_likelihood: f64,
}

impl GprModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.x_train.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.x_train.ncols(),
                got: x.len(),
            });
        }
        let mut mean = 0.0;
        for i in 0..self.x_train.nrows() {
            let d = row_distance(&self.x_train, i, x);
            mean += kernel_value(self.kernel, &self.hyper, d) * self.coeffs[i];
        }
        Ok(mean)
    }
}

fn row_distance(x: &DMatrix<f64>, i: usize, point: &[f64]) -> f64 {
    (0..x.ncols())
        .map(|c| {
            let d = x[(i, c)] - point[c];
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn distance_matrix(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let dist = (0..x.ncols())
                .map(|c| {
                    let diff = x[(i, c)] - x[(j, c)];
                    diff * diff
                })
                .sum::<f64>()
                .sqrt();
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }
    d
}

fn kernel_matrix(dists: &DMatrix<f64>, kernel: GprKernel, hyper: &GprHyper) -> DMatrix<f64> {
    dists.map(|d| kernel_value(kernel, hyper, d))
}

/// Factorize K + σn²I, escalating diagonal jitter on failure.
fn factorize(
    dists: &DMatrix<f64>,
    kernel: GprKernel,
    hyper: &GprHyper,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = dists.nrows();
    let mut base = kernel_matrix(dists, kernel, hyper);
    let sn2 = hyper.sigma_n * hyper.sigma_n;
    for i in 0..n {
        base[(i, i)] += sn2;
    }
    for &jitter in &JITTER_LADDER {
        let mut k = base.clone();
        for i in 0..n {
            k[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(k) {
            return Ok((chol, jitter));
        }
    }
    Err(Error::Conditioning {
        max_jitter: MAX_JITTER,
    })
}

fn lml_from_parts(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>, coeffs: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let log_det_half: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum();
    -0.5 * y.dot(coeffs) - log_det_half - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

/// Log marginal likelihood and its gradient in (log σf, log ℓ, log σn)
/// for the squared-exponential kernel. Kept public as the reference
/// implementation that finite differences are checked against.
pub fn se_log_marginal_gradient(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    hyper: &GprHyper,
) -> Result<(f64, [f64; 3])> {
    hyper.validate()?;
    if y.len() != x.nrows() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: y.len(),
        });
    }
    let dists = distance_matrix(x);
    let kf = kernel_matrix(&dists, GprKernel::SquaredExponential, hyper);
    let (chol, _) = factorize(&dists, GprKernel::SquaredExponential, hyper)?;
    let coeffs = chol.solve(y);
    let lml = lml_from_parts(&chol, y, &coeffs);

    // dL/dθ = ½ tr((ααᵀ − K⁻¹) ∂K/∂θ); all matrices here are symmetric.
    let w = &coeffs * coeffs.transpose() - chol.inverse();
    let n = x.nrows();
    let l2 = hyper.length * hyper.length;
    let sn2 = hyper.sigma_n * hyper.sigma_n;
    let mut grad = [0.0f64; 3];
    for i in 0..n {
        for j in 0..n {
            let wij = w[(i, j)];
            grad[0] += wij * 2.0 * kf[(i, j)];
            grad[1] += wij * kf[(i, j)] * dists[(i, j)] * dists[(i, j)] / l2;
        }
        grad[2] += w[(i, i)] * 2.0 * sn2;
    }
    for g in &mut grad {
        *g *= 0.5;
    }
    Ok((lml, grad))
}

/// Negative log marginal likelihood of exp(theta); +inf when the
/// hyperparameters are unusable or the kernel matrix cannot be factorized.
fn objective(dists: &DMatrix<f64>, y: &DVector<f64>, kernel: GprKernel, theta: &[f64]) -> f64 {
    let hyper = GprHyper::from_log(kernel, theta);
    if hyper.validate().is_err() {
        return f64::INFINITY;
    }
    match factorize(dists, kernel, &hyper) {
        Ok((chol, _)) => {
            let coeffs = chol.solve(y);
            let lml = lml_from_parts(&chol, y, &coeffs);
            if lml.is_finite() {
                -lml
            } else {
                f64::INFINITY
            }
        }
        Err(_) => f64::INFINITY,
    }
}

/// Deterministic Nelder-Mead minimizer: conventional coefficients
/// (reflect 1, expand 2, contract 0.5, shrink 0.5), stable ordering,
/// strict-improvement comparisons.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let d = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..d {
        let mut v = x0.to_vec();
        v[i] += step;
        let fv = f(&v);
        simplex.push((v, fv));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("objective is never NaN"));
        let f_best = simplex[0].1;
        let f_second_worst = simplex[d - 1].1;
        let f_worst = simplex[d].1;
        if !f_best.is_finite() {
            break; // the whole simplex sits in infeasible territory
        }
        if f_worst - f_best <= 1e-9 * (1.0 + f_best.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|c| simplex[..d].iter().map(|(v, _)| v[c]).sum::<f64>() / d as f64)
            .collect();
        let shifted = |scale: f64| -> Vec<f64> {
            (0..d)
                .map(|c| centroid[c] + scale * (centroid[c] - simplex[d].0[c]))
                .collect()
        };
        let xr = shifted(1.0);
        let fr = f(&xr);
        if fr < f_best {
            let xe = shifted(2.0);
            let fe = f(&xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second_worst {
            simplex[d] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < f_worst {
            let xc = shifted(0.5); // outside contraction
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = shifted(-0.5); // inside contraction
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < f_worst.min(fr) {
            simplex[d] = (xc, fc);
            continue;
        }
        for i in 1..=d {
            let v: Vec<f64> = (0..d)
                .map(|c| simplex[0].0[c] + 0.5 * (simplex[i].0[c] - simplex[0].0[c]))
                .collect();
            let fv = f(&v);
            simplex[i] = (v, fv);
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("objective is never NaN"));
    let (v, fv) = simplex.swap_remove(0);
    (v, fv)
}

/// Multi-start hyperparameter search. Starts differ only in length-scale
/// (multiples of sqrt(input_dim)); first strictly best final value wins.
/// Falls back to `fallback` when every start ends infeasible.
fn optimize_hyper(
    dists: &DMatrix<f64>,
    y: &DVector<f64>,
    kernel: GprKernel,
    input_dim: usize,
    fallback: &GprHyper,
) -> GprHyper {
    let scale = (input_dim as f64).sqrt();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mult in LENGTH_STARTS {
        let start = GprHyper {
            sigma_f: 1.0,
            length: mult * scale,
            sigma_n: 0.1,
            alpha: 1.0,
        };
        let theta0 = start.to_log(kernel);
        let (theta, fval) = nelder_mead(
            |t| objective(dists, y, kernel, t),
            &theta0,
            NM_STEP,
            NM_MAX_ITER,
        );
        if best.as_ref().is_none_or(|(_, b)| fval < *b) {
            best = Some((theta, fval));
        }
    }
    match best {
        Some((theta, fval)) if fval.is_finite() => GprHyper::from_log(kernel, &theta),
        _ => *fallback,
    }
}

pub fn fit_gpr(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    kernel: GprKernel,
    hyper: &GprHyper,
    optimize: bool,
) -> Result<GprModel> {
    if x.nrows() < 2 {
        return Err(Error::InvalidInput {
            what: "gpr training set".into(),
            why: format!("need at least 2 samples, got {}", x.nrows()),
        });
    }
    if y.len() != x.nrows() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: y.len(),
        });
    }
    hyper.validate()?;
    let dists = distance_matrix(x);
    let hyper = if optimize {
        optimize_hyper(&dists, y, kernel, x.ncols(), hyper)
    } else {
        *hyper
    };
    let (chol, jitter_used) = factorize(&dists, kernel, &hyper)?;
    let coeffs = chol.solve(y);
    let log_marginal_likelihood = lml_from_parts(&chol, y, &coeffs);
    Ok(GprModel {
        kernel,
        hyper,
        x_train: x.clone(),
        coeffs,
        jitter_used,
        log_marginal_likelihood,
    })
}
