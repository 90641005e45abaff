//! From-scratch multilayer perceptron with Levenberg-Marquardt, scaled
//! conjugate gradient and adaptive gradient-descent trainers.
//!
//! Topology is a single tanh hidden layer with a linear output; the
//! cascade variant additionally wires the inputs straight to the output
//! layer. Training is full batch and fully deterministic: weights come
//! from a seeded stream and every trainer is a pure function of
//! (seed, data, config).
//!
//! Parameters flatten in a fixed order: W1 row-major, b1, W2 row-major,
//! b2, then Wc row-major for cascade nets. The Jacobian, serialization and
//! the finite-difference tests all rely on this order.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    /// Wire inputs directly to the output layer as well.
    pub cascade: bool,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dim: usize, output_dim: usize, cascade: bool) -> Self {
        MlpSpec {
            input_dim,
            hidden_dim,
            output_dim,
            cascade,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidInput {
                what: "mlp spec".into(),
                why: "all layer widths must be >= 1".into(),
            });
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        let (i, h, o) = (self.input_dim, self.hidden_dim, self.output_dim);
        h * i + h + o * h + o + if self.cascade { o * i } else { 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpWeights {
    pub spec: MlpSpec,
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
    pub wc: Option<DMatrix<f64>>,
}

impl MlpWeights {
    pub fn flatten(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.spec.n_params());
        for r in 0..self.w1.nrows() {
            for c in 0..self.w1.ncols() {
                out.push(self.w1[(r, c)]);
            }
        }
        out.extend(self.b1.iter());
        for r in 0..self.w2.nrows() {
            for c in 0..self.w2.ncols() {
                out.push(self.w2[(r, c)]);
            }
        }
        out.extend(self.b2.iter());
        if let Some(wc) = &self.wc {
            for r in 0..wc.nrows() {
                for c in 0..wc.ncols() {
                    out.push(wc[(r, c)]);
                }
            }
        }
        DVector::from_vec(out)
    }

    pub fn from_flat(spec: MlpSpec, theta: &DVector<f64>) -> Result<Self> {
        if theta.len() != spec.n_params() {
            return Err(Error::DimensionMismatch {
                expected: spec.n_params(),
                got: theta.len(),
            });
        }
        let (i, h, o) = (spec.input_dim, spec.hidden_dim, spec.output_dim);
        let mut pos = 0usize;
        let mut take_matrix = |rows: usize, cols: usize| {
            let m = DMatrix::from_fn(rows, cols, |r, c| theta[pos + r * cols + c]);
            pos += rows * cols;
            m
        };
        let w1 = take_matrix(h, i);
        let b1_m = take_matrix(h, 1);
        let w2 = take_matrix(o, h);
        let b2_m = take_matrix(o, 1);
        let wc = if spec.cascade {
            Some(take_matrix(o, i))
        } else {
            None
        };
        Ok(MlpWeights {
            spec,
            w1,
            b1: b1_m.column(0).into_owned(),
            w2,
            b2: b2_m.column(0).into_owned(),
            wc,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

/// Uniform weights in [-0.5, 0.5] drawn in flatten order from a seeded
/// stream.
pub fn init_weights(spec: &MlpSpec, seed: u64) -> MlpWeights {
    let mut rng = SplitMix64::new(seed);
    let theta = DVector::from_fn(spec.n_params(), |_, _| rng.next_range(-0.5, 0.5));
    MlpWeights::from_flat(*spec, &theta).expect("flat vector sized by construction")
}

/// Network output for one input vector.
pub fn forward(w: &MlpWeights, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != w.spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: w.spec.input_dim,
            got: x.len(),
        });
    }
    let t = (&w.w1 * x + &w.b1).map(f64::tanh);
    let mut y = &w.w2 * t + &w.b2;
    if let Some(wc) = &w.wc {
        y += wc * x;
    }
    Ok(y)
}

/// Residuals `e = target - output`, one row per sample, column per output.
fn residuals(w: &MlpWeights, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let mut e = DMatrix::zeros(n, w.spec.output_dim);
    for s in 0..n {
        let out = forward(w, &x.row(s).transpose())?;
        for k in 0..w.spec.output_dim {
            e[(s, k)] = y[(s, k)] - out[k];
        }
    }
    Ok(e)
}

fn mse_of(e: &DMatrix<f64>) -> f64 {
    e.iter().map(|v| v * v).sum::<f64>() / (e.nrows() * e.ncols()) as f64
}

/// Analytic Jacobian `J[i][j] = de_i/dtheta_j` with residual rows ordered
/// sample-major, plus the residual vector in the same order.
pub fn jacobian(
    w: &MlpWeights,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("jacobian sample batch".into()));
    }
    if x.ncols() != w.spec.input_dim || y.ncols() != w.spec.output_dim || y.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: w.spec.input_dim,
            got: x.ncols(),
        });
    }
    let (i_dim, h_dim, o_dim) = (w.spec.input_dim, w.spec.hidden_dim, w.spec.output_dim);
    let p = w.spec.n_params();
    let w1_off = 0usize;
    let b1_off = h_dim * i_dim;
    let w2_off = b1_off + h_dim;
    let b2_off = w2_off + o_dim * h_dim;
    let wc_off = b2_off + o_dim;

    let mut jac = DMatrix::zeros(n * o_dim, p);
    let mut err = DVector::zeros(n * o_dim);
    for s in 0..n {
        let xs = x.row(s).transpose();
        let t = (&w.w1 * &xs + &w.b1).map(f64::tanh);
        let mut out = &w.w2 * &t + &w.b2;
        if let Some(wc) = &w.wc {
            out += wc * &xs;
        }
        for k in 0..o_dim {
            let row = s * o_dim + k;
            err[row] = y[(s, k)] - out[k];
            for h in 0..h_dim {
                let dt = 1.0 - t[h] * t[h];
                let w2kh = w.w2[(k, h)];
                for m in 0..i_dim {
                    jac[(row, w1_off + h * i_dim + m)] = -w2kh * dt * xs[m];
                }
                jac[(row, b1_off + h)] = -w2kh * dt;
                jac[(row, w2_off + k * h_dim + h)] = -t[h];
            }
            jac[(row, b2_off + k)] = -1.0;
            if w.wc.is_some() {
                for m in 0..i_dim {
                    jac[(row, wc_off + k * i_dim + m)] = -xs[m];
                }
            }
        }
    }
    Ok((jac, err))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Lm,
    Scg,
    Gdx,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Lm => "lm",
            Algorithm::Scg => "scg",
            Algorithm::Gdx => "gdx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmParams {
    pub mu0: f64,
    pub mu_inc: f64,
    pub mu_dec: f64,
    pub mu_max: f64,
}

impl Default for LmParams {
    fn default() -> Self {
        LmParams {
            mu0: 1e-3,
            mu_inc: 10.0,
            mu_dec: 0.1,
            mu_max: 1e10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdxParams {
    pub lr: f64,
    pub momentum: f64,
    pub lr_inc: f64,
    pub lr_dec: f64,
    pub max_perf_inc: f64,
}

impl Default for GdxParams {
    fn default() -> Self {
        GdxParams {
            lr: 0.01,
            momentum: 0.9,
            lr_inc: 1.05,
            lr_dec: 0.7,
            max_perf_inc: 1.04,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScgParams {
    pub sigma: f64,
    pub lambda: f64,
}

impl Default for ScgParams {
    fn default() -> Self {
        ScgParams {
            sigma: 5e-5,
            lambda: 5e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfigNN {
    pub algorithm: Algorithm,
    pub max_epochs: usize,
    pub grad_tol: f64,
    pub goal_mse: f64,
    pub seed: u64,
    pub lm: LmParams,
    pub gdx: GdxParams,
    pub scg: ScgParams,
}

impl TrainConfigNN {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        TrainConfigNN {
            algorithm,
            max_epochs: 1000,
            grad_tol: 1e-7,
            goal_mse: 0.0,
            seed,
            lm: LmParams::default(),
            gdx: GdxParams::default(),
            scg: ScgParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: &str| Error::InvalidInput {
            what: "nn train config".into(),
            why: why.into(),
        };
        if self.max_epochs == 0 {
            return Err(bad("max_epochs must be > 0"));
        }
        if !(self.grad_tol > 0.0) || self.goal_mse < 0.0 {
            return Err(bad("grad_tol must be > 0 and goal >= 0"));
        }
        let lm = &self.lm;
        if !(lm.mu0 > 0.0 && lm.mu_inc > 1.0 && lm.mu_dec > 0.0 && lm.mu_dec < 1.0 && lm.mu_max > lm.mu0)
        {
            return Err(bad("lm parameters out of range"));
        }
        let g = &self.gdx;
        if !(g.lr > 0.0
            && (0.0..1.0).contains(&g.momentum)
            && g.lr_inc > 1.0
            && g.lr_dec > 0.0
            && g.lr_dec < 1.0
            && g.max_perf_inc >= 1.0)
        {
            return Err(bad("gdx parameters out of range"));
        }
        if !(self.scg.sigma > 0.0 && self.scg.lambda > 0.0) {
            return Err(bad("scg parameters out of range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub weights: MlpWeights,
    pub epochs_run: usize,
    pub final_mse: f64,
    /// `mse_trace[0]` is the initial loss; one entry follows per epoch.
    pub mse_trace: Vec<f64>,
}

/// Shared training state: flat parameters plus loss/gradient evaluators.
struct Problem<'a> {
    spec: MlpSpec,
    x: &'a DMatrix<f64>,
    y: &'a DMatrix<f64>,
    n_resid: f64,
}

impl<'a> Problem<'a> {
    fn mse(&self, theta: &DVector<f64>) -> Result<f64> {
        let w = MlpWeights::from_flat(self.spec, theta)?;
        Ok(mse_of(&residuals(&w, self.x, self.y)?))
    }

    /// (J, e) at theta; gradient of the MSE is `-(2/N) J^T e` negated, i.e.
    /// `(2/N) J^T e` with J holding de/dtheta.
    fn jac(&self, theta: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let w = MlpWeights::from_flat(self.spec, theta)?;
        jacobian(&w, self.x, self.y)
    }

    fn grad(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        let (j, e) = self.jac(theta)?;
        Ok(j.transpose() * e * (2.0 / self.n_resid))
    }
}

/// Full-batch training of an MLP on `(x, y)` sample rows.
pub fn train(
    spec: &MlpSpec,
    cfg: &TrainConfigNN,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<TrainResult> {
    spec.validate()?;
    cfg.validate()?;
    if x.nrows() < 2 {
        return Err(Error::InvalidInput {
            what: "training set".into(),
            why: format!("need at least 2 samples, got {}", x.nrows()),
        });
    }
    if x.ncols() != spec.input_dim || y.ncols() != spec.output_dim || y.nrows() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            got: x.ncols(),
        });
    }
    let prob = Problem {
        spec: *spec,
        x,
        y,
        n_resid: (x.nrows() * spec.output_dim) as f64,
    };
    let theta0 = init_weights(spec, cfg.seed).flatten();
    let (theta, epochs, trace) = match cfg.algorithm {
        Algorithm::Lm => train_lm(&prob, cfg, theta0)?,
        Algorithm::Gdx => train_gdx(&prob, cfg, theta0)?,
        Algorithm::Scg => train_scg(&prob, cfg, theta0)?,
    };
    let weights = MlpWeights::from_flat(*spec, &theta)?;
    let final_mse = *trace.last().expect("trace holds the initial loss");
    Ok(TrainResult {
        weights,
        epochs_run: epochs,
        final_mse,
        mse_trace: trace,
    })
}

fn check_finite(mse: f64, epoch: usize) -> Result<f64> {
    if mse.is_finite() {
        Ok(mse)
    } else {
        Err(Error::NonFiniteLoss { epoch, mse })
    }
}

fn train_lm(
    prob: &Problem,
    cfg: &TrainConfigNN,
    mut theta: DVector<f64>,
) -> Result<(DVector<f64>, usize, Vec<f64>)> {
    let p = theta.len();
    let mut mse = check_finite(prob.mse(&theta)?, 0)?;
    let mut trace = vec![mse];
    let mut mu = cfg.lm.mu0;
    let mut epochs = 0usize;

    for epoch in 1..=cfg.max_epochs {
        if mse <= cfg.goal_mse {
            break;
        }
        let (jac, err) = prob.jac(&theta)?;
        let jt = jac.transpose();
        let grad = &jt * &err * (2.0 / prob.n_resid);
        if grad.amax() <= cfg.grad_tol {
            break;
        }
        let jtj = &jt * &jac;
        let jte = &jt * &err;

        // Retry with stronger damping until a step reduces the loss.
        let mut stepped = false;
        loop {
            let mut a = jtj.clone();
            for i in 0..p {
                a[(i, i)] += mu;
            }
            match nalgebra::Cholesky::new(a) {
                Some(chol) => {
                    let delta = chol.solve(&jte);
                    let cand = &theta - &delta;
                    let cand_mse = check_finite(prob.mse(&cand)?, epoch)?;
                    if cand_mse < mse {
                        theta = cand;
                        mse = cand_mse;
                        mu = (mu * cfg.lm.mu_dec).max(1e-20);
                        stepped = true;
                        break;
                    }
                    mu *= cfg.lm.mu_inc;
                }
                None => {
                    if mu >= cfg.lm.mu_max {
                        return Err(Error::SingularLmSystem { mu });
                    }
                    mu *= cfg.lm.mu_inc;
                }
            }
            if mu > cfg.lm.mu_max {
                break; // damping exhausted: no further descent possible
            }
        }
        epochs = epoch;
        trace.push(mse);
        if !stepped {
            break;
        }
    }
    Ok((theta, epochs, trace))
}

fn train_gdx(
    prob: &Problem,
    cfg: &TrainConfigNN,
    mut theta: DVector<f64>,
) -> Result<(DVector<f64>, usize, Vec<f64>)> {
    let mut mse = check_finite(prob.mse(&theta)?, 0)?;
    let mut trace = vec![mse];
    let mut lr = cfg.gdx.lr;
    let mc = cfg.gdx.momentum;
    let mut step = DVector::zeros(theta.len());
    let mut epochs = 0usize;

    for epoch in 1..=cfg.max_epochs {
        if mse <= cfg.goal_mse {
            break;
        }
        let grad = prob.grad(&theta)?;
        if grad.amax() <= cfg.grad_tol {
            break;
        }
        let cand_step = &step * mc - &grad * ((1.0 - mc) * lr);
        let cand = &theta + &cand_step;
        let cand_mse = check_finite(prob.mse(&cand)?, epoch)?;
        if cand_mse > mse * cfg.gdx.max_perf_inc {
            // Rejected: shrink the rate and drop the momentum memory.
            lr *= cfg.gdx.lr_dec;
            step.fill(0.0);
        } else {
            if cand_mse < mse {
                lr *= cfg.gdx.lr_inc;
            }
            theta = cand;
            mse = cand_mse;
            step = cand_step;
        }
        epochs = epoch;
        trace.push(mse);
    }
    Ok((theta, epochs, trace))
}

/// Scaled conjugate gradient (Moller's algorithm) on the MSE surface.
fn train_scg(
    prob: &Problem,
    cfg: &TrainConfigNN,
    mut theta: DVector<f64>,
) -> Result<(DVector<f64>, usize, Vec<f64>)> {
    let mut mse = check_finite(prob.mse(&theta)?, 0)?;
    let mut trace = vec![mse];
    let mut epochs = 0usize;

    let mut lambda = cfg.scg.lambda;
    let mut lambda_bar = 0.0f64;
    let mut r = -prob.grad(&theta)?;
    let mut p = r.clone();
    let mut success = true;
    let mut delta = 0.0f64;

    for epoch in 1..=cfg.max_epochs {
        if mse <= cfg.goal_mse || r.amax() <= cfg.grad_tol {
            break;
        }
        let p_norm2 = p.norm_squared();
        if p_norm2 == 0.0 {
            break;
        }
        if success {
            // Second-order information along p from a forward difference.
            let sigma_k = cfg.scg.sigma / p_norm2.sqrt();
            let shifted = &theta + &p * sigma_k;
            let g_shift = prob.grad(&shifted)?;
            let g_here = prob.grad(&theta)?;
            let s = (g_shift - g_here) / sigma_k;
            delta = p.dot(&s);
        }
        delta += (lambda - lambda_bar) * p_norm2;
        if delta <= 0.0 {
            // Make the Hessian approximation positive definite.
            lambda_bar = 2.0 * (lambda - delta / p_norm2);
            delta = -delta + lambda * p_norm2;
            lambda = lambda_bar;
        }
        let mu = p.dot(&r);
        if delta == 0.0 || !delta.is_finite() {
            break;
        }
        let alpha = mu / delta;
        let cand = &theta + &p * alpha;
        let cand_mse = check_finite(prob.mse(&cand)?, epoch)?;
        let comparison = if mu == 0.0 {
            -1.0
        } else {
            2.0 * delta * (mse - cand_mse) / (mu * mu)
        };
        if comparison >= 0.0 {
            theta = cand;
            mse = cand_mse;
            let r_new = -prob.grad(&theta)?;
            lambda_bar = 0.0;
            success = true;
            if epoch % theta.len() == 0 {
                p = r_new.clone(); // periodic restart along steepest descent
            } else {
                let beta = (r_new.norm_squared() - r_new.dot(&r)) / mu;
                p = &r_new + &p * beta;
            }
            r = r_new;
            if comparison >= 0.75 {
                lambda *= 0.25;
            }
        } else {
            lambda_bar = lambda;
            success = false;
        }
        if comparison < 0.25 {
            lambda += delta * (1.0 - comparison) / p_norm2;
        }
        if !lambda.is_finite() || lambda > 1e100 {
            break; // step sizes have underflowed; no progress possible
        }
        epochs = epoch;
        trace.push(mse);
    }
    Ok((theta, epochs, trace))
}
