//! Linear-model family: plain least squares, pairwise interactions,
//! bisquare-robust IRLS and forward/backward stepwise selection.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::linalg::pivoted_least_squares;

const BISQUARE_C: f64 = 4.685;
const IRLS_TOL: f64 = 1e-8;
const IRLS_MAX_ITER: usize = 50;
const P_ENTER: f64 = 0.05;
const P_REMOVE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearVariant {
    Ols,
    Interactions,
    Robust,
    Stepwise,
}

impl LinearVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            LinearVariant::Ols => "ols",
            LinearVariant::Interactions => "interactions",
            LinearVariant::Robust => "robust",
            LinearVariant::Stepwise => "stepwise",
        }
    }
}

/// One design-matrix column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Constant,
    Linear(usize),
    Interaction(usize, usize),
}

impl Term {
    pub fn name(&self) -> String {
        match self {
            Term::Constant => "const".into(),
            Term::Linear(i) => format!("f{}", i + 1),
            Term::Interaction(i, j) => format!("f{}*f{}", i + 1, j + 1),
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Term::Constant => 1.0,
            Term::Linear(i) => x[*i],
            Term::Interaction(i, j) => x[*i] * x[*j],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub variant: LinearVariant,
    pub input_dim: usize,
    pub terms: Vec<Term>,
    pub coeffs: Vec<f64>,
    /// Terms pinned to zero for being linearly dependent (wide designs).
    pub dropped_terms: Vec<Term>,
    /// False when robust IRLS stopped at the iteration cap.
    pub irls_converged: bool,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(self
            .terms
            .iter()
            .zip(&self.coeffs)
            .map(|(t, c)| c * t.value(x))
            .sum())
    }
}

fn design_matrix(x: &DMatrix<f64>, terms: &[Term]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), terms.len(), |r, c| {
        let row: Vec<f64> = x.row(r).iter().copied().collect();
        terms[c].value(&row)
    })
}

fn base_terms(dim: usize) -> Vec<Term> {
    let mut t = vec![Term::Constant];
    t.extend((0..dim).map(Term::Linear));
    t
}

fn interaction_terms(dim: usize) -> Vec<Term> {
    let mut t = base_terms(dim);
    for i in 0..dim {
        for j in i + 1..dim {
            t.push(Term::Interaction(i, j));
        }
    }
    t
}

fn check_inputs(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::EmptyInput("linear-model training set".into()));
    }
    if y.len() != x.nrows() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: y.len(),
        });
    }
    Ok(())
}

fn fit_ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LinearModel> {
    let terms = base_terms(x.ncols());
    if x.nrows() < terms.len() {
        return Err(Error::InvalidInput {
            what: "ols training set".into(),
            why: format!(
                "{} rows cannot identify {} terms",
                x.nrows(),
                terms.len()
            ),
        });
    }
    let a = design_matrix(x, &terms);
    // The feature set contains exact duplicates by construction
    // (difference mean = dissimilarity, sum mean = 2 * mean), so
    // dependent columns are pinned to zero and recorded, not an error.
    let sol = pivoted_least_squares(&a, y)?;
    Ok(LinearModel {
        variant: LinearVariant::Ols,
        input_dim: x.ncols(),
        dropped_terms: sol.dropped.iter().map(|&i| terms[i]).collect(),
        terms,
        coeffs: sol.coeffs,
        irls_converged: true,
    })
}

/// Constant + linear + all pairwise products. At study scale there are far
/// more terms than samples, so the basic solution is used and the pinned
/// terms are recorded instead of raising an error.
fn fit_interactions(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LinearModel> {
    let terms = interaction_terms(x.ncols());
    let a = design_matrix(x, &terms);
    let sol = pivoted_least_squares(&a, y)?;
    Ok(LinearModel {
        variant: LinearVariant::Interactions,
        input_dim: x.ncols(),
        dropped_terms: sol.dropped.iter().map(|&i| terms[i]).collect(),
        terms,
        coeffs: sol.coeffs,
        irls_converged: true,
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("residuals are finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Iteratively reweighted least squares with Tukey bisquare weights.
fn fit_robust(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LinearModel> {
    let terms = base_terms(x.ncols());
    if x.nrows() < terms.len() {
        return Err(Error::InvalidInput {
            what: "robust training set".into(),
            why: format!(
                "{} rows cannot identify {} terms",
                x.nrows(),
                terms.len()
            ),
        });
    }
    let a_full = design_matrix(x, &terms);
    // Dependent columns are identified once, on the unweighted design,
    // so the drop set cannot wander as the IRLS weights evolve.
    let probe = pivoted_least_squares(&a_full, y)?;
    let kept: Vec<usize> = (0..terms.len())
        .filter(|j| !probe.dropped.contains(j))
        .collect();
    let a = a_full.select_columns(&kept);
    let mut coeffs = DVector::from_fn(kept.len(), |s, _| probe.coeffs[kept[s]]);
    let mut converged = false;
    for _ in 0..IRLS_MAX_ITER {
        let resid = y - &a * &coeffs;
        let mut abs_r: Vec<f64> = resid.iter().map(|r| r.abs()).collect();
        let s = median(&mut abs_r) / 0.6745;
        if s == 0.0 {
            converged = true; // at least half the residuals are exactly zero
            break;
        }
        let mut aw = a.clone();
        let mut yw = y.clone();
        for i in 0..a.nrows() {
            let u = resid[i] / (BISQUARE_C * s);
            let w = if u.abs() < 1.0 {
                let t = 1.0 - u * u;
                t * t
            } else {
                0.0
            };
            let sw = w.sqrt();
            for j in 0..a.ncols() {
                aw[(i, j)] *= sw;
            }
            yw[i] *= sw;
        }
        let next = DVector::from_vec(pivoted_least_squares(&aw, &yw)?.coeffs);
        let delta = (&next - &coeffs).amax();
        let scale = coeffs.amax().max(1.0);
        coeffs = next;
        if delta <= IRLS_TOL * scale {
            converged = true;
            break;
        }
    }
    let mut full = vec![0.0; terms.len()];
    for (slot, &j) in kept.iter().enumerate() {
        full[j] = coeffs[slot];
    }
    Ok(LinearModel {
        variant: LinearVariant::Robust,
        input_dim: x.ncols(),
        dropped_terms: probe.dropped.iter().map(|&i| terms[i]).collect(),
        terms,
        coeffs: full,
        irls_converged: converged,
    })
}

fn sse_of(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    let sol = pivoted_least_squares(a, y)?;
    let coeffs = DVector::from_vec(sol.coeffs);
    Ok((y - a * coeffs).norm_squared())
}

/// p-value of the partial F-test comparing a model against the same model
/// with one extra term. `df_full` is the residual degrees of freedom of
/// the larger model.
fn f_test_p(sse_reduced: f64, sse_full: f64, df_full: usize, y_scale: f64) -> f64 {
    if df_full == 0 {
        return 1.0;
    }
    // Perfect or near-perfect fits make the F statistic meaningless.
    // Decisive only when the reduced model was genuinely worse than the
    // floor; two vanishing SSEs differ by nothing but rounding noise.
    let floor = 1e-12 * y_scale.max(f64::MIN_POSITIVE);
    if sse_full <= floor {
        return if sse_reduced > floor { 0.0 } else { 1.0 };
    }
    let f_stat = ((sse_reduced - sse_full).max(0.0)) / (sse_full / df_full as f64);
    let dist = FisherSnedecor::new(1.0, df_full as f64).expect("valid F parameters");
    1.0 - dist.cdf(f_stat)
}

/// Forward-add/backward-remove selection over the linear terms by partial
/// F-tests, starting from the constant model.
fn fit_stepwise(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LinearModel> {
    let dim = x.ncols();
    let n = x.nrows();
    let y_scale = y.iter().map(|v| v * v).sum::<f64>();
    let mut selected: Vec<Term> = vec![Term::Constant];
    let mut in_model = vec![false; dim];
    let mut sse_current = sse_of(&design_matrix(x, &selected), y)?;

    loop {
        let mut changed = false;

        // Forward pass: add the most significant candidate below P_ENTER.
        let mut best: Option<(f64, usize, f64)> = None; // (p, feature, sse)
        for f in 0..dim {
            if in_model[f] {
                continue;
            }
            let mut trial = selected.clone();
            trial.push(Term::Linear(f));
            if n <= trial.len() {
                continue; // no residual degrees of freedom left
            }
            let sse_trial = sse_of(&design_matrix(x, &trial), y)?;
            let p = f_test_p(sse_current, sse_trial, n - trial.len(), y_scale);
            if p < P_ENTER && best.map_or(true, |(bp, _, _)| p < bp) {
                best = Some((p, f, sse_trial));
            }
        }
        if let Some((_, f, sse_trial)) = best {
            selected.push(Term::Linear(f));
            in_model[f] = true;
            sse_current = sse_trial;
            changed = true;
        }

        // Backward pass: drop the least significant term above P_REMOVE.
        let mut worst: Option<(f64, usize, f64)> = None; // (p, position, sse)
        for pos in 1..selected.len() {
            let mut trial = selected.clone();
            trial.remove(pos);
            let sse_trial = sse_of(&design_matrix(x, &trial), y)?;
            let df_full = n.saturating_sub(selected.len());
            let p = f_test_p(sse_trial, sse_current, df_full, y_scale);
            if p > P_REMOVE && worst.map_or(true, |(wp, _, _)| p > wp) {
                worst = Some((p, pos, sse_trial));
            }
        }
        if let Some((_, pos, sse_trial)) = worst {
            if let Term::Linear(f) = selected[pos] {
                in_model[f] = false;
            }
            selected.remove(pos);
            sse_current = sse_trial;
            changed = true;
        }

        if !changed {
            break;
        }
    }

    // Selection only admits terms that genuinely reduce SSE, so the
    // selected design is independent and nothing is dropped here.
    let a = design_matrix(x, &selected);
    let coeffs = pivoted_least_squares(&a, y)?.coeffs;
    Ok(LinearModel {
        variant: LinearVariant::Stepwise,
        input_dim: dim,
        terms: selected,
        coeffs,
        dropped_terms: vec![],
        irls_converged: true,
    })
}

pub fn fit_linear(x: &DMatrix<f64>, y: &DVector<f64>, variant: LinearVariant) -> Result<LinearModel> {
    check_inputs(x, y)?;
    match variant {
        LinearVariant::Ols => fit_ols(x, y),
        LinearVariant::Interactions => fit_interactions(x, y),
        LinearVariant::Robust => fit_robust(x, y),
        LinearVariant::Stepwise => fit_stepwise(x, y),
    }
}
