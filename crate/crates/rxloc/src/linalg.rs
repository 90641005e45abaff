//! Column-pivoted Householder QR least squares.
//!
//! The regression estimators share this solver. Rank deficiency is the
//! normal case for the wide interaction designs (more terms than samples),
//! so instead of failing, the solver returns the basic solution: dependent
//! columns are pinned to zero and reported, and the caller decides whether
//! that is acceptable.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PivotedLstsq {
    /// One coefficient per design column; dependent columns hold zero.
    pub coeffs: Vec<f64>,
    pub rank: usize,
    /// Indices of columns pinned to zero, ascending.
    pub dropped: Vec<usize>,
}

/// Minimum-residual basic solution of `a * x = y`.
///
/// Columns whose residual norm falls below `eps * max(n, m)` times the
/// first pivot norm are treated as linear combinations of the columns
/// already factored.
pub fn pivoted_least_squares(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<PivotedLstsq> {
    let (n, m) = a.shape();
    if n == 0 || m == 0 {
        return Err(Error::EmptyInput("least-squares design matrix".into()));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: y.len(),
        });
    }

    let mut r = a.clone();
    let mut qty = y.clone();
    let mut perm: Vec<usize> = (0..m).collect();
    let kmax = n.min(m);
    let mut rank = 0usize;
    let mut first_pivot = 0.0f64;

    for k in 0..kmax {
        let mut best = k;
        let mut best_n2 = -1.0f64;
        for j in k..m {
            let n2: f64 = (k..n).map(|i| r[(i, j)] * r[(i, j)]).sum();
            if n2 > best_n2 {
                best_n2 = n2;
                best = j;
            }
        }
        let col_norm = best_n2.max(0.0).sqrt();
        if k == 0 {
            first_pivot = col_norm;
        }
        let tol = f64::EPSILON * n.max(m) as f64 * first_pivot;
        if col_norm <= tol {
            break;
        }
        r.swap_columns(k, best);
        perm.swap(k, best);

        // Householder reflector zeroing rows k+1.. of column k.
        let alpha = if r[(k, k)] >= 0.0 { -col_norm } else { col_norm };
        let mut v: Vec<f64> = (k..n).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let v_n2: f64 = v.iter().map(|x| x * x).sum();
        if v_n2 > 0.0 {
            for j in k..m {
                let dot: f64 = (k..n).map(|i| v[i - k] * r[(i, j)]).sum();
                let f = 2.0 * dot / v_n2;
                for i in k..n {
                    r[(i, j)] -= f * v[i - k];
                }
            }
            let dot: f64 = (k..n).map(|i| v[i - k] * qty[i]).sum();
            let f = 2.0 * dot / v_n2;
            for i in k..n {
                qty[i] -= f * v[i - k];
            }
        }
        r[(k, k)] = alpha;
        for i in k + 1..n {
            r[(i, k)] = 0.0;
        }
        rank += 1;
    }

    let mut z = vec![0.0f64; rank];
    for i in (0..rank).rev() {
        let mut s = qty[i];
        for (j, zj) in z.iter().enumerate().take(rank).skip(i + 1) {
            s -= r[(i, j)] * zj;
        }
        z[i] = s / r[(i, i)];
    }
    let mut coeffs = vec![0.0f64; m];
    for (i, &zi) in z.iter().enumerate() {
        coeffs[perm[i]] = zi;
    }
    let mut dropped: Vec<usize> = perm[rank..].to_vec();
    dropped.sort_unstable();
    Ok(PivotedLstsq {
        coeffs,
        rank,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_matrix(rng: &mut SplitMix64, n: usize, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |_, _| rng.next_range(-1.0, 1.0))
    }

    #[test]
    fn square_full_rank_matches_lu() {
        let mut rng = SplitMix64::new(3);
        let a = random_matrix(&mut rng, 6, 6);
        let y = DVector::from_fn(6, |i, _| (i as f64).sin() + 1.0);
        let got = pivoted_least_squares(&a, &y).unwrap();
        assert_eq!(got.rank, 6);
        assert!(got.dropped.is_empty());
        let want = a.clone().lu().solve(&y).unwrap();
        for (g, w) in got.coeffs.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-10, "{g} vs {w}");
        }
    }

    #[test]
    fn overdetermined_solution_is_stationary() {
        // At the least-squares optimum the residual is orthogonal to the
        // column space.
        let mut rng = SplitMix64::new(17);
        let a = random_matrix(&mut rng, 40, 7);
        let y = DVector::from_fn(40, |i, _| rng.next_range(-2.0, 2.0) + i as f64 * 0.01);
        let got = pivoted_least_squares(&a, &y).unwrap();
        assert_eq!(got.rank, 7);
        let x = DVector::from_vec(got.coeffs.clone());
        let grad = a.transpose() * (&y - &a * &x);
        assert!(grad.amax() < 1e-9, "gradient {}", grad.amax());
    }

    #[test]
    fn duplicate_column_dropped_fit_unchanged() {
        let mut rng = SplitMix64::new(29);
        let mut a = random_matrix(&mut rng, 20, 5);
        let dup = a.column(1).into_owned();
        a.set_column(3, &dup);
        let y = DVector::from_fn(20, |i, _| 0.3 * i as f64 + rng.next_range(-0.1, 0.1));
        let got = pivoted_least_squares(&a, &y).unwrap();
        assert_eq!(got.rank, 4);
        // One of the identical pair is pinned to zero; pivoting decides
        // which.
        assert_eq!(got.dropped.len(), 1);
        assert!(got.dropped[0] == 1 || got.dropped[0] == 3);
        assert_eq!(got.coeffs[got.dropped[0]], 0.0);
        // Residual still optimal over the span.
        let x = DVector::from_vec(got.coeffs.clone());
        let grad = a.transpose() * (&y - &a * &x);
        assert!(grad.amax() < 1e-9);
    }

    #[test]
    fn wide_consistent_system_reproduced_exactly() {
        let mut rng = SplitMix64::new(41);
        let a = random_matrix(&mut rng, 8, 30);
        let x0 = DVector::from_fn(30, |i, _| if i % 3 == 0 { 1.0 } else { -0.5 });
        let y = &a * &x0;
        let got = pivoted_least_squares(&a, &y).unwrap();
        assert_eq!(got.rank, 8);
        assert_eq!(got.dropped.len(), 22);
        let x = DVector::from_vec(got.coeffs.clone());
        let resid = (&y - &a * &x).amax();
        assert!(resid < 1e-9, "residual {resid}");
    }

    #[test]
    fn tiny_independent_column_is_kept() {
        let mut rng = SplitMix64::new(53);
        let mut a = random_matrix(&mut rng, 15, 3);
        for i in 0..15 {
            a[(i, 2)] *= 1e-8;
        }
        let y = DVector::from_fn(15, |i, _| (i as f64 * 0.7).cos());
        let got = pivoted_least_squares(&a, &y).unwrap();
        assert_eq!(got.rank, 3);
        assert!(got.dropped.is_empty());
    }

    #[test]
    fn zero_matrix_drops_everything() {
        let a = DMatrix::zeros(4, 3);
        let y = DVector::from_element(4, 1.0);
        let got = pivoted_least_squares(&a, &y).unwrap();
        assert_eq!(got.rank, 0);
        assert_eq!(got.dropped, vec![0, 1, 2]);
        assert!(got.coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn matches_svd_solution_in_fit_quality() {
        let mut rng = SplitMix64::new(67);
        let a = random_matrix(&mut rng, 25, 10);
        let y = DVector::from_fn(25, |i, _| (i as f64 * 0.31).sin());
        let got = pivoted_least_squares(&a, &y).unwrap();
        let x = DVector::from_vec(got.coeffs.clone());
        let svd_x = a.clone().svd(true, true).solve(&y, 1e-12).unwrap();
        let r_qr = (&y - &a * &x).norm();
        let r_svd = (&y - &a * &svd_x).norm();
        assert!((r_qr - r_svd).abs() < 1e-9, "{r_qr} vs {r_svd}");
    }

    #[test]
    fn shape_errors_reported() {
        let a = DMatrix::<f64>::zeros(0, 0);
        let y = DVector::<f64>::zeros(0);
        assert!(pivoted_least_squares(&a, &y).is_err());
        let a = DMatrix::<f64>::identity(3, 3);
        let y = DVector::<f64>::zeros(2);
        assert!(matches!(
            pivoted_least_squares(&a, &y),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
