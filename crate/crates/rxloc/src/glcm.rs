//! Gray-level co-occurrence texture statistics.
//!
//! Images are quantized to a small number of gray levels, co-occurrence
//! probabilities are accumulated over a set of pixel offsets, and a fixed
//! 20-statistic vector is computed from the averaged matrix. All logs are
//! base 2 with the usual `0*log(0) = 0` convention, and degenerate
//! distributions (constant images) produce finite vectors.

use crate::error::{Error, Result};
use crate::raster::GrayImage;

pub const DEFAULT_LEVELS: usize = 8;

/// Four-direction, distance-1 neighborhood: east, northeast, north,
/// northwest as (row, col) steps with row 0 at the top.
pub const DEFAULT_OFFSETS: [(i32, i32); 4] = [(0, 1), (-1, 1), (-1, 0), (-1, -1)];

/// Names of the 20 statistics in vector order.
pub const FEATURE_NAMES: [&str; 20] = [
    "mean",
    "variance",
    "entropy",
    "energy",
    "contrast",
    "correlation",
    "inverse_difference_moment",
    "dissimilarity",
    "homogeneity",
    "max_probability",
    "autocorrelation",
    "cluster_shade",
    "cluster_prominence",
    "sum_mean",
    "sum_variance",
    "sum_entropy",
    "difference_mean",
    "difference_variance",
    "difference_entropy",
    "information_correlation_1",
];

/// A quantized image: every entry is a gray level below `levels`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelMatrix {
    pub width: usize,
    pub height: usize,
    pub levels: usize,
    pub data: Vec<u8>,
}

impl LevelMatrix {
    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.data[row * self.width + col]
    }
}

/// An averaged co-occurrence probability matrix over gray levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    pub levels: usize,
    /// Row-major `levels x levels` probabilities.
    pub p: Vec<f64>,
}

impl Glcm {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }
}

/// Uniform quantization: `level = floor(intensity * L / 256)`.
pub fn quantize(img: &GrayImage, levels: usize) -> Result<LevelMatrix> {
    if !(2..=256).contains(&levels) {
        return Err(Error::InvalidInput {
            what: "quantization levels".into(),
            why: format!("L = {levels} outside [2, 256]"),
        });
    }
    let data = img
        .pixels
        .iter()
        .map(|&v| ((v as usize * levels) / 256) as u8)
        .collect();
    Ok(LevelMatrix {
        width: img.width,
        height: img.height,
        levels,
        data,
    })
}

/// Count co-occurrences per offset, optionally symmetrized, normalize each
/// offset's matrix to sum 1, then average over the offsets.
pub fn compute_glcm(lm: &LevelMatrix, offsets: &[(i32, i32)], symmetric: bool) -> Result<Glcm> {
    if offsets.is_empty() {
        return Err(Error::InvalidInput {
            what: "glcm offsets".into(),
            why: "at least one offset is required".into(),
        });
    }
    let l = lm.levels;
    let mut acc = vec![0.0f64; l * l];
    for &(drow, dcol) in offsets {
        let mut counts = vec![0u64; l * l];
        let mut total = 0u64;
        for row in 0..lm.height as i64 {
            let nrow = row + drow as i64;
            if nrow < 0 || nrow >= lm.height as i64 {
                continue;
            }
            for col in 0..lm.width as i64 {
                let ncol = col + dcol as i64;
                if ncol < 0 || ncol >= lm.width as i64 {
                    continue;
                }
                let a = lm.get(col as usize, row as usize) as usize;
                let b = lm.get(ncol as usize, nrow as usize) as usize;
                counts[a * l + b] += 1;
                total += 1;
                if symmetric {
                    counts[b * l + a] += 1;
                    total += 1;
                }
            }
        }
        if total == 0 {
            return Err(Error::InsufficientPixels {
                drow,
                dcol,
                width: lm.width,
                height: lm.height,
            });
        }
        for (a, &c) in acc.iter_mut().zip(counts.iter()) {
            *a += c as f64 / total as f64;
        }
    }
    let n = offsets.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    Ok(Glcm { levels: l, p: acc })
}

fn log2_or_zero(p: f64) -> f64 {
    if p > 0.0 {
        p.log2()
    } else {
        0.0
    }
}

/// The fixed 20-statistic texture vector (see [`FEATURE_NAMES`] for order).
pub fn features20(g: &Glcm) -> [f64; 20] {
    let l = g.levels;
    let mut px = vec![0.0f64; l];
    let mut py = vec![0.0f64; l];
    let mut p_sum = vec![0.0f64; 2 * l - 1];
    let mut p_diff = vec![0.0f64; l];
    for i in 0..l {
        for j in 0..l {
            let p = g.at(i, j);
            px[i] += p;
            py[j] += p;
            p_sum[i + j] += p;
            p_diff[i.abs_diff(j)] += p;
        }
    }
    let mean_of = |m: &[f64]| -> f64 { m.iter().enumerate().map(|(k, &p)| k as f64 * p).sum() };
    let var_about = |m: &[f64], mu: f64| -> f64 {
        m.iter()
            .enumerate()
            .map(|(k, &p)| (k as f64 - mu).powi(2) * p)
            .sum()
    };
    let entropy_of = |m: &[f64]| -> f64 { -m.iter().map(|&p| p * log2_or_zero(p)).sum::<f64>() };

    let mu_x = mean_of(&px);
    let mu_y = mean_of(&py);
    let var_x = var_about(&px, mu_x);
    let var_y = var_about(&py, mu_y);

    let mut entropy = 0.0;
    let mut energy = 0.0;
    let mut contrast = 0.0;
    let mut idm = 0.0;
    let mut dissimilarity = 0.0;
    let mut homogeneity = 0.0;
    let mut max_p = 0.0f64;
    let mut autocorr = 0.0;
    let mut shade = 0.0;
    let mut prominence = 0.0;
    let mut hxy1 = 0.0;
    for i in 0..l {
        for j in 0..l {
            let p = g.at(i, j);
            let (fi, fj) = (i as f64, j as f64);
            let d = fi - fj;
            entropy -= p * log2_or_zero(p);
            energy += p * p;
            contrast += d * d * p;
            idm += p / (1.0 + d * d);
            dissimilarity += d.abs() * p;
            homogeneity += p / (1.0 + d.abs());
            max_p = max_p.max(p);
            autocorr += fi * fj * p;
            let s = fi + fj - mu_x - mu_y;
            shade += s.powi(3) * p;
            prominence += s.powi(4) * p;
            if p > 0.0 {
                hxy1 -= p * log2_or_zero(px[i] * py[j]);
            }
        }
    }

    let correlation = {
        let denom = (var_x * var_y).sqrt();
        if denom > 0.0 {
            (autocorr - mu_x * mu_y) / denom
        } else {
            0.0
        }
    };
    let sum_mean = mean_of(&p_sum);
    let sum_variance = var_about(&p_sum, sum_mean);
    let sum_entropy = entropy_of(&p_sum);
    let diff_mean = mean_of(&p_diff);
    let diff_variance = var_about(&p_diff, diff_mean);
    let diff_entropy = entropy_of(&p_diff);
    let hx = entropy_of(&px);
    let hy = entropy_of(&py);
    let imc1 = {
        let denom = hx.max(hy);
        if denom > 0.0 {
            (entropy - hxy1) / denom
        } else {
            0.0
        }
    };

    [
        mu_x,
        var_x,
        entropy,
        energy,
        contrast,
        correlation,
        idm,
        dissimilarity,
        homogeneity,
        max_p,
        autocorr,
        shade,
        prominence,
        sum_mean,
        sum_variance,
        sum_entropy,
        diff_mean,
        diff_variance,
        diff_entropy,
        imc1,
    ]
}

/// Quantize, accumulate and summarize in one call with the default levels
/// and offsets.
pub fn image_features(img: &GrayImage) -> Result<[f64; 20]> {
    let lm = quantize(img, DEFAULT_LEVELS)?;
    let g = compute_glcm(&lm, &DEFAULT_OFFSETS, true)?;
    Ok(features20(&g))
}

/// Sanity bounds every well-formed vector satisfies.
pub fn validate_features(f: &[f64; 20]) -> Result<()> {
    let bad = |why: String| Error::InvalidInput {
        what: "feature vector".into(),
        why,
    };
    if let Some(k) = f.iter().position(|v| !v.is_finite()) {
        return Err(bad(format!("statistic {} is not finite", FEATURE_NAMES[k])));
    }
    if !(f[3] > 0.0 && f[3] <= 1.0) {
        return Err(bad(format!("energy {} outside (0, 1]", f[3])));
    }
    for k in [2usize, 15, 18] {
        if f[k] < 0.0 {
            return Err(bad(format!("{} is negative", FEATURE_NAMES[k])));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn image(width: usize, height: usize, pixels: Vec<u8>) -> GrayImage {
        assert_eq!(pixels.len(), width * height);
        GrayImage {
            width,
            height,
            pixels,
        }
    }

    fn level_matrix(width: usize, height: usize, levels: usize, data: Vec<u8>) -> LevelMatrix {
        LevelMatrix {
            width,
            height,
            levels,
            data,
        }
    }

    #[test]
    fn quantize_boundaries() {
        let img = image(4, 1, vec![0, 128, 255, 127]);
        let lm = quantize(&img, 8).unwrap();
        assert_eq!(lm.data, vec![0, 4, 7, 3]);
        let two = quantize(&img, 2).unwrap();
        assert_eq!(two.data, vec![0, 1, 1, 0]);
        assert!(quantize(&img, 1).is_err());
        assert!(quantize(&img, 257).is_err());
    }

    #[test]
    fn constant_image_degenerates_cleanly() {
        let img = image(6, 6, vec![200; 36]);
        let lm = quantize(&img, 8).unwrap();
        assert!(lm.data.iter().all(|&v| v == 6));
        let g = compute_glcm(&lm, &DEFAULT_OFFSETS, true).unwrap();
        assert!((g.at(6, 6) - 1.0).abs() < 1e-15);
        assert!(g.p.iter().sum::<f64>() - 1.0 < 1e-12);

        let f = features20(&g);
        validate_features(&f).unwrap();
        assert_eq!(f[3], 1.0); // energy
        assert_eq!(f[2], 0.0); // entropy
        assert_eq!(f[4], 0.0); // contrast
        assert_eq!(f[7], 0.0); // dissimilarity
        assert_eq!(f[9], 1.0); // max probability
        assert_eq!(f[5], 0.0); // correlation, sigma = 0 case
        assert_eq!(f[19], 0.0); // imc1, max(HX, HY) = 0 case
    }

    #[test]
    fn checkerboard_hand_values() {
        let lm = level_matrix(2, 2, 2, vec![0, 1, 1, 0]);
        let g = compute_glcm(&lm, &[(0, 1)], true).unwrap();
        assert_eq!(g.at(0, 1), 0.5);
        assert_eq!(g.at(1, 0), 0.5);
        assert_eq!(g.at(0, 0), 0.0);
        assert_eq!(g.at(1, 1), 0.0);

        let f = features20(&g);
        assert!((f[4] - 1.0).abs() < 1e-15); // contrast
        assert!((f[7] - 1.0).abs() < 1e-15); // dissimilarity
        assert!((f[3] - 0.5).abs() < 1e-15); // energy
        assert!((f[5] + 1.0).abs() < 1e-12); // correlation = -1
        assert!((f[0] - 0.5).abs() < 1e-15); // mean
    }

    #[test]
    fn symmetric_glcm_equals_transpose() {
        let mut rng = SplitMix64::new(2024);
        let data: Vec<u8> = (0..64).map(|_| (rng.next_u64() % 8) as u8).collect();
        let lm = level_matrix(8, 8, 8, data);
        let g = compute_glcm(&lm, &DEFAULT_OFFSETS, true).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(g.at(i, j), g.at(j, i));
            }
        }
        // Transposing a symmetric matrix leaves every statistic unchanged.
        let gt = Glcm {
            levels: 8,
            p: (0..64).map(|k| g.at(k % 8, k / 8)).collect(),
        };
        assert_eq!(features20(&g), features20(&gt));
    }

    #[test]
    fn normalization_and_bounds_on_random_images() {
        let mut rng = SplitMix64::new(31);
        for _ in 0..10 {
            let pixels: Vec<u8> = (0..256).map(|_| (rng.next_u64() & 0xFF) as u8).collect();
            let img = image(16, 16, pixels);
            let lm = quantize(&img, 8).unwrap();
            let g = compute_glcm(&lm, &DEFAULT_OFFSETS, true).unwrap();
            assert!((g.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(g.p.iter().all(|&p| p >= 0.0));

            let f = features20(&g);
            validate_features(&f).unwrap();
            assert!(f[3] <= 1.0);
            assert!(f[2] <= (64.0f64).log2());
        }
    }

    #[test]
    fn contrast_agrees_with_difference_distribution() {
        let mut rng = SplitMix64::new(47);
        let data: Vec<u8> = (0..144).map(|_| (rng.next_u64() % 8) as u8).collect();
        let lm = level_matrix(12, 12, 8, data);
        let g = compute_glcm(&lm, &DEFAULT_OFFSETS, true).unwrap();
        let f = features20(&g);

        let mut p_diff = vec![0.0f64; 8];
        for i in 0..8usize {
            for j in 0..8usize {
                p_diff[i.abs_diff(j)] += g.at(i, j);
            }
        }
        let alt: f64 = p_diff
            .iter()
            .enumerate()
            .map(|(k, &p)| (k * k) as f64 * p)
            .sum();
        assert!((f[4] - alt).abs() < 1e-12);
    }

    #[test]
    fn sum_mean_is_twice_mean_for_symmetric() {
        let mut rng = SplitMix64::new(86);
        let data: Vec<u8> = (0..100).map(|_| (rng.next_u64() % 8) as u8).collect();
        let lm = level_matrix(10, 10, 8, data);
        let g = compute_glcm(&lm, &DEFAULT_OFFSETS, true).unwrap();
        let f = features20(&g);
        assert!((f[13] - 2.0 * f[0]).abs() < 1e-12);
    }

    #[test]
    fn insufficient_pixels_reported() {
        let lm = level_matrix(1, 1, 4, vec![2]);
        assert!(matches!(
            compute_glcm(&lm, &[(0, 1)], true),
            Err(Error::InsufficientPixels { .. })
        ));
        let row = level_matrix(5, 1, 4, vec![0, 1, 2, 3, 0]);
        assert!(compute_glcm(&row, &[(0, 1)], true).is_ok());
        assert!(matches!(
            compute_glcm(&row, &[(-1, 0)], true),
            Err(Error::InsufficientPixels { .. })
        ));
        assert!(compute_glcm(&row, &[], true).is_err());
    }

    /// Naive oracle: enumerate every pixel pair for every offset, adding
    /// both orientations explicitly, then normalize and average.
    fn naive_glcm(lm: &LevelMatrix, offsets: &[(i32, i32)], symmetric: bool) -> Glcm {
        let l = lm.levels;
        let mut acc = vec![0.0f64; l * l];
        for &(drow, dcol) in offsets {
            let mut counts = vec![0u64; l * l];
            for row in 0..lm.height {
                for col in 0..lm.width {
                    let nr = row as i64 + drow as i64;
                    let nc = col as i64 + dcol as i64;
                    if nr < 0 || nc < 0 || nr >= lm.height as i64 || nc >= lm.width as i64 {
                        continue;
                    }
                    let a = lm.get(col, row) as usize;
                    let b = lm.get(nc as usize, nr as usize) as usize;
                    counts[a * l + b] += 1;
                    if symmetric {
                        counts[b * l + a] += 1;
                    }
                }
            }
            let total: u64 = counts.iter().sum();
            assert!(total > 0);
            for (a, &c) in acc.iter_mut().zip(counts.iter()) {
                *a += c as f64 / total as f64;
            }
        }
        for a in &mut acc {
            *a /= offsets.len() as f64;
        }
        Glcm { levels: l, p: acc }
    }

    #[test]
    fn matches_naive_oracle_on_random_matrices() {
        let mut rng = SplitMix64::new(0xFEED);
        for trial in 0..50 {
            let data: Vec<u8> = (0..64).map(|_| (rng.next_u64() % 8) as u8).collect();
            let lm = level_matrix(8, 8, 8, data);
            let symmetric = trial % 5 != 0;
            let got = compute_glcm(&lm, &DEFAULT_OFFSETS, symmetric).unwrap();
            let want = naive_glcm(&lm, &DEFAULT_OFFSETS, symmetric);
            assert_eq!(got.p, want.p, "trial {trial}");
        }
    }
}
