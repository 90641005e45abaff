//! Acceptance gate for the whole pipeline. Each test prints one pass/fail
//! line and checks one end-to-end property: accuracy and runtime of the
//! default run, the method ranking it produces, metric exactness, the relay
//! measurement against a closed-form oracle, GLCM correctness against a
//! naive oracle, the numerical optimizers against finite differences, and
//! byte-level determinism across reruns.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rxloc::config::PipelineConfig;
use rxloc::eval::{percent_error, EvalReport};
use rxloc::glcm::{compute_glcm, features20, LevelMatrix, FEATURE_NAMES};
use rxloc::mlp::{forward, init_weights, jacobian, train, Algorithm, MlpSpec, TrainConfigNN};
use rxloc::pipeline::{run_pipeline, Stage};
use rxloc::regression::gpr::{fit_gpr, se_log_marginal_gradient, GprHyper, GprKernel};
use rxloc::relay::{ground_loop_impedance, k0_factor};
use rxloc::rng::SplitMix64;
use rxloc::simulator::{
    solve_slg_fault, FaultScenario, LineKind, LineSection, MixedLineSpec, SequenceParams,
    SourceSpec,
};

// ---------------------------------------------------------------- shared run

struct DefaultRuns {
    dir_a: PathBuf,
    dir_b: PathBuf,
    elapsed_a: Duration,
    reports: Vec<EvalReport>,
    // Keeps the temp tree alive for the whole test binary.
    _root: tempfile::TempDir,
}

/// Two full default-config runs with the same seed, shared by the
/// end-to-end, ranking and determinism tests.
fn default_runs() -> &'static DefaultRuns {
    static RUNS: OnceLock<DefaultRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let root = tempfile::tempdir().expect("temp dir");
        let dir_a = root.path().join("a");
        let dir_b = root.path().join("b");

        let mut cfg = PipelineConfig::default();
        cfg.out_dir = dir_a.to_string_lossy().into_owned();
        let started = Instant::now();
        run_pipeline(&cfg, &Stage::ALL).expect("default pipeline run A");
        let elapsed_a = started.elapsed();

        let mut cfg_b = PipelineConfig::default();
        cfg_b.out_dir = dir_b.to_string_lossy().into_owned();
        run_pipeline(&cfg_b, &Stage::ALL).expect("default pipeline run B");

        let text = std::fs::read_to_string(dir_a.join("report.json")).expect("report.json");
        let reports: Vec<EvalReport> = serde_json::from_str(&text).expect("report schema");

        DefaultRuns {
            dir_a,
            dir_b,
            elapsed_a,
            reports,
            _root: root,
        }
    })
}

fn report<'a>(runs: &'a DefaultRuns, dataset: &str) -> &'a EvalReport {
    runs.reports
        .iter()
        .find(|r| r.dataset == dataset)
        .unwrap_or_else(|| panic!("dataset {dataset} missing from report"))
}

// ------------------------------------------------- 1. accuracy and runtime

#[test]
fn end_to_end_default_run_accuracy_and_runtime() {
    let runs = default_runs();
    for ds in ["ohl", "ugc"] {
        let rep = report(runs, ds);
        let best = rep.best();
        let worst = best
            .records
            .iter()
            .map(|r| r.percent_error)
            .fold(0.0, f64::max);
        assert!(
            worst <= 3.0,
            "{ds}: best model {} has max test percent error {worst:.3}%, limit 3.0%",
            best.model
        );
    }
    assert!(
        runs.elapsed_a < Duration::from_secs(300),
        "full pipeline took {:.1}s, limit 300s",
        runs.elapsed_a.as_secs_f64()
    );
}

// ------------------------------------------------------- 2. method ranking

#[test]
fn method_ranking_expectations() {
    let runs = default_runs();

    // Trainer comparison at fixed feed-forward topology: the LM-trained net
    // must not be the worst of the three trainers on overhead-line faults.
    //
    // Known not to hold on the default data, by mechanism rather than by
    // seed luck: full-convergence LM interpolates the 32 noise-free training
    // samples (train RMSE around 1e-4 normalized, 10-40x below SCG/GDX) and
    // the interpolant's swing between the 5 km grid points dominates its
    // test error. A 40-seed survey ranks ff-lm 3/3 among feed-forward
    // trainers at every seed. The expectation would hold with an
    // early-stopping validation holdout or noisy targets; the training
    // protocol deliberately has neither, so this assertion stays red rather
    // than bending the protocol to pass it.
    let ohl = report(runs, "ohl");
    let ff_rmse = |name: &str| -> f64 {
        ohl.models
            .iter()
            .find(|m| m.model == name)
            .unwrap_or_else(|| panic!("model {name} missing from ohl report"))
            .test_rmse_norm
    };
    let lm = ff_rmse("ff-lm");
    let scg = ff_rmse("ff-scg");
    let gdx = ff_rmse("ff-gdx");
    let rank = 1 + [scg, gdx].iter().filter(|&&v| v < lm).count();
    assert!(
        rank <= 2,
        "ff-lm test RMSE {lm:.6} ranks {rank}/3 among trainers (ff-scg {scg:.6}, ff-gdx {gdx:.6})"
    );

    // On the cable dataset a plain linear-family fit must stay within 2x of
    // the overall best model.
    let ugc = report(runs, "ugc");
    let best = ugc.best().test_rmse_norm;
    let linear_best = ugc
        .models
        .iter()
        .filter(|m| m.model == "stepwise" || m.model == "linear")
        .map(|m| m.test_rmse_norm)
        .fold(f64::INFINITY, f64::min);
    assert!(
        linear_best <= 2.0 * best,
        "best linear-family test RMSE {linear_best:.6} exceeds 2x best {best:.6} on ugc"
    );
}

// ------------------------------------------------------ 3. metric exactness

#[test]
fn percent_error_matches_reference_rows_to_3dp() {
    // (actual km, predicted km, total km, expected percent error at table
    // precision). Each row is hand-checkable: |actual - predicted| / total
    // * 100, rounded to the digits shown.
    let rows: [(f64, f64, f64, f64); 18] = [
        (20.0, 19.1112, 200.0, 0.444),
        (45.0, 42.4392, 200.0, 1.280),
        (70.0, 70.3472, 200.0, 0.1736),
        (95.0, 94.8647, 200.0, 0.0676),
        (120.0, 119.8546, 200.0, 0.0727),
        (145.0, 143.1658, 200.0, 0.9171),
        (170.0, 169.8743, 200.0, 0.0628),
        (195.0, 195.0882, 200.0, 0.0441),
        (0.8, 0.835775, 10.0, 0.357),
        (1.8, 1.707975, 10.0, 0.921),
        (2.8, 2.687975, 10.0, 1.121),
        (3.8, 3.7623, 10.0, 0.377),
        (4.8, 4.817025, 10.0, 0.17),
        (5.8, 5.7321, 10.0, 0.679),
        (6.8, 6.720675, 10.0, 0.794),
        (7.8, 7.757025, 10.0, 0.43),
        (8.8, 8.66965, 10.0, 1.304),
        (9.8, 9.755, 10.0, 0.45),
    ];
    for (actual, predicted, total, expected) in rows {
        let got = percent_error(actual, predicted, total).expect("finite inputs");
        assert!(
            (got - expected).abs() <= 1e-3,
            "percent_error({actual}, {predicted}, {total}) = {got:.6}, expected {expected}"
        );
    }
}

// ---------------------------------------------------------- 4. relay oracle

#[test]
fn relay_measures_exact_impedance_on_homogeneous_line() {
    // Homogeneous overhead line with shunt capacitance off: for a bolted
    // single-line-to-ground fault the ground-loop measurement must equal
    // d * z1 exactly, independent of infeed from the far end.
    let params = SequenceParams {
        c1: 0.0,
        c0: 0.0,
        ..SequenceParams::overhead_default()
    };
    let spec = MixedLineSpec {
        nominal_kv: 154.0,
        frequency_hz: 50.0,
        sections: vec![LineSection {
            kind: LineKind::Overhead,
            length_km: 250.0,
            params,
        }],
        source_s: SourceSpec {
            emf_kv: num_complex::Complex64::new(154.0, 0.0),
            z1: num_complex::Complex64::new(0.5, 5.0),
            z0: num_complex::Complex64::new(1.0, 10.0),
        },
        source_r: Some(SourceSpec {
            emf_kv: num_complex::Complex64::from_polar(0.98 * 154.0, -5f64.to_radians()),
            z1: num_complex::Complex64::new(0.5, 5.0),
            z0: num_complex::Complex64::new(1.0, 10.0),
        }),
        load_mw: 20.0,
    };
    let z1 = params.z1_per_km();
    let k0 = k0_factor(z1, params.z0_per_km()).expect("k0");

    for k in 1..=10 {
        let d = 25.0 * k as f64;
        let ph = solve_slg_fault(
            &spec,
            &FaultScenario {
                section_index: 0,
                distance_km: d,
                zf_ohm: 0.0,
            },
        )
        .expect("fault solution");
        let meas = ground_loop_impedance(&ph, k0).expect("ground loop");
        let expect = z1 * d;
        let err = (num_complex::Complex64::new(meas.r, meas.x) - expect).norm() / expect.norm();
        assert!(
            err <= 1e-6,
            "distance {d} km: measured {:.9}+j{:.9}, expected {:.9}+j{:.9}, rel err {err:.3e}",
            meas.r,
            meas.x,
            expect.re,
            expect.im
        );
    }
}

// ------------------------------------------------------------ 5. GLCM suite

/// Independent pair-enumeration reference: collect every in-bounds ordered
/// pixel pair per offset, count, normalize per offset, then average.
fn naive_glcm(lm: &LevelMatrix, offsets: &[(i32, i32)], symmetric: bool) -> Vec<f64> {
    let l = lm.levels;
    let mut avg = vec![0.0f64; l * l];
    for &(drow, dcol) in offsets {
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for row in 0..lm.height {
            for col in 0..lm.width {
                let nr = row as i64 + drow as i64;
                let nc = col as i64 + dcol as i64;
                if nr < 0 || nc < 0 || nr >= lm.height as i64 || nc >= lm.width as i64 {
                    continue;
                }
                let a = lm.get(col, row) as usize;
                let b = lm.get(nc as usize, nr as usize) as usize;
                pairs.push((a, b));
                if symmetric {
                    pairs.push((b, a));
                }
            }
        }
        assert!(!pairs.is_empty(), "offset ({drow},{dcol}) has no pairs");
        let mut counts = vec![0u64; l * l];
        for (a, b) in pairs {
            counts[a * l + b] += 1;
        }
        let total: u64 = counts.iter().sum();
        for (acc, &c) in avg.iter_mut().zip(counts.iter()) {
            *acc += c as f64 / total as f64;
        }
    }
    for a in &mut avg {
        *a /= offsets.len() as f64;
    }
    avg
}

fn idx(name: &str) -> usize {
    FEATURE_NAMES
        .iter()
        .position(|&n| n == name)
        .unwrap_or_else(|| panic!("unknown feature {name}"))
}

#[test]
fn glcm_matches_naive_oracle_and_hand_values() {
    let offsets = [(0, 1), (-1, 1), (-1, 0), (-1, -1)];

    // Normalization, symmetry and exact oracle equivalence on random data.
    let mut rng = SplitMix64::new(0x61cc_0ffe);
    for case in 0..50 {
        let data: Vec<u8> = (0..64).map(|_| (rng.next_u64() % 8) as u8).collect();
        let lm = LevelMatrix {
            width: 8,
            height: 8,
            levels: 8,
            data,
        };
        let g = compute_glcm(&lm, &offsets, true).expect("glcm");
        let total: f64 = g.p.iter().sum();
        assert!((total - 1.0).abs() <= 1e-12, "case {case}: sum {total}");
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(g.at(i, j), g.at(j, i), "case {case}: p({i},{j}) asymmetric");
            }
        }
        let oracle = naive_glcm(&lm, &offsets, true);
        assert_eq!(g.p, oracle, "case {case}: differs from pair-enumeration oracle");
    }

    // Constant image: a single nonzero cell, energy 1, entropy 0.
    let flat = LevelMatrix {
        width: 8,
        height: 8,
        levels: 8,
        data: vec![3; 64],
    };
    let f = features20(&compute_glcm(&flat, &offsets, true).expect("glcm"));
    assert_eq!(f[idx("energy")], 1.0);
    assert_eq!(f[idx("entropy")], 0.0);
    assert_eq!(f[idx("max_probability")], 1.0);

    // 2x2 checkerboard, single horizontal offset: both pairs straddle the
    // two levels, so p(0,1) = p(1,0) = 0.5 and the hand values follow.
    let checker = LevelMatrix {
        width: 2,
        height: 2,
        levels: 2,
        data: vec![0, 1, 1, 0],
    };
    let g = compute_glcm(&checker, &[(0, 1)], true).expect("glcm");
    assert_eq!(g.at(0, 1), 0.5);
    assert_eq!(g.at(1, 0), 0.5);
    assert_eq!(g.at(0, 0), 0.0);
    let f = features20(&g);
    assert_eq!(f[idx("contrast")], 1.0);
    assert_eq!(f[idx("dissimilarity")], 1.0);
    assert_eq!(f[idx("energy")], 0.5);
}

// ----------------------------------------------- 6. numerical optimization

fn finite_difference_jacobian(
    spec: MlpSpec,
    theta: &DVector<f64>,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> DMatrix<f64> {
    let h = 1e-6;
    let n = x.nrows();
    let p = theta.len();
    let mut fd = DMatrix::zeros(n, p);
    let errors = |t: &DVector<f64>| -> DVector<f64> {
        let w = rxloc::mlp::MlpWeights::from_flat(spec, t).expect("shape");
        DVector::from_fn(n, |i, _| {
            let xi = DVector::from_fn(x.ncols(), |c, _| x[(i, c)]);
            y[(i, 0)] - forward(&w, &xi).expect("forward")[0]
        })
    };
    for j in 0..p {
        let mut plus = theta.clone();
        plus[j] += h;
        let mut minus = theta.clone();
        minus[j] -= h;
        let ep = errors(&plus);
        let em = errors(&minus);
        for i in 0..n {
            fd[(i, j)] = (ep[i] - em[i]) / (2.0 * h);
        }
    }
    fd
}

#[test]
fn optimizers_agree_with_finite_difference_oracles() {
    // Network Jacobian against central differences on ten random shapes.
    let mut rng = SplitMix64::new(0xacce_55ed);
    for case in 0..10 {
        let input = 1 + (rng.next_u64() % 4) as usize;
        let hidden = 1 + (rng.next_u64() % 4) as usize;
        let cascade = rng.next_u64() % 2 == 1;
        let spec = MlpSpec::new(input, hidden, 1, cascade);
        let w = init_weights(&spec, rng.next_u64());
        let theta = w.flatten();
        let n = 6;
        let x = DMatrix::from_fn(n, input, |_, _| rng.next_f64() * 2.0 - 1.0);
        let y = DMatrix::from_fn(n, 1, |_, _| rng.next_f64() * 2.0 - 1.0);
        let (jac, _) = jacobian(&w, &x, &y).expect("jacobian");
        let fd = finite_difference_jacobian(spec, &theta, &x, &y);
        for i in 0..n {
            for j in 0..theta.len() {
                let denom = fd[(i, j)].abs().max(1.0);
                let rel = (jac[(i, j)] - fd[(i, j)]).abs() / denom;
                assert!(
                    rel < 1e-4,
                    "case {case}: d e_{i}/d theta_{j} = {} vs fd {}",
                    jac[(i, j)],
                    fd[(i, j)]
                );
            }
        }
    }

    // LM drives a small net onto a noise-free linear target almost exactly,
    // and quickly: interpolation must reach MSE < 1e-10 within 25 epochs.
    let spec = MlpSpec::new(3, 6, 1, false);
    let mut rng = SplitMix64::new(0x11ea_41a6);
    let x = DMatrix::from_fn(12, 3, |_, _| rng.next_f64() * 2.0 - 1.0);
    let y = DMatrix::from_fn(12, 1, |r, _| {
        0.3 * x[(r, 0)] - 0.7 * x[(r, 1)] + 0.2 * x[(r, 2)] + 0.1
    });
    let mut cfg = TrainConfigNN::new(Algorithm::Lm, 99);
    cfg.max_epochs = 25;
    let res = train(&spec, &cfg, &x, &y).expect("lm training");
    assert!(
        res.final_mse < 1e-10,
        "LM reached MSE {} in {} epochs",
        res.final_mse,
        res.epochs_run
    );

    // A nearly noise-free GP must interpolate its own training targets.
    let mut rng = SplitMix64::new(0x9b5e_ed01);
    let xg = DMatrix::from_fn(10, 2, |_, _| rng.next_f64() * 4.0 - 2.0);
    let yg = DVector::from_fn(10, |r, _| (xg[(r, 0)] - 0.5 * xg[(r, 1)]).sin());
    let hyper = GprHyper {
        sigma_f: 1.0,
        length: 1.0,
        sigma_n: 1e-8,
        alpha: 1.0,
    };
    let gp = fit_gpr(&xg, &yg, GprKernel::SquaredExponential, &hyper, false).expect("gpr fit");
    for r in 0..10 {
        let xi: Vec<f64> = (0..2).map(|c| xg[(r, c)]).collect();
        let p = gp.predict(&xi).expect("predict");
        assert!(
            (p - yg[r]).abs() <= 1e-4,
            "gpr training point {r}: predicted {p}, target {}",
            yg[r]
        );
    }

    // Marginal-likelihood gradient against central differences in
    // (log sigma_f, log length, log sigma_n).
    let hyper = GprHyper {
        sigma_f: 1.3,
        length: 0.8,
        sigma_n: 0.2,
        alpha: 1.0,
    };
    let (_, grad) = se_log_marginal_gradient(&xg, &yg, &hyper).expect("lml gradient");
    let h: f64 = 1e-5;
    let lml = |sf: f64, ln: f64, sn: f64| -> f64 {
        let hy = GprHyper {
            sigma_f: sf,
            length: ln,
            sigma_n: sn,
            alpha: 1.0,
        };
        se_log_marginal_gradient(&xg, &yg, &hy).expect("lml").0
    };
    let fd = [
        (lml(hyper.sigma_f * h.exp(), hyper.length, hyper.sigma_n)
            - lml(hyper.sigma_f * (-h).exp(), hyper.length, hyper.sigma_n))
            / (2.0 * h),
        (lml(hyper.sigma_f, hyper.length * h.exp(), hyper.sigma_n)
            - lml(hyper.sigma_f, hyper.length * (-h).exp(), hyper.sigma_n))
            / (2.0 * h),
        (lml(hyper.sigma_f, hyper.length, hyper.sigma_n * h.exp())
            - lml(hyper.sigma_f, hyper.length, hyper.sigma_n * (-h).exp()))
            / (2.0 * h),
    ];
    for k in 0..3 {
        let rel = (grad[k] - fd[k]).abs() / fd[k].abs().max(1.0);
        assert!(
            rel < 1e-4,
            "lml gradient component {k}: analytic {} vs fd {}",
            grad[k],
            fd[k]
        );
    }
}

// ------------------------------------------------------------ 7. determinism

fn assert_same_bytes(a: &Path, b: &Path, rel: &str) {
    let ba = std::fs::read(a.join(rel)).unwrap_or_else(|e| panic!("{rel} in run A: {e}"));
    let bb = std::fs::read(b.join(rel)).unwrap_or_else(|e| panic!("{rel} in run B: {e}"));
    assert!(ba == bb, "{rel} differs between same-seed runs");
}

#[test]
fn same_seed_runs_are_byte_identical() {
    let runs = default_runs();
    assert_same_bytes(&runs.dir_a, &runs.dir_b, "features.csv");
    assert_same_bytes(&runs.dir_a, &runs.dir_b, "report.json");

    let models_a = runs.dir_a.join("models");
    let mut checked = 0usize;
    for ds in std::fs::read_dir(&models_a).expect("models dir") {
        let ds = ds.expect("entry");
        for f in std::fs::read_dir(ds.path()).expect("dataset dir") {
            let f = f.expect("entry");
            let rel = format!(
                "models/{}/{}",
                ds.file_name().to_string_lossy(),
                f.file_name().to_string_lossy()
            );
            assert_same_bytes(&runs.dir_a, &runs.dir_b, &rel);
            checked += 1;
        }
    }
    assert!(checked >= 2, "expected several model files, found {checked}");
}
