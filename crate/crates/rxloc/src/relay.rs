//! Ground-distance relay measurement model.
//!
//! Converts relay phasors to the ground-loop apparent impedance
//! `Z = va / (ia + k0*3*i0)` and builds the R-X trajectory a relay screen
//! would draw across fault inception. A full-cycle measurement window is
//! approximated by linearly blending pre-fault and during-fault phasors
//! while the window slides over the inception instant, which reproduces the
//! curved locus of real relay captures without waveform simulation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::simulator::{MixedLineSpec, RelayPhasors};

/// A point in the relay's R-X plane, Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpedancePoint {
    pub r: f64,
    pub x: f64,
}

/// Substitute for samples whose loop current vanishes. Finite, but far
/// outside any practical view window, so the rasterizer clips it away.
pub const CLAMP_POINT: ImpedancePoint = ImpedancePoint {
    r: 1.0e12,
    x: 1.0e12,
};

/// An ordered R-X trajectory sampled across fault inception.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceLocus {
    pub points: Vec<ImpedancePoint>,
    pub samples_per_cycle: usize,
    pub prefault_cycles: usize,
    pub fault_cycles: usize,
    /// Indices of samples that were clamped because the loop current
    /// vanished.
    pub clamped: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaySettings {
    /// Residual compensation factor applied to 3*i0.
    pub k0: Complex64,
    pub samples_per_cycle: usize,
    pub prefault_cycles: usize,
    pub fault_cycles: usize,
    /// Zone reaches as fractions of the total line positive-sequence
    /// impedance.
    pub zone1_reach: f64,
    pub zone2_reach: f64,
}

impl RelaySettings {
    /// Conventional settings computed from the line spec: the relay is set
    /// for the section it directly protects, so k0 comes from section 0.
    /// A cable section further along the line therefore violates the
    /// relay's homogeneity assumption, which is the measurement error this
    /// whole pipeline learns to undo.
    pub fn from_line(spec: &MixedLineSpec) -> Result<Self> {
        let p = spec
            .sections
            .first()
            .ok_or_else(|| Error::InvalidInput {
                what: "relay settings".into(),
                why: "line has no sections".into(),
            })?
            .params;
        Ok(RelaySettings {
            k0: k0_factor(p.z1_per_km(), p.z0_per_km())?,
            samples_per_cycle: 20,
            prefault_cycles: 2,
            fault_cycles: 4,
            zone1_reach: 0.8,
            zone2_reach: 1.2,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: &str| Error::InvalidInput {
            what: "relay settings".into(),
            why: why.into(),
        };
        if self.samples_per_cycle == 0 {
            return Err(bad("samples_per_cycle must be > 0"));
        }
        if self.prefault_cycles + self.fault_cycles == 0 {
            return Err(bad("window must span at least one cycle"));
        }
        if !(self.zone1_reach > 0.0 && self.zone2_reach > self.zone1_reach) {
            return Err(bad("reaches must satisfy 0 < zone1 < zone2"));
        }
        if !(self.k0.re.is_finite() && self.k0.im.is_finite()) {
            return Err(bad("k0 must be finite"));
        }
        Ok(())
    }
}

/// Residual compensation factor `(z0 - z1) / (3*z1)`.
pub fn k0_factor(z1: Complex64, z0: Complex64) -> Result<Complex64> {
    if z1.norm() == 0.0 {
        return Err(Error::InvalidInput {
            what: "k0 factor".into(),
            why: "z1 must be nonzero".into(),
        });
    }
    Ok((z0 - z1) / (z1 * 3.0))
}

/// Ground-loop apparent impedance for a phase-a-to-ground element.
pub fn ground_loop_impedance(ph: &RelayPhasors, k0: Complex64) -> Result<ImpedancePoint> {
    let i0 = (ph.ia + ph.ib + ph.ic) / 3.0;
    let loop_i = ph.ia + k0 * 3.0 * i0;
    if loop_i.norm() == 0.0 {
        return Err(Error::UndefinedImpedance);
    }
    let z = ph.va / loop_i;
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::UndefinedImpedance);
    }
    Ok(ImpedancePoint { r: z.re, x: z.im })
}

fn blend(pre: Complex64, fault: Complex64, alpha: f64) -> Complex64 {
    // Written as pre + alpha*(fault - pre) so equal phasors blend to
    // themselves exactly for every alpha.
    pre + (fault - pre) * alpha
}

/// The R-X trajectory drawn as a one-cycle measurement window slides over
/// fault inception. Sample `n` sits at `n / samples_per_cycle` cycles; the
/// window overlaps the fault by `alpha = clamp(cycles since inception, 0, 1)`
/// and every phasor is blended affinely by that overlap.
pub fn impedance_trajectory(
    pre: &RelayPhasors,
    fault: &RelayPhasors,
    s: &RelaySettings,
) -> Result<ImpedanceLocus> {
    s.validate()?;
    if !pre.is_finite() || !fault.is_finite() {
        return Err(Error::InvalidInput {
            what: "impedance trajectory".into(),
            why: "relay phasors must be finite".into(),
        });
    }
    let spc = s.samples_per_cycle;
    let total = (s.prefault_cycles + s.fault_cycles) * spc;
    let mut points = Vec::with_capacity(total);
    let mut clamped = Vec::new();
    for n in 0..total {
        let cycles_since = (n as f64 - (s.prefault_cycles * spc) as f64) / spc as f64;
        let alpha = cycles_since.clamp(0.0, 1.0);
        let ph = RelayPhasors {
            va: blend(pre.va, fault.va, alpha),
            vb: blend(pre.vb, fault.vb, alpha),
            vc: blend(pre.vc, fault.vc, alpha),
            ia: blend(pre.ia, fault.ia, alpha),
            ib: blend(pre.ib, fault.ib, alpha),
            ic: blend(pre.ic, fault.ic, alpha),
        };
        match ground_loop_impedance(&ph, s.k0) {
            Ok(p) => points.push(p),
            Err(Error::UndefinedImpedance) => {
                clamped.push(n);
                points.push(CLAMP_POINT);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ImpedanceLocus {
        points,
        samples_per_cycle: spc,
        prefault_cycles: s.prefault_cycles,
        fault_cycles: s.fault_cycles,
        clamped,
    })
}

/// Mho circle for zone 1 or 2: passes through the origin with its diameter
/// along `reach * Z1_total`. Returned as 360 evenly spaced points; the
/// renderer closes the polyline.
pub fn zone_characteristic(
    spec: &MixedLineSpec,
    s: &RelaySettings,
    zone: usize,
) -> Result<Vec<ImpedancePoint>> {
    let reach = match zone {
        1 => s.zone1_reach,
        2 => s.zone2_reach,
        _ => {
            return Err(Error::InvalidInput {
                what: "zone characteristic".into(),
                why: format!("zone {zone} is not one of 1, 2"),
            })
        }
    };
    let center = spec.z1_total() * reach / 2.0;
    let radius = center.norm();
    let n = 360usize;
    let mut pts = Vec::with_capacity(n);
    for k in 0..n {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        pts.push(ImpedancePoint {
            r: center.re + radius * theta.cos(),
            x: center.im + radius * theta.sin(),
        });
    }
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::simulator::{
        prefault_state, solve_slg_fault, FaultScenario, LineKind, LineSection, MixedLineSpec,
        SequenceParams,
    };

    fn point_norm(p: ImpedancePoint) -> f64 {
        (p.r * p.r + p.x * p.x).sqrt()
    }

    #[test]
    fn k0_algebraic_identities() {
        let z1 = Complex64::new(0.3, 2.0);
        assert!(k0_factor(z1, z1).unwrap().norm() < 1e-15);
        let k = k0_factor(z1, z1 * 4.0).unwrap();
        assert!((k - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let lossless = k0_factor(Complex64::new(0.0, 0.40), Complex64::new(0.0, 1.20)).unwrap();
        assert!((lossless.re - 2.0 / 3.0).abs() < 1e-12);
        assert!(lossless.im.abs() < 1e-12);
        assert!(k0_factor(Complex64::new(0.0, 0.0), z1).is_err());
    }

    #[test]
    fn balanced_phasors_reduce_to_phase_impedance() {
        let ph = prefault_state(&MixedLineSpec::default()).unwrap();
        let k0 = Complex64::new(0.7, -0.1);
        let with_k0 = ground_loop_impedance(&ph, k0).unwrap();
        let plain = ph.va / ph.ia;
        assert!((with_k0.r - plain.re).abs() <= 1e-9 * plain.norm());
        assert!((with_k0.x - plain.im).abs() <= 1e-9 * plain.norm());
    }

    /// Homogeneous path to the fault, bolted, no shunt capacitance: the
    /// compensated loop impedance is exactly d*z1, independent of sources,
    /// load and remote infeed.
    #[test]
    fn bolted_fault_measures_line_impedance_to_fault() {
        let mut spec = MixedLineSpec::default();
        for s in &mut spec.sections {
            s.params.c1 = 0.0;
            s.params.c0 = 0.0;
        }
        let p = spec.sections[0].params;
        let k0 = k0_factor(p.z1_per_km(), p.z0_per_km()).unwrap();
        let mut rng = SplitMix64::new(77);
        for _ in 0..10 {
            let d = rng.next_range(1.0, 200.0);
            let ph = solve_slg_fault(
                &spec,
                &FaultScenario {
                    section_index: 0,
                    distance_km: d,
                    zf_ohm: 0.0,
                },
            )
            .unwrap();
            let z = ground_loop_impedance(&ph, k0).unwrap();
            let want = p.z1_per_km() * d;
            let err = (Complex64::new(z.r, z.x) - want).norm() / want.norm();
            assert!(err < 1e-6, "d = {d}: ({}, {}) vs {want}", z.r, z.x);
        }
    }

    #[test]
    fn closer_faults_measure_smaller_impedance() {
        let spec = MixedLineSpec::default();
        let s = RelaySettings::from_line(&spec).unwrap();
        let z_at = |d: f64| {
            let ph = solve_slg_fault(
                &spec,
                &FaultScenario {
                    section_index: 0,
                    distance_km: d,
                    zf_ohm: 1.0,
                },
            )
            .unwrap();
            point_norm(ground_loop_impedance(&ph, s.k0).unwrap())
        };
        assert!(z_at(50.0) < z_at(130.0));
        assert!(z_at(10.0) < z_at(50.0));
    }

    #[test]
    fn zero_loop_current_is_undefined() {
        let zero = Complex64::new(0.0, 0.0);
        let ph = RelayPhasors {
            va: Complex64::new(1.0, 0.0),
            vb: zero,
            vc: zero,
            ia: zero,
            ib: zero,
            ic: zero,
        };
        assert!(matches!(
            ground_loop_impedance(&ph, zero),
            Err(Error::UndefinedImpedance)
        ));
    }

    #[test]
    fn trajectory_shape_and_endpoints() {
        let spec = MixedLineSpec::default();
        let s = RelaySettings::from_line(&spec).unwrap();
        let pre = prefault_state(&spec).unwrap();
        let fault = solve_slg_fault(
            &spec,
            &FaultScenario {
                section_index: 0,
                distance_km: 100.0,
                zf_ohm: 1.0,
            },
        )
        .unwrap();
        let locus = impedance_trajectory(&pre, &fault, &s).unwrap();
        assert_eq!(locus.points.len(), (2 + 4) * 20);
        assert!(locus.clamped.is_empty());

        let load = ground_loop_impedance(&pre, s.k0).unwrap();
        let end = ground_loop_impedance(&fault, s.k0).unwrap();
        let first = locus.points[0];
        let last = *locus.points.last().unwrap();
        assert!((first.r - load.r).abs() < 1e-9 && (first.x - load.x).abs() < 1e-9);
        assert!((last.r - end.r).abs() < 1e-9 && (last.x - end.x).abs() < 1e-9);

        // Pre-inception samples sit at the load point; the magnitude then
        // collapses monotonically onto the fault point.
        let mags: Vec<f64> = locus.points.iter().map(|&p| point_norm(p)).collect();
        for n in 0..mags.len() - 1 {
            assert!(
                mags[n + 1] <= mags[n] * (1.0 + 1e-9),
                "|Z| rises at sample {n}: {} -> {}",
                mags[n],
                mags[n + 1]
            );
        }
        assert!(mags[0] > 10.0 * mags[mags.len() - 1]);
    }

    #[test]
    fn identical_phasors_freeze_the_locus() {
        let spec = MixedLineSpec::default();
        let s = RelaySettings::from_line(&spec).unwrap();
        let pre = prefault_state(&spec).unwrap();
        let locus = impedance_trajectory(&pre, &pre, &s).unwrap();
        let p0 = locus.points[0];
        for p in &locus.points {
            assert_eq!(p.r, p0.r);
            assert_eq!(p.x, p0.x);
        }
    }

    #[test]
    fn locus_length_formula_holds_across_settings() {
        let spec = MixedLineSpec::default();
        let pre = prefault_state(&spec).unwrap();
        for (spc, pc, fc) in [(4usize, 1usize, 1usize), (20, 2, 4), (32, 0, 3), (7, 3, 0)] {
            let s = RelaySettings {
                samples_per_cycle: spc,
                prefault_cycles: pc,
                fault_cycles: fc,
                ..RelaySettings::from_line(&spec).unwrap()
            };
            let locus = impedance_trajectory(&pre, &pre, &s).unwrap();
            assert_eq!(locus.points.len(), (pc + fc) * spc);
        }
    }

    #[test]
    fn mho_circle_geometry() {
        let spec = MixedLineSpec::default();
        let s = RelaySettings::from_line(&spec).unwrap();
        let z1 = spec.z1_total();

        // Total positive-sequence impedance of the default line, frozen
        // from the section constants: 250 km overhead plus 10 km cable.
        assert!((z1 - Complex64::new(12.8, 102.2)).norm() < 1e-9);
        assert!((z1.norm() - 102.99844659022776).abs() < 1e-9);

        for (zone, reach) in [(1usize, s.zone1_reach), (2usize, s.zone2_reach)] {
            let pts = zone_characteristic(&spec, &s, zone).unwrap();
            assert_eq!(pts.len(), 360);
            let center = z1 * reach / 2.0;
            let radius = center.norm();
            // Every point sits on the circle; the origin and reach*Z1 lie
            // on it too (circle through origin).
            for p in &pts {
                let dist = (Complex64::new(p.r, p.x) - center).norm();
                assert!((dist - radius).abs() < 1e-9);
            }
            let origin_gap = (Complex64::new(pts[0].r, pts[0].x) - center).norm() - center.norm();
            assert!(origin_gap.abs() < 1e-9);
            let reach_point = z1 * reach;
            let on_circle = (reach_point - center).norm();
            assert!((on_circle - radius).abs() < 1e-9);
        }

        // Zone 1 diameter at 0.8 reach of |12.8 + j102.2|.
        let z1d = 0.8 * z1.norm();
        assert!((z1d - 82.39875727218221).abs() < 1e-9);

        assert!(zone_characteristic(&spec, &s, 3).is_err());
    }

    #[test]
    fn relay_settings_validation() {
        let spec = MixedLineSpec::default();
        let good = RelaySettings::from_line(&spec).unwrap();
        assert!(good.validate().is_ok());
        let mut bad = good;
        bad.zone2_reach = bad.zone1_reach;
        assert!(bad.validate().is_err());
        let mut bad = good;
        bad.samples_per_cycle = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn cable_fault_breaks_overhead_settings() {
        // A fault at the cable's far end measured with overhead k0 does not
        // land on the true impedance sum; the residual compensation is
        // wrong for the cable stretch. The mismatch is the learning signal.
        let mut spec = MixedLineSpec::default();
        for s in &mut spec.sections {
            s.params.c1 = 0.0;
            s.params.c0 = 0.0;
        }
        let s = RelaySettings::from_line(&spec).unwrap();
        let ph = solve_slg_fault(
            &spec,
            &FaultScenario {
                section_index: 1,
                distance_km: 10.0,
                zf_ohm: 0.0,
            },
        )
        .unwrap();
        let z = ground_loop_impedance(&ph, s.k0).unwrap();
        let true_path = spec.sections[0].params.z1_per_km() * 200.0
            + spec.sections[1].params.z1_per_km() * 10.0;
        let gap = (Complex64::new(z.r, z.x) - true_path).norm() / true_path.norm();
        assert!(gap > 1e-3, "cable stretch should skew the measurement");
    }

    #[test]
    fn single_overhead_section_keeps_identity_with_load_and_infeed() {
        // Same identity as the homogeneous oracle, but on a line that keeps
        // the default sources and load: remote infeed does not disturb the
        // compensated measurement of a bolted fault.
        let mut spec = MixedLineSpec::default();
        spec.sections = vec![LineSection {
            kind: LineKind::Overhead,
            length_km: 200.0,
            params: SequenceParams {
                c1: 0.0,
                c0: 0.0,
                ..SequenceParams::overhead_default()
            },
        }];
        let p = spec.sections[0].params;
        let k0 = k0_factor(p.z1_per_km(), p.z0_per_km()).unwrap();
        let ph = solve_slg_fault(
            &spec,
            &FaultScenario {
                section_index: 0,
                distance_km: 137.5,
                zf_ohm: 0.0,
            },
        )
        .unwrap();
        let z = ground_loop_impedance(&ph, k0).unwrap();
        let want = p.z1_per_km() * 137.5;
        let err = (Complex64::new(z.r, z.x) - want).norm() / want.norm();
        assert!(err < 1e-6, "({}, {}) vs {want}", z.r, z.x);
    }
}
