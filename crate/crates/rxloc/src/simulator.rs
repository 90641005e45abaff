//! Quasi-steady phasor model of a mixed overhead/underground transmission
//! line.
//!
//! The line is a chain of series sections, each a nominal-pi equivalent with
//! positive- and zero-sequence per-km parameters. Both ends may carry a
//! Thevenin source; the receiving end may carry a constant-impedance load.
//! Pre-fault conditions are a balanced positive-sequence nodal solve;
//! single-line-to-ground faults connect the positive, negative and zero
//! sequence networks in series through `3*zf` at the fault node and solve
//! the coupled system directly.
//!
//! The relay is fixed at the sending end (bus 0). All solutions are pure
//! functions of the spec, so scenarios can be evaluated in any order.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Per-unit-length sequence parameters of one line section.
///
/// Resistances and reactances are Ω/km at system frequency; shunt
/// capacitances are nF/km.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceParams {
    pub r1: f64,
    pub x1: f64,
    pub r0: f64,
    pub x0: f64,
    pub c1: f64,
    pub c0: f64,
}

impl SequenceParams {
    /// Default 154 kV single-circuit overhead-line constants.
    pub fn overhead_default() -> Self {
        SequenceParams {
            r1: 0.05,
            x1: 0.40,
            r0: 0.20,
            x0: 1.20,
            c1: 9.0,
            c0: 6.0,
        }
    }

    /// Default 154 kV XLPE cable constants. The cable reactance is roughly
    /// half the overhead value and the capacitance more than thirty times
    /// larger, which is what breaks a relay set for overhead constants.
    pub fn cable_default() -> Self {
        SequenceParams {
            r1: 0.03,
            x1: 0.22,
            r0: 0.10,
            x0: 0.60,
            c1: 300.0,
            c0: 300.0,
        }
    }

    pub fn z1_per_km(&self) -> Complex64 {
        Complex64::new(self.r1, self.x1)
    }

    pub fn z0_per_km(&self) -> Complex64 {
        Complex64::new(self.r0, self.x0)
    }

    fn validate(&self) -> Result<()> {
        let bad = |why: &str| Error::InvalidInput {
            what: "sequence parameters".into(),
            why: why.into(),
        };
        if !(self.r1 >= 0.0) {
            return Err(bad("r1 must be >= 0"));
        }
        if !(self.x1 > 0.0) {
            return Err(bad("x1 must be > 0"));
        }
        if !(self.x0 > 0.0) {
            return Err(bad("x0 must be > 0"));
        }
        if !(self.c1 >= 0.0 && self.c0 >= 0.0) {
            return Err(bad("shunt capacitance must be >= 0"));
        }
        if self.x0 < self.x1 {
            return Err(bad("x0 must not be below x1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineKind {
    Overhead,
    Cable,
}

impl LineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LineKind::Overhead => "ohl",
            LineKind::Cable => "ugc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSection {
    pub kind: LineKind,
    pub length_km: f64,
    pub params: SequenceParams,
}

/// Thevenin equivalent of everything behind one line terminal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    /// Line-to-line EMF phasor in kV.
    pub emf_kv: Complex64,
    pub z1: Complex64,
    pub z0: Complex64,
}

impl SourceSpec {
    fn validate(&self) -> Result<()> {
        let bad = |why: &str| Error::InvalidInput {
            what: "source".into(),
            why: why.into(),
        };
        if !(self.emf_kv.norm() > 0.0) {
            return Err(bad("emf magnitude must be > 0"));
        }
        if self.z1.re < 0.0 {
            return Err(bad("Re(z1) must be >= 0"));
        }
        if self.z1.norm() == 0.0 || self.z0.norm() == 0.0 {
            return Err(bad("source impedances must be nonzero"));
        }
        Ok(())
    }
}

/// The simulated network: sections in order from the relay bus, sources at
/// both ends (receiving optional) and a fixed load at the receiving end.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedLineSpec {
    pub nominal_kv: f64,
    pub frequency_hz: f64,
    pub sections: Vec<LineSection>,
    pub source_s: SourceSpec,
    pub source_r: Option<SourceSpec>,
    pub load_mw: f64,
}

impl Default for MixedLineSpec {
    /// The 154 kV, 50 Hz study system: 200 km overhead, 10 km cable,
    /// 50 km overhead, 20 MW load, stiff sources at both ends
    /// (1.0 pu sending, 0.98 pu at -5 degrees receiving).
    fn default() -> Self {
        let kv = 154.0;
        let recv = Complex64::from_polar(0.98 * kv, (-5.0f64).to_radians());
        MixedLineSpec {
            nominal_kv: kv,
            frequency_hz: 50.0,
            sections: vec![
                LineSection {
                    kind: LineKind::Overhead,
                    length_km: 200.0,
                    params: SequenceParams::overhead_default(),
                },
                LineSection {
                    kind: LineKind::Cable,
                    length_km: 10.0,
                    params: SequenceParams::cable_default(),
                },
                LineSection {
                    kind: LineKind::Overhead,
                    length_km: 50.0,
                    params: SequenceParams::overhead_default(),
                },
            ],
            source_s: SourceSpec {
                emf_kv: Complex64::new(kv, 0.0),
                z1: Complex64::new(0.5, 5.0),
                z0: Complex64::new(1.0, 10.0),
            },
            source_r: Some(SourceSpec {
                emf_kv: recv,
                z1: Complex64::new(0.5, 5.0),
                z0: Complex64::new(1.0, 10.0),
            }),
            load_mw: 20.0,
        }
    }
}

impl MixedLineSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Error::InvalidInput {
            what: "line spec".into(),
            why,
        };
        if self.sections.is_empty() {
            return Err(bad("at least one section is required".into()));
        }
        if !(self.frequency_hz > 0.0) {
            return Err(bad("frequency must be > 0".into()));
        }
        if !(self.nominal_kv > 0.0) {
            return Err(bad("nominal kV must be > 0".into()));
        }
        if self.load_mw < 0.0 {
            return Err(bad("load must be >= 0".into()));
        }
        for (i, s) in self.sections.iter().enumerate() {
            if !(s.length_km > 0.0) {
                return Err(bad(format!("section {i} length must be > 0")));
            }
            s.params.validate()?;
        }
        self.source_s.validate()?;
        if let Some(sr) = &self.source_r {
            sr.validate()?;
        }
        Ok(())
    }

    pub fn total_length_km(&self) -> f64 {
        self.sections.iter().map(|s| s.length_km).sum()
    }

    /// Total positive-sequence series impedance of the line.
    pub fn z1_total(&self) -> Complex64 {
        self.sections
            .iter()
            .map(|s| s.params.z1_per_km() * s.length_km)
            .sum()
    }

    /// Distance from the relay bus to a point inside a section.
    pub fn absolute_km(&self, section: usize, distance_km: f64) -> f64 {
        self.sections[..section]
            .iter()
            .map(|s| s.length_km)
            .sum::<f64>()
            + distance_km
    }

    fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency_hz
    }

    /// Phase-to-neutral EMF of a source, volts.
    fn emf_phase_v(source: &SourceSpec) -> Complex64 {
        source.emf_kv * 1.0e3 / 3.0_f64.sqrt()
    }

    /// Constant-impedance equivalent of the receiving-end load, Ω per phase.
    fn load_ohm(&self) -> Option<f64> {
        if self.load_mw > 0.0 {
            Some((self.nominal_kv * 1.0e3).powi(2) / (self.load_mw * 1.0e6))
        } else {
            None
        }
    }
}

/// One dataset row's physical cause: a phase-a-to-ground fault at a point
/// on one section. Only a-g faults are modeled. The distance is measured
/// from the section's sending end and lives in `(0, length]`; a fault at
/// exactly the section end sits on the joint node and is attributed to the
/// earlier section, so every fault point has one representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultScenario {
    pub section_index: usize,
    pub distance_km: f64,
    pub zf_ohm: f64,
}

impl FaultScenario {
    pub fn validate(&self, spec: &MixedLineSpec) -> Result<()> {
        if self.section_index >= spec.sections.len() {
            return Err(Error::InvalidInput {
                what: "fault scenario".into(),
                why: format!("section {} does not exist", self.section_index),
            });
        }
        let len = spec.sections[self.section_index].length_km;
        if !(self.distance_km > 0.0 && self.distance_km <= len) {
            return Err(Error::ScenarioOutOfBounds {
                index: 0,
                section: self.section_index,
                distance_km: self.distance_km,
                section_km: len,
            });
        }
        if !(self.zf_ohm >= 0.0) {
            return Err(Error::InvalidInput {
                what: "fault scenario".into(),
                why: "fault impedance must be >= 0".into(),
            });
        }
        Ok(())
    }
}

/// Three-phase voltage and current phasors at the relay bus. Volts and
/// amperes, phase-to-ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayPhasors {
    pub va: Complex64,
    pub vb: Complex64,
    pub vc: Complex64,
    pub ia: Complex64,
    pub ib: Complex64,
    pub ic: Complex64,
}

impl RelayPhasors {
    pub fn is_finite(&self) -> bool {
        [self.va, self.vb, self.vc, self.ia, self.ib, self.ic]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// The rotation operator a = 1∠120°.
pub fn alpha() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0)
}

/// (zero, positive, negative) components of three phase quantities.
pub fn phase_to_sequence(
    pa: Complex64,
    pb: Complex64,
    pc: Complex64,
) -> (Complex64, Complex64, Complex64) {
    let a = alpha();
    let a2 = a * a;
    let z = (pa + pb + pc) / 3.0;
    let p = (pa + a * pb + a2 * pc) / 3.0;
    let n = (pa + a2 * pb + a * pc) / 3.0;
    (z, p, n)
}

/// Inverse of [`phase_to_sequence`].
pub fn sequence_to_phase(
    zero: Complex64,
    pos: Complex64,
    neg: Complex64,
) -> (Complex64, Complex64, Complex64) {
    let a = alpha();
    let a2 = a * a;
    let pa = zero + pos + neg;
    let pb = zero + a2 * pos + a * neg;
    let pc = zero + a * pos + a2 * neg;
    (pa, pb, pc)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Seq {
    Pos,
    Neg,
    Zero,
}

/// Bus/branch layout of the line with an optional fault node. The faulted
/// section keeps its pi charging at the section ends; only its series
/// branch is divided at the fault point, so an open-circuited fault leaves
/// the network identical to the pre-fault one.
struct Topology {
    n_bus: usize,
    fault_bus: Option<usize>,
    /// (from, to, section index, length of this series piece)
    branches: Vec<(usize, usize, usize, f64)>,
    /// Half-charging points: (bus, section index, full section length).
    shunts: Vec<(usize, usize, f64)>,
}

impl Topology {
    fn build(spec: &MixedLineSpec, fault: Option<(usize, f64)>) -> Topology {
        let mut branches = Vec::new();
        let mut shunts = Vec::new();
        let (split, fault_bus) = match fault {
            Some((k, d)) if d < spec.sections[k].length_km => (Some((k, d)), None),
            Some((k, _)) => (None, Some(k + 1)), // fault on the joint node
            None => (None, None),
        };
        let mut bus = 0usize;
        let mut fault_bus = fault_bus;
        for (k, sec) in spec.sections.iter().enumerate() {
            let from = bus;
            if let Some((fk, d)) = split {
                if fk == k {
                    let f = bus + 1;
                    branches.push((from, f, k, d));
                    branches.push((f, f + 1, k, sec.length_km - d));
                    shunts.push((from, k, sec.length_km));
                    shunts.push((f + 1, k, sec.length_km));
                    fault_bus = Some(f);
                    bus = f + 1;
                    continue;
                }
            }
            branches.push((from, from + 1, k, sec.length_km));
            shunts.push((from, k, sec.length_km));
            shunts.push((from + 1, k, sec.length_km));
            bus += 1;
        }
        Topology {
            n_bus: bus + 1,
            fault_bus,
            branches,
            shunts,
        }
    }

    fn last_bus(&self) -> usize {
        self.n_bus - 1
    }
}

fn series_z(params: &SequenceParams, seq: Seq, len: f64) -> Complex64 {
    match seq {
        Seq::Pos | Seq::Neg => params.z1_per_km() * len,
        Seq::Zero => params.z0_per_km() * len,
    }
}

/// Half-pi charging admittance for `len` km of a section.
fn shunt_half_y(params: &SequenceParams, seq: Seq, len: f64, omega: f64) -> Complex64 {
    let c_nf = match seq {
        Seq::Pos | Seq::Neg => params.c1,
        Seq::Zero => params.c0,
    };
    Complex64::new(0.0, omega * c_nf * 1.0e-9 * len / 2.0)
}

fn source_z(source: &SourceSpec, seq: Seq) -> Complex64 {
    match seq {
        Seq::Pos | Seq::Neg => source.z1,
        Seq::Zero => source.z0,
    }
}

/// Assemble one sequence network's admittance matrix and (for the positive
/// sequence) its Norton source injections.
fn assemble(
    spec: &MixedLineSpec,
    topo: &Topology,
    seq: Seq,
) -> (DMatrix<Complex64>, Vec<Complex64>) {
    let n = topo.n_bus;
    let omega = spec.omega();
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    let mut inj = vec![Complex64::new(0.0, 0.0); n];

    for &(a, b, k, len) in &topo.branches {
        let z = series_z(&spec.sections[k].params, seq, len);
        let yb = Complex64::new(1.0, 0.0) / z;
        y[(a, a)] += yb;
        y[(b, b)] += yb;
        y[(a, b)] -= yb;
        y[(b, a)] -= yb;
    }
    for &(bus, k, len) in &topo.shunts {
        y[(bus, bus)] += shunt_half_y(&spec.sections[k].params, seq, len, omega);
    }

    let ys = Complex64::new(1.0, 0.0) / source_z(&spec.source_s, seq);
    y[(0, 0)] += ys;
    if seq == Seq::Pos {
        inj[0] += MixedLineSpec::emf_phase_v(&spec.source_s) * ys;
    }
    let last = topo.last_bus();
    if let Some(sr) = &spec.source_r {
        let yr = Complex64::new(1.0, 0.0) / source_z(sr, seq);
        y[(last, last)] += yr;
        if seq == Seq::Pos {
            inj[last] += MixedLineSpec::emf_phase_v(sr) * yr;
        }
    }
    if seq != Seq::Zero {
        if let Some(zl) = spec.load_ohm() {
            y[(last, last)] += Complex64::new(1.0 / zl, 0.0);
        }
    }
    (y, inj)
}

/// Current flowing from bus 0 into the line in one sequence network:
/// the first series branch plus the sending-end charging.
fn relay_branch_current(
    spec: &MixedLineSpec,
    topo: &Topology,
    seq: Seq,
    v: &[Complex64],
) -> Complex64 {
    let omega = spec.omega();
    let mut i = Complex64::new(0.0, 0.0);
    for &(a, b, k, len) in &topo.branches {
        if a == 0 {
            let z = series_z(&spec.sections[k].params, seq, len);
            i += (v[0] - v[b]) / z;
        }
    }
    for &(bus, k, len) in &topo.shunts {
        if bus == 0 {
            i += v[0] * shunt_half_y(&spec.sections[k].params, seq, len, omega);
        }
    }
    i
}

fn solve_complex(y: DMatrix<Complex64>, rhs: Vec<Complex64>) -> Result<Vec<Complex64>> {
    let n = rhs.len();
    let b = nalgebra::DVector::from_vec(rhs);
    let lu = y.lu();
    let x = lu
        .solve(&b)
        .ok_or_else(|| Error::DegenerateNetwork("singular admittance matrix".into()))?;
    let out: Vec<Complex64> = x.iter().copied().collect();
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::DegenerateNetwork(
            "non-finite nodal solution".into(),
        ));
    }
    debug_assert_eq!(out.len(), n);
    Ok(out)
}

/// Balanced pre-fault solution at the relay bus.
pub fn prefault_state(spec: &MixedLineSpec) -> Result<RelayPhasors> {
    spec.validate()?;
    let topo = Topology::build(spec, None);
    let (y, inj) = assemble(spec, &topo, Seq::Pos);
    let v = solve_complex(y, inj)?;
    let v1 = v[0];
    let i1 = relay_branch_current(spec, &topo, Seq::Pos, &v);
    let zero = Complex64::new(0.0, 0.0);
    let (va, vb, vc) = sequence_to_phase(zero, v1, zero);
    let (ia, ib, ic) = sequence_to_phase(zero, i1, zero);
    Ok(RelayPhasors {
        va,
        vb,
        vc,
        ia,
        ib,
        ic,
    })
}

/// During-fault relay phasors for a phase-a-to-ground fault.
///
/// The three sequence networks are solved as one linear system coupled by
/// the fault constraint `v1 + v2 + v0 = 3*zf*i_f` at the fault node.
pub fn solve_slg_fault(spec: &MixedLineSpec, scen: &FaultScenario) -> Result<RelayPhasors> {
    spec.validate()?;
    scen.validate(spec)?;

    let topo = Topology::build(spec, Some((scen.section_index, scen.distance_km)));
    let f = topo
        .fault_bus
        .expect("fault topology always carries a fault bus");
    let b = topo.n_bus;
    let dim = 3 * b + 1;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    let mut rhs = vec![Complex64::new(0.0, 0.0); dim];

    // Row blocks: positive [0, b), negative [b, 2b), zero [2b, 3b).
    for (blk, seq) in [(0, Seq::Pos), (1, Seq::Neg), (2, Seq::Zero)] {
        let (y, inj) = assemble(spec, &topo, seq);
        let off = blk * b;
        for r in 0..b {
            for c in 0..b {
                m[(off + r, off + c)] = y[(r, c)];
            }
            rhs[off + r] = inj[r];
        }
        // Fault current leaves each sequence network at the fault node.
        m[(off + f, dim - 1)] = Complex64::new(1.0, 0.0);
    }
    // v1(F) + v2(F) + v0(F) - 3*zf*if = 0
    let last = dim - 1;
    m[(last, f)] = Complex64::new(1.0, 0.0);
    m[(last, b + f)] = Complex64::new(1.0, 0.0);
    m[(last, 2 * b + f)] = Complex64::new(1.0, 0.0);
    m[(last, last)] = Complex64::new(-3.0 * scen.zf_ohm, 0.0);

    let sol = solve_complex(m, rhs)?;
    let v_pos = &sol[0..b];
    let v_neg = &sol[b..2 * b];
    let v_zero = &sol[2 * b..3 * b];

    let v1 = v_pos[0];
    let v2 = v_neg[0];
    let v0 = v_zero[0];
    let i1 = relay_branch_current(spec, &topo, Seq::Pos, v_pos);
    let i2 = relay_branch_current(spec, &topo, Seq::Neg, v_neg);
    let i0 = relay_branch_current(spec, &topo, Seq::Zero, v_zero);

    let (va, vb, vc) = sequence_to_phase(v0, v1, v2);
    let (ia, ib, ic) = sequence_to_phase(i0, i1, i2);
    let ph = RelayPhasors {
        va,
        vb,
        vc,
        ia,
        ib,
        ic,
    };
    if !ph.is_finite() {
        return Err(Error::DegenerateNetwork("non-finite relay phasors".into()));
    }
    Ok(ph)
}

/// Evenly spaced fault scenarios along one section:
/// `distance = start + k*step` for `k in 0..count`.
pub fn scenario_grid(
    spec: &MixedLineSpec,
    section_index: usize,
    start_km: f64,
    step_km: f64,
    count: usize,
    zf_ohm: f64,
) -> Result<Vec<FaultScenario>> {
    spec.validate()?;
    if section_index >= spec.sections.len() {
        return Err(Error::InvalidInput {
            what: "scenario grid".into(),
            why: format!("section {section_index} does not exist"),
        });
    }
    let len = spec.sections[section_index].length_km;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let d = start_km + k as f64 * step_km;
        if !(d > 0.0 && d <= len) {
            return Err(Error::ScenarioOutOfBounds {
                index: k,
                section: section_index,
                distance_km: d,
                section_km: len,
            });
        }
        out.push(FaultScenario {
            section_index,
            distance_km: d,
            zf_ohm,
        });
    }
    Ok(out)
}
