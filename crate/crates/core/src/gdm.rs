//! Generalized density matrices of the molecule driven by two single photons.
//!
//! Each block `rho[i, j]` is a 5x5 operator labelled by the photon content of
//! its ket and bra: vacuum, the first photon only, the second only, or both.
//! Ten blocks are stored; the rest follow by adjoint.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{max_abs, Jump, LevelMatrix, MoleculeParams, LEVELS};
use crate::ode::{self, End, OdeState, Samples, StepPlan};
use crate::pulses::{Side, Signal};

/// Photon content of one side of a block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sector {
    Vacuum,
    Alpha,
    Beta,
    Both,
}

impl Sector {
    pub const ALL: [Sector; 4] = [Sector::Both, Sector::Alpha, Sector::Beta, Sector::Vacuum];

    pub fn has_alpha(self) -> bool {
        matches!(self, Sector::Alpha | Sector::Both)
    }

    pub fn has_beta(self) -> bool {
        matches!(self, Sector::Beta | Sector::Both)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sector::Vacuum => "0",
            Sector::Alpha => "a",
            Sector::Beta => "b",
            Sector::Both => "2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GdmLabel {
    pub ket: Sector,
    pub bra: Sector,
}

impl GdmLabel {
    pub const fn new(ket: Sector, bra: Sector) -> Self {
        Self { ket, bra }
    }

    pub fn is_diagonal(self) -> bool {
        self.ket == self.bra
    }

    pub fn name(self) -> String {
        format!("{}{}", self.ket.symbol(), self.bra.symbol())
    }
}

use Sector::{Alpha as A, Beta as B, Both as T, Vacuum as Z};

/// Stored blocks, in storage order.
pub const STORED: [GdmLabel; 10] = [
    GdmLabel::new(T, T),
    GdmLabel::new(A, T),
    GdmLabel::new(B, T),
    GdmLabel::new(A, A),
    GdmLabel::new(B, B),
    GdmLabel::new(A, B),
    GdmLabel::new(Z, T),
    GdmLabel::new(Z, A),
    GdmLabel::new(Z, B),
    GdmLabel::new(Z, Z),
];

const I22: usize = 0;
const IA2: usize = 1;
const IB2: usize = 2;
const IAA: usize = 3;
const IBB: usize = 4;
const IAB: usize = 5;
const I02: usize = 6;
const I0A: usize = 7;
const I0B: usize = 8;
const I00: usize = 9;

fn slot(label: GdmLabel) -> Option<usize> {
    STORED.iter().position(|&l| l == label)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GdmState {
    pub blocks: [LevelMatrix; 10],
}

impl OdeState for GdmState {
    fn add_scaled(&mut self, a: f64, x: &Self) {
        for (m, d) in self.blocks.iter_mut().zip(&x.blocks) {
            m.zip_apply(d, |s, v| *s += v * a);
        }
    }
}

fn ground() -> LevelMatrix {
    let mut m = LevelMatrix::zeros();
    m[(0, 0)] = Complex64::new(1.0, 0.0);
    m
}

impl GdmState {
    pub fn zeros() -> Self {
        Self {
            blocks: [LevelMatrix::zeros(); 10],
        }
    }

    /// Diagonal blocks start in the ground level, off-diagonal blocks at zero.
    pub fn initial() -> Self {
        let mut s = Self::zeros();
        for (k, l) in STORED.iter().enumerate() {
            if l.is_diagonal() {
                s.blocks[k] = ground();
            }
        }
        s
    }

    /// Any block, taking the adjoint of a stored one when needed.
    pub fn get(&self, label: GdmLabel) -> LevelMatrix {
        if let Some(k) = slot(label) {
            self.blocks[k]
        } else {
            let k = slot(GdmLabel::new(label.bra, label.ket)).expect("every label or its mirror is stored");
            self.blocks[k].adjoint()
        }
    }

    pub fn block(&self, label: GdmLabel) -> &LevelMatrix {
        &self.blocks[slot(label).expect("stored label")]
    }

    pub fn physical(&self) -> &LevelMatrix {
        &self.blocks[I22]
    }

    /// Largest deviation from the trace rules (1 on the diagonal, 0 elsewhere).
    pub fn trace_drift(&self) -> f64 {
        STORED
            .iter()
            .zip(&self.blocks)
            .map(|(l, m)| {
                let target = if l.is_diagonal() { 1.0 } else { 0.0 };
                (m.trace() - Complex64::new(target, 0.0)).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        STORED
            .iter()
            .zip(&self.blocks)
            .filter(|(l, _)| l.is_diagonal())
            .map(|(_, m)| max_abs(&(m - m.adjoint())))
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over the diagonal blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        STORED
            .iter()
            .zip(&self.blocks)
            .filter(|(l, _)| l.is_diagonal())
            .map(|(_, m)| {
                let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
                SymmetricEigen::new(h).eigenvalues.min()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_difference(&self, other: &Self) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| max_abs(&(a - b)))
            .fold(0.0, f64::max)
    }
}

/// Physical population of level `k`, read from the two-photon block.
pub fn population(state: &GdmState, level: usize) -> f64 {
    state.blocks[I22][(level, level)].re.clamp(-1e-8, 1.0 + 1e-8)
}

/// `out += c * (m |to><from| - |to><from| m)`
fn add_commutator(out: &mut LevelMatrix, c: Complex64, m: &LevelMatrix, to: usize, from: usize) {
    for i in 0..LEVELS {
        out[(i, from)] += c * m[(i, to)];
        out[(to, i)] -= c * m[(from, i)];
    }
}

/// Decay part of the generator, `sum_X D_X[rho]`.
pub fn dissipate(jumps: &[Jump], rho: &LevelMatrix, out: &mut LevelMatrix) {
    for j in jumps {
        j.accumulate_dissipator(rho, out);
    }
}

/// The two input envelopes.
#[derive(Clone, Copy)]
pub struct Drive<'a> {
    pub alpha: &'a dyn Signal,
    pub beta: &'a dyn Signal,
}

impl<'a> Drive<'a> {
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.alpha.breakpoints();
        b.extend(self.beta.breakpoints());
        b
    }
}

/// Time derivative of the whole hierarchy.
pub fn gdm_rhs(t: f64, side: Side, state: &GdmState, drive: &Drive, params: &MoleculeParams) -> GdmState {
    let jumps = params.decay_channels();
    let mut d = GdmState::zeros();
    for (out, rho) in d.blocks.iter_mut().zip(&state.blocks) {
        dissipate(&jumps, rho, out);
    }
    let s1 = params.gamma1.sqrt();
    let s3 = params.gamma3.sqrt();
    let ua = drive.alpha.value(t, side) * s1;
    let ub = drive.beta.value(t, side) * s3;
    let (uac, ubc) = (ua.conj(), ub.conj());
    let b = &state.blocks;
    let g = |k: usize| b[k].adjoint();

    // u_a [m, |1><0|], u_b [m, |3><2|], u_a* [|0><1|, m], u_b* [|2><3|, m]
    let o = &mut d.blocks;
    if ua != Complex64::new(0.0, 0.0) {
        add_commutator(&mut o[I22], ua, &b[IB2], 1, 0);
        add_commutator(&mut o[I22], -uac, &g(IB2), 0, 1);
        add_commutator(&mut o[IA2], ua, &b[I02], 1, 0);
        add_commutator(&mut o[IA2], -uac, &b[IAB], 0, 1);
        add_commutator(&mut o[IB2], -uac, &b[IBB], 0, 1);
        add_commutator(&mut o[IAA], ua, &b[I0A], 1, 0);
        add_commutator(&mut o[IAA], -uac, &g(I0A), 0, 1);
        add_commutator(&mut o[IAB], ua, &b[I0B], 1, 0);
        add_commutator(&mut o[I02], -uac, &b[I0B], 0, 1);
        add_commutator(&mut o[I0A], -uac, &b[I00], 0, 1);
    }
    if ub != Complex64::new(0.0, 0.0) {
        add_commutator(&mut o[I22], ub, &b[IA2], 3, 2);
        add_commutator(&mut o[I22], -ubc, &g(IA2), 2, 3);
        add_commutator(&mut o[IA2], -ubc, &b[IAA], 2, 3);
        add_commutator(&mut o[IB2], ub, &b[I02], 3, 2);
        add_commutator(&mut o[IB2], -ubc, &g(IAB), 2, 3);
        add_commutator(&mut o[IBB], ub, &b[I0B], 3, 2);
        add_commutator(&mut o[IBB], -ubc, &g(I0B), 2, 3);
        add_commutator(&mut o[IAB], -ubc, &g(I0A), 2, 3);
        add_commutator(&mut o[I02], -ubc, &b[I0A], 2, 3);
        add_commutator(&mut o[I0B], -ubc, &b[I00], 2, 3);
    }
    d
}

/// Default step: a fortieth of the fastest rate in play.
pub fn default_dt(params: &MoleculeParams, fastest_drive_rate: f64) -> f64 {
    1.0 / (40.0 * params.max_rate().max(fastest_drive_rate))
}

pub const TRACE_ABORT: f64 = 1e-4;
pub const STEADY_EXCITED: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct GdmTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<GdmState>,
    pub steps: usize,
    pub dt: f64,
}

impl GdmTrajectory {
    pub fn final_state(&self) -> &GdmState {
        self.states.last().expect("nonempty")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    pub fn populations(&self, level: usize) -> Vec<f64> {
        self.states.iter().map(|s| population(s, level)).collect()
    }

    pub fn steady_populations(&self) -> [f64; LEVELS] {
        std::array::from_fn(|k| population(self.final_state(), k))
    }
}

impl From<Samples<GdmState>> for GdmTrajectory {
    fn from(s: Samples<GdmState>) -> Self {
        Self {
            times: s.times,
            states: s.states,
            steps: s.steps,
            dt: 0.0,
        }
    }
}

/// Fixed-step RK4 along `plan` from the standard initial condition.
pub fn integrate(plan: &StepPlan, drive: &Drive, params: &MoleculeParams, stride: usize) -> Result<GdmTrajectory> {
    integrate_from(plan, GdmState::initial(), drive, params, stride)
}

pub fn integrate_from(
    plan: &StepPlan,
    initial: GdmState,
    drive: &Drive,
    params: &MoleculeParams,
    stride: usize,
) -> Result<GdmTrajectory> {
    let samples = ode::integrate(
        plan,
        initial,
        stride,
        |t, side, y| gdm_rhs(t, side, y, drive, params),
        |t, y| {
            let drift = y.trace_drift();
            if !(drift <= TRACE_ABORT) {
                return Err(Error::Unstable { t, drift });
            }
            let excited = population(y, 1) + population(y, 3);
            Ok(excited.abs() < STEADY_EXCITED)
        },
    )?;
    let mut traj = GdmTrajectory::from(samples);
    traj.dt = plan.dt;
    Ok(traj)
}

/// Plan covering both pulses, either to a fixed time or to steady state.
pub fn plan(start: f64, end: End, dt: f64, drive: &Drive) -> Result<StepPlan> {
    StepPlan::new(start, end, dt, &drive.breakpoints())
}

/// Halves the step until the final populations move by less than `tol`.
pub fn integrate_refined(
    plan: &StepPlan,
    drive: &Drive,
    params: &MoleculeParams,
    stride: usize,
    tol: f64,
    max_halvings: usize,
) -> Result<GdmTrajectory> {
    let mut current = integrate(plan, drive, params, stride)?;
    let mut p = plan.clone();
    for _ in 0..max_halvings {
        p = p.refined();
        let next = integrate(&p, drive, params, 2 * stride)?;
        let a = current.steady_populations();
        let b = next.steady_populations();
        let change = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        current = next;
        if change < tol {
            break;
        }
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{PulseEnvelope, Silent};

    #[test]
    fn initial_state_rules() {
        let s = GdmState::initial();
        assert_eq!(population(&s, 0), 1.0);
        assert_eq!(population(&s, 4), 0.0);
        assert!(s.trace_drift() < 1e-15);
        assert_eq!(s.get(GdmLabel::new(T, A)), s.block(GdmLabel::new(A, T)).adjoint());
    }

    #[test]
    fn no_drive_is_stationary() {
        let params = MoleculeParams::uniform(1.0);
        let drive = Drive { alpha: &Silent, beta: &Silent };
        let d = gdm_rhs(0.0, Side::Right, &GdmState::initial(), &drive, &params);
        assert!(d.blocks.iter().all(|m| max_abs(m) == 0.0));
        let p = plan(0.0, End::At(5.0), 0.05, &drive).unwrap();
        let tr = integrate(&p, &drive, &params, 1).unwrap();
        assert_eq!(tr.final_state(), &GdmState::initial());
    }

    #[test]
    fn absorption_drive_term() {
        // d/dt rho_{0a} = sqrt(g1) u* [|0><1|, rho_00] at the initial state
        let params = MoleculeParams::new(1.3, 1.0, 1.0, 1.0);
        let u = PulseEnvelope::exponential(0.5, 0.0).unwrap();
        let drive = Drive { alpha: &u, beta: &Silent };
        let d = gdm_rhs(0.0, Side::Right, &GdmState::initial(), &drive, &params);
        let z = d.block(GdmLabel::new(Z, A));
        let c = 1.3f64.sqrt() * 0.5f64.sqrt();
        // [|0><1|, |0><0|] = -|0><1| ... = |0><1|0><0| - |0><0|0><1| = -|0><1|
        assert!((z[(0, 1)] - Complex64::new(-c, 0.0)).norm() < 1e-14);
        assert!(z.iter().filter(|v| v.norm() > 0.0).count() == 1);
    }

    #[test]
    fn finite_difference_matches_rhs() {
        let params = MoleculeParams::new(1.0, 0.8, 1.2, 0.6);
        let a = PulseEnvelope::gaussian(0.5, 0.0).unwrap();
        let b = PulseEnvelope::gaussian(0.7, 0.5).unwrap();
        let drive = Drive { alpha: &a, beta: &b };
        let p = plan(-3.0, End::At(1.0), 0.002, &drive).unwrap();
        let tr = integrate(&p, &drive, &params, 1).unwrap();
        let k = tr.times.len() / 2;
        let h = tr.times[k + 1] - tr.times[k];
        let mut fd = tr.states[k + 1].clone();
        fd.add_scaled(-1.0, &tr.states[k - 1]);
        let rhs = gdm_rhs(tr.times[k], Side::Right, &tr.states[k], &drive, &params);
        let err = fd
            .blocks
            .iter()
            .zip(&rhs.blocks)
            .map(|(x, y)| max_abs(&(x / Complex64::new(2.0 * h, 0.0) - y)))
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn invariants_along_trajectory() {
        let params = MoleculeParams::uniform(1.0);
        let a = PulseEnvelope::gaussian(0.5, 0.0).unwrap();
        let b = PulseEnvelope::gaussian(0.5, 1.0).unwrap().with_detuning(0.3);
        let drive = Drive { alpha: &a, beta: &b };
        let p = plan(-3.1, End::At(12.0), 0.01, &drive).unwrap();
        let tr = integrate(&p, &drive, &params, 5).unwrap();
        for s in &tr.states {
            assert!(s.trace_drift() < 1e-6);
            assert!(s.hermiticity_defect() < 1e-12);
            assert!(s.min_eigenvalue() > -1e-8);
        }
    }

    #[test]
    fn exponential_long_delay_limit() {
        let params = MoleculeParams::uniform(1.0);
        let a = PulseEnvelope::exponential(0.2, 0.0).unwrap();
        let b = PulseEnvelope::exponential(0.2, 60.0).unwrap();
        let drive = Drive { alpha: &a, beta: &b };
        let dt = default_dt(&params, 0.2);
        let after = b.support().1;
        let p = plan(0.0, End::Steady { after, limit: after + 200.0 }, dt, &drive).unwrap();
        let tr = integrate(&p, &drive, &params, 100).unwrap();
        let pop = tr.steady_populations();
        assert!((pop[4] - 100.0 / 121.0).abs() < 1e-3, "{}", pop[4]);
        assert!((pop[2] + pop[4] - 10.0 / 11.0).abs() < 1e-6);
    }

    #[test]
    fn first_photon_unaffected_by_second() {
        let params = MoleculeParams::uniform(1.0);
        let a = PulseEnvelope::gaussian(0.5, 0.0).unwrap();
        let (b1, b2) = (
            PulseEnvelope::gaussian(0.5, 3.0).unwrap(),
            PulseEnvelope::exponential(1.5, -0.5).unwrap(),
        );
        let mut first = Vec::new();
        for b in [&b1 as &dyn Signal, &b2, &Silent] {
            let drive = Drive { alpha: &a, beta: b };
            let p = plan(-3.1, End::At(40.0), 0.01, &drive).unwrap();
            let s = integrate(&p, &drive, &params, 1000).unwrap();
            let pop = s.steady_populations();
            first.push(pop[2] + pop[3] + pop[4]);
        }
        assert!((first[0] - first[2]).abs() < 1e-6 && (first[1] - first[2]).abs() < 1e-6, "{first:?}");
    }
}
