//! Virtual-cavity master equation on the 20-dimensional space
//! `|n1> (x) |n2> (x) |F_k>`, cavity 1 major, level minor.
//!
//! Each cavity starts with one photon and leaks it into the molecule through a
//! time-dependent coupling `g(t)`; the leak and the molecular transition share
//! one collapse operator, plus a cascade Hamiltonian term.

use nalgebra::{DMatrix, DVector, SMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{max_abs, MoleculeParams, LEVELS};
use crate::ode::{self, OdeState, StepPlan};
use crate::pulses::{Side, Signal};

pub const DIM: usize = 20;
pub type SysMatrix = SMatrix<Complex64, DIM, DIM>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Basis index of `|n1, n2> (x) |F_k>`.
pub const fn index(n1: usize, n2: usize, level: usize) -> usize {
    n1 * 10 + n2 * 5 + level
}

/// Sparse operator as `(row, col, value)` triplets.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseOp {
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOp {
    fn push(&mut self, r: usize, c: usize, v: Complex64) {
        if v != ZERO {
            self.entries.push((r, c, v));
        }
    }

    pub fn dense(&self) -> SysMatrix {
        let mut m = SysMatrix::zeros();
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    fn from_dense(m: &SysMatrix) -> Self {
        let mut op = Self::default();
        for c in 0..DIM {
            for r in 0..DIM {
                op.push(r, c, m[(r, c)]);
            }
        }
        op
    }

    /// `A^dag A`
    pub fn gram(&self) -> SysMatrix {
        let mut m = SysMatrix::zeros();
        for &(r1, c1, v1) in &self.entries {
            for &(r2, c2, v2) in &self.entries {
                if r1 == r2 {
                    m[(c1, c2)] += v1.conj() * v2;
                }
            }
        }
        m
    }

    /// `out += A rho A^dag`
    fn sandwich(&self, rho: &SysMatrix, out: &mut SysMatrix) {
        for &(r1, c1, v1) in &self.entries {
            for &(r2, c2, v2) in &self.entries {
                out[(r1, r2)] += v1 * rho[(c1, c2)] * v2.conj();
            }
        }
    }
}

/// Cavity annihilation operator (cavity 1 or 2) times `coef`, plus `extra`.
fn lowering(cavity: usize, coef: Complex64) -> SparseOp {
    let mut op = SparseOp::default();
    for other in 0..2 {
        for k in 0..LEVELS {
            let (from, to) = if cavity == 1 {
                (index(1, other, k), index(0, other, k))
            } else {
                (index(other, 1, k), index(other, 0, k))
            };
            op.push(to, from, coef);
        }
    }
    op
}

/// `coef |F_to><F_from|` on the level factor.
fn transition(to: usize, from: usize, coef: Complex64) -> SparseOp {
    let mut op = SparseOp::default();
    for n1 in 0..2 {
        for n2 in 0..2 {
            op.push(index(n1, n2, to), index(n1, n2, from), coef);
        }
    }
    op
}

fn join(mut a: SparseOp, b: SparseOp) -> SparseOp {
    a.entries.extend(b.entries);
    a
}

/// Collapse operators and Hamiltonians at one instant.
#[derive(Clone, Debug)]
pub struct CollapseSet {
    /// `g1* a1 + sqrt(g1)|F0><F1|`, `g2* a2 + sqrt(g3)|F2><F3|`, `sqrt(g2)|F2><F1|`, `sqrt(g4)|F4><F3|`.
    pub channels: [SparseOp; 4],
    /// Cascade coupling between each cavity and its transition.
    pub hamiltonian: SparseOp,
    /// `H - (i/2) sum X^dag X`.
    pub effective: SparseOp,
}

pub fn build_operators(params: &MoleculeParams, g1: Complex64, g2: Complex64) -> CollapseSet {
    let s1 = Complex64::new(params.gamma1.sqrt(), 0.0);
    let s2 = Complex64::new(params.gamma2.sqrt(), 0.0);
    let s3 = Complex64::new(params.gamma3.sqrt(), 0.0);
    let s4 = Complex64::new(params.gamma4.sqrt(), 0.0);
    let x1 = join(lowering(1, g1.conj()), transition(0, 1, s1));
    let x2 = join(lowering(2, g2.conj()), transition(2, 3, s3));
    let xg = transition(2, 1, s2);
    let xh = transition(4, 3, s4);

    // H = -(i/2) [ sqrt(g1) (g1* |F1><F0| a1 - h.c.) + sqrt(g3) (g2* |F3><F2| a2 - h.c.) ]
    let mut h = SysMatrix::zeros();
    for (cavity, rate, g, lo, hi) in [(1, s1, g1, 0usize, 1usize), (2, s3, g2, 2, 3)] {
        for other in 0..2 {
            // |hi>|cavity empty> <lo|<cavity full|
            let (r, c) = if cavity == 1 {
                (index(0, other, hi), index(1, other, lo))
            } else {
                (index(other, 0, hi), index(other, 1, lo))
            };
            let v = -0.5 * I * rate * g.conj();
            h[(r, c)] += v;
            h[(c, r)] += v.conj();
        }
    }
    let mut heff = h;
    for x in [&x1, &x2, &xg, &xh] {
        heff -= x.gram() * (0.5 * I);
    }
    CollapseSet {
        channels: [x1, x2, xg, xh],
        hamiltonian: SparseOp::from_dense(&h),
        effective: SparseOp::from_dense(&heff),
    }
}

/// `-i[H, rho] + sum D_X[rho]`.
pub fn master_rhs(rho: &SysMatrix, ops: &CollapseSet) -> SysMatrix {
    let mut out = SysMatrix::zeros();
    // -i (Heff rho - rho Heff^dag)
    for &(r, c, v) in &ops.effective.entries {
        let a = -I * v;
        let b = I * v.conj();
        for k in 0..DIM {
            out[(r, k)] += a * rho[(c, k)];
            out[(k, r)] += b * rho[(k, c)];
        }
    }
    for x in &ops.channels {
        x.sandwich(rho, &mut out);
    }
    out
}

/// Density matrix plus running integrals used by the flux balance:
/// `int P1`, `int P3`, `int <X1^dag X1>`, `int <X2^dag X2>`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemState {
    pub rho: SysMatrix,
    pub flux: [f64; 4],
}

impl OdeState for SystemState {
    fn add_scaled(&mut self, a: f64, x: &Self) {
        self.rho.zip_apply(&x.rho, |s, v| *s += v * a);
        for (f, d) in self.flux.iter_mut().zip(&x.flux) {
            *f += a * d;
        }
    }
}

impl SystemState {
    pub fn initial() -> Self {
        let mut rho = SysMatrix::zeros();
        let k = index(1, 1, 0);
        rho[(k, k)] = Complex64::new(1.0, 0.0);
        Self { rho, flux: [0.0; 4] }
    }

    pub fn population(&self, level: usize) -> f64 {
        let mut p = 0.0;
        for n1 in 0..2 {
            for n2 in 0..2 {
                let k = index(n1, n2, level);
                p += self.rho[(k, k)].re;
            }
        }
        p.clamp(-1e-8, 1.0 + 1e-8)
    }

    pub fn cavity_occupation(&self, cavity: usize) -> f64 {
        expectation(&number_operator(cavity), &self.rho).re
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }
}

pub fn expectation(op: &SysMatrix, rho: &SysMatrix) -> Complex64 {
    (op * rho).trace()
}

pub fn number_operator(cavity: usize) -> SysMatrix {
    let mut m = SysMatrix::zeros();
    for n1 in 0..2 {
        for n2 in 0..2 {
            let n = if cavity == 1 { n1 } else { n2 };
            for k in 0..LEVELS {
                let i = index(n1, n2, k);
                m[(i, i)] = Complex64::new(n as f64, 0.0);
            }
        }
    }
    m
}

pub fn level_projector(level: usize) -> SysMatrix {
    transition(level, level, Complex64::new(1.0, 0.0)).dense()
}

/// The two cavity couplings.
#[derive(Clone, Copy)]
pub struct Couplings<'a> {
    pub first: &'a dyn Signal,
    pub second: &'a dyn Signal,
}

impl<'a> Couplings<'a> {
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.first.breakpoints();
        b.extend(self.second.breakpoints());
        b
    }
}

fn state_rhs(t: f64, side: Side, y: &SystemState, couplings: &Couplings, params: &MoleculeParams) -> SystemState {
    let g1 = couplings.first.value(t, side);
    let g2 = couplings.second.value(t, side);
    let ops = build_operators(params, g1, g2);
    let rho = master_rhs(&y.rho, &ops);
    let mut out1 = SysMatrix::zeros();
    ops.channels[0].sandwich(&y.rho, &mut out1);
    let mut out2 = SysMatrix::zeros();
    ops.channels[1].sandwich(&y.rho, &mut out2);
    let p = |level: usize| {
        (0..4)
            .map(|s| {
                let k = index(s / 2, s % 2, level);
                y.rho[(k, k)].re
            })
            .sum::<f64>()
    };
    SystemState {
        rho,
        flux: [p(1), p(3), out1.trace().re, out2.trace().re],
    }
}

pub const TRACE_ABORT: f64 = 1e-4;
pub const STEADY_EXCITED: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct SystemTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<SystemState>,
    pub steps: usize,
    pub dt: f64,
}

impl SystemTrajectory {
    pub fn final_state(&self) -> &SystemState {
        self.states.last().expect("nonempty")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    pub fn steady_populations(&self) -> [f64; LEVELS] {
        std::array::from_fn(|k| self.final_state().population(k))
    }
}

fn check_state(t: f64, y: &SystemState) -> Result<bool> {
    let drift = (y.rho.trace() - Complex64::new(1.0, 0.0)).norm();
    if !(drift <= TRACE_ABORT) {
        return Err(Error::Unstable { t, drift });
    }
    Ok((y.population(1) + y.population(3)).abs() < STEADY_EXCITED)
}

/// RK4 on the 20x20 density matrix.
pub fn integrate(plan: &StepPlan, couplings: &Couplings, params: &MoleculeParams, stride: usize) -> Result<SystemTrajectory> {
    let samples = ode::integrate(
        plan,
        SystemState::initial(),
        stride,
        |t, side, y| state_rhs(t, side, y, couplings, params),
        check_state,
    )?;
    Ok(SystemTrajectory {
        times: samples.times,
        states: samples.states,
        steps: samples.steps,
        dt: plan.dt,
    })
}

pub fn plan(start: f64, end: ode::End, dt: f64, couplings: &Couplings) -> Result<StepPlan> {
    StepPlan::new(start, end, dt, &couplings.breakpoints())
}

/// Column-stacked superoperator of the generator (400 x 400).
pub fn superoperator(ops: &CollapseSet) -> DMatrix<Complex64> {
    let n = DIM;
    let mut l = DMatrix::<Complex64>::zeros(n * n, n * n);
    // vec(A X B) = (B^T (x) A) vec(X); column-stacking index = col * n + row
    for &(r, c, v) in &ops.effective.entries {
        for k in 0..n {
            // -i Heff rho: (I (x) Heff)
            l[(k * n + r, k * n + c)] += -I * v;
            // +i rho Heff^dag: (conj(Heff) (x) I)
            l[(r * n + k, c * n + k)] += I * v.conj();
        }
    }
    for x in &ops.channels {
        for &(r1, c1, v1) in &x.entries {
            for &(r2, c2, v2) in &x.entries {
                l[(r2 * n + r1, c2 * n + c1)] += v1 * v2.conj();
            }
        }
    }
    l
}

pub fn vectorize(rho: &SysMatrix) -> DVector<Complex64> {
    DVector::from_iterator(DIM * DIM, rho.iter().copied())
}

pub fn unvectorize(v: &DVector<Complex64>) -> SysMatrix {
    SysMatrix::from_iterator(v.iter().copied())
}

#[derive(Clone, Debug)]
struct VecState(DVector<Complex64>);

impl OdeState for VecState {
    fn add_scaled(&mut self, a: f64, x: &Self) {
        self.0.axpy(Complex64::new(a, 0.0), &x.0, Complex64::new(1.0, 0.0));
    }
}

/// Same dynamics through the 400-dimensional vectorized generator. The dense
/// generator is rebuilt only when a coupling value changes.
pub fn integrate_vectorized(
    plan: &StepPlan,
    couplings: &Couplings,
    params: &MoleculeParams,
    stride: usize,
) -> Result<Vec<(f64, SysMatrix)>> {
    let mut cache: Option<((Complex64, Complex64), DMatrix<Complex64>)> = None;
    let samples = ode::integrate(
        plan,
        VecState(vectorize(&SystemState::initial().rho)),
        stride,
        |t, side, y| {
            let key = (couplings.first.value(t, side), couplings.second.value(t, side));
            if cache.as_ref().map_or(true, |(k, _)| *k != key) {
                cache = Some((key, superoperator(&build_operators(params, key.0, key.1))));
            }
            let l = &cache.as_ref().expect("filled").1;
            VecState(l * &y.0)
        },
        |t, y| {
            let tr: Complex64 = (0..DIM).map(|k| y.0[k * DIM + k]).sum();
            let drift = (tr - Complex64::new(1.0, 0.0)).norm();
            if !(drift <= TRACE_ABORT) {
                return Err(Error::Unstable { t, drift });
            }
            Ok(false)
        },
    )?;
    Ok(samples.times.into_iter().zip(samples.states.iter().map(|s| unvectorize(&s.0))).collect())
}

/// Exact propagation under constant couplings, `exp(L t)`.
pub fn propagate_constant(params: &MoleculeParams, g1: Complex64, g2: Complex64, rho: &SysMatrix, duration: f64) -> SysMatrix {
    let l = superoperator(&build_operators(params, g1, g2)) * Complex64::new(duration, 0.0);
    unvectorize(&(l.exp() * vectorize(rho)))
}

/// Integrated channel fluxes and the four balance residuals.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxReport {
    pub int_p1: f64,
    pub int_p3: f64,
    pub out_first: f64,
    pub out_second: f64,
    /// `1 - <a_k^dag a_k>` at the end: the photon budget each cavity released.
    pub released: [f64; 2],
    pub p2: f64,
    pub p4: f64,
    pub residuals: [f64; 4],
    pub flagged: bool,
}

pub const FLUX_TOLERANCE: f64 = 1e-4;

pub fn flux_balance_report(traj: &SystemTrajectory, params: &MoleculeParams) -> FluxReport {
    let s = traj.final_state();
    let [int_p1, int_p3, out_first, out_second] = s.flux;
    let released = [1.0 - s.cavity_occupation(1), 1.0 - s.cavity_occupation(2)];
    let (p2, p4) = (s.population(2), s.population(4));
    let residuals = [
        (out_first + params.gamma2 * int_p1 - released[0]).abs(),
        (params.gamma2 * int_p1 - (p2 + p4)).abs(),
        (params.gamma4 * int_p3 - p4).abs(),
        (out_second + params.gamma4 * int_p3 - released[1]).abs(),
    ];
    let flagged = residuals.iter().any(|r| !(*r < FLUX_TOLERANCE));
    if flagged {
        log::warn!("flux balance residuals {residuals:?} exceed {FLUX_TOLERANCE}");
    }
    FluxReport {
        int_p1,
        int_p3,
        out_first,
        out_second,
        released,
        p2,
        p4,
        residuals,
        flagged,
    }
}

/// Largest anti-Hermitian entry.
pub fn hermiticity_defect(rho: &SysMatrix) -> f64 {
    max_abs(&(rho - rho.adjoint()))
}

pub fn min_eigenvalue(rho: &SysMatrix) -> f64 {
    let h = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    nalgebra::SymmetricEigen::new(h).eigenvalues.min()
}
