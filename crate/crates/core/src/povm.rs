//! Measurement operators of the detector on a discretized time axis.
//!
//! Input photons are represented by coefficients `c_j = sqrt(dt) u(s_j)` at
//! the cell midpoints `s_j`, so the Born value is `c^H M c` with `M` the
//! sampled kernel times `dt` (per photon). The outer time integrals over the
//! decay instants are done exactly on sub-intervals split at the cell edges and
//! midpoints; the factor lists below therefore reproduce the midpoint kernel
//! without further error. Carrier phases are dropped (rotating frame).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::MoleculeParams;
use crate::pulses::{Side, Signal};

/// Uniform grid of `n` cells on `[start, end]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub n: usize,
    pub step: f64,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, n: usize) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && end > start) || n == 0 {
            return Err(Error::InvalidGrid(format!("need end > start and n > 0, got [{start}, {end}] n={n}")));
        }
        Ok(Self {
            start,
            end,
            n,
            step: (end - start) / n as f64,
        })
    }

    /// Finest grid needed for the given total decay rates: `dt <= 1/(20 rate)`.
    pub fn resolving(start: f64, end: f64, rates: &[f64]) -> Result<Self> {
        let fastest = rates.iter().copied().fold(0.0, f64::max);
        let n = ((end - start) * 20.0 * fastest).ceil().max(1.0) as usize;
        Self::new(start, end, n)
    }

    pub fn check_resolution(&self, rate: f64) -> Result<()> {
        if self.step * 20.0 * rate > 1.0 + 1e-12 {
            return Err(Error::InvalidGrid(format!(
                "step {} exceeds 1/(20 x {rate}); use at least {} cells",
                self.step,
                ((self.end - self.start) * 20.0 * rate).ceil()
            )));
        }
        Ok(())
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        self.start + (j as f64 + 0.5) * self.step
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|j| self.midpoint(j))
    }

    /// Cell edges and midpoints in order: `2n + 1` points.
    fn split_points(&self) -> Vec<f64> {
        (0..=2 * self.n).map(|i| self.start + 0.5 * i as f64 * self.step).collect()
    }

    /// Coefficients `sqrt(dt) u(s_j)` of a photon envelope.
    pub fn sample(&self, u: &dyn Signal) -> DVector<Complex64> {
        let w = self.step.sqrt();
        DVector::from_iterator(self.n, self.midpoints().map(|s| u.value(s, Side::Right) * w))
    }
}

/// `W_t`: weight per unit time of a decay through the excited level at `t`.
pub fn weight_w(t: f64, start: f64, rate_in: f64, rate_out: f64) -> f64 {
    let total = rate_in + rate_out;
    if t <= start {
        return 0.0;
    }
    rate_in * rate_out / total * -(-total * (t - start)).exp_m1()
}

/// `W_{t,t'}` for the second transition, `t' <= t`.
pub fn weight_wtt(t: f64, t_prime: f64, rate_in: f64, rate_out: f64) -> f64 {
    weight_w(t, t_prime, rate_in, rate_out)
}

/// Exponential-kernel state on the samples in `(from, to)`, as unit-norm
/// time-bin coefficients. Falls back to the nearest single sample when no
/// midpoint lies in the interval.
fn kernel_state(grid: &TimeGrid, rate: f64, from: f64, to: f64) -> DVector<f64> {
    let mut v = DVector::zeros(grid.n);
    let mut any = false;
    for (j, s) in grid.midpoints().enumerate() {
        if s > from && s < to {
            v[j] = (0.5 * rate * (s - to)).exp();
            any = true;
        }
    }
    if !any {
        log::warn!("state support ({from}, {to}) narrower than one cell; using a single sample");
        let j = (((to - grid.start) / grid.step).floor() as isize).clamp(0, grid.n as isize - 1) as usize;
        v[j] = 1.0;
    }
    let norm = v.norm();
    v / norm
}

/// `phi_t`: state absorbed through the first transition by time `t`.
pub fn phi_state(t: f64, grid: &TimeGrid, params: &MoleculeParams) -> DVector<f64> {
    kernel_state(grid, params.gamma_first(), grid.start, t)
}

/// `psi_{t,t'}`: state of the second photon absorbed between `t'` and `t`.
pub fn psi_state(t: f64, t_prime: f64, grid: &TimeGrid, params: &MoleculeParams) -> DVector<f64> {
    kernel_state(grid, params.gamma_second(), t_prime.min(t), t.max(t_prime))
}

/// Weighted projector `weight |state><state|` on one photon.
#[derive(Clone, Debug)]
pub struct Factor {
    pub weight: f64,
    pub state: DVector<f64>,
}

/// Weighted product projector. The second-photon state lives on the samples
/// in `support` with its kernel anchored at `anchor`.
#[derive(Clone, Debug)]
pub struct PairFactor {
    pub weight: f64,
    /// Index into [`PairPovm::first`].
    pub first: usize,
    pub support: std::ops::Range<usize>,
    pub anchor: f64,
    norm: f64,
}

/// One-photon outcome operator (`F2` at the end of the grid).
#[derive(Clone, Debug)]
pub struct SinglePovm {
    pub grid: TimeGrid,
    pub factors: Vec<Factor>,
    pub matrix: DMatrix<f64>,
}

/// Two-photon outcome operator (`F4` at the end of the grid), on the product
/// of two copies of `grid`.
#[derive(Clone, Debug)]
pub struct PairPovm {
    pub grid: TimeGrid,
    pub first: Vec<DVector<f64>>,
    pub factors: Vec<PairFactor>,
    rate_second: f64,
    /// Only assembled when `grid.n <= DENSE_LIMIT`.
    pub dense: Option<DMatrix<f64>>,
}

pub const DENSE_LIMIT: usize = 64;

/// Sub-interval weights `rate_in rate_out int e^{-total (t - p_i)} dt` and the
/// number of midpoints below each sub-interval.
fn sub_intervals(grid: &TimeGrid, rate_in: f64, rate_out: f64) -> Vec<(f64, usize, f64)> {
    let total = rate_in + rate_out;
    let p = grid.split_points();
    p.windows(2)
        .enumerate()
        .map(|(i, w)| {
            let c = rate_in * rate_out * -(-total * (w[1] - w[0])).exp_m1() / total;
            (c, (i + 1) / 2, w[0])
        })
        .collect()
}

fn anchored(grid: &TimeGrid, rate: f64, range: std::ops::Range<usize>, anchor: f64) -> DVector<f64> {
    let mut v = DVector::zeros(grid.n);
    for j in range {
        v[j] = (0.5 * rate * (grid.midpoint(j) - anchor)).exp();
    }
    v
}

pub fn build_single(grid: &TimeGrid, params: &MoleculeParams) -> Result<SinglePovm> {
    params.clone().validate()?;
    grid.check_resolution(params.gamma_first())?;
    let rate = params.gamma_first();
    let mut factors = Vec::new();
    let mut matrix = DMatrix::zeros(grid.n, grid.n);
    for (c, below, anchor) in sub_intervals(grid, params.gamma1, params.gamma2) {
        if below == 0 || c == 0.0 {
            continue;
        }
        let a = anchored(grid, rate, 0..below, anchor);
        let norm2 = a.norm_squared();
        let weight = c * grid.step * norm2;
        let state = a / norm2.sqrt();
        matrix.ger(weight, &state, &state, 1.0);
        factors.push(Factor { weight, state });
    }
    Ok(SinglePovm {
        grid: grid.clone(),
        factors,
        matrix,
    })
}

/// Closed-form kernel of the one-photon operator at two times.
pub fn single_kernel(s: f64, s2: f64, end: f64, rate_in: f64, rate_out: f64) -> f64 {
    let g = rate_in + rate_out;
    rate_in * rate_out / g * ((-0.5 * g * (s - s2).abs()).exp() - (0.5 * g * (s + s2) - g * end).exp())
}

/// Closed-form trace of the one-photon operator on `[start, end]`.
pub fn single_trace(start: f64, end: f64, rate_in: f64, rate_out: f64) -> f64 {
    let g = rate_in + rate_out;
    let d = end - start;
    rate_in * rate_out / g * (d + (-g * d).exp_m1() / g)
}

/// Trace with the exponentially small term dropped.
pub fn single_trace_asymptotic(start: f64, end: f64, rate_in: f64, rate_out: f64) -> f64 {
    let g = rate_in + rate_out;
    rate_in * rate_out / g * (end - start - 1.0 / g)
}

pub fn build_pair(grid: &TimeGrid, params: &MoleculeParams) -> Result<PairPovm> {
    params.clone().validate()?;
    grid.check_resolution(params.gamma_first())?;
    grid.check_resolution(params.gamma_second())?;
    let (r1, r2) = (params.gamma_first(), params.gamma_second());
    let outer = sub_intervals(grid, params.gamma1, params.gamma2);
    let inner = sub_intervals(grid, params.gamma3, params.gamma4);
    let mut first = Vec::new();
    let mut factors = Vec::new();
    for (i, &(c, k1, anchor1)) in outer.iter().enumerate() {
        if k1 == 0 || c == 0.0 {
            continue;
        }
        let a = anchored(grid, r1, 0..k1, anchor1);
        let na = a.norm_squared();
        let idx = first.len();
        first.push(a / na.sqrt());
        for &(d, k2, anchor2) in &inner[i + 1..] {
            if k2 <= k1 || d == 0.0 {
                continue;
            }
            let nb: f64 = (k1..k2).map(|j| (r2 * (grid.midpoint(j) - anchor2)).exp()).sum();
            factors.push(PairFactor {
                weight: c * d * grid.step * grid.step * na * nb,
                first: idx,
                support: k1..k2,
                anchor: anchor2,
                norm: nb.sqrt(),
            });
        }
    }
    let dense = (grid.n <= DENSE_LIMIT).then(|| pair_dense(grid, params));
    Ok(PairPovm {
        grid: grid.clone(),
        first,
        factors,
        rate_second: r2,
        dense,
    })
}

/// Midpoint kernel of the two-photon operator, index `j * n + k` for first
/// photon sample `j` and second photon sample `k`.
fn pair_dense(grid: &TimeGrid, params: &MoleculeParams) -> DMatrix<f64> {
    let n = grid.n;
    let g1 = params.gamma_first();
    let s: Vec<f64> = grid.midpoints().collect();
    let h2 = grid.step * grid.step;
    let second = DMatrix::from_fn(n, n, |k, l| single_kernel(s[k], s[l], grid.end, params.gamma3, params.gamma4));
    DMatrix::from_fn(n * n, n * n, |row, col| {
        let (j, k) = (row / n, row % n);
        let (jp, kp) = (col / n, col % n);
        let a = s[j].max(s[jp]);
        let b = s[k].min(s[kp]);
        if a >= b {
            return 0.0;
        }
        let first = params.gamma1 * params.gamma2 / g1
            * ((0.5 * g1 * (s[j] + s[jp]) - g1 * a).exp() - (0.5 * g1 * (s[j] + s[jp]) - g1 * b).exp());
        h2 * first * second[(k, kp)]
    })
}

impl SinglePovm {
    pub fn trace(&self) -> f64 {
        self.factors.iter().map(|f| f.weight).sum()
    }

    /// `<u|Pi|u>` for time-bin coefficients `c`.
    pub fn born(&self, c: &DVector<Complex64>) -> f64 {
        let re = c.map(|z| z.re);
        let im = c.map(|z| z.im);
        re.dot(&(&self.matrix * &re)) + im.dot(&(&self.matrix * &im))
    }
}

impl PairFactor {
    pub fn second_state(&self, grid: &TimeGrid, rate: f64) -> DVector<f64> {
        anchored(grid, rate, self.support.clone(), self.anchor) / self.norm
    }
}

impl PairPovm {
    pub fn trace(&self) -> f64 {
        self.factors.iter().map(|f| f.weight).sum()
    }

    /// `<u_a (x) u_b|Pi|u_a (x) u_b>` contracted factor by factor.
    pub fn born(&self, first: &DVector<Complex64>, second: &DVector<Complex64>) -> f64 {
        let overlaps: Vec<f64> = self
            .first
            .iter()
            .map(|v| {
                let z: Complex64 = v.iter().zip(first.iter()).map(|(a, c)| c * a).sum();
                z.norm_sqr()
            })
            .collect();
        let g = self.rate_second;
        self.factors
            .iter()
            .map(|f| {
                let z: Complex64 = f
                    .support
                    .clone()
                    .map(|j| second[j] * (0.5 * g * (self.grid.midpoint(j) - f.anchor)).exp())
                    .sum();
                f.weight * overlaps[f.first] * (z / f.norm).norm_sqr()
            })
            .sum()
    }

    /// Born value from the assembled matrix; requires the dense path.
    pub fn born_dense(&self, first: &DVector<Complex64>, second: &DVector<Complex64>) -> Option<f64> {
        let m = self.dense.as_ref()?;
        let n = self.grid.n;
        let psi = DVector::from_fn(n * n, |r, _| first[r / n] * second[r % n]);
        let re = psi.map(|z| z.re);
        let im = psi.map(|z| z.im);
        Some(re.dot(&(m * &re)) + im.dot(&(m * &im)))
    }
}

/// Eigenvalues (descending) and matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub const ZERO_EIGENVALUE: f64 = 1e-12;

pub fn eigendecompose(m: &DMatrix<f64>) -> Result<Spectrum> {
    let asym = (m - m.transpose()).amax();
    if asym > 1e-8 {
        return Err(Error::Consistency(format!("operator not Hermitian: residual {asym:.3e}")));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, 1e-14, 0)
        .ok_or_else(|| Error::Consistency("eigen-solver did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order
        .iter()
        .map(|&i| {
            let v = eig.eigenvalues[i];
            if v.abs() < ZERO_EIGENVALUE {
                0.0
            } else {
                v
            }
        })
        .collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Spectrum { values, vectors })
}
