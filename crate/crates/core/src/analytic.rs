//! Spectral detection probabilities and nested time-quadrature oracles.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::MoleculeParams;
use crate::ode::{End, StepPlan};
use crate::pulses::{PulseEnvelope, Side, Signal, SpectralAmplitude, SpectralGrid};
use crate::quadrature::{self, Tolerance};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transition {
    /// `0 -> 1 -> 2`, driven by the first photon.
    First,
    /// `2 -> 3 -> 4`, driven by the second photon.
    Second,
}

/// Amplitude for an excitation to pass from the input mode through the
/// excited level into the shelving channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transmission {
    pub rate_in: f64,
    pub rate_out: f64,
    /// Resonance in the rotating frame (zero for resonant carriers).
    pub center: f64,
}

impl Transmission {
    pub fn of(params: &MoleculeParams, which: Transition) -> Self {
        let (rate_in, rate_out) = match which {
            Transition::First => (params.gamma1, params.gamma2),
            Transition::Second => (params.gamma3, params.gamma4),
        };
        Self {
            rate_in,
            rate_out,
            center: 0.0,
        }
    }

    pub fn at(&self, w: f64) -> Complex64 {
        Complex64::new((self.rate_in * self.rate_out).sqrt(), 0.0)
            / Complex64::new(0.5 * (self.rate_in + self.rate_out), -(w - self.center))
    }

    pub fn total_rate(&self) -> f64 {
        self.rate_in + self.rate_out
    }

    /// `4 g_in g_out / (g_in + g_out)^2`, the peak of `|T|^2`.
    pub fn peak(&self) -> f64 {
        4.0 * self.rate_in * self.rate_out / self.total_rate().powi(2)
    }
}

pub fn transmission(params: &MoleculeParams, which: Transition, w: f64) -> Complex64 {
    Transmission::of(params, which).at(w)
}

fn line_tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-13,
        rel: 1e-12,
        max_intervals: 20_000,
    }
}

/// `integral |T(w)|^2 |u(w)|^2 dw` by adaptive quadrature on the whole line.
pub fn p_absorb(pulse: &PulseEnvelope, params: &MoleculeParams, which: Transition) -> Result<f64> {
    let t = Transmission::of(params, which);
    let scale = (0.5 * t.total_rate()).max(pulse.rate_scale());
    let center = pulse.detuning;
    let (v, err, ok) = quadrature::integrate_line_real(
        |w| t.at(w).norm_sqr() * pulse.spectrum_at(w).norm_sqr(),
        center,
        scale,
        line_tolerance(),
    );
    if !ok || !v.is_finite() {
        return Err(Error::Consistency(format!("absorption quadrature did not converge (error {err:.3e})")));
    }
    Ok(v.clamp(0.0, 1.0))
}

pub fn p_alpha(pulse: &PulseEnvelope, params: &MoleculeParams) -> Result<f64> {
    p_absorb(pulse, params, Transition::First)
}

pub fn p_beta(pulse: &PulseEnvelope, params: &MoleculeParams) -> Result<f64> {
    p_absorb(pulse, params, Transition::Second)
}

/// Closed form for an exponential pulse on resonance.
pub fn p_exponential(kappa: f64, rate_in: f64, rate_out: f64) -> f64 {
    4.0 * rate_in * rate_out / ((rate_in + rate_out) * (kappa + rate_in + rate_out))
}

pub const COVERAGE_LIMIT: f64 = 1e-6;

/// Grid quadrature of `|T|^2 |u|^2` with a tail estimate beyond the grid ends.
pub fn p_absorb_on_grid(spectrum: &SpectralAmplitude, params: &MoleculeParams, which: Transition) -> Result<f64> {
    let t = Transmission::of(params, which);
    let g = &spectrum.grid;
    let f: Vec<f64> = g
        .points()
        .zip(&spectrum.values)
        .map(|(w, u)| t.at(w).norm_sqr() * u.norm_sqr())
        .collect();
    let n = f.len();
    let body = g.step * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n - 1]));
    // integrand decays at least like w^-4 past the grid
    let tail = (f[0] + f[n - 1]) * g.max_frequency() / 3.0;
    if tail > COVERAGE_LIMIT {
        return Err(Error::GridCoverage(tail));
    }
    Ok(body)
}

/// Default spectral grid for a pulse pair: wide enough for the slowest
/// Lorentzian tails, fine enough for the narrowest feature and the time span.
pub fn default_grid(params: &MoleculeParams, pulses: &[&PulseEnvelope]) -> Result<SpectralGrid> {
    let mut fast = params.max_rate();
    let mut slow = params.min_rate();
    let mut detune: f64 = 0.0;
    for p in pulses {
        fast = fast.max(p.rate_scale());
        slow = slow.min(p.rate_scale());
        detune = detune.max(p.detuning.abs());
    }
    let span = time_span(params, pulses);
    let step = (slow / 40.0).min(2.0 * PI / (1.5 * span));
    let half_span = 60.0 * fast + detune;
    SpectralGrid::covering(2.0 * half_span, step)
}

/// Time window holding the pulses and the decay that follows them.
fn time_span(params: &MoleculeParams, pulses: &[&PulseEnvelope]) -> f64 {
    let slowest = params.gamma_first().min(params.gamma_second());
    let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in pulses {
        let (s, e) = p.support();
        a = a.min(s);
        b = b.max(e);
    }
    (b - a) + 40.0 / slowest
}

fn fft_size(n: usize) -> usize {
    n.next_power_of_two()
}

/// `c[k] = sum_m a[m + k] conj(a[m])` for `k = -(n-1)..=(n-1)`, returned with
/// lag `k` at index `k + n - 1`.
fn autocorrelation(a: &[Complex64]) -> Vec<Complex64> {
    let n = a.len();
    let l = fft_size(2 * n);
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = a.iter().copied().chain(std::iter::repeat(ZERO)).take(l).collect();
    planner.plan_fft_forward(l).process(&mut buf);
    for v in &mut buf {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(l).process(&mut buf);
    let scale = 1.0 / l as f64;
    (0..2 * n - 1)
        .map(|i| {
            let k = i as i64 - (n as i64 - 1);
            buf[k.rem_euclid(l as i64) as usize] * scale
        })
        .collect()
}

/// Full linear convolution of `a` and `b`.
fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let out_len = a.len() + b.len() - 1;
    let l = fft_size(out_len);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(l);
    let mut fa: Vec<Complex64> = a.iter().copied().chain(std::iter::repeat(ZERO)).take(l).collect();
    let mut fb: Vec<Complex64> = b.iter().copied().chain(std::iter::repeat(ZERO)).take(l).collect();
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    planner.plan_fft_inverse(l).process(&mut fa);
    let scale = 1.0 / l as f64;
    fa.truncate(out_len);
    fa.iter_mut().for_each(|v| *v *= scale);
    fa
}

/// Fourier transform of `gamma2 P1(t)` on the lag grid `x_k = k dw`,
/// `k = -half..=half`, from the discrete autocorrelation of `T1 u`.
pub fn f1_on_grid(pulse: &PulseEnvelope, params: &MoleculeParams, grid: &SpectralGrid) -> Result<Vec<Complex64>> {
    let spec = pulse.spectrum(grid)?;
    let t1 = Transmission::of(params, Transition::First);
    let a: Vec<Complex64> = grid.points().zip(&spec.values).map(|(w, u)| t1.at(w) * u).collect();
    let corr = autocorrelation(&a);
    let n = grid.len();
    let c = grid.step / (2.0 * PI).sqrt();
    // lags -half..=half sit at indices n-1-half ..= n-1+half
    Ok((0..n).map(|j| corr[n - 1 - grid.half + j] * c).collect())
}

/// `(2 pi)^(-1/2) integral T1(w + x) u(w + x) conj(T1(x) u(x)) dx` at one frequency.
pub fn f1_spectrum(pulse: &PulseEnvelope, params: &MoleculeParams, w: f64) -> Result<Complex64> {
    let t1 = Transmission::of(params, Transition::First);
    let scale = (0.5 * t1.total_rate()).max(pulse.rate_scale());
    let est = quadrature::integrate_line(
        |x| t1.at(w + x) * pulse.spectrum_at(w + x) * (t1.at(x) * pulse.spectrum_at(x)).conj(),
        pulse.detuning - 0.5 * w,
        scale,
        line_tolerance(),
    );
    if !est.converged {
        return Err(Error::Consistency(format!("F1 quadrature did not converge (error {:.3e})", est.error)));
    }
    Ok(est.value / (2.0 * PI).sqrt())
}

pub const PV_TOLERANCE: f64 = 1e-5;
const PV_MAX_SWEEPS: usize = 40;

/// Decomposition of the two-photon detection probability.
#[derive(Clone, Debug, PartialEq)]
pub struct Overlap {
    pub p_alpha: f64,
    pub p_beta: f64,
    /// Cross term; `P_overlap = P_alpha P_beta / 2 + p_ab`.
    pub p_ab: f64,
    pub p_overlap: f64,
    /// Steady two-photon detection probability `P_alpha P_beta - P_overlap`.
    pub rho2424_inf: f64,
    pub epsilon: f64,
    pub sweeps: usize,
}

/// The overlap term by double spectral quadrature with a regularized
/// principal value, swept in `epsilon` until converged.
pub fn p_overlap(
    alpha: &PulseEnvelope,
    beta: &PulseEnvelope,
    params: &MoleculeParams,
    grid: Option<&SpectralGrid>,
) -> Result<Overlap> {
    let grid = match grid {
        Some(g) => {
            let span = time_span(params, &[alpha, beta]);
            if 2.0 * PI / g.step < span {
                return Err(Error::SpectralGridTooCoarse(format!(
                    "step {} aliases a time span of {span:.3}",
                    g.step
                )));
            }
            g.clone()
        }
        None => default_grid(params, &[alpha, beta])?,
    };
    let pa = p_alpha(alpha, params)?;
    let pb = p_beta(beta, params)?;
    let f1 = f1_on_grid(alpha, params, &grid)?;
    let m = grid.half as i64;
    let dw = grid.step;
    // u_beta on the doubled grid -2 half ..= 2 half
    let ub_wide: Vec<Complex64> = (-2 * m..=2 * m).map(|n| beta.spectrum_at(n as f64 * dw)).collect();
    let t2 = Transmission::of(params, Transition::Second);
    let weight: Vec<Complex64> = grid
        .points()
        .map(|w| beta.spectrum_at(w).conj() * t2.at(w))
        .collect();
    let prefactor = (params.gamma3 * params.gamma4).sqrt() / ((2.0 * PI).sqrt() * t2.total_rate());
    let i = Complex64::new(0.0, 1.0);
    // The node at x = 0 drops out of the regularized sum once eps << dw; its
    // limit is the derivative of u_b(w - x) F1(x) there, added back per point.
    let f1_zero = f1[grid.half];
    let f1_slope = (f1[grid.half + 1] - f1[grid.half - 1]) / (2.0 * dw);
    let delta = 1e-5 * beta.rate_scale().min(1.0);
    let centre: Vec<Complex64> = grid
        .points()
        .map(|w| {
            let slope = (beta.spectrum_at(w + delta) - beta.spectrum_at(w - delta)) / (2.0 * delta);
            (beta.spectrum_at(w) * f1_slope - slope * f1_zero) / i
        })
        .collect();

    let evaluate = |eps: f64| -> f64 {
        let kernel: Vec<Complex64> = f1
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let x = (k as i64 - m) as f64 * dw;
                let pv = x / (x * x + eps * eps);
                f * pv / i
            })
            .collect();
        // J(w_j) = dw sum_k u_b(w_j - x_k) K(x_k); w_j - x_k = (j - k) dw
        let conv = convolve(&ub_wide, &kernel);
        // ub_wide index p - k holds frequency (p - k - 2m) dw, which must equal
        // w_j - x_k = (j - k) dw, so row j sits at p = j + 2m
        let mut acc = ZERO;
        for (j, wgt) in weight.iter().enumerate() {
            let p = j + 2 * grid.half;
            acc += wgt * (conv[p] + centre[j]) * dw;
        }
        prefactor * 2.0 * (acc * dw).re
    };

    let mut eps = dw;
    let mut prev = evaluate(eps);
    let mut prev_extrap = f64::NAN;
    let mut last_change = f64::INFINITY;
    for sweep in 1..=PV_MAX_SWEEPS {
        eps *= 0.5;
        let cur = evaluate(eps);
        let extrap = cur + (cur - prev) / 3.0;
        last_change = (cur - prev).abs();
        if last_change < PV_TOLERANCE && (extrap - prev_extrap).abs() < PV_TOLERANCE {
            let p_ab = extrap;
            let p_overlap = 0.5 * pa * pb + p_ab;
            return Ok(Overlap {
                p_alpha: pa,
                p_beta: pb,
                p_ab,
                p_overlap,
                rho2424_inf: pa * pb - p_overlap,
                epsilon: eps,
                sweeps: sweep,
            });
        }
        prev = cur;
        prev_extrap = extrap;
    }
    Err(Error::PrincipalValue(last_change))
}

/// Populations from the nested time-domain solution on one node set.
#[derive(Clone, Debug)]
pub struct NestedProfile {
    pub times: Vec<f64>,
    /// Single-photon occupation of the first shelving level.
    pub rho_a2a2: Vec<f64>,
    /// Two-photon occupation of the second shelving level.
    pub rho_2424: Vec<f64>,
}

fn nested_on(plan: &StepPlan, alpha: &dyn Signal, beta: &dyn Signal, params: &MoleculeParams) -> NestedProfile {
    let g1 = params.gamma_first();
    let g2 = params.gamma_second();
    let n = plan.nodes.len();
    let mut a2a2 = Vec::with_capacity(n);
    let mut f4s = Vec::with_capacity(n);
    let (mut amp, mut q, mut b, mut p3, mut f4) = (ZERO, 0.0, ZERO, 0.0, 0.0);
    a2a2.push(0.0);
    f4s.push(0.0);
    for w in plan.nodes.windows(2) {
        let (t, h) = (w[0], w[1] - w[0]);
        let ua0 = alpha.value(t, Side::Right);
        let ua1 = alpha.value(w[1], Side::Left);
        let ub0 = beta.value(t, Side::Right);
        let ub1 = beta.value(w[1], Side::Left);
        // amplitude in level 1 before the gamma1 factor
        let e1 = (-0.5 * g1 * h).exp();
        let amp1 = amp * e1 + (ua0 * e1 + ua1) * (0.5 * h);
        let p1a = params.gamma1 * amp.norm_sqr();
        let p1b = params.gamma1 * amp1.norm_sqr();
        let q1 = q + params.gamma2 * 0.5 * h * (p1a + p1b);
        // second-photon amplitude, sourced by the first shelving occupation
        let e2 = (-0.5 * g2 * h).exp();
        let b1 = b * e2 + (ub0 * q * e2 + ub1 * q1) * (0.5 * h);
        let s0 = 2.0 * params.gamma3 * (ub0.conj() * b).re;
        let s1 = 2.0 * params.gamma3 * (ub1.conj() * b1).re;
        let e3 = (-g2 * h).exp();
        let p3n = p3 * e3 + (s0 * e3 + s1) * (0.5 * h);
        f4 += params.gamma4 * 0.5 * h * (p3 + p3n);
        amp = amp1;
        q = q1;
        b = b1;
        p3 = p3n;
        a2a2.push(q);
        f4s.push(f4);
    }
    NestedProfile {
        times: plan.nodes.clone(),
        rho_a2a2: a2a2,
        rho_2424: f4s,
    }
}

/// Value with a Richardson error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

pub const NODE_BUDGET: usize = 20_000_000;

/// Nested quadrature on `[start, end]` with step `h`, Richardson-extrapolated
/// against a half-step run. Reported at the coarse nodes.
pub fn nested_profile(
    alpha: &dyn Signal,
    beta: &dyn Signal,
    params: &MoleculeParams,
    start: f64,
    end: f64,
    h: f64,
) -> Result<(NestedProfile, f64)> {
    let mut bps = alpha.breakpoints();
    bps.extend(beta.breakpoints());
    let coarse = StepPlan::new(start, End::At(end), h, &bps)?;
    if 3 * coarse.nodes.len() > NODE_BUDGET {
        log::warn!("nested quadrature on {} nodes exceeds the budget", coarse.nodes.len());
    }
    let fine = coarse.refined();
    let a = nested_on(&coarse, alpha, beta, params);
    let b = nested_on(&fine, alpha, beta, params);
    let mut err: f64 = 0.0;
    let mut out = a.clone();
    for k in 0..a.times.len() {
        let (x1, y1) = (a.rho_a2a2[k], b.rho_a2a2[2 * k]);
        let (x2, y2) = (a.rho_2424[k], b.rho_2424[2 * k]);
        out.rho_a2a2[k] = (4.0 * y1 - x1) / 3.0;
        out.rho_2424[k] = (4.0 * y2 - x2) / 3.0;
        err = err.max((y1 - x1).abs() / 3.0).max((y2 - x2).abs() / 3.0);
    }
    if err > 1e-6 {
        log::warn!("coarse nested quadrature grid: error estimate {err:.3e}");
    }
    Ok((out, err))
}

fn oracle_step(params: &MoleculeParams, pulses: &[&PulseEnvelope]) -> f64 {
    let fast = pulses.iter().map(|p| p.rate_scale()).fold(params.max_rate(), f64::max);
    (1.0 / (40.0 * fast)).min(0.02)
}

fn oracle_window(params: &MoleculeParams, pulses: &[&PulseEnvelope]) -> (f64, f64) {
    let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in pulses {
        let (s, e) = p.support();
        a = a.min(s);
        b = b.max(e);
    }
    let slowest = params.gamma_first().min(params.gamma_second());
    (a, b + 40.0 / slowest)
}

/// Occupation of the first shelving level after one photon, at time `t`
/// (`f64::INFINITY` for the steady value).
pub fn rho_a2a2_quadrature(alpha: &PulseEnvelope, params: &MoleculeParams, t: f64) -> Result<Estimate> {
    let (start, far) = oracle_window(params, &[alpha]);
    let end = if t.is_finite() { t } else { far };
    if end <= start {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let (p, err) = nested_profile(alpha, &crate::pulses::Silent, params, start, end, oracle_step(params, &[alpha]))?;
    Ok(Estimate {
        value: *p.rho_a2a2.last().expect("nonempty"),
        error: err,
    })
}

/// Occupation of the second shelving level after both photons, at time `t`
/// (`f64::INFINITY` for the steady value).
pub fn rho_2424_quadrature(alpha: &PulseEnvelope, beta: &PulseEnvelope, params: &MoleculeParams, t: f64) -> Result<Estimate> {
    let (start, far) = oracle_window(params, &[alpha, beta]);
    let end = if t.is_finite() { t } else { far };
    if end <= start {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let (p, err) = nested_profile(alpha, beta, params, start, end, oracle_step(params, &[alpha, beta]))?;
    Ok(Estimate {
        value: *p.rho_2424.last().expect("nonempty"),
        error: err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gdm::{self, Drive};
    use crate::pulses::Silent;
    use proptest::prelude::*;

    fn unit() -> MoleculeParams {
        MoleculeParams::uniform(1.0)
    }

    #[test]
    fn transmission_values() {
        let p = unit();
        assert!((transmission(&p, Transition::First, 0.0).norm_sqr() - 1.0).abs() < 1e-15);
        assert!((transmission(&p, Transition::First, 1.0).norm_sqr() - 0.5).abs() < 1e-15);
        let q = MoleculeParams::new(1.0, 1e-300, 1.0, 1.0);
        assert!(transmission(&q, Transition::First, 0.0).norm() < 1e-140);
    }

    #[test]
    fn exponential_closed_form() {
        // partial fractions first, checked against brute-force grid quadrature
        for (kappa, g1, g2) in [(0.2, 1.0, 1.0), (1.0, 0.5, 2.0), (3.0, 1.0, 0.25)] {
            let params = MoleculeParams::new(g1, g2, 1.0, 1.0);
            let pulse = PulseEnvelope::exponential(kappa, 0.0).unwrap();
            let exact = p_exponential(kappa, g1, g2);
            let brute = {
                let t = Transmission::of(&params, Transition::First);
                let (a, b) = (-3000.0, 3000.0);
                let n = 3_000_000;
                let h = (b - a) / n as f64;
                (0..=n)
                    .map(|k| {
                        let w = a + k as f64 * h;
                        let wt = if k == 0 || k == n { 0.5 } else { 1.0 };
                        wt * t.at(w).norm_sqr() * pulse.spectrum_at(w).norm_sqr()
                    })
                    .sum::<f64>()
                    * h
            };
            assert!((brute - exact).abs() < 1e-6, "{brute} {exact}");
            let q = p_alpha(&pulse, &params).unwrap();
            assert!((q - exact).abs() < 1e-8, "{q} {exact}");
        }
        assert!((p_exponential(0.2, 1.0, 1.0) - 10.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn far_detuned_is_dark() {
        let p = PulseEnvelope::gaussian(1.0, 0.0).unwrap().with_detuning(60.0);
        assert!(p_alpha(&p, &unit()).unwrap() < 1e-3);
        let e = PulseEnvelope::exponential(0.2, 0.0).unwrap().with_detuning(50.0);
        assert!(p_alpha(&e, &unit()).unwrap() < 1e-3);
    }

    #[test]
    fn grid_quadrature_coverage() {
        let p = PulseEnvelope::gaussian(0.5, 0.0).unwrap();
        let params = unit();
        let grid = default_grid(&params, &[&p]).unwrap();
        let s = p.spectrum(&grid).unwrap();
        let on_grid = p_absorb_on_grid(&s, &params, Transition::First).unwrap();
        assert!((on_grid - p_alpha(&p, &params).unwrap()).abs() < 1e-8);
        let narrow = SpectralGrid::covering(2.0, 0.01).unwrap();
        let e = PulseEnvelope::exponential(0.2, 0.0).unwrap();
        assert!(matches!(
            p_absorb_on_grid(&e.spectrum(&narrow).unwrap(), &params, Transition::First),
            Err(Error::GridCoverage(_))
        ));
    }

    #[test]
    fn f1_identities() {
        let params = unit();
        let p = PulseEnvelope::gaussian(0.5, 0.0).unwrap();
        let pa = p_alpha(&p, &params).unwrap();
        let f0 = f1_spectrum(&p, &params, 0.0).unwrap();
        assert!(((2.0 * PI).sqrt() * f0.re - pa).abs() < 1e-9);
        for w in [0.3, 1.7] {
            let a = f1_spectrum(&p, &params, w).unwrap();
            let b = f1_spectrum(&p, &params, -w).unwrap();
            assert!((a - b.conj()).norm() < 1e-10);
        }
        // grid version agrees with the pointwise one
        let grid = default_grid(&params, &[&p]).unwrap();
        let f = f1_on_grid(&p, &params, &grid).unwrap();
        for k in [0usize, 40, 200] {
            let x = k as f64 * grid.step;
            let d = (f[grid.half + k] - f1_spectrum(&p, &params, x).unwrap()).norm();
            assert!(d < 1e-7, "{d}");
        }
    }

    #[test]
    fn f1_matches_time_domain() {
        let params = unit();
        let pulse = PulseEnvelope::exponential(0.5, 0.0).unwrap();
        let drive = Drive { alpha: &pulse, beta: &Silent };
        let plan = gdm::plan(0.0, End::At(90.0), 0.005, &drive).unwrap();
        let tr = gdm::integrate(&plan, &drive, &params, 1).unwrap();
        let p1 = tr.populations(1);
        for w in [0.0, 0.4, 1.3] {
            let mut acc = ZERO;
            for k in 0..tr.times.len() - 1 {
                let h = tr.times[k + 1] - tr.times[k];
                let f = |j: usize| Complex64::from_polar(params.gamma2 * p1[j], w * tr.times[j]);
                acc += (f(k) + f(k + 1)) * (0.5 * h);
            }
            let time = acc / (2.0 * PI).sqrt();
            let spec = f1_spectrum(&pulse, &params, w).unwrap();
            assert!((time - spec).norm() < 1e-4, "w={w} {time} {spec}");
        }
    }

    #[test]
    fn oracle_limits() {
        let params = unit();
        let e = PulseEnvelope::exponential(0.2, 0.0).unwrap();
        let inf = rho_a2a2_quadrature(&e, &params, f64::INFINITY).unwrap();
        assert!((inf.value - 10.0 / 11.0).abs() < 1e-5, "{inf:?}");
        assert_eq!(rho_a2a2_quadrature(&e, &params, 0.0).unwrap().value, 0.0);
        let g = PulseEnvelope::gaussian(0.5, 0.0).unwrap();
        let inf = rho_a2a2_quadrature(&g, &params, f64::INFINITY).unwrap();
        assert!((inf.value - p_alpha(&g, &params).unwrap()).abs() < 1e-5);
    }

    #[test]
    fn oracle_matches_hierarchy_in_time() {
        let params = MoleculeParams::new(1.0, 0.7, 1.0, 1.0);
        let pulse = PulseEnvelope::gaussian(0.6, 0.0).unwrap().with_detuning(0.3);
        let (start, _) = pulse.support();
        let drive = Drive { alpha: &pulse, beta: &Silent };
        let plan = gdm::plan(start, End::At(10.0), 0.01, &drive).unwrap();
        let tr = gdm::integrate(&plan, &drive, &params, 1).unwrap();
        let (prof, _) = nested_profile(&pulse, &Silent, &params, start, 10.0, 0.01).unwrap();
        for (k, (t, s)) in tr.times.iter().zip(&tr.states).enumerate() {
            assert!((prof.times[k] - t).abs() < 1e-12);
            assert!((gdm::population(s, 2) - prof.rho_a2a2[k]).abs() < 1e-4);
        }
    }

    #[test]
    fn two_photon_oracle_matches_hierarchy() {
        let params = unit();
        let a = PulseEnvelope::gaussian(0.5, 0.0).unwrap();
        let b = PulseEnvelope::exponential(0.8, 0.4).unwrap();
        let (start, _) = a.support();
        let drive = Drive { alpha: &a, beta: &b };
        let plan = gdm::plan(start, End::At(25.0), 0.01, &drive).unwrap();
        let tr = gdm::integrate(&plan, &drive, &params, 1).unwrap();
        let (prof, _) = nested_profile(&a, &b, &params, start, 25.0, 0.01).unwrap();
        let worst = tr
            .states
            .iter()
            .zip(&prof.rho_2424)
            .map(|(s, q)| (gdm::population(s, 4) - q).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-5, "{worst}");
    }

    #[test]
    fn consistency_triangle() {
        let params = unit();
        for (a, b) in [
            (PulseEnvelope::gaussian(0.5, 0.0).unwrap(), PulseEnvelope::gaussian(0.5, 1.0).unwrap()),
            (PulseEnvelope::gaussian(0.3, 0.0).unwrap(), PulseEnvelope::gaussian(1.2, 0.0).unwrap()),
            (PulseEnvelope::exponential(0.5, 0.0).unwrap(), PulseEnvelope::exponential(1.0, 2.0).unwrap()),
            (PulseEnvelope::gaussian(0.5, 0.0).unwrap(), PulseEnvelope::exponential(0.5, 0.5).unwrap()),
        ] {
            let o = p_overlap(&a, &b, &params, None).unwrap();
            let q = rho_2424_quadrature(&a, &b, &params, f64::INFINITY).unwrap();
            assert!((o.rho2424_inf - q.value).abs() < 1e-4, "{o:?} {q:?}");
            assert!(o.p_overlap >= -1e-4 && o.p_overlap <= o.p_alpha * o.p_beta + 1e-4);
        }
    }

    #[test]
    fn overlap_limits() {
        let params = unit();
        let a = PulseEnvelope::gaussian(0.5, 0.0).unwrap();
        let late = PulseEnvelope::gaussian(0.5, 10.0).unwrap();
        let o = p_overlap(&a, &late, &params, None).unwrap();
        assert!(o.p_overlap.abs() < 1e-3, "{o:?}");
        let early = PulseEnvelope::gaussian(0.5, -10.0).unwrap();
        let o = p_overlap(&a, &early, &params, None).unwrap();
        assert!((o.p_overlap - o.p_alpha * o.p_beta).abs() < 1e-3, "{o:?}");
    }

    #[test]
    fn coarse_overlap_grid_rejected() {
        let params = unit();
        let a = PulseEnvelope::exponential(0.2, 0.0).unwrap();
        let g = SpectralGrid::new(0.5, 200).unwrap();
        assert!(matches!(p_overlap(&a, &a, &params, Some(&g)), Err(Error::SpectralGridTooCoarse(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn transmission_bounded(g1 in 0.01f64..10.0, g2 in 0.01f64..10.0, w in -50.0f64..50.0) {
            let t = Transmission { rate_in: g1, rate_out: g2, center: 0.0 };
            prop_assert!(t.at(w).norm_sqr() <= t.peak() * (1.0 + 1e-12));
            prop_assert!(t.peak() <= 1.0 + 1e-12);
        }

        #[test]
        fn probabilities_in_unit_interval(sigma in 0.1f64..3.0, det in -3.0f64..3.0, g2 in 0.1f64..5.0) {
            let params = MoleculeParams::new(1.0, g2, 1.0, 1.0);
            let p = PulseEnvelope::gaussian(sigma, 0.0).unwrap().with_detuning(det);
            let v = p_alpha(&p, &params).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
