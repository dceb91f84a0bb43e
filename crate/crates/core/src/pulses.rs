//! Single-photon temporal envelopes, their spectra, and the virtual-cavity
//! couplings that emit them.
//!
//! Fourier convention: `u(w) = (2 pi)^(-1/2) * integral u(t) e^(i w t) dt`.
//! Detuning multiplies the time amplitude by `e^(-i delta (t - t_d))`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};

/// Saturation floor for the cavity remainder `1 - integral |u|^2`.
pub const COUPLING_FLOOR: f64 = 1e-6;
/// Total probability left outside the support of a named shape.
pub const TRUNCATION: f64 = 1e-9;
/// Tabulated pulses further than this from unit norm are rejected.
pub const TABLE_NORM_SLACK: f64 = 1e-3;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Which one-sided limit to take at a discontinuity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A complex function of time that integrators can sample.
pub trait Signal: Send + Sync {
    fn value(&self, t: f64, side: Side) -> Complex64;

    /// Times where the signal (or its derivative) jumps.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// The zero signal.
#[derive(Clone, Copy, Debug, Default)]
pub struct Silent;

impl Signal for Silent {
    fn value(&self, _t: f64, _side: Side) -> Complex64 {
        ZERO
    }
}

/// Linearly interpolated complex samples on a strictly increasing grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    times: Vec<f64>,
    values: Vec<Complex64>,
}

impl Table {
    pub fn new(times: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::InvalidPulse("table needs at least two (time, value) rows".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidPulse("table contains non-finite entries".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPulse("table times must be strictly increasing".into()));
        }
        Ok(Self { times, values })
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(f: F, start: f64, end: f64, intervals: usize) -> Result<Self> {
        let n = intervals.max(1);
        let h = (end - start) / n as f64;
        let times: Vec<f64> = (0..=n).map(|k| start + k as f64 * h).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    pub fn interpolate(&self, t: f64, side: Side) -> Complex64 {
        let (a, b) = (self.start(), self.end());
        if t < a || t > b || (t == a && side == Side::Left) || (t == b && side == Side::Right) {
            return ZERO;
        }
        let k = match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            p => (p - 1).min(self.times.len() - 2),
        };
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = (t - t0) / (t1 - t0);
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    fn segment_norm(h: f64, a: Complex64, b: Complex64) -> f64 {
        h * (a.norm_sqr() + (a * b.conj()).re + b.norm_sqr()) / 3.0
    }

    /// Exact integral of `|interpolant|^2` over `[start, t]`.
    pub fn cumulative_norm(&self, t: f64) -> f64 {
        if t <= self.start() {
            return 0.0;
        }
        let mut acc = 0.0;
        for k in 0..self.times.len() - 1 {
            let (t0, t1) = (self.times[k], self.times[k + 1]);
            if t >= t1 {
                acc += Self::segment_norm(t1 - t0, self.values[k], self.values[k + 1]);
            } else {
                let vt = self.interpolate(t, Side::Left);
                acc += Self::segment_norm(t - t0, self.values[k], vt);
                break;
            }
        }
        acc
    }

    pub fn total_norm(&self) -> f64 {
        self.cumulative_norm(self.end())
    }

    fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    /// Exact Fourier transform of the interpolant, `(2 pi)^(-1/2)` included.
    pub fn fourier(&self, w: f64) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        let mut acc = ZERO;
        for k in 0..self.times.len() - 1 {
            let (t0, t1) = (self.times[k], self.times[k + 1]);
            let h = t1 - t0;
            let (a, b) = (self.values[k], self.values[k + 1]);
            let x = w * h;
            // e0 = int_0^h e^{iws} ds, e1 = int_0^h s e^{iws} ds
            let (e0, e1) = if x.abs() < 1e-3 {
                let ix = i * x;
                (
                    (1.0 + ix / 2.0 + ix * ix / 6.0 + ix * ix * ix / 24.0) * h,
                    (0.5 + ix / 3.0 + ix * ix / 8.0 + ix * ix * ix / 30.0) * (h * h),
                )
            } else {
                let eh = (i * x).exp();
                let e0 = (eh - 1.0) / (i * w);
                (e0, (eh * h - e0) / (i * w))
            };
            acc += (i * (w * t0)).exp() * (a * e0 + (b - a) * (e1 / h));
        }
        acc / (2.0 * PI).sqrt()
    }
}

impl Signal for Table {
    fn value(&self, t: f64, side: Side) -> Complex64 {
        self.interpolate(t, side)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.start(), self.end()]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// `sqrt(kappa) e^(-kappa (t - t_d) / 2)` after onset.
    Exponential { kappa: f64 },
    /// `sigma` is the standard deviation of `|u|^2`; `center` is before the delay shift.
    Gaussian { sigma: f64, center: f64 },
    Tabulated(Arc<Table>),
}

/// Normalized single-photon amplitude with delay and detuning.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseEnvelope {
    pub shape: Shape,
    pub delay: f64,
    pub detuning: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonFinite(name.to_string()));
    }
    if v <= 0.0 {
        return Err(Error::InvalidPulse(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

impl PulseEnvelope {
    pub fn exponential(kappa: f64, delay: f64) -> Result<Self> {
        check_positive("kappa", kappa)?;
        if !delay.is_finite() {
            return Err(Error::NonFinite("delay".into()));
        }
        Ok(Self {
            shape: Shape::Exponential { kappa },
            delay,
            detuning: 0.0,
        })
    }

    pub fn gaussian(sigma: f64, center: f64) -> Result<Self> {
        check_positive("sigma", sigma)?;
        if !center.is_finite() {
            return Err(Error::NonFinite("center".into()));
        }
        Ok(Self {
            shape: Shape::Gaussian { sigma, center },
            delay: 0.0,
            detuning: 0.0,
        })
    }

    /// Builds a tabulated pulse; renormalizes if the norm is within slack of 1.
    pub fn tabulated(mut table: Table) -> Result<Self> {
        let norm = table.total_norm();
        if (norm - 1.0).abs() > TABLE_NORM_SLACK {
            return Err(Error::InvalidPulse(format!("tabulated pulse norm {norm:.6} is not close to 1")));
        }
        table.scale(1.0 / norm.sqrt());
        Ok(Self {
            shape: Shape::Tabulated(Arc::new(table)),
            delay: 0.0,
            detuning: 0.0,
        })
    }

    pub fn with_delay(mut self, delay: f64) -> Self {
        self.delay = delay;
        self
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    fn phase(&self, t: f64) -> Complex64 {
        if self.detuning == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, -self.detuning * (t - self.delay))
        }
    }

    /// `u(t)`, right-continuous at onsets.
    pub fn amplitude(&self, t: f64) -> Complex64 {
        self.amplitude_side(t, Side::Right)
    }

    pub fn amplitude_side(&self, t: f64, side: Side) -> Complex64 {
        let base = match &self.shape {
            Shape::Exponential { kappa } => {
                let tau = t - self.delay;
                if tau > 0.0 || (tau == 0.0 && side == Side::Right) {
                    Complex64::new(kappa.sqrt() * (-0.5 * kappa * tau).exp(), 0.0)
                } else {
                    ZERO
                }
            }
            Shape::Gaussian { sigma, center } => {
                let x = t - center - self.delay;
                let peak = (2.0 * PI * sigma * sigma).powf(-0.25);
                Complex64::new(peak * (-x * x / (4.0 * sigma * sigma)).exp(), 0.0)
            }
            Shape::Tabulated(table) => table.interpolate(t - self.delay, side),
        };
        if base == ZERO {
            base
        } else {
            base * self.phase(t)
        }
    }

    /// `integral_{-inf}^{t} |u|^2`.
    pub fn cumulative(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Exponential { .. } | Shape::Gaussian { .. } => 1.0 - self.remaining(t),
            Shape::Tabulated(table) => table.cumulative_norm(t - self.delay),
        }
    }

    /// `integral_t^inf |u|^2`, accurate in the far tail.
    pub fn remaining(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Exponential { kappa } => {
                let tau = t - self.delay;
                if tau <= 0.0 {
                    1.0
                } else {
                    (-kappa * tau).exp()
                }
            }
            Shape::Gaussian { sigma, center } => {
                0.5 * erfc((t - center - self.delay) / (sigma * std::f64::consts::SQRT_2))
            }
            Shape::Tabulated(table) => (1.0 - table.cumulative_norm(t - self.delay)).max(0.0),
        }
    }

    /// Interval holding all but `TRUNCATION` of the norm.
    pub fn support(&self) -> (f64, f64) {
        match &self.shape {
            Shape::Exponential { kappa } => (self.delay, self.delay + (1.0 / TRUNCATION).ln() / kappa),
            Shape::Gaussian { sigma, center } => {
                let z = std::f64::consts::SQRT_2 * erfc_inv(TRUNCATION);
                let c = center + self.delay;
                (c - z * sigma, c + z * sigma)
            }
            Shape::Tabulated(table) => (table.start() + self.delay, table.end() + self.delay),
        }
    }

    /// Characteristic rate used to size time steps and spectral grids.
    pub fn rate_scale(&self) -> f64 {
        match &self.shape {
            Shape::Exponential { kappa } => *kappa,
            Shape::Gaussian { sigma, .. } => 1.0 / sigma,
            Shape::Tabulated(table) => {
                let peak = table.values().iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
                2.5 * peak
            }
        }
    }

    /// Undetuned, undelayed spectrum of the shape.
    fn base_spectrum(&self, w: f64) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        match &self.shape {
            Shape::Exponential { kappa } => {
                Complex64::new(kappa.sqrt() / (2.0 * PI).sqrt(), 0.0) / Complex64::new(0.5 * kappa, -w)
            }
            Shape::Gaussian { sigma, center } => {
                let amp = (2.0 * sigma * sigma / PI).powf(0.25) * (-sigma * sigma * w * w).exp();
                (i * (w * center)).exp() * amp
            }
            Shape::Tabulated(table) => table.fourier(w),
        }
    }

    /// Analytic spectrum (exact piecewise transform for tables).
    pub fn spectrum_at(&self, w: f64) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        let shifted = w - self.detuning;
        (i * (self.detuning * self.delay)).exp() * (i * (shifted * self.delay)).exp() * self.base_spectrum(shifted)
    }

    /// Spectrum on a grid: closed forms for named shapes, FFT for tables.
    pub fn spectrum(&self, grid: &SpectralGrid) -> Result<SpectralAmplitude> {
        self.check_grid(grid)?;
        match self.shape {
            Shape::Tabulated(_) => self.sampled_spectrum(grid),
            _ => Ok(SpectralAmplitude {
                grid: grid.clone(),
                values: grid.points().map(|w| self.spectrum_at(w)).collect(),
            }),
        }
    }

    fn check_grid(&self, grid: &SpectralGrid) -> Result<()> {
        let (a, b) = self.support();
        let window = 2.0 * PI / grid.step;
        if window < b - a {
            return Err(Error::SpectralGridTooCoarse(format!(
                "step {} resolves a time window of {window:.4}, pulse support is {:.4}",
                grid.step,
                b - a
            )));
        }
        Ok(())
    }

    /// Spectrum from an FFT of the sampled envelope over the support.
    pub fn sampled_spectrum(&self, grid: &SpectralGrid) -> Result<SpectralAmplitude> {
        self.check_grid(grid)?;
        let (mut a, mut b) = self.support();
        let window = 2.0 * PI / grid.step;
        if let Shape::Gaussian { .. } = self.shape {
            // smooth on the whole line: sample the full periodic window
            let c = 0.5 * (a + b);
            a = c - 0.5 * window;
            b = c + 0.5 * window;
        }
        let mut n = (2 * grid.half + 1).next_power_of_two();
        let resolve = 0.05 / grid.max_frequency().max(self.detuning.abs());
        let min_dt = match &self.shape {
            Shape::Tabulated(t) => t.times().windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min) / 4.0,
            _ => 1.0 / (20.0 * self.rate_scale()),
        }
        .min(resolve);
        while window / (n as f64) > min_dt && n < (1 << 22) {
            n *= 2;
        }
        let dt = window / n as f64;
        let mut buf: Vec<Complex64> = (0..n)
            .map(|k| {
                let t = a + k as f64 * dt;
                if t > b + 1e-12 * window {
                    return ZERO;
                }
                let w = if k == 0 { 0.5 } else { 1.0 };
                self.amplitude_side(t, Side::Right) * w
            })
            .collect();
        // trapezoid weight at the last node inside the support
        let last = ((b - a) / dt).floor() as usize;
        if last > 0 && last < n {
            buf[last] *= 0.5;
        }
        let mut planner = FftPlanner::new();
        planner.plan_fft_inverse(n).process(&mut buf);
        let norm = dt / (2.0 * PI).sqrt();
        let i = Complex64::new(0.0, 1.0);
        let values = grid
            .points()
            .enumerate()
            .map(|(j, w)| {
                let k = (j as i64 - grid.half as i64).rem_euclid(n as i64) as usize;
                buf[k] * (i * (w * a)).exp() * norm
            })
            .collect();
        Ok(SpectralAmplitude { grid: grid.clone(), values })
    }
}

impl Signal for PulseEnvelope {
    fn value(&self, t: f64, side: Side) -> Complex64 {
        self.amplitude_side(t, side)
    }

    fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Exponential { .. } => vec![self.delay],
            Shape::Gaussian { .. } => Vec::new(),
            Shape::Tabulated(_) => {
                let (a, b) = self.support();
                vec![a, b]
            }
        }
    }
}

/// Uniform angular-frequency grid `w_j = (j - half) * step`, `j = 0..=2 half`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralGrid {
    pub step: f64,
    pub half: usize,
}

impl SpectralGrid {
    pub fn new(step: f64, half: usize) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) || half == 0 {
            return Err(Error::InvalidGrid(format!("spectral grid step {step}, half-count {half}")));
        }
        Ok(Self { step, half })
    }

    /// Grid with span at least `span` and step at most `resolution`.
    pub fn covering(span: f64, resolution: f64) -> Result<Self> {
        let half = (0.5 * span / resolution).ceil() as usize;
        Self::new(resolution, half.max(1))
    }

    pub fn len(&self) -> usize {
        2 * self.half + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, j: usize) -> f64 {
        (j as f64 - self.half as f64) * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|j| self.point(j))
    }

    pub fn max_frequency(&self) -> f64 {
        self.half as f64 * self.step
    }
}

#[derive(Clone, Debug)]
pub struct SpectralAmplitude {
    pub grid: SpectralGrid,
    pub values: Vec<Complex64>,
}

impl SpectralAmplitude {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.step
    }
}

/// Virtual-cavity coupling `g(t) = u*(t) / sqrt(1 - integral_{t0}^t |u|^2)`.
///
/// Once the remainder drops below `floor` the coupling is clamped to zero.
#[derive(Clone, Debug)]
pub struct Coupling {
    pulse: PulseEnvelope,
    start: f64,
    floor: f64,
    offset: f64,
    saturation: Option<f64>,
}

impl Coupling {
    pub fn new(pulse: PulseEnvelope, start: f64) -> Self {
        Self::with_floor(pulse, start, COUPLING_FLOOR)
    }

    pub fn with_floor(pulse: PulseEnvelope, start: f64, floor: f64) -> Self {
        let offset = pulse.cumulative(start);
        let mut c = Self {
            pulse,
            start,
            floor,
            offset,
            saturation: None,
        };
        c.saturation = c.find_saturation();
        if let Some(ts) = c.saturation {
            log::debug!("pulse emission saturated at t = {ts:.6}; coupling clamped to zero");
        }
        c
    }

    pub fn pulse(&self) -> &PulseEnvelope {
        &self.pulse
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    /// Time after which the coupling is clamped, if the cavity ever empties.
    pub fn saturation_time(&self) -> Option<f64> {
        self.saturation
    }

    /// Cavity remainder `1 - integral_{t0}^t |u|^2`.
    pub fn remainder(&self, t: f64) -> f64 {
        if t <= self.start {
            1.0
        } else {
            self.pulse.remaining(t) + self.offset
        }
    }

    fn find_saturation(&self) -> Option<f64> {
        if let Shape::Exponential { kappa } = self.pulse.shape {
            if self.offset == 0.0 {
                let onset = self.start.max(self.pulse.delay);
                let t = self.pulse.delay + (1.0 / self.floor).ln() / kappa;
                return Some(t.max(onset));
            }
        }
        let (_, end) = self.pulse.support();
        let mut hi = end.max(self.start);
        let mut step = (end - self.pulse.support().0).max(1.0);
        let mut tries = 0;
        while self.remainder(hi) > self.floor {
            hi += step;
            step *= 2.0;
            tries += 1;
            if tries > 60 {
                return None;
            }
        }
        let mut lo = self.start;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.remainder(mid) > self.floor {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(hi)
    }

    pub fn is_saturated(&self, t: f64) -> bool {
        self.saturation.is_some_and(|ts| t >= ts)
    }

    /// `integral_{t0}^t |g|^2 = -ln max(remainder, floor)`.
    pub fn integral(&self, t: f64) -> f64 {
        -self.remainder(t).max(self.floor).ln()
    }

    /// Largest `|g|^2` over the active window (sampled, plus the clamp edge).
    pub fn peak_rate(&self) -> f64 {
        let (a, b) = self.pulse.support();
        let lo = a.max(self.start);
        let hi = self.saturation.unwrap_or(b).max(lo);
        let n = 4000;
        let mut peak: f64 = 0.0;
        for k in 0..=n {
            let t = lo + (hi - lo) * k as f64 / n as f64;
            peak = peak.max(self.value(t, Side::Left).norm_sqr());
            peak = peak.max(self.value(t, Side::Right).norm_sqr());
        }
        peak
    }

    /// The amplitude the cavity actually emits, `g* e^(-integral |g|^2 / 2)`.
    pub fn emitted(&self) -> EmittedEnvelope {
        EmittedEnvelope { coupling: self.clone() }
    }
}

impl Signal for Coupling {
    fn value(&self, t: f64, side: Side) -> Complex64 {
        if t < self.start || (t == self.start && side == Side::Left) {
            return ZERO;
        }
        if let Some(ts) = self.saturation {
            if t > ts || (t == ts && side == Side::Right) {
                return ZERO;
            }
        }
        let d = self.remainder(t).max(self.floor);
        self.pulse.amplitude_side(t, side).conj() / d.sqrt()
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.pulse.breakpoints();
        b.push(self.start);
        b.extend(self.saturation);
        b
    }
}

/// Envelope emitted by a (possibly clamped) virtual cavity.
#[derive(Clone, Debug)]
pub struct EmittedEnvelope {
    coupling: Coupling,
}

impl Signal for EmittedEnvelope {
    fn value(&self, t: f64, side: Side) -> Complex64 {
        let g = self.coupling.value(t, side);
        if g == ZERO {
            return ZERO;
        }
        g.conj() * (-0.5 * self.coupling.integral(t)).exp()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.coupling.breakpoints()
    }
}

/// `u(t) = g*(t) exp(-1/2 integral_{t0}^t |g|^2)` for an arbitrary coupling.
pub fn envelope_from_coupling<S: Signal + ?Sized>(g: &S, start: f64, t: f64) -> Complex64 {
    if t <= start {
        return if t == start { g.value(t, Side::Right).conj() } else { ZERO };
    }
    let mut cuts: Vec<f64> = g.breakpoints().into_iter().filter(|&b| b > start && b < t).collect();
    cuts.sort_by(f64::total_cmp);
    let mut edges = vec![start];
    edges.extend(cuts);
    edges.push(t);
    let tol = Tolerance {
        abs: 1e-13,
        rel: 1e-12,
        max_intervals: 2000,
    };
    let mut integral = 0.0;
    for w in edges.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let (v, _, _) = quadrature::integrate_real(
            |s| {
                // stay strictly inside the segment so one-sided limits agree
                let side = if s < mid { Side::Right } else { Side::Left };
                g.value(s, side).norm_sqr()
            },
            w[0],
            w[1],
            tol,
        );
        integral += v;
    }
    g.value(t, Side::Left).conj() * (-0.5 * integral).exp()
}
