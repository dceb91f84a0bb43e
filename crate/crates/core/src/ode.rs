//! Fixed-step RK4 with breakpoint-aligned step plans.

use crate::error::{Error, Result};
use crate::pulses::Side;

pub trait OdeState: Clone {
    /// `self += a * x`
    fn add_scaled(&mut self, a: f64, x: &Self);
}

impl OdeState for Vec<f64> {
    fn add_scaled(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += a * v;
        }
    }
}

/// One classical RK4 step. The first stage sees the right limit of the
/// drive at `t`, the last stage the left limit at `t + h`.
pub fn rk4_step<S, F>(t: f64, h: f64, y: &S, rhs: &mut F) -> S
where
    S: OdeState,
    F: FnMut(f64, Side, &S) -> S,
{
    let k1 = rhs(t, Side::Right, y);
    let mut y2 = y.clone();
    y2.add_scaled(0.5 * h, &k1);
    let k2 = rhs(t + 0.5 * h, Side::Right, &y2);
    let mut y3 = y.clone();
    y3.add_scaled(0.5 * h, &k2);
    let k3 = rhs(t + 0.5 * h, Side::Right, &y3);
    let mut y4 = y.clone();
    y4.add_scaled(h, &k3);
    let k4 = rhs(t + h, Side::Left, &y4);
    let mut out = y.clone();
    out.add_scaled(h / 6.0, &k1);
    out.add_scaled(h / 3.0, &k2);
    out.add_scaled(h / 3.0, &k3);
    out.add_scaled(h / 6.0, &k4);
    out
}

/// Where an integration stops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum End {
    At(f64),
    /// Run to `after`, then keep stepping until the steady test passes or `limit`.
    Steady { after: f64, limit: f64 },
}

/// Step nodes: every breakpoint inside the window is a node and each
/// segment between them is split uniformly with spacing at most `dt`.
#[derive(Clone, Debug)]
pub struct StepPlan {
    pub nodes: Vec<f64>,
    pub dt: f64,
    pub limit: Option<f64>,
}

impl StepPlan {
    pub fn new(start: f64, end: End, dt: f64, breakpoints: &[f64]) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("time step must be positive, got {dt}")));
        }
        let (stop, limit) = match end {
            End::At(t) => (t, None),
            End::Steady { after, limit } => (after.max(start), Some(limit.max(after))),
        };
        if !(stop > start) {
            return Err(Error::InvalidGrid(format!("end time {stop} must exceed start {start}")));
        }
        let tiny = 1e-12 * (1.0 + start.abs().max(stop.abs()));
        let mut cuts: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b.is_finite() && b > start + tiny && b < stop - tiny)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() <= tiny);
        let mut edges = vec![start];
        edges.extend(cuts);
        edges.push(stop);
        let mut nodes = vec![start];
        for w in edges.windows(2) {
            let len = w[1] - w[0];
            let n = (len / dt).ceil().max(1.0) as usize;
            let h = len / n as f64;
            for k in 1..n {
                nodes.push(w[0] + k as f64 * h);
            }
            nodes.push(w[1]);
        }
        Ok(Self { nodes, dt, limit })
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn planned_end(&self) -> f64 {
        *self.nodes.last().expect("nonempty")
    }

    /// Same plan with every step halved.
    pub fn refined(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len());
        nodes.push(self.nodes[0]);
        for w in self.nodes.windows(2) {
            nodes.push(0.5 * (w[0] + w[1]));
            nodes.push(w[1]);
        }
        Self {
            nodes,
            dt: 0.5 * self.dt,
            limit: self.limit,
        }
    }
}

/// Sampled output of a run.
#[derive(Clone, Debug)]
pub struct Samples<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub steps: usize,
}

impl<S> Samples<S> {
    pub fn last(&self) -> (&f64, &S) {
        (self.times.last().expect("nonempty"), self.states.last().expect("nonempty"))
    }
}

/// Drives `rhs` along `plan`. `check` runs after every step; it may abort
/// with an error and, past the planned nodes, returns `true` once steady.
pub fn integrate<S, F, C>(plan: &StepPlan, y0: S, stride: usize, mut rhs: F, mut check: C) -> Result<Samples<S>>
where
    S: OdeState,
    F: FnMut(f64, Side, &S) -> S,
    C: FnMut(f64, &S) -> Result<bool>,
{
    let stride = stride.max(1);
    let mut times = vec![plan.nodes[0]];
    let mut states = vec![y0.clone()];
    let mut y = y0;
    let mut steps = 0usize;
    let mut last_sampled = true;
    for w in plan.nodes.windows(2) {
        y = rk4_step(w[0], w[1] - w[0], &y, &mut rhs);
        steps += 1;
        check(w[1], &y)?;
        last_sampled = steps % stride == 0;
        if last_sampled {
            times.push(w[1]);
            states.push(y.clone());
        }
    }
    let mut t = plan.planned_end();
    if let Some(limit) = plan.limit {
        let mut k = 0u64;
        let t_after = t;
        while t < limit {
            if check(t, &y)? {
                break;
            }
            k += 1;
            let next = t_after + k as f64 * plan.dt;
            y = rk4_step(t, next - t, &y, &mut rhs);
            t = next;
            steps += 1;
            last_sampled = steps % stride == 0;
            if last_sampled {
                times.push(t);
                states.push(y.clone());
            }
        }
    }
    if !last_sampled {
        times.push(t);
        states.push(y);
    }
    Ok(Samples { times, states, steps })
}
