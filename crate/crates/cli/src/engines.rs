//! Steady-state runs of each engine on a pulse pair, and the matched-step
//! comparison between the two time-domain engines.

use std::time::Instant;

use twophoton_core::analytic::{self, Overlap};
use twophoton_core::bridge::{self, CrossCheck, TransformVariant};
use twophoton_core::gdm::{self, Drive, GdmTrajectory};
use twophoton_core::liouvillian::{self, Couplings, FluxReport, SystemTrajectory};
use twophoton_core::model::LEVELS;
use twophoton_core::ode::{End, StepPlan};
use twophoton_core::{Coupling, MoleculeParams, PulseEnvelope, Result};

#[derive(Clone, Debug)]
pub struct PairSetup {
    pub params: MoleculeParams,
    pub alpha: PulseEnvelope,
    pub beta: PulseEnvelope,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Steady {
    pub populations: [f64; LEVELS],
    pub final_time: f64,
    pub steps: usize,
    pub seconds: f64,
}

impl Steady {
    pub fn p_first(&self) -> f64 {
        self.populations[2] + self.populations[4]
    }
}

impl PairSetup {
    pub fn new(params: MoleculeParams, alpha: PulseEnvelope, beta: PulseEnvelope) -> Self {
        Self { params, alpha, beta }
    }

    pub fn start(&self) -> f64 {
        self.alpha.support().0.min(self.beta.support().0)
    }

    /// Both pulses have delivered all but the truncated tail by this time.
    pub fn settle(&self) -> f64 {
        self.alpha.support().1.max(self.beta.support().1)
    }

    fn steady_end(&self) -> End {
        let after = self.settle();
        let slow = self.params.min_rate();
        End::Steady {
            after,
            limit: after + 400.0 / slow,
        }
    }

    pub fn couplings(&self) -> (Coupling, Coupling) {
        let t0 = self.start();
        (Coupling::new(self.alpha.clone(), t0), Coupling::new(self.beta.clone(), t0))
    }

    pub fn default_dt(&self) -> f64 {
        let fastest = self.alpha.rate_scale().max(self.beta.rate_scale());
        gdm::default_dt(&self.params, fastest)
    }

    /// Step for runs that also carry the coupling rates `|g|^2`.
    pub fn coupled_dt(&self, first: &Coupling, second: &Coupling) -> f64 {
        let fastest = first.peak_rate().max(second.peak_rate());
        gdm::default_dt(&self.params, fastest).min(self.default_dt())
    }
}

/// Hierarchy driven by the ideal envelopes, run to steady state.
pub fn gdm_steady(setup: &PairSetup, dt: Option<f64>, stride: usize) -> Result<(Steady, GdmTrajectory)> {
    let clock = Instant::now();
    let drive = Drive {
        alpha: &setup.alpha,
        beta: &setup.beta,
    };
    let plan = gdm::plan(setup.start(), setup.steady_end(), dt.unwrap_or_else(|| setup.default_dt()), &drive)?;
    let tr = gdm::integrate(&plan, &drive, &setup.params, stride)?;
    let steady = Steady {
        populations: tr.steady_populations(),
        final_time: tr.final_time(),
        steps: tr.steps,
        seconds: clock.elapsed().as_secs_f64(),
    };
    Ok((steady, tr))
}

/// Virtual-cavity master equation run to steady state, with its flux report.
pub fn liouvillian_steady(
    setup: &PairSetup,
    dt: Option<f64>,
    stride: usize,
) -> Result<(Steady, SystemTrajectory, FluxReport)> {
    let clock = Instant::now();
    let (g1, g2) = setup.couplings();
    let cp = Couplings {
        first: &g1,
        second: &g2,
    };
    let dt = dt.unwrap_or_else(|| setup.coupled_dt(&g1, &g2));
    let plan = liouvillian::plan(setup.start(), setup.steady_end(), dt, &cp)?;
    let tr = liouvillian::integrate(&plan, &cp, &setup.params, stride)?;
    let flux = liouvillian::flux_balance_report(&tr, &setup.params);
    let steady = Steady {
        populations: tr.steady_populations(),
        final_time: tr.final_time(),
        steps: tr.steps,
        seconds: clock.elapsed().as_secs_f64(),
    };
    Ok((steady, tr, flux))
}

/// Spectral decomposition; the steady populations follow from it.
pub fn analytic_steady(setup: &PairSetup) -> Result<(Steady, Overlap)> {
    let clock = Instant::now();
    let o = analytic::p_overlap(&setup.alpha, &setup.beta, &setup.params, None)?;
    let p4 = o.rho2424_inf;
    let steady = Steady {
        populations: [1.0 - o.p_alpha, 0.0, o.p_alpha - p4, 0.0, p4],
        final_time: f64::INFINITY,
        steps: 0,
        seconds: clock.elapsed().as_secs_f64(),
    };
    Ok((steady, o))
}

/// Outcome of running both time-domain engines on one step plan.
#[derive(Clone, Debug)]
pub struct Equivalence {
    pub check: CrossCheck,
    /// Transform variants tried against the initial-state trace rule.
    pub attempts: Vec<(TransformVariant, f64)>,
    pub dt: f64,
    pub seconds: f64,
}

/// The hierarchy is driven by what the cavities actually emit, so both
/// engines see the same photons.
pub fn equivalence(setup: &PairSetup, horizon: Option<f64>, stride: usize) -> Result<Equivalence> {
    let clock = Instant::now();
    let t0 = setup.start();
    let (g1, g2) = setup.couplings();
    let (u1, u2) = (g1.emitted(), g2.emitted());
    let cp = Couplings {
        first: &g1,
        second: &g2,
    };
    let drive = Drive { alpha: &u1, beta: &u2 };
    let dt = setup.coupled_dt(&g1, &g2);
    let end = horizon.unwrap_or_else(|| setup.settle() + 10.0 / setup.params.min_rate());
    let mut bps = cp.breakpoints();
    bps.extend(drive.breakpoints());
    let plan = StepPlan::new(t0, End::At(end), dt, &bps)?;
    let g = gdm::integrate(&plan, &drive, &setup.params, stride)?;
    let s = liouvillian::integrate(&plan, &cp, &setup.params, stride)?;
    let first = bridge::extract_tilde(&s.states[0].rho, g1.integral(t0), g2.integral(t0));
    let (variant, attempts) = bridge::resolve_variant(&first)?;
    let check = bridge::cross_validate(&g, &s, |t| (g1.integral(t), g2.integral(t)), variant)?;
    Ok(Equivalence {
        check,
        attempts,
        dt,
        seconds: clock.elapsed().as_secs_f64(),
    })
}
