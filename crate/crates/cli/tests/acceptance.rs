//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL ...` line before asserting.

use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twophoton_cli::engines::{self, PairSetup};
use twophoton_cli::scenarios::{exponential_pair, gaussian_pair, Named, FIGURE_KAPPA, FIGURE_SIGMA};
use twophoton_core::analytic;
use twophoton_core::gdm::{self, Drive};
use twophoton_core::ode::End;
use twophoton_core::povm::{self, TimeGrid};
use twophoton_core::pulses::Silent;
use twophoton_core::{MoleculeParams, PulseEnvelope};

// Criteria carry runtime limits; run them one at a time.
static SERIAL: Mutex<()> = Mutex::new(());

fn verdict(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn lock() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Steady populations from all three engines and the slowest engine's runtime.
fn three_engines(setup: &PairSetup) -> ([[f64; 5]; 3], [f64; 3]) {
    let (a, _) = engines::analytic_steady(setup).expect("analytic");
    let (g, _) = engines::gdm_steady(setup, None, usize::MAX).expect("gdm");
    let (l, _, _) = engines::liouvillian_steady(setup, None, usize::MAX).expect("liouvillian");
    ([a.populations, g.populations, l.populations], [a.seconds, g.seconds, l.seconds])
}

const ENGINES: [&str; 3] = ["analytic", "gdm", "liouvillian"];

#[test]
fn criterion_01_exponential_single_photon() {
    let _g = lock();
    let setup = exponential_pair(FIGURE_KAPPA, FIGURE_KAPPA, 0.0);
    let target = 10.0 / 11.0;
    let (pops, secs) = three_engines(&setup);
    let values: Vec<f64> = pops.iter().map(|p| p[2] + p[4]).collect();
    let direct = analytic::p_alpha(&setup.alpha, &setup.params).unwrap();
    let ok_values = values.iter().chain([&direct]).all(|v| (v - target).abs() < 1e-3);
    let ok_time = secs.iter().all(|&s| s < 5.0);
    verdict(
        1,
        ok_values && ok_time,
        format!(
            "P_alpha target {target:.6}: direct quadrature {direct:.6}, {} (runtimes {:.2?} s, limit 5 s)",
            ENGINES.iter().zip(&values).map(|(e, v)| format!("{e} {v:.6}")).collect::<Vec<_>>().join(", "),
            secs
        ),
    );
}

#[test]
fn criterion_02_long_delay_two_photon() {
    let _g = lock();
    let setup = exponential_pair(FIGURE_KAPPA, FIGURE_KAPPA, 10.0);
    let target = 100.0 / 121.0;
    let (pops, _) = three_engines(&setup);
    let values: Vec<f64> = pops.iter().map(|p| p[4]).collect();
    let pass = values.iter().all(|v| (v - target).abs() < 2e-3);
    verdict(
        2,
        pass,
        format!(
            "steady F4 at delay 10 vs {target:.6} (tol 2e-3): {}",
            ENGINES.iter().zip(&values).map(|(e, v)| format!("{e} {v:.6}")).collect::<Vec<_>>().join(", ")
        ),
    );
}

fn figure_check(n: u32, delay: f64, checks: &[(&str, f64, f64)]) {
    let setup = gaussian_pair(FIGURE_SIGMA, FIGURE_SIGMA, delay);
    let (pops, _) = three_engines(&setup);
    let mut pass = true;
    let mut parts = Vec::new();
    for (engine, p) in ENGINES.iter().zip(&pops) {
        let got: Vec<(String, f64)> = checks
            .iter()
            .map(|&(name, want, tol)| {
                let v = match name {
                    "P0" => p[0],
                    "P2+P4" => p[2] + p[4],
                    _ => p[4],
                };
                pass &= (v - want).abs() <= tol;
                (name.to_string(), v)
            })
            .collect();
        parts.push(format!(
            "{engine} {}",
            got.iter().map(|(k, v)| format!("{k}={v:.4}")).collect::<Vec<_>>().join(" ")
        ));
    }
    let targets: Vec<String> = checks.iter().map(|(k, w, t)| format!("{k}={w}+-{t}")).collect();
    verdict(n, pass, format!("targets {}: {}", targets.join(" "), parts.join("; ")));
}

#[test]
fn criterion_03_fig2() {
    let _g = lock();
    figure_check(3, 3.0, &[("P0", 0.346, 0.01), ("P2+P4", 0.654, 0.01), ("P4", 0.418, 0.01)]);
}

#[test]
fn criterion_04_fig3() {
    let _g = lock();
    figure_check(4, -0.25, &[("P4", 0.022, 0.005), ("P2+P4", 0.654, 0.01)]);
}

#[test]
fn criterion_05_formalism_equivalence() {
    let _g = lock();
    let clock = Instant::now();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for named in Named::EQUIVALENCE {
        let eq = engines::equivalence(&named.representative(), None, 1).expect("equivalence run");
        worst = worst.max(eq.check.max_deviation);
        parts.push(format!("{} {:.2e}", named.name(), eq.check.max_deviation));
    }
    let secs = clock.elapsed().as_secs_f64();
    verdict(
        5,
        worst < 1e-5 && secs < 60.0,
        format!("max deviation {worst:.2e} (tol 1e-5) [{}], runtime {secs:.1} s (limit 60 s)", parts.join(", ")),
    );
}

#[test]
fn criterion_06_overlap_limits() {
    let _g = lock();
    let params = MoleculeParams::uniform(1.0);
    let g = |s: f64, c: f64| PulseEnvelope::gaussian(s, c).unwrap();
    let late = analytic::p_overlap(&g(0.5, 0.0), &g(0.5, 10.0), &params, None).unwrap();
    let early = analytic::p_overlap(&g(0.5, 0.0), &g(0.5, -10.0), &params, None).unwrap();
    let ok_late = late.p_overlap.abs() < 1e-3;
    let ok_early = (early.p_overlap - early.p_alpha * early.p_beta).abs() < 1e-3;
    // bounds hold up to the principal-value convergence tolerance
    let slack = analytic::PV_TOLERANCE;
    let sigmas = [0.25, 0.5, 1.0, 2.0, 3.0];
    let delays = [-2.0, 0.0, 2.0];
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for &d in &delays {
        for &s1 in &sigmas {
            for &s2 in &sigmas {
                let o = analytic::p_overlap(&g(s1, 0.0), &g(s2, d), &params, None).unwrap();
                let excess = (-o.p_overlap).max(o.p_overlap - o.p_alpha * o.p_beta);
                worst = worst.max(excess);
                if excess > slack {
                    violations += 1;
                }
            }
        }
    }
    verdict(
        6,
        ok_late && ok_early && violations == 0,
        format!(
            "delay 10: P_overlap {:.2e}; beta first: P_overlap - PaPb {:.2e}; 5x5x3 sweep: {violations} bound violations, worst excess {worst:.2e}",
            late.p_overlap,
            early.p_overlap - early.p_alpha * early.p_beta
        ),
    );
}

fn random_gaussian(rng: &mut ChaCha8Rng, sigma: (f64, f64), center: (f64, f64)) -> PulseEnvelope {
    let s = rng.gen_range(sigma.0..sigma.1);
    let c = rng.gen_range(center.0..center.1);
    PulseEnvelope::gaussian(s, c).unwrap().with_detuning(rng.gen_range(-1.0..1.0))
}

#[test]
fn criterion_07_povm_suite() {
    let _g = lock();
    let params = MoleculeParams::uniform(1.0);
    let grid = TimeGrid::resolving(0.0, 10.0, &[params.gamma_first()]).unwrap();
    let pi = povm::build_single(&grid, &params).unwrap();
    let lambda_max = povm::eigendecompose(&pi.matrix).unwrap().values[0];
    let ok_lambda = lambda_max <= 1.0 + 1e-3;

    let mut trace_err: f64 = 0.0;
    for span in [5.0, 10.0, 20.0] {
        let g = TimeGrid::resolving(0.0, span, &[2.0]).unwrap();
        let tr = povm::build_single(&g, &params).unwrap().trace();
        let closed = povm::single_trace_asymptotic(0.0, span, 1.0, 1.0);
        trace_err = trace_err.max((tr - closed).abs() / closed);
    }
    let ok_trace = trace_err < 1e-3;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut born_err: f64 = 0.0;
    for _ in 0..10 {
        let u = random_gaussian(&mut rng, (0.2, 0.6), (4.0, 6.0));
        let drive = Drive { alpha: &u, beta: &Silent };
        let plan = gdm::plan(0.0, End::At(10.0), 0.005, &drive).unwrap();
        let tr = gdm::integrate(&plan, &drive, &params, usize::MAX).unwrap();
        let f2 = gdm::population(tr.final_state(), 2);
        born_err = born_err.max((pi.born(&grid.sample(&u)) - f2).abs());
    }
    let ok_born = born_err < 1e-3;

    let ratios = [0.25, 0.5, 1.0, 2.0, 4.0];
    let traces: Vec<f64> = ratios
        .iter()
        .map(|r| {
            let g1 = 2.0 * r / (1.0 + r);
            let g2 = 2.0 - g1;
            let p = MoleculeParams::new(g1, g2, 1.0, 1.0);
            povm::build_single(&grid, &p).unwrap().trace()
        })
        .collect();
    let best = traces.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    let ok_match = ratios[best] == 1.0;

    verdict(
        7,
        ok_lambda && ok_trace && ok_born && ok_match,
        format!(
            "lambda_max {lambda_max:.6}; trace rel err {trace_err:.2e}; Born vs GDM max err {born_err:.2e} over 10 pulses; \
             bandwidth peak at g1/g2 = {} ({:?})",
            ratios[best],
            traces.iter().map(|t| format!("{t:.4}")).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_08_two_photon_born() {
    let _g = lock();
    let params = MoleculeParams::uniform(1.0);
    let grid = TimeGrid::new(0.0, 1.2, 48).unwrap();
    let pi = povm::build_pair(&grid, &params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(48);
    let mut worst: f64 = 0.0;
    let mut values = Vec::new();
    for _ in 0..5 {
        let a = random_gaussian(&mut rng, (0.04, 0.07), (0.35, 0.45));
        let b = random_gaussian(&mut rng, (0.04, 0.07), (0.65, 0.8));
        let born = pi.born(&grid.sample(&a), &grid.sample(&b));
        let quad = analytic::rho_2424_quadrature(&a, &b, &params, grid.end).unwrap().value;
        worst = worst.max((born - quad).abs());
        values.push(format!("{born:.5}/{quad:.5}"));
    }
    verdict(
        8,
        worst < 1e-3,
        format!("Born vs nested quadrature at T, max err {worst:.2e} (tol 1e-3) [{}]", values.join(", ")),
    );
}

#[test]
fn criterion_09_flux_balance() {
    let _g = lock();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for named in Named::ALL {
        let (_, _, flux) = engines::liouvillian_steady(&named.representative(), None, usize::MAX).unwrap();
        let r = flux.residuals.iter().copied().fold(0.0, f64::max);
        worst = worst.max(r);
        parts.push(format!("{} {r:.1e}", named.name()));
    }
    verdict(9, worst < 1e-4, format!("max residual {worst:.2e} (tol 1e-4) [{}]", parts.join(", ")));
}

#[test]
fn criterion_10_gaussian_symmetry() {
    let _g = lock();
    let params = MoleculeParams::uniform(1.0);
    let sigmas = [0.25, 0.5, 1.0, 2.0];
    let mut worst: f64 = 0.0;
    for d in [0.0, 1.0, 3.0, 5.0] {
        let rho = |s1: f64, s2: f64| {
            let a = PulseEnvelope::gaussian(s1, 0.0).unwrap();
            let b = PulseEnvelope::gaussian(s2, d).unwrap();
            analytic::p_overlap(&a, &b, &params, None).unwrap().rho2424_inf
        };
        for (i, &s1) in sigmas.iter().enumerate() {
            for &s2 in &sigmas[i + 1..] {
                worst = worst.max((rho(s1, s2) - rho(s2, s1)).abs());
            }
        }
    }
    verdict(10, worst < 1e-4, format!("max |rho(s1,s2) - rho(s2,s1)| {worst:.2e} (tol 1e-4) over 4x4 sigmas, 4 delays"));
}
