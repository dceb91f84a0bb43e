//! Cartesian parameter sweeps.

use rayon::prelude::*;

use crate::config::{Config, Engine, Quantity};
use crate::engines;
use crate::error::{CliError, CliResult};
use crate::output::{Cell, Report, Table};
use crate::scenarios::setup_from_config;

/// Grid points in row-major order (first axis slowest).
pub fn points(cfg: &Config) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in &cfg.axis {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

fn evaluate(cfg: &Config, point: &[f64]) -> CliResult<Vec<f64>> {
    let mut local = cfg.clone();
    for (axis, &v) in cfg.axis.iter().zip(point) {
        local.set(&axis.name, v)?;
    }
    let setup = setup_from_config(&local)?;
    let qs = &cfg.sweep.quantities;
    let populations = qs.iter().any(|q| matches!(q, Quantity::F2 | Quantity::F4));
    let spectral = qs
        .iter()
        .any(|q| matches!(q, Quantity::PAlpha | Quantity::PBeta | Quantity::POverlap | Quantity::Rho2424));
    let overlap = if spectral || (populations && cfg.sweep.engine == Engine::Analytic) {
        Some(engines::analytic_steady(&setup)?.1)
    } else {
        None
    };
    let steady = match (populations, cfg.sweep.engine) {
        (false, _) => None,
        (true, Engine::Analytic) => {
            let o = overlap.as_ref().expect("computed above");
            Some([o.p_alpha - o.rho2424_inf, o.rho2424_inf])
        }
        (true, Engine::Gdm) => {
            let (s, _) = engines::gdm_steady(&setup, cfg.run.dt, usize::MAX)?;
            Some([s.populations[2], s.populations[4]])
        }
        (true, Engine::Liouvillian) => {
            let (s, _, _) = engines::liouvillian_steady(&setup, cfg.run.dt, usize::MAX)?;
            Some([s.populations[2], s.populations[4]])
        }
        (true, Engine::All) => unreachable!("rejected before the sweep starts"),
    };
    Ok(qs
        .iter()
        .map(|q| match q {
            Quantity::PAlpha => overlap.as_ref().expect("spectral").p_alpha,
            Quantity::PBeta => overlap.as_ref().expect("spectral").p_beta,
            Quantity::POverlap => overlap.as_ref().expect("spectral").p_overlap,
            Quantity::Rho2424 => overlap.as_ref().expect("spectral").rho2424_inf,
            Quantity::F2 => steady.expect("populations")[0],
            Quantity::F4 => steady.expect("populations")[1],
        })
        .collect())
}

/// Evaluates every grid point; failures land in the `error` column.
pub fn run(cfg: &Config) -> CliResult<Report> {
    if cfg.axis.is_empty() {
        return Err(CliError::config("axis", "a sweep needs at least one [[axis]]"));
    }
    if cfg.sweep.quantities.is_empty() {
        return Err(CliError::config("sweep.quantities", "no quantities requested"));
    }
    if cfg.sweep.engine == Engine::All {
        return Err(CliError::config("sweep.engine", "choose one engine for sweeps"));
    }
    // surface schema problems once, before spawning work
    {
        let mut probe = cfg.clone();
        for axis in &cfg.axis {
            probe.set(&axis.name, axis.values[0])?;
        }
        setup_from_config(&probe)?;
    }
    let pts = points(cfg);
    let results: Vec<CliResult<Vec<f64>>> = pts.par_iter().map(|p| evaluate(cfg, p)).collect();
    let mut cols: Vec<&str> = cfg.axis.iter().map(|a| a.name.as_str()).collect();
    cols.extend(cfg.sweep.quantities.iter().map(|q| q.name()));
    cols.push("error");
    let mut t = Table::new("sweep", &cols).brief();
    for (p, r) in pts.iter().zip(results) {
        let mut row: Vec<Cell> = p.iter().map(|&v| Cell::Num(v)).collect();
        match r {
            Ok(vals) => {
                row.extend(vals.into_iter().map(Cell::Num));
                row.push(Cell::Empty);
            }
            Err(e) => {
                row.extend(cfg.sweep.quantities.iter().map(|_| Cell::Empty));
                row.push(e.to_string().into());
            }
        }
        t.push(row);
    }
    Ok(Report {
        tables: vec![t],
        notes: Vec::new(),
    })
}
