//! The `povm` subcommand: build, diagonalize and apply the outcome operators.

use twophoton_core::povm::{self, TimeGrid};

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::output::{Cell, Report, Table};

pub fn run(cfg: &Config) -> CliResult<Report> {
    let pc = cfg.povm.as_ref().ok_or_else(|| CliError::config("povm", "missing [povm] section"))?;
    let params = cfg.params()?;
    if pc.end <= pc.start {
        return Err(CliError::config("povm.end", "must exceed povm.start"));
    }
    let rates = match pc.order {
        1 => vec![params.gamma_first()],
        2 => vec![params.gamma_first(), params.gamma_second()],
        _ => return Err(CliError::config("povm.order", "must be 1 or 2")),
    };
    let grid = match pc.cells {
        Some(n) => TimeGrid::new(pc.start, pc.end, n),
        None => TimeGrid::resolving(pc.start, pc.end, &rates),
    }
    .map_err(|e| CliError::config("povm.cells", e.to_string()))?;
    for r in &rates {
        grid.check_resolution(*r).map_err(|e| CliError::config("povm.cells", e.to_string()))?;
    }
    let mut report = Report::default();
    let mut summary = Table::new("povm_summary", &["quantity", "value"]).brief();
    summary.push(vec!["cells".into(), grid.n.into()]);
    summary.push(vec!["step".into(), grid.step.into()]);
    let sample = |which: &str| -> CliResult<Option<_>> {
        let present = match which {
            "alpha" => cfg.alpha.is_some(),
            _ => cfg.beta.is_some(),
        };
        Ok(if present { Some(grid.sample(&cfg.pulse(which)?)) } else { None })
    };
    if pc.order == 1 {
        let pi = povm::build_single(&grid, &params)?;
        summary.push(vec!["trace".into(), pi.trace().into()]);
        summary.push(vec![
            "trace_closed_form".into(),
            povm::single_trace(grid.start, grid.end, params.gamma1, params.gamma2).into(),
        ]);
        if let Some(c) = sample("alpha")? {
            summary.push(vec!["born_alpha".into(), pi.born(&c).into()]);
        }
        if pc.eigen {
            let spec = povm::eigendecompose(&pi.matrix)?;
            summary.push(vec!["lambda_max".into(), spec.values[0].into()]);
            report.tables.push(eigen_table(&spec.values));
            let mut best = Table::new("optimal_state", &["t", "amplitude"]);
            let scale = grid.step.sqrt().recip();
            for (j, s) in grid.midpoints().enumerate() {
                best.push(vec![s.into(), (spec.vectors[(j, 0)] * scale).into()]);
            }
            report.tables.push(best);
        }
    } else {
        let pi = povm::build_pair(&grid, &params)?;
        summary.push(vec!["trace".into(), pi.trace().into()]);
        if let (Some(a), Some(b)) = (sample("alpha")?, sample("beta")?) {
            summary.push(vec!["born_pair".into(), pi.born(&a, &b).into()]);
        }
        match (&pi.dense, pc.eigen) {
            (Some(m), true) => {
                let spec = povm::eigendecompose(m)?;
                summary.push(vec!["mu_max".into(), spec.values[0].into()]);
                report.tables.push(eigen_table(&spec.values));
                let mut best = Table::new("optimal_state", &["t1", "t2", "amplitude"]);
                let n = grid.n;
                for r in 0..n * n {
                    best.push(vec![
                        grid.midpoint(r / n).into(),
                        grid.midpoint(r % n).into(),
                        (spec.vectors[(r, 0)] / grid.step).into(),
                    ]);
                }
                report.tables.push(best);
            }
            (None, true) => report.notes.push(format!(
                "{} cells exceed the dense limit of {}; only the factored operator was built",
                grid.n,
                povm::DENSE_LIMIT
            )),
            _ => {}
        }
    }
    report.tables.insert(0, summary);
    Ok(report)
}

fn eigen_table(values: &[f64]) -> Table {
    let mut t = Table::new("eigenvalues", &["index", "value"]);
    for (i, v) in values.iter().enumerate() {
        t.push(vec![Cell::Int(i), Cell::Num(*v)]);
    }
    t
}
