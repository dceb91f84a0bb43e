//! TOML run configuration.
//!
//! ```toml
//! [molecule]
//! gamma = [1.0, 1.0, 1.0, 1.0]
//!
//! [alpha]
//! shape = "gaussian"   # gaussian | exponential | table
//! sigma = 0.5          # standard deviation of |u(t)|^2
//! center = 0.0
//!
//! [beta]
//! shape = "exponential"
//! kappa = 1.0
//! delay = 0.5          # onset time
//!
//! [run]
//! engine = "all"       # gdm | liouvillian | analytic | all
//!
//! [[axis]]             # sweeps only
//! name = "alpha.sigma"
//! values = [0.25, 0.5, 1.0]
//!
//! [sweep]
//! quantities = ["p_overlap", "rho2424_inf"]
//!
//! [povm]
//! order = 1
//! start = 0.0
//! end = 10.0
//! ```
//!
//! Table pulses read `file` (columns `t, re, im`, optional header) relative to
//! the config file.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;
use twophoton_core::pulses::Table;
use twophoton_core::{MoleculeParams, PulseEnvelope};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub molecule: MoleculeConfig,
    pub alpha: Option<PulseConfig>,
    pub beta: Option<PulseConfig>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub axis: Vec<Axis>,
    #[serde(default)]
    pub sweep: SweepConfig,
    pub povm: Option<PovmConfig>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeConfig {
    #[serde(default = "unit_rates")]
    pub gamma: [f64; 4],
}

fn unit_rates() -> [f64; 4] {
    [1.0; 4]
}

impl Default for MoleculeConfig {
    fn default() -> Self {
        Self { gamma: unit_rates() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Gaussian,
    Exponential,
    Table,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub shape: ShapeKind,
    pub sigma: Option<f64>,
    pub center: Option<f64>,
    pub kappa: Option<f64>,
    pub delay: Option<f64>,
    #[serde(default)]
    pub detuning: f64,
    pub file: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Gdm,
    Liouvillian,
    Analytic,
    #[default]
    All,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub engine: Engine,
    /// Integrator step; defaults to a fortieth of the fastest rate.
    pub dt: Option<f64>,
    /// Keep every `stride`-th step in exported trajectories.
    pub stride: Option<usize>,
    /// Extra coherences to export, as `label:row:col` (e.g. `0a:0:1`).
    #[serde(default)]
    pub coherences: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
pub enum Quantity {
    #[serde(rename = "p_alpha")]
    PAlpha,
    #[serde(rename = "p_beta")]
    PBeta,
    #[serde(rename = "p_overlap")]
    POverlap,
    #[serde(rename = "rho2424_inf")]
    Rho2424,
    #[serde(rename = "F2_inf")]
    F2,
    #[serde(rename = "F4_inf")]
    F4,
}

impl Quantity {
    pub const ALL: [Quantity; 6] = [
        Quantity::PAlpha,
        Quantity::PBeta,
        Quantity::POverlap,
        Quantity::Rho2424,
        Quantity::F2,
        Quantity::F4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::PAlpha => "p_alpha",
            Quantity::PBeta => "p_beta",
            Quantity::POverlap => "p_overlap",
            Quantity::Rho2424 => "rho2424_inf",
            Quantity::F2 => "F2_inf",
            Quantity::F4 => "F4_inf",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_quantities")]
    pub quantities: Vec<Quantity>,
    /// `analytic` (default) or `gdm`; the latter only for populations.
    #[serde(default = "analytic_engine")]
    pub engine: Engine,
}

fn default_quantities() -> Vec<Quantity> {
    vec![Quantity::PAlpha, Quantity::PBeta, Quantity::POverlap, Quantity::Rho2424]
}

fn analytic_engine() -> Engine {
    Engine::Analytic
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            quantities: default_quantities(),
            engine: Engine::Analytic,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmConfig {
    pub order: u8,
    #[serde(default)]
    pub start: f64,
    pub end: f64,
    /// Cells per photon axis; defaults to the coarsest admissible grid.
    pub cells: Option<usize>,
    /// Eigendecompose (dense matrices only).
    #[serde(default = "yes")]
    pub eigen: bool,
}

fn yes() -> bool {
    true
}

pub fn parse(text: &str, base_dir: &Path) -> CliResult<Config> {
    let de = toml::Deserializer::new(text);
    let mut cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(if path == "." { String::from("<root>") } else { path }, e.into_inner().message().to_string())
    })?;
    cfg.base_dir = base_dir.to_path_buf();
    for (i, axis) in cfg.axis.iter().enumerate() {
        if axis.values.is_empty() {
            return Err(CliError::config(format!("axis[{i}].values"), "axis has no values"));
        }
    }
    Ok(cfg)
}

pub fn load(path: &Path) -> CliResult<Config> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        file: path.to_path_buf(),
        source,
    })?;
    parse(&text, path.parent().unwrap_or(Path::new(".")))
}

impl Config {
    pub fn params(&self) -> CliResult<MoleculeParams> {
        let [a, b, c, d] = self.molecule.gamma;
        MoleculeParams::new(a, b, c, d)
            .validate()
            .map_err(|e| CliError::config("molecule.gamma", e.to_string()))
    }

    pub fn pulse(&self, which: &str) -> CliResult<PulseEnvelope> {
        let p = match which {
            "alpha" => self.alpha.as_ref(),
            _ => self.beta.as_ref(),
        }
        .ok_or_else(|| CliError::config(which, "missing pulse section"))?;
        p.build(which, &self.base_dir)
    }

    /// Sets one named parameter; used by sweep axes.
    pub fn set(&mut self, name: &str, value: f64) -> CliResult<()> {
        let bad = || CliError::config(name, "unknown axis name");
        if let Some(k) = name.strip_prefix("gamma") {
            let k: usize = k.parse().map_err(|_| bad())?;
            if !(1..=4).contains(&k) {
                return Err(bad());
            }
            self.molecule.gamma[k - 1] = value;
            return Ok(());
        }
        if name == "delay" {
            // offset of the second photon: centre for Gaussians, onset otherwise
            let beta = self.beta.as_mut().ok_or_else(|| CliError::config("beta", "missing pulse section"))?;
            match beta.shape {
                ShapeKind::Gaussian => beta.center = Some(value),
                _ => beta.delay = Some(value),
            }
            return Ok(());
        }
        let (section, field) = name.split_once('.').ok_or_else(bad)?;
        let pulse = match section {
            "alpha" => self.alpha.as_mut(),
            "beta" => self.beta.as_mut(),
            _ => return Err(bad()),
        }
        .ok_or_else(|| CliError::config(section, "missing pulse section"))?;
        match field {
            "sigma" => pulse.sigma = Some(value),
            "center" => pulse.center = Some(value),
            "kappa" => pulse.kappa = Some(value),
            "inverse_kappa" => pulse.kappa = Some(1.0 / value),
            "delay" => pulse.delay = Some(value),
            "detuning" => pulse.detuning = value,
            _ => return Err(bad()),
        }
        Ok(())
    }
}

impl PulseConfig {
    pub fn gaussian(sigma: f64, center: f64) -> Self {
        Self {
            shape: ShapeKind::Gaussian,
            sigma: Some(sigma),
            center: Some(center),
            kappa: None,
            delay: None,
            detuning: 0.0,
            file: None,
        }
    }

    pub fn exponential(kappa: f64, delay: f64) -> Self {
        Self {
            shape: ShapeKind::Exponential,
            sigma: None,
            center: None,
            kappa: Some(kappa),
            delay: Some(delay),
            detuning: 0.0,
            file: None,
        }
    }

    pub fn build(&self, section: &str, base_dir: &Path) -> CliResult<PulseEnvelope> {
        let need = |v: Option<f64>, field: &str| {
            v.ok_or_else(|| CliError::config(format!("{section}.{field}"), format!("required for shape {:?}", self.shape)))
        };
        let pulse = match self.shape {
            ShapeKind::Gaussian => PulseEnvelope::gaussian(need(self.sigma, "sigma")?, self.center.unwrap_or(0.0))
                .map_err(|e| CliError::config(format!("{section}.sigma"), e.to_string()))?,
            ShapeKind::Exponential => PulseEnvelope::exponential(need(self.kappa, "kappa")?, self.delay.unwrap_or(0.0))
                .map_err(|e| CliError::config(format!("{section}.kappa"), e.to_string()))?,
            ShapeKind::Table => {
                let file = self
                    .file
                    .as_ref()
                    .ok_or_else(|| CliError::config(format!("{section}.file"), "required for shape table"))?;
                let table = read_table(&base_dir.join(file), &format!("{section}.file"))?;
                PulseEnvelope::tabulated(table)
                    .map_err(|e| CliError::config(format!("{section}.file"), e.to_string()))?
                    .with_delay(self.delay.unwrap_or(0.0))
            }
        };
        Ok(pulse.with_detuning(self.detuning))
    }
}

/// Reads `t, re, im` rows; `im` may be omitted.
pub fn read_table(path: &Path, field: &str) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::config(field, format!("{}: {e}", path.display())))?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| CliError::config(field, format!("{}: {e}", path.display())))?;
        let num = |k: usize| row.get(k).map(str::parse::<f64>);
        match (num(0), num(1)) {
            (Some(Ok(t)), Some(Ok(re))) => {
                let im = match num(2) {
                    Some(Ok(v)) => v,
                    None => 0.0,
                    Some(Err(_)) => return Err(CliError::config(field, format!("row {}: bad imaginary part", i + 1))),
                };
                times.push(t);
                values.push(Complex64::new(re, im));
            }
            _ if i == 0 => continue,
            _ => return Err(CliError::config(field, format!("row {}: expected t, re[, im]", i + 1))),
        }
    }
    Table::new(times, values).map_err(|e| CliError::config(field, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_example() {
        let text = r#"
            [molecule]
            gamma = [1.0, 2.0, 1.0, 1.0]
            [alpha]
            shape = "gaussian"
            sigma = 0.5
            [beta]
            shape = "exponential"
            kappa = 1.0
            delay = 0.5
            [[axis]]
            name = "alpha.sigma"
            values = [0.25, 0.5]
            [sweep]
            quantities = ["p_overlap", "F4_inf"]
        "#;
        let mut cfg = parse(text, Path::new(".")).unwrap();
        assert_eq!(cfg.params().unwrap().gamma2, 2.0);
        assert_eq!(cfg.sweep.quantities, vec![Quantity::POverlap, Quantity::F4]);
        cfg.set("delay", 3.0).unwrap();
        assert_eq!(cfg.beta.as_ref().unwrap().delay, Some(3.0));
        assert_eq!(cfg.pulse("beta").unwrap().delay, 3.0);
        assert!(cfg.set("alpha.width", 1.0).is_err());
    }

    #[test]
    fn schema_errors_name_the_field() {
        let err = parse("[alpha]\nshape = \"gaussian\"\nsigm = 1.0\n", Path::new(".")).unwrap_err();
        assert!(matches!(&err, CliError::Config { path, .. } if path.starts_with("alpha")), "{err}");
        assert_eq!(err.exit_code(), 2);
        let err = parse("[[axis]]\nname = \"delay\"\nvalues = []\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("axis[0].values"));
        let cfg = parse("[alpha]\nshape = \"gaussian\"\n", Path::new(".")).unwrap();
        let err = cfg.pulse("alpha").unwrap_err();
        assert!(err.to_string().contains("alpha.sigma"));
    }

    #[test]
    fn table_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let rows: String = (0..=400)
            .map(|k| {
                let t = k as f64 * 0.025;
                format!("{t},{},0\n", (2.0 * std::f64::consts::PI * 0.25).powf(-0.25) * (-(t - 5.0) * (t - 5.0) / 1.0).exp())
            })
            .collect();
        std::fs::write(&path, format!("t,re,im\n{rows}")).unwrap();
        let text = "[alpha]\nshape = \"table\"\nfile = \"u.csv\"\n";
        let cfg = parse(text, dir.path()).unwrap();
        let p = cfg.pulse("alpha").unwrap();
        assert!((p.cumulative(10.0) - 1.0).abs() < 1e-12);
    }
}
