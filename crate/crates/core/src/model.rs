//! Five-level molecule: parameters, transition operators, decay channels.
//!
//! Levels are indexed `0..=4`. The first photon drives `0 -> 1`, level 1
//! decays into the shelving level 2, the second photon drives `2 -> 3` and
//! level 3 decays into the shelving level 4. Everything is in the frame
//! rotating with the two carriers, so the bare Hamiltonian vanishes.

use nalgebra::SMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const LEVELS: usize = 5;

pub type LevelMatrix = SMatrix<Complex64, LEVELS, LEVELS>;

#[derive(Clone, Debug, PartialEq)]
pub struct MoleculeParams {
    /// `1 -> 0`, radiative coupling to the first input mode.
    pub gamma1: f64,
    /// `1 -> 2`, feeds the first shelving level.
    pub gamma2: f64,
    /// `3 -> 2`, radiative coupling to the second input mode.
    pub gamma3: f64,
    /// `3 -> 4`, feeds the second shelving level.
    pub gamma4: f64,
    pub omega01: f64,
    pub omega23: f64,
    pub level_energies: Option<[f64; LEVELS]>,
}

impl Default for MoleculeParams {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

impl MoleculeParams {
    pub fn new(gamma1: f64, gamma2: f64, gamma3: f64, gamma4: f64) -> Self {
        Self {
            gamma1,
            gamma2,
            gamma3,
            gamma4,
            omega01: 0.0,
            omega23: 0.0,
            level_energies: None,
        }
    }

    pub fn uniform(gamma: f64) -> Self {
        Self::new(gamma, gamma, gamma, gamma)
    }

    pub fn with_level_energies(mut self, energies: [f64; LEVELS]) -> Self {
        self.omega01 = energies[1] - energies[0];
        self.omega23 = energies[3] - energies[2];
        self.level_energies = Some(energies);
        self
    }

    pub fn validate(self) -> Result<Self> {
        let rates = [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma3", self.gamma3),
            ("gamma4", self.gamma4),
        ];
        for (name, value) in rates {
            if !value.is_finite() {
                return Err(Error::NonFinite(name.to_string()));
            }
            if value <= 0.0 {
                return Err(Error::InvalidRate { name, value });
            }
        }
        for (name, value) in [("omega01", self.omega01), ("omega23", self.omega23)] {
            if !value.is_finite() {
                return Err(Error::NonFinite(name.to_string()));
            }
        }
        if let Some(e) = self.level_energies {
            if e.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("level_energies".to_string()));
            }
            let tol = 1e-12 * e.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            if (self.omega01 - (e[1] - e[0])).abs() > tol {
                return Err(Error::Inconsistent("omega01 differs from level energies".into()));
            }
            if (self.omega23 - (e[3] - e[2])).abs() > tol {
                return Err(Error::Inconsistent("omega23 differs from level energies".into()));
            }
        }
        Ok(self)
    }

    /// Total decay rate of level 1.
    pub fn gamma_first(&self) -> f64 {
        self.gamma1 + self.gamma2
    }

    /// Total decay rate of level 3.
    pub fn gamma_second(&self) -> f64 {
        self.gamma3 + self.gamma4
    }

    pub fn max_rate(&self) -> f64 {
        self.gamma1.max(self.gamma2).max(self.gamma3).max(self.gamma4)
    }

    pub fn min_rate(&self) -> f64 {
        self.gamma1.min(self.gamma2).min(self.gamma3).min(self.gamma4)
    }

    /// The four fixed decay channels in the order
    /// `sqrt(g1)|0><1|, sqrt(g2)|2><1|, sqrt(g3)|2><3|, sqrt(g4)|4><3|`.
    pub fn decay_channels(&self) -> [Jump; 4] {
        [
            Jump::new(1, 0, self.gamma1),
            Jump::new(1, 2, self.gamma2),
            Jump::new(3, 2, self.gamma3),
            Jump::new(3, 4, self.gamma4),
        ]
    }
}

/// A single-transition collapse operator `sqrt(rate) |to><from|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jump {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

impl Jump {
    pub const fn new(from: usize, to: usize, rate: f64) -> Self {
        Self { from, to, rate }
    }

    pub fn operator(&self) -> LevelOperator {
        let mut op = transition_operator(self.from, self.to).expect("jump indices are static");
        op.matrix *= Complex64::new(self.rate.sqrt(), 0.0);
        op
    }

    /// Adds `D[rho]` for this jump into `out` without forming matrices.
    pub fn accumulate_dissipator(&self, rho: &LevelMatrix, out: &mut LevelMatrix) {
        let (a, b, r) = (self.to, self.from, self.rate);
        let h = 0.5 * r;
        out[(a, a)] += rho[(b, b)] * r;
        for k in 0..LEVELS {
            out[(b, k)] -= rho[(b, k)] * h;
            out[(k, b)] -= rho[(k, b)] * h;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelOperator {
    pub matrix: LevelMatrix,
    pub label: String,
}

/// Largest entry modulus of any complex matrix.
pub fn max_abs<'a, I: IntoIterator<Item = &'a Complex64>>(entries: I) -> f64 {
    entries.into_iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `|F_to><F_from|`.
pub fn transition_operator(from: usize, to: usize) -> Result<LevelOperator> {
    if from >= LEVELS {
        return Err(Error::LevelIndex(from));
    }
    if to >= LEVELS {
        return Err(Error::LevelIndex(to));
    }
    let mut matrix = LevelMatrix::zeros();
    matrix[(to, from)] = Complex64::new(1.0, 0.0);
    Ok(LevelOperator {
        matrix,
        label: format!("|F{to}><F{from}|"),
    })
}

pub fn projector(level: usize) -> Result<LevelOperator> {
    transition_operator(level, level)
}

/// Lindblad dissipator `X rho X^dag - {X^dag X, rho}/2` for a general operator.
pub fn lindblad_dissipator(x: &LevelOperator, rho: &LevelMatrix) -> LevelMatrix {
    let x = &x.matrix;
    let xd = x.adjoint();
    let xdx = xd * x;
    x * rho * xd - (xdx * rho + rho * xdx) * Complex64::new(0.5, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn transition_entries() {
        let op = transition_operator(1, 0).unwrap();
        assert_eq!(op.matrix[(0, 1)], c(1.0));
        assert_eq!(op.matrix.iter().filter(|z| z.norm() > 0.0).count(), 1);
        let p = transition_operator(0, 0).unwrap();
        assert_eq!(p.matrix[(0, 0)], c(1.0));
        let h = transition_operator(3, 4).unwrap();
        assert_eq!(h.matrix[(4, 3)], c(1.0));
        assert!(matches!(transition_operator(5, 0), Err(Error::LevelIndex(5))));
        assert!(matches!(transition_operator(0, 7), Err(Error::LevelIndex(7))));
    }

    #[test]
    fn validation() {
        assert!(MoleculeParams::uniform(1.0).validate().is_ok());
        let mut p = MoleculeParams::uniform(1.0);
        p.gamma2 = 0.0;
        assert!(matches!(p.validate(), Err(Error::InvalidRate { name: "gamma2", .. })));
        let mut p = MoleculeParams::uniform(1.0);
        p.gamma3 = -1.0;
        assert!(matches!(p.validate(), Err(Error::InvalidRate { name: "gamma3", .. })));
        let mut p = MoleculeParams::uniform(1.0);
        p.gamma1 = f64::NAN;
        assert!(matches!(p.validate(), Err(Error::NonFinite(_))));
        let mut p = MoleculeParams::uniform(1.0);
        p.gamma4 = f64::INFINITY;
        assert!(matches!(p.validate(), Err(Error::NonFinite(_))));
        let p = MoleculeParams::uniform(1.0).with_level_energies([0.0, 5.0, 1.0, 7.0, 2.0]);
        assert_eq!(p.omega01, 5.0);
        assert_eq!(p.omega23, 6.0);
        assert!(p.clone().validate().is_ok());
        let mut bad = p;
        bad.omega23 = 1.0;
        assert!(matches!(bad.validate(), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn projectors_resolve_identity() {
        let sum = (0..LEVELS).fold(LevelMatrix::zeros(), |acc, k| acc + projector(k).unwrap().matrix);
        assert_eq!(sum, LevelMatrix::identity());
    }

    #[test]
    fn dissipator_examples() {
        let x = transition_operator(1, 0).unwrap();
        let rho = projector(1).unwrap().matrix;
        let d = lindblad_dissipator(&x, &rho);
        let expect = projector(0).unwrap().matrix - projector(1).unwrap().matrix;
        assert!((d - expect).norm() < 1e-15);
        let ground = projector(0).unwrap().matrix;
        assert!(lindblad_dissipator(&x, &ground).norm() < 1e-15);
    }

    #[test]
    fn jump_fast_path_matches_dense() {
        let params = MoleculeParams::new(1.0, 0.7, 1.3, 0.4);
        let mut rho = LevelMatrix::zeros();
        for i in 0..LEVELS {
            for j in 0..LEVELS {
                rho[(i, j)] = Complex64::new((i * 7 + j) as f64 * 0.01, (i as f64 - j as f64) * 0.03);
            }
        }
        for jump in params.decay_channels() {
            let mut fast = LevelMatrix::zeros();
            jump.accumulate_dissipator(&rho, &mut fast);
            let dense = lindblad_dissipator(&jump.operator(), &rho);
            assert!((fast - dense).norm() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn composition_rule(i in 0usize..5, j in 0usize..5, k in 0usize..5, l in 0usize..5) {
            // |F_j><F_i| |F_l><F_k| = delta(i, l) |F_j><F_k|
            let a = transition_operator(i, j).unwrap().matrix;
            let b = transition_operator(k, l).unwrap().matrix;
            let prod = a * b;
            if i == l {
                prop_assert_eq!(prod, transition_operator(k, j).unwrap().matrix);
            } else {
                prop_assert_eq!(prod, LevelMatrix::zeros());
            }
        }

        #[test]
        fn dissipator_is_traceless(entries in proptest::collection::vec(-1.0f64..1.0, 50),
                                   from in 0usize..5, to in 0usize..5, rate in 0.01f64..5.0) {
            let mut m = LevelMatrix::zeros();
            for i in 0..LEVELS {
                for j in 0..LEVELS {
                    m[(i, j)] = Complex64::new(entries[i * 5 + j], entries[25 + i * 5 + j]);
                }
            }
            let rho = m + m.adjoint();
            let jump = Jump::new(from, to, rate);
            let d = lindblad_dissipator(&jump.operator(), &rho);
            prop_assert!(d.trace().norm() < 1e-12);
        }
    }
}
