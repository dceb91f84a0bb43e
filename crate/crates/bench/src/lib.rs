//! Fixtures shared by the benchmarks.

use twophoton_core::{MoleculeParams, PulseEnvelope};

/// Matched Gaussian pair, sigma 0.5, second pulse three lifetimes later.
pub fn gaussian_pair() -> (MoleculeParams, PulseEnvelope, PulseEnvelope) {
    let a = PulseEnvelope::gaussian(0.5, 0.0).expect("valid pulse");
    let b = PulseEnvelope::gaussian(0.5, 3.0).expect("valid pulse");
    (MoleculeParams::uniform(1.0), a, b)
}

/// Start and end of the window covering both pulses.
pub fn window(a: &PulseEnvelope, b: &PulseEnvelope) -> (f64, f64) {
    (a.support().0.min(b.support().0), a.support().1.max(b.support().1))
}
