//! Test media shared by the acceptance checks and the benchmarks.

use lossyrom::media::{make_profile, Bump, Layer, MediumKind};
use lossyrom::MediumProfile;

pub const CELLS: usize = 3000;

/// Two impedance bumps over a constant loss of 1.
pub fn bumpy_impedance() -> MediumProfile {
    make_profile(
        &MediumKind::Smooth {
            zeta0: 1.0,
            r0: 1.0,
            zeta_bumps: vec![
                Bump {
                    center: 0.35,
                    width: 0.1,
                    height: 0.5,
                },
                Bump {
                    center: 0.7,
                    width: 0.08,
                    height: -0.15,
                },
            ],
            loss_bumps: vec![],
        },
        1.0,
        CELLS,
    )
    .unwrap()
}

/// Same impedance with a loss bump of height `alpha` on the unit mean.
pub fn bumpy_lossy(alpha: f64) -> MediumProfile {
    make_profile(
        &MediumKind::Smooth {
            zeta0: 1.0,
            r0: 1.0,
            zeta_bumps: vec![
                Bump {
                    center: 0.35,
                    width: 0.1,
                    height: 0.5,
                },
                Bump {
                    center: 0.7,
                    width: 0.08,
                    height: -0.15,
                },
            ],
            loss_bumps: vec![Bump {
                center: 0.55,
                width: 0.1,
                height: alpha,
            }],
        },
        1.0,
        CELLS,
    )
    .unwrap()
}

/// Loss `r0 (1 + a sin(2 pi T))`: zero-mean variation of relative size `a`.
pub fn oscillating_loss(a: f64) -> MediumProfile {
    let z = |t: f64| 1.0 + 0.4 * (-((t - 0.4) / 0.12f64).powi(2)).exp();
    MediumProfile::from_fn(1.0, CELLS, z, |t| {
        1.0 + a * (2.0 * std::f64::consts::PI * t).sin()
    })
    .unwrap()
}

/// Piecewise-constant impedance and loss layers.
pub fn layered() -> MediumProfile {
    make_profile(
        &MediumKind::Discontinuous {
            zeta0: 1.0,
            r0: 0.8,
            zeta_layers: vec![Layer {
                start: 0.3,
                end: 0.5,
                value: 0.6,
            }],
            loss_layers: vec![Layer {
                start: 0.55,
                end: 0.75,
                value: 0.3,
            }],
        },
        1.0,
        CELLS,
    )
    .unwrap()
}

/// Wide bumps, well inside a short Fourier basis.
pub fn gentle() -> MediumProfile {
    make_profile(
        &MediumKind::Smooth {
            zeta0: 1.0,
            r0: 1.0,
            zeta_bumps: vec![Bump {
                center: 0.45,
                width: 0.15,
                height: 0.4,
            }],
            loss_bumps: vec![Bump {
                center: 0.6,
                width: 0.15,
                height: 0.2,
            }],
        },
        1.0,
        CELLS,
    )
    .unwrap()
}

pub fn constant(zeta0: f64, r0: f64) -> MediumProfile {
    MediumProfile::from_fn(1.0, CELLS, |_| zeta0, |_| r0).unwrap()
}
