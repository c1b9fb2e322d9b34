#![allow(dead_code)]

use lossyrom::media::{make_profile, Bump, MediumKind};
use lossyrom::MediumProfile;

pub const CELLS: usize = 3000;

/// Impedance bumps with a loss bump of height `alpha` on the unit loss.
pub fn smooth_lossy(alpha: f64) -> MediumProfile {
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

pub fn constant(zeta0: f64, r0: f64) -> MediumProfile {
    MediumProfile::from_fn(1.0, CELLS, |_| zeta0, |_| r0).unwrap()
}
