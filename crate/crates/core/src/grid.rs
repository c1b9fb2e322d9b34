//! Spectrally matched staggered grid: the ladder coefficients of the
//! lossless constant reference medium, read as step sizes.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratfit::SpectralData;
use crate::rom::{extract_coefficients, lanczos, Reorth};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaggeredGrid {
    pub h: Vec<f64>,
    pub h_hat: Vec<f64>,
    /// `T_1 .. T_{n+1}` with `T_1 = 0`.
    pub t_primary: Vec<f64>,
    /// `T̂_0 .. T̂_n` with `T̂_0 = 0`.
    pub t_dual: Vec<f64>,
    pub t_max: f64,
}

impl StaggeredGrid {
    pub fn from_steps(h: Vec<f64>, h_hat: Vec<f64>, t_max: f64) -> Self {
        let acc = |v: &[f64]| {
            let mut out = vec![0.0];
            let mut s = 0.0;
            for x in v {
                s += x;
                out.push(s);
            }
            out
        };
        let t_primary = acc(&h);
        let t_dual = acc(&h_hat);
        StaggeredGrid {
            h,
            h_hat,
            t_primary,
            t_dual,
            t_max,
        }
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    /// `ĥ_1 < h_1 < ĥ_2 < ... < ĥ_n < h_n`.
    pub fn steps_interlace(&self) -> bool {
        let chain: Vec<f64> = self
            .h_hat
            .iter()
            .zip(&self.h)
            .flat_map(|(a, b)| [*a, *b])
            .collect();
        chain.iter().all(|&x| x > 0.0) && chain.windows(2).all(|w| w[0] < w[1])
    }

    /// `T_j < T̂_j < T_{j+1}` for every `j`.
    pub fn nodes_interlace(&self) -> bool {
        (1..=self.n())
            .all(|j| self.t_primary[j - 1] < self.t_dual[j] && self.t_dual[j] < self.t_primary[j])
    }

    /// Primary node `T_j` (1-based) clamped to `t_max`.
    pub fn primary_node(&self, j: usize) -> f64 {
        self.t_primary[j - 1].min(self.t_max)
    }

    /// Dual node `T̂_j` clamped to `t_max`.
    pub fn dual_node(&self, j: usize) -> f64 {
        self.t_dual[j].min(self.t_max)
    }
}

/// Poles `i (j - 1/2) pi / t_max` and equal residues `zeta0 / t_max`.
pub fn reference_spectral_data(n: usize, t_max: f64, zeta0: f64) -> SpectralData {
    SpectralData {
        poles: (1..=n)
            .map(|j| Complex64::new(0.0, (j as f64 - 0.5) * PI / t_max))
            .collect(),
        residues: vec![Complex64::new(zeta0 / t_max, 0.0); n],
        zeta0,
    }
}

pub fn spectrally_matched_grid(n: usize, t_max: f64) -> Result<StaggeredGrid> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("grid needs n >= 2, got {n}")));
    }
    if !(t_max > 0.0) {
        return Err(Error::InvalidInput("t_max must be positive".into()));
    }
    let data = reference_spectral_data(n, t_max, 1.0);
    let c = lanczos(&data, Reorth::Auto)
        .and_then(|m| extract_coefficients(&m))
        .map_err(|e| {
            log::error!("reference grid construction failed: {e}");
            e
        })?;
    Ok(StaggeredGrid::from_steps(c.gammas, c.gamma_hats, t_max))
}

/// Mid-range step asymptotics `h_j ~ 2 t_max / (pi sqrt(n^2 - j^2))`.
pub fn asymptotic_step(n: usize, j: usize, t_max: f64) -> f64 {
    let (n, j) = (n as f64, j as f64);
    2.0 * t_max / (PI * (n * n - j * j).sqrt())
}
