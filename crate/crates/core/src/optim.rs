//! Gauss-Newton refinement in ROM-coefficient space over Fourier media.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{assemble_fd, exact_spectral_data, sample_transfer, DEFAULT_SAMPLES};
use crate::grid::{spectrally_matched_grid, StaggeredGrid};
use crate::invert::{loss_interpolants, InversionMethod, InversionResult};
use crate::linalg::lstsq;
use crate::media::{FourierMedium, MediumProfile};
use crate::ratfit::{add_noise, estimate_r0, fit_poles_residues};
use crate::rom::{extract_coefficients, lanczos, Reorth, RomCoefficients};
use crate::sampled::{uniform_grid, PiecewiseLinear};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extraction {
    /// Eigendata of the discrete operator.
    Exact,
    /// Sampled transfer function, loss estimate and vector fitting.
    Ratfit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardSettings {
    pub fd_cells: usize,
    /// Defaults to [`default_omega_max`].
    pub omega_max: Option<f64>,
    pub n_samples: usize,
    pub noise_level: f64,
    pub seed: u64,
    pub reorth: Reorth,
}

impl Default for ForwardSettings {
    fn default() -> Self {
        ForwardSettings {
            fd_cells: 3000,
            omega_max: None,
            n_samples: DEFAULT_SAMPLES,
            noise_level: 0.0,
            seed: 0,
            reorth: Reorth::Auto,
        }
    }
}

/// Band edge for ROM order `n`: 93, 124 and 281 for `n` = 10, 40, 90 at unit
/// length, otherwise just past the `n`-th asymptotic mode.
pub fn default_omega_max(n: usize, t_max: f64) -> f64 {
    let unit = match n {
        10 => 93.0,
        40 => 124.0,
        90 => 281.0,
        _ => ((n as f64 + 0.5) * std::f64::consts::PI).max(93.0),
    };
    unit / t_max
}

/// Medium to ladder coefficients along the chosen extraction path.
pub fn forward_to_rom(
    m: &MediumProfile,
    n: usize,
    extraction: Extraction,
    s: &ForwardSettings,
) -> Result<RomCoefficients> {
    let op = assemble_fd(m, s.fd_cells)?;
    let data = match extraction {
        Extraction::Exact => exact_spectral_data(&op, n)?,
        Extraction::Ratfit => {
            let omega_max = s.omega_max.unwrap_or_else(|| default_omega_max(n, m.t_max));
            let clean = sample_transfer(&op, omega_max, s.n_samples)?;
            let samples = add_noise(&clean, s.noise_level, s.seed);
            let tail = estimate_r0(&samples, m.t_max, m.zeta0)?;
            fit_poles_residues(&samples, Some(&tail), n)?.data
        }
    };
    extract_coefficients(&lanczos(&data, s.reorth)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientFamily {
    RPrimary,
    RDual,
    Zeta,
    ZetaHat,
}

pub const CANONICAL_ORDER: [CoefficientFamily; 4] = [
    CoefficientFamily::RPrimary,
    CoefficientFamily::RDual,
    CoefficientFamily::Zeta,
    CoefficientFamily::ZetaHat,
];

/// The four coefficient families compared by the objective, stacked in `order`.
pub fn misfit_vector(
    c: &RomCoefficients,
    g: &StaggeredGrid,
    order: &[CoefficientFamily; 4],
) -> Vec<f64> {
    let mut out = Vec::with_capacity(4 * c.n());
    for f in order {
        match f {
            CoefficientFamily::RPrimary => out.extend(&c.r_primary),
            CoefficientFamily::RDual => out.extend(&c.r_dual),
            CoefficientFamily::Zeta => {
                out.extend(g.h_hat.iter().zip(&c.gamma_hats).map(|(h, gh)| h / gh))
            }
            CoefficientFamily::ZetaHat => {
                out.extend(c.gammas.iter().zip(&g.h).map(|(gm, h)| gm / h))
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnSettings {
    pub max_iter: usize,
    /// Stop once an accepted step lowers the objective by less than this
    /// fraction.
    pub tol: f64,
    /// Forward-difference step on the Fourier coefficients.
    pub delta: f64,
    pub fd_cells: usize,
    pub reorth: Reorth,
    pub order: [CoefficientFamily; 4],
}

impl Default for GnSettings {
    fn default() -> Self {
        GnSettings {
            max_iter: 10,
            tol: 1e-4,
            delta: 0.01,
            fd_cells: 3000,
            reorth: Reorth::Auto,
            order: CANONICAL_ORDER,
        }
    }
}

/// Objective values at or below this count as an exact fit.
pub const OBJECTIVE_FLOOR: f64 = 1e-12;
pub const MAX_HALVINGS: usize = 8;
pub const STEP_RCOND: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub step_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptState {
    pub medium: FourierMedium,
    pub objective: f64,
    pub iteration: usize,
    pub rom_search: RomCoefficients,
    pub trace: Vec<TraceRow>,
    /// Set when the line search gave up.
    pub warning: Option<String>,
}

/// Sampled profile of a Fourier medium on `cells` cells.
pub fn fourier_profile(f: &FourierMedium, cells: usize) -> Result<MediumProfile> {
    MediumProfile::from_fn(f.t_max, cells, |t| f.zeta(t), |t| f.loss(t))
}

fn search_rom(f: &FourierMedium, n: usize, s: &GnSettings) -> Result<RomCoefficients> {
    let m = fourier_profile(f, s.fd_cells)?;
    let op = assemble_fd(&m, s.fd_cells)?;
    extract_coefficients(&lanczos(&exact_spectral_data(&op, n)?, s.reorth)?)
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Forward-difference Jacobian of the misfit vector; a probe that leaves
/// the admissible media is retried once with a tenth of the step.
pub fn jacobian(
    f: &FourierMedium,
    base: &[f64],
    n: usize,
    g: &StaggeredGrid,
    s: &GnSettings,
    delta: f64,
) -> Result<DMatrix<f64>> {
    let p = f.params();
    let cols: Vec<Vec<f64>> = (0..p.len())
        .into_par_iter()
        .map(|k| {
            let probe = |d: f64| -> Result<Vec<f64>> {
                let mut q = p.clone();
                q[k] += d;
                let c = search_rom(&f.with_params(&q), n, s)?;
                Ok(misfit_vector(&c, g, &s.order)
                    .iter()
                    .zip(base)
                    .map(|(a, b)| (a - b) / d)
                    .collect())
            };
            match probe(delta) {
                Err(Error::InvalidMedium(_)) | Err(Error::SmallLossRegime(_)) => {
                    probe(delta / 10.0)
                }
                other => other,
            }
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(base.len(), p.len(), |i, k| cols[k][i]))
}

/// Minimizes the squared coefficient misfit to `data` starting from `init`.
pub fn gauss_newton(
    data: &RomCoefficients,
    init: &FourierMedium,
    n: usize,
    s: &GnSettings,
) -> Result<OptState> {
    if data.n() != n {
        return Err(Error::InvalidInput(format!(
            "data ROM has order {}, expected {n}",
            data.n()
        )));
    }
    let g = spectrally_matched_grid(n, init.t_max)?;
    let target = misfit_vector(data, &g, &s.order);
    let eval = |f: &FourierMedium| -> Result<(RomCoefficients, Vec<f64>, f64)> {
        let c = search_rom(f, n, s)?;
        let v = misfit_vector(&c, &g, &s.order);
        let obj = sum_sq(
            &v.iter()
                .zip(&target)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        Ok((c, v, obj))
    };

    let mut medium = init.clone();
    let (mut rom, mut current, mut objective) = eval(&medium)?;
    let mut trace = vec![TraceRow {
        iter: 0,
        objective,
        step_norm: 0.0,
    }];
    let mut warning = None;
    let mut iteration = 0;
    while iteration < s.max_iter && objective > OBJECTIVE_FLOOR {
        let jac = jacobian(&medium, &current, n, &g, s, s.delta)?;
        let rhs = DVector::from_iterator(
            target.len(),
            target.iter().zip(&current).map(|(a, b)| a - b),
        );
        let (step, _) = lstsq(jac, &rhs, STEP_RCOND)?;
        let p = medium.params();
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let q: Vec<f64> = p
                .iter()
                .zip(step.iter())
                .map(|(a, b)| a + scale * b)
                .collect();
            let trial = medium.with_params(&q);
            // inadmissible trial media count as no decrease
            if let Ok((c, v, obj)) = eval(&trial) {
                if obj < objective {
                    accepted = Some((trial, c, v, obj));
                    break;
                }
            }
            scale *= 0.5;
        }
        iteration += 1;
        let Some((trial, c, v, obj)) = accepted else {
            let msg = format!("line search found no decrease after {MAX_HALVINGS} halvings");
            log::warn!("{msg} at iteration {iteration}");
            warning = Some(msg);
            break;
        };
        let decrease = (objective - obj) / objective;
        let step_norm = scale * step.norm();
        log::info!("Gauss-Newton {iteration}: objective {obj:.6e}, step {step_norm:.3e}");
        medium = trial;
        rom = c;
        current = v;
        objective = obj;
        trace.push(TraceRow {
            iter: iteration,
            objective,
            step_norm,
        });
        if decrease < s.tol {
            break;
        }
    }
    Ok(OptState {
        medium,
        objective,
        iteration,
        rom_search: rom,
        trace,
        warning,
    })
}

impl OptState {
    /// The optimized medium as an inversion result sampled on `cells` cells.
    pub fn to_inversion_result(&self, cells: usize) -> Result<InversionResult> {
        let prof = fourier_profile(&self.medium, cells)?;
        let t = uniform_grid(self.medium.t_max, cells);
        let g = spectrally_matched_grid(self.rom_search.n(), self.medium.t_max)?;
        let (rf, rfh) = loss_interpolants(&self.rom_search, &g);
        Ok(InversionResult {
            zeta_est: PiecewiseLinear::new(t.clone(), prof.zeta_samples().to_vec()),
            loss_est: PiecewiseLinear::new(t, prof.loss_samples().to_vec()),
            mean_loss_est: crate::media::mean_loss(&prof),
            r_frak: rf,
            r_frak_hat: rfh,
            method: InversionMethod::Optimized,
            loss_values: Vec::new(),
            system_residual: None,
        })
    }
}
