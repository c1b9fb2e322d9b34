//! Direct inversion on the spectrally matched grid: impedance from the
//! ladder coefficients, loss from a small linear system built on the
//! eigenfunctions of the estimated lossless operator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::StaggeredGrid;
use crate::linalg::{lstsq, symmetric_tridiagonal_lowest};
use crate::rom::RomCoefficients;
use crate::sampled::{PiecewiseConstant, PiecewiseLinear};

pub const DEFAULT_FINE_CELLS: usize = 3000;

/// Singular values below this fraction of the largest are dropped.
pub const LOSS_SYSTEM_RCOND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionMethod {
    GridDirect,
    Simple,
    Optimized,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InversionResult {
    pub zeta_est: PiecewiseLinear,
    pub loss_est: PiecewiseLinear,
    pub r_frak: PiecewiseConstant,
    pub r_frak_hat: PiecewiseConstant,
    pub method: InversionMethod,
    /// `(1/t_max) int (r_frak + r_frak_hat)`.
    pub mean_loss_est: f64,
    /// Interleaved `(r_1, r̂_1, r_2, ...)` for the grid-direct method.
    pub loss_values: Vec<f64>,
    /// `|A x - b| / |b|` of the loss system.
    pub system_residual: Option<f64>,
}

fn check_sizes(c: &RomCoefficients, g: &StaggeredGrid) -> Result<()> {
    if c.n() != g.n()
        || c.gamma_hats.len() != g.n()
        || c.r_primary.len() != g.n()
        || c.r_dual.len() != g.n()
    {
        return Err(Error::InvalidInput(format!(
            "coefficients of order {} on a grid of order {}",
            c.n(),
            g.n()
        )));
    }
    Ok(())
}

/// Interpolates `zeta_j = ĥ_j/γ̂_j` at `T_j` and `ζ̂_j = γ_j/h_j` at `T̂_j`,
/// constant beyond the last node.
pub fn impedance_from_rom(c: &RomCoefficients, g: &StaggeredGrid) -> Result<PiecewiseLinear> {
    check_sizes(c, g)?;
    let n = g.n();
    let mut x = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(2 * n);
    for j in 1..=n {
        let z = g.h_hat[j - 1] / c.gamma_hats[j - 1];
        let zh = c.gammas[j - 1] / g.h[j - 1];
        if !(z > 0.0) || !(zh > 0.0) {
            return Err(Error::ImpedanceNotPositive(j));
        }
        x.extend([g.primary_node(j), g.dual_node(j)]);
        y.extend([z, zh]);
    }
    Ok(PiecewiseLinear::new(x, y))
}

/// Lowest eigenpairs of the lossless operator for a given impedance, on a
/// uniform staggered grid: `phi`, `psi` at the nodes `k tau`, `phi_hat`,
/// `psi_hat` at the midpoints.
///
/// The `phi` family has a Neumann end at 0 and a Dirichlet end at
/// `t_max`; `psi` is Dirichlet at both. Normalization is
/// `int phi^2/zeta = int zeta phi_hat^2 = 1` in the discrete sense.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenBasis {
    pub n_modes: usize,
    pub theta: Vec<f64>,
    pub vartheta: Vec<f64>,
    pub t_max: f64,
    pub tau: f64,
    pub zeta: PiecewiseLinear,
    pub zeta_nodes: Vec<f64>,
    pub zeta_mid: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub phi_hat: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
    pub psi_hat: Vec<Vec<f64>>,
}

impl EigenBasis {
    fn node_density(&self, f: &[f64]) -> PiecewiseLinear {
        let y = f
            .iter()
            .zip(&self.zeta_nodes)
            .map(|(v, z)| v * v / z)
            .collect();
        PiecewiseLinear::uniform(self.t_max, y)
    }

    fn mid_density(&self, f: &[f64]) -> PiecewiseLinear {
        let x = (0..f.len()).map(|k| (k as f64 + 0.5) * self.tau).collect();
        let y = f
            .iter()
            .zip(&self.zeta_mid)
            .map(|(v, z)| v * v * z)
            .collect();
        PiecewiseLinear::new(x, y)
    }

    /// `phi_j^2 / zeta` (1-based `j`) as an interpolant.
    pub fn phi_density(&self, j: usize) -> PiecewiseLinear {
        self.node_density(&self.phi[j - 1])
    }

    pub fn phi_hat_density(&self, j: usize) -> PiecewiseLinear {
        self.mid_density(&self.phi_hat[j - 1])
    }

    pub fn psi_density(&self, j: usize) -> PiecewiseLinear {
        self.node_density(&self.psi[j - 1])
    }

    pub fn psi_hat_density(&self, j: usize) -> PiecewiseLinear {
        self.mid_density(&self.psi_hat[j - 1])
    }

    /// Largest deviation of the two Gram matrices of each family from the
    /// identity, by trapezoid quadrature.
    pub fn orthonormality_residual(&self) -> f64 {
        let n = self.n_modes;
        let w = |k: usize, len: usize| {
            if k == 0 || k + 1 == len {
                0.5 * self.tau
            } else {
                self.tau
            }
        };
        let mut worst: f64 = 0.0;
        for (f, fh) in [(&self.phi, &self.phi_hat), (&self.psi, &self.psi_hat)] {
            for a in 0..n {
                for b in 0..=a {
                    let len = f[a].len();
                    let g: f64 = (0..len)
                        .map(|k| w(k, len) * f[a][k] * f[b][k] / self.zeta_nodes[k])
                        .sum();
                    let gh: f64 = (0..fh[a].len())
                        .map(|k| self.tau * fh[a][k] * fh[b][k] * self.zeta_mid[k])
                        .sum();
                    let id = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max((g - id).abs()).max((gh - id).abs());
                }
            }
        }
        worst
    }
}

struct Family {
    freqs: Vec<f64>,
    nodes: Vec<Vec<f64>>,
    mids: Vec<Vec<f64>>,
}

/// One family of `-(f'/zeta)' = w^2 f / zeta`. With `neumann_start` the
/// node at 0 is free (half-cell mass), otherwise pinned; the node at
/// `t_max` is always pinned.
fn solve_family(
    z_nodes: &[f64],
    z_mid: &[f64],
    tau: f64,
    n_modes: usize,
    neumann_start: bool,
) -> Result<Family> {
    let fine_n = z_mid.len();
    let first = if neumann_start { 0 } else { 1 };
    let idx: Vec<usize> = (first..fine_n).collect();
    let mass: Vec<f64> = idx
        .iter()
        .map(|&k| if k == 0 { 0.5 * tau } else { tau } / z_nodes[k])
        .collect();
    let diag: Vec<f64> = idx
        .iter()
        .zip(&mass)
        .map(|(&k, m)| {
            let left = if k > 0 { 1.0 / z_mid[k - 1] } else { 0.0 };
            (left + 1.0 / z_mid[k]) / (tau * m)
        })
        .collect();
    let off: Vec<f64> = (0..idx.len() - 1)
        .map(|i| -1.0 / (tau * z_mid[idx[i]]) / (mass[i] * mass[i + 1]).sqrt())
        .collect();
    let (vals, vecs) = symmetric_tridiagonal_lowest(&diag, &off, n_modes)?;

    let mut freqs = Vec::with_capacity(n_modes);
    let mut nodes = Vec::with_capacity(n_modes);
    let mut mids = Vec::with_capacity(n_modes);
    for (lam, u) in vals.iter().zip(&vecs) {
        if !(*lam > 0.0) {
            return Err(Error::Eigen(format!("nonpositive eigenvalue {lam}")));
        }
        let w = lam.sqrt();
        let mut f = vec![0.0; fine_n + 1];
        for (i, &k) in idx.iter().enumerate() {
            f[k] = u[i] / mass[i].sqrt();
        }
        let gauge = if neumann_start { f[0] } else { f[1] };
        if gauge < 0.0 {
            f.iter_mut().for_each(|v| *v = -*v);
        }
        let fh = (0..fine_n)
            .map(|k| -(f[k + 1] - f[k]) / (tau * w * z_mid[k]))
            .collect();
        freqs.push(w);
        nodes.push(f);
        mids.push(fh);
    }
    Ok(Family { freqs, nodes, mids })
}

pub fn eigenbasis(
    zeta_est: &PiecewiseLinear,
    t_max: f64,
    n_modes: usize,
    fine_n: usize,
) -> Result<EigenBasis> {
    if n_modes == 0 || fine_n < 2 * n_modes + 2 {
        return Err(Error::InvalidInput(format!(
            "{fine_n} fine cells cannot resolve {n_modes} modes"
        )));
    }
    let tau = t_max / fine_n as f64;
    let zeta_nodes: Vec<f64> = (0..=fine_n)
        .map(|k| zeta_est.eval(k as f64 * tau))
        .collect();
    let zeta_mid: Vec<f64> = (0..fine_n)
        .map(|k| zeta_est.eval((k as f64 + 0.5) * tau))
        .collect();
    if zeta_nodes.iter().chain(&zeta_mid).any(|z| !(*z > 0.0)) {
        return Err(Error::InvalidMedium(
            "impedance estimate is not positive".into(),
        ));
    }
    let (phi, psi) = rayon::join(
        || solve_family(&zeta_nodes, &zeta_mid, tau, n_modes, true),
        || solve_family(&zeta_nodes, &zeta_mid, tau, n_modes, false),
    );
    let (phi, psi) = (phi?, psi?);
    Ok(EigenBasis {
        n_modes,
        theta: phi.freqs,
        vartheta: psi.freqs,
        t_max,
        tau,
        zeta: zeta_est.clone(),
        zeta_nodes,
        zeta_mid,
        phi: phi.nodes,
        phi_hat: phi.mids,
        psi: psi.nodes,
        psi_hat: psi.mids,
    })
}

/// `r_frak` on `[T_j, T_{j+1})` and `r_frak_hat` on `[T̂_{j-1}, T̂_j)`, the
/// last of each extended to `t_max`.
pub fn loss_interpolants(
    c: &RomCoefficients,
    g: &StaggeredGrid,
) -> (PiecewiseConstant, PiecewiseConstant) {
    let n = g.n();
    let tl = g.t_max;
    let mut prim = Vec::with_capacity(n + 1);
    let mut dual = Vec::with_capacity(n + 1);
    for j in 1..=n {
        prim.push((g.primary_node(j), g.primary_node(j + 1), c.r_primary[j - 1]));
        dual.push((g.t_dual[j - 1].min(tl), g.dual_node(j), c.r_dual[j - 1]));
    }
    prim.push((g.primary_node(n + 1), tl, c.r_primary[n - 1]));
    dual.push((g.dual_node(n), tl, c.r_dual[n - 1]));
    (
        PiecewiseConstant { pieces: prim },
        PiecewiseConstant { pieces: dual },
    )
}

/// Support intervals of the unknowns `(r_1, r̂_1, ..., r_n, r̂_n)`; the last
/// dual interval runs to `t_max`.
fn unknown_intervals(g: &StaggeredGrid) -> Vec<(f64, f64)> {
    let n = g.n();
    let mut iv = Vec::with_capacity(2 * n);
    for j in 1..=n {
        iv.push((g.primary_node(j), g.dual_node(j)));
        let end = if j == n {
            g.t_max
        } else {
            g.primary_node(j + 1)
        };
        iv.push((g.dual_node(j), end));
    }
    iv
}

fn step_function(g: &StaggeredGrid, values: &[f64]) -> PiecewiseLinear {
    let pieces = unknown_intervals(g)
        .into_iter()
        .zip(values)
        .map(|((a, b), &v)| (a, b, v))
        .collect();
    PiecewiseConstant { pieces }.to_linear()
}

/// Loss on the grid from the eigenfunction moment system, least squares
/// with an optional first-difference penalty of weight `reg`.
pub fn loss_direct(
    c: &RomCoefficients,
    g: &StaggeredGrid,
    basis: &EigenBasis,
    reg: f64,
) -> Result<InversionResult> {
    check_sizes(c, g)?;
    if !(reg >= 0.0) {
        return Err(Error::InvalidInput("reg must be nonnegative".into()));
    }
    let n = g.n();
    if basis.n_modes < n {
        return Err(Error::InvalidInput(format!(
            "basis has {} modes, need {n}",
            basis.n_modes
        )));
    }
    let zeta_est = impedance_from_rom(c, g)?;
    let (rf, rfh) = loss_interpolants(c, g);
    let iv = unknown_intervals(g);

    let rows: Vec<(Vec<f64>, f64)> = {
        use rayon::prelude::*;
        (0..2 * n)
            .into_par_iter()
            .map(|row| {
                let j = row % n + 1;
                let (dens, dens_hat) = if row < n {
                    (basis.phi_density(j), basis.phi_hat_density(j))
                } else {
                    (basis.psi_density(j), basis.psi_hat_density(j))
                };
                let a: Vec<f64> = iv
                    .iter()
                    .map(|&(lo, hi)| if hi > lo { dens.integral(lo, hi) } else { 0.0 })
                    .collect();
                let b = rf.integrate_against(&dens) + rfh.integrate_against(&dens_hat);
                (a, b)
            })
            .collect()
    };
    let m = 2 * n;
    let a = DMatrix::from_fn(m, m, |i, k| rows[i].0[k]);
    let b = DVector::from_iterator(m, rows.iter().map(|r| r.1));

    let (x, rank) = if reg > 0.0 {
        let w = reg.sqrt();
        let mut stacked = DMatrix::zeros(2 * m - 1, m);
        stacked.view_mut((0, 0), (m, m)).copy_from(&a);
        for k in 0..m - 1 {
            stacked[(m + k, k)] = -w;
            stacked[(m + k, k + 1)] = w;
        }
        let mut rhs = DVector::zeros(2 * m - 1);
        rhs.rows_mut(0, m).copy_from(&b);
        lstsq(stacked, &rhs, LOSS_SYSTEM_RCOND)?
    } else {
        lstsq(a.clone(), &b, LOSS_SYSTEM_RCOND)?
    };
    if reg == 0.0 && rank < m {
        log::warn!("loss system rank {rank} of {m}");
        return Err(Error::SingularLossSystem);
    }
    let residual = (&a * &x - &b).norm() / b.norm().max(f64::MIN_POSITIVE);
    let values: Vec<f64> = x.iter().cloned().collect();
    Ok(InversionResult {
        loss_est: step_function(g, &values),
        zeta_est,
        mean_loss_est: (rf.integral() + rfh.integral()) / g.t_max,
        r_frak: rf,
        r_frak_hat: rfh,
        method: InversionMethod::GridDirect,
        loss_values: values,
        system_residual: Some(residual),
    })
}

/// Largest weight on a half-decade ladder `1e-6 ..= 10` whose relative
/// loss-system residual `|A x - b| / |b|` stays within `level` (the
/// discrepancy principle); the smallest weight when none does.
///
/// `level` bounds the residual of the moment system, not the noise on the
/// transfer samples; the two differ by roughly an order of magnitude.
pub fn reg_by_discrepancy(
    c: &RomCoefficients,
    g: &StaggeredGrid,
    basis: &EigenBasis,
    level: f64,
) -> Result<f64> {
    let ladder: Vec<f64> = (0..=14)
        .map(|k| 10f64.powf(-6.0 + 0.5 * k as f64))
        .collect();
    let mut best = ladder[0];
    for &w in &ladder {
        let r = loss_direct(c, g, basis, w)?;
        if r.system_residual.unwrap_or(f64::INFINITY) <= level {
            best = w;
        } else {
            break;
        }
    }
    log::debug!("discrepancy weight {best:e} for level {level}");
    Ok(best)
}

/// `r = r_frak - r_frak_hat`, pointwise.
pub fn loss_simple(c: &RomCoefficients, g: &StaggeredGrid) -> Result<InversionResult> {
    check_sizes(c, g)?;
    let zeta_est = impedance_from_rom(c, g)?;
    let (rf, rfh) = loss_interpolants(c, g);
    let mut x: Vec<f64> = rf
        .breakpoints()
        .into_iter()
        .chain(rfh.breakpoints())
        .collect();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    x.dedup();
    let pieces = x
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (w[0], w[1], rf.eval(mid) - rfh.eval(mid))
        })
        .collect();
    let diff = PiecewiseConstant { pieces };
    Ok(InversionResult {
        loss_est: diff.to_linear(),
        zeta_est,
        mean_loss_est: (rf.integral() + rfh.integral()) / g.t_max,
        r_frak: rf,
        r_frak_hat: rfh,
        method: InversionMethod::Simple,
        loss_values: Vec::new(),
        system_residual: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::spectrally_matched_grid;
    use std::f64::consts::PI;

    fn constant_coeffs(g: &StaggeredGrid, zeta0: f64, r0: f64) -> RomCoefficients {
        RomCoefficients {
            gammas: g.h.iter().map(|h| h * zeta0).collect(),
            gamma_hats: g.h_hat.iter().map(|h| h / zeta0).collect(),
            r_primary: vec![r0; g.n()],
            r_dual: vec![0.0; g.n()],
        }
    }

    #[test]
    fn constant_impedance_recovered() {
        let g = spectrally_matched_grid(10, 1.0).unwrap();
        let z = impedance_from_rom(&constant_coeffs(&g, 2.0, 0.0), &g).unwrap();
        for k in 0..=100 {
            assert!((z.eval(k as f64 / 100.0) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_coefficient_rejected() {
        let g = spectrally_matched_grid(6, 1.0).unwrap();
        let mut c = constant_coeffs(&g, 1.0, 0.0);
        c.gammas[3] = -c.gammas[3];
        assert!(matches!(
            impedance_from_rom(&c, &g),
            Err(Error::ImpedanceNotPositive(4))
        ));
    }

    #[test]
    fn unit_impedance_modes() {
        let z = PiecewiseLinear::uniform(1.0, vec![1.0, 1.0]);
        let b = eigenbasis(&z, 1.0, 5, 4000).unwrap();
        for j in 1..=5 {
            let th = (j as f64 - 0.5) * PI;
            assert!((b.theta[j - 1] - th).abs() < 1e-4 * th);
            assert!((b.vartheta[j - 1] - j as f64 * PI).abs() < 1e-4 * j as f64 * PI);
            // exact samples of sqrt(2) cos
            let k = 1234;
            let t = k as f64 * b.tau;
            assert!((b.phi[j - 1][k] - 2f64.sqrt() * (th * t).cos()).abs() < 1e-4);
        }
        assert!(b.phi[0][0] > 0.0 && b.psi[0][1] > 0.0);
        let res = b.orthonormality_residual();
        assert!(res < 1e-8, "{res}");
    }

    #[test]
    fn constant_loss_is_exact() {
        let g = spectrally_matched_grid(8, 1.0).unwrap();
        let c = constant_coeffs(&g, 1.0, 0.7);
        let z = impedance_from_rom(&c, &g).unwrap();
        let b = eigenbasis(&z, 1.0, 8, 2000).unwrap();
        let r = loss_direct(&c, &g, &b, 0.0).unwrap();
        for v in &r.loss_values {
            assert!((v - 0.7).abs() < 1e-9, "{v}");
        }
        assert!((r.mean_loss_est - 0.7).abs() < 1e-12);
        let s = loss_simple(&c, &g).unwrap();
        assert!((s.loss_est.eval(0.5) - 0.7).abs() < 1e-15);
        assert!((s.loss_est.eval(1.0) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn regularized_constant_still_exact() {
        let g = spectrally_matched_grid(8, 1.0).unwrap();
        let c = constant_coeffs(&g, 1.0, 0.7);
        let z = impedance_from_rom(&c, &g).unwrap();
        let b = eigenbasis(&z, 1.0, 8, 2000).unwrap();
        let r = loss_direct(&c, &g, &b, 10.0).unwrap();
        for v in &r.loss_values {
            assert!((v - 0.7).abs() < 1e-8);
        }
    }

    #[test]
    fn mismatched_orders_rejected() {
        let g = spectrally_matched_grid(8, 1.0).unwrap();
        let g2 = spectrally_matched_grid(6, 1.0).unwrap();
        assert!(loss_simple(&constant_coeffs(&g, 1.0, 1.0), &g2).is_err());
    }
}
