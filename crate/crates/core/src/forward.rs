//! Staggered-grid finite-difference forward solver for `D(s) = u(0, s)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    complex_symmetric_tridiagonal_eigen, solve_tridiagonal, solve_tridiagonal_clamped,
    symmetric_tridiagonal_range,
};
use crate::media::MediumProfile;
use crate::ratfit::SpectralData;
use crate::rom::symmetric_matrix;

/// Finite-difference realization on a uniform staggered grid.
///
/// Primary nodes sit at `(j-1) tau`, dual nodes at `(j-1/2) tau`; the first
/// dual step is `tau/2`. Coefficients follow the ladder layout shared with
/// the ROM: `gamma_j = h_j zeta_hat_j`, `gamma_hat_j = h_hat_j / zeta_j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FdOperator {
    pub n_cells: usize,
    pub tau: f64,
    pub t_max: f64,
    pub zeta0: f64,
    pub gamma: Vec<f64>,
    pub gamma_hat: Vec<f64>,
    pub r_primary: Vec<f64>,
    pub r_dual: Vec<f64>,
    /// Diagonal of the symmetrized complex matrix `A`.
    pub diag: Vec<f64>,
    /// Off-diagonal of `A` (purely imaginary).
    pub off: Vec<Complex64>,
}

impl FdOperator {
    pub fn gamma_hat_1(&self) -> f64 {
        self.gamma_hat[0]
    }

    /// The unsymmetrized real tridiagonal matrix `T` (lower, diag, upper):
    /// rows alternate `zeta`-scaled primary and dual equations, the sign
    /// pattern `diag(1, -1, ..., -1)` multiplies `s`.
    pub fn real_tridiagonal(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n_cells;
        let mut lower = vec![0.0; 2 * n - 1];
        let mut diag = vec![0.0; 2 * n];
        let mut upper = vec![0.0; 2 * n - 1];
        for j in 0..n {
            diag[2 * j] = self.r_primary[j];
            diag[2 * j + 1] = -self.r_dual[j];
            upper[2 * j] = 1.0 / self.gamma_hat[j];
            lower[2 * j] = 1.0 / self.gamma[j];
            if j + 1 < n {
                upper[2 * j + 1] = -1.0 / self.gamma[j];
                lower[2 * j + 1] = -1.0 / self.gamma_hat[j + 1];
            }
        }
        (lower, diag, upper)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferSamples {
    pub s_points: Vec<Complex64>,
    pub values: Vec<Complex64>,
    pub omega_max: f64,
}

pub const MIN_CELLS: usize = 16;

pub fn assemble_fd(m: &MediumProfile, n_cells: usize) -> Result<FdOperator> {
    if n_cells < MIN_CELLS {
        return Err(Error::InvalidInput(format!(
            "n_cells = {n_cells} < {MIN_CELLS}"
        )));
    }
    if m.n_cells() < n_cells {
        return Err(Error::InvalidInput(format!(
            "medium sampled with {} cells, coarser than the {n_cells}-cell FD grid",
            m.n_cells()
        )));
    }
    let tau = m.t_max / n_cells as f64;
    let mut gamma = Vec::with_capacity(n_cells);
    let mut gamma_hat = Vec::with_capacity(n_cells);
    let mut r_primary = Vec::with_capacity(n_cells);
    for j in 0..n_cells {
        let t_primary = j as f64 * tau;
        let t_dual = (j as f64 + 0.5) * tau;
        let h_hat = if j == 0 { 0.5 * tau } else { tau };
        gamma.push(tau * m.zeta(t_dual));
        gamma_hat.push(h_hat / m.zeta(t_primary));
        r_primary.push(m.loss(t_primary));
    }
    let r_dual = vec![0.0; n_cells];
    let (diag, off) = symmetric_matrix(&gamma, &gamma_hat, &r_primary, &r_dual);
    Ok(FdOperator {
        n_cells,
        tau,
        t_max: m.t_max,
        zeta0: m.zeta0,
        gamma,
        gamma_hat,
        r_primary,
        r_dual,
        diag,
        off,
    })
}

/// `e1^T (A + sI)^{-1} e1 / gamma_hat_1` for a symmetric tridiagonal `A`.
pub(crate) fn resolvent_first(
    diag: &[f64],
    off: &[Complex64],
    gamma_hat_1: f64,
    s: Complex64,
) -> Result<Complex64> {
    let d: Vec<Complex64> = diag.iter().map(|&a| Complex64::new(a, 0.0) + s).collect();
    let mut rhs = vec![Complex64::new(0.0, 0.0); d.len()];
    rhs[0] = Complex64::new(1.0, 0.0);
    let x = solve_tridiagonal(off, &d, off, &rhs).map_err(|p| Error::SingularSolve {
        re: s.re,
        im: s.im,
        pivot: p.pivot,
        row: p.row,
    })?;
    Ok(x[0] / gamma_hat_1)
}

pub fn eval_transfer(op: &FdOperator, s: Complex64) -> Result<Complex64> {
    resolvent_first(&op.diag, &op.off, op.gamma_hat_1(), s)
}

/// Imaginary-axis frequencies `i omega`, `omega` equidistant on
/// `[-omega_max, omega_max]`; an exact zero is replaced by `1e-8 i`.
pub fn sample_points(omega_max: f64, n_samples: usize) -> Vec<Complex64> {
    (0..n_samples)
        .map(|k| {
            let w = -omega_max + 2.0 * omega_max * k as f64 / (n_samples - 1) as f64;
            let w = if w == 0.0 || 2 * k + 1 == n_samples {
                1e-8
            } else {
                w
            };
            Complex64::new(0.0, w)
        })
        .collect()
}

pub const DEFAULT_SAMPLES: usize = 10000;

pub fn sample_transfer(
    op: &FdOperator,
    omega_max: f64,
    n_samples: usize,
) -> Result<TransferSamples> {
    if n_samples < 2 || !(omega_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "n_samples = {n_samples}, omega_max = {omega_max}"
        )));
    }
    let s_points = sample_points(omega_max, n_samples);
    let values = s_points
        .par_iter()
        .map(|&s| eval_transfer(op, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(TransferSamples {
        s_points,
        values,
        omega_max,
    })
}

fn check_pairs(op: &FdOperator, n_pairs: usize) -> Result<()> {
    if n_pairs == 0 || n_pairs > op.n_cells {
        return Err(Error::InvalidInput(format!(
            "n_pairs = {n_pairs} must lie in 1..={}",
            op.n_cells
        )));
    }
    Ok(())
}

/// Poles and residues of the discrete transfer function.
///
/// Eigenvalues `mu` of `A` give poles `-mu`; residues are `z^2 / gamma_hat_1`
/// with `z` the first components of the complex orthonormal eigenvectors.
/// Returns the `n_pairs` upper-half poles of smallest imaginary part.
///
/// The lowest eigenpairs are refined from the lossless ones by Rayleigh
/// quotient iteration; when the refined poles fail to stay next to their
/// lossless starting points the full QL decomposition is used instead.
pub fn exact_spectral_data(op: &FdOperator, n_pairs: usize) -> Result<SpectralData> {
    check_pairs(op, n_pairs)?;
    match lowest_pairs(op, n_pairs) {
        Some((poles, residues)) => Ok(SpectralData {
            poles,
            residues,
            zeta0: op.zeta0,
        }),
        None => {
            log::debug!(
                "Rayleigh refinement rejected, falling back to QL on {} unknowns",
                2 * op.n_cells
            );
            exact_spectral_data_dense(op, n_pairs)
        }
    }
}

fn lowest_pairs(op: &FdOperator, n_pairs: usize) -> Option<(Vec<Complex64>, Vec<Complex64>)> {
    let m = op.diag.len();
    // lossless part of A is i B with B real; -B has eigenvalues theta for poles i theta
    let neg_b: Vec<f64> = op.off.iter().map(|c| -c.im).collect();
    let want = (n_pairs + 1).min(m / 2);
    let (theta, vecs) = symmetric_tridiagonal_range(&vec![0.0; m], &neg_b, m / 2, want).ok()?;
    let g1 = op.gamma_hat_1();
    let apply = |x: &[Complex64]| -> Vec<Complex64> {
        (0..m)
            .map(|k| {
                let mut v = x[k] * op.diag[k];
                if k > 0 {
                    v += op.off[k - 1] * x[k - 1];
                }
                if k + 1 < m {
                    v += op.off[k] * x[k + 1];
                }
                v
            })
            .collect()
    };
    let bilinear = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    };

    let mut poles = Vec::with_capacity(n_pairs);
    let mut residues = Vec::with_capacity(n_pairs);
    for j in 0..n_pairs {
        let mut x: Vec<Complex64> = vecs[j].iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut mu = bilinear(&x, &apply(&x));
        // the quotient settles before the vector does: two more sweeps after it stops moving
        let mut extra = 0;
        for _ in 0..40 {
            let shifted: Vec<Complex64> = op
                .diag
                .iter()
                .map(|&d| Complex64::new(d, 0.0) - mu)
                .collect();
            let y = solve_tridiagonal_clamped(&op.off, &shifted, &op.off, &x);
            let nrm = bilinear(&y, &y).sqrt();
            if !(nrm.norm() > 0.0) || !nrm.is_finite() {
                return None;
            }
            x = y.iter().map(|v| v / nrm).collect();
            let next = bilinear(&x, &apply(&x));
            let settled = (next - mu).norm() <= 1e-14 * next.norm();
            mu = next;
            if settled {
                extra += 1;
                if extra > 2 {
                    break;
                }
            }
        }
        let pole = -mu;
        let lo = if j == 0 {
            0.0
        } else {
            0.5 * (theta[j - 1] + theta[j])
        };
        let hi = if j + 1 < theta.len() {
            0.5 * (theta[j] + theta[j + 1])
        } else {
            f64::INFINITY
        };
        if !(pole.im > lo && pole.im < hi && pole.re <= 1e-12 * pole.norm()) {
            return None;
        }
        poles.push(pole);
        residues.push(x[0] * x[0] / g1);
    }
    Some((poles, residues))
}

/// Same as [`exact_spectral_data`], always through the full complex
/// symmetric QL decomposition of `A`.
pub fn exact_spectral_data_dense(op: &FdOperator, n_pairs: usize) -> Result<SpectralData> {
    check_pairs(op, n_pairs)?;
    let d: Vec<Complex64> = op.diag.iter().map(|&a| Complex64::new(a, 0.0)).collect();
    let (mu, z) = complex_symmetric_tridiagonal_eigen(&d, &op.off)?;
    let g1 = op.gamma_hat_1();
    let poles: Vec<Complex64> = mu.iter().map(|m| -m).collect();
    let res: Vec<Complex64> = z.iter().map(|v| v * v / g1).collect();

    let mut upper = Vec::new();
    let mut lower = Vec::new();
    let mut total = 0.0;
    for (k, p) in poles.iter().enumerate() {
        let tol = 1e-8 * (1.0 + p.norm());
        if p.im > tol {
            upper.push(k);
        } else if p.im < -tol {
            lower.push(k);
        }
        // real eigenvalues are self-conjugate: counted once with half weight on each side
        total += res[k].re;
    }
    if upper.len() != lower.len() {
        return Err(Error::DegenerateSpectrum(format!(
            "{} upper vs {} lower poles do not pair",
            upper.len(),
            lower.len()
        )));
    }
    upper.sort_by(|&a, &b| poles[a].im.partial_cmp(&poles[b].im).unwrap());
    lower.sort_by(|&a, &b| poles[b].im.partial_cmp(&poles[a].im).unwrap());
    for (&u, &l) in upper.iter().zip(&lower) {
        let gap = (poles[u] - poles[l].conj()).norm();
        if gap > 1e-8 * (1.0 + poles[u].norm()) {
            return Err(Error::DegenerateSpectrum(format!(
                "pole {} has no conjugate partner",
                poles[u]
            )));
        }
    }
    if upper.len() < n_pairs {
        return Err(Error::DegenerateSpectrum(format!(
            "only {} oscillatory pole pairs, {} requested",
            upper.len(),
            n_pairs
        )));
    }
    // the eigenvector normalization already gives sum = 1/gamma_hat_1; remove rounding
    let scale = 1.0 / (g1 * total);
    Ok(SpectralData {
        poles: upper[..n_pairs].iter().map(|&k| poles[k]).collect(),
        residues: upper[..n_pairs].iter().map(|&k| res[k] * scale).collect(),
        zeta0: op.zeta0,
    })
}

/// Closed-form transfer function of a homogeneous medium:
/// `s zeta0 tanh(kappa t_max) / kappa`, `kappa = sqrt(s (s + r0))`.
pub fn homogeneous_transfer(zeta0: f64, r0: f64, t_max: f64, s: Complex64) -> Complex64 {
    let kappa = (s * (s + r0)).sqrt();
    if kappa.norm() < 1e-12 {
        return s * zeta0 * t_max;
    }
    s * zeta0 * (kappa * t_max).tanh() / kappa
}
