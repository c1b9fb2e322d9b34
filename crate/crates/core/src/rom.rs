//! Data-driven ROM: J-symmetric Lanczos from poles and residues, ladder
//! coefficient extraction, ROM transfer function and passivity scan.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::resolvent_first;
use crate::ratfit::SpectralData;

/// Symmetric tridiagonal `A`: real diagonal `alphas`, off-diagonal `betas`
/// (`beta_2 .. beta_2n`, purely imaginary in the small-loss regime).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RomMatrix {
    pub alphas: Vec<f64>,
    pub betas: Vec<Complex64>,
    pub gamma_hat_1: f64,
    /// `beta_j^2`, kept for sign diagnostics.
    pub beta_squares: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomCoefficients {
    pub gammas: Vec<f64>,
    pub gamma_hats: Vec<f64>,
    pub r_primary: Vec<f64>,
    pub r_dual: Vec<f64>,
}

impl RomCoefficients {
    pub fn n(&self) -> usize {
        self.gammas.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reorth {
    Off,
    Full,
    /// Full reorthogonalization when `n > 20`.
    Auto,
}

impl Reorth {
    fn enabled(self, n: usize) -> bool {
        match self {
            Reorth::Off => false,
            Reorth::Full => true,
            Reorth::Auto => n > 20,
        }
    }
}

/// Diagonal and off-diagonal of `A` from ladder coefficients:
/// `alpha = (r_1, r_hat_1, ...)`, `beta_2j = 1/sqrt(-gamma_j gamma_hat_j)`,
/// `beta_2j+1 = -1/sqrt(-gamma_j gamma_hat_j+1)` (principal roots).
pub fn symmetric_matrix(
    gamma: &[f64],
    gamma_hat: &[f64],
    r_primary: &[f64],
    r_dual: &[f64],
) -> (Vec<f64>, Vec<Complex64>) {
    let n = gamma.len();
    let mut diag = Vec::with_capacity(2 * n);
    let mut off = Vec::with_capacity(2 * n - 1);
    for j in 0..n {
        diag.push(r_primary[j]);
        diag.push(r_dual[j]);
        off.push(Complex64::new(-gamma[j] * gamma_hat[j], 0.0).sqrt().inv());
        if j + 1 < n {
            off.push(
                -Complex64::new(-gamma[j] * gamma_hat[j + 1], 0.0)
                    .sqrt()
                    .inv(),
            );
        }
    }
    (diag, off)
}

impl RomMatrix {
    /// `A` assembled from coefficients with the printed sign convention.
    pub fn from_coefficients(c: &RomCoefficients) -> Self {
        let (alphas, betas) = symmetric_matrix(&c.gammas, &c.gamma_hats, &c.r_primary, &c.r_dual);
        let beta_squares = betas.iter().map(|b| (b * b).re).collect();
        RomMatrix {
            alphas,
            betas,
            gamma_hat_1: c.gamma_hats[0],
            beta_squares,
        }
    }

    pub fn order(&self) -> usize {
        self.alphas.len() / 2
    }

    /// Dense copy of `A`.
    pub fn dense(&self) -> nalgebra::DMatrix<Complex64> {
        let m = self.alphas.len();
        let mut a = nalgebra::DMatrix::zeros(m, m);
        for i in 0..m {
            a[(i, i)] = Complex64::new(self.alphas[i], 0.0);
            if i + 1 < m {
                a[(i, i + 1)] = self.betas[i];
                a[(i + 1, i)] = self.betas[i];
            }
        }
        a
    }
}

/// Lanczos output together with the basis `Y` (columns), for diagnostics.
#[derive(Debug, Clone)]
pub struct LanczosRun {
    pub matrix: RomMatrix,
    pub basis: Vec<Vec<Complex64>>,
}

fn bilinear(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn euclid2(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Real part of `v`, refusing values whose imaginary part exceeds `1e-8`
/// relative to `scale`.
fn realify(v: Complex64, scale: f64, name: &'static str, step: usize) -> Result<f64> {
    let rel = v.im.abs() / scale.max(v.norm()).max(f64::MIN_POSITIVE);
    if rel > 1e-8 {
        return Err(Error::NotReal { name, step, rel });
    }
    Ok(v.re)
}

/// Checks that `w` has the block form `(u, conj u)` or `(u, -conj u)`; the
/// latter appears after division by an imaginary `beta`.
fn check_blocks(w: &[Complex64], step: usize) -> Result<()> {
    let n = w.len() / 2;
    let scale = euclid2(w).sqrt().max(f64::MIN_POSITIVE);
    let dev = |sign: f64| {
        (0..n)
            .map(|k| (w[k] - w[n + k].conj() * sign).norm())
            .fold(0.0, f64::max)
    };
    if dev(1.0).min(dev(-1.0)) > 1e-10 * scale {
        return Err(Error::BlockStructure(step));
    }
    Ok(())
}

pub fn lanczos(data: &SpectralData, reorth: Reorth) -> Result<RomMatrix> {
    lanczos_with_basis(data, reorth).map(|r| r.matrix)
}

/// Three-term J-symmetric recursion on `Lambda = -diag(lambda, conj lambda)`
/// started from `Y_1 = sqrt(gamma_hat_1) (sqrt y, sqrt conj y)`.
pub fn lanczos_with_basis(data: &SpectralData, reorth: Reorth) -> Result<LanczosRun> {
    let n = data.n_pairs();
    if n == 0 {
        return Err(Error::InvalidInput("empty spectral data".into()));
    }
    let sum_re: f64 = data.residues.iter().map(|y| y.re).sum();
    let gamma_hat_1 = 1.0 / (2.0 * sum_re);
    if !(gamma_hat_1 > 0.0) || !gamma_hat_1.is_finite() {
        return Err(Error::NonpositiveGammaHat(gamma_hat_1));
    }
    let m = 2 * n;
    let lam: Vec<Complex64> = data
        .poles
        .iter()
        .map(|p| -p)
        .chain(data.poles.iter().map(|p| -p.conj()))
        .collect();
    let scale = lam.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let root = gamma_hat_1.sqrt();
    let y1: Vec<Complex64> = data
        .residues
        .iter()
        .map(|y| y.sqrt() * root)
        .chain(data.residues.iter().map(|y| y.conj().sqrt() * root))
        .collect();
    let reorthogonalize = reorth.enabled(n);

    let mut basis: Vec<Vec<Complex64>> = vec![y1];
    let mut alphas = Vec::with_capacity(m);
    let mut betas = Vec::with_capacity(m - 1);
    let mut beta_squares = Vec::with_capacity(m - 1);

    let apply =
        |y: &[Complex64]| -> Vec<Complex64> { y.iter().zip(&lam).map(|(a, b)| a * b).collect() };

    let mut v = apply(&basis[0]);
    let a1 = realify(bilinear(&v, &basis[0]), scale, "alpha", 1)?;
    alphas.push(a1);
    v.iter_mut().zip(&basis[0]).for_each(|(x, y)| *x -= y * a1);

    for j in 2..=m {
        if reorthogonalize {
            for _ in 0..2 {
                for y in &basis {
                    let c = bilinear(&v, y);
                    v.iter_mut().zip(y).for_each(|(x, yk)| *x -= yk * c);
                }
            }
        }
        let vv = bilinear(&v, &v);
        if vv.norm() <= 1e-13 * euclid2(&v) {
            return Err(Error::Breakdown(j));
        }
        let b2 = realify(vv, scale * scale, "beta^2", j)?;
        let beta = Complex64::new(b2, 0.0).sqrt();
        let yj: Vec<Complex64> = v.iter().map(|x| x / beta).collect();
        check_blocks(&yj, j)?;
        let mut w = apply(&yj);
        let aj = realify(bilinear(&w, &yj), scale, "alpha", j)?;
        let prev = basis.last().unwrap();
        w.iter_mut()
            .zip(yj.iter().zip(prev))
            .for_each(|(x, (y, p))| *x -= y * aj + p * beta);
        alphas.push(aj);
        betas.push(beta);
        beta_squares.push(b2);
        basis.push(yj);
        v = w;
    }
    Ok(LanczosRun {
        matrix: RomMatrix {
            alphas,
            betas,
            gamma_hat_1,
            beta_squares,
        },
        basis,
    })
}

/// Ladder coefficients from `A`:
/// `gamma_j = -1/(gamma_hat_j beta_2j^2)`,
/// `gamma_hat_j+1 = -1/(gamma_j beta_2j+1^2)`,
/// `r_j = alpha_2j-1`, `r_hat_j = alpha_2j`.
pub fn extract_coefficients(m: &RomMatrix) -> Result<RomCoefficients> {
    let n = m.order();
    if let Some(k) = m.beta_squares.iter().position(|&b| !(b < 0.0)) {
        return Err(Error::SmallLossRegime(k + 2));
    }
    let mut gammas = Vec::with_capacity(n);
    let mut gamma_hats = Vec::with_capacity(n);
    gamma_hats.push(m.gamma_hat_1);
    for j in 0..n {
        let g = -1.0 / (gamma_hats[j] * m.beta_squares[2 * j]);
        gammas.push(g);
        if j + 1 < n {
            gamma_hats.push(-1.0 / (g * m.beta_squares[2 * j + 1]));
        }
    }
    let r_primary = m.alphas.iter().step_by(2).cloned().collect();
    let r_dual = m.alphas.iter().skip(1).step_by(2).cloned().collect();
    Ok(RomCoefficients {
        gammas,
        gamma_hats,
        r_primary,
        r_dual,
    })
}

pub fn eval_rom_transfer(m: &RomMatrix, s: Complex64) -> Result<Complex64> {
    resolvent_first(&m.alphas, &m.betas, m.gamma_hat_1, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassivityReport {
    pub min_real: f64,
    pub argmin_omega: f64,
}

/// Minimum of `Re D_rom(i omega)` over `omega_k = k omega_max / n_scan`,
/// `k = 1..=n_scan`. The origin is left out: `D(0) = 0` there.
pub fn passivity_scan(m: &RomMatrix, omega_max: f64, n_scan: usize) -> Result<PassivityReport> {
    let mut best = PassivityReport {
        min_real: f64::INFINITY,
        argmin_omega: 0.0,
    };
    for k in 1..=n_scan {
        let w = omega_max * k as f64 / n_scan as f64;
        let d = eval_rom_transfer(m, Complex64::new(0.0, w))?;
        if d.re < best.min_real {
            best = PassivityReport {
                min_real: d.re,
                argmin_omega: w,
            };
        }
    }
    Ok(best)
}
