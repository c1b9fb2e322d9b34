//! Pole/residue extraction from sampled transfer functions: loss
//! estimation from the high-frequency asymptotics, vector fitting of the
//! de-tailed data, and measurement noise.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::TransferSamples;

/// First `n` conjugate pole pairs (upper-half representatives) and their
/// residues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "SpectralFile", into = "SpectralFile")]
pub struct SpectralData {
    pub poles: Vec<Complex64>,
    pub residues: Vec<Complex64>,
    pub zeta0: f64,
}

/// On-disk layout of [`SpectralData`], with an explicit pair count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralFile {
    pub n: usize,
    pub poles: Vec<Complex64>,
    pub residues: Vec<Complex64>,
    pub zeta0: f64,
}

impl From<SpectralFile> for SpectralData {
    fn from(f: SpectralFile) -> Self {
        SpectralData {
            poles: f.poles,
            residues: f.residues,
            zeta0: f.zeta0,
        }
    }
}

impl From<SpectralData> for SpectralFile {
    fn from(d: SpectralData) -> Self {
        SpectralFile {
            n: d.poles.len(),
            poles: d.poles,
            residues: d.residues,
            zeta0: d.zeta0,
        }
    }
}

impl SpectralData {
    pub fn n_pairs(&self) -> usize {
        self.poles.len()
    }

    /// Truncated spectral measure `sum y/(s - l) + conj(y)/(s - conj l)`.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        pair_sum(&self.poles, &self.residues, s)
    }

    pub fn truncated(&self, n: usize) -> SpectralData {
        SpectralData {
            poles: self.poles[..n].to_vec(),
            residues: self.residues[..n].to_vec(),
            zeta0: self.zeta0,
        }
    }

    /// Stability, ordering and positive residue sum.
    pub fn validate(&self) -> Result<()> {
        if self.poles.len() != self.residues.len() || self.poles.is_empty() {
            return Err(Error::InvalidInput(
                "poles and residues must be nonempty and match".into(),
            ));
        }
        if let Some(p) = self.poles.iter().find(|p| !(p.re < 0.0) || !(p.im > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "pole {p} is not a stable upper-half pole"
            )));
        }
        if self.poles.windows(2).any(|w| w[0].im > w[1].im) {
            return Err(Error::InvalidInput(
                "poles must be sorted by imaginary part".into(),
            ));
        }
        if !(self.residues.iter().map(|y| y.re).sum::<f64>() > 0.0) {
            return Err(Error::NonpositiveResidueSum);
        }
        Ok(())
    }
}

fn pair_sum(poles: &[Complex64], residues: &[Complex64], s: Complex64) -> Complex64 {
    poles
        .iter()
        .zip(residues)
        .map(|(l, y)| y / (s - l) + y.conj() / (s - l.conj()))
        .sum()
}

/// Number of terms kept beyond `j_start` in the asymptotic tail.
pub const TAIL_TERMS: usize = 200;

/// Asymptotic spectrum: `lambda_j = i (j - 1/2) pi / t_max - r0/2`,
/// `y_j = (zeta0/t_max) [1 + i r0 t_max / (2 (j - 1/2) pi)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub r0_est: f64,
    pub j_start: usize,
    pub t_max: f64,
    pub zeta0: f64,
}

impl TailModel {
    pub fn new(r0_est: f64, omega_max: f64, t_max: f64, zeta0: f64) -> Self {
        TailModel {
            r0_est,
            j_start: j_start(omega_max, t_max),
            t_max,
            zeta0,
        }
    }

    pub fn pole(&self, j: usize) -> Complex64 {
        asymptotic_pole(j, self.r0_est, self.t_max)
    }

    pub fn residue(&self, j: usize) -> Complex64 {
        asymptotic_residue(j, self.r0_est, self.t_max, self.zeta0)
    }

    /// Sum of the asymptotic pairs `j_start ..= j_start + TAIL_TERMS`.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        asymptotic_sum(
            self.j_start,
            self.j_start + TAIL_TERMS,
            self.r0_est,
            self.t_max,
            self.zeta0,
            s,
        )
    }
}

pub fn j_start(omega_max: f64, t_max: f64) -> usize {
    (t_max * omega_max / PI + 0.5).floor() as usize
}

fn asymptotic_pole(j: usize, r0: f64, t_max: f64) -> Complex64 {
    Complex64::new(-0.5 * r0, (j as f64 - 0.5) * PI / t_max)
}

fn asymptotic_residue(j: usize, r0: f64, t_max: f64, zeta0: f64) -> Complex64 {
    Complex64::new(1.0, r0 * t_max / (2.0 * (j as f64 - 0.5) * PI)) * (zeta0 / t_max)
}

fn asymptotic_sum(
    from: usize,
    to: usize,
    r0: f64,
    t_max: f64,
    zeta0: f64,
    s: Complex64,
) -> Complex64 {
    (from..=to)
        .map(|j| {
            let l = asymptotic_pole(j, r0, t_max);
            let y = asymptotic_residue(j, r0, t_max, zeta0);
            y / (s - l) + y.conj() / (s - l.conj())
        })
        .sum()
}

/// Estimates the mean loss from the outer tenth of the band.
///
/// Every mode below the band edge is modelled by its asymptotic form, and a
/// real `d + e s` term absorbs what the asymptotics miss; the misfit is
/// minimized over `r0` in `[0, 20 / t_max]` by a coarse scan followed by
/// golden-section refinement.
pub fn estimate_r0(samples: &TransferSamples, t_max: f64, zeta0: f64) -> Result<TailModel> {
    let omega_max = samples.omega_max;
    let js = j_start(omega_max, t_max);
    if js < 5 {
        return Err(Error::BandTooNarrow(js));
    }
    let outer: Vec<(Complex64, Complex64)> = samples
        .s_points
        .iter()
        .zip(&samples.values)
        .filter(|(s, _)| s.im >= 0.9 * omega_max)
        .map(|(s, d)| (*s, *d))
        .collect();
    if outer.len() < 4 {
        return Err(Error::BandTooNarrow(outer.len()));
    }
    let misfit = |r0: f64| -> f64 {
        let resid: Vec<Complex64> = outer
            .iter()
            .map(|(s, d)| d - asymptotic_sum(1, js + TAIL_TERMS, r0, t_max, zeta0, *s))
            .collect();
        // real d + e s on the imaginary axis: d fits the real part, e omega the imaginary part
        let n = resid.len() as f64;
        let d = resid.iter().map(|r| r.re).sum::<f64>() / n;
        let w2: f64 = outer.iter().map(|(s, _)| s.im * s.im).sum();
        let e = outer
            .iter()
            .zip(&resid)
            .map(|((s, _), r)| s.im * r.im)
            .sum::<f64>()
            / w2;
        outer
            .iter()
            .zip(&resid)
            .map(|((s, _), r)| (r - Complex64::new(d, e * s.im)).norm_sqr())
            .sum()
    };

    let r_max = 20.0 / t_max;
    let n_scan = 80;
    let grid: Vec<f64> = (0..=n_scan)
        .map(|k| r_max * k as f64 / n_scan as f64)
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&r| misfit(r)).collect();
    let k_best = (0..vals.len())
        .min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap())
        .unwrap();
    let mut a = grid[k_best.saturating_sub(1)];
    let mut b = grid[(k_best + 1).min(n_scan)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (misfit(x1), misfit(x2));
    let mut converged = false;
    for _ in 0..200 {
        if (b - a) <= 1e-10 * (1.0 + b.abs()) {
            converged = true;
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = misfit(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = misfit(x2);
        }
    }
    if !converged || !f1.is_finite() {
        return Err(Error::LineSearch);
    }
    let r0 = (0.5 * (a + b)).max(0.0);
    log::debug!(
        "r0 estimate {r0:.6} from {} outer-band samples",
        outer.len()
    );
    Ok(TailModel {
        r0_est: r0,
        j_start: js,
        t_max,
        zeta0,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RationalFit {
    /// The requested pairs.
    pub data: SpectralData,
    /// Every fitted pair (the in-band model), sorted by imaginary part.
    pub fitted_poles: Vec<Complex64>,
    pub fitted_residues: Vec<Complex64>,
    pub d: f64,
    pub e: f64,
    pub tail: Option<TailModel>,
    /// Relative L2 misfit on the fitted (de-tailed) samples.
    pub misfit: f64,
    pub iterations: usize,
    /// Some pole was reflected into the left half plane.
    pub flipped: bool,
}

impl RationalFit {
    /// Full model: fitted pairs, polynomial part and tail.
    pub fn eval_model(&self, s: Complex64) -> Complex64 {
        let tail = self.tail.map(|t| t.eval(s)).unwrap_or_default();
        pair_sum(&self.fitted_poles, &self.fitted_residues, s) + self.d + self.e * s + tail
    }
}

pub const MAX_FIT_ITERS: usize = 30;

/// Vector fitting on the upper-half samples.
///
/// With a tail model the data are de-tailed first and the `j_start - 1`
/// in-band pairs are fitted, starting from the asymptotic poles; requested
/// pairs beyond the fitted range are taken from the tail model. Without a
/// tail, `n_pairs` pairs start from poles spread evenly over the band.
pub fn fit_poles_residues(
    samples: &TransferSamples,
    tail: Option<&TailModel>,
    n_pairs: usize,
) -> Result<RationalFit> {
    if n_pairs == 0 {
        return Err(Error::InvalidInput("n_pairs must be positive".into()));
    }
    if 2 * n_pairs >= samples.s_points.len() {
        return Err(Error::InvalidInput(
            "too few samples for the requested pairs".into(),
        ));
    }
    if samples.s_points.iter().any(|s| s.re != 0.0) {
        return Err(Error::InvalidInput(
            "samples must lie on the imaginary axis".into(),
        ));
    }
    let (s, f): (Vec<Complex64>, Vec<Complex64>) = samples
        .s_points
        .iter()
        .zip(&samples.values)
        .filter(|(s, _)| s.im >= 0.0)
        .map(|(s, d)| (*s, d - tail.map(|t| t.eval(*s)).unwrap_or_default()))
        .unzip();

    let omega_max = samples.omega_max;
    let (n_fit, init): (usize, Vec<Complex64>) = match tail {
        Some(t) => {
            let n_fit = t.j_start.saturating_sub(1).max(1);
            (n_fit, (1..=n_fit).map(|j| t.pole(j)).collect())
        }
        None => {
            let init = (1..=n_pairs)
                .map(|j| {
                    let w = omega_max * (j as f64 - 0.5) / n_pairs as f64;
                    Complex64::new(-w / 100.0, w)
                })
                .collect();
            (n_pairs, init)
        }
    };
    if 4 * n_fit + 2 >= 2 * s.len() {
        return Err(Error::InvalidInput(
            "too few samples for the in-band pairs".into(),
        ));
    }

    let mut poles = init;
    let mut flipped = false;
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    while iterations < MAX_FIT_ITERS {
        iterations += 1;
        let (next, flip) = relocate(&s, &f, &poles)?;
        flipped |= flip;
        last_change = poles
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).norm() / a.norm())
            .fold(0.0, f64::max);
        poles = next;
        if last_change < 1e-9 {
            converged = true;
            break;
        }
    }
    let (residues, d, e) = identify_residues(&s, &f, &poles)?;
    let fnorm = f.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let rnorm = s
        .iter()
        .zip(&f)
        .map(|(si, fi)| (fi - pair_sum(&poles, &residues, *si) - d - e * si).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let misfit = rnorm / fnorm;
    if !converged {
        log::warn!(
            "pole relocation still moving by {last_change:.2e} after {iterations} iterations"
        );
        return Err(Error::FitNotConverged {
            iters: iterations,
            misfit,
        });
    }

    let mut out_poles: Vec<Complex64> = poles.iter().take(n_pairs).cloned().collect();
    let mut out_res: Vec<Complex64> = residues.iter().take(n_pairs).cloned().collect();
    if let Some(t) = tail {
        for j in n_fit + 1..=n_pairs {
            out_poles.push(t.pole(j));
            out_res.push(t.residue(j));
        }
    }
    let zeta0 = tail.map(|t| t.zeta0).unwrap_or(1.0);
    let data = SpectralData {
        poles: out_poles,
        residues: out_res,
        zeta0,
    };
    data.validate()?;
    log::debug!("vector fit: {n_fit} pairs, {iterations} iterations, misfit {misfit:.3e}");
    Ok(RationalFit {
        data,
        fitted_poles: poles,
        fitted_residues: residues,
        d,
        e,
        tail: tail.copied(),
        misfit,
        iterations,
        flipped,
    })
}

/// Real basis of one conjugate pair: `1/(s-a) + 1/(s-conj a)` and
/// `i/(s-a) - i/(s-conj a)`.
fn pair_basis(a: Complex64, s: Complex64) -> (Complex64, Complex64) {
    let p = (s - a).inv();
    let q = (s - a.conj()).inv();
    let i = Complex64::i();
    (p + q, i * p - i * q)
}

/// Solves the linearized problem `sigma f ~ p` for the weight function
/// and returns its zeros as the new poles (unstable ones reflected).
fn relocate(
    s: &[Complex64],
    f: &[Complex64],
    poles: &[Complex64],
) -> Result<(Vec<Complex64>, bool)> {
    let np = poles.len();
    let cols = 4 * np + 2;
    let rows = 2 * s.len();
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut b = DVector::<f64>::zeros(rows);
    for (i, (&si, &fi)) in s.iter().zip(f).enumerate() {
        for (k, &pk) in poles.iter().enumerate() {
            let (p1, p2) = pair_basis(pk, si);
            let (q1, q2) = (-fi * p1, -fi * p2);
            for (col, v) in [
                (2 * k, p1),
                (2 * k + 1, p2),
                (2 * np + 2 + 2 * k, q1),
                (2 * np + 3 + 2 * k, q2),
            ] {
                a[(2 * i, col)] = v.re;
                a[(2 * i + 1, col)] = v.im;
            }
        }
        a[(2 * i, 2 * np)] = 1.0;
        a[(2 * i, 2 * np + 1)] = si.re;
        a[(2 * i + 1, 2 * np + 1)] = si.im;
        b[2 * i] = fi.re;
        b[2 * i + 1] = fi.im;
    }
    let x = scaled_lstsq(a, &b)?;
    let c = &x.as_slice()[2 * np + 2..];

    // zeros of sigma: eig(H - b c^T) with H = blkdiag([[a', a''], [-a'', a']]), b = (2, 0, 2, 0, ...)
    let mut h = DMatrix::<f64>::zeros(2 * np, 2 * np);
    for (k, pk) in poles.iter().enumerate() {
        h[(2 * k, 2 * k)] = pk.re;
        h[(2 * k, 2 * k + 1)] = pk.im;
        h[(2 * k + 1, 2 * k)] = -pk.im;
        h[(2 * k + 1, 2 * k + 1)] = pk.re;
        for (col, cv) in c.iter().enumerate() {
            h[(2 * k, col)] -= 2.0 * cv;
        }
    }
    let eig = h.complex_eigenvalues();
    let mut flipped = false;
    let mut upper: Vec<Complex64> = eig
        .iter()
        .filter(|z| z.im > 0.0)
        .map(|z| {
            if z.re > 0.0 {
                flipped = true;
                Complex64::new(-z.re, z.im)
            } else {
                *z
            }
        })
        .collect();
    upper.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
    if upper.len() < np {
        // real zeros split a pair: keep the old poles farthest from the new set
        let mut spare: Vec<Complex64> = poles.to_vec();
        spare.sort_by(|a, b| {
            let da = upper
                .iter()
                .map(|u| (u - a).norm())
                .fold(f64::INFINITY, f64::min);
            let db = upper
                .iter()
                .map(|u| (u - b).norm())
                .fold(f64::INFINITY, f64::min);
            db.partial_cmp(&da).unwrap()
        });
        upper.extend(spare.into_iter().take(np - upper.len()));
        upper.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
    }
    upper.truncate(np);
    Ok((upper, flipped))
}

/// Residues and `d + e s` for fixed poles.
fn identify_residues(
    s: &[Complex64],
    f: &[Complex64],
    poles: &[Complex64],
) -> Result<(Vec<Complex64>, f64, f64)> {
    let np = poles.len();
    let rows = 2 * s.len();
    let mut a = DMatrix::<f64>::zeros(rows, 2 * np + 2);
    let mut b = DVector::<f64>::zeros(rows);
    for (i, (&si, &fi)) in s.iter().zip(f).enumerate() {
        for (k, &pk) in poles.iter().enumerate() {
            let (p1, p2) = pair_basis(pk, si);
            a[(2 * i, 2 * k)] = p1.re;
            a[(2 * i + 1, 2 * k)] = p1.im;
            a[(2 * i, 2 * k + 1)] = p2.re;
            a[(2 * i + 1, 2 * k + 1)] = p2.im;
        }
        a[(2 * i, 2 * np)] = 1.0;
        a[(2 * i, 2 * np + 1)] = si.re;
        a[(2 * i + 1, 2 * np + 1)] = si.im;
        b[2 * i] = fi.re;
        b[2 * i + 1] = fi.im;
    }
    let x = scaled_lstsq(a, &b)?;
    let res = (0..np)
        .map(|k| Complex64::new(x[2 * k], x[2 * k + 1]))
        .collect();
    Ok((res, x[2 * np], x[2 * np + 1]))
}

/// Column-equilibrated least squares. Tall systems go through the normal
/// equations (Cholesky), small ones through the SVD.
fn scaled_lstsq(mut a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let cols = a.ncols();
    let mut scale = vec![1.0; cols];
    for (j, sc) in scale.iter_mut().enumerate() {
        let n = a.column(j).norm();
        if n > 0.0 {
            *sc = 1.0 / n;
            a.column_mut(j).scale_mut(*sc);
        }
    }
    let work = a.nrows() as f64 * (cols as f64).powi(2);
    let y = if work > 5e7 {
        let g = a.tr_mul(&a);
        let rhs = a.tr_mul(b);
        match g.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => crate::linalg::lstsq(g, &rhs, 1e-15)?.0,
        }
    } else {
        crate::linalg::lstsq(a, b, 1e-14)?.0
    };
    Ok(DVector::from_iterator(
        cols,
        y.iter().zip(&scale).map(|(v, s)| v * s),
    ))
}

/// Adds complex Gaussian noise with RMS `level * RMS|D|`.
///
/// Samples `k` and `n - 1 - k` (conjugate frequencies on the symmetric grid)
/// receive conjugate noise; the draw is deterministic in `seed`.
pub fn add_noise(samples: &TransferSamples, level: f64, seed: u64) -> TransferSamples {
    let n = samples.values.len();
    if level == 0.0 || n == 0 {
        return samples.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n.div_ceil(2) {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        let mirror = n - 1 - k;
        if mirror == k {
            noise[k] = Complex64::new(re * 2f64.sqrt(), 0.0);
        } else {
            noise[k] = Complex64::new(re, im);
            noise[mirror] = noise[k].conj();
        }
    }
    let rms = |v: &[Complex64]| (v.iter().map(|x| x.norm_sqr()).sum::<f64>() / n as f64).sqrt();
    let factor = level * rms(&samples.values) / rms(&noise);
    TransferSamples {
        s_points: samples.s_points.clone(),
        values: samples
            .values
            .iter()
            .zip(&noise)
            .map(|(d, e)| d + e * factor)
            .collect(),
        omega_max: samples.omega_max,
    }
}
