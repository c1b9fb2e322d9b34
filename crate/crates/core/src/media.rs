//! Impedance and loss profiles on the travel-time interval `[0, t_max]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampled::{trapezoid, uniform_grid, PiecewiseLinear};

/// Width of the flat impedance margin at each end, as a fraction of `t_max`.
pub const FLAT_MARGIN: f64 = 0.02;

pub const DEFAULT_SAMPLES: usize = 3000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "MediumFile", into = "MediumFile")]
pub struct MediumProfile {
    pub t_max: f64,
    pub zeta0: f64,
    zeta: PiecewiseLinear,
    loss: PiecewiseLinear,
}

/// On-disk layout of a profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MediumFile {
    pub t_max: f64,
    pub n_samples: usize,
    pub zeta: Vec<f64>,
    pub loss: Vec<f64>,
}

impl From<MediumFile> for MediumProfile {
    fn from(f: MediumFile) -> Self {
        let zeta0 = f.zeta[0];
        MediumProfile {
            t_max: f.t_max,
            zeta0,
            zeta: PiecewiseLinear::uniform(f.t_max, f.zeta),
            loss: PiecewiseLinear::uniform(f.t_max, f.loss),
        }
    }
}

impl From<MediumProfile> for MediumFile {
    fn from(m: MediumProfile) -> Self {
        MediumFile {
            t_max: m.t_max,
            n_samples: m.zeta.y.len(),
            zeta: m.zeta.y,
            loss: m.loss.y,
        }
    }
}

impl MediumProfile {
    /// Samples `zeta_fn` and `loss_fn` on `n + 1` uniform points.
    ///
    /// The impedance argument is clamped to `[m, t_max - m]` with
    /// `m = FLAT_MARGIN * t_max`, so both ends are flat.
    pub fn from_fn(
        t_max: f64,
        n: usize,
        zeta_fn: impl Fn(f64) -> f64,
        loss_fn: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if !(t_max > 0.0) || n < 2 {
            return Err(Error::InvalidInput(format!("t_max = {t_max}, n = {n}")));
        }
        let margin = FLAT_MARGIN * t_max;
        let t = uniform_grid(t_max, n);
        let zeta: Vec<f64> = t
            .iter()
            .map(|&v| zeta_fn(v.clamp(margin, t_max - margin)))
            .collect();
        let loss: Vec<f64> = t.iter().map(|&v| loss_fn(v)).collect();
        Self::from_samples(t_max, zeta, loss)
    }

    /// Wraps existing samples, checking positivity of the impedance and
    /// nonnegativity of the loss.
    pub fn from_samples(t_max: f64, zeta: Vec<f64>, loss: Vec<f64>) -> Result<Self> {
        if zeta.len() != loss.len() || zeta.len() < 3 {
            return Err(Error::InvalidInput(
                "sample vectors must match and hold at least 3 points".into(),
            ));
        }
        let step = t_max / (zeta.len() - 1) as f64;
        if let Some(k) = zeta.iter().position(|&z| !(z > 0.0) || !z.is_finite()) {
            return Err(Error::InvalidMedium(format!(
                "nonpositive impedance {} at T = {}",
                zeta[k],
                k as f64 * step
            )));
        }
        if let Some(k) = loss.iter().position(|&r| !(r >= 0.0) || !r.is_finite()) {
            return Err(Error::InvalidMedium(format!(
                "negative loss {} at T = {}",
                loss[k],
                k as f64 * step
            )));
        }
        Ok(MediumProfile {
            t_max,
            zeta0: zeta[0],
            zeta: PiecewiseLinear::uniform(t_max, zeta),
            loss: PiecewiseLinear::uniform(t_max, loss),
        })
    }

    pub fn n_cells(&self) -> usize {
        self.zeta.y.len() - 1
    }

    pub fn zeta(&self, t: f64) -> f64 {
        self.zeta.eval(t)
    }

    pub fn loss(&self, t: f64) -> f64 {
        self.loss.eval(t)
    }

    pub fn zeta_samples(&self) -> &[f64] {
        &self.zeta.y
    }

    pub fn loss_samples(&self) -> &[f64] {
        &self.loss.y
    }

    pub fn nodes(&self) -> &[f64] {
        &self.zeta.x
    }

    /// Loss decomposition `r = r0 + alpha * rho`.
    pub fn decompose_loss(&self) -> LossDecomposition {
        LossDecomposition::from_samples(self.t_max, &self.loss.y)
    }
}

/// Trapezoid mean of the loss samples.
pub fn mean_loss(m: &MediumProfile) -> f64 {
    trapezoid(m.t_max, m.loss_samples()) / m.t_max
}

/// `r(T) = r0 + alpha * rho(T)` with `rho` of zero mean.
///
/// `rho` is scaled so that `sup |rho| = r0` when `r0 > 0` (and `1`
/// otherwise); `alpha` then carries the amplitude of the variation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossDecomposition {
    pub r0: f64,
    pub alpha: f64,
    pub rho: Vec<f64>,
}

impl LossDecomposition {
    pub fn from_samples(t_max: f64, loss: &[f64]) -> Self {
        let r0 = trapezoid(t_max, loss) / t_max;
        let dev: Vec<f64> = loss.iter().map(|r| r - r0).collect();
        let sup = dev.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        if sup == 0.0 {
            return LossDecomposition {
                r0,
                alpha: 0.0,
                rho: vec![0.0; loss.len()],
            };
        }
        let target = if r0 > 0.0 { r0 } else { 1.0 };
        let rho = dev.iter().map(|d| d * target / sup).collect();
        LossDecomposition {
            r0,
            alpha: sup / target,
            rho,
        }
    }

    pub fn recompose(&self) -> Vec<f64> {
        self.rho.iter().map(|p| self.r0 + self.alpha * p).collect()
    }
}

/// Gaussian bump `height * exp(-((T - center) / width)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    pub height: f64,
}

impl Bump {
    pub fn eval(&self, t: f64) -> f64 {
        let u = (t - self.center) / self.width;
        self.height * (-u * u).exp()
    }
}

/// Layer adding `value` on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub start: f64,
    pub end: f64,
    pub value: f64,
}

/// Truncated Fourier series in `cos/sin[pi j (2T/t_max - 1)]`,
/// `j = 0..=n/2` (no `sin` for `j = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierMedium {
    pub t_max: f64,
    pub cos_coeffs_zeta: Vec<f64>,
    pub sin_coeffs_zeta: Vec<f64>,
    pub cos_coeffs_loss: Vec<f64>,
    pub sin_coeffs_loss: Vec<f64>,
}

impl FourierMedium {
    /// Number of modes kept for ROM order `n`.
    pub fn modes(n: usize) -> usize {
        n / 2
    }

    pub fn new(
        t_max: f64,
        cos_coeffs_zeta: Vec<f64>,
        sin_coeffs_zeta: Vec<f64>,
        cos_coeffs_loss: Vec<f64>,
        sin_coeffs_loss: Vec<f64>,
    ) -> Result<Self> {
        let k = cos_coeffs_zeta.len();
        if k == 0
            || sin_coeffs_zeta.len() + 1 != k
            || cos_coeffs_loss.len() != k
            || sin_coeffs_loss.len() + 1 != k
        {
            return Err(Error::InvalidInput(
                "Fourier coefficient lengths must be (m+1, m, m+1, m)".into(),
            ));
        }
        let f = FourierMedium {
            t_max,
            cos_coeffs_zeta,
            sin_coeffs_zeta,
            cos_coeffs_loss,
            sin_coeffs_loss,
        };
        let check = uniform_grid(t_max, 1000);
        if let Some(t) = check.iter().find(|&&t| !(f.zeta(t) > 0.0)) {
            return Err(Error::InvalidMedium(format!(
                "Fourier impedance nonpositive at T = {t}"
            )));
        }
        Ok(f)
    }

    /// Constant medium expressed in the basis for ROM order `n`.
    pub fn constant(t_max: f64, n: usize, zeta0: f64, r0: f64) -> Self {
        let m = Self::modes(n);
        let mut cz = vec![0.0; m + 1];
        let mut cr = vec![0.0; m + 1];
        cz[0] = zeta0;
        cr[0] = r0;
        FourierMedium {
            t_max,
            cos_coeffs_zeta: cz,
            sin_coeffs_zeta: vec![0.0; m],
            cos_coeffs_loss: cr,
            sin_coeffs_loss: vec![0.0; m],
        }
    }

    fn series(&self, c: &[f64], s: &[f64], t: f64) -> f64 {
        let x = std::f64::consts::PI * (2.0 * t / self.t_max - 1.0);
        let mut v = c[0];
        for j in 1..c.len() {
            let (sn, cs) = (j as f64 * x).sin_cos();
            v += c[j] * cs + s[j - 1] * sn;
        }
        v
    }

    pub fn zeta(&self, t: f64) -> f64 {
        self.series(&self.cos_coeffs_zeta, &self.sin_coeffs_zeta, t)
    }

    pub fn loss(&self, t: f64) -> f64 {
        self.series(&self.cos_coeffs_loss, &self.sin_coeffs_loss, t)
    }

    /// Flat parameter vector: zeta cos, zeta sin, loss cos, loss sin.
    pub fn params(&self) -> Vec<f64> {
        [
            &self.cos_coeffs_zeta[..],
            &self.sin_coeffs_zeta,
            &self.cos_coeffs_loss,
            &self.sin_coeffs_loss,
        ]
        .concat()
    }

    /// Same basis, new coefficients; no positivity check.
    pub fn with_params(&self, p: &[f64]) -> Self {
        let m = self.sin_coeffs_zeta.len();
        assert_eq!(p.len(), 4 * m + 2);
        FourierMedium {
            t_max: self.t_max,
            cos_coeffs_zeta: p[..m + 1].to_vec(),
            sin_coeffs_zeta: p[m + 1..2 * m + 1].to_vec(),
            cos_coeffs_loss: p[2 * m + 1..3 * m + 2].to_vec(),
            sin_coeffs_loss: p[3 * m + 2..].to_vec(),
        }
    }

    /// Least-squares projection of a profile onto the basis with `m` modes.
    pub fn project(m: &MediumProfile, modes: usize) -> Self {
        let t = uniform_grid(m.t_max, 4000);
        let x: Vec<f64> = t
            .iter()
            .map(|&v| std::f64::consts::PI * (2.0 * v / m.t_max - 1.0))
            .collect();
        let cols = 2 * modes + 1;
        let a = nalgebra::DMatrix::from_fn(t.len(), cols, |i, c| {
            if c <= modes {
                (c as f64 * x[i]).cos()
            } else {
                ((c - modes) as f64 * x[i]).sin()
            }
        });
        let fit = |vals: Vec<f64>| -> Vec<f64> {
            let b = nalgebra::DVector::from_vec(vals);
            a.clone()
                .svd(true, true)
                .solve(&b, 1e-12)
                .map(|v| v.as_slice().to_vec())
                .unwrap_or_else(|_| vec![0.0; cols])
        };
        let cz = fit(t.iter().map(|&v| m.zeta(v)).collect());
        let cr = fit(t.iter().map(|&v| m.loss(v)).collect());
        FourierMedium {
            t_max: m.t_max,
            cos_coeffs_zeta: cz[..=modes].to_vec(),
            sin_coeffs_zeta: cz[modes + 1..].to_vec(),
            cos_coeffs_loss: cr[..=modes].to_vec(),
            sin_coeffs_loss: cr[modes + 1..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MediumKind {
    Constant {
        zeta0: f64,
        r0: f64,
    },
    Smooth {
        zeta0: f64,
        r0: f64,
        #[serde(default)]
        zeta_bumps: Vec<Bump>,
        #[serde(default)]
        loss_bumps: Vec<Bump>,
    },
    Discontinuous {
        zeta0: f64,
        r0: f64,
        #[serde(default)]
        zeta_layers: Vec<Layer>,
        #[serde(default)]
        loss_layers: Vec<Layer>,
    },
    Fourier(FourierMedium),
}

/// Builds a sampled profile on `n + 1` points of `[0, t_max]`.
///
/// Layer edges become ramps over one sample cell.
pub fn make_profile(kind: &MediumKind, t_max: f64, n: usize) -> Result<MediumProfile> {
    let cell = t_max / n as f64;
    let layered = |base: f64, layers: &[Layer], t: f64| -> f64 {
        base + layers
            .iter()
            .map(|l| {
                let up = ((t - l.start) / cell + 0.5).clamp(0.0, 1.0);
                let down = ((t - l.end) / cell + 0.5).clamp(0.0, 1.0);
                l.value * (up - down)
            })
            .sum::<f64>()
    };
    match kind {
        MediumKind::Constant { zeta0, r0 } => MediumProfile::from_fn(t_max, n, |_| *zeta0, |_| *r0),
        MediumKind::Smooth {
            zeta0,
            r0,
            zeta_bumps,
            loss_bumps,
        } => MediumProfile::from_fn(
            t_max,
            n,
            |t| zeta0 + zeta_bumps.iter().map(|b| b.eval(t)).sum::<f64>(),
            |t| r0 + loss_bumps.iter().map(|b| b.eval(t)).sum::<f64>(),
        ),
        MediumKind::Discontinuous {
            zeta0,
            r0,
            zeta_layers,
            loss_layers,
        } => MediumProfile::from_fn(
            t_max,
            n,
            |t| layered(*zeta0, zeta_layers, t),
            |t| layered(*r0, loss_layers, t),
        ),
        MediumKind::Fourier(f) => {
            if (f.t_max - t_max).abs() > 1e-12 * t_max {
                return Err(Error::InvalidInput("Fourier medium t_max mismatch".into()));
            }
            MediumProfile::from_fn(t_max, n, |t| f.zeta(t), |t| f.loss(t))
        }
    }
}
