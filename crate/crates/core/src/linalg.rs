//! Small dense and tridiagonal kernels used across the pipeline.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Pivot failure reported by [`solve_tridiagonal`].
#[derive(Debug, Clone, Copy)]
pub struct SingularPivot {
    pub row: usize,
    pub pivot: f64,
}

const PIVOT_TOL: f64 = 1e-14;

/// Solves a general tridiagonal system.
///
/// `lower[i]` couples row `i + 1` to column `i`, `upper[i]` couples row `i` to
/// column `i + 1`. The Thomas sweep is tried first; if any pivot falls below
/// `1e-14` times its row norm the system is redone with partial pivoting.
pub fn solve_tridiagonal<T>(
    lower: &[T],
    diag: &[T],
    upper: &[T],
    rhs: &[T],
) -> std::result::Result<Vec<T>, SingularPivot>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = diag.len();
    assert!(n > 0 && lower.len() + 1 == n && upper.len() + 1 == n && rhs.len() == n);
    match thomas(lower, diag, upper, rhs) {
        Some(x) => Ok(x),
        None => pivoted(lower, diag, upper, rhs, false),
    }
}

/// Pivoted tridiagonal solve that replaces vanishing pivots by a tiny
/// multiple of the matrix scale, for inverse iteration at a converged shift.
pub fn solve_tridiagonal_clamped<T>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Vec<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    pivoted(lower, diag, upper, rhs, true).expect("clamped elimination cannot fail")
}

fn row_norm<T: ComplexField<RealField = f64> + Copy>(
    lower: &[T],
    diag: &[T],
    upper: &[T],
    i: usize,
) -> f64 {
    let mut s = diag[i].modulus();
    if i > 0 {
        s += lower[i - 1].modulus();
    }
    if i < upper.len() {
        s += upper[i].modulus();
    }
    s
}

fn thomas<T>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Option<Vec<T>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut denom = diag[0];
    if denom.modulus() < PIVOT_TOL * row_norm(lower, diag, upper, 0) {
        return None;
    }
    if n > 1 {
        c[0] = upper[0] / denom;
    }
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i - 1] * c[i - 1];
        if denom.modulus() < PIVOT_TOL * row_norm(lower, diag, upper, i) {
            return None;
        }
        if i + 1 < n {
            c[i] = upper[i] / denom;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        let next = d[i + 1];
        d[i] -= c[i] * next;
    }
    Some(d)
}

/// Gaussian elimination with partial pivoting on the band (second
/// superdiagonal fill-in), following the classic `gtsv` layout.
///
/// With `clamp` set, tiny pivots are replaced by the threshold instead of
/// failing; inverse iteration relies on that.
fn pivoted<T>(
    lower: &[T],
    diag: &[T],
    upper: &[T],
    rhs: &[T],
    clamp: bool,
) -> std::result::Result<Vec<T>, SingularPivot>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = diag.len();
    let scale = (0..n)
        .map(|i| row_norm(lower, diag, upper, i))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tiny = PIVOT_TOL * scale;
    let dl: Vec<T> = lower.to_vec();
    let mut d: Vec<T> = diag.to_vec();
    let mut du: Vec<T> = upper.to_vec();
    let mut du2 = vec![T::zero(); n.saturating_sub(2)];
    let mut b: Vec<T> = rhs.to_vec();

    let fix = |v: T, row: usize| -> std::result::Result<T, SingularPivot> {
        if v.modulus() >= tiny {
            Ok(v)
        } else if clamp {
            Ok(T::from_real(tiny))
        } else {
            Err(SingularPivot {
                row,
                pivot: v.modulus(),
            })
        }
    };

    for i in 0..n.saturating_sub(1) {
        if d[i].modulus() >= dl[i].modulus() {
            d[i] = fix(d[i], i)?;
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            let bi = b[i];
            b[i + 1] -= fact * bi;
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du2[i];
            }
            du[i] = temp;
            let bi = b[i];
            b[i] = b[i + 1];
            b[i + 1] = bi - fact * b[i + 1];
        }
    }
    d[n - 1] = fix(d[n - 1], n - 1)?;

    b[n - 1] /= d[n - 1];
    if n > 1 {
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
    Ok(b)
}

/// `sqrt(f^2 + g^2)` for complex arguments, scaled against overflow.
fn cpythag(f: Complex64, g: Complex64) -> Complex64 {
    let s = f.norm().max(g.norm());
    if s == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let (fs, gs) = (f / s, g / s);
    (fs * fs + gs * gs).sqrt() * s
}

/// Eigenvalues and first eigenvector components of a complex symmetric
/// tridiagonal matrix.
///
/// Implicit QL with complex orthogonal rotations (`c^2 + s^2 = 1`), so the
/// accumulated transform `Q` satisfies `Q^T Q = I` and the returned first
/// components `z` give `e1^T (A - x I)^{-1} e1 = sum z_k^2 / (mu_k - x)`.
/// Only the first row of `Q` is tracked, so the cost is `O(n^2)`.
pub fn complex_symmetric_tridiagonal_eigen(
    diag: &[Complex64],
    off: &[Complex64],
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(Error::InvalidInput("tridiagonal dimensions".into()));
    }
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(zero);
    let mut z = vec![zero; n];
    z[0] = one;
    let eps = f64::EPSILON;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].norm() + d[m + 1].norm();
                if e[m].norm() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::DegenerateSpectrum(format!(
                    "QL iteration did not converge for eigenvalue {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (e[l] * 2.0);
            let mut r = cpythag(g, one);
            if (g.conj() * r).re < 0.0 {
                r = -r;
            }
            g = d[m] - d[l] + e[l] / (g + r);
            let (mut s, mut c, mut p) = (one, one, zero);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = cpythag(f, g);
                e[i + 1] = r;
                if r.norm() == 0.0 {
                    d[i + 1] -= p;
                    e[m] = zero;
                    deflated = true;
                    break;
                }
                // an isotropic pair (f^2 + g^2 ~ 0) has no complex orthogonal rotation
                if r.norm() < 1e-8 * (f.norm() + g.norm()) {
                    return Err(Error::DegenerateSpectrum(format!(
                        "near-isotropic rotation at row {i}"
                    )));
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + c * b * 2.0;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zi = z[i];
                let zi1 = z[i + 1];
                z[i + 1] = s * zi + c * zi1;
                z[i] = c * zi - s * zi1;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = zero;
        }
    }
    if d.iter()
        .chain(z.iter())
        .any(|v| !v.re.is_finite() || !v.im.is_finite())
    {
        return Err(Error::DegenerateSpectrum("non-finite eigendata".into()));
    }
    Ok((d, z))
}

/// Lowest `k` eigenpairs of a real symmetric tridiagonal matrix.
///
/// Sturm-count bisection for the eigenvalues, inverse iteration for the
/// vectors. Vectors are unit length in the Euclidean norm.
pub fn symmetric_tridiagonal_lowest(
    diag: &[f64],
    off: &[f64],
    k: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    symmetric_tridiagonal_range(diag, off, 0, k)
}

/// Eigenpairs `first .. first + k` (ascending order) of a real symmetric
/// tridiagonal matrix.
pub fn symmetric_tridiagonal_range(
    diag: &[f64],
    off: &[f64],
    first: usize,
    k: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    if off.len() + 1 != n || first + k > n {
        return Err(Error::Eigen(format!(
            "asked for eigenpairs {first}..{} of an {n}x{n} matrix",
            first + k
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut rad = 0.0;
        if i > 0 {
            rad += off[i - 1].abs();
        }
        if i + 1 < n {
            rad += off[i].abs();
        }
        lo = lo.min(diag[i] - rad);
        hi = hi.max(diag[i] + rad);
    }
    let off2: Vec<f64> = off.iter().map(|x| x * x).collect();
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut q = diag[0] - x;
        for i in 0..n {
            if i > 0 {
                let prev = if q == 0.0 {
                    f64::EPSILON * (x.abs() + 1.0)
                } else {
                    q
                };
                q = diag[i] - x - off2[i - 1] / prev;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };

    let mut values = Vec::with_capacity(k);
    for idx in first..first + k {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if count_below(mid) > idx {
                b = mid;
            } else {
                a = mid;
            }
            if b - a <= 2.0 * f64::EPSILON * (a.abs().max(b.abs())) {
                break;
            }
        }
        values.push(0.5 * (a + b));
    }

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (idx, &lam) in values.iter().enumerate() {
        let shifted: Vec<f64> = diag.iter().map(|d| d - lam).collect();
        // deterministic start with components in every eigendirection
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.1 * ((i * 7 + idx) % 13) as f64)
            .collect();
        for _ in 0..4 {
            x = pivoted(off, &shifted, off, &x, true)
                .map_err(|p| Error::Eigen(format!("inverse iteration pivot at row {}", p.row)))?;
            for v in &vectors {
                let dot: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(v).for_each(|(xi, vi)| *xi -= dot * vi);
            }
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !nrm.is_finite() || nrm == 0.0 {
                return Err(Error::Eigen(format!(
                    "inverse iteration collapsed for eigenvalue {idx}"
                )));
            }
            x.iter_mut().for_each(|v| *v /= nrm);
        }
        vectors.push(x);
    }
    Ok((values, vectors))
}

/// Least-squares solve through the SVD, discarding singular values below
/// `rcond * sigma_max`. Returns the solution and the numerical rank.
pub fn lstsq(a: DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> Result<(DVector<f64>, usize)> {
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let cut = rcond * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > cut).count();
    let x = svd
        .solve(b, cut)
        .map_err(|e| Error::InvalidInput(format!("SVD solve: {e}")))?;
    Ok((x, rank))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dense(lower: &[Complex64], diag: &[Complex64], upper: &[Complex64]) -> DMatrix<Complex64> {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = diag[i];
            if i + 1 < n {
                m[(i + 1, i)] = lower[i];
                m[(i, i + 1)] = upper[i];
            }
        }
        m
    }

    #[test]
    fn thomas_matches_dense_lu() {
        let lower = vec![c(1.0, 0.5), c(-0.3, 0.0), c(2.0, -1.0)];
        let diag = vec![c(4.0, 1.0), c(3.0, 0.0), c(5.0, -2.0), c(1.0, 1.0)];
        let upper = vec![c(0.5, 0.0), c(1.0, 1.0), c(-1.0, 0.2)];
        let rhs = vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0), c(-1.0, 0.5)];
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        let m = dense(&lower, &diag, &upper);
        let xr = m.lu().solve(&DVector::from_vec(rhs)).unwrap();
        for i in 0..4 {
            assert!((x[i] - xr[i]).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_leading_pivot_falls_back_to_pivoting() {
        // first pivot exactly zero; Thomas cannot proceed
        let lower = vec![1.0, 1.0];
        let diag = vec![0.0, 2.0, 3.0];
        let upper = vec![1.0, 1.0];
        let rhs = vec![1.0, 2.0, 3.0];
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 3.0]);
        let r = &m * DVector::from_vec(x.clone()) - DVector::from_vec(rhs);
        assert!(r.norm() < 1e-13, "{x:?}");
    }

    #[test]
    fn singular_system_is_reported() {
        let lower = vec![1.0];
        let diag = vec![1.0, 1.0];
        let upper = vec![1.0];
        assert!(solve_tridiagonal(&lower, &diag, &upper, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn complex_symmetric_eigen_matches_schur() {
        // alternating real diagonal, imaginary couplings: the ROM pattern
        let n = 12;
        let diag: Vec<Complex64> = (0..n)
            .map(|i| {
                c(
                    if i % 2 == 0 {
                        0.7 + 0.1 * i as f64
                    } else {
                        0.05
                    },
                    0.0,
                )
            })
            .collect();
        let off: Vec<Complex64> = (0..n - 1)
            .map(|i| c(0.0, 1.0 + 0.3 * (i as f64).sin()))
            .collect();
        let (vals, z) = complex_symmetric_tridiagonal_eigen(&diag, &off).unwrap();
        let m = dense(&off, &diag, &off);
        let reference = m.clone().eigenvalues().unwrap();
        for v in &vals {
            let best = reference
                .iter()
                .map(|r| (r - v).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-10, "eigenvalue {v} not found");
        }
        // resolvent identity through first components
        let x = c(0.3, 0.9);
        let sum: Complex64 = vals.iter().zip(&z).map(|(mu, zk)| zk * zk / (mu - x)).sum();
        let mut shifted = m;
        for i in 0..n {
            shifted[(i, i)] -= x;
        }
        let mut e1 = DVector::zeros(n);
        e1[0] = c(1.0, 0.0);
        let direct = shifted.lu().solve(&e1).unwrap()[0];
        assert!((sum - direct).norm() < 1e-11 * direct.norm());
        let total: Complex64 = z.iter().map(|v| v * v).sum();
        assert!((total - 1.0).norm() < 1e-12);
    }

    #[test]
    fn symmetric_lowest_pairs_of_laplacian() {
        let n = 200;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let (vals, vecs) = symmetric_tridiagonal_lowest(&diag, &off, 5).unwrap();
        for (j, v) in vals.iter().enumerate() {
            let theta = (j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64;
            let exact = 2.0 - 2.0 * theta.cos();
            assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
        }
        for a in 0..5 {
            for b in 0..5 {
                let dot: f64 = vecs[a].iter().zip(&vecs[b]).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lstsq_truncates_small_singular_values() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-14, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0, 2.0]);
        let (x, rank) = lstsq(a, &b, 1e-10).unwrap();
        assert_eq!(rank, 1);
        assert!((x[0] - 1.0).abs() < 1e-8 && (x[1] - 1.0).abs() < 1e-8);
    }
}
