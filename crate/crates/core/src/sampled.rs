//! Piecewise-linear sampled functions.

use serde::{Deserialize, Serialize};

/// Linear interpolant through `(x_k, y_k)` with constant extension outside
/// `[x_0, x_last]`. Nodes must be nondecreasing; a repeated node makes a jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawLinear")]
pub struct PiecewiseLinear {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(skip)]
    prefix: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len());
        assert!(!x.is_empty());
        debug_assert!(x.windows(2).all(|w| w[0] <= w[1]), "nodes must be sorted");
        let mut prefix = vec![0.0; x.len()];
        for k in 1..x.len() {
            prefix[k] = prefix[k - 1] + 0.5 * (x[k] - x[k - 1]) * (y[k] + y[k - 1]);
        }
        Self { x, y, prefix }
    }

    /// Uniform nodes on `[0, t_max]`.
    pub fn uniform(t_max: f64, y: Vec<f64>) -> Self {
        let n = y.len();
        assert!(n >= 2);
        let x = (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect();
        Self::new(x, y)
    }

    fn cell(&self, t: f64) -> usize {
        // index k with x[k] <= t < x[k+1]
        let k = self.x.partition_point(|&v| v <= t);
        k.saturating_sub(1).min(self.x.len() - 2)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if n == 1 || t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = self.cell(t);
        let w = self.x[k + 1] - self.x[k];
        if w <= 0.0 {
            return self.y[k + 1];
        }
        let u = (t - self.x[k]) / w;
        self.y[k] + u * (self.y[k + 1] - self.y[k])
    }

    /// Integral of the interpolant from `x_0` to `t` (constant extension
    /// on either side included).
    fn antiderivative(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return (t - self.x[0]) * self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.prefix[n - 1] + (t - self.x[n - 1]) * self.y[n - 1];
        }
        let k = self.cell(t);
        self.prefix[k] + 0.5 * (t - self.x[k]) * (self.y[k] + self.eval(t))
    }

    /// Exact integral of the interpolant over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    pub fn min(&self) -> f64 {
        self.y.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn sample(&self, t: &[f64]) -> Vec<f64> {
        t.iter().map(|&v| self.eval(v)).collect()
    }
}

#[derive(Deserialize)]
struct RawLinear {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl From<RawLinear> for PiecewiseLinear {
    fn from(r: RawLinear) -> Self {
        Self::new(r.x, r.y)
    }
}

/// Piecewise constant function given by values on half-open intervals.
/// Later intervals override earlier ones where they overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    pub pieces: Vec<(f64, f64, f64)>,
}

impl PiecewiseConstant {
    /// The right end of the last piece is included.
    pub fn eval(&self, t: f64) -> f64 {
        let end = self.end();
        let mut v = 0.0;
        for &(a, b, val) in &self.pieces {
            if t >= a && (t < b || (t == b && b == end)) {
                v = val;
            }
        }
        v
    }

    fn end(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Integral over the support.
    pub fn integral(&self) -> f64 {
        self.pieces
            .iter()
            .map(|&(a, b, v)| if b > a { v * (b - a) } else { 0.0 })
            .sum()
    }

    /// Breakpoints of all pieces, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut x: Vec<f64> = self.pieces.iter().flat_map(|p| [p.0, p.1]).collect();
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        x.dedup();
        x
    }

    /// Step function as a linear interpolant with doubled nodes at jumps
    /// (right-continuous). Pieces must be sorted and non-overlapping.
    pub fn to_linear(&self) -> PiecewiseLinear {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for &(a, b, v) in self.pieces.iter().filter(|p| p.1 > p.0) {
            x.extend([a, b]);
            y.extend([v, v]);
        }
        PiecewiseLinear::new(x, y)
    }

    /// `int f(t) g(t) dt` over the support, with `g` given by its integral
    /// over arbitrary intervals. Pieces are assumed not to overlap.
    pub fn integrate_against(&self, g: &PiecewiseLinear) -> f64 {
        self.pieces
            .iter()
            .map(|&(a, b, v)| if b > a { v * g.integral(a, b) } else { 0.0 })
            .sum()
    }
}

/// Uniform grid of `n + 1` points on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| t_max * k as f64 / n as f64).collect()
}

/// Trapezoid rule on uniform samples over `[0, t_max]`.
pub fn trapezoid(t_max: f64, y: &[f64]) -> f64 {
    let n = y.len() - 1;
    let h = t_max / n as f64;
    h * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[n]))
}

/// Relative `L^p` distance of `est` from `truth` on `[0, t_max]`, by the
/// midpoint rule on `n` cells.
pub fn relative_error(
    est: impl Fn(f64) -> f64,
    truth: impl Fn(f64) -> f64,
    t_max: f64,
    n: usize,
    p: i32,
) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..n {
        let t = t_max * (k as f64 + 0.5) / n as f64;
        let g = truth(t);
        num += (est(t) - g).abs().powi(p);
        den += g.abs().powi(p);
    }
    (num / den).powf(1.0 / p as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eval_and_extension() {
        let f = PiecewiseLinear::new(vec![0.0, 1.0, 3.0], vec![1.0, 3.0, -1.0]);
        assert_eq!(f.eval(-1.0), 1.0);
        assert_eq!(f.eval(0.5), 2.0);
        assert_eq!(f.eval(2.0), 1.0);
        assert_eq!(f.eval(5.0), -1.0);
    }

    #[test]
    fn integral_splits_cells() {
        let f = PiecewiseLinear::new(vec![0.0, 1.0, 3.0], vec![1.0, 3.0, -1.0]);
        // int_0.5^2 of the interpolant: [0.5,1]: (2+3)/2*0.5 ; [1,2]: (3+1)/2
        assert!((f.integral(0.5, 2.0) - (1.25 + 2.0)).abs() < 1e-15);
        // constant tails
        assert!((f.integral(3.0, 4.0) + 1.0).abs() < 1e-15);
        assert!((f.integral(-2.0, 0.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn trapezoid_of_linear_is_exact() {
        let y: Vec<f64> = uniform_grid(2.0, 10)
            .iter()
            .map(|t| 3.0 * t + 1.0)
            .collect();
        assert!((trapezoid(2.0, &y) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn steps_as_linear() {
        let f = PiecewiseConstant {
            pieces: vec![(0.0, 1.0, 2.0), (1.0, 1.5, -1.0), (1.5, 3.0, 4.0)],
        };
        let g = f.to_linear();
        for t in [0.0, 0.5, 1.0, 1.2, 1.5, 2.9, 3.0] {
            assert_eq!(f.eval(t), g.eval(t), "at {t}");
        }
        assert!((g.integral(0.0, 3.0) - f.integral()).abs() < 1e-14);
        assert_eq!(f.breakpoints(), vec![0.0, 1.0, 1.5, 3.0]);
    }

    #[test]
    fn relative_error_of_scaled() {
        let e = relative_error(|t| 1.1 * t.sin(), |t| t.sin(), 3.0, 1000, 1);
        assert!((e - 0.1).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn integral_is_additive(a in -1.0f64..4.0, b in -1.0f64..4.0, c in -1.0f64..4.0) {
            let f = PiecewiseLinear::new(vec![0.0, 0.7, 1.1, 3.0], vec![2.0, -1.0, 0.5, 4.0]);
            let lhs = f.integral(a, c);
            let rhs = f.integral(a, b) + f.integral(b, c);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
