//! Gaussian tail probability and Gauss-Legendre quadrature nodes.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_2_SQRT_PI, PI};

/// `1/sqrt(2) - FRAC_1_SQRT_2`, the rounding residue of the constant.
const FRAC_1_SQRT_2_LO: f64 = -4.833_646_656_726_457e-17;

/// Gaussian Q-function, `P(Z > x)` for a standard normal `Z`.
///
/// Evaluated as `erfc(x / sqrt 2) / 2`. The argument scaling is carried in
/// double-double and its low part applied as a first-order correction, so
/// the result keeps close to full relative precision out to the deep tail
/// (the value underflows only past `x ~ 38.5`).
pub fn q_function(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return 1.0;
    }
    let z_hi = x * FRAC_1_SQRT_2;
    let z_lo = x.mul_add(FRAC_1_SQRT_2, -z_hi) + x * FRAC_1_SQRT_2_LO;
    let base = libm::erfc(z_hi);
    let slope = if z_hi.abs() < 27.0 {
        FRAC_2_SQRT_PI * (-z_hi * z_hi).exp()
    } else {
        0.0
    };
    0.5 * (base - z_lo * slope)
}

/// Natural log of the standard normal density, up to the `-ln sqrt(2 pi)`
/// constant, for a Gaussian with mean `mean` and standard deviation `sigma`.
#[inline]
pub(crate) fn log_gauss_kernel(y: f64, mean: f64, sigma: f64) -> f64 {
    let t = (y - mean) / sigma;
    -0.5 * t * t - sigma.ln()
}

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes an `n`-point rule by Newton iteration on the Legendre
    /// three-term recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(mid + half * t))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Q(x) evaluated at 50 digits with an arbitrary-precision erfc.
    const Q_REFERENCE: &[(f64, f64)] = &[
        (-8.0, 0.999_999_999_999_999_377_9),
        (-5.5, 0.999_999_981_010_437_534_11),
        (-3.0, 0.998_650_101_968_369_905_47),
        (-1.0, 0.841_344_746_068_542_948_59),
        (-0.3, 0.617_911_422_188_952_633_07),
        (0.0, 0.5),
        (0.1, 0.460_172_162_722_971_016_33),
        (0.5, 0.308_537_538_725_986_896_36),
        (1.0, 0.158_655_253_931_457_051_41),
        (1.7, 0.044_565_462_758_543_043_664),
        (2.5, 0.006_209_665_325_776_135_167),
        (3.3, 0.000_483_424_142_383_777_507_1),
        (4.0, 3.167_124_183_311_992_125_4e-5),
        (5.0, 2.866_515_718_791_939_116_7e-7),
        (6.0, 9.865_876_450_376_981_407e-10),
        (7.0, 1.279_812_543_885_835_004_4e-12),
        (7.9, 1.394_517_146_659_264_278_1e-15),
        (8.0, 6.220_960_574_271_784_123_5e-16),
        (10.0, 7.619_853_024_160_526_066e-24),
        (20.0, 2.753_624_118_606_233_695_1e-89),
        (30.0, 4.906_713_927_148_187_059_5e-198),
    ];

    #[test]
    fn q_matches_high_precision_reference() {
        for &(x, q) in Q_REFERENCE {
            let got = q_function(x);
            let tol = if x.abs() <= 8.0 { 1e-14 } else { 1e-12 };
            assert!(((got - q) / q).abs() < tol, "Q({x}) = {got:e}, expected {q:e}");
        }
    }

    #[test]
    fn q_limits_and_deep_tail() {
        assert_eq!(q_function(0.0), 0.5);
        assert_eq!(q_function(f64::INFINITY), 0.0);
        assert_eq!(q_function(f64::NEG_INFINITY), 1.0);
        assert!(q_function(f64::NAN).is_nan());
        // subnormal range: only coarse relative accuracy is possible
        assert_relative_eq!(q_function(37.5), 4.605_353_009_581_954_8e-308, max_relative = 1e-9);
        assert_relative_eq!(q_function(38.0), 2.885_428_360_068_784_3e-316, max_relative = 1e-6);
    }

    #[test]
    fn q_is_monotone_and_symmetric() {
        let mut prev = 1.0;
        for k in -400..=400 {
            let x = k as f64 * 0.02;
            let q = q_function(x);
            assert!(q <= prev);
            prev = q;
            assert!((q + q_function(-x) - 1.0).abs() < 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 16, 32, 64] {
            let rule = GaussLegendre::new(n);
            assert_relative_eq!(rule.weights().iter().sum::<f64>(), 2.0, epsilon = 1e-14);
            for deg in 0..(2 * n) {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let got = rule.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn legendre_rule_on_interval() {
        let rule = GaussLegendre::new(16);
        let got = rule.integrate(0.0, PI, f64::sin);
        assert_relative_eq!(got, 2.0, epsilon = 1e-14);
    }
}
