//! Closed-form symbol error rate and mutual information.

use std::sync::OnceLock;

use serde::Serialize;

use crate::detection::ThresholdSet;
use crate::link::ChannelModel;
use crate::special::{log_gauss_kernel, q_function, GaussLegendre};

/// SER values below this are reported as zero with [`SerBreakdown::underflow`] set.
pub const SER_FLOOR: f64 = 1e-320;

/// Nodes per panel of the default mutual-information rule.
pub const DEFAULT_MI_ORDER: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SerBreakdown {
    /// Conditional error probability of each transmitted symbol.
    pub per_symbol: Vec<f64>,
    /// Prior-weighted average.
    pub average: f64,
    /// Set when some value fell below [`SER_FLOOR`] and was clamped to zero.
    pub underflow: bool,
}

/// Average SER of threshold detection:
/// `sum_i P_i [Q((x_i - r_{i-1}) / sigma_i) + Q((r_i - x_i) / sigma_i)]`.
pub fn analytic_ser(m: &ChannelModel, t: &ThresholdSet) -> SerBreakdown {
    let (x, p, s) = (m.points(), m.probs(), m.cond_sigma());
    let mut underflow = false;
    let mut tail = |z: f64| {
        let q = q_function(z);
        if z.is_finite() && q < SER_FLOOR {
            underflow = true;
            0.0
        } else {
            q
        }
    };
    let per_symbol: Vec<f64> = (0..x.len())
        .map(|i| {
            let (lo, hi) = t.region(i);
            let pe = if s[i] > 0.0 {
                tail((x[i] - lo) / s[i]) + tail((hi - x[i]) / s[i])
            } else if lo <= x[i] && x[i] < hi {
                0.0
            } else {
                1.0
            };
            pe.min(1.0)
        })
        .collect();
    let mut average: f64 = per_symbol.iter().zip(p).map(|(e, p)| e * p).sum();
    if average > 0.0 && average < SER_FLOOR {
        underflow = true;
        average = 0.0;
    }
    SerBreakdown {
        per_symbol,
        average,
        underflow,
    }
}

/// Composite Gauss-Legendre rule for `I(X;Y)`.
///
/// For each conditioning symbol the integral over `y = x_i + sigma_i z` is
/// split into panels of width `panel` on `|z| <= half_width`, with extra
/// breakpoints wherever two weighted likelihoods cross. The log-mixture has
/// its kinks exactly there, so each panel integrand is smooth.
#[derive(Debug, Clone)]
pub struct MiQuadrature {
    rule: GaussLegendre,
    half_width: f64,
    panel: f64,
}

impl MiQuadrature {
    pub fn new(order: usize) -> Self {
        Self {
            rule: GaussLegendre::new(order),
            half_width: 10.0,
            panel: 0.5,
        }
    }

    /// Shared rule with [`DEFAULT_MI_ORDER`] nodes per panel.
    pub fn shared() -> &'static Self {
        static RULE: OnceLock<MiQuadrature> = OnceLock::new();
        RULE.get_or_init(|| MiQuadrature::new(DEFAULT_MI_ORDER))
    }

    pub fn order(&self) -> usize {
        self.rule.order()
    }

    /// Mutual information in bits.
    pub fn mutual_information(&self, m: &ChannelModel) -> f64 {
        let (x, p, s) = (m.points(), m.probs(), m.cond_sigma());
        // Mixture components: symbols with a density (point masses are
        // perfectly identified and never overlap the continuous part).
        let comps: Vec<(f64, f64, f64)> = (0..x.len())
            .filter(|&k| p[k] > 0.0 && s[k] > 0.0)
            .map(|k| (x[k], s[k], p[k].ln()))
            .collect();
        let crossings = pairwise_crossings(&comps);

        let mut total = 0.0;
        for i in 0..x.len() {
            if p[i] <= 0.0 {
                continue;
            }
            if s[i] == 0.0 {
                total -= p[i] * p[i].ln();
                continue;
            }
            let (xi, si) = (x[i], s[i]);
            let mut breaks: Vec<f64> = Vec::with_capacity(64);
            let n_panels = (2.0 * self.half_width / self.panel).round() as usize;
            breaks.extend((0..=n_panels).map(|k| -self.half_width + k as f64 * self.panel));
            breaks.extend(
                crossings
                    .iter()
                    .map(|&r| (r - xi) / si)
                    .filter(|z| z.abs() < self.half_width),
            );
            breaks.sort_by(f64::total_cmp);
            breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

            let own = |y: f64| log_gauss_kernel(y, xi, si);
            let mut acc = 0.0;
            for w in breaks.windows(2) {
                acc += self.rule.integrate(w[0], w[1], |z| {
                    let y = xi + si * z;
                    let density = (-0.5 * z * z).exp() * FRAC_1_SQRT_2PI;
                    density * (own(y) - log_mixture(y, &comps))
                });
            }
            total += p[i] * acc;
        }
        (total / std::f64::consts::LN_2).max(0.0)
    }
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `ln sum_k exp(ln P_k + ln kernel_k(y))` with max-shift.
fn log_mixture(y: f64, comps: &[(f64, f64, f64)]) -> f64 {
    let score = |&(xk, sk, lp): &(f64, f64, f64)| lp + log_gauss_kernel(y, xk, sk);
    let max = comps.iter().map(score).fold(f64::NEG_INFINITY, f64::max);
    max + comps.iter().map(|c| (score(c) - max).exp()).sum::<f64>().ln()
}

/// Every real `y` where two weighted Gaussian components are equal.
fn pairwise_crossings(comps: &[(f64, f64, f64)]) -> Vec<f64> {
    let mut out = Vec::new();
    for (k, &(xk, sk, lk)) in comps.iter().enumerate() {
        for &(xl, sl, ll) in &comps[k + 1..] {
            // lk - ln sk - (y-xk)^2/(2 sk^2) = ll - ln sl - (y-xl)^2/(2 sl^2)
            let (vk, vl) = (sk * sk, sl * sl);
            let qa = 0.5 / vl - 0.5 / vk;
            let qb = xk / vk - xl / vl;
            let qc = 0.5 * xl * xl / vl - 0.5 * xk * xk / vk + (lk - sk.ln()) - (ll - sl.ln());
            if qa.abs() <= 1e-14 * (0.5 / vk) {
                if qb != 0.0 {
                    out.push(-qc / qb);
                }
                continue;
            }
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                out.push((-qb + sq) / (2.0 * qa));
                out.push((-qb - sq) / (2.0 * qa));
            }
        }
    }
    out.retain(|r| r.is_finite());
    out
}

/// `I(X;Y)` in bits with the default quadrature.
pub fn mutual_information(m: &ChannelModel) -> f64 {
    MiQuadrature::shared().mutual_information(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::Constellation;
    use crate::detection::{build_thresholds, ThresholdRule};
    use crate::link::LinkParams;
    use approx::assert_relative_eq;

    fn pam(m: usize) -> Constellation {
        Constellation::equally_spaced(m).unwrap()
    }

    #[test]
    fn binary_awgn_ser_is_q_of_one() {
        let m = ChannelModel::from_variances(pam(2), 1.0, 0.0, 1.0).unwrap();
        let t = ThresholdSet::new(vec![0.0], ThresholdRule::AwgnExact).unwrap();
        let ser = analytic_ser(&m, &t);
        assert_relative_eq!(ser.average, 0.158_655_253_931_457_05, max_relative = 1e-14);
        assert_eq!(ser.per_symbol[0], ser.per_symbol[1]);
        assert!(!ser.underflow);
    }

    #[test]
    fn noiseless_ser_is_zero() {
        let m = ChannelModel::from_variances(pam(6), 0.0, 0.0, 5.0).unwrap();
        for rule in ThresholdRule::ALL {
            let t = build_thresholds(&m, rule).unwrap();
            assert_eq!(analytic_ser(&m, &t).average, 0.0);
        }
    }

    #[test]
    fn average_is_weighted_sum() {
        let p = LinkParams::reference_for_order(4).unwrap();
        let c = pam(4).with_probs(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let m = ChannelModel::build(&p, &c, -4.0).unwrap();
        let t = build_thresholds(&m, ThresholdRule::OptimalExact).unwrap();
        let ser = analytic_ser(&m, &t);
        let manual: f64 = ser.per_symbol.iter().zip(c.probs()).map(|(e, p)| e * p).sum();
        assert!((ser.average - manual).abs() <= 1e-14);
        assert!(ser.per_symbol.iter().all(|&e| (0.0..=1.0).contains(&e)));
    }

    #[test]
    fn deep_tail_underflow_is_flagged() {
        let m = ChannelModel::from_variances(pam(2), 1e-6, 0.0, 1.0).unwrap();
        let t = ThresholdSet::new(vec![0.0], ThresholdRule::AwgnExact).unwrap();
        let ser = analytic_ser(&m, &t);
        assert_eq!(ser.average, 0.0);
        assert!(ser.underflow);
    }

    #[test]
    fn optimal_thresholds_minimize_ser() {
        let p = LinkParams::reference_for_order(6).unwrap();
        let c = pam(6).with_probs(vec![0.25, 0.2, 0.2, 0.15, 0.05, 0.15]).unwrap();
        let m = ChannelModel::build(&p, &c, 2.0).unwrap();
        let best = analytic_ser(&m, &build_thresholds(&m, ThresholdRule::OptimalExact).unwrap()).average;
        for rule in [
            ThresholdRule::UniformApprox,
            ThresholdRule::UniformExact,
            ThresholdRule::AwgnExact,
        ] {
            let t = build_thresholds(&m, rule).unwrap();
            assert!(best <= analytic_ser(&m, &t).average + 1e-12);
        }
        let opt = build_thresholds(&m, ThresholdRule::OptimalExact).unwrap();
        for k in 0..5 {
            for delta in [-1e-3, 1e-3] {
                let mut r = opt.thresholds().to_vec();
                r[k] += delta;
                let t = ThresholdSet::new(r, ThresholdRule::OptimalExact).unwrap();
                assert!(best <= analytic_ser(&m, &t).average + 1e-12);
            }
        }
    }

    #[test]
    fn mi_limits() {
        let c = pam(4).with_probs(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let quiet = ChannelModel::from_variances(c.clone(), 1e-10, 0.0, 3.0).unwrap();
        assert!((mutual_information(&quiet) - c.entropy()).abs() < 1e-6);
        let silent = ChannelModel::from_variances(c.clone(), 0.0, 0.0, 3.0).unwrap();
        assert!((mutual_information(&silent) - c.entropy()).abs() < 1e-12);
        let loud = ChannelModel::from_variances(c.clone(), 1e6 * 36.0, 0.0, 3.0).unwrap();
        assert!(mutual_information(&loud) < 1e-3);
    }

    #[test]
    fn mi_binary_awgn_reference() {
        // Uniform binary input, unit-SNR AWGN. Reference from brute-force
        // trapezoidal integration of the same integral on a 1e-4 grid.
        let m = ChannelModel::from_variances(pam(2), 1.0, 0.0, 1.0).unwrap();
        let mi = mutual_information(&m);
        let h = 1e-4;
        let mut brute = 0.0;
        let pdf = |y: f64, mu: f64| (-(y - mu) * (y - mu) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut y = -12.0;
        while y <= 12.0 {
            let (a, b) = (pdf(y, -1.0), pdf(y, 1.0));
            let mix = 0.5 * (a + b);
            if a > 0.0 {
                brute += 0.5 * a * (a / mix).log2() * h;
            }
            if b > 0.0 {
                brute += 0.5 * b * (b / mix).log2() * h;
            }
            y += h;
        }
        assert!((mi - brute).abs() < 1e-8, "{mi} vs {brute}");
    }

    #[test]
    fn mi_quadrature_converges_on_reference_links() {
        let fine = MiQuadrature::new(2 * DEFAULT_MI_ORDER);
        for order in [4, 6, 8] {
            let p = LinkParams::reference_for_order(order).unwrap();
            for oma in [-2.0, 0.0, 4.0, 8.0, 14.0] {
                let m = ChannelModel::build(&p, &pam(order), oma).unwrap();
                let a = mutual_information(&m);
                let b = fine.mutual_information(&m);
                assert!((a - b).abs() < 1e-9, "PAM-{order} {oma} dBm: {a} vs {b}");
                assert!(a >= 0.0 && a <= m.constellation().entropy());
            }
        }
    }

    #[test]
    fn mi_non_increasing_under_noise_scaling() {
        let p = LinkParams::reference_for_order(8).unwrap();
        let c = pam(8)
            .with_probs(vec![0.05, 0.1, 0.15, 0.2, 0.2, 0.15, 0.1, 0.05])
            .unwrap();
        let base = ChannelModel::build(&p, &c, 0.0).unwrap();
        let mut prev = f64::INFINITY;
        for lambda in [1.0, 2.0, 4.0, 8.0] {
            let mi = mutual_information(&base.scale_noise(lambda).unwrap());
            assert!(mi <= prev + 1e-12);
            prev = mi;
        }
    }

    #[test]
    fn zero_probability_symbols_are_ignored() {
        let c = Constellation::new(vec![-3.0, -1.0, 1.0, 3.0], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let reduced = Constellation::uniform(vec![-3.0, 3.0]).unwrap();
        let a = ChannelModel::from_variances(c, 4.0, 0.0, 3.0).unwrap();
        let b = ChannelModel::from_variances(reduced, 4.0, 0.0, 3.0).unwrap();
        assert!((mutual_information(&a) - mutual_information(&b)).abs() < 1e-12);
    }
}
