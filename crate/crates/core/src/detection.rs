//! Decision thresholds and symbol detection for the signal-dependent
//! Gaussian channel.
//!
//! Four threshold rules are available for each adjacent pair `(i, j = i+1)`:
//!
//! | rule            | uses priors | uses `sigma_i != sigma_j` |
//! |-----------------|-------------|---------------------------|
//! | `OptimalExact`  | yes         | yes                       |
//! | `UniformExact`  | no          | yes                       |
//! | `UniformApprox` | no          | yes (first order)         |
//! | `AwgnExact`     | yes         | no (`sigma^2 = sigma_ele^2`) |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PairError, ThresholdError};
use crate::link::ChannelModel;
use crate::special::log_gauss_kernel;

/// Relative gap `|sigma_j^2 - sigma_i^2| < EPS_VAR * sigma_j^2` below which
/// the equal-variance closed form is used.
pub const EPS_VAR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdRule {
    #[serde(rename = "optimal")]
    OptimalExact,
    UniformExact,
    #[serde(rename = "approx")]
    UniformApprox,
    #[serde(rename = "awgn")]
    AwgnExact,
}

impl ThresholdRule {
    pub const ALL: [ThresholdRule; 4] = [
        ThresholdRule::OptimalExact,
        ThresholdRule::UniformExact,
        ThresholdRule::UniformApprox,
        ThresholdRule::AwgnExact,
    ];

    /// Short name used in configs, flags and CSV headers.
    pub fn name(self) -> &'static str {
        match self {
            ThresholdRule::OptimalExact => "optimal",
            ThresholdRule::UniformExact => "uniform-exact",
            ThresholdRule::UniformApprox => "approx",
            ThresholdRule::AwgnExact => "awgn",
        }
    }
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ThresholdRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ThresholdRule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown threshold rule `{s}` (expected optimal, uniform-exact, approx or awgn)"))
    }
}

/// Strictly increasing decision thresholds `r_0 < ... < r_{M-2}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSet {
    thresholds: Vec<f64>,
    rule: ThresholdRule,
}

impl ThresholdSet {
    pub fn new(thresholds: Vec<f64>, rule: ThresholdRule) -> Result<Self, ThresholdError> {
        if let Some(index) = thresholds.iter().position(|r| !r.is_finite()) {
            return Err(ThresholdError::NonMonotone { index });
        }
        if let Some(w) = thresholds.windows(2).position(|w| w[1] <= w[0]) {
            return Err(ThresholdError::NonMonotone { index: w + 1 });
        }
        Ok(Self { thresholds, rule })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn rule(&self) -> ThresholdRule {
        self.rule
    }

    /// Decision region `[lo, hi)` of symbol `i`.
    pub fn region(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 {
            f64::NEG_INFINITY
        } else {
            self.thresholds[i - 1]
        };
        let hi = self.thresholds.get(i).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }
}

/// MAP threshold between adjacent symbols with unequal noise variances.
///
/// This is the larger root of
/// `a r^2 + 2 b r + c - d = 0` with `a = sigma_j^2 - sigma_i^2`,
/// `b = sigma_i^2 x_j - sigma_j^2 x_i`, `c = sigma_j^2 x_i^2 - sigma_i^2 x_j^2`
/// and `d = 2 sigma_i^2 sigma_j^2 ln((p_i / p_j)(sigma_j / sigma_i))`,
/// i.e. the point right of which symbol `j` wins. The root is evaluated in
/// whichever of the two algebraically equal forms avoids cancellation.
pub fn optimal_threshold(x_i: f64, x_j: f64, sigma_i: f64, sigma_j: f64, p_i: f64, p_j: f64) -> Result<f64, PairError> {
    if p_i <= 0.0 || p_j <= 0.0 {
        return Err(PairError::ZeroProbability);
    }
    let (vi, vj) = (sigma_i * sigma_i, sigma_j * sigma_j);
    let a = vj - vi;
    if a.abs() < EPS_VAR * vj.max(vi) || vi == 0.0 || vj == 0.0 {
        return Err(PairError::EqualVariances);
    }
    let log_term = ((p_i / p_j) * (sigma_j / sigma_i)).ln();
    let gap = x_j - x_i;
    // b^2 - a (c - d) = sigma_i^2 sigma_j^2 [(x_j - x_i)^2 + 2 a log_term]
    let discriminant = gap * gap + 2.0 * a * log_term;
    if discriminant < 0.0 {
        return Err(PairError::NegativeDiscriminant { discriminant });
    }
    let sqrt_disc = sigma_i * sigma_j * discriminant.sqrt();
    let b = vi * x_j - vj * x_i;
    let r = if b <= 0.0 {
        (-b + sqrt_disc) / a
    } else {
        let c = vj * x_i * x_i - vi * x_j * x_j;
        let d = 2.0 * vi * vj * log_term;
        -(c - d) / (b + sqrt_disc)
    };
    Ok(r)
}

/// Exact MAP threshold for equally likely neighbours.
pub fn uniform_exact_threshold(x_i: f64, x_j: f64, sigma_i: f64, sigma_j: f64) -> Result<f64, PairError> {
    optimal_threshold(x_i, x_j, sigma_i, sigma_j, 0.5, 0.5)
}

/// First-order approximation `(x_i sigma_j + x_j sigma_i) / (sigma_i + sigma_j)`.
pub fn approx_threshold(x_i: f64, x_j: f64, sigma_i: f64, sigma_j: f64) -> f64 {
    let s = sigma_i + sigma_j;
    if s == 0.0 {
        return 0.5 * (x_i + x_j);
    }
    (x_i * sigma_j + x_j * sigma_i) / s
}

/// MAP threshold for a common noise variance `sigma2`.
pub fn awgn_threshold(x_i: f64, x_j: f64, sigma2: f64, p_i: f64, p_j: f64) -> Result<f64, PairError> {
    if p_i <= 0.0 || p_j <= 0.0 {
        return Err(PairError::ZeroProbability);
    }
    Ok(sigma2 / (x_j - x_i) * (p_i / p_j).ln() + 0.5 * (x_i + x_j))
}

/// Threshold between symbols `i` and `i + 1` under `rule`.
pub fn pair_threshold(m: &ChannelModel, rule: ThresholdRule, i: usize) -> Result<f64, PairError> {
    let x = m.points();
    let p = m.probs();
    let s = m.cond_sigma();
    let j = i + 1;
    match rule {
        ThresholdRule::OptimalExact => match optimal_threshold(x[i], x[j], s[i], s[j], p[i], p[j]) {
            Err(PairError::EqualVariances) => awgn_threshold(x[i], x[j], s[i] * s[i], p[i], p[j]),
            other => other,
        },
        ThresholdRule::UniformExact => match uniform_exact_threshold(x[i], x[j], s[i], s[j]) {
            Err(PairError::EqualVariances) => Ok(0.5 * (x[i] + x[j])),
            other => other,
        },
        ThresholdRule::UniformApprox => Ok(approx_threshold(x[i], x[j], s[i], s[j])),
        ThresholdRule::AwgnExact => awgn_threshold(x[i], x[j], m.sigma_ele2(), p[i], p[j]),
    }
}

/// Per-pair thresholds without the monotonicity check; useful for reporting
/// every failing pair instead of only the first.
pub fn pair_thresholds(m: &ChannelModel, rule: ThresholdRule) -> Vec<Result<f64, PairError>> {
    (0..m.len() - 1).map(|i| pair_threshold(m, rule, i)).collect()
}

/// Thresholds for every adjacent pair, checked for strict monotonicity.
pub fn build_thresholds(m: &ChannelModel, rule: ThresholdRule) -> Result<ThresholdSet, ThresholdError> {
    let thresholds = (0..m.len() - 1)
        .map(|i| pair_threshold(m, rule, i).map_err(|kind| ThresholdError::Pair { pair: i, kind }))
        .collect::<Result<Vec<_>, _>>()?;
    ThresholdSet::new(thresholds, rule)
}

/// Relative mismatch `|P_i p(r|x_i) - P_j p(r|x_j)| / max(.)` at threshold
/// `r` between symbols `i` and `i + 1`.
pub fn map_equality_residual(m: &ChannelModel, i: usize, r: f64) -> f64 {
    let (x, p, s) = (m.points(), m.probs(), m.cond_sigma());
    let li = p[i].ln() + log_gauss_kernel(r, x[i], s[i]);
    let lj = p[i + 1].ln() + log_gauss_kernel(r, x[i + 1], s[i + 1]);
    if !(li.is_finite() && lj.is_finite()) {
        return if li == lj { 0.0 } else { 1.0 };
    }
    -(-(li - lj).abs()).exp_m1()
}

/// Index `i` with `y` in `[r_{i-1}, r_i)`; a sample exactly on a threshold
/// goes to the higher symbol.
#[inline]
pub fn detect_threshold(y: f64, t: &ThresholdSet) -> usize {
    t.thresholds.partition_point(|&r| r <= y)
}

/// Full MAP decision `argmax_i P(x_i) p(y | x_i)`, evaluated in the log
/// domain. Ties go to the lower index and zero-probability symbols never win.
pub fn detect_map(y: f64, m: &ChannelModel) -> usize {
    let (x, p, s) = (m.points(), m.probs(), m.cond_sigma());
    let mut best = usize::MAX;
    let mut best_score = f64::NEG_INFINITY;
    for i in 0..x.len() {
        if p[i] <= 0.0 {
            continue;
        }
        let score = if s[i] > 0.0 {
            p[i].ln() + log_gauss_kernel(y, x[i], s[i])
        } else if y == x[i] {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        if best == usize::MAX || score > best_score {
            best = i;
            best_score = score;
        }
    }
    if best_score == f64::NEG_INFINITY {
        // every likelihood vanished (noiseless symbols only): nearest point
        return nearest_point(y, x, p);
    }
    best
}

fn nearest_point(y: f64, x: &[f64], p: &[f64]) -> usize {
    (0..x.len())
        .filter(|&i| p[i] > 0.0)
        .min_by(|&a, &b| (y - x[a]).abs().total_cmp(&(y - x[b]).abs()))
        .unwrap_or(0)
}
