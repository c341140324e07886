//! Shaped PAM constellations and the optical-power parameter mapping.
//!
//! Points are stored pre-bias (bipolar, e.g. `-3, -1, 1, 3`). The IM bias
//! `beta` and the electro-optical factor `eta` only enter through the noise
//! variances and optical power levels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest deviation of `sum(probs)` from one that is silently normalized.
pub const NORMALIZE_TOLERANCE: f64 = 1e-9;

/// Ordered PAM points with a probability mass function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConstellation")]
pub struct Constellation {
    points: Vec<f64>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstellation {
    points: Vec<f64>,
    #[serde(default)]
    probs: Option<Vec<f64>>,
}

impl TryFrom<RawConstellation> for Constellation {
    type Error = Error;

    fn try_from(raw: RawConstellation) -> Result<Self> {
        match raw.probs {
            Some(p) => Constellation::new(raw.points, p),
            None => Constellation::uniform(raw.points),
        }
    }
}

impl Constellation {
    /// Builds a constellation, normalizing `probs` when their sum is within
    /// [`NORMALIZE_TOLERANCE`] of one.
    pub fn new(points: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let m = points.len();
        if m < 2 {
            return Err(Error::InvalidConstellation(format!("need at least 2 points, got {m}")));
        }
        if probs.len() != m {
            return Err(Error::InvalidConstellation(format!(
                "{} probabilities for {m} points",
                probs.len()
            )));
        }
        if let Some(x) = points.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidConstellation(format!("non-finite point {x}")));
        }
        if let Some(w) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConstellation(format!(
                "points not strictly increasing at index {}",
                w + 1
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidConstellation(format!("invalid probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZE_TOLERANCE {
            return Err(Error::InvalidConstellation(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let probs = if (total - 1.0).abs() > 1e-14 {
            probs.into_iter().map(|p| p / total).collect()
        } else {
            probs
        };
        Ok(Self { points, probs })
    }

    pub fn uniform(points: Vec<f64>) -> Result<Self> {
        let m = points.len();
        Self::new(points, vec![1.0 / m as f64; m])
    }

    /// Uniform PAM-M on the odd integers `-(M-1), ..., -1, 1, ..., M-1`.
    pub fn equally_spaced(m: usize) -> Result<Self> {
        let points = (0..m).map(|i| 2.0 * i as f64 - (m as f64 - 1.0)).collect();
        Self::uniform(points)
    }

    /// Same points, new distribution.
    pub fn with_probs(&self, probs: Vec<f64>) -> Result<Self> {
        Self::new(self.points.clone(), probs)
    }

    /// Same distribution, new points.
    pub fn with_points(&self, points: Vec<f64>) -> Result<Self> {
        Self::new(points, self.probs.clone())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of symbols M.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// `max - min`, the peak-to-peak amplitude.
    pub fn span(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.len() as f64;
        self.probs.iter().all(|p| (p - u).abs() <= 1e-15)
    }

    /// Source entropy in bits.
    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }
}

/// Entropy in bits of a probability vector, with `0 log 0 = 0`.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.log2()).sum::<f64>()
}

/// Intensity-modulation bias and electro-optical conversion factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImBias {
    /// Bias in symbol units, `beta >= |min(points)|`.
    pub beta: f64,
    /// Electro-optical conversion factor in W per symbol unit.
    pub eta: f64,
}

impl ImBias {
    pub fn new(beta: f64, eta: f64, c: &Constellation) -> Result<Self> {
        // The nonnegativity bound is `beta >= -min`; for constellations with a
        // positive minimum this is weaker than `beta >= |min|`, which is what
        // we enforce.
        if beta.is_nan() || beta < c.min().abs() {
            return Err(Error::InvalidChannel(format!(
                "bias {beta} below |min point| = {}",
                c.min().abs()
            )));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidChannel(format!("eta must be positive, got {eta}")));
        }
        Ok(Self { beta, eta })
    }

    /// Resolves both parameters from an extinction ratio and an OMA.
    pub fn from_link(er_db: f64, oma_w: f64, c: &Constellation) -> Result<Self> {
        let beta = solve_bias(er_db, c)?;
        Self::new(beta, solve_eta(oma_w, c), c)
    }
}

/// Bias that yields extinction ratio `10^(er_db/10) = (max + beta) / (min + beta)`.
pub fn solve_bias(er_db: f64, c: &Constellation) -> Result<f64> {
    if er_db.is_nan() || er_db <= 0.0 {
        return Err(Error::NonPositiveEr(er_db));
    }
    let er = 10f64.powf(er_db / 10.0);
    // er * (min + beta) = max + beta
    Ok((c.max() - er * c.min()) / (er - 1.0))
}

/// Electro-optical factor from the optical modulation amplitude in watts.
pub fn solve_eta(oma_w: f64, c: &Constellation) -> f64 {
    oma_w / c.span()
}

pub fn oma_dbm_to_watts(oma_dbm: f64) -> f64 {
    1e-3 * 10f64.powf(oma_dbm / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pam(m: usize) -> Constellation {
        Constellation::equally_spaced(m).unwrap()
    }

    #[test]
    fn equally_spaced_points() {
        assert_eq!(pam(4).points(), &[-3.0, -1.0, 1.0, 3.0]);
        assert_eq!(pam(6).points(), &[-5.0, -3.0, -1.0, 1.0, 3.0, 5.0]);
        assert_eq!(pam(8).min(), -7.0);
        assert_eq!(pam(2).points(), &[-1.0, 1.0]);
    }

    #[test]
    fn entropy_examples() {
        assert_relative_eq!(pam(8).entropy(), 3.0, epsilon = 1e-15);
        assert_eq!(entropy(&[1.0, 0.0, 0.0, 0.0]), 0.0);
        // -sum p log2 p for (0.4, 0.3, 0.2, 0.1), evaluated by hand
        assert_relative_eq!(entropy(&[0.4, 0.3, 0.2, 0.1]), 1.846_439_344_671_015, epsilon = 1e-12);
    }

    #[test]
    fn bias_table_values() {
        assert_relative_eq!(solve_bias(5.0, &pam(4)).unwrap(), 5.775, epsilon = 1e-3);
        assert_relative_eq!(solve_bias(5.0, &pam(6)).unwrap(), 9.625, epsilon = 1e-3);
        assert_relative_eq!(solve_bias(5.0, &pam(8)).unwrap(), 13.475, epsilon = 1e-3);
    }

    #[test]
    fn bias_rejects_non_positive_er() {
        assert_eq!(solve_bias(0.0, &pam(4)), Err(Error::NonPositiveEr(0.0)));
        assert!(matches!(solve_bias(-1.0, &pam(4)), Err(Error::NonPositiveEr(_))));
    }

    #[test]
    fn bias_approaches_min_for_ideal_modulator() {
        let c = pam(6);
        let beta = solve_bias(100.0, &c).unwrap();
        assert!(beta > 5.0);
        assert!(beta - 5.0 < 1e-8);
    }

    #[test]
    fn eta_and_dbm() {
        assert_relative_eq!(solve_eta(1e-3, &pam(4)), 1e-3 / 6.0);
        assert_relative_eq!(solve_eta(2e-3, &pam(8)), 1.428_571_428_571_428_6e-4);
        assert_relative_eq!(solve_eta(oma_dbm_to_watts(0.0), &pam(6)), 1e-4);
        assert_relative_eq!(oma_dbm_to_watts(0.0), 1e-3);
        assert_relative_eq!(oma_dbm_to_watts(10.0), 1e-2);
        assert_relative_eq!(oma_dbm_to_watts(-3.0), 5.011_872_336_272_722e-4, epsilon = 1e-18);
    }

    #[test]
    fn constructor_validation() {
        assert!(Constellation::new(vec![1.0], vec![1.0]).is_err());
        assert!(Constellation::new(vec![1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(Constellation::new(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(Constellation::new(vec![0.0, 1.0], vec![0.5, 0.4]).is_err());
        assert!(Constellation::new(vec![0.0, 1.0], vec![1.5, -0.5]).is_err());
        assert!(Constellation::new(vec![0.0, 1.0], vec![0.5]).is_err());
        // round-off inside the tolerance is normalized away
        let c = Constellation::new(vec![0.0, 1.0], vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((c.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // zero probabilities are representable
        assert!(Constellation::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.0, 0.5]).is_ok());
    }

    #[test]
    fn document_roundtrip() {
        let c = Constellation::new(vec![-3.0, -1.0, 1.0, 3.0], vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"points":[-3.0,-1.0,1.0,3.0],"probs":[0.4,0.3,0.2,0.1]}"#);
        let back: Constellation = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        let uni: Constellation = serde_json::from_str(r#"{"points":[-1,1]}"#).unwrap();
        assert_eq!(uni.probs(), &[0.5, 0.5]);
        assert!(serde_json::from_str::<Constellation>(r#"{"points":[1,-1]}"#).is_err());
    }

    fn arb_probs(m: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, m).prop_filter_map("all zero", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn entropy_range(p in (2usize..10).prop_flat_map(arb_probs)) {
            let h = entropy(&p);
            let log_m = (p.len() as f64).log2();
            prop_assert!(h >= 0.0 && h <= log_m + 1e-12);
            let u = 1.0 / p.len() as f64;
            if p.iter().any(|x| (x - u).abs() > 1e-6) {
                prop_assert!(h < log_m);
            }
        }

        #[test]
        fn bias_recovers_extinction_ratio(er_db in 0.1f64..30.0, m in 2usize..9) {
            let c = pam(m);
            let beta = solve_bias(er_db, &c).unwrap();
            prop_assert!(beta > c.min().abs());
            let er = (c.max() + beta) / (c.min() + beta);
            prop_assert!((er / 10f64.powf(er_db / 10.0) - 1.0).abs() < 1e-10);
        }

        #[test]
        fn eta_recovers_oma(oma_dbm in -20.0f64..20.0, m in 2usize..9) {
            let c = pam(m);
            let oma = oma_dbm_to_watts(oma_dbm);
            let eta = solve_eta(oma, &c);
            prop_assert!((eta * c.span() - oma).abs() <= f64::EPSILON * oma);
        }
    }
}
