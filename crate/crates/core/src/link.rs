//! Physical link parameters and the equivalent signal-dependent Gaussian
//! channel `Y = X + Z * sqrt(sigma_ele^2 + (X + beta)^2 * sigma_rin^2)`.
//!
//! All channel quantities are in normalized symbol units: the TIA gain is
//! chosen so that a symbol `x` arrives as `x` after AC coupling.

use serde::{Deserialize, Serialize};

use crate::constellation::{oma_dbm_to_watts, Constellation, ImBias};
use crate::error::{Error, Result};

/// Laser, fiber and receiver parameters.
///
/// `rin_db_hz = -inf` disables RIN. In serialized form that value is written
/// as `null`, and a missing field means the same thing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    #[serde(with = "rin_serde", default = "rin_off")]
    pub rin_db_hz: f64,
    pub er_db: f64,
    pub length_km: f64,
    pub alpha_db_km: f64,
    pub responsivity_a_w: f64,
    /// Thermal noise amplitude spectral density `sqrt(N0/2)` in A/sqrt(Hz).
    pub thermal_asd: f64,
    pub bandwidth_hz: f64,
}

fn rin_off() -> f64 {
    f64::NEG_INFINITY
}

mod rin_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

impl LinkParams {
    /// Reference short-reach link: -140 dB/Hz RIN, 5 dB extinction ratio,
    /// 2 km at 0.35 dB/km, 0.5 A/W photodiode, 18 pA/sqrt(Hz) thermal noise.
    pub fn reference(bandwidth_hz: f64) -> Self {
        Self {
            rin_db_hz: -140.0,
            er_db: 5.0,
            length_km: 2.0,
            alpha_db_km: 0.35,
            responsivity_a_w: 0.5,
            thermal_asd: 18e-12,
            bandwidth_hz,
        }
    }

    /// Reference link with the electrical bandwidth used for PAM-`m`
    /// (68, 52 and 45 GHz for PAM-4, -6 and -8).
    pub fn reference_for_order(m: usize) -> Option<Self> {
        let b = match m {
            4 => 68e9,
            6 => 52e9,
            8 => 45e9,
            _ => return None,
        };
        Some(Self::reference(b))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("er_db", self.er_db),
            ("responsivity_a_w", self.responsivity_a_w),
            ("bandwidth_hz", self.bandwidth_hz),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidLink {
                    field,
                    reason: format!("must be > 0, got {v}"),
                });
            }
        }
        let non_negative = [
            ("length_km", self.length_km),
            ("alpha_db_km", self.alpha_db_km),
            ("thermal_asd", self.thermal_asd),
        ];
        for (field, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidLink {
                    field,
                    reason: format!("must be >= 0, got {v}"),
                });
            }
        }
        if self.rin_db_hz.is_nan() || self.rin_db_hz == f64::INFINITY {
            return Err(Error::InvalidLink {
                field: "rin_db_hz",
                reason: format!("must be finite or off, got {}", self.rin_db_hz),
            });
        }
        Ok(())
    }

    /// Copy with RIN switched off.
    pub fn without_rin(mut self) -> Self {
        self.rin_db_hz = f64::NEG_INFINITY;
        self
    }
}

/// Linear fiber power transmission `10^(-alpha L / 10)`.
pub fn fiber_loss(params: &LinkParams) -> f64 {
    10f64.powf(-params.alpha_db_km * params.length_km / 10.0)
}

/// TIA gain in ohms that maps received photocurrent back to symbol units.
pub fn tia_gain(params: &LinkParams, eta: f64) -> f64 {
    1.0 / (params.responsivity_a_w * fiber_loss(params) * eta)
}

/// Equivalent channel for one constellation at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelModel {
    sigma_ele2: f64,
    sigma_rin2: f64,
    beta: f64,
    constellation: Constellation,
    cond_sigma: Vec<f64>,
}

impl ChannelModel {
    /// Builds the channel for a link operated at `oma_dbm`.
    pub fn build(params: &LinkParams, c: &Constellation, oma_dbm: f64) -> Result<Self> {
        params.validate()?;
        let bias = ImBias::from_link(params.er_db, oma_dbm_to_watts(oma_dbm), c)?;
        let gain = tia_gain(params, bias.eta);
        let sigma_ele2 = gain * gain * params.thermal_asd * params.thermal_asd * params.bandwidth_hz;
        let sigma_rin2 = 10f64.powf(params.rin_db_hz / 10.0) * params.bandwidth_hz;
        Self::from_variances(c.clone(), sigma_ele2, sigma_rin2, bias.beta)
    }

    /// Builds a channel directly from its noise variances.
    pub fn from_variances(constellation: Constellation, sigma_ele2: f64, sigma_rin2: f64, beta: f64) -> Result<Self> {
        if !(sigma_ele2 >= 0.0 && sigma_ele2.is_finite()) {
            return Err(Error::InvalidChannel(format!("sigma_ele^2 = {sigma_ele2}")));
        }
        if !(sigma_rin2 >= 0.0 && sigma_rin2.is_finite()) {
            return Err(Error::InvalidChannel(format!("sigma_rin^2 = {sigma_rin2}")));
        }
        if !(beta >= constellation.min().abs() && beta.is_finite()) {
            return Err(Error::InvalidChannel(format!(
                "bias {beta} below |min point| = {}",
                constellation.min().abs()
            )));
        }
        let cond_sigma = constellation
            .points()
            .iter()
            .map(|&x| (sigma_ele2 + (x + beta) * (x + beta) * sigma_rin2).sqrt())
            .collect();
        Ok(Self {
            sigma_ele2,
            sigma_rin2,
            beta,
            constellation,
            cond_sigma,
        })
    }

    /// Same noise parameters, different constellation.
    pub fn with_constellation(&self, c: Constellation) -> Result<Self> {
        Self::from_variances(c, self.sigma_ele2, self.sigma_rin2, self.beta)
    }

    /// Both noise variances multiplied by `factor`.
    pub fn scale_noise(&self, factor: f64) -> Result<Self> {
        Self::from_variances(
            self.constellation.clone(),
            self.sigma_ele2 * factor,
            self.sigma_rin2 * factor,
            self.beta,
        )
    }

    pub fn sigma_ele2(&self) -> f64 {
        self.sigma_ele2
    }

    pub fn sigma_rin2(&self) -> f64 {
        self.sigma_rin2
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn points(&self) -> &[f64] {
        self.constellation.points()
    }

    pub fn probs(&self) -> &[f64] {
        self.constellation.probs()
    }

    pub fn len(&self) -> usize {
        self.constellation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constellation.is_empty()
    }

    /// Per-symbol conditional noise standard deviations.
    pub fn cond_sigma(&self) -> &[f64] {
        &self.cond_sigma
    }

    /// Noise variance conditioned on symbol `i`.
    pub fn cond_variance(&self, i: usize) -> Result<f64> {
        let x = *self.points().get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.len(),
        })?;
        let level = x + self.beta;
        Ok(self.sigma_ele2 + level * level * self.sigma_rin2)
    }

    /// Noise standard deviation for an arbitrary amplitude `x`.
    pub fn sigma_at(&self, x: f64) -> f64 {
        let level = x + self.beta;
        (self.sigma_ele2 + level * level * self.sigma_rin2).sqrt()
    }
}
