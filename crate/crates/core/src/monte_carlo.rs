//! Seeded Monte Carlo simulation of the equivalent channel.
//!
//! Symbols are generated in fixed-size batches. Batch `b` draws from its own
//! ChaCha8 stream `(seed, b)`, so the sample sequence depends only on the seed
//! and batch size, never on how many threads run. Batches are evaluated in
//! parallel rounds and reduced in index order; the run ends at the first
//! batch where the running error count reaches `min_errors`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::detection::{build_thresholds, detect_map, detect_threshold, ThresholdRule, ThresholdSet};
use crate::error::{Error, Result};
use crate::link::{ChannelModel, LinkParams};
use crate::metrics::{analytic_ser, mutual_information};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub seed: u64,
    /// Stop once this many symbol errors have accumulated.
    pub min_errors: u64,
    pub max_symbols: u64,
    /// Symbols per batch (one RNG stream each).
    pub batch: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            min_errors: 100,
            max_symbols: 1_000_000_000,
            batch: 65_536,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_errors < 1 {
            return Err(Error::InvalidMcConfig {
                field: "min_errors",
                reason: "must be >= 1".into(),
            });
        }
        if self.batch < 1 {
            return Err(Error::InvalidMcConfig {
                field: "batch",
                reason: "must be >= 1".into(),
            });
        }
        if self.max_symbols < self.batch {
            return Err(Error::InvalidMcConfig {
                field: "max_symbols",
                reason: format!("must be >= batch ({}), got {}", self.batch, self.max_symbols),
            });
        }
        Ok(())
    }
}

/// How received samples are mapped back to symbols.
#[derive(Debug, Clone, Copy)]
pub enum Detector<'a> {
    Thresholds(&'a ThresholdSet),
    /// Direct maximization of `P_i f(y | x_i)`.
    ArgmaxMap,
}

impl Detector<'_> {
    pub fn label(&self) -> String {
        match self {
            Detector::Thresholds(t) => t.rule().name().to_string(),
            Detector::ArgmaxMap => "map".to_string(),
        }
    }

    fn detect(&self, y: f64, m: &ChannelModel) -> usize {
        match self {
            Detector::Thresholds(t) => detect_threshold(y, t),
            Detector::ArgmaxMap => detect_map(y, m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McResult {
    pub symbols: u64,
    pub errors: u64,
    pub ser: f64,
    /// Normal-approximation 95% half-width, `1.96 sqrt(ser (1 - ser) / symbols)`.
    pub ci95_half_width: f64,
    pub detector: String,
    pub per_symbol_sent: Vec<u64>,
    pub per_symbol_errors: Vec<u64>,
}

impl McResult {
    /// Empirical error rate conditioned on symbol `i` being sent.
    pub fn conditional_ser(&self, i: usize) -> f64 {
        self.per_symbol_errors[i] as f64 / self.per_symbol_sent[i] as f64
    }
}

#[derive(Debug, Clone)]
struct Tally {
    symbols: u64,
    sent: Vec<u64>,
    errors: Vec<u64>,
}

impl Tally {
    fn new(m: usize) -> Self {
        Self {
            symbols: 0,
            sent: vec![0; m],
            errors: vec![0; m],
        }
    }

    fn total_errors(&self) -> u64 {
        self.errors.iter().sum()
    }

    fn absorb(&mut self, other: &Tally) {
        self.symbols += other.symbols;
        for (a, b) in self.sent.iter_mut().zip(&other.sent) {
            *a += b;
        }
        for (a, b) in self.errors.iter_mut().zip(&other.errors) {
            *a += b;
        }
    }

    fn into_result(self, label: String) -> McResult {
        let errors = self.total_errors();
        let ser = if self.symbols == 0 {
            0.0
        } else {
            errors as f64 / self.symbols as f64
        };
        let ci95_half_width = if self.symbols == 0 {
            0.0
        } else {
            1.96 * (ser * (1.0 - ser) / self.symbols as f64).sqrt()
        };
        McResult {
            symbols: self.symbols,
            errors,
            ser,
            ci95_half_width,
            detector: label,
            per_symbol_sent: self.sent,
            per_symbol_errors: self.errors,
        }
    }
}

/// Runs one detector. Same as [`simulate_many`] with a single entry.
pub fn simulate(m: &ChannelModel, detector: Detector<'_>, cfg: &McConfig) -> Result<McResult> {
    Ok(simulate_many(m, &[detector], cfg)?
        .pop()
        .expect("one detector in, one result out"))
}

/// Runs several detectors over one shared sample stream.
///
/// Each detector keeps its own stopping point, so every result is
/// bit-identical to what [`simulate`] would return for that detector alone.
pub fn simulate_many(m: &ChannelModel, detectors: &[Detector<'_>], cfg: &McConfig) -> Result<Vec<McResult>> {
    cfg.validate()?;
    let k = m.len();
    let sampler = WeightedIndex::new(m.probs())
        .map_err(|e| Error::InvalidConstellation(format!("cannot sample probabilities: {e}")))?;
    let (x, s) = (m.points(), m.cond_sigma());

    let n_batches = cfg.max_symbols.div_ceil(cfg.batch);
    let round = rayon::current_num_threads().max(1) as u64;
    let mut totals: Vec<Tally> = vec![Tally::new(k); detectors.len()];
    let mut done = vec![false; detectors.len()];

    let run_batch = |b: u64| -> Vec<Tally> {
        let len = cfg.batch.min(cfg.max_symbols - b * cfg.batch);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(b);
        let mut tallies = vec![Tally::new(k); detectors.len()];
        for _ in 0..len {
            let i = sampler.sample(&mut rng);
            let z: f64 = StandardNormal.sample(&mut rng);
            let y = x[i] + z * s[i];
            for (d, t) in detectors.iter().zip(tallies.iter_mut()) {
                t.sent[i] += 1;
                if d.detect(y, m) != i {
                    t.errors[i] += 1;
                }
            }
        }
        for t in &mut tallies {
            t.symbols = len;
        }
        tallies
    };

    let mut next = 0u64;
    while next < n_batches && done.iter().any(|d| !d) {
        let end = (next + round).min(n_batches);
        let results: Vec<Vec<Tally>> = (next..end).into_par_iter().map(run_batch).collect();
        for batch in results {
            for (j, t) in batch.iter().enumerate() {
                if done[j] {
                    continue;
                }
                totals[j].absorb(t);
                if totals[j].total_errors() >= cfg.min_errors {
                    done[j] = true;
                }
            }
        }
        next = end;
    }

    Ok(totals
        .into_iter()
        .zip(detectors)
        .map(|(t, d)| t.into_result(d.label()))
        .collect())
}

/// Per-rule outcome at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleOutcome {
    pub rule: ThresholdRule,
    pub thresholds: Option<Vec<f64>>,
    pub analytic_ser: Option<f64>,
    pub mc: Option<McResult>,
    /// Set when the thresholds could not be built.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    ThresholdError,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::ThresholdError => "threshold_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub oma_dbm: f64,
    pub entropy_bits: f64,
    pub mi_bits: f64,
    pub rules: Vec<RuleOutcome>,
    pub status: PointStatus,
}

/// Seed of sweep point `index`; shared by every rule at that point so the
/// rules are compared on identical samples.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    // SplitMix64 finalizer
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Analytic SER, Monte Carlo SER and mutual information over an OMA grid.
///
/// Threshold failures are recorded per point instead of aborting. With
/// `mc = None` only the analytic columns are filled.
pub fn sweep(
    params: &LinkParams,
    c: &Constellation,
    oma_grid: &[f64],
    rules: &[ThresholdRule],
    mc: Option<&McConfig>,
) -> Result<Vec<SweepResult>> {
    if oma_grid.is_empty() {
        return Err(Error::InvalidProblem("OMA grid is empty".into()));
    }
    params.validate()?;
    if let Some(cfg) = mc {
        cfg.validate()?;
    }
    oma_grid
        .iter()
        .enumerate()
        .map(|(idx, &oma)| {
            let m = ChannelModel::build(params, c, oma)?;
            let mut outcomes: Vec<RuleOutcome> = rules
                .iter()
                .map(|&rule| match build_thresholds(&m, rule) {
                    Ok(t) => RuleOutcome {
                        rule,
                        analytic_ser: Some(analytic_ser(&m, &t).average),
                        thresholds: Some(t.thresholds().to_vec()),
                        mc: None,
                        error: None,
                    },
                    Err(e) => RuleOutcome {
                        rule,
                        thresholds: None,
                        analytic_ser: None,
                        mc: None,
                        error: Some(e.to_string()),
                    },
                })
                .collect();

            if let Some(cfg) = mc {
                let sets: Vec<(usize, ThresholdSet)> = outcomes
                    .iter()
                    .enumerate()
                    .filter_map(|(j, o)| {
                        let t = o.thresholds.clone()?;
                        Some((j, ThresholdSet::new(t, o.rule).ok()?))
                    })
                    .collect();
                let detectors: Vec<Detector<'_>> = sets.iter().map(|(_, t)| Detector::Thresholds(t)).collect();
                let point_cfg = McConfig {
                    seed: point_seed(cfg.seed, idx),
                    ..*cfg
                };
                let results = simulate_many(&m, &detectors, &point_cfg)?;
                for ((j, _), r) in sets.iter().zip(results) {
                    outcomes[*j].mc = Some(r);
                }
            }

            let status = if outcomes.iter().any(|o| o.error.is_some()) {
                PointStatus::ThresholdError
            } else {
                PointStatus::Ok
            };
            Ok(SweepResult {
                oma_dbm: oma,
                entropy_bits: c.entropy(),
                mi_bits: mutual_information(&m),
                rules: outcomes,
                status,
            })
        })
        .collect()
}
