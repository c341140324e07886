//! Geometric and probabilistic constellation shaping.
//!
//! Every problem is solved by Nelder-Mead over an unconstrained
//! reparameterization, restarted from several jittered starts:
//!
//! * geometric shaping: interior points come from softplus-weighted gaps,
//!   each at least [`GS_MIN_GAP`], between the fixed outer points;
//! * probabilistic shaping: probabilities come from a softmax, then are mixed
//!   toward uniform just enough to meet the entropy floor. Entropy only grows
//!   along that segment, so the floor holds exactly without penalty tuning.
//!
//! Thresholds are rebuilt for each candidate under the problem's rule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::constellation::{entropy, Constellation};
use crate::detection::{build_thresholds, ThresholdRule};
use crate::error::{Error, Result};
use crate::link::{ChannelModel, LinkParams};
use crate::metrics::{analytic_ser, mutual_information};
use crate::optim::NelderMead;

/// Smallest distance between neighbouring points in geometric shaping.
pub const GS_MIN_GAP: f64 = 1e-3;

/// Slack allowed on the entropy floor after projection.
const ENTROPY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GsProblem {
    /// Start geometry; its outer points stay fixed and its probabilities are kept.
    pub base: Constellation,
    pub oma_dbm: f64,
    pub rule: ThresholdRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PsObjective {
    MinSer,
    MaxMi,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsProblem {
    pub points: Vec<f64>,
    pub oma_dbm: f64,
    /// Rule used for the SER objective; ignored by `MaxMi`.
    pub rule: ThresholdRule,
    /// Entropy floor in bits. Required for `MinSer`, optional for `MaxMi`.
    pub h_min: Option<f64>,
    pub objective: PsObjective,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingSettings {
    pub restarts: usize,
    pub seed: u64,
    /// Standard deviation of the start jitter, in parameter units.
    pub jitter: f64,
    pub solver: NelderMead,
}

impl Default for ShapingSettings {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            jitter: 0.5,
            solver: NelderMead::default(),
        }
    }
}

/// Constraint violations of a returned solution (all zero when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    /// `|sum p - 1|`.
    pub simplex: f64,
    /// `max(0, h_min - H)` in bits.
    pub entropy_deficit: f64,
    /// Largest displacement of an outer point.
    pub endpoints: f64,
    /// `max(0, GS_MIN_GAP - smallest gap)` for geometric shaping, otherwise
    /// `max(0, -smallest gap)`.
    pub ordering: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapingReport {
    pub constellation: Constellation,
    pub start: Constellation,
    pub rule: ThresholdRule,
    /// `"ser"` or `"mi_bits"`.
    pub objective_name: &'static str,
    pub start_objective: f64,
    pub objective: f64,
    pub evaluations: usize,
    pub restarts: usize,
    pub best_restart: usize,
    pub converged: bool,
    pub residuals: Residuals,
}

/// Analytic SER of `c` at `oma_dbm` with thresholds built under `rule`.
pub fn evaluate_ser(params: &LinkParams, c: &Constellation, oma_dbm: f64, rule: ThresholdRule) -> Result<f64> {
    let m = ChannelModel::build(params, c, oma_dbm)?;
    let t = build_thresholds(&m, rule)?;
    Ok(analytic_ser(&m, &t).average)
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Interior geometry from `M - 2` free parameters. The last gap weight is
/// pinned at `softplus(0)` so the parameterization has no scale redundancy.
fn gs_points(theta: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let n_gaps = theta.len() + 1;
    let weights: Vec<f64> = theta.iter().map(|&t| softplus(t)).chain([softplus(0.0)]).collect();
    let total: f64 = weights.iter().sum();
    let spare = (hi - lo) - n_gaps as f64 * GS_MIN_GAP;
    let mut points = Vec::with_capacity(n_gaps + 1);
    let mut x = lo;
    points.push(lo);
    for w in &weights[..n_gaps - 1] {
        x += GS_MIN_GAP + spare * w / total;
        points.push(x);
    }
    points.push(hi);
    points
}

fn softmax_pinned(theta: &[f64]) -> Vec<f64> {
    let max = theta.iter().copied().fold(0.0, f64::max);
    let e: Vec<f64> = theta.iter().chain(&[0.0]).map(|t| (t - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Smallest mix `(1 - t) p + t u` toward uniform whose entropy reaches `h_min`.
pub fn project_entropy(p: &[f64], h_min: f64) -> Vec<f64> {
    if entropy(p) >= h_min {
        return p.to_vec();
    }
    let u = 1.0 / p.len() as f64;
    // entropy is flat at its maximum; resolve a floor at log2 M exactly
    if h_min >= (p.len() as f64).log2() - ENTROPY_SLACK {
        return vec![u; p.len()];
    }
    let mix = |t: f64| -> Vec<f64> { p.iter().map(|&q| (1.0 - t) * q + t * u).collect() };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if entropy(&mix(mid)) >= h_min {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    mix(hi)
}

struct Outcome {
    x: Vec<f64>,
    value: f64,
    evaluations: usize,
    converged: bool,
}

/// Multi-start Nelder-Mead. Restart 0 starts at `x0`; the others at `x0`
/// plus Gaussian jitter from stream `r` of the settings seed. Each run is
/// followed by one restart from its own optimum to shake off a collapsed
/// simplex.
fn multistart<F>(f: F, x0: &[f64], s: &ShapingSettings) -> (Vec<Outcome>, f64)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let start_value = f(x0);
    let restarts = s.restarts.max(1);
    let outcomes = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut start = x0.to_vec();
            if r > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
                rng.set_stream(r as u64);
                let jitter = Normal::new(0.0, s.jitter).expect("finite jitter");
                for v in &mut start {
                    *v += jitter.sample(&mut rng);
                }
            }
            let first = s.solver.minimize(&f, &start);
            let polish = NelderMead {
                step: 0.25 * s.solver.step,
                ..s.solver
            }
            .minimize(&f, &first.x);
            let evaluations = first.evaluations + polish.evaluations;
            if polish.value <= first.value {
                Outcome {
                    x: polish.x,
                    value: polish.value,
                    evaluations,
                    converged: polish.converged,
                }
            } else {
                Outcome {
                    x: first.x,
                    value: first.value,
                    evaluations,
                    converged: first.converged,
                }
            }
        })
        .collect();
    (outcomes, start_value)
}

/// Lowest finite value; ties go to the lowest restart index.
fn pick_best(outcomes: &[Outcome]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if !o.value.is_finite() {
            continue;
        }
        if best.is_none_or(|b| o.value < outcomes[b].value) {
            best = Some(i);
        }
    }
    best
}

/// Interior points minimizing analytic SER with the outer points fixed.
pub fn optimize_gs(p: &GsProblem, params: &LinkParams) -> Result<ShapingReport> {
    optimize_gs_with(p, params, &ShapingSettings::default())
}

pub fn optimize_gs_with(p: &GsProblem, params: &LinkParams, s: &ShapingSettings) -> Result<ShapingReport> {
    params.validate()?;
    let base = &p.base;
    let (lo, hi) = (base.min(), base.max());
    let m = base.len();
    if (m as f64 - 1.0) * GS_MIN_GAP >= hi - lo {
        return Err(Error::InvalidProblem(format!(
            "span {} too small for {m} points at minimum gap {GS_MIN_GAP}",
            hi - lo
        )));
    }
    let start = Constellation::new(
        gs_points(&vec![0.0; m.saturating_sub(2)], lo, hi),
        base.probs().to_vec(),
    )?;
    let objective = |theta: &[f64]| -> f64 {
        Constellation::new(gs_points(theta, lo, hi), base.probs().to_vec())
            .and_then(|c| evaluate_ser(params, &c, p.oma_dbm, p.rule))
            .unwrap_or(f64::INFINITY)
    };
    let start_objective = objective(&vec![0.0; m.saturating_sub(2)]);

    if m < 3 {
        return Ok(ShapingReport {
            constellation: base.clone(),
            start: base.clone(),
            rule: p.rule,
            objective_name: "ser",
            start_objective,
            objective: start_objective,
            evaluations: 1,
            restarts: 0,
            best_restart: 0,
            converged: true,
            residuals: gs_residuals(base, lo, hi),
        });
    }

    let (outcomes, start_value) = multistart(objective, &vec![0.0; m - 2], s);
    let evaluations = outcomes.iter().map(|o| o.evaluations).sum::<usize>() + 1;
    let best = pick_best(&outcomes).ok_or_else(|| Error::SolverFailure("no restart reached a finite SER".into()))?;
    let (c, value, converged) = if outcomes[best].value <= start_value {
        let o = &outcomes[best];
        (
            Constellation::new(gs_points(&o.x, lo, hi), base.probs().to_vec())?,
            o.value,
            o.converged,
        )
    } else {
        (start.clone(), start_value, false)
    };
    Ok(ShapingReport {
        residuals: gs_residuals(&c, lo, hi),
        constellation: c,
        start,
        rule: p.rule,
        objective_name: "ser",
        start_objective,
        objective: value,
        evaluations,
        restarts: outcomes.len(),
        best_restart: best,
        converged,
    })
}

fn gs_residuals(c: &Constellation, lo: f64, hi: f64) -> Residuals {
    let min_gap = c.points().windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    Residuals {
        simplex: (c.probs().iter().sum::<f64>() - 1.0).abs(),
        entropy_deficit: 0.0,
        endpoints: (c.min() - lo).abs().max((c.max() - hi).abs()),
        ordering: (GS_MIN_GAP - min_gap).max(0.0),
    }
}

fn validate_ps(p: &PsProblem) -> Result<()> {
    let m = p.points.len();
    let h_max = (m as f64).log2();
    match (p.objective, p.h_min) {
        (PsObjective::MinSer, None) => return Err(Error::InvalidProblem("h_min is required for SER shaping".into())),
        (_, Some(h)) if !(h > 0.0 && h <= h_max + ENTROPY_SLACK) => {
            return Err(Error::InvalidProblem(format!("h_min = {h} outside (0, {h_max}]")))
        }
        _ => {}
    }
    Ok(())
}

/// Probabilities minimizing SER under an entropy floor.
pub fn optimize_ps_ser(p: &PsProblem, params: &LinkParams) -> Result<ShapingReport> {
    if p.objective != PsObjective::MinSer {
        return Err(Error::InvalidProblem(
            "optimize_ps_ser needs the MinSer objective".into(),
        ));
    }
    optimize_ps_with(p, params, &ShapingSettings::default())
}

/// Probabilities maximizing mutual information, optionally under an entropy floor.
pub fn optimize_ps_mi(p: &PsProblem, params: &LinkParams) -> Result<ShapingReport> {
    if p.objective != PsObjective::MaxMi {
        return Err(Error::InvalidProblem("optimize_ps_mi needs the MaxMi objective".into()));
    }
    optimize_ps_with(p, params, &ShapingSettings::default())
}

pub fn optimize_ps_with(p: &PsProblem, params: &LinkParams, s: &ShapingSettings) -> Result<ShapingReport> {
    validate_ps(p)?;
    params.validate()?;
    let start = Constellation::uniform(p.points.clone())?;
    let base = ChannelModel::build(params, &start, p.oma_dbm)?;
    let m = start.len();
    let floor = p.h_min.map(|h| h.min((m as f64).log2()));

    let probs_of = |theta: &[f64]| -> Vec<f64> {
        let q = softmax_pinned(theta);
        match floor {
            Some(h) => project_entropy(&q, h),
            None => q,
        }
    };
    // SER is minimized as is; MI as its negative.
    let evaluate = |c: &Constellation| -> Result<f64> {
        let model = base.with_constellation(c.clone())?;
        match p.objective {
            PsObjective::MinSer => {
                let t = build_thresholds(&model, p.rule)?;
                Ok(analytic_ser(&model, &t).average)
            }
            PsObjective::MaxMi => Ok(-mutual_information(&model)),
        }
    };
    let objective = |theta: &[f64]| -> f64 {
        start
            .with_probs(probs_of(theta))
            .and_then(|c| evaluate(&c))
            .unwrap_or(f64::INFINITY)
    };

    let x0 = vec![0.0; m - 1];
    let settings = ShapingSettings {
        solver: NelderMead { step: 1.0, ..s.solver },
        ..*s
    };
    let (outcomes, start_value) = multistart(objective, &x0, &settings);
    let evaluations = outcomes.iter().map(|o| o.evaluations).sum::<usize>() + 1;
    let best =
        pick_best(&outcomes).ok_or_else(|| Error::SolverFailure("no restart reached a finite objective".into()))?;
    let (c, value, converged) = if outcomes[best].value <= start_value {
        let o = &outcomes[best];
        (start.with_probs(probs_of(&o.x))?, o.value, o.converged)
    } else {
        (start.clone(), start_value, false)
    };

    let sign = if p.objective == PsObjective::MaxMi { -1.0 } else { 1.0 };
    let min_gap = c.points().windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    Ok(ShapingReport {
        residuals: Residuals {
            simplex: (c.probs().iter().sum::<f64>() - 1.0).abs(),
            entropy_deficit: p.h_min.map_or(0.0, |h| (h - c.entropy()).max(0.0)),
            endpoints: 0.0,
            ordering: (-min_gap).max(0.0),
        },
        constellation: c,
        start,
        rule: p.rule,
        objective_name: if sign > 0.0 { "ser" } else { "mi_bits" },
        start_objective: sign * start_value,
        objective: sign * value,
        evaluations,
        restarts: outcomes.len(),
        best_restart: best,
        converged,
    })
}
