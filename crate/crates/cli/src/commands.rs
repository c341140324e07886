//! Subcommand implementations. Each returns its rendered outputs; writing
//! them is left to the caller so the single-writer rule holds.

use imdd_core::detection::{map_equality_residual, pair_thresholds};
use imdd_core::shaping::{
    evaluate_ser, optimize_gs_with, optimize_ps_with, GsProblem, PsObjective, PsProblem, ShapingReport, ShapingSettings,
};
use imdd_core::{
    analytic_ser, build_thresholds, mutual_information, sweep, ChannelModel, Constellation, PointStatus, SweepResult,
    ThresholdRule,
};
use serde::Serialize;

use crate::config::{OptimizeMode, Resolved, RunConfig};
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn sci(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.8e}"),
        None => "nan".to_string(),
    }
}

fn column(rule: ThresholdRule) -> String {
    rule.name().replace('-', "_")
}

/// CSV header for the given rules.
pub fn csv_header(rules: &[ThresholdRule]) -> String {
    let mut cols = vec!["oma_dbm".to_string()];
    cols.extend(rules.iter().map(|&r| format!("ser_{}", column(r))));
    cols.extend(rules.iter().map(|&r| format!("mc_ser_{}", column(r))));
    cols.extend(rules.iter().map(|&r| format!("mc_ci95_{}", column(r))));
    cols.extend(["mi_bits", "entropy_bits", "status"].map(String::from));
    cols.join(",")
}

pub fn render_csv(rules: &[ThresholdRule], results: &[SweepResult]) -> String {
    let mut out = csv_header(rules);
    out.push('\n');
    for p in results {
        let mut row = vec![sci(Some(p.oma_dbm))];
        row.extend(p.rules.iter().map(|o| sci(o.analytic_ser)));
        row.extend(p.rules.iter().map(|o| sci(o.mc.as_ref().map(|m| m.ser))));
        row.extend(p.rules.iter().map(|o| sci(o.mc.as_ref().map(|m| m.ci95_half_width))));
        row.push(sci(Some(p.mi_bits)));
        row.push(sci(Some(p.entropy_bits)));
        row.push(p.status.as_str().to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
struct SweepDocument<'a> {
    version: &'static str,
    seed: u64,
    config: RunConfig,
    results: &'a [SweepResult],
}

#[derive(Debug)]
pub struct SweepOutput {
    pub results: Vec<SweepResult>,
    pub csv: String,
    pub json: String,
    pub all_failed: bool,
}

pub fn cmd_sweep(r: &Resolved) -> Result<SweepOutput, CliError> {
    let grid = r.require_grid()?;
    let mc = r.mc_enabled.then_some(&r.mc);
    let results = sweep(&r.link, &r.constellation, grid, &r.rules, mc)?;
    let csv = render_csv(&r.rules, &results);
    let doc = SweepDocument {
        version: VERSION,
        seed: r.mc.seed,
        config: r.echo(),
        results: &results,
    };
    let json = to_json(&doc);
    let all_failed = results.iter().all(|p| p.status == PointStatus::ThresholdError);
    Ok(SweepOutput {
        results,
        csv,
        json,
        all_failed,
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("documents serialize");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
pub struct PairEntry {
    pub pair: usize,
    pub threshold: Option<f64>,
    pub error: Option<String>,
    /// `ln P_i f(r|x_i) - ln P_{i+1} f(r|x_{i+1})`, reported for the optimal rule.
    pub map_residual: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Variant {
    pub rule: ThresholdRule,
    pub pairs: Vec<PairEntry>,
    pub thresholds: Option<Vec<f64>>,
    pub analytic_ser: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
struct ThresholdsDocument<'a> {
    version: &'static str,
    config: RunConfig,
    oma_dbm: f64,
    beta: f64,
    sigma_ele2: f64,
    sigma_rin2: f64,
    variants: &'a [Variant],
}

#[derive(Debug)]
pub struct ThresholdsOutput {
    pub variants: Vec<Variant>,
    pub table: String,
    pub json: String,
}

pub fn cmd_thresholds(r: &Resolved) -> Result<ThresholdsOutput, CliError> {
    let oma = r.require_oma()?;
    let m = ChannelModel::build(&r.link, &r.constellation, oma)?;
    let variants: Vec<Variant> = ThresholdRule::ALL
        .iter()
        .map(|&rule| {
            let pairs = pair_thresholds(&m, rule)
                .into_iter()
                .enumerate()
                .map(|(i, res)| match res {
                    Ok(t) => PairEntry {
                        pair: i,
                        threshold: Some(t),
                        error: None,
                        map_residual: (rule == ThresholdRule::OptimalExact).then(|| map_equality_residual(&m, i, t)),
                    },
                    Err(e) => PairEntry {
                        pair: i,
                        threshold: None,
                        error: Some(e.to_string()),
                        map_residual: None,
                    },
                })
                .collect();
            match build_thresholds(&m, rule) {
                Ok(t) => Variant {
                    rule,
                    pairs,
                    analytic_ser: Some(analytic_ser(&m, &t).average),
                    thresholds: Some(t.thresholds().to_vec()),
                    error: None,
                },
                Err(e) => Variant {
                    rule,
                    pairs,
                    thresholds: None,
                    analytic_ser: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut table = format!(
        "# OMA {oma} dBm, M = {}, beta = {:.6}, sigma_ele^2 = {:.6e}, sigma_rin^2 = {:.6e}\n",
        m.len(),
        m.beta(),
        m.sigma_ele2(),
        m.sigma_rin2()
    );
    table.push_str(&format!("{:<6}", "pair"));
    for v in &variants {
        table.push_str(&format!("{:>18}", v.rule.name()));
    }
    table.push_str(&format!("{:>18}\n", "residual"));
    for i in 0..m.len() - 1 {
        table.push_str(&format!("{:<6}", format!("{}-{}", i, i + 1)));
        for v in &variants {
            let cell = match v.pairs[i].threshold {
                Some(t) => format!("{t:.9}"),
                None => "error".to_string(),
            };
            table.push_str(&format!("{cell:>18}"));
        }
        let res = variants[0].pairs[i]
            .map_residual
            .map_or("-".to_string(), |x| format!("{x:.3e}"));
        table.push_str(&format!("{res:>18}\n"));
    }
    table.push_str(&format!("{:<6}", "ser"));
    for v in &variants {
        table.push_str(&format!("{:>18}", sci(v.analytic_ser)));
    }
    table.push('\n');
    for v in &variants {
        for p in &v.pairs {
            if let Some(e) = &p.error {
                table.push_str(&format!("{} pair {}-{}: {e}\n", v.rule, p.pair, p.pair + 1));
            }
        }
        if let (Some(e), true) = (&v.error, v.pairs.iter().all(|p| p.error.is_none())) {
            table.push_str(&format!("{}: {e}\n", v.rule));
        }
    }

    let doc = ThresholdsDocument {
        version: VERSION,
        config: r.echo(),
        oma_dbm: oma,
        beta: m.beta(),
        sigma_ele2: m.sigma_ele2(),
        sigma_rin2: m.sigma_rin2(),
        variants: &variants,
    };
    let json = to_json(&doc);
    Ok(ThresholdsOutput { variants, table, json })
}

/// Metrics of one constellation under the paired rules.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assessment {
    pub ser_optimal: Option<f64>,
    pub ser_approx: Option<f64>,
    pub mi_bits: f64,
    pub entropy_bits: f64,
}

pub fn assess(r: &Resolved, c: &Constellation, oma: f64) -> Result<Assessment, CliError> {
    let m = ChannelModel::build(&r.link, c, oma)?;
    Ok(Assessment {
        ser_optimal: evaluate_ser(&r.link, c, oma, ThresholdRule::OptimalExact).ok(),
        ser_approx: evaluate_ser(&r.link, c, oma, ThresholdRule::UniformApprox).ok(),
        mi_bits: mutual_information(&m),
        entropy_bits: c.entropy(),
    })
}

#[derive(Debug, Serialize)]
pub struct OptimizeDocument {
    pub version: &'static str,
    pub mode: OptimizeMode,
    pub oma_dbm: f64,
    pub h_min: Option<f64>,
    pub config: RunConfig,
    pub report: ShapingReport,
    pub before: Assessment,
    pub after: Assessment,
}

#[derive(Debug)]
pub struct OptimizeOutput {
    pub document: OptimizeDocument,
    pub summary: String,
    pub json: String,
    pub constellation_json: String,
}

pub fn cmd_optimize(r: &Resolved) -> Result<OptimizeOutput, CliError> {
    let oma = r.require_oma()?;
    let mode = r
        .optimize
        .mode
        .ok_or_else(|| CliError::config("optimize.mode", "required (or --mode gs|ps-ser|ps-mi)"))?;
    let rule = r.rules.first().copied().unwrap_or(ThresholdRule::OptimalExact);
    let settings = ShapingSettings {
        restarts: r.optimize.restarts.unwrap_or(ShapingSettings::default().restarts),
        seed: r.mc.seed,
        ..Default::default()
    };
    let problem_error = |e: imdd_core::Error| match e {
        imdd_core::Error::SolverFailure(msg) => CliError::Solver(msg),
        imdd_core::Error::InvalidProblem(msg) => CliError::config("optimize", msg),
        other => CliError::Core(other),
    };

    let report = match mode {
        OptimizeMode::Gs => {
            let p = GsProblem {
                base: r.constellation.clone(),
                oma_dbm: oma,
                rule,
            };
            optimize_gs_with(&p, &r.link, &settings).map_err(problem_error)?
        }
        OptimizeMode::PsSer | OptimizeMode::PsMi => {
            let objective = if mode == OptimizeMode::PsSer {
                PsObjective::MinSer
            } else {
                PsObjective::MaxMi
            };
            if objective == PsObjective::MinSer && r.optimize.h_min.is_none() {
                return Err(CliError::config("optimize.h_min", "required for ps-ser (or --h-min)"));
            }
            let p = PsProblem {
                points: r.constellation.points().to_vec(),
                oma_dbm: oma,
                rule,
                h_min: r.optimize.h_min,
                objective,
            };
            optimize_ps_with(&p, &r.link, &settings).map_err(problem_error)?
        }
    };

    let before = assess(r, &report.start, oma)?;
    let after = assess(r, &report.constellation, oma)?;
    let summary = format!(
        "mode {mode}, rule {rule}, OMA {oma} dBm, {} evaluations over {} restarts (best {})\n\
         points: {:?}\nprobs:  {:?}\n\
         {:<8}{:>18}{:>18}{:>14}{:>14}\n\
         {:<8}{:>18}{:>18}{:>14.9}{:>14.9}\n\
         {:<8}{:>18}{:>18}{:>14.9}{:>14.9}\n",
        report.evaluations,
        report.restarts,
        report.best_restart,
        report.constellation.points(),
        report.constellation.probs(),
        "",
        "ser_optimal",
        "ser_approx",
        "mi_bits",
        "entropy",
        "before",
        sci(before.ser_optimal),
        sci(before.ser_approx),
        before.mi_bits,
        before.entropy_bits,
        "after",
        sci(after.ser_optimal),
        sci(after.ser_approx),
        after.mi_bits,
        after.entropy_bits,
    );
    let constellation_json = to_json(&report.constellation);
    let document = OptimizeDocument {
        version: VERSION,
        mode,
        oma_dbm: oma,
        h_min: r.optimize.h_min,
        config: r.echo(),
        report,
        before,
        after,
    };
    let json = to_json(&document);
    Ok(OptimizeOutput {
        document,
        summary,
        json,
        constellation_json,
    })
}
