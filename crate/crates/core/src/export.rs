//! JSON and CSV renderings of results. Floats are rounded to 12 significant
//! digits so that regression diffs stay meaningful; non-finite values become
//! JSON `null` and CSV `NaN`/`inf`.
//!
//! CSV headers are part of the interface:
//!
//! | file | header |
//! |------|--------|
//! | analytic pmf | `n,probability,epoch` |
//! | simulated pmf | `n,frequency,epoch` |
//! | density | `x_left,x_right,density,cdf,exp_density,exp_cdf` |
//! | sweep | see [`sweep_header`] |

use serde_json::{json, Value};

use crate::analysis::{CompareReport, PointMeans, ScaledDensity, Sweep};
use crate::heavy_traffic::HeavyTrafficResult;
use crate::inversion::QueueLengthPmf;
use crate::sim::{EpochStats, SimResult};
use crate::solver::{Epoch, StationarySolution};

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

/// JSON number rounded to 12 significant digits; `null` when not finite.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(round12(x))
    } else {
        Value::Null
    }
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

/// CSV field with 12 significant digits.
pub fn fmt(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        round12(x).to_string()
    }
}

pub fn solution_json(sol: &StationarySolution<f64>) -> Value {
    let ms = sol.moments();
    let roots: Vec<Value> = sol.roots().roots.iter().map(|z| json!([num(z.re), num(z.im)])).collect();
    json!({
        "lambda": num(sol.model().lambda()),
        "n_types": sol.n_types(),
        "rho": num(sol.rho()),
        "pi": nums(&ms.pi),
        "roots": roots,
        "root_residual": num(sol.roots().residual),
        "f0": nums(&sol.boundary().f0),
        "empty_probability": num(sol.boundary().empty_probability()),
        "f_at_one": nums(&sol.f_at_one()),
        "boundary_pivot_ratio": num(sol.boundary().pivot_ratio),
    })
}

pub const PMF_HEADER: &str = "n,probability,epoch";
pub const SIM_PMF_HEADER: &str = "n,frequency,epoch";

pub fn pmf_csv(pmf: &QueueLengthPmf<f64>) -> String {
    let mut out = format!("{PMF_HEADER}\n");
    for (n, &p) in pmf.probabilities.iter().enumerate() {
        out.push_str(&format!("{n},{},{}\n", fmt(p), pmf.epoch));
    }
    out
}

pub fn sim_pmf_csv(stats: &EpochStats) -> String {
    let mut out = format!("{SIM_PMF_HEADER}\n");
    for (n, &p) in stats.pmf.iter().enumerate() {
        out.push_str(&format!("{n},{},{}\n", fmt(p), stats.epoch));
    }
    out
}

pub fn ht_json(ht: &HeavyTrafficResult<f64>, independence: Option<f64>) -> Value {
    let mut v = json!({
        "lambda_critical": num(ht.lambda_critical),
        "eta": num(ht.eta),
        "alpha_hat_bar": num(ht.alpha_hat_bar),
        "gamma_bar": nums(&ht.gamma_bar),
        "q_bar": nums(&ht.q_bar),
        "d1": num(ht.d1),
        "pi": nums(&ht.pi),
        "correction_term": num(ht.correction_term),
        "denominator": num(ht.denominator),
        "no_dependence_eta": num(ht.no_dependence_eta()),
        "valid": ht.valid,
    });
    if let Some(x) = independence {
        v["independence_condition"] = num(x);
    }
    v
}

pub fn sim_json(r: &SimResult) -> Value {
    let epochs: Vec<Value> = r
        .epochs
        .iter()
        .map(|e| {
            json!({
                "epoch": e.epoch.as_str(),
                "mean": num(e.mean),
                "variance": num(e.variance),
                "half_width": num(e.half_width),
                "support": e.pmf.len(),
            })
        })
        .collect();
    json!({
        "seed": r.seed,
        "replications": r.replications,
        "num_departures": r.num_departures,
        "warmup_departures": r.warmup_departures,
        "epochs": epochs,
        "utilization": {"mean": num(r.utilization.mean), "half_width": num(r.utilization.half_width)},
        "mean_sojourn": {"mean": num(r.mean_sojourn.mean), "half_width": num(r.mean_sojourn.half_width)},
        "empty_by_next_type": nums(&r.empty_by_next_type),
        "exceptional_fraction": num(r.exceptional_fraction),
        "regular_type_frequencies": nums(&r.regular_type_frequencies),
        "simulated_time": num(r.simulated_time),
    })
}

pub fn compare_json(r: &CompareReport) -> Value {
    let epochs: Vec<Value> = r
        .epochs
        .iter()
        .map(|e| {
            json!({
                "epoch": e.epoch.as_str(),
                "total_variation": num(e.total_variation),
                "analytic_mean": num(e.analytic_mean),
                "simulated_mean": num(e.simulated_mean),
                "half_width": num(e.half_width),
                "mean_delta_half_widths": num(e.mean_delta),
                "pass": e.pass,
            })
        })
        .collect();
    json!({
        "rho": num(r.rho),
        "pass": r.pass,
        "failing_epochs": r.failing_epochs().iter().map(|e| e.as_str()).collect::<Vec<_>>(),
        "epochs": epochs,
        "simulation": sim_json(&r.sim),
    })
}

pub const DENSITY_HEADER: &str = "x_left,x_right,density,cdf,exp_density,exp_cdf";

pub fn density_csv(d: &ScaledDensity) -> String {
    let mut out = format!("{DENSITY_HEADER}\n");
    for b in &d.bins {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt(b.x_left),
            fmt(b.x_right),
            fmt(b.density),
            fmt(b.cdf),
            fmt(b.exp_density),
            fmt(b.exp_cdf)
        ));
    }
    out
}

fn epoch_columns(prefix: &str) -> Vec<String> {
    Epoch::ALL
        .iter()
        .map(|e| format!("{prefix}_{}", e.as_str().replace('-', "_")))
        .collect()
}

/// Sweep columns: `lambda,rho`, analytic `mean_*` and `scaled_*` per epoch,
/// `ht_scaled_mean`; then `baseline_scaled_*` and `baseline_ht_scaled_mean`
/// with `--baseline`; then `sim_mean_*` and `sim_hw_*` with simulation; and
/// `error` last, empty unless a point failed.
pub fn sweep_header(baseline: bool, simulation: bool) -> String {
    let mut cols: Vec<String> = vec!["lambda".into(), "rho".into()];
    cols.extend(epoch_columns("mean"));
    cols.extend(epoch_columns("scaled"));
    cols.push("ht_scaled_mean".into());
    if baseline {
        cols.extend(epoch_columns("baseline_scaled"));
        cols.push("baseline_ht_scaled_mean".into());
    }
    if simulation {
        cols.extend(epoch_columns("sim_mean"));
        cols.extend(epoch_columns("sim_hw"));
    }
    cols.push("error".into());
    cols.join(",")
}

fn blanks(n: usize) -> Vec<String> {
    vec![String::new(); n]
}

pub fn sweep_csv(s: &Sweep, baseline: bool, simulation: bool) -> String {
    let opt = |x: Option<f64>| x.map(fmt).unwrap_or_default();
    let mut out = sweep_header(baseline, simulation);
    out.push('\n');
    for row in &s.rows {
        let mut errors: Vec<String> = Vec::new();
        let mut cells = vec![fmt(row.lambda), fmt(row.rho)];
        let mut push_means = |cells: &mut Vec<String>, r: &Result<PointMeans, String>, scaled_only: bool, label: &str| match r {
            Ok(p) => {
                if !scaled_only {
                    cells.extend(p.means.iter().map(|&x| fmt(x)));
                }
                cells.extend(p.scaled.iter().map(|&x| fmt(x)));
            }
            Err(e) => {
                cells.extend(blanks(if scaled_only { 4 } else { 8 }));
                errors.push(format!("{label}: {e}"));
            }
        };
        push_means(&mut cells, &row.analytic, false, "analytic");
        cells.push(opt(s.ht_scaled_mean));
        if baseline {
            match &row.baseline {
                Some(r) => push_means(&mut cells, r, true, "baseline"),
                None => cells.extend(blanks(4)),
            }
            cells.push(opt(s.baseline_ht_scaled_mean));
        }
        if simulation {
            match &row.simulated {
                Some(Ok(est)) => {
                    cells.extend(est.iter().map(|e| fmt(e.mean)));
                    cells.extend(est.iter().map(|e| fmt(e.half_width)));
                }
                Some(Err(e)) => {
                    cells.extend(blanks(8));
                    errors.push(format!("simulation: {e}"));
                }
                None => cells.extend(blanks(8)),
            }
        }
        // keep the error field CSV-safe
        cells.push(errors.join("; ").replace([',', '\n'], " "));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round12(0.1 + 0.2), 0.3);
        assert_eq!(round12(1.234567890123456), 1.23456789012);
        assert_eq!(fmt(f64::NAN), "NaN");
        assert_eq!(num(f64::INFINITY), Value::Null);
    }

    #[test]
    fn sweep_header_columns() {
        assert_eq!(
            sweep_header(false, false),
            "lambda,rho,mean_departure,mean_batch_arrival,mean_customer_arrival,mean_arbitrary,\
             scaled_departure,scaled_batch_arrival,scaled_customer_arrival,scaled_arbitrary,ht_scaled_mean,error"
        );
        let full = sweep_header(true, true);
        assert_eq!(full.split(',').count(), 2 + 8 + 1 + 5 + 8 + 1);
    }
}
