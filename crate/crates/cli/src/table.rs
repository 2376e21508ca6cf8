//! CSV output. Floats are written with 6 significant digits in the style of
//! C's `%g`.

use immunesim_core::meanfield::{GridPoint, Trajectory, TransitionCounts};
use immunesim_core::replicates::{Aggregate, METRIC_COLUMNS};
use immunesim_core::MetricsRow;

use crate::error::{CliError, Result};

/// `%g` with 6 significant digits: fixed notation for exponents in
/// `[-4, 6)`, scientific otherwise, trailing zeros removed.
pub fn fmt_g(x: f64) -> String {
    const PREC: i32 = 6;
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let sci = format!("{:.*e}", (PREC - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PREC).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PREC - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const METRICS_HEADER: [&str; 9] = [
    "round",
    "current_rate",
    "cumulative_rate",
    "beta_t",
    "alpha_q",
    "recovered",
    "carriers_virus",
    "carriers_cure",
    "detections",
];

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| CliError::Data(format!("csv buffer: {e}")))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Data(format!("csv: {e}"))
}

pub fn metrics_csv(rows: &[MetricsRow]) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(METRICS_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.round.to_string(),
            fmt_g(r.current_rate),
            fmt_g(r.cumulative_rate),
            fmt_g(r.beta_t),
            fmt_g(r.alpha_q_t),
            r.recovered.to_string(),
            r.carriers_virus.to_string(),
            r.carriers_cure.to_string(),
            r.detections.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

fn aggregate_header() -> Vec<String> {
    let mut h = vec!["round".to_string()];
    for c in METRIC_COLUMNS {
        h.push(format!("{c}_mean"));
        h.push(format!("{c}_std"));
    }
    h
}

pub fn aggregate_csv(agg: &Aggregate) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(aggregate_header()).map_err(csv_err)?;
    for (i, round) in agg.rounds.iter().enumerate() {
        let mut rec = vec![round.to_string()];
        for c in 0..METRIC_COLUMNS.len() {
            rec.push(fmt_g(agg.mean[i][c]));
            rec.push(fmt_g(agg.std[i][c]));
        }
        w.write_record(rec).map_err(csv_err)?;
    }
    finish(w)
}

/// Long format: one line per (axis value, round, metric).
pub fn sweep_csv(axis: &str, points: &[(String, Aggregate)]) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(["axis", "value", "round", "metric", "mean", "std"]).map_err(csv_err)?;
    for (value, agg) in points {
        for (i, round) in agg.rounds.iter().enumerate() {
            for (c, name) in METRIC_COLUMNS.iter().enumerate() {
                w.write_record([
                    axis.to_string(),
                    value.clone(),
                    round.to_string(),
                    name.to_string(),
                    fmt_g(agg.mean[i][c]),
                    fmt_g(agg.std[i][c]),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    finish(w)
}

pub fn trajectory_csv(t: &Trajectory) -> Result<Vec<u8>> {
    let mut w = writer();
    match &t.rc {
        Some(rc) => {
            w.write_record(["t", "r", "rc"]).map_err(csv_err)?;
            for ((time, r), rc) in t.times.iter().zip(&t.r).zip(rc) {
                w.write_record([fmt_g(*time), fmt_g(*r), fmt_g(*rc)]).map_err(csv_err)?;
            }
        }
        None => {
            w.write_record(["t", "r"]).map_err(csv_err)?;
            for (time, r) in t.times.iter().zip(&t.r) {
                w.write_record([fmt_g(*time), fmt_g(*r)]).map_err(csv_err)?;
            }
        }
    }
    finish(w)
}

pub fn grid_csv(points: &[GridPoint], threshold: f64) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(["beta", "epsilon", "eta", "r0", "rc0", "final_r", "final_rc", "pass"]).map_err(csv_err)?;
    for g in points {
        let p = &g.params;
        w.write_record([
            fmt_g(p.beta),
            fmt_g(p.epsilon),
            fmt_g(p.eta),
            fmt_g(p.r0),
            fmt_g(p.rc0),
            fmt_g(g.final_r),
            fmt_g(g.final_rc),
            (g.final_r < threshold).to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn event_counts_csv(rows: &[(usize, TransitionCounts, usize)]) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record([
        "replicate",
        "is_pairs",
        "is_infected",
        "cs_pairs",
        "cs_cured",
        "ci_pairs",
        "ci_cured",
        "ic_pairs",
        "ic_infected",
        "detections",
    ])
    .map_err(csv_err)?;
    for (rep, c, det) in rows {
        w.write_record(
            [
                *rep as u64,
                c.is_pairs,
                c.is_infected,
                c.cs_pairs,
                c.cs_cured,
                c.ci_pairs,
                c.ci_cured,
                c.ic_pairs,
                c.ic_infected,
                *det as u64,
            ]
            .map(|v| v.to_string()),
        )
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Simulated against predicted ratios; `rc` columns are empty when the
/// run produced no cures.
pub fn comparison_csv(
    rounds: &[u32],
    r_sim: &[f64],
    rc_sim: &[f64],
    r_mf: &[f64],
    rc_mf: Option<&[f64]>,
) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(["round", "r_sim", "rc_sim", "r_mf", "rc_mf"]).map_err(csv_err)?;
    for i in 0..rounds.len() {
        w.write_record([
            rounds[i].to_string(),
            fmt_g(r_sim[i]),
            fmt_g(rc_sim[i]),
            fmt_g(r_mf[i]),
            rc_mf.map_or(String::new(), |v| fmt_g(v[i])),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_format_matches_printf() {
        // Expected strings are what C printf("%g") prints.
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333"),
            (2.0 / 3.0, "0.666667"),
            (123456.0, "123456"),
            (1234567.0, "1.23457e+06"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-0.25, "-0.25"),
            (99.99995, "99.9999"),
            (99.999951, "100"),
            (999999.5, "1e+06"),
            (0.078125, "0.078125"),
            (1e-300, "1e-300"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g(x), want, "{x}");
        }
    }

    #[test]
    fn metrics_header_is_fixed() {
        let bytes = metrics_csv(&[]).unwrap();
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "round,current_rate,cumulative_rate,beta_t,alpha_q,recovered,carriers_virus,carriers_cure,detections\n"
        );
    }
}
