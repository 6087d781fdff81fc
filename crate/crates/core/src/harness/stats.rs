use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use super::config::{Method, TrialConfig};
use super::trial::{run_cell, RowStatus, TrialRow};
use crate::error::Result;

/// Every configured method on every `(k, trial)` of the battery, in
/// `(k, trial, method)` order regardless of scheduling.
pub fn run_battery(cfg: &TrialConfig) -> Result<Vec<TrialRow>> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> = cfg
        .k_list
        .iter()
        .flat_map(|&k| (0..cfg.trials_per_cell).map(move |t| (k, t)))
        .collect();
    let rows: Vec<Vec<TrialRow>> = cells
        .par_iter()
        .map(|&(k, t)| run_cell(cfg, cfg.n, cfg.m, k, t))
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Means over the successful rows of one `(method, k)` group. Success
/// rates count failed rows as misses.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: Method,
    pub k: usize,
    pub trials: usize,
    pub failed: usize,
    pub timeouts: usize,
    pub err_full: f64,
    pub residual_noise: f64,
    pub wall_time_ms: f64,
    pub separation_gap: f64,
    pub topk_rate: f64,
    pub sr_rate: f64,
    pub err_restricted_truth: f64,
    pub err_restricted_decoded: f64,
}

pub const AGGREGATE_HEADER: [&str; 13] = [
    "method",
    "k",
    "trials",
    "failed",
    "timeouts",
    "err_full",
    "residual_noise",
    "wall_time_ms",
    "separation_gap",
    "topk_rate",
    "sr_rate",
    "err_restricted_truth",
    "err_restricted_decoded",
];

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Groups rows by `(method, k)` in method-then-`k` order.
pub fn massive_stats(rows: &[TrialRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(Method, usize), Vec<&TrialRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.method, r.k)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((method, k), group)| {
            let ok: Vec<_> = group.iter().filter(|r| r.is_ok()).filter_map(|r| r.metrics.map(|m| (*r, m))).collect();
            let trials = group.len();
            let rate = |hit: fn(&crate::signals::SupportMetrics) -> bool| {
                ok.iter().filter(|(_, m)| hit(m)).count() as f64 / trials as f64
            };
            AggregateRow {
                method,
                k,
                trials,
                failed: trials - ok.len(),
                timeouts: group.iter().filter(|r| r.status == RowStatus::Timeout).count(),
                err_full: mean(ok.iter().map(|(_, m)| m.err_full)),
                residual_noise: mean(ok.iter().map(|(_, m)| m.residual_noise)),
                wall_time_ms: mean(ok.iter().map(|(r, _)| r.wall_time_ms)),
                separation_gap: mean(ok.iter().map(|(_, m)| m.separation_gap)),
                topk_rate: rate(|m| m.exact_by_topk),
                sr_rate: rate(|m| m.exact_by_r),
                err_restricted_truth: mean(ok.iter().map(|(_, m)| m.err_restricted_truth)),
                err_restricted_decoded: mean(ok.iter().map(|(_, m)| m.err_restricted_decoded)),
            }
        })
        .collect()
}

/// `x` rounded to 6 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

pub fn write_aggregate<W: Write>(out: W, table: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    for a in table {
        let mut rec = vec![
            a.method.tag().to_string(),
            a.k.to_string(),
            a.trials.to_string(),
            a.failed.to_string(),
            a.timeouts.to_string(),
        ];
        rec.extend(
            [
                a.err_full,
                a.residual_noise,
                a.wall_time_ms,
                a.separation_gap,
                a.topk_rate,
                a.sr_rate,
                a.err_restricted_truth,
                a.err_restricted_decoded,
            ]
            .map(fmt_sig),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Fraction of rows that timed out or hit an enumeration budget.
pub fn overrun_fraction(rows: &[TrialRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let bad = rows
        .iter()
        .filter(|r| match &r.status {
            RowStatus::Timeout => true,
            RowStatus::Error(msg) => msg.contains("budget"),
            RowStatus::Ok => false,
        })
        .count();
    bad as f64 / rows.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::trial::{read_rows, run_trial, write_rows, write_timings};

    #[test]
    fn single_trial_aggregate_is_that_trial() {
        let cfg = TrialConfig {
            n: 40,
            m: 20,
            k_list: vec![3],
            trials_per_cell: 1,
            methods: vec![Method::L1Iht],
            ..TrialConfig::default()
        };
        let rows = run_battery(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        let agg = massive_stats(&rows);
        assert_eq!(agg.len(), 1);
        let m = rows[0].metrics.unwrap();
        assert_eq!(agg[0].err_full, m.err_full);
        assert_eq!(agg[0].residual_noise, m.residual_noise);
        assert_eq!(agg[0].wall_time_ms, rows[0].wall_time_ms);
        assert_eq!(agg[0].sr_rate, if m.exact_by_r { 1.0 } else { 0.0 });
        assert_eq!((agg[0].trials, agg[0].failed), (1, 0));
    }

    #[test]
    fn battery_matches_individual_trials() {
        let cfg = TrialConfig {
            n: 30,
            m: 15,
            k_list: vec![1, 2],
            trials_per_cell: 2,
            methods: vec![Method::L1Eq, Method::L1Ineq],
            ..TrialConfig::default()
        };
        let rows = run_battery(&cfg).unwrap();
        assert_eq!(rows.len(), 8);
        let single = run_trial(&cfg, 2, 1).unwrap();
        assert_eq!(rows[6].metrics, single[0].metrics);
        assert_eq!(rows[7].metrics, single[1].metrics);
    }

    #[test]
    fn failed_rows_are_counted_not_averaged() {
        let mut cfg = TrialConfig {
            n: 30,
            m: 15,
            k_list: vec![2],
            trials_per_cell: 2,
            methods: vec![Method::IrwL1],
            ..TrialConfig::default()
        };
        cfg.options.irw.a = -1.0;
        let agg = massive_stats(&run_battery(&cfg).unwrap());
        assert_eq!((agg[0].trials, agg[0].failed), (2, 2));
        assert!(agg[0].err_full.is_nan());
        assert_eq!(agg[0].sr_rate, 0.0);
    }

    #[test]
    fn reaggregation_from_csv_is_identical() {
        let cfg = TrialConfig {
            n: 30,
            m: 15,
            k_list: vec![1, 3],
            trials_per_cell: 3,
            methods: vec![Method::L1Eq, Method::L1Iht],
            ..TrialConfig::default()
        };
        let rows = run_battery(&cfg).unwrap();
        let (mut rbuf, mut tbuf, mut a1, mut a2) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        write_rows(&mut rbuf, &rows).unwrap();
        write_timings(&mut tbuf, &rows).unwrap();
        write_aggregate(&mut a1, &massive_stats(&rows)).unwrap();
        let back = read_rows(&rbuf[..], Some(&tbuf[..])).unwrap();
        write_aggregate(&mut a2, &massive_stats(&back)).unwrap();
        assert_eq!(String::from_utf8(a1).unwrap(), String::from_utf8(a2).unwrap());
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1.00000");
        assert_eq!(fmt_sig(123.456789), "123.457");
        assert_eq!(fmt_sig(-0.00123456789), "-0.00123457");
        assert_eq!(fmt_sig(1234567.0), "1.23457e6");
        assert_eq!(fmt_sig(f64::NAN), "NaN");
    }
}
