//! Mean and spread of records per method and training size.

use std::fmt::Write;

use htl_core::harness::{EvalRecord, Method, Size};

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub size: Size,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single record.
    pub std: f64,
}

/// Rows in order of first appearance of each (method, size).
pub fn summarize(records: &[EvalRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, Size)> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for r in records {
        let key = (r.method, r.size.clone());
        match keys.iter().position(|k| *k == key) {
            Some(i) => values[i].push(r.value),
            None => {
                keys.push(key);
                values.push(vec![r.value]);
            }
        }
    }
    let mut rows: Vec<SummaryRow> = keys
        .into_iter()
        .zip(values)
        .map(|((method, size), v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                method,
                size,
                count: v.len(),
                mean,
                std,
            }
        })
        .collect();
    // Group by method, keeping the size order within each method.
    let order: Vec<Method> = {
        let mut o = Vec::new();
        for r in &rows {
            if !o.contains(&r.method) {
                o.push(r.method);
            }
        }
        o
    };
    rows.sort_by_key(|r| order.iter().position(|m| *m == r.method));
    rows
}

pub fn render(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:<14} {:>7} {:>8} {:>8}", "method", "size", "targets", "mean", "std");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<12} {:<14} {:>7} {:>8.4} {:>8.4}",
            r.method.as_str(),
            r.size.to_string(),
            r.count,
            r.mean,
            r.std
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use htl_core::harness::{Metric, Pairing, Setting};

    fn rec(method: Method, n: usize, value: f64) -> EvalRecord {
        EvalRecord {
            setting: Setting::Optimized,
            pairing: Pairing::IntactIntact,
            target: "t".into(),
            method,
            size: Size::Samples(n),
            metric: Metric::Balanced,
            value,
            seed: 0,
            c: 1.0,
            gamma: Some(1.0),
        }
    }

    #[test]
    fn groups_by_method_then_size() {
        let rows = summarize(&[
            rec(Method::MultiKt, 120, 0.5),
            rec(Method::NoTransfer, 120, 0.2),
            rec(Method::MultiKt, 240, 1.0),
            rec(Method::MultiKt, 120, 0.7),
        ]);
        let keys: Vec<_> = rows.iter().map(|r| (r.method, r.size.magnitude(), r.count)).collect();
        assert_eq!(keys, [(Method::MultiKt, 120, 2), (Method::MultiKt, 240, 1), (Method::NoTransfer, 120, 1)]);
        assert!((rows[0].mean - 0.6).abs() < 1e-15);
        assert!((rows[0].std - 0.02f64.sqrt()).abs() < 1e-15);
        assert_eq!(rows[1].std, 0.0);
        assert_eq!(render(&rows).lines().count(), 4);
    }
}
