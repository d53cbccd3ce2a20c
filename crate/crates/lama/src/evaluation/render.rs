//! Plain-text table rendering for reports.

use super::{AblationConfig, EvalReport};

fn rule(width: usize) -> String {
    "-".repeat(width)
}

/// Render one report as aligned text tables.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("Samples: {}\n", report.n_samples));
    out.push_str(&format!("Config:  {}\n\n", report.config_fingerprint));

    out.push_str(&format!("{:<16} {:>8}\n", "Metric", "Value"));
    out.push_str(&format!("{}\n", rule(25)));
    out.push_str(&format!("{:<16} {:>8.3}\n", "Accuracy", report.accuracy));
    out.push_str(&format!("{:<16} {:>8.3}\n", "Macro-F1", report.macro_f1));
    for (k, value) in &report.precision_at {
        out.push_str(&format!(
            "{:<16} {:>8.3}\n",
            format!("Precision@{k}"),
            value
        ));
    }

    if let Some(bins) = &report.per_bin {
        out.push('\n');
        out.push_str(&format!(
            "{:<8} {:>8} {:>10} {:>10}\n",
            "Bin", "Samples", "Accuracy", "Macro-F1"
        ));
        out.push_str(&format!("{}\n", rule(40)));
        for (name, metrics) in [
            ("Head", &bins.head),
            ("Mid", &bins.mid),
            ("Tail", &bins.tail),
        ] {
            match metrics {
                Some(m) => out.push_str(&format!(
                    "{:<8} {:>8} {:>10.3} {:>10.3}\n",
                    name, m.samples, m.accuracy, m.macro_f1
                )),
                None => out.push_str(&format!("{:<8} {:>8} {:>10} {:>10}\n", name, "-", "-", "-")),
            }
        }
        if let Some(drop) = bins.relative_drop {
            out.push_str(&format!(
                "Relative drop (head to tail): {:.1}%\n",
                drop * 100.0
            ));
        }
    }

    if !report.confusion.pairs.is_empty() {
        out.push('\n');
        out.push_str(&format!(
            "{:<32} {:>6} {:>6}\n",
            "True -> Pred", "Count", "Same"
        ));
        out.push_str(&format!("{}\n", rule(46)));
        for pair in &report.confusion.pairs {
            let same = match pair.same_region {
                Some(true) => "yes",
                Some(false) => "",
                None => "-",
            };
            out.push_str(&format!(
                "{:<32} {:>6} {:>6}\n",
                format!("{} -> {}", pair.true_label, pair.predicted_label),
                pair.count,
                same
            ));
        }
        if let Some(rate) = report.confusion.region_match_rate {
            out.push_str(&format!("Region match rate: {rate:.3}\n"));
        }
    }

    if let Some(d) = &report.region_decomposition {
        out.push('\n');
        out.push_str(&format!("{:<24} {:>8}\n", "Region decomposition", "Share"));
        out.push_str(&format!("{}\n", rule(33)));
        out.push_str(&format!("{:<24} {:>8.3}\n", "Nat correct", d.nat_correct));
        out.push_str(&format!(
            "{:<24} {:>8.3}\n",
            "Nat wrong, reg correct", d.nat_wrong_region_correct
        ));
        out.push_str(&format!(
            "{:<24} {:>8.3}\n",
            "Nat wrong, reg wrong", d.nat_wrong_region_wrong
        ));
        out.push_str(&format!(
            "{:<24} {:>8.3}\n",
            "Region accuracy", d.region_accuracy
        ));
    }

    out.push('\n');
    out.push_str(&format!(
        "Calls: recall={} direct={} completion={} reprompts={} total={} mean/sample={:.2}\n",
        report.calls.recall_calls,
        report.calls.direct_calls,
        report.calls.completion_calls,
        report.calls.reprompts,
        report.calls.total,
        report.calls.mean_per_sample,
    ));
    out
}

/// Mean and sample standard deviation across runs of the same
/// configuration, in the shape used for multi-seed result tables.
pub fn render_mean_std(reports: &[EvalReport]) -> String {
    let stats = |values: Vec<f64>| -> (f64, f64) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        (mean, std)
    };

    let mut out = String::new();
    out.push_str(&format!("Runs: {}\n\n", reports.len()));
    out.push_str(&format!("{:<16} {:>8} {:>8}\n", "Metric", "Mean", "Std"));
    out.push_str(&format!("{}\n", rule(34)));
    let (mean, std) = stats(reports.iter().map(|r| r.accuracy).collect());
    out.push_str(&format!("{:<16} {:>8.3} {:>8.3}\n", "Accuracy", mean, std));
    let (mean, std) = stats(reports.iter().map(|r| r.macro_f1).collect());
    out.push_str(&format!("{:<16} {:>8.3} {:>8.3}\n", "Macro-F1", mean, std));

    let mut ks: Vec<usize> = reports
        .iter()
        .flat_map(|r| r.precision_at.keys().copied())
        .collect();
    ks.sort_unstable();
    ks.dedup();
    for k in ks {
        let values: Vec<f64> = reports
            .iter()
            .filter_map(|r| r.precision_at.get(&k).copied())
            .collect();
        if values.len() == reports.len() {
            let (mean, std) = stats(values);
            out.push_str(&format!(
                "{:<16} {:>8.3} {:>8.3}\n",
                format!("Precision@{k}"),
                mean,
                std
            ));
        }
    }
    out
}

/// Render the ablation comparison table with accuracy deltas vs. full.
pub fn render_ablation_table(rows: &[(AblationConfig, &EvalReport, Option<f64>)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<20} {:>9} {:>9} {:>7} {:>7} {:>8}\n",
        "Configuration", "Accuracy", "Macro-F1", "P@3", "P@5", "dAcc"
    ));
    out.push_str(&format!("{}\n", rule(64)));
    for (config, report, delta) in rows {
        let p3 = report
            .precision_at
            .get(&3)
            .map(|v| format!("{v:.3}"))
            .unwrap_or_else(|| "-".into());
        let p5 = report
            .precision_at
            .get(&5)
            .map(|v| format!("{v:.3}"))
            .unwrap_or_else(|| "-".into());
        let delta = match delta {
            Some(d) => format!("{d:+.3}"),
            None => "--".into(),
        };
        out.push_str(&format!(
            "{:<20} {:>9.3} {:>9.3} {:>7} {:>7} {:>8}\n",
            config.display_name(),
            report.accuracy,
            report.macro_f1,
            p3,
            p5,
            delta
        ));
    }
    out
}
