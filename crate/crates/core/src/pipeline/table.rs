//! Aligned text result tables:
//! one block per perturbation setting, rows epsilon_p, columns N.

use std::fmt::Write as _;
use std::str::FromStr;

use super::report::SummaryRow;
use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    /// Delta on one line, accuracy on poisoned data beneath it.
    Delta,
    /// Accuracy on poisoned data only.
    Accuracy,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "delta" => Ok(Metric::Delta),
            "accuracy" => Ok(Metric::Accuracy),
            other => Err(Error::InvalidParameter(format!("unknown metric `{other}`"))),
        }
    }
}

fn block_title(r: &SummaryRow) -> String {
    let mut t = r.perturbation.to_string();
    if let Some(ef) = r.epsilon_f {
        t += &format!(" (epsilon_f = {ef})");
    }
    if r.data_percent != 100.0 {
        t += &format!(" |D| = {}%", r.data_percent);
    }
    if r.feature_percent != 100.0 {
        t += &format!(" |f| = {}%", r.feature_percent);
    }
    t
}

/// Renders summary rows as text. The monolithic model is the `N=1` column.
pub fn render_tables(rows: &[SummaryRow], metric: Metric) -> String {
    let mut blocks: Vec<(String, Vec<&SummaryRow>)> = Vec::new();
    for r in rows {
        let title = block_title(r);
        match blocks.iter_mut().find(|(t, _)| *t == title) {
            Some((_, members)) => members.push(r),
            None => blocks.push((title, vec![r])),
        }
    }

    const W: usize = 9;
    let mut out = String::new();
    for (title, members) in blocks {
        let mut ns: Vec<usize> = vec![1];
        let mut eps: Vec<f64> = Vec::new();
        for r in &members {
            if !ns.contains(&r.n_models) {
                ns.push(r.n_models);
            }
            if !eps.contains(&r.epsilon_p) {
                eps.push(r.epsilon_p);
            }
        }
        ns[1..].sort_unstable();

        let _ = writeln!(out, "{title}");
        let mut header = format!("{:>W$}", "eps_p");
        for n in &ns {
            let _ = write!(header, " {:>W$}", format!("N={n}"));
        }
        let _ = writeln!(out, "{header}");
        let _ = writeln!(out, "{}", "-".repeat(header.len()));

        for ep in eps {
            let at = |n: usize| -> Option<(f64, f64)> {
                if n == 1 {
                    members
                        .iter()
                        .find(|r| r.epsilon_p == ep)
                        .map(|r| (r.mono_delta, r.mono_acc_poisoned))
                } else {
                    members
                        .iter()
                        .find(|r| r.epsilon_p == ep && r.n_models == n)
                        .map(|r| (r.ens_delta, r.ens_acc_poisoned))
                }
            };
            let cells: Vec<Option<(f64, f64)>> = ns.iter().map(|&n| at(n)).collect();
            let line = |label: String, pick: &dyn Fn((f64, f64)) -> f64| {
                let mut s = format!("{label:>W$}");
                for c in &cells {
                    let text = c.map_or("-".to_string(), |v| format!("{:.3}", pick(v)));
                    let _ = write!(s, " {text:>W$}");
                }
                s
            };
            match metric {
                Metric::Delta => {
                    let _ = writeln!(out, "{}", line(ep.to_string(), &|v| v.0));
                    let _ = writeln!(out, "{}", line(String::new(), &|v| v.1));
                }
                Metric::Accuracy => {
                    let _ = writeln!(out, "{}", line(ep.to_string(), &|v| v.1));
                }
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poison::Perturbation;

    fn row(ep: f64, n: usize, mono: (f64, f64), ens: (f64, f64)) -> SummaryRow {
        SummaryRow {
            perturbation: Perturbation::LabelFlipping,
            epsilon_p: ep,
            epsilon_f: None,
            n_models: n,
            data_percent: 100.0,
            feature_percent: 100.0,
            repetitions: 5,
            train_size: 2900,
            test_size: 724,
            n_features: 57,
            mono_acc_clean: mono.0,
            mono_acc_poisoned: mono.1,
            mono_delta: mono.1 - mono.0,
            ens_acc_clean: ens.0,
            ens_acc_poisoned: ens.1,
            ens_delta: ens.1 - ens.0,
        }
    }

    #[test]
    fn delta_table_layout() {
        let rows = vec![
            row(10.0, 3, (94.0, 92.0), (91.0, 91.5)),
            row(10.0, 21, (94.0, 92.0), (90.0, 90.0)),
            row(35.0, 3, (94.0, 77.0), (91.0, 85.0)),
            row(35.0, 21, (94.0, 77.0), (90.0, 90.25)),
        ];
        let text = render_tables(&rows, Metric::Delta);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "label-flipping");
        assert!(lines[1].contains("N=1") && lines[1].contains("N=3") && lines[1].contains("N=21"));
        assert!(lines[3].trim_start().starts_with("10"));
        assert!(lines[3].contains("-2.000") && lines[3].contains("0.500") && lines[3].contains("0.000"));
        assert!(lines[4].contains("92.000") && lines[4].contains("91.500"));
        assert!(lines[5].contains("-17.000") && lines[5].contains("0.250"));
        assert_eq!(lines.len(), 8);
    }

    #[test]
    fn accuracy_table_is_a_projection() {
        let rows = vec![row(10.0, 3, (94.0, 92.0), (91.0, 91.5))];
        let text = render_tables(&rows, Metric::Accuracy);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[3].contains("92.000") && lines[3].contains("91.500"));
        assert!(!lines[3].contains("-2.000"));
    }

    #[test]
    fn metric_names() {
        assert_eq!("delta".parse::<Metric>().unwrap(), Metric::Delta);
        assert_eq!("accuracy".parse::<Metric>().unwrap(), Metric::Accuracy);
        assert!("acc".parse::<Metric>().is_err());
    }
}
