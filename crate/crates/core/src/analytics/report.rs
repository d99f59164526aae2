//! CSV tables and the markdown report.

use std::fmt::Write as _;
use std::path::Path;

use super::modes::{ModeMatrix, SignatureCensus};
use super::sets::{ExclusivityPoint, OverlapRow};
use super::{AnalyticsError, SummaryRow};
use crate::solvers::SolverKind;

/// Writes a header and rows; every field is already formatted.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), AnalyticsError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn f(x: f64) -> String {
    format!("{x}")
}

pub fn write_summary_csv(path: &Path, rows: &[(SolverKind, usize, SummaryRow)]) -> Result<(), AnalyticsError> {
    let header = [
        "method",
        "seeds",
        "max",
        "mean",
        "std",
        "rare",
        "t10_mu",
        "t10_sd",
        "unique_layouts",
        "auc",
        "hamming",
        "entropy",
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(k, n, r)| {
            vec![
                k.label().to_string(),
                n.to_string(),
                f(r.max),
                f(r.mean),
                f(r.std),
                f(r.rare),
                f(r.t10_mu),
                f(r.t10_sd),
                r.unique_layouts.to_string(),
                f(r.auc),
                f(r.hamming),
                f(r.entropy),
            ]
        })
        .collect();
    write_csv(path, &header, &body)
}

pub fn write_exclusivity_csv(
    path: &Path,
    curves: &[(SolverKind, Vec<ExclusivityPoint>)],
) -> Result<(), AnalyticsError> {
    let body: Vec<Vec<String>> = curves
        .iter()
        .flat_map(|(k, pts)| pts.iter().map(move |p| vec![k.label().to_string(), p.t.to_string(), f(p.excl)]))
        .collect();
    write_csv(path, &["method", "t", "exclusivity"], &body)
}

/// `rows` are `(fixed, against, seed, row)`.
pub fn write_overlap_csv(
    path: &Path,
    rows: &[(SolverKind, SolverKind, u64, OverlapRow)],
) -> Result<(), AnalyticsError> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(a, b, seed, r)| {
            vec![
                a.label().to_string(),
                b.label().to_string(),
                seed.to_string(),
                r.snapshot.to_string(),
                r.t.to_string(),
                r.exclusive_a.to_string(),
                r.common.to_string(),
                r.exclusive_b.to_string(),
            ]
        })
        .collect();
    write_csv(
        path,
        &["fixed", "against", "seed", "snapshot", "t", "exclusive_fixed", "common", "exclusive_against"],
        &body,
    )
}

pub fn write_modes_csv(path: &Path, m: &ModeMatrix) -> Result<(), AnalyticsError> {
    let mut body = Vec::new();
    for (i, row) in m.names.iter().enumerate() {
        for (j, col) in m.names.iter().enumerate() {
            let c = m.cells[i][j];
            body.push(vec![
                row.clone(),
                col.clone(),
                c.shared.to_string(),
                c.row_exclusive.to_string(),
                c.col_exclusive.to_string(),
                f(m.win_rates[i]),
            ]);
        }
    }
    write_csv(path, &["row", "col", "shared", "row_exclusive", "col_exclusive", "row_win_rate"], &body)
}

pub fn write_signature_csv(path: &Path, c: &SignatureCensus) -> Result<(), AnalyticsError> {
    let mut header = vec!["method"];
    header.extend(c.components.iter().map(String::as_str));
    let body: Vec<Vec<String>> = c
        .rows
        .iter()
        .map(|(k, counts)| std::iter::once(k.label().to_string()).chain(counts.iter().map(|n| n.to_string())).collect())
        .collect();
    write_csv(path, &header, &body)
}

/// Tables to assemble into one markdown document.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub summary: Option<Vec<(SolverKind, usize, SummaryRow)>>,
    pub exclusivity: Option<Vec<(SolverKind, Vec<ExclusivityPoint>)>>,
    pub overlap: Option<Vec<(SolverKind, SolverKind, u64, OverlapRow)>>,
    pub modes: Option<ModeMatrix>,
    pub signatures: Option<SignatureCensus>,
}

fn table(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out.push('\n');
}

fn s(x: &str) -> String {
    x.to_string()
}

pub fn markdown_report(r: &Report) -> String {
    let mut out = String::from("# Risk discovery report\n\n");
    if let Some(rows) = &r.summary {
        out.push_str("## Summary\n\n");
        let header: Vec<String> =
            ["Method", "Max", "Mean", "Std", "Rare", "T10 mu", "T10 sd", "UL", "AUC", "Ham", "Ent"].map(s).to_vec();
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|(k, _, r)| {
                vec![
                    s(k.label()),
                    format!("{:.3}", r.max),
                    format!("{:.3}", r.mean),
                    format!("{:.3}", r.std),
                    format!("{:.3}", r.rare),
                    format!("{:.3}", r.t10_mu),
                    format!("{:.3}", r.t10_sd),
                    r.unique_layouts.to_string(),
                    format!("{:.3}", r.auc),
                    format!("{:.3}", r.hamming),
                    format!("{:.3}", r.entropy),
                ]
            })
            .collect();
        table(&mut out, &header, &body);
    }
    if let Some(curves) = &r.exclusivity {
        out.push_str("## Exclusivity at full budget\n\n");
        let body: Vec<Vec<String>> = curves
            .iter()
            .filter_map(|(k, pts)| pts.last().map(|p| vec![s(k.label()), p.t.to_string(), format!("{:.3}", p.excl)]))
            .collect();
        table(&mut out, &["Method", "t", "Excl"].map(s), &body);
    }
    if let Some(rows) = &r.overlap {
        out.push_str("## Cross-temporal overlap\n\n");
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|(a, b, seed, r)| {
                vec![
                    format!("{} vs {}", a.label(), b.label()),
                    seed.to_string(),
                    r.snapshot.to_string(),
                    r.t.to_string(),
                    r.exclusive_a.to_string(),
                    r.common.to_string(),
                    r.exclusive_b.to_string(),
                ]
            })
            .collect();
        table(&mut out, &["Pair", "Seed", "Snapshot", "t", "Excl fixed", "Common", "Excl against"].map(s), &body);
    }
    if let Some(m) = &r.modes {
        let _ = writeln!(out, "## Core risk modes ({} distinct)\n", m.total_modes());
        out.push_str("Cells are Shared/Row/Col.\n\n");
        let mut header = vec![s("")];
        header.extend(m.names.iter().cloned());
        header.push(s("Win rate"));
        let body: Vec<Vec<String>> = m
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let mut row = vec![n.clone()];
                row.extend(m.cells[i].iter().enumerate().map(|(j, c)| {
                    if i == j {
                        "-".to_string()
                    } else {
                        format!("{}/{}/{}", c.shared, c.row_exclusive, c.col_exclusive)
                    }
                }));
                row.push(format!("{:.2}", m.win_rates[i]));
                row
            })
            .collect();
        table(&mut out, &header, &body);
        let body: Vec<Vec<String>> = m
            .census
            .iter()
            .map(|c| vec![format!("`{}`", c.mode), c.discovered_by.len().to_string(), format!("{:.2}", c.fraction)])
            .collect();
        table(&mut out, &["Mode", "Methods", "Fraction"].map(s), &body);
    }
    if let Some(c) = &r.signatures {
        out.push_str("## Signature counts\n\n");
        let mut header = vec![s("Method")];
        header.extend(c.components.iter().cloned());
        let body: Vec<Vec<String>> = c
            .rows
            .iter()
            .map(|(k, counts)| std::iter::once(s(k.label())).chain(counts.iter().map(|n| n.to_string())).collect())
            .collect();
        table(&mut out, &header, &body);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::super::*;

    #[test]
    fn summary_csv_has_one_row_per_solver() {
        let o = oracle();
        let archives = vec![
            archive_of(&o, SolverKind::Random, 0, &configs(0..20)),
            archive_of(&o, SolverKind::Random, 1, &configs(20..40)),
            archive_of(&o, SolverKind::Sa, 0, &configs(40..60)),
        ];
        let rows = summary_table(&archives, o.schema()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        write_summary_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("Random,2,"));
        let report = markdown_report(&Report { summary: Some(rows), ..Default::default() });
        assert!(report.contains("| SA |"));
    }
}
