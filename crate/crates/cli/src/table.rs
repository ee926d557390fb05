//! Method-by-metric comparison table over several quality reports.

use std::fmt::Write as _;

use pansharp_core::metrics::QualityReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Better {
    Lower,
    Higher,
}

const COLUMNS: [(&str, Better); 6] = [
    ("D_lambda", Better::Lower),
    ("D_s", Better::Lower),
    ("QNR", Better::Higher),
    ("SAM", Better::Lower),
    ("ERGAS", Better::Lower),
    ("SSIM", Better::Higher),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TableFormat {
    Markdown,
    Text,
}

/// A rendered table plus the warnings raised while building it.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub rendered: String,
    pub warnings: Vec<String>,
}

fn rounded(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn cell(mean: Option<f64>, std: Option<f64>) -> Option<String> {
    mean.map(|m| format!("{m:.4}±{:.4}", std.unwrap_or(0.0)))
}

/// One row per report; the best mean in each column (compared at four
/// decimals, ties included) is emphasized.
pub fn render(reports: &[QualityReport], format: TableFormat) -> Table {
    let means: Vec<[Option<f64>; 6]> = reports.iter().map(|r| r.mean.values()).collect();
    let stds: Vec<[Option<f64>; 6]> = reports.iter().map(|r| r.std.values()).collect();
    let mut warnings = Vec::new();
    for (r, m) in reports.iter().zip(&means) {
        for (c, (name, _)) in COLUMNS.iter().enumerate() {
            if m[c].is_none() {
                warnings.push(format!("{}: no {name} values", r.method));
            }
        }
    }
    let best: Vec<Option<f64>> = COLUMNS
        .iter()
        .enumerate()
        .map(|(c, (_, better))| {
            let vals = means.iter().filter_map(|m| m[c]).map(rounded);
            match better {
                Better::Lower => vals.reduce(f64::min),
                Better::Higher => vals.reduce(f64::max),
            }
        })
        .collect();

    let header: Vec<String> = std::iter::once("Method".to_string())
        .chain(COLUMNS.iter().map(|(n, _)| n.to_string()))
        .collect();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![r.method.clone()];
            for c in 0..COLUMNS.len() {
                let text = match cell(means[i][c], stds[i][c]) {
                    None => String::new(),
                    Some(t) if best[c].is_some() && means[i][c].map(rounded) == best[c] => match format {
                        TableFormat::Markdown => format!("**{t}**"),
                        TableFormat::Text => format!("*{t}"),
                    },
                    Some(t) => t,
                };
                row.push(text);
            }
            row
        })
        .collect();

    let mut out = String::new();
    match format {
        TableFormat::Markdown => {
            let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
            out.push_str(&line(&header));
            out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
            for row in &rows {
                out.push_str(&line(row));
            }
        }
        TableFormat::Text => {
            let widths: Vec<usize> = (0..header.len())
                .map(|c| {
                    std::iter::once(&header)
                        .chain(&rows)
                        .map(|r| r[c].chars().count())
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            for row in std::iter::once(&header).chain(&rows) {
                let cells: Vec<String> = row
                    .iter()
                    .zip(&widths)
                    .map(|(s, &w)| format!("{s}{}", " ".repeat(w - s.chars().count())))
                    .collect();
                let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            }
        }
    }
    Table { rendered: out, warnings }
}
