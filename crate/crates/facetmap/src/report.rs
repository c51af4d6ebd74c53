//! Tabular facet reports, as markdown or CSV.

use std::fmt::Write as _;

use facetmap_core::FacetStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum OutputFormat {
    #[default]
    Markdown,
    Csv,
}

pub const ANALYSIS_COLUMNS: [&str; 9] = [
    "facet",
    "coverage",
    "entropy",
    "meanCard",
    "explorationCost",
    "balance",
    "cardinalityMetric",
    "frequency",
    "navigationQuality",
];

pub const COMPARISON_COLUMNS: [&str; 4] = [
    "facet",
    "explorationCost",
    "navigationQuality",
    "navigationQualityComplement",
];

/// Four decimals, switching to scientific notation for tiny non-zero values
/// so underflowing qualities stay readable (`9.99E-67`).
pub fn format_number(x: f64) -> String {
    if x != 0.0 && x.abs() < 5e-5 {
        format!("{x:.2E}")
    } else {
        format!("{x:.4}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render(format: OutputFormat, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    match format {
        OutputFormat::Csv => {
            out.push_str(&header.join(","));
            out.push('\n');
            for row in rows {
                let fields: Vec<String> = row.iter().map(|f| csv_field(f)).collect();
                out.push_str(&fields.join(","));
                out.push('\n');
            }
        }
        OutputFormat::Markdown => {
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let rule: Vec<&str> = header.iter().map(|_| "---").collect();
            let _ = writeln!(out, "| {} |", rule.join(" | "));
            for row in rows {
                let cells: Vec<String> = row.iter().map(|c| c.replace('|', "\\|")).collect();
                let _ = writeln!(out, "| {} |", cells.join(" | "));
            }
        }
    }
    out
}

pub fn analysis_table(stats: &[FacetStats], format: OutputFormat) -> String {
    let rows: Vec<Vec<String>> = stats
        .iter()
        .map(|s| {
            let mut row = vec![s.facet_key.clone()];
            row.extend(
                [
                    s.coverage,
                    s.entropy_bits,
                    s.mean_cardinality,
                    s.exploration_cost,
                    s.navigation.balance,
                    s.navigation.cardinality,
                    s.navigation.frequency,
                    s.navigation_quality,
                ]
                .map(format_number),
            );
            row
        })
        .collect();
    render(format, &ANALYSIS_COLUMNS, &rows)
}

pub fn comparison_table(stats: &[FacetStats], format: OutputFormat) -> String {
    let rows: Vec<Vec<String>> = stats
        .iter()
        .map(|s| {
            vec![
                s.facet_key.clone(),
                format_number(s.exploration_cost),
                format_number(s.navigation_quality),
                format_number(1.0 - s.navigation_quality),
            ]
        })
        .collect();
    render(format, &COMPARISON_COLUMNS, &rows)
}
