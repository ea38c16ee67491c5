//! Iteration-by-run error tables.

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::config::Format;

/// One run's errors, starting at the first outer iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorColumn {
    pub label: String,
    pub errors: Vec<f64>,
}

/// Renders `columns` side by side, one row per iteration. Shorter columns
/// leave blank cells. CSV and JSON keep full precision; markdown uses four
/// significant digits.
pub fn emit_table(columns: &[ErrorColumn], format: Format) -> Result<String> {
    let rows = columns.iter().map(|c| c.errors.len()).max().unwrap_or(0);
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(columns)?),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(std::iter::once("iter").chain(columns.iter().map(|c| c.label.as_str())))?;
            for i in 0..rows {
                let mut rec = vec![(i + 1).to_string()];
                rec.extend(columns.iter().map(|c| c.errors.get(i).map(|e| format!("{e:e}")).unwrap_or_default()));
                w.write_record(&rec)?;
            }
            let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Markdown => {
            let mut out = String::from("| Iter |");
            for c in columns {
                out.push_str(&format!(" {} |", c.label.replace('|', "\\|")));
            }
            out.push_str("\n|---:|");
            out.push_str(&"---:|".repeat(columns.len()));
            out.push('\n');
            for i in 0..rows {
                out.push_str(&format!("| {} |", i + 1));
                for c in columns {
                    match c.errors.get(i) {
                        Some(e) => out.push_str(&format!(" {e:.3e} |")),
                        None => out.push_str("  |"),
                    }
                }
                out.push('\n');
            }
            Ok(out)
        }
    }
}

/// Inverse of the JSON rendering.
pub fn parse_table_json(text: &str) -> Result<Vec<ErrorColumn>> {
    Ok(serde_json::from_str(text)?)
}
