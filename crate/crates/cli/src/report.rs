//! The comparison report: one row per scenario, as CSV and as a table.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use studio_core::orchestrator::ScenarioOutcome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: String,
    /// The prompt both images were scored against.
    pub prompt: String,
    pub refined_prompt: String,
    pub initial_score: f64,
    pub inpainted_score: f64,
    pub delta: f64,
    pub generation: String,
    pub inpaint: String,
    pub segmenter: String,
    pub refiner: String,
    pub embedder: String,
    pub config_hash: String,
}

/// Column order of the CSV, matching the field order of [`ReportRow`].
pub const HEADER: [&str; 12] = [
    "scenario",
    "prompt",
    "refined_prompt",
    "initial_score",
    "inpainted_score",
    "delta",
    "generation",
    "inpaint",
    "segmenter",
    "refiner",
    "embedder",
    "config_hash",
];

impl From<&ScenarioOutcome> for ReportRow {
    fn from(o: &ScenarioOutcome) -> Self {
        Self {
            scenario: o.name.clone(),
            prompt: o.report.prompt_used.clone(),
            refined_prompt: o.refined_prompt.clone(),
            initial_score: o.report.initial_score,
            inpainted_score: o.report.inpainted_score,
            delta: o.report.delta,
            generation: o.backends.generation.clone(),
            inpaint: o.backends.inpaint.clone(),
            segmenter: o.backends.segmenter.clone(),
            refiner: o.backends.refiner.clone(),
            embedder: o.backends.embedder.clone(),
            config_hash: o.config_fingerprint.clone(),
        }
    }
}

/// Writes the header even when there are no rows.
pub fn write_csv<W: Write>(out: W, rows: &[ReportRow]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ReportRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Fixed-width table for terminals.
pub fn render_table(rows: &[ReportRow]) -> String {
    let name_width = rows.iter().map(|r| r.scenario.chars().count()).max().unwrap_or(0).max("scenario".len());
    let mut out = format!(
        "{:<name_width$}  {:>9}  {:>9}  {:>8}  refiner\n",
        "scenario", "initial", "inpainted", "delta"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<name_width$}  {:>9.3}  {:>9.3}  {:>+8.3}  {}\n",
            r.scenario, r.initial_score, r.inpainted_score, r.delta, r.refiner
        ));
    }
    let mut hashes: Vec<&str> = rows.iter().map(|r| r.config_hash.as_str()).collect();
    hashes.sort_unstable();
    hashes.dedup();
    for h in hashes {
        out.push_str(&format!("config {h}\n"));
    }
    out
}
