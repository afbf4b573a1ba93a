//! `tsqlab report`: one table over the ensemble hierarchy, filled from run
//! manifests.

use std::fmt::Write;
use std::path::Path;

use crate::commands::{Artifact, Outcome, Status};
use crate::error::{HarnessError, Result};
use crate::manifest::Manifest;

/// Rows of the table: level, description.
pub const LEVELS: [(&str, &str); 5] = [
    ("E0", "unweighted paths"),
    ("E1", "action-weighted paths at fixed boundary"),
    ("E2", "boundary-averaged mixtures"),
    ("E3", "mixtures matched to an initial Q-function"),
    ("Q", "Husimi evolution against the forward equation"),
];

pub fn load_manifests(paths: &[String]) -> Result<Vec<Manifest>> {
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(Path::new(p)).map_err(|e| HarnessError::Config(format!("{p}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{p}: not a run manifest: {e}")))
        })
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn run(manifests: &[Manifest]) -> Result<Outcome> {
    let mut csv = String::from("level,description,runs,checks,status\n");
    let mut txt = String::from("Ensemble hierarchy\n\n");
    let mut failed = false;
    for (level, description) in LEVELS {
        let runs: Vec<&Manifest> = manifests.iter().filter(|m| m.ensemble == level).collect();
        let status = if runs.is_empty() {
            "not-run"
        } else if runs.iter().any(|m| m.status == "fail") {
            failed = true;
            "fail"
        } else if runs.iter().all(|m| m.status == "neutral") {
            "neutral"
        } else {
            "pass"
        };
        let checks: Vec<String> = runs.iter().map(|m| format!("{}:{}", m.command, m.status)).collect();
        let _ = writeln!(csv, "{level},{},{},{},{status}", csv_field(description), runs.len(), csv_field(&checks.join(" ")));
        let _ = writeln!(txt, "{level:<3} {description:<48} {status}");
        for m in runs {
            let _ = writeln!(txt, "      {} [{}] {}", m.command, m.status, m.summary);
        }
    }
    let status = if failed { Status::Neutral } else { Status::Pass };
    Ok(Outcome {
        status,
        summary: format!("{} manifests{}", manifests.len(), if failed { ", some checks failed" } else { "" }),
        ensemble: "summary",
        artifacts: vec![Artifact::new("report.csv", csv), Artifact::new("report.txt", txt)],
    })
}
