//! Rendering a diagnosis as a two-column Finding / Action table.

use std::collections::HashSet;
use std::path::Path;

use mlfix_core::artifact::codec::decode;
use mlfix_core::artifact::{Action, Diagnosis, Evidence, RankedFinding, Severity};
use mlfix_core::checks::{fmt4, registry};

use crate::error::CliError;

pub const NO_ISSUES: &str = "No significant issues detected";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum ReportFormat {
    #[default]
    Markdown,
    Plain,
}

pub fn read_diagnosis(path: &Path) -> Result<Diagnosis, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))
}

struct Row<'a> {
    finding: &'a RankedFinding,
    action: Option<&'a Action>,
}

/// Findings at low severity or above, each paired with the first action
/// linked to it that no earlier row has shown.
fn rows(d: &Diagnosis) -> Vec<Row<'_>> {
    let mut shown = HashSet::new();
    d.ranked_findings
        .iter()
        .filter(|rf| rf.finding.severity.at_least(Severity::Low))
        .map(|rf| {
            let id = &rf.finding.finding_id;
            let action = d
                .actions
                .iter()
                .enumerate()
                .find(|(i, a)| a.linked_findings.contains(id) && !shown.contains(i))
                .map(|(i, a)| {
                    shown.insert(i);
                    a
                });
            Row { finding: rf, action }
        })
        .collect()
}

fn headline(description: &str) -> &str {
    let end = description
        .find(": ")
        .or_else(|| description.find(". "))
        .unwrap_or(description.len());
    description[..end].trim_end_matches('.')
}

fn metric_label(metric: &str) -> String {
    match metric {
        "cramers_v" => "Cramer's V".into(),
        "ks_statistic" => "KS statistic".into(),
        "auc" => "AUC".into(),
        "ece" => "ECE".into(),
        other => other.replace('_', " "),
    }
}

fn evidence_line(evidence: &[Evidence]) -> String {
    evidence
        .iter()
        .map(|e| format!("{}: {} {}", registry::title(&e.check_id), metric_label(&e.metric), fmt4(e.value)))
        .collect::<Vec<_>>()
        .join("; ")
}

fn consensus_line(d: &Diagnosis) -> String {
    let c = &d.consensus;
    if c.samples == 0 {
        return "Consensus: none (rule-based diagnosis)".into();
    }
    format!(
        "Consensus: {} samples, agreement {}, root cause {}",
        c.samples,
        fmt4(c.agreement),
        c.root_cause_category.as_deref().unwrap_or("unknown")
    )
}

fn cell(text: &str) -> String {
    text.replace('|', "\\|").replace('\n', "<br>")
}

fn markdown(d: &Diagnosis) -> String {
    let mut out = String::from("# Diagnosis\n\n");
    if d.degraded {
        out.push_str("> Degraded: some stages fell back to rule-based output.\n\n");
    }
    let rows = rows(d);
    if rows.is_empty() {
        out.push_str(&format!("**{NO_ISSUES}.**\n\n{}\n", consensus_line(d)));
        return out;
    }
    out.push_str("| Finding | Action |\n| --- | --- |\n");
    for row in rows {
        let f = &row.finding.finding;
        let mut left = format!("**{}** ({})", cell(headline(&f.description)), f.severity.as_str());
        if !f.evidence.is_empty() {
            left.push_str(&format!("<br>*Evidence. {}*", cell(&evidence_line(&f.evidence))));
        }
        let right = match row.action {
            Some(a) => format!("**{}**<br>{}", cell(&a.action), cell(&a.rationale)),
            None => String::new(),
        };
        out.push_str(&format!("| {left} | {right} |\n"));
    }
    out.push_str(&format!("\n{}\n", consensus_line(d)));
    out
}

fn plain(d: &Diagnosis) -> String {
    let mut out = String::from("DIAGNOSIS");
    if d.degraded {
        out.push_str(" (degraded, rule-based fallback)");
    }
    out.push_str("\n\n");
    let rows = rows(d);
    if rows.is_empty() {
        out.push_str(&format!("{NO_ISSUES}.\n\n{}\n", consensus_line(d)));
        return out;
    }
    for (i, row) in rows.iter().enumerate() {
        let f = &row.finding.finding;
        out.push_str(&format!(
            "{}. [{}] {}\n",
            i + 1,
            f.severity.as_str().to_uppercase(),
            headline(&f.description)
        ));
        if !f.evidence.is_empty() {
            out.push_str(&format!("   Evidence: {}\n", evidence_line(&f.evidence)));
        }
        if let Some(a) = row.action {
            out.push_str(&format!("   Action:   {}\n   Why:      {}\n", a.action, a.rationale));
        }
        out.push('\n');
    }
    out.push_str(&consensus_line(d));
    out.push('\n');
    out
}

pub fn render_report(diagnosis: &Diagnosis, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => markdown(diagnosis),
        ReportFormat::Plain => plain(diagnosis),
    }
}
