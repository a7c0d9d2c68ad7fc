//! Regeneration of the bundled reference tables and the diff against them.
//!
//! The reference values live in versioned CSV files under `data/`. Every
//! cell is recomputed from scratch by the exhaustive optimizer and compared:
//! probabilities at an absolute tolerance (default 1e-7, half an ulp of the
//! published five-decimal percentages), operators by exact tuple-form
//! equality, and counts under two conventions — the count at the listed
//! operator's scope and the count over the whole scanned universe — because
//! the published tables do not say which universe they mean. A cell whose
//! count matches neither convention is flagged in the diff artifact (with
//! the margin-free count as a hint) rather than silently absorbed, and does
//! not affect the exit status; probability or operator mismatches do.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{bail, Context};
use serde::Serialize;

use qpartial_core::optimizer::{optimize_one_stage, optimize_two_stage, OptimizationReport};
use qpartial_core::reduced::{grover_success, k_opt};
use qpartial_core::OperatorSequence;

const TABLE_ONE_STAGE_CSV: &str = include_str!("../data/table_one_stage.csv");
const TABLE_TWO_STAGE_CSV: &str = include_str!("../data/table_two_stage.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    OneStage,
    TwoStage,
}

impl TableKind {
    pub fn from_number(which: u8) -> anyhow::Result<TableKind> {
        match which {
            1 => Ok(TableKind::OneStage),
            2 => Ok(TableKind::TwoStage),
            other => bail!("no table {other}; pick 1 (one-stage) or 2 (two-stage)"),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            TableKind::OneStage => 1,
            TableKind::TwoStage => 2,
        }
    }

    /// Budget offsets of the two comparison columns relative to k_opt.
    fn budget_offsets(self) -> [u32; 2] {
        match self {
            TableKind::OneStage => [0, 1],
            TableKind::TwoStage => [1, 2],
        }
    }

    fn raw_csv(self) -> &'static str {
        match self {
            TableKind::OneStage => TABLE_ONE_STAGE_CSV,
            TableKind::TwoStage => TABLE_TWO_STAGE_CSV,
        }
    }
}

/// One published comparison cell. `None` fields are the NA cells.
#[derive(Debug, Clone)]
pub struct ReferenceCell {
    pub pr_pct: Option<f64>,
    pub operator: Option<String>,
    pub count: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct ReferenceRow {
    pub n: u32,
    pub k_opt: u32,
    pub grover_pct: f64,
    pub cells: [ReferenceCell; 2],
}

/// Parse a bundled reference CSV.
pub fn reference_rows(kind: TableKind) -> anyhow::Result<Vec<ReferenceRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(kind.raw_csv().as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.context("reading reference table")?;
        let field = |i: usize| -> anyhow::Result<&str> {
            record
                .get(i)
                .with_context(|| format!("reference row too short at column {i}"))
        };
        let cell = |base: usize| -> anyhow::Result<ReferenceCell> {
            let pr = field(base)?;
            if pr == "NA" {
                return Ok(ReferenceCell {
                    pr_pct: None,
                    operator: None,
                    count: None,
                });
            }
            Ok(ReferenceCell {
                pr_pct: Some(pr.parse()?),
                operator: Some(field(base + 1)?.to_string()),
                count: Some(field(base + 2)?.parse()?),
            })
        };
        rows.push(ReferenceRow {
            n: field(0)?.parse()?,
            k_opt: field(1)?.parse()?,
            grover_pct: field(2)?.parse()?,
            cells: [cell(3)?, cell(6)?],
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMatch {
    /// Matches the count at the listed operator's scope.
    PerM,
    /// Matches the count over the whole scanned universe.
    Total,
    Both,
    Neither,
    /// NA cell: no published count to match.
    NotApplicable,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellCheck {
    pub k_tot: u32,
    pub reference_pr_pct: Option<f64>,
    pub reference_operator: Option<String>,
    pub reference_count: Option<u64>,
    pub recomputed_pr_pct: f64,
    pub recomputed_operator: String,
    pub recomputed_best_m: u32,
    pub improvement_found: bool,
    pub counts_per_m: BTreeMap<u32, u64>,
    pub count_at_reference_m: Option<u64>,
    pub count_total: u64,
    /// Count over the same universe with the margin dropped (strictly above
    /// the baseline); reported when no convention matches, as a hint at the
    /// published criterion.
    pub margin_free_total: Option<u64>,
    pub probability_ok: bool,
    pub operator_ok: bool,
    pub count_match: CountMatch,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RowCheck {
    pub n: u32,
    pub k_opt_recomputed: u32,
    pub k_opt_reference: u32,
    pub grover_pct_recomputed: f64,
    pub grover_pct_reference: f64,
    pub grover_ok: bool,
    pub cells: Vec<CellCheck>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableReport {
    pub table: u8,
    pub kind: TableKind,
    pub margin: f64,
    pub tolerance: f64,
    pub rows: Vec<RowCheck>,
    /// Human-readable summaries of count cells matching neither convention.
    pub count_issues: Vec<String>,
    /// Probability, operator, NA and k_opt checks all green. Count-convention
    /// mismatches are reported above but do not fail the table.
    pub pass: bool,
}

/// Recompute one table and diff it against the bundled reference values.
pub fn regenerate(kind: TableKind, margin: f64, tolerance: f64) -> anyhow::Result<TableReport> {
    let mut rows = Vec::new();
    let mut count_issues = Vec::new();
    for reference in reference_rows(kind)? {
        let n = reference.n;
        let k_opt_recomputed = k_opt(n)?;
        let grover_pct_recomputed = 100.0 * grover_success(n, k_opt_recomputed)?;
        let grover_ok = k_opt_recomputed == reference.k_opt
            && (grover_pct_recomputed - reference.grover_pct).abs() <= 100.0 * tolerance;

        let mut cells = Vec::new();
        for (offset, ref_cell) in kind.budget_offsets().iter().zip(&reference.cells) {
            let k_tot = reference.k_opt + offset;
            let cell = check_cell(kind, n, k_tot, ref_cell, margin, tolerance)?;
            if cell.count_match == CountMatch::Neither {
                count_issues.push(format!(
                    "n={n} k_tot={k_tot}: published count {} matches neither convention \
                     (at listed scope: {}, total: {}, margin-free total: {})",
                    ref_cell.count.unwrap_or(0),
                    cell.count_at_reference_m.unwrap_or(0),
                    cell.count_total,
                    cell.margin_free_total.unwrap_or(0),
                ));
            }
            cells.push(cell);
        }
        let pass = grover_ok && cells.iter().all(|c| c.pass);
        rows.push(RowCheck {
            n,
            k_opt_recomputed,
            k_opt_reference: reference.k_opt,
            grover_pct_recomputed,
            grover_pct_reference: reference.grover_pct,
            grover_ok,
            cells,
            pass,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(TableReport {
        table: kind.number(),
        kind,
        margin,
        tolerance,
        rows,
        count_issues,
        pass,
    })
}

fn scan(kind: TableKind, n: u32, k_tot: u32, margin: f64) -> anyhow::Result<OptimizationReport> {
    Ok(match kind {
        TableKind::OneStage => {
            let m_set: Vec<u32> = (1..n).collect();
            optimize_one_stage(n, k_tot, &m_set, margin)?
        }
        TableKind::TwoStage => optimize_two_stage(n, k_tot, 2, margin)?,
    })
}

/// Improvement count over the FULL universe of a cell: for the one-stage
/// table that is the all-m total; for the two-stage table the m=2 count
/// plus, when the budget allows a four-qubit second stage, the m=4 count.
fn universe_total(kind: TableKind, n: u32, k_tot: u32, margin: f64, report: &OptimizationReport) -> anyhow::Result<u64> {
    match kind {
        TableKind::OneStage => Ok(report.counts.total),
        TableKind::TwoStage => {
            let mut total = report.counts.total;
            if k_tot > 4 && n > 4 {
                total += optimize_two_stage(n, k_tot, 4, margin)?.counts.total;
            }
            Ok(total)
        }
    }
}

fn check_cell(
    kind: TableKind,
    n: u32,
    k_tot: u32,
    reference: &ReferenceCell,
    margin: f64,
    tolerance: f64,
) -> anyhow::Result<CellCheck> {
    let report = scan(kind, n, k_tot, margin)?;
    let recomputed_pr_pct = 100.0 * report.best.probability;
    let count_total = universe_total(kind, n, k_tot, margin, &report)?;
    let improvement_found = count_total > 0;

    let (probability_ok, operator_ok, count_match, count_at_reference_m, margin_free_total);
    match (&reference.pr_pct, &reference.operator, &reference.count) {
        (Some(pr_pct), Some(operator), Some(count)) => {
            probability_ok = (recomputed_pr_pct - pr_pct).abs() <= 100.0 * tolerance;
            operator_ok = &report.best.tuple_form == operator;
            let reference_m = OperatorSequence::parse_tuple(operator)
                .with_context(|| format!("reference operator {operator}"))?
                .m();
            let at_m = report.counts.per_m.get(&reference_m).copied().unwrap_or(0);
            count_at_reference_m = Some(at_m);
            count_match = match (at_m == *count, count_total == *count) {
                (true, true) => CountMatch::Both,
                (true, false) => CountMatch::PerM,
                (false, true) => CountMatch::Total,
                (false, false) => CountMatch::Neither,
            };
            margin_free_total = if count_match == CountMatch::Neither {
                let free = scan(kind, n, k_tot, f64::MIN_POSITIVE)?;
                Some(universe_total(kind, n, k_tot, f64::MIN_POSITIVE, &free)?)
            } else {
                None
            };
        }
        _ => {
            // NA cell: the recomputation must find nothing above the
            // baseline either.
            probability_ok = !improvement_found;
            operator_ok = !improvement_found;
            count_match = CountMatch::NotApplicable;
            count_at_reference_m = None;
            margin_free_total = None;
        }
    }

    Ok(CellCheck {
        k_tot,
        reference_pr_pct: reference.pr_pct,
        reference_operator: reference.operator.clone(),
        reference_count: reference.count,
        recomputed_pr_pct,
        recomputed_operator: report.best.tuple_form.clone(),
        recomputed_best_m: report.best.m,
        improvement_found,
        counts_per_m: report.counts.per_m.clone(),
        count_at_reference_m,
        count_total,
        margin_free_total,
        probability_ok,
        operator_ok,
        count_match,
        pass: probability_ok && operator_ok,
    })
}

impl TableReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The recomputed table in the same column layout as the reference CSV.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let stage_label = match self.kind {
            TableKind::OneStage => "operator",
            TableKind::TwoStage => "first_stage",
        };
        let offsets = self.kind.budget_offsets();
        w.write_record([
            "n".to_string(),
            "k_opt".to_string(),
            "grover_pr_pct".to_string(),
            format!("kopt{}_pr_pct", suffix(offsets[0])),
            format!("kopt{}_{stage_label}", suffix(offsets[0])),
            format!("kopt{}_count", suffix(offsets[0])),
            format!("kopt{}_pr_pct", suffix(offsets[1])),
            format!("kopt{}_{stage_label}", suffix(offsets[1])),
            format!("kopt{}_count", suffix(offsets[1])),
        ])
        .expect("csv header");
        for row in &self.rows {
            let mut record = vec![
                row.n.to_string(),
                row.k_opt_recomputed.to_string(),
                format!("{:.5}", row.grover_pct_recomputed),
            ];
            for cell in &row.cells {
                if cell.improvement_found {
                    record.push(format!("{:.5}", cell.recomputed_pr_pct));
                    record.push(cell.recomputed_operator.clone());
                    record.push(cell.count_total.to_string());
                } else {
                    record.extend(["NA".to_string(), "NA".to_string(), "NA".to_string()]);
                }
            }
            w.write_record(&record).expect("csv row");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8 csv")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "table {} ({:?}): tolerance {:.1e} (probability), margin {:.1e}",
            self.table, self.kind, self.tolerance, self.margin
        );
        for row in &self.rows {
            let _ = writeln!(
                out,
                "n={} k_opt={} grover={:.5}% (ref {:.5}%) {}",
                row.n,
                row.k_opt_recomputed,
                row.grover_pct_recomputed,
                row.grover_pct_reference,
                status(row.grover_ok)
            );
            for cell in &row.cells {
                match (&cell.reference_pr_pct, &cell.reference_operator) {
                    (Some(pr), Some(op)) => {
                        let _ = writeln!(
                            out,
                            "  k_tot={:<2} best {} = {:.5}%  [ref {} = {:.5}%]  pr:{} op:{} count:{:?} \
                             (at_m={} total={} ref={})",
                            cell.k_tot,
                            cell.recomputed_operator,
                            cell.recomputed_pr_pct,
                            op,
                            pr,
                            status(cell.probability_ok),
                            status(cell.operator_ok),
                            cell.count_match,
                            cell.count_at_reference_m.unwrap_or(0),
                            cell.count_total,
                            cell.reference_count.unwrap_or(0),
                        );
                    }
                    _ => {
                        let _ = writeln!(
                            out,
                            "  k_tot={:<2} no improvement found (NA) [ref NA] {}",
                            cell.k_tot,
                            status(cell.pass)
                        );
                    }
                }
            }
        }
        for issue in &self.count_issues {
            let _ = writeln!(out, "count note: {issue}");
        }
        let _ = writeln!(out, "result: {}", if self.pass { "PASS" } else { "FAIL" });
        out
    }
}

fn suffix(offset: u32) -> String {
    if offset == 0 {
        String::new()
    } else {
        offset.to_string()
    }
}

fn status(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "MISMATCH"
    }
}
