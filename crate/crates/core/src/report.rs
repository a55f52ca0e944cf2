//! Evaluation reports: multi-domain BLEU matrices, data-budget ratios between
//! two improvement curves, and per-tier collection-time summaries.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::bleu::{corpus_bleu, BleuConfig};
use crate::corpus::DomainTag;
use crate::translate::Direction;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("row `{row}` has no hypothesis for column {column}")]
    MissingHypothesis { row: String, column: String },
    #[error("row `{row}`, column {column}: {hyp_lines} hypothesis lines vs {ref_lines} reference lines")]
    LineCountMismatch {
        row: String,
        column: String,
        hyp_lines: usize,
        ref_lines: usize,
    },
    #[error("row `{row}`, column {column}: {reason}")]
    Cell { row: String, column: String, reason: String },
    #[error("invalid curve `{label}`: {reason}")]
    InvalidCurve { label: String, reason: String },
    #[error("target BLEU {target} is below the first point of both curves")]
    TargetBelowCurves { target: f64 },
    #[error("target BLEU {target} is not reached by either curve")]
    TargetAboveCurves { target: f64 },
}

pub type Result<T> = std::result::Result<T, ReportError>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub direction: Direction,
    pub domain: DomainTag,
}

impl Column {
    pub fn label(&self) -> String {
        format!("{} {}", self.direction.label(), self.domain)
    }
}

/// A BLEU value plus how to print it. Computed cells print with two decimals;
/// cells loaded from a file print exactly as written there.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub value: f64,
    pub display: CellDisplay,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellDisplay {
    Decimals(usize),
    /// Shortest round-trip form of the value.
    Shortest,
    Literal(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match &self.display {
            CellDisplay::Decimals(d) => format!("{:.*}", d, self.value),
            CellDisplay::Shortest => format!("{}", self.value),
            CellDisplay::Literal(s) => s.clone(),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<Column>,
    pub cells: Vec<Vec<Cell>>,
}

impl EvalMatrix {
    pub fn get(&self, row: &str, direction: Direction, domain: &DomainTag) -> Option<f64> {
        let r = self.rows.iter().position(|x| x == row)?;
        let c = self
            .columns
            .iter()
            .position(|c| c.direction == direction && &c.domain == domain)?;
        Some(self.cells[r][c].value)
    }

    /// Builds a matrix from `row → direction → domain → BLEU` values.
    pub fn from_values(values: &IndexMap<String, IndexMap<String, IndexMap<String, f64>>>) -> Result<Self> {
        Self::build(values, |&v| Ok(Cell {
            value: v,
            display: CellDisplay::Shortest,
        }))
    }

    /// Parses `{"row": {"En-Vi": {"law": 22.07, ...}}}`, keeping every number's
    /// literal text for display.
    pub fn from_json(text: &str) -> std::result::Result<Self, ReportError> {
        let raw: IndexMap<String, IndexMap<String, IndexMap<String, Box<RawValue>>>> =
            serde_json::from_str(text).map_err(|e| ReportError::Parse {
                path: PathBuf::new(),
                reason: e.to_string(),
            })?;
        Self::build(&raw, |r| {
            let literal = r.get().trim();
            let value: f64 = serde_json::from_str(literal).map_err(|_| format!("`{literal}` is not a number"))?;
            Ok(Cell {
                value,
                display: CellDisplay::Literal(literal.to_string()),
            })
        })
    }

    fn build<T>(
        values: &IndexMap<String, IndexMap<String, IndexMap<String, T>>>,
        to_cell: impl Fn(&T) -> std::result::Result<Cell, String>,
    ) -> Result<Self> {
        let mut columns: Vec<Column> = Vec::new();
        for dirs in values.values() {
            for (dir, domains) in dirs {
                let direction = parse_direction(dir)?;
                for domain in domains.keys() {
                    let col = Column {
                        direction,
                        domain: DomainTag::parse(domain),
                    };
                    if !columns.contains(&col) {
                        columns.push(col);
                    }
                }
            }
        }
        let mut cells = Vec::new();
        for (row, dirs) in values {
            let mut line = Vec::new();
            for col in &columns {
                let raw = dirs
                    .iter()
                    .filter(|(d, _)| parse_direction(d).ok() == Some(col.direction))
                    .flat_map(|(_, doms)| doms.iter())
                    .find(|(dom, _)| DomainTag::parse(dom) == col.domain)
                    .map(|(_, v)| v)
                    .ok_or_else(|| ReportError::MissingHypothesis {
                        row: row.clone(),
                        column: col.label(),
                    })?;
                let cell_err = |reason: String| ReportError::Cell {
                    row: row.clone(),
                    column: col.label(),
                    reason,
                };
                let cell = to_cell(raw).map_err(cell_err)?;
                if !(0.0..=100.0).contains(&cell.value) {
                    return Err(cell_err(format!("BLEU {} outside [0, 100]", cell.value)));
                }
                line.push(cell);
            }
            cells.push(line);
        }
        Ok(EvalMatrix {
            rows: values.keys().cloned().collect(),
            columns,
            cells,
        })
    }

    pub fn render_text(&self) -> String {
        let header: Vec<String> = std::iter::once("System".to_string())
            .chain(self.columns.iter().map(Column::label))
            .collect();
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .zip(&self.cells)
            .map(|(r, cells)| std::iter::once(r.clone()).chain(cells.iter().map(Cell::render)).collect())
            .collect();
        render_table(&header, &body)
    }
}

fn render_table(header: &[String], body: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join(" | ")
    };
    let mut out = String::new();
    let _ = writeln!(out, "{}", line(header));
    let _ = writeln!(
        out,
        "{}",
        widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-+-")
    );
    for row in body {
        let _ = writeln!(out, "{}", line(row));
    }
    out
}

fn parse_direction(s: &str) -> Result<Direction> {
    s.parse().map_err(|e: crate::translate::TranslateError| ReportError::Parse {
        path: PathBuf::new(),
        reason: e.to_string(),
    })
}

type FileMap = IndexMap<String, IndexMap<String, PathBuf>>;

/// `{"refs": {dir: {domain: path}}, "systems": {label: {dir: {domain: path}}}}`
#[derive(Debug, Clone, Deserialize)]
pub struct MatrixManifest {
    pub refs: FileMap,
    pub systems: IndexMap<String, FileMap>,
}

impl MatrixManifest {
    /// Loads a manifest, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut m: MatrixManifest = serde_json::from_str(&text).map_err(|e| ReportError::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        let resolve = |files: &mut FileMap| {
            for doms in files.values_mut() {
                for p in doms.values_mut() {
                    *p = base.join(&*p);
                }
            }
        };
        resolve(&mut m.refs);
        for sys in m.systems.values_mut() {
            resolve(sys);
        }
        Ok(m)
    }

    fn columns(files: &FileMap) -> Result<Vec<(Column, PathBuf)>> {
        let mut out = Vec::new();
        for (dir, doms) in files {
            let direction = parse_direction(dir)?;
            for (dom, p) in doms {
                out.push((
                    Column {
                        direction,
                        domain: DomainTag::parse(dom),
                    },
                    p.clone(),
                ));
            }
        }
        Ok(out)
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Scores every `(system, column)` cell with corpus BLEU against that column's reference.
pub fn evaluate_matrix(manifest: &MatrixManifest, bleu: &BleuConfig) -> Result<EvalMatrix> {
    let refs = MatrixManifest::columns(&manifest.refs)?;
    let mut jobs = Vec::new();
    for (row, files) in &manifest.systems {
        let hyps = MatrixManifest::columns(files)?;
        for (col, ref_path) in &refs {
            let hyp = hyps
                .iter()
                .find(|(c, _)| c == col)
                .map(|(_, p)| p.clone())
                .ok_or_else(|| ReportError::MissingHypothesis {
                    row: row.clone(),
                    column: col.label(),
                })?;
            jobs.push((row.clone(), col.clone(), hyp, ref_path.clone()));
        }
    }

    let values: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|(row, col, hyp_path, ref_path)| {
            let hyps = read_lines(hyp_path)?;
            let refs = read_lines(ref_path)?;
            if hyps.len() != refs.len() {
                return Err(ReportError::LineCountMismatch {
                    row: row.clone(),
                    column: col.label(),
                    hyp_lines: hyps.len(),
                    ref_lines: refs.len(),
                });
            }
            corpus_bleu(&hyps, &refs, bleu)
                .map(|b| b.score)
                .map_err(|e| ReportError::Cell {
                    row: row.clone(),
                    column: col.label(),
                    reason: e.to_string(),
                })
        })
        .collect();

    let ncols = refs.len();
    let mut cells = Vec::new();
    let mut it = values.into_iter();
    for _ in &manifest.systems {
        let mut line = Vec::with_capacity(ncols);
        for _ in 0..ncols {
            line.push(Cell {
                value: it.next().expect("one value per job")?,
                display: CellDisplay::Decimals(2),
            });
        }
        cells.push(line);
    }
    Ok(EvalMatrix {
        rows: manifest.systems.keys().cloned().collect(),
        columns: refs.into_iter().map(|(c, _)| c).collect(),
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub data_amount: f64,
    pub bleu: f64,
    #[serde(default)]
    pub wall_hours: Option<f64>,
}

/// BLEU reached as a function of added data for one acquisition method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetCurve {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

impl BudgetCurve {
    pub fn new(label: impl Into<String>, points: Vec<CurvePoint>) -> Result<Self> {
        let label = label.into();
        let invalid = |reason: &str| ReportError::InvalidCurve {
            label: label.clone(),
            reason: reason.to_string(),
        };
        if points.len() < 2 {
            return Err(invalid("needs at least two points"));
        }
        for p in &points {
            if !(p.data_amount > 0.0 && p.data_amount.is_finite()) {
                return Err(invalid("data amounts must be positive and finite"));
            }
            if !p.bleu.is_finite() || p.wall_hours.is_some_and(|w| !w.is_finite()) {
                return Err(invalid("values must be finite"));
            }
        }
        if points.windows(2).any(|w| w[0].data_amount >= w[1].data_amount) {
            return Err(invalid("data amounts must be strictly increasing"));
        }
        Ok(BudgetCurve { label, points })
    }

    pub fn from_pairs(label: impl Into<String>, pairs: &[(f64, f64)]) -> Result<Self> {
        BudgetCurve::new(
            label,
            pairs
                .iter()
                .map(|&(data_amount, bleu)| CurvePoint {
                    data_amount,
                    bleu,
                    wall_hours: None,
                })
                .collect(),
        )
    }

    /// Reads a CSV with columns `data_amount,bleu[,wall_hours]`.
    pub fn load_csv(path: &Path, label: impl Into<String>) -> Result<Self> {
        let parse_err = |reason: String| ReportError::Parse {
            path: path.to_path_buf(),
            reason,
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| parse_err(e.to_string()))?;
        let points = reader
            .deserialize::<CurvePoint>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(e.to_string()))?;
        BudgetCurve::new(label, points)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let points = self
            .points
            .iter()
            .map(|p| CurvePoint {
                data_amount: p.data_amount * factor,
                ..*p
            })
            .collect();
        BudgetCurve::new(self.label.clone(), points)
    }

    /// First crossing of `target` by monotone piecewise-linear interpolation in
    /// `(ln data, BLEU)` space.
    pub fn crossing(&self, target: f64) -> Crossing {
        let pts = &self.points;
        let Some(i) = pts.iter().position(|p| p.bleu >= target) else {
            let last = pts[pts.len() - 1];
            return Crossing {
                reach: Reach::Never,
                data_amount: last.data_amount,
                wall_hours: last.wall_hours,
            };
        };
        let p1 = pts[i];
        if p1.bleu == target || i == 0 {
            return Crossing {
                reach: if p1.bleu == target { Reach::Exact } else { Reach::BeforeFirstPoint },
                data_amount: p1.data_amount,
                wall_hours: p1.wall_hours,
            };
        }
        let p0 = pts[i - 1];
        let t = (target - p0.bleu) / (p1.bleu - p0.bleu);
        let (x0, x1) = (p0.data_amount.ln(), p1.data_amount.ln());
        let data_amount = (x0 + t * (x1 - x0)).exp().clamp(p0.data_amount, p1.data_amount);
        let wall_hours = match (p0.wall_hours, p1.wall_hours) {
            (Some(w0), Some(w1)) => Some(w0 + t * (w1 - w0)),
            _ => None,
        };
        Crossing {
            reach: Reach::Exact,
            data_amount,
            wall_hours,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reach {
    /// Interpolated within the curve's range.
    Exact,
    /// The first point already exceeds the target; `data_amount` is an upper bound.
    BeforeFirstPoint,
    /// The curve never reaches the target; `data_amount` (the largest) is a lower bound.
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub reach: Reach,
    pub data_amount: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_hours: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Exact,
    LowerBound,
    UpperBound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetRatio {
    pub target_bleu: f64,
    pub supervised: Crossing,
    pub pretraining: Crossing,
    pub reachable_supervised: bool,
    pub reachable_pretraining: bool,
    /// Pretraining data needed over supervised data needed.
    pub data_ratio: f64,
    pub bound: Bound,
    /// Present only when both curves carry wall-clock hours.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ratio: Option<f64>,
}

pub fn budget_ratio(supervised: &BudgetCurve, pretraining: &BudgetCurve, target_bleu: f64) -> Result<BudgetRatio> {
    let sup = supervised.crossing(target_bleu);
    let pre = pretraining.crossing(target_bleu);
    let bound = match (pre.reach, sup.reach) {
        (Reach::Never, Reach::Never) => return Err(ReportError::TargetAboveCurves { target: target_bleu }),
        (Reach::BeforeFirstPoint, Reach::BeforeFirstPoint) => {
            return Err(ReportError::TargetBelowCurves { target: target_bleu })
        }
        (Reach::Never, _) | (_, Reach::BeforeFirstPoint) => Bound::LowerBound,
        (Reach::BeforeFirstPoint, _) | (_, Reach::Never) => Bound::UpperBound,
        (Reach::Exact, Reach::Exact) => Bound::Exact,
    };
    let wall_time_ratio = match (pre.wall_hours, sup.wall_hours) {
        (Some(p), Some(s)) if s > 0.0 => Some(p / s),
        _ => None,
    };
    Ok(BudgetRatio {
        target_bleu,
        supervised: sup,
        pretraining: pre,
        reachable_supervised: sup.reach != Reach::Never,
        reachable_pretraining: pre.reach != Reach::Never,
        data_ratio: pre.data_amount / sup.data_amount,
        bound,
        wall_time_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierRecord {
    pub tier: u8,
    pub human_hours: f64,
    pub machine_hours: f64,
    pub pairs_collected: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TierSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tier: Option<u8>,
    pub human_hours: f64,
    pub machine_hours: f64,
    pub total_hours: f64,
    pub pairs: u64,
    pub pairs_per_hour: Option<f64>,
}

impl TierSummary {
    fn empty(tier: Option<u8>) -> Self {
        TierSummary {
            tier,
            human_hours: 0.0,
            machine_hours: 0.0,
            total_hours: 0.0,
            pairs: 0,
            pairs_per_hour: None,
        }
    }

    fn add(&mut self, r: &TierRecord) {
        self.human_hours += r.human_hours;
        self.machine_hours += r.machine_hours;
        self.total_hours = self.human_hours + self.machine_hours;
        self.pairs += r.pairs_collected;
        self.pairs_per_hour = (self.total_hours > 0.0).then(|| self.pairs as f64 / self.total_hours);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeReport {
    pub tiers: Vec<TierSummary>,
    pub total: TierSummary,
}

impl TimeReport {
    pub fn render_text(&self) -> String {
        let header: Vec<String> = ["Tier", "Human h", "Machine h", "Total h", "Pairs", "Pairs/h"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let row = |label: String, s: &TierSummary| {
            vec![
                label,
                format!("{:.1}", s.human_hours),
                format!("{:.1}", s.machine_hours),
                format!("{:.1}", s.total_hours),
                s.pairs.to_string(),
                s.pairs_per_hour.map_or("-".to_string(), |v| format!("{v:.1}")),
            ]
        };
        let mut body: Vec<Vec<String>> = self
            .tiers
            .iter()
            .map(|s| row(s.tier.map_or(String::new(), |t| t.to_string()), s))
            .collect();
        if !self.tiers.is_empty() {
            body.push(row("all".to_string(), &self.total));
        }
        render_table(&header, &body)
    }

    /// Reads a CSV with columns `tier,human_hours,machine_hours,pairs_collected`.
    pub fn load_records(path: &Path) -> Result<Vec<TierRecord>> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| ReportError::Parse {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        reader
            .deserialize()
            .collect::<std::result::Result<Vec<TierRecord>, _>>()
            .map_err(|e| ReportError::Parse {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })
    }
}

/// Sums hours and pairs per tier, tiers ascending.
pub fn time_report(records: &[TierRecord]) -> TimeReport {
    let mut by_tier: std::collections::BTreeMap<u8, TierSummary> = Default::default();
    let mut total = TierSummary::empty(None);
    for r in records {
        by_tier.entry(r.tier).or_insert_with(|| TierSummary::empty(Some(r.tier))).add(r);
        total.add(r);
    }
    TimeReport {
        tiers: by_tier.into_values().collect(),
        total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_thousand_fold_at_34() {
        let sup = BudgetCurve::from_pairs("supervised", &[(1.0, 30.0), (100.0, 38.0)]).unwrap();
        let pre = BudgetCurve::from_pairs("pretraining", &[(1_000.0, 30.0), (100_000.0, 38.0)]).unwrap();
        let r = budget_ratio(&sup, &pre, 34.0).unwrap();
        assert!((r.supervised.data_amount - 10.0).abs() < 1e-9);
        assert!((r.pretraining.data_amount - 10_000.0).abs() < 1e-9);
        assert!((r.data_ratio - 1000.0).abs() < 1e-9);
        assert_eq!(r.bound, Bound::Exact);
        assert_eq!(r.wall_time_ratio, None);
    }

    #[test]
    fn identical_curves_ratio_one() {
        let c = BudgetCurve::from_pairs("c", &[(1.0, 10.0), (10.0, 20.0), (100.0, 25.0)]).unwrap();
        for target in [10.0, 12.5, 20.0, 24.0] {
            assert_eq!(budget_ratio(&c, &c, target).unwrap().data_ratio, 1.0);
        }
    }

    #[test]
    fn plateau_is_lower_bound() {
        let sup = BudgetCurve::from_pairs("s", &[(1.0, 30.0), (10.0, 36.0)]).unwrap();
        let pre = BudgetCurve::from_pairs("p", &[(100.0, 28.0), (1_000.0, 31.0), (1_500.0, 31.1)]).unwrap();
        let r = budget_ratio(&sup, &pre, 34.0).unwrap();
        assert!(!r.reachable_pretraining && r.reachable_supervised);
        assert_eq!(r.bound, Bound::LowerBound);
        assert_eq!(r.pretraining.data_amount, 1_500.0);
    }

    #[test]
    fn target_errors() {
        let a = BudgetCurve::from_pairs("a", &[(1.0, 30.0), (10.0, 36.0)]).unwrap();
        let b = BudgetCurve::from_pairs("b", &[(5.0, 31.0), (50.0, 33.0)]).unwrap();
        assert!(matches!(budget_ratio(&a, &b, 20.0), Err(ReportError::TargetBelowCurves { .. })));
        assert!(matches!(budget_ratio(&a, &b, 40.0), Err(ReportError::TargetAboveCurves { .. })));
    }

    #[test]
    fn non_monotone_curve_uses_first_crossing() {
        let c = BudgetCurve::from_pairs("c", &[(1.0, 10.0), (10.0, 30.0), (100.0, 20.0), (1000.0, 40.0)]).unwrap();
        let x = c.crossing(20.0);
        assert_eq!(x.reach, Reach::Exact);
        assert!(x.data_amount > 1.0 && x.data_amount < 10.0);
    }

    #[test]
    fn wall_ratio_only_with_hours() {
        let pt = |d: f64, b: f64, w: f64| CurvePoint {
            data_amount: d,
            bleu: b,
            wall_hours: Some(w),
        };
        let sup = BudgetCurve::new("s", vec![pt(1.0, 30.0, 1.0), pt(100.0, 38.0, 3.0)]).unwrap();
        let pre = BudgetCurve::new("p", vec![pt(1_000.0, 30.0, 10.0), pt(100_000.0, 38.0, 50.0)]).unwrap();
        let r = budget_ratio(&sup, &pre, 34.0).unwrap();
        assert!((r.supervised.wall_hours.unwrap() - 2.0).abs() < 1e-12);
        assert!((r.wall_time_ratio.unwrap() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn curve_validation() {
        assert!(BudgetCurve::from_pairs("x", &[(1.0, 1.0)]).is_err());
        assert!(BudgetCurve::from_pairs("x", &[(2.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(BudgetCurve::from_pairs("x", &[(0.0, 1.0), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn table_renders_input_precision() {
        let mut values: IndexMap<String, IndexMap<String, IndexMap<String, f64>>> = IndexMap::new();
        let row = values.entry("300K Law".into()).or_default();
        row.entry("En-Vi".into()).or_default().insert("medical".into(), 14.035);
        row.entry("En-Vi".into()).or_default().insert("law".into(), 20.6);
        let m = EvalMatrix::from_values(&values).unwrap();
        let text = m.render_text();
        assert!(text.contains("14.035") && text.contains("20.6"), "{text}");

        let m = EvalMatrix::from_json(r#"{"Ted": {"Vi-En": {"news": 20.50, "law": 10.92}}}"#).unwrap();
        assert_eq!(m.get("Ted", Direction::VI_EN, &DomainTag::News), Some(20.5));
        assert!(m.render_text().contains("20.50"));
        assert!(EvalMatrix::from_json(r#"{"x": {"En-Vi": {"law": 120}}}"#).is_err());
        assert!(EvalMatrix::from_json(r#"{"x": {"En-Vi": {"law": 1}}, "y": {"En-Vi": {"news": 1}}}"#).is_err());
    }

    #[test]
    fn time_report_sums_per_tier() {
        let rec = |tier, h, m, p| TierRecord {
            tier,
            human_hours: h,
            machine_hours: m,
            pairs_collected: p,
        };
        let r = time_report(&[rec(2, 1.0, 3.0, 100), rec(1, 2.0, 2.0, 40), rec(2, 1.0, 1.0, 20)]);
        assert_eq!(r.tiers.len(), 2);
        assert_eq!(r.tiers[0].tier, Some(1));
        assert_eq!((r.tiers[1].total_hours, r.tiers[1].pairs), (6.0, 120));
        assert_eq!(r.tiers[1].pairs_per_hour, Some(20.0));
        assert_eq!((r.total.total_hours, r.total.pairs), (10.0, 160));

        let empty = time_report(&[]);
        assert!(empty.tiers.is_empty());
        assert_eq!(empty.render_text().lines().count(), 2);
    }
}
