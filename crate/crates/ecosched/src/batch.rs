//! Sweep CSV files and their summaries.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use ecosched_core::certify::{Certificate, Verdict};
use ecosched_core::model::Instance;
use serde::{Deserialize, Serialize};

use crate::error::AppError;

/// Seed column value of summary rows.
pub const SUMMARY_SEED: &str = "max";

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub seed: String,
    pub n: usize,
    pub alpha: f64,
    pub g: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub epsilon: Option<f64>,
    pub problem: String,
    pub primal: Option<f64>,
    pub bound: Option<f64>,
    pub ratio: f64,
    pub verdict: String,
}

impl Row {
    pub fn new(seed: u64, inst: &Instance, epsilon: Option<f64>, cert: &Certificate) -> Self {
        Row {
            seed: seed.to_string(),
            n: inst.jobs.len(),
            alpha: inst.power.alpha(),
            g: inst.power.g(),
            a: inst.wakeup_cost,
            epsilon,
            problem: inst.kind.as_str().into(),
            primal: Some(cert.primal),
            bound: Some(cert.dual_or_bound),
            ratio: cert.observed_ratio,
            verdict: cert.verdict.as_str().into(),
        }
    }

    pub fn is_summary(&self) -> bool {
        self.seed == SUMMARY_SEED
    }

    fn config_cmp(&self, o: &Row) -> Ordering {
        self.problem
            .cmp(&o.problem)
            .then(self.alpha.total_cmp(&o.alpha))
            .then(self.g.total_cmp(&o.g))
            .then(self.a.total_cmp(&o.a))
            .then(cmp_opt(self.epsilon, o.epsilon))
            .then(self.n.cmp(&o.n))
    }

    fn seed_num(&self) -> u64 {
        self.seed.parse().unwrap_or(u64::MAX)
    }
}

fn cmp_opt(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (a, b) => a.is_some().cmp(&b.is_some()),
    }
}

fn rank(v: &str) -> u8 {
    match Verdict::parse(v) {
        Some(Verdict::Certified) => 0,
        Some(Verdict::InformationalOnly) => 1,
        _ => 2,
    }
}

/// Data rows in `(config, seed)` order followed by one summary row per
/// configuration carrying its largest ratio and worst verdict.
pub fn batch_report(rows: &[Row]) -> Result<String, AppError> {
    let mut data: Vec<&Row> = rows.iter().filter(|r| !r.is_summary()).collect();
    data.sort_by(|a, b| a.config_cmp(b).then(a.seed_num().cmp(&b.seed_num())));
    let mut summaries: Vec<Row> = Vec::new();
    for r in &data {
        match summaries.last_mut() {
            Some(s) if s.config_cmp(r) == Ordering::Equal => {
                if r.ratio > s.ratio || r.ratio.is_nan() {
                    s.ratio = r.ratio;
                }
                if rank(&r.verdict) > rank(&s.verdict) {
                    s.verdict = r.verdict.clone();
                }
            }
            _ => summaries.push(Row { seed: SUMMARY_SEED.into(), primal: None, bound: None, ..(*r).clone() }),
        }
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["seed", "n", "alpha", "g", "A", "epsilon", "problem", "primal", "bound", "ratio", "verdict"])?;
    for r in data.iter().copied().chain(summaries.iter()) {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| AppError::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_rows(text: &str) -> Result<Vec<Row>, AppError> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for r in rd.deserialize() {
        out.push(r?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSummary {
    pub problem: String,
    pub alpha: f64,
    pub g: f64,
    pub a: f64,
    pub epsilon: Option<f64>,
    pub n: usize,
    pub count: usize,
    pub certified: usize,
    pub informational: usize,
    pub failed: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

/// Groups data rows by configuration; summary rows are ignored.
pub fn summarise(rows: &[Row]) -> Vec<ConfigSummary> {
    let mut data: Vec<&Row> = rows.iter().filter(|r| !r.is_summary()).collect();
    data.sort_by(|a, b| a.config_cmp(b));
    let mut out: Vec<ConfigSummary> = Vec::new();
    let mut first: Option<&Row> = None;
    for r in data {
        if first.is_none_or(|f| f.config_cmp(r) != Ordering::Equal) {
            first = Some(r);
            out.push(ConfigSummary {
                problem: r.problem.clone(),
                alpha: r.alpha,
                g: r.g,
                a: r.a,
                epsilon: r.epsilon,
                n: r.n,
                count: 0,
                certified: 0,
                informational: 0,
                failed: 0,
                max_ratio: f64::NEG_INFINITY,
                mean_ratio: 0.0,
            });
        }
        let s = out.last_mut().unwrap();
        s.count += 1;
        match rank(&r.verdict) {
            0 => s.certified += 1,
            1 => s.informational += 1,
            _ => s.failed += 1,
        }
        s.max_ratio = s.max_ratio.max(r.ratio);
        s.mean_ratio += r.ratio;
    }
    for s in &mut out {
        s.mean_ratio /= s.count as f64;
    }
    out
}

fn eps_str(e: Option<f64>) -> String {
    e.map_or_else(|| "-".into(), |e| format!("{e:.4}"))
}

/// Aligned text table, one line per configuration.
pub fn table(sums: &[ConfigSummary]) -> String {
    let head = ["problem", "alpha", "g", "A", "epsilon", "n", "runs", "certified", "info", "failed", "max_ratio", "mean_ratio"];
    let mut lines: Vec<Vec<String>> = vec![head.iter().map(|s| s.to_string()).collect()];
    for s in sums {
        lines.push(vec![
            s.problem.clone(),
            s.alpha.to_string(),
            s.g.to_string(),
            s.a.to_string(),
            eps_str(s.epsilon),
            s.n.to_string(),
            s.count.to_string(),
            s.certified.to_string(),
            s.informational.to_string(),
            s.failed.to_string(),
            format!("{:.6}", s.max_ratio),
            format!("{:.6}", s.mean_ratio),
        ]);
    }
    let widths: Vec<usize> = (0..head.len()).map(|c| lines.iter().map(|l| l[c].len()).max().unwrap()).collect();
    let mut out = String::new();
    for l in &lines {
        let cells: Vec<String> = l.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

/// Whitespace-separated columns for plotting, one block per problem.
pub fn gnuplot_data(sums: &[ConfigSummary]) -> String {
    let mut by_problem: BTreeMap<&str, Vec<&ConfigSummary>> = BTreeMap::new();
    for s in sums {
        by_problem.entry(s.problem.as_str()).or_default().push(s);
    }
    let mut out = String::from("# alpha g A epsilon n runs max_ratio mean_ratio\n");
    for (problem, ss) in by_problem {
        let _ = writeln!(out, "# {problem}");
        for s in ss {
            let eps = s.epsilon.map_or_else(|| "NaN".into(), |e| e.to_string());
            let _ = writeln!(out, "{} {} {} {} {} {} {} {}", s.alpha, s.g, s.a, eps, s.n, s.count, s.max_ratio, s.mean_ratio);
        }
        out.push_str("\n\n");
    }
    out
}
