//! Output files: results CSV, summary JSON, manifests and SVG boxplots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use passreg::baselines::{quantile, MethodTag};
use passreg::data::Dataset;
use passreg::eval::{mean_se, FoldAssignment, MeanSe};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const RESULTS_HEADER: &str = "replicate,method,metric,value,n,N,p,scenario,seed";

/// One evaluated metric of one method in one replicate.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub replicate: usize,
    pub method: MethodTag,
    pub metric: &'static str,
    pub value: f64,
    pub n: usize,
    pub n_total: usize,
    pub p: usize,
    pub scenario: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FailureRow {
    pub replicate: usize,
    pub method: Option<MethodTag>,
    pub n: usize,
    pub error: String,
}

/// Hash of the fold assignment each cross-validated method used.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldRow {
    pub replicate: usize,
    pub method: MethodTag,
    pub n: usize,
    pub fold_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes).as_slice())
}

pub fn folds_hash(folds: &FoldAssignment) -> String {
    let mut bytes = Vec::with_capacity(folds.fold.len() * 4 + 8);
    bytes.extend_from_slice(&(folds.n_folds as u64).to_le_bytes());
    for &f in &folds.fold {
        bytes.extend_from_slice(&(f as u32).to_le_bytes());
    }
    sha256_hex(&bytes)
}

/// Hash of the values the surrogate stage reads (features and surrogate).
pub fn dataset_hash(ds: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update((ds.n_obs() as u64).to_le_bytes());
    h.update((ds.n_features() as u64).to_le_bytes());
    for v in ds.features.iter().chain(&ds.surrogate) {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize().as_slice())
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    sha256_hex(canonical_json(cfg).as_bytes())
}

pub fn canonical_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable value") + "\n"
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, canonical_json(value).as_bytes())
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{:?},{},{},{},{},{}",
            r.replicate, r.method, r.metric, r.value, r.n, r.n_total, r.p, r.scenario, r.seed
        )
        .expect("write to string");
    }
    s
}

pub fn failures_csv(rows: &[FailureRow]) -> String {
    let mut s = String::from("replicate,method,n,error\n");
    for r in rows {
        let method = r.method.map_or("", MethodTag::as_str);
        let msg = r.error.replace('"', "'");
        writeln!(s, "{},{},{},\"{}\"", r.replicate, method, r.n, msg).expect("write to string");
    }
    s
}

pub fn folds_csv(rows: &[FoldRow]) -> String {
    let mut s = String::from("replicate,method,n,fold_sha256\n");
    for r in rows {
        writeln!(s, "{},{},{},{}", r.replicate, r.method, r.n, r.fold_sha256).expect("write to string");
    }
    s
}

/// One (method, label count) group of the summary table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryEntry {
    pub method: MethodTag,
    pub n: usize,
    pub metric: String,
    pub n_replicates: usize,
    pub mean: f64,
    pub se: Option<f64>,
}

type GroupKey = (MethodTag, usize, &'static str);

/// Groups (replicate, value) pairs by (method, n, metric) in first-appearance
/// order.
pub fn group_rows(rows: &[ResultRow]) -> Vec<(GroupKey, Vec<(usize, f64)>)> {
    let mut order: Vec<GroupKey> = Vec::new();
    let mut groups: BTreeMap<GroupKey, Vec<(usize, f64)>> = BTreeMap::new();
    for r in rows {
        let key = (r.method, r.n, r.metric);
        let e = groups.entry(key).or_default();
        if e.is_empty() {
            order.push(key);
        }
        e.push((r.replicate, r.value));
    }
    order
        .into_iter()
        .map(|k| (k, groups.remove(&k).expect("group exists")))
        .collect()
}

/// Averages the values of each block of `block_size` consecutive replicates
/// (replicates are numbered from 1).
pub fn block_means(values: &[(usize, f64)], block_size: usize) -> Vec<f64> {
    let mut blocks: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for &(rep, v) in values {
        let e = blocks.entry((rep - 1) / block_size).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    blocks.into_values().map(|(s, c)| s / c as f64).collect()
}

/// Mean and standard error per (method, n, metric), taken across block means.
pub fn summarize(rows: &[ResultRow], block_size: usize) -> Vec<SummaryEntry> {
    let mut out: Vec<SummaryEntry> = group_rows(rows)
        .into_iter()
        .map(|((method, n, metric), values)| {
            let blocks = block_means(&values, block_size);
            let MeanSe { mean, se } = mean_se(&blocks);
            SummaryEntry {
                method,
                n,
                metric: metric.to_string(),
                n_replicates: blocks.len(),
                mean,
                se,
            }
        })
        .collect();
    out.sort_by(|a, b| metric_rank(&a.metric).cmp(&metric_rank(&b.metric)));
    out
}

fn metric_rank(m: &str) -> usize {
    ["auc", "er", "mse_p", "bss"].iter().position(|k| *k == m).unwrap_or(usize::MAX)
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    /// The resolved configuration the command ran with.
    pub config: ExperimentConfig,
    /// Output file name to SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Manifest {
            tool: "passreg",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_sha256: config_hash(cfg),
            seed: cfg.seed,
            config: cfg.clone(),
            files: BTreeMap::new(),
        }
    }

    /// Writes `contents` into `dir` and records its hash.
    pub fn emit(&mut self, dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = dir.join(name);
        write_file(&path, contents)?;
        self.files.insert(name.to_string(), sha256_hex(contents));
        Ok(path)
    }

    /// Records the hash of a file already written into `dir`.
    pub fn record(&mut self, dir: &Path, name: &str) -> Result<()> {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|source| CliError::Read { path, source })?;
        self.files.insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn finish(self, dir: &Path) -> Result<()> {
        write_json(&dir.join("manifest.json"), &self)
    }
}

/// Five-number box summary with whiskers at the most extreme points within
/// 1.5 IQR of the quartiles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxStats {
    pub lo: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub hi: f64,
}

pub fn box_stats(values: &[f64]) -> BoxStats {
    let q1 = quantile(values, 0.25);
    let q3 = quantile(values, 0.75);
    let iqr = q3 - q1;
    let (fence_lo, fence_hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let lo = values.iter().copied().filter(|&v| v >= fence_lo).fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().filter(|&v| v <= fence_hi).fold(f64::NEG_INFINITY, f64::max);
    BoxStats {
        lo,
        q1,
        median: quantile(values, 0.5),
        q3,
        hi,
    }
}

/// A boxplot with one box per group; outliers are not drawn.
pub fn boxplot_svg(title: &str, groups: &[(String, Vec<f64>)]) -> String {
    let (w_box, gap, left, top, height) = (44.0, 26.0, 70.0, 40.0, 300.0);
    let width = left + groups.len() as f64 * (w_box + gap) + gap;
    let total_h = top + height + 90.0;
    let stats: Vec<BoxStats> = groups.iter().map(|(_, v)| box_stats(v)).collect();
    let mut lo = stats.iter().map(|b| b.lo).fold(f64::INFINITY, f64::min);
    let mut hi = stats.iter().map(|b| b.hi).fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let y = |v: f64| top + height * (hi - v) / (hi - lo);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{total_h:.0}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, escape(title)).unwrap();
    writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.1}" stroke="black"/>"#, top + height).unwrap();
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let yy = y(v);
        writeln!(s, r#"<line x1="{:.1}" y1="{yy:.1}" x2="{left}" y2="{yy:.1}" stroke="black"/>"#, left - 5.0).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.3}</text>"#, left - 8.0, yy + 4.0).unwrap();
    }
    for (i, ((label, _), b)) in groups.iter().zip(&stats).enumerate() {
        let x0 = left + gap + i as f64 * (w_box + gap);
        let xc = x0 + w_box / 2.0;
        writeln!(s, r#"<line x1="{xc:.1}" y1="{:.1}" x2="{xc:.1}" y2="{:.1}" stroke="black"/>"#, y(b.hi), y(b.q3)).unwrap();
        writeln!(s, r#"<line x1="{xc:.1}" y1="{:.1}" x2="{xc:.1}" y2="{:.1}" stroke="black"/>"#, y(b.q1), y(b.lo)).unwrap();
        for v in [b.lo, b.hi] {
            writeln!(s, r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#, xc - 8.0, y(v), xc + 8.0, y(v)).unwrap();
        }
        writeln!(
            s,
            r##"<rect x="{x0:.1}" y="{:.1}" width="{w_box}" height="{:.1}" fill="#cfe0f3" stroke="black"/>"##,
            y(b.q3),
            (y(b.q1) - y(b.q3)).max(0.5)
        )
        .unwrap();
        writeln!(s, r#"<line x1="{x0:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-width="2"/>"#, y(b.median), x0 + w_box, y(b.median)).unwrap();
        let ty = top + height + 16.0;
        writeln!(
            s,
            r#"<text x="{xc:.1}" y="{ty:.1}" text-anchor="end" transform="rotate(-40 {xc:.1} {ty:.1})">{}</text>"#,
            escape(label)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One boxplot per metric; groups are labeled by method, with the label count
/// appended when it differs from `base_n`.
pub fn metric_boxplots(rows: &[ResultRow], base_n: Option<usize>, title: &str) -> Vec<(String, String)> {
    let mut by_metric: Vec<(&'static str, Vec<(String, Vec<f64>)>)> = Vec::new();
    for ((method, n, metric), pairs) in group_rows(rows) {
        let values: Vec<f64> = pairs.into_iter().map(|(_, v)| v).collect();
        let label = if Some(n) == base_n {
            method.to_string()
        } else {
            format!("{method} (n={n})")
        };
        match by_metric.iter_mut().find(|(m, _)| *m == metric) {
            Some((_, g)) => g.push((label, values)),
            None => by_metric.push((metric, vec![(label, values)])),
        }
    }
    by_metric.sort_by_key(|(m, _)| metric_rank(m));
    by_metric
        .into_iter()
        .map(|(metric, groups)| {
            let name = format!("boxplot_{metric}.svg");
            (name, boxplot_svg(&format!("{title}: {}", metric.to_uppercase()), &groups))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(rep: usize, method: MethodTag, metric: &'static str, value: f64) -> ResultRow {
        ResultRow {
            replicate: rep,
            method,
            metric,
            value,
            n: 100,
            n_total: 2000,
            p: 200,
            scenario: "I".into(),
            seed: 1,
        }
    }

    #[test]
    fn csv_has_one_line_per_row() {
        let rows = vec![row(1, MethodTag::Lasso, "auc", 0.75), row(1, MethodTag::Pass, "auc", 0.8125)];
        let csv = results_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], RESULTS_HEADER);
        assert_eq!(lines[2], "1,pass,auc,0.8125,100,2000,200,I,1");
    }

    #[test]
    fn summary_groups_and_orders() {
        let rows = vec![
            row(1, MethodTag::Pass, "er", 0.1),
            row(1, MethodTag::Pass, "auc", 0.8),
            row(2, MethodTag::Pass, "er", 0.3),
            row(2, MethodTag::Pass, "auc", 0.6),
        ];
        let s = summarize(&rows, 1);
        assert_eq!(s[0].metric, "auc");
        assert!((s[0].mean - 0.7).abs() < 1e-12);
        assert!((s[1].se.unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn box_whiskers_stop_at_fences() {
        let mut v: Vec<f64> = (0..9).map(f64::from).collect();
        v.push(100.0);
        let b = box_stats(&v);
        assert_eq!(b.lo, 0.0);
        assert_eq!(b.hi, 8.0);
        assert_eq!(b.median, 4.5);
        let svg = boxplot_svg("t", &[("a<b".into(), v)]);
        assert!(svg.contains("a&lt;b") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn fold_hash_depends_on_assignment() {
        let a = FoldAssignment {
            fold: vec![0, 1, 0, 1],
            n_folds: 2,
            seed: 1,
            stratified: true,
        };
        let mut b = a.clone();
        b.seed = 9;
        assert_eq!(folds_hash(&a), folds_hash(&b));
        b.fold.swap(0, 1);
        assert_ne!(folds_hash(&a), folds_hash(&b));
    }
}
