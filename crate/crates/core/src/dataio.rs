//! File formats: series CSV, report CSV and tables, model JSON, run TOML.
//!
//! Series files start with a header `timestamp,<feature columns>,label` (or
//! `raw_value` instead of `label`). Floats are written in Rust's shortest
//! round-trip form, so reading a written file reproduces the values bit for
//! bit. Every output is written to a temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::{generate, GenConfig};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::ordinal::{OrdinalLabel, OrdinalScale};
use crate::training::{ExperimentReport, FittedModel, Grid, Method, RepeatResult, SelectionMetric, TrainSpec};
use crate::window::{chronological_split, leave_one_block_out, Standardization, TimeSeriesRecord, WindowedDataset};

/// Writes `bytes` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn csv_bytes(rows: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    rows(&mut w)?;
    w.into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv buffer: {e}")))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// series

/// Reads a series file. `raw_value` columns need `scale` for discretization;
/// `label` columns hold 1-based ranks and are checked against `scale` when given.
pub fn read_series(path: &Path, scale: Option<&OrdinalScale>) -> Result<Vec<TimeSeriesRecord>> {
    let text = read_file(path)?;
    parse_series(&text, path, scale)
}

fn parse_series(text: &str, path: &Path, scale: Option<&OrdinalScale>) -> Result<Vec<TimeSeriesRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols.first() != Some(&"timestamp") {
        return Err(Error::parse(path, 1, "first column must be `timestamp`"));
    }
    let has_label = cols.contains(&"label");
    let has_raw = cols.contains(&"raw_value");
    if has_label == has_raw {
        return Err(Error::parse(
            path,
            1,
            "exactly one of `label` and `raw_value` must be present",
        ));
    }
    let target = if has_label { "label" } else { "raw_value" };
    if cols.last() != Some(&target) || cols.iter().filter(|c| **c == target).count() != 1 {
        return Err(Error::parse(path, 1, format!("`{target}` must be the last column")));
    }
    if has_raw && scale.is_none() {
        return Err(Error::parse(
            path,
            1,
            "`raw_value` column needs an ordinal scale to discretize",
        ));
    }
    let feature_dim = cols.len() - 2;

    let mut out: Vec<TimeSeriesRecord> = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |msg: String| Error::parse(path, line, msg);
        if row.len() != cols.len() {
            return Err(err(format!("expected {} fields, found {}", cols.len(), row.len())));
        }
        let timestamp: i64 = row[0]
            .trim()
            .parse()
            .map_err(|_| err(format!("bad timestamp {:?}", &row[0])))?;
        if let Some(prev) = out.last() {
            if timestamp <= prev.timestamp {
                return Err(err(format!(
                    "timestamp {timestamp} does not increase (previous {})",
                    prev.timestamp
                )));
            }
        }
        let features = (1..=feature_dim)
            .map(|i| {
                let v: f64 = row[i]
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad value {:?} in column `{}`", &row[i], cols[i])))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(err(format!("non-finite value in column `{}`", cols[i])))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let last = row[feature_dim + 1].trim();
        let (raw_value, label) = if has_label {
            let rank: usize = last.parse().map_err(|_| err(format!("bad label {last:?}")))?;
            let q = scale.map_or(usize::MAX, OrdinalScale::num_classes);
            let label = OrdinalLabel::new(rank, q).map_err(|e| err(e.to_string()))?;
            (None, label)
        } else {
            let raw: f64 = last.parse().map_err(|_| err(format!("bad raw_value {last:?}")))?;
            let label = scale
                .expect("checked above")
                .discretize(raw)
                .map_err(|e| err(e.to_string()))?;
            (Some(raw), label)
        };
        out.push(TimeSeriesRecord {
            timestamp,
            features,
            raw_value,
            label,
        });
    }
    Ok(out)
}

/// Writes a series with a `label` column. Features are named `x1..xd`
/// unless `feature_names` is given.
pub fn write_series(path: &Path, series: &[TimeSeriesRecord], feature_names: Option<&[String]>) -> Result<()> {
    let dim = series.first().map_or(0, |r| r.features.len());
    let names: Vec<String> = match feature_names {
        Some(n) if n.len() == dim => n.to_vec(),
        Some(n) => {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: n.len(),
            })
        }
        None => (1..=dim).map(|i| format!("x{i}")).collect(),
    };
    let bytes = csv_bytes(|w| {
        let mut header = vec!["timestamp".to_string()];
        header.extend(names);
        header.push("label".into());
        w.write_record(&header)?;
        for r in series {
            if r.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: r.features.len(),
                });
            }
            let mut row = vec![r.timestamp.to_string()];
            row.extend(r.features.iter().map(f64::to_string));
            row.push(r.label.rank().to_string());
            w.write_record(&row)?;
        }
        Ok(())
    })?;
    write_atomic(path, &bytes)
}

// ---------------------------------------------------------------------------
// reports

const AGGREGATE_SPLIT: &str = "all";
const AGGREGATE_REPEAT: &str = "mean";

fn fmt_opt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

/// One row per (method, split, repeat), then one aggregate row per method
/// holding the cross-split mean and, in the `*_std` columns, the mean of the
/// per-split standard deviations.
pub fn write_report(reports: &[ExperimentReport], path: &Path) -> Result<()> {
    write_atomic(path, &report_csv(reports)?)
}

pub fn report_csv(reports: &[ExperimentReport]) -> Result<Vec<u8>> {
    let q = reports.iter().map(|r| r.num_classes).max().unwrap_or(0);
    csv_bytes(|w| {
        let mut header: Vec<String> = [
            "method", "split", "repeat", "seed", "acc", "amae", "mmae", "gms", "acc_std", "amae_std", "mmae_std",
            "gms_std",
        ]
        .map(String::from)
        .to_vec();
        for prefix in ["mae", "sens", "n"] {
            header.extend((1..=q).map(|c| format!("{prefix}_C{c}")));
        }
        w.write_record(&header)?;
        for rep in reports {
            for run in &rep.runs {
                let r = &run.report;
                let mut row = vec![
                    rep.method.name().to_string(),
                    run.split.to_string(),
                    run.repeat.to_string(),
                    run.seed.to_string(),
                    r.acc.to_string(),
                    r.amae.to_string(),
                    r.mmae.to_string(),
                    r.gms.to_string(),
                ];
                row.extend(std::iter::repeat_n(String::new(), 4));
                let pad = |v: Vec<String>| v.into_iter().chain(std::iter::repeat(String::new())).take(q);
                row.extend(pad(r.per_class_mae.iter().map(|v| fmt_opt(*v)).collect()));
                row.extend(pad(r.per_class_sensitivity.iter().map(|v| fmt_opt(*v)).collect()));
                row.extend(pad(r.n_per_class.iter().map(usize::to_string).collect()));
                w.write_record(&row)?;
            }
            let m = rep.mean;
            let s = rep.mean_std();
            let mut row = vec![
                rep.method.name().to_string(),
                AGGREGATE_SPLIT.into(),
                AGGREGATE_REPEAT.into(),
                String::new(),
            ];
            row.extend([m.acc, m.amae, m.mmae, m.gms, s.acc, s.amae, s.mmae, s.gms].map(|v| v.to_string()));
            row.extend(std::iter::repeat_n(String::new(), 3 * q));
            w.write_record(&row)?;
        }
        Ok(())
    })
}

/// Reads a report file back. Aggregates are recomputed from the detail rows;
/// chosen hyperparameters and warnings are not part of the file.
pub fn read_report(path: &Path) -> Result<Vec<ExperimentReport>> {
    let text = read_file(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let q = header.iter().filter(|h| h.starts_with("n_C")).count();
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(path, 1, format!("missing column `{name}`")))
    };
    let (c_method, c_split, c_repeat, c_seed) = (col("method")?, col("split")?, col("repeat")?, col("seed")?);
    let metric_cols = [col("acc")?, col("amae")?, col("mmae")?, col("gms")?];
    let mae0 = if q > 0 { col("mae_C1")? } else { 0 };
    let sens0 = if q > 0 { col("sens_C1")? } else { 0 };
    let n0 = if q > 0 { col("n_C1")? } else { 0 };

    let mut grouped: Vec<(Method, Vec<RepeatResult>)> = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |msg: String| Error::parse(path, line, msg);
        let method: Method = row[c_method].parse().map_err(|e: Error| err(e.to_string()))?;
        if &row[c_split] == AGGREGATE_SPLIT {
            continue;
        }
        let int = |c: usize| -> Result<u64> {
            row[c]
                .parse()
                .map_err(|_| err(format!("bad integer {:?} in `{}`", &row[c], &header[c])))
        };
        let float = |c: usize| -> Result<f64> {
            if row[c].is_empty() {
                return Ok(f64::NAN);
            }
            row[c]
                .parse()
                .map_err(|_| err(format!("bad number {:?} in `{}`", &row[c], &header[c])))
        };
        let classes = (0..q).take_while(|i| !row[n0 + i].is_empty()).count();
        let n_per_class = (0..classes)
            .map(|i| int(n0 + i).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let report = EvalReport {
            acc: float(metric_cols[0])?,
            amae: float(metric_cols[1])?,
            mmae: float(metric_cols[2])?,
            gms: float(metric_cols[3])?,
            per_class_mae: (0..classes).map(|i| float(mae0 + i)).collect::<Result<_>>()?,
            per_class_sensitivity: (0..classes).map(|i| float(sens0 + i)).collect::<Result<_>>()?,
            missing_classes: n_per_class
                .iter()
                .enumerate()
                .filter(|(_, &n)| n == 0)
                .map(|(i, _)| i + 1)
                .collect(),
            n_per_class,
        };
        let run = RepeatResult {
            split: int(c_split)? as usize,
            repeat: int(c_repeat)? as usize,
            seed: int(c_seed)?,
            report,
        };
        match grouped.iter_mut().find(|(m, _)| *m == method) {
            Some((_, runs)) => runs.push(run),
            None => grouped.push((method, vec![run])),
        }
    }
    Ok(grouped
        .into_iter()
        .map(|(method, runs)| {
            let q = runs.first().map_or(0, |r| r.report.num_classes());
            ExperimentReport::from_runs(method, q, runs)
        })
        .collect())
}

/// Plain-text comparison table: one row per method with the cross-split
/// means of Acc, AMAE, MMAE and GM (standard deviations in parentheses).
pub fn render_table(title: &str, reports: &[ExperimentReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:<8} {:>16} {:>16} {:>16} {:>16}",
        "Config", "Method", "Acc", "AMAE", "MMAE", "GM"
    );
    for rep in reports {
        let m = rep.mean;
        let s = rep.mean_std();
        let _ = writeln!(
            out,
            "{:<14} {:<8} {:>16} {:>16} {:>16} {:>16}",
            title,
            rep.method.name(),
            format!("{:.2} ({:.2})", m.acc, s.acc),
            format!("{:.4} ({:.4})", m.amae, s.amae),
            format!("{:.4} ({:.4})", m.mmae, s.mmae),
            format!("{:.2} ({:.2})", m.gms, s.gms),
        );
    }
    out
}

// ---------------------------------------------------------------------------
// models

/// A fitted model together with everything needed to window new data for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub model: FittedModel,
    pub scale: OrdinalScale,
    pub delta: usize,
    pub horizon: usize,
    pub standardization: Standardization,
}

impl ModelFile {
    pub fn new(model: FittedModel, train: &WindowedDataset) -> Self {
        ModelFile {
            model,
            scale: train.scale.clone(),
            delta: train.delta,
            horizon: train.horizon,
            standardization: train.standardization.clone(),
        }
    }
}

pub fn write_model(path: &Path, model: &ModelFile) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(model)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))
}

/// Per-pattern predictions: origin hour, current, target and predicted
/// labels, gate output (blank without a gate) and class probabilities.
pub fn trace_csv(model: &FittedModel, ds: &WindowedDataset) -> Result<Vec<u8>> {
    if let Some(dim) = model.input_dim() {
        if dim != ds.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: ds.input_dim(),
            });
        }
    }
    let q = ds.num_classes();
    csv_bytes(|w| {
        let mut header: Vec<String> = ["t", "current_label", "true_label", "predicted_label", "gate_alpha"]
            .map(String::from)
            .to_vec();
        header.extend((1..=q).map(|c| format!("p_C{c}")));
        w.write_record(&header)?;
        for p in &ds.patterns {
            let probs = model.probs(p, q)?;
            let pred = model.predict(p)?;
            let alpha = model.gate_alpha(&p.z)?;
            let mut row = vec![
                (p.origin_t + ds.horizon as i64).to_string(),
                p.current_label.rank().to_string(),
                p.target.rank().to_string(),
                pred.rank().to_string(),
                alpha.map_or(String::new(), |a| a.to_string()),
            ];
            row.extend(probs.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// run configuration

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRunConfig {
    method: OneOrMany,
    #[serde(default = "default_delta")]
    delta: usize,
    #[serde(default = "default_horizon")]
    horizon: usize,
    #[serde(default)]
    grid: Grid,
    repeats: Option<usize>,
    #[serde(default)]
    seed: u64,
    cv_folds: Option<usize>,
    selection_metric: Option<String>,
    threads: Option<usize>,
    data: DataConfig,
}

fn default_delta() -> usize {
    1
}

fn default_horizon() -> usize {
    1
}

/// Where the series come from and how they are cut into train/test splits.
///
/// With two or more blocks (files, or synthetic blocks) each block is held out
/// once as the test set. A single block is cut chronologically at
/// `test_fraction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub files: Vec<PathBuf>,
    pub synthetic: Option<GenConfig>,
    /// Number of synthetic blocks, each generated with seed `synthetic.seed + b`.
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    /// `"rvr"` or `"cloud_height"`.
    pub scale: Option<String>,
    pub thresholds: Option<Vec<f64>>,
    pub num_classes: Option<usize>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
}

fn default_blocks() -> usize {
    1
}

fn default_test_fraction() -> f64 {
    0.3
}

impl DataConfig {
    pub fn ordinal_scale(&self) -> Result<OrdinalScale> {
        let mut chosen = Vec::new();
        if let Some(name) = &self.scale {
            chosen.push(match name.to_ascii_lowercase().as_str() {
                "rvr" => OrdinalScale::rvr(),
                "ch" | "cloud_height" => OrdinalScale::cloud_height(),
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "key `data.scale`: unknown scale {other:?}; expected rvr or cloud_height"
                    )))
                }
            });
        }
        if let Some(t) = &self.thresholds {
            chosen.push(OrdinalScale::new(t.clone())?);
        }
        if let Some(q) = self.num_classes {
            chosen.push(OrdinalScale::with_classes(q)?);
        }
        if let Some(g) = &self.synthetic {
            if chosen.is_empty() {
                chosen.push(OrdinalScale::with_classes(g.num_classes)?);
            }
        }
        match chosen.len() {
            1 => Ok(chosen.pop().expect("one scale")),
            0 => Err(Error::InvalidConfig(
                "the data section needs one of `scale`, `thresholds` or `num_classes`".into(),
            )),
            _ => Err(Error::InvalidConfig(
                "give only one of `data.scale`, `data.thresholds` and `data.num_classes`".into(),
            )),
        }
    }

    /// Loads (or generates) the raw blocks. Relative paths resolve against `base`.
    pub fn load_blocks(&self, base: &Path, scale: &OrdinalScale) -> Result<Vec<Vec<TimeSeriesRecord>>> {
        match (&self.synthetic, self.files.is_empty()) {
            (Some(g), true) => {
                if self.blocks == 0 {
                    return Err(Error::InvalidConfig("key `data.blocks` must be at least 1".into()));
                }
                if g.num_classes != scale.num_classes() {
                    return Err(Error::InvalidConfig(format!(
                        "synthetic data has {} classes but the scale has {}",
                        g.num_classes,
                        scale.num_classes()
                    )));
                }
                (0..self.blocks)
                    .map(|b| {
                        generate(&GenConfig {
                            seed: g.seed.wrapping_add(b as u64),
                            ..g.clone()
                        })
                    })
                    .collect()
            }
            (None, false) => self
                .files
                .iter()
                .map(|f| read_series(&base.join(f), Some(scale)))
                .collect(),
            (Some(_), false) => Err(Error::InvalidConfig(
                "use either `data.files` or `data.synthetic`, not both".into(),
            )),
            (None, true) => Err(Error::InvalidConfig(
                "the data section needs `files` or a `synthetic` table".into(),
            )),
        }
    }

    pub fn splits(&self, base: &Path, delta: usize, horizon: usize) -> Result<Vec<(WindowedDataset, WindowedDataset)>> {
        let scale = self.ordinal_scale()?;
        let blocks = self.load_blocks(base, &scale)?;
        if blocks.len() == 1 {
            Ok(vec![chronological_split(
                &blocks[0],
                delta,
                horizon,
                &scale,
                self.test_fraction,
            )?])
        } else {
            leave_one_block_out(&blocks, delta, horizon, &scale)
        }
    }
}

/// A parsed experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub methods: Vec<Method>,
    pub delta: usize,
    pub horizon: usize,
    pub grid: Grid,
    pub repeats: usize,
    pub seed: u64,
    pub cv_folds: usize,
    pub selection_metric: SelectionMetric,
    pub threads: Option<usize>,
    pub data: DataConfig,
    /// Directory relative file paths resolve against.
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn spec(&self, method: Method) -> TrainSpec {
        TrainSpec {
            method,
            grid: self.grid.clone(),
            repeats: self.repeats,
            seed: self.seed,
            cv_folds: self.cv_folds,
            selection_metric: self.selection_metric,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("key `method`: list at least one method".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("key `horizon` must be at least 1".into()));
        }
        for &m in &self.methods {
            self.spec(m)
                .validate()
                .map_err(|e| Error::InvalidConfig(format!("method {m}: {e}")))?;
        }
        Ok(())
    }
}

fn toml_line(text: &str, err: &toml::de::Error) -> u64 {
    err.span()
        .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1)
}

pub fn parse_run_config(text: &str, path: &Path) -> Result<RunConfig> {
    let raw: RawRunConfig =
        toml::from_str(text).map_err(|e| Error::parse(path, toml_line(text, &e), e.message().to_string()))?;
    let names = match raw.method {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    };
    let methods = names
        .iter()
        .map(|n| {
            n.parse::<Method>()
                .map_err(|e| Error::InvalidConfig(format!("key `method`: {}", strip_prefix(&e))))
        })
        .collect::<Result<Vec<_>>>()?;
    let selection_metric = match raw.selection_metric {
        None => SelectionMetric::default(),
        Some(s) => s
            .parse()
            .map_err(|e| Error::InvalidConfig(format!("key `selection_metric`: {}", strip_prefix(&e))))?,
    };
    let cfg = RunConfig {
        methods,
        delta: raw.delta,
        horizon: raw.horizon,
        grid: raw.grid,
        repeats: raw.repeats.unwrap_or(10),
        seed: raw.seed,
        cv_folds: raw.cv_folds.unwrap_or(5),
        selection_metric,
        threads: raw.threads,
        data: raw.data,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::InvalidConfig(m) => m.clone(),
        other => other.to_string(),
    }
}

pub fn read_run_config(path: &Path) -> Result<RunConfig> {
    let text = read_file(path)?;
    parse_run_config(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem.csv")
    }

    #[test]
    fn parses_label_file() {
        let text = "timestamp,hour,temp,label\n0,0,1.5,1\n1,1,2.5,2\n3,3,-1,3\n";
        let s = parse_series(text, p(), Some(&OrdinalScale::with_classes(3).unwrap())).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[2].features, vec![3.0, -1.0]);
        assert_eq!(s[2].label.rank(), 3);
        assert_eq!(s[1].raw_value, None);
    }

    #[test]
    fn discretizes_raw_values() {
        let text = "timestamp,x1,raw_value\n0,0,100\n1,0,300\n2,0,2000\n";
        let s = parse_series(text, p(), Some(&OrdinalScale::rvr())).unwrap();
        let ranks: Vec<usize> = s.iter().map(|r| r.label.rank()).collect();
        assert_eq!(ranks, vec![1, 2, 4]);
        assert_eq!(s[1].raw_value, Some(300.0));
        assert!(parse_series(text, p(), None).is_err());
    }

    #[test]
    fn rejects_duplicate_timestamp_with_line() {
        let text = "timestamp,x1,label\n0,0,1\n1,0,1\n1,0,2\n";
        match parse_series(text, p(), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_malformed_rows() {
        let bad = [
            "timestamp,x1,label\n0,abc,1\n",
            "timestamp,x1,label\n0,1\n",
            "timestamp,x1,label\n0,1,0\n",
            "timestamp,x1,label\n0,1,5\n",
            "timestamp,x1,label\n0,inf,1\n",
            "time,x1,label\n0,1,1\n",
            "timestamp,label,raw_value\n0,1,1\n",
        ];
        for text in bad {
            assert!(
                parse_series(text, p(), Some(&OrdinalScale::with_classes(3).unwrap())).is_err(),
                "{text}"
            );
        }
        match parse_series(bad[0], p(), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_method_names_the_key() {
        let text = "method = [\"Persist\", \"Oracle\"]\n[data]\nnum_classes = 3\nfiles = [\"a.csv\"]\n";
        let err = parse_run_config(text, Path::new("run.toml")).unwrap_err().to_string();
        assert!(err.contains("`method`") && err.contains("Oracle"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let text = "method = \"STME\"\nrepeat = 3\n[data]\nnum_classes = 3\n";
        match parse_run_config(text, Path::new("run.toml")) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("repeat"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn full_config() {
        let text = r#"
method = ["Persist", "STMEIC"]
delta = 3
horizon = 6
repeats = 2
seed = 7
cv_folds = 3
selection_metric = "mmae"

[grid]
m = [5, 10]
iter = [100]
lambda = [0.0, 0.001]

[data]
blocks = 3

[data.synthetic]
num_steps = 500
num_classes = 4
feature_dim = 3
base_persistence = 0.85
switch_signal_strength = 4.0
"#;
        let cfg = parse_run_config(text, Path::new("dir/run.toml")).unwrap();
        assert_eq!(cfg.methods, vec![Method::Persist, Method::Stmeic]);
        assert_eq!((cfg.delta, cfg.horizon, cfg.repeats, cfg.cv_folds), (3, 6, 2, 3));
        assert_eq!(cfg.selection_metric, SelectionMetric::Mmae);
        assert_eq!(cfg.grid.m, vec![5, 10]);
        assert_eq!(cfg.base_dir, Path::new("dir"));
        let splits = cfg.data.splits(&cfg.base_dir, cfg.delta, cfg.horizon).unwrap();
        assert_eq!(splits.len(), 3);
        assert_eq!(splits[0].0.num_classes(), 4);
    }
}
