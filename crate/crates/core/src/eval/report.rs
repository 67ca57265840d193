use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{bucket_breakdown, mean_points, per_offset_recall, point_recalls, sum_points};
use super::uplift::{sequence_totals, uplift_ci, SequenceTotals, Uplift};
use super::{BucketRow, OffsetPoint, Recommendations};
use crate::data::SessionDataset;
use crate::error::{Error, Result};

pub fn metric_key(k: usize, n: usize) -> String {
    format!("Recall@{k},{n}")
}

/// Aggregated evaluation of one model on one split. Field names are a
/// stable output contract.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub k: usize,
    pub n_values: Vec<usize>,
    pub recall: BTreeMap<String, f64>,
    pub points: usize,
    pub sequences: usize,
    pub per_offset: Vec<OffsetPoint>,
    pub buckets: BTreeMap<String, Vec<BucketRow>>,
    pub params: Option<usize>,
    pub baseline: Option<String>,
    pub uplift: BTreeMap<String, Uplift>,
    /// Per-sequence `(sum, points)` for each metric, so uplifts can be
    /// bootstrapped against this report later.
    pub sequence_totals: BTreeMap<String, SequenceTotals>,
}

pub struct ReportSpec<'a> {
    pub model: &'a str,
    pub k: usize,
    pub n_values: &'a [usize],
    pub max_offset: usize,
    pub buckets: &'a [(usize, usize)],
    pub params: Option<usize>,
}

impl EvalReport {
    pub fn build(recs: &Recommendations, ds: &SessionDataset, spec: &ReportSpec<'_>) -> Result<Self> {
        if spec.n_values.is_empty() {
            return Err(Error::Config("at least one N is required".into()));
        }
        let mut recall = BTreeMap::new();
        let mut buckets = BTreeMap::new();
        let mut totals = BTreeMap::new();
        let mut points = 0;
        for &n in spec.n_values {
            let key = metric_key(spec.k, n);
            let p = point_recalls(recs, ds, spec.k, n)?;
            points = sum_points(&p).1;
            recall.insert(key.clone(), mean_points(&p));
            buckets.insert(key.clone(), bucket_breakdown(&p, ds, spec.buckets)?);
            totals.insert(key, sequence_totals(&p));
        }
        Ok(EvalReport {
            model: spec.model.to_string(),
            k: spec.k,
            n_values: spec.n_values.to_vec(),
            recall,
            points,
            sequences: ds.len(),
            per_offset: per_offset_recall(recs, ds, spec.k, spec.max_offset.max(1))?,
            buckets,
            params: spec.params,
            baseline: None,
            uplift: BTreeMap::new(),
            sequence_totals: totals,
        })
    }

    /// Adds uplifts over `baseline` for every metric both reports share.
    pub fn attach_uplift(&mut self, baseline: &EvalReport, resamples: usize, seed: u64) -> Result<()> {
        let mut uplift = BTreeMap::new();
        for (key, mine) in &self.sequence_totals {
            if let Some(theirs) = baseline.sequence_totals.get(key) {
                uplift.insert(key.clone(), uplift_ci(mine, theirs, resamples, seed)?);
            }
        }
        if uplift.is_empty() {
            return Err(Error::Config(format!("baseline report `{}` shares no metric", baseline.model)));
        }
        self.uplift = uplift;
        self.baseline = Some(baseline.model.clone());
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// `key=value` aggregates.
    pub fn summary(&self) -> String {
        let mut out = format!("model={}\npoints={}\nsequences={}\n", self.model, self.points, self.sequences);
        if let Some(p) = self.params {
            writeln!(out, "params={p}").unwrap();
        }
        for (k, v) in &self.recall {
            writeln!(out, "{k}={v:.6}").unwrap();
        }
        for (k, u) in &self.uplift {
            writeln!(out, "uplift {k}={:.2}% [{:.2}, {:.2}]", u.uplift, u.lo, u.hi).unwrap();
        }
        out
    }

    /// Writes `report.json`, `summary.txt`, `per_offset.tsv` and `buckets.tsv`
    /// (plus `uplift.tsv` when present) into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, body: String| {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
        };
        put("report.json", serde_json::to_string_pretty(self)? + "\n")?;
        put("summary.txt", self.summary())?;
        let mut offsets = String::from("offset\trecall\tpoints\n");
        for o in &self.per_offset {
            writeln!(offsets, "{}\t{:.6}\t{}", o.offset, o.recall, o.points).unwrap();
        }
        put("per_offset.tsv", offsets)?;
        let mut buckets = String::from("metric\tbucket\trecall\tpoints\tsequences\n");
        for (key, rows) in &self.buckets {
            for r in rows {
                writeln!(buckets, "{key}\t[{}-{}]\t{:.6}\t{}\t{}", r.lo, r.hi, r.recall, r.points, r.sequences).unwrap();
            }
        }
        put("buckets.tsv", buckets)?;
        if !self.uplift.is_empty() {
            let mut t = String::from("metric\tuplift_pct\tci_lo\tci_hi\n");
            for (k, u) in &self.uplift {
                writeln!(t, "{k}\t{:.4}\t{:.4}\t{:.4}", u.uplift, u.lo, u.hi).unwrap();
            }
            put("uplift.tsv", t)?;
        }
        Ok(())
    }
}
