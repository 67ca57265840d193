use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Recommender;
use crate::data::SessionDataset;
use crate::error::{Error, Result};

/// Top-K lists for every evaluation point: `lists[seq][t]` is the
/// recommendation made after `seq[..=t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Recommendations {
    pub k: usize,
    pub lists: Vec<Vec<Vec<usize>>>,
}

/// `|S_rec ∩ S_rel| / |S_rel|` with both treated as sets.
pub fn recall_k_n(s_rec: &[usize], s_rel: &[usize]) -> f64 {
    let rel: BTreeSet<usize> = s_rel.iter().copied().collect();
    assert!(!rel.is_empty(), "relevant set must be nonempty");
    let rec: BTreeSet<usize> = s_rec.iter().copied().collect();
    rel.intersection(&rec).count() as f64 / rel.len() as f64
}

/// Runs the recommender over every evaluation point of `ds`, fanning out
/// over `threads` workers. Results are in dataset order regardless.
pub fn recommend_all(model: &dyn Recommender, ds: &SessionDataset, k: usize, threads: usize) -> Result<Recommendations> {
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    let budget = model.chunk_budget();
    let n_items = model.n_items().max(1);
    let mut chunks: Vec<(usize, usize)> = Vec::new();
    let (mut start, mut cost) = (0, 0usize);
    for (i, s) in ds.sequences.iter().enumerate() {
        let c = s.len().saturating_sub(1).saturating_mul(n_items);
        if i > start && (cost.saturating_add(c) > budget || i - start >= 512) {
            chunks.push((start, i));
            start = i;
            cost = 0;
        }
        cost = cost.saturating_add(c);
    }
    if start < ds.len() {
        chunks.push((start, ds.len()));
    }
    let run = |&(lo, hi): &(usize, usize)| {
        let seqs: Vec<&[usize]> = ds.sequences[lo..hi].iter().map(Vec::as_slice).collect();
        model.recommend_prefixes(&seqs, k)
    };
    let parts: Vec<Result<Vec<Vec<Vec<usize>>>>> = if threads <= 1 {
        chunks.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| chunks.par_iter().map(run).collect())
    };
    let mut lists = Vec::with_capacity(ds.len());
    for p in parts {
        lists.extend(p?);
    }
    Ok(Recommendations { k, lists })
}

/// Recall@K,N of every evaluation point, grouped by sequence. `k` may be
/// at most the depth of `recs`; shorter lists are prefixes of longer ones.
pub fn point_recalls(recs: &Recommendations, ds: &SessionDataset, k: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    if k == 0 || k > recs.k || n == 0 {
        return Err(Error::Config(format!("need 1 ≤ K ≤ {} and N ≥ 1 (got K={k}, N={n})", recs.k)));
    }
    Ok(ds
        .sequences
        .iter()
        .zip(&recs.lists)
        .map(|(seq, lists)| {
            lists
                .iter()
                .enumerate()
                .map(|(t, list)| {
                    let rel = &seq[t + 1..(t + 1 + n).min(seq.len())];
                    recall_k_n(&list[..k.min(list.len())], rel)
                })
                .collect()
        })
        .collect())
}

/// Sum and count of per-point values, in sequence order.
pub fn sum_points(points: &[Vec<f64>]) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0;
    for seq in points {
        for &v in seq {
            sum += v;
            count += 1;
        }
    }
    (sum, count)
}

pub fn mean_points(points: &[Vec<f64>]) -> f64 {
    let (sum, count) = sum_points(points);
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Recall@K,N for every `N` in `ns`.
pub fn evaluate(model: &dyn Recommender, ds: &SessionDataset, k: usize, ns: &[usize], threads: usize) -> Result<Vec<f64>> {
    let recs = recommend_all(model, ds, k, threads)?;
    ns.iter().map(|&n| Ok(mean_points(&point_recalls(&recs, ds, k, n)?))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetPoint {
    pub offset: usize,
    pub recall: f64,
    pub points: usize,
}

/// Share of evaluation points whose item `d + 1` steps ahead is in the
/// top-K list, for `d = 0..max_offset`. Offset 0 is Recall@K,1.
pub fn per_offset_recall(recs: &Recommendations, ds: &SessionDataset, k: usize, max_offset: usize) -> Result<Vec<OffsetPoint>> {
    if max_offset == 0 || k == 0 || k > recs.k {
        return Err(Error::Config("per-offset recall needs max_offset ≥ 1 and 1 ≤ K ≤ depth".into()));
    }
    (0..max_offset)
        .map(|d| {
            let points: Vec<Vec<f64>> = ds
                .sequences
                .iter()
                .zip(&recs.lists)
                .map(|(seq, lists)| {
                    lists
                        .iter()
                        .enumerate()
                        .filter(|(t, _)| t + 1 + d < seq.len())
                        .map(|(t, list)| {
                            let hit = list[..k.min(list.len())].contains(&seq[t + 1 + d]);
                            if hit {
                                1.0
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
            let (_, count) = sum_points(&points);
            Ok(OffsetPoint {
                offset: d,
                recall: mean_points(&points),
                points: count,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub lo: usize,
    pub hi: usize,
    pub recall: f64,
    pub points: usize,
    pub sequences: usize,
}

pub const DEFAULT_BUCKETS: [(usize, usize); 3] = [(2, 5), (6, 25), (26, 200)];

/// Parses `"2-5,6-25,26-200"`.
pub fn parse_buckets(spec: &str) -> Result<Vec<(usize, usize)>> {
    spec.split(',')
        .map(|part| {
            let (lo, hi) = part
                .trim()
                .split_once('-')
                .ok_or_else(|| Error::Config(format!("bucket `{part}` is not lo-hi")))?;
            let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad bucket bound `{s}`")));
            Ok((parse(lo)?, parse(hi)?))
        })
        .collect()
}

/// Mean point recall per bucket of full sequence length (inclusive bounds).
/// Sequences outside every bucket are left out.
pub fn bucket_breakdown(points: &[Vec<f64>], ds: &SessionDataset, buckets: &[(usize, usize)]) -> Result<Vec<BucketRow>> {
    let mut sorted = buckets.to_vec();
    sorted.sort_unstable();
    for b in &sorted {
        if b.0 > b.1 {
            return Err(Error::Config(format!("bucket [{}-{}] is empty", b.0, b.1)));
        }
    }
    if let Some(w) = sorted.windows(2).find(|w| w[1].0 <= w[0].1) {
        return Err(Error::Config(format!(
            "buckets [{}-{}] and [{}-{}] overlap",
            w[0].0, w[0].1, w[1].0, w[1].1
        )));
    }
    Ok(buckets
        .iter()
        .map(|&(lo, hi)| {
            let members: Vec<Vec<f64>> = ds
                .sequences
                .iter()
                .zip(points)
                .filter(|(s, _)| (lo..=hi).contains(&s.len()))
                .map(|(_, p)| p.clone())
                .collect();
            let (_, count) = sum_points(&members);
            BucketRow {
                lo,
                hi,
                recall: mean_points(&members),
                points: count,
                sequences: members.len(),
            }
        })
        .collect())
}
