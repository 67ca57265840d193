use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use super::SessionDataset;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetStats {
    pub sequences: usize,
    pub events: usize,
    pub distinct_items: usize,
    /// `(length, number of sequences)`, ascending by length.
    pub length_histogram: Vec<(usize, usize)>,
    /// `(k, share of events)` covered by the `k` most frequent items.
    pub cumulative_items: Vec<(usize, f64)>,
}

pub fn stats(ds: &SessionDataset) -> DatasetStats {
    let mut hist = BTreeMap::new();
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for s in &ds.sequences {
        *hist.entry(s.len()).or_insert(0usize) += 1;
        for &i in s {
            *freq.entry(i).or_insert(0) += 1;
        }
    }
    let events = ds.num_events();
    let mut counts: Vec<usize> = freq.values().copied().collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let mut covered = 0usize;
    let cumulative_items = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            covered += c;
            (k + 1, covered as f64 / events as f64)
        })
        .collect();
    DatasetStats {
        sequences: ds.len(),
        events,
        distinct_items: freq.len(),
        length_histogram: hist.into_iter().collect(),
        cumulative_items,
    }
}

impl DatasetStats {
    /// `key=value` lines.
    pub fn key_values(&self) -> String {
        let mean = if self.sequences == 0 {
            0.0
        } else {
            self.events as f64 / self.sequences as f64
        };
        format!(
            "sequences={}\nevents={}\ndistinct_items={}\nmean_length={mean:.6}\n",
            self.sequences, self.events, self.distinct_items
        )
    }

    /// Tab-separated `length  count` table with a header.
    pub fn length_table(&self) -> String {
        let mut out = String::from("length\tsequences\n");
        for (l, c) in &self.length_histogram {
            writeln!(out, "{l}\t{c}").unwrap();
        }
        out
    }

    /// Tab-separated `(item share, event share)` curve with a header.
    pub fn cumulative_table(&self) -> String {
        let mut out = String::from("top_items\titem_share\tevent_share\n");
        let n = self.distinct_items.max(1) as f64;
        for (k, share) in &self.cumulative_items {
            writeln!(out, "{k}\t{:.6}\t{share:.6}", *k as f64 / n).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;

    #[test]
    fn counts_and_curve() {
        // a=0, b=1, c=2
        let s = stats(&SessionDataset::new(Split::Train, vec![vec![0, 1], vec![1, 2, 1]]));
        assert_eq!((s.sequences, s.events, s.distinct_items), (2, 5, 3));
        assert_eq!(s.length_histogram, [(2, 1), (3, 1)]);
        assert_eq!(s.cumulative_items[0], (1, 0.6));
        assert_eq!(s.cumulative_items[2].1, 1.0);
        assert!(s.key_values().starts_with("sequences=2\nevents=5\n"));
    }
}
