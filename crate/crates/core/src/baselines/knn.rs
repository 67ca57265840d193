use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::PopModel;
use crate::data::SessionDataset;
use crate::error::{Error, Result};
use crate::eval::Recommender;

/// Item-to-item neighbours by `cooc(i, j) / (freq(i) · freq(j))`, where
/// `cooc` counts the training sequences containing both items and `freq`
/// counts events.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemKnnModel {
    pub freq: Vec<u64>,
    /// `neighbours[i]`: `(j, cooc(i, j))` for every `j ≠ i` seen with `i`,
    /// ascending by `j`.
    pub neighbours: Vec<Vec<(usize, u64)>>,
    pub pop: PopModel,
}

impl ItemKnnModel {
    pub fn fit(train: &SessionDataset, n_items: usize) -> Result<Self> {
        let pop = PopModel::fit(train, n_items)?;
        let mut pairs: HashMap<(usize, usize), u64> = HashMap::new();
        for seq in &train.sequences {
            let distinct: Vec<usize> = seq.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
            for (a, &i) in distinct.iter().enumerate() {
                for &j in &distinct[a + 1..] {
                    *pairs.entry((i, j)).or_insert(0) += 1;
                }
            }
        }
        let mut neighbours = vec![Vec::new(); n_items];
        for ((i, j), c) in pairs {
            neighbours[i].push((j, c));
            neighbours[j].push((i, c));
        }
        for row in &mut neighbours {
            row.sort_unstable();
        }
        Ok(ItemKnnModel {
            freq: pop.counts.clone(),
            neighbours,
            pop,
        })
    }

    pub fn similarity(&self, i: usize, j: usize) -> f64 {
        let row = &self.neighbours[i];
        match row.binary_search_by_key(&j, |&(n, _)| n) {
            Ok(pos) => row[pos].1 as f64 / (self.freq[i] as f64 * self.freq[j] as f64),
            Err(_) => 0.0,
        }
    }

    /// Top-`k` items most similar to `item`, excluding it; slots left after
    /// the co-occurring items are filled in popularity order.
    pub fn predict(&self, item: usize, k: usize) -> Result<Vec<usize>> {
        let n = self.freq.len();
        if item >= n {
            return Err(Error::Vocabulary { index: item, size: n });
        }
        let mut cands = self.neighbours[item].clone();
        // Exact comparison of c_a / f_a against c_b / f_b (the shared
        // freq(item) factor cancels).
        let cmp = |&(a, ca): &(usize, u64), &(b, cb): &(usize, u64)| -> Ordering {
            let lhs = ca as u128 * self.freq[b] as u128;
            let rhs = cb as u128 * self.freq[a] as u128;
            rhs.cmp(&lhs).then(a.cmp(&b))
        };
        cands.sort_unstable_by(cmp);
        let mut out: Vec<usize> = cands.iter().take(k).map(|&(j, _)| j).collect();
        if out.len() < k {
            let taken: BTreeSet<usize> = out.iter().copied().chain([item]).collect();
            out.extend(self.pop.ranking.iter().copied().filter(|j| !taken.contains(j)).take(k - out.len()));
        }
        Ok(out)
    }
}

impl Recommender for ItemKnnModel {
    fn n_items(&self) -> usize {
        self.freq.len()
    }

    fn recommend_prefixes(&self, seqs: &[&[usize]], k: usize) -> Result<Vec<Vec<Vec<usize>>>> {
        seqs.iter()
            .map(|s| (0..s.len().saturating_sub(1)).map(|t| self.predict(s[t], k)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;

    #[test]
    fn hand_enumerated_tie() {
        // a=0, b=1, c=2: freq a=3, b=2, c=1; sim(a,b) = 2/6 = sim(a,c) = 1/3.
        let ds = SessionDataset::new(Split::Train, vec![vec![0, 1], vec![0, 1], vec![0, 2]]);
        let m = ItemKnnModel::fit(&ds, 3).unwrap();
        assert_eq!(m.freq, [3, 2, 1]);
        assert_eq!(m.similarity(0, 1), 2.0 / 6.0);
        assert_eq!(m.similarity(1, 2), 0.0);
        assert_eq!(m.predict(0, 2).unwrap(), [1, 2]);
    }

    #[test]
    fn isolated_item_falls_back_to_popularity() {
        let ds = SessionDataset::new(Split::Train, vec![vec![0, 1], vec![1, 2], vec![3, 3]]);
        let m = ItemKnnModel::fit(&ds, 4).unwrap();
        assert_eq!(m.predict(3, 2).unwrap(), [1, 0]);
        assert!(matches!(m.predict(4, 1), Err(Error::Vocabulary { .. })));
    }

    #[test]
    fn pairs_count_once_per_sequence() {
        let ds = SessionDataset::new(Split::Train, vec![vec![0, 1, 0, 1]]);
        let m = ItemKnnModel::fit(&ds, 2).unwrap();
        assert_eq!(m.neighbours[0], [(1, 1)]);
    }
}
