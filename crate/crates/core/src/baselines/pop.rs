use serde::{Deserialize, Serialize};

use crate::data::SessionDataset;
use crate::error::{Error, Result};
use crate::eval::Recommender;

/// Recommends the globally most frequent training items.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopModel {
    pub counts: Vec<u64>,
    /// All items by descending count, ties by ascending index.
    pub ranking: Vec<usize>,
}

impl PopModel {
    pub fn fit(train: &SessionDataset, n_items: usize) -> Result<Self> {
        if train.num_events() == 0 {
            return Err(Error::Config("POP needs a nonempty training split".into()));
        }
        let mut counts = vec![0u64; n_items];
        for &i in train.sequences.iter().flatten() {
            *counts.get_mut(i).ok_or(Error::Vocabulary { index: i, size: n_items })? += 1;
        }
        Ok(Self::from_counts(counts))
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        let mut ranking: Vec<usize> = (0..counts.len()).collect();
        ranking.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
        PopModel { counts, ranking }
    }

    pub fn predict(&self, k: usize) -> &[usize] {
        &self.ranking[..k.min(self.ranking.len())]
    }
}

impl Recommender for PopModel {
    fn n_items(&self) -> usize {
        self.counts.len()
    }

    fn recommend_prefixes(&self, seqs: &[&[usize]], k: usize) -> Result<Vec<Vec<Vec<usize>>>> {
        let top = self.predict(k).to_vec();
        Ok(seqs.iter().map(|s| vec![top.clone(); s.len().saturating_sub(1)]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;

    #[test]
    fn ranks_by_count_then_index() {
        // a=0 ×5, b=1 ×3, c=2 ×1
        let p = PopModel::from_counts(vec![5, 3, 1]);
        assert_eq!(p.predict(2), [0, 1]);
        assert_eq!(PopModel::from_counts(vec![2, 2, 2, 2]).predict(2), [0, 1]);
        assert_eq!(p.predict(10), [0, 1, 2]);
    }

    #[test]
    fn fit_counts_events() {
        let ds = SessionDataset::new(Split::Train, vec![vec![2, 1], vec![1, 1, 0]]);
        let p = PopModel::fit(&ds, 3).unwrap();
        assert_eq!(p.counts, [1, 3, 1]);
        assert_eq!(p.counts.iter().sum::<u64>(), ds.num_events() as u64);
    }
}
