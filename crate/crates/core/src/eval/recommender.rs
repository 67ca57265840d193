use crate::data::TransitionStructure;
use crate::error::{Error, Result};
use crate::layers::Model;
use crate::numkernel::Real;

/// Anything that ranks next items after a prefix.
pub trait Recommender: Sync {
    fn n_items(&self) -> usize;

    /// For each sequence, the top-`k` list after every prefix `seq[..=t]`
    /// with `t + 1 < len`, in position order.
    fn recommend_prefixes(&self, seqs: &[&[usize]], k: usize) -> Result<Vec<Vec<Vec<usize>>>>;

    /// Upper bound on `Σ (len − 1) × n_items` per call, to cap memory.
    fn chunk_budget(&self) -> usize {
        usize::MAX
    }
}

/// Indices of the `k` highest scores, best first, ties by ascending index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let k = k.min(scores.len());
    if k == 0 {
        return Vec::new();
    }
    let cmp = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    idx
}

fn check_items(seqs: &[&[usize]], n_items: usize) -> Result<()> {
    match seqs.iter().flat_map(|s| s.iter()).find(|&&i| i >= n_items) {
        Some(&index) => Err(Error::Vocabulary { index, size: n_items }),
        None => Ok(()),
    }
}

impl<T: Real + Send + Sync> Recommender for Model<T> {
    fn n_items(&self) -> usize {
        self.config.n_o
    }

    fn recommend_prefixes(&self, seqs: &[&[usize]], k: usize) -> Result<Vec<Vec<Vec<usize>>>> {
        check_items(seqs, self.config.n_o)?;
        let scorable: Vec<&[usize]> = seqs.iter().copied().filter(|s| s.len() >= 2).collect();
        let mut out = Vec::with_capacity(seqs.len());
        if scorable.is_empty() {
            return Ok(vec![Vec::new(); seqs.len()]);
        }
        let logits = self.prefix_logits(&scorable)?;
        let mut row = 0;
        let mut scores = vec![0.0; self.config.n_o];
        for s in seqs {
            let mut lists = Vec::with_capacity(s.len().saturating_sub(1));
            for _ in 1..s.len().max(1) {
                for (d, v) in scores.iter_mut().zip(logits.row(row)) {
                    *d = v.to_f64_lossy();
                }
                lists.push(top_k(&scores, k));
                row += 1;
            }
            out.push(lists);
        }
        Ok(out)
    }

    fn chunk_budget(&self) -> usize {
        1 << 24
    }
}

/// The Bayes-optimal predictor of a planted synthetic structure.
pub struct BayesOracle<'a>(pub &'a TransitionStructure);

impl Recommender for BayesOracle<'_> {
    fn n_items(&self) -> usize {
        self.0.n_items
    }

    fn recommend_prefixes(&self, seqs: &[&[usize]], k: usize) -> Result<Vec<Vec<Vec<usize>>>> {
        check_items(seqs, self.0.n_items)?;
        seqs.iter()
            .map(|s| (1..s.len()).map(|t| self.0.top_k(&s[..t], k)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_k_orders_and_breaks_ties_by_index() {
        assert_eq!(top_k(&[0.1, 0.5, 0.5, 0.9, 0.0], 3), [3, 1, 2]);
        assert_eq!(top_k(&[1.0; 4], 2), [0, 1]);
        assert_eq!(top_k(&[0.2, 0.1], 5), [0, 1]);
        assert!(top_k(&[0.2], 0).is_empty());
    }
}
