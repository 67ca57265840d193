//! Synthetic sessions drawn from a planted Markov structure, so that the
//! best achievable recall is known.
//!
//! A structure of order 2 is stored as one next-item distribution per
//! `(current item, group of previous item)` state, where the group of an
//! item is `item % groups`. Order 1 is the special case `groups == 1`.
//! Sequences start from the stationary state distribution, so every
//! position of every sequence is distributed alike.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SessionDataset, Split};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthOrder {
    /// Each item has `fanout` successors with weights ∝ (rank + 1)^−skew.
    Markov1,
    /// Successors depend on the current item and the group of the previous one.
    Markov2,
    /// `i → i + 1 (mod n)`.
    Cycle,
    /// Every item equally likely at every step.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_items: usize,
    pub n_sequences: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub order: SynthOrder,
    pub fanout: usize,
    pub skew: f64,
    pub groups: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_items: 1000,
            n_sequences: 50_000,
            min_len: 2,
            max_len: 40,
            order: SynthOrder::Markov1,
            fanout: 30,
            skew: 1.0,
            groups: 4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionStructure {
    pub n_items: usize,
    pub groups: usize,
    /// Sparse next-item distribution of state `cur * groups + group(prev)`.
    pub table: Vec<Vec<(usize, f64)>>,
    /// Stationary distribution over the same states.
    pub stationary: Vec<f64>,
}

fn skewed_weights(n: usize, skew: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|r| ((r + 1) as f64).powf(-skew)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Total probability of the `k` likeliest items (ties do not change it).
fn top_k_mass(dist: &[f64], k: usize) -> f64 {
    let mut p = dist.to_vec();
    p.sort_unstable_by(|a, b| b.total_cmp(a));
    p.iter().take(k).sum()
}

impl TransitionStructure {
    /// Builds a structure and computes its stationary distribution.
    pub fn new(n_items: usize, groups: usize, table: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if n_items < 2 {
            return Err(Error::Config("synthetic data needs at least 2 items".into()));
        }
        if groups == 0 || table.len() != n_items * groups {
            return Err(Error::Config(format!(
                "transition table has {} states, expected {n_items} × {groups}",
                table.len()
            )));
        }
        for (s, row) in table.iter().enumerate() {
            let total: f64 = row.iter().map(|&(_, p)| p).sum();
            if row.iter().any(|&(j, p)| j >= n_items || !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("state {s} is not a distribution over items")));
            }
        }
        let mut s = TransitionStructure {
            n_items,
            groups,
            table,
            stationary: Vec::new(),
        };
        s.stationary = s.compute_stationary();
        Ok(s)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        Self::new(n, 1, (0..n).map(|i| vec![((i + 1) % n, 1.0)]).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        let row: Vec<(usize, f64)> = (0..n).map(|j| (j, 1.0 / n as f64)).collect();
        Self::new(n, 1, vec![row; n])
    }

    pub fn markov1(n: usize, fanout: usize, skew: f64, rng: &mut impl Rng) -> Result<Self> {
        Self::random(n, 1, fanout, skew, rng)
    }

    pub fn markov2(n: usize, groups: usize, fanout: usize, skew: f64, rng: &mut impl Rng) -> Result<Self> {
        if groups < 2 {
            return Err(Error::Config("markov2 needs at least 2 groups".into()));
        }
        Self::random(n, groups, fanout, skew, rng)
    }

    fn random(n: usize, groups: usize, fanout: usize, skew: f64, rng: &mut impl Rng) -> Result<Self> {
        if fanout == 0 || fanout > n {
            return Err(Error::Config(format!("fanout must be in 1..={n}")));
        }
        let w = skewed_weights(fanout, skew);
        let table = (0..n * groups)
            .map(|_| {
                rand::seq::index::sample(rng, n, fanout)
                    .into_iter()
                    .zip(w.iter().copied())
                    .collect()
            })
            .collect();
        Self::new(n, groups, table)
    }

    pub fn order(&self) -> usize {
        if self.groups == 1 {
            1
        } else {
            2
        }
    }

    fn state(&self, prev: usize, cur: usize) -> usize {
        cur * self.groups + prev % self.groups
    }

    /// Power iteration on the lazy chain `(I + P) / 2`, which shares the
    /// stationary distribution and is aperiodic.
    fn compute_stationary(&self) -> Vec<f64> {
        let n_states = self.table.len();
        let mut pi = vec![1.0 / n_states as f64; n_states];
        let mut next = vec![0.0; n_states];
        for _ in 0..20_000 {
            next.iter_mut().zip(&pi).for_each(|(n, p)| *n = 0.5 * p);
            for (s, row) in self.table.iter().enumerate() {
                let cur = s / self.groups;
                let mass = 0.5 * pi[s];
                for &(j, p) in row {
                    next[self.state(cur, j)] += mass * p;
                }
            }
            let total: f64 = next.iter().sum();
            let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a / total - b).abs()).sum();
            for (p, n) in pi.iter_mut().zip(&next) {
                *p = n / total;
            }
            if delta < 1e-14 {
                break;
            }
        }
        pi
    }

    /// Distribution of the state's next item, dense over items.
    fn dense(&self, state: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_items];
        for &(j, p) in &self.table[state] {
            out[j] += p;
        }
        out
    }

    /// Next-item distribution given only the current item, averaging over
    /// the stationary conditional of the previous item's group.
    fn one_step_dense(&self, cur: usize) -> Vec<f64> {
        let base = cur * self.groups;
        let weights = &self.stationary[base..base + self.groups];
        let total: f64 = weights.iter().sum();
        let mut out = vec![0.0; self.n_items];
        for g in 0..self.groups {
            let w = if total > 0.0 {
                weights[g] / total
            } else {
                1.0 / self.groups as f64
            };
            for &(j, p) in &self.table[base + g] {
                out[j] += w * p;
            }
        }
        out
    }

    /// Exact next-item distribution given the full history.
    pub fn predictive(&self, history: &[usize]) -> Result<Vec<f64>> {
        match history {
            [] => Err(Error::Usage("empty history".into())),
            [.., prev, cur] if self.groups > 1 => Ok(self.dense(self.state(*prev, *cur))),
            [.., cur] => Ok(self.one_step_dense(*cur)),
        }
    }

    /// Bayes-optimal top-K list for a history, ties by ascending index.
    pub fn top_k(&self, history: &[usize], k: usize) -> Result<Vec<usize>> {
        let p = self.predictive(history)?;
        let mut idx: Vec<usize> = (0..p.len()).collect();
        idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
        idx.truncate(k);
        Ok(idx)
    }

    /// Expected Recall@K,1 at stationarity of the best predictor that sees
    /// the last `history` items (1 or 2).
    pub fn stationary_recall(&self, k: usize, history: usize) -> f64 {
        if history >= 2 || self.groups == 1 {
            return (0..self.table.len())
                .map(|s| self.stationary[s] * top_k_mass(&self.dense(s), k))
                .sum();
        }
        (0..self.n_items)
            .map(|cur| {
                let base = cur * self.groups;
                let weight: f64 = self.stationary[base..base + self.groups].iter().sum();
                if weight == 0.0 {
                    0.0
                } else {
                    weight * top_k_mass(&self.one_step_dense(cur), k)
                }
            })
            .sum()
    }

    /// Expected Recall@K,1 of the Bayes predictor over the evaluation points
    /// of `ds`, conditional on their observed histories.
    pub fn expected_recall(&self, ds: &SessionDataset, k: usize) -> Result<f64> {
        let mut total = 0.0;
        let mut points = 0usize;
        for seq in &ds.sequences {
            for t in 0..seq.len().saturating_sub(1) {
                total += top_k_mass(&self.predictive(&seq[..=t])?, k);
                points += 1;
            }
        }
        if points == 0 {
            return Err(Error::Config("dataset has no evaluation points".into()));
        }
        Ok(total / points as f64)
    }

    pub fn sampler(&self) -> Sampler<'_> {
        Sampler {
            structure: self,
            start: WeightedIndex::new(&self.stationary).expect("stationary distribution is valid"),
            rows: self
                .table
                .iter()
                .map(|row| WeightedIndex::new(row.iter().map(|&(_, p)| p)).expect("row is a distribution"))
                .collect(),
        }
    }
}

/// Draws sequences from a [`TransitionStructure`].
pub struct Sampler<'a> {
    structure: &'a TransitionStructure,
    start: WeightedIndex<f64>,
    rows: Vec<WeightedIndex<f64>>,
}

impl Sampler<'_> {
    /// One sequence of length `len ≥ 1`, started from the stationary state.
    pub fn sequence(&self, len: usize, rng: &mut impl Rng) -> Vec<usize> {
        let s = self.structure;
        let mut state = self.start.sample(rng);
        let mut seq = vec![state / s.groups];
        while seq.len() < len {
            let next = s.table[state][self.rows[state].sample(rng)].0;
            state = s.state(*seq.last().unwrap(), next);
            seq.push(next);
        }
        seq
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub config: SynthConfig,
    pub structure: TransitionStructure,
    pub train: SessionDataset,
    pub valid: SessionDataset,
    pub test: SessionDataset,
}

/// Draws a structure and `n_sequences` sequences with lengths uniform in
/// `[min_len, max_len]`, split 80/10/10 in generation order.
pub fn synth_generate(cfg: &SynthConfig) -> Result<SyntheticData> {
    if cfg.min_len < 2 || cfg.max_len < cfg.min_len {
        return Err(Error::Config(format!("bad length range {}..={}", cfg.min_len, cfg.max_len)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let structure = match cfg.order {
        SynthOrder::Markov1 => TransitionStructure::markov1(cfg.n_items, cfg.fanout, cfg.skew, &mut rng)?,
        SynthOrder::Markov2 => {
            TransitionStructure::markov2(cfg.n_items, cfg.groups, cfg.fanout, cfg.skew, &mut rng)?
        }
        SynthOrder::Cycle => TransitionStructure::cycle(cfg.n_items)?,
        SynthOrder::Uniform => TransitionStructure::uniform(cfg.n_items)?,
    };
    let sampler = structure.sampler();
    let sequences: Vec<Vec<usize>> = (0..cfg.n_sequences)
        .map(|_| {
            let len = rng.random_range(cfg.min_len..=cfg.max_len);
            sampler.sequence(len, &mut rng)
        })
        .collect();
    let n_train = cfg.n_sequences * 8 / 10;
    let n_valid = cfg.n_sequences / 10;
    let make = |split: Split, lo: usize, hi: usize| {
        let mut ds = SessionDataset::new(split, sequences[lo..hi].to_vec());
        ds.session_ids = (lo..hi).map(|i| format!("synth-{i}")).collect();
        ds.provenance = format!("synthetic {:?} seed={}", cfg.order, cfg.seed);
        ds
    };
    Ok(SyntheticData {
        config: cfg.clone(),
        train: make(Split::Train, 0, n_train),
        valid: make(Split::Valid, n_train, n_train + n_valid),
        test: make(Split::Test, n_train + n_valid, cfg.n_sequences),
        structure,
    })
}
