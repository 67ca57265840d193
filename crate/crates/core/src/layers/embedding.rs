use rand::Rng;

use crate::error::{Error, Result};
use crate::numkernel::{ParamId, ParamStore, Real, Tape, Tensor, Var};

/// Input module: row `i` of `W_I` (N_O × N_E) is the embedding of item `i`.
/// Lookup is a row read; one-hot vectors are never built.
#[derive(Clone, Copy, Debug)]
pub struct EmbeddingTable {
    pub weight: ParamId,
    pub n_o: usize,
    pub n_e: usize,
}

impl EmbeddingTable {
    pub fn new<T: Real>(store: &mut ParamStore<T>, n_o: usize, n_e: usize, rng: &mut impl Rng) -> Self {
        let weight = store.add_scaled_uniform("embedding", n_o, n_e, rng);
        EmbeddingTable { weight, n_o, n_e }
    }

    /// Embeds a batch of item indices into a (len × N_E) matrix.
    pub fn lookup<T: Real>(&self, tape: &Tape<T>, store: &ParamStore<T>, items: &[usize]) -> Result<Var> {
        if let Some(&bad) = items.iter().find(|&&i| i >= self.n_o) {
            return Err(Error::Vocabulary {
                index: bad,
                size: self.n_o,
            });
        }
        tape.gather_rows(tape.param(store, self.weight), items)
    }

    /// Single-item embedding as a plain vector.
    pub fn embed<T: Real>(&self, store: &ParamStore<T>, item: usize) -> Result<Tensor<T>> {
        if item >= self.n_o {
            return Err(Error::Vocabulary {
                index: item,
                size: self.n_o,
            });
        }
        Ok(Tensor::vector(store.value(self.weight).row(item).to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn row_read_and_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::<f64>::new();
        let table = EmbeddingTable::new(&mut store, 3, 2, &mut rng);
        store.value_mut(table.weight).data_mut()[..2].copy_from_slice(&[0.1, -0.2]);
        assert_eq!(table.embed(&store, 0).unwrap().data(), &[0.1, -0.2]);
        assert!(matches!(table.embed(&store, 3), Err(Error::Vocabulary { index: 3, size: 3 })));
    }

    #[test]
    fn lookup_equals_one_hot_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::<f64>::new();
        let table = EmbeddingTable::new(&mut store, 5, 3, &mut rng);
        let w = store.value(table.weight).clone();
        for i in 0..5 {
            let mut onehot = vec![0.0; 5];
            onehot[i] = 1.0;
            let dense = Tensor::matrix(1, 5, onehot).unwrap().matmul(&w).unwrap();
            assert_eq!(dense.data(), table.embed(&store, i).unwrap().data());
        }
    }

    #[test]
    fn gradient_reaches_only_looked_up_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::<f64>::new();
        let table = EmbeddingTable::new(&mut store, 4, 2, &mut rng);
        let tape = Tape::new();
        let e = table.lookup(&tape, &store, &[2, 2, 0]).unwrap();
        let loss = tape.sum(e).unwrap();
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.get(table.weight).grad.data(), &[1.0, 1.0, 0.0, 0.0, 2.0, 2.0, 0.0, 0.0]);
    }
}
