use crate::error::{Error, Result};
use crate::numkernel::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NllLoss {
    /// −Σ log p(target) over unmasked positions.
    pub sum: f64,
    /// `sum / events`, for monitoring.
    pub mean: f64,
    pub events: usize,
}

/// Summed next-item NLL. `logits` has one row per (sequence, position),
/// `targets` and `mask` one entry per row; masked rows are ignored.
pub fn nll_loss<T: Real>(logits: &Tensor<T>, targets: &[usize], mask: &[bool]) -> Result<NllLoss> {
    let (rows, cols) = logits.dims2();
    if targets.len() != rows || mask.len() != rows {
        return Err(Error::dim("nll_loss", &[rows, cols], &[targets.len(), mask.len()]));
    }
    let mut sum = 0.0;
    let mut events = 0;
    for r in (0..rows).filter(|&r| mask[r]) {
        let target = targets[r];
        if target >= cols {
            return Err(Error::Vocabulary { index: target, size: cols });
        }
        let row: Vec<f64> = logits.row(r).iter().map(|v| v.to_f64_lossy()).collect();
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        sum += lse - row[target];
        events += 1;
    }
    if events == 0 {
        return Err(Error::DegenerateBatch);
    }
    Ok(NllLoss {
        sum,
        mean: sum / events as f64,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits() {
        let l = nll_loss(&Tensor::<f64>::zeros(&[1, 4]), &[2], &[true]).unwrap();
        assert!((l.sum - 4f64.ln()).abs() < 1e-15);
        assert!((l.sum - 1.3862943).abs() < 1e-7);
    }

    #[test]
    fn confident_logits_approach_zero() {
        let t = Tensor::matrix(1, 3, vec![0.0, 60.0, 0.0]).unwrap();
        assert!(nll_loss::<f64>(&t, &[1], &[true]).unwrap().sum < 1e-25);
    }

    #[test]
    fn all_masked_is_degenerate() {
        let t = Tensor::<f64>::zeros(&[2, 3]);
        assert!(matches!(nll_loss(&t, &[0, 1], &[false, false]), Err(Error::DegenerateBatch)));
    }
}
