//! Finite-difference checks of the full embedding → recurrence → softmax
//! NLL path, unrolled five steps, at 64-bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqrec::data::Batch;
use seqrec::layers::{CellKind, Model, ModelConfig};
use seqrec::numkernel::gradient_check;

const TOL: f64 = 1e-4;
const EPS: f64 = 1e-5;

fn config(cell: CellKind, layers: usize, layer_norm: bool, tied_output: bool) -> ModelConfig {
    ModelConfig {
        cell,
        layers,
        layer_norm,
        tied_output,
        n_e: 4,
        n_h: 4,
        n_o: 7,
    }
}

/// Model with every weight drawn from U(-1, 1) so gradients are O(1) and the
/// check is not dominated by the unit floor of the error measure.
fn randomized(cfg: ModelConfig, seed: u64) -> Model<f64> {
    let mut m = Model::<f64>::new(cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    for p in m.store.iter_mut() {
        p.value.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    }
    m
}

/// Two sequences of length 6 (five predictions each) and one shorter one,
/// which exercises padding masks.
fn batch(seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seq = |len: usize| (0..len).map(|_| rng.random_range(0..7)).collect::<Vec<usize>>();
    let (a, b, c) = (seq(6), seq(6), seq(3));
    Batch::from_sequences(&[&a, &b, &c]).unwrap()
}

fn check(model: &Model<f64>, batch: &Batch, boundaries: Option<&[Vec<bool>]>) -> f64 {
    let mut store = model.store.clone();
    let skeleton = model.clone();
    gradient_check(
        |tape, store| {
            let mut m = skeleton.clone();
            m.store = store.clone();
            Ok(m.batch_loss_with(tape, batch, boundaries)?.loss)
        },
        &mut store,
        EPS,
    )
    .unwrap()
}

#[test]
fn gru_variants_pass_gradient_check() {
    let mut worst = 0.0f64;
    for layers in [1, 2] {
        for ln in [false, true] {
            for tied in [false, true] {
                for seed in 0..20 {
                    let m = randomized(config(CellKind::Gru, layers, ln, tied), seed);
                    let err = check(&m, &batch(seed + 1000), None);
                    assert!(err < TOL, "layers={layers} ln={ln} tied={tied} seed={seed}: {err:e}");
                    worst = worst.max(err);
                }
            }
        }
    }
    eprintln!("worst GRU relative error {worst:e}");
}

#[test]
fn coevent_mf_passes_gradient_check() {
    for tied in [false, true] {
        for seed in 0..20 {
            let m = randomized(config(CellKind::Identity, 1, false, tied), seed);
            let err = check(&m, &batch(seed), None);
            assert!(err < TOL, "tied={tied} seed={seed}: {err:e}");
        }
    }
}

#[test]
fn hm_lstm_passes_gradient_check_with_frozen_boundaries() {
    for ln in [false, true] {
        for seed in 0..20 {
            let m = randomized(config(CellKind::HmLstm, 2, ln, seed % 2 == 0), seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 77);
            let schedule: Vec<Vec<bool>> = (0..6).map(|_| vec![rng.random_bool(0.5), rng.random_bool(0.5)]).collect();
            let err = check(&m, &batch(seed + 500), Some(&schedule));
            assert!(err < TOL, "ln={ln} seed={seed}: {err:e}");
        }
    }
}

#[test]
fn three_layer_hm_lstm_passes_gradient_check() {
    let m = randomized(
        ModelConfig {
            layers: 3,
            ..config(CellKind::HmLstm, 2, true, false)
        },
        3,
    );
    let schedule: Vec<Vec<bool>> = (0..6).map(|t| vec![t % 2 == 0, t % 3 == 0, t == 4]).collect();
    assert!(check(&m, &batch(3), Some(&schedule)) < TOL);
}

#[test]
fn padded_positions_do_not_affect_the_loss() {
    use seqrec::numkernel::Tape;
    let m = randomized(config(CellKind::Gru, 2, true, false), 4);
    let (a, b) = (vec![1, 2, 3, 4, 5, 6], vec![0, 3]);
    let loss = |pad: usize| {
        let tape = Tape::new();
        let batch = Batch::from_sequences_padded(&[&a, &b], pad).unwrap();
        tape.value(m.batch_loss(&tape, &batch).unwrap().loss).item()
    };
    let base = loss(0);
    for pad in 1..7 {
        assert_eq!(loss(pad).to_bits(), base.to_bits());
    }
}
