//! Cell forward passes against straight-line scalar transcriptions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqrec::layers::{CellKind, GruCellParams, Model, ModelConfig};
use seqrec::numkernel::{ParamStore, Tape, Tensor};

type Mat = Vec<Vec<f64>>;

fn mat(store: &ParamStore<f64>, name: &str) -> Mat {
    let t = store.value(store.find(name).unwrap_or_else(|| panic!("no parameter {name}")));
    let (r, c) = t.dims2();
    (0..r).map(|i| t.data()[i * c..(i + 1) * c].to_vec()).collect()
}

fn vecp(store: &ParamStore<f64>, name: &str) -> Vec<f64> {
    store.value(store.find(name).unwrap()).data().to_vec()
}

fn mv(m: &Mat, x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn ln(x: &[f64], gain: &[f64], bias: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    x.iter()
        .enumerate()
        .map(|(j, v)| gain[j] * (v - mean) / (var + 1e-5).sqrt() + bias[j])
        .collect()
}

/// The GRU update written out coordinate by coordinate.
fn gru_scalar(store: &ParamStore<f64>, prefix: &str, use_ln: bool, e: &[f64], h: &[f64]) -> Vec<f64> {
    let w = |n: &str| mat(store, &format!("{prefix}.{n}"));
    let norm = |gate: &str, a: Vec<f64>| {
        if use_ln {
            ln(&a, &vecp(store, &format!("{prefix}.ln_{gate}.gain")), &vecp(store, &format!("{prefix}.ln_{gate}.bias")))
        } else {
            a
        }
    };
    let add = |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).map(|(x, y)| x + y).collect::<Vec<f64>>();
    let r: Vec<f64> = norm("r", add(mv(&w("w_r_e"), e), mv(&w("w_r_h"), h))).into_iter().map(sig).collect();
    let z: Vec<f64> = norm("z", add(mv(&w("w_z_e"), e), mv(&w("w_z_h"), h))).into_iter().map(sig).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let cand: Vec<f64> = norm("h", add(mv(&w("w_h_e"), e), mv(&w("w_h_h"), &rh))).into_iter().map(f64::tanh).collect();
    (0..h.len()).map(|i| (1.0 - z[i]) * h[i] + z[i] * cand[i]).collect()
}

fn gru_config(layers: usize, layer_norm: bool, n_o: usize) -> ModelConfig {
    ModelConfig {
        cell: CellKind::Gru,
        layers,
        layer_norm,
        tied_output: false,
        n_e: 3,
        n_h: 3,
        n_o,
    }
}

fn step_one(cell: &GruCellParams, store: &ParamStore<f64>, e: &[f64], h: &[f64]) -> Vec<f64> {
    let tape = Tape::new();
    let e = tape.constant(Tensor::matrix(1, e.len(), e.to_vec()).unwrap());
    let h = tape.constant(Tensor::matrix(1, h.len(), h.to_vec()).unwrap());
    tape.value(cell.step(&tape, store, e, h).unwrap()).into_data()
}

#[test]
fn gru_with_zero_weights_halves_the_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut store = ParamStore::<f64>::new();
    let cell = GruCellParams::new(&mut store, "g", 2, 3, false, &mut rng);
    for p in store.iter_mut() {
        p.value.fill(0.0);
    }
    assert_eq!(step_one(&cell, &store, &[0.3, -1.0], &[0.8, -0.4, 2.0]), [0.4, -0.2, 1.0]);
    assert_eq!(step_one(&cell, &store, &[0.3, -1.0], &[0.0; 3]), [0.0; 3]);
}

#[test]
fn gru_matches_scalar_transcription() {
    for use_ln in [false, true] {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut store = ParamStore::<f64>::new();
            let cell = GruCellParams::new(&mut store, "g", 3, 3, use_ln, &mut rng);
            for p in store.iter_mut() {
                p.value.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
            }
            let e: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let h: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got = step_one(&cell, &store, &e, &h);
            let want = gru_scalar(&store, "g", use_ln, &e, &h);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "ln={use_ln} seed={seed}: {got:?} vs {want:?}");
            }
        }
    }
}

#[test]
fn stacked_zero_weights_halve_each_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::<f64>::new();
    let l1 = GruCellParams::new(&mut store, "a", 3, 3, false, &mut rng);
    let l2 = GruCellParams::new(&mut store, "b", 3, 3, false, &mut rng);
    for p in store.iter_mut() {
        p.value.fill(0.0);
    }
    let (u, v) = ([1.0, 2.0, -4.0], [0.5, -0.5, 6.0]);
    let h1 = step_one(&l1, &store, &[0.1, 0.2, 0.3], &u);
    let h2 = step_one(&l2, &store, &h1, &v);
    assert_eq!(h1, [0.5, 1.0, -2.0]);
    assert_eq!(h2, [0.25, -0.25, 3.0]);
}

/// Sequence representations of a model against layer-by-layer scalar
/// composition, for one and two layers, with and without LN.
#[test]
fn model_unroll_matches_manual_composition() {
    let seq = [0usize, 3, 1, 4, 4, 2];
    for layers in [1, 2] {
        for use_ln in [false, true] {
            let model = Model::<f64>::new(gru_config(layers, use_ln, 5), 40 + layers as u64).unwrap();
            let tape = Tape::new();
            let reps = tape.value(model.representations(&tape, &seq, 1, None).unwrap());
            let emb = mat(&model.store, "embedding");
            let mut states = vec![vec![0.0; 3]; layers];
            for (t, &item) in seq.iter().enumerate() {
                let mut input = emb[item].clone();
                for (l, state) in states.iter_mut().enumerate() {
                    *state = gru_scalar(&model.store, &format!("gru.{l}"), use_ln, &input, state);
                    input = state.clone();
                }
                for (a, b) in reps.row(t).iter().zip(&input) {
                    assert!((a - b).abs() < 1e-12, "layers={layers} ln={use_ln} t={t}");
                }
            }
        }
    }
}

#[test]
fn single_layer_model_equals_one_cell() {
    let model = Model::<f64>::new(gru_config(1, false, 4), 3).unwrap();
    let seqrec::layers::Recurrence::Gru(cells) = &model.recurrence else {
        panic!("expected GRU")
    };
    let tape = Tape::new();
    let reps = tape.value(model.representations(&tape, &[2], 1, None).unwrap());
    let e = model.embedding.embed(&model.store, 2).unwrap().into_data();
    assert_eq!(reps.data(), step_one(&cells[0], &model.store, &e, &[0.0; 3]).as_slice());
}

#[test]
fn gru_state_stays_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let mut store = ParamStore::<f64>::new();
        let cell = GruCellParams::new(&mut store, "g", 4, 5, rng.random_bool(0.5), &mut rng);
        let scale = rng.random_range(0.1..20.0);
        for p in store.iter_mut() {
            p.value.data_mut().iter_mut().for_each(|v| *v = scale * rng.random_range(-1.0..1.0));
        }
        let e: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
        let h: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        let out = step_one(&cell, &store, &e, &h);
        for (o, p) in out.iter().zip(&h) {
            assert!(o.abs() <= p.abs().max(1.0) + 1e-12, "{o} from {p}");
        }
    }
}

fn tied_and_owned(n: usize, layers: usize) -> (Model<f64>, Model<f64>) {
    let cfg = |tied| ModelConfig {
        tied_output: tied,
        n_e: n,
        n_h: n,
        ..gru_config(layers, true, 7)
    };
    let tied = Model::<f64>::new(cfg(true), 5).unwrap();
    let mut owned = Model::<f64>::new(cfg(false), 6).unwrap();
    for p in tied.store.iter() {
        let id = owned.store.find(&p.name).unwrap();
        *owned.store.value_mut(id) = p.value.clone();
    }
    let out = owned.store.find("output").unwrap();
    *owned.store.value_mut(out) = tied.store.value(tied.store.find("embedding").unwrap()).clone();
    (tied, owned)
}

#[test]
fn tied_logits_equal_owned_logits_with_copied_weights() {
    let (tied, owned) = tied_and_owned(4, 2);
    let seqs: [&[usize]; 2] = [&[0, 6, 2, 3], &[5, 1]];
    let a = tied.prefix_logits(&seqs).unwrap();
    let b = owned.prefix_logits(&seqs).unwrap();
    for (x, y) in a.data().iter().zip(b.data()) {
        assert!((x - y).abs() <= 1e-12);
    }
    assert_eq!(owned.num_params() - tied.num_params(), 7 * 4);
}

#[test]
fn tied_identity_embedding_passes_representation_through() {
    let cfg = ModelConfig {
        cell: CellKind::Identity,
        layers: 1,
        layer_norm: false,
        tied_output: true,
        n_e: 3,
        n_h: 3,
        n_o: 3,
    };
    let mut m = Model::<f64>::new(cfg, 0).unwrap();
    let id = m.store.find("embedding").unwrap();
    *m.store.value_mut(id) = Tensor::identity(3);
    let logits = m.prefix_logits(&[&[1, 2, 0]]).unwrap();
    assert_eq!(logits.data(), [0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
}

#[test]
fn zero_output_matrix_gives_uniform_softmax() {
    let mut m = Model::<f64>::new(gru_config(1, false, 4), 2).unwrap();
    let id = m.store.find("output").unwrap();
    m.store.value_mut(id).fill(0.0);
    let logits = m.prefix_logits(&[&[1, 2, 3]]).unwrap();
    assert!(logits.data().iter().all(|&v| v == 0.0));
    assert_eq!(seqrec::numkernel::softmax(logits.row(0)), [0.25; 4]);
}

#[test]
fn tied_output_requires_equal_sizes() {
    let cfg = ModelConfig {
        tied_output: true,
        n_e: 3,
        n_h: 4,
        ..gru_config(1, false, 5)
    };
    assert!(matches!(Model::<f64>::new(cfg, 0), Err(seqrec::Error::Config(_))));
}
