mod common;

use lunar::lunar::{init_model, layer_dims, loss_mse, MlpModel};
use lunar::negative::NegativeConfig;
use lunar::rng::stream;
use lunar::{train, Dataset, TrainConfig, TrainedModel};
use ndarray::Array2;
use rand::Rng;

fn loss_of(model: &MlpModel, x: &Array2<f64>, y: &[f64]) -> f64 {
    loss_mse(&model.predict(x.view()).unwrap(), y).unwrap()
}

fn rebuild(model: &MlpModel, layer: usize, entry: Option<(usize, usize)>, bias: Option<usize>, delta: f64) -> MlpModel {
    let mut w = model.weights().to_vec();
    let mut b = model.biases().to_vec();
    if let Some(e) = entry {
        w[layer][e] += delta;
    }
    if let Some(i) = bias {
        b[layer][i] += delta;
    }
    MlpModel::from_parameters(w, b).unwrap()
}

#[test]
fn gradients_match_central_differences() {
    let h = 1e-6;
    let mut rng = stream(77, 0);
    let depths = [1usize, 2, 4];
    for case in 0..50 {
        let depth = depths[case % 3];
        let k = rng.gen_range(1..6);
        let width = rng.gen_range(2..7);
        let model = init_model(&layer_dims(k, width, depth), &mut stream(case as u64, 1)).unwrap();
        let b = rng.gen_range(1..9);
        let x = Array2::from_shape_simple_fn((b, k), || rng.gen_range(0.0..2.0));
        let y: Vec<f64> = (0..b).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect();
        let (_, cache) = model.forward(x.view()).unwrap();
        let grads = model.backward(&cache, &y).unwrap();

        let (mut diff2, mut norm2) = (0.0, 0.0);
        let mut check = |analytic: f64, plus: MlpModel, minus: MlpModel| {
            let numeric = (loss_of(&plus, &x, &y) - loss_of(&minus, &x, &y)) / (2.0 * h);
            diff2 += (analytic - numeric).powi(2);
            norm2 += analytic.abs().max(numeric.abs()).powi(2);
        };
        for l in 0..model.n_layers() {
            for ((i, j), &g) in grads.weights[l].indexed_iter() {
                check(g, rebuild(&model, l, Some((i, j)), None, h), rebuild(&model, l, Some((i, j)), None, -h));
            }
            for (i, &g) in grads.biases[l].indexed_iter() {
                check(g, rebuild(&model, l, None, Some(i), h), rebuild(&model, l, None, Some(i), -h));
            }
        }
        let rel = diff2.sqrt() / norm2.sqrt().max(1e-300);
        assert!(rel <= 1e-5, "case {case} depth {depth}: relative error {rel}");
    }
}

fn small_model(seed: u64) -> (TrainedModel, Array2<f64>) {
    let mut rng = stream(seed, 0);
    let x = common::random_matrix(80, 3, &mut rng);
    let v = common::random_matrix(20, 3, &mut rng);
    let cfg = TrainConfig {
        k: 5,
        epochs: 5,
        hidden_width: 16,
        hidden_depth: 2,
        seed,
        ..Default::default()
    };
    let neg = NegativeConfig { seed, ..Default::default() };
    let m = train(&Dataset::new(x, None).unwrap(), &Dataset::new(v, None).unwrap(), &neg, &cfg).unwrap();
    let test = common::random_matrix(15, 3, &mut rng).mapv(|v| 1.6 * v - 0.3);
    (m, test)
}

#[test]
fn inference_is_isometry_invariant() {
    let (model, test) = small_model(5);
    let mut rng = stream(6, 0);
    let before = model.score_normalized(test.view()).unwrap();
    let before_train = model.score_normalized(model.train_matrix.view()).unwrap();
    for _ in 0..20 {
        let (q, t) = common::random_isometry(3, &mut rng);
        let moved = TrainedModel {
            train_matrix: common::apply_isometry(model.train_matrix.view(), &q, &t),
            ..model.clone()
        };
        let after = moved.score_normalized(common::apply_isometry(test.view(), &q, &t).view()).unwrap();
        let after_train = moved.score_normalized(moved.train_matrix.view()).unwrap();
        for (a, b) in before.iter().chain(&before_train).zip(after.iter().chain(&after_train)) {
            assert!((a - b).abs() <= 1e-7, "{a} vs {b}");
        }
    }
}

#[test]
fn scoring_contract() {
    let (model, test) = small_model(8);
    let s = model.score_raw(test.view()).unwrap();
    assert!(s.iter().all(|&v| v > 0.0 && v < 1.0));
    assert_eq!(s, model.score_raw(test.view()).unwrap());

    // Same distance vector, same score: a point and its mirror image about a
    // training point on a line.
    let line = Dataset::new(Array2::from_shape_fn((30, 1), |(i, _)| i as f64), None).unwrap();
    let val = Dataset::new(Array2::from_shape_fn((8, 1), |(i, _)| i as f64 * 3.5 + 0.25), None).unwrap();
    let cfg = TrainConfig { k: 2, epochs: 2, hidden_width: 4, hidden_depth: 1, ..Default::default() };
    let m = train(&line, &val, &NegativeConfig::default(), &cfg).unwrap();
    let pair = m.score_raw(Array2::from_shape_vec((2, 1), vec![14.5, 14.5]).unwrap().view()).unwrap();
    assert_eq!(pair[0], pair[1]);

    let mut buf = Vec::new();
    model.write_to(&mut buf).unwrap();
    let back = TrainedModel::read_from(buf.as_slice()).unwrap();
    assert_eq!(back.score_raw(test.view()).unwrap(), s);
}
