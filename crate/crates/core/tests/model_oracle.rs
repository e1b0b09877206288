//! The model's forward pass against a scalar-loop transcription of the
//! network equations.

use claimscreen::corpus::Class;
use claimscreen::embed::ClaimMatrix;
use claimscreen::model::{EncoderParams, Mode, Model, ModelConfig};
use claimscreen::numerics::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erf;

type Rows = Vec<Vec<f64>>;

fn matmul(a: &Rows, w: &Matrix) -> Rows {
    a.iter()
        .map(|row| {
            (0..w.cols())
                .map(|j| (0..w.rows()).map(|i| row[i] * w.get(i, j)).sum())
                .collect()
        })
        .collect()
}

fn layer_norm(x: &Rows, gain: &Matrix, bias: &Matrix) -> Rows {
    x.iter()
        .map(|row| {
            let n = row.len() as f64;
            let mu = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
            row.iter()
                .enumerate()
                .map(|(j, v)| (v - mu) / (var + 1e-5).sqrt() * gain.get(0, j) + bias.get(0, j))
                .collect()
        })
        .collect()
}

fn add(a: &Rows, b: &Rows) -> Rows {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect()
}

/// Encoder over the `k` active rows only; returns (output, k×k attention).
fn encoder(p: &Rows, e: &EncoderParams) -> (Rows, Rows) {
    let k = p.len();
    let d = p[0].len() as f64;
    let (q, key, v) = (matmul(p, &e.w_q), matmul(p, &e.w_k), matmul(p, &e.w_v));
    let mut attn = vec![vec![0.0; k]; k];
    for a in 0..k {
        let s: Vec<f64> = (0..k)
            .map(|b| q[a].iter().zip(&key[b]).map(|(x, y)| x * y).sum::<f64>() / d.sqrt())
            .collect();
        let mx = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = s.iter().map(|x| (x - mx).exp()).sum();
        for b in 0..k {
            attn[a][b] = (s[b] - mx).exp() / z;
        }
    }
    let head: Rows = attn
        .iter()
        .map(|row| {
            (0..v[0].len())
                .map(|j| row.iter().zip(&v).map(|(w, vr)| w * vr[j]).sum())
                .collect()
        })
        .collect();
    let att = layer_norm(&add(p, &matmul(&head, &e.w_o)), &e.ln1_gain, &e.ln1_bias);
    let hidden: Rows = matmul(&att, &e.w_r)
        .into_iter()
        .map(|r| r.into_iter().map(|x| 0.5 * x * (1.0 + erf(x / 2f64.sqrt()))).collect())
        .collect();
    let out = layer_norm(&add(&att, &matmul(&hidden, &e.w_s)), &e.ln2_gain, &e.ln2_bias);
    (out, attn)
}

fn oracle(model: &Model, claims: &Rows) -> ([f64; 2], Rows) {
    let mut z = claims.clone();
    let mut attn = Vec::new();
    for e in &model.params.encoders {
        let (out, a) = encoder(&z, e);
        z = out;
        attn = a;
    }
    let k = z.len() as f64;
    let pooled: Rows = vec![(0..z[0].len()).map(|j| z.iter().map(|r| r[j]).sum::<f64>() / k).collect()];
    let s: Rows = matmul(&pooled, &model.params.w_t)
        .into_iter()
        .map(|r| r.into_iter().map(f64::tanh).collect())
        .collect();
    let logits = matmul(&s, &model.params.w_cls);
    ([logits[0][0], logits[0][1]], attn)
}

fn random_model(rng: &mut ChaCha8Rng, config: ModelConfig) -> Model {
    let mut model = Model::new(config).unwrap();
    for e in &mut model.params.encoders {
        for m in [&mut e.ln1_gain, &mut e.ln1_bias, &mut e.ln2_gain, &mut e.ln2_bias] {
            for v in m.as_mut_slice() {
                *v += rng.gen_range(-0.5..0.5);
            }
        }
    }
    model
}

#[test]
fn forward_matches_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..20 {
        let config = ModelConfig {
            dim: 6,
            max_claims: 5,
            n_encoders: 1 + case % 3,
            ffn_mult: 2,
            dropout: 0.3,
            init_seed: case as u64,
        };
        let model = random_model(&mut rng, config);
        let k = rng.gen_range(1..=5);
        let claims: Rows = (0..k)
            .map(|_| (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let input = ClaimMatrix::from_vectors(&claims, 5, 6).unwrap();
        let out = model.forward(&input, Mode::Eval).unwrap();
        let (logits, attn) = oracle(&model, &claims);
        for c in 0..2 {
            assert!((out.logits[c] - logits[c]).abs() < 1e-9, "case {case}: {:?} vs {logits:?}", out.logits);
        }
        for a in 0..k {
            for b in 0..k {
                assert!((out.attention.last_matrix.get(a, b) - attn[a][b]).abs() < 1e-9);
            }
        }
        for j in 0..k {
            let col: f64 = (0..k).map(|a| attn[a][j]).sum();
            assert!((out.attention.claim_scores[j] - col).abs() < 1e-9);
        }
    }
}

#[test]
fn loss_is_softmax_cross_entropy_of_logits() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let model = random_model(&mut rng, ModelConfig { dim: 4, max_claims: 3, n_encoders: 2, ffn_mult: 1, dropout: 0.0, init_seed: 4 });
    let input = ClaimMatrix::from_vectors(&[vec![0.3, -1.0, 0.5, 2.0], vec![1.0, 1.0, -0.2, 0.0]], 3, 4).unwrap();
    let t = model.forward(&input, Mode::Eval).unwrap().logits;
    let lse = (t[0].exp() + t[1].exp()).ln();
    let pbt = model.loss(&input, Class::Pbt, Mode::Eval).unwrap();
    let mt = model.loss(&input, Class::Mt, Mode::Eval).unwrap();
    assert!((pbt - (lse - t[0])).abs() < 1e-12);
    assert!((mt - (lse - t[1])).abs() < 1e-12);
    let (prediction, _) = model.predict(&input).unwrap();
    assert!((prediction.p_pbt - 1.0 / (1.0 + (t[1] - t[0]).exp())).abs() < 1e-12);
}

#[test]
fn dropout_only_acts_in_training_mode() {
    let model = Model::new(ModelConfig { dim: 8, max_claims: 4, n_encoders: 2, ffn_mult: 4, dropout: 0.5, init_seed: 1 }).unwrap();
    let input = ClaimMatrix::from_vectors(&[vec![0.5; 8], vec![-0.25; 8]], 4, 8).unwrap();
    let eval_a = model.forward(&input, Mode::Eval).unwrap();
    let eval_b = model.forward(&input, Mode::Eval).unwrap();
    assert_eq!(eval_a, eval_b);
    let train_a = model.forward(&input, Mode::Train { dropout_seed: 3 }).unwrap();
    let train_b = model.forward(&input, Mode::Train { dropout_seed: 3 }).unwrap();
    let train_c = model.forward(&input, Mode::Train { dropout_seed: 4 }).unwrap();
    assert_eq!(train_a, train_b);
    assert_ne!(train_a.logits, eval_a.logits);
    assert_ne!(train_a.logits, train_c.logits);
}
