//! Forward pass of the claim encoder stack, pooling, and prediction head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EncoderParams, ModelConfig, ModelError, ModelParams};
use crate::corpus::Class;
use crate::embed::ClaimMatrix;
use crate::numerics::{Graph, Matrix, Var};

/// LayerNorm epsilon.
pub const LN_EPS: f64 = 1e-5;

/// Train mode enables dropout drawn from a seeded generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { dropout_seed: u64 },
}

impl Mode {
    fn rng(self) -> Option<ChaCha8Rng> {
        match self {
            Mode::Eval => None,
            Mode::Train { dropout_seed } => Some(ChaCha8Rng::seed_from_u64(dropout_seed)),
        }
    }
}

/// Graph handles for one encoder's parameters.
#[derive(Clone, Copy, Debug)]
pub struct EncoderVars {
    w_q: Var,
    w_k: Var,
    w_v: Var,
    w_o: Var,
    ln1_gain: Var,
    ln1_bias: Var,
    w_r: Var,
    w_s: Var,
    ln2_gain: Var,
    ln2_bias: Var,
}

impl EncoderVars {
    pub fn register<'a>(
        graph: &mut Graph<'a>,
        p: &'a EncoderParams,
    ) -> Result<Self, ModelError> {
        Ok(Self {
            w_q: graph.param_ref(&p.w_q)?,
            w_k: graph.param_ref(&p.w_k)?,
            w_v: graph.param_ref(&p.w_v)?,
            w_o: graph.param_ref(&p.w_o)?,
            ln1_gain: graph.param_ref(&p.ln1_gain)?,
            ln1_bias: graph.param_ref(&p.ln1_bias)?,
            w_r: graph.param_ref(&p.w_r)?,
            w_s: graph.param_ref(&p.w_s)?,
            ln2_gain: graph.param_ref(&p.ln2_gain)?,
            ln2_bias: graph.param_ref(&p.ln2_bias)?,
        })
    }

    fn vars(&self) -> [Var; 10] {
        [
            self.w_q,
            self.w_k,
            self.w_v,
            self.w_o,
            self.ln1_gain,
            self.ln1_bias,
            self.w_r,
            self.w_s,
            self.ln2_gain,
            self.ln2_bias,
        ]
    }
}

/// Graph handles for a full parameter set, in block order.
#[derive(Clone, Debug)]
pub struct ParamVars {
    pub encoders: Vec<EncoderVars>,
    pub w_t: Var,
    pub w_cls: Var,
}

impl ParamVars {
    pub fn register<'a>(graph: &mut Graph<'a>, p: &'a ModelParams) -> Result<Self, ModelError> {
        let encoders = p
            .encoders
            .iter()
            .map(|e| EncoderVars::register(graph, e))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            encoders,
            w_t: graph.param_ref(&p.w_t)?,
            w_cls: graph.param_ref(&p.w_cls)?,
        })
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut out: Vec<Var> = self.encoders.iter().flat_map(|e| e.vars()).collect();
        out.push(self.w_t);
        out.push(self.w_cls);
        out
    }

    /// Moves accumulated gradients out of the graph; blocks never reached
    /// by backward come back as zeros.
    pub fn take_grads(&self, graph: &mut Graph<'_>, like: &ModelParams) -> ModelParams {
        let mut grads = like.zeros_like();
        for (slot, v) in grads.blocks_mut().into_iter().zip(self.vars()) {
            if let Some(g) = graph.take_grad(v) {
                *slot = g;
            }
        }
        grads
    }
}

/// One claim encoder on the tape. Returns `(P′, attention)`.
pub fn encoder_graph(
    graph: &mut Graph<'_>,
    input: Var,
    enc: &EncoderVars,
    active: usize,
    dropout: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(Var, Var), ModelError> {
    let dim = graph.value(input).cols();
    let q = graph.matmul(input, enc.w_q)?;
    let k = graph.matmul(input, enc.w_k)?;
    let v = graph.matmul(input, enc.w_v)?;
    let scores = graph.matmul_t(q, k)?;
    let scores = graph.scale(scores, 1.0 / (dim as f64).sqrt())?;
    let attention = graph.masked_softmax_rows(scores, active)?;
    let head = graph.matmul(attention, v)?;
    let single_head = graph.matmul(head, enc.w_o)?;
    let residual = graph.add(input, single_head)?;
    let att = graph.layer_norm(residual, enc.ln1_gain, enc.ln1_bias, LN_EPS)?;

    let expanded = graph.matmul(att, enc.w_r)?;
    let activated = graph.gelu(expanded)?;
    let dropped = graph.dropout(activated, dropout, rng)?;
    let contracted = graph.matmul(dropped, enc.w_s)?;
    let residual = graph.add(att, contracted)?;
    let out = graph.layer_norm(residual, enc.ln2_gain, enc.ln2_bias, LN_EPS)?;
    let out = graph.mask_rows(out, active)?;
    Ok((out, attention))
}

/// Full network on the tape. Returns `(logits 1×2, last attention)`.
pub fn model_graph(
    graph: &mut Graph<'_>,
    vars: &ParamVars,
    input: Var,
    active: usize,
    dropout: f64,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<(Var, Var), ModelError> {
    if active == 0 {
        return Err(ModelError::NoClaims);
    }
    let mut z = input;
    let mut attention = None;
    for enc in &vars.encoders {
        let (out, att) = encoder_graph(graph, z, enc, active, dropout, rng.as_deref_mut())?;
        z = out;
        attention = Some(att);
    }
    let attention = attention.ok_or_else(|| ModelError::Config("no encoders".into()))?;
    let pooled = graph.mean_rows(z, active)?;
    let projected = graph.matmul(pooled, vars.w_t)?;
    let summary = graph.tanh(projected)?;
    let logits = graph.matmul(summary, vars.w_cls)?;
    Ok((logits, attention))
}

/// Last-encoder attention and per-claim totals of attention received.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionRecord {
    /// `m × m`; entry `(a, j)` is the weight claim `a` puts on claim `j`.
    pub last_matrix: Matrix,
    /// Column sums over active rows, length `m`; padded claims score 0.
    pub claim_scores: Vec<f64>,
    pub active: usize,
}

impl AttentionRecord {
    pub fn from_matrix(last_matrix: Matrix, active: usize) -> Self {
        let m = last_matrix.cols();
        let mut claim_scores = vec![0.0; m];
        for a in 0..active {
            for (j, s) in claim_scores.iter_mut().enumerate().take(active) {
                *s += last_matrix.get(a, j);
            }
        }
        Self {
            last_matrix,
            claim_scores,
            active,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    /// `[t_PBT, t_MT]`.
    pub logits: [f64; 2],
    pub attention: AttentionRecord,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub class: Class,
    pub p_pbt: f64,
}

/// Softmax over `[t_PBT, t_MT]`; PBT only when `p(PBT) > 0.5`.
pub fn predict_class(logits: [f64; 2]) -> Prediction {
    let p_pbt = 1.0 / (1.0 + (logits[1] - logits[0]).exp());
    let class = if p_pbt > 0.5 { Class::Pbt } else { Class::Mt };
    Prediction { class, p_pbt }
}

/// A configured network with its weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        let params = ModelParams::init(&config, config.init_seed)?;
        Ok(Self { config, params })
    }

    pub fn from_params(config: ModelConfig, params: ModelParams) -> Result<Self, ModelError> {
        config.validate()?;
        let blocks = params.blocks().into_iter().cloned().collect();
        ModelParams::from_blocks(&config, blocks)?;
        Ok(Self { config, params })
    }

    fn check_input(&self, claims: &ClaimMatrix) -> Result<(), ModelError> {
        if claims.dim() != self.config.dim || claims.max_claims() != self.config.max_claims {
            return Err(ModelError::InputShape {
                expected: (self.config.max_claims, self.config.dim),
                found: (claims.max_claims(), claims.dim()),
            });
        }
        if claims.active() == 0 {
            return Err(ModelError::NoClaims);
        }
        Ok(())
    }

    pub fn forward(&self, claims: &ClaimMatrix, mode: Mode) -> Result<ForwardOutput, ModelError> {
        self.check_input(claims)?;
        let mut graph = Graph::new();
        let vars = ParamVars::register(&mut graph, &self.params)?;
        let input = graph.constant_ref(claims.matrix())?;
        let mut rng = mode.rng();
        let (logits, attention) = model_graph(
            &mut graph,
            &vars,
            input,
            claims.active(),
            self.config.dropout,
            rng.as_mut(),
        )?;
        let l = graph.value(logits);
        Ok(ForwardOutput {
            logits: [l.get(0, 0), l.get(0, 1)],
            attention: AttentionRecord::from_matrix(graph.value(attention).clone(), claims.active()),
        })
    }

    pub fn predict(&self, claims: &ClaimMatrix) -> Result<(Prediction, AttentionRecord), ModelError> {
        let out = self.forward(claims, Mode::Eval)?;
        Ok((predict_class(out.logits), out.attention))
    }

    /// Cross-entropy of one example and its parameter gradients.
    pub fn loss_and_grads(
        &self,
        claims: &ClaimMatrix,
        label: Class,
        mode: Mode,
    ) -> Result<(f64, ModelParams), ModelError> {
        self.check_input(claims)?;
        let mut graph = Graph::new();
        let vars = ParamVars::register(&mut graph, &self.params)?;
        let input = graph.constant_ref(claims.matrix())?;
        let mut rng = mode.rng();
        let (logits, _) = model_graph(
            &mut graph,
            &vars,
            input,
            claims.active(),
            self.config.dropout,
            rng.as_mut(),
        )?;
        let loss = graph.cross_entropy(logits, &[label.index()])?;
        let value = graph.value(loss).get(0, 0);
        graph.backward(loss)?;
        let grads = vars.take_grads(&mut graph, &self.params);
        Ok((value, grads))
    }

    pub fn loss(&self, claims: &ClaimMatrix, label: Class, mode: Mode) -> Result<f64, ModelError> {
        self.check_input(claims)?;
        let mut graph = Graph::new();
        let vars = ParamVars::register(&mut graph, &self.params)?;
        let input = graph.constant_ref(claims.matrix())?;
        let mut rng = mode.rng();
        let (logits, _) = model_graph(
            &mut graph,
            &vars,
            input,
            claims.active(),
            self.config.dropout,
            rng.as_mut(),
        )?;
        let loss = graph.cross_entropy(logits, &[label.index()])?;
        Ok(graph.value(loss).get(0, 0))
    }
}

/// Value-level single encoder: `(P′, attention)` for an `m × d_e` input.
pub fn encoder_forward(
    input: &Matrix,
    params: &EncoderParams,
    active: usize,
    dropout: f64,
    mode: Mode,
) -> Result<(Matrix, Matrix), ModelError> {
    if params.w_q.rows() != input.cols() {
        return Err(ModelError::InputShape {
            expected: (input.rows(), params.w_q.rows()),
            found: input.shape(),
        });
    }
    if active == 0 || active > input.rows() {
        return Err(ModelError::Config(format!(
            "active count {active} outside 1..={}",
            input.rows()
        )));
    }
    let mut graph = Graph::new();
    let vars = EncoderVars::register(&mut graph, params)?;
    let x = graph.constant_ref(input)?;
    let mut rng = mode.rng();
    let (out, att) = encoder_graph(&mut graph, x, &vars, active, dropout, rng.as_mut())?;
    Ok((graph.value(out).clone(), graph.value(att).clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dim: usize, m: usize, n: usize) -> ModelConfig {
        ModelConfig {
            dim,
            max_claims: m,
            n_encoders: n,
            ffn_mult: 4,
            dropout: 0.0,
            init_seed: 3,
        }
    }

    #[test]
    fn prediction_tie_goes_to_mt() {
        let p = predict_class([0.0, 0.0]);
        assert_eq!(p.class, Class::Mt);
        assert_eq!(p.p_pbt, 0.5);
        let p = predict_class([2.0, 0.0]);
        assert_eq!(p.class, Class::Pbt);
        assert!((p.p_pbt - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
        assert!((p.p_pbt - 0.8808).abs() < 1e-4);
        let p = predict_class([-3.0, 1.0]);
        assert_eq!(p.class, Class::Mt);
        assert!((p.p_pbt - 0.0180).abs() < 1e-4);
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let c = cfg(4, 3, 2);
        let model = Model::from_params(c, ModelParams::zeros(&c)).unwrap();
        let claims = ClaimMatrix::from_vectors(&[vec![0.0; 4]], 3, 4).unwrap();
        assert_eq!(model.forward(&claims, Mode::Eval).unwrap().logits, [0.0, 0.0]);
    }

    #[test]
    fn identical_claims_attend_uniformly() {
        let c = cfg(5, 6, 1);
        let model = Model::new(c).unwrap();
        let row = vec![0.3, -1.0, 0.7, 0.2, 0.05];
        let claims = ClaimMatrix::from_vectors(&[row.clone(), row.clone(), row.clone(), row], 6, 5).unwrap();
        let (out, att) = encoder_forward(
            claims.matrix(),
            &model.params.encoders[0],
            4,
            0.0,
            Mode::Eval,
        )
        .unwrap();
        for a in 0..4 {
            for j in 0..4 {
                assert!((att.get(a, j) - 0.25).abs() < 1e-12);
            }
            assert!(out.max_abs_diff(&out) == 0.0);
            for c in 0..5 {
                assert!((out.get(a, c) - out.get(0, c)).abs() < 1e-12);
            }
        }
        assert!(out.row(4).iter().chain(out.row(5)).all(|&v| v == 0.0));
    }

    #[test]
    fn zero_query_key_weights_give_uniform_attention() {
        let c = cfg(4, 5, 1);
        let mut model = Model::new(c).unwrap();
        model.params.encoders[0].w_q.fill(0.0);
        model.params.encoders[0].w_k.fill(0.0);
        let claims = ClaimMatrix::from_vectors(
            &[vec![1.0, 2.0, 3.0, 4.0], vec![-1.0, 0.0, 2.0, 0.5], vec![0.1, 0.1, 0.1, 0.9]],
            5,
            4,
        )
        .unwrap();
        let out = model.forward(&claims, Mode::Eval).unwrap();
        for a in 0..3 {
            for j in 0..5 {
                let expected = if j < 3 { 1.0 / 3.0 } else { 0.0 };
                assert!((out.attention.last_matrix.get(a, j) - expected).abs() < 1e-12);
            }
        }
        assert!(out.attention.claim_scores[..3].iter().all(|s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn empty_patent_rejected() {
        let c = cfg(4, 3, 1);
        let model = Model::new(c).unwrap();
        let claims = ClaimMatrix::from_vectors::<Vec<f64>>(&[], 3, 4).unwrap();
        let err = model.forward(&claims, Mode::Eval).unwrap_err();
        assert_eq!(err.to_string(), "patent has no embeddable claims");
    }

    #[test]
    fn input_shape_checked() {
        let model = Model::new(cfg(4, 3, 1)).unwrap();
        let claims = ClaimMatrix::from_vectors(&[vec![0.0; 5]], 3, 5).unwrap();
        assert!(matches!(
            model.forward(&claims, Mode::Eval),
            Err(ModelError::InputShape { .. })
        ));
    }

    #[test]
    fn dropout_only_in_train_mode() {
        let mut c = cfg(4, 3, 2);
        c.dropout = 0.5;
        let model = Model::new(c).unwrap();
        let claims =
            ClaimMatrix::from_vectors(&[vec![1.0, 0.0, -1.0, 0.5], vec![0.0, 2.0, 0.0, 0.0]], 3, 4).unwrap();
        let e1 = model.forward(&claims, Mode::Eval).unwrap();
        let e2 = model.forward(&claims, Mode::Eval).unwrap();
        assert_eq!(e1, e2);
        let t1 = model.forward(&claims, Mode::Train { dropout_seed: 1 }).unwrap();
        let t1b = model.forward(&claims, Mode::Train { dropout_seed: 1 }).unwrap();
        assert_eq!(t1, t1b);
        assert_ne!(t1.logits, e1.logits);
    }
}
