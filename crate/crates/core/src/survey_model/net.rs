//! The multi-head network shared by the survey model and the submit model.
//!
//! ```text
//! dense input x ──► FC₁ ─⊙─► FC₂ ─⊙─► FC₃ ─⊙─► SE ─► head₁ … headₖ
//!                       │        │        │
//! lhuc input z ──► L₁ ──┴─► L₂ ──┴─► L₃ ──┘
//! ```
//!
//! Each backbone layer output (post-activation) is multiplied channel-wise by
//! the matching LHUC gate `Lᵢ = 2·σ(·)`. The SE block treats each channel of
//! the final representation as a 1×1 map, so the squeeze is the identity and
//! the excitation is `e = σ(W₂ · relu(W₁ · r))`, applied as `e ⊙ r`.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{ModelKind, SurveyModelConfig};
use super::labels::SurveyLabelSet;
use crate::error::{Error, Result};
use crate::features::{FeatureVector, CATEGORICAL_FIELDS};
use crate::nn::layer::fold_signs;
use crate::nn::{
    bce_term, glorot_limit, zeroed, Activation, Differentiable, MlpStack, ParamSet, TensorRef,
    PROB_CLAMP,
};
use crate::seed;

/// One training example: encoded features, per-head labels and a positive weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedExample {
    pub features: FeatureVector,
    pub labels: SurveyLabelSet,
    pub weight: f64,
}

/// Squeeze-and-excitation over a flat representation (bias-free).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeBlock {
    channels: usize,
    reduced: usize,
    /// `reduced × channels`, row-major.
    w1: Vec<f64>,
    /// `channels × reduced`, row-major.
    w2: Vec<f64>,
}

impl SeBlock {
    pub fn zeros(channels: usize, reduction: usize) -> Self {
        let reduced = channels / reduction;
        Self {
            channels,
            reduced,
            w1: vec![0.0; reduced * channels],
            w2: vec![0.0; channels * reduced],
        }
    }

    /// `W₁` Glorot, `W₂` zero: the block starts as a uniform 0.5 rescaling
    /// while still receiving gradient through `W₂`.
    fn init<R: Rng + ?Sized>(channels: usize, reduction: usize, rng: &mut R) -> Self {
        let mut se = Self::zeros(channels, reduction);
        let limit = glorot_limit(channels, se.reduced);
        for w in &mut se.w1 {
            *w = rng.random_range(-limit..=limit);
        }
        se
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn reduced(&self) -> usize {
        self.reduced
    }

    pub fn w1_mut(&mut self) -> &mut [f64] {
        &mut self.w1
    }

    pub fn w2_mut(&mut self) -> &mut [f64] {
        &mut self.w2
    }

    /// Returns `(relu(W₁ s), σ(W₂ relu(W₁ s)))`.
    pub fn excitation(&self, squeeze: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hidden: Vec<f64> = self
            .w1
            .chunks_exact(self.channels)
            .map(|row| Activation::Relu.apply(dot(row, squeeze)))
            .collect();
        let scale = self
            .w2
            .chunks_exact(self.reduced)
            .map(|row| Activation::Sigmoid.apply(dot(row, &hidden)))
            .collect();
        (hidden, scale)
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let (_, scale) = self.excitation(input);
        scale.iter().zip(input).map(|(e, x)| e * x).collect()
    }

    /// Backward through `out = e ⊙ r`; returns d/dr.
    fn backward(
        &self,
        input: &[f64],
        hidden: &[f64],
        scale: &[f64],
        grad_out: &[f64],
        grads: &mut SeBlock,
    ) -> Vec<f64> {
        let mut grad_in: Vec<f64> = grad_out.iter().zip(scale).map(|(g, e)| g * e).collect();
        let mut grad_hidden = vec![0.0; self.reduced];
        for c in 0..self.channels {
            let d_pre = grad_out[c] * input[c] * scale[c] * (1.0 - scale[c]);
            if d_pre == 0.0 {
                continue;
            }
            let row = c * self.reduced..(c + 1) * self.reduced;
            for ((g, &h), (gh, &w)) in grads.w2[row.clone()]
                .iter_mut()
                .zip(hidden)
                .zip(grad_hidden.iter_mut().zip(&self.w2[row]))
            {
                *g += d_pre * h;
                *gh += d_pre * w;
            }
        }
        for r in 0..self.reduced {
            if hidden[r] <= 0.0 || grad_hidden[r] == 0.0 {
                continue;
            }
            let d = grad_hidden[r];
            let row = r * self.channels..(r + 1) * self.channels;
            for ((g, &x), (gi, &w)) in grads.w1[row.clone()]
                .iter_mut()
                .zip(input)
                .zip(grad_in.iter_mut().zip(&self.w1[row]))
            {
                *g += d * x;
                *gi += d * w;
            }
        }
        grad_in
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub lhuc_input: Vec<f64>,
    /// Backbone layer outputs before gating (`FC_origin`).
    pub origin: Vec<Vec<f64>>,
    /// LHUC gates per backbone layer (empty when LHUC is off).
    pub gates: Vec<Vec<f64>>,
    /// Backbone layer outputs after gating (`FC_final`).
    pub gated: Vec<Vec<f64>>,
    pub se_hidden: Vec<f64>,
    pub se_scale: Vec<f64>,
    /// Representation consumed by the heads.
    pub representation: Vec<f64>,
    pub head_acts: Vec<Vec<Vec<f64>>>,
}

impl ForwardTrace {
    pub fn probabilities(&self) -> Vec<f64> {
        self.head_acts
            .iter()
            .map(|acts| acts.last().expect("non-empty head")[0])
            .collect()
    }
}

/// How LHUC gates are obtained during a forward pass.
#[derive(Debug, Clone, Copy)]
pub enum GateSource<'a> {
    /// Computed by the LHUC network (identity when LHUC is disabled).
    Model,
    /// Supplied by the caller, one vector per backbone layer.
    Fixed(&'a [Vec<f64>]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiHeadNet {
    kind: ModelKind,
    config: SurveyModelConfig,
    /// One `buckets × embedding_dim` table per categorical field.
    embeddings: Vec<Vec<f64>>,
    backbone: MlpStack,
    lhuc: Option<MlpStack>,
    se: Option<SeBlock>,
    heads: Vec<MlpStack>,
}

impl MultiHeadNet {
    /// Seeded initialization: Glorot backbone and heads, zero embeddings, zero
    /// LHUC layers (every gate starts at exactly 1), and an SE block starting
    /// at a uniform 0.5 rescaling.
    pub fn build(kind: ModelKind, config: SurveyModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(seed, "model-init");
        let input_dim = config.input_dim();
        let backbone = MlpStack::glorot(
            input_dim,
            &config.backbone_dims,
            Activation::Relu,
            Activation::Relu,
            &mut rng,
        )?;
        let se = config
            .use_se
            .then(|| SeBlock::init(config.representation_dim(), config.se_reduction, &mut rng));
        let heads = config
            .heads
            .iter()
            .map(|_| {
                MlpStack::glorot(
                    config.representation_dim(),
                    &config.head_dims,
                    Activation::Relu,
                    Activation::Sigmoid,
                    &mut rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let mut net = Self::zeros(kind, config)?;
        net.backbone = backbone;
        net.se = se;
        net.heads = heads;
        Ok(net)
    }

    /// Every parameter zero. Every head then outputs exactly 0.5.
    pub fn zeros(kind: ModelKind, config: SurveyModelConfig) -> Result<Self> {
        config.validate()?;
        let input_dim = config.input_dim();
        let embeddings = config
            .features
            .bucket_counts()
            .iter()
            .map(|&n| vec![0.0; n * config.embedding_dim])
            .collect();
        let backbone = MlpStack::zeros(
            input_dim,
            &config.backbone_dims,
            Activation::Relu,
            Activation::Relu,
        )?;
        let lhuc = if config.use_lhuc {
            let lhuc_dim: usize = config.lhuc_slots()?.iter().map(|r| r.len()).sum();
            Some(MlpStack::zeros(
                lhuc_dim,
                &config.backbone_dims,
                Activation::TwoSigmoid,
                Activation::TwoSigmoid,
            )?)
        } else {
            None
        };
        let se = config
            .use_se
            .then(|| SeBlock::zeros(config.representation_dim(), config.se_reduction));
        let heads = config
            .heads
            .iter()
            .map(|_| {
                MlpStack::zeros(
                    config.representation_dim(),
                    &config.head_dims,
                    Activation::Relu,
                    Activation::Sigmoid,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind,
            config,
            embeddings,
            backbone,
            lhuc,
            se,
            heads,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn config(&self) -> &SurveyModelConfig {
        &self.config
    }

    pub fn head_names(&self) -> Vec<String> {
        self.config.head_names()
    }

    pub fn backbone(&self) -> &MlpStack {
        &self.backbone
    }

    pub fn backbone_mut(&mut self) -> &mut MlpStack {
        &mut self.backbone
    }

    pub fn lhuc(&self) -> Option<&MlpStack> {
        self.lhuc.as_ref()
    }

    pub fn lhuc_mut(&mut self) -> Option<&mut MlpStack> {
        self.lhuc.as_mut()
    }

    pub fn se(&self) -> Option<&SeBlock> {
        self.se.as_ref()
    }

    pub fn se_mut(&mut self) -> Option<&mut SeBlock> {
        self.se.as_mut()
    }

    pub fn head(&self, index: usize) -> &MlpStack {
        &self.heads[index]
    }

    pub fn head_mut(&mut self, index: usize) -> &mut MlpStack {
        &mut self.heads[index]
    }

    /// The same network with the LHUC module removed (gates implicitly 1).
    pub fn without_lhuc(&self) -> Self {
        let mut net = self.clone();
        net.lhuc = None;
        net.config.use_lhuc = false;
        net
    }

    /// Dense model input: per-field embeddings then the numeric block.
    /// Slots listed in `masked` are zeroed.
    pub fn dense_input(&self, features: &FeatureVector, masked: &[Range<usize>]) -> Result<Vec<f64>> {
        self.config.features.check(features)?;
        let d = self.config.embedding_dim;
        let mut x = Vec::with_capacity(self.config.input_dim());
        for (table, &bucket) in self.embeddings.iter().zip(&features.buckets) {
            x.extend_from_slice(&table[bucket * d..(bucket + 1) * d]);
        }
        x.extend_from_slice(&features.numeric);
        for r in masked {
            x[r.clone()].fill(0.0);
        }
        Ok(x)
    }

    fn lhuc_input(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = Vec::new();
        for r in self.config.lhuc_slots()? {
            z.extend_from_slice(&x[r]);
        }
        Ok(z)
    }

    pub fn forward_trace(
        &self,
        features: &FeatureVector,
        masked: &[Range<usize>],
        gates: GateSource<'_>,
    ) -> Result<ForwardTrace> {
        let input = self.dense_input(features, masked)?;
        let (lhuc_input, gate_values) = match (gates, &self.lhuc) {
            (GateSource::Fixed(g), _) => {
                if g.len() != self.backbone.layers().len()
                    || g.iter()
                        .zip(self.backbone.layers())
                        .any(|(v, l)| v.len() != l.out_dim())
                {
                    return Err(Error::config("fixed gates do not match backbone layer dims"));
                }
                (Vec::new(), g.to_vec())
            }
            (GateSource::Model, Some(lhuc)) => {
                let z = self.lhuc_input(&input)?;
                let g = lhuc.forward(&z)?;
                (z, g)
            }
            (GateSource::Model, None) => (Vec::new(), Vec::new()),
        };

        let mut origin = Vec::with_capacity(self.backbone.layers().len());
        let mut gated: Vec<Vec<f64>> = Vec::with_capacity(self.backbone.layers().len());
        for (i, layer) in self.backbone.layers().iter().enumerate() {
            let x = gated.last().map_or(input.as_slice(), Vec::as_slice);
            let h = layer.forward(x)?;
            let out = match gate_values.get(i) {
                Some(g) => h.iter().zip(g).map(|(a, b)| b * a).collect(),
                None => h.clone(),
            };
            origin.push(h);
            gated.push(out);
        }
        let backbone_out = gated.last().expect("non-empty backbone");
        let (se_hidden, se_scale, representation) = match &self.se {
            Some(se) => {
                let (hidden, scale) = se.excitation(backbone_out);
                let rep = scale.iter().zip(backbone_out).map(|(e, r)| e * r).collect();
                (hidden, scale, rep)
            }
            None => (Vec::new(), Vec::new(), backbone_out.clone()),
        };
        let head_acts = self
            .heads
            .iter()
            .map(|h| h.forward(&representation))
            .collect::<Result<Vec<_>>>()?;
        Ok(ForwardTrace {
            input,
            lhuc_input,
            origin,
            gates: gate_values,
            gated,
            se_hidden,
            se_scale,
            representation,
            head_acts,
        })
    }

    /// Per-head probabilities, in head order.
    pub fn predict(&self, features: &FeatureVector) -> Result<Vec<f64>> {
        Ok(self
            .forward_trace(features, &[], GateSource::Model)?
            .probabilities())
    }

    pub fn predict_masked(&self, features: &FeatureVector, masked: &[Range<usize>]) -> Result<Vec<f64>> {
        Ok(self
            .forward_trace(features, masked, GateSource::Model)?
            .probabilities())
    }

    pub fn predict_with_gates(&self, features: &FeatureVector, gates: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self
            .forward_trace(features, &[], GateSource::Fixed(gates))?
            .probabilities())
    }

    /// Accumulates into `grads` the gradient of `Σ_h dl_dp[h] · p_h` for one
    /// example whose forward pass produced `trace`.
    pub fn backward(
        &self,
        features: &FeatureVector,
        trace: &ForwardTrace,
        dl_dp: &[f64],
        grads: &mut MultiHeadNet,
    ) {
        let rep_dim = trace.representation.len();
        let mut d_rep = vec![0.0; rep_dim];
        for (h, head) in self.heads.iter().enumerate() {
            if dl_dp[h] == 0.0 {
                continue;
            }
            let g = head.backward(&trace.representation, &trace.head_acts[h], &[dl_dp[h]], &mut grads.heads[h]);
            for (a, b) in d_rep.iter_mut().zip(&g) {
                *a += b;
            }
        }

        let backbone_out = trace.gated.last().expect("non-empty backbone");
        let mut d_out = match (&self.se, &mut grads.se) {
            (Some(se), Some(se_grads)) => {
                se.backward(backbone_out, &trace.se_hidden, &trace.se_scale, &d_rep, se_grads)
            }
            _ => d_rep,
        };

        let n_layers = self.backbone.layers().len();
        let gated_by_model = self.lhuc.is_some() && !trace.lhuc_input.is_empty();
        let mut d_gate_chain: Vec<f64> = Vec::new();
        let mut d_lhuc_input: Vec<f64> = Vec::new();
        let mut d_input = Vec::new();
        for i in (0..n_layers).rev() {
            let layer = &self.backbone.layers()[i];
            let x = if i == 0 { &trace.input } else { &trace.gated[i - 1] };
            let d_origin: Vec<f64> = match trace.gates.get(i) {
                Some(g) => d_out.iter().zip(g).map(|(d, gv)| d * gv).collect(),
                None => d_out.clone(),
            };
            if gated_by_model {
                let lhuc = self.lhuc.as_ref().expect("lhuc present");
                let mut d_gate: Vec<f64> =
                    d_out.iter().zip(&trace.origin[i]).map(|(d, h)| d * h).collect();
                if !d_gate_chain.is_empty() {
                    for (a, b) in d_gate.iter_mut().zip(&d_gate_chain) {
                        *a += b;
                    }
                }
                let gate_in = if i == 0 { &trace.lhuc_input } else { &trace.gates[i - 1] };
                let lhuc_grads = grads.lhuc.as_mut().expect("lhuc gradient buffer");
                let g = lhuc.layers()[i].backward(
                    gate_in,
                    &trace.gates[i],
                    &d_gate,
                    &mut lhuc_grads.layers_mut()[i],
                    true,
                );
                if i == 0 {
                    d_lhuc_input = g;
                } else {
                    d_gate_chain = g;
                }
            }
            let d_x = layer.backward(x, &trace.origin[i], &d_origin, &mut grads.backbone.layers_mut()[i], true);
            if i == 0 {
                d_input = d_x;
            } else {
                d_out = d_x;
            }
        }

        if gated_by_model {
            let mut offset = 0;
            for r in self.config.lhuc_slots().expect("validated lhuc slots") {
                let len = r.len();
                for (a, b) in d_input[r].iter_mut().zip(&d_lhuc_input[offset..offset + len]) {
                    *a += b;
                }
                offset += len;
            }
        }

        let d = self.config.embedding_dim;
        for (f, &bucket) in features.buckets.iter().enumerate() {
            let row = &mut grads.embeddings[f][bucket * d..(bucket + 1) * d];
            for (g, v) in row.iter_mut().zip(&d_input[f * d..(f + 1) * d]) {
                *g += v;
            }
        }
    }

    /// Per-head weighted binary cross-entropy, each head normalized by the
    /// total weight of the examples it applies to, summed over heads. When
    /// `grads` is given the gradient is accumulated into it.
    pub fn batch_loss(&self, batch: &[WeightedExample], mut grads: Option<&mut MultiHeadNet>) -> Result<f64> {
        let n_heads = self.heads.len();
        let mut head_weight = vec![0.0; n_heads];
        for ex in batch {
            if ex.labels.labels.len() != n_heads {
                return Err(Error::config(format!(
                    "example carries {} labels for {} heads",
                    ex.labels.labels.len(),
                    n_heads
                )));
            }
            if !(ex.weight.is_finite() && ex.weight > 0.0) {
                return Err(Error::InvalidInput(format!("sample weight {} is not positive", ex.weight)));
            }
            for (hw, l) in head_weight.iter_mut().zip(&ex.labels.labels) {
                if l.is_some() {
                    *hw += ex.weight;
                }
            }
        }
        let mut loss = 0.0;
        let mut dl_dp = vec![0.0; n_heads];
        for ex in batch {
            let trace = self.forward_trace(&ex.features, &[], GateSource::Model)?;
            let probs = trace.probabilities();
            for h in 0..n_heads {
                dl_dp[h] = 0.0;
                let Some(label) = ex.labels.labels[h] else {
                    continue;
                };
                let w = ex.weight / head_weight[h];
                let y = if label { 1.0 } else { 0.0 };
                let p = probs[h];
                loss += w * bce_term(p, y);
                if (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                    dl_dp[h] = w * (-y / p + (1.0 - y) / (1.0 - p));
                }
            }
            if let Some(g) = grads.as_deref_mut() {
                self.backward(&ex.features, &trace, &dl_dp, g);
            }
        }
        Ok(loss)
    }

    fn fold_signature(&self, trace: &ForwardTrace, hash: &mut u64) {
        self.backbone.fold_relu_pattern(&trace.origin, hash);
        fold_signs(&trace.se_hidden, hash);
        for (head, acts) in self.heads.iter().zip(&trace.head_acts) {
            head.fold_relu_pattern(acts, hash);
        }
    }
}

impl ParamSet for MultiHeadNet {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        for (name, table) in CATEGORICAL_FIELDS.iter().zip(&self.embeddings) {
            out.push(TensorRef {
                name: format!("embedding.{name}"),
                data: table,
            });
        }
        self.backbone.push_tensors("backbone", &mut out);
        if let Some(lhuc) = &self.lhuc {
            lhuc.push_tensors("lhuc", &mut out);
        }
        if let Some(se) = &self.se {
            out.push(TensorRef {
                name: "se.w1".into(),
                data: &se.w1,
            });
            out.push(TensorRef {
                name: "se.w2".into(),
                data: &se.w2,
            });
        }
        for (spec, head) in self.config.heads.iter().zip(&self.heads) {
            head.push_tensors(&format!("head.{}", spec.name), &mut out);
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for table in &mut self.embeddings {
            out.push(table);
        }
        self.backbone.push_tensors_mut(&mut out);
        if let Some(lhuc) = &mut self.lhuc {
            lhuc.push_tensors_mut(&mut out);
        }
        if let Some(se) = &mut self.se {
            out.push(&mut se.w1);
            out.push(&mut se.w2);
        }
        for head in &mut self.heads {
            head.push_tensors_mut(&mut out);
        }
        out
    }
}

impl Differentiable for MultiHeadNet {
    type Batch = [WeightedExample];

    fn loss(&self, batch: &Self::Batch) -> Result<f64> {
        self.batch_loss(batch, None)
    }

    fn loss_and_grad(&self, batch: &Self::Batch) -> Result<(f64, Self)> {
        let mut grads = zeroed(self);
        let loss = self.batch_loss(batch, Some(&mut grads))?;
        Ok((loss, grads))
    }

    fn region_signature(&self, batch: &Self::Batch) -> Result<u64> {
        let mut hash = 0u64;
        for ex in batch {
            let trace = self.forward_trace(&ex.features, &[], GateSource::Model)?;
            self.fold_signature(&trace, &mut hash);
        }
        Ok(hash)
    }
}
