use super::layers::{self, Dims};
use super::{LossBreakdown, LossWeights, NetError, Result, Sample};
use crate::entropy::{BinaryBatch, LossValue};
use crate::loss::PredictionLoss;
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// `(H, W, C)` of the input volume.
    pub input_shape: [usize; 3],
    pub encoder_levels: usize,
    pub channels_per_level: Vec<usize>,
    pub clinical_dim: usize,
    pub dense_widths: Vec<usize>,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_shape: [32, 32, 1],
            encoder_levels: 3,
            channels_per_level: vec![8, 16, 32],
            clinical_dim: 23,
            dense_widths: vec![16],
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let [h, w, c] = self.input_shape;
        let bad = |msg: String| Err(NetError::InvalidConfig(msg));
        if h == 0 || w == 0 || c == 0 {
            return bad(format!("input shape {:?} has a zero dimension", self.input_shape));
        }
        if self.encoder_levels == 0 || self.channels_per_level.is_empty() {
            return bad("at least one encoder level is required".into());
        }
        if self.encoder_levels != self.channels_per_level.len() {
            return bad(format!(
                "encoder_levels = {} but {} channel widths given",
                self.encoder_levels,
                self.channels_per_level.len()
            ));
        }
        if self.channels_per_level.contains(&0) || self.dense_widths.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        let div = 1usize
            .checked_shl(self.encoder_levels as u32)
            .filter(|d| *d <= h.max(w))
            .unwrap_or(0);
        if div == 0 || h % div != 0 || w % div != 0 {
            return bad(format!(
                "H = {h} and W = {w} must be divisible by 2^{}",
                self.encoder_levels
            ));
        }
        Ok(())
    }

    fn level_dims(&self, level: usize) -> Dims {
        let [h, w, _] = self.input_shape;
        Dims::new(h >> level, w >> level, 0)
    }

    /// Length of the flattened bottleneck.
    pub fn bottleneck_len(&self) -> usize {
        let d = self.level_dims(self.encoder_levels);
        d.h * d.w * self.channels_per_level[self.encoder_levels - 1]
    }
}

/// Which head a parameter block belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockRole {
    /// Shared encoder; reached by both losses.
    Encoder,
    /// Decoder and reconstruction output; reached only by the
    /// reconstruction loss.
    Decoder,
    /// Dense prediction branch; reached only by the prediction loss.
    Head,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub role: BlockRole,
}

#[derive(Debug, Clone, Copy)]
struct ConvSpec {
    weight: usize,
    bias: usize,
    in_c: usize,
    out_c: usize,
}

#[derive(Debug, Clone, Copy)]
struct DenseSpec {
    weight: usize,
    bias: usize,
    n_in: usize,
    n_out: usize,
}

/// Gradient of the loss, one vector per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    blocks: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(params: &[Vec<f64>]) -> Self {
        Self {
            blocks: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn from_blocks(blocks: Vec<Vec<f64>>) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.blocks
    }

    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// Reconstruction and recurrence probability for one item.
#[derive(Debug, Clone, PartialEq)]
pub struct MultitaskOutput {
    pub reconstruction: Tensor,
    pub recurrence_prob: f64,
}

/// Activations of one item kept for the backward pass.
#[derive(Debug, Clone)]
struct ItemCache {
    /// Input to each encoder convolution; level 0 holds the volume.
    enc_in: Vec<Vec<f64>>,
    /// Post-ReLU encoder outputs (the skip features).
    enc_out: Vec<Vec<f64>>,
    pool_arg: Vec<Vec<usize>>,
    bottleneck: Vec<f64>,
    /// Concatenated decoder conv inputs, indexed by level.
    dec_in: Vec<Vec<f64>>,
    /// Post-ReLU decoder outputs, indexed by level.
    dec_out: Vec<Vec<f64>>,
    recon: Vec<f64>,
    head_in: Vec<Vec<f64>>,
    head_out: Vec<Vec<f64>>,
    prob: f64,
}

/// Recorded forward pass over one batch.
#[derive(Debug, Clone)]
pub struct Tape {
    fingerprint: u64,
    version: u64,
    items: Vec<ItemCache>,
}

impl Tape {
    pub fn probs(&self) -> Vec<f64> {
        self.items.iter().map(|c| c.prob).collect()
    }

    /// Hash of every piecewise choice made in the pass: ReLU on/off states
    /// and max-pool winners. Two passes with equal patterns lie on the same
    /// smooth piece of the network.
    pub fn activation_pattern(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(PRIME);
        };
        let eat_on = |xs: &[f64], eat: &mut dyn FnMut(u64)| {
            for chunk in xs.chunks(64) {
                let bits = chunk.iter().enumerate().fold(0u64, |acc, (j, &v)| acc | (u64::from(v > 0.0) << j));
                eat(bits);
            }
        };
        for c in &self.items {
            c.enc_out.iter().for_each(|x| eat_on(x, &mut eat));
            c.pool_arg.iter().flatten().for_each(|&a| eat(a as u64));
            c.dec_out.iter().for_each(|x| eat_on(x, &mut eat));
            if let Some((_, hidden)) = c.head_out.split_last() {
                hidden.iter().for_each(|x| eat_on(x, &mut eat));
            }
        }
        h
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    blocks: Vec<BlockInfo>,
    params: Vec<Vec<f64>>,
    encoder: Vec<ConvSpec>,
    /// Indexed by level, like the encoder.
    decoder: Vec<ConvSpec>,
    rec_out: ConvSpec,
    head: Vec<DenseSpec>,
    version: u64,
}

struct Builder {
    rng: ChaCha8Rng,
    blocks: Vec<BlockInfo>,
    params: Vec<Vec<f64>>,
}

impl Builder {
    fn push(&mut self, name: String, shape: Vec<usize>, role: BlockRole, fan_in: Option<usize>) -> usize {
        let n: usize = shape.iter().product();
        let data = match fan_in {
            // He-uniform
            Some(fan_in) => {
                let limit = (6.0 / fan_in as f64).sqrt();
                (0..n).map(|_| self.rng.random_range(-limit..limit)).collect()
            }
            None => vec![0.0; n],
        };
        self.blocks.push(BlockInfo { name, shape, role });
        self.params.push(data);
        self.params.len() - 1
    }

    fn conv(&mut self, name: &str, in_c: usize, out_c: usize, role: BlockRole) -> ConvSpec {
        let weight = self.push(
            format!("{name}.weight"),
            vec![out_c, 3, 3, in_c],
            role,
            Some(9 * in_c),
        );
        let bias = self.push(format!("{name}.bias"), vec![out_c], role, None);
        ConvSpec {
            weight,
            bias,
            in_c,
            out_c,
        }
    }

    fn dense(&mut self, name: &str, n_in: usize, n_out: usize) -> DenseSpec {
        let weight = self.push(
            format!("{name}.weight"),
            vec![n_out, n_in],
            BlockRole::Head,
            Some(n_in),
        );
        let bias = self.push(format!("{name}.bias"), vec![n_out], BlockRole::Head, None);
        DenseSpec {
            weight,
            bias,
            n_in,
            n_out,
        }
    }
}

fn fingerprint(batch: &[&Sample]) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: u64| {
        h ^= v;
        h = h.wrapping_mul(PRIME);
    };
    eat(batch.len() as u64);
    for s in batch {
        s.volume.data().iter().for_each(|v| eat(v.to_bits()));
        s.clinical.iter().for_each(|v| eat(v.to_bits()));
        eat(u64::from(s.label));
    }
    h
}

impl Model {
    /// Builds a model with He-uniform weights drawn from `config.seed` and
    /// zero biases.
    ///
    /// Blocks are created in a fixed order: encoder levels, decoder levels
    /// from the deepest up, the reconstruction convolution, then the dense
    /// prediction branch.
    pub fn build(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let [_, _, in_c] = config.input_shape;
        let ch = &config.channels_per_level;
        let levels = config.encoder_levels;
        let mut b = Builder {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            blocks: Vec::new(),
            params: Vec::new(),
        };

        let mut encoder = Vec::with_capacity(levels);
        let mut prev = in_c;
        for (l, &c) in ch.iter().enumerate() {
            encoder.push(b.conv(&format!("enc{l}"), prev, c, BlockRole::Encoder));
            prev = c;
        }

        let mut decoder = vec![None; levels];
        let mut incoming = ch[levels - 1];
        for l in (0..levels).rev() {
            let cat = incoming + ch[l];
            let spec = b.conv(&format!("dec{l}"), cat, ch[l], BlockRole::Decoder);
            assert_eq!(
                spec.in_c,
                incoming + encoder[l].out_c,
                "skip concatenation must join decoder and encoder channels"
            );
            decoder[l] = Some(spec);
            incoming = ch[l];
        }
        let decoder: Vec<ConvSpec> = decoder.into_iter().map(Option::unwrap).collect();
        let rec_out = b.conv("rec", ch[0], in_c, BlockRole::Decoder);

        let mut head = Vec::new();
        let mut n_in = config.bottleneck_len() + config.clinical_dim;
        for (i, &width) in config.dense_widths.iter().enumerate() {
            head.push(b.dense(&format!("dense{i}"), n_in, width));
            n_in = width;
        }
        head.push(b.dense("pred", n_in, 1));

        Ok(Self {
            config,
            blocks: b.blocks,
            params: b.params,
            encoder,
            decoder,
            rec_out,
            head,
            version: 0,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn blocks(&self) -> &[BlockInfo] {
        &self.blocks
    }

    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    /// Mutable parameter access; invalidates every outstanding [`Tape`].
    pub fn params_mut(&mut self) -> &mut [Vec<f64>] {
        self.version += 1;
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Vec::len).sum()
    }

    fn input_dims(&self) -> Dims {
        let [h, w, c] = self.config.input_shape;
        Dims::new(h, w, c)
    }

    fn check_input(&self, volume: &Tensor, clinical: &[f64]) -> Result<()> {
        let [h, w, c] = self.config.input_shape;
        if volume.shape() != [h, w, c] {
            return Err(NetError::ShapeMismatch {
                expected: vec![h, w, c],
                got: volume.shape().to_vec(),
            });
        }
        if clinical.len() != self.config.clinical_dim {
            return Err(NetError::ShapeMismatch {
                expected: vec![self.config.clinical_dim],
                got: vec![clinical.len()],
            });
        }
        Ok(())
    }

    fn conv(&self, spec: &ConvSpec, input: &[f64], dims: Dims) -> Vec<f64> {
        layers::conv3x3(
            input,
            dims.with_channels(spec.in_c),
            &self.params[spec.weight],
            &self.params[spec.bias],
        )
    }

    fn forward_item(&self, volume: &[f64], clinical: &[f64]) -> ItemCache {
        let levels = self.config.encoder_levels;
        let mut enc_in = Vec::with_capacity(levels);
        let mut enc_out = Vec::with_capacity(levels);
        let mut pool_arg = Vec::with_capacity(levels);

        let mut x = volume.to_vec();
        for (l, spec) in self.encoder.iter().enumerate() {
            let dims = self.config.level_dims(l);
            let mut y = self.conv(spec, &x, dims);
            layers::relu_in_place(&mut y);
            let (pooled, arg) = layers::maxpool2(&y, dims.with_channels(spec.out_c));
            enc_in.push(std::mem::replace(&mut x, pooled));
            enc_out.push(y);
            pool_arg.push(arg);
        }
        let bottleneck = x;

        let mut dec_in = vec![Vec::new(); levels];
        let mut dec_out = vec![Vec::new(); levels];
        let mut cur = bottleneck.clone();
        let mut cur_c = self.config.channels_per_level[levels - 1];
        for l in (0..levels).rev() {
            let small = self.config.level_dims(l + 1).with_channels(cur_c);
            let up = layers::upsample2(&cur, small);
            let skip_c = self.encoder[l].out_c;
            let cat = layers::concat_channels(&up, cur_c, &enc_out[l], skip_c);
            let mut y = self.conv(&self.decoder[l], &cat, self.config.level_dims(l));
            layers::relu_in_place(&mut y);
            dec_in[l] = cat;
            cur = y.clone();
            cur_c = self.decoder[l].out_c;
            dec_out[l] = y;
        }
        let recon = self.conv(&self.rec_out, &dec_out[0], self.input_dims());

        let mut feat = bottleneck.clone();
        feat.extend_from_slice(clinical);
        let mut head_in = Vec::with_capacity(self.head.len());
        let mut head_out = Vec::with_capacity(self.head.len());
        let last = self.head.len() - 1;
        for (i, spec) in self.head.iter().enumerate() {
            let mut y = layers::dense(&feat, &self.params[spec.weight], &self.params[spec.bias]);
            if i < last {
                layers::relu_in_place(&mut y);
            }
            head_in.push(std::mem::replace(&mut feat, y.clone()));
            head_out.push(y);
        }
        let prob = layers::sigmoid(feat[0]);

        ItemCache {
            enc_in,
            enc_out,
            pool_arg,
            bottleneck,
            dec_in,
            dec_out,
            recon,
            head_in,
            head_out,
            prob,
        }
    }

    /// Inference on one item.
    pub fn forward(&self, volume: &Tensor, clinical: &[f64]) -> Result<MultitaskOutput> {
        self.check_input(volume, clinical)?;
        let cache = self.forward_item(volume.data(), clinical);
        Ok(MultitaskOutput {
            reconstruction: Tensor::new(volume.shape().to_vec(), cache.recon)?,
            recurrence_prob: cache.prob,
        })
    }

    /// Recurrence probabilities for many items.
    pub fn predict(&self, samples: &[&Sample]) -> Result<Vec<f64>> {
        samples
            .iter()
            .map(|s| self.forward(&s.volume, &s.clinical).map(|o| o.recurrence_prob))
            .collect()
    }

    /// Forward pass over a batch, recording what [`Model::backward`] needs.
    pub fn forward_tape(&self, batch: &[&Sample]) -> Result<Tape> {
        if batch.is_empty() {
            return Err(NetError::EmptyDataset);
        }
        let items = batch
            .iter()
            .map(|s| {
                self.check_input(&s.volume, &s.clinical)?;
                Ok(self.forward_item(s.volume.data(), &s.clinical))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Tape {
            fingerprint: fingerprint(batch),
            version: self.version,
            items,
        })
    }

    fn check_tape(&self, tape: &Tape, batch: &[&Sample]) -> Result<()> {
        if tape.version != self.version
            || tape.items.len() != batch.len()
            || tape.fingerprint != fingerprint(batch)
        {
            return Err(NetError::StaleTape);
        }
        Ok(())
    }

    fn prediction_batch(tape: &Tape, batch: &[&Sample]) -> Result<BinaryBatch> {
        Ok(BinaryBatch::new(
            batch.iter().map(|s| s.label).collect(),
            tape.probs(),
        )?)
    }

    /// Loss terms of a recorded batch.
    pub fn losses(
        &self,
        tape: &Tape,
        batch: &[&Sample],
        loss: &dyn PredictionLoss,
        weights: LossWeights,
    ) -> Result<LossBreakdown> {
        self.check_tape(tape, batch)?;
        let n = batch.len() as f64;
        let ss: f64 = tape
            .items
            .iter()
            .zip(batch)
            .map(|(c, s)| {
                c.recon
                    .iter()
                    .zip(s.volume.data())
                    .map(|(p, y)| (y - p) * (y - p))
                    .sum::<f64>()
            })
            .sum();
        let rec = LossValue::new(ss / n)?;
        let pred = loss.loss(&Self::prediction_batch(tape, batch)?)?;
        let total = LossValue::new(weights.rec * rec.value() + weights.pred * pred.value())?;
        Ok(LossBreakdown { rec, pred, total })
    }

    /// Gradient of the weighted total loss with respect to every block.
    ///
    /// The prediction head receives `d loss / d q` from `loss`, evaluated at
    /// the clamped probabilities, chained through the sigmoid derivative.
    pub fn backward(
        &self,
        tape: &Tape,
        batch: &[&Sample],
        loss: &dyn PredictionLoss,
        weights: LossWeights,
    ) -> Result<Gradients> {
        self.check_tape(tape, batch)?;
        let n = batch.len() as f64;
        let dq = if weights.pred != 0.0 {
            loss.grad(&Self::prediction_batch(tape, batch)?)?
        } else {
            vec![0.0; batch.len()]
        };
        let mut grads = Gradients::zeros_like(&self.params);
        for ((cache, sample), dq) in tape.items.iter().zip(batch).zip(dq) {
            let drec: Vec<f64> = cache
                .recon
                .iter()
                .zip(sample.volume.data())
                .map(|(p, y)| weights.rec * 2.0 * (p - y) / n)
                .collect();
            let dlogit = weights.pred * dq * cache.prob * (1.0 - cache.prob);
            self.backward_item(cache, &drec, dlogit, &mut grads);
        }
        Ok(grads)
    }

    fn conv_backward(
        &self,
        spec: &ConvSpec,
        input: &[f64],
        dims: Dims,
        grad_out: &[f64],
        grads: &mut Gradients,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let (gw, gb) = two_blocks(&mut grads.blocks, spec.weight, spec.bias);
        layers::conv3x3_backward(
            input,
            dims.with_channels(spec.in_c),
            &self.params[spec.weight],
            grad_out,
            gw,
            gb,
            want_input,
        )
    }

    fn backward_item(&self, cache: &ItemCache, drec: &[f64], dlogit: f64, grads: &mut Gradients) {
        let levels = self.config.encoder_levels;
        let ch = &self.config.channels_per_level;

        // prediction branch
        let mut g = vec![dlogit];
        let last = self.head.len() - 1;
        for (i, spec) in self.head.iter().enumerate().rev() {
            if i < last {
                layers::relu_backward_in_place(&cache.head_out[i], &mut g);
            }
            let (gw, gb) = two_blocks(&mut grads.blocks, spec.weight, spec.bias);
            debug_assert_eq!(cache.head_in[i].len(), spec.n_in);
            debug_assert_eq!(g.len(), spec.n_out);
            g = layers::dense_backward(&cache.head_in[i], &self.params[spec.weight], &g, gw, gb);
        }
        let mut g_bottleneck = g;
        g_bottleneck.truncate(cache.bottleneck.len());

        // reconstruction branch
        let mut g = self
            .conv_backward(&self.rec_out, &cache.dec_out[0], self.input_dims(), drec, grads, true)
            .unwrap();
        let mut skip_grads = vec![Vec::new(); levels];
        for l in 0..levels {
            layers::relu_backward_in_place(&cache.dec_out[l], &mut g);
            let spec = &self.decoder[l];
            let g_cat = self
                .conv_backward(spec, &cache.dec_in[l], self.config.level_dims(l), &g, grads, true)
                .unwrap();
            let up_c = spec.in_c - ch[l];
            let (g_up, g_skip) = layers::concat_channels_backward(&g_cat, up_c, ch[l]);
            skip_grads[l] = g_skip;
            g = layers::upsample2_backward(&g_up, self.config.level_dims(l + 1).with_channels(up_c));
        }
        for (a, b) in g.iter_mut().zip(&g_bottleneck) {
            *a += b;
        }

        // shared encoder
        for l in (0..levels).rev() {
            let mut g_out = layers::maxpool2_backward(&cache.pool_arg[l], &g, cache.enc_out[l].len());
            for (a, b) in g_out.iter_mut().zip(&skip_grads[l]) {
                *a += b;
            }
            layers::relu_backward_in_place(&cache.enc_out[l], &mut g_out);
            let gin = self.conv_backward(
                &self.encoder[l],
                &cache.enc_in[l],
                self.config.level_dims(l),
                &g_out,
                grads,
                l > 0,
            );
            if let Some(gin) = gin {
                g = gin;
            }
        }
    }

    /// Replaces every parameter; block lengths must match.
    pub fn load_params(&mut self, params: Vec<Vec<f64>>) -> Result<()> {
        if params.len() != self.params.len()
            || params.iter().zip(&self.params).any(|(a, b)| a.len() != b.len())
        {
            return Err(NetError::ShapeMismatch {
                expected: self.params.iter().map(Vec::len).collect(),
                got: params.iter().map(Vec::len).collect(),
            });
        }
        self.version += 1;
        self.params = params;
        Ok(())
    }
}

fn two_blocks(blocks: &mut [Vec<f64>], a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(a < b);
    let (lo, hi) = blocks.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}
