use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::config::{ArchConfig, TrainConfig};
use super::mode::{Mode, Placement};
use crate::nn::{mse, softmax_xent, DenseNet, Forward, Gradients, Parameterized};
use crate::rng;
use crate::{Error, Result};

pub const NUM_GROUPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleId {
    Encoder,
    Predictor,
    Decoder,
    Disentangler1,
    Disentangler2,
    Discriminator,
}

impl ModuleId {
    pub const ALL: [ModuleId; 6] = [
        ModuleId::Encoder,
        ModuleId::Predictor,
        ModuleId::Decoder,
        ModuleId::Disentangler1,
        ModuleId::Disentangler2,
        ModuleId::Discriminator,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// One minibatch: inputs with speaker and group class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Array2<f64>,
    pub speakers: Vec<usize>,
    pub groups: Vec<usize>,
}

impl Batch {
    pub fn new(x: Array2<f64>, speakers: Vec<usize>, groups: Vec<usize>) -> Result<Self> {
        for len in [speakers.len(), groups.len()] {
            if len != x.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: x.nrows(),
                    actual: len,
                });
            }
        }
        if x.nrows() == 0 {
            return Err(Error::Empty("batch"));
        }
        Ok(Self { x, speakers, groups })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }
}

/// Unweighted losses of one batch against the true labels. Losses of
/// modules the mode does not use are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub l_pred: f64,
    pub l_recon: f64,
    /// MSE of the e2 -> e1 disentangler.
    pub l_dis1: f64,
    /// MSE of the e1 -> e2 disentangler.
    pub l_dis2: f64,
    pub l_bias: f64,
    /// `alpha * l_pred + beta * l_recon`
    pub l_prim: f64,
    /// `l_dis1 + l_dis2`
    pub l_sec: f64,
}

impl LossReport {
    pub fn new(l_pred: f64, l_recon: f64, l_dis1: f64, l_dis2: f64, l_bias: f64, alpha: f64, beta: f64) -> Self {
        Self {
            l_pred,
            l_recon,
            l_dis1,
            l_dis2,
            l_bias,
            l_prim: alpha * l_pred + beta * l_recon,
            l_sec: l_dis1 + l_dis2,
        }
    }
}

/// Outputs of every active module for one batch, with the caches needed
/// for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub e1: Array2<f64>,
    pub e2: Array2<f64>,
    /// e1 after the dropout mask; equal to `e1` outside training.
    pub e1_dropped: Array2<f64>,
    encoder: Forward,
    predictor: Forward,
    decoder: Option<Forward>,
    disentangler1: Option<Forward>,
    disentangler2: Option<Forward>,
    discriminator: Option<Forward>,
}

impl ForwardPass {
    pub fn speaker_logits(&self) -> &Array2<f64> {
        &self.predictor.output
    }

    pub fn reconstruction(&self) -> Option<&Array2<f64>> {
        self.decoder.as_ref().map(|f| &f.output)
    }

    /// Disentangler 1's prediction of e1 from e2.
    pub fn e1_hat(&self) -> Option<&Array2<f64>> {
        self.disentangler1.as_ref().map(|f| &f.output)
    }

    /// Disentangler 2's prediction of e2 from e1.
    pub fn e2_hat(&self) -> Option<&Array2<f64>> {
        self.disentangler2.as_ref().map(|f| &f.output)
    }

    pub fn group_logits(&self) -> Option<&Array2<f64>> {
        self.discriminator.as_ref().map(|f| &f.output)
    }
}

/// Gradients per module; `None` where a module receives no gradient.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModuleGrads {
    grads: [Option<Gradients>; 6],
}

impl ModuleGrads {
    pub fn get(&self, id: ModuleId) -> Option<&Gradients> {
        self.grads[id.index()].as_ref()
    }

    fn set(&mut self, id: ModuleId, g: Gradients) {
        self.grads[id.index()] = Some(g);
    }

    /// Concatenates the gradients of `ids` in the layout of
    /// [`UaiModel::flat_params_of`], with zeros for modules without one.
    pub fn flatten(&self, model: &UaiModel, ids: &[ModuleId]) -> Vec<f64> {
        let mut out = Vec::new();
        for &id in ids {
            if let Some(net) = model.module(id) {
                match self.get(id) {
                    Some(g) => out.extend(g.flatten()),
                    None => out.extend(std::iter::repeat(0.0).take(net.param_count())),
                }
            }
        }
        out
    }
}

/// Fixed targets for the encoder's confusion objective in a secondary step:
/// row-shuffled copies of e1 and e2 for the disentanglers and resampled
/// group labels for the discriminator.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionTargets {
    pub e1: Option<Array2<f64>>,
    pub e2: Option<Array2<f64>>,
    pub groups: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UaiModel {
    mode: Mode,
    arch: ArchConfig,
    input_dim: usize,
    n_speakers: usize,
    encoder: DenseNet,
    predictor: DenseNet,
    decoder: Option<DenseNet>,
    disentangler1: Option<DenseNet>,
    disentangler2: Option<DenseNet>,
    discriminator: Option<DenseNet>,
}

impl UaiModel {
    /// Builds the modules active in `mode`. Each module draws its initial
    /// weights from its own generator, so a module's init does not depend
    /// on which other modules exist.
    pub fn new(mode: Mode, input_dim: usize, n_speakers: usize, arch: &ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        if input_dim == 0 {
            return Err(Error::param("input dimension must be at least 1"));
        }
        if n_speakers < 2 {
            return Err(Error::Insufficient(format!("{n_speakers} speaker(s); at least 2 are needed")));
        }
        let activity = mode.activity();
        let (e1, e2) = (arch.dim_e1, arch.dim_e2);
        let build = |id: ModuleId, input: usize, hidden: &[usize], output: usize| {
            DenseNet::mlp(input, hidden, output, &mut rng::derive(seed, rng::stream::INIT, id.index() as u64))
        };
        let when = |on: bool, id, input, hidden: &[usize], output| on.then(|| build(id, input, hidden, output));
        Ok(Self {
            mode,
            input_dim,
            n_speakers,
            encoder: build(ModuleId::Encoder, input_dim, &arch.encoder_hidden, e1 + e2),
            predictor: build(ModuleId::Predictor, e1, &arch.predictor_hidden, n_speakers),
            decoder: when(activity.decoder, ModuleId::Decoder, e1 + e2, &arch.decoder_hidden, input_dim),
            disentangler1: when(activity.disentangler, ModuleId::Disentangler1, e2, &arch.disentangler_hidden, e1),
            disentangler2: when(activity.disentangler, ModuleId::Disentangler2, e1, &arch.disentangler_hidden, e2),
            discriminator: when(
                activity.discriminator,
                ModuleId::Discriminator,
                e1,
                &arch.discriminator_hidden,
                NUM_GROUPS,
            ),
            arch: arch.clone(),
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_speakers(&self) -> usize {
        self.n_speakers
    }

    pub fn dim_e1(&self) -> usize {
        self.arch.dim_e1
    }

    pub fn module(&self, id: ModuleId) -> Option<&DenseNet> {
        match id {
            ModuleId::Encoder => Some(&self.encoder),
            ModuleId::Predictor => Some(&self.predictor),
            ModuleId::Decoder => self.decoder.as_ref(),
            ModuleId::Disentangler1 => self.disentangler1.as_ref(),
            ModuleId::Disentangler2 => self.disentangler2.as_ref(),
            ModuleId::Discriminator => self.discriminator.as_ref(),
        }
    }

    pub fn module_mut(&mut self, id: ModuleId) -> Option<&mut DenseNet> {
        match id {
            ModuleId::Encoder => Some(&mut self.encoder),
            ModuleId::Predictor => Some(&mut self.predictor),
            ModuleId::Decoder => self.decoder.as_mut(),
            ModuleId::Disentangler1 => self.disentangler1.as_mut(),
            ModuleId::Disentangler2 => self.disentangler2.as_mut(),
            ModuleId::Discriminator => self.discriminator.as_mut(),
        }
    }

    /// Modules updated by a primary step.
    pub fn primary_modules(&self) -> Vec<ModuleId> {
        let mut ids = vec![ModuleId::Encoder, ModuleId::Predictor];
        if self.decoder.is_some() {
            ids.push(ModuleId::Decoder);
        }
        if self.mode.activity().placement == Placement::PrimaryBranch {
            ids.push(ModuleId::Discriminator);
        }
        ids
    }

    /// Modules updated by a secondary step; empty when the mode has none.
    pub fn secondary_modules(&self) -> Vec<ModuleId> {
        if !self.mode.has_secondary() {
            return Vec::new();
        }
        let mut ids = vec![ModuleId::Encoder];
        if self.disentangler1.is_some() {
            ids.extend([ModuleId::Disentangler1, ModuleId::Disentangler2]);
        }
        if self.mode.activity().placement == Placement::SecondaryBranch {
            ids.push(ModuleId::Discriminator);
        }
        ids
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.ncols(),
            });
        }
        Ok(())
    }

    /// Runs every active module. `mask` is the dropout mask for e1 on the
    /// decoder path; `None` means no dropout.
    pub fn forward(&self, x: ArrayView2<f64>, mask: Option<&Array2<f64>>) -> Result<ForwardPass> {
        self.check_input(x)?;
        let d1 = self.arch.dim_e1;
        let encoder = self.encoder.forward(x)?;
        let e1 = encoder.output.slice(s![.., ..d1]).to_owned();
        let e2 = encoder.output.slice(s![.., d1..]).to_owned();
        let e1_dropped = match mask {
            Some(m) => {
                if m.dim() != e1.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: e1.len(),
                        actual: m.len(),
                    });
                }
                &e1 * m
            }
            None => e1.clone(),
        };
        let predictor = self.predictor.forward(e1.view())?;
        let decoder = match &self.decoder {
            Some(net) => Some(net.forward(concatenate![Axis(1), e1_dropped, e2].view())?),
            None => None,
        };
        let disentangler1 = self.disentangler1.as_ref().map(|n| n.forward(e2.view())).transpose()?;
        let disentangler2 = self.disentangler2.as_ref().map(|n| n.forward(e1.view())).transpose()?;
        let discriminator = self.discriminator.as_ref().map(|n| n.forward(e1.view())).transpose()?;
        Ok(ForwardPass {
            e1,
            e2,
            e1_dropped,
            encoder,
            predictor,
            decoder,
            disentangler1,
            disentangler2,
            discriminator,
        })
    }

    /// Forward pass plus losses against the batch labels. With
    /// `train_flag`, e1 is perturbed by a dropout mask drawn from `seed`.
    pub fn forward_pass(
        &self,
        batch: &Batch,
        train_flag: bool,
        seed: u64,
        config: &TrainConfig,
    ) -> Result<(ForwardPass, LossReport)> {
        let mask = if train_flag {
            Some(crate::nn::dropout_mask((batch.len(), self.arch.dim_e1), config.p_drop, seed)?)
        } else {
            None
        };
        let fwd = self.forward(batch.x.view(), mask.as_ref())?;
        let report = self.report(&fwd, batch, config)?;
        Ok((fwd, report))
    }

    pub fn report(&self, fwd: &ForwardPass, batch: &Batch, config: &TrainConfig) -> Result<LossReport> {
        let l_pred = softmax_xent(fwd.speaker_logits().view(), &batch.speakers)?.0;
        let l_recon = match fwd.reconstruction() {
            Some(r) => mse(r.view(), batch.x.view())?.0,
            None => 0.0,
        };
        let l_dis1 = match fwd.e1_hat() {
            Some(h) => mse(h.view(), fwd.e1.view())?.0,
            None => 0.0,
        };
        let l_dis2 = match fwd.e2_hat() {
            Some(h) => mse(h.view(), fwd.e2.view())?.0,
            None => 0.0,
        };
        let l_bias = match fwd.group_logits() {
            Some(g) => softmax_xent(g.view(), &batch.groups)?.0,
            None => 0.0,
        };
        Ok(LossReport::new(l_pred, l_recon, l_dis1, l_dis2, l_bias, config.alpha, config.beta))
    }

    fn primary_placement(&self) -> bool {
        self.mode.activity().placement == Placement::PrimaryBranch
    }

    fn secondary_placement(&self) -> bool {
        self.mode.activity().placement == Placement::SecondaryBranch
    }

    /// `alpha * l_pred + beta * l_recon`, plus `delta * l_bias` when the
    /// discriminator sits in the primary branch.
    pub fn primary_objective(&self, batch: &Batch, mask: Option<&Array2<f64>>, config: &TrainConfig) -> Result<f64> {
        let fwd = self.forward(batch.x.view(), mask)?;
        let r = self.report(&fwd, batch, config)?;
        let bias = if self.primary_placement() { config.delta * r.l_bias } else { 0.0 };
        Ok(r.l_prim + bias)
    }

    /// Gradients of [`primary_objective`](Self::primary_objective) for every
    /// primary-branch module.
    pub fn primary_gradients(
        &self,
        batch: &Batch,
        mask: Option<&Array2<f64>>,
        config: &TrainConfig,
    ) -> Result<(LossReport, ModuleGrads)> {
        let fwd = self.forward(batch.x.view(), mask)?;
        let report = self.report(&fwd, batch, config)?;
        let d1 = self.arch.dim_e1;
        let mut grads = ModuleGrads::default();

        let (_, g) = softmax_xent(fwd.speaker_logits().view(), &batch.speakers)?;
        let (gp, mut d_e1) = self.predictor.backward(&fwd.predictor, (g * config.alpha).view());
        grads.set(ModuleId::Predictor, gp);
        let mut d_e2 = Array2::zeros(fwd.e2.raw_dim());

        if let (Some(net), Some(cache)) = (&self.decoder, &fwd.decoder) {
            let (_, g) = mse(cache.output.view(), batch.x.view())?;
            let (gd, d_in) = net.backward(cache, (g * config.beta).view());
            grads.set(ModuleId::Decoder, gd);
            let d_e1_dropped = d_in.slice(s![.., ..d1]);
            match mask {
                Some(m) => d_e1 += &(&d_e1_dropped * m),
                None => d_e1 += &d_e1_dropped,
            }
            d_e2 += &d_in.slice(s![.., d1..]);
        }

        if self.primary_placement() {
            if let (Some(net), Some(cache)) = (&self.discriminator, &fwd.discriminator) {
                let (_, g) = softmax_xent(cache.output.view(), &batch.groups)?;
                let (gb, d) = net.backward(cache, (g * config.delta).view());
                grads.set(ModuleId::Discriminator, gb);
                d_e1 += &d;
            }
        }

        let d_e = concatenate![Axis(1), d_e1, d_e2];
        let (ge, _) = self.encoder.backward(&fwd.encoder, d_e.view());
        grads.set(ModuleId::Encoder, ge);
        Ok((report, grads))
    }

    /// Objective of the secondary-branch modules with the encoder output
    /// treated as fixed: `gamma * (l_dis1 + l_dis2)`, plus `delta * l_bias`
    /// on the true labels when the discriminator sits in the secondary
    /// branch.
    pub fn secondary_fit_objective(&self, batch: &Batch, config: &TrainConfig) -> Result<f64> {
        let fwd = self.forward(batch.x.view(), None)?;
        let r = self.report(&fwd, batch, config)?;
        let bias = if self.secondary_placement() { config.delta * r.l_bias } else { 0.0 };
        Ok(config.gamma * r.l_sec + bias)
    }

    /// Draws the encoder's confusion targets for a batch: e1 and e2 with
    /// their rows permuted by `permutation`, and the given resampled group
    /// labels. Entries the mode does not use are `None`.
    pub fn confusion_targets(&self, batch: &Batch, permutation: &[usize], groups: Vec<usize>) -> Result<ConfusionTargets> {
        if permutation.len() != batch.len() || groups.len() != batch.len() {
            return Err(Error::DimensionMismatch {
                expected: batch.len(),
                actual: permutation.len().min(groups.len()),
            });
        }
        let (e1, e2) = if self.disentangler1.is_some() {
            let fwd = self.forward(batch.x.view(), None)?;
            (
                Some(fwd.e1.select(Axis(0), permutation)),
                Some(fwd.e2.select(Axis(0), permutation)),
            )
        } else {
            (None, None)
        };
        Ok(ConfusionTargets {
            e1,
            e2,
            groups: self.secondary_placement().then_some(groups),
        })
    }

    /// Encoder objective in a secondary step: the disentanglers should map
    /// to shuffled targets and the discriminator to resampled labels, so
    /// neither can do better than chance.
    pub fn confusion_objective(&self, batch: &Batch, targets: &ConfusionTargets, config: &TrainConfig) -> Result<f64> {
        let fwd = self.forward(batch.x.view(), None)?;
        let mut total = 0.0;
        if let (Some(h), Some(t)) = (fwd.e1_hat(), &targets.e1) {
            total += config.gamma * mse(h.view(), t.view())?.0;
        }
        if let (Some(h), Some(t)) = (fwd.e2_hat(), &targets.e2) {
            total += config.gamma * mse(h.view(), t.view())?.0;
        }
        if let (Some(g), Some(labels)) = (fwd.group_logits(), &targets.groups) {
            total += config.delta * softmax_xent(g.view(), labels)?.0;
        }
        Ok(total)
    }

    /// Gradients for a secondary step: the disentanglers (and a
    /// secondary-branch discriminator) get the gradient of
    /// [`secondary_fit_objective`](Self::secondary_fit_objective), the
    /// encoder gets the gradient of
    /// [`confusion_objective`](Self::confusion_objective). The report holds
    /// the true-label losses before the update.
    pub fn secondary_gradients(
        &self,
        batch: &Batch,
        targets: &ConfusionTargets,
        config: &TrainConfig,
    ) -> Result<(LossReport, ModuleGrads)> {
        if !self.mode.has_secondary() {
            return Err(Error::param(format!("mode {} has no secondary branch", self.mode)));
        }
        let fwd = self.forward(batch.x.view(), None)?;
        let report = self.report(&fwd, batch, config)?;
        let mut grads = ModuleGrads::default();
        let mut d_e1 = Array2::zeros(fwd.e1.raw_dim());
        let mut d_e2 = Array2::zeros(fwd.e2.raw_dim());

        if let (Some(net), Some(cache)) = (&self.disentangler1, &fwd.disentangler1) {
            let (_, fit) = mse(cache.output.view(), fwd.e1.view())?;
            grads.set(ModuleId::Disentangler1, net.backward(cache, (fit * config.gamma).view()).0);
            if let Some(t) = &targets.e1 {
                let (_, conf) = mse(cache.output.view(), t.view())?;
                d_e2 += &net.backward(cache, (conf * config.gamma).view()).1;
            }
        }
        if let (Some(net), Some(cache)) = (&self.disentangler2, &fwd.disentangler2) {
            let (_, fit) = mse(cache.output.view(), fwd.e2.view())?;
            grads.set(ModuleId::Disentangler2, net.backward(cache, (fit * config.gamma).view()).0);
            if let Some(t) = &targets.e2 {
                let (_, conf) = mse(cache.output.view(), t.view())?;
                d_e1 += &net.backward(cache, (conf * config.gamma).view()).1;
            }
        }
        if self.secondary_placement() {
            if let (Some(net), Some(cache)) = (&self.discriminator, &fwd.discriminator) {
                let (_, fit) = softmax_xent(cache.output.view(), &batch.groups)?;
                grads.set(ModuleId::Discriminator, net.backward(cache, (fit * config.delta).view()).0);
                if let Some(labels) = &targets.groups {
                    let (_, conf) = softmax_xent(cache.output.view(), labels)?;
                    d_e1 += &net.backward(cache, (conf * config.delta).view()).1;
                }
            }
        }

        let d_e = concatenate![Axis(1), d_e1, d_e2];
        grads.set(ModuleId::Encoder, self.encoder.backward(&fwd.encoder, d_e.view()).0);
        Ok((report, grads))
    }

    /// e1 of each row, without dropout.
    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let e = self.encoder.predict(x)?;
        Ok(e.slice(s![.., ..self.arch.dim_e1]).to_owned())
    }

    /// Parameters of the listed modules, concatenated in list order.
    /// Absent modules contribute nothing.
    pub fn flat_params_of(&self, ids: &[ModuleId]) -> Vec<f64> {
        ids.iter().filter_map(|&id| self.module(id)).flat_map(|n| n.flat_params()).collect()
    }

    pub fn set_flat_params_of(&mut self, ids: &[ModuleId], values: &[f64]) {
        let mut offset = 0;
        for &id in ids {
            if let Some(net) = self.module_mut(id) {
                offset += net.set_flat_params(&values[offset..]);
            }
        }
    }

    /// A view exposing only the listed modules' parameters, for gradient
    /// checks of one objective against a subset of the parameters.
    pub fn subset(&mut self, ids: &[ModuleId]) -> ModuleSubset<'_> {
        ModuleSubset {
            model: self,
            ids: ids.to_vec(),
        }
    }
}

impl Parameterized for UaiModel {
    fn flat_params(&self) -> Vec<f64> {
        self.flat_params_of(&ModuleId::ALL)
    }

    fn set_flat_params(&mut self, values: &[f64]) {
        self.set_flat_params_of(&ModuleId::ALL, values);
    }
}

pub struct ModuleSubset<'a> {
    model: &'a mut UaiModel,
    ids: Vec<ModuleId>,
}

impl ModuleSubset<'_> {
    pub fn model(&self) -> &UaiModel {
        self.model
    }
}

impl Parameterized for ModuleSubset<'_> {
    fn flat_params(&self) -> Vec<f64> {
        self.model.flat_params_of(&self.ids)
    }

    fn set_flat_params(&mut self, values: &[f64]) {
        self.model.set_flat_params_of(&self.ids, values);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, Activation};
    use ndarray::array;
    use rand::Rng as _;

    fn tiny_arch() -> ArchConfig {
        ArchConfig {
            dim_e1: 3,
            dim_e2: 2,
            encoder_hidden: vec![6],
            decoder_hidden: vec![5],
            predictor_hidden: vec![4],
            disentangler_hidden: vec![4],
            discriminator_hidden: vec![3],
        }
    }

    fn random_batch(n: usize, d: usize, speakers: usize, seed: u64) -> Batch {
        let mut r = rng::seeded(seed, 99);
        let x = Array2::from_shape_simple_fn((n, d), || r.random_range(-1.0..1.0));
        let s = (0..n).map(|i| i % speakers).collect();
        let g = (0..n).map(|i| (i / 2) % 2).collect();
        Batch::new(x, s, g).unwrap()
    }

    fn config(mode: Mode) -> TrainConfig {
        TrainConfig {
            mode,
            delta: 7.0,
            arch: tiny_arch(),
            ..TrainConfig::default()
        }
    }

    #[test]
    fn module_presence_follows_mode() {
        for mode in Mode::ALL {
            let m = UaiModel::new(mode, 4, 3, &tiny_arch(), 1).unwrap();
            let a = mode.activity();
            assert_eq!(m.module(ModuleId::Decoder).is_some(), a.decoder);
            assert_eq!(m.module(ModuleId::Disentangler1).is_some(), a.disentangler);
            assert_eq!(m.module(ModuleId::Disentangler2).is_some(), a.disentangler);
            assert_eq!(m.module(ModuleId::Discriminator).is_some(), a.discriminator);
            assert_eq!(m.module(ModuleId::Encoder).unwrap().output_dim(), 5);
        }
    }

    #[test]
    fn default_architecture_sizes() {
        let m = UaiModel::new(Mode::UaiMtl, 512, 10, &ArchConfig::default(), 0).unwrap();
        let hidden = |id| m.module(id).unwrap().hidden_sizes();
        assert_eq!(hidden(ModuleId::Encoder), [512, 512]);
        assert_eq!(hidden(ModuleId::Decoder), [512, 512]);
        assert_eq!(hidden(ModuleId::Predictor), [256, 512]);
        assert_eq!(hidden(ModuleId::Disentangler1), [128, 128]);
        assert_eq!(hidden(ModuleId::Disentangler2), [128, 128]);
        assert_eq!(hidden(ModuleId::Discriminator), [64]);
        assert_eq!(m.module(ModuleId::Encoder).unwrap().output_dim(), 160);
        assert_eq!(m.module(ModuleId::Decoder).unwrap().input_dim(), 160);
        assert_eq!(m.module(ModuleId::Disentangler1).unwrap().input_dim(), 32);
        assert_eq!(m.module(ModuleId::Disentangler1).unwrap().output_dim(), 128);
    }

    #[test]
    fn nldr_reports_zero_inactive_losses() {
        let m = UaiModel::new(Mode::Nldr, 4, 3, &tiny_arch(), 1).unwrap();
        let (_, r) = m.forward_pass(&random_batch(6, 4, 3, 1), true, 3, &config(Mode::Nldr)).unwrap();
        assert_eq!((r.l_recon, r.l_dis1, r.l_dis2, r.l_bias), (0.0, 0.0, 0.0, 0.0));
        assert!(r.l_pred > 0.0);
    }

    #[test]
    fn evaluation_pass_has_no_dropout() {
        let m = UaiModel::new(Mode::Uai, 4, 3, &tiny_arch(), 1).unwrap();
        let b = random_batch(6, 4, 3, 2);
        let (fwd, _) = m.forward_pass(&b, false, 0, &config(Mode::Uai)).unwrap();
        assert_eq!(fwd.e1_dropped, fwd.e1);
        let (fwd, _) = m.forward_pass(&b, true, 0, &config(Mode::Uai)).unwrap();
        assert_ne!(fwd.e1_dropped, fwd.e1);
    }

    #[test]
    fn report_identities() {
        for mode in Mode::ALL {
            let c = config(mode);
            let m = UaiModel::new(mode, 4, 3, &tiny_arch(), 5).unwrap();
            let (_, r) = m.forward_pass(&random_batch(8, 4, 3, 4), true, 1, &c).unwrap();
            assert!((r.l_prim - (c.alpha * r.l_pred + c.beta * r.l_recon)).abs() < 1e-12);
            assert!((r.l_sec - (r.l_dis1 + r.l_dis2)).abs() < 1e-12);
        }
    }

    fn set_unit_net(net: &mut DenseNet, values: &[f64]) {
        assert_eq!(net.set_flat_params(values), values.len());
    }

    #[test]
    fn hand_traced_forward() {
        // D = 4, e1 = 2, e2 = 2, one hidden unit everywhere
        let arch = ArchConfig {
            dim_e1: 2,
            dim_e2: 2,
            encoder_hidden: vec![1],
            decoder_hidden: vec![1],
            predictor_hidden: vec![1],
            disentangler_hidden: vec![1],
            discriminator_hidden: vec![1],
        };
        let mut m = UaiModel::new(Mode::UaiMtl, 4, 2, &arch, 0).unwrap();
        // encoder: h = relu(0.5 * sum(x)), e = [h, -h, 2h, 1]
        set_unit_net(
            m.module_mut(ModuleId::Encoder).unwrap(),
            &[0.5, 0.5, 0.5, 0.5, 0.0, 1.0, -1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        );
        // predictor: u = relu(e1_0), logits = [u, 0]
        set_unit_net(m.module_mut(ModuleId::Predictor).unwrap(), &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        // decoder: v = relu(e1'_0 + e2_1), x_hat = [v, v, v, v]
        set_unit_net(
            m.module_mut(ModuleId::Decoder).unwrap(),
            &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        );
        // disentangler 1: relu(e2_0) -> [w, w]
        set_unit_net(m.module_mut(ModuleId::Disentangler1).unwrap(), &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        // disentangler 2: relu(e1_0) -> [w, 0]
        set_unit_net(m.module_mut(ModuleId::Disentangler2).unwrap(), &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        // discriminator: relu(e1_1) -> [0, w]; e1_1 = -h so always 0
        set_unit_net(m.module_mut(ModuleId::Discriminator).unwrap(), &[0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);

        let x = array![[1.0, 1.0, 1.0, 1.0]];
        let b = Batch::new(x, vec![0], vec![1]).unwrap();
        let c = TrainConfig {
            mode: Mode::UaiMtl,
            arch,
            ..TrainConfig::default()
        };
        let (fwd, r) = m.forward_pass(&b, false, 0, &c).unwrap();
        // h = 2: e1 = [2, -2], e2 = [4, 1]
        assert_eq!(fwd.e1, array![[2.0, -2.0]]);
        assert_eq!(fwd.e2, array![[4.0, 1.0]]);
        // logits [2, 0], label 0: ln(1 + e^-2)
        assert!((r.l_pred - (1.0 + (-2f64).exp()).ln()).abs() < 1e-15);
        // x_hat = [3, 3, 3, 3] vs ones: mse 4
        assert!((r.l_recon - 4.0).abs() < 1e-15);
        // e1_hat = [4, 4] vs [2, -2]: (4 + 36) / 2
        assert!((r.l_dis1 - 20.0).abs() < 1e-15);
        // e2_hat = [2, 0] vs [4, 1]: (4 + 1) / 2
        assert!((r.l_dis2 - 2.5).abs() < 1e-15);
        // group logits [0, 0]: ln 2
        assert!((r.l_bias - 2f64.ln()).abs() < 1e-15);
        assert!((r.l_prim - (100.0 * r.l_pred + 5.0 * 4.0)).abs() < 1e-12);
        assert_eq!(m.transform(b.x.view()).unwrap(), fwd.e1);
        assert_eq!(m.module(ModuleId::Encoder).unwrap().layers()[0].activation, Activation::Relu);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = UaiModel::new(Mode::Uai, 4, 3, &tiny_arch(), 1).unwrap();
        assert!(m.forward(Array2::zeros((2, 5)).view(), None).is_err());
        assert!(m.transform(Array2::zeros((2, 3)).view()).is_err());
        assert!(UaiModel::new(Mode::Uai, 4, 1, &tiny_arch(), 1).is_err());
    }

    #[test]
    fn secondary_gradients_need_a_secondary_branch() {
        for mode in [Mode::Nldr, Mode::Mtl] {
            let m = UaiModel::new(mode, 4, 3, &tiny_arch(), 1).unwrap();
            let b = random_batch(4, 4, 3, 1);
            let t = m.confusion_targets(&b, &[0, 1, 2, 3], vec![0; 4]).unwrap();
            assert!(m.secondary_gradients(&b, &t, &config(mode)).is_err());
        }
    }

    #[test]
    fn primary_gradients_match_finite_differences() {
        for mode in Mode::ALL {
            let c = config(mode);
            let mut m = UaiModel::new(mode, 4, 3, &tiny_arch(), 11).unwrap();
            let b = random_batch(6, 4, 3, 12);
            let mask = crate::nn::dropout_mask((6, 3), 0.5, 13).unwrap();
            let ids = m.primary_modules();
            let (_, grads) = m.primary_gradients(&b, Some(&mask), &c).unwrap();
            let analytic = grads.flatten(&m, &ids);
            let mut view = m.subset(&ids);
            let report = grad_check(
                &mut view,
                &analytic,
                |v| v.model().primary_objective(&b, Some(&mask), &c).unwrap(),
                1e-6,
            );
            assert!(report.max_rel_error < 1e-4, "{mode}: {report:?}");
        }
    }
}
