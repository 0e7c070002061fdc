//! Small 1-D convolutional network over the lag axis.
//!
//! conv(k filters) -> relu -> maxpool 2 -> conv -> relu -> maxpool 2 ->
//! dense -> relu -> dense 1 -> sigmoid. Convolutions are "valid" (no
//! padding, stride 1) and pooling drops a trailing odd element.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrainingSet;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvNetArch {
    pub conv1_filters: usize,
    pub conv1_kernel: usize,
    pub conv2_filters: usize,
    pub conv2_kernel: usize,
    pub hidden: usize,
}

impl Default for ConvNetArch {
    fn default() -> Self {
        Self {
            conv1_filters: 16,
            conv1_kernel: 5,
            conv2_filters: 32,
            conv2_kernel: 5,
            hidden: 64,
        }
    }
}

/// Names of the parameter blocks, in storage order.
pub const BLOCK_NAMES: [&str; 8] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "dense1.weight",
    "dense1.bias",
    "dense2.weight",
    "dense2.bias",
];

#[derive(Debug, Clone, Copy)]
struct Shape {
    m: usize,
    c1: usize,
    k1: usize,
    l1: usize,
    p1: usize,
    c2: usize,
    k2: usize,
    l2: usize,
    p2: usize,
    flat: usize,
    h: usize,
}

impl ConvNetArch {
    fn shape(&self, m: usize) -> Result<Shape> {
        let a = *self;
        if a.conv1_filters == 0 || a.conv2_filters == 0 || a.hidden == 0 {
            return Err(invalid("layer widths must be positive"));
        }
        if a.conv1_kernel == 0 || a.conv2_kernel == 0 {
            return Err(invalid("kernel sizes must be positive"));
        }
        let too_short = || invalid(format!("input length {m} is too short for the network"));
        let l1 = (m + 1).checked_sub(a.conv1_kernel).filter(|&l| l > 0).ok_or_else(too_short)?;
        let p1 = l1 / 2;
        let l2 = (p1 + 1).checked_sub(a.conv2_kernel).filter(|&l| l > 0).ok_or_else(too_short)?;
        let p2 = l2 / 2;
        if p2 == 0 {
            return Err(too_short());
        }
        Ok(Shape {
            m,
            c1: a.conv1_filters,
            k1: a.conv1_kernel,
            l1,
            p1,
            c2: a.conv2_filters,
            k2: a.conv2_kernel,
            l2,
            p2,
            flat: a.conv2_filters * p2,
            h: a.hidden,
        })
    }

    /// Parameter ranges inside the flat weight array for inputs of length `m`.
    pub fn blocks(&self, m: usize) -> Result<[Range<usize>; 8]> {
        let s = self.shape(m)?;
        Ok(s.blocks())
    }

    pub fn param_count(&self, m: usize) -> Result<usize> {
        Ok(self.blocks(m)?[7].end)
    }
}

impl Shape {
    fn blocks(&self) -> [Range<usize>; 8] {
        let sizes = [
            self.c1 * self.k1,
            self.c1,
            self.c2 * self.c1 * self.k2,
            self.c2,
            self.h * self.flat,
            self.h,
            self.h,
            1,
        ];
        let mut start = 0;
        sizes.map(|n| {
            let r = start..start + n;
            start += n;
            r
        })
    }
}

/// Optimizer settings recorded with a trained model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvNetModel {
    arch: ConvNetArch,
    input_length: usize,
    params: Vec<f64>,
    pub meta: TrainingMeta,
}

struct Cache {
    z1: Vec<f64>,
    a1: Vec<f64>,
    arg1: Vec<usize>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    arg2: Vec<usize>,
    zh: Vec<f64>,
    ah: Vec<f64>,
    logit: f64,
}

impl Cache {
    fn new(s: &Shape) -> Self {
        Self {
            z1: vec![0.0; s.c1 * s.l1],
            a1: vec![0.0; s.c1 * s.p1],
            arg1: vec![0; s.c1 * s.p1],
            z2: vec![0.0; s.c2 * s.l2],
            a2: vec![0.0; s.flat],
            arg2: vec![0; s.flat],
            zh: vec![0.0; s.h],
            ah: vec![0.0; s.h],
            logit: 0.0,
        }
    }
}

struct Scratch {
    dflat: Vec<f64>,
    dz2: Vec<f64>,
    da1: Vec<f64>,
    dz1: Vec<f64>,
    dh: Vec<f64>,
}

fn relu_pool(z: &[f64], len: usize, pooled: usize, out: &mut [f64], arg: &mut [usize], channels: usize) {
    for c in 0..channels {
        for t in 0..pooled {
            let i = c * len + 2 * t;
            let (a, b) = (z[i].max(0.0), z[i + 1].max(0.0));
            let (v, k) = if b > a { (b, i + 1) } else { (a, i) };
            out[c * pooled + t] = v;
            arg[c * pooled + t] = k;
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of a logit, `softplus(z) - y z`.
fn bce(logit: f64, y: bool) -> f64 {
    let softplus = logit.max(0.0) + (-logit.abs()).exp().ln_1p();
    if y {
        softplus - logit
    } else {
        softplus
    }
}

impl ConvNetModel {
    /// A model with every parameter zero; it predicts exactly 0.5.
    pub fn zeros(arch: ConvNetArch, input_length: usize) -> Result<Self> {
        let n = arch.param_count(input_length)?;
        Self::from_parts(arch, input_length, vec![0.0; n], TrainingMeta::default())
    }

    pub fn from_parts(arch: ConvNetArch, input_length: usize, params: Vec<f64>, meta: TrainingMeta) -> Result<Self> {
        let n = arch.param_count(input_length)?;
        if params.len() != n {
            return Err(invalid(format!(
                "architecture needs {n} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(invalid("parameters must be finite"));
        }
        Ok(Self {
            arch,
            input_length,
            params,
            meta,
        })
    }

    /// He-uniform weights and zero biases.
    pub fn init(arch: ConvNetArch, input_length: usize, seed: u64) -> Result<Self> {
        let s = arch.shape(input_length)?;
        let b = s.blocks();
        let mut params = vec![0.0; b[7].end];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fans = [(0, s.k1), (2, s.c1 * s.k2), (4, s.flat), (6, s.h)];
        for (block, fan_in) in fans {
            let limit = (6.0 / fan_in as f64).sqrt();
            for p in &mut params[b[block].clone()] {
                *p = rng.random_range(-limit..limit);
            }
        }
        Self::from_parts(arch, input_length, params, TrainingMeta::default())
    }

    pub fn arch(&self) -> ConvNetArch {
        self.arch
    }

    pub fn input_length(&self) -> usize {
        self.input_length
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn shape(&self) -> Shape {
        self.arch
            .shape(self.input_length)
            .expect("shape validated on construction")
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.input_length {
            Ok(())
        } else {
            Err(invalid(format!(
                "feature length {} does not match network input {}",
                x.len(),
                self.input_length
            )))
        }
    }

    fn forward(&self, s: &Shape, x: &[f64], c: &mut Cache) {
        let p = &self.params;
        let b = s.blocks();
        let (w1, b1) = (&p[b[0].clone()], &p[b[1].clone()]);
        for f in 0..s.c1 {
            let w = &w1[f * s.k1..(f + 1) * s.k1];
            for t in 0..s.l1 {
                let mut acc = b1[f];
                for k in 0..s.k1 {
                    acc += w[k] * x[t + k];
                }
                c.z1[f * s.l1 + t] = acc;
            }
        }
        relu_pool(&c.z1, s.l1, s.p1, &mut c.a1, &mut c.arg1, s.c1);

        let (w2, b2) = (&p[b[2].clone()], &p[b[3].clone()]);
        for o in 0..s.c2 {
            let out = &mut c.z2[o * s.l2..(o + 1) * s.l2];
            out.iter_mut().for_each(|v| *v = b2[o]);
            for ch in 0..s.c1 {
                let w = &w2[(o * s.c1 + ch) * s.k2..(o * s.c1 + ch + 1) * s.k2];
                let a = &c.a1[ch * s.p1..(ch + 1) * s.p1];
                for (t, v) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for k in 0..s.k2 {
                        acc += w[k] * a[t + k];
                    }
                    *v += acc;
                }
            }
        }
        relu_pool(&c.z2, s.l2, s.p2, &mut c.a2, &mut c.arg2, s.c2);

        let (wd, bd) = (&p[b[4].clone()], &p[b[5].clone()]);
        for h in 0..s.h {
            let row = &wd[h * s.flat..(h + 1) * s.flat];
            let z = bd[h] + row.iter().zip(&c.a2).map(|(a, b)| a * b).sum::<f64>();
            c.zh[h] = z;
            c.ah[h] = z.max(0.0);
        }
        let (wo, bo) = (&p[b[6].clone()], p[b[7].start]);
        c.logit = bo + wo.iter().zip(&c.ah).map(|(a, b)| a * b).sum::<f64>();
    }

    /// Adds `scale * d loss / d params` for one sample to `grad`.
    fn backward(&self, s: &Shape, x: &[f64], c: &Cache, dlogit: f64, grad: &mut [f64], sc: &mut Scratch) {
        let p = &self.params;
        let b = s.blocks();
        let wo = &p[b[6].clone()];
        grad[b[7].start] += dlogit;
        for h in 0..s.h {
            grad[b[6].start + h] += dlogit * c.ah[h];
            sc.dh[h] = if c.zh[h] > 0.0 { dlogit * wo[h] } else { 0.0 };
        }

        let wd = &p[b[4].clone()];
        sc.dflat.iter_mut().for_each(|v| *v = 0.0);
        for h in 0..s.h {
            let d = sc.dh[h];
            if d == 0.0 {
                continue;
            }
            grad[b[5].start + h] += d;
            let g = &mut grad[b[4].start + h * s.flat..b[4].start + (h + 1) * s.flat];
            for (gv, a) in g.iter_mut().zip(&c.a2) {
                *gv += d * a;
            }
            let row = &wd[h * s.flat..(h + 1) * s.flat];
            for (df, w) in sc.dflat.iter_mut().zip(row) {
                *df += d * w;
            }
        }

        sc.dz2.iter_mut().for_each(|v| *v = 0.0);
        for (i, &k) in c.arg2.iter().enumerate() {
            if c.z2[k] > 0.0 {
                sc.dz2[k] += sc.dflat[i];
            }
        }

        let w2 = &p[b[2].clone()];
        sc.da1.iter_mut().for_each(|v| *v = 0.0);
        for o in 0..s.c2 {
            let dz = &sc.dz2[o * s.l2..(o + 1) * s.l2];
            grad[b[3].start + o] += dz.iter().sum::<f64>();
            for ch in 0..s.c1 {
                let off = (o * s.c1 + ch) * s.k2;
                let a = &c.a1[ch * s.p1..(ch + 1) * s.p1];
                let da = &mut sc.da1[ch * s.p1..(ch + 1) * s.p1];
                for k in 0..s.k2 {
                    let w = w2[off + k];
                    let mut g = 0.0;
                    for (t, &d) in dz.iter().enumerate() {
                        g += d * a[t + k];
                        da[t + k] += d * w;
                    }
                    grad[b[2].start + off + k] += g;
                }
            }
        }

        sc.dz1.iter_mut().for_each(|v| *v = 0.0);
        for (i, &k) in c.arg1.iter().enumerate() {
            if c.z1[k] > 0.0 {
                sc.dz1[k] += sc.da1[i];
            }
        }
        for f in 0..s.c1 {
            let dz = &sc.dz1[f * s.l1..(f + 1) * s.l1];
            grad[b[1].start + f] += dz.iter().sum::<f64>();
            for k in 0..s.k1 {
                let mut g = 0.0;
                for (t, &d) in dz.iter().enumerate() {
                    g += d * x[t + k];
                }
                grad[b[0].start + f * s.k1 + k] += g;
            }
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        let s = self.shape();
        let mut c = Cache::new(&s);
        self.forward(&s, x, &mut c);
        Ok(sigmoid(c.logit))
    }

    /// Connected iff the probability is strictly above one half.
    pub fn predict(&self, x: &[f64]) -> Result<bool> {
        Ok(self.predict_proba(x)? > 0.5)
    }

    /// Mean binary cross-entropy over a batch and its gradient with respect
    /// to every parameter. `xs` holds the inputs back to back.
    pub fn loss_and_gradient(&self, xs: &[f64], ys: &[bool]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate(xs, ys, &mut grad)?;
        Ok((loss, grad))
    }

    /// Mean loss over a batch without gradients.
    pub fn loss(&self, xs: &[f64], ys: &[bool]) -> Result<f64> {
        self.batch_check(xs, ys)?;
        let s = self.shape();
        let mut c = Cache::new(&s);
        let mut total = 0.0;
        for (x, &y) in xs.chunks_exact(self.input_length).zip(ys) {
            self.forward(&s, x, &mut c);
            total += bce(c.logit, y);
        }
        Ok(total / ys.len() as f64)
    }

    fn batch_check(&self, xs: &[f64], ys: &[bool]) -> Result<()> {
        if ys.is_empty() || xs.len() != ys.len() * self.input_length {
            return Err(invalid(format!(
                "batch of {} values does not hold {} inputs of length {}",
                xs.len(),
                ys.len(),
                self.input_length
            )));
        }
        Ok(())
    }

    fn accumulate(&self, xs: &[f64], ys: &[bool], grad: &mut [f64]) -> Result<f64> {
        self.batch_check(xs, ys)?;
        let s = self.shape();
        let mut c = Cache::new(&s);
        let mut sc = Scratch {
            dflat: vec![0.0; s.flat],
            dz2: vec![0.0; s.c2 * s.l2],
            da1: vec![0.0; s.c1 * s.p1],
            dz1: vec![0.0; s.c1 * s.l1],
            dh: vec![0.0; s.h],
        };
        let inv = 1.0 / ys.len() as f64;
        let mut total = 0.0;
        for (x, &y) in xs.chunks_exact(s.m).zip(ys) {
            self.forward(&s, x, &mut c);
            total += bce(c.logit, y);
            let target = if y { 1.0 } else { 0.0 };
            self.backward(&s, x, &c, (sigmoid(c.logit) - target) * inv, grad, &mut sc);
        }
        Ok(total * inv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Fraction of the set held out for validation and early stopping.
    pub validation_fraction: f64,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 200,
            validation_fraction: 0.2,
            patience: 20,
        }
    }
}

/// One line of the training log. Validation fields are NaN when nothing is
/// held out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Trains with mini-batch Adam on binary cross-entropy. The weights with the
/// lowest validation loss (training loss when nothing is held out) are kept.
pub fn cnn_train(
    ts: &TrainingSet,
    arch: ConvNetArch,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<(ConvNetModel, Vec<EpochLog>)> {
    if !(hyper.learning_rate > 0.0) || hyper.batch_size == 0 || hyper.epochs == 0 {
        return Err(invalid("learning rate, batch size and epochs must be positive"));
    }
    if !(0.0..1.0).contains(&hyper.validation_fraction) {
        return Err(invalid("validation fraction must lie in [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = ConvNetModel::init(arch, ts.dim(), rng.random())?;
    model.meta = TrainingMeta {
        epochs: 0,
        learning_rate: hyper.learning_rate,
        batch_size: hyper.batch_size,
        seed,
    };
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.shuffle(&mut rng);
    let n_val = (ts.len() as f64 * hyper.validation_fraction).round() as usize;
    let n_val = n_val.min(ts.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let (val_x, val_y) = ts.rows(val_idx);
    let mut train_idx = train_idx.to_vec();

    let mut adam = Adam {
        m: vec![0.0; model.params.len()],
        v: vec![0.0; model.params.len()],
        t: 0,
    };
    let mut grad = vec![0.0; model.params.len()];
    let mut best = (f64::INFINITY, model.params.clone(), 0);
    let mut log = Vec::new();
    for epoch in 1..=hyper.epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in train_idx.chunks(hyper.batch_size) {
            let (bx, by) = ts.rows(batch);
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = model.accumulate(&bx, &by, &mut grad)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!("training diverged in epoch {epoch}")));
            }
            total += loss * batch.len() as f64;
            adam.step(&mut model.params, &grad, hyper.learning_rate);
        }
        let train_loss = total / train_idx.len() as f64;
        let (val_loss, val_acc) = if val_y.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let loss = model.loss(&val_x, &val_y)?;
            let correct = val_x
                .chunks_exact(ts.dim())
                .zip(&val_y)
                .map(|(x, &y)| model.predict(x).map(|p| p == y))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .filter(|&ok| ok)
                .count();
            (loss, correct as f64 / val_y.len() as f64)
        };
        if !val_loss.is_finite() && !val_y.is_empty() {
            return Err(Error::Numeric(format!("validation loss diverged in epoch {epoch}")));
        }
        log.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
            val_acc,
        });
        let monitored = if val_y.is_empty() { train_loss } else { val_loss };
        if monitored < best.0 {
            best = (monitored, model.params.clone(), epoch);
        } else if epoch - best.2 >= hyper.patience {
            break;
        }
    }
    model.params = best.1;
    model.meta.epochs = log.len();
    Ok((model, log))
}

/// Largest relative gap, per parameter block, between the analytic gradient
/// and central finite differences with step `h`.
pub fn gradient_check(
    model: &ConvNetModel,
    xs: &[f64],
    ys: &[bool],
    h: f64,
) -> Result<Vec<(&'static str, f64)>> {
    let (_, analytic) = model.loss_and_gradient(xs, ys)?;
    let mut probe = model.clone();
    let blocks = model.arch.blocks(model.input_length)?;
    let mut out = Vec::with_capacity(8);
    for (name, range) in BLOCK_NAMES.iter().zip(blocks) {
        let mut diff = 0.0;
        let mut norm_a = 0.0;
        let mut norm_n = 0.0;
        for i in range {
            let orig = probe.params[i];
            probe.params[i] = orig + h;
            let up = probe.loss(xs, ys)?;
            probe.params[i] = orig - h;
            let down = probe.loss(xs, ys)?;
            probe.params[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            diff += (numeric - analytic[i]).powi(2);
            norm_a += analytic[i].powi(2);
            norm_n += numeric.powi(2);
        }
        let scale = norm_a.sqrt().max(norm_n.sqrt());
        let rel = if scale > 0.0 { diff.sqrt() / scale } else { 0.0 };
        out.push((*name, rel));
    }
    Ok(out)
}

/// Layer-by-layer shape summary for an input of length `m`.
pub fn describe(arch: &ConvNetArch, m: usize) -> Result<String> {
    let s = arch.shape(m)?;
    Ok(format!(
        "in {m} -> conv {}x{} ({}) -> pool ({}) -> conv {}x{} ({}) -> pool ({}) -> dense {} -> 1",
        s.c1, s.k1, s.l1, s.p1, s.c2, s.k2, s.l2, s.p2, s.h
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::Provenance;

    fn small() -> ConvNetArch {
        ConvNetArch {
            conv1_filters: 3,
            conv1_kernel: 3,
            conv2_filters: 4,
            conv2_kernel: 2,
            hidden: 5,
        }
    }

    #[test]
    fn default_shape_on_paper_lags() {
        let a = ConvNetArch::default();
        assert_eq!(
            describe(&a, 201).unwrap(),
            "in 201 -> conv 16x5 (197) -> pool (98) -> conv 32x5 (94) -> pool (47) -> dense 64 -> 1"
        );
        assert_eq!(a.param_count(201).unwrap(), 80 + 16 + 2560 + 32 + 64 * 1504 + 64 + 64 + 1);
        assert!(a.param_count(10).is_err());
    }

    #[test]
    fn zero_weights_give_one_half() {
        let m = ConvNetModel::zeros(ConvNetArch::default(), 201).unwrap();
        let x: Vec<f64> = (0..201).map(|i| (i as f64).cos()).collect();
        assert_eq!(m.predict_proba(&x).unwrap(), 0.5);
        assert!(!m.predict(&x).unwrap());
        assert!(m.predict_proba(&x[1..]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = ConvNetModel::init(small(), 16, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..3 * 16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys = [true, false, true];
        for (name, rel) in gradient_check(&m, &xs, &ys, 1e-5).unwrap() {
            assert!(rel < 1e-4, "{name}: {rel}");
        }
    }

    #[test]
    fn prediction_ignores_batch_company() {
        let m = ConvNetModel::init(small(), 16, 8).unwrap();
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.3).sin()).collect();
        let alone = m.predict_proba(&x).unwrap();
        let mut batch = x.clone();
        batch.extend((0..16).map(|i| i as f64));
        let (_, _) = m.loss_and_gradient(&batch, &[true, false]).unwrap();
        assert_eq!(m.predict_proba(&x).unwrap(), alone);
    }

    fn toy() -> TrainingSet {
        let mut f = Vec::new();
        let mut l = Vec::new();
        for i in 0..8 {
            let pos = i % 2 == 0;
            for t in 0..16 {
                let bump = if pos { (-((t as f64 - 8.0).powi(2)) / 4.0).exp() } else { 0.0 };
                f.push(bump + 0.01 * i as f64);
            }
            l.push(pos);
        }
        TrainingSet::new(16, f, l, Provenance::default()).unwrap()
    }

    #[test]
    fn overfits_separated_toy_set() {
        let ts = toy();
        let hyper = TrainHyper {
            learning_rate: 1e-2,
            batch_size: 4,
            epochs: 300,
            validation_fraction: 0.0,
            patience: 300,
        };
        let (m, log) = cnn_train(&ts, small(), &hyper, 11).unwrap();
        assert!(!log.is_empty());
        for i in 0..ts.len() {
            assert_eq!(m.predict(ts.features(i)).unwrap(), ts.label(i));
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ts = toy();
        let hyper = TrainHyper {
            epochs: 5,
            ..TrainHyper::default()
        };
        let a = cnn_train(&ts, small(), &hyper, 2).unwrap();
        let b = cnn_train(&ts, small(), &hyper, 2).unwrap();
        assert_eq!(a, b);
    }
}
