//! The 9-convolution residual backbone: a 3x3 stem plus four residual
//! stages of one basic block each (two 3x3 convolutions per block), with
//! stride-2 downsampling entering stages 3 and 4. Batch-norm and ReLU
//! throughout; projection shortcuts carry channel/stride changes.

use std::cell::RefCell;
use std::rc::Rc;

use autodiff::{Elem, Parameter, RunningStats, Tensor};
use rand_chacha::ChaCha8Rng;

use crate::error::ModelError;
use crate::init::he_normal;

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

pub(crate) type BufferRef<T> = (String, Rc<RefCell<Vec<T>>>);

pub(crate) struct Conv2d<T: Elem> {
    pub weight: Tensor<T>,
    stride: usize,
    padding: usize,
}

impl<T: Elem> Conv2d<T> {
    fn new(rng: &mut ChaCha8Rng, c_in: usize, c_out: usize, k: usize, stride: usize, padding: usize) -> Self {
        let fan_in = c_in * k * k;
        let data = he_normal(rng, c_out * fan_in, fan_in);
        let weight = Tensor::param(vec![c_out, c_in, k, k], data).expect("conv weight shape");
        Conv2d { weight, stride, padding }
    }

    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        Ok(x.conv2d(&self.weight, self.stride, self.padding)?)
    }

    fn params(&self, prefix: &str, out: &mut Vec<Parameter<T>>) {
        out.push(Parameter::new(format!("{prefix}.weight"), self.weight.clone()));
    }
}

pub(crate) struct BatchNorm<T: Elem> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    running: RunningStats<T>,
}

impl<T: Elem> BatchNorm<T> {
    pub(crate) fn new(channels: usize) -> Self {
        BatchNorm {
            gamma: Tensor::param(vec![channels], vec![T::one(); channels]).expect("bn gamma"),
            beta: Tensor::param(vec![channels], vec![T::zero(); channels]).expect("bn beta"),
            running: RunningStats::new(channels),
        }
    }

    pub(crate) fn forward(&self, x: &Tensor<T>, train: bool) -> Result<Tensor<T>, ModelError> {
        Ok(x.batch_norm(
            &self.gamma,
            &self.beta,
            &self.running,
            train,
            T::from_f64(BN_MOMENTUM),
            T::from_f64(BN_EPS),
        )?)
    }

    pub(crate) fn params(&self, prefix: &str, out: &mut Vec<Parameter<T>>) {
        out.push(Parameter::new(format!("{prefix}.gamma"), self.gamma.clone()));
        out.push(Parameter::new(format!("{prefix}.beta"), self.beta.clone()));
    }

    pub(crate) fn buffers(&self, prefix: &str, out: &mut Vec<BufferRef<T>>) {
        out.push((format!("{prefix}.running_mean"), Rc::clone(&self.running.mean)));
        out.push((format!("{prefix}.running_var"), Rc::clone(&self.running.var)));
    }
}

struct BasicBlock<T: Elem> {
    conv1: Conv2d<T>,
    bn1: BatchNorm<T>,
    conv2: Conv2d<T>,
    bn2: BatchNorm<T>,
    shortcut: Option<(Conv2d<T>, BatchNorm<T>)>,
}

impl<T: Elem> BasicBlock<T> {
    fn new(rng: &mut ChaCha8Rng, c_in: usize, c_out: usize, stride: usize) -> Self {
        let conv1 = Conv2d::new(rng, c_in, c_out, 3, stride, 1);
        let bn1 = BatchNorm::new(c_out);
        let conv2 = Conv2d::new(rng, c_out, c_out, 3, 1, 1);
        let bn2 = BatchNorm::new(c_out);
        let shortcut = if stride != 1 || c_in != c_out {
            Some((Conv2d::new(rng, c_in, c_out, 1, stride, 0), BatchNorm::new(c_out)))
        } else {
            None
        };
        BasicBlock { conv1, bn1, conv2, bn2, shortcut }
    }

    fn forward(&self, x: &Tensor<T>, train: bool) -> Result<Tensor<T>, ModelError> {
        let y = self.bn1.forward(&self.conv1.forward(x)?, train)?.relu();
        let y = self.bn2.forward(&self.conv2.forward(&y)?, train)?;
        let residual = match &self.shortcut {
            Some((conv, bn)) => bn.forward(&conv.forward(x)?, train)?,
            None => x.clone(),
        };
        Ok(y.add(&residual)?.relu())
    }

    fn params(&self, prefix: &str, out: &mut Vec<Parameter<T>>) {
        self.conv1.params(&format!("{prefix}.conv1"), out);
        self.bn1.params(&format!("{prefix}.bn1"), out);
        self.conv2.params(&format!("{prefix}.conv2"), out);
        self.bn2.params(&format!("{prefix}.bn2"), out);
        if let Some((conv, bn)) = &self.shortcut {
            conv.params(&format!("{prefix}.down.conv"), out);
            bn.params(&format!("{prefix}.down.bn"), out);
        }
    }

    fn buffers(&self, prefix: &str, out: &mut Vec<BufferRef<T>>) {
        self.bn1.buffers(&format!("{prefix}.bn1"), out);
        self.bn2.buffers(&format!("{prefix}.bn2"), out);
        if let Some((_, bn)) = &self.shortcut {
            bn.buffers(&format!("{prefix}.down.bn"), out);
        }
    }
}

pub(crate) struct Backbone<T: Elem> {
    stem_conv: Conv2d<T>,
    stem_bn: BatchNorm<T>,
    stages: Vec<BasicBlock<T>>,
}

impl<T: Elem> Backbone<T> {
    pub(crate) fn new(rng: &mut ChaCha8Rng, in_channels: usize, widths: [usize; 4]) -> Self {
        let stem_conv = Conv2d::new(rng, in_channels, widths[0], 3, 1, 1);
        let stem_bn = BatchNorm::new(widths[0]);
        let stages = vec![
            BasicBlock::new(rng, widths[0], widths[0], 1),
            BasicBlock::new(rng, widths[0], widths[1], 1),
            BasicBlock::new(rng, widths[1], widths[2], 2),
            BasicBlock::new(rng, widths[2], widths[3], 2),
        ];
        Backbone { stem_conv, stem_bn, stages }
    }

    /// (B*N) x C_in x H x W -> (B*N) x c x h x w with h = ceil(ceil(H/2)/2).
    pub(crate) fn forward(&self, x: &Tensor<T>, train: bool) -> Result<Tensor<T>, ModelError> {
        let mut y = self.stem_bn.forward(&self.stem_conv.forward(x)?, train)?.relu();
        for stage in &self.stages {
            y = stage.forward(&y, train)?;
        }
        Ok(y)
    }

    pub(crate) fn params(&self, prefix: &str, out: &mut Vec<Parameter<T>>) {
        self.stem_conv.params(&format!("{prefix}.stem.conv"), out);
        self.stem_bn.params(&format!("{prefix}.stem.bn"), out);
        for (i, s) in self.stages.iter().enumerate() {
            s.params(&format!("{prefix}.stage{}", i + 1), out);
        }
    }

    pub(crate) fn buffers(&self, prefix: &str, out: &mut Vec<BufferRef<T>>) {
        self.stem_bn.buffers(&format!("{prefix}.stem.bn"), out);
        for (i, s) in self.stages.iter().enumerate() {
            s.buffers(&format!("{prefix}.stage{}", i + 1), out);
        }
    }
}
