use crate::error::{Error, Result};
use crate::numerics::AdamConfig;

/// Orientation of the negative-sample terms in the SFNA and KD losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossSign {
    /// `-Σ f(p)·log(1-p) - Σ log p`: every term is a non-negative penalty.
    #[default]
    NegLogLikelihood,
    /// `+Σ f(p)·log(1-p) - Σ log p`, kept for forensic comparison only.
    AsPrinted,
}

impl LossSign {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nll" => Ok(LossSign::NegLogLikelihood),
            "printed" => Ok(LossSign::AsPrinted),
            other => Err(Error::Config(format!(
                "loss_sign must be `nll` or `printed`, got {other:?}"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LossSign::NegLogLikelihood => "nll",
            LossSign::AsPrinted => "printed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Weight of the SFNA term; `1 - lambda` weighs distillation.
    pub lambda: f64,
    /// Residual-attention temperatures, one per head.
    pub temps: Vec<f64>,
    /// Maximum hop order `K`.
    pub hops: usize,
    /// Triples sampled per entity during training (`m`).
    pub sample_triples: usize,
    /// Known types sampled per entity during training (`n`).
    pub sample_types: usize,
    pub struct_dim: usize,
    /// Unified embedding dimension `d`.
    pub dim: usize,
    pub lr: f64,
    /// Epochs before the first halving; each later interval is twice as
    /// long. `0` keeps the rate constant.
    pub lr_decay_interval: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub kd_enabled: bool,
    /// Teacher probability for entries missing from a sparse file.
    pub sem_prob_floor: f64,
    pub loss_sign: LossSign,
    pub norm_eps: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

/// `T_h = h` for `h = 1..=heads`.
pub fn default_temps(heads: usize) -> Vec<f64> {
    (1..=heads).map(|h| h as f64).collect()
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::fb15ket()
    }
}

impl TrainConfig {
    pub fn fb15ket() -> Self {
        TrainConfig {
            lambda: 0.75,
            temps: default_temps(5),
            hops: 2,
            sample_triples: 7,
            sample_types: 8,
            struct_dim: 100,
            dim: 100,
            lr: 1e-3,
            lr_decay_interval: 50,
            batch_size: 32,
            epochs: 400,
            seed: 0,
            kd_enabled: true,
            sem_prob_floor: 0.0,
            loss_sign: LossSign::NegLogLikelihood,
            norm_eps: 1e-12,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }

    pub fn yago43ket() -> Self {
        TrainConfig {
            lambda: 0.8,
            hops: 3,
            sample_triples: 3,
            sample_types: 3,
            lr: 2e-3,
            ..TrainConfig::fb15ket()
        }
    }

    /// Weight actually applied to the SFNA term: distillation off means
    /// SFNA alone.
    pub fn effective_lambda(&self) -> f64 {
        if self.kd_enabled {
            self.lambda
        } else {
            1.0
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    /// Learning rate for a zero-based epoch under the halve-and-double schedule.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if self.lr_decay_interval == 0 {
            return self.lr;
        }
        let mut lr = self.lr;
        let mut width = self.lr_decay_interval;
        let mut boundary = width;
        while epoch >= boundary {
            lr *= 0.5;
            width *= 2;
            boundary += width;
        }
        lr
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.lambda) {
            return fail(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if self.temps.is_empty() || self.temps.iter().any(|t| !t.is_finite()) {
            return fail("temps must be a nonempty list of finite values".into());
        }
        if self.hops == 0 {
            return fail("K must be at least 1".into());
        }
        if self.sample_triples + self.sample_types == 0 {
            return fail("m + n must be at least 1".into());
        }
        if self.struct_dim == 0 || self.dim == 0 {
            return fail("embedding dimensions must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return fail("batch size must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.sem_prob_floor) {
            return fail("sem_prob_floor must lie in [0, 1]".into());
        }
        if self.norm_eps.is_nan() || self.norm_eps <= 0.0 {
            return fail("norm_eps must be positive".into());
        }
        Ok(())
    }
}
