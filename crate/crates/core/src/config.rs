//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. A `preset` key
//! (`fb15ket` or `yago43ket`) is applied before every other key.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{default_temps, LossSign, TrainConfig};
use crate::rerank::RerankConfig;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub rerank: RerankConfig,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let key = k.trim().to_owned();
            if entries.insert(key.clone(), v.trim().to_owned()).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {key:?}",
                    i + 1
                )));
            }
        }

        let mut cfg = RunConfig::default();
        if let Some(p) = entries.remove("preset") {
            cfg.train = match p.as_str() {
                "fb15ket" => TrainConfig::fb15ket(),
                "yago43ket" => TrainConfig::yago43ket(),
                other => return Err(Error::Config(format!("unknown preset {other:?}"))),
            };
        }
        let heads = entries
            .remove("H")
            .map(|v| num::<usize>("H", &v))
            .transpose()?;
        let temps = entries
            .remove("temps")
            .map(|v| {
                v.split(',')
                    .map(|s| num::<f64>("temps", s.trim()))
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        match (heads, temps) {
            (Some(h), Some(t)) if t.len() != h => {
                return Err(Error::Config(format!(
                    "H = {h} but {} temperatures given",
                    t.len()
                )))
            }
            (_, Some(t)) => cfg.train.temps = t,
            (Some(h), None) => cfg.train.temps = default_temps(h),
            (None, None) => {}
        }

        let t = &mut cfg.train;
        for (key, v) in &entries {
            match key.as_str() {
                "lambda" => t.lambda = num(key, v)?,
                "alpha" => cfg.rerank.alpha = num(key, v)?,
                "topk" => cfg.rerank.k = num(key, v)?,
                "K" => t.hops = num(key, v)?,
                "m" => t.sample_triples = num(key, v)?,
                "n" => t.sample_types = num(key, v)?,
                "struct_dim" => t.struct_dim = num(key, v)?,
                "dim" => t.dim = num(key, v)?,
                "dims" => {
                    // `d` or `d_s,d`
                    let parts: Vec<usize> = v
                        .split(',')
                        .map(|x| num(key, x.trim()))
                        .collect::<Result<_>>()?;
                    match parts[..] {
                        [d] => (t.struct_dim, t.dim) = (d, d),
                        [ds, d] => (t.struct_dim, t.dim) = (ds, d),
                        _ => return Err(Error::Config(format!("bad value {v:?} for dims"))),
                    }
                }
                "lr" => t.lr = num(key, v)?,
                "lr_decay_interval" => t.lr_decay_interval = num(key, v)?,
                "batch_size" => t.batch_size = num(key, v)?,
                "epochs" => t.epochs = num(key, v)?,
                "seed" => t.seed = num(key, v)?,
                "kd" => t.kd_enabled = num(key, v)?,
                "sem_prob_floor" => t.sem_prob_floor = num(key, v)?,
                "loss_sign" => t.loss_sign = LossSign::parse(v)?,
                "norm_eps" => t.norm_eps = num(key, v)?,
                "adam_beta1" => t.adam_beta1 = num(key, v)?,
                "adam_beta2" => t.adam_beta2 = num(key, v)?,
                "adam_eps" => t.adam_eps = num(key, v)?,
                other => return Err(Error::Config(format!("unknown key {other:?}"))),
            }
        }
        cfg.train.validate()?;
        cfg.rerank.validate()?;
        Ok(cfg)
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value {v:?} for {key}")))
}
