use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::ProbabilityTable;
use crate::kg::{EntityId, KnowledgeGraph};
use crate::numerics::{adam_step, finite_difference_check, AdamState, GradCheckReport, Real};

use super::forward::{build_views_or_own, Backward, Mode, Sampling, ViewPlan};
use super::loss::{kd_loss_weighted, logit_grad, reweight_row, sfna_loss_weighted};
use super::params::{SkaModel, SkaParams, TextTables};
use super::{LossSign, TrainConfig};

/// One training example: the view layout plus the teacher row, if any.
#[derive(Debug, Clone)]
pub struct Example<F> {
    pub plan: ViewPlan,
    pub teacher: Option<Vec<F>>,
}

/// Batch-mean loss components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub sfna: f64,
    pub kd: f64,
    pub total: f64,
}

/// Mean loss over `batch` and its gradient with respect to every parameter.
///
/// Per-entity SFNA and KD losses are averaged over the batch and mixed as
/// `lambda · SFNA + (1 - lambda) · KD`. Examples without a teacher row
/// contribute no KD term.
pub fn batch_loss_and_grad<F: Real>(
    model: &SkaModel<F>,
    graph: &KnowledgeGraph,
    batch: &[Example<F>],
    lambda: f64,
    sign: LossSign,
) -> Result<(LossParts, SkaParams<F>)> {
    batch_eval(model, graph, batch, lambda, sign, None).map(|(parts, grads, _)| (parts, grads))
}

/// Shared body of the batch loss. With `frozen`, the negative-term weights
/// of example `i` are `frozen[i]` instead of `f` of the current
/// probabilities. The weights actually used are returned.
fn batch_eval<F: Real>(
    model: &SkaModel<F>,
    graph: &KnowledgeGraph,
    batch: &[Example<F>],
    lambda: f64,
    sign: LossSign,
    frozen: Option<&[Vec<F>]>,
) -> Result<(LossParts, SkaParams<F>, Vec<Vec<F>>)> {
    let mut grads = model.params.zeros_like();
    if batch.is_empty() {
        return Ok((LossParts::default(), grads, Vec::new()));
    }
    let mut fwd = model.forward(graph);
    let mut sink = Backward::new();
    let inv_b = F::one() / F::c(batch.len() as f64);
    let w_sfna = F::c(lambda) * inv_b;
    let w_kd = F::c(1.0 - lambda) * inv_b;
    let mut sum_sfna = 0.0;
    let mut sum_kd = 0.0;

    let mut used = Vec::with_capacity(batch.len());
    for (i, ex) in batch.iter().enumerate() {
        let views = fwd.materialize(&ex.plan);
        let cls = fwd.classify(&views)?;
        let weights = match frozen {
            Some(w) => w[i].clone(),
            None => reweight_row(&cls.probs),
        };
        let positives = graph.known_of(ex.plan.entity);
        let (l_sfna, d_sfna) = sfna_loss_weighted(&cls.probs, positives, &weights, sign);
        sum_sfna += l_sfna.f64();
        let mut g_logits: Vec<F> = logit_grad(&cls.probs, &d_sfna)
            .into_iter()
            .map(|g| g * w_sfna)
            .collect();
        if let Some(teacher) = &ex.teacher {
            let (l_kd, d_kd) = kd_loss_weighted(teacher, &cls.probs, &weights, sign);
            sum_kd += l_kd.f64();
            if w_kd != F::zero() {
                for (g, k) in g_logits.iter_mut().zip(logit_grad(&cls.probs, &d_kd)) {
                    *g += w_kd * k;
                }
            }
        }
        fwd.backward_entity(&views, &cls, &g_logits, &mut sink, &mut grads)?;
        used.push(weights);
    }
    fwd.finish_backward(sink, &mut grads);

    let n = batch.len() as f64;
    let sfna = sum_sfna / n;
    let kd = sum_kd / n;
    let parts = LossParts {
        sfna,
        kd,
        total: lambda * sfna + (1.0 - lambda) * kd,
    };
    Ok((parts, grads, used))
}

/// Compare [`batch_loss_and_grad`] against central differences over every
/// parameter coordinate.
///
/// The reweighting factors carry no gradient, so they are frozen at their
/// values for the unperturbed parameters while differencing.
pub fn ska_gradient_check(
    model: &SkaModel<f64>,
    graph: &KnowledgeGraph,
    batch: &[Example<f64>],
    lambda: f64,
    sign: LossSign,
    h: f64,
) -> Result<GradCheckReport> {
    let (_, _, weights) = batch_eval(model, graph, batch, lambda, sign, None)?;
    let mut work = model.clone();
    let flat = model.params.to_flat();
    finite_difference_check(
        |x: &[f64]| {
            work.params.copy_from_flat(x)?;
            let (parts, grads, _) = batch_eval(&work, graph, batch, lambda, sign, Some(&weights))?;
            Ok((parts.total, grads.to_flat()))
        },
        &flat,
        h,
        None,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// One-based epoch number.
    pub epoch: usize,
    pub loss_sfna: f64,
    pub loss_kd: f64,
    pub loss_total: f64,
    pub lr: f64,
}

impl EpochStats {
    /// `epoch\tloss_sfna\tloss_kd\tloss_total\tlr`
    pub fn log_line(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:e}",
            self.epoch, self.loss_sfna, self.loss_kd, self.loss_total, self.lr
        )
    }

    pub fn parse_log_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim_end().split('\t').collect();
        let bad = || Error::Format {
            path: "training log".into(),
            message: format!("malformed line {line:?}"),
        };
        if f.len() != 5 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        Ok(EpochStats {
            epoch: f[0].parse().map_err(|_| bad())?,
            loss_sfna: num(f[1])?,
            loss_kd: num(f[2])?,
            loss_total: num(f[3])?,
            lr: num(f[4])?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

/// Everything a checkpoint needs to resume training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub model: SkaModel<f32>,
    pub adam: AdamState<f32>,
    /// Completed epochs.
    pub epoch: usize,
}

impl TrainState {
    pub fn new(
        graph: &KnowledgeGraph,
        text: Option<TextTables<f32>>,
        cfg: &TrainConfig,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let model = SkaModel::init(graph, text, cfg, &mut rng)?;
        let adam = AdamState::new(&model.params.shapes(), cfg.adam());
        Ok(TrainState {
            model,
            adam,
            epoch: 0,
        })
    }
}

/// Per-epoch RNG, so a resumed run samples exactly like an uninterrupted one.
fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub struct Trainer<'a> {
    graph: &'a KnowledgeGraph,
    cfg: &'a TrainConfig,
    teacher: Option<&'a ProbabilityTable>,
    entities: Vec<EntityId>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        graph: &'a KnowledgeGraph,
        cfg: &'a TrainConfig,
        teacher: Option<&'a ProbabilityTable>,
    ) -> Result<Self> {
        cfg.validate()?;
        let entities = graph.train_entities();
        if cfg.kd_enabled {
            let table = teacher.ok_or_else(|| {
                Error::Config(
                    "distillation is enabled but no teacher probabilities were given".into(),
                )
            })?;
            table.check_dims(graph.num_entities(), graph.num_types())?;
            for &e in &entities {
                if !table.has_row(e) {
                    return Err(Error::MissingRow(e.index()));
                }
            }
        }
        Ok(Trainer {
            graph,
            cfg,
            teacher: if cfg.kd_enabled { teacher } else { None },
            entities,
        })
    }

    pub fn train_entities(&self) -> &[EntityId] {
        &self.entities
    }

    fn teacher_row(&self, e: EntityId) -> Option<Vec<f32>> {
        self.teacher
            .and_then(|t| t.row(e, self.cfg.sem_prob_floor as f32))
    }

    /// Train one epoch and advance `state.epoch`.
    pub fn run_epoch(&self, state: &mut TrainState) -> Result<EpochStats> {
        let cfg = self.cfg;
        let epoch = state.epoch;
        let lr = cfg.lr_at(epoch);
        state.adam.config.lr = lr;
        let mut rng = epoch_rng(cfg.seed, epoch);
        let mut order = self.entities.clone();
        order.shuffle(&mut rng);
        let sampling = Sampling::from(cfg);
        let lambda = cfg.effective_lambda();

        let mut sums = LossParts::default();
        let mut seen = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = chunk
                .iter()
                .map(|&e| {
                    Ok(Example {
                        plan: build_views_or_own(self.graph, e, sampling, Mode::Train, &mut rng)?,
                        teacher: self.teacher_row(e),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let (parts, grads) =
                batch_loss_and_grad(&state.model, self.graph, &batch, lambda, cfg.loss_sign)?;
            if !parts.total.is_finite() || !grads.is_finite() {
                return Err(Error::NonFinite(format!(
                    "epoch {} batch {b}: sfna {} kd {} total {}",
                    epoch + 1,
                    parts.sfna,
                    parts.kd,
                    parts.total
                )));
            }
            let k = batch.len() as f64;
            sums.sfna += parts.sfna * k;
            sums.kd += parts.kd * k;
            sums.total += parts.total * k;
            seen += batch.len();

            let grads_ref = grads.tensors();
            let mut params = state.model.params.tensors_mut();
            adam_step(&mut params, &grads_ref, &mut state.adam)?;
        }

        state.epoch += 1;
        let n = seen.max(1) as f64;
        Ok(EpochStats {
            epoch: state.epoch,
            loss_sfna: sums.sfna / n,
            loss_kd: sums.kd / n,
            loss_total: sums.total / n,
            lr,
        })
    }

    /// Train until `cfg.epochs` epochs have completed, starting from
    /// `state.epoch`.
    pub fn run(
        &self,
        state: &mut TrainState,
        mut on_epoch: impl FnMut(&EpochStats),
    ) -> Result<TrainHistory> {
        let mut history = TrainHistory::default();
        while state.epoch < self.cfg.epochs {
            let stats = self.run_epoch(state)?;
            on_epoch(&stats);
            history.epochs.push(stats);
        }
        Ok(history)
    }
}

/// Initialise and train a fresh model.
pub fn train(
    graph: &KnowledgeGraph,
    text: Option<TextTables<f32>>,
    cfg: &TrainConfig,
    teacher: Option<&ProbabilityTable>,
) -> Result<(TrainState, TrainHistory)> {
    let trainer = Trainer::new(graph, cfg, teacher)?;
    let mut state = TrainState::new(graph, text, cfg)?;
    let history = trainer.run(&mut state, |_| {})?;
    Ok((state, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_line_roundtrip() {
        let s = EpochStats {
            epoch: 3,
            loss_sfna: 1.25,
            loss_kd: 0.5,
            loss_total: 1.0625,
            lr: 1e-3,
        };
        let line = s.log_line();
        assert_eq!(line.split('\t').count(), 5);
        assert_eq!(EpochStats::parse_log_line(&line).unwrap(), s);
    }

    #[test]
    fn epoch_rngs_differ() {
        use rand::Rng;
        let a: u64 = epoch_rng(7, 0).random();
        let b: u64 = epoch_rng(7, 1).random();
        assert_ne!(a, b);
        let c: u64 = epoch_rng(7, 0).random();
        assert_eq!(a, c);
    }
}
