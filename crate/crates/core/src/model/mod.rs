//! Structural aggregation model: embedding fusion, multi-hop aggregation,
//! classifier with residual-attention pooling, losses and training.

mod config;
pub mod forward;
pub mod loss;
pub mod params;
pub mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::numerics::Real;

pub use config::{default_temps, LossSign, TrainConfig};
pub use forward::{
    build_views, build_views_or_own, AggregatedViews, Backward, Classified, Forward, Item, Mode,
    RowSource, Sampling, ViewPlan,
};
pub use loss::{
    kd_loss, kd_loss_weighted, reweight, reweight_row, sfna_loss, sfna_loss_weighted, PROB_CLAMP,
};
pub use params::{Mlp, SkaModel, SkaParams, TextTables};
pub use train::{
    batch_loss_and_grad, ska_gradient_check, train, EpochStats, Example, LossParts, TrainHistory,
    TrainState, Trainer,
};

/// Per-entity type probabilities, all in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityRow<F = f32> {
    pub entity: EntityId,
    pub values: Vec<F>,
}

impl<F: Real> ProbabilityRow<F> {
    pub fn new(entity: EntityId, values: Vec<F>) -> Result<Self> {
        if let Some(v) = values
            .iter()
            .find(|v| !(**v >= F::zero() && **v <= F::one()))
        {
            return Err(Error::OutOfRange(v.f64()));
        }
        Ok(ProbabilityRow { entity, values })
    }
}

/// `q = sigmoid(csra_pool(W · elu(H^agg) + b))` for one laid-out entity.
pub fn infer_probabilities<F: Real>(
    fwd: &mut Forward<'_, F>,
    plan: &ViewPlan,
) -> Result<ProbabilityRow<F>> {
    let views = fwd.materialize(plan);
    let cls = fwd.classify(&views)?;
    Ok(ProbabilityRow {
        entity: plan.entity,
        values: cls.probs,
    })
}

impl<F: Real> SkaModel<F> {
    /// Inference-mode probabilities for `entities`, using every edge and
    /// every known type. Entities without any evidence fall back to their
    /// own fused embedding.
    pub fn infer_entities(
        &self,
        graph: &KnowledgeGraph,
        entities: &[EntityId],
    ) -> Result<Vec<ProbabilityRow<F>>> {
        self.validate(graph)?;
        let sampling = Sampling {
            hops: self.hops,
            triples: 0,
            types: 0,
        };
        // Infer mode never draws from the RNG.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut fwd = self.forward(graph);
        entities
            .iter()
            .map(|&e| {
                let plan = build_views_or_own(graph, e, sampling, Mode::Infer, &mut rng)?;
                infer_probabilities(&mut fwd, &plan)
            })
            .collect()
    }
}
