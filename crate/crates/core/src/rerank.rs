//! Unsupervised re-ranking: blend semantic probabilities `p` into the top-k
//! structural candidates of `q`. Nothing here feeds back into training.

use crate::error::{Error, Result};
use crate::io::ProbabilityTable;
use crate::kg::EntityId;
use crate::model::ProbabilityRow;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RerankConfig {
    /// Weight of the semantic probabilities inside the candidate pool.
    pub alpha: f64,
    /// Candidate pool size; values above `|T|` use every type.
    pub k: usize,
}

impl Default for RerankConfig {
    fn default() -> Self {
        RerankConfig { alpha: 0.5, k: 100 }
    }
}

impl RerankConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.k == 0 {
            return Err(Error::Config(
                "re-ranking pool size k must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedRow {
    pub entity: EntityId,
    pub z: Vec<f32>,
}

/// Indices of the `k` largest values of `q`, ties broken by lower index.
pub fn candidate_pool(q: &[f32], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..q.len()).collect();
    idx.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
    idx.truncate(k.min(q.len()));
    idx
}

/// `z_j = α·p_j + (1-α)·q_j` for the top-k types of `q`, `z_j = q_j` otherwise.
pub fn rerank_values(p: &[f32], q: &[f32], cfg: &RerankConfig) -> Result<Vec<f32>> {
    cfg.validate()?;
    if p.len() != q.len() {
        return Err(Error::Shape(format!(
            "p has {} types, q has {}",
            p.len(),
            q.len()
        )));
    }
    let alpha = cfg.alpha as f32;
    let beta = (1.0 - cfg.alpha) as f32;
    let mut z = q.to_vec();
    for j in candidate_pool(q, cfg.k) {
        z[j] = alpha * p[j] + beta * q[j];
    }
    Ok(z)
}

pub fn rerank(p: &ProbabilityRow, q: &ProbabilityRow, cfg: &RerankConfig) -> Result<FusedRow> {
    if p.entity != q.entity {
        return Err(Error::Shape(format!(
            "re-ranking entity {} against entity {}",
            p.entity, q.entity
        )));
    }
    Ok(FusedRow {
        entity: q.entity,
        z: rerank_values(&p.values, &q.values, cfg)?,
    })
}

/// Re-rank every row of `q`. Rows of `p` missing from a sparse file, and
/// entries missing from a sparse record, take `floor`.
pub fn rerank_table(
    p: &ProbabilityTable,
    q: &ProbabilityTable,
    cfg: &RerankConfig,
    floor: f32,
) -> Result<ProbabilityTable> {
    p.check_dims(q.num_entities(), q.num_types())?;
    let mut rows = Vec::new();
    for e in q.entities() {
        let qr = q.row(e, 0.0).ok_or(Error::MissingRow(e.index()))?;
        let pr = p
            .row(e, floor)
            .unwrap_or_else(|| vec![floor; q.num_types()]);
        rows.push(ProbabilityRow {
            entity: e,
            values: rerank_values(&pr, &qr, cfg)?,
        });
    }
    if q.is_dense() {
        ProbabilityTable::dense_from_rows(q.num_entities(), q.num_types(), &rows)
    } else {
        ProbabilityTable::sparse_from_rows(q.num_entities(), q.num_types(), &rows, None)
    }
}
