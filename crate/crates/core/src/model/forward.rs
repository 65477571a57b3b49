//! Forward and backward passes of the aggregation model.
//!
//! A [`Forward`] context memoises fused embeddings and `f_agg` values for
//! one fixed parameter snapshot, so entities in a batch (or all entities at
//! inference) share work. Gradients are pushed back level by level through
//! the same memo in [`Forward::finish_backward`].

use std::collections::{BTreeMap, HashMap};

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, NeighborEdge, RelationId, TypeId};
use crate::numerics::{
    axpy, csra_pool, csra_pool_backward, elu, elu_grad, l2_normalize, l2_normalize_backward,
    sigmoid, DenseMatrix, Real,
};

use super::params::{MlpCache, SkaModel, SkaParams};
use super::TrainConfig;

/// A vocabulary item that owns a fused embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Item {
    Entity(EntityId),
    Relation(RelationId),
    Type(TypeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Sample up to `m` edges and `n` known types per entity.
    Train,
    /// Use every edge and every known type.
    Infer,
}

/// Where one row of the aggregated view matrix comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSource {
    /// `f_agg^(hop-1)(neighbor) - sign · r`; hop 1 is the plain TransE view.
    Hop {
        edge: NeighborEdge,
        hop: usize,
    },
    KnownType(TypeId),
    /// The entity's own fused embedding, used only when it has no evidence.
    Own,
}

/// Row layout of the view matrix for one entity. Independent of parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewPlan {
    pub entity: EntityId,
    pub rows: Vec<RowSource>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sampling {
    pub hops: usize,
    pub triples: usize,
    pub types: usize,
}

impl From<&TrainConfig> for Sampling {
    fn from(cfg: &TrainConfig) -> Self {
        Sampling {
            hops: cfg.hops,
            triples: cfg.sample_triples,
            types: cfg.sample_types,
        }
    }
}

fn sample_sorted<R: Rng + ?Sized>(len: usize, amount: usize, rng: &mut R) -> Vec<usize> {
    if amount >= len {
        return (0..len).collect();
    }
    let mut picked = index::sample(rng, len, amount).into_vec();
    picked.sort_unstable();
    picked
}

/// Lay out the rows for entity `e`: `hops` rows per (sampled) edge followed
/// by one row per (sampled) known type.
///
/// In [`Mode::Infer`] the RNG is not touched.
pub fn build_views<R: Rng + ?Sized>(
    graph: &KnowledgeGraph,
    e: EntityId,
    sampling: Sampling,
    mode: Mode,
    rng: &mut R,
) -> Result<ViewPlan> {
    let edges = graph.neighbors(e)?;
    let types = graph.known_types(e)?;
    let (edge_idx, type_idx) = match mode {
        Mode::Infer => ((0..edges.len()).collect(), (0..types.len()).collect()),
        Mode::Train => (
            sample_sorted(edges.len(), sampling.triples, rng),
            sample_sorted(types.len(), sampling.types, rng),
        ),
    };
    let mut rows = Vec::with_capacity(edge_idx.len() * sampling.hops + type_idx.len());
    for i in edge_idx {
        for hop in 1..=sampling.hops {
            rows.push(RowSource::Hop {
                edge: edges[i],
                hop,
            });
        }
    }
    rows.extend(type_idx.into_iter().map(|i| RowSource::KnownType(types[i])));
    if rows.is_empty() {
        return Err(Error::NoEvidence(e.index()));
    }
    Ok(ViewPlan { entity: e, rows })
}

/// [`build_views`], falling back to the entity's own embedding when it
/// has neither edges nor (sampled) known types.
pub fn build_views_or_own<R: Rng + ?Sized>(
    graph: &KnowledgeGraph,
    e: EntityId,
    sampling: Sampling,
    mode: Mode,
    rng: &mut R,
) -> Result<ViewPlan> {
    match build_views(graph, e, sampling, mode, rng) {
        Err(Error::NoEvidence(_)) => Ok(ViewPlan {
            entity: e,
            rows: vec![RowSource::Own],
        }),
        other => other,
    }
}

/// The stacked view matrix `H^agg` of one entity.
#[derive(Debug, Clone)]
pub struct AggregatedViews<F> {
    pub entity: EntityId,
    pub sources: Vec<RowSource>,
    pub matrix: DenseMatrix<F>,
}

/// Classifier intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Classified<F> {
    pub scores: DenseMatrix<F>,
    pub logits: Vec<F>,
    pub probs: Vec<F>,
}

#[derive(Debug, Clone)]
struct FusedEntry<F> {
    value: Vec<F>,
    text: Option<MlpCache<F>>,
    structural: MlpCache<F>,
}

pub struct Forward<'a, F> {
    model: &'a SkaModel<F>,
    graph: &'a KnowledgeGraph,
    fused: HashMap<Item, FusedEntry<F>>,
    /// `agg[l - 1]` holds `f_agg^(l)`.
    agg: Vec<HashMap<EntityId, Vec<F>>>,
}

/// Gradients with respect to memoised intermediates, keyed deterministically.
#[derive(Debug, Clone, Default)]
pub struct Backward<F> {
    fused: BTreeMap<Item, Vec<F>>,
    agg: Vec<BTreeMap<EntityId, Vec<F>>>,
}

impl<F: Real> Backward<F> {
    pub fn new() -> Self {
        Backward {
            fused: BTreeMap::new(),
            agg: Vec::new(),
        }
    }

    fn add_fused(&mut self, item: Item, scale: F, g: &[F]) {
        let slot = self
            .fused
            .entry(item)
            .or_insert_with(|| vec![F::zero(); g.len()]);
        axpy(scale, g, slot);
    }

    fn add_agg(&mut self, level: usize, e: EntityId, scale: F, g: &[F]) {
        if level == 0 {
            self.add_fused(Item::Entity(e), scale, g);
            return;
        }
        if self.agg.len() < level {
            self.agg.resize_with(level, BTreeMap::new);
        }
        let slot = self.agg[level - 1]
            .entry(e)
            .or_insert_with(|| vec![F::zero(); g.len()]);
        axpy(scale, g, slot);
    }
}

impl<F: Real> SkaModel<F> {
    pub fn forward<'a>(&'a self, graph: &'a KnowledgeGraph) -> Forward<'a, F> {
        Forward {
            model: self,
            graph,
            fused: HashMap::new(),
            agg: Vec::new(),
        }
    }
}

impl<'a, F: Real> Forward<'a, F> {
    pub fn model(&self) -> &'a SkaModel<F> {
        self.model
    }

    pub fn graph(&self) -> &'a KnowledgeGraph {
        self.graph
    }

    fn inputs(&self, item: Item) -> (Option<&'a [F]>, &'a [F]) {
        let m = self.model;
        let p = &m.params;
        match item {
            Item::Entity(e) => (
                m.text.as_ref().map(|t| t.entity.row(e.index())),
                p.entity_struct.row(e.index()),
            ),
            Item::Relation(r) => (
                m.text.as_ref().map(|t| t.relation.row(r.index())),
                p.relation_struct.row(r.index()),
            ),
            Item::Type(t) => (
                m.text.as_ref().map(|tt| tt.type_.row(t.index())),
                p.type_struct.row(t.index()),
            ),
        }
    }

    fn ensure_fused(&mut self, item: Item) {
        if self.fused.contains_key(&item) {
            return;
        }
        let eps = self.model.norm_eps;
        let (text_in, struct_in) = self.inputs(item);
        let structural = self.model.params.mlp_struct.forward(struct_in);
        let mut value = l2_normalize(&structural.out, eps);
        let text = match (text_in, &self.model.params.mlp_text) {
            (Some(x), Some(mlp)) => {
                let cache = mlp.forward(x);
                let tn = l2_normalize(&cache.out, eps);
                for (v, t) in value.iter_mut().zip(tn) {
                    *v += t;
                }
                Some(cache)
            }
            _ => None,
        };
        self.fused.insert(
            item,
            FusedEntry {
                value,
                text,
                structural,
            },
        );
    }

    /// Fused embedding: `norm(MLP_t(text)) + norm(MLP_s(structural))`, or
    /// just the structural half in structural-only mode.
    pub fn fused(&mut self, item: Item) -> &[F] {
        self.ensure_fused(item);
        &self.fused[&item].value
    }

    fn ensure_agg(&mut self, level: usize, e: EntityId) {
        if level == 0 {
            self.ensure_fused(Item::Entity(e));
            return;
        }
        if self.agg.len() >= level && self.agg[level - 1].contains_key(&e) {
            return;
        }
        let graph = self.graph;
        let edges = graph.neighbors_of(e);
        let types = graph.known_of(e);
        for edge in edges {
            self.ensure_agg(level - 1, edge.neighbor);
            self.ensure_fused(Item::Relation(edge.relation));
        }
        for &t in types {
            self.ensure_fused(Item::Type(t));
        }

        let value = if edges.is_empty() && types.is_empty() {
            self.ensure_fused(Item::Entity(e));
            self.fused[&Item::Entity(e)].value.clone()
        } else {
            let d = self.model.dim();
            let mut acc = vec![F::zero(); d];
            for edge in edges {
                axpy(F::one(), self.agg_value(level - 1, edge.neighbor), &mut acc);
                let sign = F::c(edge.direction.sign());
                axpy(
                    -sign,
                    &self.fused[&Item::Relation(edge.relation)].value,
                    &mut acc,
                );
            }
            for &t in types {
                axpy(F::one(), &self.fused[&Item::Type(t)].value, &mut acc);
            }
            let count = F::c((edges.len() + types.len()) as f64);
            acc.iter_mut().for_each(|v| *v /= count);
            acc
        };
        if self.agg.len() < level {
            self.agg.resize_with(level, HashMap::new);
        }
        self.agg[level - 1].insert(e, value);
    }

    /// Already-computed `f_agg^(level)(e)`.
    fn agg_value(&self, level: usize, e: EntityId) -> &[F] {
        if level == 0 {
            &self.fused[&Item::Entity(e)].value
        } else {
            &self.agg[level - 1][&e]
        }
    }

    /// `f_agg^(level)(e)`: mean over incident edges of
    /// `f_agg^(level-1)(neighbor) - sign · r` and over known types of `t`.
    /// Level 0 is the fused embedding; an entity with neither edges nor
    /// known types aggregates to its own fused embedding.
    pub fn agg_entity(&mut self, e: EntityId, level: usize) -> &[F] {
        self.ensure_agg(level, e);
        self.agg_value(level, e)
    }

    /// `neighbor - r` for forward edges, `neighbor + r` for inverse ones.
    pub fn one_hop_view(&mut self, edge: NeighborEdge) -> Vec<F> {
        self.multi_hop_view(edge, 1)
    }

    /// `f_agg^(hop-1)(neighbor) - sign · r` with `hop >= 1`.
    pub fn multi_hop_view(&mut self, edge: NeighborEdge, hop: usize) -> Vec<F> {
        assert!(hop >= 1, "hop order starts at 1");
        self.ensure_agg(hop - 1, edge.neighbor);
        self.ensure_fused(Item::Relation(edge.relation));
        let mut out = self.agg_value(hop - 1, edge.neighbor).to_vec();
        let sign = F::c(edge.direction.sign());
        axpy(
            -sign,
            &self.fused[&Item::Relation(edge.relation)].value,
            &mut out,
        );
        out
    }

    pub fn materialize(&mut self, plan: &ViewPlan) -> AggregatedViews<F> {
        let d = self.model.dim();
        let mut matrix = DenseMatrix::zeros(plan.rows.len(), d);
        for (i, src) in plan.rows.iter().enumerate() {
            let row = match *src {
                RowSource::Hop { edge, hop } => self.multi_hop_view(edge, hop),
                RowSource::KnownType(t) => self.fused(Item::Type(t)).to_vec(),
                RowSource::Own => self.fused(Item::Entity(plan.entity)).to_vec(),
            };
            matrix.row_mut(i).copy_from_slice(&row);
        }
        AggregatedViews {
            entity: plan.entity,
            sources: plan.rows.clone(),
            matrix,
        }
    }

    /// `sigmoid(csra_pool(W · elu(H) + b))`
    pub fn classify(&self, views: &AggregatedViews<F>) -> Result<Classified<F>> {
        let p = &self.model.params;
        let h = &views.matrix;
        let num_types = p.cls_weight.rows();
        let mut scores = DenseMatrix::zeros(h.rows(), num_types);
        for i in 0..h.rows() {
            let act: Vec<F> = h.row(i).iter().map(|&x| elu(x)).collect();
            let s = p.cls_weight.matvec(&act);
            for ((o, v), &b) in scores
                .row_mut(i)
                .iter_mut()
                .zip(s)
                .zip(p.cls_bias.as_slice())
            {
                *o = v + b;
            }
        }
        let logits = csra_pool(&scores, &self.model.temps)?;
        let probs = logits.iter().map(|&x| sigmoid(x)).collect();
        Ok(Classified {
            scores,
            logits,
            probs,
        })
    }

    /// Backpropagate `g_logits` through the classifier of one entity.
    /// Parameter gradients of the classifier go to `grads`; gradients of
    /// memoised intermediates go to `sink`.
    pub fn backward_entity(
        &self,
        views: &AggregatedViews<F>,
        cls: &Classified<F>,
        g_logits: &[F],
        sink: &mut Backward<F>,
        grads: &mut SkaParams<F>,
    ) -> Result<()> {
        let p = &self.model.params;
        let g_scores = csra_pool_backward(&cls.scores, &self.model.temps, g_logits)?;
        let h = &views.matrix;
        for i in 0..h.rows() {
            let gs = g_scores.row(i);
            let act: Vec<F> = h.row(i).iter().map(|&x| elu(x)).collect();
            grads.cls_weight.add_outer(F::one(), gs, &act);
            axpy(F::one(), gs, grads.cls_bias.as_mut_slice());
            let mut gh = p.cls_weight.matvec_t(gs);
            for (g, &x) in gh.iter_mut().zip(h.row(i)) {
                *g *= elu_grad(x);
            }
            match views.sources[i] {
                RowSource::Hop { edge, hop } => {
                    sink.add_agg(hop - 1, edge.neighbor, F::one(), &gh);
                    let sign = F::c(edge.direction.sign());
                    sink.add_fused(Item::Relation(edge.relation), -sign, &gh);
                }
                RowSource::KnownType(t) => sink.add_fused(Item::Type(t), F::one(), &gh),
                RowSource::Own => sink.add_fused(Item::Entity(views.entity), F::one(), &gh),
            }
        }
        Ok(())
    }

    /// Push aggregated gradients down through `f_agg` levels and the fusion
    /// MLPs into `grads`. Text tables receive nothing.
    pub fn finish_backward(&self, mut sink: Backward<F>, grads: &mut SkaParams<F>) {
        let graph = self.graph;
        while let Some(level_grads) = sink.agg.pop() {
            let level = sink.agg.len() + 1;
            for (e, g) in level_grads {
                let edges = graph.neighbors_of(e);
                let types = graph.known_of(e);
                if edges.is_empty() && types.is_empty() {
                    sink.add_fused(Item::Entity(e), F::one(), &g);
                    continue;
                }
                let scale = F::one() / F::c((edges.len() + types.len()) as f64);
                for edge in edges {
                    sink.add_agg(level - 1, edge.neighbor, scale, &g);
                    let sign = F::c(edge.direction.sign());
                    sink.add_fused(Item::Relation(edge.relation), -sign * scale, &g);
                }
                for &t in types {
                    sink.add_fused(Item::Type(t), scale, &g);
                }
            }
        }

        let eps = self.model.norm_eps;
        let params = &self.model.params;
        for (item, g) in sink.fused {
            let entry = &self.fused[&item];
            let (text_in, struct_in) = self.inputs(item);
            if let (Some(x), Some(cache), Some(mlp), Some(gm)) = (
                text_in,
                &entry.text,
                &params.mlp_text,
                grads.mlp_text.as_mut(),
            ) {
                let g_out = l2_normalize_backward(&cache.out, &g, eps);
                mlp.backward(x, cache, &g_out, gm);
            }
            let g_out = l2_normalize_backward(&entry.structural.out, &g, eps);
            let g_in = params.mlp_struct.backward(
                struct_in,
                &entry.structural,
                &g_out,
                &mut grads.mlp_struct,
            );
            let table = match item {
                Item::Entity(e) => grads.entity_struct.row_mut(e.index()),
                Item::Relation(r) => grads.relation_struct.row_mut(r.index()),
                Item::Type(t) => grads.type_struct.row_mut(t.index()),
            };
            axpy(F::one(), &g_in, table);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{Direction, KnowledgeGraphBuilder, Split};
    use crate::model::params::{Mlp, SkaParams, TextTables};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_mlp() -> Mlp<f64> {
        // identity for inputs above -10: the shift keeps ELU in its linear part
        Mlp {
            w1: DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            b1: DenseMatrix::from_rows(&[vec![10.0, 10.0]]).unwrap(),
            w2: DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            b2: DenseMatrix::from_rows(&[vec![-10.0, -10.0]]).unwrap(),
        }
    }

    /// Fused embeddings equal the normalised rows, or twice that when
    /// `doubled` copies the rows into the text tables as well.
    fn fixture_model(
        graph: &KnowledgeGraph,
        ent: &[[f64; 2]],
        rel: &[[f64; 2]],
        typ: &[[f64; 2]],
        doubled: bool,
    ) -> SkaModel<f64> {
        let table = |rows: &[[f64; 2]]| DenseMatrix::from_fn(rows.len(), 2, |i, j| rows[i][j]);
        let text = doubled.then(|| TextTables {
            entity: table(ent),
            relation: table(rel),
            type_: table(typ),
        });
        SkaModel {
            text,
            params: SkaParams {
                entity_struct: table(ent),
                relation_struct: table(rel),
                type_struct: table(typ),
                mlp_text: doubled.then(identity_mlp),
                mlp_struct: identity_mlp(),
                cls_weight: DenseMatrix::zeros(graph.num_types(), 2),
                cls_bias: DenseMatrix::zeros(1, graph.num_types()),
            },
            temps: vec![1.0],
            hops: 2,
            norm_eps: 1e-12,
        }
    }

    fn identity_model(
        graph: &KnowledgeGraph,
        ent: &[[f64; 2]],
        rel: &[[f64; 2]],
        typ: &[[f64; 2]],
    ) -> SkaModel<f64> {
        fixture_model(graph, ent, rel, typ, false)
    }

    #[test]
    fn single_neighbor_and_type_closed_form() {
        // ẽ = (2,0), r = (0,2), t = (0,0) → ((2,-2) + (0,0)) / 2
        let mut b = KnowledgeGraphBuilder::new();
        let e = b.add_entity("e", "e", "").unwrap();
        let n = b.add_entity("n", "n", "").unwrap();
        let r = b.add_relation("r", "r").unwrap();
        let t = b.add_type("t", "t").unwrap();
        b.add_triple(e, r, n).unwrap();
        b.add_assertion(e, t, Split::Train).unwrap();
        let g = b.build();
        let m = fixture_model(
            &g,
            &[[0.0, 1.0], [1.0, 0.0]],
            &[[0.0, 1.0]],
            &[[0.0, 0.0]],
            true,
        );
        let mut f = m.forward(&g);
        assert_eq!(f.fused(Item::Entity(n)), &[2.0, 0.0]);
        let v = f.agg_entity(e, 1).to_vec();
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn fusion_of_text_and_structure() {
        // text (3,4) and structural (0,1) → (0.6, 1.8)
        let mut b = KnowledgeGraphBuilder::new();
        let e = b.add_entity("e", "e", "").unwrap();
        let g = b.build();
        let mut m = fixture_model(&g, &[[0.0, 1.0]], &[], &[], true);
        m.text.as_mut().unwrap().entity = DenseMatrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let mut f = m.forward(&g);
        let v = f.fused(Item::Entity(e)).to_vec();
        assert_abs_diff_eq!(v[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 1.8, epsilon = 1e-12);

        // zero structural row: the guard leaves only the text half
        m.params.entity_struct = DenseMatrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let mut f = m.forward(&g);
        let v = f.fused(Item::Entity(e)).to_vec();
        assert_abs_diff_eq!(v[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 0.8, epsilon = 1e-12);
    }

    #[test]
    fn second_hop_matches_hand_expansion() {
        // chain e -> n with one type on n, expanded by hand
        let mut b = KnowledgeGraphBuilder::new();
        let e = b.add_entity("e", "e", "").unwrap();
        let n = b.add_entity("n", "n", "").unwrap();
        let r = b.add_relation("r", "r").unwrap();
        let t = b.add_type("t", "t").unwrap();
        b.add_triple(e, r, n).unwrap();
        b.add_assertion(n, t, Split::Train).unwrap();
        let g = b.build();
        let m = identity_model(&g, &[[1.0, 0.0], [0.0, 1.0]], &[[0.6, 0.8]], &[[0.8, -0.6]]);
        let mut f = m.forward(&g);
        // f_agg^(1)(n) = ((e + r) + t) / 2 since n sees e through the inverse edge
        let expected_agg: Vec<f64> = (0..2)
            .map(|j| ([1.0, 0.0][j] + [0.6, 0.8][j] + [0.8, -0.6][j]) / 2.0)
            .collect();
        let view = f.multi_hop_view(edge(0, Direction::Forward, 1), 2);
        for j in 0..2 {
            assert_abs_diff_eq!(view[j], expected_agg[j] - [0.6, 0.8][j], epsilon = 1e-12);
        }
    }

    fn edge(r: u32, d: Direction, n: u32) -> NeighborEdge {
        NeighborEdge {
            relation: RelationId(r),
            direction: d,
            neighbor: EntityId(n),
        }
    }

    #[test]
    fn one_hop_view_signs() {
        let mut b = KnowledgeGraphBuilder::new();
        let a = b.add_entity("a", "a", "").unwrap();
        let n = b.add_entity("n", "n", "").unwrap();
        let r = b.add_relation("r", "r").unwrap();
        b.add_triple(a, r, n).unwrap();
        let g = b.build();
        let m = identity_model(&g, &[[0.0, 1.0], [1.0, 0.0]], &[[0.0, 1.0]], &[]);
        let mut f = m.forward(&g);
        let fwd = f.one_hop_view(edge(0, Direction::Forward, 1));
        let inv = f.one_hop_view(edge(0, Direction::Inverse, 1));
        assert_abs_diff_eq!(fwd[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fwd[1], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(inv[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(inv[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn isolated_entity_with_one_type_aggregates_to_type() {
        let mut b = KnowledgeGraphBuilder::new();
        let a = b.add_entity("a", "a", "").unwrap();
        let lonely = b.add_entity("z", "z", "").unwrap();
        let t = b.add_type("t", "t").unwrap();
        b.add_assertion(a, t, Split::Train).unwrap();
        let g = b.build();
        let m = identity_model(&g, &[[1.0, 0.0], [0.0, 1.0]], &[], &[[0.6, 0.8]]);
        let mut f = m.forward(&g);
        let v = f.agg_entity(a, 1).to_vec();
        assert_abs_diff_eq!(v[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 0.8, epsilon = 1e-12);
        // no edges, no types: own embedding
        let own = f.agg_entity(lonely, 1).to_vec();
        assert_abs_diff_eq!(own[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn build_views_counts_and_determinism() {
        let mut b = KnowledgeGraphBuilder::new();
        let hub = b.add_entity("h", "h", "").unwrap();
        let r = b.add_relation("r", "r").unwrap();
        for i in 0..5 {
            let e = b.add_entity(&format!("e{i}"), "e", "").unwrap();
            b.add_triple(hub, r, e).unwrap();
        }
        for i in 0..3 {
            let t = b.add_type(&format!("t{i}"), "t").unwrap();
            b.add_assertion(hub, t, Split::Train).unwrap();
        }
        let g = b.build();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let infer = Sampling {
            hops: 2,
            triples: 1,
            types: 0,
        };
        let plan = build_views(&g, hub, infer, Mode::Infer, &mut rng).unwrap();
        assert_eq!(plan.rows.len(), 13);

        let train = build_views(&g, hub, infer, Mode::Train, &mut rng).unwrap();
        assert_eq!(train.rows.len(), 2);

        let s = Sampling {
            hops: 2,
            triples: 3,
            types: 2,
        };
        let a = build_views(&g, hub, s, Mode::Train, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let bb = build_views(&g, hub, s, Mode::Train, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, bb);
        assert_eq!(a.rows.len(), 8);
    }

    #[test]
    fn no_evidence_is_error_then_fallback() {
        let mut b = KnowledgeGraphBuilder::new();
        let a = b.add_entity("a", "a", "").unwrap();
        let g = b.build();
        let s = Sampling {
            hops: 2,
            triples: 7,
            types: 3,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            build_views(&g, a, s, Mode::Infer, &mut rng),
            Err(Error::NoEvidence(0))
        ));
        let plan = build_views_or_own(&g, a, s, Mode::Infer, &mut rng).unwrap();
        assert_eq!(plan.rows, vec![RowSource::Own]);
    }

    #[test]
    fn classify_zero_weights_is_half() {
        let mut b = KnowledgeGraphBuilder::new();
        let a = b.add_entity("a", "a", "").unwrap();
        for i in 0..3 {
            b.add_type(&format!("t{i}"), "t").unwrap();
        }
        b.add_assertion(a, crate::kg::TypeId(0), Split::Train)
            .unwrap();
        let g = b.build();
        let m = identity_model(
            &g,
            &[[1.0, 0.0]],
            &[],
            &[[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]],
        );
        let mut f = m.forward(&g);
        let plan = ViewPlan {
            entity: a,
            rows: vec![RowSource::KnownType(crate::kg::TypeId(0))],
        };
        let views = f.materialize(&plan);
        let c = f.classify(&views).unwrap();
        assert!(c.probs.iter().all(|&p| p == 0.5));

        let mut m2 = m.clone();
        m2.params.cls_bias.set(0, 1, 20.0);
        let mut f2 = m2.forward(&g);
        let views = f2.materialize(&plan);
        let c = f2.classify(&views).unwrap();
        assert!(c.probs[1] > 0.999);
    }
}
