#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sset_core::io::ProbabilityTable;
use sset_core::model::Item;
use sset_core::model::{build_views_or_own, Example, Mlp, Mode, Sampling, SkaModel};
use sset_core::numerics::DenseMatrix;
use sset_core::synthetic::random_graph;
use sset_core::synthetic::{random_text_tables, toy_graph};
use sset_core::{Direction, EntityId, KnowledgeGraph, NeighborEdge, TrainConfig};

/// Small dimensions and two heads on top of the default preset.
pub fn toy_config() -> TrainConfig {
    TrainConfig {
        temps: vec![1.0, 2.0],
        hops: 2,
        struct_dim: 3,
        dim: 4,
        lr: 1e-2,
        lr_decay_interval: 0,
        batch_size: 2,
        epochs: 4,
        seed: 11,
        ..TrainConfig::fb15ket()
    }
}

pub fn toy_model(seed: u64, with_text: bool) -> (KnowledgeGraph, SkaModel<f64>) {
    let g = toy_graph();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let text = with_text.then(|| random_text_tables::<f64, _>(&g, 3, &mut rng));
    let model = SkaModel::init(&g, text, &toy_config(), &mut rng).unwrap();
    (g, model)
}

pub fn random_teacher(graph: &KnowledgeGraph, seed: u64) -> ProbabilityTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..graph.num_entities() * graph.num_types())
        .map(|_| rng.random_range(0.05f32..0.95))
        .collect();
    ProbabilityTable::dense(graph.num_entities(), graph.num_types(), data).unwrap()
}

/// Every entity in inference layout, with teacher rows.
pub fn full_batch(
    graph: &KnowledgeGraph,
    hops: usize,
    teacher: &ProbabilityTable,
) -> Vec<Example<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let sampling = Sampling {
        hops,
        triples: 0,
        types: 0,
    };
    (0..graph.num_entities())
        .map(|i| {
            let e = EntityId::from(i);
            Example {
                plan: build_views_or_own(graph, e, sampling, Mode::Infer, &mut rng).unwrap(),
                teacher: teacher
                    .row(e, 0.0)
                    .map(|r| r.into_iter().map(f64::from).collect()),
            }
        })
        .collect()
}

/// `W2 · elu(W1 x + b1) + b2`, written out by hand.
pub fn naive_mlp(m: &Mlp<f64>, x: &[f64]) -> Vec<f64> {
    let affine = |w: &DenseMatrix<f64>, b: &DenseMatrix<f64>, v: &[f64]| -> Vec<f64> {
        (0..w.rows())
            .map(|i| b.get(0, i) + (0..w.cols()).map(|j| w.get(i, j) * v[j]).sum::<f64>())
            .collect()
    };
    let h: Vec<f64> = affine(&m.w1, &m.b1, x)
        .into_iter()
        .map(|v| if v > 0.0 { v } else { v.exp() - 1.0 })
        .collect();
    affine(&m.w2, &m.b2, &h)
}

fn unit(v: Vec<f64>, eps: f64) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(eps);
    v.into_iter().map(|x| x / n).collect()
}

/// Fused embedding recomputed from the parameters, without any memo.
pub fn naive_fused(
    model: &SkaModel<f64>,
    struct_row: &[f64],
    text_row: Option<&[f64]>,
) -> Vec<f64> {
    let eps = model.norm_eps;
    let mut out = unit(naive_mlp(&model.params.mlp_struct, struct_row), eps);
    if let (Some(mlp), Some(x)) = (&model.params.mlp_text, text_row) {
        for (o, v) in out.iter_mut().zip(unit(naive_mlp(mlp, x), eps)) {
            *o += v;
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// 200 entities, 5 relations, 10 relation-determined types, 20% held out.
pub fn smoke_graph() -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    sset_core::synthetic::relation_typed_graph(200, 5, 600, 0.2, &mut rng)
}

/// Structural-only, no distillation. Small embeddings keep the model from
/// memorising the held-out types, which it only ever sees as negatives.
pub fn smoke_config() -> TrainConfig {
    TrainConfig {
        lambda: 1.0,
        temps: vec![1.0],
        hops: 3,
        sample_triples: 7,
        sample_types: 2,
        struct_dim: 8,
        dim: 8,
        lr: 1e-2,
        lr_decay_interval: 50,
        batch_size: 64,
        epochs: 200,
        seed: 5,
        kd_enabled: false,
        ..TrainConfig::fb15ket()
    }
}

pub fn fused_of(model: &SkaModel<f64>, item: Item) -> Vec<f64> {
    let p = &model.params;
    let (s, t) = match item {
        Item::Entity(e) => (
            p.entity_struct.row(e.index()),
            model.text.as_ref().map(|t| t.entity.row(e.index())),
        ),
        Item::Relation(r) => (
            p.relation_struct.row(r.index()),
            model.text.as_ref().map(|t| t.relation.row(r.index())),
        ),
        Item::Type(x) => (
            p.type_struct.row(x.index()),
            model.text.as_ref().map(|t| t.type_.row(x.index())),
        ),
    };
    naive_fused(model, s, t)
}

/// Direct recursive expansion with no sharing between calls.
pub fn naive_agg(model: &SkaModel<f64>, g: &KnowledgeGraph, e: EntityId, k: usize) -> Vec<f64> {
    let own = fused_of(model, Item::Entity(e));
    if k == 0 {
        return own;
    }
    let edges = g.neighbors(e).unwrap();
    let types = g.known_types(e).unwrap();
    if edges.is_empty() && types.is_empty() {
        return own;
    }
    let mut acc = vec![0.0; own.len()];
    for edge in edges {
        let view = naive_hop(model, g, *edge, k);
        acc.iter_mut().zip(view).for_each(|(a, v)| *a += v);
    }
    for &t in types {
        acc.iter_mut()
            .zip(fused_of(model, Item::Type(t)))
            .for_each(|(a, v)| *a += v);
    }
    let n = (edges.len() + types.len()) as f64;
    acc.into_iter().map(|v| v / n).collect()
}

pub fn naive_hop(
    model: &SkaModel<f64>,
    g: &KnowledgeGraph,
    edge: NeighborEdge,
    k: usize,
) -> Vec<f64> {
    let r = fused_of(model, Item::Relation(edge.relation));
    let sign = match edge.direction {
        Direction::Forward => 1.0,
        Direction::Inverse => -1.0,
    };
    naive_agg(model, g, edge.neighbor, k - 1)
        .into_iter()
        .zip(r)
        .map(|(a, b)| a - sign * b)
        .collect()
}

pub fn random_setup(seed: u64) -> (KnowledgeGraph, SkaModel<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ne = rng.random_range(2..=8);
    let nr = rng.random_range(1..=3);
    let nt = rng.random_range(1..=4);
    let nedges = rng.random_range(0..=12);
    let g = random_graph(ne, nr, nt, nedges, 0.3, &mut rng);
    let text = rng
        .random_bool(0.5)
        .then(|| random_text_tables::<f64, _>(&g, 3, &mut rng));
    let model = SkaModel::init(&g, text, &toy_config(), &mut rng).unwrap();
    (g, model)
}
