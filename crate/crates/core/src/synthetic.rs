//! Seeded synthetic graphs for tests, benchmarks and the CLI smoke path.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::kg::{EntityId, KnowledgeGraph, KnowledgeGraphBuilder, RelationId, Split, TypeId};
use crate::model::TextTables;
use crate::numerics::{DenseMatrix, Real};

/// A graph whose types are a function of its structure: an entity has type
/// `2r` when it is the subject of some `r`-triple and `2r + 1` when it is
/// the object of one. A `holdout` fraction of the assertions goes to the
/// test split, the rest to train.
pub fn relation_typed_graph<R: Rng + ?Sized>(
    num_entities: usize,
    num_relations: usize,
    num_triples: usize,
    holdout: f64,
    rng: &mut R,
) -> KnowledgeGraph {
    assert!(num_entities >= 2, "need at least two entities");
    let mut b = KnowledgeGraphBuilder::new();
    for i in 0..num_entities {
        b.add_entity(&format!("e{i}"), &format!("entity {i}"), "")
            .unwrap();
    }
    for r in 0..num_relations {
        b.add_relation(&format!("r{r}"), &format!("relation {r}"))
            .unwrap();
    }
    for r in 0..num_relations {
        b.add_type(&format!("t{}", 2 * r), &format!("subject of r{r}"))
            .unwrap();
        b.add_type(&format!("t{}", 2 * r + 1), &format!("object of r{r}"))
            .unwrap();
    }
    let mut types = vec![std::collections::BTreeSet::new(); num_entities];
    let mut added = 0;
    let max = num_entities * (num_entities - 1) * num_relations;
    while added < num_triples.min(max) {
        let s = rng.random_range(0..num_entities);
        let o = rng.random_range(0..num_entities);
        let r = rng.random_range(0..num_relations);
        if s == o {
            continue;
        }
        if b.add_triple(EntityId::from(s), RelationId::from(r), EntityId::from(o))
            .is_ok()
        {
            types[s].insert(2 * r);
            types[o].insert(2 * r + 1);
            added += 1;
        }
    }
    for (e, ts) in types.iter().enumerate() {
        for &t in ts {
            let split = if rng.random_bool(holdout) {
                Split::Test
            } else {
                Split::Train
            };
            b.add_assertion(EntityId::from(e), TypeId::from(t), split)
                .unwrap();
        }
    }
    b.build()
}

/// Uniform random multigraph-free graph with random type assertions,
/// including isolated entities when `num_triples` is small.
pub fn random_graph<R: Rng + ?Sized>(
    num_entities: usize,
    num_relations: usize,
    num_types: usize,
    num_triples: usize,
    assertion_prob: f64,
    rng: &mut R,
) -> KnowledgeGraph {
    let mut b = KnowledgeGraphBuilder::new();
    for i in 0..num_entities {
        b.add_entity(&format!("e{i}"), "", "").unwrap();
    }
    for r in 0..num_relations {
        b.add_relation(&format!("r{r}"), "").unwrap();
    }
    for t in 0..num_types {
        b.add_type(&format!("t{t}"), "").unwrap();
    }
    // self-loops allowed; duplicates are simply skipped
    for _ in 0..num_triples {
        let s = EntityId::from(rng.random_range(0..num_entities));
        let o = EntityId::from(rng.random_range(0..num_entities));
        let r = RelationId::from(rng.random_range(0..num_relations));
        let _ = b.add_triple(s, r, o);
    }
    for e in 0..num_entities {
        for t in 0..num_types {
            if rng.random_bool(assertion_prob) {
                let split = match rng.random_range(0..3) {
                    0 => Split::Test,
                    _ => Split::Train,
                };
                b.add_assertion(EntityId::from(e), TypeId::from(t), split)
                    .unwrap();
            }
        }
    }
    b.build()
}

/// The 5-entity, 3-relation, 4-type toy graph.
///
/// ```text
/// e0 -r0-> e1   e1 -r1-> e2   e2 -r2-> e0   e3 -r0-> e3   e4 isolated
/// train: e0:{t0,t2} e1:{t1} e2:{t3} e3:{t0}
/// test:  e1:{t2} e2:{t0} e4:{t1}
/// ```
pub fn toy_graph() -> KnowledgeGraph {
    let mut b = KnowledgeGraphBuilder::new();
    for i in 0..5 {
        b.add_entity(&format!("e{i}"), &format!("entity {i}"), "")
            .unwrap();
    }
    for r in 0..3 {
        b.add_relation(&format!("r{r}"), "").unwrap();
    }
    for t in 0..4 {
        b.add_type(&format!("t{t}"), "").unwrap();
    }
    for (s, r, o) in [(0, 0, 1), (1, 1, 2), (2, 2, 0), (3, 0, 3)] {
        b.add_triple(EntityId(s), RelationId(r), EntityId(o))
            .unwrap();
    }
    let train = [(0, 0), (0, 2), (1, 1), (2, 3), (3, 0)];
    let test = [(1, 2), (2, 0), (4, 1)];
    for (list, split) in [(&train[..], Split::Train), (&test[..], Split::Test)] {
        for &(e, t) in list {
            b.add_assertion(EntityId(e), TypeId(t), split).unwrap();
        }
    }
    b.build()
}

/// Standard-normal text tables sized for `graph`.
pub fn random_text_tables<F: Real, R: Rng + ?Sized>(
    graph: &KnowledgeGraph,
    dim: usize,
    rng: &mut R,
) -> TextTables<F> {
    let mut table = |rows: usize| {
        DenseMatrix::from_fn(rows, dim, |_, _| {
            let x: f64 = StandardNormal.sample(&mut *rng);
            F::c(x)
        })
    };
    TextTables {
        entity: table(graph.num_entities()),
        relation: table(graph.num_relations()),
        type_: table(graph.num_types()),
    }
}

/// Random dense rows in `(0, 1)`, one per entity.
pub fn random_probabilities<R: Rng + ?Sized>(
    num_entities: usize,
    num_types: usize,
    rng: &mut R,
) -> Vec<Vec<f32>> {
    (0..num_entities)
        .map(|_| {
            (0..num_types)
                .map(|_| rng.random_range(0.01f32..0.99))
                .collect()
        })
        .collect()
}
