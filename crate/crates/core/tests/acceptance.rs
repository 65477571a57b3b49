//! One line per acceptance criterion. Exits non-zero if any criterion fails.

mod common;

use std::collections::HashSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::{
    full_batch, max_abs_diff, naive_agg, naive_hop, random_setup, random_teacher, smoke_config,
    smoke_graph, toy_config, toy_model,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sset_core::io::{
    read_checkpoint_from, write_checkpoint_to, EmbeddingKind, ProbabilityTable, TextEmbeddingFile,
    CHECKPOINT_VERSION, EMBEDDING_VERSION, PROB_VERSION,
};
use sset_core::model::{reweight, ska_gradient_check, train, ProbabilityRow, TrainState};
use sset_core::numerics::{csra_pool, DenseMatrix};
use sset_core::rerank::{candidate_pool, rerank_values};
use sset_core::synthetic::random_text_tables;
use sset_core::{
    evaluate, filtered_rank, load_dataset, DatasetManifest, EntityId, Error, LossSign,
    RerankConfig, Split, TrainConfig, Trainer, TypeAssertion, TypeId,
};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn reweight_function() -> Outcome {
    let f0 = reweight(0.0).unwrap();
    let f1 = reweight(1.0).unwrap();
    let mid = reweight(0.5).unwrap();
    // both closed forms evaluated at the branch point
    let x = 0.5f64;
    let left = 3.0 * x - 2.0 * x * x;
    let right = x - 2.0 * x * x + 1.0;
    let below = reweight(0.5f64.next_down()).unwrap();
    let above = reweight(0.5f64.next_up()).unwrap();
    let jump = (mid - below).abs().max((above - mid).abs());
    let steps = 100_000;
    let argmax = (0..=steps)
        .map(|i| i as f64 / steps as f64)
        .max_by(|a, b| reweight(*a).unwrap().total_cmp(&reweight(*b).unwrap()))
        .unwrap();
    check(
        f0 == 0.0
            && f1 == 0.0
            && mid == 1.0
            && left == 1.0
            && right == 1.0
            && jump < 1e-12
            && argmax == 0.5,
        format!("f(0)={f0} f(1)={f1} f(0.5)={mid} jump={jump:.1e} argmax={argmax}"),
    )
}

fn csra_limits() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut worst_max, mut worst_mean) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let rows = rng.random_range(1..=10);
        let cols = rng.random_range(1..=20);
        let s = DenseMatrix::<f64>::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        let hot = csra_pool(&s, &[1e4]).unwrap();
        let flat = csra_pool(&s, &[0.0]).unwrap();
        for j in 0..cols {
            let col: Vec<f64> = (0..rows).map(|i| s.get(i, j)).collect();
            let mean = col.iter().sum::<f64>() / rows as f64;
            let max = col.iter().cloned().fold(f64::MIN, f64::max);
            // pooled logit is s_T + mean for a single head
            worst_max = worst_max.max((hot[j] - mean - max).abs());
            worst_mean = worst_mean.max((flat[j] - mean - mean).abs());
        }
    }
    check(
        worst_max < 1e-5 && worst_mean < 1e-7,
        format!("T=1e4 max dev {worst_max:.2e}, T=0 mean dev {worst_mean:.2e}"),
    )
}

fn gradient_correctness() -> Outcome {
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for with_text in [true, false] {
        let (g, model) = toy_model(3, with_text);
        if model.hops != 2 || model.temps.len() != 2 {
            return Err("toy model is not K=2, H=2".into());
        }
        let teacher = random_teacher(&g, 4);
        let batch = full_batch(&g, model.hops, &teacher);
        for lambda in [0.0, 0.5, 1.0] {
            let r =
                ska_gradient_check(&model, &g, &batch, lambda, LossSign::NegLogLikelihood, 1e-5)
                    .map_err(|e| e.to_string())?;
            worst = worst.max(r.max_rel_error);
            details.push(format!("{:.1e}", r.max_rel_error));
        }
    }
    check(
        worst < 1e-4,
        format!(
            "max rel error {worst:.2e} over lambda 0/0.5/1 x text on/off [{}]",
            details.join(" ")
        ),
    )
}

fn aggregation_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut compared = 0;
    for seed in 0..50 {
        let (g, model) = random_setup(seed);
        if g.num_entities() > 8 {
            return Err(format!("graph {seed} has {} entities", g.num_entities()));
        }
        let mut fwd = model.forward(&g);
        for i in 0..g.num_entities() {
            let e = EntityId::from(i);
            for k in 1..=3 {
                worst = worst.max(max_abs_diff(
                    fwd.agg_entity(e, k),
                    &naive_agg(&model, &g, e, k),
                ));
                compared += 1;
            }
            for &edge in g.neighbors(e).unwrap() {
                for k in 1..=3 {
                    worst = worst.max(max_abs_diff(
                        &fwd.multi_hop_view(edge, k),
                        &naive_hop(&model, &g, edge, k),
                    ));
                    compared += 1;
                }
            }
        }
    }
    check(
        worst < 1e-6,
        format!("{compared} vectors, max abs diff {worst:.2e}"),
    )
}

fn training_smoke() -> Outcome {
    let g = smoke_graph();
    let cfg = smoke_config();
    let (state, history) = train(&g, None, &cfg, None).map_err(|e| e.to_string())?;
    let entities: Vec<EntityId> = (0..g.num_entities()).map(EntityId::from).collect();
    let rows = state
        .model
        .infer_entities(&g, &entities)
        .map_err(|e| e.to_string())?;
    let report = evaluate(
        |e| Some(rows[e.index()].values.clone()),
        g.assertions(Split::Test),
        &g.all_types_by_entity(),
    )
    .map_err(|e| e.to_string())?;
    check(
        report.hit1 >= 0.9 && history.epochs.len() <= 200 && state.model.text.is_none(),
        format!(
            "{} entities, {} types, {} held out, {} epochs: hit@1 {:.4} mrr {:.4}",
            g.num_entities(),
            g.num_types(),
            g.assertions(Split::Test).len(),
            history.epochs.len(),
            report.hit1,
            report.mrr
        ),
    )
}

fn order(v: &[f32]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx
}

fn rerank_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 50;
    let mut failures = 0;
    for _ in 0..1000 {
        let p: Vec<f32> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        let q: Vec<f32> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        let k = rng.random_range(1..=n);
        let alpha = rng.random_range(0.0..=1.0);
        let z0 = rerank_values(&p, &q, &RerankConfig { alpha: 0.0, k }).unwrap();
        let z1 = rerank_values(&p, &q, &RerankConfig { alpha: 1.0, k: n }).unwrap();
        let z = rerank_values(&p, &q, &RerankConfig { alpha, k }).unwrap();
        let pool: HashSet<usize> = candidate_pool(&q, k).into_iter().collect();
        let outside_ok = (0..n).all(|j| pool.contains(&j) || z[j].to_bits() == q[j].to_bits());
        if order(&z0) != order(&q) || order(&z1) != order(&p) || !outside_ok {
            failures += 1;
        }
    }
    check(
        failures == 0,
        format!("1000 pairs, |T|={n}, {failures} violations"),
    )
}

fn filtered_metrics() -> Outcome {
    // three test assertions built to land at ranks 1, 2 and 4
    let scores = [
        vec![0.9f32, 0.1, 0.2, 0.3],
        vec![0.4, 0.8, 0.6, 0.1],
        vec![0.5, 0.6, 0.7, 0.8, 0.3],
    ];
    let test = [(0, 0), (1, 2), (2, 0)].map(|(e, t)| TypeAssertion {
        entity: EntityId(e),
        type_: TypeId(t),
        split: Split::Test,
    });
    let known = vec![
        HashSet::new(),
        HashSet::from([TypeId(3)]),
        HashSet::from([TypeId(4)]),
    ];
    let report =
        evaluate(|e| scores.get(e.index()).cloned(), &test, &known).map_err(|e| e.to_string())?;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worse = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let s: Vec<f32> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let target = TypeId::from(rng.random_range(0..n));
        let filt: HashSet<TypeId> = (0..n)
            .filter(|_| rng.random_bool(0.3))
            .map(TypeId::from)
            .collect();
        if filtered_rank(&s, target, &filt).unwrap()
            > filtered_rank(&s, target, &HashSet::new()).unwrap()
        {
            worse += 1;
        }
    }
    check(
        report.ranks == [1, 2, 4]
            && (report.mrr - 0.583333).abs() <= 1e-6
            && (report.mr - 2.333333).abs() <= 1e-6
            && (report.hit1 - 0.333333).abs() <= 1e-6
            && worse == 0,
        format!(
            "ranks {:?} mrr {:.6} mr {:.6} hit@1 {:.6}; filtering worsened {worse}/1000",
            report.ranks, report.mrr, report.mr, report.hit1
        ),
    )
}

fn format_roundtrips() -> Outcome {
    let err = |e: Error| e.to_string();
    let bump = |b: &mut Vec<u8>, v: u32| b[8..12].copy_from_slice(&(v + 1).to_le_bytes());

    let g = sset_core::synthetic::toy_graph();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let text = random_text_tables::<f32, _>(&g, 4, &mut rng);
    let cfg = TrainConfig {
        kd_enabled: false,
        epochs: 2,
        ..toy_config()
    };
    let mut state = TrainState::new(&g, Some(text.clone()), &cfg).map_err(err)?;
    Trainer::new(&g, &cfg, None)
        .map_err(err)?
        .run(&mut state, |_| {})
        .map_err(err)?;
    let mut ck = Vec::new();
    write_checkpoint_to(&state, &mut ck).map_err(err)?;
    let back = read_checkpoint_from(&mut ck.as_slice(), "checkpoint").map_err(err)?;
    let mut ck2 = Vec::new();
    write_checkpoint_to(&back, &mut ck2).map_err(err)?;
    let ck_ok = back == state && ck2 == ck;
    bump(&mut ck, CHECKPOINT_VERSION);
    let ck_rej = matches!(
        read_checkpoint_from(&mut ck.as_slice(), "checkpoint"),
        Err(Error::Version { .. })
    );

    let emb = TextEmbeddingFile {
        kind: EmbeddingKind::Entity,
        matrix: text.entity.clone(),
    };
    let mut eb = Vec::new();
    emb.write_to(&mut eb).map_err(err)?;
    let eback = TextEmbeddingFile::read_from(&mut eb.as_slice(), "embedding").map_err(err)?;
    let bits = |m: &DenseMatrix<f32>| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let emb_ok = eback.kind == emb.kind && bits(&eback.matrix) == bits(&emb.matrix);
    bump(&mut eb, EMBEDDING_VERSION);
    let emb_rej = matches!(
        TextEmbeddingFile::read_from(&mut eb.as_slice(), "embedding"),
        Err(Error::Version { .. })
    );

    let rows: Vec<ProbabilityRow> = (0..g.num_entities())
        .map(|e| ProbabilityRow {
            entity: EntityId::from(e),
            values: (0..g.num_types())
                .map(|_| rng.random_range(0.0f32..=1.0))
                .collect(),
        })
        .collect();
    let mut prob_ok = true;
    let mut prob_rej = true;
    for table in [
        ProbabilityTable::dense_from_rows(g.num_entities(), g.num_types(), &rows).map_err(err)?,
        ProbabilityTable::sparse_from_rows(g.num_entities(), g.num_types(), &rows, Some(2))
            .map_err(err)?,
    ] {
        let mut pb = Vec::new();
        table.write_to(&mut pb).map_err(err)?;
        let pback =
            ProbabilityTable::read_from(&mut pb.as_slice(), "probabilities").map_err(err)?;
        let mut pb2 = Vec::new();
        pback.write_to(&mut pb2).map_err(err)?;
        prob_ok &= pback == table && pb2 == pb;
        bump(&mut pb, PROB_VERSION);
        prob_rej &= matches!(
            ProbabilityTable::read_from(&mut pb.as_slice(), "probabilities"),
            Err(Error::Version { .. })
        );
    }
    check(
        ck_ok && ck_rej && emb_ok && emb_rej && prob_ok && prob_rej,
        format!(
            "checkpoint {ck_ok}/{ck_rej} embedding {emb_ok}/{emb_rej} probabilities {prob_ok}/{prob_rej} (roundtrip/version rejected)"
        ),
    )
}

/// `None` when the dataset is not available.
fn dataset_validation() -> Option<Outcome> {
    let dir = PathBuf::from(std::env::var_os("SSET_FB15KET_DIR")?);
    let want = DatasetManifest::fb15ket();
    Some(match load_dataset(&dir, None) {
        Err(e) => Err(e.to_string()),
        Ok(g) => {
            let got = DatasetManifest::of(&g);
            let fields = [
                (got.entities, want.entities),
                (got.relations, want.relations),
                (got.types, want.types),
                (got.triples, want.triples),
                (got.train, want.train),
            ];
            check(
                fields.iter().all(|(a, b)| a == b),
                format!(
                    "|E|={:?} |R|={:?} |T|={:?} triples={:?} train={:?}",
                    got.entities, got.relations, got.types, got.triples, got.train
                ),
            )
        }
    })
}

fn main() {
    type Criterion = (&'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        (
            "reweighting function",
            Duration::from_secs(1),
            reweight_function,
        ),
        ("csra limits", Duration::from_secs(1), csra_limits),
        (
            "gradient correctness",
            Duration::from_secs(30),
            gradient_correctness,
        ),
        (
            "aggregation oracle",
            Duration::from_secs(10),
            aggregation_oracle,
        ),
        ("training smoke", Duration::from_secs(60), training_smoke),
        ("re-ranking algebra", Duration::from_secs(1), rerank_algebra),
        ("filtered metrics", Duration::from_secs(1), filtered_metrics),
        (
            "format roundtrips",
            Duration::from_secs(1),
            format_roundtrips,
        ),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if took <= limit => (true, d),
            Ok(d) => (false, format!("{d}; over time limit {limit:?}")),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {name}: {detail} [{took:.2?} / {limit:?}]",
            if ok { "PASS" } else { "FAIL" }
        );
    }
    match dataset_validation() {
        None => println!("SKIP dataset validation: set SSET_FB15KET_DIR to an FB15kET directory"),
        Some(Ok(d)) => println!("PASS dataset validation: {d}"),
        Some(Err(d)) => {
            failed += 1;
            println!("FAIL dataset validation: {d}");
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
