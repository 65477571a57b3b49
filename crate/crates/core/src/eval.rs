//! Filtered ranking metrics over test type assertions.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::kg::{EntityId, TypeAssertion, TypeId};

/// Rank of `target` among the types not in `known` (the target itself is
/// never filtered). Ties count against the target: every other unfiltered
/// type scoring at least as high is ranked ahead of it.
pub fn filtered_rank(scores: &[f32], target: TypeId, known: &HashSet<TypeId>) -> Result<usize> {
    let t = target.index();
    let Some(&s) = scores.get(t) else {
        return Err(Error::InvalidId {
            kind: TypeId::KIND,
            id: t,
            size: scores.len(),
        });
    };
    let ahead = scores
        .iter()
        .enumerate()
        .filter(|&(j, &v)| j != t && v >= s && !known.contains(&TypeId::from(j)))
        .count();
    Ok(ahead + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub ranks: Vec<usize>,
    pub hit1: f64,
    pub hit3: f64,
    pub hit10: f64,
    pub mr: f64,
    pub mrr: f64,
}

impl RankingReport {
    pub fn from_ranks(ranks: Vec<usize>) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::Config("no test assertions to evaluate".into()));
        }
        let n = ranks.len() as f64;
        let hits = |k: usize| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
        Ok(RankingReport {
            hit1: hits(1),
            hit3: hits(3),
            hit10: hits(10),
            mr: ranks.iter().map(|&r| r as f64).sum::<f64>() / n,
            mrr: ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n,
            ranks,
        })
    }

    pub fn key_values(&self) -> String {
        let mut s = String::new();
        writeln!(s, "assertions = {}", self.ranks.len()).unwrap();
        writeln!(s, "hit@1 = {:.6}", self.hit1).unwrap();
        writeln!(s, "hit@3 = {:.6}", self.hit3).unwrap();
        writeln!(s, "hit@10 = {:.6}", self.hit10).unwrap();
        writeln!(s, "mr = {:.6}", self.mr).unwrap();
        writeln!(s, "mrr = {:.6}", self.mrr).unwrap();
        s
    }

    /// `hit1\thit3\thit10\tmr\tmrr`
    pub fn tsv_line(&self) -> String {
        format!(
            "{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            self.hit1, self.hit3, self.hit10, self.mr, self.mrr
        )
    }
}

/// Evaluate `test` assertions against per-entity score rows.
///
/// `all_known[e]` holds every type asserted for `e` in any split.
pub fn evaluate<S>(
    scores: S,
    test: &[TypeAssertion],
    all_known: &[HashSet<TypeId>],
) -> Result<RankingReport>
where
    S: Fn(EntityId) -> Option<Vec<f32>>,
{
    let empty = HashSet::new();
    let mut ranks = Vec::with_capacity(test.len());
    let mut cached: Option<(EntityId, Vec<f32>)> = None;
    for a in test {
        let row = match &cached {
            Some((e, row)) if *e == a.entity => row,
            _ => {
                let row = scores(a.entity).ok_or(Error::MissingRow(a.entity.index()))?;
                &cached.insert((a.entity, row)).1
            }
        };
        let known = all_known.get(a.entity.index()).unwrap_or(&empty);
        ranks.push(filtered_rank(row, a.type_, known)?);
    }
    RankingReport::from_ranks(ranks)
}
