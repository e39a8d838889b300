//! Transitive closure of finite indexed relations, computed two ways: by
//! Warshall's algorithm, and as the union of the iterated compositions
//! `R, R;R, R;R;R, ...`. On finite relations the two coincide.

use std::collections::{BTreeMap, BTreeSet};

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use super::{Universe, UniverseRelation};
use crate::bisim::Relation;
use crate::syntax::{Context, SortId, Term};

fn warshall(rows: &mut [FixedBitSet]) {
    for k in 0..rows.len() {
        let via = rows[k].clone();
        for row in rows.iter_mut() {
            if row.contains(k) {
                row.union_with(&via);
            }
        }
    }
}

fn compose(left: &[FixedBitSet], right: &[FixedBitSet]) -> Vec<FixedBitSet> {
    left.iter()
        .map(|row| {
            let mut out = FixedBitSet::with_capacity(row.len());
            for mid in row.ones() {
                out.union_with(&right[mid]);
            }
            out
        })
        .collect()
}

fn union_of_powers(rows: &[FixedBitSet]) -> Vec<FixedBitSet> {
    let mut acc = rows.to_vec();
    let mut power = rows.to_vec();
    loop {
        power = compose(&power, rows);
        let mut grew = false;
        for (a, p) in acc.iter_mut().zip(&power) {
            if !p.is_subset(a) {
                a.union_with(p);
                grew = true;
            }
        }
        if !grew {
            return acc;
        }
    }
}

/// Interns the terms of each index of a relation.
struct Dense {
    keys: Vec<(SortId, Context)>,
    terms: Vec<Vec<Term>>,
    rows: Vec<Vec<FixedBitSet>>,
}

impl Dense {
    fn new(rel: &Relation) -> Self {
        let mut keys = Vec::new();
        let mut terms = Vec::new();
        let mut rows = Vec::new();
        for (sort, ctx) in rel.indices() {
            let carrier: BTreeSet<&Term> = rel.at(*sort, ctx).flat_map(|(a, b)| [a, b]).collect();
            let carrier: Vec<Term> = carrier.into_iter().cloned().collect();
            let pos: BTreeMap<&Term, usize> = carrier.iter().enumerate().map(|(i, t)| (t, i)).collect();
            let mut r = vec![FixedBitSet::with_capacity(carrier.len()); carrier.len()];
            for (a, b) in rel.at(*sort, ctx) {
                r[pos[a]].insert(pos[b]);
            }
            keys.push((*sort, ctx.clone()));
            rows.push(r);
            terms.push(carrier);
        }
        Dense { keys, terms, rows }
    }

    fn into_relation(self) -> Relation {
        let mut out = Relation::new();
        for (((sort, ctx), terms), rows) in self.keys.iter().zip(&self.terms).zip(&self.rows) {
            for (a, row) in rows.iter().enumerate() {
                for b in row.ones() {
                    out.insert(*sort, ctx, terms[a].clone(), terms[b].clone());
                }
            }
        }
        out
    }
}

/// The least transitive relation containing `rel`.
pub fn transitive_closure(rel: &Relation) -> Relation {
    let mut d = Dense::new(rel);
    d.rows.iter_mut().for_each(|r| warshall(r));
    d.into_relation()
}

/// `⋃_{n>0} Rⁿ`, the closure built from iterated composition.
pub fn relational_transitive_closure(rel: &Relation) -> Relation {
    let mut d = Dense::new(rel);
    for r in d.rows.iter_mut() {
        *r = union_of_powers(r);
    }
    d.into_relation()
}

impl UniverseRelation {
    pub fn transitive_closure(&self, u: &Universe) -> UniverseRelation {
        let mut out = self.clone();
        for ix in u.indices() {
            warshall(out.rows_mut(ix));
        }
        out
    }

    pub fn relational_transitive_closure(&self, u: &Universe) -> UniverseRelation {
        let mut out = self.clone();
        for ix in u.indices() {
            *out.rows_mut(ix) = union_of_powers(self.rows(ix));
        }
        out
    }
}

/// A pair whose converse is missing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Asymmetry {
    pub sort: SortId,
    pub ctx: Context,
    pub left: Term,
    pub right: Term,
    /// Pairs of the relation without their converse.
    pub total: usize,
}

/// `Ok` iff the relation is symmetric; otherwise the first pair `(a, b)`
/// without `(b, a)`.
pub fn symmetry_check(rel: &Relation) -> Result<(), Asymmetry> {
    let missing: Vec<_> = rel.iter().filter(|(s, c, a, b)| !rel.contains(*s, c, b, a)).collect();
    match missing.first() {
        None => Ok(()),
        Some((sort, ctx, a, b)) => Err(Asymmetry {
            sort: *sort,
            ctx: (*ctx).clone(),
            left: (*a).clone(),
            right: (*b).clone(),
            total: missing.len(),
        }),
    }
}

/// [`symmetry_check`] on a universe relation.
pub fn universe_symmetry_check(u: &Universe, r: &UniverseRelation) -> Result<(), Asymmetry> {
    let conv = r.converse();
    let missing: Vec<_> = r.pairs().filter(|&(ix, a, b)| !conv.contains(ix, a, b)).collect();
    match missing.first() {
        None => Ok(()),
        Some(&(ix, a, b)) => Err(Asymmetry {
            sort: u.sort(ix),
            ctx: u.ctx(ix).clone(),
            left: u.term(ix, a).clone(),
            right: u.term(ix, b).clone(),
            total: missing.len(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: SortId = SortId(0);

    fn t(i: u32) -> Term {
        Term::var(P, i)
    }

    fn rel(pairs: &[(u32, u32)]) -> Relation {
        let ctx = Context::from_counts(vec![9]);
        let mut r = Relation::new();
        for &(a, b) in pairs {
            r.insert(P, &ctx, t(a), t(b));
        }
        r
    }

    #[test]
    fn chain_gains_its_shortcut() {
        let r = rel(&[(1, 2), (2, 3)]);
        assert_eq!(transitive_closure(&r), rel(&[(1, 2), (2, 3), (1, 3)]));
        assert_eq!(relational_transitive_closure(&r), transitive_closure(&r));
    }

    #[test]
    fn transitive_relation_is_fixed() {
        let r = rel(&[(1, 2), (2, 3), (1, 3), (4, 4)]);
        assert_eq!(transitive_closure(&r), r);
    }

    #[test]
    fn cycles_close_up() {
        let r = rel(&[(1, 2), (2, 1)]);
        assert_eq!(transitive_closure(&r), rel(&[(1, 2), (2, 1), (1, 1), (2, 2)]));
    }

    #[test]
    fn symmetry() {
        assert!(symmetry_check(&rel(&[(1, 1), (2, 2)])).is_ok());
        let e = symmetry_check(&rel(&[(1, 2)])).unwrap_err();
        assert_eq!((e.left, e.right, e.total), (t(1), t(2), 1));
    }
}
