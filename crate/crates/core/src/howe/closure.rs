//! The Howe closure as a least fixpoint, and the properties that hold of it
//! exactly on a finite universe.
//!
//! `H` is generated by two clauses: `x H e` whenever `x B e`, and
//! `o(ē) H e` whenever some `o(ē')` in the universe has `eᵢ H e'ᵢ` for every
//! argument and `o(ē') B e`.

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use super::{Head, IndexId, TermId, Universe, UniverseRelation};
use crate::syntax::{Context, SortId, Term};

/// Violations kept per check; the count is always exact.
const MAX_EXAMPLES: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HoweClosure {
    pub relation: UniverseRelation,
    /// Size of the relation after each saturation round; the last round
    /// adds nothing.
    pub sizes: Vec<usize>,
}

impl HoweClosure {
    pub fn iterations(&self) -> usize {
        self.sizes.len()
    }
}

/// One application of the generating clauses to `h`.
pub fn howe_step(u: &Universe, b: &UniverseRelation, h: &UniverseRelation) -> UniverseRelation {
    let mut out = UniverseRelation::empty(u);
    for ix in u.indices() {
        let width = u.len(ix);
        let mut rows = vec![FixedBitSet::with_capacity(width); width];
        for (head, members) in u.by_head(ix) {
            for &t in members {
                let row = &mut rows[t.index()];
                if *head == Head::Var {
                    row.union_with(b.row(ix, t));
                    continue;
                }
                let args = &u.node(ix, t).args;
                for &t2 in members {
                    let args2 = &u.node(ix, t2).args;
                    if args
                        .iter()
                        .zip(args2)
                        .all(|(&(aix, a), &(_, a2))| h.contains(aix, a, a2))
                    {
                        row.union_with(b.row(ix, t2));
                    }
                }
            }
        }
        *out.rows_mut(ix) = rows;
    }
    out
}

/// Least fixpoint of [`howe_step`] from the empty relation.
pub fn saturate(u: &Universe, b: &UniverseRelation) -> HoweClosure {
    let mut h = UniverseRelation::empty(u);
    let mut sizes = Vec::new();
    loop {
        let next = howe_step(u, b, &h);
        sizes.push(next.len());
        if next == h {
            return HoweClosure { relation: h, sizes };
        }
        h = next;
    }
}

/// Pairs or triples of terms at one index that break a property.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub sort: SortId,
    pub ctx: Context,
    pub terms: Vec<Term>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub checked: usize,
    pub violations: usize,
    pub examples: Vec<Violation>,
}

impl CheckOutcome {
    pub fn ok(&self) -> bool {
        self.violations == 0
    }

    fn record(&mut self, u: &Universe, ix: IndexId, ids: &[TermId]) {
        self.violations += 1;
        if self.examples.len() < MAX_EXAMPLES {
            self.examples.push(Violation {
                sort: u.sort(ix),
                ctx: u.ctx(ix).clone(),
                terms: ids.iter().map(|&i| u.term(ix, i).clone()).collect(),
            });
        }
    }
}

fn ids(u: &Universe, ix: IndexId) -> impl Iterator<Item = TermId> {
    (0..u.len(ix) as u32).map(TermId)
}

/// `t H t` for every universe term.
pub fn reflexivity_check(u: &Universe, h: &UniverseRelation) -> CheckOutcome {
    let mut out = CheckOutcome::default();
    for ix in u.indices() {
        for t in ids(u, ix) {
            out.checked += 1;
            if !h.contains(ix, t, t) {
                out.record(u, ix, &[t]);
            }
        }
    }
    out
}

/// `r ⊆ s`, listing the pairs of `r` missing from `s`.
pub fn inclusion_check(u: &Universe, r: &UniverseRelation, s: &UniverseRelation) -> CheckOutcome {
    let mut out = CheckOutcome::default();
    for (ix, a, b) in r.pairs() {
        out.checked += 1;
        if !s.contains(ix, a, b) {
            out.record(u, ix, &[a, b]);
        }
    }
    out
}

/// `H ; B ⊆ H`: violations are triples `(a, b, c)` with `a H b`, `b B c`
/// and not `a H c`.
pub fn composition_check(u: &Universe, h: &UniverseRelation, b: &UniverseRelation) -> CheckOutcome {
    let mut out = CheckOutcome::default();
    for ix in u.indices() {
        for a in ids(u, ix) {
            let row = h.row(ix, a);
            for mid in row.ones() {
                let mid = TermId(mid as u32);
                let step = b.row(ix, mid);
                out.checked += step.count_ones(..);
                if step.is_subset(row) {
                    continue;
                }
                for c in step.difference(row) {
                    out.record(u, ix, &[a, mid, TermId(c as u32)]);
                }
            }
        }
    }
    out
}

/// Operator congruence: `o(ē) H o(ē')` whenever `eᵢ H e'ᵢ` for every
/// argument, for all pairs of universe terms with the same head.
pub fn congruence_check(u: &Universe, h: &UniverseRelation) -> CheckOutcome {
    let mut out = CheckOutcome::default();
    for ix in u.indices() {
        for (head, members) in u.by_head(ix) {
            if *head == Head::Var {
                continue;
            }
            for &t in members {
                let args = &u.node(ix, t).args;
                for &t2 in members {
                    let args2 = &u.node(ix, t2).args;
                    if !args
                        .iter()
                        .zip(args2)
                        .all(|(&(aix, a), &(_, a2))| h.contains(aix, a, a2))
                    {
                        continue;
                    }
                    out.checked += 1;
                    if !h.contains(ix, t, t2) {
                        out.record(u, ix, &[t, t2]);
                    }
                }
            }
        }
    }
    out
}

/// Re-applying the generating clauses to `h` adds nothing (and removes
/// nothing).
pub fn fixpoint_check(u: &Universe, b: &UniverseRelation, h: &UniverseRelation) -> CheckOutcome {
    let next = howe_step(u, b, h);
    let mut out = inclusion_check(u, &next, h);
    let back = inclusion_check(u, h, &next);
    out.checked += back.checked;
    out.violations += back.violations;
    out.examples.extend(
        back.examples
            .into_iter()
            .take(MAX_EXAMPLES.saturating_sub(out.examples.len())),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::howe::UniverseSpec;
    use crate::instances::load_instance;

    fn universe(name: &str, size: usize, ctx_bound: u32) -> (crate::rules::DynamicSignature, UniverseSpec) {
        (load_instance(name).unwrap(), UniverseSpec { size, ctx_bound })
    }

    #[test]
    fn syntactic_base_gives_the_diagonal() {
        let (dsig, spec) = universe("cbv", 4, 1);
        let u = Universe::new(&dsig.binding, spec);
        let d = UniverseRelation::diagonal(&u);
        let h = saturate(&u, &d);
        assert_eq!(h.relation, d);
        assert_eq!(*h.sizes.last().unwrap(), d.len());
    }

    #[test]
    fn composition_with_the_diagonal_is_trivial() {
        let (dsig, spec) = universe("cbn", 4, 1);
        let u = Universe::new(&dsig.binding, spec);
        let d = UniverseRelation::diagonal(&u);
        let mut h = d.clone();
        // any relation composed with the diagonal is itself
        let ix = u.indices().next().unwrap();
        h.insert(ix, TermId(0), TermId(1));
        assert!(composition_check(&u, &h, &d).ok());
    }

    #[test]
    fn composition_finds_a_dropped_pair() {
        let (dsig, spec) = universe("cbn", 3, 0);
        let u = Universe::new(&dsig.binding, spec);
        let ix = u.indices().next().unwrap();
        // B relates the first two terms of the closed index both ways
        let mut b = UniverseRelation::diagonal(&u);
        b.insert(ix, TermId(0), TermId(1));
        b.insert(ix, TermId(1), TermId(0));
        let mut h = saturate(&u, &b).relation;
        assert!(composition_check(&u, &h, &b).ok());
        h.remove(ix, TermId(0), TermId(1));
        let c = composition_check(&u, &h, &b);
        assert!(!c.ok());
        assert_eq!(c.examples[0].terms[2], u.term(ix, TermId(1)).clone());
    }
}
