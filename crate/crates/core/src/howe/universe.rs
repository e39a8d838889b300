//! Finite, subterm-closed carriers and relations over them.
//!
//! Terms are interned per index `(sort, context)`; a relation stores one
//! bitset row per term, so closure steps and inclusion checks are word
//! operations.

use std::collections::HashMap;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::bisim::Relation;
use crate::syntax::{immediate_subterms, BindingSignature, Context, Enumerator, OpId, SortId, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniverseSpec {
    /// Largest term size enumerated at the base contexts.
    pub size: usize,
    /// Base contexts have at most this many variables of the binding sort.
    pub ctx_bound: u32,
}

impl Default for UniverseSpec {
    fn default() -> Self {
        UniverseSpec { size: 5, ctx_bound: 2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TermId(pub u32);

impl IndexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl TermId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// The outermost constructor of a universe term; coercions count as unary
/// operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Head {
    Var,
    Op(OpId, SortId),
    Coerce(SortId, SortId),
}

#[derive(Clone, Debug)]
pub struct Node {
    pub head: Head,
    /// Immediate subterms, each at the index of its argument position.
    pub args: Vec<(IndexId, TermId)>,
}

struct Slot {
    sort: SortId,
    ctx: Context,
    terms: Vec<Term>,
    ids: HashMap<Term, TermId>,
    nodes: Vec<Node>,
    /// Terms by head, heads in order of first appearance.
    by_head: Vec<(Head, Vec<TermId>)>,
}

/// Every term up to the size bound over each base context, closed under
/// immediate subterms (which may live in larger contexts). Within an index
/// a term's subterms are interned before it.
pub struct Universe {
    spec: UniverseSpec,
    slots: Vec<Slot>,
    lookup: HashMap<(SortId, Context), IndexId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexStats {
    pub sort: String,
    pub ctx: String,
    pub terms: usize,
}

impl Universe {
    pub fn new(sig: &BindingSignature, spec: UniverseSpec) -> Self {
        let mut u = Universe {
            spec,
            slots: Vec::new(),
            lookup: HashMap::new(),
        };
        let mut en = Enumerator::new();
        for n in 0..=spec.ctx_bound {
            let ctx = Context::single(sig.n_sorts(), sig.binding_sort, n);
            for sort in sig.sorts.sorts() {
                for t in en.upto(sig, sort, &ctx, spec.size) {
                    u.insert(sig, &t, sort, &ctx);
                }
            }
        }
        u
    }

    fn insert(&mut self, sig: &BindingSignature, t: &Term, sort: SortId, ctx: &Context) -> (IndexId, TermId) {
        let ix = self.index_or_create(sort, ctx);
        if let Some(id) = self.slots[ix.index()].ids.get(t) {
            return (ix, *id);
        }
        let args: Vec<(IndexId, TermId)> = immediate_subterms(sig, t, ctx)
            .iter()
            .map(|(a, s, c)| self.insert(sig, a, *s, c))
            .collect();
        let head = match t {
            Term::Var { .. } | Term::Meta { .. } => Head::Var,
            Term::Op { op, sort, .. } => Head::Op(*op, *sort),
            Term::Coerce { from, to, .. } => Head::Coerce(*from, *to),
        };
        let slot = &mut self.slots[ix.index()];
        let id = TermId(slot.terms.len() as u32);
        slot.terms.push(t.clone());
        slot.ids.insert(t.clone(), id);
        slot.nodes.push(Node { head, args });
        match slot.by_head.iter_mut().find(|(h, _)| *h == head) {
            Some((_, ids)) => ids.push(id),
            None => slot.by_head.push((head, vec![id])),
        }
        (ix, id)
    }

    fn index_or_create(&mut self, sort: SortId, ctx: &Context) -> IndexId {
        if let Some(ix) = self.lookup.get(&(sort, ctx.clone())) {
            return *ix;
        }
        let ix = IndexId(self.slots.len() as u32);
        self.slots.push(Slot {
            sort,
            ctx: ctx.clone(),
            terms: Vec::new(),
            ids: HashMap::new(),
            nodes: Vec::new(),
            by_head: Vec::new(),
        });
        self.lookup.insert((sort, ctx.clone()), ix);
        ix
    }

    pub fn spec(&self) -> UniverseSpec {
        self.spec
    }

    pub fn indices(&self) -> impl Iterator<Item = IndexId> {
        (0..self.slots.len() as u32).map(IndexId)
    }

    pub fn index(&self, sort: SortId, ctx: &Context) -> Option<IndexId> {
        self.lookup.get(&(sort, ctx.clone())).copied()
    }

    pub fn sort(&self, ix: IndexId) -> SortId {
        self.slots[ix.index()].sort
    }

    pub fn ctx(&self, ix: IndexId) -> &Context {
        &self.slots[ix.index()].ctx
    }

    pub fn terms(&self, ix: IndexId) -> &[Term] {
        &self.slots[ix.index()].terms
    }

    pub fn term(&self, ix: IndexId, id: TermId) -> &Term {
        &self.slots[ix.index()].terms[id.index()]
    }

    pub fn id(&self, ix: IndexId, t: &Term) -> Option<TermId> {
        self.slots[ix.index()].ids.get(t).copied()
    }

    /// Looks a term up by its sort and context.
    pub fn locate(&self, sort: SortId, ctx: &Context, t: &Term) -> Option<(IndexId, TermId)> {
        let ix = self.index(sort, ctx)?;
        Some((ix, self.id(ix, t)?))
    }

    pub fn node(&self, ix: IndexId, id: TermId) -> &Node {
        &self.slots[ix.index()].nodes[id.index()]
    }

    pub fn by_head(&self, ix: IndexId) -> &[(Head, Vec<TermId>)] {
        &self.slots[ix.index()].by_head
    }

    pub fn len(&self, ix: IndexId) -> usize {
        self.slots[ix.index()].terms.len()
    }

    pub fn total(&self) -> usize {
        self.slots.iter().map(|s| s.terms.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn stats(&self, sig: &BindingSignature) -> Vec<IndexStats> {
        self.slots
            .iter()
            .map(|s| IndexStats {
                sort: sig.sorts.name(s.sort).to_string(),
                ctx: s.ctx.render(&sig.sorts),
                terms: s.terms.len(),
            })
            .collect()
    }
}

/// A relation on a universe: both sides of a pair live at the same index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniverseRelation {
    rows: Vec<Vec<FixedBitSet>>,
}

impl UniverseRelation {
    pub fn empty(u: &Universe) -> Self {
        UniverseRelation {
            rows: u
                .indices()
                .map(|ix| vec![FixedBitSet::with_capacity(u.len(ix)); u.len(ix)])
                .collect(),
        }
    }

    pub fn diagonal(u: &Universe) -> Self {
        let mut r = Self::empty(u);
        for ix in u.indices() {
            for (i, row) in r.rows[ix.index()].iter_mut().enumerate() {
                row.insert(i);
            }
        }
        r
    }

    /// The pairs of `rel` with both sides in `u`, and how many were left out.
    pub fn from_relation(u: &Universe, rel: &Relation) -> (Self, usize) {
        let mut r = Self::empty(u);
        let mut dropped = 0;
        for (sort, ctx, a, b) in rel.iter() {
            match u.index(sort, ctx).and_then(|ix| Some((ix, u.id(ix, a)?, u.id(ix, b)?))) {
                Some((ix, a, b)) => r.insert(ix, a, b),
                None => dropped += 1,
            }
        }
        (r, dropped)
    }

    pub fn to_relation(&self, u: &Universe) -> Relation {
        let mut out = Relation::new();
        for (ix, a, b) in self.pairs() {
            out.insert(u.sort(ix), u.ctx(ix), u.term(ix, a).clone(), u.term(ix, b).clone());
        }
        out
    }

    pub fn contains(&self, ix: IndexId, a: TermId, b: TermId) -> bool {
        self.rows[ix.index()][a.index()].contains(b.index())
    }

    pub fn insert(&mut self, ix: IndexId, a: TermId, b: TermId) {
        self.rows[ix.index()][a.index()].insert(b.index());
    }

    pub fn remove(&mut self, ix: IndexId, a: TermId, b: TermId) {
        self.rows[ix.index()][a.index()].set(b.index(), false);
    }

    /// Everything `a` is related to.
    pub fn row(&self, ix: IndexId, a: TermId) -> &FixedBitSet {
        &self.rows[ix.index()][a.index()]
    }

    pub(crate) fn rows(&self, ix: IndexId) -> &[FixedBitSet] {
        &self.rows[ix.index()]
    }

    pub(crate) fn rows_mut(&mut self, ix: IndexId) -> &mut Vec<FixedBitSet> {
        &mut self.rows[ix.index()]
    }

    pub fn len(&self) -> usize {
        self.rows.iter().flatten().map(|r| r.count_ones(..)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn len_at(&self, ix: IndexId) -> usize {
        self.rows[ix.index()].iter().map(|r| r.count_ones(..)).sum()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (IndexId, TermId, TermId)> + '_ {
        self.rows.iter().enumerate().flat_map(|(ix, rows)| {
            rows.iter().enumerate().flat_map(move |(a, row)| {
                row.ones()
                    .map(move |b| (IndexId(ix as u32), TermId(a as u32), TermId(b as u32)))
            })
        })
    }

    pub fn is_subset(&self, other: &UniverseRelation) -> bool {
        self.rows
            .iter()
            .zip(&other.rows)
            .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.is_subset(y)))
    }

    pub fn union_with(&mut self, other: &UniverseRelation) {
        for (a, b) in self.rows.iter_mut().zip(&other.rows) {
            for (x, y) in a.iter_mut().zip(b) {
                x.union_with(y);
            }
        }
    }

    pub fn converse(&self) -> UniverseRelation {
        let mut out = self.clone();
        for rows in out.rows.iter_mut() {
            rows.iter_mut().for_each(FixedBitSet::clear);
        }
        for (ix, a, b) in self.pairs() {
            out.insert(ix, b, a);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::load_instance;

    #[test]
    fn universe_is_subterm_closed() {
        let dsig = load_instance("cbn").unwrap();
        let u = Universe::new(&dsig.binding, UniverseSpec { size: 4, ctx_bound: 1 });
        for ix in u.indices() {
            for (i, _) in u.terms(ix).iter().enumerate() {
                for (cix, c) in &u.node(ix, TermId(i as u32)).args {
                    // children come first within their index
                    assert!(*cix != ix || c.0 < i as u32);
                    assert!(c.index() < u.len(*cix));
                }
            }
        }
        // lam(x. lam(y. y)) in context 1 has its body in context 2
        let two = Context::from_counts(vec![2]);
        assert!(u.index(SortId(0), &two).is_some());
    }

    #[test]
    fn base_indices_hold_the_enumeration() {
        let dsig = load_instance("cbn").unwrap();
        let sig = &dsig.binding;
        let u = Universe::new(sig, UniverseSpec::default());
        for n in 0..=2 {
            let ctx = Context::from_counts(vec![n]);
            let ix = u.index(SortId(0), &ctx).unwrap();
            assert_eq!(u.len(ix), crate::syntax::enumerate_terms(sig, SortId(0), &ctx, 5).len());
        }
    }

    #[test]
    fn relation_round_trip() {
        let dsig = load_instance("cbn").unwrap();
        let u = Universe::new(&dsig.binding, UniverseSpec { size: 3, ctx_bound: 1 });
        let d = UniverseRelation::diagonal(&u);
        assert_eq!(d.len(), u.total());
        let (back, dropped) = UniverseRelation::from_relation(&u, &d.to_relation(&u));
        assert_eq!(dropped, 0);
        assert_eq!(back, d);
        assert_eq!(d.converse(), d);
        assert!(UniverseRelation::empty(&u).is_subset(&d));
    }
}
