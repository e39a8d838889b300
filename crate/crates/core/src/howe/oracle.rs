use std::collections::HashMap;

use fixedbitset::FixedBitSet;

use super::{HoweError, IndexId, TermId, Universe, UniverseRelation};
use crate::bisim::{Fingerprinter, Relation};
use crate::syntax::{Context, SortId, Term};

/// The base relation `B` of a Howe closure, decided on open terms.
pub trait BaseOracle {
    fn describe(&self) -> String;

    /// Whether `a B b`, both of `sort` over `ctx`.
    fn related(&mut self, sort: SortId, ctx: &Context, a: &Term, b: &Term) -> Result<bool, HoweError>;

    /// `B` restricted to `u`.
    fn materialise(&mut self, u: &Universe) -> Result<UniverseRelation, HoweError> {
        let mut r = UniverseRelation::empty(u);
        for ix in u.indices() {
            let (sort, ctx) = (u.sort(ix), u.ctx(ix).clone());
            for (i, a) in u.terms(ix).iter().enumerate() {
                for (j, b) in u.terms(ix).iter().enumerate() {
                    if self.related(sort, &ctx, a, b)? {
                        r.insert(ix, TermId(i as u32), TermId(j as u32));
                    }
                }
            }
        }
        Ok(r)
    }
}

/// `a B b` iff `a == b`.
pub struct SyntacticOracle;

impl BaseOracle for SyntacticOracle {
    fn describe(&self) -> String {
        "syntactic equality".into()
    }

    fn related(&mut self, _: SortId, _: &Context, a: &Term, b: &Term) -> Result<bool, HoweError> {
        Ok(a == b)
    }

    fn materialise(&mut self, u: &Universe) -> Result<UniverseRelation, HoweError> {
        Ok(UniverseRelation::diagonal(u))
    }
}

/// The open extension of depth-bounded bisimilarity: open terms are
/// related when every pool closing gives bisimilar closed terms.
pub struct BisimOracle<'a> {
    fp: Fingerprinter<'a>,
    depth: u32,
}

impl<'a> BisimOracle<'a> {
    pub fn new(fp: Fingerprinter<'a>, depth: u32) -> Self {
        BisimOracle { fp, depth }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Gives the fingerprinter back, with its class memo.
    pub fn into_fingerprinter(self) -> Fingerprinter<'a> {
        self.fp
    }
}

impl BaseOracle for BisimOracle<'_> {
    fn describe(&self) -> String {
        format!(
            "open extension of bisimilarity at depth {} (fuel {}, {:?} pool of size {})",
            self.depth,
            self.fp.fuel(),
            self.fp.pool().mode(),
            self.fp.pool().max_size()
        )
    }

    fn related(&mut self, _: SortId, ctx: &Context, a: &Term, b: &Term) -> Result<bool, HoweError> {
        Ok(a == b || self.fp.open_key(a, ctx, self.depth)? == self.fp.open_key(b, ctx, self.depth)?)
    }

    /// Groups each index by open key; `B` is an equivalence here.
    fn materialise(&mut self, u: &Universe) -> Result<UniverseRelation, HoweError> {
        let mut r = UniverseRelation::empty(u);
        for ix in u.indices() {
            let mut classes: HashMap<Vec<u32>, FixedBitSet> = HashMap::new();
            let mut keys = Vec::with_capacity(u.len(ix));
            for t in u.terms(ix) {
                let key = self.fp.open_key(t, u.ctx(ix), self.depth)?;
                classes
                    .entry(key.clone())
                    .or_insert_with(|| FixedBitSet::with_capacity(u.len(ix)))
                    .insert(keys.len());
                keys.push(key);
            }
            fill_rows(&mut r, ix, keys.iter().map(|k| &classes[k]));
        }
        Ok(r)
    }
}

fn fill_rows<'b>(r: &mut UniverseRelation, ix: IndexId, rows: impl Iterator<Item = &'b FixedBitSet>) {
    for (dst, src) in r.rows_mut(ix).iter_mut().zip(rows) {
        dst.clone_from(src);
    }
}

/// A finite relation together with the diagonal.
pub struct RelationOracle<'r> {
    rel: &'r Relation,
}

impl<'r> RelationOracle<'r> {
    pub fn new(rel: &'r Relation) -> Self {
        RelationOracle { rel }
    }
}

impl BaseOracle for RelationOracle<'_> {
    fn describe(&self) -> String {
        format!("finite relation of {} pairs with the diagonal", self.rel.len())
    }

    fn related(&mut self, sort: SortId, ctx: &Context, a: &Term, b: &Term) -> Result<bool, HoweError> {
        Ok(a == b || self.rel.contains(sort, ctx, a, b))
    }

    fn materialise(&mut self, u: &Universe) -> Result<UniverseRelation, HoweError> {
        let (mut r, _) = UniverseRelation::from_relation(u, self.rel);
        r.union_with(&UniverseRelation::diagonal(u));
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bisim::{PoolMode, SubstPool};
    use crate::howe::UniverseSpec;
    use crate::instances::load_instance;

    #[test]
    fn bisim_oracle_materialises_its_decision_procedure() {
        let dsig = load_instance("cbn").unwrap();
        let sig = &dsig.binding;
        let u = Universe::new(sig, UniverseSpec { size: 4, ctx_bound: 1 });
        let fp = Fingerprinter::new(&dsig, SubstPool::new(sig, 3, PoolMode::ValuesOnly), 6).unwrap();
        let mut o = BisimOracle::new(fp, 2);
        let fast = o.materialise(&u).unwrap();
        let mut slow = UniverseRelation::empty(&u);
        for ix in u.indices() {
            for (i, a) in u.terms(ix).iter().enumerate() {
                for (j, b) in u.terms(ix).iter().enumerate() {
                    if o.related(u.sort(ix), u.ctx(ix), a, b).unwrap() {
                        slow.insert(ix, TermId(i as u32), TermId(j as u32));
                    }
                }
            }
        }
        assert_eq!(fast, slow);
        assert!(UniverseRelation::diagonal(&u).is_subset(&fast));
        assert_eq!(fast.converse(), fast);
    }

    #[test]
    fn relation_oracle_adds_the_diagonal() {
        let dsig = load_instance("cbn").unwrap();
        let u = Universe::new(&dsig.binding, UniverseSpec { size: 3, ctx_bound: 0 });
        let r = Relation::new();
        let b = RelationOracle::new(&r).materialise(&u).unwrap();
        assert_eq!(b, UniverseRelation::diagonal(&u));
    }
}
