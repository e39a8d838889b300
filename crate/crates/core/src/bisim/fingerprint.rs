//! Equivalence classes of bounded bisimilarity.
//!
//! On the fuel-truncated transition system, `t1 ~d t2` exactly when, per
//! label, the sets `{ (class_{d-1}(u[σ]))_σ | t =l=> u }` coincide. Interning
//! those signatures numbers the classes at every depth, which turns
//! all-pairs questions into grouping. Two terms share a class at depth `d`
//! iff [`super::BisimChecker::bisim`] answers `Holds`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use super::{close, BisimError, PoolEntry, Relation, SubstPool};
use crate::eval::Evaluator;
use crate::rules::{DynamicSignature, LabelId};
use crate::syntax::{Context, SortId, Term};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Signature {
    sort: SortId,
    depth: u32,
    labels: Vec<(LabelId, BTreeSet<Vec<u32>>)>,
}

pub struct Fingerprinter<'a> {
    ev: Evaluator<'a>,
    pool: SubstPool,
    fuel: u32,
    intern: HashMap<Signature, u32>,
    memo: HashMap<(Term, u32), u32>,
    closings: HashMap<Context, Rc<Vec<Vec<PoolEntry>>>>,
}

impl<'a> Fingerprinter<'a> {
    pub fn new(dsig: &'a DynamicSignature, pool: SubstPool, fuel: u32) -> Result<Self, BisimError> {
        Ok(Fingerprinter {
            ev: Evaluator::new(dsig)?,
            pool,
            fuel,
            intern: HashMap::new(),
            memo: HashMap::new(),
            closings: HashMap::new(),
        })
    }

    pub fn signature(&self) -> &'a DynamicSignature {
        self.ev.signature()
    }

    pub fn pool(&self) -> &SubstPool {
        &self.pool
    }

    pub fn fuel(&self) -> u32 {
        self.fuel
    }

    fn closings(&mut self, ctx: &Context) -> Rc<Vec<Vec<PoolEntry>>> {
        if let Some(c) = self.closings.get(ctx) {
            return Rc::clone(c);
        }
        let c = Rc::new(self.pool.closings(ctx));
        self.closings.insert(ctx.clone(), Rc::clone(&c));
        c
    }

    fn intern(&mut self, s: Signature) -> u32 {
        let n = self.intern.len() as u32;
        *self.intern.entry(s).or_insert(n)
    }

    /// Class id of a closed term at `depth`; ids are comparable across
    /// terms of one fingerprinter only.
    pub fn class(&mut self, t: &Term, depth: u32) -> Result<u32, BisimError> {
        if let Some(c) = self.memo.get(&(t.clone(), depth)) {
            return Ok(*c);
        }
        let sort = t.sort();
        let mut sig = Signature {
            sort,
            depth,
            labels: Vec::new(),
        };
        if depth > 0 {
            let dsig = self.signature();
            for l in dsig.labels_from(sort) {
                let ctx = &dsig.label(l).target_ctx;
                let closings = self.closings(ctx);
                let set = self.ev.transitions(t, l, self.fuel)?;
                let mut vectors = BTreeSet::new();
                for u in &set.targets {
                    let mut v = Vec::with_capacity(closings.len());
                    for c in closings.iter() {
                        let inst = close(&dsig.binding, ctx, c, u)?.ok_or(BisimError::NonUniformClosing)?;
                        v.push(self.class(&inst, depth - 1)?);
                    }
                    vectors.insert(v);
                }
                sig.labels.push((l, vectors));
            }
        }
        let id = self.intern(sig);
        self.memo.insert((t.clone(), depth), id);
        Ok(id)
    }

    pub fn holds(&mut self, t1: &Term, t2: &Term, depth: u32) -> Result<bool, BisimError> {
        Ok(t1.sort() == t2.sort() && self.class(t1, depth)? == self.class(t2, depth)?)
    }

    /// Class vector of an open term over all pool closings of `ctx`; equal
    /// keys mean related by the open extension of bisimilarity at `depth`.
    pub fn open_key(&mut self, e: &Term, ctx: &Context, depth: u32) -> Result<Vec<u32>, BisimError> {
        let closings = self.closings(ctx);
        let sig = &self.signature().binding;
        let mut key = Vec::with_capacity(closings.len());
        for c in closings.iter() {
            let inst = close(sig, ctx, c, e)?.ok_or(BisimError::NonUniformClosing)?;
            key.push(self.class(&inst, depth)?);
        }
        Ok(key)
    }
}

/// `{ (t1, t2) in universe² | t1 ~depth t2 }` over closed terms, grouped by
/// sort.
pub fn stratified_bisimilarity(
    fp: &mut Fingerprinter<'_>,
    universe: &[Term],
    depth: u32,
) -> Result<Relation, BisimError> {
    let mut groups: BTreeMap<(SortId, u32), Vec<&Term>> = BTreeMap::new();
    for t in universe {
        groups.entry((t.sort(), fp.class(t, depth)?)).or_default().push(t);
    }
    let closed = fp.signature().binding.empty_ctx();
    let mut rel = Relation::new();
    for ((sort, _), members) in groups {
        for a in &members {
            for b in &members {
                rel.insert(sort, &closed, (*a).clone(), (*b).clone());
            }
        }
    }
    Ok(rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bisim::{BisimChecker, PoolMode};
    use crate::instances::load_instance;
    use crate::syntax::enumerate_terms;

    #[test]
    fn classes_agree_with_the_direct_check() {
        for (name, size, depth, fuel) in [("cbn", 5, 3, 8), ("nondet", 4, 2, 5), ("cbv", 6, 2, 6)] {
            let dsig = load_instance(name).unwrap();
            let sig = &dsig.binding;
            let pool = SubstPool::new(sig, 4, PoolMode::ValuesOnly);
            let mut fp = Fingerprinter::new(&dsig, pool.clone(), fuel).unwrap();
            let mut direct = BisimChecker::new(&dsig, pool, fuel).unwrap();
            let p = *sig.sorts.sorts().collect::<Vec<_>>().last().unwrap();
            let terms = enumerate_terms(sig, p, &sig.empty_ctx(), size);
            for a in &terms {
                for b in &terms {
                    assert_eq!(
                        fp.holds(a, b, depth).unwrap(),
                        direct.bisim(a, b, depth).unwrap().holds(),
                        "{name}: {a:?} {b:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn depth_zero_is_the_full_square() {
        let dsig = load_instance("cbn").unwrap();
        let sig = &dsig.binding;
        let terms = enumerate_terms(sig, SortId(0), &sig.empty_ctx(), 5);
        let mut fp = Fingerprinter::new(&dsig, SubstPool::new(sig, 4, PoolMode::ValuesOnly), 8).unwrap();
        let r = stratified_bisimilarity(&mut fp, &terms, 0).unwrap();
        assert_eq!(r.len(), terms.len() * terms.len());
    }

    #[test]
    fn stratification_decreases_and_keeps_the_diagonal() {
        let dsig = load_instance("cbn").unwrap();
        let sig = &dsig.binding;
        let closed = sig.empty_ctx();
        let terms = enumerate_terms(sig, SortId(0), &closed, 5);
        let mut fp = Fingerprinter::new(&dsig, SubstPool::new(sig, 4, PoolMode::ValuesOnly), 8).unwrap();
        let mut prev = stratified_bisimilarity(&mut fp, &terms, 0).unwrap();
        for d in 1..=4 {
            let r = stratified_bisimilarity(&mut fp, &terms, d).unwrap();
            assert!(r.is_subset(&prev), "depth {d}");
            assert!(terms.iter().all(|t| r.contains(SortId(0), &closed, t, t)));
            prev = r;
        }
        assert!(prev.len() < terms.len() * terms.len());
    }
}
