//! Depth-, fuel- and pool-bounded bisimilarity.
//!
//! `t1 ~d t2` when every transition of either side is matched by a
//! transition of the other under the same label whose targets, closed by
//! every pool closing, are again related at depth `d - 1`. Answers are
//! three-valued: a missing match is definite only when the matching side's
//! transition set was complete.

mod fingerprint;
mod howe_format;
mod open;
mod pool;
mod relation;

use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{EvalError, Evaluator, TransitionSet};
use crate::rules::{DynamicSignature, LabelId};
use crate::syntax::{check_term, SortId, SyntaxError, Term};

pub use fingerprint::{stratified_bisimilarity, Fingerprinter};
pub use howe_format::{cbn_bridge, howe_format_agreement, BridgeReport, HoweFormatChecker, HoweFormatReport};
pub use open::{open_extension_check, ClosedOracle, ClosingWitness, OpenVerdict};
pub use pool::{close, PoolEntry, PoolMode, PoolSpec, SubstPool};
pub use relation::{check_relation, Relation, RelationEntry, RelationReport, RelationViolation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BisimError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("terms have different sorts ({0} and {1})")]
    SortMismatch(String, String),
    #[error("a closing put a program where its variable occurs as a value; fingerprints need uniform closings")]
    NonUniformClosing,
    #[error("{0}")]
    Unsupported(String),
}

/// Which side's transition went unmatched.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictKind {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "witness", rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Fails(Box<Witness>),
    Inconclusive(Box<Witness>),
}

impl Verdict {
    pub fn kind(&self) -> VerdictKind {
        match self {
            Verdict::Holds => VerdictKind::Holds,
            Verdict::Fails(_) => VerdictKind::Fails,
            Verdict::Inconclusive(_) => VerdictKind::Inconclusive,
        }
    }

    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Holds => None,
            Verdict::Fails(w) | Verdict::Inconclusive(w) => Some(w),
        }
    }
}

/// A transition of `left` (or `right`, per `side`) that the other side
/// could not match at `depth`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub left: Term,
    pub right: Term,
    pub depth: u32,
    pub label: LabelId,
    pub side: Side,
    pub unmatched: Term,
    /// The matching side's transition set was cut by fuel.
    pub matching_exhausted: bool,
    /// Every target of the matching side, with a closing that breaks it.
    pub candidates: Vec<Candidate>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub target: Term,
    pub closing: Vec<PoolEntry>,
    /// Verdict on the closed target pair, oriented left/right.
    pub outcome: Verdict,
}

/// Shared session state for bounded checks on one signature.
pub struct BisimChecker<'a> {
    ev: Evaluator<'a>,
    pool: SubstPool,
    fuel: u32,
    memo: HashMap<(Term, Term, u32), Rc<Verdict>>,
}

impl<'a> BisimChecker<'a> {
    pub fn new(dsig: &'a DynamicSignature, pool: SubstPool, fuel: u32) -> Result<Self, BisimError> {
        Ok(BisimChecker {
            ev: Evaluator::new(dsig)?,
            pool,
            fuel,
            memo: HashMap::new(),
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

    pub fn evaluator(&mut self) -> &mut Evaluator<'a> {
        &mut self.ev
    }

    pub(crate) fn transitions(&mut self, t: &Term, l: LabelId) -> Result<Rc<TransitionSet>, BisimError> {
        Ok(self.ev.transitions(t, l, self.fuel)?)
    }

    /// Sort of a closed term, checked.
    pub fn closed_sort(&self, t: &Term) -> Result<SortId, BisimError> {
        let dsig = self.signature();
        let s = t.sort();
        check_term(&dsig.binding, &[], t, s, &dsig.binding.empty_ctx())?;
        Ok(s)
    }

    /// Bounded bisimilarity of two closed terms of the same sort.
    pub fn bisim(&mut self, t1: &Term, t2: &Term, depth: u32) -> Result<Verdict, BisimError> {
        let (s1, s2) = (self.closed_sort(t1)?, self.closed_sort(t2)?);
        if s1 != s2 {
            let sorts = &self.signature().binding.sorts;
            return Err(BisimError::SortMismatch(sorts.name(s1).into(), sorts.name(s2).into()));
        }
        Ok(self.go(t1, t2, depth)?.as_ref().clone())
    }

    fn go(&mut self, t1: &Term, t2: &Term, depth: u32) -> Result<Rc<Verdict>, BisimError> {
        if depth == 0 || t1 == t2 {
            return Ok(Rc::new(Verdict::Holds));
        }
        let key = (t1.clone(), t2.clone(), depth);
        if let Some(v) = self.memo.get(&key) {
            return Ok(Rc::clone(v));
        }
        let v = Rc::new(self.compute(t1, t2, depth)?);
        self.memo.insert(key, Rc::clone(&v));
        Ok(v)
    }

    fn compute(&mut self, t1: &Term, t2: &Term, depth: u32) -> Result<Verdict, BisimError> {
        let dsig = self.signature();
        let mut pending: Option<Box<Witness>> = None;
        for l in dsig.labels_from(t1.sort()) {
            let a = self.transitions(t1, l)?;
            let b = self.transitions(t2, l)?;
            for (side, from, to) in [(Side::Left, &a, &b), (Side::Right, &b, &a)] {
                for u in &from.targets {
                    let Some(w) = self.unmatched(t1, t2, depth, l, side, u, to)? else {
                        continue;
                    };
                    if w.candidates.iter().all(|c| c.outcome.kind() == VerdictKind::Fails) && !w.matching_exhausted {
                        return Ok(Verdict::Fails(Box::new(w)));
                    }
                    pending.get_or_insert_with(|| Box::new(w));
                }
            }
        }
        Ok(pending.map_or(Verdict::Holds, Verdict::Inconclusive))
    }

    /// `None` if `u` is matched by some target in `to`.
    #[allow(clippy::too_many_arguments)]
    fn unmatched(
        &mut self,
        t1: &Term,
        t2: &Term,
        depth: u32,
        l: LabelId,
        side: Side,
        u: &Term,
        to: &TransitionSet,
    ) -> Result<Option<Witness>, BisimError> {
        let mut candidates = Vec::new();
        for u2 in &to.targets {
            let (left, right) = match side {
                Side::Left => (u, u2),
                Side::Right => (u2, u),
            };
            match self.targets_related(l, left, right, depth - 1)? {
                None => return Ok(None),
                Some((closing, outcome)) => candidates.push(Candidate {
                    target: u2.clone(),
                    closing,
                    outcome,
                }),
            }
        }
        Ok(Some(Witness {
            left: t1.clone(),
            right: t2.clone(),
            depth,
            label: l,
            side,
            unmatched: u.clone(),
            matching_exhausted: to.fuel_exhausted,
            candidates,
        }))
    }

    /// `None` when every pool closing relates the targets; otherwise the
    /// first failing closing (or, failing that, the first inconclusive one).
    fn targets_related(
        &mut self,
        l: LabelId,
        left: &Term,
        right: &Term,
        depth: u32,
    ) -> Result<Option<(Vec<PoolEntry>, Verdict)>, BisimError> {
        let dsig = self.signature();
        let ctx = &dsig.label(l).target_ctx;
        let mut first_inconclusive = None;
        for closing in self.pool.closings(ctx) {
            let (Some(a), Some(b)) = (
                close(&dsig.binding, ctx, &closing, left)?,
                close(&dsig.binding, ctx, &closing, right)?,
            ) else {
                continue;
            };
            let v = self.go(&a, &b, depth)?;
            match v.kind() {
                VerdictKind::Holds => {}
                VerdictKind::Fails => return Ok(Some((closing, v.as_ref().clone()))),
                VerdictKind::Inconclusive => {
                    if first_inconclusive.is_none() {
                        first_inconclusive = Some((closing, v.as_ref().clone()));
                    }
                }
            }
        }
        Ok(first_inconclusive)
    }

    /// Re-derives a definite failure: the unmatched transition exists, the
    /// matching side is complete, every one of its targets is listed, and
    /// each listed closing yields a pair whose own witness replays.
    pub fn replay(&mut self, w: &Witness) -> Result<bool, BisimError> {
        if w.depth == 0 || w.matching_exhausted {
            return Ok(false);
        }
        let (src, other) = match w.side {
            Side::Left => (&w.left, &w.right),
            Side::Right => (&w.right, &w.left),
        };
        let a = self.transitions(src, w.label)?;
        let b = self.transitions(other, w.label)?;
        if !a.targets.contains(&w.unmatched) || b.fuel_exhausted {
            return Ok(false);
        }
        let listed: std::collections::BTreeSet<&Term> = w.candidates.iter().map(|c| &c.target).collect();
        if listed.len() != b.targets.len() || !b.targets.iter().all(|t| listed.contains(t)) {
            return Ok(false);
        }
        let dsig = self.signature();
        let ctx = &dsig.label(w.label).target_ctx;
        for c in &w.candidates {
            let (left, right) = match w.side {
                Side::Left => (&w.unmatched, &c.target),
                Side::Right => (&c.target, &w.unmatched),
            };
            let (Some(l), Some(r)) = (
                close(&dsig.binding, ctx, &c.closing, left)?,
                close(&dsig.binding, ctx, &c.closing, right)?,
            ) else {
                return Ok(false);
            };
            let Verdict::Fails(sub) = &c.outcome else {
                return Ok(false);
            };
            if sub.left != l || sub.right != r || sub.depth + 1 != w.depth || !self.replay(sub)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// One-shot bounded bisimilarity.
pub fn bounded_bisim(
    dsig: &DynamicSignature,
    t1: &Term,
    t2: &Term,
    depth: u32,
    fuel: u32,
    pool: SubstPool,
) -> Result<Verdict, BisimError> {
    BisimChecker::new(dsig, pool, fuel)?.bisim(t1, t2, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::load_instance;
    use crate::surface::parse_term;
    use crate::syntax::enumerate_terms;

    /// Call-by-name with an observable constant, so that mismatches can be
    /// definite: pure lambda terms only differ through divergence.
    pub(crate) fn observable() -> DynamicSignature {
        crate::surface::parse_signature(
            "sort p\nbinding p\nop lam : (p[1]) -> p\nop app : (p[0], p[0]) -> p\nop tt : () -> p\n\
             label eval : p@0 -> p@1\nlabel is-tt : p@0 -> p@0\ndefine I : p = lam(x1. x1)\n\
             rule val: lam(x1. ?k) gives eval ?k\n\
             rule beta: app(?k1, ?k2) with ?k1 =eval=> ?k3, ?k3(?k2) =eval=> ?k4 gives eval ?k4\n\
             rule tt: tt gives is-tt tt\n",
        )
        .unwrap()
    }

    fn term(dsig: &DynamicSignature, s: &str, sort: &str) -> Term {
        parse_term(dsig, s, dsig.binding.sorts.lookup(sort).unwrap()).unwrap()
    }

    #[test]
    fn reflexive_at_any_depth() {
        let dsig = load_instance("nondet").unwrap();
        let pool = SubstPool::new(&dsig.binding, 3, PoolMode::ValuesOnly);
        let mut c = BisimChecker::new(&dsig, pool, 6).unwrap();
        let t = term(&dsig, "amb(app(I, I))", "p");
        for d in 0..5 {
            assert!(c.bisim(&t, &t, d).unwrap().holds());
        }
    }

    #[test]
    fn cbv_values_only_relates_the_pair() {
        let dsig = load_instance("cbv").unwrap();
        let t1 = term(&dsig, "lam(x. I)", "p");
        let t2 = term(&dsig, "lam(x. app(lam(y. I), x))", "p");
        let pool = SubstPool::new(&dsig.binding, 5, PoolMode::ValuesOnly);
        assert_eq!(bounded_bisim(&dsig, &t1, &t2, 4, 8, pool).unwrap(), Verdict::Holds);
    }

    #[test]
    fn cbv_program_pool_with_omega_separates_the_pair() {
        let dsig = load_instance("cbv").unwrap();
        let p = dsig.binding.sorts.lookup("p").unwrap();
        let t1 = term(&dsig, "lam(x. I)", "p");
        let t2 = term(&dsig, "lam(x. app(lam(y. I), x))", "p");
        let omega = term(&dsig, "Omega", "p");
        let pool = SubstPool::new(&dsig.binding, 5, PoolMode::Programs)
            .with_term(&dsig.binding, omega.clone(), p)
            .unwrap();
        let v = bounded_bisim(&dsig, &t1, &t2, 4, 8, pool).unwrap();
        assert!(!v.holds());
        let w = v.witness().unwrap();
        assert!(w.candidates.iter().any(|c| c.closing.iter().any(|e| e.term == omega)));
    }

    #[test]
    fn choice_is_observable() {
        let dsig = load_instance("nondet").unwrap();
        let pool = SubstPool::new(&dsig.binding, 5, PoolMode::ValuesOnly);
        let v = bounded_bisim(&dsig, &term(&dsig, "amb(I)", "p"), &term(&dsig, "I", "p"), 2, 6, pool).unwrap();
        assert!(!v.holds());
    }

    #[test]
    fn sort_mismatch_is_an_error() {
        let dsig = load_instance("cbv").unwrap();
        let pool = SubstPool::new(&dsig.binding, 3, PoolMode::ValuesOnly);
        let v = term(&dsig, "lam(x. I)", "v");
        let p = term(&dsig, "app(I, I)", "p");
        assert!(matches!(
            bounded_bisim(&dsig, &v, &p, 2, 4, pool),
            Err(BisimError::SortMismatch(..))
        ));
    }

    #[test]
    fn fails_witnesses_replay() {
        let dsig = observable();
        let pool = SubstPool::new(&dsig.binding, 3, PoolMode::ValuesOnly);
        let mut c = BisimChecker::new(&dsig, pool, 8).unwrap();
        let terms = enumerate_terms(&dsig.binding, SortId(0), &dsig.binding.empty_ctx(), 4);
        // larger than any transition target of the universe
        let foreign = term(&dsig, "app(app(tt, tt), app(tt, tt))", "p");
        let mut failures = 0;
        for a in &terms {
            for b in &terms {
                if let Verdict::Fails(w) = c.bisim(a, b, 3).unwrap() {
                    failures += 1;
                    assert!(c.replay(&w).unwrap());
                    let mut bad = (*w).clone();
                    bad.unmatched = foreign.clone();
                    assert!(!c.replay(&bad).unwrap());
                }
            }
        }
        assert!(failures > 0);
    }

    #[test]
    fn symmetric_verdict_kinds() {
        let dsig = load_instance("nondet").unwrap();
        let pool = SubstPool::new(&dsig.binding, 3, PoolMode::ValuesOnly);
        let mut c = BisimChecker::new(&dsig, pool, 5).unwrap();
        let terms = enumerate_terms(&dsig.binding, SortId(0), &dsig.binding.empty_ctx(), 4);
        for a in &terms {
            for b in &terms {
                assert_eq!(c.bisim(a, b, 2).unwrap().kind(), c.bisim(b, a, 2).unwrap().kind());
            }
        }
    }
}
