use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{close, BisimChecker, BisimError, PoolEntry, Side};
use crate::rules::LabelId;
use crate::syntax::{Context, SortId, Term};

/// A finite relation indexed by sort and context; both components of a pair
/// live at the index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Relation {
    pairs: BTreeMap<(SortId, Context), BTreeSet<(Term, Term)>>,
}

/// Flat form of one pair, for serialisation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationEntry {
    pub sort: SortId,
    pub ctx: Context,
    pub left: Term,
    pub right: Term,
}

impl Relation {
    pub fn new() -> Self {
        Relation::default()
    }

    /// Returns whether the pair was new.
    pub fn insert(&mut self, sort: SortId, ctx: &Context, left: Term, right: Term) -> bool {
        self.pairs.entry((sort, ctx.clone())).or_default().insert((left, right))
    }

    pub fn remove(&mut self, sort: SortId, ctx: &Context, left: &Term, right: &Term) -> bool {
        let key = (sort, ctx.clone());
        let Some(set) = self.pairs.get_mut(&key) else {
            return false;
        };
        let removed = set.remove(&(left.clone(), right.clone()));
        if set.is_empty() {
            self.pairs.remove(&key);
        }
        removed
    }

    pub fn contains(&self, sort: SortId, ctx: &Context, left: &Term, right: &Term) -> bool {
        self.pairs
            .get(&(sort, ctx.clone()))
            .is_some_and(|s| s.contains(&(left.clone(), right.clone())))
    }

    pub fn len(&self) -> usize {
        self.pairs.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pairs at one index.
    pub fn at(&self, sort: SortId, ctx: &Context) -> impl Iterator<Item = &(Term, Term)> {
        self.pairs.get(&(sort, ctx.clone())).into_iter().flatten()
    }

    pub fn indices(&self) -> impl Iterator<Item = &(SortId, Context)> {
        self.pairs.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (SortId, &Context, &Term, &Term)> {
        self.pairs
            .iter()
            .flat_map(|((s, c), set)| set.iter().map(move |(a, b)| (*s, c, a, b)))
    }

    pub fn entries(&self) -> Vec<RelationEntry> {
        self.iter()
            .map(|(sort, ctx, l, r)| RelationEntry {
                sort,
                ctx: ctx.clone(),
                left: l.clone(),
                right: r.clone(),
            })
            .collect()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = RelationEntry>) -> Self {
        let mut r = Relation::new();
        for e in entries {
            r.insert(e.sort, &e.ctx, e.left, e.right);
        }
        r
    }

    pub fn is_subset(&self, other: &Relation) -> bool {
        self.iter().all(|(s, c, a, b)| other.contains(s, c, a, b))
    }

    pub fn union(&self, other: &Relation) -> Relation {
        let mut out = self.clone();
        for (s, c, a, b) in other.iter() {
            out.insert(s, c, a.clone(), b.clone());
        }
        out
    }

    pub fn converse(&self) -> Relation {
        let mut out = Relation::new();
        for (s, c, a, b) in self.iter() {
            out.insert(s, c, b.clone(), a.clone());
        }
        out
    }
}

/// A transition of one side of a pair in `R` that the other side cannot
/// match with targets whose pool instances stay in `R` (or are equal).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationViolation {
    pub left: Term,
    pub right: Term,
    pub label: LabelId,
    pub side: Side,
    pub unmatched: Term,
    pub matching_exhausted: bool,
    /// Each candidate target with a closing whose instance leaves `R`.
    pub candidates: Vec<(Term, Vec<PoolEntry>)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationReport {
    pub pairs: usize,
    pub violations: Vec<RelationViolation>,
    /// Unmatched transitions where the matching side ran out of fuel.
    pub inconclusive: Vec<RelationViolation>,
}

impl RelationReport {
    pub fn is_bisimulation(&self) -> bool {
        self.violations.is_empty() && self.inconclusive.is_empty()
    }
}

/// Checks that the closed part of `rel`, together with the diagonal, is a
/// bisimulation up to the checker's fuel and pool: every transition of one
/// side of a pair is matched by the other side with every pool instance of
/// the target pair again related.
pub fn check_relation(checker: &mut BisimChecker<'_>, rel: &Relation) -> Result<RelationReport, BisimError> {
    let dsig = checker.signature();
    let mut report = RelationReport {
        pairs: 0,
        violations: Vec::new(),
        inconclusive: Vec::new(),
    };
    for ((sort, ctx), pairs) in &rel.pairs {
        if !ctx.is_closed() {
            return Err(BisimError::Unsupported(
                "check_relation takes a relation on closed terms".into(),
            ));
        }
        for (t1, t2) in pairs {
            report.pairs += 1;
            for l in dsig.labels_from(*sort) {
                let a = checker.transitions(t1, l)?;
                let b = checker.transitions(t2, l)?;
                let lab = dsig.label(l);
                for (side, from, to) in [(Side::Left, &a, &b), (Side::Right, &b, &a)] {
                    for u in &from.targets {
                        let mut candidates = Vec::new();
                        let mut matched = false;
                        for u2 in &to.targets {
                            let (x, y) = match side {
                                Side::Left => (u, u2),
                                Side::Right => (u2, u),
                            };
                            match escaping_closing(checker, rel, lab.target_sort, &lab.target_ctx, x, y)? {
                                None => {
                                    matched = true;
                                    break;
                                }
                                Some(c) => candidates.push((u2.clone(), c)),
                            }
                        }
                        if matched {
                            continue;
                        }
                        let v = RelationViolation {
                            left: t1.clone(),
                            right: t2.clone(),
                            label: l,
                            side,
                            unmatched: u.clone(),
                            matching_exhausted: to.fuel_exhausted,
                            candidates,
                        };
                        if to.fuel_exhausted {
                            report.inconclusive.push(v);
                        } else {
                            report.violations.push(v);
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}

fn escaping_closing(
    checker: &BisimChecker<'_>,
    rel: &Relation,
    sort: SortId,
    ctx: &Context,
    x: &Term,
    y: &Term,
) -> Result<Option<Vec<PoolEntry>>, BisimError> {
    let sig = &checker.signature().binding;
    let closed = sig.empty_ctx();
    for closing in checker.pool().closings(ctx) {
        let (Some(a), Some(b)) = (close(sig, ctx, &closing, x)?, close(sig, ctx, &closing, y)?) else {
            continue;
        };
        if a != b && !rel.contains(sort, &closed, &a, &b) {
            return Ok(Some(closing));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bisim::{PoolMode, SubstPool};
    use crate::instances::load_instance;
    use crate::surface::parse_term;

    const P: SortId = SortId(0);

    fn checker(dsig: &crate::rules::DynamicSignature) -> BisimChecker<'_> {
        BisimChecker::new(dsig, SubstPool::new(&dsig.binding, 4, PoolMode::ValuesOnly), 8).unwrap()
    }

    #[test]
    fn empty_relation_is_a_bisimulation() {
        let dsig = load_instance("cbn").unwrap();
        let rep = check_relation(&mut checker(&dsig), &Relation::new()).unwrap();
        assert!(rep.is_bisimulation());
        assert_eq!(rep.pairs, 0);
    }

    #[test]
    fn alpha_equal_diagonal_is_a_bisimulation() {
        let dsig = load_instance("cbn").unwrap();
        let a = parse_term(&dsig, "lam(x. x)", P).unwrap();
        let b = parse_term(&dsig, "lam(y. y)", P).unwrap();
        assert_eq!(a, b);
        let mut r = Relation::new();
        r.insert(P, &dsig.binding.empty_ctx(), a, b);
        assert!(check_relation(&mut checker(&dsig), &r).unwrap().is_bisimulation());
    }

    #[test]
    fn eta_pair_alone_is_not_a_bisimulation() {
        let dsig = load_instance("cbn").unwrap();
        let a = parse_term(&dsig, "lam(x. x)", P).unwrap();
        let b = parse_term(&dsig, "lam(x. app(lam(y. y), x))", P).unwrap();
        let mut r = Relation::new();
        r.insert(P, &dsig.binding.empty_ctx(), a, b.clone());
        let rep = check_relation(&mut checker(&dsig), &r).unwrap();
        assert!(!rep.violations.is_empty());
        let v = &rep.violations[0];
        assert_eq!(v.unmatched, Term::var(P, 1));
        let Term::Op { args, .. } = &b else { panic!() };
        assert_eq!(v.candidates[0].0, args[0]);
    }

    #[test]
    fn relation_bookkeeping() {
        let c = Context::from_counts(vec![0]);
        let (a, b) = (Term::var(P, 1), Term::var(P, 2));
        let mut r = Relation::new();
        assert!(r.insert(P, &c, a.clone(), b.clone()));
        assert!(!r.insert(P, &c, a.clone(), b.clone()));
        assert_eq!(r.len(), 1);
        assert!(r.converse().contains(P, &c, &b, &a));
        assert!(r.is_subset(&r.union(&r.converse())));
        assert_eq!(Relation::from_entries(r.entries()), r);
        assert!(r.remove(P, &c, &a, &b));
        assert!(r.is_empty());
    }
}
