//! Bounded checks of the two facts about the Howe closure that need more
//! than its generating clauses: closure under heterogeneous substitution,
//! and being a substitution-closed simulation.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{HoweError, IndexId, TermId, Universe, UniverseRelation};
use crate::bisim::{close, PoolEntry, SubstPool};
use crate::eval::Evaluator;
use crate::rules::{DynamicSignature, LabelId};
use crate::syntax::{BindingSignature, Context, SortId, Substitution, Term};

const MAX_EXAMPLES: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeteroViolation {
    pub sort: SortId,
    pub ctx: Context,
    /// `e1 H e1'` over `ctx` extended by the substituted variable.
    pub e1: (Term, Term),
    /// `e2 H e2'` over `ctx`.
    pub e2: (Term, Term),
    /// `e1[x ↦ e2]` and `e1'[x ↦ e2']`, not related.
    pub result: (Term, Term),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeteroReport {
    pub seed: u64,
    pub samples: usize,
    pub attempts: usize,
    /// Draws whose substituted terms fell outside the universe.
    pub rejected: usize,
    pub violations: usize,
    pub examples: Vec<HeteroViolation>,
    /// Samples with `e1 B e1'` where the chain
    /// `e1[x↦e2] H e1[x↦e2'] B e1'[x↦e2']` was also checked.
    pub chain_checked: usize,
    pub chain_violations: usize,
}

impl HeteroReport {
    pub fn ok(&self) -> bool {
        self.violations == 0 && self.chain_violations == 0
    }
}

/// An index over a context with at least one binding-sort variable, paired
/// with the indices its last variable is substituted from and into.
struct Site {
    open: IndexId,
    arg: IndexId,
    result: IndexId,
    source: Context,
}

fn sites(sig: &BindingSignature, u: &Universe) -> Vec<Site> {
    let bs = sig.binding_sort;
    u.indices()
        .filter_map(|open| {
            let src = u.ctx(open);
            let n = src.count(bs);
            if n == 0 {
                return None;
            }
            let mut counts = src.counts().to_vec();
            counts[bs.index()] = n - 1;
            let target = Context::from_counts(counts);
            Some(Site {
                open,
                arg: u.index(bs, &target)?,
                result: u.index(u.sort(open), &target)?,
                source: src.clone(),
            })
        })
        .collect()
}

/// Replaces the last binding-sort variable of `source` by `arg`.
fn substitute_last(
    sig: &BindingSignature,
    source: &Context,
    target: &Context,
    arg: &Term,
    t: &Term,
) -> Result<Term, HoweError> {
    let bs = sig.binding_sort;
    let last = source.count(bs);
    let entries = source
        .vars()
        .map(|(s, i)| {
            if s == bs && i == last {
                (arg.clone(), bs)
            } else {
                (Term::var(s, i), s)
            }
        })
        .collect();
    Ok(Substitution::from_sorted_terms(source, target, entries)?.apply(sig, t)?)
}

/// Draws `samples` pairs `(e1, e1') ∈ H`, `(e2, e2') ∈ H` of compatible
/// contexts and checks `e1[x ↦ e2] H e1'[x ↦ e2']`. Draws whose results leave
/// the universe are rejected and redrawn, up to a budget.
pub fn hetero_substitution_check(
    sig: &BindingSignature,
    u: &Universe,
    h: &UniverseRelation,
    b: Option<&UniverseRelation>,
    samples: usize,
    seed: u64,
) -> Result<HeteroReport, HoweError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = HeteroReport {
        seed,
        samples: 0,
        attempts: 0,
        rejected: 0,
        violations: 0,
        examples: Vec::new(),
        chain_checked: 0,
        chain_violations: 0,
    };
    let pairs_at =
        |ix: IndexId| -> Vec<(TermId, TermId)> { h.pairs().filter(|p| p.0 == ix).map(|(_, a, b)| (a, b)).collect() };
    type Pairs = Vec<(TermId, TermId)>;
    let sites: Vec<(Site, Pairs, Pairs)> = sites(sig, u)
        .into_iter()
        .map(|s| {
            let (p1, p2) = (pairs_at(s.open), pairs_at(s.arg));
            (s, p1, p2)
        })
        .filter(|(_, p1, p2)| !p1.is_empty() && !p2.is_empty())
        .collect();
    if sites.is_empty() {
        return Ok(report);
    }
    let budget = samples.saturating_mul(500);
    while report.samples < samples && report.attempts < budget {
        report.attempts += 1;
        let (site, p1, p2) = &sites[rng.gen_range(0..sites.len())];
        let (e1, e1p) = p1[rng.gen_range(0..p1.len())];
        let (e2, e2p) = p2[rng.gen_range(0..p2.len())];
        let target = u.ctx(site.result).clone();
        let term = |ix, id| u.term(ix, id);
        let sub = |arg: TermId, t: TermId| {
            substitute_last(sig, &site.source, &target, term(site.arg, arg), term(site.open, t))
        };
        let (r1, r2) = (sub(e2, e1)?, sub(e2p, e1p)?);
        let (Some(i1), Some(i2)) = (u.id(site.result, &r1), u.id(site.result, &r2)) else {
            report.rejected += 1;
            continue;
        };
        report.samples += 1;
        if !h.contains(site.result, i1, i2) {
            report.violations += 1;
            if report.examples.len() < MAX_EXAMPLES {
                report.examples.push(HeteroViolation {
                    sort: u.sort(site.result),
                    ctx: target.clone(),
                    e1: (term(site.open, e1).clone(), term(site.open, e1p).clone()),
                    e2: (term(site.arg, e2).clone(), term(site.arg, e2p).clone()),
                    result: (r1.clone(), r2.clone()),
                });
            }
        }
        if let Some(b) = b.filter(|b| b.contains(site.open, e1, e1p)) {
            let mid = sub(e2p, e1)?;
            if let Some(m) = u.id(site.result, &mid) {
                report.chain_checked += 1;
                if !(h.contains(site.result, i1, m) && b.contains(site.result, m, i2)) {
                    report.chain_violations += 1;
                }
            }
        }
    }
    Ok(report)
}

/// How one pool closing of a candidate match fared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosingOutcome {
    Related,
    Unrelated,
    OutsideUniverse,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationCandidate {
    pub target: Term,
    pub outcome: ClosingOutcome,
    /// The first closing that was not related.
    pub closing: Option<Vec<PoolEntry>>,
}

/// A transition of the left term that the right term does not match.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationFailure {
    pub left: Term,
    pub right: Term,
    pub label: LabelId,
    pub unmatched: Term,
    pub matching_exhausted: bool,
    pub candidates: Vec<SimulationCandidate>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub pairs: usize,
    pub transitions: usize,
    pub matched: usize,
    pub violations: usize,
    pub inconclusive: usize,
    pub violation_examples: Vec<SimulationFailure>,
    pub inconclusive_examples: Vec<SimulationFailure>,
}

impl SimulationReport {
    pub fn ok(&self) -> bool {
        self.violations == 0
    }
}

/// For every `(e, e') ∈ H` with `e` closed, every transition `e =l=> u` must
/// be matched by some `e' =l=> u'` with every pool instance of `(u, u')` in
/// `targets` (which is `H` itself for the plain simulation property). A
/// mismatch is definite only when the right side's transitions were
/// complete and every candidate has an instance inside the universe that
/// `targets` does not relate.
pub fn simulation_check(
    dsig: &DynamicSignature,
    u: &Universe,
    h: &UniverseRelation,
    targets: &UniverseRelation,
    fuel: u32,
    pool: &SubstPool,
) -> Result<SimulationReport, HoweError> {
    let sig = &dsig.binding;
    let mut ev = Evaluator::new(dsig)?;
    let mut closings: HashMap<Context, Vec<Vec<PoolEntry>>> = HashMap::new();
    let mut report = SimulationReport {
        pairs: 0,
        transitions: 0,
        matched: 0,
        violations: 0,
        inconclusive: 0,
        violation_examples: Vec::new(),
        inconclusive_examples: Vec::new(),
    };
    for ix in u.indices().filter(|&ix| u.ctx(ix).is_closed()) {
        let sort = u.sort(ix);
        for (_, a, b) in h.pairs().filter(|p| p.0 == ix) {
            report.pairs += 1;
            let (ta, tb) = (u.term(ix, a), u.term(ix, b));
            for l in dsig.labels_from(sort) {
                let lab = dsig.label(l);
                let target = u.index(lab.target_sort, &sig.empty_ctx());
                let cs = closings
                    .entry(lab.target_ctx.clone())
                    .or_insert_with(|| pool.closings(&lab.target_ctx));
                let left = ev.transitions(ta, l, fuel)?;
                let right = ev.transitions(tb, l, fuel)?;
                for x in &left.targets {
                    report.transitions += 1;
                    let mut candidates = Vec::new();
                    let mut matched = false;
                    for y in &right.targets {
                        let c = candidate(sig, u, targets, target, &lab.target_ctx, cs, x, y)?;
                        matched = c.outcome == ClosingOutcome::Related;
                        candidates.push(c);
                        if matched {
                            break;
                        }
                    }
                    if matched {
                        report.matched += 1;
                        continue;
                    }
                    let definite =
                        !right.fuel_exhausted && candidates.iter().all(|c| c.outcome == ClosingOutcome::Unrelated);
                    let f = SimulationFailure {
                        left: ta.clone(),
                        right: tb.clone(),
                        label: l,
                        unmatched: x.clone(),
                        matching_exhausted: right.fuel_exhausted,
                        candidates,
                    };
                    let (count, examples) = if definite {
                        (&mut report.violations, &mut report.violation_examples)
                    } else {
                        (&mut report.inconclusive, &mut report.inconclusive_examples)
                    };
                    *count += 1;
                    if examples.len() < MAX_EXAMPLES {
                        examples.push(f);
                    }
                }
            }
        }
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn candidate(
    sig: &BindingSignature,
    u: &Universe,
    h: &UniverseRelation,
    target: Option<IndexId>,
    ctx: &Context,
    closings: &[Vec<PoolEntry>],
    x: &Term,
    y: &Term,
) -> Result<SimulationCandidate, HoweError> {
    let mut outcome = ClosingOutcome::Related;
    let mut witness = None;
    for c in closings {
        let (Some(xc), Some(yc)) = (close(sig, ctx, c, x)?, close(sig, ctx, c, y)?) else {
            continue;
        };
        let ids = target.and_then(|ix| Some((ix, u.id(ix, &xc)?, u.id(ix, &yc)?)));
        match ids {
            Some((ix, i, j)) if h.contains(ix, i, j) => {}
            Some(_) => {
                return Ok(SimulationCandidate {
                    target: y.clone(),
                    outcome: ClosingOutcome::Unrelated,
                    closing: Some(c.clone()),
                })
            }
            None => {
                if witness.is_none() {
                    witness = Some(c.clone());
                }
                outcome = ClosingOutcome::OutsideUniverse;
            }
        }
    }
    Ok(SimulationCandidate {
        target: y.clone(),
        outcome,
        closing: witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bisim::PoolMode;
    use crate::howe::UniverseSpec;
    use crate::instances::load_instance;

    #[test]
    fn diagonal_is_a_simulation() {
        let dsig = load_instance("cbn").unwrap();
        let sig = &dsig.binding;
        let u = Universe::new(sig, UniverseSpec { size: 5, ctx_bound: 1 });
        let pool = SubstPool::new(sig, 3, PoolMode::ValuesOnly);
        let d = UniverseRelation::diagonal(&u);
        let rep = simulation_check(&dsig, &u, &d, &d, 8, &pool).unwrap();
        assert!(rep.ok());
        assert!(rep.pairs > 0 && rep.matched > 0);
    }

    #[test]
    fn pair_without_its_targets_is_a_violation() {
        let dsig = load_instance("cbn").unwrap();
        let sig = &dsig.binding;
        let u = Universe::new(sig, UniverseSpec { size: 4, ctx_bound: 1 });
        let pool = SubstPool::new(sig, 3, PoolMode::ValuesOnly);
        let p = SortId(0);
        let k = crate::surface::parse_term(&dsig, "lam(x. lam(y. x))", p).unwrap();
        let ki = crate::surface::parse_term(&dsig, "lam(x. I)", p).unwrap();
        let (ix, a) = u.locate(p, &sig.empty_ctx(), &k).unwrap();
        let (_, b) = u.locate(p, &sig.empty_ctx(), &ki).unwrap();
        let mut h = UniverseRelation::diagonal(&u);
        h.insert(ix, a, b);
        let rep = simulation_check(&dsig, &u, &h, &h, 8, &pool).unwrap();
        assert_eq!(rep.violations, 1);
        let f = &rep.violation_examples[0];
        assert_eq!((&f.left, &f.right), (&k, &ki));
        assert!(!f.matching_exhausted);
        assert_eq!(f.candidates.len(), 1);
        assert_eq!(f.candidates[0].outcome, ClosingOutcome::Unrelated);
        assert!(f.candidates[0].closing.is_some());
    }

    #[test]
    fn variable_for_variable_stays_in_the_diagonal() {
        let dsig = load_instance("cbn").unwrap();
        let sig = &dsig.binding;
        let u = Universe::new(sig, UniverseSpec { size: 4, ctx_bound: 2 });
        let d = UniverseRelation::diagonal(&u);
        let rep = hetero_substitution_check(sig, &u, &d, None, 50, 7).unwrap();
        assert_eq!(rep.samples, 50);
        assert!(rep.ok());
    }

    #[test]
    fn substituting_the_last_variable() {
        let dsig = load_instance("cbn").unwrap();
        let sig = &dsig.binding;
        let two = Context::from_counts(vec![2]);
        let one = Context::from_counts(vec![1]);
        let p = SortId(0);
        let t = crate::surface::parse_term_in(&dsig, "app(var 2, lam(z. var 1))", p, &two).unwrap();
        let r = substitute_last(sig, &two, &one, &Term::var(p, 1), &t).unwrap();
        let expected = crate::surface::parse_term_in(&dsig, "app(var 1, lam(z. var 1))", p, &one).unwrap();
        assert_eq!(r, expected);
    }
}
