//! Sampled check that bounded bisimilarity is preserved by one-hole
//! contexts.

use std::collections::{BTreeMap, BTreeSet};
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HoweError;
use crate::bisim::{BisimChecker, Fingerprinter, PoolMode, SubstPool, VerdictKind, Witness};
use crate::rules::DynamicSignature;
use crate::syntax::{coerce, immediate_subterms, weaken, BindingSignature, Context, Enumerator, MetaId, SortId, Term};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongruenceParams {
    /// Pairs are drawn from those related at this depth.
    pub depth: u32,
    /// Depth at which plugged pairs are compared; `depth - 1` when absent.
    pub inner_depth: Option<u32>,
    pub fuel: u32,
    pub pool_size: usize,
    pub values_only: bool,
    pub samples: usize,
    pub seed: u64,
    /// Related pairs are closed terms up to this size.
    pub term_size: usize,
    /// Contexts come from closed terms up to this size.
    pub context_size: usize,
    /// Worker threads; 0 uses the available parallelism.
    pub threads: usize,
}

impl Default for CongruenceParams {
    fn default() -> Self {
        CongruenceParams {
            depth: 3,
            inner_depth: None,
            fuel: 8,
            pool_size: 5,
            values_only: true,
            samples: 200,
            seed: 0,
            term_size: 5,
            context_size: 4,
            threads: 0,
        }
    }
}

impl CongruenceParams {
    pub fn inner(&self) -> u32 {
        self.inner_depth.unwrap_or(self.depth.saturating_sub(1))
    }
}

/// A closed term with one subterm replaced by a hole.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OneHoleContext {
    /// The context, with the hole as a nullary metavariable.
    pub term: Term,
    /// Argument positions from the root to the hole.
    pub path: Vec<usize>,
    pub hole_sort: SortId,
    /// Binders above the hole.
    pub hole_ctx: Context,
}

pub const HOLE: MetaId = MetaId(0);

impl OneHoleContext {
    pub fn is_hole(&self) -> bool {
        self.path.is_empty()
    }

    /// `C[t]` for a closed `t`; binders above the hole do not capture.
    pub fn plug(&self, sig: &BindingSignature, t: &Term) -> Result<Term, HoweError> {
        let t = weaken(t, &sig.empty_ctx(), &self.hole_ctx);
        Ok(replace_at(sig, &self.term, &self.path, &t)?)
    }
}

fn replace_at(
    sig: &BindingSignature,
    t: &Term,
    path: &[usize],
    with: &Term,
) -> Result<Term, crate::syntax::SyntaxError> {
    let Some((&i, rest)) = path.split_first() else {
        return Ok(with.clone());
    };
    match t {
        Term::Op { op, sort, args } => {
            let mut args = args.clone();
            args[i] = replace_at(sig, &args[i], rest, with)?;
            Ok(Term::op(*op, *sort, args))
        }
        Term::Coerce { from, to, body } => coerce(sig, replace_at(sig, body, rest, with)?, *from, *to),
        _ => Ok(t.clone()),
    }
}

/// Every one-hole context obtained from `t` (of `sort` over `ctx`).
fn holes(sig: &BindingSignature, root: &Term, sort: SortId) -> Vec<OneHoleContext> {
    let mut out = Vec::new();
    let mut stack = vec![(root.clone(), sort, sig.empty_ctx(), Vec::new())];
    let hole = Term::meta(HOLE, Vec::new());
    while let Some((t, s, ctx, path)) = stack.pop() {
        for (i, (sub, ss, sc)) in immediate_subterms(sig, &t, &ctx).into_iter().enumerate() {
            let mut p = path.clone();
            p.push(i);
            stack.push((sub, ss, sc, p));
        }
        let term = match replace_at(sig, root, &path, &hole) {
            Ok(c) => c,
            Err(_) => continue,
        };
        out.push(OneHoleContext {
            term,
            path,
            hole_sort: s,
            hole_ctx: ctx,
        });
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongruenceCounterexample {
    pub left: Term,
    pub right: Term,
    pub context: OneHoleContext,
    pub plugged: (Term, Term),
    pub witness: Witness,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongruenceReport {
    pub params: CongruenceParams,
    /// Distinct related pairs available to draw from.
    pub related_pairs: usize,
    pub contexts: usize,
    pub samples: usize,
    /// Samples whose context was the bare hole.
    pub trivial: usize,
    pub holds: usize,
    pub inconclusive: usize,
    pub counterexamples: Vec<CongruenceCounterexample>,
}

impl CongruenceReport {
    pub fn ok(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

/// A compared sample: verdict, witness, and the two plugged terms.
type Plugged = (VerdictKind, Option<Witness>, Term, Term);

struct Sample {
    left: Term,
    right: Term,
    context: OneHoleContext,
}

/// Draws pairs related at `depth` and one-hole contexts of matching sort,
/// and compares the plugged terms at the inner depth. Sampling is fixed by
/// the seed; workers take contiguous chunks, so results do not depend on
/// the thread count.
pub fn congruence_sweep(dsig: &DynamicSignature, params: &CongruenceParams) -> Result<CongruenceReport, HoweError> {
    let sig = &dsig.binding;
    let mode = if params.values_only {
        PoolMode::ValuesOnly
    } else {
        PoolMode::Programs
    };
    let pool = SubstPool::new(sig, params.pool_size, mode);
    let closed = sig.empty_ctx();
    let mut en = Enumerator::new();

    let mut fp = Fingerprinter::new(dsig, pool.clone(), params.fuel)?;
    let mut pairs: BTreeMap<SortId, Vec<(Term, Term)>> = BTreeMap::new();
    for sort in sig.sorts.sorts() {
        let mut classes: BTreeMap<u32, Vec<Term>> = BTreeMap::new();
        for t in en.upto(sig, sort, &closed, params.term_size) {
            classes.entry(fp.class(&t, params.depth)?).or_default().push(t);
        }
        let list: Vec<(Term, Term)> = classes
            .values()
            .flat_map(|m| {
                m.iter()
                    .flat_map(move |a| m.iter().filter(move |b| *b != a).map(move |b| (a.clone(), b.clone())))
            })
            .collect();
        if !list.is_empty() {
            pairs.insert(sort, list);
        }
    }
    let mut contexts: BTreeMap<SortId, BTreeSet<OneHoleContext>> = BTreeMap::new();
    for sort in sig.sorts.sorts() {
        for t in en.upto(sig, sort, &closed, params.context_size) {
            for c in holes(sig, &t, sort) {
                if pairs.contains_key(&c.hole_sort) {
                    contexts.entry(c.hole_sort).or_default().insert(c);
                }
            }
        }
    }
    let contexts: BTreeMap<SortId, Vec<OneHoleContext>> = contexts
        .into_iter()
        .map(|(s, cs)| (s, cs.into_iter().collect()))
        .collect();
    let mut report = CongruenceReport {
        params: params.clone(),
        related_pairs: pairs.values().map(Vec::len).sum(),
        contexts: contexts.values().map(Vec::len).sum(),
        samples: 0,
        trivial: 0,
        holds: 0,
        inconclusive: 0,
        counterexamples: Vec::new(),
    };
    let flat: Vec<(SortId, &(Term, Term))> = pairs.iter().flat_map(|(s, l)| l.iter().map(move |p| (*s, p))).collect();
    if flat.is_empty() {
        return Ok(report);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let samples: Vec<Sample> = (0..params.samples)
        .map(|_| {
            let (sort, (a, b)) = flat[rng.gen_range(0..flat.len())];
            let cs = &contexts[&sort];
            Sample {
                left: a.clone(),
                right: b.clone(),
                context: cs[rng.gen_range(0..cs.len())].clone(),
            }
        })
        .collect();

    let threads = match params.threads {
        0 => thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    };
    let chunk = samples.len().div_ceil(threads).max(1);
    let inner = params.inner();
    let outcomes: Vec<Result<Vec<Plugged>, HoweError>> = thread::scope(|s| {
        let handles: Vec<_> = samples
            .chunks(chunk)
            .map(|part| {
                let pool = pool.clone();
                s.spawn(move || {
                    let mut checker = BisimChecker::new(dsig, pool, params.fuel)?;
                    part.iter()
                        .map(|smp| {
                            let c1 = smp.context.plug(sig, &smp.left)?;
                            let c2 = smp.context.plug(sig, &smp.right)?;
                            let v = checker.bisim(&c1, &c2, inner)?;
                            Ok((v.kind(), v.witness().cloned(), c1, c2))
                        })
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("congruence worker panicked"))
            .collect()
    });
    let results = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
    for (smp, (kind, witness, c1, c2)) in samples.iter().zip(results.into_iter().flatten()) {
        report.samples += 1;
        report.trivial += usize::from(smp.context.is_hole());
        match kind {
            VerdictKind::Holds => report.holds += 1,
            VerdictKind::Inconclusive => report.inconclusive += 1,
            VerdictKind::Fails => report.counterexamples.push(CongruenceCounterexample {
                left: smp.left.clone(),
                right: smp.right.clone(),
                context: smp.context.clone(),
                plugged: (c1, c2),
                witness: witness.expect("a failing verdict carries a witness"),
            }),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bisim::Verdict;
    use crate::instances::load_instance;
    use crate::surface::parse_term;

    const P: SortId = SortId(0);

    #[test]
    fn plugging_under_a_binder_does_not_capture() {
        let dsig = load_instance("cbn").unwrap();
        let sig = &dsig.binding;
        let root = parse_term(&dsig, "lam(x. app(x, x))", P).unwrap();
        let cs = holes(sig, &root, P);
        let c = cs.iter().find(|c| c.path == vec![0, 1]).unwrap();
        let plugged = c.plug(sig, &parse_term(&dsig, "I", P).unwrap()).unwrap();
        assert_eq!(plugged, parse_term(&dsig, "lam(x. app(x, lam(y. y)))", P).unwrap());
        let hole = cs.iter().find(|c| c.is_hole()).unwrap();
        assert_eq!(hole.plug(sig, &root).unwrap(), root);
    }

    #[test]
    fn identity_pair_in_an_application_context() {
        let dsig = load_instance("cbn").unwrap();
        let sig = &dsig.binding;
        let t1 = parse_term(&dsig, "lam(x. x)", P).unwrap();
        let t2 = parse_term(&dsig, "lam(x. app(lam(y. y), x))", P).unwrap();
        let root = parse_term(&dsig, "app(I, lam(z. z))", P).unwrap();
        let c = holes(sig, &root, P).into_iter().find(|c| c.path == vec![0]).unwrap();
        let (c1, c2) = (c.plug(sig, &t1).unwrap(), c.plug(sig, &t2).unwrap());
        let mut ev = crate::eval::Evaluator::new(&dsig).unwrap();
        let eval = dsig.lookup_label("eval").unwrap();
        let a = ev.transitions(&c1, eval, 8).unwrap();
        let b = ev.transitions(&c2, eval, 8).unwrap();
        assert!(a.is_complete() && b.is_complete());
        assert_eq!(a.targets, b.targets);
        let pool = SubstPool::new(sig, 5, PoolMode::ValuesOnly);
        let mut checker = BisimChecker::new(&dsig, pool, 8).unwrap();
        assert_eq!(checker.bisim(&c1, &c2, 3).unwrap(), Verdict::Holds);
    }

    #[test]
    fn sweep_is_reproducible_across_thread_counts() {
        let dsig = load_instance("cbn").unwrap();
        let params = CongruenceParams {
            samples: 30,
            term_size: 4,
            context_size: 3,
            pool_size: 4,
            seed: 11,
            threads: 1,
            ..CongruenceParams::default()
        };
        let one = congruence_sweep(&dsig, &params).unwrap();
        let many = congruence_sweep(
            &dsig,
            &CongruenceParams {
                threads: 3,
                ..params.clone()
            },
        )
        .unwrap();
        assert_eq!(one.samples, 30);
        assert_eq!((one.holds, one.inconclusive), (many.holds, many.inconclusive));
        assert!(one.ok());
    }
}
