//! Bounded, duplicate-free, deterministic enumeration of well-formed terms.
//!
//! Order: by size; within a size, variables (by level), then operator
//! applications in declaration order (arguments by size composition, then
//! lexicographically), then coercions.

use std::collections::HashMap;
use std::rc::Rc;

use super::{BindingSignature, Context, SortId, Term};

#[derive(Default)]
pub struct Enumerator {
    cache: HashMap<(SortId, Context, usize), Rc<Vec<Term>>>,
}

impl Enumerator {
    pub fn new() -> Self {
        Self::default()
    }

    /// All terms of exactly `size` nodes.
    pub fn exact(&mut self, sig: &BindingSignature, sort: SortId, ctx: &Context, size: usize) -> Rc<Vec<Term>> {
        let key = (sort, ctx.clone(), size);
        if let Some(hit) = self.cache.get(&key) {
            return hit.clone();
        }
        let mut out = Vec::new();
        if size == 1 {
            out.extend((1..=ctx.count(sort)).map(|i| Term::var(sort, i)));
        }
        if size >= 1 {
            for (op, annot) in sig.constructors(sort) {
                let spec = &sig.op(op).args;
                if spec.is_empty() {
                    if size == 1 {
                        out.push(Term::op(op, annot, Vec::new()));
                    }
                    continue;
                }
                if size < 1 + spec.len() {
                    continue;
                }
                let slots: Vec<(SortId, Context)> = spec
                    .iter()
                    .enumerate()
                    .map(|(i, a)| (sig.arg_sort(op, annot, i), ctx.extend(&a.binds)))
                    .collect();
                for split in compositions(size - 1, slots.len()) {
                    let lists: Vec<Rc<Vec<Term>>> = slots
                        .iter()
                        .zip(&split)
                        .map(|((s, c), &n)| self.exact(sig, *s, c, n))
                        .collect();
                    if lists.iter().any(|l| l.is_empty()) {
                        continue;
                    }
                    for args in product(&lists) {
                        out.push(Term::op(op, annot, args));
                    }
                }
            }
            if size >= 2 {
                for from in sig.sorts.sorts() {
                    if from == sort || !sig.sorts.coerces(from, sort) {
                        continue;
                    }
                    let inner = self.exact(sig, from, ctx, size - 1);
                    for t in inner.iter() {
                        let normal = match t {
                            Term::Coerce { .. } => false,
                            Term::Op { op, .. } => !sig.op(*op).is_value_op(),
                            _ => true,
                        };
                        if normal {
                            out.push(Term::Coerce {
                                from,
                                to: sort,
                                body: Box::new(t.clone()),
                            });
                        }
                    }
                }
            }
        }
        let out = Rc::new(out);
        self.cache.insert(key, out.clone());
        out
    }

    pub fn upto(&mut self, sig: &BindingSignature, sort: SortId, ctx: &Context, max_size: usize) -> Vec<Term> {
        (1..=max_size)
            .flat_map(|n| self.exact(sig, sort, ctx, n).as_ref().clone())
            .collect()
    }
}

/// Ordered compositions of `total` into `parts` positive summands.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    if parts == 1 {
        return if total >= 1 { vec![vec![total]] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in 1..=total.saturating_sub(parts - 1) {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn product(lists: &[Rc<Vec<Term>>]) -> Vec<Vec<Term>> {
    let mut acc: Vec<Vec<Term>> = vec![Vec::new()];
    for l in lists {
        let mut next = Vec::with_capacity(acc.len() * l.len());
        for prefix in &acc {
            for t in l.iter() {
                let mut v = prefix.clone();
                v.push(t.clone());
                next.push(v);
            }
        }
        acc = next;
    }
    acc
}

/// Every well-formed term of `sort` over `ctx` with at most `max_size` nodes.
pub fn enumerate_terms(sig: &BindingSignature, sort: SortId, ctx: &Context, max_size: usize) -> Vec<Term> {
    Enumerator::new().upto(sig, sort, ctx, max_size)
}

/// Same as [`enumerate_terms`], sharing a cache across calls.
pub fn enumerate_terms_upto(
    en: &mut Enumerator,
    sig: &BindingSignature,
    sort: SortId,
    ctx: &Context,
    max_size: usize,
) -> Vec<Term> {
    en.upto(sig, sort, ctx, max_size)
}

/// Immediate subterms with their sorts and (extended) contexts.
pub fn immediate_subterms(sig: &BindingSignature, term: &Term, ctx: &Context) -> Vec<(Term, SortId, Context)> {
    match term {
        Term::Var { .. } => Vec::new(),
        Term::Op { op, sort, args } => args
            .iter()
            .enumerate()
            .map(|(i, a)| {
                (
                    a.clone(),
                    sig.arg_sort(*op, *sort, i),
                    ctx.extend(&sig.op(*op).args[i].binds),
                )
            })
            .collect(),
        Term::Coerce { from, body, .. } => vec![(body.as_ref().clone(), *from, ctx.clone())],
        Term::Meta { .. } => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{check_term, SortTable};

    fn cbn() -> BindingSignature {
        let p = SortId(0);
        let mut sig = BindingSignature::new(SortTable::single("p"), p);
        sig.plain("lam", vec![(p, Context::single(1, p, 1))], p).unwrap();
        sig.plain("app", vec![(p, Context::empty(1)), (p, Context::empty(1))], p)
            .unwrap();
        sig
    }

    #[test]
    fn closed_size_two_is_identity_only() {
        let sig = cbn();
        let terms = enumerate_terms(&sig, SortId(0), &Context::empty(1), 2);
        assert_eq!(terms.len(), 1);
        assert_eq!(
            terms[0],
            Term::op(crate::syntax::OpId(0), SortId(0), vec![Term::var(SortId(0), 1)])
        );
    }

    #[test]
    fn size_zero_is_empty() {
        let sig = cbn();
        assert!(enumerate_terms(&sig, SortId(0), &Context::empty(1), 0).is_empty());
    }

    #[test]
    fn counts_are_monotone_and_prefix_closed() {
        let sig = cbn();
        let ctx = Context::from_counts(vec![1]);
        let mut prev: Vec<Term> = Vec::new();
        for n in 1..=6 {
            let cur = enumerate_terms(&sig, SortId(0), &ctx, n);
            assert!(cur.len() >= prev.len());
            assert_eq!(&cur[..prev.len()], &prev[..]);
            prev = cur;
        }
    }

    #[test]
    fn all_well_formed_and_distinct() {
        let sig = cbn();
        let ctx = Context::from_counts(vec![2]);
        let terms = enumerate_terms(&sig, SortId(0), &ctx, 6);
        let set: std::collections::BTreeSet<_> = terms.iter().collect();
        assert_eq!(set.len(), terms.len());
        for t in &terms {
            check_term(&sig, &[], t, SortId(0), &ctx).unwrap();
            assert!(t.size() <= 6);
        }
    }

    #[test]
    fn compositions_count() {
        // C(n-1, k-1)
        assert_eq!(compositions(5, 2).len(), 4);
        assert_eq!(compositions(5, 3).len(), 6);
        assert_eq!(compositions(2, 3).len(), 0);
    }
}
