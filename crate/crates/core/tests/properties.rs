use proptest::prelude::*;
use proptest::sample::select;

use cellsem::bisim::{BisimChecker, PoolMode, Relation, SubstPool};
use cellsem::eval::Evaluator;
use cellsem::howe::{fixpoint_check, inclusion_check, reflexivity_check, TermId};
use cellsem::howe::{
    relational_transitive_closure, saturate, transitive_closure, Universe, UniverseRelation, UniverseSpec,
};
use cellsem::instances::load_instance;
use cellsem::surface::{parse_term_in, Printer};
use cellsem::syntax::{check_term, coerce, enumerate_terms, Context, Renaming, SortId, Term};

const P: SortId = SortId(0);

fn ctx(n: u32) -> Context {
    Context::from_counts(vec![n])
}

fn cbn_terms(n: u32, size: usize) -> Vec<Term> {
    let dsig = load_instance("cbn").unwrap();
    enumerate_terms(&dsig.binding, P, &ctx(n), size)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn renaming_is_functorial(
        t in select(cbn_terms(2, 6)),
        m1 in prop::collection::vec(1u32..=3, 2),
        m2 in prop::collection::vec(1u32..=2, 3),
    ) {
        let r1 = Renaming::new(&ctx(3), vec![m1]).unwrap();
        let r2 = Renaming::new(&ctx(2), vec![m2]).unwrap();
        let stepwise = r2.apply(&r1.apply(&t).unwrap()).unwrap();
        prop_assert_eq!(&stepwise, &r2.after(&r1).unwrap().apply(&t).unwrap());
        prop_assert_eq!(Renaming::identity(&ctx(2)).apply(&t).unwrap(), t.clone());
        let dsig = load_instance("cbn").unwrap();
        prop_assert_eq!(r1.as_substitution().apply(&dsig.binding, &t).unwrap(), r1.apply(&t).unwrap());
    }

    #[test]
    fn printing_round_trips(t in select(cbn_terms(2, 6))) {
        let dsig = load_instance("cbn").unwrap();
        let text = Printer::new(&dsig).term(&t, &ctx(2));
        prop_assert_eq!(parse_term_in(&dsig, &text, P, &ctx(2)).unwrap(), t);
    }

    #[test]
    fn fuel_is_monotone_on_nondet(
        t in select({
            let dsig = load_instance("nondet").unwrap();
            enumerate_terms(&dsig.binding, P, &dsig.binding.empty_ctx(), 6)
        }),
        f in 0u32..6,
        extra in 1u32..4,
    ) {
        let dsig = load_instance("nondet").unwrap();
        let mut ev = Evaluator::new(&dsig).unwrap();
        for l in dsig.labels_from(P) {
            let (a, b) = (ev.transitions(&t, l, f).unwrap(), ev.transitions(&t, l, f + extra).unwrap());
            prop_assert!(a.targets.is_subset(&b.targets));
            if a.is_complete() {
                prop_assert_eq!(&a, &b);
            }
        }
    }
}

fn cbv_values(size: usize) -> Vec<Term> {
    let dsig = load_instance("cbv").unwrap();
    let v = dsig.binding.sorts.lookup("v").unwrap();
    enumerate_terms(&dsig.binding, v, &Context::from_counts(vec![1, 0]), size)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn coercion_is_idempotent_and_commutes_with_substitution(
        t in select(cbv_values(5)),
        e in select(cbv_values(3)),
    ) {
        let dsig = load_instance("cbv").unwrap();
        let sig = &dsig.binding;
        let (v, p) = (sig.sorts.lookup("v").unwrap(), sig.sorts.lookup("p").unwrap());
        let one = Context::from_counts(vec![1, 0]);
        prop_assert_eq!(coerce(sig, t.clone(), v, v).unwrap(), t.clone());
        let c = coerce(sig, t.clone(), v, p).unwrap();
        prop_assert!(check_term(sig, &[], &c, p, &one).is_ok());
        prop_assert_eq!(coerce(sig, c.clone(), p, p).unwrap(), c.clone());
        let sigma = cellsem::syntax::Substitution::from_terms(&one, &one, vec![e]).unwrap();
        let inside = coerce(sig, sigma.apply(sig, &t).unwrap(), v, p).unwrap();
        prop_assert_eq!(sigma.apply(sig, &c).unwrap(), inside);
    }

    #[test]
    fn bisimilarity_is_symmetric_and_antitone_in_depth(
        a in select(cbn_terms(0, 6)),
        b in select(cbn_terms(0, 6)),
    ) {
        let dsig = load_instance("cbn").unwrap();
        let pool = SubstPool::new(&dsig.binding, 3, PoolMode::ValuesOnly);
        let mut c = BisimChecker::new(&dsig, pool, 6).unwrap();
        let mut previous = true;
        for d in 0..4 {
            let (ab, ba) = (c.bisim(&a, &b, d).unwrap(), c.bisim(&b, &a, d).unwrap());
            prop_assert_eq!(ab.kind(), ba.kind());
            // holding at depth d forces holding at every smaller depth
            prop_assert!(previous || !ab.holds(), "holds at {} but not below", d);
            previous = ab.holds();
        }
        prop_assert!(c.bisim(&a, &a, 3).unwrap().holds());
    }
}

fn relation(pairs: &[(u32, u32)]) -> Relation {
    let c = ctx(8);
    let mut r = Relation::new();
    for &(a, b) in pairs {
        r.insert(P, &c, Term::var(P, a), Term::var(P, b));
    }
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn transitive_closure_is_an_idempotent_closure(
        pairs in prop::collection::vec((1u32..=8, 1u32..=8), 0..20),
    ) {
        let r = relation(&pairs);
        let tc = transitive_closure(&r);
        prop_assert!(r.is_subset(&tc));
        prop_assert_eq!(&transitive_closure(&tc), &tc);
        prop_assert_eq!(&relational_transitive_closure(&r), &tc);
        let c = ctx(8);
        for (_, _, a, b) in tc.iter() {
            for (x, y) in tc.at(P, &c) {
                if x == b {
                    prop_assert!(tc.contains(P, &c, a, y));
                }
            }
        }
    }
}

fn small_universe() -> Universe {
    let dsig = load_instance("cbn").unwrap();
    Universe::new(&dsig.binding, UniverseSpec { size: 4, ctx_bound: 1 })
}

/// The diagonal plus the picked pairs; the closure is only reflexive over a
/// reflexive base.
fn random_base(u: &Universe, picks: &[(usize, usize, usize)]) -> UniverseRelation {
    let indices: Vec<_> = u.indices().collect();
    let mut b = UniverseRelation::diagonal(u);
    for &(ix, i, j) in picks {
        let ix = indices[ix % indices.len()];
        let n = u.len(ix);
        if n > 0 {
            b.insert(ix, TermId((i % n) as u32), TermId((j % n) as u32));
        }
    }
    b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn howe_closure_is_monotone_in_its_base(
        first in prop::collection::vec((0usize..64, 0usize..512, 0usize..512), 0..40),
        more in prop::collection::vec((0usize..64, 0usize..512, 0usize..512), 0..40),
    ) {
        let u = small_universe();
        let b1 = random_base(&u, &first);
        let mut b2 = b1.clone();
        b2.union_with(&random_base(&u, &more));
        prop_assert!(b1.is_subset(&b2));
        let (h1, h2) = (saturate(&u, &b1), saturate(&u, &b2));
        prop_assert!(h1.relation.is_subset(&h2.relation));
        for (b, h) in [(&b1, &h1), (&b2, &h2)] {
            prop_assert!(reflexivity_check(&u, &h.relation).ok());
            prop_assert!(inclusion_check(&u, b, &h.relation).ok());
            prop_assert!(fixpoint_check(&u, b, &h.relation).ok());
        }
    }
}
