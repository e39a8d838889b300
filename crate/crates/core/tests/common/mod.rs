//! Exhaustive law checks shared by the acceptance harness and the property
//! suites.
#![allow(dead_code)]

use cellsem::eval::Evaluator;
use cellsem::rules::DynamicSignature;
use cellsem::syntax::{enumerate_terms, BindingSignature, Context, Renaming, SortId, Substitution, Term};

#[derive(Debug, Default)]
pub struct Tally {
    pub checked: usize,
    pub violations: usize,
    /// The first few violations.
    pub examples: Vec<String>,
}

impl Tally {
    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
            if self.examples.len() < 8 {
                self.examples.push(what());
            }
        }
    }

    pub fn ok(&self) -> bool {
        self.violations == 0
    }
}

/// Every substitution `ctx → target` whose entries are terms of at most
/// `pool_size` nodes over `target`.
pub fn substitutions(
    sig: &BindingSignature,
    source: &Context,
    target: &Context,
    pool_size: usize,
) -> Vec<Substitution> {
    let mut partial: Vec<Vec<Term>> = vec![Vec::new()];
    for (sort, _) in source.vars() {
        let pool = enumerate_terms(sig, sort, target, pool_size);
        partial = partial
            .iter()
            .flat_map(|p| {
                pool.iter().map(move |t| {
                    let mut q = p.clone();
                    q.push(t.clone());
                    q
                })
            })
            .collect();
    }
    partial
        .into_iter()
        .map(|terms| Substitution::from_terms(source, target, terms).expect("one entry per variable"))
        .collect()
}

/// `σ↑`: the lift of `sigma` under binders `binds`, built entry by entry as
/// `σ` followed by the weakening `Δ → Δ + B`, extended by the fresh levels.
fn lifted(sigma: &Substitution, binds: &Context) -> Substitution {
    let (gamma, delta) = (sigma.source(), sigma.target().clone());
    let wk = Renaming::weakening(&delta, binds);
    let source = gamma.extend(binds);
    let terms = source
        .vars()
        .map(|(s, i)| {
            if i <= gamma.count(s) {
                wk.apply(sigma.get(s, i).expect("in range")).expect("renaming applies")
            } else {
                Term::var(s, delta.count(s) + i - gamma.count(s))
            }
        })
        .collect();
    Substitution::from_terms(&source, &delta.extend(binds), terms).expect("one entry per variable")
}

/// Unit, associativity of action and composition, and the lifting of
/// substitutions under binders, for every term of `sort` with at most
/// `term_size` nodes over `gamma`, with substitutions `gamma → delta → theta
/// → delta` drawn from terms of at most `pool_size` nodes.
pub fn substitution_laws(
    sig: &BindingSignature,
    sort: SortId,
    gamma: &Context,
    delta: &Context,
    theta: &Context,
    term_size: usize,
    pool_size: usize,
) -> Tally {
    let mut tally = Tally::default();
    let terms = enumerate_terms(sig, sort, gamma, term_size);
    let sigmas = substitutions(sig, gamma, delta, pool_size);
    let gammas = substitutions(sig, delta, theta, pool_size);
    let deltas = substitutions(sig, theta, delta, pool_size);
    let id_g = Substitution::identity(gamma);
    let id_d = Substitution::identity(delta);

    for t in &terms {
        tally.check(id_g.apply(sig, t).as_ref() == Ok(t), || format!("identity moves {t:?}"));
    }
    for s in &sigmas {
        tally.check(s.then(sig, &id_d).as_ref() == Ok(s), || {
            format!("right unit fails for {s:?}")
        });
        tally.check(id_g.then(sig, s).as_ref() == Ok(s), || {
            format!("left unit fails for {s:?}")
        });
    }
    for s in &sigmas {
        for g in &gammas {
            let sg = s.then(sig, g).expect("composable");
            for t in &terms {
                let stepwise = s.apply(sig, t).and_then(|u| g.apply(sig, &u));
                tally.check(stepwise == sg.apply(sig, t), || {
                    format!("action is not associative on {t:?}")
                });
            }
            for d in &deltas {
                let left = sg.then(sig, d);
                let right = g.then(sig, d).and_then(|gd| s.then(sig, &gd));
                tally.check(left.is_ok() && left == right, || {
                    format!("composition is not associative: {s:?} {g:?} {d:?}")
                });
            }
        }
    }
    for t in &terms {
        let Term::Op { op, sort: at, args } = t else {
            continue;
        };
        let specs = &sig.op(*op).args;
        if specs.iter().all(|a| a.binds.is_closed()) {
            continue;
        }
        for s in &sigmas {
            let manual: Result<Vec<Term>, _> = args
                .iter()
                .zip(specs)
                .map(|(a, spec)| lifted(s, &spec.binds).apply(sig, a))
                .collect();
            let expected = manual.map(|args| Term::op(*op, *at, args));
            tally.check(s.apply(sig, t) == expected, || {
                format!("lifting under a binder differs on {t:?}")
            });
        }
    }
    tally
}

/// For every closed term of `sort` up to `size` and every pair of fuels
/// `f < g` up to `max_fuel`: targets grow with fuel, and a complete set at
/// `f` is the final answer.
pub fn fuel_laws(dsig: &DynamicSignature, sort: SortId, size: usize, max_fuel: u32) -> Tally {
    let mut tally = Tally::default();
    let mut ev = Evaluator::new(dsig).expect("valid signature");
    let terms = enumerate_terms(&dsig.binding, sort, &dsig.binding.empty_ctx(), size);
    for l in dsig.labels_from(sort) {
        for t in &terms {
            let sets: Vec<_> = (0..=max_fuel)
                .map(|f| ev.transitions(t, l, f).expect("evaluates"))
                .collect();
            for f in 0..sets.len() {
                for g in f + 1..sets.len() {
                    let (a, b) = (&sets[f], &sets[g]);
                    tally.check(a.targets.is_subset(&b.targets), || {
                        format!("{t:?}: fuel {f} finds a target fuel {g} misses")
                    });
                    if a.is_complete() {
                        tally.check(a == b, || format!("{t:?}: complete at fuel {f} but fuel {g} differs"));
                    }
                }
            }
        }
    }
    tally
}
