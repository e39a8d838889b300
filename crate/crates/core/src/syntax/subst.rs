//! Renaming, simultaneous substitution and metavariable instantiation.
//!
//! With level-indexed variables, a substitution `σ : Γ → Δ` is lifted under a
//! binder introducing `B` by sending the bound levels `Γ_s + j` to `Δ_s + j`.
//! Assigned terms keep their free levels, but their own bound levels must
//! shift past the new binders (see [`weaken`]).

use std::collections::BTreeMap;

use super::{coerce, BindingSignature, Context, MetaId, MetaVar, SortId, SyntaxError, Term};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Assignment {
    term: Term,
    sort: SortId,
}

/// A simultaneous substitution from `source()` to `target`.
///
/// An entry for a variable of sort `s` normally has sort `s`. It may instead
/// have a strict supersort `s'` of `s`; such an entry replaces only the
/// coerced occurrences `Coerce(s -> s', x)` (the program counterpart of a
/// value variable) and makes bare occurrences an error.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Substitution {
    target: Context,
    entries: Vec<Vec<Assignment>>,
}

impl Substitution {
    pub fn identity(ctx: &Context) -> Self {
        let entries = (0..ctx.n_sorts())
            .map(|s| {
                let sort = SortId(s as u8);
                (1..=ctx.count(sort))
                    .map(|i| Assignment {
                        term: Term::var(sort, i),
                        sort,
                    })
                    .collect()
            })
            .collect();
        Substitution {
            target: ctx.clone(),
            entries,
        }
    }

    /// Builds a substitution whose entries are given in `Context::vars` order
    /// of `source`; each entry has the sort of its variable.
    pub fn from_terms(source: &Context, target: &Context, terms: Vec<Term>) -> Result<Self, SyntaxError> {
        let sorts: Vec<SortId> = source.vars().map(|(s, _)| s).collect();
        Self::from_sorted_terms(source, target, terms.into_iter().zip(sorts).collect())
    }

    /// Like [`Substitution::from_terms`] with an explicit sort per entry.
    pub fn from_sorted_terms(
        source: &Context,
        target: &Context,
        terms: Vec<(Term, SortId)>,
    ) -> Result<Self, SyntaxError> {
        let vars: Vec<(SortId, u32)> = source.vars().collect();
        if vars.len() != terms.len() {
            return Err(SyntaxError::SubstDomain {
                expected: format!("{} variables", vars.len()),
                found: format!("{} entries", terms.len()),
            });
        }
        let mut entries: Vec<Vec<Assignment>> = vec![Vec::new(); source.n_sorts()];
        for ((s, _), (term, sort)) in vars.into_iter().zip(terms) {
            entries[s.index()].push(Assignment { term, sort });
        }
        Ok(Substitution {
            target: target.clone(),
            entries,
        })
    }

    pub fn target(&self) -> &Context {
        &self.target
    }

    pub fn source(&self) -> Context {
        Context::from_counts(self.entries.iter().map(|e| e.len() as u32).collect())
    }

    /// Entries in `Context::vars` order of the source.
    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.entries.iter().flatten().map(|a| &a.term)
    }

    pub fn get(&self, sort: SortId, index: u32) -> Option<&Term> {
        self.entries
            .get(sort.index())
            .and_then(|e| e.get(index.checked_sub(1)? as usize))
            .map(|a| &a.term)
    }

    /// `σ[γ]`: post-composes every entry with `γ`.
    pub fn then(&self, sig: &BindingSignature, gamma: &Substitution) -> Result<Substitution, SyntaxError> {
        if gamma.source() != self.target {
            return Err(SyntaxError::SubstDomain {
                expected: self.target.render(&sig.sorts),
                found: gamma.source().render(&sig.sorts),
            });
        }
        let entries = self
            .entries
            .iter()
            .map(|es| {
                es.iter()
                    .map(|a| {
                        Ok(Assignment {
                            term: gamma.apply_in(sig, &a.term, &self.target)?,
                            sort: a.sort,
                        })
                    })
                    .collect::<Result<Vec<_>, SyntaxError>>()
            })
            .collect::<Result<_, _>>()?;
        Ok(Substitution {
            target: gamma.target.clone(),
            entries,
        })
    }

    /// Applies the substitution to a term living exactly in `source()`.
    pub fn apply(&self, sig: &BindingSignature, term: &Term) -> Result<Term, SyntaxError> {
        self.go(sig, term, &self.source())
    }

    fn apply_in(&self, sig: &BindingSignature, term: &Term, src: &Context) -> Result<Term, SyntaxError> {
        self.go(sig, term, src)
    }

    fn lookup(&self, sort: SortId, index: u32, src: &Context) -> Result<Lookup<'_>, SyntaxError> {
        let n = src.count(sort);
        if index == 0 {
            return Err(SyntaxError::VarOutOfRange {
                sort: format!("{sort}"),
                index,
                ctx: format!("{:?}", src.counts()),
            });
        }
        if index <= n {
            let a = &self.entries[sort.index()][(index - 1) as usize];
            Ok(Lookup::Entry(a))
        } else {
            Ok(Lookup::Bound(Term::var(sort, self.target.count(sort) + (index - n))))
        }
    }

    // `src` is always the substitution's own source; bound levels sit above
    // it. `under` counts the binders crossed so far: an entry placed there
    // must have its own bound levels shifted past them.
    fn go(&self, sig: &BindingSignature, term: &Term, src: &Context) -> Result<Term, SyntaxError> {
        self.go_under(sig, term, src, &Context::empty(src.n_sorts()))
    }

    fn place(&self, a: &Assignment, under: &Context) -> Term {
        if under.is_closed() {
            a.term.clone()
        } else {
            weaken(&a.term, &self.target, under)
        }
    }

    fn go_under(
        &self,
        sig: &BindingSignature,
        term: &Term,
        src: &Context,
        under: &Context,
    ) -> Result<Term, SyntaxError> {
        match term {
            Term::Var { sort, index } => match self.lookup(*sort, *index, src)? {
                Lookup::Bound(t) => Ok(t),
                Lookup::Entry(a) if a.sort == *sort => Ok(self.place(a, under)),
                Lookup::Entry(a) => Err(SyntaxError::SortMismatch {
                    expected: sig.sorts.name(*sort).to_string(),
                    found: format!("{} (counterpart entry at a bare occurrence)", sig.sorts.name(a.sort)),
                }),
            },
            Term::Meta { meta, args } => Ok(Term::Meta {
                meta: *meta,
                args: args
                    .iter()
                    .map(|a| self.go_under(sig, a, src, under))
                    .collect::<Result<_, _>>()?,
            }),
            Term::Op { op, sort, args } => Ok(Term::Op {
                op: *op,
                sort: *sort,
                args: args
                    .iter()
                    .zip(&sig.op(*op).args)
                    .map(|(a, spec)| self.go_under(sig, a, src, &under.extend(&spec.binds)))
                    .collect::<Result<_, _>>()?,
            }),
            Term::Coerce { from, to, body } => {
                if let Term::Var { sort, index } = body.as_ref() {
                    if let Lookup::Entry(a) = self.lookup(*sort, *index, src)? {
                        if a.sort == *to {
                            return Ok(self.place(a, under));
                        }
                    }
                }
                let inner = self.go_under(sig, body, src, under)?;
                coerce(sig, inner, *from, *to)
            }
        }
    }
}

/// Moves a term over `base` under `extra` further binders: free levels stay,
/// bound levels (above `base`) shift past the new binders.
pub fn weaken(term: &Term, base: &Context, extra: &Context) -> Term {
    match term {
        Term::Var { sort, index } => {
            if *index > base.count(*sort) {
                Term::var(*sort, index + extra.count(*sort))
            } else {
                term.clone()
            }
        }
        Term::Meta { meta, args } => Term::Meta {
            meta: *meta,
            args: args.iter().map(|a| weaken(a, base, extra)).collect(),
        },
        Term::Op { op, sort, args } => Term::Op {
            op: *op,
            sort: *sort,
            args: args.iter().map(|a| weaken(a, base, extra)).collect(),
        },
        Term::Coerce { from, to, body } => Term::Coerce {
            from: *from,
            to: *to,
            body: Box::new(weaken(body, base, extra)),
        },
    }
}

enum Lookup<'a> {
    Entry(&'a Assignment),
    Bound(Term),
}

/// A variable-for-variable map, per sort.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Renaming {
    target: Context,
    maps: Vec<Vec<u32>>,
}

impl Renaming {
    pub fn new(target: &Context, maps: Vec<Vec<u32>>) -> Result<Self, SyntaxError> {
        for (s, m) in maps.iter().enumerate() {
            let n = target.count(SortId(s as u8));
            if let Some(&bad) = m.iter().find(|&&j| j == 0 || j > n) {
                return Err(SyntaxError::VarOutOfRange {
                    sort: format!("s{s}"),
                    index: bad,
                    ctx: format!("{:?}", target.counts()),
                });
            }
        }
        Ok(Renaming {
            target: target.clone(),
            maps,
        })
    }

    pub fn identity(ctx: &Context) -> Self {
        Renaming {
            target: ctx.clone(),
            maps: ctx.counts().iter().map(|&n| (1..=n).collect()).collect(),
        }
    }

    /// The inclusion `Γ → Γ + Δ`.
    pub fn weakening(ctx: &Context, extra: &Context) -> Self {
        Renaming {
            target: ctx.extend(extra),
            maps: ctx.counts().iter().map(|&n| (1..=n).collect()).collect(),
        }
    }

    pub fn source(&self) -> Context {
        Context::from_counts(self.maps.iter().map(|m| m.len() as u32).collect())
    }

    pub fn target(&self) -> &Context {
        &self.target
    }

    /// `self ∘ first`: first apply `first`, then `self`.
    pub fn after(&self, first: &Renaming) -> Result<Renaming, SyntaxError> {
        if first.target != self.source() {
            return Err(SyntaxError::Malformed("renamings do not compose".into()));
        }
        Ok(Renaming {
            target: self.target.clone(),
            maps: first
                .maps
                .iter()
                .enumerate()
                .map(|(s, m)| m.iter().map(|&j| self.maps[s][(j - 1) as usize]).collect())
                .collect(),
        })
    }

    pub fn as_substitution(&self) -> Substitution {
        let source = self.source();
        let terms = self
            .maps
            .iter()
            .enumerate()
            .flat_map(|(s, m)| m.iter().map(move |&j| Term::var(SortId(s as u8), j)))
            .collect();
        Substitution::from_terms(&source, &self.target, terms).expect("sizes agree")
    }

    pub fn apply(&self, term: &Term) -> Result<Term, SyntaxError> {
        let src = self.source();
        self.go(term, &src)
    }

    fn go(&self, term: &Term, src: &Context) -> Result<Term, SyntaxError> {
        Ok(match term {
            Term::Var { sort, index } => {
                let n = src.count(*sort);
                if *index == 0 {
                    return Err(SyntaxError::VarOutOfRange {
                        sort: format!("{sort}"),
                        index: 0,
                        ctx: format!("{:?}", src.counts()),
                    });
                }
                if *index <= n {
                    Term::var(*sort, self.maps[sort.index()][(*index - 1) as usize])
                } else {
                    Term::var(*sort, self.target.count(*sort) + (*index - n))
                }
            }
            Term::Meta { meta, args } => Term::Meta {
                meta: *meta,
                args: args.iter().map(|a| self.go(a, src)).collect::<Result<_, _>>()?,
            },
            Term::Op { op, sort, args } => Term::Op {
                op: *op,
                sort: *sort,
                args: args.iter().map(|a| self.go(a, src)).collect::<Result<_, _>>()?,
            },
            Term::Coerce { from, to, body } => Term::Coerce {
                from: *from,
                to: *to,
                body: Box::new(self.go(body, src)?),
            },
        })
    }
}

/// Assignment of metavariables to terms over their parameter contexts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MetaEnv {
    map: BTreeMap<MetaId, Term>,
}

impl MetaEnv {
    pub fn new() -> Self {
        MetaEnv::default()
    }

    pub fn insert(&mut self, meta: MetaId, term: Term) {
        self.map.insert(meta, term);
    }

    pub fn get(&self, meta: MetaId) -> Option<&Term> {
        self.map.get(&meta)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MetaId, &Term)> {
        self.map.iter()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Replaces every `k(args)` in `term` (living in `ctx`) by `env(k)` with
    /// its parameters simultaneously substituted by the instantiated `args`.
    pub fn instantiate(
        &self,
        sig: &BindingSignature,
        metas: &[MetaVar],
        term: &Term,
        ctx: &Context,
    ) -> Result<Term, SyntaxError> {
        match term {
            Term::Var { .. } => Ok(term.clone()),
            Term::Meta { meta, args } => {
                let decl = &metas[meta.index()];
                let body = self
                    .map
                    .get(meta)
                    .ok_or_else(|| SyntaxError::MissingMeta(decl.name.clone()))?;
                let args = args
                    .iter()
                    .map(|a| self.instantiate(sig, metas, a, ctx))
                    .collect::<Result<Vec<_>, _>>()?;
                let sigma = Substitution::from_terms(&decl.params, ctx, args)?;
                sigma.apply(sig, body)
            }
            Term::Op { op, sort, args } => {
                let o = sig.op(*op);
                let args = args
                    .iter()
                    .zip(&o.args)
                    .map(|(a, spec)| self.instantiate(sig, metas, a, &ctx.extend(&spec.binds)))
                    .collect::<Result<_, _>>()?;
                Ok(Term::Op {
                    op: *op,
                    sort: *sort,
                    args,
                })
            }
            Term::Coerce { from, to, body } => {
                let inner = self.instantiate(sig, metas, body, ctx)?;
                coerce(sig, inner, *from, *to)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{ArgSpec, OpId, OpKind, Operator, SortTable};

    fn cbn() -> (BindingSignature, OpId, OpId) {
        let sorts = SortTable::single("p");
        let p = SortId(0);
        let mut sig = BindingSignature::new(sorts, p);
        let lam = sig.plain("lam", vec![(p, Context::single(1, p, 1))], p).unwrap();
        let app = sig
            .plain("app", vec![(p, Context::empty(1)), (p, Context::empty(1))], p)
            .unwrap();
        (sig, lam, app)
    }

    const P: SortId = SortId(0);

    fn lam(l: OpId, body: Term) -> Term {
        Term::op(l, P, vec![body])
    }

    fn app(a: OpId, f: Term, x: Term) -> Term {
        Term::op(a, P, vec![f, x])
    }

    fn ctx(n: u32) -> Context {
        Context::from_counts(vec![n])
    }

    #[test]
    fn unit_law_on_variable() {
        let (sig, l, _) = cbn();
        let id = lam(l, Term::var(P, 1));
        let sigma = Substitution::from_terms(&ctx(1), &ctx(0), vec![id.clone()]).unwrap();
        assert_eq!(sigma.apply(&sig, &Term::var(P, 1)).unwrap(), id);
    }

    #[test]
    fn substitution_under_binder_avoids_capture() {
        // lam(x. app(x, #1)) in context 1, #1 := lam(y.y); under x the
        // placed lambda binds level 2
        let (sig, l, a) = cbn();
        let t = lam(l, app(a, Term::var(P, 2), Term::var(P, 1)));
        let id = lam(l, Term::var(P, 1));
        let sigma = Substitution::from_terms(&ctx(1), &ctx(0), vec![id]).unwrap();
        let out = sigma.apply(&sig, &t).unwrap();
        assert_eq!(out, lam(l, app(a, Term::var(P, 1), lam(l, Term::var(P, 2)))));
    }

    #[test]
    fn substitution_into_open_target_shifts_bound_levels() {
        // lam(x. app(x, #1)) in ctx 1 with #1 := #2 in ctx 2
        let (sig, l, a) = cbn();
        let t = lam(l, app(a, Term::var(P, 2), Term::var(P, 1)));
        let sigma = Substitution::from_terms(&ctx(1), &ctx(2), vec![Term::var(P, 2)]).unwrap();
        let out = sigma.apply(&sig, &t).unwrap();
        assert_eq!(out, lam(l, app(a, Term::var(P, 3), Term::var(P, 2))));
    }

    #[test]
    fn meta_args_are_substituted() {
        let (sig, _, a) = cbn();
        let k = Term::meta(MetaId(0), vec![Term::var(P, 1)]);
        let arg = app(a, Term::var(P, 1), Term::var(P, 1));
        let sigma = Substitution::from_terms(&ctx(1), &ctx(1), vec![arg.clone()]).unwrap();
        assert_eq!(sigma.apply(&sig, &k).unwrap(), Term::meta(MetaId(0), vec![arg]));
    }

    #[test]
    fn rename_simple() {
        let r = Renaming::new(&ctx(2), vec![vec![2]]).unwrap();
        assert_eq!(r.apply(&Term::var(P, 1)).unwrap(), Term::var(P, 2));
        assert!(Renaming::new(&ctx(1), vec![vec![2]]).is_err());
    }

    #[test]
    fn projection_metavariable_instantiates_to_argument() {
        let (sig, l, _) = cbn();
        let metas = vec![MetaVar {
            name: "k".into(),
            params: ctx(1),
            sort: P,
        }];
        let e = lam(l, Term::var(P, 1));
        let mut env = MetaEnv::new();
        env.insert(MetaId(0), Term::var(P, 1));
        let t = Term::meta(MetaId(0), vec![e.clone()]);
        assert_eq!(env.instantiate(&sig, &metas, &t, &ctx(0)).unwrap(), e);
    }

    #[test]
    fn missing_metavariable_is_named() {
        let (sig, _, _) = cbn();
        let metas = vec![MetaVar {
            name: "k7".into(),
            params: ctx(0),
            sort: P,
        }];
        let err = MetaEnv::new()
            .instantiate(&sig, &metas, &Term::meta(MetaId(0), vec![]), &ctx(0))
            .unwrap_err();
        assert_eq!(err, SyntaxError::MissingMeta("k7".into()));
    }

    #[test]
    fn counterpart_entry_replaces_coerced_occurrence_only() {
        let sorts = SortTable::howe();
        let (v, p) = (SortId(0), SortId(1));
        let mut sig = BindingSignature::new(sorts, v);
        let app = sig
            .add_op(Operator {
                name: "app".into(),
                result_sort: p,
                args: vec![
                    ArgSpec {
                        sort: p,
                        binds: Context::empty(2),
                    },
                    ArgSpec {
                        sort: p,
                        binds: Context::empty(2),
                    },
                ],
                kind: OpKind::Program,
            })
            .unwrap();
        let x = Term::Coerce {
            from: v,
            to: p,
            body: Box::new(Term::var(v, 1)),
        };
        let prog = Term::op(app, p, vec![x.clone(), x.clone()]);
        let src = Context::from_counts(vec![1, 0]);
        let sigma = Substitution::from_sorted_terms(&src, &Context::empty(2), vec![(prog.clone(), p)]).unwrap();
        let t = Term::op(app, p, vec![x.clone(), x]);
        assert_eq!(
            sigma.apply(&sig, &t).unwrap(),
            Term::op(app, p, vec![prog.clone(), prog.clone()])
        );
        assert!(sigma.apply(&sig, &Term::var(v, 1)).is_err());
    }
}
