use serde::{Deserialize, Serialize};

use crate::syntax::{
    check_term, coerce, enumerate_terms, BindingSignature, Context, SortId, Substitution, SyntaxError, Term,
};

/// Which closed terms may replace a variable whose sort has a supersort.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolMode {
    /// Only terms of the variable's own sort (values for value variables).
    ValuesOnly,
    /// Also closed terms of each supersort, used at the variable's coerced
    /// occurrences (a value variable read as a program).
    Programs,
}

/// One entry of a closing substitution. `sort` is the variable's sort, or a
/// supersort for a counterpart entry.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PoolEntry {
    pub term: Term,
    pub sort: SortId,
}

/// A finite stand-in for "all closing substitutions": every free variable
/// ranges over closed terms up to a size bound, plus explicitly added terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubstPool {
    max_size: usize,
    mode: PoolMode,
    extra: Vec<PoolEntry>,
    // per variable sort, in enumeration order then extras
    entries: Vec<Vec<PoolEntry>>,
}

/// Parameters of a pool, for reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub max_size: usize,
    pub mode: PoolMode,
    pub extra: Vec<PoolEntry>,
    pub entries_per_sort: Vec<usize>,
}

impl SubstPool {
    pub fn new(sig: &BindingSignature, max_size: usize, mode: PoolMode) -> Self {
        let mut pool = SubstPool {
            max_size,
            mode,
            extra: Vec::new(),
            entries: Vec::new(),
        };
        pool.rebuild(sig);
        pool
    }

    /// Adds a closed term of `sort` to the pool.
    pub fn with_term(mut self, sig: &BindingSignature, term: Term, sort: SortId) -> Result<Self, SyntaxError> {
        check_term(sig, &[], &term, sort, &sig.empty_ctx())?;
        self.extra.push(PoolEntry { term, sort });
        self.rebuild(sig);
        Ok(self)
    }

    fn rebuild(&mut self, sig: &BindingSignature) {
        let closed = sig.empty_ctx();
        let own = |s: SortId| -> Vec<PoolEntry> {
            enumerate_terms(sig, s, &closed, self.max_size)
                .into_iter()
                .chain(self.extra.iter().filter(|e| e.sort == s).map(|e| e.term.clone()))
                .map(|term| PoolEntry { term, sort: s })
                .collect()
        };
        self.entries = sig
            .sorts
            .sorts()
            .map(|s| {
                let mut es = own(s);
                if self.mode == PoolMode::Programs {
                    let lifted: Vec<Term> = es
                        .iter()
                        .flat_map(|e| sig.sorts.supersorts(s).into_iter().map(move |sup| (e, sup)))
                        .filter_map(|(e, sup)| coerce(sig, e.term.clone(), s, sup).ok())
                        .collect();
                    for sup in sig.sorts.supersorts(s) {
                        for e in own(sup) {
                            // a coerced value is already covered by its value entry
                            if !lifted.contains(&e.term) && !es.contains(&e) {
                                es.push(e);
                            }
                        }
                    }
                }
                dedup_stable(&mut es);
                es
            })
            .collect();
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn mode(&self) -> PoolMode {
        self.mode
    }

    /// Candidates for a variable of `sort`.
    pub fn entries(&self, sort: SortId) -> &[PoolEntry] {
        &self.entries[sort.index()]
    }

    pub fn spec(&self) -> PoolSpec {
        PoolSpec {
            max_size: self.max_size,
            mode: self.mode,
            extra: self.extra.clone(),
            entries_per_sort: self.entries.iter().map(Vec::len).collect(),
        }
    }

    /// Every closing of `ctx`, entries in `Context::vars` order.
    pub fn closings(&self, ctx: &Context) -> Vec<Vec<PoolEntry>> {
        let mut out = vec![Vec::new()];
        for (s, _) in ctx.vars() {
            let es = self.entries(s);
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    es.iter().map(move |e| {
                        let mut c = prefix.clone();
                        c.push(e.clone());
                        c
                    })
                })
                .collect();
        }
        out
    }

    /// `t[closing]`, or `None` when a counterpart entry would land on a bare
    /// occurrence of its variable.
    pub fn close(
        &self,
        sig: &BindingSignature,
        ctx: &Context,
        closing: &[PoolEntry],
        t: &Term,
    ) -> Result<Option<Term>, SyntaxError> {
        close(sig, ctx, closing, t)
    }
}

/// See [`SubstPool::close`].
pub fn close(
    sig: &BindingSignature,
    ctx: &Context,
    closing: &[PoolEntry],
    t: &Term,
) -> Result<Option<Term>, SyntaxError> {
    for ((s, i), e) in ctx.vars().zip(closing) {
        if e.sort != s && has_bare_var(t, s, i) {
            return Ok(None);
        }
    }
    let sigma = Substitution::from_sorted_terms(
        ctx,
        &sig.empty_ctx(),
        closing.iter().map(|e| (e.term.clone(), e.sort)).collect(),
    )?;
    sigma.apply(sig, t).map(Some)
}

// Levels make a free variable's name the same under every binder.
fn has_bare_var(t: &Term, sort: SortId, index: u32) -> bool {
    match t {
        Term::Var { sort: s, index: i } => *s == sort && *i == index,
        Term::Coerce { body, .. } => !matches!(body.as_ref(), Term::Var { .. }) && has_bare_var(body, sort, index),
        Term::Op { args, .. } | Term::Meta { args, .. } => args.iter().any(|a| has_bare_var(a, sort, index)),
    }
}

fn dedup_stable(es: &mut Vec<PoolEntry>) {
    let mut seen = std::collections::HashSet::new();
    es.retain(|e| seen.insert(e.clone()));
}
