//! Multi-sorted scoped syntax.
//!
//! Terms are the free monoid over a metavariable family: variables are
//! 1-based de Bruijn *levels* per sort, so a term over a context is also a
//! term over any extension of that context (weakening is the identity), and
//! a binder extending `n` to `n + k` introduces the variables `n + 1 ..= n + k`.
//! Metavariable applications carry an explicit argument list, one per
//! parameter variable, so substitution commutes with them structurally.

mod enumerate;
mod subst;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use enumerate::{enumerate_terms, enumerate_terms_upto, immediate_subterms, Enumerator};
pub use subst::{weaken, MetaEnv, Renaming, Substitution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SortId(pub u8);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OpId(pub u16);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MetaId(pub u16);

impl SortId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl OpId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl MetaId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("unknown sort `{0}`")]
    UnknownSort(String),
    #[error("duplicate sort `{0}`")]
    DuplicateSort(String),
    #[error("duplicate operator `{0}`")]
    DuplicateOperator(String),
    #[error("coercion {sub} -> {sup} would create a cycle")]
    CoercionCycle { sub: String, sup: String },
    #[error("no coercion from {from} to {to}")]
    NoCoercion { from: String, to: String },
    #[error("variable {sort}#{index} out of range for context {ctx}")]
    VarOutOfRange { sort: String, index: u32, ctx: String },
    #[error("sort mismatch: expected {expected}, found {found}")]
    SortMismatch { expected: String, found: String },
    #[error("operator `{op}` expects {expected} arguments, found {found}")]
    Arity { op: String, expected: usize, found: usize },
    #[error("operator `{op}` cannot be annotated with sort {sort}")]
    BadAnnotation { op: String, sort: String },
    #[error("metavariable `{0}` has no assignment")]
    MissingMeta(String),
    #[error("metavariable `{name}` expects {expected} arguments, found {found}")]
    MetaArity {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("unexpected metavariable `{0}` in a metavariable-free position")]
    UnexpectedMeta(String),
    #[error("substitution source context {found} does not cover {expected}")]
    SubstDomain { expected: String, found: String },
    #[error("{0}")]
    Malformed(String),
}

/// Sorts and the covering set of the coercion order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortTable {
    names: Vec<String>,
    coercions: Vec<(SortId, SortId)>,
}

impl SortTable {
    pub fn new<I, S>(names: I) -> Result<Self, SyntaxError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut table = SortTable {
            names: Vec::new(),
            coercions: Vec::new(),
        };
        for name in names {
            table.add_sort(name)?;
        }
        Ok(table)
    }

    /// The two-sorted `{v, p}` table with the single coercion `v -> p`.
    pub fn howe() -> Self {
        let mut table = SortTable::new(["v", "p"]).expect("fresh sorts");
        table.add_coercion(SortId(0), SortId(1)).expect("acyclic");
        table
    }

    pub fn single(name: &str) -> Self {
        SortTable::new([name]).expect("fresh sort")
    }

    pub fn add_sort(&mut self, name: impl Into<String>) -> Result<SortId, SyntaxError> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(SyntaxError::DuplicateSort(name));
        }
        self.names.push(name);
        Ok(SortId((self.names.len() - 1) as u8))
    }

    pub fn add_coercion(&mut self, sub: SortId, sup: SortId) -> Result<(), SyntaxError> {
        if sub == sup || self.coerces(sup, sub) {
            return Err(SyntaxError::CoercionCycle {
                sub: self.name(sub).to_string(),
                sup: self.name(sup).to_string(),
            });
        }
        if !self.coercions.contains(&(sub, sup)) {
            self.coercions.push((sub, sup));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn sorts(&self) -> impl Iterator<Item = SortId> + '_ {
        (0..self.names.len()).map(|i| SortId(i as u8))
    }

    pub fn name(&self, sort: SortId) -> &str {
        &self.names[sort.index()]
    }

    pub fn lookup(&self, name: &str) -> Result<SortId, SyntaxError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| SortId(i as u8))
            .ok_or_else(|| SyntaxError::UnknownSort(name.to_string()))
    }

    pub fn coercions(&self) -> &[(SortId, SortId)] {
        &self.coercions
    }

    /// Reflexive-transitive closure of the declared coercions.
    pub fn coerces(&self, from: SortId, to: SortId) -> bool {
        if from == to {
            return true;
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(s) = stack.pop() {
            for &(a, b) in &self.coercions {
                if a == s && seen.insert(b) {
                    if b == to {
                        return true;
                    }
                    stack.push(b);
                }
            }
        }
        false
    }

    /// Strict supersorts of `sort`, in sort order.
    pub fn supersorts(&self, sort: SortId) -> Vec<SortId> {
        self.sorts().filter(|&s| s != sort && self.coerces(sort, s)).collect()
    }
}

/// Number of free variables per sort.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Context(Vec<u32>);

impl Context {
    pub fn empty(n_sorts: usize) -> Self {
        Context(vec![0; n_sorts])
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        Context(counts)
    }

    pub fn single(n_sorts: usize, sort: SortId, count: u32) -> Self {
        let mut ctx = Context::empty(n_sorts);
        ctx.0[sort.index()] = count;
        ctx
    }

    pub fn count(&self, sort: SortId) -> u32 {
        self.0.get(sort.index()).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn n_sorts(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_closed(&self) -> bool {
        self.total() == 0
    }

    /// `self + other`, sort-wise.
    pub fn extend(&self, other: &Context) -> Context {
        Context(
            self.0
                .iter()
                .zip(other.0.iter().chain(std::iter::repeat(&0)))
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// `self +_s k`: adds `k` variables at sort `s` only.
    pub fn extend_at(&self, sort: SortId, k: u32) -> Context {
        let mut c = self.clone();
        c.0[sort.index()] += k;
        c
    }

    /// Pointwise `self <= other`.
    pub fn is_prefix_of(&self, other: &Context) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// The variables of the context, sort-major, each sort in level order.
    pub fn vars(&self) -> impl Iterator<Item = (SortId, u32)> + '_ {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(s, &n)| (1..=n).map(move |i| (SortId(s as u8), i)))
    }

    /// The variables of the context as terms: the identity argument list.
    pub fn var_terms(&self) -> Vec<Term> {
        self.vars().map(|(s, i)| Term::var(s, i)).collect()
    }

    pub fn render(&self, sorts: &SortTable) -> String {
        if sorts.len() == 1 {
            return self.0[0].to_string();
        }
        let parts: Vec<String> = sorts
            .sorts()
            .filter(|&s| self.count(s) > 0)
            .map(|s| format!("{} {}", self.count(s), sorts.name(s)))
            .collect();
        if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join(" + ")
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgSpec {
    pub sort: SortId,
    pub binds: Context,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpKind {
    Plain,
    Program,
    /// `active` leading arguments evaluated to values; the rest are passive.
    Value {
        active: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operator {
    pub name: String,
    pub result_sort: SortId,
    pub args: Vec<ArgSpec>,
    pub kind: OpKind,
}

impl Operator {
    pub fn is_value_op(&self) -> bool {
        matches!(self.kind, OpKind::Value { .. })
    }

    pub fn active_count(&self) -> usize {
        match self.kind {
            OpKind::Value { active } => active,
            _ => 0,
        }
    }

    pub fn passive_count(&self) -> usize {
        match self.kind {
            OpKind::Value { active } => self.args.len() - active,
            _ => 0,
        }
    }
}

/// Sorts, the binding sort, and operator declarations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindingSignature {
    pub sorts: SortTable,
    pub binding_sort: SortId,
    ops: Vec<Operator>,
}

impl BindingSignature {
    pub fn new(sorts: SortTable, binding_sort: SortId) -> Self {
        BindingSignature {
            sorts,
            binding_sort,
            ops: Vec::new(),
        }
    }

    pub fn add_op(&mut self, op: Operator) -> Result<OpId, SyntaxError> {
        if self.ops.iter().any(|o| o.name == op.name) {
            return Err(SyntaxError::DuplicateOperator(op.name));
        }
        if let OpKind::Value { active } = op.kind {
            if active > op.args.len() {
                return Err(SyntaxError::Malformed(format!(
                    "value operator `{}` declares {} active arguments but has {}",
                    op.name,
                    active,
                    op.args.len()
                )));
            }
            for a in &op.args[..active] {
                if a.sort != op.result_sort || !a.binds.is_closed() {
                    return Err(SyntaxError::Malformed(format!(
                        "active arguments of `{}` must have its result sort and bind nothing",
                        op.name
                    )));
                }
            }
        }
        self.ops.push(op);
        Ok(OpId((self.ops.len() - 1) as u16))
    }

    /// Plain operator helper: `(sort[binds], ...) -> result`.
    pub fn plain(&mut self, name: &str, args: Vec<(SortId, Context)>, result: SortId) -> Result<OpId, SyntaxError> {
        self.add_op(Operator {
            name: name.to_string(),
            result_sort: result,
            args: args.into_iter().map(|(sort, binds)| ArgSpec { sort, binds }).collect(),
            kind: OpKind::Plain,
        })
    }

    pub fn n_sorts(&self) -> usize {
        self.sorts.len()
    }

    pub fn empty_ctx(&self) -> Context {
        Context::empty(self.n_sorts())
    }

    pub fn ops(&self) -> &[Operator] {
        &self.ops
    }

    pub fn op(&self, id: OpId) -> &Operator {
        &self.ops[id.index()]
    }

    pub fn op_ids(&self) -> impl Iterator<Item = OpId> {
        (0..self.ops.len()).map(|i| OpId(i as u16))
    }

    pub fn lookup_op(&self, name: &str) -> Option<OpId> {
        self.ops.iter().position(|o| o.name == name).map(|i| OpId(i as u16))
    }

    pub fn value_ops(&self) -> impl Iterator<Item = OpId> + '_ {
        self.op_ids().filter(|&o| self.op(o).is_value_op())
    }

    /// Sorts at which an occurrence of `op` may be annotated.
    pub fn instantiations(&self, op: OpId) -> Vec<SortId> {
        let o = self.op(op);
        let mut out = vec![o.result_sort];
        if o.is_value_op() {
            out.extend(self.sorts.supersorts(o.result_sort));
        }
        out
    }

    /// Sort of argument `i` of `op` when `op` is annotated with `annot`.
    pub fn arg_sort(&self, op: OpId, annot: SortId, i: usize) -> SortId {
        let o = self.op(op);
        if i < o.active_count() {
            annot
        } else {
            o.args[i].sort
        }
    }

    /// Operators (with annotation) whose occurrences have sort `sort`, in
    /// declaration order.
    pub fn constructors(&self, sort: SortId) -> Vec<(OpId, SortId)> {
        self.op_ids()
            .filter(|&o| self.instantiations(o).contains(&sort))
            .map(|o| (o, sort))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetaVar {
    pub name: String,
    pub params: Context,
    pub sort: SortId,
}

/// A scoped term. Equality is structural on coercion-normal forms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Var { sort: SortId, index: u32 },
    Meta { meta: MetaId, args: Vec<Term> },
    Op { op: OpId, sort: SortId, args: Vec<Term> },
    Coerce { from: SortId, to: SortId, body: Box<Term> },
}

impl Term {
    pub fn var(sort: SortId, index: u32) -> Term {
        Term::Var { sort, index }
    }

    pub fn op(op: OpId, sort: SortId, args: Vec<Term>) -> Term {
        Term::Op { op, sort, args }
    }

    pub fn meta(meta: MetaId, args: Vec<Term>) -> Term {
        Term::Meta { meta, args }
    }

    /// Node count, including variables and coercions.
    pub fn size(&self) -> usize {
        match self {
            Term::Var { .. } => 1,
            Term::Meta { args, .. } | Term::Op { args, .. } => 1 + args.iter().map(Term::size).sum::<usize>(),
            Term::Coerce { body, .. } => 1 + body.size(),
        }
    }

    pub fn has_metas(&self) -> bool {
        match self {
            Term::Var { .. } => false,
            Term::Meta { .. } => true,
            Term::Op { args, .. } => args.iter().any(Term::has_metas),
            Term::Coerce { body, .. } => body.has_metas(),
        }
    }

    pub fn metas(&self) -> BTreeSet<MetaId> {
        let mut out = BTreeSet::new();
        self.collect_metas(&mut out);
        out
    }

    fn collect_metas(&self, out: &mut BTreeSet<MetaId>) {
        match self {
            Term::Var { .. } => {}
            Term::Meta { meta, args } => {
                out.insert(*meta);
                args.iter().for_each(|a| a.collect_metas(out));
            }
            Term::Op { args, .. } => args.iter().for_each(|a| a.collect_metas(out)),
            Term::Coerce { body, .. } => body.collect_metas(out),
        }
    }

    /// Renumbers metavariables, leaving everything else untouched.
    pub fn map_metas(&self, f: &impl Fn(MetaId) -> MetaId) -> Term {
        match self {
            Term::Var { .. } => self.clone(),
            Term::Meta { meta, args } => Term::Meta {
                meta: f(*meta),
                args: args.iter().map(|a| a.map_metas(f)).collect(),
            },
            Term::Op { op, sort, args } => Term::Op {
                op: *op,
                sort: *sort,
                args: args.iter().map(|a| a.map_metas(f)).collect(),
            },
            Term::Coerce { from, to, body } => Term::Coerce {
                from: *from,
                to: *to,
                body: Box::new(body.map_metas(f)),
            },
        }
    }

    /// `Some(k)` when the term is `k` applied to exactly its parameter variables.
    pub fn as_identity_meta(&self, metas: &[MetaVar]) -> Option<MetaId> {
        match self {
            Term::Meta { meta, args } => {
                let decl = metas.get(meta.index())?;
                (*args == decl.params.var_terms()).then_some(*meta)
            }
            _ => None,
        }
    }

    /// Sort of the term, given the sorts of its metavariables.
    pub fn sort_with(&self, meta_sort: impl Fn(MetaId) -> SortId) -> SortId {
        match self {
            Term::Var { sort, .. } | Term::Op { sort, .. } => *sort,
            Term::Coerce { to, .. } => *to,
            Term::Meta { meta, .. } => meta_sort(*meta),
        }
    }

    /// Sort of a metavariable-free term.
    pub fn sort(&self) -> SortId {
        self.sort_with(|_| panic!("sort() on a term with metavariables"))
    }
}

/// Sort- and scope-checks a term. `meta` resolves metavariable declarations
/// when the term is a pattern or rule body.
pub fn check_term(
    sig: &BindingSignature,
    metas: &[MetaVar],
    term: &Term,
    expected: SortId,
    ctx: &Context,
) -> Result<(), SyntaxError> {
    let found = infer_sort(sig, metas, term, ctx)?;
    if found != expected {
        return Err(SyntaxError::SortMismatch {
            expected: sig.sorts.name(expected).to_string(),
            found: sig.sorts.name(found).to_string(),
        });
    }
    Ok(())
}

/// Infers the sort of a term while checking it against `ctx`.
pub fn infer_sort(
    sig: &BindingSignature,
    metas: &[MetaVar],
    term: &Term,
    ctx: &Context,
) -> Result<SortId, SyntaxError> {
    match term {
        Term::Var { sort, index } => {
            if *index == 0 || *index > ctx.count(*sort) {
                return Err(SyntaxError::VarOutOfRange {
                    sort: sig.sorts.name(*sort).to_string(),
                    index: *index,
                    ctx: ctx.render(&sig.sorts),
                });
            }
            Ok(*sort)
        }
        Term::Meta { meta, args } => {
            let decl = metas
                .get(meta.index())
                .ok_or_else(|| SyntaxError::UnexpectedMeta(format!("#{}", meta.index())))?;
            let params: Vec<(SortId, u32)> = decl.params.vars().collect();
            if params.len() != args.len() {
                return Err(SyntaxError::MetaArity {
                    name: decl.name.clone(),
                    expected: params.len(),
                    found: args.len(),
                });
            }
            for ((s, _), a) in params.iter().zip(args) {
                check_term(sig, metas, a, *s, ctx)?;
            }
            Ok(decl.sort)
        }
        Term::Op { op, sort, args } => {
            let o = sig.op(*op);
            if !sig.instantiations(*op).contains(sort) {
                return Err(SyntaxError::BadAnnotation {
                    op: o.name.clone(),
                    sort: sig.sorts.name(*sort).to_string(),
                });
            }
            if o.args.len() != args.len() {
                return Err(SyntaxError::Arity {
                    op: o.name.clone(),
                    expected: o.args.len(),
                    found: args.len(),
                });
            }
            for (i, (spec, a)) in o.args.iter().zip(args).enumerate() {
                let inner = ctx.extend(&spec.binds);
                check_term(sig, metas, a, sig.arg_sort(*op, *sort, i), &inner)?;
            }
            Ok(*sort)
        }
        Term::Coerce { from, to, body } => {
            if from == to || !sig.sorts.coerces(*from, *to) {
                return Err(SyntaxError::NoCoercion {
                    from: sig.sorts.name(*from).to_string(),
                    to: sig.sorts.name(*to).to_string(),
                });
            }
            match body.as_ref() {
                Term::Coerce { .. } => return Err(SyntaxError::Malformed("nested coercion".into())),
                Term::Op { op, .. } if sig.op(*op).is_value_op() => {
                    return Err(SyntaxError::Malformed(format!(
                        "coercion of value operator `{}` is not normalised",
                        sig.op(*op).name
                    )))
                }
                _ => {}
            }
            check_term(sig, metas, body, *from, ctx)?;
            Ok(*to)
        }
    }
}

/// Lifts a term along the coercion order, normalising: value-operator
/// annotations flip (recursively through active arguments), everything else
/// gets at most one `Coerce` node.
pub fn coerce(sig: &BindingSignature, term: Term, from: SortId, to: SortId) -> Result<Term, SyntaxError> {
    if from == to {
        return Ok(term);
    }
    if !sig.sorts.coerces(from, to) {
        return Err(SyntaxError::NoCoercion {
            from: sig.sorts.name(from).to_string(),
            to: sig.sorts.name(to).to_string(),
        });
    }
    Ok(match term {
        Term::Op { op, sort, args } if sig.op(op).is_value_op() => {
            debug_assert_eq!(sort, from);
            let active = sig.op(op).active_count();
            let args = args
                .into_iter()
                .enumerate()
                .map(|(i, a)| if i < active { coerce(sig, a, from, to) } else { Ok(a) })
                .collect::<Result<_, _>>()?;
            Term::Op { op, sort: to, args }
        }
        Term::Coerce { from: inner, body, .. } => Term::Coerce { from: inner, to, body },
        other => Term::Coerce {
            from,
            to,
            body: Box::new(other),
        },
    })
}

impl fmt::Display for SortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}
