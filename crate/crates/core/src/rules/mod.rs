//! Labelled dynamic signatures and the rigid-rule format check.
//!
//! A rule is stored in one general shape: a metavariable table, a conclusion
//! source pattern, a premise chain and a conclusion target. Each premise's
//! target is a pattern that introduces metavariables. Rigidity (and hence
//! cellularity) is a property checked by [`validate_rigid`], not a separate
//! type, so non-rigid rules can be parsed and diagnosed.

mod rigidify;
mod schematic;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::{check_term, BindingSignature, Context, MetaId, MetaVar, OpId, OpKind, SortId, SyntaxError, Term};

pub use rigidify::{
    canonical_eval_rules, canonical_rules, howe_eval_label, rigidify, with_observation_labels, Rigidified,
    RigidifyMapping,
};
pub use schematic::expand_schematic;

/// Name of the metavariable standing for the whole conclusion source in a
/// schematic rule. It is always metavariable 0.
pub const SCHEMATIC_HEAD: &str = "_";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelId(pub u16);

impl LabelId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub name: String,
    pub source_sort: SortId,
    pub source_ctx: Context,
    pub target_sort: SortId,
    pub target_ctx: Context,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Premise {
    pub source: Term,
    pub label: LabelId,
    /// A pattern; rigid rules require a bare fresh metavariable.
    pub target: Term,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    pub metas: Vec<MetaVar>,
    pub source: Term,
    pub premises: Vec<Premise>,
    pub label: LabelId,
    pub target: Term,
}

impl Rule {
    /// Head operator and annotation of the conclusion source.
    pub fn head(&self) -> Option<(OpId, SortId)> {
        match &self.source {
            Term::Op { op, sort, .. } => Some((*op, *sort)),
            _ => None,
        }
    }

    pub fn meta_sort(&self, m: MetaId) -> SortId {
        self.metas[m.index()].sort
    }
}

/// A closed named term usable in surface syntax.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Define {
    pub name: String,
    pub sort: SortId,
    pub term: Term,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicSignature {
    pub binding: BindingSignature,
    pub labels: Vec<Label>,
    pub defines: Vec<Define>,
    pub rules: Vec<Rule>,
    pub schematic_rules: Vec<Rule>,
    pub howe_rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RulesError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("duplicate rule name `{0}`")]
    DuplicateRule(String),
    #[error("rule `{rule}` refers to undeclared {what}")]
    Undeclared { rule: String, what: String },
    #[error("schematic rule `{rule}`: {message}")]
    Schematic { rule: String, message: String },
    #[error("not a Howe-format signature: {0}")]
    NotHowe(String),
    #[error("signature has format violations:\n{}", render_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
}

fn render_diagnostics(ds: &[Diagnostic]) -> String {
    ds.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticKind {
    BareMetavariableSource,
    NotGenericHead,
    HeadSortMismatch,
    UnintroducedMetavariable,
    NonMetavariableTarget,
    RebindsMetavariable,
    IllSorted,
    NotHoweShape,
}

/// A format violation of one rule, naming the violated clause.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub rule: String,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "rule `{}`: {}", self.rule, self.message)
    }
}

/// How strictly premise targets are checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shape {
    /// Every premise target is a bare fresh metavariable.
    Rigid,
    /// Premise targets may also be an operator applied to fresh
    /// metavariables; the evaluator can match such patterns directly.
    Evaluable,
    /// Classical Howe rules: program head, closed program premise sources,
    /// value-sorted targets, bare value tail.
    Howe,
}

impl DynamicSignature {
    pub fn new(binding: BindingSignature) -> Self {
        DynamicSignature {
            binding,
            labels: Vec::new(),
            defines: Vec::new(),
            rules: Vec::new(),
            schematic_rules: Vec::new(),
            howe_rules: Vec::new(),
        }
    }

    pub fn label(&self, id: LabelId) -> &Label {
        &self.labels[id.index()]
    }

    pub fn label_ids(&self) -> impl Iterator<Item = LabelId> {
        (0..self.labels.len()).map(|i| LabelId(i as u16))
    }

    pub fn lookup_label(&self, name: &str) -> Option<LabelId> {
        self.labels
            .iter()
            .position(|l| l.name == name)
            .map(|i| LabelId(i as u16))
    }

    pub fn add_label(&mut self, label: Label) -> Result<LabelId, RulesError> {
        if self.lookup_label(&label.name).is_some() {
            return Err(RulesError::DuplicateLabel(label.name));
        }
        self.labels.push(label);
        Ok(LabelId((self.labels.len() - 1) as u16))
    }

    pub fn define(&self, name: &str) -> Option<&Define> {
        self.defines.iter().find(|d| d.name == name)
    }

    /// Labels observable on closed terms of `sort`.
    pub fn labels_from(&self, sort: SortId) -> Vec<LabelId> {
        self.label_ids()
            .filter(|&l| {
                let lab = self.label(l);
                lab.source_sort == sort && lab.source_ctx.is_closed()
            })
            .collect()
    }

    pub fn all_rule_names(&self) -> impl Iterator<Item = &str> {
        self.rules
            .iter()
            .chain(&self.schematic_rules)
            .chain(&self.howe_rules)
            .map(|r| r.name.as_str())
    }

    /// The rules the evaluator runs: rigid rules, expanded schematic rules,
    /// and (for unrigidified Howe signatures) the Howe rules together with
    /// the canonical evaluation rules of the value operators.
    pub fn effective_rules(&self) -> Result<Vec<Rule>, RulesError> {
        let mut out = self.rules.clone();
        for s in &self.schematic_rules {
            out.extend(expand_schematic(s, self)?);
        }
        if !self.howe_rules.is_empty() {
            out.extend(self.howe_rules.iter().cloned());
            out.extend(canonical_eval_rules(self)?);
        }
        Ok(out)
    }
}

fn check_ids(rule: &Rule, dsig: &DynamicSignature) -> Result<(), RulesError> {
    let undeclared = |what: String| RulesError::Undeclared {
        rule: rule.name.clone(),
        what,
    };
    let labels = std::iter::once(rule.label).chain(rule.premises.iter().map(|p| p.label));
    for l in labels {
        if l.index() >= dsig.labels.len() {
            return Err(undeclared(format!("label #{}", l.index())));
        }
    }
    let terms = std::iter::once(&rule.source)
        .chain(std::iter::once(&rule.target))
        .chain(rule.premises.iter().flat_map(|p| [&p.source, &p.target]));
    for t in terms {
        if let Some(op) = first_bad_op(t, dsig.binding.ops().len()) {
            return Err(undeclared(format!("operator #{op}")));
        }
        if let Some(m) = t.metas().into_iter().find(|m| m.index() >= rule.metas.len()) {
            return Err(undeclared(format!("metavariable #{}", m.index())));
        }
    }
    Ok(())
}

fn first_bad_op(t: &Term, n_ops: usize) -> Option<usize> {
    match t {
        Term::Var { .. } => None,
        Term::Op { op, args, .. } => {
            if op.index() >= n_ops {
                Some(op.index())
            } else {
                args.iter().find_map(|a| first_bad_op(a, n_ops))
            }
        }
        Term::Meta { args, .. } => args.iter().find_map(|a| first_bad_op(a, n_ops)),
        Term::Coerce { body, .. } => first_bad_op(body, n_ops),
    }
}

/// Checks a rule against the rigid format. `Ok(vec![])` means the rule is
/// rigid; undeclared references are an `Err`, distinct from diagnostics.
pub fn validate_rigid(rule: &Rule, dsig: &DynamicSignature) -> Result<Vec<Diagnostic>, RulesError> {
    check_shape(rule, dsig, Shape::Rigid)
}

/// Like [`validate_rigid`] but accepting operator patterns with fresh
/// metavariables as premise targets.
pub fn validate_evaluable(rule: &Rule, dsig: &DynamicSignature) -> Result<Vec<Diagnostic>, RulesError> {
    check_shape(rule, dsig, Shape::Evaluable)
}

/// Checks a classical Howe rule: head a program operation, premises
/// `e => k` (fresh value metavariable) or `e => o(k1, ...)` (value operation
/// applied to fresh metavariables), tail a value metavariable.
pub fn validate_howe(rule: &Rule, dsig: &DynamicSignature) -> Result<Vec<Diagnostic>, RulesError> {
    check_shape(rule, dsig, Shape::Howe)
}

fn check_shape(rule: &Rule, dsig: &DynamicSignature, shape: Shape) -> Result<Vec<Diagnostic>, RulesError> {
    check_ids(rule, dsig)?;
    let sig = &dsig.binding;
    let mut out = Vec::new();
    let mut diag = |kind: DiagnosticKind, message: String| {
        out.push(Diagnostic {
            rule: rule.name.clone(),
            kind,
            message,
        })
    };
    let concl = dsig.label(rule.label);
    let name_of = |m: MetaId| format!("?{}", rule.metas[m.index()].name);

    let mut introduced: BTreeSet<MetaId> = BTreeSet::new();
    match &rule.source {
        Term::Meta { meta, .. } => diag(
            DiagnosticKind::BareMetavariableSource,
            format!(
                "conclusion source is the bare metavariable {}; such rules are only accepted as schematic rules",
                name_of(*meta)
            ),
        ),
        Term::Op { op, sort, args } => {
            let o = sig.op(*op);
            if *sort != concl.source_sort {
                diag(
                    DiagnosticKind::HeadSortMismatch,
                    format!(
                        "head `{}` has sort {} but label `{}` has source sort {}",
                        o.name,
                        sig.sorts.name(*sort),
                        concl.name,
                        sig.sorts.name(concl.source_sort)
                    ),
                );
            }
            let mut generic = true;
            for (i, a) in args.iter().enumerate() {
                let expected_params = concl.source_ctx.extend(&o.args[i].binds);
                match a.as_identity_meta(&rule.metas) {
                    Some(m)
                        if rule.metas[m.index()].params == expected_params
                            && rule.metas[m.index()].sort == sig.arg_sort(*op, *sort, i)
                            && introduced.insert(m) => {}
                    _ => generic = false,
                }
            }
            if !generic {
                diag(
                    DiagnosticKind::NotGenericHead,
                    format!(
                        "conclusion source not a generic head pattern: every argument of `{}` must be a distinct metavariable over its binding context",
                        o.name
                    ),
                );
            }
            if shape == Shape::Howe && !matches!(o.kind, OpKind::Program) {
                diag(
                    DiagnosticKind::NotHoweShape,
                    format!("head `{}` is not a program operation", o.name),
                );
            }
        }
        _ => diag(
            DiagnosticKind::NotGenericHead,
            "conclusion source not a generic head pattern".to_string(),
        ),
    }
    if let Err(e) = check_term(sig, &rule.metas, &rule.source, concl.source_sort, &concl.source_ctx) {
        diag(DiagnosticKind::IllSorted, format!("conclusion source: {e}"));
    }

    for (n, p) in rule.premises.iter().enumerate() {
        let lab = dsig.label(p.label);
        let pos = n + 1;
        if let Err(e) = check_term(sig, &rule.metas, &p.source, lab.source_sort, &lab.source_ctx) {
            diag(DiagnosticKind::IllSorted, format!("premise {pos} source: {e}"));
        }
        for m in p.source.metas() {
            if !introduced.contains(&m) {
                diag(
                    DiagnosticKind::UnintroducedMetavariable,
                    format!(
                        "premise {pos} source mentions metavariable {} not yet introduced",
                        name_of(m)
                    ),
                );
            }
        }
        if let Err(e) = check_term(sig, &rule.metas, &p.target, lab.target_sort, &lab.target_ctx) {
            diag(DiagnosticKind::IllSorted, format!("premise {pos} target: {e}"));
        }
        if shape == Shape::Howe && !(lab.source_ctx.is_closed() && lab.target_ctx.is_closed()) {
            diag(
                DiagnosticKind::NotHoweShape,
                format!("premise {pos} label `{}` does not relate closed terms", lab.name),
            );
        }
        match p.target.as_identity_meta(&rule.metas) {
            Some(m) => {
                if !introduced.insert(m) {
                    diag(
                        DiagnosticKind::RebindsMetavariable,
                        format!("premise {pos} target re-binds metavariable {}", name_of(m)),
                    );
                }
            }
            None => {
                let pattern_ok = shape != Shape::Rigid && generic_pattern(rule, &p.target, &lab.target_ctx, dsig);
                if pattern_ok {
                    for m in p.target.metas() {
                        if !introduced.insert(m) {
                            diag(
                                DiagnosticKind::RebindsMetavariable,
                                format!("premise {pos} target re-binds metavariable {}", name_of(m)),
                            );
                        }
                    }
                } else {
                    diag(
                        DiagnosticKind::NonMetavariableTarget,
                        format!(
                            "premise {pos} target pattern is not a bare fresh metavariable: non-metavariable target pattern (rigidify this rule)"
                        ),
                    );
                    introduced.extend(p.target.metas());
                }
            }
        }
    }

    if let Err(e) = check_term(sig, &rule.metas, &rule.target, concl.target_sort, &concl.target_ctx) {
        diag(DiagnosticKind::IllSorted, format!("conclusion target: {e}"));
    }
    for m in rule.target.metas() {
        if !introduced.contains(&m) {
            diag(
                DiagnosticKind::UnintroducedMetavariable,
                format!(
                    "conclusion target mentions metavariable {} never introduced",
                    name_of(m)
                ),
            );
        }
    }
    if shape == Shape::Howe && rule.target.as_identity_meta(&rule.metas).is_none() {
        diag(
            DiagnosticKind::NotHoweShape,
            "conclusion target is not a tail metavariable".to_string(),
        );
    }
    Ok(out)
}

/// `o(k1, ..., kn)` with each `ki` a metavariable over exactly the pattern
/// context extended by the i-th binding context.
fn generic_pattern(rule: &Rule, t: &Term, ctx: &Context, dsig: &DynamicSignature) -> bool {
    let Term::Op { op, sort, args } = t else {
        return false;
    };
    let sig = &dsig.binding;
    let o = sig.op(*op);
    let mut seen = BTreeSet::new();
    args.iter()
        .enumerate()
        .all(|(i, a)| match a.as_identity_meta(&rule.metas) {
            Some(m) => {
                let decl = &rule.metas[m.index()];
                decl.params == ctx.extend(&o.args[i].binds)
                    && decl.sort == sig.arg_sort(*op, *sort, i)
                    && seen.insert(m)
            }
            None => false,
        })
}

/// Result of [`validate_signature`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureReport {
    pub diagnostics: Vec<Diagnostic>,
    /// Number of effective rules per dispatch key `(head@sort, label)`.
    pub table: BTreeMap<(String, String), usize>,
    pub rule_count: usize,
}

impl SignatureReport {
    pub fn is_ok(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

/// Validates every rule of the signature and tabulates dispatch keys.
pub fn validate_signature(dsig: &DynamicSignature) -> Result<SignatureReport, RulesError> {
    let mut names = BTreeSet::new();
    for n in dsig.all_rule_names() {
        if !names.insert(n) {
            return Err(RulesError::DuplicateRule(n.to_string()));
        }
    }
    let mut diagnostics = Vec::new();
    for r in &dsig.rules {
        diagnostics.extend(validate_rigid(r, dsig)?);
    }
    for s in &dsig.schematic_rules {
        for r in expand_schematic(s, dsig)? {
            diagnostics.extend(validate_rigid(&r, dsig)?);
        }
    }
    for r in &dsig.howe_rules {
        diagnostics.extend(validate_howe(r, dsig)?);
    }
    let mut table = BTreeMap::new();
    let effective = if diagnostics.is_empty() {
        dsig.effective_rules()?
    } else {
        Vec::new()
    };
    for r in &effective {
        if let Some((op, sort)) = r.head() {
            let key = (op_key(&dsig.binding, op, sort), dsig.label(r.label).name.clone());
            *table.entry(key).or_insert(0) += 1;
        }
    }
    Ok(SignatureReport {
        diagnostics,
        table,
        rule_count: effective.len(),
    })
}

/// `op` or `op@sort` when the operator has several instantiations.
pub fn op_key(sig: &BindingSignature, op: OpId, sort: SortId) -> String {
    let o = sig.op(op);
    if sig.instantiations(op).len() > 1 {
        format!("{}@{}", o.name, sig.sorts.name(sort))
    } else {
        o.name.clone()
    }
}
