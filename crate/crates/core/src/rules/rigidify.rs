//! Canonical rules of value operations and the rigidification compiler.
//!
//! For a value operation `o` with `N+` active and `N-` passive arguments, the
//! observation labels are `L+o.i : v@0 -> v@0` and `L-o.j : v@0 -> p@d_j`,
//! where `L` is the evaluation label and `d_j` the binding context of the
//! j-th passive argument.

use serde::{Deserialize, Serialize};

use super::{validate_howe, DynamicSignature, Label, LabelId, Premise, Rule, RulesError};
use crate::syntax::{Context, MetaId, MetaVar, OpId, SortId, Term};

/// The value sort, the program sort, and the evaluation label `p@0 -> v@0`.
pub fn howe_eval_label(dsig: &DynamicSignature) -> Result<(SortId, SortId, LabelId), RulesError> {
    let sorts = &dsig.binding.sorts;
    let (v, p) = match sorts.coercions() {
        [(v, p)] => (*v, *p),
        _ => return Err(RulesError::NotHowe("expected exactly one coercion v -> p".to_string())),
    };
    if let Some(r) = dsig.howe_rules.first() {
        return Ok((v, p, r.label));
    }
    let candidates: Vec<LabelId> = dsig
        .label_ids()
        .filter(|&l| {
            let lab = dsig.label(l);
            lab.source_sort == p && lab.source_ctx.is_closed() && lab.target_sort == v && lab.target_ctx.is_closed()
        })
        .collect();
    match candidates.as_slice() {
        [l] => Ok((v, p, *l)),
        [] => Err(RulesError::NotHowe("no evaluation label p@0 -> v@0".to_string())),
        _ => Err(RulesError::NotHowe("several evaluation labels p@0 -> v@0".to_string())),
    }
}

fn plus_name(eval: &str, op: &str, i: usize) -> String {
    format!("{eval}+{op}.{i}")
}

fn minus_name(eval: &str, op: &str, j: usize) -> String {
    format!("{eval}-{op}.{j}")
}

/// Adds the observation labels of every value operation, keeping existing
/// labels (and their ids) in place.
pub fn with_observation_labels(dsig: &DynamicSignature) -> Result<DynamicSignature, RulesError> {
    let (v, _, eval) = howe_eval_label(dsig)?;
    let eval_name = dsig.label(eval).name.clone();
    let mut out = dsig.clone();
    let sig = &dsig.binding;
    let closed = sig.empty_ctx();
    for op in sig.value_ops() {
        let o = sig.op(op);
        let active = o.active_count();
        let mut wanted = Vec::new();
        for i in 1..=active {
            wanted.push(Label {
                name: plus_name(&eval_name, &o.name, i),
                source_sort: v,
                source_ctx: closed.clone(),
                target_sort: v,
                target_ctx: closed.clone(),
            });
        }
        for j in 1..=o.passive_count() {
            let spec = &o.args[active + j - 1];
            wanted.push(Label {
                name: minus_name(&eval_name, &o.name, j),
                source_sort: v,
                source_ctx: closed.clone(),
                target_sort: spec.sort,
                target_ctx: spec.binds.clone(),
            });
        }
        for l in wanted {
            match out.lookup_label(&l.name) {
                Some(id) if *out.label(id) == l => {}
                Some(_) => return Err(RulesError::DuplicateLabel(l.name)),
                None => {
                    out.add_label(l)?;
                }
            }
        }
    }
    Ok(out)
}

fn meta(i: usize, decl: &MetaVar) -> Term {
    Term::meta(MetaId(i as u16), decl.params.var_terms())
}

/// `o_p(k1..; k'1..) => o_v(v1..; k'1..)` with premises `ki => vi`, one per
/// value operation.
pub fn canonical_eval_rules(dsig: &DynamicSignature) -> Result<Vec<Rule>, RulesError> {
    let (v, p, eval) = howe_eval_label(dsig)?;
    let sig = &dsig.binding;
    let mut out = Vec::new();
    for op in sig.value_ops() {
        out.push(eval_rule(dsig, op, v, p, eval));
    }
    Ok(out)
}

fn eval_rule(dsig: &DynamicSignature, op: OpId, v: SortId, p: SortId, eval: LabelId) -> Rule {
    let sig = &dsig.binding;
    let o = sig.op(op);
    let active = o.active_count();
    let closed = sig.empty_ctx();
    let mut metas: Vec<MetaVar> = o
        .args
        .iter()
        .enumerate()
        .map(|(i, spec)| MetaVar {
            name: format!("k{}", i + 1),
            params: spec.binds.clone(),
            sort: sig.arg_sort(op, p, i),
        })
        .collect();
    let n = metas.len();
    for i in 0..active {
        metas.push(MetaVar {
            name: format!("v{}", i + 1),
            params: closed.clone(),
            sort: v,
        });
    }
    let source = Term::op(op, p, (0..n).map(|i| meta(i, &metas[i])).collect());
    let premises = (0..active)
        .map(|i| Premise {
            source: meta(i, &metas[i]),
            label: eval,
            target: meta(n + i, &metas[n + i]),
        })
        .collect();
    let target_args = (0..n)
        .map(|i| {
            if i < active {
                meta(n + i, &metas[n + i])
            } else {
                meta(i, &metas[i])
            }
        })
        .collect();
    Rule {
        name: format!("{}-eval", o.name),
        metas,
        source,
        premises,
        label: eval,
        target: Term::op(op, v, target_args),
    }
}

/// The canonical evaluation rule plus `N+ + N-` observation axioms per value
/// operation. The observation labels must already be present (see
/// [`with_observation_labels`]).
pub fn canonical_rules(dsig: &DynamicSignature) -> Result<Vec<Rule>, RulesError> {
    let (v, p, eval) = howe_eval_label(dsig)?;
    let eval_name = dsig.label(eval).name.clone();
    let sig = &dsig.binding;
    let mut out = Vec::new();
    for op in sig.value_ops() {
        out.push(eval_rule(dsig, op, v, p, eval));
        let o = sig.op(op);
        let active = o.active_count();
        let metas: Vec<MetaVar> = o
            .args
            .iter()
            .enumerate()
            .map(|(i, spec)| MetaVar {
                name: if i < active {
                    format!("v{}", i + 1)
                } else {
                    format!("k{}", i - active + 1)
                },
                params: spec.binds.clone(),
                sort: sig.arg_sort(op, v, i),
            })
            .collect();
        let head = Term::op(op, v, (0..metas.len()).map(|i| meta(i, &metas[i])).collect());
        let lookup = |name: String| dsig.lookup_label(&name).ok_or(RulesError::UnknownLabel(name));
        for i in 0..o.args.len() {
            let (label, name) = if i < active {
                (
                    lookup(plus_name(&eval_name, &o.name, i + 1))?,
                    format!("{}-obs+{}", o.name, i + 1),
                )
            } else {
                (
                    lookup(minus_name(&eval_name, &o.name, i - active + 1))?,
                    format!("{}-obs-{}", o.name, i - active + 1),
                )
            };
            out.push(Rule {
                name,
                metas: metas.clone(),
                source: head.clone(),
                premises: Vec::new(),
                label,
                target: meta(i, &metas[i]),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RigidifyMapping {
    pub original: String,
    pub generated: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Rigidified {
    pub dsig: DynamicSignature,
    pub mapping: Vec<RigidifyMapping>,
}

/// Compiles the Howe rules of `dsig` into rigid rules: each premise
/// `e => o(a1..; b1..)` becomes `e => r`, then `r =L+o.i=> ai` in increasing
/// `i`, then `r =L-o.j=> bj` in increasing `j`. Canonical rules are appended.
pub fn rigidify(dsig: &DynamicSignature) -> Result<Rigidified, RulesError> {
    let mut diagnostics = Vec::new();
    for r in &dsig.howe_rules {
        diagnostics.extend(validate_howe(r, dsig)?);
    }
    if !diagnostics.is_empty() {
        return Err(RulesError::Invalid(diagnostics));
    }
    let (v, _, eval) = howe_eval_label(dsig)?;
    let mut out = with_observation_labels(dsig)?;
    let eval_name = dsig.label(eval).name.clone();
    let mut mapping = Vec::new();
    let mut rigid = Vec::new();
    for r in &dsig.howe_rules {
        let mut metas = r.metas.clone();
        let mut premises = Vec::new();
        for p in &r.premises {
            match &p.target {
                Term::Op { op, args, .. } => {
                    let o = out.binding.op(*op).clone();
                    let fresh = metas.len();
                    metas.push(MetaVar {
                        name: format!("_r{}", premises.len() + 1),
                        params: Context::empty(out.binding.n_sorts()),
                        sort: v,
                    });
                    let r_term = Term::meta(MetaId(fresh as u16), Vec::new());
                    premises.push(Premise {
                        source: p.source.clone(),
                        label: p.label,
                        target: r_term.clone(),
                    });
                    let active = o.active_count();
                    for (i, a) in args.iter().enumerate() {
                        let name = if i < active {
                            plus_name(&eval_name, &o.name, i + 1)
                        } else {
                            minus_name(&eval_name, &o.name, i - active + 1)
                        };
                        let label = out.lookup_label(&name).ok_or(RulesError::UnknownLabel(name))?;
                        premises.push(Premise {
                            source: r_term.clone(),
                            label,
                            target: a.clone(),
                        });
                    }
                }
                _ => premises.push(p.clone()),
            }
        }
        rigid.push(Rule {
            name: r.name.clone(),
            metas,
            source: r.source.clone(),
            premises,
            label: r.label,
            target: r.target.clone(),
        });
        mapping.push(RigidifyMapping {
            original: r.name.clone(),
            generated: vec![r.name.clone()],
        });
    }
    let canonical = canonical_rules(&out)?;
    mapping.push(RigidifyMapping {
        original: "(canonical)".to_string(),
        generated: canonical.iter().map(|r| r.name.clone()).collect(),
    });
    out.rules.extend(rigid);
    out.rules.extend(canonical);
    out.howe_rules.clear();
    Ok(Rigidified { dsig: out, mapping })
}
