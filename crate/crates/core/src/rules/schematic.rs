//! Per-constructor expansion of schematic rules.

use super::{DynamicSignature, Rule, RulesError, SCHEMATIC_HEAD};
use crate::syntax::{coerce, Context, MetaId, MetaVar, Substitution, Term};

/// One rigid-shaped rule per constructor of the conclusion label's source
/// sort, in declaration order. Metavariable 0 (the schematic head) becomes
/// the constructor applied to fresh metavariables `?_1, ...`; the rule's
/// other metavariables are renumbered after them.
pub fn expand_schematic(rule: &Rule, dsig: &DynamicSignature) -> Result<Vec<Rule>, RulesError> {
    let err = |message: &str| RulesError::Schematic {
        rule: rule.name.clone(),
        message: message.to_string(),
    };
    let head_decl = rule.metas.first().ok_or_else(|| err("no schematic head"))?;
    if head_decl.name != SCHEMATIC_HEAD {
        return Err(err("metavariable 0 is not the schematic head"));
    }
    let label = dsig.label(rule.label);
    if rule.source.as_identity_meta(&rule.metas) != Some(MetaId(0))
        || head_decl.params != label.source_ctx
        || head_decl.sort != label.source_sort
    {
        return Err(err("schematic position other than the conclusion source"));
    }
    for p in &rule.premises {
        if p.target.metas().contains(&MetaId(0)) {
            return Err(err("schematic head used as a premise target"));
        }
    }
    let sig = &dsig.binding;
    let mut out = Vec::new();
    for (op, annot) in sig.constructors(label.source_sort) {
        let o = sig.op(op);
        let n = o.args.len();
        let mut metas: Vec<MetaVar> = (0..n)
            .map(|i| MetaVar {
                name: format!("_{}", i + 1),
                params: label.source_ctx.extend(&o.args[i].binds),
                sort: sig.arg_sort(op, annot, i),
            })
            .collect();
        metas.extend(rule.metas[1..].iter().cloned());
        let head = Term::op(
            op,
            annot,
            (0..n)
                .map(|i| Term::meta(MetaId(i as u16), metas[i].params.var_terms()))
                .collect(),
        );
        let shift = |m: MetaId| MetaId(m.0 + n as u16 - 1);
        let ex = Expander {
            dsig,
            head: &head,
            head_ctx: &label.source_ctx,
            shift: &shift,
        };
        let premises = rule
            .premises
            .iter()
            .map(|p| {
                let l = dsig.label(p.label);
                Ok(super::Premise {
                    source: ex.go(&p.source, &l.source_ctx)?,
                    label: p.label,
                    target: p.target.map_metas(&shift),
                })
            })
            .collect::<Result<Vec<_>, RulesError>>()?;
        let target = ex.go(&rule.target, &label.target_ctx)?;
        let name = if sig.instantiations(op).len() > 1 {
            format!("{}.{}@{}", rule.name, o.name, sig.sorts.name(annot))
        } else {
            format!("{}.{}", rule.name, o.name)
        };
        out.push(Rule {
            name,
            metas,
            source: head.clone(),
            premises,
            label: rule.label,
            target,
        });
    }
    Ok(out)
}

struct Expander<'a, F: Fn(MetaId) -> MetaId> {
    dsig: &'a DynamicSignature,
    head: &'a Term,
    head_ctx: &'a Context,
    shift: &'a F,
}

impl<F: Fn(MetaId) -> MetaId> Expander<'_, F> {
    fn go(&self, t: &Term, ctx: &Context) -> Result<Term, RulesError> {
        let sig = &self.dsig.binding;
        Ok(match t {
            Term::Var { .. } => t.clone(),
            Term::Meta { meta, args } if meta.0 == 0 => {
                let args = args.iter().map(|a| self.go(a, ctx)).collect::<Result<Vec<_>, _>>()?;
                Substitution::from_terms(self.head_ctx, ctx, args)?.apply(sig, self.head)?
            }
            Term::Meta { meta, args } => Term::Meta {
                meta: (self.shift)(*meta),
                args: args.iter().map(|a| self.go(a, ctx)).collect::<Result<_, _>>()?,
            },
            Term::Op { op, sort, args } => Term::Op {
                op: *op,
                sort: *sort,
                args: args
                    .iter()
                    .zip(&sig.op(*op).args)
                    .map(|(a, spec)| self.go(a, &ctx.extend(&spec.binds)))
                    .collect::<Result<_, _>>()?,
            },
            Term::Coerce { from, to, body } => coerce(sig, self.go(body, ctx)?, *from, *to)?,
        })
    }
}
