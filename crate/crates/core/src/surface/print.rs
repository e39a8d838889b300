use crate::rules::{DynamicSignature, Label, Rule};
use crate::syntax::{weaken, BindingSignature, Context, MetaVar, OpKind, SortId, Term};

/// Renders terms, rules and whole signatures in the surface syntax.
///
/// Bound variables print as a per-sort letter followed by their level
/// (`x3`), free variables as `var N`. Closed subterms equal to a define are
/// folded back to its name.
pub struct Printer<'a> {
    dsig: &'a DynamicSignature,
    defines_visible: usize,
}

const LETTERS: [&str; 4] = ["x", "y", "z", "w"];

fn letter(s: SortId) -> String {
    match LETTERS.get(s.index()) {
        Some(l) => (*l).to_string(),
        None => format!("s{}_", s.index()),
    }
}

impl<'a> Printer<'a> {
    pub fn new(dsig: &'a DynamicSignature) -> Self {
        Printer {
            dsig,
            defines_visible: dsig.defines.len(),
        }
    }

    fn sig(&self) -> &BindingSignature {
        &self.dsig.binding
    }

    /// A closed term.
    pub fn closed(&self, t: &Term) -> String {
        self.term(t, &self.sig().empty_ctx())
    }

    /// A term over `ctx`; levels within `ctx` print as `var N`.
    pub fn term(&self, t: &Term, ctx: &Context) -> String {
        let mut s = String::new();
        self.go(t, &[], ctx, ctx, &mut s);
        s
    }

    /// A rule-level term (with metavariables) over `ctx`.
    pub fn pattern(&self, t: &Term, metas: &[MetaVar], ctx: &Context) -> String {
        let mut s = String::new();
        self.go(t, metas, ctx, ctx, &mut s);
        s
    }

    /// The define equal to `t`, which sits under the binders of `ctx`.
    fn folded(&self, t: &Term, ctx: &Context) -> Option<&str> {
        if t.has_metas() || !is_closed_above(t, ctx) {
            return None;
        }
        let empty = self.sig().empty_ctx();
        self.dsig.defines[..self.defines_visible]
            .iter()
            .find(|d| &weaken(&d.term, &empty, ctx) == t)
            .map(|d| d.name.as_str())
    }

    fn go(&self, t: &Term, metas: &[MetaVar], base: &Context, ctx: &Context, out: &mut String) {
        if let Some(name) = self.folded(t, ctx) {
            out.push_str(name);
            return;
        }
        let sig = self.sig();
        match t {
            Term::Var { sort, index } => {
                if *index <= base.count(*sort) {
                    if sort.index() == 0 {
                        out.push_str(&format!("var {index}"));
                    } else {
                        out.push_str(&format!("var@{} {index}", sig.sorts.name(*sort)));
                    }
                } else {
                    out.push_str(&format!("{}{index}", letter(*sort)));
                }
            }
            Term::Meta { meta, args } => {
                let decl = &metas[meta.index()];
                out.push('?');
                out.push_str(&decl.name);
                if *args != decl.params.var_terms() {
                    out.push('(');
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        self.go(a, metas, base, ctx, out);
                    }
                    out.push(')');
                }
            }
            Term::Op { op, args, .. } => {
                let o = sig.op(*op);
                out.push_str(&o.name);
                if args.is_empty() {
                    return;
                }
                out.push('(');
                for (i, (a, spec)) in args.iter().zip(&o.args).enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    let binders: Vec<String> = spec
                        .binds
                        .vars()
                        .map(|(s, j)| format!("{}{}", letter(s), ctx.count(s) + j))
                        .collect();
                    if !binders.is_empty() {
                        out.push_str(&binders.join(" "));
                        out.push_str(". ");
                    }
                    self.go(a, metas, base, &ctx.extend(&spec.binds), out);
                }
                out.push(')');
            }
            Term::Coerce { body, .. } => self.go(body, metas, base, ctx, out),
        }
    }

    pub fn label(&self, l: &Label) -> String {
        let sorts = &self.sig().sorts;
        format!(
            "label {} : {}@{} -> {}@{}",
            l.name,
            sorts.name(l.source_sort),
            l.source_ctx.render(sorts),
            sorts.name(l.target_sort),
            l.target_ctx.render(sorts)
        )
    }

    pub fn rule(&self, r: &Rule) -> String {
        self.rule_with("rule", r)
    }

    pub fn rule_with(&self, keyword: &str, r: &Rule) -> String {
        let d = self.dsig;
        let cl = d.label(r.label);
        let mut s = format!("{keyword} {}: ", r.name);
        if keyword == "schematic-rule" {
            s.push('_');
        } else {
            s.push_str(&self.pattern(&r.source, &r.metas, &cl.source_ctx));
        }
        let schematic_head =
            |t: &Term| keyword == "schematic-rule" && t.as_identity_meta(&r.metas).map(|m| m.0) == Some(0);
        for (i, p) in r.premises.iter().enumerate() {
            let lab = d.label(p.label);
            s.push_str(if i == 0 { " with " } else { ", " });
            if schematic_head(&p.source) {
                s.push('_');
            } else {
                s.push_str(&self.pattern(&p.source, &r.metas, &lab.source_ctx));
            }
            s.push_str(&format!(" ={}=> ", lab.name));
            s.push_str(&self.pattern(&p.target, &r.metas, &lab.target_ctx));
        }
        s.push_str(&format!(" gives {} ", cl.name));
        if schematic_head(&r.target) {
            s.push('_');
        } else {
            s.push_str(&self.pattern(&r.target, &r.metas, &cl.target_ctx));
        }
        s
    }

    /// The whole signature in canonical declaration order.
    pub fn signature(&self) -> String {
        let d = self.dsig;
        let sig = self.sig();
        let sorts = &sig.sorts;
        let mut out = String::new();
        for s in sorts.sorts() {
            out.push_str(&format!("sort {}\n", sorts.name(s)));
        }
        for (a, b) in sorts.coercions() {
            out.push_str(&format!("coerce {} -> {}\n", sorts.name(*a), sorts.name(*b)));
        }
        out.push_str(&format!("binding {}\n", sorts.name(sig.binding_sort)));
        for o in sig.ops() {
            let args: Vec<String> = o
                .args
                .iter()
                .map(|a| format!("{}[{}]", sorts.name(a.sort), a.binds.render(sorts)))
                .collect();
            out.push_str(&format!(
                "op {} : ({}) -> {}",
                o.name,
                args.join(", "),
                sorts.name(o.result_sort)
            ));
            match o.kind {
                OpKind::Plain => {}
                OpKind::Program => out.push_str(" program"),
                OpKind::Value { active } => {
                    let depths: Vec<String> = o.args[active..]
                        .iter()
                        .map(|a| a.binds.count(sig.binding_sort).to_string())
                        .collect();
                    out.push_str(&format!(
                        " value {} {} d-=({})",
                        active,
                        o.args.len() - active,
                        depths.join(", ")
                    ));
                }
            }
            out.push('\n');
        }
        for l in &d.labels {
            out.push_str(&self.label(l));
            out.push('\n');
        }
        for (i, def) in d.defines.iter().enumerate() {
            let earlier = Printer {
                dsig: d,
                defines_visible: i,
            };
            out.push_str(&format!(
                "define {} : {} = {}\n",
                def.name,
                sorts.name(def.sort),
                earlier.closed(&def.term)
            ));
        }
        for r in &d.rules {
            out.push_str(&self.rule_with("rule", r));
            out.push('\n');
        }
        for r in &d.schematic_rules {
            out.push_str(&self.rule_with("schematic-rule", r));
            out.push('\n');
        }
        for r in &d.howe_rules {
            out.push_str(&self.rule_with("howe-rule", r));
            out.push('\n');
        }
        out
    }
}

/// No variable of `t` refers into `ctx`: every level is bound inside `t`.
fn is_closed_above(t: &Term, ctx: &Context) -> bool {
    match t {
        Term::Var { sort, index } => *index > ctx.count(*sort),
        Term::Meta { args, .. } | Term::Op { args, .. } => args.iter().all(|a| is_closed_above(a, ctx)),
        Term::Coerce { body, .. } => is_closed_above(body, ctx),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::load_instance;
    use crate::surface::{parse_term, parse_term_in};

    #[test]
    fn prints_bound_and_free_variables() {
        let dsig = load_instance("cbn").unwrap();
        let pr = Printer::new(&dsig);
        let ctx = Context::from_counts(vec![1]);
        let t = parse_term_in(&dsig, "lam(y. app(y, var 1))", SortId(0), &ctx).unwrap();
        assert_eq!(pr.term(&t, &ctx), "lam(x2. app(x2, var 1))");
    }

    #[test]
    fn defines_are_folded() {
        let dsig = load_instance("cbn").unwrap();
        let pr = Printer::new(&dsig);
        let t = parse_term(&dsig, "app(lam(x. x), lam(z. z))", SortId(0)).unwrap();
        assert_eq!(pr.closed(&t), "app(I, I)");
        let t = parse_term(&dsig, "lam(x. app(x, lam(y. y)))", SortId(0)).unwrap();
        assert_eq!(pr.closed(&t), "lam(x1. app(x1, I))");
    }

    #[test]
    fn print_parse_round_trip_on_enumerated_terms() {
        let dsig = load_instance("cbv").unwrap();
        let pr = Printer::new(&dsig);
        let sig = &dsig.binding;
        for s in sig.sorts.sorts() {
            let ctx = Context::from_counts(vec![1, 1]);
            for t in crate::syntax::enumerate_terms(sig, s, &ctx, 5) {
                let text = pr.term(&t, &ctx);
                assert_eq!(parse_term_in(&dsig, &text, s, &ctx).unwrap(), t, "{text}");
            }
        }
    }
}
