use serde::{Deserialize, Serialize};

use super::{bind_pattern, match_head, EvalError};
use crate::rules::{DynamicSignature, LabelId, Rule};
use crate::surface::Printer;
use crate::syntax::Term;

/// A derivation tree. The source of each premise subtree is the premise
/// source instantiated by the bindings made so far.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub rule: String,
    pub label: LabelId,
    pub source: Term,
    pub target: Term,
    pub premises: Vec<Derivation>,
}

/// A derivation with terms rendered in surface syntax.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationView {
    pub rule: String,
    pub label: String,
    pub source: String,
    pub target: String,
    pub premises: Vec<DerivationView>,
}

impl Derivation {
    /// Axioms have height 1.
    pub fn height(&self) -> u32 {
        1 + self.premises.iter().map(Derivation::height).max().unwrap_or(0)
    }

    pub fn view(&self, dsig: &DynamicSignature) -> DerivationView {
        let pr = Printer::new(dsig);
        self.view_with(dsig, &pr)
    }

    fn view_with(&self, dsig: &DynamicSignature, pr: &Printer<'_>) -> DerivationView {
        let lab = dsig.label(self.label);
        DerivationView {
            rule: self.rule.clone(),
            label: lab.name.clone(),
            source: pr.term(&self.source, &lab.source_ctx),
            target: pr.term(&self.target, &lab.target_ctx),
            premises: self.premises.iter().map(|p| p.view_with(dsig, pr)).collect(),
        }
    }

    /// Indented text, conclusion first, premises below.
    pub fn render(&self, dsig: &DynamicSignature) -> String {
        let mut out = String::new();
        render_view(&self.view(dsig), 0, &mut out);
        out
    }
}

fn render_view(v: &DerivationView, depth: usize, out: &mut String) {
    out.push_str(&format!(
        "{}{} =={}=> {}   [{}]\n",
        "  ".repeat(depth),
        v.source,
        v.label,
        v.target,
        v.rule
    ));
    for p in &v.premises {
        render_view(p, depth + 1, out);
    }
}

pub(super) fn check(dsig: &DynamicSignature, rules: &[Rule], d: &Derivation) -> Result<(), EvalError> {
    let bad = |m: String| EvalError::BadDerivation(m);
    let rule = rules
        .iter()
        .find(|r| r.name == d.rule)
        .ok_or_else(|| bad(format!("unknown rule `{}`", d.rule)))?;
    if rule.label != d.label {
        return Err(bad(format!("rule `{}` concludes a different label", rule.name)));
    }
    let mut env =
        match_head(rule, &d.source).ok_or_else(|| bad(format!("rule `{}` does not match its source", rule.name)))?;
    if rule.premises.len() != d.premises.len() {
        return Err(bad(format!(
            "rule `{}` has {} premises",
            rule.name,
            rule.premises.len()
        )));
    }
    let sig = &dsig.binding;
    for (p, sub) in rule.premises.iter().zip(&d.premises) {
        let lab = dsig.label(p.label);
        let src = env.instantiate(sig, &rule.metas, &p.source, &lab.source_ctx)?;
        if src != sub.source || sub.label != p.label {
            return Err(bad(format!("premise of `{}` has the wrong source or label", rule.name)));
        }
        check(dsig, rules, sub)?;
        env = bind_pattern(&rule.metas, &p.target, &sub.target, env)
            .ok_or_else(|| bad(format!("premise target of `{}` does not match its pattern", rule.name)))?;
    }
    let concl = dsig.label(rule.label);
    let target = env.instantiate(sig, &rule.metas, &rule.target, &concl.target_ctx)?;
    if target != d.target {
        return Err(bad(format!(
            "conclusion of `{}` does not reproduce the target",
            rule.name
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::Evaluator;
    use crate::instances::load_instance;
    use crate::surface::parse_term;
    use crate::syntax::SortId;

    #[test]
    fn axiom_is_a_single_node() {
        let dsig = load_instance("cbn").unwrap();
        let t = parse_term(&dsig, "lam(x. x)", SortId(0)).unwrap();
        let ds = Evaluator::new(&dsig)
            .unwrap()
            .derivation_trace(&t, crate::rules::LabelId(0), 1)
            .unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].rule, "val");
        assert!(ds[0].premises.is_empty());
        assert_eq!(ds[0].height(), 1);
    }

    #[test]
    fn beta_has_two_premises_under_the_root() {
        let dsig = load_instance("cbn").unwrap();
        let t = parse_term(&dsig, "app(lam(x. x), lam(y. y))", SortId(0)).unwrap();
        let mut ev = Evaluator::new(&dsig).unwrap();
        let ds = ev.derivation_trace(&t, crate::rules::LabelId(0), 3).unwrap();
        assert_eq!(ds.len(), 1);
        let d = &ds[0];
        assert_eq!(d.rule, "beta");
        assert_eq!(d.premises.len(), 2);
        assert_eq!(d.height(), 2);
        assert!(d.premises.iter().all(|p| p.rule == "val"));
        ev.check_derivation(d).unwrap();
        assert_eq!(
            d.render(&dsig),
            "app(I, I) ==eval=> var 1   [beta]\n  I ==eval=> var 1   [val]\n  I ==eval=> var 1   [val]\n"
        );
    }

    #[test]
    fn omega_has_no_derivations() {
        let dsig = load_instance("cbn").unwrap();
        let t = parse_term(&dsig, "Omega", SortId(0)).unwrap();
        let ds = Evaluator::new(&dsig)
            .unwrap()
            .derivation_trace(&t, crate::rules::LabelId(0), 10)
            .unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn tampered_derivation_fails_recheck() {
        let dsig = load_instance("cbn").unwrap();
        let t = parse_term(&dsig, "app(lam(x. x), lam(y. y))", SortId(0)).unwrap();
        let mut ev = Evaluator::new(&dsig).unwrap();
        let mut d = ev.derivation_trace(&t, crate::rules::LabelId(0), 3).unwrap().remove(0);
        d.target = t.clone();
        assert!(ev.check_derivation(&d).is_err());
    }
}
