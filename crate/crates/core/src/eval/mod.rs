//! Fuel-bounded big-step derivation search.
//!
//! `transitions(t, l, h)` is the set of targets `u` with a derivation of
//! `t =l=> u` of height at most `h`. Every premise is evaluated with one unit
//! less fuel, so recursion terminates without loop detection. A search branch
//! cut at fuel 0 (some rule would have applied) marks the result incomplete.

mod oracle;
mod trace;

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rules::{validate_evaluable, DynamicSignature, LabelId, Rule, RulesError};
use crate::syntax::{check_term, MetaEnv, MetaVar, OpId, SortId, SyntaxError, Term};

pub use oracle::{compare_with_oracle, small_step_oracle, OracleComparison, OracleMismatch, OracleSet, Reach};
pub use trace::{Derivation, DerivationView};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Rules(#[from] RulesError),
    #[error("the small-step oracle needs the nondeterministic signature: {0}")]
    NotNondet(String),
    #[error("derivation does not re-check: {0}")]
    BadDerivation(String),
}

/// All targets found within the fuel bound.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionSet {
    pub targets: BTreeSet<Term>,
    /// Some branch was cut at height 0; more fuel may find more targets.
    pub fuel_exhausted: bool,
}

impl TransitionSet {
    pub fn is_complete(&self) -> bool {
        !self.fuel_exhausted
    }
}

/// One way a rule fired: its conclusion target and, when recorded, the
/// (source, target) pair of each premise.
struct Branch {
    target: Term,
    premises: Vec<(Term, Term)>,
}

/// An evaluation session. Holds the effective rule set, the dispatch table
/// and the memo tables; results never depend on memo state.
pub struct Evaluator<'a> {
    dsig: &'a DynamicSignature,
    rules: Rc<Vec<Rule>>,
    dispatch: HashMap<(OpId, SortId, LabelId), Vec<usize>>,
    memo: HashMap<(Term, LabelId, u32), Rc<TransitionSet>>,
    // A complete result at fuel h is the answer at every fuel >= h.
    complete: HashMap<(Term, LabelId), (u32, Rc<TransitionSet>)>,
    derivations: HashMap<(Term, LabelId, u32, Term), Option<Derivation>>,
}

impl<'a> Evaluator<'a> {
    /// Builds a session over the signature's effective rules, rejecting rules
    /// the search cannot run.
    pub fn new(dsig: &'a DynamicSignature) -> Result<Self, EvalError> {
        let rules = dsig.effective_rules()?;
        let mut diagnostics = Vec::new();
        for r in &rules {
            diagnostics.extend(validate_evaluable(r, dsig)?);
        }
        if !diagnostics.is_empty() {
            return Err(RulesError::Invalid(diagnostics).into());
        }
        let mut dispatch: HashMap<_, Vec<usize>> = HashMap::new();
        for (i, r) in rules.iter().enumerate() {
            if let Some((op, sort)) = r.head() {
                dispatch.entry((op, sort, r.label)).or_default().push(i);
            }
        }
        Ok(Evaluator {
            dsig,
            rules: Rc::new(rules),
            dispatch,
            memo: HashMap::new(),
            complete: HashMap::new(),
            derivations: HashMap::new(),
        })
    }

    pub fn signature(&self) -> &'a DynamicSignature {
        self.dsig
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Number of memoised `(term, label, fuel)` entries.
    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    fn check_source(&self, t: &Term, l: LabelId) -> Result<(), EvalError> {
        let lab = self.dsig.label(l);
        check_term(&self.dsig.binding, &[], t, lab.source_sort, &lab.source_ctx)?;
        Ok(())
    }

    /// Targets of `t =l=> _` derivable with height at most `fuel`.
    pub fn transitions(&mut self, t: &Term, l: LabelId, fuel: u32) -> Result<Rc<TransitionSet>, EvalError> {
        self.check_source(t, l)?;
        self.transitions_unchecked(t, l, fuel)
    }

    fn transitions_unchecked(&mut self, t: &Term, l: LabelId, fuel: u32) -> Result<Rc<TransitionSet>, EvalError> {
        let key = (t.clone(), l);
        if let Some((h, set)) = self.complete.get(&key) {
            if *h <= fuel {
                return Ok(Rc::clone(set));
            }
        }
        let mkey = (t.clone(), l, fuel);
        if let Some(set) = self.memo.get(&mkey) {
            return Ok(Rc::clone(set));
        }
        let set = Rc::new(self.compute(t, l, fuel)?);
        if set.is_complete() {
            let e = self.complete.entry(key).or_insert((fuel, Rc::clone(&set)));
            if fuel < e.0 {
                *e = (fuel, Rc::clone(&set));
            }
        }
        self.memo.insert(mkey, Rc::clone(&set));
        Ok(set)
    }

    fn candidates(&self, t: &Term, l: LabelId) -> &[usize] {
        match t {
            Term::Op { op, sort, .. } => self.dispatch.get(&(*op, *sort, l)).map_or(&[], Vec::as_slice),
            _ => &[],
        }
    }

    fn compute(&mut self, t: &Term, l: LabelId, fuel: u32) -> Result<TransitionSet, EvalError> {
        let candidates = self.candidates(t, l).to_vec();
        let mut set = TransitionSet::default();
        if fuel == 0 {
            set.fuel_exhausted = !candidates.is_empty();
            return Ok(set);
        }
        let rules = Rc::clone(&self.rules);
        for ri in candidates {
            let rule = &rules[ri];
            let Some(env) = match_head(rule, t) else {
                continue;
            };
            let mut found = Vec::new();
            self.premises(
                rule,
                0,
                env,
                fuel - 1,
                &mut Vec::new(),
                false,
                &mut found,
                &mut set.fuel_exhausted,
            )?;
            set.targets.extend(found.into_iter().map(|b| b.target));
        }
        Ok(set)
    }

    // Cartesian search over premise targets, left to right.
    #[allow(clippy::too_many_arguments)]
    fn premises(
        &mut self,
        rule: &Rule,
        k: usize,
        env: MetaEnv,
        fuel: u32,
        chosen: &mut Vec<(Term, Term)>,
        record: bool,
        out: &mut Vec<Branch>,
        exhausted: &mut bool,
    ) -> Result<(), EvalError> {
        let dsig = self.dsig;
        let sig = &dsig.binding;
        if k == rule.premises.len() {
            let concl = dsig.label(rule.label);
            let target = env.instantiate(sig, &rule.metas, &rule.target, &concl.target_ctx)?;
            out.push(Branch {
                target,
                premises: if record { chosen.clone() } else { Vec::new() },
            });
            return Ok(());
        }
        let p = &rule.premises[k];
        let lab = dsig.label(p.label);
        let src = env.instantiate(sig, &rule.metas, &p.source, &lab.source_ctx)?;
        let res = self.transitions_unchecked(&src, p.label, fuel)?;
        *exhausted |= res.fuel_exhausted;
        for u in &res.targets {
            let Some(next) = bind_pattern(&rule.metas, &p.target, u, env.clone()) else {
                continue;
            };
            if record {
                chosen.push((src.clone(), u.clone()));
            }
            self.premises(rule, k + 1, next, fuel, chosen, record, out, exhausted)?;
            if record {
                chosen.pop();
            }
        }
        Ok(())
    }

    /// One derivation per target of `transitions(t, l, fuel)`, in target
    /// order; each is the first found in rule order.
    pub fn derivation_trace(&mut self, t: &Term, l: LabelId, fuel: u32) -> Result<Vec<Derivation>, EvalError> {
        let set = self.transitions(t, l, fuel)?;
        set.targets
            .iter()
            .map(|u| {
                self.derive(t, l, fuel, u)?
                    .ok_or_else(|| EvalError::BadDerivation("target without derivation".into()))
            })
            .collect()
    }

    /// A derivation of `t =l=> u` of height at most `fuel`, if one exists.
    pub fn derive(&mut self, t: &Term, l: LabelId, fuel: u32, u: &Term) -> Result<Option<Derivation>, EvalError> {
        let key = (t.clone(), l, fuel, u.clone());
        if let Some(d) = self.derivations.get(&key) {
            return Ok(d.clone());
        }
        let d = self.derive_uncached(t, l, fuel, u)?;
        self.derivations.insert(key, d.clone());
        Ok(d)
    }

    fn derive_uncached(&mut self, t: &Term, l: LabelId, fuel: u32, u: &Term) -> Result<Option<Derivation>, EvalError> {
        if fuel == 0 || !self.transitions_unchecked(t, l, fuel)?.targets.contains(u) {
            return Ok(None);
        }
        let rules = Rc::clone(&self.rules);
        for ri in self.candidates(t, l).to_vec() {
            let rule = &rules[ri];
            let Some(env) = match_head(rule, t) else {
                continue;
            };
            let mut found = Vec::new();
            let mut exhausted = false;
            self.premises(
                rule,
                0,
                env,
                fuel - 1,
                &mut Vec::new(),
                true,
                &mut found,
                &mut exhausted,
            )?;
            let Some(b) = found.into_iter().find(|b| &b.target == u) else {
                continue;
            };
            let mut subs = Vec::with_capacity(b.premises.len());
            for (p, (src, tgt)) in rule.premises.iter().zip(&b.premises) {
                let sub = self.derive(src, p.label, fuel - 1, tgt)?.ok_or_else(|| {
                    EvalError::BadDerivation(format!("premise of `{}` lost its derivation", rule.name))
                })?;
                subs.push(sub);
            }
            return Ok(Some(Derivation {
                rule: rule.name.clone(),
                label: l,
                source: t.clone(),
                target: u.clone(),
                premises: subs,
            }));
        }
        Ok(None)
    }

    /// Re-checks a derivation bottom-up against the session's rules.
    pub fn check_derivation(&self, d: &Derivation) -> Result<(), EvalError> {
        trace::check(self.dsig, &self.rules, d)
    }
}

/// Binds the generic head pattern of `rule` against `t`.
pub(crate) fn match_head(rule: &Rule, t: &Term) -> Option<MetaEnv> {
    let (
        Term::Op { op, sort, args },
        Term::Op {
            op: top,
            sort: tsort,
            args: targs,
        },
    ) = (&rule.source, t)
    else {
        return None;
    };
    if op != top || sort != tsort {
        return None;
    }
    let mut env = MetaEnv::new();
    for (a, ta) in args.iter().zip(targs) {
        match a {
            Term::Meta { meta, .. } => env.insert(*meta, ta.clone()),
            _ => return None,
        }
    }
    Some(env)
}

/// Matches a premise target pattern (a fresh metavariable or an operator
/// over fresh metavariables) against a derived target.
pub(crate) fn bind_pattern(metas: &[MetaVar], pat: &Term, u: &Term, mut env: MetaEnv) -> Option<MetaEnv> {
    if let Some(m) = pat.as_identity_meta(metas) {
        env.insert(m, u.clone());
        return Some(env);
    }
    match (pat, u) {
        (
            Term::Op { op, sort, args },
            Term::Op {
                op: uop,
                sort: usort,
                args: uargs,
            },
        ) if op == uop && sort == usort => {
            for (a, ua) in args.iter().zip(uargs) {
                env.insert(a.as_identity_meta(metas)?, ua.clone());
            }
            Some(env)
        }
        _ => None,
    }
}

/// One-shot form of [`Evaluator::transitions`].
pub fn transitions(dsig: &DynamicSignature, t: &Term, l: LabelId, fuel: u32) -> Result<TransitionSet, EvalError> {
    let mut ev = Evaluator::new(dsig)?;
    Ok(ev.transitions(t, l, fuel)?.as_ref().clone())
}

/// One-shot form of [`Evaluator::derivation_trace`].
pub fn derivation_trace(
    dsig: &DynamicSignature,
    t: &Term,
    l: LabelId,
    fuel: u32,
) -> Result<Vec<Derivation>, EvalError> {
    Evaluator::new(dsig)?.derivation_trace(t, l, fuel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::load_instance;
    use crate::surface::{parse_term, Printer};
    use crate::syntax::{enumerate_terms, SortId};

    const P: SortId = SortId(0);

    fn eval(name: &str, text: &str, label: &str, fuel: u32) -> (DynamicSignature, TransitionSet) {
        let dsig = load_instance(name).unwrap();
        let t = parse_term(&dsig, text, dsig.label(dsig.lookup_label(label).unwrap()).source_sort).unwrap();
        let l = dsig.lookup_label(label).unwrap();
        let set = transitions(&dsig, &t, l, fuel).unwrap();
        (dsig, set)
    }

    #[test]
    fn identity_evaluates_to_its_body() {
        let (_, set) = eval("cbn", "lam(x. x)", "eval", 1);
        assert_eq!(set.targets.into_iter().collect::<Vec<_>>(), vec![Term::var(P, 1)]);
        assert!(!set.fuel_exhausted);
    }

    #[test]
    fn beta_example() {
        let (_, set) = eval("cbn", "app(lam(x. x), lam(y. y))", "eval", 3);
        assert_eq!(set.targets.into_iter().collect::<Vec<_>>(), vec![Term::var(P, 1)]);
        assert!(!set.fuel_exhausted);
        // height 2 suffices: val under beta
        let (_, set2) = eval("cbn", "app(lam(x. x), lam(y. y))", "eval", 2);
        assert_eq!(set2.targets.len(), 1);
        let (_, set1) = eval("cbn", "app(lam(x. x), lam(y. y))", "eval", 1);
        assert!(set1.targets.is_empty() && set1.fuel_exhausted);
    }

    #[test]
    fn omega_is_empty_and_exhausted() {
        let (_, set) = eval("cbn", "Omega", "eval", 10);
        assert!(set.targets.is_empty());
        assert!(set.fuel_exhausted);
    }

    #[test]
    fn fuel_zero_flags_applicable_rules_only() {
        let (_, set) = eval("cbn", "lam(x. x)", "eval", 0);
        assert!(set.targets.is_empty() && set.fuel_exhausted);
        let (_, set) = eval("nondet", "lam(x. x)", "tau", 0);
        assert!(set.fuel_exhausted);
    }

    #[test]
    fn erratic_choice_has_both_targets() {
        let (dsig, set) = eval("nondet", "amb(lam(x. x))", "tau", 4);
        let i = parse_term(&dsig, "I", P).unwrap();
        let omega = parse_term(&dsig, "Omega", P).unwrap();
        assert!(set.targets.contains(&i));
        assert!(set.targets.contains(&omega));
    }

    #[test]
    fn cbv_substitutes_values() {
        // (lam x. x) (lam y. y) evaluates to the body of the argument
        let (dsig, set) = eval("cbv", "app(lam(x. x), lam(y. y))", "eval", 4);
        let pr = Printer::new(&dsig);
        let ctx = dsig.label(LabelId(0)).target_ctx.clone();
        let shown: Vec<String> = set.targets.iter().map(|u| pr.term(u, &ctx)).collect();
        assert_eq!(shown, vec!["var 1"]);
    }

    #[test]
    fn howe_format_evaluates_to_values() {
        let (dsig, set) = eval("cbn-howe", "app(I, I)", "eval", 3);
        let i = parse_term(&dsig, "lam(y. y)", SortId(0)).unwrap();
        assert_eq!(set.targets.into_iter().collect::<Vec<_>>(), vec![i]);
    }

    #[test]
    fn ill_scoped_source_is_an_error() {
        let dsig = load_instance("cbn").unwrap();
        let mut ev = Evaluator::new(&dsig).unwrap();
        assert!(matches!(
            ev.transitions(&Term::var(P, 1), LabelId(0), 3),
            Err(EvalError::Syntax(_))
        ));
    }

    #[test]
    fn naive_rules_evaluate_like_howe_rules() {
        // not rigid, but every premise target is a generic pattern
        let src = include_str!("../../corpus/cbn-howe-naive.sig");
        let naive = crate::surface::parse_signature(src).unwrap();
        let howe = load_instance("cbn-howe").unwrap();
        let mut a = Evaluator::new(&naive).unwrap();
        let mut b = Evaluator::new(&howe).unwrap();
        for t in enumerate_terms(&howe.binding, SortId(1), &howe.binding.empty_ctx(), 6) {
            assert_eq!(
                a.transitions(&t, LabelId(0), 5).unwrap(),
                b.transitions(&t, LabelId(0), 5).unwrap()
            );
        }
    }

    #[test]
    fn results_do_not_depend_on_memo_state() {
        let dsig = load_instance("nondet").unwrap();
        let tau = dsig.lookup_label("tau").unwrap();
        let terms = enumerate_terms(&dsig.binding, P, &dsig.binding.empty_ctx(), 5);
        let mut warm = Evaluator::new(&dsig).unwrap();
        for t in terms.iter().rev() {
            let a = warm.transitions(t, tau, 4).unwrap();
            let b = Evaluator::new(&dsig).unwrap().transitions(t, tau, 4).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn traces_recheck_and_have_bounded_height() {
        let dsig = load_instance("nondet").unwrap();
        let tau = dsig.lookup_label("tau").unwrap();
        let mut ev = Evaluator::new(&dsig).unwrap();
        for t in enumerate_terms(&dsig.binding, P, &dsig.binding.empty_ctx(), 5) {
            let set = ev.transitions(&t, tau, 3).unwrap();
            let ds = ev.derivation_trace(&t, tau, 3).unwrap();
            assert_eq!(ds.len(), set.targets.len());
            for d in &ds {
                ev.check_derivation(d).unwrap();
                assert!(d.height() <= 3);
            }
        }
    }
}
