//! Small-step reference semantics for the erratic-choice calculus, and the
//! bounded comparison with the big-step `tau` / `lambda` transitions.
//!
//! One step: `amb(e) => e`, `amb(e) => Omega`, `app(lam(b), f) => b[f]`, and
//! steps of `e` lift to `app(e, f)`. The oracle explores up to `bound` steps
//! breadth first. Reflexivity is the zero-step path.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Derivation, EvalError, Evaluator};
use crate::rules::{DynamicSignature, LabelId};
use crate::syntax::{Context, OpId, SortId, Substitution, Term};

/// How a term was first reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reach {
    /// Length of the (shortest) path found.
    pub steps: u32,
    /// Largest big-step height of a single step along that path.
    pub max_step_height: u32,
}

impl Reach {
    /// Height of a big-step `tau` derivation reproducing the path: single
    /// steps combined by a balanced tree of transitivity nodes.
    pub fn tau_height(&self) -> u32 {
        if self.steps == 0 {
            1
        } else {
            self.max_step_height + ceil_log2(self.steps)
        }
    }

    /// Height of a `lambda` derivation for a path ending in `lam(b)`.
    pub fn lambda_height(&self) -> u32 {
        if self.steps == 0 {
            1
        } else {
            1 + self.tau_height()
        }
    }
}

fn ceil_log2(n: u32) -> u32 {
    32 - (n - 1).leading_zeros()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleSet {
    pub reached: BTreeMap<Term, Reach>,
    /// No new term is reachable: the set is the full reduct set.
    pub saturated: bool,
}

struct Nondet {
    lam: OpId,
    app: OpId,
    amb: OpId,
    omega: Term,
    tau: LabelId,
    lambda: LabelId,
}

const P: SortId = SortId(0);

impl Nondet {
    fn new(dsig: &DynamicSignature) -> Result<Self, EvalError> {
        let missing = |what: &str| EvalError::NotNondet(format!("no {what}"));
        let sig = &dsig.binding;
        if sig.n_sorts() != 1 {
            return Err(EvalError::NotNondet("expected a single sort".into()));
        }
        let op = |name: &str, arity: usize, binds: &[u32]| -> Result<OpId, EvalError> {
            let id = sig
                .lookup_op(name)
                .ok_or_else(|| missing(&format!("operator `{name}`")))?;
            let o = sig.op(id);
            let shape: Vec<u32> = o.args.iter().map(|a| a.binds.total()).collect();
            if o.args.len() != arity || shape != binds {
                return Err(EvalError::NotNondet(format!("operator `{name}` has the wrong shape")));
            }
            Ok(id)
        };
        Ok(Nondet {
            lam: op("lam", 1, &[1])?,
            app: op("app", 2, &[0, 0])?,
            amb: op("amb", 1, &[0])?,
            omega: dsig
                .define("Omega")
                .ok_or_else(|| missing("define `Omega`"))?
                .term
                .clone(),
            tau: dsig.lookup_label("tau").ok_or_else(|| missing("label `tau`"))?,
            lambda: dsig.lookup_label("lambda").ok_or_else(|| missing("label `lambda`"))?,
        })
    }

    /// One-step reducts with the big-step height of each step.
    fn step(&self, dsig: &DynamicSignature, t: &Term) -> Result<Vec<(Term, u32)>, EvalError> {
        let Term::Op { op, args, .. } = t else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        if *op == self.amb {
            out.push((args[0].clone(), 1));
            out.push((self.omega.clone(), 1));
        } else if *op == self.app {
            if let Term::Op { op: f, args: fargs, .. } = &args[0] {
                if *f == self.lam {
                    let sigma = Substitution::from_terms(
                        &Context::from_counts(vec![1]),
                        &Context::from_counts(vec![0]),
                        vec![args[1].clone()],
                    )?;
                    out.push((sigma.apply(&dsig.binding, &fargs[0])?, 2));
                }
            }
            for (e, h) in self.step(dsig, &args[0])? {
                out.push((Term::op(self.app, P, vec![e, args[1].clone()]), h + 1));
            }
        }
        Ok(out)
    }
}

/// Terms reachable from closed `t` in at most `bound` steps.
pub fn small_step_oracle(dsig: &DynamicSignature, t: &Term, bound: u32) -> Result<OracleSet, EvalError> {
    let nd = Nondet::new(dsig)?;
    crate::syntax::check_term(&dsig.binding, &[], t, P, &dsig.binding.empty_ctx())?;
    oracle_with(&nd, dsig, t, bound)
}

fn oracle_with(nd: &Nondet, dsig: &DynamicSignature, t: &Term, bound: u32) -> Result<OracleSet, EvalError> {
    let mut reached = BTreeMap::new();
    reached.insert(
        t.clone(),
        Reach {
            steps: 0,
            max_step_height: 0,
        },
    );
    let mut frontier = vec![t.clone()];
    let mut saturated = false;
    for n in 0..=bound {
        let mut next: BTreeMap<Term, Reach> = BTreeMap::new();
        for s in &frontier {
            let r = reached[s];
            for (u, h) in nd.step(dsig, s)? {
                if reached.contains_key(&u) {
                    continue;
                }
                let cand = Reach {
                    steps: n + 1,
                    max_step_height: r.max_step_height.max(h),
                };
                next.entry(u)
                    .and_modify(|e| {
                        if cand.max_step_height < e.max_step_height {
                            *e = cand;
                        }
                    })
                    .or_insert(cand);
            }
        }
        if next.is_empty() {
            saturated = true;
            break;
        }
        if n == bound {
            // `next` lies one step beyond the bound
            break;
        }
        frontier = next.keys().cloned().collect();
        reached.extend(next);
    }
    Ok(OracleSet { reached, saturated })
}

/// A definite disagreement between the big-step and small-step semantics.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleMismatch {
    pub label: String,
    /// For `lambda`, the body `b` of the reduct `lam(b)`.
    pub target: Term,
    /// True when big-step derives the target and the oracle does not.
    pub big_step_only: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub mismatches: Vec<OracleMismatch>,
    /// Targets found by one side only where the other side's bound does not
    /// provably cover them.
    pub frontier: Vec<OracleMismatch>,
}

impl OracleComparison {
    pub fn agrees(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compares `t =tau=> _` and `t =lambda=> _` at `fuel` with the oracle at
/// `bound`. A difference is definite only when the side missing the target
/// provably covers it: the oracle when saturated or when the big-step
/// derivation uses at most `bound` steps; the evaluator when complete or when
/// the oracle path fits in `fuel`.
pub fn compare_with_oracle(
    ev: &mut Evaluator<'_>,
    t: &Term,
    fuel: u32,
    bound: u32,
) -> Result<OracleComparison, EvalError> {
    let dsig = ev.signature();
    let nd = Nondet::new(dsig)?;
    let oracle = small_step_oracle(dsig, t, bound)?;
    let mut out = OracleComparison::default();

    let tau = ev.transitions(t, nd.tau, fuel)?;
    let oracle_tau: BTreeSet<&Term> = oracle.reached.keys().collect();
    let lam_bodies: BTreeMap<&Term, Reach> = oracle
        .reached
        .iter()
        .filter_map(|(u, r)| match u {
            Term::Op { op, args, .. } if *op == nd.lam => Some((&args[0], *r)),
            _ => None,
        })
        .collect();
    let lambda = ev.transitions(t, nd.lambda, fuel)?;

    let sides = [
        (
            "tau",
            nd.tau,
            &tau,
            oracle_tau
                .iter()
                .map(|u| (*u, oracle.reached[*u].tau_height()))
                .collect::<Vec<_>>(),
        ),
        (
            "lambda",
            nd.lambda,
            &lambda,
            lam_bodies.iter().map(|(b, r)| (*b, r.lambda_height())).collect(),
        ),
    ];
    for (name, label, big, small) in sides {
        let small_set: BTreeSet<&Term> = small.iter().map(|(u, _)| *u).collect();
        for u in &big.targets {
            if small_set.contains(u) {
                continue;
            }
            let covered = oracle.saturated || {
                let d = ev
                    .derive(t, label, fuel, u)?
                    .ok_or_else(|| EvalError::BadDerivation("target without derivation".into()))?;
                step_count(&d) <= bound
            };
            push(&mut out, covered, name, u, true);
        }
        for (u, height) in small {
            if big.targets.contains(u) {
                continue;
            }
            let covered = big.is_complete() || height <= fuel;
            push(&mut out, covered, name, u, false);
        }
    }
    Ok(out)
}

fn push(out: &mut OracleComparison, definite: bool, label: &str, target: &Term, big_step_only: bool) {
    let m = OracleMismatch {
        label: label.to_string(),
        target: target.clone(),
        big_step_only,
    };
    if definite {
        out.mismatches.push(m);
    } else {
        out.frontier.push(m);
    }
}

// Rules that perform one reduction step; every other rule adds none.
const STEP_RULES: [&str; 4] = ["amb-id", "amb-omega", "beta-lambda", "beta-tau"];

/// Number of small steps a big-step derivation stands for.
fn step_count(d: &Derivation) -> u32 {
    let own = u32::from(STEP_RULES.contains(&d.rule.as_str()));
    own + d.premises.iter().map(step_count).sum::<u32>()
}
