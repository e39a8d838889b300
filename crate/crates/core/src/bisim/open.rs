use serde::{Deserialize, Serialize};

use super::{close, BisimChecker, BisimError, PoolEntry, Relation, VerdictKind, Witness};
use crate::syntax::{check_term, Context, Term};

/// The closed relation whose open extension is tested.
pub enum ClosedOracle<'r> {
    /// Membership in a finite relation (equal terms always pass).
    Relation(&'r Relation),
    /// Bounded bisimilarity at the given depth.
    Bisimilarity { depth: u32 },
}

/// The pool closing at which an open pair was refuted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosingWitness {
    pub closing: Vec<PoolEntry>,
    pub left: Term,
    pub right: Term,
    /// The bisimulation witness, for the bisimilarity oracle.
    pub inner: Option<Box<Witness>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "witness", rename_all = "kebab-case")]
pub enum OpenVerdict {
    Holds,
    Fails(ClosingWitness),
    Inconclusive(ClosingWitness),
}

impl OpenVerdict {
    pub fn kind(&self) -> VerdictKind {
        match self {
            OpenVerdict::Holds => VerdictKind::Holds,
            OpenVerdict::Fails(_) => VerdictKind::Fails,
            OpenVerdict::Inconclusive(_) => VerdictKind::Inconclusive,
        }
    }

    pub fn holds(&self) -> bool {
        matches!(self, OpenVerdict::Holds)
    }
}

/// Tests `e1[σ] R e2[σ]` for every pool closing `σ` of `ctx`. A definite
/// failure at any closing wins over inconclusive ones.
pub fn open_extension_check(
    checker: &mut BisimChecker<'_>,
    oracle: &ClosedOracle<'_>,
    e1: &Term,
    e2: &Term,
    ctx: &Context,
) -> Result<OpenVerdict, BisimError> {
    let dsig = checker.signature();
    let sig = &dsig.binding;
    let sort = e1.sort();
    check_term(sig, &[], e1, sort, ctx)?;
    check_term(sig, &[], e2, sort, ctx)
        .map_err(|_| BisimError::SortMismatch(sig.sorts.name(sort).into(), sig.sorts.name(e2.sort()).into()))?;
    let closed = sig.empty_ctx();
    let mut pending = None;
    for closing in checker.pool().closings(ctx) {
        let (Some(a), Some(b)) = (close(sig, ctx, &closing, e1)?, close(sig, ctx, &closing, e2)?) else {
            continue;
        };
        let (kind, inner) = match oracle {
            ClosedOracle::Relation(r) => {
                if a == b || r.contains(sort, &closed, &a, &b) {
                    (VerdictKind::Holds, None)
                } else {
                    (VerdictKind::Fails, None)
                }
            }
            ClosedOracle::Bisimilarity { depth } => {
                let v = checker.bisim(&a, &b, *depth)?;
                (v.kind(), v.witness().cloned().map(Box::new))
            }
        };
        let w = || ClosingWitness {
            closing: closing.clone(),
            left: a.clone(),
            right: b.clone(),
            inner: inner.clone(),
        };
        match kind {
            VerdictKind::Holds => {}
            VerdictKind::Fails => return Ok(OpenVerdict::Fails(w())),
            VerdictKind::Inconclusive => {
                if pending.is_none() {
                    pending = Some(w());
                }
            }
        }
    }
    Ok(pending.map_or(OpenVerdict::Holds, OpenVerdict::Inconclusive))
}
