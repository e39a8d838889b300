//! Howe's closure over bounded universes, and bounded sweeps of the facts
//! that make substitution-closed bisimilarity a congruence.
//!
//! Everything is finite: the closure is a least fixpoint inside a universe
//! of enumerated terms, so clauses whose witnesses lie outside it are not
//! applied and the result under-approximates the unbounded closure.

mod closure;
mod congruence;
mod oracle;
mod simulation;
mod transitive;
mod universe;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bisim::{BisimError, Fingerprinter, PoolMode, SubstPool};
use crate::eval::EvalError;
use crate::rules::{DynamicSignature, RulesError};
use crate::syntax::SyntaxError;

pub use closure::{
    composition_check, congruence_check, fixpoint_check, howe_step, inclusion_check, reflexivity_check, saturate,
    CheckOutcome, HoweClosure, Violation,
};
pub use congruence::{
    congruence_sweep, CongruenceCounterexample, CongruenceParams, CongruenceReport, OneHoleContext, HOLE,
};
pub use oracle::{BaseOracle, BisimOracle, RelationOracle, SyntacticOracle};
pub use simulation::{
    hetero_substitution_check, simulation_check, ClosingOutcome, HeteroReport, HeteroViolation, SimulationCandidate,
    SimulationFailure, SimulationReport,
};
pub use transitive::{
    relational_transitive_closure, symmetry_check, transitive_closure, universe_symmetry_check, Asymmetry,
};
pub use universe::{Head, IndexId, IndexStats, Node, TermId, Universe, UniverseRelation, UniverseSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HoweError {
    #[error(transparent)]
    Bisim(#[from] BisimError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

impl From<RulesError> for HoweError {
    fn from(e: RulesError) -> Self {
        HoweError::Eval(e.into())
    }
}

/// Materialises `B` on the universe and saturates.
pub fn howe_closure(u: &Universe, oracle: &mut dyn BaseOracle) -> Result<(UniverseRelation, HoweClosure), HoweError> {
    let b = oracle.materialise(u)?;
    let h = saturate(u, &b);
    Ok((b, h))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Checks {
    /// The exact fixpoint properties and symmetry.
    Basic,
    /// Also the sampled substitution and simulation checks.
    All,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoweParams {
    pub universe: UniverseSpec,
    /// Depth of the bisimilarity oracle.
    pub depth: u32,
    pub fuel: u32,
    pub pool_size: usize,
    pub values_only: bool,
    /// Heterogeneous-substitution samples.
    pub samples: usize,
    pub seed: u64,
    pub checks: Checks,
}

impl Default for HoweParams {
    fn default() -> Self {
        HoweParams {
            universe: UniverseSpec::default(),
            depth: 3,
            fuel: 8,
            pool_size: 4,
            values_only: true,
            samples: 100,
            seed: 0,
            checks: Checks::All,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoweSuiteReport {
    pub params: HoweParams,
    pub oracle: String,
    pub universe: Vec<IndexStats>,
    pub universe_terms: usize,
    pub oracle_pairs: usize,
    /// Closure size after each saturation round.
    pub iterations: Vec<usize>,
    pub closure_pairs: usize,
    pub reflexive: CheckOutcome,
    pub contains_oracle: CheckOutcome,
    pub composition: CheckOutcome,
    pub congruence: CheckOutcome,
    pub fixpoint: CheckOutcome,
    pub transitive_pairs: usize,
    /// Warshall and iterated composition gave the same closure.
    pub closures_agree: bool,
    /// `None` when the transitive closure is symmetric.
    pub asymmetry: Option<Asymmetry>,
    pub hetero: Option<HeteroReport>,
    /// Targets of `H` checked against `H`.
    pub simulation: Option<SimulationReport>,
    /// Targets of `H` checked against the closure of the oracle one level
    /// shallower: depth-`d` relatedness only promises depth `d - 1` for
    /// targets.
    pub stratified_simulation: Option<SimulationReport>,
    pub elapsed_ms: u128,
}

impl HoweSuiteReport {
    /// The properties that hold by construction on any finite universe.
    pub fn exact_ok(&self) -> bool {
        self.reflexive.ok()
            && self.contains_oracle.ok()
            && self.composition.ok()
            && self.congruence.ok()
            && self.fixpoint.ok()
            && self.closures_agree
    }

    /// Failures of properties that hold only for unbounded bisimilarity;
    /// under bounded oracles they are expected when bounds are small.
    pub fn findings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(a) = &self.asymmetry {
            out.push(format!(
                "transitive closure is not symmetric ({} pairs lack a converse)",
                a.total
            ));
        }
        if let Some(h) = self.hetero.as_ref().filter(|h| !h.ok()) {
            out.push(format!(
                "{} of {} substitution samples left the closure ({} chain failures)",
                h.violations, h.samples, h.chain_violations
            ));
        }
        if let Some(s) = self.simulation.as_ref().filter(|s| !s.ok()) {
            out.push(format!("{} definite simulation violations", s.violations));
        }
        if let Some(s) = self.stratified_simulation.as_ref().filter(|s| !s.ok()) {
            out.push(format!("{} definite stratified simulation violations", s.violations));
        }
        out
    }
}

/// Builds the universe, closes the bisimilarity oracle and runs every check.
pub fn howe_suite(dsig: &DynamicSignature, params: &HoweParams) -> Result<HoweSuiteReport, HoweError> {
    let start = Instant::now();
    let sig = &dsig.binding;
    let mode = if params.values_only {
        PoolMode::ValuesOnly
    } else {
        PoolMode::Programs
    };
    let pool = SubstPool::new(sig, params.pool_size, mode);
    let u = Universe::new(sig, params.universe);
    let mut oracle = BisimOracle::new(Fingerprinter::new(dsig, pool.clone(), params.fuel)?, params.depth);
    let (b, h) = howe_closure(&u, &mut oracle)?;
    let rel = &h.relation;
    let tc = rel.transitive_closure(&u);
    let closures_agree = rel.relational_transitive_closure(&u) == tc;
    let description = oracle.describe();
    let (hetero, simulation, stratified_simulation) = match params.checks {
        Checks::Basic => (None, None, None),
        Checks::All => {
            let mut shallow = BisimOracle::new(oracle.into_fingerprinter(), params.depth.saturating_sub(1));
            let (_, h_shallow) = howe_closure(&u, &mut shallow)?;
            (
                Some(hetero_substitution_check(
                    sig,
                    &u,
                    rel,
                    Some(&b),
                    params.samples,
                    params.seed,
                )?),
                Some(simulation_check(dsig, &u, rel, rel, params.fuel, &pool)?),
                Some(simulation_check(
                    dsig,
                    &u,
                    rel,
                    &h_shallow.relation,
                    params.fuel,
                    &pool,
                )?),
            )
        }
    };
    Ok(HoweSuiteReport {
        params: params.clone(),
        oracle: description,
        universe: u.stats(sig),
        universe_terms: u.total(),
        oracle_pairs: b.len(),
        iterations: h.sizes.clone(),
        closure_pairs: rel.len(),
        reflexive: reflexivity_check(&u, rel),
        contains_oracle: inclusion_check(&u, &b, rel),
        composition: composition_check(&u, rel, &b),
        congruence: congruence_check(&u, rel),
        fixpoint: fixpoint_check(&u, &b, rel),
        transitive_pairs: tc.len(),
        closures_agree,
        asymmetry: universe_symmetry_check(&u, &tc).err(),
        hetero,
        simulation,
        stratified_simulation,
        elapsed_ms: start.elapsed().as_millis(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::load_instance;
    use crate::surface::{parse_term, parse_term_in};
    use crate::syntax::{Context, SortId};

    const P: SortId = SortId(0);

    #[test]
    fn identity_and_its_eta_expansion_are_howe_related() {
        let dsig = load_instance("cbn").unwrap();
        let sig = &dsig.binding;
        let u = Universe::new(sig, UniverseSpec::default());
        let pool = SubstPool::new(sig, 4, PoolMode::ValuesOnly);
        let mut oracle = BisimOracle::new(Fingerprinter::new(&dsig, pool, 8).unwrap(), 3);
        let (b, h) = howe_closure(&u, &mut oracle).unwrap();
        let closed = sig.empty_ctx();
        let a = parse_term(&dsig, "lam(x. x)", P).unwrap();
        let e = parse_term(&dsig, "lam(x. app(lam(y. y), x))", P).unwrap();
        let (ix, ia) = u.locate(P, &closed, &a).unwrap();
        let (_, ie) = u.locate(P, &closed, &e).unwrap();
        assert!(h.relation.contains(ix, ia, ie));
        // through the variable clause one level down
        let one = Context::from_counts(vec![1]);
        let x = parse_term_in(&dsig, "var 1", P, &one).unwrap();
        let y = parse_term_in(&dsig, "app(lam(y. y), var 1)", P, &one).unwrap();
        let (ix1, ix_) = u.locate(P, &one, &x).unwrap();
        let (_, iy) = u.locate(P, &one, &y).unwrap();
        assert!(b.contains(ix1, ix_, iy));
        assert!(h.relation.contains(ix1, ix_, iy));
    }

    #[test]
    fn closure_is_monotone_in_the_oracle() {
        let dsig = load_instance("cbn").unwrap();
        let sig = &dsig.binding;
        let u = Universe::new(sig, UniverseSpec { size: 4, ctx_bound: 1 });
        let pool = SubstPool::new(sig, 3, PoolMode::ValuesOnly);
        let mut fp = Fingerprinter::new(&dsig, pool, 6).unwrap();
        let mut prev: Option<(UniverseRelation, UniverseRelation)> = None;
        // deeper oracles relate less
        for d in (0..4).rev() {
            let mut o = BisimOracle::new(fp, d);
            let (b, h) = howe_closure(&u, &mut o).unwrap();
            if let Some((pb, ph)) = &prev {
                assert!(pb.is_subset(&b));
                assert!(ph.is_subset(&h.relation));
            }
            prev = Some((b, h.relation));
            fp = o.into_fingerprinter();
        }
    }

    #[test]
    fn basic_suite_on_a_small_universe() {
        let dsig = load_instance("cbn").unwrap();
        let params = HoweParams {
            universe: UniverseSpec { size: 4, ctx_bound: 1 },
            checks: Checks::Basic,
            pool_size: 3,
            ..HoweParams::default()
        };
        let rep = howe_suite(&dsig, &params).unwrap();
        assert!(rep.exact_ok(), "{rep:?}");
        assert!(rep.closure_pairs >= rep.oracle_pairs);
        assert_eq!(*rep.iterations.last().unwrap(), rep.closure_pairs);
    }
}
