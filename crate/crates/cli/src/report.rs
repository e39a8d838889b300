//! Reports in surface syntax. JSON is the serialised form; [`Report::render`]
//! is a text rendering of the same data.

use std::fmt::Write as _;

use serde::Serialize;

use cellsem::bisim::{RelationReport, RelationViolation, Side, Verdict, VerdictKind};
use cellsem::eval::DerivationView;
use cellsem::howe::{
    CheckOutcome, CongruenceParams, CongruenceReport, HoweParams, HoweSuiteReport, IndexStats, SimulationReport, HOLE,
};
use cellsem::instances::CatalogEntry;
use cellsem::rules::{Diagnostic, DynamicSignature, RigidifyMapping, SignatureReport};
use cellsem::surface::Printer;
use cellsem::syntax::MetaVar;

use crate::{EXIT_FAILURE, EXIT_INCONCLUSIVE, EXIT_OK};

const MAX_LISTED: usize = 8;

#[derive(Debug, Serialize)]
pub struct Report {
    /// Arguments after the program name; re-running them reproduces the report.
    pub command: Vec<String>,
    #[serde(flatten)]
    pub body: ReportBody,
    pub elapsed_ms: u128,
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReportBody {
    Validate(ValidateView),
    Rigidify(RigidifyView),
    Eval(EvalView),
    Bisim(BisimView),
    CheckRel(RelationView),
    Howe(Box<HoweView>),
    Congruence(CongruenceView),
    Enumerate(EnumerateView),
    Catalog(CatalogView),
}

#[derive(Debug, Serialize)]
pub struct CatalogView {
    pub instances: Vec<CatalogEntry>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        match &self.body {
            ReportBody::Validate(v) if !v.diagnostics.is_empty() => EXIT_FAILURE,
            ReportBody::Rigidify(v) if !v.diagnostics.is_empty() => EXIT_FAILURE,
            ReportBody::Eval(v) if v.fuel_exhausted => EXIT_INCONCLUSIVE,
            ReportBody::Bisim(v) => match v.verdict.verdict {
                VerdictKind::Holds => EXIT_OK,
                VerdictKind::Fails => EXIT_FAILURE,
                VerdictKind::Inconclusive => EXIT_INCONCLUSIVE,
            },
            ReportBody::CheckRel(v) if !v.violations.is_empty() => EXIT_FAILURE,
            ReportBody::CheckRel(v) if !v.inconclusive.is_empty() => EXIT_INCONCLUSIVE,
            // findings are expected under bounded oracles and do not fail the run
            ReportBody::Howe(v) if !v.exact_ok => EXIT_FAILURE,
            ReportBody::Congruence(v) if !v.counterexamples.is_empty() => EXIT_FAILURE,
            ReportBody::Congruence(v) if v.inconclusive > 0 => EXIT_INCONCLUSIVE,
            _ => EXIT_OK,
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        match &self.body {
            ReportBody::Validate(v) => v.render(&mut s),
            ReportBody::Rigidify(v) => v.render(&mut s),
            ReportBody::Eval(v) => v.render(&mut s),
            ReportBody::Bisim(v) => v.render(&mut s),
            ReportBody::CheckRel(v) => v.render(&mut s),
            ReportBody::Howe(v) => v.render(&mut s),
            ReportBody::Congruence(v) => v.render(&mut s),
            ReportBody::Enumerate(v) => v.render(&mut s),
            ReportBody::Catalog(c) => {
                for e in &c.instances {
                    let _ = writeln!(
                        s,
                        "{:<10} {}{}",
                        e.name,
                        e.summary,
                        if e.valid { "" } else { " [invalid]" }
                    );
                }
            }
        }
        let _ = writeln!(s, "({} ms)", self.elapsed_ms);
        s
    }
}

#[derive(Debug, Serialize)]
pub struct ValidateView {
    pub ok: bool,
    pub sorts: usize,
    pub operators: usize,
    pub labels: usize,
    pub rules: usize,
    pub diagnostics: Vec<Diagnostic>,
    /// Rule count per `head label` dispatch key.
    pub dispatch: Vec<(String, String, usize)>,
}

impl ValidateView {
    pub fn new(dsig: &DynamicSignature, rep: &SignatureReport) -> Self {
        ValidateView {
            ok: rep.is_ok(),
            sorts: dsig.binding.sorts.len(),
            operators: dsig.binding.ops().len(),
            labels: dsig.labels.len(),
            rules: rep.rule_count,
            diagnostics: rep.diagnostics.clone(),
            dispatch: rep.table.iter().map(|((h, l), n)| (h.clone(), l.clone(), *n)).collect(),
        }
    }

    fn render(&self, s: &mut String) {
        if self.ok {
            let _ = writeln!(
                s,
                "ok: {} sorts, {} operators, {} labels, {} rules",
                self.sorts, self.operators, self.labels, self.rules
            );
            for (h, l, n) in &self.dispatch {
                let _ = writeln!(s, "  {h} {l}: {n}");
            }
        } else {
            let _ = writeln!(s, "invalid: {} diagnostics", self.diagnostics.len());
            for d in &self.diagnostics {
                let _ = writeln!(s, "  {d}");
            }
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RigidifyView {
    pub output: Option<String>,
    /// The rigid signature, when no output file was given.
    pub signature: Option<String>,
    pub mapping: Vec<RigidifyMapping>,
    pub diagnostics: Vec<Diagnostic>,
    pub rules: usize,
}

impl RigidifyView {
    fn render(&self, s: &mut String) {
        if !self.diagnostics.is_empty() {
            let _ = writeln!(s, "cannot rigidify: {} diagnostics", self.diagnostics.len());
            for d in &self.diagnostics {
                let _ = writeln!(s, "  {d}");
            }
            return;
        }
        for m in &self.mapping {
            let _ = writeln!(s, "{} -> {}", m.original, m.generated.join(", "));
        }
        let _ = writeln!(s, "{} rules", self.rules);
        match (&self.output, &self.signature) {
            (Some(path), _) => {
                let _ = writeln!(s, "written to {path}");
            }
            (None, Some(text)) => s.push_str(text),
            (None, None) => {}
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EvalView {
    pub term: String,
    pub label: String,
    pub fuel: u32,
    pub targets: Vec<String>,
    pub fuel_exhausted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derivations: Option<Vec<DerivationView>>,
}

impl EvalView {
    fn render(&self, s: &mut String) {
        let _ = writeln!(
            s,
            "{} ={}=> {{{}}} at fuel {}{}",
            self.term,
            self.label,
            self.targets.join(", "),
            self.fuel,
            if self.fuel_exhausted {
                " (fuel exhausted)"
            } else {
                " (complete)"
            }
        );
        for d in self.derivations.iter().flatten() {
            render_derivation(d, 1, s);
        }
    }
}

fn render_derivation(d: &DerivationView, depth: usize, s: &mut String) {
    let _ = writeln!(
        s,
        "{}{} ={}=> {}  [{}]",
        "  ".repeat(depth),
        d.source,
        d.label,
        d.target,
        d.rule
    );
    for p in &d.premises {
        render_derivation(p, depth + 1, s);
    }
}

#[derive(Debug, Serialize)]
pub struct PoolView {
    pub size: usize,
    pub values_only: bool,
    pub extra: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct VerdictView {
    pub verdict: VerdictKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Box<WitnessView>>,
}

/// A transition one side could not match, in surface syntax.
#[derive(Debug, Serialize)]
pub struct WitnessView {
    pub left: String,
    pub right: String,
    pub depth: u32,
    pub label: String,
    pub side: Side,
    pub unmatched: String,
    pub matching_exhausted: bool,
    pub candidates: Vec<CandidateView>,
}

#[derive(Debug, Serialize)]
pub struct CandidateView {
    pub target: String,
    pub closing: Vec<String>,
    pub outcome: VerdictView,
}

impl VerdictView {
    pub fn new(dsig: &DynamicSignature, pr: &Printer<'_>, v: &Verdict) -> Self {
        VerdictView {
            verdict: v.kind(),
            witness: v.witness().map(|w| {
                let ctx = &dsig.label(w.label).target_ctx;
                Box::new(WitnessView {
                    left: pr.closed(&w.left),
                    right: pr.closed(&w.right),
                    depth: w.depth,
                    label: dsig.label(w.label).name.clone(),
                    side: w.side,
                    unmatched: pr.term(&w.unmatched, ctx),
                    matching_exhausted: w.matching_exhausted,
                    candidates: w
                        .candidates
                        .iter()
                        .map(|c| CandidateView {
                            target: pr.term(&c.target, ctx),
                            closing: c.closing.iter().map(|e| pr.closed(&e.term)).collect(),
                            outcome: VerdictView::new(dsig, pr, &c.outcome),
                        })
                        .collect(),
                })
            }),
        }
    }

    fn render(&self, indent: usize, s: &mut String) {
        let pad = "  ".repeat(indent);
        let _ = writeln!(s, "{pad}{}", kind_name(self.verdict));
        let Some(w) = &self.witness else {
            return;
        };
        let side = side_name(w.side);
        let _ = writeln!(
            s,
            "{pad}  {} vs {} at depth {}: {side} {} target {} unmatched{}",
            w.left,
            w.right,
            w.depth,
            w.label,
            w.unmatched,
            if w.matching_exhausted {
                " (other side ran out of fuel)"
            } else {
                ""
            }
        );
        for c in &w.candidates {
            let _ = writeln!(s, "{pad}  candidate {} under [{}]:", c.target, c.closing.join(", "));
            c.outcome.render(indent + 2, s);
        }
    }
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Left => "left",
        Side::Right => "right",
    }
}

fn kind_name(k: VerdictKind) -> &'static str {
    match k {
        VerdictKind::Holds => "holds",
        VerdictKind::Fails => "fails",
        VerdictKind::Inconclusive => "inconclusive",
    }
}

#[derive(Debug, Serialize)]
pub struct BisimView {
    pub left: String,
    pub right: String,
    pub depth: u32,
    pub fuel: u32,
    pub pool: PoolView,
    #[serde(flatten)]
    pub verdict: VerdictView,
}

impl BisimView {
    fn render(&self, s: &mut String) {
        let _ = writeln!(
            s,
            "{} ~ {} at depth {}, fuel {}, pool size {}{}",
            self.left,
            self.right,
            self.depth,
            self.fuel,
            self.pool.size,
            if self.pool.values_only { " (values only)" } else { "" }
        );
        self.verdict.render(0, s);
    }
}

#[derive(Debug, Serialize)]
pub struct RelationViolationView {
    pub left: String,
    pub right: String,
    pub label: String,
    pub side: Side,
    pub unmatched: String,
    pub matching_exhausted: bool,
    /// Each candidate target with the closing whose instance leaves the relation.
    pub candidates: Vec<(String, Vec<String>)>,
}

#[derive(Debug, Serialize)]
pub struct RelationView {
    pub pairs: usize,
    pub fuel: u32,
    pub pool: PoolView,
    pub bisimulation: bool,
    pub violations: Vec<RelationViolationView>,
    pub inconclusive: Vec<RelationViolationView>,
}

impl RelationView {
    pub fn new(dsig: &DynamicSignature, rep: &RelationReport, fuel: u32, pool: PoolView) -> Self {
        let pr = Printer::new(dsig);
        let view = |v: &RelationViolation| {
            let ctx = &dsig.label(v.label).target_ctx;
            RelationViolationView {
                left: pr.closed(&v.left),
                right: pr.closed(&v.right),
                label: dsig.label(v.label).name.clone(),
                side: v.side,
                unmatched: pr.term(&v.unmatched, ctx),
                matching_exhausted: v.matching_exhausted,
                candidates: v
                    .candidates
                    .iter()
                    .map(|(t, c)| (pr.term(t, ctx), c.iter().map(|e| pr.closed(&e.term)).collect()))
                    .collect(),
            }
        };
        RelationView {
            pairs: rep.pairs,
            fuel,
            pool,
            bisimulation: rep.is_bisimulation(),
            violations: rep.violations.iter().map(view).collect(),
            inconclusive: rep.inconclusive.iter().map(view).collect(),
        }
    }

    fn render(&self, s: &mut String) {
        let _ = writeln!(
            s,
            "{} pairs: {}",
            self.pairs,
            if self.bisimulation {
                "bisimulation"
            } else if self.violations.is_empty() {
                "inconclusive"
            } else {
                "not a bisimulation"
            }
        );
        for (title, vs) in [("violation", &self.violations), ("inconclusive", &self.inconclusive)] {
            for v in vs {
                let _ = writeln!(
                    s,
                    "  {title}: {} vs {}: {} {} target {} unmatched",
                    v.left,
                    v.right,
                    side_name(v.side),
                    v.label,
                    v.unmatched
                );
                for (t, c) in &v.candidates {
                    let _ = writeln!(s, "    candidate {t} under [{}]", c.join(", "));
                }
            }
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CheckView {
    pub name: &'static str,
    pub checked: usize,
    pub violations: usize,
    /// Offending tuples, each term printed over its context.
    pub examples: Vec<Vec<String>>,
}

impl CheckView {
    fn new(pr: &Printer<'_>, name: &'static str, c: &CheckOutcome) -> Self {
        CheckView {
            name,
            checked: c.checked,
            violations: c.violations,
            examples: c
                .examples
                .iter()
                .map(|v| v.terms.iter().map(|t| pr.term(t, &v.ctx)).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SimulationView {
    pub pairs: usize,
    pub transitions: usize,
    pub matched: usize,
    pub violations: usize,
    pub inconclusive: usize,
    /// `left H right`: the unmatched target of `left`.
    pub examples: Vec<(String, String, String)>,
}

impl SimulationView {
    fn new(dsig: &DynamicSignature, pr: &Printer<'_>, r: &SimulationReport) -> Self {
        SimulationView {
            pairs: r.pairs,
            transitions: r.transitions,
            matched: r.matched,
            violations: r.violations,
            inconclusive: r.inconclusive,
            examples: r
                .violation_examples
                .iter()
                .map(|f| {
                    (
                        pr.closed(&f.left),
                        pr.closed(&f.right),
                        pr.term(&f.unmatched, &dsig.label(f.label).target_ctx),
                    )
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct HeteroView {
    pub seed: u64,
    pub samples: usize,
    pub rejected: usize,
    pub violations: usize,
    pub chain_checked: usize,
    pub chain_violations: usize,
}

#[derive(Debug, Serialize)]
pub struct HoweView {
    pub params: HoweParams,
    pub oracle: String,
    pub universe: Vec<IndexStats>,
    pub universe_terms: usize,
    pub oracle_pairs: usize,
    pub iterations: Vec<usize>,
    pub closure_pairs: usize,
    pub checks: Vec<CheckView>,
    pub transitive_pairs: usize,
    pub closures_agree: bool,
    pub symmetric: bool,
    /// A pair of the transitive closure without its converse.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymmetry: Option<(String, String)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hetero: Option<HeteroView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stratified_simulation: Option<SimulationView>,
    pub exact_ok: bool,
    pub findings: Vec<String>,
}

impl HoweView {
    pub fn new(dsig: &DynamicSignature, r: &HoweSuiteReport) -> Self {
        let pr = Printer::new(dsig);
        HoweView {
            params: r.params.clone(),
            oracle: r.oracle.clone(),
            universe: r.universe.clone(),
            universe_terms: r.universe_terms,
            oracle_pairs: r.oracle_pairs,
            iterations: r.iterations.clone(),
            closure_pairs: r.closure_pairs,
            checks: vec![
                CheckView::new(&pr, "reflexive", &r.reflexive),
                CheckView::new(&pr, "contains-oracle", &r.contains_oracle),
                CheckView::new(&pr, "composition", &r.composition),
                CheckView::new(&pr, "congruence", &r.congruence),
                CheckView::new(&pr, "fixpoint", &r.fixpoint),
            ],
            transitive_pairs: r.transitive_pairs,
            closures_agree: r.closures_agree,
            symmetric: r.asymmetry.is_none(),
            asymmetry: r
                .asymmetry
                .as_ref()
                .map(|a| (pr.term(&a.left, &a.ctx), pr.term(&a.right, &a.ctx))),
            hetero: r.hetero.as_ref().map(|h| HeteroView {
                seed: h.seed,
                samples: h.samples,
                rejected: h.rejected,
                violations: h.violations,
                chain_checked: h.chain_checked,
                chain_violations: h.chain_violations,
            }),
            simulation: r.simulation.as_ref().map(|s| SimulationView::new(dsig, &pr, s)),
            stratified_simulation: r
                .stratified_simulation
                .as_ref()
                .map(|s| SimulationView::new(dsig, &pr, s)),
            exact_ok: r.exact_ok(),
            findings: r.findings(),
        }
    }

    fn render(&self, s: &mut String) {
        let _ = writeln!(s, "oracle: {}", self.oracle);
        let _ = writeln!(
            s,
            "universe: {} terms in {} indices; oracle {} pairs; closure {} pairs after {} rounds",
            self.universe_terms,
            self.universe.len(),
            self.oracle_pairs,
            self.closure_pairs,
            self.iterations.len()
        );
        for c in &self.checks {
            let _ = writeln!(
                s,
                "  {:<16} {} ({} checked, {} violations)",
                c.name,
                if c.violations == 0 { "ok" } else { "FAILED" },
                c.checked,
                c.violations
            );
            for e in c.examples.iter().take(MAX_LISTED) {
                let _ = writeln!(s, "    {}", e.join(" | "));
            }
        }
        let _ = writeln!(
            s,
            "  transitive closure: {} pairs, methods agree: {}, symmetric: {}",
            self.transitive_pairs, self.closures_agree, self.symmetric
        );
        if let Some((a, b)) = &self.asymmetry {
            let _ = writeln!(s, "    {a} relates to {b} but not back");
        }
        if let Some(h) = &self.hetero {
            let _ = writeln!(
                s,
                "  substitution: {} samples ({} rejected), {} violations; chain {} checked, {} violations",
                h.samples, h.rejected, h.violations, h.chain_checked, h.chain_violations
            );
        }
        for (title, sim) in [
            ("simulation", &self.simulation),
            ("stratified", &self.stratified_simulation),
        ] {
            if let Some(sim) = sim {
                let _ = writeln!(
                    s,
                    "  {title}: {} pairs, {} transitions, {} matched, {} violations, {} inconclusive",
                    sim.pairs, sim.transitions, sim.matched, sim.violations, sim.inconclusive
                );
                for (l, r, u) in sim.examples.iter().take(MAX_LISTED) {
                    let _ = writeln!(s, "    {l} H {r}: target {u} unmatched");
                }
            }
        }
        let _ = writeln!(s, "exact properties: {}", if self.exact_ok { "ok" } else { "FAILED" });
        for f in &self.findings {
            let _ = writeln!(s, "finding: {f}");
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CounterexampleView {
    pub left: String,
    pub right: String,
    pub context: String,
    pub plugged: (String, String),
    pub witness: VerdictView,
}

#[derive(Debug, Serialize)]
pub struct CongruenceView {
    pub params: CongruenceParams,
    pub related_pairs: usize,
    pub contexts: usize,
    pub samples: usize,
    pub trivial: usize,
    pub holds: usize,
    pub inconclusive: usize,
    pub counterexamples: Vec<CounterexampleView>,
}

impl CongruenceView {
    pub fn new(dsig: &DynamicSignature, r: &CongruenceReport) -> Self {
        let pr = Printer::new(dsig);
        let closed = dsig.binding.empty_ctx();
        CongruenceView {
            params: r.params.clone(),
            related_pairs: r.related_pairs,
            contexts: r.contexts,
            samples: r.samples,
            trivial: r.trivial,
            holds: r.holds,
            inconclusive: r.inconclusive,
            counterexamples: r
                .counterexamples
                .iter()
                .map(|c| {
                    let hole = MetaVar {
                        name: "hole".into(),
                        params: c.context.hole_ctx.clone(),
                        sort: c.context.hole_sort,
                    };
                    debug_assert_eq!(HOLE.index(), 0);
                    CounterexampleView {
                        left: pr.closed(&c.left),
                        right: pr.closed(&c.right),
                        context: pr.pattern(&c.context.term, &[hole], &closed),
                        plugged: (pr.closed(&c.plugged.0), pr.closed(&c.plugged.1)),
                        witness: VerdictView::new(dsig, &pr, &Verdict::Fails(Box::new(c.witness.clone()))),
                    }
                })
                .collect(),
        }
    }

    fn render(&self, s: &mut String) {
        let _ = writeln!(
            s,
            "{} samples from {} related pairs and {} contexts (seed {}, depth {} then {})",
            self.samples,
            self.related_pairs,
            self.contexts,
            self.params.seed,
            self.params.depth,
            self.params.inner()
        );
        let _ = writeln!(
            s,
            "  holds {} (trivial {}), inconclusive {}, counterexamples {}",
            self.holds,
            self.trivial,
            self.inconclusive,
            self.counterexamples.len()
        );
        for c in &self.counterexamples {
            let _ = writeln!(s, "  {} ~ {} in {}:", c.left, c.right, c.context);
            c.witness.render(2, s);
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EnumerateView {
    pub sort: String,
    pub ctx: String,
    pub size: usize,
    pub count: usize,
    pub terms: Vec<String>,
}

impl EnumerateView {
    fn render(&self, s: &mut String) {
        for t in &self.terms {
            let _ = writeln!(s, "{t}");
        }
        let _ = writeln!(
            s,
            "{} terms of sort {} over {} up to size {}",
            self.count, self.sort, self.ctx, self.size
        );
    }
}
