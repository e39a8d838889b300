//! The `cellsem` command line. [`run`] parses arguments, executes one
//! subcommand and writes a report (JSON with `--json`, text otherwise).
//!
//! Exit status: 0 when everything holds, 1 on a definite failure, 2 when the
//! only failures are inconclusive, 3 on usage, parse or I/O errors.

mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use cellsem::bisim::{check_relation, BisimChecker, BisimError, PoolMode, Relation, SubstPool};
use cellsem::eval::{EvalError, Evaluator};
use cellsem::howe::{congruence_sweep, howe_suite, Checks, CongruenceParams, HoweError, HoweParams, UniverseSpec};
use cellsem::instances::{catalog, instance_source, InstanceError};
use cellsem::rules::{rigidify, validate_signature, DynamicSignature, LabelId, RulesError};
use cellsem::surface::{parse_context, parse_signature, parse_term, ParseError, Printer};
use cellsem::syntax::{enumerate_terms, SortId, SyntaxError, Term};

pub use report::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    /// A located diagnostic in a signature file or a command-line term.
    #[error("{origin}:{}:{}: {}", .error.line, .error.column, .error.message)]
    Parse { origin: String, error: ParseError },
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Rules(#[from] RulesError),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Bisim(#[from] BisimError),
    #[error(transparent)]
    Howe(#[from] HoweError),
    #[error("cannot serialise report: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Parser, Debug)]
#[command(
    name = "cellsem",
    version,
    about = "Evaluate, validate and compare terms of labelled big-step signatures"
)]
struct Cli {
    /// Print the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a signature file and check every rule's format.
    Validate { file: PathBuf },
    /// Compile Howe-format rules into rigid rules.
    Rigidify {
        file: PathBuf,
        /// Where to write the rigid signature; printed when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// List the targets of a closed term under one label.
    Eval {
        file: PathBuf,
        term: String,
        /// Defaults to the first label.
        #[arg(long)]
        label: Option<String>,
        #[arg(long, default_value_t = 8)]
        fuel: u32,
        /// Include one derivation per target.
        #[arg(long)]
        trace: bool,
    },
    /// Decide bounded bisimilarity of two closed terms.
    Bisim {
        file: PathBuf,
        left: String,
        right: String,
        #[command(flatten)]
        sort: SortArg,
        #[arg(long, default_value_t = 3)]
        depth: u32,
        #[command(flatten)]
        pool: PoolArgs,
    },
    /// Check that a finite relation on closed terms is a bisimulation.
    CheckRel {
        file: PathBuf,
        /// One pair per line, `LEFT ~ RIGHT` or `SORT: LEFT ~ RIGHT`.
        relation: PathBuf,
        #[command(flatten)]
        sort: SortArg,
        #[command(flatten)]
        pool: PoolArgs,
    },
    /// Build the Howe closure of bounded bisimilarity and check its properties.
    Howe {
        file: PathBuf,
        /// Largest term size in the universe.
        #[arg(long, default_value_t = 5)]
        size: usize,
        /// Most binding-sort variables in a base context.
        #[arg(long, default_value_t = 2)]
        ctx_bound: u32,
        #[arg(long, default_value_t = 3)]
        depth: u32,
        #[arg(long, default_value_t = 8)]
        fuel: u32,
        #[arg(long, default_value_t = 4)]
        pool_size: usize,
        /// Close with programs as well as values.
        #[arg(long)]
        programs: bool,
        #[arg(long, value_enum, default_value_t = ChecksArg::All)]
        checks: ChecksArg,
        /// Heterogeneous-substitution samples.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample related pairs and one-hole contexts and check the plugged pairs.
    Congruence {
        file: PathBuf,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        depth: u32,
        /// Depth for plugged pairs; defaults to one less than `--depth`.
        #[arg(long)]
        inner_depth: Option<u32>,
        #[arg(long, default_value_t = 8)]
        fuel: u32,
        #[arg(long, default_value_t = 5)]
        pool_size: usize,
        #[arg(long)]
        programs: bool,
        #[arg(long, default_value_t = 5)]
        term_size: usize,
        #[arg(long, default_value_t = 4)]
        context_size: usize,
        /// Worker threads; 0 uses the available parallelism.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// List the terms of a sort over a context, up to a size.
    Enumerate {
        file: PathBuf,
        #[arg(long)]
        sort: String,
        /// `0`, a bare count, or `m v + n p`.
        #[arg(long, default_value = "0")]
        ctx: String,
        #[arg(long, default_value_t = 4)]
        size: usize,
    },
    /// List the built-in signatures.
    Catalog,
}

#[derive(clap::Args, Debug)]
struct SortArg {
    /// Sort of the terms; defaults to the source sort of the first label.
    #[arg(long)]
    sort: Option<String>,
}

#[derive(clap::Args, Debug)]
struct PoolArgs {
    #[arg(long, default_value_t = 8)]
    fuel: u32,
    #[arg(long, default_value_t = 4)]
    pool_size: usize,
    /// Close value variables with values only.
    #[arg(long)]
    values_only: bool,
    /// Extra closed term for the pool (repeatable).
    #[arg(long = "pool-term")]
    pool_terms: Vec<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ChecksArg {
    All,
    Basic,
}

/// Runs one command line (including the program name) and returns the exit
/// status. Reports go to `out`, errors to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = write!(err, "{e}");
            return EXIT_USAGE;
        }
        Err(e) => {
            // --help and --version
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    let echo = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>();
    match execute(&cli, echo) {
        Ok(report) => {
            let text = if cli.json {
                serde_json::to_string_pretty(&report).map(|s| s + "\n")
            } else {
                Ok(report.render())
            };
            match text {
                Ok(t) => {
                    let _ = out.write_all(t.as_bytes());
                    report.exit_code()
                }
                Err(e) => {
                    let _ = writeln!(err, "error: {}", CliError::from(e));
                    EXIT_USAGE
                }
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

/// Reads a signature file. A missing path whose stem names a built-in
/// instance (`cbn`, `cbn.sig`, ...) loads the built-in text instead.
pub fn load_signature(path: &Path) -> Result<DynamicSignature, CliError> {
    let origin = path.display().to_string();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            match instance_source(stem) {
                Ok(src) if path.parent().is_none_or(|p| p.as_os_str().is_empty()) => src.to_string(),
                _ => {
                    return Err(CliError::Io {
                        path: origin,
                        source: e,
                    })
                }
            }
        }
        Err(e) => {
            return Err(CliError::Io {
                path: origin,
                source: e,
            })
        }
    };
    parse_signature(&text).map_err(|error| CliError::Parse { origin, error })
}

fn term_arg(dsig: &DynamicSignature, text: &str, sort: SortId) -> Result<Term, CliError> {
    parse_term(dsig, text, sort).map_err(|error| CliError::Parse {
        origin: format!("term `{text}`"),
        error,
    })
}

fn sort_arg(dsig: &DynamicSignature, sort: &Option<String>) -> Result<SortId, CliError> {
    match sort {
        Some(name) => Ok(dsig.binding.sorts.lookup(name)?),
        None => dsig
            .labels
            .first()
            .map(|l| l.source_sort)
            .ok_or_else(|| CliError::Usage("signature declares no labels; pass --sort".into())),
    }
}

fn label_arg(dsig: &DynamicSignature, label: &Option<String>) -> Result<LabelId, CliError> {
    match label {
        Some(name) => dsig
            .lookup_label(name)
            .ok_or_else(|| CliError::Usage(format!("unknown label `{name}`"))),
        None => dsig
            .label_ids()
            .next()
            .ok_or_else(|| CliError::Usage("signature declares no labels".into())),
    }
}

fn pool_arg(dsig: &DynamicSignature, sort: SortId, p: &PoolArgs) -> Result<SubstPool, CliError> {
    let mode = if p.values_only {
        PoolMode::ValuesOnly
    } else {
        PoolMode::Programs
    };
    let mut pool = SubstPool::new(&dsig.binding, p.pool_size, mode);
    for t in &p.pool_terms {
        pool = pool.with_term(&dsig.binding, term_arg(dsig, t, sort)?, sort)?;
    }
    Ok(pool)
}

fn pool_view(pool: &SubstPool, p: &PoolArgs) -> PoolView {
    PoolView {
        size: pool.max_size(),
        values_only: p.values_only,
        extra: p.pool_terms.clone(),
    }
}

/// Reads `LEFT ~ RIGHT` lines; `#` starts a comment.
fn parse_relation(dsig: &DynamicSignature, path: &Path, default: SortId) -> Result<Relation, CliError> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: origin.clone(),
        source,
    })?;
    let closed = dsig.binding.empty_ctx();
    let mut rel = Relation::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or_default();
        if line.trim().is_empty() {
            continue;
        }
        let located = |column: usize, message: String| CliError::Parse {
            origin: origin.clone(),
            error: ParseError {
                line: n + 1,
                column,
                message,
            },
        };
        let (sort, body, offset) = match line.split_once(':') {
            Some((s, rest)) => {
                let sort = dsig
                    .binding
                    .sorts
                    .lookup(s.trim())
                    .map_err(|e| located(1, e.to_string()))?;
                (sort, rest, s.len() + 1)
            }
            None => (default, line, 0),
        };
        let Some((l, r)) = body.split_once('~') else {
            return Err(located(1, "expected `LEFT ~ RIGHT`".into()));
        };
        let side =
            |text: &str, start: usize| parse_term(dsig, text, sort).map_err(|e| located(start + e.column, e.message));
        let left = side(l, offset)?;
        let right = side(r, offset + l.len() + 1)?;
        rel.insert(sort, &closed, left, right);
    }
    Ok(rel)
}

fn execute(cli: &Cli, command: Vec<String>) -> Result<Report, CliError> {
    let start = Instant::now();
    let body = match &cli.command {
        Command::Validate { file } => {
            let dsig = load_signature(file)?;
            let rep = validate_signature(&dsig)?;
            ReportBody::Validate(ValidateView::new(&dsig, &rep))
        }
        Command::Rigidify { file, output } => {
            let dsig = load_signature(file)?;
            match rigidify(&dsig) {
                Ok(r) => {
                    let text = Printer::new(&r.dsig).signature();
                    let rep = validate_signature(&r.dsig)?;
                    if let Some(path) = output {
                        std::fs::write(path, &text).map_err(|source| CliError::Io {
                            path: path.display().to_string(),
                            source,
                        })?;
                    }
                    ReportBody::Rigidify(RigidifyView {
                        output: output.as_ref().map(|p| p.display().to_string()),
                        signature: output.is_none().then_some(text),
                        mapping: r.mapping,
                        diagnostics: rep.diagnostics,
                        rules: rep.rule_count,
                    })
                }
                Err(RulesError::Invalid(diagnostics)) => ReportBody::Rigidify(RigidifyView {
                    output: None,
                    signature: None,
                    mapping: Vec::new(),
                    diagnostics,
                    rules: 0,
                }),
                Err(e) => return Err(e.into()),
            }
        }
        Command::Eval {
            file,
            term,
            label,
            fuel,
            trace,
        } => {
            let dsig = load_signature(file)?;
            let l = label_arg(&dsig, label)?;
            let lab = dsig.label(l);
            if !lab.source_ctx.is_closed() {
                return Err(CliError::Usage(format!("label `{}` has an open source", lab.name)));
            }
            let t = term_arg(&dsig, term, lab.source_sort)?;
            let mut ev = Evaluator::new(&dsig)?;
            let set = ev.transitions(&t, l, *fuel)?;
            let pr = Printer::new(&dsig);
            let derivations = if *trace {
                Some(
                    ev.derivation_trace(&t, l, *fuel)?
                        .iter()
                        .map(|d| d.view(&dsig))
                        .collect(),
                )
            } else {
                None
            };
            ReportBody::Eval(EvalView {
                term: pr.closed(&t),
                label: lab.name.clone(),
                fuel: *fuel,
                targets: set.targets.iter().map(|u| pr.term(u, &lab.target_ctx)).collect(),
                fuel_exhausted: set.fuel_exhausted,
                derivations,
            })
        }
        Command::Bisim {
            file,
            left,
            right,
            sort,
            depth,
            pool,
        } => {
            let dsig = load_signature(file)?;
            let s = sort_arg(&dsig, &sort.sort)?;
            let (t1, t2) = (term_arg(&dsig, left, s)?, term_arg(&dsig, right, s)?);
            let sp = pool_arg(&dsig, s, pool)?;
            let view = pool_view(&sp, pool);
            let mut checker = BisimChecker::new(&dsig, sp, pool.fuel)?;
            let verdict = checker.bisim(&t1, &t2, *depth)?;
            let pr = Printer::new(&dsig);
            ReportBody::Bisim(BisimView {
                left: pr.closed(&t1),
                right: pr.closed(&t2),
                depth: *depth,
                fuel: pool.fuel,
                pool: view,
                verdict: VerdictView::new(&dsig, &pr, &verdict),
            })
        }
        Command::CheckRel {
            file,
            relation,
            sort,
            pool,
        } => {
            let dsig = load_signature(file)?;
            let s = sort_arg(&dsig, &sort.sort)?;
            let rel = parse_relation(&dsig, relation, s)?;
            let sp = pool_arg(&dsig, s, pool)?;
            let view = pool_view(&sp, pool);
            let mut checker = BisimChecker::new(&dsig, sp, pool.fuel)?;
            let rep = check_relation(&mut checker, &rel)?;
            ReportBody::CheckRel(RelationView::new(&dsig, &rep, pool.fuel, view))
        }
        Command::Howe {
            file,
            size,
            ctx_bound,
            depth,
            fuel,
            pool_size,
            programs,
            checks,
            samples,
            seed,
        } => {
            let dsig = load_signature(file)?;
            let params = HoweParams {
                universe: UniverseSpec {
                    size: *size,
                    ctx_bound: *ctx_bound,
                },
                depth: *depth,
                fuel: *fuel,
                pool_size: *pool_size,
                values_only: !programs,
                samples: *samples,
                seed: *seed,
                checks: match checks {
                    ChecksArg::All => Checks::All,
                    ChecksArg::Basic => Checks::Basic,
                },
            };
            let rep = howe_suite(&dsig, &params)?;
            ReportBody::Howe(Box::new(HoweView::new(&dsig, &rep)))
        }
        Command::Congruence {
            file,
            samples,
            seed,
            depth,
            inner_depth,
            fuel,
            pool_size,
            programs,
            term_size,
            context_size,
            threads,
        } => {
            let dsig = load_signature(file)?;
            let params = CongruenceParams {
                depth: *depth,
                inner_depth: *inner_depth,
                fuel: *fuel,
                pool_size: *pool_size,
                values_only: !programs,
                samples: *samples,
                seed: *seed,
                term_size: *term_size,
                context_size: *context_size,
                threads: *threads,
            };
            let rep = congruence_sweep(&dsig, &params)?;
            ReportBody::Congruence(CongruenceView::new(&dsig, &rep))
        }
        Command::Enumerate { file, sort, ctx, size } => {
            let dsig = load_signature(file)?;
            let s = dsig.binding.sorts.lookup(sort)?;
            let c = parse_context(&dsig.binding.sorts, ctx).map_err(|error| CliError::Parse {
                origin: format!("context `{ctx}`"),
                error,
            })?;
            let pr = Printer::new(&dsig);
            let terms: Vec<String> = enumerate_terms(&dsig.binding, s, &c, *size)
                .iter()
                .map(|t| pr.term(t, &c))
                .collect();
            ReportBody::Enumerate(EnumerateView {
                sort: sort.clone(),
                ctx: c.render(&dsig.binding.sorts),
                size: *size,
                count: terms.len(),
                terms,
            })
        }
        Command::Catalog => ReportBody::Catalog(CatalogView { instances: catalog()? }),
    };
    Ok(Report {
        command,
        body,
        elapsed_ms: start.elapsed().as_millis(),
    })
}
