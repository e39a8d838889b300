//! Built-in signatures, shipped as signature files in `corpus/`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rules::{validate_signature, DynamicSignature, RulesError};
use crate::surface::{parse_signature, ParseError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("unknown instance `{0}` (known: cbn, cbv, nondet, cbn-howe)")]
    Unknown(String),
    #[error("instance `{name}`: {source}")]
    Parse { name: String, source: ParseError },
    #[error("instance `{name}`: {source}")]
    Rules { name: String, source: RulesError },
}

/// Defaults used by bisimulation checks on an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolDefaults {
    pub size: usize,
    /// Value variables are only ever replaced by values.
    pub values_only: bool,
}

struct Entry {
    name: &'static str,
    summary: &'static str,
    source: &'static str,
    pool: PoolDefaults,
}

const DEFAULT_POOL: PoolDefaults = PoolDefaults {
    size: 5,
    values_only: true,
};

const ENTRIES: [Entry; 4] = [
    Entry {
        name: "cbn",
        summary: "call-by-name lambda calculus",
        source: include_str!("../../corpus/cbn.sig"),
        pool: DEFAULT_POOL,
    },
    Entry {
        name: "cbv",
        summary: "call-by-value lambda calculus with value substitution",
        source: include_str!("../../corpus/cbv.sig"),
        pool: DEFAULT_POOL,
    },
    Entry {
        name: "nondet",
        summary: "call-by-name lambda calculus with erratic choice",
        source: include_str!("../../corpus/nondet.sig"),
        pool: DEFAULT_POOL,
    },
    Entry {
        name: "cbn-howe",
        summary: "call-by-name lambda calculus in Howe's value/program format",
        source: include_str!("../../corpus/cbn-howe.sig"),
        pool: DEFAULT_POOL,
    },
];

/// The text of a built-in signature.
pub fn instance_source(name: &str) -> Result<&'static str, InstanceError> {
    ENTRIES
        .iter()
        .find(|e| e.name == name)
        .map(|e| e.source)
        .ok_or_else(|| InstanceError::Unknown(name.to_string()))
}

pub fn instance_pool(name: &str) -> Result<PoolDefaults, InstanceError> {
    ENTRIES
        .iter()
        .find(|e| e.name == name)
        .map(|e| e.pool)
        .ok_or_else(|| InstanceError::Unknown(name.to_string()))
}

pub fn load_instance(name: &str) -> Result<DynamicSignature, InstanceError> {
    let src = instance_source(name)?;
    parse_signature(src).map_err(|source| InstanceError::Parse {
        name: name.to_string(),
        source,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub summary: String,
    pub operators: usize,
    pub labels: usize,
    /// Rules after schematic expansion (and canonical rules for Howe format).
    pub rules: usize,
    pub valid: bool,
    pub pool: PoolDefaults,
}

pub fn catalog() -> Result<Vec<CatalogEntry>, InstanceError> {
    ENTRIES
        .iter()
        .map(|e| {
            let dsig = load_instance(e.name)?;
            let rep = validate_signature(&dsig).map_err(|source| InstanceError::Rules {
                name: e.name.to_string(),
                source,
            })?;
            Ok(CatalogEntry {
                name: e.name.to_string(),
                summary: format!(
                    "{} ({} operators, {} rules)",
                    e.summary,
                    dsig.binding.ops().len(),
                    rep.rule_count
                ),
                operators: dsig.binding.ops().len(),
                labels: dsig.labels.len(),
                rules: rep.rule_count,
                valid: rep.is_ok(),
                pool: e.pool,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::Printer;

    #[test]
    fn four_valid_entries() {
        let cat = catalog().unwrap();
        let names: Vec<&str> = cat.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, vec!["cbn", "cbv", "nondet", "cbn-howe"]);
        assert!(cat.iter().all(|c| c.valid));
        assert!(cat[0].summary.contains("2 operators, 2 rules"));
    }

    #[test]
    fn corpus_files_are_printer_fixpoints() {
        for name in ["cbn", "cbv", "nondet", "cbn-howe"] {
            let dsig = load_instance(name).unwrap();
            assert_eq!(
                Printer::new(&dsig).signature(),
                instance_source(name).unwrap(),
                "{name}"
            );
        }
    }

    #[test]
    fn nondet_counts() {
        let dsig = load_instance("nondet").unwrap();
        let rep = validate_signature(&dsig).unwrap();
        assert!(rep.is_ok());
        // six rigid rules plus three schematic rules over three constructors
        assert_eq!(rep.rule_count, 6 + 3 * 3);
    }

    #[test]
    fn cbv_beta_has_three_premises() {
        let dsig = load_instance("cbv").unwrap();
        let beta = dsig.rules.iter().find(|r| r.name == "beta").unwrap();
        assert_eq!(beta.premises.len(), 3);
    }

    #[test]
    fn unknown_instance() {
        assert!(matches!(load_instance("pcf"), Err(InstanceError::Unknown(_))));
    }
}
