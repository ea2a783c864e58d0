//! The two human-authored file formats: the knowledge model (QA types,
//! functions, designs, objectives) and the metacontrol configuration
//! (parameter sets, component kill/restart lists).
//!
//! Parsing is split in two phases. `parse_model` / `parse_metacontrol_config`
//! are purely syntactic and total: any input either yields a document or a
//! `ParseError` located on the offending line. Reference resolution and the
//! remaining semantic checks happen when loading into the knowledge base
//! (`load_model`), where errors point at the declaration that failed.

mod lexer;
mod parser;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::kb::{
    Function, FunctionDesign, KbEntity, KnowledgeBase, Objective, ObjectiveStatus, Polarity,
    QualityAttributeType,
};

pub use parser::{parse_metacontrol_config, parse_model};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{col}: {message} (expected {expected})")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub expected: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, message: String, expected: impl Into<String>) -> Self {
        Self { line, col, message, expected: expected.into() }
    }
}

/// NFR comparator as written in an objective declaration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Ge,
    Le,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    QaType {
        id: String,
        polarity: Polarity,
    },
    Function {
        id: String,
    },
    Design {
        id: String,
        solves: String,
        qas: Vec<(String, f64)>,
        config_ref: String,
    },
    Objective {
        id: String,
        of_function: String,
        nfrs: Vec<(String, Cmp, f64)>,
    },
}

/// A declaration plus the source line it started on. Equality ignores the
/// position so round-tripped documents compare structurally.
#[derive(Debug, Clone)]
pub struct Declaration {
    pub decl: Decl,
    pub line: usize,
}

impl PartialEq for Declaration {
    fn eq(&self, other: &Self) -> bool {
        self.decl == other.decl
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelDocument {
    pub declarations: Vec<Declaration>,
}

/// How to realize one function design on the managed system.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationSpec {
    pub fd_id: String,
    pub params: BTreeMap<String, f64>,
    pub restart_components: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetacontrolConfig {
    pub configurations: BTreeMap<String, ConfigurationSpec>,
    pub kill_components: Vec<String>,
    pub save_goal: bool,
    pub reconfig_latency_s: f64,
}

impl Default for MetacontrolConfig {
    fn default() -> Self {
        Self {
            configurations: BTreeMap::new(),
            kill_components: Vec::new(),
            save_goal: true,
            reconfig_latency_s: 1.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ValidationError {
    #[error("no configuration mapped for function design `{0}`")]
    MissingMapping(String),
    #[error("kill_components is empty but configuration `{0}` restarts components")]
    EmptyKillList(String),
}

fn fmt_number(v: f64) -> String {
    // `{}` on f64 is the shortest decimal that parses back to the same
    // value, which is what keeps serialize/parse a fixpoint.
    format!("{v}")
}

/// Canonical text form: one declaration per block, two-space indentation,
/// fields in grammar order.
pub fn serialize_model(doc: &ModelDocument) -> String {
    let mut out = String::new();
    for d in &doc.declarations {
        match &d.decl {
            Decl::QaType { id, polarity } => {
                let p = match polarity {
                    Polarity::HigherIsBetter => "higher_is_better",
                    Polarity::LowerIsBetter => "lower_is_better",
                };
                out.push_str(&format!("qa_type {id} {p}\n"));
            }
            Decl::Function { id } => {
                out.push_str(&format!("function {id}\n"));
            }
            Decl::Design { id, solves, qas, config_ref } => {
                out.push_str(&format!("design {id} solves {solves} {{\n"));
                for (type_id, value) in qas {
                    out.push_str(&format!("  qa {type_id} = {}\n", fmt_number(*value)));
                }
                out.push_str(&format!("  config \"{config_ref}\"\n"));
                out.push_str("}\n");
            }
            Decl::Objective { id, of_function, nfrs } => {
                out.push_str(&format!("objective {id} of {of_function} {{\n"));
                for (type_id, cmp, threshold) in nfrs {
                    let c = match cmp {
                        Cmp::Ge => ">=",
                        Cmp::Le => "<=",
                    };
                    out.push_str(&format!(
                        "  require {type_id} {c} {}\n",
                        fmt_number(*threshold)
                    ));
                }
                out.push_str("}\n");
            }
        }
    }
    out
}

pub fn serialize_metacontrol_config(cfg: &MetacontrolConfig) -> String {
    let mut out = String::new();
    for (fd_id, spec) in &cfg.configurations {
        out.push_str(&format!("configuration {fd_id} {{\n"));
        for (name, value) in &spec.params {
            out.push_str(&format!("  param {name} = {}\n", fmt_number(*value)));
        }
        if !spec.restart_components.is_empty() {
            let list: Vec<String> =
                spec.restart_components.iter().map(|c| format!("\"{c}\"")).collect();
            out.push_str(&format!("  restart {}\n", list.join(", ")));
        }
        out.push_str("}\n");
    }
    if !cfg.kill_components.is_empty() {
        let list: Vec<String> = cfg.kill_components.iter().map(|c| format!("\"{c}\"")).collect();
        out.push_str(&format!("kill_components {}\n", list.join(", ")));
    }
    out.push_str(&format!("save_goal {}\n", cfg.save_goal));
    out.push_str(&format!("reconfig_latency_s {}\n", fmt_number(cfg.reconfig_latency_s)));
    out
}

/// Loads a parsed document into the KB in declaration order. Forward
/// references are impossible by construction: a declaration may only name
/// things already inserted. Errors point at the offending declaration.
pub fn load_model(doc: &ModelDocument, kb: &mut KnowledgeBase) -> Result<(), ParseError> {
    for d in &doc.declarations {
        let located = |msg: String| ParseError::new(d.line, 1, msg, "resolvable declaration");
        match &d.decl {
            Decl::QaType { id, polarity } => {
                kb.insert(KbEntity::QaType(QualityAttributeType {
                    id: id.clone(),
                    polarity: *polarity,
                    description: String::new(),
                }))
                .map_err(|e| located(e.to_string()))?;
            }
            Decl::Function { id } => {
                kb.insert(KbEntity::Function(Function {
                    id: id.clone(),
                    description: String::new(),
                }))
                .map_err(|e| located(e.to_string()))?;
            }
            Decl::Design { id, solves, qas, config_ref } => {
                let mut expected = BTreeMap::new();
                for (type_id, value) in qas {
                    if expected.insert(type_id.clone(), *value).is_some() {
                        return Err(located(format!(
                            "design `{id}` declares QA `{type_id}` twice"
                        )));
                    }
                }
                kb.insert(KbEntity::FunctionDesign(FunctionDesign {
                    id: id.clone(),
                    solves: solves.clone(),
                    expected_qas: expected,
                    config_ref: config_ref.clone(),
                    blacklisted: false,
                }))
                .map_err(|e| located(e.to_string()))?;
            }
            Decl::Objective { id, of_function, nfrs } => {
                let mut map = BTreeMap::new();
                for (type_id, cmp, threshold) in nfrs {
                    let Some(qt) = kb.qa_type(type_id) else {
                        return Err(located(format!("dangling reference `{type_id}`")));
                    };
                    let consistent = matches!(
                        (qt.polarity, cmp),
                        (Polarity::HigherIsBetter, Cmp::Ge) | (Polarity::LowerIsBetter, Cmp::Le)
                    );
                    if !consistent {
                        return Err(located(format!(
                            "comparator for `{type_id}` contradicts its polarity"
                        )));
                    }
                    if map.insert(type_id.clone(), *threshold).is_some() {
                        return Err(located(format!(
                            "objective `{id}` requires QA `{type_id}` twice"
                        )));
                    }
                }
                kb.insert(KbEntity::Objective(Objective {
                    id: id.clone(),
                    of_function: of_function.clone(),
                    nfrs: map,
                    status: ObjectiveStatus::Ungrounded,
                }))
                .map_err(|e| located(e.to_string()))?;
            }
        }
    }
    Ok(())
}

/// Parse and load in one go; the usual entry point for file inputs.
pub fn load_model_source(source: &str, kb: &mut KnowledgeBase) -> Result<ModelDocument, ParseError> {
    let doc = parse_model(source)?;
    load_model(&doc, kb)?;
    Ok(doc)
}

/// Cross-checks a loaded KB against a metacontrol configuration: every
/// design's config_ref must map to a configuration, and the kill list must
/// be populated if anything is ever restarted.
pub fn validate_config(kb: &KnowledgeBase, cfg: &MetacontrolConfig) -> Result<(), ValidationError> {
    for fd in kb.designs() {
        if !cfg.configurations.contains_key(&fd.config_ref) {
            return Err(ValidationError::MissingMapping(fd.id.clone()));
        }
    }
    if cfg.kill_components.is_empty() {
        if let Some(spec) = cfg
            .configurations
            .values()
            .find(|s| !s.restart_components.is_empty())
        {
            return Err(ValidationError::EmptyKillList(spec.fd_id.clone()));
        }
    }
    Ok(())
}
