//! Self-adaptation framework for robot navigation: a MAPE-K metacontroller
//! over an architectural knowledge base, with a model DSL, a diagnostics
//! bus, a deterministic 2-D navigation simulator, and an experiment
//! harness for paired adaptive-vs-static runs.

pub mod case_study;
pub mod csv;
pub mod diagnostics;
pub mod executor;
pub mod harness;
pub mod kb;
pub mod model;
pub mod navsim;
pub mod reasoner;

pub use diagnostics::{Bus, DiagnosticLevel, DiagnosticStatus, Observer};
pub use executor::{execute, ManagedSystem, ReconfigurationOutcome, ReconfigurationReport};
pub use harness::{compare, run_mission, MissionArtifacts, MissionMetrics, Mode};
pub use kb::{
    Function, FunctionDesign, FunctionGrounding, KnowledgeBase, Objective, ObjectiveStatus,
    Polarity, QualityAttributeType,
};
pub use model::{
    load_model, load_model_source, parse_metacontrol_config, parse_model, serialize_model,
    MetacontrolConfig, ModelDocument, ParseError,
};
pub use navsim::{MissionSpec, MissionStatus, NavParams, NavSim};
pub use reasoner::{mape_step, plan, AdaptationReason, AdaptationRequest, ReasonerConfig};
