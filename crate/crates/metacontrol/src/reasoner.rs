//! Analyze and Plan: forward-chaining rules over the knowledge base decide
//! when the managed system is in error, and a utility argmax over the
//! feasible designs decides what to switch to.
//!
//! Rule priority: a component failure (R2) beats an NFR violation (R1) —
//! measurements from a crashed component are meaningless — and R2 also
//! blacklists the design that crashed so planning never returns to it.

use thiserror::Error;

use crate::diagnostics::{DiagnosticLevel, DiagnosticStatus};
use crate::kb::{ComponentHealth, KnowledgeBase, ObjectiveStatus, Polarity};

/// Key under which component fault diagnostics carry the component name.
pub const COMPONENT_KEY: &str = "component";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaptationReason {
    NfrViolation,
    ComponentError,
    InitialGrounding,
}

impl std::fmt::Display for AdaptationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AdaptationReason::NfrViolation => "NFR_VIOLATION",
            AdaptationReason::ComponentError => "COMPONENT_ERROR",
            AdaptationReason::InitialGrounding => "INITIAL_GROUNDING",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationRequest {
    pub objective_id: String,
    pub from_fd: Option<String>,
    pub to_fd: String,
    pub reason: AdaptationReason,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReasonerConfig {
    /// Measurements older than this are ignored by the rules.
    pub staleness_s: f64,
}

impl Default for ReasonerConfig {
    fn default() -> Self {
        Self { staleness_s: 2.0 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("no feasible design for objective `{0}`")]
    NoFeasibleDesign(String),
    #[error("unknown objective `{0}`")]
    UnknownObjective(String),
    #[error("objective `{0}` is healthy; nothing to plan")]
    ObjectiveHealthy(String),
}

/// Recomputes the status of every objective and returns the ones that
/// changed. Designs whose grounding shows a component ERROR get
/// blacklisted as a side effect.
pub fn analyze(
    kb: &mut KnowledgeBase,
    now: f64,
    cfg: &ReasonerConfig,
) -> Vec<(String, ObjectiveStatus)> {
    let mut changes = Vec::new();
    let ids: Vec<String> = kb.objectives().map(|o| o.id.clone()).collect();
    for id in ids {
        let old = kb.objective(&id).expect("listed above").status;
        if old == ObjectiveStatus::Ungrounded {
            continue;
        }
        let Some(grounding) = kb.grounding(&id) else {
            continue;
        };
        let fd_id = grounding.fd_id.clone();

        // R2: any component in ERROR.
        let component_error = grounding
            .component_status
            .values()
            .any(|s| *s == ComponentHealth::Error);

        let new = if component_error {
            ObjectiveStatus::InErrorComponent
        } else if nfr_violated(kb, &id, now, cfg) {
            ObjectiveStatus::InErrorNfr
        } else {
            ObjectiveStatus::Ok
        };

        if new == ObjectiveStatus::InErrorComponent {
            kb.blacklist(&fd_id).expect("grounded design exists");
        }
        if new != old {
            kb.set_objective_status(&id, new).expect("listed above");
            changes.push((id, new));
        }
    }
    changes
}

/// R1: does any NFR have a fresh measurement on the wrong side of its
/// threshold?
fn nfr_violated(kb: &KnowledgeBase, objective_id: &str, now: f64, cfg: &ReasonerConfig) -> bool {
    let obj = kb.objective(objective_id).expect("caller checked");
    let grounding = kb.grounding(objective_id).expect("caller checked");
    for (type_id, threshold) in &obj.nfrs {
        let Some((value, t)) = grounding.measured_qas.get(type_id) else {
            continue;
        };
        if now - t > cfg.staleness_s {
            continue; // stale, ignore
        }
        let polarity = kb.qa_type(type_id).expect("kb integrity").polarity;
        let violated = match polarity {
            Polarity::HigherIsBetter => *value < *threshold,
            Polarity::LowerIsBetter => *value > *threshold,
        };
        if violated {
            return true;
        }
    }
    false
}

/// Sum of polarity-aware margins of a design against an objective's
/// thresholds; larger means more robust against the next violation.
pub fn utility(kb: &KnowledgeBase, objective_id: &str, fd_id: &str) -> f64 {
    let obj = kb.objective(objective_id).expect("caller checked");
    let fd = kb.design(fd_id).expect("caller checked");
    let mut u = 0.0;
    for (type_id, threshold) in &obj.nfrs {
        let expected = fd.expected_qas.get(type_id).copied().unwrap_or(*threshold);
        u += match kb.qa_type(type_id).expect("kb integrity").polarity {
            Polarity::HigherIsBetter => expected - threshold,
            Polarity::LowerIsBetter => threshold - expected,
        };
    }
    u
}

/// Selects the replacement design for an objective in error (or the first
/// design for an ungrounded one): utility argmax over the feasible set,
/// exluding the currently grounded design on violations, ties broken by id.
pub fn plan(
    kb: &KnowledgeBase,
    objective_id: &str,
) -> Result<(AdaptationRequest, f64), PlanError> {
    let obj = kb
        .objective(objective_id)
        .ok_or_else(|| PlanError::UnknownObjective(objective_id.to_string()))?;
    let reason = match obj.status {
        ObjectiveStatus::InErrorNfr => AdaptationReason::NfrViolation,
        ObjectiveStatus::InErrorComponent => AdaptationReason::ComponentError,
        ObjectiveStatus::Ungrounded => AdaptationReason::InitialGrounding,
        ObjectiveStatus::Ok => return Err(PlanError::ObjectiveHealthy(objective_id.to_string())),
    };
    let from_fd = kb.grounding(objective_id).map(|g| g.fd_id.clone());
    let candidates = kb
        .feasible_designs(objective_id)
        .map_err(|_| PlanError::UnknownObjective(objective_id.to_string()))?;

    let mut best: Option<(String, f64)> = None;
    for fd_id in candidates {
        if reason != AdaptationReason::InitialGrounding && Some(&fd_id) == from_fd.as_ref() {
            continue;
        }
        let u = utility(kb, objective_id, &fd_id);
        // Candidates arrive sorted by id, so strict improvement keeps the
        // smallest id on ties.
        let better = match &best {
            None => true,
            Some((_, bu)) => u > *bu,
        };
        if better {
            best = Some((fd_id, u));
        }
    }
    let (to_fd, u) =
        best.ok_or_else(|| PlanError::NoFeasibleDesign(objective_id.to_string()))?;
    Ok((
        AdaptationRequest {
            objective_id: objective_id.to_string(),
            from_fd,
            to_fd,
            reason,
        },
        u,
    ))
}

/// Result of one Monitor→Analyze→Plan pass.
#[derive(Debug, Default, PartialEq)]
pub struct MapeOutcome {
    pub request: Option<(AdaptationRequest, f64)>,
    /// Objectives that needed adaptation but had no feasible design.
    pub no_feasible: Vec<String>,
    pub status_changes: Vec<(String, ObjectiveStatus)>,
}

/// Ingests a batch of timestamped diagnostics into the KB, re-runs the
/// analysis rules, and plans for the highest-priority objective in error.
/// At most one request per step.
pub fn mape_step(
    kb: &mut KnowledgeBase,
    batch: &[(DiagnosticStatus, f64)],
    now: f64,
    cfg: &ReasonerConfig,
) -> MapeOutcome {
    ingest(kb, batch);
    let status_changes = analyze(kb, now, cfg);

    let mut in_error: Vec<(u8, String)> = kb
        .objectives()
        .filter_map(|o| match o.status {
            ObjectiveStatus::InErrorComponent => Some((0, o.id.clone())),
            ObjectiveStatus::InErrorNfr => Some((1, o.id.clone())),
            ObjectiveStatus::Ungrounded => Some((2, o.id.clone())),
            ObjectiveStatus::Ok => None,
        })
        .collect();
    in_error.sort();

    let mut outcome = MapeOutcome { status_changes, ..Default::default() };
    if let Some((_, objective_id)) = in_error.into_iter().next() {
        match plan(kb, &objective_id) {
            Ok(req) => outcome.request = Some(req),
            Err(PlanError::NoFeasibleDesign(id)) => outcome.no_feasible.push(id),
            Err(_) => {}
        }
    }
    outcome
}

fn ingest(kb: &mut KnowledgeBase, batch: &[(DiagnosticStatus, f64)]) {
    let objective_ids: Vec<String> = kb
        .objectives()
        .filter(|o| o.status != ObjectiveStatus::Ungrounded)
        .map(|o| o.id.clone())
        .collect();
    for (status, t) in batch {
        for (key, value) in &status.values {
            if key == COMPONENT_KEY {
                if status.level == DiagnosticLevel::Error {
                    for obj in &objective_ids {
                        let _ = kb.set_component_status(obj, value, ComponentHealth::Error);
                    }
                }
                continue;
            }
            if kb.qa_type(key).is_none() {
                continue;
            }
            let Ok(v) = value.parse::<f64>() else {
                continue;
            };
            for obj in &objective_ids {
                let _ = kb.update_measurement(obj, key, v, *t);
            }
        }
    }
}

/// One line per emitted request, the analyze/plan audit trail.
pub fn decision_log_line(t: f64, req: &AdaptationRequest, utility: f64) -> String {
    format!(
        "t={t} objective={} reason={} from={} to={} utility={utility}",
        req.objective_id,
        req.reason,
        req.from_fd.as_deref().unwrap_or("none"),
        req.to_fd
    )
}
