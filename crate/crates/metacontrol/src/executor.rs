//! Execute: apply an adaptation request to the managed system — stop the
//! listed components, let the reconfiguration latency elapse (the robot
//! brakes and holds), swap parameters, restart components, re-issue the
//! saved goal, and reground the objective in the KB.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::kb::KnowledgeBase;
use crate::model::MetacontrolConfig;
use crate::reasoner::AdaptationRequest;

/// The executor's view of the managed system. `hold` advances mission time
/// with the drive components down; whoever owns the simulation drives its
/// observers and trace output through it.
pub trait ManagedSystem {
    fn now(&self) -> f64;
    fn active_goal(&self) -> Option<(f64, f64)>;
    fn set_goal(&mut self, goal: (f64, f64));
    fn stop_component(&mut self, component: &str) -> Result<(), String>;
    fn restart_component(&mut self, component: &str) -> Result<(), String>;
    fn params(&self) -> BTreeMap<String, f64>;
    fn apply_params(&mut self, params: &BTreeMap<String, f64>) -> Result<(), String>;
    fn hold(&mut self, duration_s: f64);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconfigurationOutcome {
    Applied,
    SkippedSameFd,
    Failed,
}

impl std::fmt::Display for ReconfigurationOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReconfigurationOutcome::Applied => "APPLIED",
            ReconfigurationOutcome::SkippedSameFd => "SKIPPED_SAME_FD",
            ReconfigurationOutcome::Failed => "FAILED",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconfigurationReport {
    pub request: AdaptationRequest,
    pub started_at: f64,
    pub completed_at: f64,
    pub outcome: ReconfigurationOutcome,
    pub goal_reissued: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum ExecError {
    #[error("no configuration mapped for `{0}`")]
    MissingMapping(String),
}

/// Applies `request`. A failure while stopping, applying, or restarting
/// yields outcome FAILED with the previous parameterization restored and
/// the target design blacklisted.
pub fn execute(
    request: &AdaptationRequest,
    config: &MetacontrolConfig,
    system: &mut dyn ManagedSystem,
    kb: &mut KnowledgeBase,
) -> Result<ReconfigurationReport, ExecError> {
    let started_at = system.now();
    // The design names its configuration via config_ref (normally its own
    // id); fall back to the fd id for requests about designs the KB does
    // not know.
    let config_key = kb
        .design(&request.to_fd)
        .map(|d| d.config_ref.clone())
        .unwrap_or_else(|| request.to_fd.clone());
    let spec = config
        .configurations
        .get(&config_key)
        .ok_or_else(|| ExecError::MissingMapping(request.to_fd.clone()))?;

    let current = kb.grounding(&request.objective_id).map(|g| g.fd_id.clone());
    if current.as_deref() == Some(request.to_fd.as_str()) {
        return Ok(ReconfigurationReport {
            request: request.clone(),
            started_at,
            completed_at: started_at,
            outcome: ReconfigurationOutcome::SkippedSameFd,
            goal_reissued: false,
        });
    }

    let saved_goal = if config.save_goal { system.active_goal() } else { None };
    let previous_params = system.params();

    let fail = |system: &mut dyn ManagedSystem, kb: &mut KnowledgeBase| {
        system
            .apply_params(&previous_params)
            .expect("previous parameterization must re-apply");
        for component in &config.kill_components {
            let _ = system.restart_component(component);
        }
        if let Some(goal) = saved_goal {
            system.set_goal(goal);
        }
        let _ = kb.blacklist(&request.to_fd);
    };

    for component in &config.kill_components {
        if system.stop_component(component).is_err() {
            fail(system, kb);
            return Ok(failed_report(request, started_at, system.now()));
        }
    }

    // The latency window: drive components are down, the robot brakes at
    // its current limits and holds.
    system.hold(config.reconfig_latency_s);

    if system.apply_params(&spec.params).is_err() {
        fail(system, kb);
        return Ok(failed_report(request, started_at, system.now()));
    }
    for component in &spec.restart_components {
        if system.restart_component(component).is_err() {
            fail(system, kb);
            return Ok(failed_report(request, started_at, system.now()));
        }
    }

    let mut goal_reissued = false;
    if let Some(goal) = saved_goal {
        system.set_goal(goal);
        goal_reissued = true;
    }

    // Fresh grounding: status OK pending new measurements, stale
    // pre-adaptation data cannot re-trigger.
    kb.ground(&request.objective_id, &request.to_fd)
        .expect("planned design exists and solves the objective");

    Ok(ReconfigurationReport {
        request: request.clone(),
        started_at,
        completed_at: system.now(),
        outcome: ReconfigurationOutcome::Applied,
        goal_reissued,
    })
}

fn failed_report(request: &AdaptationRequest, started_at: f64, now: f64) -> ReconfigurationReport {
    ReconfigurationReport {
        request: request.clone(),
        started_at,
        completed_at: now,
        outcome: ReconfigurationOutcome::Failed,
        goal_reissued: false,
    }
}

/// One line per reconfiguration event.
pub fn reconfig_log_line(report: &ReconfigurationReport) -> String {
    format!(
        "t={} fd={} outcome={} latency={} goal_reissued={}",
        report.started_at,
        report.request.to_fd,
        report.outcome,
        report.completed_at - report.started_at,
        report.goal_reissued
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::*;
    use crate::model::{ConfigurationSpec, MetacontrolConfig};
    use crate::reasoner::AdaptationReason;

    /// Scripted managed system for exercising the executor contract.
    struct FakeSystem {
        t: f64,
        goal: Option<(f64, f64)>,
        params: BTreeMap<String, f64>,
        stopped: Vec<String>,
        fail_restart: bool,
    }

    impl FakeSystem {
        fn new() -> Self {
            let mut params = BTreeMap::new();
            params.insert("max_vel".to_string(), 0.6);
            params.insert("acc_lim".to_string(), 2.4);
            Self { t: 10.0, goal: Some((12.0, 3.0)), params, stopped: Vec::new(), fail_restart: false }
        }
    }

    impl ManagedSystem for FakeSystem {
        fn now(&self) -> f64 {
            self.t
        }
        fn active_goal(&self) -> Option<(f64, f64)> {
            self.goal
        }
        fn set_goal(&mut self, goal: (f64, f64)) {
            self.goal = Some(goal);
        }
        fn stop_component(&mut self, component: &str) -> Result<(), String> {
            self.stopped.push(component.to_string());
            self.goal = None;
            Ok(())
        }
        fn restart_component(&mut self, component: &str) -> Result<(), String> {
            if self.fail_restart {
                return Err(format!("{component} refused to start"));
            }
            self.stopped.retain(|c| c != component);
            Ok(())
        }
        fn params(&self) -> BTreeMap<String, f64> {
            self.params.clone()
        }
        fn apply_params(&mut self, params: &BTreeMap<String, f64>) -> Result<(), String> {
            for (k, v) in params {
                self.params.insert(k.clone(), *v);
            }
            Ok(())
        }
        fn hold(&mut self, duration_s: f64) {
            self.t += duration_s;
        }
    }

    fn test_kb() -> KnowledgeBase {
        let mut kb = KnowledgeBase::new();
        kb.insert(KbEntity::Function(Function { id: "f".into(), description: String::new() }))
            .unwrap();
        for id in ["fd_a", "fd_b"] {
            kb.insert(KbEntity::FunctionDesign(FunctionDesign {
                id: id.into(),
                solves: "f".into(),
                expected_qas: Default::default(),
                config_ref: id.into(),
                blacklisted: false,
            }))
            .unwrap();
        }
        kb.insert(KbEntity::Objective(Objective {
            id: "o".into(),
            of_function: "f".into(),
            nfrs: Default::default(),
            status: ObjectiveStatus::Ungrounded,
        }))
        .unwrap();
        kb.ground("o", "fd_a").unwrap();
        kb
    }

    fn test_config() -> MetacontrolConfig {
        let mut cfg = MetacontrolConfig::default();
        let mut params = BTreeMap::new();
        params.insert("max_vel".to_string(), 0.3);
        params.insert("acc_lim".to_string(), 3.6);
        cfg.configurations.insert(
            "fd_b".to_string(),
            ConfigurationSpec {
                fd_id: "fd_b".to_string(),
                params,
                restart_components: vec!["move_base".to_string()],
            },
        );
        cfg.kill_components = vec!["move_base".to_string()];
        cfg
    }

    fn request_to_b() -> AdaptationRequest {
        AdaptationRequest {
            objective_id: "o".into(),
            from_fd: Some("fd_a".into()),
            to_fd: "fd_b".into(),
            reason: AdaptationReason::NfrViolation,
        }
    }

    #[test]
    fn applies_params_exactly_and_reissues_goal() {
        let mut kb = test_kb();
        let mut sys = FakeSystem::new();
        let report = execute(&request_to_b(), &test_config(), &mut sys, &mut kb).unwrap();
        assert_eq!(report.outcome, ReconfigurationOutcome::Applied);
        assert_eq!(sys.params["max_vel"], 0.3);
        assert_eq!(sys.params["acc_lim"], 3.6);
        assert!(report.goal_reissued);
        assert_eq!(sys.goal, Some((12.0, 3.0)));
        assert!((report.completed_at - report.started_at - 1.0).abs() < 1e-9);
        assert_eq!(kb.grounding("o").unwrap().fd_id, "fd_b");
        assert_eq!(kb.objective("o").unwrap().status, ObjectiveStatus::Ok);
    }

    #[test]
    fn same_fd_is_skipped_with_zero_time() {
        let mut kb = test_kb();
        let mut sys = FakeSystem::new();
        let mut req = request_to_b();
        req.to_fd = "fd_a".into();
        let mut cfg = test_config();
        cfg.configurations.insert(
            "fd_a".to_string(),
            ConfigurationSpec {
                fd_id: "fd_a".to_string(),
                params: sys.params.clone(),
                restart_components: vec![],
            },
        );
        let before = sys.params.clone();
        let report = execute(&req, &cfg, &mut sys, &mut kb).unwrap();
        assert_eq!(report.outcome, ReconfigurationOutcome::SkippedSameFd);
        assert_eq!(report.completed_at, report.started_at);
        assert_eq!(sys.params, before);
    }

    #[test]
    fn missing_mapping_is_an_error() {
        let mut kb = test_kb();
        let mut sys = FakeSystem::new();
        let mut req = request_to_b();
        req.to_fd = "fd_unmapped".into();
        assert_eq!(
            execute(&req, &test_config(), &mut sys, &mut kb),
            Err(ExecError::MissingMapping("fd_unmapped".into()))
        );
    }

    #[test]
    fn failure_restores_previous_params_and_blacklists() {
        let mut kb = test_kb();
        let mut sys = FakeSystem::new();
        sys.fail_restart = true;
        let before = sys.params.clone();
        let report = execute(&request_to_b(), &test_config(), &mut sys, &mut kb).unwrap();
        assert_eq!(report.outcome, ReconfigurationOutcome::Failed);
        assert_eq!(sys.params, before);
        assert!(kb.design("fd_b").unwrap().blacklisted);
        // Still grounded on the old design.
        assert_eq!(kb.grounding("o").unwrap().fd_id, "fd_a");
    }

    #[test]
    fn log_line_shape() {
        let report = ReconfigurationReport {
            request: request_to_b(),
            started_at: 10.0,
            completed_at: 11.0,
            outcome: ReconfigurationOutcome::Applied,
            goal_reissued: true,
        };
        assert_eq!(
            reconfig_log_line(&report),
            "t=10 fd=fd_b outcome=APPLIED latency=1 goal_reissued=true"
        );
    }
}
