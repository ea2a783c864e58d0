//! Experiment harness: runs full missions (simulator, observers, MAPE-K
//! loop, executor) in adaptive or static mode and computes per-run
//! violation metrics, plus the paired adaptive-vs-static comparison over
//! seed batches.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::diagnostics::{
    diagnostics_csv, energy_quality_observer, safety_quality_observer, Bus, DiagnosticStatus,
    Observer, Payload, SubscriberId, TOPIC_DIAGNOSTICS,
};
use crate::executor::{execute, reconfig_log_line, ManagedSystem, ReconfigurationOutcome};
use crate::kb::{KnowledgeBase, Polarity};
use crate::model::{
    load_model_source, parse_metacontrol_config, validate_config, ParseError, ValidationError,
};
use crate::navsim::{MissionSpec, MissionStatus, NavError, NavParams, NavSim};
use crate::reasoner::{decision_log_line, mape_step, plan, AdaptationReason, ReasonerConfig};

/// Cadence of the shipped QA observers.
pub const OBSERVER_PERIOD_S: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mode {
    Adaptive,
    Static(String),
}

impl Mode {
    pub fn label(&self) -> String {
        match self {
            Mode::Adaptive => "adaptive".to_string(),
            Mode::Static(fd) => format!("static:{fd}"),
        }
    }

    /// Parses "adaptive" or "static:<fd>".
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        if text == "adaptive" {
            return Ok(Mode::Adaptive);
        }
        if let Some(fd) = text.strip_prefix("static:") {
            if !fd.is_empty() {
                return Ok(Mode::Static(fd.to_string()));
            }
        }
        Err(HarnessError::UnknownMode(text.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("unknown mode `{0}`")]
    UnknownMode(String),
    #[error("unknown static function design `{0}`")]
    UnknownStaticFd(String),
    #[error("model declares no objective")]
    NoObjective,
    #[error("no feasible design for the initial grounding")]
    NoInitialDesign,
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error("comparison needs at least 2 seeds, got {0}")]
    TooFewSeeds(usize),
    #[error("executor error: {0}")]
    Exec(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionMetrics {
    pub seed: u64,
    pub mode: String,
    /// Fraction of fresh-measurement steps where safety sat below its
    /// threshold.
    pub safety_violation_frac: f64,
    pub energy_violation_frac: f64,
    pub success: bool,
    /// Applied reconfigurations after the initial grounding.
    pub adaptations: u32,
    pub no_feasible_events: u32,
}

#[derive(Debug)]
pub struct MissionArtifacts {
    pub metrics: MissionMetrics,
    pub status: MissionStatus,
    pub initial_fd: String,
    pub trace_csv: String,
    pub diagnostics_csv: String,
    pub decision_log: String,
    pub reconfig_log: String,
}

/// Everything one mission owns: simulator, bus, observers, trace, and the
/// per-QA violation accounting. Implements the executor's managed-system
/// view so reconfiguration latency windows keep the trace and observers
/// running.
struct MissionRuntime {
    sim: NavSim,
    bus: Bus,
    observers: Vec<Observer>,
    mape_sub: SubscriberId,
    record_sub: SubscriberId,
    trace_csv: String,
    diag_rows: Vec<(DiagnosticStatus, f64)>,
    /// qa -> (value, sample time), latest seen on /diagnostics.
    latest_qa: BTreeMap<String, (f64, f64)>,
    /// qa -> (polarity, threshold) from the objective's NFRs.
    thresholds: BTreeMap<String, (Polarity, f64)>,
    staleness_s: f64,
    /// qa -> (steps with a fresh measurement, violating steps).
    violation_counts: BTreeMap<String, (u64, u64)>,
    active_fd: String,
}

impl MissionRuntime {
    fn new(
        spec: MissionSpec,
        thresholds: BTreeMap<String, (Polarity, f64)>,
        staleness_s: f64,
        initial_fd: String,
    ) -> Self {
        let mut bus = Bus::new();
        let mape_sub = bus.subscribe(TOPIC_DIAGNOSTICS);
        let record_sub = bus.subscribe(TOPIC_DIAGNOSTICS);
        Self {
            sim: NavSim::new(spec, NavParams::default()),
            bus,
            observers: vec![
                safety_quality_observer(OBSERVER_PERIOD_S),
                energy_quality_observer(OBSERVER_PERIOD_S),
            ],
            mape_sub,
            record_sub,
            trace_csv: String::from(
                "t,x,y,v,min_obstacle_dist,power_load,battery,active_fd,safety_qa,energy_qa\n",
            ),
            diag_rows: Vec::new(),
            latest_qa: BTreeMap::new(),
            thresholds,
            staleness_s,
            violation_counts: BTreeMap::new(),
            active_fd: initial_fd,
        }
    }

    /// One world tick plus everything observing it.
    fn advance_step(&mut self) {
        self.sim.step(&mut self.bus);
        let now = self.sim.world.t;
        for obs in &mut self.observers {
            obs.tick(&mut self.bus, now);
        }
        for (payload, t) in self.bus.drain(self.record_sub) {
            if let Payload::Diagnostic(status) = payload {
                for (key, value) in &status.values {
                    if self.thresholds.contains_key(key) {
                        if let Ok(v) = value.parse::<f64>() {
                            self.latest_qa.insert(key.clone(), (v, t));
                        }
                    }
                }
                self.diag_rows.push((status, t));
            }
        }
        for (qa, (polarity, threshold)) in &self.thresholds {
            let Some((value, t)) = self.latest_qa.get(qa) else {
                continue;
            };
            if now - t > self.staleness_s {
                continue;
            }
            let entry = self.violation_counts.entry(qa.clone()).or_insert((0, 0));
            entry.0 += 1;
            let violated = match polarity {
                Polarity::HigherIsBetter => *value < *threshold,
                Polarity::LowerIsBetter => *value > *threshold,
            };
            if violated {
                entry.1 += 1;
            }
        }
        self.push_trace_row(now);
    }

    fn push_trace_row(&mut self, now: f64) {
        let w = &self.sim.world;
        let qa = |key: &str| -> f64 {
            self.latest_qa.get(key).map(|(v, _)| *v).unwrap_or(f64::NAN)
        };
        self.trace_csv.push_str(&format!(
            "{now},{},{},{},{},{},{},{},{},{}\n",
            w.x,
            w.y,
            w.v,
            self.sim.min_obstacle_distance(),
            w.power_load,
            w.battery,
            self.active_fd,
            qa(crate::case_study::QA_SAFETY),
            qa(crate::case_study::QA_ENERGY),
        ));
    }

    fn violation_frac(&self, qa: &str) -> f64 {
        match self.violation_counts.get(qa) {
            Some((fresh, violations)) if *fresh > 0 => *violations as f64 / *fresh as f64,
            _ => 0.0,
        }
    }
}

impl ManagedSystem for MissionRuntime {
    fn now(&self) -> f64 {
        self.sim.world.t
    }
    fn active_goal(&self) -> Option<(f64, f64)> {
        self.sim.active_goal()
    }
    fn set_goal(&mut self, goal: (f64, f64)) {
        self.sim.set_goal(goal);
    }
    fn stop_component(&mut self, component: &str) -> Result<(), String> {
        // Stopping the drive component also drops the active goal; the
        // executor re-issues the saved one afterwards.
        self.sim.stop_component(component).map_err(|e| e.to_string())?;
        self.sim.clear_goal();
        Ok(())
    }
    fn restart_component(&mut self, component: &str) -> Result<(), String> {
        self.sim.restart_component(component).map_err(|e| e.to_string())
    }
    fn params(&self) -> BTreeMap<String, f64> {
        let p = self.sim.params;
        BTreeMap::from([
            (crate::navsim::PARAM_MAX_VEL.to_string(), p.max_vel),
            (crate::navsim::PARAM_ACC_LIM.to_string(), p.acc_lim),
            (crate::navsim::PARAM_SAFETY_MARGIN.to_string(), p.safety_margin),
        ])
    }
    fn apply_params(&mut self, params: &BTreeMap<String, f64>) -> Result<(), String> {
        self.sim.apply_params(params).map_err(|e| e.to_string())
    }
    fn hold(&mut self, duration_s: f64) {
        let steps = (duration_s / self.sim.spec.dt).round() as u64;
        for _ in 0..steps {
            self.advance_step();
        }
    }
}

/// Runs one mission to completion. In static mode the reasoner is off and
/// the named design is applied once at t=0; in adaptive mode the initial
/// design is the planner's utility argmax and the MAPE-K loop runs every
/// step.
pub fn run_mission(
    model_src: &str,
    config_src: &str,
    spec: MissionSpec,
    mode: &Mode,
    faults: &[(String, f64)],
) -> Result<MissionArtifacts, HarnessError> {
    let mut kb = KnowledgeBase::new();
    load_model_source(model_src, &mut kb)?;
    let config = parse_metacontrol_config(config_src)?;
    validate_config(&kb, &config)?;

    let objective_id = kb
        .objectives()
        .map(|o| o.id.clone())
        .next()
        .ok_or(HarnessError::NoObjective)?;
    let reasoner_cfg = ReasonerConfig::default();

    let mut decision_log = String::new();
    let initial_fd = match mode {
        Mode::Static(fd) => {
            if kb.design(fd).is_none() {
                return Err(HarnessError::UnknownStaticFd(fd.clone()));
            }
            fd.clone()
        }
        Mode::Adaptive => match plan(&kb, &objective_id) {
            Ok((req, u)) => {
                decision_log.push_str(&decision_log_line(0.0, &req, u));
                decision_log.push('\n');
                req.to_fd
            }
            Err(_) => return Err(HarnessError::NoInitialDesign),
        },
    };

    let objective = kb.objective(&objective_id).expect("resolved above");
    let thresholds: BTreeMap<String, (Polarity, f64)> = objective
        .nfrs
        .iter()
        .map(|(qa, thr)| (qa.clone(), (kb.qa_type(qa).expect("kb integrity").polarity, *thr)))
        .collect();

    let mut runtime =
        MissionRuntime::new(spec, thresholds, reasoner_cfg.staleness_s, initial_fd.clone());

    // The initial configuration is applied before the mission starts; it
    // costs no reconfiguration latency and is identical across modes.
    let initial_cfg_key = kb.design(&initial_fd).expect("resolved above").config_ref.clone();
    let initial_params = config
        .configurations
        .get(&initial_cfg_key)
        .expect("validated above")
        .params
        .clone();
    runtime.apply_params(&initial_params).map_err(HarnessError::Exec)?;
    kb.ground(&objective_id, &initial_fd).expect("design solves the objective");

    for (component, at) in faults {
        runtime.sim.inject_fault(component, *at)?;
    }

    let mut reconfig_log = String::new();
    let mut adaptations = 0u32;
    let mut no_feasible_events = 0u32;

    let status = loop {
        runtime.advance_step();
        let status = runtime.sim.mission_status();
        if status != MissionStatus::Running {
            break status;
        }
        let batch: Vec<(DiagnosticStatus, f64)> = runtime
            .bus
            .drain(runtime.mape_sub)
            .into_iter()
            .filter_map(|(p, t)| match p {
                Payload::Diagnostic(status) => Some((status, t)),
                _ => None,
            })
            .collect();
        if *mode != Mode::Adaptive {
            continue;
        }
        let now = runtime.sim.world.t;
        let outcome = mape_step(&mut kb, &batch, now, &reasoner_cfg);
        no_feasible_events += outcome.no_feasible.len() as u32;
        if let Some((req, u)) = outcome.request {
            decision_log.push_str(&decision_log_line(now, &req, u));
            decision_log.push('\n');
            let report = execute(&req, &config, &mut runtime, &mut kb)
                .map_err(|e| HarnessError::Exec(e.to_string()))?;
            reconfig_log.push_str(&reconfig_log_line(&report));
            reconfig_log.push('\n');
            if report.outcome == ReconfigurationOutcome::Applied {
                if req.reason != AdaptationReason::InitialGrounding {
                    adaptations += 1;
                }
                runtime.active_fd = req.to_fd.clone();
            }
        }
    };

    let metrics = MissionMetrics {
        seed: runtime.sim.spec.seed,
        mode: mode.label(),
        safety_violation_frac: runtime.violation_frac(crate::case_study::QA_SAFETY),
        energy_violation_frac: runtime.violation_frac(crate::case_study::QA_ENERGY),
        success: status == MissionStatus::Success,
        adaptations,
        no_feasible_events,
    };
    Ok(MissionArtifacts {
        metrics,
        status,
        initial_fd,
        trace_csv: std::mem::take(&mut runtime.trace_csv),
        diagnostics_csv: diagnostics_csv(&runtime.diag_rows),
        decision_log,
        reconfig_log,
    })
}

pub const METRICS_CSV_HEADER: &str =
    "seed,mode,safety_violation_frac,energy_violation_frac,success,adaptations,no_feasible_events\n";

pub fn metrics_csv_row(m: &MissionMetrics) -> String {
    format!(
        "{},{},{},{},{},{},{}\n",
        m.seed,
        crate::csv::escape(&m.mode),
        m.safety_violation_frac,
        m.energy_violation_frac,
        m.success,
        m.adaptations,
        m.no_feasible_events
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSummary {
    pub safety_violation_frac: f64,
    pub energy_violation_frac: f64,
    pub success_rate: f64,
    pub adaptations: f64,
}

fn summarize(rows: &[MissionMetrics]) -> MetricsSummary {
    let n = rows.len() as f64;
    MetricsSummary {
        safety_violation_frac: rows.iter().map(|m| m.safety_violation_frac).sum::<f64>() / n,
        energy_violation_frac: rows.iter().map(|m| m.energy_violation_frac).sum::<f64>() / n,
        success_rate: rows.iter().filter(|m| m.success).count() as f64 / n,
        adaptations: rows.iter().map(|m| f64::from(m.adaptations)).sum::<f64>() / n,
    }
}

#[derive(Debug)]
pub struct ComparisonResult {
    pub csv: String,
    pub verdict: String,
    pub adaptive: MetricsSummary,
    pub static_: MetricsSummary,
    pub adaptive_rows: Vec<MissionMetrics>,
    pub static_rows: Vec<MissionMetrics>,
}

/// Paired adaptive-vs-static experiment: same seed means the same obstacle
/// schedule in both modes.
pub fn compare(
    model_src: &str,
    config_src: &str,
    seeds: &[u64],
    static_fd: &str,
    base_spec: MissionSpec,
) -> Result<ComparisonResult, HarnessError> {
    if seeds.len() < 2 {
        return Err(HarnessError::TooFewSeeds(seeds.len()));
    }
    let static_mode = Mode::Static(static_fd.to_string());
    let mut adaptive_rows = Vec::new();
    let mut static_rows = Vec::new();
    for &seed in seeds {
        let spec = MissionSpec { seed, ..base_spec };
        adaptive_rows
            .push(run_mission(model_src, config_src, spec, &Mode::Adaptive, &[])?.metrics);
        static_rows.push(run_mission(model_src, config_src, spec, &static_mode, &[])?.metrics);
    }
    let adaptive = summarize(&adaptive_rows);
    let static_ = summarize(&static_rows);

    let mut csv = String::from(METRICS_CSV_HEADER);
    for (a, s) in adaptive_rows.iter().zip(&static_rows) {
        csv.push_str(&metrics_csv_row(a));
        csv.push_str(&metrics_csv_row(s));
    }
    csv.push_str(&format!(
        "mean,adaptive,{},{},{},{},\n",
        adaptive.safety_violation_frac,
        adaptive.energy_violation_frac,
        adaptive.success_rate,
        adaptive.adaptations
    ));
    csv.push_str(&format!(
        "mean,{},{},{},{},{},\n",
        crate::csv::escape(&static_mode.label()),
        static_.safety_violation_frac,
        static_.energy_violation_frac,
        static_.success_rate,
        static_.adaptations
    ));

    let direction = |a: f64, s: f64, lower_better: bool| -> &'static str {
        if a == s {
            "tied"
        } else if (a < s) == lower_better {
            "adaptive better"
        } else {
            "adaptive worse"
        }
    };
    let verdict = format!(
        "safety_violation_frac: adaptive {} vs static {} -> {}\n\
         energy_violation_frac: adaptive {} vs static {} -> {}\n\
         success_rate: adaptive {} vs static {} -> {}\n",
        adaptive.safety_violation_frac,
        static_.safety_violation_frac,
        direction(adaptive.safety_violation_frac, static_.safety_violation_frac, true),
        adaptive.energy_violation_frac,
        static_.energy_violation_frac,
        direction(adaptive.energy_violation_frac, static_.energy_violation_frac, true),
        adaptive.success_rate,
        static_.success_rate,
        direction(adaptive.success_rate, static_.success_rate, false),
    );

    Ok(ComparisonResult { csv, verdict, adaptive, static_, adaptive_rows, static_rows })
}
