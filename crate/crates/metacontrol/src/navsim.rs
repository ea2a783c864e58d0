//! Deterministic discrete-time managed system: a point robot driving a
//! straight corridor toward a goal, with seeded obstacle pop-ups, a power
//! model whose idle/peak loads match the energy normalization constants,
//! and battery drain.
//!
//! The obstacle schedule is drawn entirely from the mission seed before
//! the run starts, so adaptation decisions cannot perturb the random
//! stream — adaptive and static runs of the same seed face the same world.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diagnostics::{
    Bus, DiagnosticLevel, DiagnosticStatus, SAFETY_DIST_CRITICAL_M, SAFETY_DIST_SAFE_M,
    TOPIC_POWER_LOAD, TOPIC_SCAN_MIN_DISTANCE,
};
use crate::reasoner::COMPONENT_KEY;

pub const V_REF_MPS: f64 = 1.0;
pub const A_REF_MPS2: f64 = 3.6;
pub const K_BATT_PER_UNIT_LOAD_S: f64 = 0.0005;
pub const GOAL_TOLERANCE_M: f64 = 0.2;
/// Pop-up obstacles clear themselves after this long.
pub const OBSTACLE_LIFETIME_S: f64 = 2.0;
/// Spawns closer than this to the robot are suppressed (nothing materializes
/// on top of the sensor).
pub const SPAWN_CLEARANCE_M: f64 = 1.0;
pub const OBSTACLE_RADIUS_M: f64 = 0.3;

/// The single restartable component of the managed system.
pub const COMPONENT_MOVE_BASE: &str = "move_base";

/// The parameter names a configuration may set.
pub const PARAM_MAX_VEL: &str = "max_vel";
pub const PARAM_ACC_LIM: &str = "acc_lim";
pub const PARAM_SAFETY_MARGIN: &str = "safety_margin";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavParams {
    pub max_vel: f64,
    pub acc_lim: f64,
    pub safety_margin: f64,
}

impl Default for NavParams {
    fn default() -> Self {
        // The fully specified case-study variant.
        Self { max_vel: 0.3, acc_lim: 3.6, safety_margin: 0.6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub expires_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissionSpec {
    pub start: (f64, f64),
    pub goal: (f64, f64),
    pub duration_limit_s: f64,
    /// Poisson rate of obstacle pop-ups, events per second.
    pub obstacle_rate: f64,
    pub seed: u64,
    pub dt: f64,
}

impl Default for MissionSpec {
    fn default() -> Self {
        Self {
            start: (0.0, 0.0),
            goal: (12.0, 0.0),
            duration_limit_s: 90.0,
            obstacle_rate: 0.1,
            seed: 0,
            dt: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub goal: (f64, f64),
    pub obstacles: Vec<Obstacle>,
    pub battery: f64,
    pub power_load: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    Collision,
    BatteryDepleted,
    Timeout,
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FailureReason::Collision => "COLLISION",
            FailureReason::BatteryDepleted => "BATTERY_DEPLETED",
            FailureReason::Timeout => "TIMEOUT",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissionStatus {
    Running,
    Success,
    Failed(FailureReason),
}

#[derive(Debug, Error, PartialEq)]
pub enum NavError {
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
}

/// One pre-drawn spawn event: at `t`, an obstacle appears at (x, y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpawnEvent {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Draws the whole obstacle schedule for a mission from its seed: a Poisson
/// process in time, positions uniform along the corridor interior.
pub fn draw_obstacle_schedule(spec: &MissionSpec) -> Vec<SpawnEvent> {
    let mut events = Vec::new();
    if spec.obstacle_rate <= 0.0 {
        return events;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (sx, sy) = spec.start;
    let (gx, gy) = spec.goal;
    let len = ((gx - sx).powi(2) + (gy - sy).powi(2)).sqrt();
    let (ux, uy) = ((gx - sx) / len, (gy - sy) / len);
    let lo = 1.5_f64.min(len / 2.0);
    let hi = (len - 0.5).max(lo);
    let mut t = 0.0;
    loop {
        let u: f64 = rng.gen();
        t += -(1.0 - u).ln() / spec.obstacle_rate;
        if t > spec.duration_limit_s {
            break;
        }
        let s: f64 = rng.gen_range(lo..hi);
        events.push(SpawnEvent { t, x: sx + ux * s, y: sy + uy * s });
    }
    events
}

#[derive(Debug)]
pub struct NavSim {
    pub world: WorldState,
    pub params: NavParams,
    pub spec: MissionSpec,
    schedule: Vec<SpawnEvent>,
    next_event: usize,
    steps: u64,
    active_goal: Option<(f64, f64)>,
    stopped_components: Vec<String>,
    /// component -> activation time of an injected fault.
    faults: Vec<(String, f64)>,
}

impl NavSim {
    pub fn new(spec: MissionSpec, params: NavParams) -> Self {
        let schedule = draw_obstacle_schedule(&spec);
        Self {
            world: WorldState {
                x: spec.start.0,
                y: spec.start.1,
                v: 0.0,
                goal: spec.goal,
                obstacles: Vec::new(),
                battery: 1.0,
                power_load: 0.2,
                t: 0.0,
            },
            params,
            spec,
            schedule,
            next_event: 0,
            steps: 0,
            active_goal: Some(spec.goal),
            stopped_components: Vec::new(),
            faults: Vec::new(),
        }
    }

    pub fn min_obstacle_distance(&self) -> f64 {
        self.world
            .obstacles
            .iter()
            .map(|o| ((self.world.x - o.x).powi(2) + (self.world.y - o.y).powi(2)).sqrt() - o.radius)
            .fold(f64::INFINITY, f64::min)
    }

    /// Speed ceiling near obstacles: shrinks linearly from max_vel at
    /// `safety_margin + d_safe` clearance down to zero at the margin.
    fn allowed_speed(&self, min_dist: f64) -> f64 {
        let frac =
            ((min_dist - self.params.safety_margin) / SAFETY_DIST_SAFE_M).clamp(0.0, 1.0);
        self.params.max_vel * frac
    }

    /// Advances one dt tick: spawn/expire obstacles, steer toward the goal
    /// under the speed/acceleration limits, integrate, update power and
    /// battery, publish telemetry (and fault diagnostics, if any).
    pub fn step(&mut self, bus: &mut Bus) {
        let dt = self.spec.dt;
        let now = self.world.t;

        // Obstacle spawning from the pre-drawn schedule.
        while self.next_event < self.schedule.len() && self.schedule[self.next_event].t <= now {
            let ev = self.schedule[self.next_event];
            self.next_event += 1;
            let d = ((self.world.x - ev.x).powi(2) + (self.world.y - ev.y).powi(2)).sqrt();
            if d < SPAWN_CLEARANCE_M || self.passed(ev.x, ev.y) {
                continue; // nothing materializes on top of or behind the robot
            }
            self.world.obstacles.push(Obstacle {
                x: ev.x,
                y: ev.y,
                radius: OBSTACLE_RADIUS_M,
                expires_at: ev.t + OBSTACLE_LIFETIME_S,
            });
        }
        let (rx, ry) = (self.world.x, self.world.y);
        let (dir_x, dir_y) = self.goal_direction();
        // Obstacles clear once behind the robot or past their lifetime.
        self.world.obstacles.retain(|o| {
            let behind = (o.x - rx) * dir_x + (o.y - ry) * dir_y < -(o.radius + 0.1);
            now < o.expires_at && !behind
        });

        // Local planner: desired speed toward the goal, bounded by the
        // velocity limit, obstacle clearance, and braking to stop on the
        // goal point.
        let min_dist = self.min_obstacle_distance();
        let goal_dist = self.goal_distance();
        let driving = self.active_goal.is_some()
            && !self.stopped_components.iter().any(|c| c == COMPONENT_MOVE_BASE);
        let v_target = if driving {
            let stop_bound = (2.0 * self.params.acc_lim * goal_dist).sqrt();
            self.params
                .max_vel
                .min(self.allowed_speed(min_dist))
                .min(stop_bound)
        } else {
            0.0
        };

        let dv = (v_target - self.world.v).clamp(-self.params.acc_lim * dt, self.params.acc_lim * dt);
        let accel = dv / dt;
        self.world.v += dv;

        // Kinematics along the line toward the goal, without overshooting.
        let travel = (self.world.v * dt).min(goal_dist);
        let (ux, uy) = self.goal_direction();
        self.world.x += ux * travel;
        self.world.y += uy * travel;

        // Power model: idle 0.2, peak 5.0 at (v_ref, a_ref).
        self.world.power_load = 0.2
            + 3.0 * (self.world.v / V_REF_MPS).powi(2)
            + 1.8 * (accel.abs() / A_REF_MPS2);
        self.world.battery =
            (self.world.battery - K_BATT_PER_UNIT_LOAD_S * self.world.power_load * dt).max(0.0);

        self.steps += 1;
        self.world.t = self.steps as f64 * dt;

        let t = self.world.t;
        bus.publish_telemetry(TOPIC_POWER_LOAD, self.world.power_load, t)
            .expect("telemetry topic");
        bus.publish_telemetry(TOPIC_SCAN_MIN_DISTANCE, self.min_obstacle_distance(), t)
            .expect("telemetry topic");
        for (component, at) in &self.faults {
            if t >= *at {
                bus.publish_diagnostic(
                    DiagnosticStatus {
                        level: DiagnosticLevel::Error,
                        name: component.clone(),
                        message: "component failure".to_string(),
                        values: vec![(COMPONENT_KEY.to_string(), component.clone())],
                    },
                    t,
                )
                .expect("diagnostics topic");
            }
        }
    }

    fn goal_direction(&self) -> (f64, f64) {
        let target = self.active_goal.unwrap_or(self.world.goal);
        let dx = target.0 - self.world.x;
        let dy = target.1 - self.world.y;
        let d = (dx * dx + dy * dy).sqrt();
        if d < 1e-12 {
            (0.0, 0.0)
        } else {
            (dx / d, dy / d)
        }
    }

    fn goal_distance(&self) -> f64 {
        let target = self.active_goal.unwrap_or(self.world.goal);
        ((target.0 - self.world.x).powi(2) + (target.1 - self.world.y).powi(2)).sqrt()
    }

    fn passed(&self, x: f64, y: f64) -> bool {
        let (ux, uy) = self.goal_direction();
        (x - self.world.x) * ux + (y - self.world.y) * uy < 0.0
    }

    /// First matching rule wins: success, collision, battery, timeout.
    pub fn mission_status(&self) -> MissionStatus {
        let goal_dist = ((self.world.goal.0 - self.world.x).powi(2)
            + (self.world.goal.1 - self.world.y).powi(2))
        .sqrt();
        if goal_dist <= GOAL_TOLERANCE_M {
            return MissionStatus::Success;
        }
        if self.min_obstacle_distance() < SAFETY_DIST_CRITICAL_M {
            return MissionStatus::Failed(FailureReason::Collision);
        }
        if self.world.battery <= 0.0 {
            return MissionStatus::Failed(FailureReason::BatteryDepleted);
        }
        if self.world.t > self.spec.duration_limit_s {
            return MissionStatus::Failed(FailureReason::Timeout);
        }
        MissionStatus::Running
    }

    /// From `at` onward the component reports ERROR on /diagnostics each
    /// tick, until a reconfiguration restarts it.
    pub fn inject_fault(&mut self, component: &str, at: f64) -> Result<(), NavError> {
        if component != COMPONENT_MOVE_BASE {
            return Err(NavError::UnknownComponent(component.to_string()));
        }
        self.faults.push((component.to_string(), at));
        Ok(())
    }

    pub fn stop_component(&mut self, component: &str) -> Result<(), NavError> {
        if component != COMPONENT_MOVE_BASE {
            return Err(NavError::UnknownComponent(component.to_string()));
        }
        if !self.stopped_components.iter().any(|c| c == component) {
            self.stopped_components.push(component.to_string());
        }
        Ok(())
    }

    /// Restarting clears both the stopped flag and any injected fault.
    pub fn restart_component(&mut self, component: &str) -> Result<(), NavError> {
        if component != COMPONENT_MOVE_BASE {
            return Err(NavError::UnknownComponent(component.to_string()));
        }
        self.stopped_components.retain(|c| c != component);
        self.faults.retain(|(c, _)| c != component);
        Ok(())
    }

    pub fn apply_params(&mut self, params: &std::collections::BTreeMap<String, f64>) -> Result<(), NavError> {
        // Validate before mutating so a failed apply leaves params intact.
        for name in params.keys() {
            if !matches!(name.as_str(), PARAM_MAX_VEL | PARAM_ACC_LIM | PARAM_SAFETY_MARGIN) {
                return Err(NavError::UnknownParameter(name.clone()));
            }
        }
        for (name, value) in params {
            match name.as_str() {
                PARAM_MAX_VEL => self.params.max_vel = *value,
                PARAM_ACC_LIM => self.params.acc_lim = *value,
                PARAM_SAFETY_MARGIN => self.params.safety_margin = *value,
                _ => unreachable!("validated above"),
            }
        }
        Ok(())
    }

    pub fn active_goal(&self) -> Option<(f64, f64)> {
        self.active_goal
    }

    pub fn clear_goal(&mut self) {
        self.active_goal = None;
    }

    pub fn set_goal(&mut self, goal: (f64, f64)) {
        self.active_goal = Some(goal);
    }

    pub fn has_fault(&self, component: &str) -> bool {
        self.faults.iter().any(|(c, _)| c == component)
    }
}
