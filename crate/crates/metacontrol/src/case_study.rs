//! Shipped case-study artifacts: the 27-variant navigation model (a 3x3x3
//! grid over velocity, acceleration, and obstacle standoff) and the
//! matching metacontrol configuration.
//!
//! Expected QA values are synthetic: they come from evaluating the power
//! and clearance formulas at a characteristic operating point, except for
//! the one variant whose reference values are pinned verbatim.

use std::collections::BTreeMap;

use crate::kb::Polarity;
use crate::model::{
    Cmp, ConfigurationSpec, Decl, Declaration, MetacontrolConfig, ModelDocument,
};
use crate::navsim::{
    A_REF_MPS2, COMPONENT_MOVE_BASE, PARAM_ACC_LIM, PARAM_MAX_VEL, PARAM_SAFETY_MARGIN,
};

pub const FUNCTION_NAVIGATE: &str = "f_navigate";
pub const OBJECTIVE_NAVIGATE: &str = "o_navigate";
pub const QA_SAFETY: &str = "safety";
pub const QA_ENERGY: &str = "energy";

pub const SAFETY_THRESHOLD: f64 = 0.25;
pub const ENERGY_THRESHOLD: f64 = 0.2;

pub const MAX_VEL_GRID: [f64; 3] = [0.3, 0.6, 1.0];
pub const ACC_LIM_GRID: [f64; 3] = [1.2, 2.4, 3.6];
pub const SAFETY_MARGIN_GRID: [f64; 3] = [0.6, 0.9, 1.2];

/// The one variant with fixed reference parameters and QA values.
pub const PINNED_DESIGN_ID: &str = "fd_v03_a36_m06";
pub const PINNED_QA_SAFETY: f64 = 0.7;
pub const PINNED_QA_ENERGY: f64 = 0.33;

fn grid_tag(v: f64) -> String {
    // 0.3 -> "03", 1.2 -> "12"
    format!("{:02.0}", v * 10.0)
}

pub fn design_id(max_vel: f64, acc_lim: f64, margin: f64) -> String {
    format!("fd_v{}_a{}_m{}", grid_tag(max_vel), grid_tag(acc_lim), grid_tag(margin))
}

/// Design-time safety estimate: the standoff the variant keeps, discounted
/// by the distance it needs to brake from full speed. Grows with the
/// margin, shrinks with velocity.
pub fn expected_safety(max_vel: f64, acc_lim: f64, margin: f64) -> f64 {
    let braking = max_vel * max_vel / (2.0 * acc_lim);
    ((margin - braking) / 1.2).clamp(0.0, 1.0)
}

/// Design-time energy estimate: cruise power plus an acceleration duty
/// share, normalized like the energy attribute. Grows with velocity and
/// acceleration.
pub fn expected_energy(max_vel: f64, acc_lim: f64) -> f64 {
    let duty = 0.2;
    ((3.0 * max_vel * max_vel + 1.8 * duty * (acc_lim / A_REF_MPS2)) / 4.8).clamp(0.0, 1.0)
}

/// Builds the shipped 27-design knowledge model.
pub fn case_study_designs() -> ModelDocument {
    let mut declarations = vec![
        Declaration { decl: Decl::QaType { id: QA_SAFETY.into(), polarity: Polarity::HigherIsBetter }, line: 0 },
        Declaration { decl: Decl::QaType { id: QA_ENERGY.into(), polarity: Polarity::LowerIsBetter }, line: 0 },
        Declaration { decl: Decl::Function { id: FUNCTION_NAVIGATE.into() }, line: 0 },
    ];
    for &max_vel in &MAX_VEL_GRID {
        for &acc_lim in &ACC_LIM_GRID {
            for &margin in &SAFETY_MARGIN_GRID {
                let id = design_id(max_vel, acc_lim, margin);
                let (safety, energy) = if id == PINNED_DESIGN_ID {
                    (PINNED_QA_SAFETY, PINNED_QA_ENERGY)
                } else {
                    (expected_safety(max_vel, acc_lim, margin), expected_energy(max_vel, acc_lim))
                };
                declarations.push(Declaration {
                    decl: Decl::Design {
                        id: id.clone(),
                        solves: FUNCTION_NAVIGATE.into(),
                        qas: vec![(QA_SAFETY.into(), safety), (QA_ENERGY.into(), energy)],
                        config_ref: id,
                    },
                    line: 0,
                });
            }
        }
    }
    declarations.push(Declaration {
        decl: Decl::Objective {
            id: OBJECTIVE_NAVIGATE.into(),
            of_function: FUNCTION_NAVIGATE.into(),
            nfrs: vec![
                (QA_SAFETY.into(), Cmp::Ge, SAFETY_THRESHOLD),
                (QA_ENERGY.into(), Cmp::Le, ENERGY_THRESHOLD),
            ],
        },
        line: 0,
    });
    ModelDocument { declarations }
}

/// The matching configuration: one parameter set per design, all of them
/// bouncing the navigation component.
pub fn case_study_config() -> MetacontrolConfig {
    let mut cfg = MetacontrolConfig::default();
    for &max_vel in &MAX_VEL_GRID {
        for &acc_lim in &ACC_LIM_GRID {
            for &margin in &SAFETY_MARGIN_GRID {
                let id = design_id(max_vel, acc_lim, margin);
                let mut params = BTreeMap::new();
                params.insert(PARAM_MAX_VEL.to_string(), max_vel);
                params.insert(PARAM_ACC_LIM.to_string(), acc_lim);
                params.insert(PARAM_SAFETY_MARGIN.to_string(), margin);
                cfg.configurations.insert(
                    id.clone(),
                    ConfigurationSpec {
                        fd_id: id,
                        params,
                        restart_components: vec![COMPONENT_MOVE_BASE.to_string()],
                    },
                );
            }
        }
    }
    cfg.kill_components = vec![COMPONENT_MOVE_BASE.to_string()];
    cfg
}

/// Header prepended to the generated model file.
pub const MODEL_FILE_HEADER: &str =
    "# navigation case-study knowledge model (generated)\n# expected QA values are synthetic estimates; one variant is pinned to fixed reference values\n";
