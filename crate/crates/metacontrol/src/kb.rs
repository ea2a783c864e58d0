//! Knowledge base for the metacontrol loop.
//!
//! Holds the functional-architecture model (functions, function designs,
//! quality-attribute types) alongside the runtime state the loop maintains
//! (objectives, groundings, measurements, component health). Everything is
//! keyed by string identifiers and kept in B-tree maps so iteration order,
//! and therefore every downstream decision, is deterministic.

use std::collections::BTreeMap;

use thiserror::Error;

/// Direction in which a quality attribute improves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    HigherIsBetter,
    LowerIsBetter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityAttributeType {
    pub id: String,
    pub polarity: Polarity,
    pub description: String,
}

/// A quantified amount of some quality attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct QaValue {
    pub type_id: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub id: String,
    pub description: String,
}

/// One concrete architectural variant that solves a function, with the
/// quality levels its designers expect from it and a pointer into the
/// metacontrol configuration that knows how to realize it.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDesign {
    pub id: String,
    pub solves: String,
    /// At most one expected value per QA type.
    pub expected_qas: BTreeMap<String, f64>,
    pub config_ref: String,
    /// Runtime flag: set when this design caused a component failure,
    /// cleared only by rebuilding the KB.
    pub blacklisted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveStatus {
    Ok,
    InErrorNfr,
    InErrorComponent,
    Ungrounded,
}

impl std::fmt::Display for ObjectiveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ObjectiveStatus::Ok => "OK",
            ObjectiveStatus::InErrorNfr => "IN_ERROR_NFR",
            ObjectiveStatus::InErrorComponent => "IN_ERROR_COMPONENT",
            ObjectiveStatus::Ungrounded => "UNGROUNDED",
        };
        f.write_str(s)
    }
}

/// Runtime instantiation of a function with non-functional requirements
/// attached as thresholds on measured QA values.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub id: String,
    pub of_function: String,
    /// QA type id -> threshold. At most one per type.
    pub nfrs: BTreeMap<String, f64>,
    pub status: ObjectiveStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentHealth {
    Ok,
    Warn,
    Error,
}

/// Binding of an objective to the function design currently realizing it.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionGrounding {
    pub objective_id: String,
    pub fd_id: String,
    /// QA type id -> (value, mission-time of the sample).
    pub measured_qas: BTreeMap<String, (f64, f64)>,
    pub component_status: BTreeMap<String, ComponentHealth>,
}

#[derive(Debug, Error, PartialEq)]
pub enum KbError {
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("dangling reference `{0}`")]
    DanglingReference(String),
    #[error("unknown function design `{0}`")]
    UnknownDesign(String),
    #[error("unknown QA type `{0}`")]
    UnknownQaType(String),
    #[error("unknown objective `{0}`")]
    UnknownObjective(String),
    #[error("objective `{0}` is not grounded")]
    UngroundedObjective(String),
    #[error("non-finite value for QA `{0}`")]
    NonFiniteValue(String),
}

/// Any entity the KB can store.
#[derive(Debug, Clone, PartialEq)]
pub enum KbEntity {
    QaType(QualityAttributeType),
    Function(Function),
    FunctionDesign(FunctionDesign),
    Objective(Objective),
}

/// The "K" of the MAPE-K loop.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeBase {
    qa_types: BTreeMap<String, QualityAttributeType>,
    functions: BTreeMap<String, Function>,
    function_designs: BTreeMap<String, FunctionDesign>,
    objectives: BTreeMap<String, Objective>,
    groundings: BTreeMap<String, FunctionGrounding>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts any entity, checking id uniqueness and that every reference
    /// resolves to something already stored.
    pub fn insert(&mut self, entity: KbEntity) -> Result<(), KbError> {
        match entity {
            KbEntity::QaType(qt) => {
                if self.qa_types.contains_key(&qt.id) {
                    return Err(KbError::DuplicateId(qt.id));
                }
                self.qa_types.insert(qt.id.clone(), qt);
            }
            KbEntity::Function(f) => {
                if self.functions.contains_key(&f.id) {
                    return Err(KbError::DuplicateId(f.id));
                }
                self.functions.insert(f.id.clone(), f);
            }
            KbEntity::FunctionDesign(fd) => {
                if self.function_designs.contains_key(&fd.id) {
                    return Err(KbError::DuplicateId(fd.id));
                }
                if !self.functions.contains_key(&fd.solves) {
                    return Err(KbError::DanglingReference(fd.solves));
                }
                for (type_id, value) in &fd.expected_qas {
                    if !self.qa_types.contains_key(type_id) {
                        return Err(KbError::DanglingReference(type_id.clone()));
                    }
                    if !value.is_finite() {
                        return Err(KbError::NonFiniteValue(type_id.clone()));
                    }
                }
                self.function_designs.insert(fd.id.clone(), fd);
            }
            KbEntity::Objective(o) => {
                if self.objectives.contains_key(&o.id) {
                    return Err(KbError::DuplicateId(o.id));
                }
                if !self.functions.contains_key(&o.of_function) {
                    return Err(KbError::DanglingReference(o.of_function));
                }
                for type_id in o.nfrs.keys() {
                    if !self.qa_types.contains_key(type_id) {
                        return Err(KbError::DanglingReference(type_id.clone()));
                    }
                }
                self.objectives.insert(o.id.clone(), o);
            }
        }
        Ok(())
    }

    /// Replaces expected QA values on a design; types not named in
    /// `overrides` keep their model-file values. Idempotent.
    pub fn override_expected_qas(
        &mut self,
        fd_id: &str,
        overrides: &[QaValue],
    ) -> Result<(), KbError> {
        if !self.function_designs.contains_key(fd_id) {
            return Err(KbError::UnknownDesign(fd_id.to_string()));
        }
        for qa in overrides {
            if !self.qa_types.contains_key(&qa.type_id) {
                return Err(KbError::UnknownQaType(qa.type_id.clone()));
            }
        }
        let fd = self.function_designs.get_mut(fd_id).expect("checked above");
        for qa in overrides {
            fd.expected_qas.insert(qa.type_id.clone(), qa.value);
        }
        Ok(())
    }

    /// Records a fresh QA measurement on the grounding of `objective_id`,
    /// replacing any older sample for the same type.
    pub fn update_measurement(
        &mut self,
        objective_id: &str,
        type_id: &str,
        value: f64,
        t: f64,
    ) -> Result<(), KbError> {
        if !self.qa_types.contains_key(type_id) {
            return Err(KbError::UnknownQaType(type_id.to_string()));
        }
        let g = self
            .groundings
            .get_mut(objective_id)
            .ok_or_else(|| KbError::UngroundedObjective(objective_id.to_string()))?;
        g.measured_qas.insert(type_id.to_string(), (value, t));
        Ok(())
    }

    pub fn set_component_status(
        &mut self,
        objective_id: &str,
        component: &str,
        status: ComponentHealth,
    ) -> Result<(), KbError> {
        let g = self
            .groundings
            .get_mut(objective_id)
            .ok_or_else(|| KbError::UngroundedObjective(objective_id.to_string()))?;
        g.component_status.insert(component.to_string(), status);
        Ok(())
    }

    /// All designs that solve the objective's function, are not
    /// blacklisted, and whose expected QA values satisfy every NFR
    /// (polarity-aware). Sorted by id.
    pub fn feasible_designs(&self, objective_id: &str) -> Result<Vec<String>, KbError> {
        let obj = self
            .objectives
            .get(objective_id)
            .ok_or_else(|| KbError::UnknownObjective(objective_id.to_string()))?;
        let mut out = Vec::new();
        for (id, fd) in &self.function_designs {
            if fd.solves != obj.of_function || fd.blacklisted {
                continue;
            }
            if obj
                .nfrs
                .iter()
                .all(|(type_id, threshold)| self.design_meets_nfr(fd, type_id, *threshold))
            {
                out.push(id.clone());
            }
        }
        Ok(out)
    }

    fn design_meets_nfr(&self, fd: &FunctionDesign, type_id: &str, threshold: f64) -> bool {
        let Some(expected) = fd.expected_qas.get(type_id) else {
            // A design that declares nothing for a required QA cannot
            // demonstrate it satisfies the requirement.
            return false;
        };
        match self.qa_types[type_id].polarity {
            Polarity::HigherIsBetter => *expected >= threshold,
            Polarity::LowerIsBetter => *expected <= threshold,
        }
    }

    /// Binds `objective_id` to `fd_id` with a clean slate: no measurements,
    /// no component status, objective status OK.
    pub fn ground(&mut self, objective_id: &str, fd_id: &str) -> Result<(), KbError> {
        let obj = self
            .objectives
            .get(objective_id)
            .ok_or_else(|| KbError::UnknownObjective(objective_id.to_string()))?;
        let fd = self
            .function_designs
            .get(fd_id)
            .ok_or_else(|| KbError::UnknownDesign(fd_id.to_string()))?;
        if fd.solves != obj.of_function {
            return Err(KbError::DanglingReference(fd_id.to_string()));
        }
        self.groundings.insert(
            objective_id.to_string(),
            FunctionGrounding {
                objective_id: objective_id.to_string(),
                fd_id: fd_id.to_string(),
                measured_qas: BTreeMap::new(),
                component_status: BTreeMap::new(),
            },
        );
        self.objectives.get_mut(objective_id).expect("checked").status = ObjectiveStatus::Ok;
        Ok(())
    }

    pub fn blacklist(&mut self, fd_id: &str) -> Result<(), KbError> {
        let fd = self
            .function_designs
            .get_mut(fd_id)
            .ok_or_else(|| KbError::UnknownDesign(fd_id.to_string()))?;
        fd.blacklisted = true;
        Ok(())
    }

    pub fn set_objective_status(
        &mut self,
        objective_id: &str,
        status: ObjectiveStatus,
    ) -> Result<(), KbError> {
        let obj = self
            .objectives
            .get_mut(objective_id)
            .ok_or_else(|| KbError::UnknownObjective(objective_id.to_string()))?;
        obj.status = status;
        Ok(())
    }

    pub fn qa_type(&self, id: &str) -> Option<&QualityAttributeType> {
        self.qa_types.get(id)
    }

    pub fn function(&self, id: &str) -> Option<&Function> {
        self.functions.get(id)
    }

    pub fn design(&self, id: &str) -> Option<&FunctionDesign> {
        self.function_designs.get(id)
    }

    pub fn objective(&self, id: &str) -> Option<&Objective> {
        self.objectives.get(id)
    }

    pub fn grounding(&self, objective_id: &str) -> Option<&FunctionGrounding> {
        self.groundings.get(objective_id)
    }

    pub fn qa_types(&self) -> impl Iterator<Item = &QualityAttributeType> {
        self.qa_types.values()
    }

    pub fn designs(&self) -> impl Iterator<Item = &FunctionDesign> {
        self.function_designs.values()
    }

    pub fn objectives(&self) -> impl Iterator<Item = &Objective> {
        self.objectives.values()
    }

    pub fn designs_solving<'a>(&'a self, function_id: &'a str) -> impl Iterator<Item = &'a FunctionDesign> {
        self.function_designs
            .values()
            .filter(move |fd| fd.solves == function_id)
    }
}
