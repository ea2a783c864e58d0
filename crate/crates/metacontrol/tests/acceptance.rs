//! End-to-end acceptance gate. Each test prints one PASS line on success;
//! a failing assertion marks the criterion failed.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use metacontrol::case_study::{
    case_study_config, case_study_designs, ACC_LIM_GRID, MAX_VEL_GRID, OBJECTIVE_NAVIGATE,
    PINNED_DESIGN_ID, PINNED_QA_ENERGY, PINNED_QA_SAFETY, QA_ENERGY, QA_SAFETY,
    SAFETY_MARGIN_GRID,
};
use metacontrol::diagnostics::energy_attr;
use metacontrol::harness::{compare, run_mission, Mode};
use metacontrol::kb::{
    Function, FunctionDesign, KbEntity, KnowledgeBase, Objective, ObjectiveStatus, Polarity,
    QualityAttributeType,
};
use metacontrol::model::{
    load_model, parse_model, serialize_metacontrol_config, serialize_model, Cmp, Decl,
    Declaration, ModelDocument,
};
use metacontrol::navsim::{MissionSpec, NavParams, NavSim, COMPONENT_MOVE_BASE};
use metacontrol::reasoner::plan;
use metacontrol::Bus;

fn case_study_sources() -> (String, String) {
    (
        serialize_model(&case_study_designs()),
        serialize_metacontrol_config(&case_study_config()),
    )
}

#[test]
fn criterion_1_energy_formula_exactness() {
    let started = Instant::now();
    assert_eq!(energy_attr(0.2), 0.0);
    assert_eq!(energy_attr(5.0), 1.0);
    for i in 0..1000 {
        let p = 0.2 + (5.0 - 0.2) * (i as f64 / 999.0);
        let reference = (p - 0.2) / (5.0 - 0.2);
        assert!(
            (energy_attr(p) - reference).abs() <= 1e-12,
            "p={p}: {} vs {reference}",
            energy_attr(p)
        );
    }
    assert!(started.elapsed().as_secs_f64() < 1.0);
    println!("criterion 1 (energy formula exactness): PASS");
}

#[test]
fn criterion_2_case_study_model() {
    let doc = case_study_designs();
    let designs: Vec<_> = doc
        .declarations
        .iter()
        .filter_map(|d| match &d.decl {
            Decl::Design { id, solves, qas, .. } => Some((id, solves, qas)),
            _ => None,
        })
        .collect();
    assert_eq!(designs.len(), 27);
    assert!(designs.iter().all(|(_, solves, _)| solves.as_str() == "f_navigate"));

    let (_, _, pinned_qas) = designs
        .iter()
        .find(|(id, _, _)| id.as_str() == PINNED_DESIGN_ID)
        .expect("pinned design present");
    let qas: BTreeMap<_, _> = pinned_qas.iter().cloned().collect();
    assert_eq!(qas[QA_SAFETY], PINNED_QA_SAFETY);
    assert_eq!(qas[QA_ENERGY], PINNED_QA_ENERGY);

    let config = case_study_config();
    let pinned_cfg = &config.configurations[PINNED_DESIGN_ID];
    assert_eq!(pinned_cfg.params["max_vel"], 0.3);
    assert_eq!(pinned_cfg.params["acc_lim"], 3.6);

    // The emitted file parses and loads with zero errors.
    let src = serialize_model(&doc);
    let reparsed = parse_model(&src).expect("case-study model parses");
    let mut kb = KnowledgeBase::new();
    load_model(&reparsed, &mut kb).expect("case-study model loads");
    assert_eq!(kb.designs().count(), 27);
    println!("criterion 2 (case-study model, 27 designs, pinned variant): PASS");
}

/// Brute-force planner oracle: feasibility filter + argmax margin sum +
/// smallest-id tie-break, written against plain data, independent of the
/// KB's query helpers.
struct OracleKb {
    qa_polarity: BTreeMap<String, Polarity>,
    designs: Vec<(String, BTreeMap<String, f64>, bool)>, // (id, expected, blacklisted)
    nfrs: BTreeMap<String, f64>,
}

fn oracle_plan(o: &OracleKb) -> Option<(String, f64)> {
    let mut best: Option<(String, f64)> = None;
    for (id, expected, blacklisted) in &o.designs {
        if *blacklisted {
            continue;
        }
        let feasible = o.nfrs.iter().all(|(qa, thr)| match expected.get(qa) {
            None => false,
            Some(v) => match o.qa_polarity[qa] {
                Polarity::HigherIsBetter => *v >= *thr,
                Polarity::LowerIsBetter => *v <= *thr,
            },
        });
        if !feasible {
            continue;
        }
        let utility: f64 = o
            .nfrs
            .iter()
            .map(|(qa, thr)| {
                let v = expected.get(qa).copied().unwrap_or(*thr);
                match o.qa_polarity[qa] {
                    Polarity::HigherIsBetter => v - thr,
                    Polarity::LowerIsBetter => thr - v,
                }
            })
            .sum();
        let better = match &best {
            None => true,
            Some((bid, bu)) => utility > *bu || (utility == *bu && id < bid),
        };
        if better {
            best = Some((id.clone(), utility));
        }
    }
    best
}

#[test]
fn criterion_3_planner_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    for case in 0..1000 {
        let n_qas = rng.gen_range(1..=3usize);
        let qa_ids: Vec<String> = (0..n_qas).map(|i| format!("qa{i}")).collect();
        let polarities: Vec<Polarity> = (0..n_qas)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    Polarity::HigherIsBetter
                } else {
                    Polarity::LowerIsBetter
                }
            })
            .collect();

        let n_designs = rng.gen_range(0..=27usize);
        let mut designs: Vec<(String, BTreeMap<String, f64>, bool)> = Vec::new();
        for i in 0..n_designs {
            let mut expected = BTreeMap::new();
            for qa in &qa_ids {
                if rng.gen_bool(0.85) {
                    expected.insert(qa.clone(), rng.gen_range(0.0..1.0));
                }
            }
            designs.push((format!("fd{i:02}"), expected, rng.gen_bool(0.2)));
        }

        let mut nfrs: BTreeMap<String, f64> = BTreeMap::new();
        for qa in &qa_ids {
            if rng.gen_bool(0.8) {
                nfrs.insert(qa.clone(), rng.gen_range(0.0..1.0));
            }
        }

        let mut kb = KnowledgeBase::new();
        for (qa, pol) in qa_ids.iter().zip(&polarities) {
            kb.insert(KbEntity::QaType(QualityAttributeType {
                id: qa.clone(),
                polarity: *pol,
                description: String::new(),
            }))
            .unwrap();
        }
        kb.insert(KbEntity::Function(Function { id: "f".into(), description: String::new() }))
            .unwrap();
        for (id, expected, blacklisted) in &designs {
            kb.insert(KbEntity::FunctionDesign(FunctionDesign {
                id: id.clone(),
                solves: "f".into(),
                expected_qas: expected.clone(),
                config_ref: id.clone(),
                blacklisted: false,
            }))
            .unwrap();
            if *blacklisted {
                kb.blacklist(id).unwrap();
            }
        }
        kb.insert(KbEntity::Objective(Objective {
            id: "o".into(),
            of_function: "f".into(),
            nfrs: nfrs.clone(),
            status: ObjectiveStatus::Ungrounded,
        }))
        .unwrap();

        let oracle = oracle_plan(&OracleKb {
            qa_polarity: qa_ids.iter().cloned().zip(polarities.iter().copied()).collect(),
            designs,
            nfrs,
        });
        match (plan(&kb, "o"), oracle) {
            (Ok((req, u)), Some((oid, ou))) => {
                assert_eq!(req.to_fd, oid, "case {case}");
                assert_eq!(u, ou, "case {case}");
            }
            (Err(_), None) => {}
            (got, want) => panic!("case {case}: plan={got:?} oracle={want:?}"),
        }
    }
    assert!(started.elapsed().as_secs_f64() < 30.0);
    println!("criterion 3 (planner oracle equivalence, 1000 random KBs): PASS");
}

#[test]
fn criterion_4_directional_comparison() {
    let started = Instant::now();
    let (model, config) = case_study_sources();
    let seeds: Vec<u64> = (0..50).collect();
    let result = compare(&model, &config, &seeds, PINNED_DESIGN_ID, MissionSpec::default())
        .expect("comparison runs");
    assert!(
        result.adaptive.safety_violation_frac < result.static_.safety_violation_frac,
        "safety: adaptive {} vs static {}",
        result.adaptive.safety_violation_frac,
        result.static_.safety_violation_frac
    );
    assert!(
        result.adaptive.energy_violation_frac < result.static_.energy_violation_frac,
        "energy: adaptive {} vs static {}",
        result.adaptive.energy_violation_frac,
        result.static_.energy_violation_frac
    );
    assert!(result.adaptive.success_rate >= result.static_.success_rate);
    assert!(started.elapsed().as_secs_f64() < 300.0);
    println!("criterion 4 (directional 50-seed comparison): PASS");
}

#[test]
fn criterion_5_no_trigger_inertness() {
    let (model, config) = case_study_sources();
    let spec = MissionSpec { obstacle_rate: 0.0, seed: 7, ..MissionSpec::default() };
    let adaptive = run_mission(&model, &config, spec, &Mode::Adaptive, &[]).unwrap();
    let static_ = run_mission(
        &model,
        &config,
        spec,
        &Mode::Static(adaptive.initial_fd.clone()),
        &[],
    )
    .unwrap();
    assert_eq!(adaptive.trace_csv, static_.trace_csv);
    assert_eq!(adaptive.metrics.adaptations, 0);
    assert_eq!(static_.metrics.adaptations, 0);
    assert!(adaptive.reconfig_log.is_empty());
    println!("criterion 5 (no-trigger inertness, byte-identical traces): PASS");
}

#[test]
fn criterion_6_component_failure_pathway() {
    let (model, config) = case_study_sources();
    let spec = MissionSpec { seed: 11, ..MissionSpec::default() };
    let faults = [(COMPONENT_MOVE_BASE.to_string(), 5.0)];
    let artifacts = run_mission(&model, &config, spec, &Mode::Adaptive, &faults).unwrap();

    let component_error_lines: Vec<&str> = artifacts
        .decision_log
        .lines()
        .filter(|l| l.contains("reason=COMPONENT_ERROR"))
        .collect();
    assert!(!component_error_lines.is_empty(), "log:\n{}", artifacts.decision_log);

    // The design that was active when the component failed never reappears
    // as an adaptation target.
    let failed_fd = component_error_lines[0]
        .split_whitespace()
        .find_map(|f| f.strip_prefix("from="))
        .unwrap()
        .to_string();
    let reappears = artifacts
        .decision_log
        .lines()
        .skip_while(|l| !l.contains("reason=COMPONENT_ERROR"))
        .any(|l| l.split_whitespace().any(|f| f == format!("to={failed_fd}")));
    assert!(!reappears, "blacklisted {failed_fd} reselected:\n{}", artifacts.decision_log);

    // Goal preservation: the reconfiguration reissued the saved goal and
    // the mission still terminates at the original goal.
    assert!(artifacts.reconfig_log.lines().any(|l| l.contains("goal_reissued=true")));
    assert!(artifacts.metrics.adaptations >= 1);
    assert!(
        artifacts.metrics.success,
        "mission should still reach the original goal, got {:?}",
        artifacts.status
    );
    println!("criterion 6 (component-failure pathway): PASS");
}

#[test]
fn criterion_7_determinism() {
    let (model, config) = case_study_sources();
    let spec = MissionSpec { seed: 42, ..MissionSpec::default() };
    let a = run_mission(&model, &config, spec, &Mode::Adaptive, &[]).unwrap();
    let b = run_mission(&model, &config, spec, &Mode::Adaptive, &[]).unwrap();
    assert_eq!(a.trace_csv, b.trace_csv);
    assert_eq!(a.diagnostics_csv, b.diagnostics_csv);
    assert_eq!(a.decision_log, b.decision_log);

    let seeds: Vec<u64> = (0..5).collect();
    let c1 = compare(&model, &config, &seeds, PINNED_DESIGN_ID, MissionSpec::default()).unwrap();
    let c2 = compare(&model, &config, &seeds, PINNED_DESIGN_ID, MissionSpec::default()).unwrap();
    assert_eq!(c1.csv, c2.csv);
    println!("criterion 7 (determinism): PASS");
}

fn random_document(rng: &mut ChaCha8Rng) -> ModelDocument {
    let mut declarations = Vec::new();
    let n_qas = rng.gen_range(1..=3usize);
    for i in 0..n_qas {
        declarations.push(Declaration {
            decl: Decl::QaType {
                id: format!("q{i}"),
                polarity: if rng.gen_bool(0.5) {
                    Polarity::HigherIsBetter
                } else {
                    Polarity::LowerIsBetter
                },
            },
            line: 0,
        });
    }
    declarations.push(Declaration { decl: Decl::Function { id: "f0".into() }, line: 0 });
    for i in 0..rng.gen_range(0..=8usize) {
        let mut qas = Vec::new();
        for q in 0..n_qas {
            if rng.gen_bool(0.7) {
                qas.push((format!("q{q}"), rng.gen::<f64>()));
            }
        }
        declarations.push(Declaration {
            decl: Decl::Design {
                id: format!("d{i}"),
                solves: "f0".into(),
                qas,
                config_ref: format!("cfg_{i}"),
            },
            line: 0,
        });
    }
    for i in 0..rng.gen_range(0..=2usize) {
        let mut nfrs = Vec::new();
        for q in 0..n_qas {
            if rng.gen_bool(0.7) {
                let cmp = if rng.gen_bool(0.5) { Cmp::Ge } else { Cmp::Le };
                nfrs.push((format!("q{q}"), cmp, rng.gen::<f64>()));
            }
        }
        declarations.push(Declaration {
            decl: Decl::Objective { id: format!("o{i}"), of_function: "f0".into(), nfrs },
            line: 0,
        });
    }
    ModelDocument { declarations }
}

#[test]
fn criterion_8_parser_robustness() {
    // Round-trip fixpoint over generated documents.
    let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
    for _ in 0..500 {
        let doc = random_document(&mut rng);
        let text = serialize_model(&doc);
        let reparsed = parse_model(&text).expect("generated document parses");
        assert_eq!(reparsed.declarations, doc.declarations);
        assert_eq!(serialize_model(&reparsed), text);
    }

    // Single-character mutations: still parses, or the error points at the
    // mutated line.
    let base = "\
qa_type safety higher_is_better
qa_type energy lower_is_better
function f_navigate
design fd_a solves f_navigate {
  qa safety = 0.7
  qa energy = 0.33
  config \"cfg_a\"
}
design fd_b solves f_navigate {
  qa safety = 0.5
  config \"cfg_b\"
}
objective o_nav of f_navigate {
  require safety >= 0.25
  require energy <= 0.2
}
";
    parse_model(base).expect("base document parses");
    // `#` and `}` are excluded: a comment marker deletes the rest of the
    // line and a brace closes the enclosing block early, so either rewrites
    // the block structure and the orphaned remainder can only be reported
    // where it sits — the same category as mutating a newline.
    let substitutions = [' ', '"', '{', '=', 'x', '9', '.'];
    let bytes = base.as_bytes();
    for pos in 0..bytes.len() {
        // Mutating a newline rewrites the line structure itself, so "the
        // mutated line" stops being well-defined; every other position must
        // report locally.
        if bytes[pos] == b'\n' {
            continue;
        }
        let mutated_line = 1 + base[..pos].bytes().filter(|b| *b == b'\n').count();
        for sub in substitutions {
            if bytes[pos] as char == sub {
                continue;
            }
            let mut mutant = base.to_string();
            mutant.replace_range(pos..pos + 1, &sub.to_string());
            if let Err(err) = parse_model(&mutant) {
                assert_eq!(
                    err.line, mutated_line,
                    "mutation at byte {pos} (line {mutated_line}, `{}` -> `{sub}`) \
                     reported at line {}: {err}",
                    bytes[pos] as char, err.line
                );
            }
        }
    }
    println!("criterion 8 (parser round-trip + mutation line-locality): PASS");
}

#[test]
fn criterion_9_simulator_invariants() {
    let params = NavParams::default();
    for seed in 0..100u64 {
        let spec = MissionSpec { seed, ..MissionSpec::default() };
        let mut sim = NavSim::new(spec, params);
        let mut bus = Bus::new();
        let mut prev_v = 0.0;
        let mut drained = 0.0;
        let b0 = sim.world.battery;
        let steps = (spec.duration_limit_s / spec.dt) as u64;
        for _ in 0..steps {
            sim.step(&mut bus);
            let w = &sim.world;
            assert!(w.v.abs() <= params.max_vel + 1e-9, "seed {seed}: v={}", w.v);
            assert!(
                ((w.v - prev_v) / spec.dt).abs() <= params.acc_lim + 1e-9,
                "seed {seed}: dv/dt"
            );
            assert!(
                (0.2..=5.0 + 1e-12).contains(&w.power_load),
                "seed {seed}: power_load={}",
                w.power_load
            );
            drained += metacontrol::navsim::K_BATT_PER_UNIT_LOAD_S * w.power_load * spec.dt;
            assert!((b0 - w.battery - drained).abs() < 1e-9, "seed {seed}: battery");
            prev_v = w.v;
        }
    }
    println!("criterion 9 (simulator invariants over 100 seeds): PASS");
}

// The grid helpers stay honest: the pinned design id really encodes its
// reference parameter values.
#[test]
fn grid_constants_cover_pinned_design() {
    assert!(MAX_VEL_GRID.contains(&0.3));
    assert!(ACC_LIM_GRID.contains(&3.6));
    assert!(SAFETY_MARGIN_GRID.contains(&0.6));
    assert_eq!(OBJECTIVE_NAVIGATE, "o_navigate");
}
