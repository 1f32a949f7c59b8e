use evsim_core::process::{
    apply_action, canonical_script, payload_margin, run_sequence, wrap_scenario, Action, ActionError,
};
use evsim_core::{LoadCase, MechanismConfig, MechanismState};
use proptest::prelude::*;

fn action_strategy() -> impl Strategy<Value = Action> {
    prop_oneof![
        (0.0..12_000.0f64).prop_map(Action::Pressurize),
        (0.0..0.6f64).prop_map(Action::Feed),
        (0.0..50.0f64, 0.0..50.0f64).prop_map(|(l, r)| Action::SetBendTension(l, r)),
        (0.0..200.0f64).prop_map(Action::SetJamTension),
        Just(Action::Lock),
        Just(Action::Unlock),
        (0.0..0.2f64, 0.0..0.3f64).prop_map(|(x, m)| Action::ApplyLoad(LoadCase::single(x, m))),
        (0.0..0.6f64).prop_map(Action::Retract),
    ]
}

proptest! {
    #[test]
    fn deployed_length_moves_only_by_half_feed(script in prop::collection::vec(action_strategy(), 0..25)) {
        let config = MechanismConfig::default();
        let mut state = MechanismState::stowed();
        for action in &script {
            let next = match apply_action(&state, action, &config) {
                Ok(o) => o.state,
                Err(_) => continue,
            };
            match action {
                Action::Feed(f) => prop_assert_eq!(next.deployed_length, state.deployed_length + f / 2.0),
                Action::Retract(f) => prop_assert_eq!(next.deployed_length, (state.deployed_length - f / 2.0).max(0.0)),
                _ => prop_assert_eq!(next.deployed_length, state.deployed_length),
            }
            prop_assert!(config.validate_state(&next).is_empty());
            state = next;
        }
    }

    #[test]
    fn sequences_stop_at_the_first_error(script in prop::collection::vec(action_strategy(), 1..12)) {
        let config = MechanismConfig::default();
        match run_sequence(&script, &config) {
            Ok(trace) => prop_assert_eq!(trace.steps.len(), script.len() + 1),
            Err(e) => {
                prop_assert_eq!(e.partial.steps.len(), e.index + 1);
                prop_assert_eq!(e.action, script[e.index].name());
            }
        }
    }

    #[test]
    fn payload_margin_is_linear_in_mass(x in 0.0..1.0f64, m in 0.0..2.0f64, k in 0.0..5.0f64) {
        let a = payload_margin(1.6, &LoadCase::single(x, m));
        let b = payload_margin(1.6, &LoadCase::single(x, k * m));
        prop_assert!((b.required_moment - k * a.required_moment).abs() <= 1e-12 * (1.0 + b.required_moment));
    }

    #[test]
    fn wrap_yaw_decreases_with_radius(r in 0.06..2.0f64, dr in 0.001..1.0f64) {
        let config = MechanismConfig::default();
        let a = wrap_scenario(r, 0.5, &config).unwrap();
        let b = wrap_scenario(r + dr, 0.5, &config).unwrap();
        prop_assert!(a.feasible && b.feasible);
        prop_assert!(b.per_joint_yaw < a.per_joint_yaw);
        prop_assert!(b.required_bend_tension < a.required_bend_tension);
    }
}

#[test]
fn canonical_trace_csv_is_stable() {
    let config = MechanismConfig::default();
    let trace = run_sequence(&canonical_script(&config), &config).unwrap();
    let csv = trace.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "step,action,deployed_m,tip_sag_m,locked");
    assert_eq!(lines.len(), 11);
    assert!(lines[3].starts_with("2,feed,0.97,"));
    assert!(lines[6].starts_with("5,lock,") && lines[6].ends_with(",true"));
    assert!(lines[10].starts_with("9,retract,0,0,"));
    assert_eq!(csv, run_sequence(&canonical_script(&config), &config).unwrap().to_csv());
}

#[test]
fn guard_mutations_fail_at_the_mutated_step() {
    let config = MechanismConfig::default();
    let base = canonical_script(&config);

    let mut unpressurized = base.clone();
    unpressurized[0] = Action::Pressurize(0.0);
    let e = run_sequence(&unpressurized, &config).unwrap_err();
    assert_eq!((e.index, e.error.guard().map(|g| g.as_str())), (1, Some("insufficient pressure")));

    let mut locked_retract = base.clone();
    locked_retract.remove(6);
    let e = run_sequence(&locked_retract, &config).unwrap_err();
    assert_eq!((e.index, e.error.guard().map(|g| g.as_str())), (7, Some("retract while locked")));

    let mut no_jam = base.clone();
    no_jam[3] = Action::SetJamTension(0.0);
    let e = run_sequence(&no_jam, &config).unwrap_err();
    assert_eq!((e.index, e.error.guard().map(|g| g.as_str())), (4, Some("zero jam tension")));
}

#[test]
fn large_imperfection_buckles_on_retraction() {
    let config = MechanismConfig::default();
    let script = canonical_script(&config);
    let trace = run_sequence(&script, &config).unwrap();
    assert!(trace.steps.iter().all(|s| s.summary.tip_sag >= 0.0));
    let mut tight = config.clone();
    tight.solver.imperfection_offset = Some(1.0);
    let e = run_sequence(&script, &tight).unwrap_err();
    assert!(matches!(e.error, ActionError::Buckling(_)));
    assert_eq!(e.index, 8);
}
