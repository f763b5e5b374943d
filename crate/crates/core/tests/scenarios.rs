use raftform_core::raft::Role;
use raftform_core::scenarios::*;
use raftform_core::{EventKind, NodeId, Term, Vec2};

fn spec(label: &str, text: &str) -> ScenarioSpec {
    build_scenario(label, &Overrides::parse(text).unwrap()).unwrap()
}

#[test]
fn single_agent_elects_itself_and_converges() {
    let record = run(&spec("E", "n = 1\nframes = 200")).unwrap();
    assert!(record.violations.is_empty());
    let last = record.frames.last().unwrap();
    assert_eq!(last.leader, Some(NodeId(0)));
    assert!(last.positions[&NodeId(0)].distance(Vec2::new(1.0, 0.0)) < 1e-6);
    assert!(last.global_error < 1e-12);
}

#[test]
fn reruns_are_identical() {
    for label in ["A", "B", "D", "F", "stress"] {
        let s = spec(label, "seed = 17");
        assert_eq!(run(&s).unwrap(), run(&s).unwrap(), "{label}");
    }
}

#[test]
fn seeds_change_the_run() {
    let a = run(&spec("D", "seed = 1\nframes = 50")).unwrap();
    let b = run(&spec("D", "seed = 2\nframes = 50")).unwrap();
    assert_ne!(a.frames, b.frames);
}

#[test]
fn every_scenario_is_safe_across_seeds() {
    for label in ["A", "B", "C", "D", "E", "F", "G"] {
        for seed in 0..100 {
            let record = run(&spec(label, &format!("seed = {seed}"))).unwrap();
            assert!(record.violations.is_empty(), "{label} seed {seed}: {:?}", record.violations);
            let summary = summarize(&record);
            assert!(summary.leaders_per_term.values().all(|&c| c == 1), "{label} seed {seed}");
        }
    }
}

#[test]
fn crash_recovery_run_reports_failure_and_new_leader() {
    let record = run(&spec("F", "")).unwrap();
    let count = |kind: EventKind| record.events.iter().filter(|e| e.kind == kind).count();
    assert_eq!(count(EventKind::SimulateFailure), 1);
    assert_eq!(count(EventKind::SimulateRecovery), 1);
    let crash_term = record.events.iter().find(|e| e.kind == EventKind::SimulateFailure).unwrap().term;
    assert!(record.events.iter().any(|e| e.kind == EventKind::Leader && e.term > crash_term && e.frame > 10));
    let node = record.node(NodeId(1)).unwrap();
    assert!(node.running);
    assert_eq!(node.role, Some(Role::Follower));
    let summary = summarize(&record);
    assert!(summary.is_safe());
    assert!(summary.detection_latencies.iter().any(|&(n, f, d)| n == NodeId(1) && f == 10 && d.is_some()));
}

#[test]
fn rotation_run_changes_leader_on_schedule() {
    let record = run(&spec("A", "")).unwrap();
    let leaders: Vec<(u64, u64)> =
        record.events.iter().filter(|e| e.kind == EventKind::Leader).map(|e| (e.frame, e.node.0)).collect();
    assert_eq!(leaders, vec![(0, 0), (20, 1), (35, 2)]);
    let terms: Vec<Term> = record.events.iter().filter(|e| e.kind == EventKind::Leader).map(|e| e.term).collect();
    assert!(terms.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn frozen_agent_holds_still() {
    let record = run(&spec("B", "")).unwrap();
    let at = |f: usize| record.frames[f].positions[&NodeId(1)];
    for f in 35..record.frames.len() {
        assert_eq!(at(f), at(35));
    }
    assert!(record.frames[20].steered.contains(&NodeId(1)));
    assert!(!record.frames[40].steered.contains(&NodeId(1)));
}

#[test]
fn join_grows_the_quorum() {
    let record = run(&spec("G", "frames = 600")).unwrap();
    assert!(record.violations.is_empty());
    assert_eq!(record.frames[40].quorum, Some(3));
    assert_eq!(record.frames.last().unwrap().quorum, Some(3));
    let last = record.frames.last().unwrap();
    assert_eq!(last.positions.len(), 5);
    assert_eq!(record.node(NodeId(4)).unwrap().members.len(), 5);
}

#[test]
fn stress_run_heals_and_converges() {
    for seed in 0..20 {
        let record = run(&spec("stress", &format!("seed = {seed}"))).unwrap();
        assert!(record.violations.is_empty(), "seed {seed}");
        assert!(record.nodes.iter().all(|n| n.running), "seed {seed}");
        assert!(record.frames.last().unwrap().global_error < 1e-3, "seed {seed}");
    }
}

#[test]
fn override_errors_are_reported() {
    assert!(matches!(Overrides::parse("frames = x"), Err(ScenarioError::Config { line: 1, .. })));
    assert!(matches!(build_scenario("Z", &Overrides::default()), Err(ScenarioError::UnknownScenario(_))));
    let unstable = spec("D", "dt = 5");
    assert!(run(&unstable).is_err());
}

#[test]
fn registry_lists_every_label() {
    let labels: Vec<&str> = ScenarioRegistry::default().labels().collect();
    for label in ["A", "B", "C", "D", "E", "F", "G", "stress"] {
        assert!(labels.contains(&label), "{label}");
    }
}
