//! Acceptance criteria, one pass/fail line each.

use nalgebra::{DMatrix, DVector};
use raftform_core::export::{write_outputs, Format};
use raftform_core::formation::*;
use raftform_core::raft::Role;
use raftform_core::rng::spawn_position;
use raftform_core::scenarios::{build_scenario, run, Overrides, RunRecord, ScenarioSpec};
use raftform_core::{EventKind, NodeId, Term};
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn spec(label: &str, text: &str) -> ScenarioSpec {
    build_scenario(label, &Overrides::parse(text).unwrap()).unwrap()
}

fn run_ok(s: &ScenarioSpec) -> Result<RunRecord, String> {
    run(s).map_err(|e| format!("{} failed to run: {e}", s.label))
}

/// Regular n-gon on the unit circle around the origin, vertex 0 at angle 0.
fn ngon(n: usize) -> Vec<Vec2> {
    (0..n)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            Vec2::new(a.cos(), a.sin())
        })
        .collect()
}

fn within(p: Vec2, q: Vec2, tol: f64) -> bool {
    (p.x - q.x).abs() < tol && (p.y - q.y).abs() < tol
}

fn controller_convergence() -> Outcome {
    let started = Instant::now();
    let n = 5;
    let g = FormationGraph::complete(n).unwrap();
    let config = ControllerConfig::new(1.0, 0.05).unwrap();
    let goals = ngon(n);
    let start: Vec<Vec2> = (0..n as u64).map(|i| spawn_position(42, NodeId(i))).collect();
    check(start.iter().all(|p| p.x.abs() <= 2.0 && p.y.abs() <= 2.0), "init outside [-2,2]^2")?;

    let rows = g.laplacian().to_rows();
    let l = DMatrix::from_fn(n, n, |i, j| rows[i][j]).kronecker(&DMatrix::<f64>::identity(2, 2));
    let flat = |v: &[Vec2]| DVector::from_iterator(2 * n, v.iter().flat_map(|p| [p.x, p.y]));
    let target = flat(&goals);
    let mut oracle = flat(&start);

    let mut x = start;
    let mut e_prev = global_error(&formation_errors(&x, &goals, &g).unwrap());
    let mut worst: f64 = 0.0;
    for frame in 1..=1000 {
        oracle += (&l * (&oracle - &target)) * (-config.gain * config.dt);
        x = formation_step(&LaplacianLaw, &x, &goals, &g, &config).unwrap();
        for (i, p) in x.iter().enumerate() {
            worst = worst.max((p.x - oracle[2 * i]).abs()).max((p.y - oracle[2 * i + 1]).abs());
        }
        let e = global_error(&formation_errors(&x, &goals, &g).unwrap());
        check(e <= e_prev + 1e-12, format!("E rose at frame {frame}: {e_prev} -> {e}"))?;
        e_prev = e;
    }
    let elapsed = started.elapsed();
    check(worst < 1e-9, format!("oracle deviation {worst:e}"))?;
    check(e_prev < 1e-8, format!("E(1000) = {e_prev:e}"))?;
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("E(1000) = {e_prev:.3e}, oracle deviation {worst:.1e}, {elapsed:.2?}"))
}

/// Pairwise prefix agreement of committed logs, and one leader per term.
fn independent_safety(record: &RunRecord) -> Result<(), String> {
    let mut leaders: BTreeMap<Term, NodeId> = BTreeMap::new();
    for e in record.events.iter().filter(|e| e.kind == EventKind::Leader) {
        let first = *leaders.entry(e.term).or_insert(e.node);
        check(first == e.node, format!("two leaders in {}", e.term))?;
    }
    let live: Vec<_> = record.nodes.iter().filter(|n| n.running).collect();
    for a in &live {
        for b in &live {
            let k = a.commit_index.min(b.commit_index) as usize;
            check(a.log[..k] == b.log[..k], format!("committed logs of {} and {} differ", a.node, b.node))?;
        }
    }
    Ok(())
}

fn raft_safety() -> Outcome {
    let started = Instant::now();
    let mut runs = 0;
    for label in ["F", "stress"] {
        for seed in 0..100 {
            let record = run_ok(&spec(label, &format!("seed = {seed}")))?;
            check(record.violations.is_empty(), format!("{label} seed {seed}: {:?}", record.violations))?;
            independent_safety(&record).map_err(|e| format!("{label} seed {seed}: {e}"))?;
            runs += 1;
        }
    }
    let elapsed = started.elapsed();
    check(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!("{runs} runs, zero violations, {elapsed:.2?}"))
}

fn scenario_a() -> Outcome {
    let record = run_ok(&spec("A", "frames = 60"))?;
    let changes: Vec<(u64, NodeId)> = record
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Leader && e.frame > 0)
        .map(|e| (e.frame, e.node))
        .collect();
    check(changes.iter().map(|c| c.0).collect::<Vec<_>>() == [20, 35], format!("leader changes {changes:?}"))?;
    let failed = changes[0].1;
    check(changes[1].1 == NodeId(failed.0 + 1), format!("successor of {failed} was {}", changes[1].1))?;
    let at = |f: usize| record.frames[f].positions[&failed];
    check(at(36) != at(35) && at(59) != at(36), "failed agent stopped moving")?;
    let last = record.frames.last().unwrap();
    let worst = last.errors.values().copied().fold(0.0, f64::max);
    check(last.errors.len() == 5 && worst < 1e-3, format!("final per-agent error {worst:e}"))?;
    Ok(format!("changes at 20 and 35, successor {}, max error {worst:.1e}", changes[1].1))
}

fn scenario_b() -> Outcome {
    let record = run_ok(&spec("B", ""))?;
    let frozen = record.frames[35].positions[&NodeId(1)];
    for f in &record.frames[35..] {
        let p = f.positions[&NodeId(1)];
        check(p.x.to_bits() == frozen.x.to_bits() && p.y.to_bits() == frozen.y.to_bits(), format!("agent 1 moved at {}", f.frame))?;
    }
    let goals = ngon(5);
    let last = &record.final_positions;
    for id in [0, 2, 3, 4] {
        let p = last[&NodeId(id)];
        check(p.distance(goals[id as usize]) < 1e-3, format!("agent {id} at {p}"))?;
    }
    Ok(format!("agent 1 frozen at {frozen} for {} frames, others on the 5-gon", record.frames.len() - 35))
}

fn scenario_c() -> Outcome {
    let record = run_ok(&spec("C", "n = 6\nm = 2\nfailure_frame = 30\nframes = 1500"))?;
    let square = ngon(4);
    for (rank, id) in [0u64, 3, 4, 5].into_iter().enumerate() {
        let p = record.final_positions[&NodeId(id)];
        check(within(p, square[rank], 1e-3), format!("agent {id} at {p}, goal {}", square[rank]))?;
    }
    Ok("agents 0, 3, 4, 5 on the 4-gon by frame 1500".into())
}

fn scenario_f() -> Outcome {
    let s = spec("F", "");
    let record = run_ok(&s)?;
    let max = s.timers.election_timeout_max;
    let detected = record
        .events
        .iter()
        .find(|e| e.kind == EventKind::Failure && e.node == NodeId(1) && e.frame >= 10 && e.frame <= 10 + max)
        .ok_or("no failure event within the timeout window")?;
    let before = record
        .events
        .iter()
        .rev()
        .find(|e| e.kind == EventKind::Leader && e.frame < 10)
        .ok_or("no leader before the failure")?;
    let after = record
        .events
        .iter()
        .find(|e| e.kind == EventKind::Leader && e.frame > 10 && e.term > before.term)
        .ok_or("no leader in a higher term")?;
    check(after.node != NodeId(1), "crashed node cannot lead")?;
    let node = record.node(NodeId(1)).ok_or("node 1 missing")?;
    check(node.running && node.role == Some(Role::Follower), format!("node 1 ended as {:?}", node.role))?;
    let leader = record.nodes.iter().find(|n| n.running && n.role == Some(Role::Leader)).ok_or("no final leader")?;
    check(leader.log.starts_with(&node.log), "node 1 log is not a prefix of the leader's")?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_outputs(&record, dir.path(), Format::Csv, false, false).map_err(|e| e.to_string())?;
    let events = std::fs::read_to_string(dir.path().join("events.csv")).map_err(|e| e.to_string())?;
    check(events.starts_with("type,node,term,frame\n"), "events header")?;
    Ok(format!(
        "failure seen at {}, leader {} in {} after {} in {}, node 1 follower",
        detected.frame, after.node, after.term, before.node, before.term
    ))
}

fn scenario_g() -> Outcome {
    let record = run_ok(&spec("G", "n = 4\nframes = 2000"))?;
    check(record.violations.is_empty(), format!("{:?}", record.violations))?;
    check(record.frames[49].quorum == Some(3), "quorum before the join")?;
    let leader = record.nodes.iter().find(|n| n.running && n.role == Some(Role::Leader)).ok_or("no final leader")?;
    check(leader.members.len() == 5, format!("leader config {:?}", leader.members))?;
    let committed = leader.log[..leader.commit_index as usize]
        .iter()
        .any(|e| e.command == raftform_core::raft::Command::AddMember(NodeId(4)));
    check(committed, "config entry not committed")?;
    check(record.frames.last().unwrap().quorum == Some(3), "quorum after the join")?;
    let goals = ngon(5);
    for id in 0..5u64 {
        let p = record.final_positions[&NodeId(id)];
        check(p.distance(goals[id as usize]) < 1e-3, format!("agent {id} at {p}"))?;
    }
    Ok("3-of-5 quorum after the config entry, 5 agents on the 5-gon".into())
}

fn csv_bytes(record: &RunRecord) -> Result<Vec<Vec<u8>>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_outputs(record, dir.path(), Format::Csv, false, false).map_err(|e| e.to_string())?;
    ["trajectories.csv", "errors.csv", "global.csv", "events.csv"]
        .iter()
        .map(|f| std::fs::read(dir.path().join(f)).map_err(|e| e.to_string()))
        .collect()
}

fn determinism() -> Outcome {
    for label in ["A", "B", "C", "D", "E", "F", "G", "stress"] {
        let s = spec(label, "seed = 1234");
        let first = csv_bytes(&run_ok(&s)?)?;
        let second = csv_bytes(&run_ok(&s)?)?;
        check(first == second, format!("{label} output differs between runs"))?;
    }
    Ok("identical CSV bytes for A-G and stress".into())
}

fn liveness() -> Outcome {
    let timers = spec("D", "").timers;
    let bound = timers.election_timeout_max + timers.heartbeat_interval;
    let mut worst = 0;
    for seed in 0..100u64 {
        let crash = 60 + seed % 40;
        let base = format!("seed = {seed}\nframes = {}", crash + 60);
        let probe = run_ok(&spec("D", &base))?;
        let leader = probe.frames[crash as usize - 1].leader.ok_or(format!("seed {seed}: no leader before the crash"))?;
        let record = run_ok(&spec("D", &format!("{base}\ncrash {} {crash}", leader.0)))?;
        let elected = record
            .events
            .iter()
            .find(|e| e.kind == EventKind::Leader && e.frame >= crash)
            .ok_or(format!("seed {seed}: no leader after crashing {leader} at {crash}"))?;
        let delay = elected.frame - crash;
        check(delay <= bound, format!("seed {seed}: re-election took {delay} > {bound}"))?;
        worst = worst.max(delay);
    }
    Ok(format!("worst re-election {worst} frames (bound {bound}) over 100 seeds"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("controller convergence", controller_convergence),
        ("raft safety suite", raft_safety),
        ("rotation pattern", scenario_a),
        ("frozen agent exactness", scenario_b),
        ("shrunk formation", scenario_c),
        ("crash and recovery lifecycle", scenario_f),
        ("runtime join", scenario_g),
        ("determinism", determinism),
        ("liveness", liveness),
    ];
    let mut failed = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        match criterion() {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
