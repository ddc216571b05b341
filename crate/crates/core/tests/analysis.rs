mod common;

use common::world;
use proptest::prelude::*;
use std::collections::BTreeMap;
use std::sync::OnceLock;
use wayfind_core::agents::{generate_cohort, run_session, PolicyKind, PolicySpec, DEFAULT_MAX_SESSION_MS};
use wayfind_core::analysis::{
    choice_tally, classify_strategy, cohort_time_stats, gaze_heatmap, gaze_target_tally, mean_sd, speed_stats,
    split_by_assignment, time_spent, AssignmentSplit, Strategy, StrategyThresholds,
};
use wayfind_core::building::{PlacedPose, WalkableKind};
use wayfind_core::error::AnalysisError;
use wayfind_core::geometry::{centroid, Vec2, Vec3};
use wayfind_core::sim::{InputFrame, SessionEvent, World};
use wayfind_core::telemetry::{SessionLog, SessionRun, TelemetrySample};

/// Two sessions of every policy, shared across tests.
fn cohort() -> &'static Vec<(PolicyKind, SessionLog)> {
    static C: OnceLock<Vec<(PolicyKind, SessionLog)>> = OnceLock::new();
    C.get_or_init(|| {
        generate_cohort(&world(), 8, &PolicyKind::ALL, 17, 30.0)
            .unwrap()
            .into_iter()
            .map(|(p, r)| (p.kind, r.log))
            .collect()
    })
}

fn sample_at(t_ms: u64, x: f64, y: f64, z: f64, assignment: u8) -> TelemetrySample {
    TelemetrySample {
        t_ms,
        pos: Vec3::new(x, y, z),
        yaw_deg: 0.0,
        pitch_deg: 0.0,
        roll_deg: 0.0,
        gaze: None,
        gaze_target: "none".into(),
        assignment,
        event: String::new(),
    }
}

fn ev(t_ms: u64, event: &str, detail: &str) -> SessionEvent {
    SessionEvent { t_ms, event: event.into(), detail: detail.into() }
}

#[test]
fn complete_log_has_four_contiguous_splits() {
    for (kind, log) in cohort() {
        let splits = split_by_assignment(log).unwrap();
        assert_eq!(splits.len(), 4, "{kind}");
        assert!(splits.iter().all(|s| s.complete));
        assert_eq!(splits.iter().map(|s| s.assignment).collect::<Vec<_>>(), [1, 2, 3, 4]);
        // Each later split begins at the sample stamped with its start event.
        for s in &splits[1..] {
            assert_eq!(log.samples[s.samples.start].t_ms, s.start_ms);
        }
        for s in &splits[..3] {
            let next_start = log.events.iter().find(|e| e.event == "assignment_start" && e.detail == (s.assignment + 1).to_string());
            assert_eq!(next_start.unwrap().t_ms, s.end_ms);
        }
        assert_eq!(splits[0].samples.start, 0);
        assert_eq!(splits[3].samples.end, log.samples.len());
        assert!(splits.windows(2).all(|w| w[0].samples.end == w[1].samples.start));
    }
}

#[test]
fn truncated_log_leaves_assignment_three_open() {
    let (_, log) = &cohort()[1];
    let start3 = log.events.iter().find(|e| e.event == "assignment_start" && e.detail == "3").unwrap().t_ms;
    let cut = start3 + 5000;
    let truncated = SessionLog {
        participant_id: log.participant_id.clone(),
        samples: log.samples.iter().filter(|s| s.t_ms <= cut).cloned().collect(),
        events: log.events.iter().filter(|e| e.t_ms <= cut).cloned().collect(),
    };
    let splits = split_by_assignment(&truncated).unwrap();
    assert_eq!(splits.len(), 3);
    assert!(splits[0].complete && splits[1].complete && !splits[2].complete);
    assert_eq!(time_spent(&splits).len(), 2);
}

#[test]
fn unmatched_events_are_an_error() {
    let mut log = SessionLog::new("bad");
    log.samples = vec![sample_at(0, 0.0, 0.0, 1370.0, 1)];
    log.events = vec![ev(0, "assignment_complete", "1")];
    assert!(matches!(split_by_assignment(&log), Err(AnalysisError::UnmatchedEvents(_))));
    log.events = vec![ev(0, "assignment_start", "1"), ev(100, "assignment_complete", "2")];
    assert!(matches!(split_by_assignment(&log), Err(AnalysisError::UnmatchedEvents(_))));
}

#[test]
fn durations_and_cohort_stats() {
    let split = AssignmentSplit { assignment: 1, samples: 0..1, start_ms: 0, end_ms: 160_300, complete: true };
    assert!((split.duration_s() - 160.3).abs() < 1e-9);
    let per = time_spent(&[split]);
    assert_eq!(per[&1], 160.3);
    let stats = cohort_time_stats(&[per.clone(), per.clone(), per]);
    assert_eq!(stats[&1].n, 3);
    assert!((stats[&1].mean - 160.3).abs() < 1e-9);
    assert_eq!(stats[&1].sd, 0.0);
    assert_eq!(stats[&0].mean, stats[&1].mean);
    let s = mean_sd(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
    assert!((s.sd - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
}

/// Arc length along a polyline until the point first comes within `radius`
/// of `goal`, searched at 1 mm steps.
fn arc_until_within(points: &[Vec3], goal: Vec2, radius: f64) -> f64 {
    let mut s = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = a.distance(b);
        let n = (len / 0.1).ceil().max(1.0) as usize;
        for k in 0..=n {
            let p = a.xy().lerp(b.xy(), k as f64 / n as f64);
            if p.distance(goal) <= radius {
                return s + len * k as f64 / n as f64;
            }
        }
        s += len;
    }
    s
}

#[test]
fn direction_agent_assignment_one_matches_path_time() {
    let w = world();
    let run = run_session(&w, &PolicySpec::noiseless(PolicyKind::Direction), "t", 170.0, DEFAULT_MAX_SESSION_MS).unwrap();
    let splits = split_by_assignment(&run.log).unwrap();
    let d = splits[0].duration_s();
    // The direction route switches corridors at the first cross corridor
    // past the start, so the oracle path runs through that corridor's centre.
    let start = w.spec.lookup_place("4.02").unwrap();
    let goal = w.spec.lookup_place("4.99").unwrap();
    let centre = w
        .spec
        .floor(4)
        .unwrap()
        .walkable
        .iter()
        .filter(|p| p.kind == WalkableKind::CrossCorridor)
        .map(|p| centroid(&p.polygon))
        .filter(|c| c.x > start.point.x)
        .min_by(|a, b| a.x.total_cmp(&b.x))
        .unwrap();
    let via = PlacedPose { floor: 4, point: Vec3::with_xy(centre, 1200.0) };
    let mut points = w.mesh.shortest_path(&start, &via).unwrap().waypoints;
    points.extend(w.mesh.shortest_path(&via, &goal).unwrap().waypoints.into_iter().skip(1));
    let expect = arc_until_within(&points, goal.xy(), 80.0) / 140.0;
    assert!((d - expect).abs() <= 0.2, "duration {d} vs oracle {expect}");
}

#[test]
fn classifier_recovers_floor_and_direction_on_assignment_two() {
    let w = world();
    let th = StrategyThresholds::default();
    for (kind, want) in [(PolicyKind::Floor, Strategy::Floor), (PolicyKind::Direction, Strategy::Direction)] {
        let run = run_session(&w, &PolicySpec::new(kind, 1), "c", 170.0, DEFAULT_MAX_SESSION_MS).unwrap();
        let splits = split_by_assignment(&run.log).unwrap();
        let label = classify_strategy(&w, splits[1].slice(&run.log), &th).unwrap();
        assert_eq!(label.label, want, "{kind}: {:?}", label.evidence);
        let h = label.evidence.h_star.unwrap();
        assert!((0.0..=1.0).contains(&h));
    }
}

#[test]
fn straight_walk_without_switch_is_mixed() {
    let w = world();
    let place = PlacedPose { floor: 4, point: Vec3::new(2000.0, 0.0, 1200.0) };
    let mut run = SessionRun::start_at(&w, "line", 170.0, 0, 1, place, 0.0).unwrap();
    for _ in 0..500 {
        run.step(&w, &InputFrame::walk(0.0)).unwrap();
    }
    let label = classify_strategy(&w, &run.log.samples, &StrategyThresholds::default()).unwrap();
    assert_eq!(label.label, Strategy::Mixed);
    assert!((label.evidence.detour_ratio - 1.0).abs() < 0.02, "{}", label.evidence.detour_ratio);
    assert!(label.evidence.h_star.is_none() && label.evidence.switch_fraction.is_none());
}

#[test]
fn detour_ratio_is_at_least_one_minus_tolerance() {
    let w = world();
    let th = StrategyThresholds::default();
    for (kind, log) in cohort() {
        for sp in split_by_assignment(log).unwrap() {
            let l = classify_strategy(&w, sp.slice(log), &th).unwrap();
            assert!(l.evidence.detour_ratio >= 0.98, "{kind} A{}: {}", sp.assignment, l.evidence.detour_ratio);
            if let Some(f) = l.evidence.switch_fraction {
                assert!((0.0..=1.0).contains(&f));
            }
        }
    }
}

/// A minimal evacuation log that ends at `exit`.
fn evacuation_log(w: &World, id: &str, exit: &str) -> SessionLog {
    let p = w.spec.room("4.64").unwrap().door_pos;
    let mut log = SessionLog::new(id);
    log.samples = vec![sample_at(0, p.x, p.y - 100.0, 1370.0, 4), sample_at(100, 7500.0, -80.0, 170.0, 4)];
    log.events = vec![ev(0, "assignment_start", "4"), ev(100, "assignment_complete", "4"), ev(100, "exit_reached", exit)];
    log
}

#[test]
fn reference_tally_of_18_c_and_18_d() {
    let w = world();
    let logs: Vec<SessionLog> = (0..36)
        .map(|i| evacuation_log(&w, &format!("r{i}"), if i < 18 { "C" } else { "D" }))
        .collect();
    let t = choice_tally(&w, &logs);
    let expect: BTreeMap<String, usize> =
        [("A", 0), ("B", 0), ("C", 18), ("D", 18), ("E", 0)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    assert_eq!(t.exits, expect);
    assert_eq!(t.completed, 36);
    assert_eq!(t.excluded, 0);
}

#[test]
fn nearest_exit_agents_always_agree() {
    let w = world();
    let logs: Vec<SessionLog> = generate_cohort(&w, 6, &[PolicyKind::NearestExit], 4, 30.0)
        .unwrap()
        .into_iter()
        .map(|(_, r)| r.log)
        .collect();
    let t = choice_tally(&w, &logs);
    assert_eq!(t.completed, 6);
    assert_eq!(t.nearest_exit_agreement, 1.0);
    assert_eq!(t.exits.values().sum::<usize>(), t.completed);
    assert!(t.staircases.values().sum::<usize>() > 0);
}

#[test]
fn empty_log_set_tallies_zero() {
    let w = world();
    let t = choice_tally(&w, &[]);
    assert_eq!(t.exits.len(), 5);
    assert!(t.exits.values().all(|v| *v == 0) && t.staircases.values().all(|v| *v == 0));
    assert_eq!((t.completed, t.excluded, t.nearest_exit_agreement), (0, 0, 0.0));
}

#[test]
fn incomplete_sessions_are_excluded() {
    let w = world();
    let mut log = evacuation_log(&w, "x", "C");
    log.events.pop();
    let t = choice_tally(&w, &[log, evacuation_log(&w, "y", "D")]);
    assert_eq!((t.completed, t.excluded), (1, 1));
}

#[test]
fn heatmap_conserves_gaze_hits() {
    let w = world();
    let logs: Vec<SessionLog> = cohort().iter().map(|(_, l)| l.clone()).collect();
    for floor in 1..=4 {
        let g = gaze_heatmap(&w, &logs, floor, 25.0).unwrap();
        let hits = logs
            .iter()
            .flat_map(|l| l.samples.iter())
            .filter(|s| s.gaze.is_some() && w.spec.floor_below_eye(s.pos.z) == Some(floor))
            .count() as u64;
        assert_eq!(g.total(), hits, "floor {floor}");
        assert_eq!(g.counts.len(), g.rows);
        assert!(g.counts.iter().all(|r| r.len() == g.cols));
    }
    assert!(gaze_heatmap(&w, &logs, 4, 5.0).is_err());
    assert!(gaze_heatmap(&w, &logs, 4, 250.0).is_err());
    let tally = gaze_target_tally(&logs);
    let samples: u64 = logs.iter().map(|l| l.samples.len() as u64).sum();
    assert_eq!(tally.values().flat_map(|m| m.values()).sum::<u64>(), samples);
}

#[test]
fn staring_at_an_exit_sign_for_ten_seconds() {
    let w = world();
    let sign = w.spec.floor(4).unwrap().signs.iter().find(|s| s.kind.as_str() == "exit_sign").unwrap().clone();
    let stand = sign.position + sign.facing * 200.0;
    let yaw = (sign.facing * -1.0).heading_deg();
    let place = PlacedPose { floor: 4, point: Vec3::with_xy(stand, 1200.0) };
    let mut run = SessionRun::start_at(&w, "stare", 170.0, 0, 1, place, yaw).unwrap();
    for _ in 0..500 {
        run.step(&w, &InputFrame::idle(yaw)).unwrap();
    }
    assert_eq!(run.log.samples[0].gaze_target, format!("exit_sign:{}", sign.target));
    let tally = gaze_target_tally(&[run.log]);
    assert!(tally[&1]["exit_sign"] >= 100, "{:?}", tally);
}

#[test]
fn evacuation_draws_more_attention_to_exit_signs() {
    let w = world();
    let logs: Vec<SessionLog> = generate_cohort(&w, 6, &[PolicyKind::NearestExit], 8, 30.0)
        .unwrap()
        .into_iter()
        .map(|(_, r)| r.log)
        .collect();
    let tally = gaze_target_tally(&logs);
    let share = |ids: &[u8]| {
        let (mut hit, mut all) = (0u64, 0u64);
        for id in ids {
            if let Some(m) = tally.get(id) {
                hit += m.get("exit_sign").copied().unwrap_or(0);
                all += m.values().sum::<u64>();
            }
        }
        hit as f64 / all as f64
    };
    let (evac, before) = (share(&[4]), share(&[1, 2, 3]));
    assert!(evac > before, "evacuation {evac:.4} vs earlier {before:.4}");
}

#[test]
fn speed_of_constant_walk_and_standstill() {
    let w = world();
    let place = PlacedPose { floor: 4, point: Vec3::new(2000.0, 0.0, 1200.0) };
    let mut run = SessionRun::start_at(&w, "walk", 170.0, 0, 1, place, 0.0).unwrap();
    for _ in 0..250 {
        run.step(&w, &InputFrame::walk(0.0)).unwrap();
    }
    let s = speed_stats(&run.log.samples).unwrap();
    assert!((s.mean - 140.0).abs() < 1e-6 && (s.max - 140.0).abs() < 1e-6);
    assert_eq!(s.histogram.iter().sum::<u64>(), 50);

    let mut still = SessionRun::start_at(&w, "still", 170.0, 0, 1, place, 0.0).unwrap();
    for _ in 0..50 {
        still.step(&w, &InputFrame::idle(0.0)).unwrap();
    }
    let s = speed_stats(&still.log.samples).unwrap();
    assert_eq!((s.mean, s.max), (0.0, 0.0));
    assert!(speed_stats(&still.log.samples[..1]).is_none());
}

#[test]
fn cohort_speed_respects_the_cap() {
    for (kind, log) in cohort() {
        let s = speed_stats(&log.samples).unwrap();
        assert!(s.max <= 140.0 + 1e-6, "{kind}: {}", s.max);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn splits_partition_any_prefix(which in 0usize..8, frac in 0.0..1.0f64) {
        let (_, log) = &cohort()[which];
        let cut = log.samples[((log.samples.len() - 1) as f64 * frac) as usize].t_ms;
        let prefix = SessionLog {
            participant_id: log.participant_id.clone(),
            samples: log.samples.iter().filter(|s| s.t_ms <= cut).cloned().collect(),
            events: log.events.iter().filter(|e| e.t_ms <= cut).cloned().collect(),
        };
        let splits = split_by_assignment(&prefix).unwrap();
        let joined: Vec<&TelemetrySample> = splits.iter().flat_map(|s| s.slice(&prefix).iter()).collect();
        prop_assert_eq!(joined.len(), prefix.samples.len());
        prop_assert!(joined.iter().zip(&prefix.samples).all(|(a, b)| *a == b));
        prop_assert!(splits.iter().rev().skip(1).all(|s| s.complete));
    }
}
