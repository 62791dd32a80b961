use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use safr_core::geom::Point;
use safr_core::index::ScenarioSegment;
use safr_core::par::Execution;
use safr_core::real2sim::{build_scenario, replay_scenario};
use safr_core::recording::{ActorClass, ActorState, Frame};
use safr_core::sceann::*;
use safr_core::synth::{fig16_recording, FIG16_PHASE_APPROACH, FIG16_PHASE_SETTLED};

fn state(id: &str, ego: bool, x: f64, y: f64, heading: f64, speed: f64) -> ActorState {
    ActorState {
        actor_id: id.into(),
        actor_class: ActorClass::Car,
        x,
        y,
        heading,
        speed,
        length: 4.5,
        width: 1.8,
        is_ego: ego,
    }
}

/// Constant-velocity time stepping at 1 ms: first step whose center distance
/// is at most `r`, or `None` within the horizon.
fn stepped_ttc(a: &ActorState, b: &ActorState, r: f64, horizon: f64) -> Option<f64> {
    let (va, vb) = (a.velocity(), b.velocity());
    let steps = (horizon / 1e-3) as usize;
    (0..=steps).map(|k| k as f64 * 1e-3).find(|&t| {
        let pa = a.position().add(va.scale(t));
        let pb = b.position().add(vb.scale(t));
        pa.dist(pb) <= r
    })
}

fn random_pair(rng: &mut ChaCha8Rng) -> (ActorState, ActorState, f64) {
    let mut s = |id: &str| {
        state(
            id,
            false,
            rng.gen_range(-40.0..40.0),
            rng.gen_range(-40.0..40.0),
            rng.gen_range(-3.14..3.14),
            rng.gen_range(0.0..25.0),
        )
    };
    let (a, b) = (s("a"), s("b"));
    (a, b, rng.gen_range(1.0..6.0))
}

#[test]
fn analytic_head_on() {
    let a = state("a", true, 0.0, 0.0, 0.0, 0.0);
    let b = state("b", false, 20.0, 0.0, std::f64::consts::PI, 10.0);
    assert!((compute_ttc(&a, &b, 2.0) - 1.8).abs() < 1e-9);
    let away = state("b", false, 20.0, 0.0, 0.0, 10.0);
    assert!(compute_ttc(&a, &away, 2.0).is_infinite());
}

#[test]
fn matches_time_stepping_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let horizon = 12.0;
    for _ in 0..1500 {
        let (a, b, r) = random_pair(&mut rng);
        let ttc = compute_ttc(&a, &b, r);
        let stepped = stepped_ttc(&a, &b, r, horizon);
        if ttc <= horizon - 2e-3 {
            let s = stepped.expect("oracle finds the contact");
            assert!((s - ttc).abs() <= 2e-3, "ttc {ttc}, stepped {s}");
        } else if ttc > horizon {
            assert!(stepped.is_none(), "ttc {ttc}, stepped {stepped:?}");
        }
    }
}

proptest! {
    #[test]
    fn symmetric_and_radius_monotone(seed in any::<u64>(), k in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, r) = random_pair(&mut rng);
        let t = compute_ttc(&a, &b, r);
        prop_assert!(t >= 0.0);
        prop_assert_eq!(t, compute_ttc(&b, &a, r));
        prop_assert!(compute_ttc(&a, &b, r + 1.0) <= t);
        // scale positions, speeds and radius together
        let scale = |s: &ActorState| ActorState { x: s.x * k, y: s.y * k, speed: s.speed * k, ..s.clone() };
        let ts = compute_ttc(&scale(&a), &scale(&b), r * k);
        if t.is_finite() {
            prop_assert!((ts - t).abs() <= 1e-6 * t.max(1.0));
        } else {
            prop_assert!(ts.is_infinite());
        }
    }

    #[test]
    fn raising_threshold_never_clears_unsafe(seed in any::<u64>(), th in 0.5f64..3.0, extra in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut actors = vec![state("ego", true, 0.0, 0.0, 0.0, 10.0)];
        for i in 0..4 {
            let (mut o, _, _) = random_pair(&mut rng);
            o.actor_id = format!("o{i}");
            actors.push(o);
        }
        let frame = Frame { t: 0.0, actors };
        let lo = classify_scene(&frame, th, PairScope::AllPairs);
        let hi = classify_scene(&frame, th + extra, PairScope::AllPairs);
        prop_assert_eq!(lo.len(), 10);
        for (x, y) in lo.iter().zip(&hi) {
            if x.label == SafetyLabel::Unsafe {
                prop_assert_eq!(y.label, SafetyLabel::Unsafe);
            }
        }
    }
}

#[test]
fn closing_on_lead_is_unsafe() {
    // gap 12 m center to center, radius sum ~4.85, closing 6 m/s: TTC ~1.19 s
    let frame = Frame {
        t: 0.0,
        actors: vec![state("ego", true, 0.0, 0.0, 0.0, 14.0), state("lead", false, 12.0, 0.0, 0.0, 8.0)],
    };
    let s = classify_scene(&frame, 1.5, PairScope::EgoVsAll);
    assert_eq!(s.len(), 1);
    assert!((s[0].ttc - 1.2).abs() < 0.05);
    assert_eq!(s[0].label, SafetyLabel::Unsafe);
    let parked = Frame {
        t: 0.0,
        actors: vec![state("ego", true, 0.0, 0.0, 0.0, 0.0), state("b", false, 30.0, 0.0, 0.0, 0.0), state("c", false, 0.0, 30.0, 0.0, 0.0)],
    };
    assert!(classify_scene(&parked, 1.5, PairScope::AllPairs).iter().all(|s| s.label == SafetyLabel::Safe && s.ttc.is_infinite()));
}

fn labels_in(scores: &[InteractionScore], window: (f64, f64), other: &str) -> Vec<SafetyLabel> {
    scores
        .iter()
        .filter(|s| s.actor_b == other && s.t >= window.0 - 1e-9 && s.t <= window.1 + 1e-9)
        .map(|s| s.label)
        .collect()
}

#[test]
fn three_phase_lane_change_fixture() {
    let rec = fig16_recording("fig16", Point::new(0.0, 0.0));
    let cfg = SafetyConfig::default();
    let scores = score_recording(&rec, &cfg, Execution::Sequential);
    use SafetyLabel::*;
    for (other, approach, settled) in [("ID_8", Unsafe, Safe), ("ID_9", Unsafe, Safe), ("ID_12", Safe, Unsafe)] {
        let a = labels_in(&scores, FIG16_PHASE_APPROACH, other);
        let s = labels_in(&scores, FIG16_PHASE_SETTLED, other);
        assert!(!a.is_empty() && !s.is_empty());
        assert!(a.iter().all(|l| *l == approach), "{other} approach {a:?}");
        assert!(s.iter().all(|l| *l == settled), "{other} settled {s:?}");
    }
    let report = aggregate_safety("fig16", &scores, &cfg).unwrap();
    assert_eq!(report.verdict, Verdict::Fail);
    assert_eq!(report.pairs.len(), 3);
}

#[test]
fn replayed_twin_reproduces_fixture_labels() {
    let rec = fig16_recording("fig16", Point::new(100.0, -50.0));
    let (t0, t1) = rec.time_range();
    let seg = ScenarioSegment { recording_id: rec.recording_id.clone(), t_start: t0, t_end: t1, matched_fields: vec![] };
    let doc = build_scenario(&rec, &seg, "m").unwrap();
    let replay = replay_scenario(&doc).unwrap();
    let report = analyze_scenario(&doc, &replay, &SafetyConfig::default(), Execution::Auto).unwrap();
    use SafetyLabel::*;
    for (other, approach, settled) in [("ID_8", Unsafe, Safe), ("ID_9", Unsafe, Safe), ("ID_12", Safe, Unsafe)] {
        // finite differences need a neighbor on both sides: skip the end ticks
        let a = labels_in(&report.series, (0.1, 0.4), other);
        let s = labels_in(&report.series, (3.0, 3.7), other);
        assert!(a.iter().all(|l| *l == approach), "{other} approach {a:?}");
        assert!(s.iter().all(|l| *l == settled), "{other} settled {s:?}");
    }
}

fn series(pattern: &[(f64, bool)]) -> Vec<InteractionScore> {
    pattern
        .iter()
        .enumerate()
        .map(|(k, &(ttc, unsafe_))| InteractionScore {
            t: k as f64 * 0.1,
            actor_a: "ego".into(),
            actor_b: "x".into(),
            ttc,
            label: if unsafe_ { SafetyLabel::Unsafe } else { SafetyLabel::Safe },
        })
        .collect()
}

#[test]
fn aggregation_rules() {
    let cfg = SafetyConfig::default();
    assert!(matches!(aggregate_safety("s", &[], &cfg), Err(SafetyError::EmptySeries)));
    let safe = series(&[(f64::INFINITY, false); 10]);
    let r = aggregate_safety("s", &safe, &cfg).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert_eq!(r.pairs[0].unsafe_fraction, 0.0);

    let mut p = vec![(5.0, false); 10];
    for x in p.iter_mut().take(3) {
        *x = (1.0, true);
    }
    let r = aggregate_safety("s", &series(&p), &cfg).unwrap();
    assert!((r.pairs[0].unsafe_fraction - 0.3).abs() < 1e-12);
    assert_eq!(r.verdict, Verdict::Fail);

    // one frame at 0.4 s, labeled safe under a custom 0.3 s threshold
    let mut p = vec![(5.0, false); 20];
    p[7] = (0.4, false);
    let r = aggregate_safety("s", &series(&p), &cfg).unwrap();
    assert_eq!(r.pairs[0].unsafe_fraction, 0.0);
    assert_eq!(r.verdict, Verdict::Fail);
    assert!(r.reasons[0].contains("floor"));
}

#[test]
fn report_json_and_csv() {
    let rec = fig16_recording("fig16", Point::new(0.0, 0.0));
    let r = analyze_recording(&rec, &SafetyConfig::default(), Execution::Auto).unwrap();
    let j = serde_json::to_string(&r).unwrap();
    let back: ScenarioSafetyReport = serde_json::from_str(&j).unwrap();
    assert_eq!(back, r);
    let csv = scores_csv(&r.series);
    assert_eq!(csv.lines().count(), r.series.len() + 1);
    assert!(csv.starts_with("t,actor_a,actor_b,ttc,label"));
}

#[test]
fn sequential_and_parallel_scores_agree() {
    let rec = safr_core::synth::random_recording("r", 4, 20.0, 6);
    let cfg = SafetyConfig { pair_scope: PairScope::AllPairs, ..Default::default() };
    assert_eq!(score_recording(&rec, &cfg, Execution::Sequential), score_recording(&rec, &cfg, Execution::with_workers(4)));
}
