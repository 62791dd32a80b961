use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as SNormal};

use safr_core::geom::Point;
use safr_core::index::ScenarioSegment;
use safr_core::par::Execution;
use safr_core::real2sim::{build_scenario, validate_structure, ScenarioDocument};
use safr_core::scevar::*;
use safr_core::synth::{build_recording, turn_corpus, turn_recording, ActorScript, PathSpec, Segment, SpeedProfile};
use safr_core::tagger::{detect_turns, temporal_iou, EventKind, EventTag, TaggerConfig};
use safr_core::xml;

fn normal_draws(mean: f64, sd: f64, n: usize, seed: u64) -> Vec<f64> {
    let d = Normal::new(mean, sd).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

/// Two-sample-free KS: sup |F_n - F| over the sample points.
fn ks_against(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Composite Simpson rule with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

// ---------------------------------------------------------------- turns

#[test]
fn quarter_circle_parameters() {
    let (rec, _) = turn_recording("q", Point::new(0.0, 0.0), 0.0, 5.0, 10.0, FRAC_PI_2, 30.0);
    let tags = detect_turns(&rec, "ego", &TaggerConfig::default());
    assert_eq!(tags.len(), 1);
    let p = extract_turn_parameters(&[rec], &tags).unwrap();
    assert_eq!(p.len(), 1);
    assert!((p[0].turning_speed - 5.0).abs() < 0.05, "{p:?}");
    assert!((p[0].turning_angle - 1.5708).abs() < 1e-3, "{p:?}");
    assert!((p[0].turning_radius - 10.0).abs() < 0.1, "{p:?}");
    assert!(extract_turn_parameters(&[], &[]).unwrap().is_empty());
}

#[test]
fn missing_attribute_is_an_error() {
    let tag = EventTag::new("r", "ego", EventKind::TurnLeft, 1.0, 2.0).with("mean_speed", 3.0);
    assert!(matches!(extract_turn_parameters(&[], &[tag]), Err(ScevarError::MissingAttribute { .. })));
}

#[test]
fn hundred_turns_recovered_within_two_percent() {
    let corpus = turn_corpus(100, 2024);
    let cfg = TaggerConfig::default();
    for (rec, truth) in &corpus {
        let tags = detect_turns(rec, "ego", &cfg);
        let tag = tags
            .iter()
            .find(|t| temporal_iou((t.t_start, t.t_end), (truth.t_start, truth.t_end)) >= 0.5)
            .unwrap_or_else(|| panic!("{}: no matching tag in {tags:?}", truth.recording_id));
        let p = &extract_turn_parameters(std::slice::from_ref(rec), std::slice::from_ref(tag)).unwrap()[0];
        let rel = |got: f64, want: f64| ((got - want) / want).abs();
        assert!(rel(p.turning_speed, truth.speed) <= 0.02, "{} speed {} vs {}", truth.recording_id, p.turning_speed, truth.speed);
        assert!(rel(p.turning_angle, truth.angle) <= 0.02, "{} angle {} vs {}", truth.recording_id, p.turning_angle, truth.angle);
        assert!(rel(p.turning_radius, truth.radius) <= 0.02, "{} radius {} vs {}", truth.recording_id, p.turning_radius, truth.radius);
    }
}

// ---------------------------------------------------------------- fitting

#[test]
fn kde_mean_and_normalization() {
    let xs = normal_draws(8.0, 1.0, 1000, 1);
    let d = fit_univariate("speed", &xs, &FitConfig::default()).unwrap();
    assert!((d.mean() - 8.0).abs() < 0.1);
    let (a, b) = d.support;
    assert!((simpson(|x| d.pdf(x), a, b, 4000) - 1.0).abs() < 1e-6);
    let h = fit_univariate("speed", &xs, &FitConfig { kind: FitKind::Histogram, ..Default::default() }).unwrap();
    let Univariate::Histogram { edges, masses } = &h.kind else { panic!() };
    assert!((masses.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    // piecewise-constant pdf integrates exactly bin by bin
    let integral: f64 = edges.windows(2).map(|w| h.pdf(0.5 * (w[0] + w[1])) * (w[1] - w[0])).sum();
    assert!((integral - 1.0).abs() < 1e-9);
}

#[test]
fn fit_errors() {
    assert!(matches!(fit_univariate("x", &[1.0, 2.0], &FitConfig::default()), Err(ScevarError::TooFewSamples { .. })));
    let hist = FitConfig { kind: FitKind::Histogram, ..Default::default() };
    assert!(fit_univariate("x", &[], &hist).is_err());
    let bad = vec![vec![1.0, 2.0]; 9].into_iter().chain([vec![1.0]]).collect::<Vec<_>>();
    assert!(matches!(fit_joint(&["a", "b"], &bad, &FitConfig::default()), Err(ScevarError::DimensionMismatch { index: 9, .. })));
}

#[test]
fn samples_from_fit_match_generator() {
    let xs = normal_draws(8.0, 1.0, 20000, 2);
    let d = fit_univariate("speed", &xs, &FitConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws: Vec<f64> = (0..5000).map(|_| d.sample(&mut rng)).collect();
    let truth = SNormal::new(8.0, 1.0).unwrap();
    let ks = ks_against(&draws, |x| truth.cdf(x));
    assert!(ks < 0.05, "KS {ks}");
    // the sampler also agrees with the fitted CDF
    assert!(ks_against(&draws, |x| d.cdf(x)) < 0.05);
}

fn correlated(n: usize, rho: f64, seed: u64) -> Vec<Vec<f64>> {
    let z = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (a, b): (f64, f64) = (z.sample(&mut rng), z.sample(&mut rng));
            vec![8.0 + a, 12.0 + 2.0 * (rho * a + (1.0 - rho * rho).sqrt() * b)]
        })
        .collect()
}

#[test]
fn joint_fit_correlations() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (rho, tol) in [(0.0, 0.1), (0.8, 0.1)] {
        let samples = correlated(if rho == 0.0 { 2000 } else { 5000 }, rho, 4);
        let j = fit_joint(&["turning_speed", "turning_radius"], &samples, &FitConfig::default()).unwrap();
        let draws: Vec<Vec<f64>> = (0..5000).map(|_| j.sample(&mut rng)).collect();
        let r = correlation(&draws.iter().map(|d| d[0]).collect::<Vec<_>>(), &draws.iter().map(|d| d[1]).collect::<Vec<_>>());
        assert!((r - rho).abs() < tol, "planted {rho}, fitted samples {r}");
        let (_, corr) = j.moments();
        assert!((corr[0][1] - rho).abs() < tol, "planted {rho}, fitted density {}", corr[0][1]);
    }
}

#[test]
fn joint_marginal_matches_univariate_fit() {
    let samples = correlated(2000, 0.5, 5);
    let j = fit_joint(&["a", "b"], &samples, &FitConfig::default()).unwrap();
    let m = j.marginal(0);
    let col: Vec<f64> = samples.iter().map(|s| s[0]).collect();
    let u = fit_univariate("a", &col, &FitConfig::default()).unwrap();
    let (lo, hi) = u.support;
    let ks = (0..=1000).map(|k| lo + (hi - lo) * k as f64 / 1000.0).map(|x| (m.cdf(x) - u.cdf(x)).abs()).fold(0.0, f64::max);
    assert!(ks < 0.1, "{ks}");
}

#[test]
fn joint_densities_are_normalized() {
    let samples = correlated(200, 0.6, 6);
    for kind in [FitKind::Kde, FitKind::Histogram] {
        let j = fit_joint(&["a", "b"], &samples, &FitConfig { kind, ..Default::default() }).unwrap();
        let (sx, sy) = (j.support[0], j.support[1]);
        let total = match kind {
            // nested Simpson over the support
            FitKind::Kde => simpson(|x| simpson(|y| j.pdf(&[x, y]), sy.0, sy.1, 400), sx.0, sx.1, 400),
            // cell masses of a piecewise-constant density
            FitKind::Histogram => {
                let Joint::Histogram { edges, .. } = &j.kind else { panic!() };
                let mut t = 0.0;
                for a in edges[0].windows(2) {
                    for b in edges[1].windows(2) {
                        t += j.pdf(&[0.5 * (a[0] + a[1]), 0.5 * (b[0] + b[1])]) * (a[1] - a[0]) * (b[1] - b[0]);
                    }
                }
                t
            }
        };
        assert!((total - 1.0).abs() < 1e-6, "{kind:?}: {total}");
    }
}

// ---------------------------------------------------------------- trajectories

fn arc_recording(id: &str, origin: Point, heading: f64, radius: f64, angle: f64) -> (safr_core::recording::Recording, EventTag) {
    // speed chosen so the turn lasts exactly 3 s and ends on a sample
    let dur = 3.0;
    let speed = radius * angle.abs() / dur;
    let path = PathSpec::new(origin, heading).then(Segment::Arc { radius, angle });
    let rec = build_recording(id, 0.0, dur, 0.01, &[ActorScript::new("ego", true, path, SpeedProfile::Constant(speed))]);
    let kind = if angle > 0.0 { EventKind::TurnLeft } else { EventKind::TurnRight };
    let t_end = rec.time_range().1;
    let tag = EventTag::new(id, "ego", kind, 0.0, t_end).with("net_heading_change", angle);
    (rec, tag)
}

const ARC_TOL: f64 = 5e-3;

fn quarter_arc(r: f64) -> Vec<Point> {
    (0..50)
        .map(|k| {
            let th = FRAC_PI_2 * k as f64 / 49.0;
            Point::new(r * th.sin(), r * (1.0 - th.cos()))
        })
        .collect()
}

#[test]
fn identical_turns_have_zero_band() {
    let items: Vec<_> = (0..3).map(|i| arc_recording(&format!("a{i}"), Point::new(i as f64 * 100.0, 0.0), 0.3 * i as f64, 10.0, FRAC_PI_2)).collect();
    let recs: Vec<_> = items.iter().map(|x| x.0.clone()).collect();
    let tags: Vec<_> = items.iter().map(|x| x.1.clone()).collect();
    let (models, warnings) = learn_turn_trajectories(&recs, &tags, &AngleBuckets::default());
    assert!(warnings.is_empty());
    assert_eq!(models.len(), 1);
    let m = &models[0];
    assert_eq!(m.direction, TurnDirection::Left);
    assert!(m.band.iter().all(|b| *b < 2e-3), "{:?}", m.band);
    for (p, q) in m.mean.iter().zip(quarter_arc(10.0)) {
        assert!(p.dist(q) < ARC_TOL, "{p:?} vs {q:?}");
    }
}

#[test]
fn arcs_of_three_radii_average_to_the_middle() {
    let items: Vec<_> = [9.0, 10.0, 11.0].iter().enumerate().map(|(i, &r)| arc_recording(&format!("a{i}"), Point::new(0.0, i as f64 * 50.0), 0.0, r, FRAC_PI_2)).collect();
    let recs: Vec<_> = items.iter().map(|x| x.0.clone()).collect();
    let tags: Vec<_> = items.iter().map(|x| x.1.clone()).collect();
    let (models, _) = learn_turn_trajectories(&recs, &tags, &AngleBuckets::default());
    let m = &models[0];
    for (p, q) in m.mean.iter().zip(quarter_arc(10.0)) {
        assert!(p.dist(q) < ARC_TOL, "{p:?} vs {q:?}");
    }
    assert!(m.band[1..].iter().all(|b| *b > 0.0));
    assert!(m.band[0] < 1e-9);
}

#[test]
fn buckets_separate_directions_and_skip_small_groups() {
    let mut items = Vec::new();
    for i in 0..3 {
        items.push(arc_recording(&format!("l{i}"), Point::new(0.0, i as f64 * 50.0), 0.0, 10.0 + i as f64, FRAC_PI_2));
    }
    for i in 0..2 {
        items.push(arc_recording(&format!("r{i}"), Point::new(500.0, i as f64 * 50.0), 0.0, 10.0, -FRAC_PI_2));
    }
    let recs: Vec<_> = items.iter().map(|x| x.0.clone()).collect();
    let tags: Vec<_> = items.iter().map(|x| x.1.clone()).collect();
    let (models, warnings) = learn_turn_trajectories(&recs, &tags, &AngleBuckets::default());
    assert_eq!(models.len(), 1);
    assert_eq!(models[0].direction, TurnDirection::Left);
    assert_eq!(models[0].count, 3);
    assert!(models[0].mean.iter().all(|p| p.y >= -1e-9));
    assert_eq!(warnings.len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn normalized_path_is_rotation_invariant(rot in -3.0f64..3.0, r in 8.0f64..20.0) {
        let (rec, tag) = arc_recording("a", Point::new(3.0, -2.0), 0.4, r, 1.2);
        let (rec2, tag2) = arc_recording("a", Point::new(3.0, -2.0).rotate(rot), 0.4 + rot, r, 1.2);
        let p = normalized_turn_path(&rec, &tag).unwrap();
        let q = normalized_turn_path(&rec2, &tag2).unwrap();
        for (a, b) in p.iter().zip(&q) {
            prop_assert!(a.dist(*b) < 1e-6);
        }
    }
}

// ---------------------------------------------------------------- logical scenarios

fn template() -> ScenarioDocument {
    let (rec, _) = turn_recording("t", Point::new(0.0, 0.0), 0.0, 8.0, 10.0, FRAC_PI_2, 20.0);
    let (t0, t1) = rec.time_range();
    let seg = ScenarioSegment { recording_id: "t".into(), t_start: t0, t_end: t1, matched_fields: vec![] };
    let mut doc = build_scenario(&rec, &seg, "map.xodr").unwrap();
    declare_parameter(&mut doc, "turning_speed", 8.0);
    bind_init_speed(&mut doc, "Ego", "turning_speed").unwrap();
    doc
}

fn logical_with(groups: Vec<ParameterGroup>) -> LogicalScenario {
    let mut t = template();
    for g in &groups {
        for n in g.names() {
            declare_parameter(&mut t, &n, 0.0);
        }
    }
    LogicalScenario { template: t, template_file: "turn.xosc".into(), groups }
}

#[test]
fn histogram_parameter_file() {
    let d = UnivariateDistribution::histogram("turning_speed", vec![4.0, 6.0, 8.0, 10.0], vec![0.2, 0.5, 0.3]).unwrap();
    let l = logical_with(vec![ParameterGroup::Univariate(d)]);
    let dir = tempfile::tempdir().unwrap();
    let files = write_logical_scenario(&l, dir.path(), 50, 1).unwrap();
    let text = std::fs::read_to_string(&files.distribution).unwrap();
    let root = xml::parse(&text).unwrap();
    validate_structure(&root).unwrap();
    validate_structure(&xml::parse(&std::fs::read_to_string(&files.template).unwrap()).unwrap()).unwrap();
    let bins: Vec<_> = root
        .req_child("ParameterValueDistribution").unwrap()
        .req_child("Stochastic").unwrap()
        .req_child("StochasticDistribution").unwrap()
        .req_child("Histogram").unwrap()
        .all("Bin")
        .map(|b| b.req_f64("weight").unwrap())
        .collect();
    assert_eq!(bins, vec![0.2, 0.5, 0.3]);
    let (file, groups) = safr_core::scevar::logical::read_distribution_str(&text).unwrap();
    assert_eq!(file, "turn.xosc");
    assert_eq!(groups, l.groups);
}

#[test]
fn kde_parameter_is_discretized() {
    let d = fit_univariate("turning_speed", &normal_draws(8.0, 1.0, 300, 8), &FitConfig::default()).unwrap();
    let l = logical_with(vec![ParameterGroup::Univariate(d)]);
    let text = safr_core::scevar::logical::distribution_xml(&l, 10, 0).to_document();
    let (_, groups) = safr_core::scevar::logical::read_distribution_str(&text).unwrap();
    let ParameterGroup::Univariate(h) = &groups[0] else { panic!() };
    let Univariate::Histogram { masses, .. } = &h.kind else { panic!() };
    assert_eq!(masses.len(), 20);
    assert!((masses.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn enumeration_only_uses_deterministic_sets() {
    let l = logical_with(vec![ParameterGroup::Enumeration { name: "lane".into(), values: vec![1.0, 2.0, 3.0] }]);
    // turning_speed is declared by the template but left without a distribution
    assert!(matches!(l.validate(), Err(ScevarError::MissingDistribution(_))));
    let mut l = l;
    l.template.parameters.retain(|p| p.name != "turning_speed");
    l.template.init[0].speed = 8.0.into();
    let root = safr_core::scevar::logical::distribution_xml(&l, 10, 0);
    validate_structure(&root).unwrap();
    assert!(root.to_document().contains("<Deterministic>"));
}

#[test]
fn undeclared_parameter_is_rejected() {
    let d = UnivariateDistribution::uniform("turning_speed", 4.0, 12.0).unwrap();
    let mut l = logical_with(vec![ParameterGroup::Univariate(d)]);
    l.groups.push(ParameterGroup::Univariate(UnivariateDistribution::uniform("ghost", 0.0, 1.0).unwrap()));
    assert!(matches!(l.validate(), Err(ScevarError::UndeclaredParameter(p)) if p == "ghost"));
    let dir = tempfile::tempdir().unwrap();
    assert!(write_logical_scenario(&l, dir.path(), 1, 1).is_err());
}

// ---------------------------------------------------------------- sampling

fn speed_logical() -> LogicalScenario {
    let d = fit_univariate("turning_speed", &normal_draws(8.0, 1.0, 4000, 10), &FitConfig::default()).unwrap();
    logical_with(vec![ParameterGroup::Univariate(d)])
}

#[test]
fn random_sample_mean() {
    let l = speed_logical();
    let v = sample_variations(&l, 1000, SamplingMode::Random, 3, Execution::Auto).unwrap();
    let m = v.iter().map(|x| x.assignment["turning_speed"]).sum::<f64>() / 1000.0;
    let ParameterGroup::Univariate(d) = &l.groups[0] else { panic!() };
    assert!((m - d.mean()).abs() < 0.15);
    // substituted into the document
    let doc = &v[0].document;
    assert!(doc.parameters.is_empty());
    assert_eq!(doc.init[0].speed, v[0].assignment["turning_speed"].into());
}

#[test]
fn stratified_hits_every_decile_once() {
    let l = speed_logical();
    let ParameterGroup::Univariate(d) = &l.groups[0] else { panic!() };
    for seed in 0..5 {
        let a = sample_assignments(&l, 10, SamplingMode::Stratified, seed).unwrap();
        let mut deciles: Vec<usize> = a.iter().map(|x| (d.cdf(x["turning_speed"]) * 10.0 - 1e-9).floor() as usize).collect();
        deciles.sort();
        assert_eq!(deciles, (0..10).collect::<Vec<_>>());
    }
}

#[test]
fn stratified_joint_keeps_dependence() {
    let j = fit_joint(&["turning_speed", "turning_radius"], &correlated(1000, 0.8, 12), &FitConfig::default()).unwrap();
    let l = logical_with(vec![ParameterGroup::Joint(j.clone())]);
    let a = sample_assignments(&l, 400, SamplingMode::Stratified, 1).unwrap();
    let xs: Vec<f64> = a.iter().map(|x| x["turning_speed"]).collect();
    let ys: Vec<f64> = a.iter().map(|x| x["turning_radius"]).collect();
    assert!(correlation(&xs, &ys) > 0.6);
    let m = j.marginal(0);
    let mut strata: Vec<usize> = xs.iter().map(|x| (m.cdf(*x) * 400.0 - 1e-7).floor() as usize).collect();
    strata.sort();
    assert_eq!(strata, (0..400).collect::<Vec<_>>());
}

#[test]
fn sampling_is_deterministic() {
    let l = speed_logical();
    for mode in [SamplingMode::Random, SamplingMode::Stratified] {
        let a = sample_variations(&l, 20, mode, 7, Execution::Sequential).unwrap();
        let b = sample_variations(&l, 20, mode, 7, Execution::with_workers(3)).unwrap();
        assert_eq!(a, b);
    }
    assert!(sample_assignments(&l, 0, SamplingMode::Random, 1).is_err());
}

// ---------------------------------------------------------------- coverage

#[test]
fn coverage_arithmetic() {
    let u = UnivariateDistribution::uniform("x", 0.0, 4.0).unwrap();
    assert_eq!(compute_coverage(&u, &[vec![0.1], vec![3.9]], 4).unwrap().covered_mass, 0.5);
    assert_eq!(compute_coverage(&u, &[], 4).unwrap().covered_mass, 0.0);
    // outside points clamp onto the edge bins
    assert_eq!(compute_coverage(&u, &[vec![-10.0], vec![10.0]], 4).unwrap().covered_mass, 0.5);
    let r = compute_coverage(&u, &[vec![1.5]], 4).unwrap();
    let hit: f64 = r.bins.iter().filter(|b| b.hits > 0).map(|b| b.mass).sum();
    assert_eq!(r.covered_mass, hit);
}

#[test]
fn hitting_every_bin_of_a_kde_covers_it() {
    let j = fit_joint(&["a", "b"], &correlated(500, 0.3, 13), &FitConfig::default()).unwrap();
    let empty = compute_coverage(&j, &[], 10).unwrap();
    let centers: Vec<Vec<f64>> = empty
        .bins
        .iter()
        .filter(|b| b.mass > 0.0)
        .map(|b| b.lower.iter().zip(&b.upper).map(|(l, u)| 0.5 * (l + u)).collect())
        .collect();
    let r = compute_coverage(&j, &centers, 10).unwrap();
    assert!(r.covered_mass >= 0.99, "{}", r.covered_mass);
    let total: f64 = r.bins.iter().map(|b| b.mass).sum();
    assert!((total - 1.0).abs() < 1e-6);
}

proptest! {
    #[test]
    fn coverage_is_monotone(points in prop::collection::vec(-1.0f64..5.0, 0..30), extra in prop::collection::vec(-1.0f64..5.0, 1..5)) {
        let d = UnivariateDistribution::histogram("x", vec![0.0, 1.0, 2.0, 4.0], vec![0.5, 0.3, 0.2]).unwrap();
        let mut pts: Vec<Vec<f64>> = points.iter().map(|p| vec![*p]).collect();
        let before = compute_coverage(&d, &pts, 7).unwrap().covered_mass;
        pts.extend(extra.iter().map(|p| vec![*p]));
        let after = compute_coverage(&d, &pts, 7).unwrap().covered_mass;
        prop_assert!(after >= before);
        prop_assert!((0.0..=1.0).contains(&after));
    }
}

#[test]
fn stratified_beats_random_on_uniform() {
    let mut t = template();
    declare_parameter(&mut t, "x", 0.5);
    t.parameters.retain(|p| p.name == "x");
    t.init[0].speed = 8.0.into();
    let u = UnivariateDistribution::uniform("x", 0.0, 1.0).unwrap();
    let l = LogicalScenario { template: t, template_file: "u.xosc".into(), groups: vec![ParameterGroup::Univariate(u.clone())] };
    let mean_cov = |mode| {
        (0..50u64)
            .map(|seed| {
                let pts: Vec<Vec<f64>> = sample_assignments(&l, 10, mode, seed).unwrap().iter().map(|a| vec![a["x"]]).collect();
                compute_coverage(&u, &pts, 10).unwrap().covered_mass
            })
            .sum::<f64>()
            / 50.0
    };
    let (s, r) = (mean_cov(SamplingMode::Stratified), mean_cov(SamplingMode::Random));
    assert!(s > r, "stratified {s} vs random {r}");
    assert!((s - 1.0).abs() < 1e-9);
}

#[test]
fn distribution_json_round_trip() {
    let d = fit_univariate("turning_speed", &normal_draws(8.0, 1.0, 50, 1), &FitConfig::default()).unwrap();
    let g = ParameterGroup::Univariate(d);
    let s = serde_json::to_string(&g).unwrap();
    assert_eq!(serde_json::from_str::<ParameterGroup>(&s).unwrap(), g);
}
