mod common;

use std::collections::BTreeMap;

use common::{brute_force, precision_recall, random_query, random_records, rng, same_segments};
use proptest::prelude::*;
use safr_core::index::{
    build_index, estimate_query_accuracy, latency_probe, parse_query, print_query, Index, IndexError, MetadataRecord,
    Op, Query, DEFAULT_SLACK,
};
use safr_core::synth::{search_corpus, QUERY_LANE_CHANGE, QUERY_MERGE, QUERY_STOP_RED, QUERY_TURN_3WAY};
use safr_core::tagger::{derive_odd_records, tag_recording, EventKind, EventTag, TaggerConfig};

#[test]
fn paper_queries_parse() {
    assert_eq!(parse_query("event=lane_change").unwrap(), Query::atom("event", Op::Eq, "lane_change"));
    assert_eq!(
        parse_query("ODD.intersection=3-way & turn=left||right").unwrap(),
        Query::And(vec![
            Query::atom("ODD.intersection", Op::Eq, "3-way"),
            Query::Or(vec![Query::atom("turn", Op::Eq, "left"), Query::atom("turn", Op::Eq, "right")]),
        ])
    );
    match parse_query("speed>50mph").unwrap() {
        Query::Atom(a) => {
            assert_eq!(a.op, Op::Gt);
            let v = match a.value {
                safr_core::index::Value::Num(v) => v,
                _ => panic!("numeric"),
            };
            assert!((v - 22.352).abs() < 1e-12);
        }
        q => panic!("{q:?}"),
    }
    let q = parse_query("ego_vehicle_event=merge & speed>50mph & ODD.road_way_type=freeway").unwrap();
    assert_eq!(q.atoms().len(), 3);
    assert_eq!(q.atoms()[2].field, "ODD.roadway_type");
}

#[test]
fn single_lane_change_found() {
    let tag = EventTag::new("r1", "ego", EventKind::LaneChangeLeft, 3.0, 7.0).with("mean_speed", 20.0);
    let idx = Index::from_records(&safr_core::index::lower_tag(&tag, Some("ego"))).unwrap();
    let segs = idx.search("event=lane_change").unwrap();
    assert_eq!(segs.len(), 1);
    assert_eq!((segs[0].t_start, segs[0].t_end), (3.0, 7.0));
}

#[test]
fn conjunction_is_interval_intersection() {
    let recs = vec![
        MetadataRecord::new("r", 10.0, 18.0, "turn", "left"),
        MetadataRecord::new("r", 9.0, 20.0, "ODD.intersection", "3-way"),
    ];
    let idx = Index::from_records(&recs).unwrap();
    let segs = idx.search("ODD.intersection=3-way & turn=left").unwrap();
    assert_eq!(segs.len(), 1);
    assert_eq!((segs[0].t_start, segs[0].t_end), (10.0, 18.0));
    assert_eq!(segs[0].matched_fields, vec!["ODD.intersection", "turn"]);
}

#[test]
fn empty_index_returns_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let m = build_index(&[], &BTreeMap::new(), &[], dir.path()).unwrap();
    assert_eq!(m.record_count, 0);
    let idx = Index::open(dir.path()).unwrap();
    assert!(idx.search("event=turn").unwrap().is_empty());
    assert!(idx.search("speed>3").unwrap().is_empty());
}

#[test]
fn unknown_field_is_rejected() {
    let idx = Index::from_records(&[]).unwrap();
    assert!(matches!(idx.search("weather=rain"), Err(IndexError::Query(_))));
}

#[test]
fn matches_brute_force_on_random_instances() {
    let mut r = rng(7);
    for _ in 0..40 {
        let n = rand::Rng::gen_range(&mut r, 0..300);
        let records = random_records(&mut r, n);
        let idx = Index::from_records(&records).unwrap();
        for _ in 0..20 {
            let q = random_query(&mut r, 3);
            let got = idx.evaluate(&q, DEFAULT_SLACK).unwrap();
            let want = brute_force(&records, &q, DEFAULT_SLACK);
            assert!(same_segments(&got, &want), "query {q}\n got {got:?}\nwant {want:?}");
        }
    }
}

#[test]
fn reopened_index_answers_identically() {
    let mut r = rng(11);
    let records = random_records(&mut r, 500);
    let idx = Index::from_records(&records).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = idx.write(dir.path()).unwrap();
    assert_eq!(manifest.record_count, 500);
    let back = Index::open(dir.path()).unwrap();
    assert_eq!(back, idx);
    for _ in 0..50 {
        let q = random_query(&mut r, 3);
        assert_eq!(idx.evaluate(&q, 2.0).unwrap(), back.evaluate(&q, 2.0).unwrap());
    }
}

#[test]
fn tampered_manifest_is_detected() {
    let records = random_records(&mut rng(3), 50);
    let dir = tempfile::tempdir().unwrap();
    Index::from_records(&records).unwrap().write(dir.path()).unwrap();
    let path = dir.path().join("manifest.json");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replace("\"record_count\": 50", "\"record_count\": 51")).unwrap();
    assert!(matches!(Index::open(dir.path()), Err(IndexError::Corrupt(_))));
}

#[test]
fn algebra_sanity() {
    let mut r = rng(5);
    for _ in 0..30 {
        let records = random_records(&mut r, 200);
        let idx = Index::from_records(&records).unwrap();
        let a = random_query(&mut r, 2);
        let b = random_query(&mut r, 2);
        let ea = idx.evaluate(&a, 2.0).unwrap();
        assert_eq!(idx.evaluate(&Query::Or(vec![a.clone(), a.clone()]), 2.0).unwrap(), ea);
        let and_aa = idx.evaluate(&Query::And(vec![a.clone(), a.clone()]), 2.0).unwrap();
        assert_eq!(
            and_aa.iter().map(|s| (&s.recording_id, s.t_start, s.t_end)).collect::<Vec<_>>(),
            ea.iter().map(|s| (&s.recording_id, s.t_start, s.t_end)).collect::<Vec<_>>()
        );
        for seg in idx.evaluate(&Query::And(vec![a.clone(), b]), 2.0).unwrap() {
            assert!(ea.iter().any(|x| x.recording_id == seg.recording_id
                && x.t_start - 2.0 <= seg.t_start
                && seg.t_end <= x.t_end + 2.0));
        }
    }
}

#[test]
fn accuracy_product_rule() {
    let acc: BTreeMap<String, f64> =
        [("event", 1.0), ("ODD.intersection", 1.0), ("turn", 0.6), ("speed", 0.9)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
    let q = parse_query("event=turn & ODD.intersection=3-way & turn=left").unwrap();
    assert!((estimate_query_accuracy(&q, &acc).unwrap() - 0.6).abs() < 1e-15);
    let q = parse_query("speed>3").unwrap();
    assert_eq!(estimate_query_accuracy(&q, &acc).unwrap(), 0.9);
    let q = parse_query("ODD.signage=stop").unwrap();
    assert!(matches!(estimate_query_accuracy(&q, &acc), Err(IndexError::MissingAccuracy(_))));
}

#[test]
fn latency_probe_shape() {
    assert!(matches!(latency_probe(&[100], &[], 1, 0), Err(IndexError::NoQueries)));
    let rows = latency_probe(&[1000, 10_000], &["event=turn", "speed>10"], 3, 1).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].n, 1000);
}

fn arb_query() -> impl Strategy<Value = Query> {
    let atom = prop_oneof![
        (0usize..4, 0usize..2).prop_map(|(f, v)| {
            let (field, vals) = common::STRING_FIELDS[f];
            Query::atom(field, Op::Eq, vals[v])
        }),
        (0usize..2, 0usize..5, -50.0f64..50.0).prop_map(|(f, o, v)| {
            Query::atom(common::NUMERIC_FIELDS[f], [Op::Eq, Op::Gt, Op::Lt, Op::Ge, Op::Le][o], v)
        }),
    ];
    atom.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Query::And),
            prop::collection::vec(inner, 2..4).prop_map(Query::Or),
        ]
    })
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(q in arb_query()) {
        let text = print_query(&q);
        prop_assert_eq!(parse_query(&text).unwrap(), q, "{}", text);
    }
}

#[test]
fn query_battery_on_labeled_corpus() {
    let corpus = search_corpus();
    let cfg = TaggerConfig::default();
    let mut records = Vec::new();
    for r in &corpus.recordings {
        let ego = r.ego_id();
        for t in tag_recording(r, Some(&corpus.map), &cfg) {
            records.extend(safr_core::index::lower_tag(&t, ego));
        }
        records.extend(derive_odd_records(r, &corpus.map, &cfg));
    }
    let idx = Index::from_records(&records).unwrap();
    for q in [QUERY_LANE_CHANGE, QUERY_STOP_RED, QUERY_TURN_3WAY, QUERY_MERGE] {
        let got = idx.search(q).unwrap();
        let labels: Vec<(String, f64, f64)> =
            corpus.labels[q].iter().map(|l| (l.recording_id.clone(), l.t_start, l.t_end)).collect();
        assert!(!labels.is_empty());
        assert_eq!(precision_recall(&got, &labels, 0.5), (1.0, 1.0), "{q}\n got {got:?}\nwant {labels:?}");
    }
}
