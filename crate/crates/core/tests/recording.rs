use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;

use safr_core::recording::*;
use safr_core::synth::{random_recording, write_corpus};
use safr_core::units::{parse_speed, SpeedUnit};

fn write_valid(dir: &std::path::Path, n: usize) -> Vec<PathBuf> {
    (0..n)
        .map(|i| {
            let rec = random_recording(&format!("v{i}"), i as u64, 20.0, 4);
            let p = dir.join(format!("v{i}.jsonl"));
            write_recording_file(&rec, &p).unwrap();
            p
        })
        .collect()
}

fn sort_by_id(mut v: Vec<Recording>) -> Vec<Recording> {
    v.sort_by(|a, b| a.recording_id.cmp(&b.recording_id));
    v
}

#[test]
fn batch_of_valid_files() {
    let dir = tempfile::tempdir().unwrap();
    let paths = write_valid(dir.path(), 8);
    let (recs, report) = ingest_batch(&paths, 4);
    assert_eq!(recs.len(), 8);
    assert_eq!(report.recordings_ok, 8);
    assert_eq!(report.recordings_rejected, 0);
    let on_disk: u64 = paths.iter().map(|p| fs::metadata(p).unwrap().len()).sum();
    assert_eq!(report.bytes_ingested, on_disk);
    if report.wall_time > 0.0 {
        assert!((report.throughput - on_disk as f64 / report.wall_time).abs() <= 1e-6 * report.throughput);
    }
}

#[test]
fn batch_collects_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = write_valid(dir.path(), 6);
    let bad1 = dir.path().join("bad1.jsonl");
    fs::write(&bad1, "{\"t\": 0.0, \"actors\": [{\"id\": \"ego\", \"class\": \"car\", \"x\": 0, \"y\": 0, \"ego\": true}]}\n{\"t\": 0.1, \"actors\": [\n").unwrap();
    let bad2 = dir.path().join("bad2.jsonl");
    fs::write(&bad2, "{\"t\": 0.0, \"actors\": [{\"id\": \"a\", \"class\": \"car\", \"x\": 0, \"y\": 0}]}\n").unwrap();
    paths.insert(2, bad1);
    paths.push(bad2);
    let (recs, report) = ingest_batch(&paths, 1);
    assert_eq!(recs.len(), 6);
    assert_eq!(report.recordings_rejected, 2);
    let reasons: Vec<_> = report.rejections().map(|(_, r)| r.to_string()).collect();
    assert!(reasons[0].contains("line 2"), "{reasons:?}");
    assert!(reasons[1].contains("missing ego"), "{reasons:?}");
    // report survives JSON
    let json = serde_json::to_string(&report).unwrap();
    assert_eq!(serde_json::from_str::<IngestReport>(&json).unwrap(), report);
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let paths = write_corpus(dir.path(), 2_000_000, 5).unwrap();
    let (a, ra) = ingest_batch(&paths, 1);
    let (b, rb) = ingest_batch(&paths, 4);
    // order-normalized comparison
    assert_eq!(sort_by_id(a), sort_by_id(b));
    assert_eq!(ra.files, rb.files);
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    if cores >= 4 {
        assert!(rb.wall_time < ra.wall_time, "4 workers {} s vs 1 worker {} s", rb.wall_time, ra.wall_time);
    } else {
        eprintln!("skipping wall-time comparison: {cores} core(s)");
    }
}

#[test]
fn throughput_curve_rows() {
    let dir = tempfile::tempdir().unwrap();
    let rows = throughput_curve(&[100_000, 400_000, 1_000_000], 1, dir.path(), 1).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.throughput > 0.0 && r.bytes > 0));
    let csv = throughput_csv(&rows);
    assert_eq!(csv.lines().count(), 4);
    // work directories are cleaned up
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn repeated_measurement_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let paths = write_corpus(dir.path(), 3_000_000, 2).unwrap();
    let _warm = ingest_batch(&paths, 1);
    // best of three per measurement damps scheduler noise
    let measure = || (0..3).map(|_| ingest_batch(&paths, 1).1.throughput).fold(0.0, f64::max);
    let (a, b) = (measure(), measure());
    assert!((a - b).abs() <= 0.5 * a.max(b), "{a} vs {b}");
}

#[test]
fn split_pieces_keep_every_frame() {
    let rec = random_recording("g", 3, 30.0, 2);
    let mut text = Vec::new();
    write_recording(&rec, &mut text).unwrap();
    let text = String::from_utf8(text).unwrap();
    // shift the second half 100 s later
    let lines: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i > rec.frames.len() / 2 {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                v["t"] = (v["t"].as_f64().unwrap() + 100.0).into();
                v.to_string()
            } else {
                l.to_string()
            }
        })
        .collect();
    let recs = parse_recording_str(&lines.join("\n"), "x").unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0].recording_id, "g.1");
    assert_eq!(recs.iter().map(|r| r.frames.len()).sum::<usize>(), rec.frames.len());
}

fn frame_line(t: f64, speed: &str, extra: bool) -> String {
    let other = if extra { r#", {"id": "b", "class": "bicycle", "x": 3.0, "y": 1.0}"# } else { "" };
    format!(r#"{{"t": {t}, "actors": [{{"id": "ego", "class": "car", "x": {x}, "y": 0.5, "speed": {speed}, "ego": true}}{other}]}}"#, x = t * 3.0)
}

proptest! {
    #[test]
    fn well_formed_input_parses(n in 2usize..40, dt in 0.01f64..1.0, speeds in prop::collection::vec(0.0f64..60.0, 40), unit in 0usize..4, extra in any::<bool>()) {
        let suffix = ["", "mph", "kmh", "m/s"][unit];
        let lines: Vec<String> = (0..n)
            .map(|k| {
                let s = if suffix.is_empty() { format!("{}", speeds[k]) } else { format!("\"{}{}\"", speeds[k], suffix) };
                frame_line(k as f64 * dt, &s, extra)
            })
            .collect();
        let recs = parse_recording_str(&lines.join("\n"), "p").unwrap();
        prop_assert_eq!(recs.len(), 1);
        prop_assert_eq!(recs[0].frames.len(), n);
        prop_assert!((recs[0].sample_rate_hz - 1.0 / dt).abs() < 1e-6 / dt);
        for f in &recs[0].frames {
            prop_assert_eq!(f.actors.iter().filter(|a| a.is_ego).count(), 1);
            prop_assert!(f.actors.iter().all(|a| a.speed >= 0.0 && a.length > 0.0 && a.width > 0.0));
        }
    }

    #[test]
    fn mangled_input_gives_structured_error(n in 2usize..10, cut in 0usize..400, junk in "[\\[\\]{}:,\"a-z0-9 ]{0,12}") {
        let mut text = (0..n).map(|k| frame_line(k as f64 * 0.1, "5", false)).collect::<Vec<_>>().join("\n");
        let cut = cut.min(text.len());
        text.insert_str(cut, &junk);
        match parse_recording_str(&text, "m") {
            Ok(recs) => prop_assert!(!recs.is_empty()),
            Err(e) => prop_assert!(!e.to_string().is_empty()),
        }
    }

    #[test]
    fn truncated_line_reports_its_number(n in 2usize..10, k in 0usize..10, keep in 1usize..30) {
        let k = k % n;
        let mut lines: Vec<String> = (0..n).map(|i| frame_line(i as f64 * 0.1, "5", false)).collect();
        lines[k].truncate(keep);
        match parse_recording_str(&lines.join("\n"), "m") {
            Err(IngestError::Malformed { line, .. }) => prop_assert_eq!(line, k + 1),
            other => prop_assert!(false, "expected malformed error, got {:?}", other),
        }
    }

    #[test]
    fn unit_round_trip(v in 0.0f64..500.0, u in 0usize..3) {
        let unit = [SpeedUnit::MetersPerSecond, SpeedUnit::KilometersPerHour, SpeedUnit::MilesPerHour][u];
        let si = parse_speed(&format!("{v}{unit}")).unwrap();
        let back = unit.from_si(si);
        prop_assert!((back - v).abs() <= 1e-9 * v.max(1e-300));
    }
}

#[test]
fn canonical_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..4 {
        let rec = random_recording(&format!("c{seed}"), seed, 15.0, 5);
        let p = dir.path().join("c.jsonl");
        write_recording_file(&rec, &p).unwrap();
        let back = parse_recording(&p).unwrap();
        assert_eq!(back, vec![rec]);
    }
}
