use std::path::{Path, PathBuf};

use cocycle_lab_cli::report::{Report, Status};
use cocycle_lab_cli::run::{self, Format, RunOptions};
use cocycle_lab_cli::{main_with_args, scenario};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn cli(args: &[&str]) -> i32 {
    let mut v = vec!["cocycle-lab"];
    v.extend_from_slice(args);
    main_with_args(v)
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn remark_with(expect: &str) -> String {
    format!(
        r#"{{"schema_version": 1, "dimension": 4, "horizon": 126,
            "splitting": {{"unstable": 0, "center": 2, "stable": 2}},
            "source": {{"kind": "gallery", "id": "remark"}},
            "analyses": [{{"kind": "witness", "tau": 0.25}}],
            "expect": {expect}}}"#
    )
}

#[test]
fn gallery_scenarios_exit_zero() {
    let tmp = tempfile::tempdir().unwrap();
    for name in [
        "gallery-remark",
        "gallery-product-basic",
        "gallery-product-obstructed",
        "gallery-katok-linear",
    ] {
        let s = scenarios().join(format!("{name}.json"));
        let out = tmp.path().join(name);
        assert_eq!(
            cli(&["run", s.to_str().unwrap(), out.to_str().unwrap()]),
            0,
            "{name}"
        );
        assert!(out.join("report.json").exists());
    }
}

#[test]
fn remark_series_has_slope_one_quarter_and_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let s = scenarios().join("gallery-remark.json");
    assert_eq!(cli(&["run", s.to_str().unwrap(), out.to_str().unwrap()]), 0);
    let text = std::fs::read_to_string(out.join("theta_series_0.csv")).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,log_theta"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 1022);
    for (n, v) in &rows {
        assert!((v - n / 4.0).abs() <= 1e-12);
    }
    let report: Report =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    match &report.analyses[0] {
        cocycle_lab_cli::report::Outcome::ThetaSeries {
            log_theta, slope, ..
        } => {
            assert!((slope - 0.25).abs() < 1e-12);
            // CSV values parse back to the exact report values.
            for (v, (_, csv)) in log_theta.iter().zip(&rows) {
                assert_eq!(v.to_bits(), csv.to_bits());
            }
        }
        other => panic!("unexpected outcome {other:?}"),
    }
}

#[test]
fn report_round_trips() {
    for name in [
        "gallery-remark",
        "gallery-product-obstructed",
        "random-symplectic",
    ] {
        let sc = scenario::load(&scenarios().join(format!("{name}.json"))).unwrap();
        let (report, _) = run::evaluate(&sc, &RunOptions::default()).unwrap();
        let text = run::report_json(&report);
        let back: Report = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report, "{name}");
        assert_eq!(run::report_json(&back), text);
    }
}

#[test]
fn forward_bunched_expectation_on_remark_mismatches() {
    let tmp = tempfile::tempdir().unwrap();
    let s = write(
        tmp.path(),
        "s.json",
        &remark_with(r#"{"forward_bunched": true}"#),
    );
    let out = tmp.path().join("o");
    assert_eq!(cli(&["run", s.to_str().unwrap(), out.to_str().unwrap()]), 1);
    let report: Report =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.status, Status::Mismatch);
    assert_eq!(report.expectations[0].actual, Some(false));
}

#[test]
fn expect_strict_rejects_undecided_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let s = write(tmp.path(), "s.json", &remark_with(r#"{"dominated": true}"#));
    let out = tmp.path().join("o");
    assert_eq!(cli(&["run", s.to_str().unwrap(), out.to_str().unwrap()]), 0);
    assert_eq!(
        cli(&[
            "run",
            s.to_str().unwrap(),
            out.to_str().unwrap(),
            "--expect-strict"
        ]),
        1
    );
}

#[test]
fn malformed_json_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let s = write(tmp.path(), "bad.json", "{\"schema_version\": 1,");
    let out = tmp.path().join("o");
    assert_eq!(cli(&["run", s.to_str().unwrap(), out.to_str().unwrap()]), 2);
    assert!(!out.exists());
}

#[test]
fn unknown_gallery_id_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let body = remark_with("{}").replace("\"remark\"", "\"nope\"");
    let s = write(tmp.path(), "s.json", &body);
    let out = tmp.path().join("o");
    assert_eq!(cli(&["run", s.to_str().unwrap(), out.to_str().unwrap()]), 2);
    assert!(!out.exists());
}

#[test]
fn unknown_fields_are_rejected_with_their_path() {
    for file in std::fs::read_dir(scenarios()).unwrap() {
        let p = file.unwrap().path();
        if p.extension().is_none_or(|x| x != "json") {
            continue;
        }
        let text = std::fs::read_to_string(&p).unwrap();
        let base: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(scenario::parse(&text).is_ok(), "{}", p.display());
        for (pointer, field) in [
            ("", "extra"),
            ("/source", "extra"),
            ("/analyses/0", "extra"),
        ] {
            let mut v = base.clone();
            v.pointer_mut(pointer)
                .unwrap()
                .as_object_mut()
                .unwrap()
                .insert(field.into(), serde_json::json!(1));
            let err = scenario::parse(&v.to_string()).unwrap_err().to_string();
            assert!(err.contains("extra"), "{}: {err}", p.display());
        }
    }
    let err = scenario::parse(&remark_with("{}").replace("\"tau\"", "\"tua\""))
        .unwrap_err()
        .to_string();
    assert!(err.contains("analyses[0]"), "{err}");
}

#[test]
fn csv_format_writes_flat_report() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenarios().join("gallery-product-basic.json");
    let out = tmp.path().join("o");
    assert_eq!(
        cli(&[
            "run",
            s.to_str().unwrap(),
            out.to_str().unwrap(),
            "--format",
            "csv"
        ]),
        0
    );
    let text = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(text.starts_with("field,value\n"));
    assert!(text.contains("\nstatus,ok\n"));
    assert!(!out.join("report.json").exists());
}

#[test]
fn horizon_override_and_flag_validation() {
    let mut sc = scenario::load(&scenarios().join("gallery-remark.json")).unwrap();
    sc.analyses.truncate(1);
    let opts = RunOptions {
        horizon: Some(126),
        ..RunOptions::default()
    };
    let (report, tables) = run::evaluate(&sc, &opts).unwrap();
    assert_eq!(tables[0].rows.len(), 126);
    assert_eq!(report.provenance.horizon_override, Some(126));
    let tmp = tempfile::tempdir().unwrap();
    let s = scenarios().join("gallery-remark.json");
    let out = tmp.path().join("o");
    assert_eq!(
        cli(&[
            "run",
            s.to_str().unwrap(),
            out.to_str().unwrap(),
            "--threads",
            "0"
        ]),
        2
    );
    assert_eq!(
        cli(&[
            "run",
            s.to_str().unwrap(),
            out.to_str().unwrap(),
            "--tol-scale",
            "-1"
        ]),
        2
    );
    assert_eq!(
        cli(&[
            "run",
            s.to_str().unwrap(),
            out.to_str().unwrap(),
            "--horizon",
            "100"
        ]),
        2
    );
    assert!(!out.exists());
}

#[test]
fn seed_flag_changes_random_sources_only() {
    let sc = scenario::load(&scenarios().join("random-symplectic.json")).unwrap();
    let a = run::evaluate(&sc, &RunOptions::default()).unwrap().0;
    let b = run::evaluate(
        &sc,
        &RunOptions {
            seed: Some(7),
            ..RunOptions::default()
        },
    )
    .unwrap()
    .0;
    let c = run::evaluate(
        &sc,
        &RunOptions {
            seed: Some(8),
            ..RunOptions::default()
        },
    )
    .unwrap()
    .0;
    assert_eq!(a, b);
    assert_ne!(a.analyses, c.analyses);
}

#[test]
fn flatten_command_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let single = scenarios().join("flatten/single.json");
    let out = tmp.path().join("f");
    assert_eq!(
        cli(&["flatten", single.to_str().unwrap(), out.to_str().unwrap()]),
        0
    );
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("flatten.json")).unwrap()).unwrap();
    assert_eq!(rep["certificate"]["passed"], true);
    assert_eq!(rep["certificate"]["circle_count"], 2);
    assert!(out.join("perturbations.csv").exists());

    let edge = scenarios().join("flatten/band-edge.json");
    let out2 = tmp.path().join("g");
    assert_eq!(
        cli(&["flatten", edge.to_str().unwrap(), out2.to_str().unwrap()]),
        3
    );
    assert!(!out2.exists());

    let e = 0.5f64.exp();
    let verify = |b: [[f64; 2]; 2]| {
        serde_json::json!({
            "factors": [[[e, 0.0], [0.0, 1.0 / e]]],
            "eps": 0.6,
            "perturbations": [b],
        })
        .to_string()
    };
    let good = write(tmp.path(), "good.json", &verify([[1.0 / e, 0.0], [0.0, e]]));
    let out3 = tmp.path().join("h");
    assert_eq!(
        cli(&[
            "flatten",
            good.to_str().unwrap(),
            out3.to_str().unwrap(),
            "--verify-only"
        ]),
        0
    );
    let tampered = write(
        tmp.path(),
        "bad.json",
        &verify([[2.0 / e, 0.0], [0.0, 2.0 * e]]),
    );
    let out4 = tmp.path().join("i");
    assert_eq!(
        cli(&[
            "flatten",
            tampered.to_str().unwrap(),
            out4.to_str().unwrap(),
            "--verify-only"
        ]),
        3
    );
    let out5 = tmp.path().join("j");
    assert_eq!(
        cli(&[
            "flatten",
            single.to_str().unwrap(),
            out5.to_str().unwrap(),
            "--verify-only"
        ]),
        2
    );
}

#[test]
fn gallery_listing_is_deterministic() {
    let a = run::gallery_listing();
    assert_eq!(a, run::gallery_listing());
    let ids: Vec<&str> = a
        .lines()
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(
        ids,
        [
            "remark",
            "product-basic",
            "product-obstructed",
            "katok-linear"
        ]
    );
    assert_eq!(cli(&["gallery", "list"]), 0);
}

#[test]
fn csv_format_flag_parses() {
    assert_eq!(Format::default(), Format::Json);
    assert_eq!(cli(&["run"]), 2);
}

#[test]
fn schema_doc_examples_run() {
    let doc = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/scenario-schema.md"),
    )
    .unwrap();
    let mut count = 0;
    let mut rest = doc.as_str();
    while let Some(i) = rest.find("```json scenario\n") {
        let body = &rest[i + "```json scenario\n".len()..];
        let end = body.find("```").unwrap();
        let sc = scenario::parse(&body[..end]).unwrap_or_else(|e| panic!("example {count}: {e}"));
        let (report, _) = run::evaluate(&sc, &RunOptions::default()).unwrap();
        assert_eq!(report.status, Status::Ok, "example {count}");
        count += 1;
        rest = &body[end..];
    }
    assert_eq!(count, 5);
}
