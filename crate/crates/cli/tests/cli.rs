//! Black-box tests of the `idexp` binary: exit codes, output schemas, and
//! byte-level determinism, driven through real process invocations.

use std::path::Path;
use std::process::{Command, Output};

use idexp_core::container::{load_model, save_shape};
use idexp_core::{sample_latents, Selection};

fn idexp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idexp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary launches")
}

fn stdout(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).expect("utf-8 stdout")
}

#[test]
fn gen_then_angles_round_trips_the_smallest_prescribed_angle() {
    let dir = tempfile::tempdir().unwrap();
    let angles = "0.3,0.5,0.7,0.9,1.1,1.2,1.3,1.4,1.5,1.5707";
    let gen = idexp(
        dir.path(),
        &[
            "gen",
            "--n",
            "300",
            "--m",
            "10",
            "--k",
            "10",
            "--angles",
            angles,
            "--seed",
            "7",
            "--out",
            "model.idm",
        ],
    );
    assert!(gen.status.success());

    let text = stdout(&idexp(dir.path(), &["angles", "model.idm"]));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("components,smallest_angle"));
    let last = lines.last().expect("curve rows");
    let (components, theta) = last.split_once(',').unwrap();
    assert_eq!(components, "10");
    let theta: f64 = theta.parse().unwrap();
    assert!(
        (theta - 0.3).abs() <= 1e-9,
        "smallest angle {theta} vs prescribed 0.3"
    );
}

#[test]
fn measure_experiment_on_orthogonal_model_reports_unit_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let half_pi = "1.5707963267948966,1.5707963267948966";
    idexp(
        dir.path(),
        &[
            "gen", "--n", "24", "--m", "2", "--k", "2", "--angles", half_pi, "--seed", "3",
            "--out", "orth.idm",
        ],
    );
    let text = stdout(&idexp(
        dir.path(),
        &[
            "experiment",
            "measure",
            "orth.idm",
            "--samples",
            "50000",
            "--seed",
            "5",
        ],
    ));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let ratio_col = header.iter().position(|h| *h == "ratio").unwrap();
    let mut rows = 0;
    for line in lines {
        let ratio: f64 = line.split(',').nth(ratio_col).unwrap().parse().unwrap();
        assert!((ratio - 1.0).abs() <= 1e-6, "ratio {ratio} far from 1");
        rows += 1;
    }
    assert!(rows >= 1);
}

#[test]
fn project_recovers_in_support_latents() {
    let dir = tempfile::tempdir().unwrap();
    idexp(
        dir.path(),
        &[
            "gen",
            "--n",
            "30",
            "--m",
            "3",
            "--k",
            "2",
            "--angles",
            "0.4,1.0",
            "--seed",
            "11",
            "--out",
            "model.idm",
        ],
    );

    // Synthesize a known in-support shape next to the binary's view of the
    // model, then ask the CLI to recover its coefficients.
    let model = load_model(&dir.path().join("model.idm")).unwrap();
    let latents = sample_latents(&model, Selection::Full, 1, 99)
        .unwrap()
        .remove(0);
    let shape = model.synthesize(&latents).unwrap();
    save_shape(&shape, &dir.path().join("shape.idm")).unwrap();

    let text = stdout(&idexp(
        dir.path(),
        &["project", "model.idm", "shape.idm", "--which", "full"],
    ));
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["which"], "full");
    assert!(doc["residual_norm"].as_f64().unwrap() <= 1e-9);
    let recovered: Vec<f64> = doc["id_coeffs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (a, b) in recovered.iter().zip(latents.id_coeffs().iter()) {
        assert!((a - b).abs() <= 1e-9, "recovered {a} vs synthesized {b}");
    }
    assert_eq!(
        doc["reconstruction"].as_array().unwrap().len(),
        model.ambient_dim()
    );
}

#[test]
fn identical_invocations_produce_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |out: &str| {
        idexp(
            dir.path(),
            &[
                "gen", "--n", "30", "--m", "2", "--k", "2", "--seed", "21", "--out", out,
            ],
        )
    };
    gen("a.idm");
    gen("b.idm");
    let a = std::fs::read(dir.path().join("a.idm")).unwrap();
    let b = std::fs::read(dir.path().join("b.idm")).unwrap();
    assert_eq!(a, b, "model files differ between identical invocations");

    let run = |out: &str| {
        idexp(
            dir.path(),
            &[
                "experiment",
                "cross-explain",
                "a.idm",
                "--trials",
                "5",
                "--seed",
                "13",
                "--out",
                out,
            ],
        )
    };
    run("r1");
    run("r2");
    for name in [
        "cross-explain-rows.csv",
        "cross-explain-summary.csv",
        "cross-explain.json",
    ] {
        let first = std::fs::read(dir.path().join("r1").join(name)).unwrap();
        let second = std::fs::read(dir.path().join("r2").join(name)).unwrap();
        assert_eq!(
            first, second,
            "{name} differs between identical invocations"
        );
    }
}

#[test]
fn info_emits_parseable_json_on_request() {
    let dir = tempfile::tempdir().unwrap();
    idexp(
        dir.path(),
        &[
            "gen",
            "--n",
            "30",
            "--m",
            "3",
            "--k",
            "2",
            "--angles",
            "0.25,0.8",
            "--seed",
            "1",
            "--out",
            "model.idm",
        ],
    );
    let text = stdout(&idexp(
        dir.path(),
        &["info", "model.idm", "--format", "json"],
    ));
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["ambient_dim"], 30);
    assert_eq!(doc["id_count"], 3);
    assert_eq!(doc["exp_count"], 2);
    assert_eq!(doc["combined_rank"], 5);
    let smallest = doc["smallest_angle"].as_f64().unwrap();
    assert!((smallest - 0.25).abs() <= 1e-9);

    // The plain rendering is line-oriented key: value text.
    let text = stdout(&idexp(dir.path(), &["info", "model.idm"]));
    assert!(text.lines().any(|l| l == "combined rank: 5 of 5"), "{text}");
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let output = idexp(dir.path(), &["frobnicate"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_1_with_one_diagnostic_line() {
    let dir = tempfile::tempdir().unwrap();
    let output = idexp(dir.path(), &["angles", "missing.idm"]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert_eq!(
        stderr.lines().count(),
        1,
        "diagnostic not single-line: {stderr:?}"
    );
    assert!(
        stderr.starts_with("error: "),
        "unexpected diagnostic: {stderr:?}"
    );
}
