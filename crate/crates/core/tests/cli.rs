use std::path::Path;
use std::process::{Command, Output};

use hpclease::config::PRESETS;
use serde_json::Value;

const SMALL: &[&str] = &[
    "--preset",
    "paper",
    "--set",
    "horizon=400",
    "--set",
    "k_concentrators=3",
];
const SMALL_TASK: &[&str] = &[
    "--preset",
    "fig4",
    "--set",
    "horizon=300",
    "--set",
    "k_concentrators=2",
];

fn hpclease(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hpclease"))
        .args(args)
        .env("HPCLEASE_OUT_DIR", out_dir)
        .current_dir(out_dir)
        .output()
        .unwrap()
}

fn code(args: &[&str], dir: &Path) -> i32 {
    hpclease(args, dir).status.code().unwrap()
}

fn cat<'a>(parts: &[&[&'a str]]) -> Vec<&'a str> {
    parts.concat()
}

fn stdout_of(args: &[&str], dir: &Path) -> Vec<u8> {
    let out = hpclease(args, dir);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schema")
        .join(name);
    let schema: Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(validator: &jsonschema::Validator, doc: &Value) {
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&["--help"], d), 0);
    assert_eq!(code(&["run", "--help"], d), 0);
    assert_eq!(code(&[], d), 2);
    assert_eq!(code(&["run"], d), 2);
    assert_eq!(code(&["bogus"], d), 2);
    assert_eq!(code(&["run", "--preset", "nope"], d), 2);
    assert_eq!(
        code(&["run", "--preset", "paper", "--set", "no_such_key=1"], d),
        2
    );
    assert_eq!(code(&["sweep-v", "--preset", "paper", "--v", "5"], d), 2);

    std::fs::write(d.join("bad.json"), "{\"horizon\": ").unwrap();
    assert_eq!(code(&["run", "--config", "bad.json"], d), 3);
    assert_eq!(
        code(&["run", "--preset", "paper", "--set", "horizon=0"], d),
        3
    );
    std::fs::write(d.join("junk.hpct"), b"not a trace").unwrap();
    assert_eq!(
        code(
            &cat(&[&["run", "--trace", "junk.hpct", "-o", "-"], SMALL]),
            d
        ),
        3
    );

    let infeasible = cat(&[
        &["oracle", "--units", "500", "--deadline", "300", "-o", "-"],
        SMALL_TASK,
    ]);
    assert_eq!(code(&infeasible, d), 4);
}

#[test]
fn run_writes_default_file_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = cat(&[&["run"], SMALL]);
    assert_eq!(code(&args, d), 0);
    let first = std::fs::read(d.join("run-seed1.csv")).unwrap();
    assert_eq!(code(&args, d), 0);
    assert_eq!(std::fs::read(d.join("run-seed1.csv")).unwrap(), first);
    let header = String::from_utf8_lossy(&first)
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(header, "slot,cost_dollars,queue_mean,purchases");
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 401);
}

#[test]
fn recorded_trace_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&cat(&[&["gen-trace", "--seed", "4"], SMALL]), d), 0);
    assert!(d.join("trace-seed4.hpct").exists());
    let direct = stdout_of(&cat(&[&["run", "--seed", "4", "-o", "-"], SMALL]), d);
    let replay = stdout_of(
        &cat(&[&["run", "--trace", "trace-seed4.hpct", "-o", "-"], SMALL]),
        d,
    );
    assert_eq!(direct, replay);
}

#[test]
fn sweep_json_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let validator = schema("sweep_result.schema.json");

    let sweep = stdout_of(
        &cat(&[
            &[
                "sweep-v",
                "--v",
                "1,100,10000",
                "--seeds",
                "2",
                "--format",
                "json",
                "-o",
                "-",
            ],
            SMALL,
        ]),
        d,
    );
    let doc: Value = serde_json::from_slice(&sweep).unwrap();
    assert_valid(&validator, &doc);
    assert_eq!(doc["axis"], "v_factor");
    assert_eq!(doc["points"].as_array().unwrap().len(), 3);

    let quality = stdout_of(
        &cat(&[
            &[
                "sweep-quality",
                "--budgets",
                "0,30",
                "--format",
                "json",
                "-o",
                "-",
            ],
            SMALL_TASK,
        ]),
        d,
    );
    let doc: Value = serde_json::from_slice(&quality).unwrap();
    assert_valid(&validator, &doc);
    assert!(doc["points"][0]["oracle_cost"].is_number());
    assert!(doc["reference"].is_object());
}

#[test]
fn presets_match_config_schema() {
    let validator = schema("scenario_config.schema.json");
    for (name, text) in PRESETS {
        let doc: Value = serde_json::from_str(text).unwrap();
        let errors: Vec<String> = validator.iter_errors(&doc).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{name}: {errors:?}");
    }
    let mut bad: Value = serde_json::from_str(PRESETS[0].1).unwrap();
    bad["horizon"] = Value::from(-1);
    assert!(!validator.is_valid(&bad));
}

#[test]
fn compare_lists_every_policy_and_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = String::from_utf8(stdout_of(
        &cat(&[&["compare", "-o", "-"], SMALL_TASK]),
        dir.path(),
    ))
    .unwrap();
    let policies: Vec<&str> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        policies,
        ["lyapunov", "static-1", "static-2", "quality", "oracle"]
    );
}
