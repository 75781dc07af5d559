use std::path::{Path, PathBuf};
use std::process::Command;

use astrolabe_cli::run;
use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

struct Outcome {
    code: u8,
    stdout: String,
    stderr: String,
}

impl Outcome {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}", self.stdout))
    }
}

fn astro(store: &Path, args: &[&str]) -> Outcome {
    let mut argv = vec!["astro".to_string(), "--store".into(), store.display().to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn copy_fixture(name: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(name);
    std::fs::copy(fixture(name), &path).unwrap();
    (dir, path)
}

#[test]
fn validate_layered() {
    let (_d, path) = copy_fixture("layered.json");
    let ok = astro(&path, &["--mode", "structural", "validate"]);
    assert_eq!(ok.code, 0, "{}", ok.stderr);
    assert!(ok.stdout.contains("well-formed"));
    let strict = astro(&path, &["validate", "--output", "json"]);
    assert_eq!(strict.code, 1);
    let report = strict.json();
    assert_eq!(report["is_well_formed"], false);
    assert_eq!(report["violations"].as_array().unwrap().len(), 15);
}

#[test]
fn depth_json_golden() {
    let (_d, path) = copy_fixture("layered.json");
    let o = astro(&path, &["--mode", "structural", "--output", "json", "depth"]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.contains("\"m2\": 4"));
    assert!(o.stdout.contains("\"c1\": -1"));
    let v = o.json();
    assert_eq!(v["stabilization_stage"], 4);
    assert_eq!(v["undepthed"]["c1"]["cycle"], serde_json::json!(["c1", "c2", "c3"]));
    // schema-stable across runs
    assert_eq!(astro(&path, &["--mode", "structural", "--output", "json", "depth"]).stdout, o.stdout);
}

#[test]
fn propagate_chain() {
    let (_d, path) = copy_fixture("chain.json");
    let o = astro(&path, &["--mode", "structural", "--json", "propagate", "D"]);
    assert_eq!(o.code, 0);
    assert_eq!(o.json()["affected"], serde_json::json!(["T"]));
    let o = astro(&path, &["--mode", "structural", "--json", "propagate", "T", "--reverse"]);
    assert_eq!(o.json()["affected"], serde_json::json!(["D"]));
    let o = astro(&path, &["--mode", "structural", "propagate", "X"]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("unknown_id"));
}

#[test]
fn read_commands_leave_the_file_byte_identical() {
    let (_d, path) = copy_fixture("mathnet.json");
    let before = std::fs::read(&path).unwrap();
    let reads: &[&[&str]] = &[
        &["validate"],
        &["width"],
        &["depth"],
        &["extract"],
        &["propagate", "D2"],
        &["metrics", "--name", "pagerank"],
        &["metrics", "--name", "betweenness", "--source", "unknown"],
        &["cluster", "--method", "louvain"],
        &["cluster", "--method", "spectral", "-k", "2"],
        &["export", "--format", "dot"],
        &["export", "--format", "network-json"],
    ];
    for args in reads {
        for output in ["human", "json"] {
            let mut full = vec!["--mode", "structural", "--output", output];
            full.extend_from_slice(args);
            let o = astro(&path, &full);
            assert_eq!(o.code, 0, "{args:?}: {}", o.stderr);
            if output == "json" {
                o.json();
            }
        }
    }
    assert_eq!(std::fs::read(&path).unwrap(), before);
    assert!(!path.with_file_name("mathnet.json.lock").exists());
}

#[test]
fn usage_errors_exit_2_without_touching_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    for args in [
        &["metrics", "--name", "fame"][..],
        &["cluster", "--method", "kmeans"],
        &["add-nerve", "--record", "x"],
        &["rm"],
        &["frobnicate"],
        &["--mode", "lax", "init"],
        &["export", "--format", "svg"],
    ] {
        let o = astro(&path, args);
        assert_eq!(o.code, 2, "{args:?}");
        assert!(!o.stderr.is_empty());
        assert!(!path.exists());
    }
    assert_eq!(astro(&path, &["--help"]).code, 0);
}

#[test]
fn store_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    assert_eq!(astro(&path, &["validate"]).code, 1);
    assert_eq!(astro(&path, &["init"]).code, 0);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "{}\n");
    assert_eq!(astro(&path, &["init"]).code, 1);

    let d = astro(&path, &["add-atom", "--record", "definition D"]).stdout.trim().to_string();
    assert_eq!(d, "7ab03d9bb180");
    let t = astro(&path, &["--json", "add-atom", "--record", "theorem T"]).json()["id"]
        .as_str()
        .unwrap()
        .to_string();
    let e = astro(&path, &["add-nerve", "--record", "T depends on D", "--ref", &d, &t]);
    assert_eq!(e.code, 0, "{}", e.stderr);
    let e = e.stdout.trim().to_string();

    let refused = astro(&path, &["--json", "rm", &d]);
    assert_eq!(refused.code, 1);
    let body: Value = serde_json::from_str(refused.stderr.trim()).unwrap();
    assert_eq!(body["code"], "would_break_closure");
    assert_eq!(body["details"]["dependents"], serde_json::json!([e]));

    let bad = astro(&path, &["add-nerve", "--record", "loop", "--ref", &d, &d]);
    assert_eq!(bad.code, 1);
    assert!(bad.stderr.contains("duplicate_ref"));

    assert_eq!(astro(&path, &["validate"]).code, 0);
    assert_eq!(astro(&path, &["rm", &d, &e]).code, 0);
    assert_eq!(astro(&path, &["--json", "width"]).json()["histogram"], serde_json::json!({"0": 1}));
}

#[test]
fn ingest_is_idempotent_and_dry_run_is_pure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let tex = dir.path().join("hb.tex");
    std::fs::write(
        &tex,
        "\\begin{theorem}[Heine-Borel]\nA subset of $\\mathbb{R}^n$ is compact iff closed and bounded.\n\\end{theorem}\n\\begin{proof}\nBy contradiction, extract a sequence ...\n\\end{proof}\n",
    )
    .unwrap();
    let lean = dir.path().join("l.lean");
    std::fs::write(
        &lean,
        "theorem length_append (l1 l2 : List a) : (l1 ++ l2).length = l1.length + l2.length := by\n  simp\n",
    )
    .unwrap();
    astro(&path, &["init"]);
    let before = std::fs::read(&path).unwrap();
    let dry = astro(&path, &["--json", "ingest-tex", tex.to_str().unwrap(), "--dry-run"]);
    assert_eq!(dry.code, 0);
    assert_eq!(dry.json()[0]["result"]["atoms"].as_array().unwrap().len(), 2);
    assert_eq!(std::fs::read(&path).unwrap(), before);

    let first = astro(&path, &["--json", "ingest-tex", tex.to_str().unwrap()]);
    assert_eq!(first.json()["added"], 3);
    let once = std::fs::read(&path).unwrap();
    let again = astro(&path, &["--json", "ingest-tex", tex.to_str().unwrap()]);
    assert_eq!(again.json()["added"], 0);
    assert_eq!(std::fs::read(&path).unwrap(), once);

    let l = astro(&path, &["--json", "ingest-lean", lean.to_str().unwrap()]);
    assert_eq!(l.json()["added"], 3);
    let sk = astro(&path, &["--json", "extract"]).json();
    assert_eq!(sk["nodes"].as_array().unwrap().len(), 4);
    assert_eq!(sk["edges"].as_array().unwrap().len(), 2);
    assert_eq!(astro(&path, &["validate"]).code, 0);
}

#[test]
fn binary_honours_astro_store() {
    let (_d, path) = copy_fixture("chain.json");
    let out = Command::new(env!("CARGO_BIN_EXE_astro"))
        .env("ASTRO_STORE", &path)
        .args(["--mode", "structural", "--output", "json", "propagate", "D"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["affected"], serde_json::json!(["T"]));

    let out = Command::new(env!("CARGO_BIN_EXE_astro")).arg("nonsense").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
