//! Acceptance report: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.
//!
//! Run with `cargo test -p sharp-cli --test acceptance`. Set
//! `SHARP_FULL_DATASET_DIR` to a converted copy of the full benchmark to
//! also check the full-dataset statistics.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::panic;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use support::checks::{self, Check};

fn sharp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sharp"))
        .args(args)
        .output()
        .expect("run sharp")
}

fn fixture(rel: &str) -> String {
    support::fixtures_dir().join(rel).to_string_lossy().into_owned()
}

fn stdout_json(out: &Output) -> Result<Value, String> {
    serde_json::from_slice(&out.stdout).map_err(|e| {
        format!(
            "stdout is not JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        )
    })
}

fn validator_faults() -> Check {
    let out = sharp(&["validate", &fixture("validate_ds"), "--strict"]);
    let report = stdout_json(&out)?;
    let expected: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("validate_ds/expected_findings.json")).unwrap())
            .map_err(|e| e.to_string())?;
    let got: Vec<(String, String, String)> = report["findings"]
        .as_array()
        .ok_or("no findings array")?
        .iter()
        .map(|f| {
            (
                f["sample_key"]["scene_id"].as_str().unwrap_or("").to_string(),
                f["sample_key"]["sample_id"].as_str().unwrap_or("").to_string(),
                f["kind"].as_str().unwrap_or("").to_string(),
            )
        })
        .collect();
    let mut want: Vec<(String, String, String)> = expected
        .as_array()
        .unwrap()
        .iter()
        .map(|f| {
            (
                f["scene_id"].as_str().unwrap().to_string(),
                f["sample_id"].as_str().unwrap().to_string(),
                f["kind"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    let mut sorted = got.clone();
    sorted.sort();
    want.sort();
    if sorted != want {
        return Err(format!("findings {got:?}, expected {want:?}"));
    }
    let code = out.status.code();
    if code == Some(0) || code.is_none() {
        return Err(format!("--strict exited with {code:?}"));
    }
    if report["sample_count"] != 50 {
        return Err(format!("sample_count {}", report["sample_count"]));
    }
    Ok(format!(
        "50 samples, exactly the 5 injected findings, --strict exit {}",
        code.unwrap()
    ))
}

fn rational(v: &Value) -> f64 {
    v["num"].as_f64().unwrap() / v["den"].as_f64().unwrap()
}

fn stats_json(dir: &str) -> Result<Value, String> {
    let out = sharp(&["stats", dir]);
    if !out.status.success() {
        return Err(format!("stats failed: {}", String::from_utf8_lossy(&out.stderr).trim()));
    }
    stdout_json(&out)
}

fn histogram(v: &Value) -> BTreeMap<String, f64> {
    v.as_object()
        .map(|m| {
            m.iter()
                .map(|(k, x)| (k.clone(), x.as_f64().unwrap_or(f64::NAN)))
                .collect()
        })
        .unwrap_or_default()
}

fn stats_fidelity() -> Check {
    let got = stats_json(&fixture("stats_ds"))?;
    let want: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("stats_ds/expected_stats.json")).unwrap()).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    for key in ["mean_steps", "mean_words"] {
        let g = got[key].as_f64().ok_or(format!("{key} missing"))?;
        if !close(g, rational(&want[key])) {
            return Err(format!("{key}: {g} != {}", rational(&want[key])));
        }
    }
    let hist = histogram(&got["step_histogram"]);
    let want_hist: BTreeMap<String, f64> = want["step_histogram"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| (k.clone(), rational(v)))
        .collect();
    if hist.keys().ne(want_hist.keys()) || hist.iter().any(|(k, v)| !close(*v, want_hist[k])) {
        return Err(format!("step_histogram {hist:?}, expected {want_hist:?}"));
    }
    let mut summary = format!(
        "fixture: mean_steps {}, mean_words {}, histogram {hist:?} exact",
        got["mean_steps"], got["mean_words"]
    );

    match std::env::var("SHARP_FULL_DATASET_DIR") {
        Ok(dir) if Path::new(&dir).is_dir() => {
            let full = stats_json(&dir)?;
            let steps = full["mean_steps"].as_f64().unwrap_or(f64::NAN);
            let words = full["mean_words"].as_f64().unwrap_or(f64::NAN);
            let h = histogram(&full["step_histogram"]);
            let pct = |k: &str| 100.0 * h.get(k).copied().unwrap_or(0.0);
            let within = |v: f64, want: f64, tol: f64| (v - want).abs() <= tol;
            let mut off = Vec::new();
            if !within(steps, 3.98, 0.05) {
                off.push(format!("mean_steps {steps:.3} vs 3.98"));
            }
            if !within(words, 76.67, 1.0) {
                off.push(format!("mean_words {words:.2} vs 76.67"));
            }
            for (k, want) in [("3", 28.07), ("4", 43.97), ("5", 24.46)] {
                if !within(pct(k), want, 0.5) {
                    off.push(format!("{k}-step share {:.2}% vs {want}%", pct(k)));
                }
            }
            if !off.is_empty() {
                return Err(format!("full dataset: {}", off.join("; ")));
            }
            summary.push_str(&format!("; full dataset: {steps:.3} steps, {words:.2} words"));
        }
        _ => summary.push_str("; full dataset not supplied (SHARP_FULL_DATASET_DIR unset), that half not run"),
    }
    Ok(summary)
}

fn end_to_end_determinism() -> Check {
    let kitchen = fixture("scenes/kitchen.json");
    let mut lines = Vec::new();
    for (instruction, seed) in [
        ("I feel sleepy and need something hot to drink", "7"),
        ("I am starving and the kitchen is quiet", "42"),
    ] {
        let args = [
            "plan",
            "--backend",
            "rules",
            "--seed",
            seed,
            "--scene",
            &kitchen,
            "--instruction",
            instruction,
        ];
        let a = sharp(&args);
        let b = sharp(&args);
        if !a.status.success() {
            return Err(format!("plan failed: {}", String::from_utf8_lossy(&a.stderr).trim()));
        }
        if a.stdout != b.stdout {
            return Err(format!("two runs of {instruction:?} differ"));
        }
        let ep = stdout_json(&a)?;
        let steps = ep["steps"].as_array().map_or(0, Vec::len);
        if ep["terminated_by"] != "end-token" || steps == 0 || steps > 8 {
            return Err(format!(
                "{instruction:?}: terminated_by {}, {steps} steps",
                ep["terminated_by"]
            ));
        }
        lines.push(format!("{steps} steps, {} bytes", a.stdout.len()));
    }
    Ok(format!(
        "byte-identical reruns, end-token within 8 steps ({})",
        lines.join("; ")
    ))
}

type Criterion = (&'static str, Box<dyn Fn() -> Check>);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("metric golden suite", Box::new(checks::metrics_golden)),
        ("graph modulation correctness", Box::new(|| checks::dgm_trials(2, 100))),
        ("KNN oracle equivalence", Box::new(|| checks::knn_trials(3, 200))),
        (
            "progressive generation contract",
            Box::new(|| checks::ppg_episodes(4, 50)),
        ),
        ("route round-trip", Box::new(|| checks::route_roundtrip(5, 100))),
        ("turn algebra", Box::new(checks::turn_algebra)),
        ("validator fault injection", Box::new(validator_faults)),
        ("stats fidelity", Box::new(stats_fidelity)),
        ("end-to-end determinism", Box::new(end_to_end_determinism)),
        ("LLM client robustness", Box::new(checks::llm_robustness)),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(panic::AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS  {:>2}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2}. {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
