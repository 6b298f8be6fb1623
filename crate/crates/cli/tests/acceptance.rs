//! End-to-end acceptance for the command line: the simulate -> estimate ->
//! interaction pipeline must run clean, rerun byte-identically, and fail
//! with the documented exit codes on bad inputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mixshift")
}

fn run(config: &Path, sub: &str) -> std::process::Output {
    Command::new(bin())
        .arg("--config")
        .arg(config)
        .arg(sub)
        .output()
        .expect("binary runs")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mixshift_acceptance_{tag}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn policies_toml() -> &'static str {
    r#"
[[policies]]
name = "joint"
[[policies.shifts]]
[policies.shifts.components.a1]
kind = "additive"
value = -0.5
[policies.shifts.components.a2]
kind = "additive"
value = -0.5

[[policies]]
name = "only_a2"
[[policies.shifts]]
[policies.shifts.components.a2]
kind = "additive"
value = -0.5

[[policies]]
name = "only_a1"
[[policies.shifts]]
[policies.shifts.components.a1]
kind = "additive"
value = -0.5
"#
}

#[test]
fn criterion_9_end_to_end_cli() {
    let start = std::time::Instant::now();
    let work = temp_dir("pipeline");

    // --- simulate from the interaction DGP, twice, byte-identical ---
    for out in ["sim_a", "sim_b"] {
        let cfg = format!(
            "seed = 31\noutput_dir = \"{}\"\n{}\n[simulate]\ndgp = \"single_time_interaction\"\nn = 800\ntruth_draws = 200000\n",
            work.join(out).display(),
            policies_toml(),
        );
        let cfg_path = work.join(format!("{out}.toml"));
        fs::write(&cfg_path, cfg).unwrap();
        let output = run(&cfg_path, "simulate");
        assert!(
            output.status.success(),
            "simulate failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    let ds_a = fs::read(work.join("sim_a/dataset.csv")).unwrap();
    let ds_b = fs::read(work.join("sim_b/dataset.csv")).unwrap();
    assert_eq!(ds_a, ds_b, "simulated datasets differ between reruns");
    let truth_a = fs::read(work.join("sim_a/truth.json")).unwrap();
    let truth_b = fs::read(work.join("sim_b/truth.json")).unwrap();
    assert_eq!(truth_a, truth_b, "truth files differ between reruns");
    let truth_text = String::from_utf8(truth_a).unwrap();
    assert!(truth_text.contains("mc_se"), "truth.json must report the MC standard error");

    // --- estimate + interaction on the simulated data, twice each ---
    let analysis_cfg = |out: &str| {
        format!(
            r#"seed = 7
output_dir = "{}"

[dataset]
path = "{}"
[dataset.schema]
format = "long"
id = "id"
time = "time"
exposures = ["a1", "a2"]
covariates = ["l1"]
censoring = "next_observed"
outcome = "y"
{}
[estimation]
estimator = "tmle"
folds = 5

[learners]
roster = ["mean", "linear"]
inner_folds = 5

[interaction]
policies = ["joint", "only_a2", "only_a1"]
"#,
            work.join(out).display(),
            work.join("sim_a/dataset.csv").display(),
            policies_toml(),
        )
    };
    for out in ["est_a", "est_b"] {
        let cfg_path = work.join(format!("{out}.toml"));
        fs::write(&cfg_path, analysis_cfg(out)).unwrap();
        let output = run(&cfg_path, "estimate");
        assert!(
            output.status.success(),
            "estimate failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        let output = run(&cfg_path, "interaction");
        assert!(
            output.status.success(),
            "interaction failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    for file in ["estimates.json", "contrasts.csv", "interaction.json"] {
        let a = fs::read(work.join("est_a").join(file)).unwrap();
        let b = fs::read(work.join("est_b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between reruns");
    }
    let interaction: serde_json::Value =
        serde_json::from_slice(&fs::read(work.join("est_a/interaction.json")).unwrap()).unwrap();
    assert!(interaction["p_value"].is_number());
    assert!(interaction["statistic"].is_number());

    // --- exit codes ---
    // 2: config error (unknown key, strict parsing)
    let bad_cfg = work.join("bad.toml");
    fs::write(&bad_cfg, "seed = 1\nnot_a_real_key = true\n").unwrap();
    let output = run(&bad_cfg, "ingest-check");
    assert_eq!(output.status.code(), Some(2), "unknown config key must exit 2");

    // 3: data validation error (non-monotone censoring)
    let bad_csv = work.join("bad.csv");
    fs::write(
        &bad_csv,
        "id,time,l1,a1,a2,next_observed,y\ns1,0,0.0,1.0,2.0,0,\ns1,1,0.0,1.5,2.5,1,3.0\n",
    )
    .unwrap();
    let bad_data_cfg = work.join("bad_data.toml");
    fs::write(
        &bad_data_cfg,
        format!(
            "seed = 1\noutput_dir = \"{}\"\n[dataset]\npath = \"{}\"\n[dataset.schema]\nformat = \"long\"\nid = \"id\"\ntime = \"time\"\nexposures = [\"a1\", \"a2\"]\ncovariates = [\"l1\"]\ncensoring = \"next_observed\"\noutcome = \"y\"\n",
            work.join("bad_out").display(),
            bad_csv.display()
        ),
    )
    .unwrap();
    let output = run(&bad_data_cfg, "ingest-check");
    assert_eq!(output.status.code(), Some(3), "censoring violation must exit 3");

    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "[criterion 9] end-to-end CLI: PASS (simulate/estimate/interaction reruns byte-identical; exit codes 0/2/3 verified; {elapsed:.0}s)"
    );
    let _ = fs::remove_dir_all(&work);
}
