use std::fs;
use std::path::Path;
use std::process::Command;

use ssm_core::cli::{run, RunConfig, Stage};

const DUFFING: &str = r#"
[model]
builtin = "duffing"
params = { gamma = 1.0, zeta = 0.005 }

[ssm]
max_order = 5

[forcing]
epsilon = 0.004
loads = [[0, 1.0]]

[analysis.backbone]
rho_max = 0.6
points = 25

[analysis.frc]
omega = [0.9, 1.15]

[analysis.simulate]
omega = 1.02
t_end = 20.0
dt_out = 0.5
full = true
"#;

fn ssm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssm"))
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv" || e == "bin"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

fn config_in(dir: &Path, text: &str) -> RunConfig {
    let mut cfg = RunConfig::from_toml(text).unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

#[test]
fn identical_runs_give_byte_identical_outputs_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (k, threads) in [1usize, 4, 4].iter().enumerate() {
        let cfg = config_in(&tmp.path().join(format!("run{k}")), DUFFING);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(*threads).build().unwrap();
        pool.install(|| run(&cfg, Stage::All, "run")).unwrap();
        outputs.push(csv_files(&cfg.output_dir));
    }
    assert_eq!(outputs[0].len(), 8);
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn backbone_frequency_column_is_monotone_for_hardening_duffing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(tmp.path(), DUFFING);
    run(&cfg, Stage::Backbone, "backbone").unwrap();
    let text = fs::read_to_string(tmp.path().join("backbone.csv")).unwrap();
    let freq = column(&text, "frequency");
    assert_eq!(freq.len(), 25);
    assert!(freq.windows(2).all(|w| w[1] > w[0]));
    assert!(!tmp.path().join("frc.csv").exists());
}

#[test]
fn manifest_lists_hashes_counts_and_timings() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(tmp.path(), DUFFING);
    let report = run(&cfg, Stage::Frc, "frc").unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["model"], "duffing");
    assert!(manifest["evaluations"]["real_evaluations"].as_u64().unwrap() > 0);
    for stage in ["model", "eig", "compute", "frc"] {
        assert!(manifest["timings"][stage].as_f64().is_some(), "{stage}");
    }
    for out in &report.outputs {
        use sha2::Digest;
        let bytes = fs::read(tmp.path().join(&out.path)).unwrap();
        let hex: String = sha2::Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(hex, out.sha256, "{}", out.path);
    }
    // the echoed configuration reproduces the run description
    let echoed = RunConfig::load(tmp.path().join("config.toml")).unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn frc_csv_has_both_solutions_and_seventeen_digits() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(tmp.path(), DUFFING);
    run(&cfg, Stage::Frc, "frc").unwrap();
    let text = fs::read_to_string(tmp.path().join("frc.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("omega,amp_ti,amp_tv,stable"));
    let first = text.lines().nth(1).unwrap().split(',').next().unwrap();
    let mantissa = first.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17);
    let bif = fs::read_to_string(tmp.path().join("bifurcations.csv")).unwrap();
    assert!(bif.lines().skip(1).all(|l| l.starts_with("SN,")));
}

#[test]
fn exit_codes_distinguish_validation_from_success() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let st = ssm()
        .args(["compute", "--model", "duffing", "--order", "0", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("ssm.max_order"));

    let st = ssm().args(["compute", "--model", "duffing", "--param", "gama=1"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));

    let st = ssm().args(["frobnicate"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));

    let st = ssm()
        .args(["--threads", "2", "compute", "--model", "chain", "--order", "3", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    assert!(out.join("ssm_table.bin").exists());
}

#[test]
fn verify_subcommand_passes_on_builtin_tensors() {
    let st = ssm().args(["verify", "--order", "5"]).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    let text = String::from_utf8_lossy(&st.stdout);
    assert!(text.lines().count() >= 4 && text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn external_model_from_exported_matrices_and_tcp_server() {
    let tmp = tempfile::tempdir().unwrap();
    let st = ssm()
        .args(["model", "export", "chain", "--param", "n=3", "--dir"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0));

    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let chain = ssm_core::models::builtin("chain", &[("n".to_string(), 3.0)].into()).unwrap();
    let nl = chain.model.nonlinearity().clone();
    let server = std::thread::spawn(move || ssm_core::protocol::serve_tcp(nl.as_ref(), listener, Some(1)).unwrap());

    let text = format!(
        "output_dir = {:?}\n[model.external]\nmass = \"mass.mtx\"\ndamping = \"damping.mtx\"\nstiffness = \"stiffness.mtx\"\nendpoint = \"{addr}\"\n[ssm]\nmax_order = 5\n",
        tmp.path().join("ext").display().to_string()
    );
    let cfg_path = tmp.path().join("ext.toml");
    fs::write(&cfg_path, text).unwrap();
    let st = ssm().args(["compute", "--config"]).arg(&cfg_path).output().unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    server.join().unwrap();

    let direct = config_in(
        &tmp.path().join("direct"),
        "[model]\nbuiltin = \"chain\"\nparams = { n = 3 }\n[ssm]\nmax_order = 5\n",
    );
    run(&direct, Stage::Compute, "compute").unwrap();
    let a = fs::read_to_string(tmp.path().join("ext/reduced_dynamics.csv")).unwrap();
    let b = fs::read_to_string(tmp.path().join("direct/reduced_dynamics.csv")).unwrap();
    assert_eq!(a, b);
}
