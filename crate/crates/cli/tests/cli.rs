use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_ergm-bayes");

fn karate() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/zachary_y.dat")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("ERGM_BAYES_OUT")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const GWESP: &str = "y ~ edges + gwesp(0.2, fixed=TRUE)";

fn small_fit(out: &Path, seed: &str) {
    ok(&[
        "fit",
        "--data",
        p(&karate()),
        "--formula",
        GWESP,
        "--burn-in",
        "20",
        "--main-iters",
        "120",
        "--aux-iters",
        "1500",
        "--gamma",
        "1",
        "--seed",
        seed,
        "--out",
        p(out),
    ]);
}

#[test]
fn fit_is_reproducible_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    small_fit(&a, "9");
    small_fit(&b, "9");
    for f in [
        "summary.json",
        "trace.csv",
        "acf.csv",
        "figures/diagnostics.svg",
    ] {
        let (x, y) = (fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        assert!(x == y, "{f} differs between identical runs");
    }
    let s = json(&a.join("summary.json"));
    assert_eq!(s["config"]["nchains"], 4);
    assert_eq!(s["config"]["sampler"], "population-ads");
    assert_eq!(s["config"]["sigma_epsilon"], 0.0025);
    assert_eq!(s["summary"]["draws"], 480);
    let header = fs::read_to_string(a.join("trace.csv")).unwrap();
    assert!(header.starts_with("chain,iteration,edges,gwesp.fixed.0.2\n1,1,"));

    let c = dir.path().join("c");
    small_fit(&c, "10");
    assert_ne!(
        fs::read(a.join("trace.csv")).unwrap(),
        fs::read(c.join("trace.csv")).unwrap()
    );
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "burn_in = 7\nmain-iters = 40\naux-iters = 200\nseed = 5\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    ok(&[
        "--config",
        p(&cfg),
        "fit",
        "--data",
        p(&karate()),
        "--formula",
        GWESP,
        "--main-iters",
        "30",
        "--out",
        p(&out),
    ]);
    let s = json(&out.join("summary.json"));
    assert_eq!(s["config"]["burn_in"], 7);
    assert_eq!(s["config"]["main_iters"], 30);
    assert_eq!(s["config"]["seed"], 5);
    // default clamped to the chain length
    assert_eq!(s["config"]["lag_max"], 29);
    assert_eq!(s["config"]["gamma"], 0.5);
}

#[test]
fn single_chain_with_gamma_prints_note() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "fit",
        "--data",
        p(&karate()),
        "--formula",
        "y ~ edges",
        "--nchains",
        "1",
        "--gamma",
        "0.7",
        "--main-iters",
        "30",
        "--burn-in",
        "0",
        "--aux-iters",
        "100",
        "--out",
        p(dir.path()),
    ]);
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("note: nchains = 1"), "{err}");
    assert_eq!(
        json(&dir.path().join("summary.json"))["config"]["sampler"],
        "single-chain"
    );
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(BIN)
        .args([
            "simulate",
            "--nodes",
            "6",
            "--formula",
            "y ~ edges",
            "--theta",
            "-0.5",
            "--aux-iters",
            "50",
        ])
        .env("ERGM_BAYES_OUT", dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(dir.path().join("simulated_y.dat").exists());
    assert!(dir.path().join("simulate.json").exists());
}

#[test]
fn select_then_gof() {
    let dir = tempfile::tempdir().unwrap();
    let models = dir.path().join("models.txt");
    fs::write(
        &models,
        "# candidates\ny ~ edges + gwesp(0.2, fixed=TRUE)\ny ~ edges + gwdegree(0.8, fixed=TRUE)\n",
    )
    .unwrap();
    let out = dir.path().join("sel");
    let text = ok(&[
        "select",
        "--data",
        p(&karate()),
        "--formulae",
        p(&models),
        "--iters",
        "400",
        "--aux-iters",
        "1000",
        "--main-iters",
        "150",
        "--burn-ins",
        "50",
        "--gammas",
        "1,1",
        "--out",
        p(&out),
    ]);
    assert!(text.contains("BEST MODEL"));
    let sel = json(&out.join("selection.json"));
    assert_eq!(sel["iters"], 400);
    assert_eq!(sel["models"].as_array().unwrap().len(), 2);
    let visits: u64 = sel["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["visits"].as_u64().unwrap())
        .sum();
    assert_eq!(visits, 400);
    assert!(out.join("figures/model_probabilities.svg").exists());

    let fit_out = dir.path().join("fit");
    small_fit(&fit_out, "3");
    let gof_out = dir.path().join("gof");
    let text = ok(&[
        "gof",
        "--data",
        p(&karate()),
        "--formula",
        GWESP,
        "--trace",
        p(&fit_out.join("trace.csv")),
        "--sample-size",
        "20",
        "--aux-iters",
        "2000",
        "--n-deg",
        "12",
        "--out",
        p(&gof_out),
    ]);
    assert!(text.contains("Overall band coverage"));
    for fam in ["degree", "distance", "esp"] {
        let csv = fs::read_to_string(gof_out.join(format!("gof/{fam}.csv"))).unwrap();
        assert!(csv.starts_with("bin,observed,q05,q25,q50,q75,q95\n"));
        assert!(gof_out.join(format!("figures/gof_{fam}.svg")).exists());
    }
    assert_eq!(
        fs::read_to_string(gof_out.join("gof/degree.csv"))
            .unwrap()
            .lines()
            .count(),
        13
    );
}

#[test]
fn verify_reports_both_checks() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tri.dat");
    fs::write(
        &data,
        "0 1 1 0 0\n1 0 1 0 0\n1 1 0 0 0\n0 0 0 0 0\n0 0 0 0 0\n",
    )
    .unwrap();
    let text = ok(&[
        "verify",
        "--data",
        p(&data),
        "--formula",
        "y ~ edges",
        "--draws",
        "2000",
        "--main-iters",
        "4000",
        "--out",
        p(dir.path()),
    ]);
    assert!(text.contains("Posterior check"));
    let v = json(&dir.path().join("verify.json"));
    let row = &v["posterior"]["rows"][0];
    let z = (row["mcmc_mean"].as_f64().unwrap() - row["grid_mean"].as_f64().unwrap())
        / row["mean_se"].as_f64().unwrap();
    assert!(z.abs() < 4.0, "z = {z}");
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "fit",
        "--data",
        p(&karate()),
        "--formula",
        "y ~ edges + triangle",
        "--out",
        p(dir.path()),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("column 13"));

    let out = run(&["fit", "--data", "/no/such/file", "--formula", "y ~ edges"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/file"));

    let one = dir.path().join("one.txt");
    fs::write(&one, "y ~ edges\n").unwrap();
    let out = run(&["select", "--data", p(&karate()), "--formulae", p(&one)]);
    assert!(!out.status.success());

    let out = run(&["fit", "--data", p(&karate()), "--formula", "y ~ mutual"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("directed"));
}
