use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_basin-forge"))
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn compile(dir: &Path, machine: &str, stage: &str, out: &str) -> Output {
    let m = data(&format!("machines/{machine}.json"));
    run(&["compile", "--machine", m.to_str().unwrap(), "--stage", stage, "--out", out], dir)
}

#[test]
fn compile_full_erase() {
    let dir = tempfile::tempdir().unwrap();
    let o = compile(dir.path(), "erase", "full", "f.json");
    assert!(o.status.success());
    assert!(stdout(&o).contains("x_halt = (0, 0, 2, 0, 0, 2, 0)"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("f.json")).unwrap()).unwrap();
    assert_eq!(manifest["m"], 2);
    assert_eq!(manifest["stage"], "full");
}

#[test]
fn compile_pair_is_two_dimensional() {
    let dir = tempfile::tempdir().unwrap();
    let o = compile(dir.path(), "increment", "pair", "p.json");
    assert!(o.status.success());
    assert!(stdout(&o).contains("stage pair, dimension 2"));
}

#[test]
fn invalid_machine_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        "{\"m\": 2, \"b\": 2, \"rules\": [\n  {\"q\": 1, \"a\": 0, \"write\": 0, \"move\": \"R\", \"next\": 0},\n  {\"q\": 1, \"a\": 1, \"write\": 0, \"move\": \"R\", \"next\": 1}\n]}\n",
    )
    .unwrap();
    let o = run(&["compile", "--machine", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn simulate_erase_halts_and_loop_does_not() {
    let dir = tempfile::tempdir().unwrap();
    compile(dir.path(), "erase", "full", "erase.json");
    let o = run(&["simulate", "--field", "erase.json", "--w", "35", "--out", "sim.csv"], dir.path());
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("entered B(x_halt,0.125) at t≈") && s.contains("verdict IN"), "{s}");
    let csv = std::fs::read_to_string(dir.path().join("sim.csv")).unwrap();
    assert!(csv.starts_with("# basin-forge simulate") && csv.contains("seed=0"));

    compile(dir.path(), "loop", "full", "loop.json");
    let o = run(&["simulate", "--field", "loop.json", "--w", "5", "--t-max", "50"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("verdict NOT_YET"));
}

#[test]
fn integrator_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    compile(dir.path(), "erase", "full", "erase.json");
    let o = run(&["simulate", "--field", "erase.json", "--w", "35", "--max-steps", "10"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sweep_matches_oracle_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let m = data("machines/erase.json");
    let args = |out: &'static str| {
        vec!["sweep", "--machine", m.to_str().unwrap(), "--w-min", "0", "--w-max", "20", "--alpha", "0.01", "--family", "sinusoidal", "--seed", "7", "--out", out]
    };
    let o = run(&args("a.csv"), dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("21/21 verdicts match"));
    run(&args("b.csv"), dir.path());
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    assert!(String::from_utf8_lossy(&a).starts_with("# basin-forge sweep machine="));
    assert!(String::from_utf8_lossy(&a).contains("seed=7"));

    let o = run(&["sweep", "--machine", m.to_str().unwrap(), "--alpha", "0.5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_manifest_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let m = data("machines/erase.json");
    let run_json = serde_json::json!({
        "machine": m, "w_min": 3, "w_max": 5, "alpha": 0.01, "out": "from_manifest.csv"
    });
    std::fs::write(dir.path().join("run.json"), run_json.to_string()).unwrap();
    let o = run(&["sweep", "--manifest", "run.json", "--w-max", "4"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("w=3..=4"));
    assert!(dir.path().join("from_manifest.csv").exists());
}

#[test]
fn planar_f2_writes_deterministic_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let f = data("fields/f2.json");
    let args = |out: &'static str| vec!["planar", "--field", f.to_str().unwrap(), "--sink", "2", "-k", "8", "--out", out];
    let o = bin().args(args("a.pgm")).current_dir(dir.path()).env("BASIN_FORGE_THREADS", "1").output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("2 sinks, target (1.000000, 0.000000)"));
    run(&args("b.pgm"), dir.path());
    let a = std::fs::read(dir.path().join("a.pgm")).unwrap();
    assert!(a.starts_with(b"P5\n128 128\n255\n"));
    assert_eq!(a, std::fs::read(dir.path().join("b.pgm")).unwrap());
    let legend: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(legend["timeouts"], 0);
    let gamma = std::fs::read_to_string(dir.path().join("a.gamma.csv")).unwrap();
    assert!(gamma.starts_with("curve,x,y\n") && gamma.lines().count() > 10);

    let o = run(&["render", "--input", "a.pgm"], dir.path());
    assert!(o.status.success());
    let png = image::open(dir.path().join("a.png")).unwrap().to_luma8();
    assert_eq!(png.dimensions(), (128, 128));
    // top row is y = +R: the rightmost disk cell in the middle row is the target
    assert_eq!(png.get_pixel(120, 64).0[0], 255);
}

#[test]
fn missed_attractor_exits_4() {
    // sink at the origin, repelling cycle r = 1, attracting cycle r = 2, no hints
    let dir = tempfile::tempdir().unwrap();
    let field = serde_json::json!({
        "name": "two_cycles",
        "fx": "-x*(sqrt(x^2 + y^2) - 1)*(sqrt(x^2 + y^2) - 2) - y",
        "fy": "-y*(sqrt(x^2 + y^2) - 1)*(sqrt(x^2 + y^2) - 2) + x",
        "radius": 3.0
    });
    std::fs::write(dir.path().join("f.json"), field.to_string()).unwrap();
    let o = run(&["planar", "--field", "f.json", "-k", "1", "--level", "4", "--t-max", "20"], dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_thread_count_is_rejected() {
    let o = bin()
        .args(["render", "--input", "missing.pgm"])
        .env("BASIN_FORGE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
