//! End-to-end tests of the `tangent-llg` binary: subcommands, exit codes,
//! and output determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tangent-llg"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tangent-llg-test-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const DESK_CFG: &str = "\
scheme = tps1
theta = 1
k = 0.0221
T = 1
lex = 10
ldm = 20
alpha = 0.08
dmi = bulk
mesh = type1 2 2 1 80 80 10
initial = uniform 0.01,-0.01,0.99989999499949993
output_every = 5
solver_tol = 1e-10
";

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited with a code")
}

#[test]
fn mesh_gen_and_check_roundtrip() {
    let dir = tmp_dir("meshgen");
    let mesh_path = dir.join("box.tet");
    let out = bin()
        .args([
            "mesh", "gen", "--type", "1", "--nx", "2", "--ny", "2", "--nz", "1",
        ])
        .args(["--size", "2.0,2.0,1.0", "--out"])
        .arg(&mesh_path)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{:?}", out);
    let check = bin()
        .args(["mesh", "check"])
        .arg(&mesh_path)
        .output()
        .unwrap();
    assert_eq!(code(&check), 0);
    let text = String::from_utf8(check.stdout).unwrap();
    assert!(text.contains("cells:           24"), "{text}");
    assert!(text.contains("angle condition: true"), "{text}");
}

#[test]
fn mesh_check_reports_type2_failure() {
    let dir = tmp_dir("meshcheck2");
    let mesh_path = dir.join("box2.tet");
    let gen = bin()
        .args([
            "mesh", "gen", "--type", "2", "--nx", "1", "--ny", "1", "--nz", "1",
        ])
        .args(["--size", "1,1,1", "--out"])
        .arg(&mesh_path)
        .output()
        .unwrap();
    assert_eq!(code(&gen), 0);
    let check = bin()
        .args(["mesh", "check"])
        .arg(&mesh_path)
        .output()
        .unwrap();
    assert_eq!(code(&check), 0);
    let text = String::from_utf8(check.stdout).unwrap();
    assert!(text.contains("angle condition: false"), "{text}");
}

#[test]
fn mesh_check_missing_file_is_config_error() {
    let out = bin()
        .args(["mesh", "check", "/nonexistent/mesh.tet"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn run_writes_deterministic_outputs() {
    let dir = tmp_dir("run");
    let cfg_path = dir.join("desk.cfg");
    write(&cfg_path, DESK_CFG);
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out_dir in [&out_a, &out_b] {
        let out = bin()
            .args(["run", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(out_dir)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let csv_a = std::fs::read(out_a.join("timeseries.csv")).unwrap();
    let csv_b = std::fs::read(out_b.join("timeseries.csv")).unwrap();
    assert!(!csv_a.is_empty());
    assert_eq!(csv_a, csv_b, "reruns must be byte-identical");
    let text = String::from_utf8(csv_a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,E_total,E_exchange,E_dmi,mx,my,mz,v_l2,constraint_l1,stability_ok"
    );
    // mz column of the first row starts at sqrt(0.9998)
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    let mz: f64 = first[6].parse().unwrap();
    assert!((mz - (1.0f64 - 2.0 * 0.0001).sqrt()).abs() < 1e-12, "{mz}");
    assert!(out_a.join("final.vtk").exists());
}

#[test]
fn run_with_bad_config_exits_one() {
    let dir = tmp_dir("badcfg");
    let cfg_path = dir.join("bad.cfg");
    write(&cfg_path, &DESK_CFG.replace("theta", "thetta"));
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("unknown key 'thetta'"), "{err}");
}

#[test]
fn run_with_infeasible_tps2_step_is_a_config_error() {
    let dir = tmp_dir("tps2guard");
    let cfg_path = dir.join("guard.cfg");
    // huge k for a strongly DMI-dominated material: ellipticity fails
    write(
        &cfg_path,
        "\
scheme = tps2
k = 0.5
T = 1
lex = 1
ldm = 10
alpha = 0.1
dmi = bulk
mesh = type1 1 1 1 1 1 1
initial = uniform 0,0,1
",
    );
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("threshold"), "{err}");
}

#[test]
fn unknown_cli_arguments_exit_one() {
    let out = bin().args(["run", "--confg", "x"]).output().unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn solver_failure_exits_two_and_writes_partial_output() {
    let dir = tmp_dir("partial");
    let cfg_path = dir.join("tight.cfg");
    // unreachable solver tolerance forces a mid-run failure at step 0
    write(
        &cfg_path,
        &DESK_CFG.replace("solver_tol = 1e-10", "solver_tol = 1e-306"),
    );
    let out_dir = dir.join("out");
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("timeseries.csv")).unwrap();
    // initial diagnostics row survives as partial output
    assert_eq!(csv.lines().count(), 2, "{csv}");
}

#[test]
fn sweep_over_k_writes_one_csv_per_point() {
    let dir = tmp_dir("sweep");
    let cfg_path = dir.join("desk.cfg");
    write(&cfg_path, DESK_CFG);
    let out_dir = dir.join("out");
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&cfg_path)
        .args(["--vary", "k", "--values", "0.0221,0.01105"])
        .arg("--out")
        .arg(&out_dir)
        .env("TANGENT_LLG_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("sweep_k_0.0221_timeseries.csv").exists());
    assert!(out_dir.join("sweep_k_0.01105_timeseries.csv").exists());
}

#[test]
fn sweep_over_h_refines_generated_meshes() {
    let dir = tmp_dir("sweeph");
    let cfg_path = dir.join("desk.cfg");
    write(&cfg_path, DESK_CFG);
    let out_dir = dir.join("out");
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&cfg_path)
        .args(["--vary", "h", "--values", "1,2"])
        .arg("--out")
        .arg(&out_dir)
        .env("TANGENT_LLG_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("sweep_h_1_timeseries.csv").exists());
    assert!(out_dir.join("sweep_h_2_timeseries.csv").exists());
}

#[test]
fn preset_configs_parse() {
    let presets = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets");
    for name in ["cuboid.cfg", "cuboid_desk.cfg", "nanodisk_pulse.cfg"] {
        let cfg = tangent_llg::config::parse_config(presets.join(name));
        assert!(cfg.is_ok(), "{name}: {:?}", cfg.err());
    }
    let cfg = tangent_llg::config::parse_config(presets.join("cuboid.cfg")).unwrap();
    assert_eq!(cfg.material.lex, 10.0);
    assert_eq!(cfg.material.ldm, 20.0);
    assert_eq!(cfg.material.alpha, 0.08);
    assert_eq!(cfg.k, 0.0221);
    assert_eq!(cfg.t_final, 200.0);
}
