use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const ONE_CHANNEL: &str = r#"{"n1":2,"n2":2,"omega":[[0,0,1,1],[0,3,0,0],[1,0,1,0],[1,0,0,2]]}"#;
const INDEFINITE: &str = r#"{"dim":2,"atoms":[
  {"omega":1.0,"mass":[[1,0],[0,1]]},
  {"omega":2.0,"mass":[[1,0],[0,-0.5]]}]}"#;
const TWO_ATOMS: &str = r#"{"dim":1,"atoms":[{"omega":1.0,"mass":[[1]]},{"omega":2.0,"mass":[[1]]}]}"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_openext"));
    c.env_remove("OPENEXT_TOLERANCES");
    c
}

fn fixture(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn decompose_one_channel_system() {
    let dir = TempDir::new().unwrap();
    let input = fixture(&dir, "one_channel.json", ONE_CHANNEL);
    let v = json(&run(&["decompose", p(&input)]));
    assert_eq!(v["schema"], "openext/v1");
    assert!(v["input_digest"].as_str().unwrap().starts_with("sha256:"));
    let r = &v["result"];
    assert_eq!(r["dims"]["h1c"], 1);
    assert_eq!(r["dims"]["h2c"], 2);
    assert_eq!(r["string_count"], 1);
    assert_eq!(r["bounds_satisfied"], true);
}

#[test]
fn check_one_channel_system() {
    let dir = TempDir::new().unwrap();
    let input = fixture(&dir, "one_channel.json", ONE_CHANNEL);
    let v = json(&run(&["check", p(&input), "--seed", "11"]));
    assert_eq!(v["seed"], 11);
    let r = &v["result"];
    assert_eq!(r["dissipation"]["verdict"], true);
    assert_eq!(r["reconstructibility"]["verdict"], false);
    let w = r["reconstructibility"]["witness"]["eigenvalue"].as_f64().unwrap();
    assert!((w - 3.0).abs() < 1e-12);
}

#[test]
fn validate_names_the_indefinite_atom() {
    let dir = TempDir::new().unwrap();
    let input = fixture(&dir, "bad.json", INDEFINITE);
    let out = run(&["validate", p(&input)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("atom 1"));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["valid"], false);
    assert_eq!(v["result"]["violations"][0]["atom"], 1);

    let good = fixture(&dir, "one_channel.json", ONE_CHANNEL);
    let v = json(&run(&["validate", p(&good)]));
    assert_eq!(v["result"]["kind"], "system");
    assert_eq!(v["result"]["valid"], true);
}

#[test]
fn unknown_command_and_malformed_input_exit_one() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    let dir = TempDir::new().unwrap();
    let junk = fixture(&dir, "junk.json", "{ not json");
    let out = run(&["decompose", p(&junk)]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["decompose", p(&dir.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(run(&["--help"]).status.success());
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let input = fixture(&dir, "one_channel.json", ONE_CHANNEL);
    for cmd in ["decompose", "channels", "canonical", "check"] {
        let a = run(&[cmd, p(&input)]);
        let b = run(&[cmd, p(&input)]);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{cmd}");
        assert!(a.stdout.ends_with(b"}\n"));
    }
}

#[test]
fn tolerances_from_environment_and_flags() {
    let dir = TempDir::new().unwrap();
    let input = fixture(&dir, "one_channel.json", ONE_CHANNEL);
    let tol = fixture(&dir, "tol.json", r#"{"rank": 1e-7}"#);
    let out = bin()
        .env("OPENEXT_TOLERANCES", &tol)
        .args(["channels", p(&input), "--tol-herm", "1e-11"])
        .output()
        .unwrap();
    let v = json(&out);
    assert_eq!(v["tolerances"]["rank"], 1e-7);
    assert_eq!(v["tolerances"]["herm"], 1e-11);
    assert_eq!(v["tolerances"]["orth"], 1e-10);
    let out = run(&["channels", p(&input), "--tol-rank", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn extend_kernel_fit_round_trip() {
    let dir = TempDir::new().unwrap();
    let measure = fixture(&dir, "m.json", TWO_ATOMS);
    let system = dir.path().join("sys.json");
    let out = run(&["extend", p(&measure), "--out", p(&system)]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let s: Value = serde_json::from_str(&fs::read_to_string(&system).unwrap()).unwrap();
    assert_eq!((s["n1"].as_u64(), s["n2"].as_u64()), (Some(1), Some(2)));

    // Kernel of the extension equals e^{−it} + e^{−2it}.
    let kernel = dir.path().join("k.csv");
    assert!(run(&["kernel", p(&system), "--t1", "12.7", "--steps", "127", "--out", p(&kernel)])
        .status
        .success());
    let text = fs::read_to_string(&kernel).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,re_00,im_00"));
    for line in lines {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let (re, im) = ((-f[0]).cos() + (-2.0 * f[0]).cos(), (-f[0]).sin() + (-2.0 * f[0]).sin());
        assert!((f[1] - re).abs() < 1e-12 && (f[2] - im).abs() < 1e-12, "{line}");
    }

    let fitted = json(&run(&["fit", p(&kernel), "--max-atoms", "4"]));
    let atoms = fitted["atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 2);
    for (atom, w) in atoms.iter().zip([1.0, 2.0]) {
        assert!((atom["omega"].as_f64().unwrap() - w).abs() < 1e-6);
    }
}

#[test]
fn simulate_modes() {
    let dir = TempDir::new().unwrap();
    let input = fixture(&dir, "one_channel.json", ONE_CHANNEL);
    let forcing = fixture(&dir, "f.json", r#"{"kind":"sine","vector":[[1,0],[0,0]],"frequency":1.5}"#);
    let report = dir.path().join("eq.json");
    let base = ["simulate", p(&input), "--forcing", p(&forcing), "--dt", "0.01", "--T", "2"];

    let full = run(&[&base[..], &["--full"]].concat());
    assert!(full.status.success());
    let text = String::from_utf8(full.stdout).unwrap();
    assert!(text.starts_with("t,re_1,im_1,re_2,im_2,re_3,im_3,re_4,im_4\n"));
    assert_eq!(text.lines().count(), 202);

    let open = run(&[&base[..], &["--open"]].concat());
    let text = String::from_utf8(open.stdout).unwrap();
    assert!(text.starts_with("t,re_1,im_1,re_2,im_2\n"));

    let both = run(&[&base[..], &["--both", "--report", p(&report)]].concat());
    assert!(both.status.success());
    assert!(String::from_utf8_lossy(&both.stderr).contains("equivalence residual"));
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(v["result"]["relative"].as_f64().unwrap() < 1e-3);

    let out = run(&[&base[..], &["--open", "--full"]].concat());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn lattice_report_and_scan() {
    let v = json(&run(&["lattice", "--d", "1", "--L", "4", "--N", "3", "--J", "1", "--gammas", "0,0,1"]));
    let r = &v["result"];
    assert_eq!(r["frozen_dim_complex"], 18);
    assert_eq!(r["satisfied"], true);
    // J defaults the coupling vectors to the last coordinate directions.
    let w = json(&run(&["lattice", "--d", "1", "--L", "4", "--N", "3", "--J", "1"]));
    assert_eq!(v, w);

    let scan = run(&["lattice", "--d", "1", "--L", "0", "--N", "3", "--J", "1", "--scan", "1,2"]);
    assert_eq!(String::from_utf8(scan.stdout).unwrap(), "L,volume,max_mult,ratio\n1,3,6,2\n2,5,10,2\n");

    let out = run(&["lattice", "--d", "1", "--L", "4", "--N", "3", "--J", "2", "--gammas", "0,0,1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["lattice", "--d", "3", "--L", "6", "--N", "3", "--J", "1"]);
    assert_eq!(out.status.code(), Some(1));
}
