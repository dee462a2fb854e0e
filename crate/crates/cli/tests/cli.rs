use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[model]
a = -0.4
b = 0.5
c = 1.0
sigma = 0.3
epsilon = 0.2
g_coeffs = [0.0, 0.0, 0.0, 1.0]

[grid]
t0 = 0.0
dt = 0.01
n_steps = 200

[run]
seed = 3
paths = 4
"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("model.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_asymfilter"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

#[test]
fn expand_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), SMALL, &["expand", "--order", "2", "--r", "0.2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = read(dir.path(), "expansion.csv");
    assert!(csv.starts_with("t,n0,n1,n2,N_raw,N_clipped_r0.2\n"));
    assert_eq!(csv.lines().count(), 202);
    let manifest = read(dir.path(), "manifest.txt");
    for key in ["config_sha256", "seed = 3", "asymfilter_core", "r = [0.2]"] {
        assert!(manifest.contains(key), "{manifest}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut first = Vec::new();
    for _ in 0..2 {
        let o = run(dir.path(), SMALL, &["bench", "--r", "0.2", "--r", "inf"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let files: Vec<String> = ["records.csv", "summary.csv", "sweep.csv", "manifest.txt"]
            .iter()
            .map(|f| read(dir.path(), f))
            .collect();
        if first.is_empty() {
            first = files;
        } else {
            assert_eq!(first, files);
        }
    }
    assert_eq!(first[0].lines().count(), 5);
    assert!(first[2].starts_with("r,mise_n1,mise_n2\n0.2,"));
}

#[test]
fn flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), SMALL, &["simulate", "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(read(dir.path(), "manifest.txt").contains("seed = 9"));
    let a = read(dir.path(), "path.csv");
    run(dir.path(), SMALL, &["simulate"]);
    assert_ne!(a, read(dir.path(), "path.csv"));
}

#[test]
fn linear_commands_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let short = SMALL.replace("n_steps = 200", "n_steps = 50");
    for (cmd, file, cols) in [
        ("filter", "filter.csv", "t,mu,gamma"),
        ("smooth", "smooth.csv", "s,mu_s_t"),
        ("sample-cond", "samples.csv", "t,mean,sample0,sample1"),
    ] {
        let o = run(dir.path(), &short, &[cmd, "--paths", "2"]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
        assert!(read(dir.path(), file).starts_with(cols), "{cmd}");
    }
}

#[test]
fn missing_key_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &SMALL.replace("sigma = 0.3\n", ""), &["expand"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sigma"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_key_and_bad_flags_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &SMALL.replace("paths = 4", "paths = 4\nworkers = 2"),
        &["bench"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("workers"));
    let o = run(dir.path(), SMALL, &["expand", "--r", "fast"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(dir.path(), SMALL, &["sweep", "--r", "0.2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("at least two"));
}

#[test]
fn oversized_expansion_names_term_cap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL
        .replace(
            "[0.0, 0.0, 0.0, 1.0]",
            "[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]",
        )
        .replace("paths = 4", "paths = 4\nmax_degree = 7");
    let o = run(dir.path(), &cfg, &["expand", "--order", "4"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("term cap") && err.lines().count() == 1,
        "{err}"
    );
}
