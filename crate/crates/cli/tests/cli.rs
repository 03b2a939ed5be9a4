use std::path::Path;
use std::process::{Command, Output};

fn semilab(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_semilab"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const INTERVAL: &str = "[family.named]\nkind = \"interval\"\n";

#[test]
fn bowen_on_the_interval() {
    let dir = tempfile::tempdir().unwrap();
    let o = semilab(dir.path(), INTERVAL, &["bowen"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o).lines().next().unwrap().to_string();
    let delta: f64 = line.strip_prefix("delta ").unwrap().parse().unwrap();
    assert!((delta - 1.0).abs() <= 1e-6, "{line}");
    assert!(dir.path().join("out/bowen.txt").exists());
}

#[test]
fn moran_on_the_snowflake() {
    let dir = tempfile::tempdir().unwrap();
    let o = semilab(dir.path(), "[family.named]\nkind = \"snowflake\"\n", &["moran"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("delta 1.771244\n"), "{}", stdout(&o));
}

#[test]
fn bad_probabilities_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[family.quadratic_pair]\na = [2.0, 0.0]\nkind = \"additive\"\n\
               [tinfty]\nprobabilities = [0.5, 0.4]\nnx = 4\nny = 4\n";
    let o = semilab(dir.path(), cfg, &["tinfty"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("ERROR InvalidInput") && err.contains("probabilities"), "{err}");
}

#[test]
fn unknown_keys_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = semilab(dir.path(), "[family.named]\nkind = \"interval\"\nsize = 3\n", &["bowen"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("size"));
}

#[test]
fn numerical_failure_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // z^2 + 1/4 has only a parabolic fixed point
    let o = semilab(dir.path(), "family.generators = [[[0.25, 0], [0, 0], [1, 0]]]\n", &["bowen"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("ERROR "));
}

#[test]
fn atc_at_half_t1_is_vacuous() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[family.d1d2]\nd1 = 3\nd2 = 2\nb = [0.1, 0.0]\nt1_fraction = 0.5\n[cloud]\npoints = 50000\n";
    let o = semilab(dir.path(), cfg, &["atc"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.starts_with("overlaps 0\nverdict ATC vacuous\n"), "{s}");
}

#[test]
fn outputs_are_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "seed = 5\n[family.quadratic_pair]\na = [2.0, 0.0]\nkind = \"additive\"\n\
               [tinfty]\ntrials = 40\nnx = 24\nny = 24\n[cloud]\npoints = 20000\n[render]\nnx = 64\nny = 64\n";
    let mut seen = Vec::new();
    for threads in ["1", "2", "1"] {
        for cmd in ["tinfty", "render"] {
            let o = semilab(dir.path(), cfg, &["--threads", threads, cmd]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        }
        let a = std::fs::read(dir.path().join("out/coliseum.pgm")).unwrap();
        let b = std::fs::read(dir.path().join("out/julia.pgm")).unwrap();
        seen.push((a, b));
    }
    assert!(seen.windows(2).all(|w| w[0] == w[1]));
    assert!(seen[0].0.starts_with(b"P5\n24 24\n255\n"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "seed = 1\n[family.quadratic_pair]\na = [2.0, 0.0]\nkind = \"additive\"\n\
               [tinfty]\ntrials = 40\nnx = 16\nny = 16\n";
    let read = |args: &[&str]| {
        assert_eq!(semilab(dir.path(), cfg, args).status.code(), Some(0));
        std::fs::read(dir.path().join("out/coliseum.pgm")).unwrap()
    };
    let base = read(&["tinfty"]);
    assert_eq!(read(&["--seed", "1", "tinfty"]), base);
    assert_ne!(read(&["--seed", "2", "tinfty"]), base);
}

#[test]
fn csv_outputs_have_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{INTERVAL}[pressure]\nts = [0.5, 1.0]\nlevels = [3, 4]\n[cloud]\npoints = 20000\n");
    assert_eq!(semilab(dir.path(), &cfg, &["pressure"]).status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("out/pressure.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(!text.contains('\r'));
    assert_eq!(semilab(dir.path(), &cfg, &["dim"]).status.code(), Some(0));
    let dim = std::fs::read_to_string(dir.path().join("out/dim.csv")).unwrap();
    assert!(dim.starts_with("scale,count\n"));
}

#[test]
fn t1_requires_the_d1d2_family() {
    let dir = tempfile::tempdir().unwrap();
    let o = semilab(dir.path(), INTERVAL, &["t1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = semilab(dir.path(), "[family.d1d2]\nd1 = 3\nd2 = 2\nb = [0.1, 0.0]\nt = 0.1\n[t1]\ntol = 1e-4\n", &["t1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let t1: f64 = stdout(&o).lines().next().unwrap().strip_prefix("t1 ").unwrap().parse().unwrap();
    assert!((t1 - 0.4989676).abs() < 2e-4, "{t1}");
}

#[test]
fn tcprobe_writes_its_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[family.quadratic_pair]\na = [2.0, 0.0]\nkind = \"translation\"\n\
               [tcprobe]\ndirection = { translation = { index = 2 } }\n\
               p = { preperiod = [1], period = [2], hint = [-0.7071, 0] }\n\
               q = { preperiod = [2], period = [1], hint = [-0.7071, 0] }\n\
               radius = 0.05\nn = 8\nradii = [0.01, 0.02, 0.04]\n";
    let o = semilab(dir.path(), cfg, &["tcprobe"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("out/tcprobe.csv")).unwrap();
    assert!(text.starts_with("r,measure_fraction,covering_count\n"));
    assert_eq!(text.lines().count(), 4);
}
