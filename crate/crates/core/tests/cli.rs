use std::path::Path;
use std::process::{Command, Output};

const FIG4: &str = include_str!("../fixtures/fig4_davis_skodje_slice.csv");
const FIG5: &str = include_str!("../fixtures/fig5_chiavazzo_methods.csv");

fn geostretch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geostretch")).args(args).output().expect("binary runs")
}

fn data_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').filter_map(|c| c.parse().ok()).collect())
        .collect()
}

#[test]
fn stretch_slice_matches_fixture() {
    let out = geostretch(&["stretch", "slice", "--model", "davis-skodje", "--param", "eta=3", "--fix", "x1=1", "--search", "x2=0.495:0.505"]);
    assert!(out.status.success());
    let rows = data_rows(&String::from_utf8(out.stdout).unwrap());
    let fixture = data_rows(&format!("header\n{}", FIG4.lines().skip(1).collect::<Vec<_>>().join("\n")));
    assert_eq!(rows.len(), 21);
    for (r, f) in rows.iter().zip(&fixture) {
        assert!((r[0] - f[0]).abs() < 1e-15);
        assert!((r[1] - f[1]).abs() <= 1e-9, "{r:?} vs {f:?}");
        assert!((r[2] - f[2]).abs() <= 1e-9, "{r:?} vs {f:?}");
    }
}

#[test]
fn sim_sweep_matches_gsm_fixture() {
    let out = geostretch(&["sim", "sweep", "--model", "chiavazzo", "--slow", "c1=0.1:0.9:16"]);
    assert!(out.status.success());
    let rows = data_rows(&String::from_utf8(out.stdout).unwrap());
    let gsm: Vec<f64> = FIG5.lines().filter(|l| l.starts_with("GSM,")).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(rows.len(), 16);
    for (r, c3) in rows.iter().zip(&gsm) {
        assert!((r[1] - c3).abs() <= 1e-3);
    }
}

#[test]
fn metric_eval_prints_identity_at_equilibrium() {
    let out = geostretch(&["metric", "eval", "--model", "linear", "--point", "0,0"]);
    assert!(out.status.success());
    let rows = data_rows(&String::from_utf8(out.stdout).unwrap());
    for r in rows {
        let expected = if r[0] == r[1] { 1.0 } else { 0.0 };
        assert_eq!(r[2], expected);
    }
}

#[test]
fn rerun_from_echoed_config_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let out = geostretch(&["sim", "sweep", "--model", "davis-skodje", "--param", "eta=5", "--slow", "x1=0.5:2:7", "-o", first.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&first).unwrap();
    // the echo names the output path, so replaying it overwrites the same file
    let cfg = dir.path().join("run.cfg");
    let echo: String = text.lines().take_while(|l| l.starts_with('#')).map(|l| format!("{}\n", &l[2..])).collect();
    std::fs::write(&cfg, echo).unwrap();
    std::fs::remove_file(&first).unwrap();
    let out = geostretch(&["sim", "sweep", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&first).unwrap(), text);
}

#[test]
fn parallel_and_single_threaded_runs_agree() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_geostretch"))
            .args(["sim", "sweep", "--model", "michaelis-menten", "--slow", "x2=0.1:1:10"])
            .env("GEOSTRETCH_THREADS", threads)
            .output()
            .unwrap()
    };
    let a = run("1");
    let b = run("4");
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let bad = run("zero");
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn plot_script_is_written_next_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("slice.csv");
    let out = geostretch(&["fcm", "slice", "--model", "linear", "--fix", "x1=1", "--search", "x2=-2:2", "-o", csv.to_str().unwrap(), "--plot"]);
    assert!(out.status.success());
    assert!(Path::new(&csv.with_extension("gp")).exists());
    let rows = data_rows(&std::fs::read_to_string(&csv).unwrap());
    assert_eq!(rows.len(), 2);
    assert!((rows[0][0] + 1.0).abs() < 1e-8 && (rows[1][0] - 1.0).abs() < 1e-8);
}

#[test]
fn geodesic_verify_exit_status_follows_bound() {
    let ok = geostretch(&["geodesic", "verify", "--model", "davis-skodje", "--start", "2,0.9", "--t-end", "5", "--tol", "1e-10"]);
    assert!(ok.status.success());
    let text = String::from_utf8(ok.stdout).unwrap();
    assert!(text.contains("max residual"));
    assert!(text.contains("unit-speed deviation"));
    let strict = geostretch(&["geodesic", "verify", "--model", "davis-skodje", "--start", "2,0.9", "--bound", "0"]);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn usage_errors_name_the_offending_key() {
    let out = geostretch(&["stretch", "slice", "--model", "davis-skodje", "--fix", "x9=1", "--search", "x2=0:1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("x9"));
    let out = geostretch(&["metric", "eval", "--model", "davis-skodje", "--point", "-1,0"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn reproduce_suites() {
    let out = geostretch(&["reproduce", "paper-figures"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let flipped = geostretch(&["reproduce", "paper-figures", "--flip-riemann-sign"]);
    assert_eq!(flipped.status.code(), Some(1));
    let text = String::from_utf8(flipped.stdout).unwrap();
    let line = text.lines().find(|l| l.contains("Fig4 tangential at x2=0.5")).unwrap();
    assert!(line.contains("-9.476102941176") && line.ends_with("FAIL"), "{line}");
    let a = geostretch(&["reproduce", "invariants", "--seed", "7"]);
    let b = geostretch(&["reproduce", "invariants", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}
