use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_twophoton"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn csv_column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn fig5_rows_conserve_first_photon() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin().args(["--out"]).arg(dir.path()).args(["run", "fig5"]).status().unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(dir.path().join("fig5.csv")).unwrap();
    let sums = csv_column(&text, "P2_plus_P4");
    assert_eq!(sums.len(), 12);
    for s in sums {
        assert!((s - 10.0 / 11.0).abs() < 1e-3, "{s}");
    }
}

#[test]
fn sweep_output_is_deterministic() {
    let run = || {
        let out = bin().args(["sweep"]).arg(config("fig8_sweep.toml")).env("TPD_WORKERS", "2").output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let first = run();
    assert_eq!(first, run());
    let text = String::from_utf8(first).unwrap();
    let body: String = text.lines().skip(1).collect::<Vec<_>>().join("\n");
    let a = csv_column(&body, "alpha.sigma");
    let b = csv_column(&body, "beta.sigma");
    let d = csv_column(&body, "delay");
    let rho = csv_column(&body, "rho2424_inf");
    assert_eq!(rho.len(), 32);
    for i in 0..rho.len() {
        let j = (0..rho.len()).find(|&j| a[j] == b[i] && b[j] == a[i] && d[j] == d[i]).unwrap();
        assert!((rho[i] - rho[j]).abs() < 1e-4);
    }
}

#[test]
fn config_run_and_validate() {
    let out = bin().arg("run").arg(config("exponential_pair.toml")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# steady") && text.contains("# crosscheck"));
    let out = bin().args(["validate", "fig2"]).output().unwrap();
    assert!(out.status.success());
}

#[test]
fn povm_report() {
    let out = bin().arg("povm").arg(config("povm_single.toml")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let trace = text.lines().find(|l| l.starts_with("trace,")).unwrap();
    let v: f64 = trace.split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 4.75).abs() < 0.01, "{v}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[alpha]\nshape = \"gaussian\"\nsigm = 1.0\n").unwrap();
    let out = bin().arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));

    let empty = dir.path().join("empty.toml");
    std::fs::write(&empty, "[[axis]]\nname = \"delay\"\nvalues = []\n").unwrap();
    assert_eq!(bin().arg("sweep").arg(&empty).output().unwrap().status.code(), Some(2));

    assert_eq!(bin().args(["run", "fig42"]).output().unwrap().status.code(), Some(2));

    // grid too coarse for the requested rates
    let coarse = dir.path().join("coarse.toml");
    std::fs::write(&coarse, "[povm]\norder = 1\nstart = 0.0\nend = 10.0\ncells = 10\n").unwrap();
    assert_eq!(bin().arg("povm").arg(&coarse).output().unwrap().status.code(), Some(2));
}
