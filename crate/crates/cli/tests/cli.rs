use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bichroma-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bichroma"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn unknown_key_exits_with_config_error() {
    let dir = scratch("unknown");
    let o = run(&["bands", "--sigma", "3"], &dir);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigma"));
}

#[test]
fn invalid_parameter_exits_with_config_error() {
    let dir = scratch("invalid");
    let o = run(&["bands", "--v1", "-2"], &dir);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["bands", "--n-kappas", "20"], &dir);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bands_output_carries_full_header_and_is_deterministic() {
    let a = scratch("det-a");
    let b = scratch("det-b");
    let args = ["bands", "--phi", "0,pi", "--n-kappas", "41", "--n_bands=3"];
    for dir in [&a, &b] {
        let o = run(&args, dir);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["bands_00.csv", "bands_01.csv", "report.txt"] {
        let x = fs::read(a.join("bands").join(file)).unwrap();
        let y = fs::read(b.join("bands").join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between runs");
    }
    let text = fs::read_to_string(a.join("bands/bands_01.csv")).unwrap();
    let header: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    for key in ["command=bands", "v1=5", "v2=1.56", "cutoff=16", "n_kappas=41", "n_bands=3"] {
        assert!(header.iter().any(|l| l.ends_with(key)), "missing {key}");
    }
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "kappa,E0,E1,E2");
    assert_eq!(rows.len(), 42);
}

#[test]
fn config_file_is_read_and_checked() {
    let dir = scratch("config");
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "phi = pi\nn_kappas = 41\nn_bands = 2\n").unwrap();
    let o = run(&["bands", "--config", cfg.to_str().unwrap()], &dir);
    assert!(o.status.success());
    let report = fs::read_to_string(dir.join("bands/report.txt")).unwrap();
    assert!(report.contains("# n_bands=2"));
    fs::write(&cfg, "window = 0.2\n").unwrap();
    let o = run(&["bands", "--config", cfg.to_str().unwrap()], &dir);
    assert_eq!(o.status.code(), Some(2));
}
