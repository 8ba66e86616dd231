use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_robin-eit"))
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .filter(|(name, _)| name != "manifest.json")
        .collect();
    files.sort();
    files
}

#[test]
fn image_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "delta = 0.01\ngrid_resolution = 21\n").unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let status = bin()
            .args(["image", "--quiet", "--seed", "7", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(read_dir_sorted(&out));
    }
    assert_eq!(outputs[0].len(), 13);
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn exit_codes_follow_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.cfg");
    std::fs::write(&bad, "rho = 0.4\nnonsense = 3\n").unwrap();
    let out = bin().arg("forward").arg("--config").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let missing = bin()
        .args(["forward", "--config", "/nonexistent/robin.cfg"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(4));

    // zero operator: imaging has no spectrum to work with
    let out = bin()
        .args(["image", "--quiet", "--set", "gamma=0", "--set", "grid_resolution=5", "--out"])
        .arg(tmp.path().join("z"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn greens_and_sweep_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("g");
    let status = bin()
        .args(["greens", "--quiet", "--z", "0:0", "--z", "0.5:1.0", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("greens_1.csv").exists());

    let out = tmp.path().join("s");
    let status = bin()
        .args([
            "sweep",
            "--quiet",
            "--axis",
            "delta",
            "--values",
            "0,0.01",
            "--set",
            "grid_resolution=11",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 6);
}

#[test]
fn self_check_passes() {
    let out = bin().arg("--self-check").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
}
