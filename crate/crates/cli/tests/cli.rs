use std::process::Command;

fn vfpgi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vfpgi"))
}

fn write_config(dir: &tempfile::TempDir, text: &str) -> std::path::PathBuf {
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, text).unwrap();
    path
}

const MONOPOLY: &str = r#"
model = "pakes_mcguire"
[params]
theta2 = 0.0
[solver]
lambda = 1e-2
tol = 1e-10
[[algorithms]]
name = "vf_pgi"
[[algorithms]]
name = "vfi_star"
inner_solver = "analytic"
"#;

#[test]
fn lists_models_and_algorithms() {
    let out = vfpgi().arg("list-models").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["growth_elastic", "growth_inelastic", "invest_game", "pakes_mcguire"] {
        assert!(text.contains(key), "{text}");
    }
    let out = vfpgi().arg("list-algorithms").output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 7);
}

#[test]
fn solve_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, MONOPOLY);
    let csv_path = dir.path().join("out.csv");
    let status = vfpgi()
        .args(["solve", cfg.to_str().unwrap(), "--out", csv_path.to_str().unwrap(), "--threads", "2"])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(csv_path).unwrap();
    let rows = vfpgi::bench::parse_csv(&text).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].method, "VF-PGI-Spectral");
    assert!(rows.iter().all(|r| r.conv == 1 && r.linf <= -6.0 && r.j == Some(1)));
}

#[test]
fn markdown_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, MONOPOLY);
    let out = vfpgi().args(["solve", cfg.to_str().unwrap(), "--format", "md"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("| Method |"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn seed_gives_identical_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        r#"
        model = "invest_game"
        [solver]
        lambda = 1e-3
        tol = 1e-10
        [[algorithms]]
        name = "vf_pgi"
        "#,
    );
    let run = |threads: &str| {
        let out = vfpgi()
            .args(["solve", cfg.to_str().unwrap(), "--seed", "11", "--threads", threads])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        let rows = vfpgi::bench::parse_csv(&String::from_utf8(out.stdout).unwrap()).unwrap();
        (rows[0].l1, rows[0].linf, rows[0].iter)
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "model = \"pakes_mcguire\"\nalgorithms = []\n");
    let status = vfpgi().args(["solve", cfg.to_str().unwrap()]).output().unwrap().status;
    assert_eq!(status.code(), Some(1));
    let cfg = write_config(&dir, "model = \"tatonnement\"\n[[algorithms]]\nname = \"vfi\"\n");
    let status = vfpgi().args(["solve", cfg.to_str().unwrap()]).output().unwrap().status;
    assert_eq!(status.code(), Some(1));
    let missing = dir.path().join("missing.toml");
    let status = vfpgi().args(["solve", missing.to_str().unwrap()]).output().unwrap().status;
    assert_eq!(status.code(), Some(1));
}

#[test]
fn unconverged_required_point_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = MONOPOLY.replace("tol = 1e-10", "tol = 1e-10\nmax_iter = 3");
    let cfg = write_config(&dir, &text);
    let out = vfpgi().args(["solve", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let rows = vfpgi::bench::parse_csv(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(rows.iter().all(|r| r.conv == 0 && r.l1.is_nan()));

    let optional = text.replace("name = \"vf_pgi\"", "name = \"vf_pgi\"\nrequired = false")
        .replace("inner_solver = \"analytic\"", "inner_solver = \"analytic\"\nrequired = false");
    let cfg = write_config(&dir, &optional);
    let status = vfpgi().args(["solve", cfg.to_str().unwrap()]).output().unwrap().status;
    assert_eq!(status.code(), Some(0));
}
