use fracsource::cli::config::{load, Mode};
use fracsource::cli::{execute, CliError};
use std::path::{Path, PathBuf};
use std::process::Command;

fn scratch_dir(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("fracsource-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(dir: &Path, config: &str, overrides: &[&str]) -> (i32, String) {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fracsource"))
        .arg(&cfg)
        .args(overrides.iter().flat_map(|o| ["--override", o]))
        .current_dir(dir)
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn summary(path: &Path) -> Vec<(String, String)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (k, v) = l.split_once(',').unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn value(rows: &[(String, String)], key: &str) -> f64 {
    rows.iter().find(|(k, _)| k == key).unwrap().1.parse().unwrap()
}

#[test]
fn ml_eval_reports_exponential() {
    let dir = scratch_dir("ml");
    let (code, _) = run(&dir, r#"{"mode": "ml-eval", "alpha": 1, "ml": {"beta": 1, "z": [-1]}, "output": "ml.csv"}"#, &[]);
    assert_eq!(code, 0);
    let rows = summary(&dir.join("ml.csv"));
    assert!((value(&rows, "value") - (-1f64).exp()).abs() < 1e-15);
    let table = std::fs::read_to_string(dir.join("ml.ml.csv")).unwrap();
    assert!(table.starts_with("z,value\n"));
}

#[test]
fn volterra_mode_round_trip() {
    let dir = scratch_dir("volterra");
    let (code, err) = run(
        &dir,
        r#"{"mode": "invert-rho-volterra", "x0": 0.3, "n_steps": 512, "rho": {"profile": "affine"}, "output": "v.csv"}"#,
        &[],
    );
    assert_eq!(code, 0, "{err}");
    let rows = summary(&dir.join("v.csv"));
    assert!(value(&rows, "rel_l2_error") <= 1e-2);
    let rho = std::fs::read_to_string(dir.join("v.rho.csv")).unwrap();
    assert_eq!(rho.lines().next().unwrap(), "t,rho_true,rho_recovered,trace");
    assert_eq!(rho.lines().count(), 514);
}

#[test]
fn caputo_sweep_slope() {
    let dir = scratch_dir("sweep");
    for a in [0.3, 0.5, 0.7] {
        let (code, _) = run(&dir, r#"{"mode": "sweep", "output": "s.csv"}"#, &[&format!("alpha={a}")]);
        assert_eq!(code, 0);
        let slope = value(&summary(&dir.join("s.csv")), "final_slope");
        assert!((slope - (2.0 - a)).abs() < 0.2, "alpha = {a}: {slope}");
    }
}

#[test]
fn exit_codes_name_the_key() {
    let dir = scratch_dir("codes");
    let (code, err) = run(&dir, r#"{"mode": "forward""#, &[]);
    assert_eq!(code, 2, "{err}");
    let (code, err) = run(&dir, r#"{"mode": "forward", "nonsense": 1}"#, &[]);
    assert_eq!(code, 2);
    assert!(err.contains("nonsense"));
    let (code, err) = run(&dir, r#"{"mode": "forward"}"#, &["alpha=1.2"]);
    assert_eq!(code, 3);
    assert!(err.contains("alpha"));
    let (code, err) = run(&dir, r#"{"mode": "invert-rho-volterra"}"#, &[]);
    assert_eq!(code, 3);
    assert!(err.contains("x0"));
    // φ_2 vanishes at the midpoint
    let (code, err) = run(
        &dir,
        r#"{"mode": "invert-rho-volterra", "x0": 0.5, "n_modes": 8, "g": {"profile": "mode", "n": 2}}"#,
        &[],
    );
    assert_eq!(code, 4, "{err}");
    let (code, _) = run(&dir, r#"{"mode": "forward"}"#, &["broken"]);
    assert_eq!(code, 2);
}

#[test]
fn overrides_reach_nested_keys() {
    let cfg = load(
        r#"{"mode": "forward", "solver": {"m_max": 5}}"#,
        &[
            "mode=invert-rho-fixedpoint".into(),
            "solver.k=2.5".into(),
            r#"rho={"profile": "sign_alternating", "changes": 3}"#.into(),
            "omega=[0.1, 0.2]".into(),
        ],
    )
    .unwrap();
    assert_eq!(cfg.mode, Mode::InvertRhoFixedpoint);
    assert_eq!(cfg.solver.k, Some(2.5));
    assert_eq!(cfg.solver.m_max, 5);
    assert_eq!(cfg.omega, Some((0.1, 0.2)));
    assert!(matches!(load("{}", &["a.b=1".into()]), Err(CliError::Parse { .. })));
}

#[test]
fn fixed_point_history_and_sign_diagnostics() {
    let cfg = load(
        r#"{"mode": "invert-rho-fixedpoint", "x0": 0.4, "n_modes": 32, "n_steps": 128,
            "rho": {"profile": "sign_alternating", "changes": 2}, "solver": {"m_max": 80, "tol": 0}}"#,
        &[],
    )
    .unwrap();
    cfg.validate().unwrap();
    let out = execute(&cfg).unwrap();
    let hist = out.table("history").unwrap();
    assert_eq!(hist.rows.len(), 80);
    let changes = match out.get("sign_changes").unwrap() {
        fracsource::cli::output::Cell::Int(v) => *v,
        other => panic!("{other:?}"),
    };
    assert_eq!(changes, 2);
}

#[test]
fn interior_mode_runs_with_estimated_k() {
    let cfg = load(
        r#"{"mode": "invert-g-interior", "n_modes": 8, "n_steps": 48, "omega": [0.2, 0.8],
            "g": {"profile": "sine_bump", "center": 0.5, "width": 0.6}, "solver": {"m_max": 30}}"#,
        &[],
    )
    .unwrap();
    cfg.validate().unwrap();
    let out = execute(&cfg).unwrap();
    let hist = out.table("history").unwrap();
    let res: Vec<f64> = hist
        .column("residual")
        .unwrap()
        .iter()
        .map(|c| match c {
            fracsource::cli::output::Cell::Num(v) => *v,
            _ => unreachable!(),
        })
        .collect();
    assert!(res[3..].windows(2).all(|w| w[1] <= w[0]));
}
