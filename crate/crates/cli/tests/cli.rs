use std::path::Path;
use std::process::Command as Process;

use radial_dichotomy::oracles::bessel_zero;
use radial_dichotomy_cli::output::{axis, tick_step, Plot};
use radial_dichotomy_cli::{parse_config, run, CliError, Command};

const MINIMAL: &str = r#"
command = "eigen-scan"
n = 3
alpha = 0.5

[potential]
kind = "zero"
"#;

fn scan_config(dir: &Path) -> String {
    format!(
        r#"
command = "eigen-scan"
n = 3
alpha = 0.5
l_max = 1
output = "{}"

[scan]
lambda_min = 5.0
lambda_max = 25.0
steps = 60

[tolerances]
refine = 1e-9
"#,
        dir.display()
    )
}

fn read_csv(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let comment = text.lines().next().unwrap().to_string();
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut rows = vec![reader.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(reader.records().map(|r| r.unwrap().iter().map(String::from).collect()));
    (comment, rows)
}

#[test]
fn minimal_config_parses() {
    let cfg = parse_config(MINIMAL).unwrap();
    assert_eq!(cfg.command, Command::EigenScan);
    assert_eq!((cfg.n, cfg.n_sys, cfg.l_max), (3, 1, 4));
    assert_eq!(cfg.alpha, 0.5);
}

#[test]
fn forbidden_alpha_cites_spectral_condition() {
    let text = MINIMAL.replace("alpha = 0.5", "alpha = 1.0");
    match parse_config(&text) {
        Err(e @ CliError::Validation(_)) => {
            assert!(e.to_string().contains("spectral condition"), "{e}");
            assert_eq!(e.exit_code(), 2);
        }
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn missing_command_is_parse_error() {
    let text = MINIMAL.replace("command = \"eigen-scan\"\n", "");
    match parse_config(&text) {
        Err(e @ CliError::Parse { .. }) => {
            assert!(e.to_string().contains("command"), "{e}");
            assert_eq!(e.exit_code(), 2);
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn parse_error_reports_position() {
    let text = "command = \"verify\"\nn = 3\nalpha = [\n";
    let Err(CliError::Parse { line, .. }) = parse_config(text) else { panic!("expected parse error") };
    assert!(line >= 3, "line {line}");
    let text = "command = \"verify\"\nn = \"three\"\nalpha = 0.5\n";
    let Err(CliError::Parse { line, column, .. }) = parse_config(text) else { panic!("expected parse error") };
    assert_eq!((line, column), (2, 5));
}

#[test]
fn validation_collects_every_violation() {
    let text = r#"
command = "dichotomy"
n = 3
alpha = 0.5
radius = 1.0
tau_min = 2.0
[grid]
step = -0.1
[scan]
lambda_min = 5.0
lambda_max = 1.0
"#;
    let Err(CliError::Validation(list)) = parse_config(text) else { panic!("expected validation error") };
    assert_eq!(list.len(), 3, "{list:?}");
    assert!(list.iter().any(|m| m.contains("tau grid not increasing")));
    assert!(list.iter().any(|m| m.contains("grid.step")));
    assert!(list.iter().any(|m| m.contains("scan range")));
}

#[test]
fn unknown_keys_and_manufactured_names_are_rejected() {
    assert!(matches!(parse_config(&format!("bogus = 1\n{MINIMAL}")), Err(CliError::Parse { .. })));
    assert!(matches!(parse_config(&format!("{MINIMAL}\nbogus = 1\n")), Err(CliError::Parse { .. })));
    let text = "command = \"nonlinear\"\nn = 3\nalpha = 0.5\n[nonlinear]\nmanufactured = \"nope\"\n";
    let Err(CliError::Validation(list)) = parse_config(text) else { panic!("expected validation error") };
    assert!(list[0].contains("nope"));
}

#[test]
fn hash_ignores_output_directory() {
    let a = parse_config(MINIMAL).unwrap();
    let mut b = a.clone();
    b.output = "elsewhere".into();
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
    let c = parse_config(&MINIMAL.replace("alpha = 0.5", "alpha = 0.6")).unwrap();
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn eigen_scan_roots_match_bessel_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&scan_config(dir.path())).unwrap();
    run(&cfg).unwrap();
    let (comment, rows) = read_csv(&dir.path().join("roots.csv"));
    assert_eq!(comment, format!("# config-sha256: {}", cfg.hash()));
    assert_eq!(rows[0], ["lambda", "multiplicity", "l"]);
    let roots: Vec<(f64, usize, i64)> =
        rows[1..].iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap())).collect();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!(roots.iter().any(|r| (r.0 - 9.8696044).abs() < 1e-7 && (r.0 - pi2).abs() < cfg.tolerances.refine));
    let j1 = bessel_zero(1, 1).unwrap().powi(2);
    assert_eq!(roots.len(), 2);
    assert_eq!((roots[1].1, roots[1].2), (3, 1));
    assert!((roots[1].0 - j1).abs() < cfg.tolerances.refine);

    let (_, scan) = read_csv(&dir.path().join("scan.csv"));
    assert_eq!(scan[0], ["lambda", "det", "block_l", "bracket_id"]);
    assert_eq!(scan.len() - 1, 60 * 2);
    let brackets: Vec<&Vec<String>> = scan[1..].iter().filter(|r| r[3] != "-1").collect();
    assert_eq!(brackets.len(), 2);
    let svg = std::fs::read_to_string(dir.path().join("determinant.svg")).unwrap();
    assert!(svg.contains("<svg") && svg.contains("version=\"1.1\"") && svg.matches("<polyline").count() == 2);
}

#[test]
fn repeated_runs_are_bit_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let mut cfg = parse_config(&scan_config(dir.path())).unwrap();
        cfg.scan.steps = 30;
        run(&cfg).unwrap();
    }
    for name in ["scan.csv", "roots.csv", "determinant.svg", "summary.txt"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn dichotomy_zero_potential_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "command = \"dichotomy\"\nn = 3\nalpha = 0.5\nl_max = 3\ntau_min = -3.0\noutput = \"{}\"\n[grid]\nstep = 0.25\n",
        dir.path().display()
    );
    let report = run(&parse_config(&text).unwrap()).unwrap();
    let line = report.summary.iter().find(|l| l.contains("closed form")).expect("summary line");
    let dev: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(dev < 1e-9, "{line}");
    let (_, rows) = read_csv(&dir.path().join("projections.csv"));
    assert_eq!(rows.len() - 1, 13);
    assert!(dir.path().join("table.json").exists());
    assert!(dir.path().join("projection_decay.svg").exists());
}

#[test]
fn nonlinear_manufactured_problem_recovers_exact_solution() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"
command = "nonlinear"
n = 3
alpha = 0.5
l_max = 2
tau_min = -5.0
output = "{}"
[grid]
step = 0.05
[nonlinear]
manufactured = "cubic-forced"
"#,
        dir.path().display()
    );
    let report = run(&parse_config(&text).unwrap()).unwrap();
    let line = report.summary.iter().find(|l| l.contains("manufactured")).unwrap();
    let dev: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(dev < 1e-5, "{line}");
    let log = std::fs::read_to_string(dir.path().join("iterations.log")).unwrap();
    assert!(log.starts_with("iteration=1"));
    let (_, rows) = read_csv(&dir.path().join("trajectory.csv"));
    assert_eq!(rows[0][0], "tau");
    assert_eq!(rows[0].len(), 1 + 2 * 2 * 9);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_radial-dichotomy");
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let out = dir.path().join("out");

    let ok = write("verify.toml", "command = \"verify\"\nn = 3\nalpha = 0.5\n");
    let status = Process::new(bin).args(["verify", "--config"]).arg(&ok).arg("--out").arg(&out).output().unwrap().status;
    assert_eq!(status.code(), Some(0));
    assert!(out.join("verify.csv").exists());

    let bad = write("bad.toml", "command = \"verify\"\nn = 3\nalpha = 1.0\n");
    let status = Process::new(bin).args(["verify", "--config"]).arg(&bad).arg("--out").arg(&out).output().unwrap().status;
    assert_eq!(status.code(), Some(2));

    let missing = dir.path().join("absent.toml");
    let status = Process::new(bin).args(["verify", "--config"]).arg(&missing).output().unwrap().status;
    assert_eq!(status.code(), Some(5));

    let mismatch = Process::new(bin).args(["evolve", "--config"]).arg(&ok).arg("--out").arg(&out).output().unwrap().status;
    assert_eq!(mismatch.code(), Some(2));

    let huge = write(
        "huge.toml",
        "command = \"dichotomy\"\nn = 3\nalpha = 0.5\ntau_min = -1.0\n[potential]\nkind = \"constant\"\nvalue = 1e300\n",
    );
    let status = Process::new(bin).args(["dichotomy", "--config"]).arg(&huge).arg("--out").arg(&out).output().unwrap().status;
    assert_eq!(status.code(), Some(3));

    let diverge = write(
        "diverge.toml",
        "command = \"nonlinear\"\nn = 3\nalpha = 0.5\nl_max = 0\ntau_min = -4.0\n[tolerances]\nmax_iter = 2\n[nonlinear]\nmanufactured = \"cubic-forced\"\n",
    );
    let status = Process::new(bin).args(["nonlinear", "--config"]).arg(&diverge).arg("--out").arg(&out).output().unwrap().status;
    assert_eq!(status.code(), Some(4));
}

#[test]
fn svg_axes_use_round_ticks() {
    assert_eq!(tick_step(10.0, 5), 2.0);
    assert_eq!(tick_step(0.37, 6), 0.1);
    let (lo, hi, ticks) = axis(-0.93, 4.2, 6);
    assert_eq!((lo, hi), (-1.0, 5.0));
    assert_eq!(ticks, vec![-1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    let svg = Plot::new("t", "x", "y").with_series("a", vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0), (3.0, 4.0)]).render();
    assert!(svg.contains("viewBox=\"0 0 640 420\""));
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert!(svg.trim_end().ends_with("</svg>"));
}
