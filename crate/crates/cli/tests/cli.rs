use std::path::Path;
use std::process::{Command, Output};

fn bqp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bqp"))
        .args(args)
        .output()
        .expect("run bqp")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// `# header` separated blocks of the simulate stream.
fn blocks(text: &str) -> Vec<Vec<Vec<String>>> {
    let mut out: Vec<Vec<Vec<String>>> = Vec::new();
    for line in text.lines() {
        if line.starts_with("# seed=") {
            out.push(Vec::new());
        } else if !line.trim().is_empty() {
            out.last_mut()
                .expect("header first")
                .push(line.split_whitespace().map(String::from).collect());
        }
    }
    out
}

#[test]
fn inspect_reports_green_function() {
    let o = bqp(&["inspect", "--model", "A"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("# bqp-report v1\n"));
    let row = text.lines().find(|l| l.starts_with("G 0:")).expect("G row");
    let g00: f64 = row.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((g00 - 17.0 / 9.0).abs() < 1e-10);
    assert!(text.contains("decorability C 3.15"));
    assert!(text.contains("argmax 2"));
}

#[test]
fn divergent_green_exits_3() {
    let o = bqp(&["inspect", "--model", "B"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("diverges"));
}

#[test]
fn malformed_model_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.model");
    std::fs::write(
        &path,
        "model X\nstates 0 1\nmotion\n0 1 1\n1 zero\noffspring\n*: 0 0.5 1 0.5\n",
    )
    .unwrap();
    let o = bqp(&["--config", path.to_str().unwrap(), "inspect"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(bqp(&["inspect", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        bqp(&["simulate", "bmc", "--model", "A", "--x", "9", "--seed", "1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let p = dir.path().join(name);
        let o = bqp(&[
            "simulate",
            "bmc",
            "--model",
            "A",
            "--x",
            "1",
            "--n",
            "10",
            "--seed",
            "7",
            "--workers",
            workers,
            "--out",
            p.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(&p).unwrap()
    };
    let a = run("a.txt", "1");
    assert_eq!(a, run("b.txt", "1"));
    assert_eq!(a, run("c.txt", "2"));
    assert_eq!(blocks(&String::from_utf8(a).unwrap()).len(), 10);
}

#[test]
fn biased_roots_are_blue_at_start() {
    let o = bqp(&[
        "simulate", "biased", "--model", "A", "--x", "0", "--n", "50", "--seed", "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bs = blocks(&stdout(&o));
    assert_eq!(bs.len(), 50);
    for b in bs {
        let roots: Vec<_> = b.iter().filter(|r| r[1] == "-").collect();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0][2], "0");
        assert_eq!(roots[0][3], "blue");
    }
}

#[test]
fn spine_from_2_steps_to_1() {
    let o = bqp(&[
        "simulate", "spine", "--model", "A", "--x", "2", "--n", "200", "--seed", "5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bs = blocks(&stdout(&o));
    assert_eq!(bs.len(), 200);
    assert!(bs.iter().all(|b| b[1][1] == "1"));
    assert!(bs.iter().all(|b| b.last().unwrap()[1] == "0"));
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn interlace_writes_occupation_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = bqp(&[
        "interlace",
        "--model",
        "A",
        "--nu",
        "green-row 0",
        "--B",
        "0",
        "--u",
        "1",
        "--n",
        "10000",
        "--seed",
        "11",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("state,empirical_occupation,exact_target,z_score\n"));
    let rows = csv_rows(&text);
    assert!((rows[0][1] - 17.0 / 9.0).abs() < 1e-10);
    assert!(rows.iter().all(|r| r[2].abs() < 4.0));
    assert_eq!(
        std::fs::read_to_string(out.join("occupation.csv")).unwrap(),
        text
    );
    let samples = std::fs::read_to_string(out.join("samples.txt")).unwrap();
    assert!(samples.starts_with("# bqp-interlacement v1"));
    assert!(Path::new(&out.join("entrance.txt")).exists());
}

#[test]
fn interlace_edge_cases() {
    let o = bqp(&[
        "interlace",
        "--model",
        "A",
        "--nu",
        "green-row:0",
        "--u",
        "0",
        "--n",
        "20",
        "--seed",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(csv_rows(&stdout(&o))
        .iter()
        .all(|r| r.iter().all(|&v| v == 0.0)));
    let o = bqp(&[
        "interlace",
        "--model",
        "B",
        "--nu",
        "green-row 0",
        "--n",
        "20",
        "--seed",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("diverges"));
}

#[test]
fn interlace_reads_measure_files() {
    let dir = tempfile::tempdir().unwrap();
    let nu = dir.path().join("nu.txt");
    let g = [17.0 / 9.0, 20.0 / 9.0, 8.0 / 9.0];
    std::fs::write(&nu, format!("0 {}\n1 {}\n2 {}\n", g[0], g[1], g[2])).unwrap();
    let o = bqp(&[
        "interlace",
        "--model",
        "A",
        "--nu",
        nu.to_str().unwrap(),
        "--n",
        "100",
        "--seed",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    std::fs::write(&nu, "0 1\n1 1\n2 1\n").unwrap();
    let o = bqp(&[
        "interlace",
        "--model",
        "A",
        "--nu",
        nu.to_str().unwrap(),
        "--n",
        "100",
        "--seed",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(3), "not excessive: {}", stderr(&o));
}

#[test]
fn verify_exit_codes() {
    let o = bqp(&["verify", "--criteria", "1,2,3,9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("# bqp-report v1\n"));
    assert_eq!(text.lines().count(), 2 + 4);
    let o = bqp(&["verify", "--criteria", "3", "--corrupt-h", "1.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains(",false,"));
    assert_eq!(bqp(&["verify", "--criteria", "42"]).status.code(), Some(2));
}

#[test]
fn verify_sampling_criteria_at_reduced_scale() {
    let o = bqp(&[
        "verify",
        "--criteria",
        "4,6,7,8",
        "--scale",
        "0.05",
        "--seed",
        "9",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}
