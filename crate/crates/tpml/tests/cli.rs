use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use tpml::csvio;

const TWO_LINES: &str = r#"{
  "directions": [
    {"dimension": 1, "kernel": "wendland_1_1", "mode": "interpolation", "coupling": 4.0,
     "sites": {"equidistant": {"interval": [0.0, 1.0], "max_level": 2}}},
    {"dimension": 1, "kernel": "wendland_1_1", "mode": "interpolation", "coupling": 4.0,
     "sites": {"equidistant": {"interval": [0.0, 1.0], "max_level": 2}}}
  ],
  "weights": [1.0, 1.0],
  "threshold": THRESHOLD
}"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> String {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }
}

fn tpml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tpml")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn two_lines(ell: i64) -> String {
    TWO_LINES.replace("THRESHOLD", &ell.to_string())
}

/// Runs `grid` and writes `point_id,value` samples of `f`.
fn sample(ws: &Workspace, config: &str, f: impl Fn(&[f64]) -> f64, dim: usize) -> (String, Vec<Vec<f64>>) {
    let out = tpml(&["grid", "--config", config]);
    assert!(out.status.success(), "{}", stderr(&out));
    let grid = csvio::read_grid(out.stdout.as_slice(), dim).unwrap();
    let mut text = String::from("point_id,value\n");
    for (id, x) in grid.iter().enumerate() {
        text.push_str(&format!("{id},{}\n", csvio::fmt_f64(f(x))));
    }
    (ws.write("samples.csv", &text), grid)
}

fn fit(ws: &Workspace, config: &str, samples: &str) -> Output {
    tpml(&[
        "fit",
        "--config",
        config,
        "--samples",
        samples,
        "--out",
        &ws.arg("m.tpml"),
    ])
}

fn values(out: &Output) -> Vec<f64> {
    csvio::read_values(out.stdout.as_slice())
        .unwrap()
        .into_iter()
        .map(|r| r.1)
        .collect()
}

#[test]
fn grid_lists_the_union_of_tensor_grids() {
    let ws = Workspace::new();
    let config = ws.write("c.json", &two_lines(1));
    let out = tpml(&["grid", "--config", &config]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "point_id,dir1_c1,dir2_c1");
    assert_eq!(lines.len(), 22);
    assert_eq!(tpml(&["grid", "--config", &config]).stdout, out.stdout);

    let coarse = ws.write("c0.json", &two_lines(0));
    let out = tpml(&["grid", "--config", &coarse, "--out", &ws.arg("g.csv")]);
    assert!(out.status.success());
    let grid = csvio::read_grid(fs::File::open(ws.path("g.csv")).unwrap(), 2).unwrap();
    let mut expected = Vec::new();
    for a in [0.0, 0.5, 1.0] {
        for b in [0.0, 0.5, 1.0] {
            expected.push(vec![a, b]);
        }
    }
    let mut sorted = grid.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(sorted, expected);
}

#[test]
fn invalid_kernel_is_a_config_error_naming_the_field() {
    let ws = Workspace::new();
    let config = ws.write("c.json", &two_lines(1).replacen("wendland_1_1", "gauss", 1));
    let out = tpml(&["grid", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("directions[0].kernel"), "{}", stderr(&out));
}

#[test]
fn incomplete_samples_are_data_errors_listing_ids() {
    let ws = Workspace::new();
    let config = ws.write("c.json", &two_lines(1));
    let samples = ws.write("s.csv", "point_id,value\n0,0.0\n1,0.0\n");
    let out = fit(&ws, &config, &samples);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("20"), "{}", stderr(&out));
    assert!(!ws.path("m.tpml").exists());

    let mut extra = String::from("point_id,value\n");
    for id in 0..22 {
        extra.push_str(&format!("{id},0.0\n"));
    }
    let samples = ws.write("s.csv", &extra);
    let out = fit(&ws, &config, &samples);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("21"), "{}", stderr(&out));
}

#[test]
fn zero_samples_give_the_zero_model() {
    let ws = Workspace::new();
    let config = ws.write("c.json", &two_lines(1));
    let (samples, _) = sample(&ws, &config, |_| 0.0, 2);
    let out = fit(&ws, &config, &samples);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("direction,level,points"));
    let points = ws.write("p.csv", "x,t\n0.1,0.2\n0.7,0.9\n0.5,0.5\n");
    let out = tpml(&["eval", "--model", &ws.arg("m.tpml"), "--points", &points]);
    assert!(out.status.success());
    assert_eq!(values(&out), vec![0.0; 3]);
}

#[test]
fn eval_checks_shapes_and_handles_empty_input() {
    let ws = Workspace::new();
    let config = ws.write("c.json", &two_lines(1));
    let (samples, _) = sample(&ws, &config, |x| x[0] + x[1], 2);
    assert!(fit(&ws, &config, &samples).status.success());
    let wrong = ws.write("p.csv", "a,b,c\n0.1,0.2,0.3\n");
    let out = tpml(&["eval", "--model", &ws.arg("m.tpml"), "--points", &wrong]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    let empty = ws.write("e.csv", "x,t\n");
    let out = tpml(&["eval", "--model", &ws.arg("m.tpml"), "--points", &empty]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "point_id,value\n");
}

#[test]
fn coarsest_interpolation_reproduces_samples() {
    let ws = Workspace::new();
    let config = ws.write("c.json", &two_lines(0));
    let f = |x: &[f64]| (2.0 * x[0]).sin() + x[1] * x[1];
    let (samples, grid) = sample(&ws, &config, f, 2);
    assert!(fit(&ws, &config, &samples).status.success());
    let mut buf = Vec::new();
    csvio::write_points(&grid.concat(), 2, &mut buf).unwrap();
    let points = ws.write("p.csv", std::str::from_utf8(&buf).unwrap());
    let out = tpml(&["eval", "--model", &ws.arg("m.tpml"), "--points", &points]);
    for (v, x) in values(&out).iter().zip(&grid) {
        assert!((v - f(x)).abs() <= 1e-8, "{v} vs {}", f(x));
    }
}

#[test]
fn samples_keyed_by_coordinates_are_accepted() {
    let ws = Workspace::new();
    let config = ws.write("c.json", &two_lines(1));
    let out = tpml(&["grid", "--config", &config]);
    let grid = csvio::read_grid(out.stdout.as_slice(), 2).unwrap();
    let mut text = String::from("x,t,value\n");
    for x in grid.iter().rev() {
        text.push_str(&format!(
            "{},{},{}\n",
            csvio::fmt_f64(x[0]),
            csvio::fmt_f64(x[1]),
            csvio::fmt_f64(x[0] - x[1])
        ));
    }
    let samples = ws.write("s.csv", &text);
    let out = fit(&ws, &config, &samples);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn batch_evaluation_is_order_preserving_and_thread_independent() {
    let ws = Workspace::new();
    let config = ws.write("c.json", &two_lines(2).replace("\"max_level\": 2", "\"max_level\": 3"));
    let (samples, _) = sample(&ws, &config, |x| (x[0] * 3.0).cos() * x[1], 2);
    assert!(fit(&ws, &config, &samples).status.success());
    let mut text = String::from("point_id,x,t\n");
    for i in 0..500 {
        text.push_str(&format!(
            "p{i},{},{}\n",
            (i as f64 * 0.37).fract(),
            (i as f64 * 0.61).fract()
        ));
    }
    let points = ws.write("p.csv", &text);
    let one = tpml(&[
        "--threads",
        "1",
        "eval",
        "--model",
        &ws.arg("m.tpml"),
        "--points",
        &points,
    ]);
    let many = tpml(&[
        "--threads",
        "4",
        "eval",
        "--model",
        &ws.arg("m.tpml"),
        "--points",
        &points,
    ]);
    assert!(one.status.success() && many.status.success());
    assert_eq!(one.stdout, many.stdout);
    let rows = csvio::read_values(one.stdout.as_slice()).unwrap();
    assert_eq!(rows[0].0, "p0");
    assert_eq!(rows[499].0, "p499");
}

#[test]
fn validate_reports_agreement_deterministically() {
    let ws = Workspace::new();
    let config = ws.write("c.json", &two_lines(2).replace("\"max_level\": 2", "\"max_level\": 3"));
    let (samples, _) = sample(&ws, &config, |x| (x[0] + x[1]).exp(), 2);
    let a = tpml(&[
        "validate",
        "--config",
        &config,
        "--samples",
        &samples,
        "--seed",
        "4",
        "--reps",
        "50",
    ]);
    assert_eq!(a.status.code(), Some(0), "{}{}", stdout(&a), stderr(&a));
    assert!(stdout(&a).contains("efficient, nodal, naive"));
    let b = tpml(&[
        "validate",
        "--config",
        &config,
        "--samples",
        &samples,
        "--seed",
        "4",
        "--reps",
        "50",
    ]);
    assert_eq!(a.stdout, b.stdout);

    let guarded = tpml(&[
        "validate",
        "--config",
        &config,
        "--samples",
        &samples,
        "--cost-guard",
        "1",
    ]);
    assert_eq!(guarded.status.code(), Some(0));
    assert!(stdout(&guarded).contains("skipped naive"), "{}", stdout(&guarded));
}

#[test]
fn validate_skips_nodal_for_scattered_levels() {
    let ws = Workspace::new();
    ws.write(
        "sites.csv",
        "level,x\n1,0.0\n1,0.45\n1,1.0\n2,0.1\n2,0.3\n2,0.55\n2,0.8\n2,0.95\n",
    );
    let config = two_lines(1).replacen(
        r#"{"equidistant": {"interval": [0.0, 1.0], "max_level": 2}}"#,
        r#"{"csv": {"path": "sites.csv"}}"#,
        1,
    );
    let config = ws.write("c.json", &config);
    let (samples, _) = sample(&ws, &config, |x| x[0] * x[1] + 1.0, 2);
    let out = tpml(&["validate", "--config", &config, "--samples", &samples]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    let report = stdout(&out);
    assert!(report.contains("skipped nodal"), "{report}");
    assert!(report.contains("efficient vs naive"), "{report}");
}

#[test]
fn thinned_sites_from_a_cloud() {
    let ws = Workspace::new();
    let mut cloud = String::from("x,y\n");
    for i in 0..12 {
        for j in 0..12 {
            cloud.push_str(&format!(
                "{},{}\n",
                (i as f64 + 0.5) / 12.0 + 0.01 * ((i * j) % 3) as f64,
                (j as f64 + 0.5) / 12.0
            ));
        }
    }
    ws.write("cloud.csv", &cloud);
    let config = r#"{
      "directions": [
        {"dimension": 2, "kernel": "wendland_3_1", "mode": "penalized", "coupling": 4.0,
         "lambdas": [1e-4, 1e-5, 1e-6],
         "sites": {"thin": {"path": "cloud.csv", "levels": 3}}},
        {"dimension": 1, "kernel": "wendland_1_2", "mode": "interpolation", "coupling": 6.0,
         "sites": {"equidistant": {"interval": [0.0, 2.0], "max_level": 3}}}
      ],
      "weights": [1.0, 1.5],
      "threshold": 2,
      "representation": "nodal"
    }"#;
    let config = ws.write("c.json", config);
    let (samples, _) = sample(&ws, &config, |x| x[0] - x[1] * x[2], 3);
    let out = fit(&ws, &config, &samples);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = tpml(&["validate", "--config", &config, "--samples", &samples, "--reps", "20"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn convergence_writes_plot_data() {
    let ws = Workspace::new();
    let out = tpml(&[
        "convergence",
        "--target",
        "sinprod3",
        "--levels",
        "1..2",
        "--eval-n",
        "200",
        "--out",
        &ws.arg("e.csv"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = tpml::experiments::read_plot_data(fs::File::open(ws.path("e.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].max_abs < rows[0].max_abs);
    let out = tpml(&["convergence", "--target", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_files_are_reported() {
    let out = tpml(&["grid", "--config", Path::new("/nonexistent/c.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nonexistent"));
}
