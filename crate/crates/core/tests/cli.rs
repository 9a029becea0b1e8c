use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fcopula(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcopula")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = fcopula(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p).unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

/// Column `name` of a CSV with optional `#` comment lines.
fn column(text: &str, name: &str) -> Vec<String> {
    let lines = data_lines(text);
    let k = lines[0].split(',').position(|h| h == name).unwrap();
    lines[1..]
        .iter()
        .map(|l| l.split(',').nth(k).unwrap().to_string())
        .collect()
}

/// Increasing dates for t < 300.
fn date(t: usize) -> String {
    format!("2000-{:02}-{:02}", 1 + t / 25, 1 + t % 25)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Weak scenario on a 5x5 lattice, 200 replicates.
fn simulate_small(dir: &Path) {
    ok(&[
        "simulate",
        "--scenario",
        "weak",
        "--sites-per-side",
        "5",
        "--reps",
        "200",
        "--seed",
        "3",
        "--out",
        s(dir),
    ]);
}

const FAST_FIT: &[&str] = &[
    "--d0-cap",
    "4",
    "--qmc-samples",
    "32",
    "--qmc-shifts",
    "2",
    "--starts",
    "1",
    "--grid-bbox",
    "4,4,7,7",
    "--grid-spacing",
    "3",
];

#[test]
fn simulate_writes_panel_stations_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    simulate_small(dir.path());
    let panel = read(dir.path().join("panel.csv"));
    let lines = data_lines(&panel);
    assert_eq!(lines.len(), 201);
    assert_eq!(lines[0].split(',').count(), 26);
    assert_eq!(data_lines(&read(dir.path().join("stations.csv"))).len(), 26);
    let truth = read(dir.path().join("truth.csv"));
    assert_eq!(data_lines(&truth)[0], "id,x,y,rate,range");
    assert_eq!(data_lines(&truth).len(), 26);
}

#[test]
fn reruns_are_byte_identical() {
    let run = |dir: &Path| {
        simulate_small(dir);
        let (st, pa) = (dir.join("stations.csv"), dir.join("panel.csv"));
        let mut args = vec![
            "fit",
            "--stations",
            s(&st),
            "--panel",
            s(&pa),
            "--out",
            s(dir),
            "--seed",
            "9",
        ];
        args.extend(FAST_FIT);
        ok(&args);
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(a.path());
    run(b.path());
    for f in ["panel.csv", "stations.csv", "truth.csv", "fits.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn custom_scenario_fields_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("fields.csv");
    // rate = 1 + 0.1 x and range = 0.5 + 0.05 y on the corners of the domain
    fs::write(
        &file,
        "x,y,rate,range\n1,1,1.1,0.55\n10,1,2.0,0.55\n1,10,1.1,1.0\n10,10,2.0,1.0\n",
    )
    .unwrap();
    ok(&[
        "simulate",
        "--scenario",
        "custom",
        "--scenario-file",
        s(&file),
        "--sites-per-side",
        "4",
        "--reps",
        "20",
        "--out",
        s(dir.path()),
    ]);
    let truth = read(dir.path().join("truth.csv"));
    let xs = column(&truth, "x");
    let ys = column(&truth, "y");
    let rates = column(&truth, "rate");
    let ranges = column(&truth, "range");
    for k in 0..xs.len() {
        let (x, y): (f64, f64) = (xs[k].parse().unwrap(), ys[k].parse().unwrap());
        let (r, d): (f64, f64) = (rates[k].parse().unwrap(), ranges[k].parse().unwrap());
        assert!((r - (1.0 + 0.1 * x)).abs() < 1e-12, "rate at ({x}, {y}): {r}");
        assert!((d - (0.5 + 0.05 * y)).abs() < 1e-12, "range at ({x}, {y}): {d}");
    }
}

#[test]
fn malformed_panel_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let st = dir.path().join("stations.csv");
    let pa = dir.path().join("bad.csv");
    fs::write(&st, "id,x,y\na,0,0\nb,1,0\n").unwrap();
    fs::write(&pa, format!("time,a,b\n{},1.0,2.0\n{},1.5,2.5\n", date(2), date(1))).unwrap();
    let out = fcopula(&["fit", "--stations", s(&st), "--panel", s(&pa), "--out", s(dir.path())]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.csv:3"), "{err}");
}

#[test]
fn threshold_is_echoed_in_the_fits_header() {
    let dir = tempfile::tempdir().unwrap();
    simulate_small(dir.path());
    let (st, pa) = (dir.path().join("stations.csv"), dir.path().join("panel.csv"));
    for (flag, want) in [(None, "# u_star=0.8"), (Some("0.85"), "# u_star=0.85")] {
        let out = dir.path().join(format!("o{}", flag.unwrap_or("default")));
        let mut args = vec!["fit", "--stations", s(&st), "--panel", s(&pa), "--out", s(&out)];
        args.extend(FAST_FIT);
        if let Some(u) = flag {
            args.extend(["--u-star", u]);
        }
        ok(&args);
        let fits = read(out.join("fits.csv"));
        assert_eq!(fits.lines().next().unwrap(), want);
        assert_eq!(data_lines(&fits).len(), 5, "header plus four grid points");
    }
}

#[test]
fn comonotone_pair_has_unit_chi() {
    let dir = tempfile::tempdir().unwrap();
    let st = dir.path().join("stations.csv");
    let pa = dir.path().join("panel.csv");
    fs::write(&st, "id,x,y\na,0,0\nb,1,0\n").unwrap();
    let rows: String = (1..=100)
        .map(|t| {
            format!(
                "{},{v},{w}\n",
                date(t),
                v = (t * 37 % 101) as f64,
                w = ((t * 37 % 101) as f64).exp()
            )
        })
        .collect();
    fs::write(&pa, format!("time,a,b\n{rows}")).unwrap();
    ok(&[
        "chi",
        "--stations",
        s(&st),
        "--panel",
        s(&pa),
        "--pair",
        "a,b",
        "--u",
        "0.5,0.8,0.9,0.95",
        "--out",
        s(dir.path()),
    ]);
    let est = column(&read(dir.path().join("chi_empirical.csv")), "estimate");
    assert_eq!(est.len(), 4);
    assert!(est.iter().all(|e| e.parse::<f64>().unwrap() == 1.0), "{est:?}");
}

#[test]
fn single_block_bootstrap_has_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    simulate_small(dir.path());
    let (st, pa) = (dir.path().join("stations.csv"), dir.path().join("panel.csv"));
    let mut args = vec![
        "bootstrap",
        "--stations",
        s(&st),
        "--panel",
        s(&pa),
        "--out",
        s(dir.path()),
    ];
    args.extend(FAST_FIT);
    args.extend(["--blocks", "2", "--block-length", "200"]);
    ok(&args);
    let text = read(dir.path().join("bootstrap.csv"));
    for col in ["sd_lambda", "sd_delta"] {
        let v = column(&text, col);
        assert_eq!(v.len(), 4);
        assert!(v.iter().all(|x| x.parse::<f64>().unwrap() == 0.0), "{col}: {v:?}");
    }
}

#[test]
fn independent_return_period_follows_the_product_rule() {
    let dir = tempfile::tempdir().unwrap();
    let st = dir.path().join("stations.csv");
    fs::write(&st, "id,x,y\na,0,0\nb,10,0\nc,0,10\n").unwrap();
    let n = 1_000_000.0;
    ok(&[
        "return-period",
        "--stations",
        s(&st),
        "--lambda",
        "1000",
        "--delta",
        "0.001",
        "--u",
        "0.94",
        "--n-sims",
        "1000000",
        "--out",
        s(dir.path()),
    ]);
    let text = read(dir.path().join("return_periods.csv"));
    let years: f64 = column(&text, "rp_years")[0].parse().unwrap();
    let p = 1.0 / (years * 18.0);
    let want = 0.06f64.powi(3);
    assert!((p - want).abs() < 3.0 * (want / n).sqrt(), "p {p} vs {want}");
}

#[test]
fn help_lists_every_flag() {
    let common = [
        "--config",
        "--stations",
        "--panel",
        "--out",
        "--seed",
        "--workers",
        "--u-star",
        "--d0-cap",
        "--radius-cap-km",
        "--nu",
        "--qmc-samples",
        "--qmc-shifts",
        "--blocks",
        "--block-length",
    ];
    let grid = [
        "--grid-bbox",
        "--grid-spacing",
        "--min-records",
        "--starts",
        "--init-rate",
        "--bandwidth",
    ];
    let per: [(&str, Vec<&str>); 6] = [
        (
            "simulate",
            vec![
                "--scenario",
                "--scenario-file",
                "--rate",
                "--range",
                "--bbox",
                "--sites-per-side",
                "--reps",
            ],
        ),
        ("fit", grid.to_vec()),
        ("bootstrap", [&grid[..], &["--chi-h", "--chi-u"]].concat()),
        ("profile-nu", [&grid[..], &["--nu-grid"]].concat()),
        (
            "chi",
            vec![
                "--pair",
                "--u",
                "--envelope",
                "--min-records",
                "--lambda",
                "--delta",
                "--h",
                "--replicates",
                "--level",
            ],
        ),
        (
            "return-period",
            vec![
                "--lambda",
                "--delta",
                "--sites",
                "--u",
                "--n-sims",
                "--replicates-per-year",
                "--replicates",
                "--level",
                "--label",
            ],
        ),
    ];
    for (cmd, flags) in per {
        let help = String::from_utf8(ok(&[cmd, "--help"]).stdout).unwrap();
        for f in common.iter().chain(&flags) {
            assert!(help.contains(f), "{cmd} --help lacks {f}");
        }
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = fcopula(&["fit", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn command_line_beats_config_file() {
    let dir = tempfile::tempdir().unwrap();
    simulate_small(dir.path());
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# defaults\nseed = 5\nu_star = 0.9\nd0-cap = 4\n").unwrap();
    let (st, pa) = (dir.path().join("stations.csv"), dir.path().join("panel.csv"));
    let mut args = vec![
        "fit",
        "--config",
        s(&cfg),
        "--stations",
        s(&st),
        "--panel",
        s(&pa),
        "--out",
        s(dir.path()),
    ];
    args.extend(FAST_FIT);
    args.extend(["--u-star", "0.85"]);
    ok(&args);
    let fits = read(dir.path().join("fits.csv"));
    let head: Vec<&str> = fits.lines().take_while(|l| l.starts_with('#')).collect();
    assert!(head.contains(&"# u_star=0.85"), "{head:?}");
    assert!(head.contains(&"# seed=5"), "{head:?}");

    fs::write(&cfg, "bogus = 1\n").unwrap();
    let out = fcopula(&["fit", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
}
