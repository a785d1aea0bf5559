use std::process::{Command, Output};

use mc2::bench::{read_csv, read_csv_from, ResultTable};

fn mc2(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mc2")).args(args).output().unwrap()
}

fn table(out: &Output) -> ResultTable {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    read_csv_from(out.stdout.as_slice(), "stdout").unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn without_timing(mut t: ResultTable) -> ResultTable {
    for r in &mut t.rows {
        r.runtime_seconds = 0.0;
    }
    t
}

#[test]
fn degenerate_price_is_bachelier() {
    let out = mc2(&[
        "price",
        "--model",
        "sabr0",
        "--payoff",
        "vanilla",
        "--call",
        "--sigma0",
        "0.2",
        "--nu",
        "0",
        "--rho",
        "0",
        "--s0",
        "1",
        "--strike",
        "1",
        "--maturity",
        "1",
        "--paths",
        "1",
        "--seed",
        "7",
        "--method",
        "mc2",
    ]);
    let t = table(&out);
    assert_eq!(t.rows.len(), 1);
    assert!((t.rows[0].price - 0.0797885).abs() < 1e-7);
    assert_eq!(t.rows[0].stderr, 0.0);
    assert_eq!(t.get_meta("seed"), Some("7"));
}

#[test]
fn invalid_beta_is_a_usage_error() {
    let out = mc2(&["price", "--model", "sabr0", "--beta", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("beta"));
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_or_missing_flags_are_usage_errors() {
    assert_eq!(mc2(&["price", "--model", "sabr0", "--bogus"]).status.code(), Some(2));
    assert_eq!(mc2(&["price", "--strike", "1"]).status.code(), Some(2));
    assert_eq!(mc2(&["price", "--model", "sabr7"]).status.code(), Some(2));
    assert_eq!(
        mc2(&["price", "--model", "sabr0", "--call", "--put"]).status.code(),
        Some(2)
    );
    assert_eq!(
        mc2(&["price", "--model", "sabr0", "--nu", "0.3,0.5"]).status.code(),
        Some(2)
    );
    assert_eq!(mc2(&[]).status.code(), Some(2));
}

#[test]
fn invalid_combinations_are_usage_errors() {
    // fixings on a vanilla, schedules outside SABR, Asian on beta = 1
    let cases: [&[&str]; 4] = [
        &["price", "--model", "sabr0", "--fixings", "monthly"],
        &["price", "--model", "heston0", "--nu", "0.3,0.5@0.5"],
        &["price", "--model", "sabr1", "--payoff", "asian", "--paths", "10"],
        &["price", "--model", "sz0", "--method", "hagan"],
    ];
    for args in cases {
        let out = mc2(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn closed_form_equals_hagan_for_flat_lognormal_vol() {
    for strike in ["0.6", "1", "1.35"] {
        for side in ["--call", "--put"] {
            let run = |method| {
                table(&mc2(&[
                    "price", "--model", "sabr1", "--sigma0", "0.3", "--strike", strike, side, "--method", method,
                ]))
                .rows[0]
                    .price
            };
            assert!((run("closed-form") - run("hagan")).abs() < 1e-12);
        }
    }
}

#[test]
fn asian_prices_accept_fixing_lists() {
    let monthly = table(&mc2(&[
        "price", "--model", "sabr0", "--payoff", "asian", "--paths", "1", "--method", "mc2",
    ]));
    let exact = table(&mc2(&[
        "price",
        "--model",
        "sabr0",
        "--payoff",
        "asian",
        "--method",
        "closed-form",
    ]));
    assert!((monthly.rows[0].price - exact.rows[0].price).abs() < 1e-12);
    let listed = table(&mc2(&[
        "price",
        "--model",
        "heston0",
        "--nu",
        "0.4",
        "--rho",
        "-0.3",
        "--payoff",
        "asian",
        "--fixings",
        "0.25,0.5,1",
        "--paths",
        "2000",
        "--steps-per-year",
        "32",
    ]));
    assert_eq!(listed.get_meta("fixings"), Some("0.25 0.5 1"));
    assert!(listed.rows[0].price > 0.0);
}

#[test]
fn out_flag_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.csv");
    let out = mc2(&[
        "price",
        "--model",
        "sz1",
        "--nu",
        "0.3",
        "--paths",
        "500",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let t = read_csv(&path).unwrap();
    assert_eq!(t.rows[0].method, "mc2");
    assert_eq!(t.get_meta("model"), Some("schobel-zhu"));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let out = mc2(&[
        "price",
        "--model",
        "sabr0",
        "--paths",
        "10",
        "--out",
        "/nonexistent/dir/q.csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/nonexistent/dir/q.csv"));
}

#[test]
fn embedded_command_reproduces_the_table() {
    let first = table(&mc2(&[
        "price",
        "--model",
        "sabr1",
        "--nu",
        "0.5,0.9@0.5",
        "--rho",
        "-0.4",
        "--strike",
        "1.1",
        "--paths",
        "3000",
        "--steps-per-year",
        "64",
        "--seed",
        "11",
        "--method",
        "mc1",
    ]));
    let command = first.get_meta("command").unwrap().to_string();
    let args: Vec<&str> = command.split(' ').skip(1).collect();
    let second = table(&mc2(&args));
    assert_eq!(without_timing(second), without_timing(first));
}

#[test]
fn thread_cap_does_not_change_results() {
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_mc2"))
            .args([
                "price",
                "--model",
                "heston1",
                "--nu",
                "0.5",
                "--rho",
                "-0.5",
                "--paths",
                "4000",
                "--steps-per-year",
                "32",
            ])
            .env("MC2_THREADS", threads)
            .output()
            .unwrap();
        without_timing(table(&out))
    };
    let one = run("1");
    assert_eq!(run("3"), one);
}

#[test]
fn hagan_sweep_shows_the_wing_mismatch() {
    let t = table(&mc2(&[
        "compare-hagan",
        "--model",
        "sabr1",
        "--sigma0",
        "0.2",
        "--nu",
        "0.8367",
        "--rho",
        "0",
        "--maturity",
        "1",
        "--strike-min",
        "0.5",
        "--strike-max",
        "2",
        "--strike-count",
        "16",
        "--paths",
        "40000",
        "--steps-per-year",
        "128",
    ]));
    assert_eq!(t.rows.len(), 48);
    let theta: f64 = t.get_meta("theta").unwrap().parse().unwrap();
    assert!((theta - 0.7).abs() < 1e-3);
    let mc2_rows: Vec<_> = t.rows.iter().filter(|r| r.method == "mc2").collect();
    let worst = mc2_rows
        .iter()
        .max_by(|a, b| a.extra[0].partial_cmp(&b.extra[0]).unwrap())
        .unwrap();
    assert!(worst.extra[0] > 3.0 * worst.extra[1], "{:?}", worst);
}

#[test]
fn hagan_sweep_needs_sabr() {
    assert_eq!(
        mc2(&["compare-hagan", "--model", "heston0", "--paths", "10"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        mc2(&["compare-hagan", "--model", "sabr0", "--strike-count", "0"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn convergence_table_has_one_row_per_method_and_count() {
    let t = table(&mc2(&[
        "convergence",
        "--model",
        "sabr0",
        "--nu",
        "0.6",
        "--rho",
        "-0.3",
        "--put",
        "--strike",
        "0.8",
        "--paths-list",
        "64,128,256",
        "--repeats",
        "3",
        "--reference-paths",
        "8192",
        "--steps-per-year",
        "16",
    ]));
    assert_eq!(t.rows.len(), 6);
    assert_eq!(t.extra_columns, ["mean_abs_error"]);
    assert!(t.get_meta("mc2_slope").is_some());
    assert!(t.get_meta("command").unwrap().contains("--paths-list 64,128,256"));
}

#[test]
fn convergence_rejects_unsorted_counts() {
    let out = mc2(&[
        "convergence",
        "--model",
        "sabr0",
        "--paths-list",
        "256,128",
        "--repeats",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
