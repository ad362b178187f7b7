use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_elt-tail"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("elt_tail_cli_{}_{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn markov_column() {
    let dir = scratch("markov");
    let input = write(&dir, "p.csv", "EventID,Rate,Loss\n1,1,1\n");
    let out = dir.join("curve.csv");
    let status =
        run(bin().args(["curve", "--methods", "markov", "--grid", "1:4:4", "--out"]).arg(&out).arg(&input)).status;
    assert!(status.success());
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["s", "markov"]);
    let col: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(col, ["1", "0.5", "0.3333333333", "0.25"]);
}

#[test]
fn all_methods_on_the_poisson_oracle() {
    let dir = scratch("all");
    let input = write(&dir, "p.csv", "EventID,Rate,Loss\n1,1,1\n");
    let (out, timing) = (dir.join("curve.csv"), dir.join("timing.csv"));
    let status = run(bin()
        .args(["curve", "--grid", "1:5:5", "--seed", "3", "--out"])
        .arg(&out)
        .arg("--timing-out")
        .arg(&timing)
        .arg(&input))
    .status;
    assert!(status.success());
    let (header, rows) = read_csv(&out);
    assert_eq!(
        header,
        ["s", "markov", "cantelli", "moment", "chernoff", "montecarlo", "montecarlo_lo", "montecarlo_hi", "panjer"]
    );
    for row in &rows {
        let v: Vec<f64> = row.iter().map(|x| x.parse().unwrap()).collect();
        assert!(v[1..].iter().all(|p| (0.0..=1.0).contains(p)));
        // Panjer is exact here; the bounds sit above it and the interval straddles it
        assert!(v[6] <= v[8] && v[8] <= v[7], "{row:?}");
        for b in &v[1..5] {
            assert!(*b >= v[8] - 1e-12);
        }
    }
    let (th, trows) = read_csv(&timing);
    assert_eq!(th, ["method", "seconds"]);
    assert_eq!(trows.len(), 6);
    for r in &trows {
        assert_eq!(r[1].split('.').nth(1).map(str::len), Some(3), "{r:?}");
    }
}

#[test]
fn infeasible_panjer_is_na() {
    let dir = scratch("na");
    let input = write(&dir, "big.csv", "EventID,Rate,Loss\n1,0.5,3e9\n2,0.2,7e9\n");
    let (out, timing) = (dir.join("curve.csv"), dir.join("timing.csv"));
    let status = run(bin()
        .args(["curve", "--methods", "markov,panjer", "--grid", "1e9:4e10:5", "--out"])
        .arg(&out)
        .arg("--timing-out")
        .arg(&timing)
        .arg(&input))
    .status;
    assert_eq!(status.code(), Some(0));
    let (_, rows) = read_csv(&out);
    assert!(rows.iter().all(|r| r[2] == "NA"));
    let t = fs::read_to_string(&timing).unwrap();
    assert!(t.contains("panjer,NA"), "{t}");
    assert!(!t.contains("markov,NA"));

    // at d = -9 the same run is feasible
    let status = run(bin()
        .args(["curve", "--methods", "panjer", "--d=-9", "--grid", "1e9:4e10:5", "--out"])
        .arg(&out)
        .arg(&input))
    .status;
    assert!(status.success());
    let (_, rows) = read_csv(&out);
    assert!(rows.iter().all(|r| r[1] != "NA"));
}

#[test]
fn all_methods_failing_exits_3() {
    let dir = scratch("exit3");
    let input = write(&dir, "big.csv", "EventID,Rate,Loss\n1,0.5,3e9\n");
    let status = run(bin().args(["curve", "--methods", "panjer", "--grid", "1e9:4e10:5"]).arg(&input)).status;
    assert_eq!(status.code(), Some(3));
}

#[test]
fn bad_input_exits_2_with_line_number() {
    let dir = scratch("bad");
    let input = write(&dir, "bad.csv", "EventID,Rate,Loss\n1,0.1,5\n2,0.1,five\n");
    let out = run(bin().args(["compress", "--d", "0"]).arg(&input));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    let out = run(bin().args(["curve", "--grid", "5:1:3"]).arg(&input));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compress_merges_and_is_idempotent() {
    let dir = scratch("compress");
    let input = write(&dir, "e.csv", "EventID,Rate,Loss\n1,0.1,123456\n2,0.2,123289\n3,0.05,777777\n");
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    let first = run(bin().args(["compress", "--d=-3", "--out"]).arg(&a).arg(&input));
    assert!(first.status.success());
    assert!(String::from_utf8_lossy(&first.stderr).contains("3 -> 2"));
    assert!(run(bin().args(["compress", "--d=-3", "--out"]).arg(&b).arg(&a)).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let (_, rows) = read_csv(&a);
    assert_eq!(rows.len(), 2);
    let rate: f64 = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).sum();
    assert!((rate - 0.35).abs() < 1e-12);
    assert_eq!(rows[0][2], "123000");
}

#[test]
fn thickening_and_cap_flags() {
    let dir = scratch("theta");
    let input = write(&dir, "e.csv", "EventID,Rate,Loss\n1,0.5,1000\n2,0.3,4000\n");
    let out = dir.join("curve.csv");
    let status = run(bin()
        .args(["curve", "--theta", "0.5", "--cap", "3000", "--nq", "100", "--grid", "1000:6000:6", "--out"])
        .arg(&out)
        .arg(&input))
    .status;
    assert!(status.success());
    let (header, rows) = read_csv(&out);
    assert_eq!(header.len(), 9);
    for r in &rows {
        let v: Vec<f64> = r.iter().map(|x| x.parse().unwrap()).collect();
        // Monte Carlo and Panjer see the same capped, thickened losses
        assert!((v[5] - v[8]).abs() < 0.01, "{r:?}");
    }
    // every loss is capped at 3000 so two events are needed beyond it
    let last: Vec<f64> = rows[5].iter().map(|x| x.parse().unwrap()).collect();
    assert!(last[8] < 0.1);
}

#[test]
fn design_table_and_recommendation() {
    let out = run(bin().args(["design-n"]));
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,success_probability");
    assert_eq!(lines[2], "10000,0.9855562596");
    assert!(String::from_utf8_lossy(&out.stderr).contains("recommended n: 100000"));

    let out = run(bin().args(["design-n", "--beta0", "1", "--n-list", "1000"]));
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no listed n"));
}

#[test]
fn synth_is_deterministic() {
    let dir = scratch("synth");
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    for p in [&a, &b] {
        assert!(run(bin().args(["synth", "--rows", "500", "--seed", "5", "--out"]).arg(p)).status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let (_, rows) = read_csv(&a);
    assert_eq!(rows.len(), 500);
    for r in &rows {
        let (rate, loss): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!((1e-4..=1e-1).contains(&rate));
        assert!((1e4..=1e8).contains(&loss));
    }
}

#[test]
fn loss_dump() {
    let dir = scratch("dump");
    let input = write(&dir, "p.csv", "EventID,Rate,Loss\n1,1,2\n");
    let dump = dir.join("losses.csv");
    let status = run(bin()
        .args(["curve", "--methods", "montecarlo", "--nsim", "1000", "--grid", "1:3:3", "--dump-losses"])
        .arg(&dump)
        .arg(&input))
    .status;
    assert!(status.success());
    let (header, rows) = read_csv(&dump);
    assert_eq!(header, ["replicate", "loss"]);
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().all(|r| r[1].parse::<f64>().unwrap() % 2.0 == 0.0));
}

#[test]
fn bound_timings_do_not_grow_with_horizon() {
    let dir = scratch("horizon");
    let input = dir.join("s.csv");
    assert!(run(bin().args(["synth", "--rows", "32060", "--seed", "1", "--out"]).arg(&input)).status.success());
    let seconds = |t: &str| -> f64 {
        let timing = dir.join(format!("t{t}.csv"));
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let status = run(bin()
                .args(["curve", "--methods", "markov,cantelli,moment,chernoff", "--t", t, "--out"])
                .arg(dir.join("c.csv"))
                .arg("--timing-out")
                .arg(&timing)
                .arg(&input))
            .status;
            assert!(status.success());
            let (_, rows) = read_csv(&timing);
            best = best.min(rows.iter().map(|r| r[1].parse::<f64>().unwrap()).sum());
        }
        best
    };
    let (one, ten) = (seconds("1"), seconds("10"));
    // resolution is 1 ms, so allow that much on top of the ratio
    assert!(ten <= 2.0 * one + 0.002 && one <= 2.0 * ten + 0.002, "t=1: {one}, t=10: {ten}");
}
