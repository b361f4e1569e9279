use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BASE: &str = "\
D = 5e-11
k_on = 6e8
k_off = 3
c_p = 1e-8
dx = 1e-6
dt = 8e-4
N = 41
seed = 7
";

fn mfmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfmc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(dir: &TempDir, name: &str, extra: &str) -> PathBuf {
    let path = dir.path().join(format!("{name}.scenario"));
    fs::write(&path, format!("{BASE}{extra}")).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

fn equilibrium(path: &Path) -> (f64, f64) {
    let text = stdout(&mfmc(&["equilibrium", s(path)]));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("gain,z_inf"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    (row[0], row[1])
}

#[test]
fn run_writes_exact_header_and_rows() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(&dir, "p", "v = 2e-5\nr = 10\nmode = pulse\nu0 = 1000\nK = 50\n");
    let csv = stdout(&mfmc(&["run", s(&sc)]));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,t,z_obs,z_out"));
    assert_eq!(csv.lines().count(), 52);
    let k = column(&csv, "k");
    assert_eq!(k, (0..=50).map(|k| k as f64).collect::<Vec<_>>());
}

#[test]
fn zero_steps_gives_only_initial_row() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(&dir, "z", "v = 2e-5\nr = 10\nmode = pulse\nu0 = 1000\nK = 0\n");
    let csv = stdout(&mfmc(&["run", s(&sc)]));
    assert_eq!(csv, "k,t,z_obs,z_out\n0,0,0,0\n");
}

#[test]
fn validation_error_exits_2_and_names_key() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(&dir, "bad", "v = 2e-5\nr = 40\nmode = pulse\nu0 = 1\nK = 5\n");
    let out = mfmc(&["run", s(&sc)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`r`"));

    let sc = scenario(&dir, "typo", "v = 2e-5\nr = 10\nmode = pulse\nu0 = 1\nK = 5\nvelocity = 3\n");
    let out = mfmc(&["run", s(&sc)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`velocity`"));
}

#[test]
fn io_error_exits_3() {
    let dir = TempDir::new().unwrap();
    let out = mfmc(&["run", s(&dir.path().join("missing.scenario"))]);
    assert_eq!(out.status.code(), Some(3));

    let sc = scenario(&dir, "p", "v = 2e-5\nr = 10\nmode = pulse\nu0 = 1\nK = 5\n");
    let target = dir.path().join("no/such/dir/out.csv");
    let out = mfmc(&["run", s(&sc), "--output", s(&target)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn singular_system_exits_4() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(&dir, "trap", "v = 2e-5\nr = 10\nmode = pulse\nu0 = 1\nK = 5\n")
        .to_path_buf();
    let text = fs::read_to_string(&sc).unwrap().replace("k_off = 3", "k_off = 0");
    fs::write(&sc, text).unwrap();
    let out = mfmc(&["equilibrium", s(&sc)]);
    assert_eq!(out.status.code(), Some(4));
    assert!(out.stdout.is_empty());
}

#[test]
fn equilibrium_of_closed_receiver_is_zero() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(&dir, "closed", "v = 2e-5\nr = 10\nmode = continuous\nu0 = 10\nK = 5\n");
    let text = fs::read_to_string(&sc).unwrap().replace("k_on = 6e8", "k_on = 0");
    fs::write(&sc, text).unwrap();
    assert_eq!(equilibrium(&sc), (0.0, 0.0));
}

#[test]
fn cir_starts_at_zero_and_sums_below_gain() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(&dir, "c", "v = 2e-5\nr = 10\nmode = pulse\nu0 = 1\nK = 20000\n");
    let csv = stdout(&mfmc(&["cir", s(&sc)]));
    assert!(csv.starts_with("i,t,g\n0,0,0\n"));
    let g = column(&csv, "g");
    assert_eq!(g.len(), 20_001);
    let (gain, _) = equilibrium(&sc);
    let total: f64 = g.iter().sum();
    assert!(total <= gain * (1.0 + 1e-10), "{total} vs {gain}");
    assert!(total >= gain * 0.99);
}

#[test]
fn faster_flow_peaks_earlier_and_higher() {
    let dir = TempDir::new().unwrap();
    let argmax = |v: f64| {
        let sc = scenario(&dir, "f", &format!("v = {v:e}\nr = 100\nmode = pulse\nu0 = 1\nK = 15000\n"));
        let text = fs::read_to_string(&sc).unwrap().replace("N = 41", "N = 301");
        fs::write(&sc, text).unwrap();
        let g = column(&stdout(&mfmc(&["cir", s(&sc)])), "g");
        g.iter()
            .copied()
            .enumerate()
            .fold((0, f64::MIN), |b, (i, x)| if x > b.1 { (i, x) } else { b })
    };
    let slow = argmax(1e-5);
    let fast = argmax(6e-5);
    assert!(fast.0 < slow.0 && fast.1 > slow.1, "{fast:?} vs {slow:?}");
}

#[test]
fn continuous_run_approaches_equilibrium() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(&dir, "c", "v = 2e-5\nr = 10\nmode = continuous\nu0 = 1000\nK = 30000\n");
    let z = column(&stdout(&mfmc(&["run", s(&sc)])), "z_obs");
    assert!(z.windows(2).all(|w| w[1] >= w[0]));
    let (_, z_inf) = equilibrium(&sc);
    let last = *z.last().unwrap();
    assert!((last - z_inf).abs() <= 0.01 * z_inf, "{last} vs {z_inf}");
}

#[test]
fn run_output_is_rederivable_from_cir() {
    let dir = TempDir::new().unwrap();
    for mode in ["pulse", "continuous"] {
        let extra = format!("v = 2e-5\nr = 10\nmode = {mode}\nu0 = 250\nK = 3000\n");
        let sc = scenario(&dir, mode, &extra);
        let z = column(&stdout(&mfmc(&["run", s(&sc)])), "z_obs");
        let g = column(&stdout(&mfmc(&["cir", s(&sc)])), "g");
        let mut acc = 0.0;
        for k in 0..=3000 {
            let expect = match mode {
                "pulse" if k == 0 => 0.0,
                "pulse" => 250.0 * g[k - 1],
                _ => 250.0 * acc,
            };
            if k < g.len() {
                acc += g[k];
            }
            let err = (z[k] - expect).abs();
            assert!(err <= 1e-10 * expect.abs().max(1e-300), "{mode} k = {k}: {} vs {expect}", z[k]);
        }
    }
}

#[test]
fn pbs_rejects_zero_particles() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(&dir, "p", "v = 2e-5\nr = 10\nmode = pulse\nu0 = 100\nK = 10\n");
    let out = mfmc(&["pbs", s(&sc), "--particles", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pbs_output_is_byte_identical_per_seed() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(&dir, "p", "v = 2e-5\nr = 10\nmode = pulse\nu0 = 5000\nK = 400\n");
    let run = |name: &str, seed: &str| {
        let path = dir.path().join(name);
        let out = mfmc(&["pbs", s(&sc), "--output", s(&path), "--seed", seed]);
        assert!(out.status.success());
        fs::read(&path).unwrap()
    };
    let a = run("a.csv", "11");
    let b = run("b.csv", "11");
    let c = run("c.csv", "12");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("k,t,z_obs,z_out,seed,particles,partitions\n0,0,0,0,11,5000,8\n"));
    let report = fs::read_to_string(dir.path().join("a.report.csv")).unwrap();
    assert!(report.starts_with("metric,value\nsteps,401\n"));
}

#[test]
fn single_point_sweep_matches_run() {
    let dir = TempDir::new().unwrap();
    let extra = "v = 2e-5\nr = 10\nmode = pulse\nu0 = 1000\nK = 2000\n";
    let sc = scenario(&dir, "one", extra);
    let sweep = dir.path().join("one.sweep");
    fs::write(&sweep, format!("{BASE}{extra}name = one\naxis = v\nvalues = 2e-5\n")).unwrap();
    let out_dir = dir.path().join("out");
    let out = mfmc(&["sweep", s(&sweep), "--output", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = stdout(&mfmc(&["run", s(&sc)]));
    assert_eq!(fs::read_to_string(out_dir.join("one_000.csv")).unwrap(), run);
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("value,Pe,peak_z,peak_k,equilibrium_gain\n"));
}

#[test]
fn sweep_with_invalid_point_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let sweep = dir.path().join("bad.sweep");
    let body = "v = 2e-5\nr = 10\nmode = pulse\nu0 = 1\nK = 10\naxis = r\nvalues = 10, 50\n";
    fs::write(&sweep, format!("{BASE}{body}")).unwrap();
    let out_dir = dir.path().join("out");
    let out = mfmc(&["sweep", s(&sweep), "--output", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn velocity_sweep_orders_peaks_and_gains() {
    let dir = TempDir::new().unwrap();
    let sweep = dir.path().join("v.sweep");
    let body = "v = 1e-5\nr = 20\nmode = pulse\nu0 = 1\nK = 20000\naxis = v_um_s\nvalues = 5, 10, 30, 60\n";
    fs::write(&sweep, format!("{BASE}{body}")).unwrap();
    let out_dir = dir.path().join("out");
    let out = mfmc(&["sweep", s(&sweep), "--output", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let peak_k = column(&summary, "peak_k");
    let gain = column(&summary, "equilibrium_gain");
    assert!(peak_k.windows(2).all(|w| w[1] <= w[0]), "{peak_k:?}");
    assert!(gain.windows(2).all(|w| w[1] <= w[0]), "{gain:?}");
}

#[test]
fn spectral_reports_bracketed_radius() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(&dir, "p", "v = 2e-5\nr = 10\nmode = pulse\nu0 = 1\nK = 1\n");
    let text = stdout(&mfmc(&["spectral", s(&sc)]));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("rho,lower,upper,converged"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let rho: f64 = row[0].parse().unwrap();
    let upper: f64 = row[2].parse().unwrap();
    assert_eq!(row[3], "true");
    assert!(rho < 1.0 && upper < 1.0);
}

#[test]
fn dump_lists_four_blocks() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(&dir, "p", "v = 2e-5\nr = 10\nmode = pulse\nu0 = 1\nK = 1\n");
    let text = stdout(&mfmc(&["dump", s(&sc)]));
    assert_eq!(text.matches("%%MatrixMarket").count(), 4);
    assert!(text.contains("% Q\n41 41 "));
}
