use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use capgm::commands::{self, SimulateArgs, Study};
use capgm::config::RunConfig;
use capgm::csvio::{load_dataset, read_truth};
use capgm_core::rng::chain_rng;
use capgm_core::simgen::generate_sim1;

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capgm"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn simulate(dir: &Path, n: usize, p: usize, seed: u64, test_n: usize) -> Vec<PathBuf> {
    commands::simulate(&SimulateArgs {
        study: Study::Sim1,
        n,
        p,
        delta: 4.0,
        seed,
        test_n,
        out: dir.to_path_buf(),
    })
    .unwrap()
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(
        &path,
        format!("data.train = data.csv\nmcmc.iterations = 300\nmcmc.burn_in = 200\noutput.dir = out\n{extra}"),
    )
    .unwrap();
    path
}

#[test]
fn simulate_writes_the_documented_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(
        &[
            "simulate", "--study", "sim1", "--n", "1000", "--p", "20", "--delta", "4", "--seed",
            "7", "--out", ".",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("data.csv") && stdout.contains("truth.csv"));
    let text = fs::read_to_string(dir.path().join("data.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let expected: Vec<String> = std::iter::once("y".to_string())
        .chain((1..=20).map(|j| format!("x{j}")))
        .collect();
    assert_eq!(header, expected);
    assert_eq!(lines.count(), 1000);
    let truth = read_truth(&dir.path().join("truth.csv")).unwrap();
    assert_eq!(truth.oc, truth.dc);
    assert_eq!(truth.group.unwrap().len(), 1000);
}

#[test]
fn simulate_is_reproducible_and_round_trips_exactly() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate(a.path(), 200, 4, 11, 0);
    simulate(b.path(), 200, 4, 11, 0);
    for f in ["data.csv", "truth.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap()
        );
    }
    let (expected, _) = generate_sim1(200, 4, 4.0, &mut chain_rng(11, 0)).unwrap();
    let loaded = load_dataset(
        &a.path().join("data.csv"),
        &RunConfig::default(),
        None,
        true,
    )
    .unwrap();
    assert_eq!(loaded.dataset, expected);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&loaded.dataset.x), bits(&expected.x));
    assert_eq!(bits(&loaded.dataset.y), bits(&expected.y));
}

#[test]
fn nonpositive_delta_and_unknown_study_are_argument_errors() {
    let dir = tempfile::tempdir().unwrap();
    for delta in ["0", "-1"] {
        let out = bin(&["simulate", "--delta", delta, "--out", "."], dir.path());
        assert_eq!(out.status.code(), Some(2));
    }
    let out = bin(&["simulate", "--study", "sim3", "--out", "."], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("data.csv").exists());
}

#[test]
fn config_and_data_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 50, 3, 1, 0);
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "data.train = data.csv\nmodel.K = 0x\n").unwrap();
    let out = bin(&["fit", "--config", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    fs::write(dir.path().join("noy.csv"), "resp,x1\n1,0.1\n2,0.2\n").unwrap();
    fs::write(&cfg, "data.train = noy.csv\n").unwrap();
    let out = bin(&["fit", "--config", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("'y'"));

    fs::write(dir.path().join("text.csv"), "y,x1\n1,0.1\n2,high\n").unwrap();
    fs::write(&cfg, "data.train = text.csv\n").unwrap();
    let out = bin(&["fit", "--config", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3"));
}

#[test]
fn fit_writes_all_artifacts_and_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 120, 4, 3, 0);
    small_config(dir.path(), "");
    let run = |out: &str, threads: &str| {
        let o = bin(
            &[
                "fit",
                "--config",
                "run.cfg",
                "--chains",
                "2",
                "--threads",
                threads,
                "--seed",
                "5",
                "--out",
                out,
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        dir.path().join(out)
    };
    let a = run("a", "1");
    let b = run("b", "2");
    for f in [
        "summary.json",
        "run.json",
        "coclust_oc.csv",
        "coclust_group.csv",
        "coclust_dc.csv",
        "fitted.csv",
    ] {
        assert!(a.join(f).is_file(), "{f}");
    }
    for chain in ["chain_0", "chain_1"] {
        for f in [
            "trace.oc.csv",
            "trace.group.csv",
            "trace.params.jsonl",
            "acceptance.json",
        ] {
            let x = fs::read(a.join(chain).join(f)).unwrap();
            let y = fs::read(b.join(chain).join(f)).unwrap();
            assert!(x == y, "{chain}/{f} differs between runs");
        }
    }
    assert_ne!(
        fs::read(a.join("chain_0/trace.params.jsonl")).unwrap(),
        fs::read(a.join("chain_1/trace.params.jsonl")).unwrap()
    );
    let oc = fs::read_to_string(a.join("chain_0/trace.oc.csv")).unwrap();
    assert_eq!(oc.lines().count(), 101);
    assert_eq!(oc.lines().next().unwrap().split(',').count(), 121);
    let m = fs::read_to_string(a.join("coclust_oc.csv")).unwrap();
    assert_eq!(m.lines().count(), 121);
}

#[test]
fn dp_ignores_predictor_columns() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 80, 3, 9, 0);
    let text = fs::read_to_string(dir.path().join("data.csv")).unwrap();
    // Same responses, different covariates.
    let scrambled: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                return format!("{l}\n");
            }
            let y = l.split(',').next().unwrap();
            format!("{y},{},{},{}\n", i, -(i as f64), 0.5)
        })
        .collect();
    fs::write(dir.path().join("other.csv"), scrambled).unwrap();
    let mut cfg = RunConfig::from_file(&small_config(dir.path(), "model.method = dp\n")).unwrap();
    cfg.out = dir.path().join("dp1");
    let a = commands::fit(&cfg).unwrap();
    cfg.train = Some(dir.path().join("other.csv"));
    cfg.out = dir.path().join("dp2");
    let b = commands::fit(&cfg).unwrap();
    assert_eq!(a.traces, b.traces);
    assert_eq!(a.summary.p, 0);
    assert!(a.summary.inclusion.is_empty());
}

#[test]
fn cam_fits_with_a_group_column() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 100, 3, 2, 0);
    let truth = read_truth(&dir.path().join("truth.csv")).unwrap();
    let text = fs::read_to_string(dir.path().join("data.csv")).unwrap();
    let with_group: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| match i {
            0 => format!("{l},group\n"),
            _ => format!("{l},{}\n", truth.group.as_ref().unwrap()[i - 1] + 1),
        })
        .collect();
    fs::write(dir.path().join("grouped.csv"), with_group).unwrap();
    let mut cfg = RunConfig::from_file(&small_config(dir.path(), "model.method = cam\n")).unwrap();
    cfg.out = dir.path().join("missing");
    assert_eq!(commands::fit(&cfg).unwrap_err().exit_code(), 3);
    cfg.train = Some(dir.path().join("grouped.csv"));
    cfg.out = dir.path().join("cam");
    let o = commands::fit(&cfg).unwrap();
    let g: Vec<u32> = truth.group.unwrap();
    assert!(o.traces[0].records.iter().all(|r| r.groups == g));
}

#[test]
fn predict_reuses_the_fitted_draws() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 150, 4, 4, 60);
    let cfg = RunConfig::from_file(&small_config(dir.path(), "data.test = test.csv\n")).unwrap();
    let fit = commands::fit(&cfg).unwrap();
    let run = fit.out.clone();

    let same = commands::predict(
        &run,
        &dir.path().join("data.csv"),
        Some(&dir.path().join("p_train")),
    )
    .unwrap();
    let s = same.scores.unwrap();
    assert!((s.rmspe - fit.summary.within_sample.rmspe).abs() < 1e-12);
    assert_eq!(s.lpds, fit.summary.within_sample.lpds);

    let test = commands::predict(&run, &dir.path().join("test.csv"), None).unwrap();
    assert_eq!(test.predictions.len(), 60);
    let t = fit.summary.test.clone().unwrap();
    assert!((test.scores.unwrap().rmspe - t.rmspe).abs() < 1e-12);
    assert!(run.join("predictions.scores.json").is_file());
    let csv = fs::read_to_string(run.join("predictions.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("row,mean,lower,upper"));
    assert!(test
        .predictions
        .iter()
        .all(|p| p.lower <= p.mean && p.mean <= p.upper));

    // No response: predictions only.
    let text = fs::read_to_string(dir.path().join("test.csv")).unwrap();
    let no_y: String = text
        .lines()
        .map(|l| l.split_once(',').unwrap().1.to_string() + "\n")
        .collect();
    fs::write(dir.path().join("noy.csv"), no_y).unwrap();
    let out = dir.path().join("p_noy");
    let o = commands::predict(&run, &dir.path().join("noy.csv"), Some(&out)).unwrap();
    assert!(o.scores.is_none() && o.scores_path.is_none());
    assert!(!out.join("predictions.scores.json").exists());

    // Missing predictor column: schema mismatch.
    let short: String = text
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n")
        .collect();
    fs::write(dir.path().join("short.csv"), short).unwrap();
    let e = commands::predict(&run, &dir.path().join("short.csv"), Some(&out)).unwrap_err();
    assert_eq!(e.exit_code(), 3);
    assert!(e.to_string().contains("x4"), "{e}");
}

#[test]
fn summarize_reports_mean_and_standard_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for rep in 0..3u64 {
        let rep_dir = dir.path().join(format!("rep{rep}"));
        simulate(&rep_dir, 80, 3, 100 + rep, 0);
        let mut cfg = RunConfig::from_file(&small_config(&rep_dir, "")).unwrap();
        cfg.sampler.seed = rep;
        runs.push(commands::fit(&cfg).unwrap());
    }
    let dirs: Vec<PathBuf> = runs.iter().map(|r| r.out.clone()).collect();

    let single = commands::summarize(&dirs[..1], None).unwrap();
    let lines: Vec<&str> = single.lines().collect();
    assert_eq!(lines.len(), 2);
    let header: Vec<&str> = lines[0].split(',').collect();
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(header.len(), row.len());
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    assert_eq!(row[col("runs")], "1");
    assert_eq!(row[col("rmspe_in_se")], "");
    assert!(!row[col("ari_oc_mean")].is_empty());

    let table = commands::summarize(&dirs, None).unwrap();
    let row: Vec<String> = table
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(String::from)
        .collect();
    assert_eq!(row[col("runs")], "3");
    let vals: Vec<f64> = runs.iter().map(|r| r.summary.within_sample.rmspe).collect();
    let (mean, se) = commands::mean_se(&vals);
    let m: f64 = row[col("rmspe_in_mean")].parse().unwrap();
    let s: f64 = row[col("rmspe_in_se")].parse().unwrap();
    assert!((m - mean).abs() < 1e-12 && (s - se.unwrap()).abs() < 1e-12);
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
    assert!((s - sd / 3f64.sqrt()).abs() < 1e-12);

    let missing = dir.path().join("nope.csv");
    assert_eq!(
        commands::summarize(&dirs, Some(&missing))
            .unwrap_err()
            .exit_code(),
        3
    );
}
