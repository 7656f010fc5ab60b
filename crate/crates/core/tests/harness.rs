//! End-to-end harness behaviour on small experiments and hand-made logs.

use std::fs;
use std::path::Path;

use commlab::harness::{
    analyze, emit_plot_data, load_config, parse_config, read_run_report, read_summary, run_dir,
    run_experiment, Config, SUMMARY_FILE,
};
use commlab::{Condition, Error};
use tempfile::TempDir;

fn smoke(out: &Path) -> Config {
    let mut c = parse_config(r#"{"episodes": 50, "runs": 2}"#).unwrap();
    c.output_dir = out.to_path_buf();
    c
}

fn write(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

/// One run directory with `steps[i]` steps per episode; every emission is
/// symbol 0 from context 0.
fn handmade_run(root: &Path, condition: &str, seed: u64, steps: &[usize]) {
    let dir = root.join(condition).join(format!("seed_{seed}"));
    let mut episodes = String::from("episode,steps,success,return\n");
    let mut symbols = String::from("episode,t,agent,symbol,context\n");
    for (i, &s) in steps.iter().enumerate() {
        let success = s < 100;
        let ret = -(s as f64) + if success { 10.0 } else { 0.0 };
        episodes.push_str(&format!("{i},{s},{},{ret}\n", success as u8));
        for t in 1..=s {
            symbols.push_str(&format!("{i},{t},1,{},{}\n", i % 4, i % 4));
            symbols.push_str(&format!("{i},{t},2,{},{}\n", i % 4, (i + 1) % 4));
        }
    }
    write(&dir.join("episodes.csv"), &episodes);
    write(&dir.join("symbols.csv"), &symbols);
}

#[test]
fn smoke_experiment_writes_complete_artifacts() {
    let tmp = TempDir::new().unwrap();
    let config = smoke(tmp.path());
    let summary = run_experiment(&config).unwrap();

    for condition in Condition::ALL {
        for seed in [0, 1] {
            let dir = run_dir(tmp.path(), condition, seed);
            for f in ["episodes.csv", "symbols.csv", "run.json", "params.json"] {
                assert!(dir.join(f).is_file(), "{}", dir.join(f).display());
            }
            let report = read_run_report(&dir).unwrap();
            assert_eq!(report.episodes, 50);
            assert_eq!(report.metric_window, 50);
        }
    }
    assert!(!tmp.path().join("ec").join("seed_0.partial").exists());

    assert_eq!(read_summary(tmp.path()).unwrap(), summary);
    assert_eq!(summary.conditions.len(), 2);
    let cmp = summary.comparison.as_ref().unwrap();
    let welch = cmp.welch.unwrap();
    assert!((0.0..=1.0).contains(&welch.p_two_tailed));
    let ec = summary.condition(Condition::Ec).unwrap();
    let psp = summary.condition(Condition::Psp).unwrap();
    let eta = (psp.pooled_mean_steps - ec.pooled_mean_steps) / ec.pooled_mean_steps * 100.0;
    assert!((cmp.attenuation_rate_percent - eta).abs() < 1e-12);
    assert_eq!(psp.probe_accuracy, 1.0);
    for c in &summary.conditions {
        assert!((0.0..=2.0).contains(&c.entropy));
        let total: f64 = c.symbol_distribution.probabilities().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    // logs alone reproduce the summary
    assert_eq!(analyze(tmp.path(), None).unwrap(), summary);
}

#[test]
fn reruns_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let mut cfg = smoke(a.path());
    cfg.episodes = 40;
    run_experiment(&cfg).unwrap();
    let first = fs::read(a.path().join(SUMMARY_FILE)).unwrap();
    // same directory again, overwriting
    run_experiment(&cfg).unwrap();
    assert_eq!(first, fs::read(a.path().join(SUMMARY_FILE)).unwrap());
    cfg.output_dir = b.path().to_path_buf();
    run_experiment(&cfg).unwrap();
    assert_eq!(first, fs::read(b.path().join(SUMMARY_FILE)).unwrap());
    for f in ["episodes.csv", "symbols.csv", "params.json"] {
        let p = |root: &Path| run_dir(root, Condition::Ec, 1).join(f);
        assert_eq!(
            fs::read(p(a.path())).unwrap(),
            fs::read(p(b.path())).unwrap()
        );
    }
}

#[test]
fn handmade_logs_give_exact_means() {
    let tmp = TempDir::new().unwrap();
    let ec: Vec<usize> = (0..120).map(|i| if i % 2 == 0 { 20 } else { 40 }).collect();
    let psp: Vec<usize> = (0..120).map(|i| if i < 20 { 100 } else { 45 }).collect();
    handmade_run(tmp.path(), "ec", 0, &ec);
    handmade_run(tmp.path(), "ec", 1, &vec![30; 120]);
    handmade_run(tmp.path(), "psp", 0, &psp);
    handmade_run(tmp.path(), "psp", 1, &vec![42; 120]);

    let s = analyze(tmp.path(), None).unwrap();
    assert_eq!(s.metric_window, 100);
    let ec = s.condition(Condition::Ec).unwrap();
    assert_eq!(ec.mean_final_steps, vec![30.0, 30.0]);
    assert_eq!(ec.pooled_mean_steps, 30.0);
    let psp = s.condition(Condition::Psp).unwrap();
    assert_eq!(psp.mean_final_steps, vec![45.0, 42.0]);
    let cmp = s.comparison.as_ref().unwrap();
    assert!((cmp.attenuation_rate_percent - 45.0).abs() < 1e-12);
    // symbol = episode index mod 4; seed 0 spends 20 steps on even episodes
    // and 40 on odd ones: counts 1000+1500, 2000+1500, ... out of 12000
    let expected = [5.0 / 24.0, 7.0 / 24.0, 5.0 / 24.0, 7.0 / 24.0];
    for (p, e) in ec.symbol_distribution.probabilities().iter().zip(expected) {
        assert!((p - e).abs() < 1e-12);
    }
    assert!(ec.inter_agent_jsd.abs() < 1e-12);

    let s50 = analyze(tmp.path(), Some(50)).unwrap();
    assert_eq!(s50.metric_window, 50);
}

#[test]
fn single_condition_has_no_comparison() {
    let tmp = TempDir::new().unwrap();
    handmade_run(tmp.path(), "psp", 3, &vec![12; 10]);
    let s = analyze(tmp.path(), None).unwrap();
    assert_eq!(s.metric_window, 10);
    assert_eq!(s.conditions.len(), 1);
    assert!(s.comparison.is_none());
    assert!(s.condition(Condition::Ec).is_none());
}

#[test]
fn corrupt_logs_name_the_file() {
    let tmp = TempDir::new().unwrap();
    handmade_run(tmp.path(), "ec", 0, &vec![5; 10]);
    let symbols = tmp.path().join("ec/seed_0/symbols.csv");
    let text = fs::read_to_string(&symbols).unwrap();
    fs::write(&symbols, text.replacen("0,1,1,0,0", "0,1,1,7,0", 1)).unwrap();
    match analyze(tmp.path(), None) {
        Err(Error::Log { path, message }) => {
            assert_eq!(path, symbols);
            assert!(message.contains("symbol out of range"), "{message}");
        }
        other => panic!("{other:?}"),
    }

    // truncated symbol log
    let lines: Vec<&str> = text.lines().collect();
    fs::write(&symbols, lines[..lines.len() - 1].join("\n")).unwrap();
    assert!(matches!(analyze(tmp.path(), None), Err(Error::Log { .. })));

    let episodes = tmp.path().join("ec/seed_0/episodes.csv");
    fs::write(&episodes, "episode,steps,success,return\n0,abc,0,-1\n").unwrap();
    assert!(matches!(analyze(tmp.path(), None), Err(Error::Log { path, .. }) if path == episodes));

    let empty = TempDir::new().unwrap();
    assert!(analyze(empty.path(), None).is_err());
    assert!(emit_plot_data(empty.path()).is_err());
}

#[test]
fn partial_runs_are_ignored() {
    let tmp = TempDir::new().unwrap();
    handmade_run(tmp.path(), "ec", 0, &vec![5; 10]);
    fs::create_dir_all(tmp.path().join("ec/seed_1.partial")).unwrap();
    let s = analyze(tmp.path(), None).unwrap();
    assert_eq!(s.conditions[0].seeds, vec![0]);
}

#[test]
fn plot_data_schemas() {
    let tmp = TempDir::new().unwrap();
    handmade_run(tmp.path(), "ec", 0, &(1..=60).collect::<Vec<_>>());
    handmade_run(tmp.path(), "ec", 1, &vec![10; 60]);
    handmade_run(tmp.path(), "psp", 0, &vec![7; 60]);
    let paths = emit_plot_data(tmp.path()).unwrap();
    assert_eq!(paths.len(), 4);

    let mut curve = csv::Reader::from_path(&paths[0]).unwrap();
    assert_eq!(
        curve.headers().unwrap(),
        vec!["episode", "mean", "stderr", "condition"]
    );
    let rows: Vec<csv::StringRecord> = curve.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 120);
    assert_eq!(&rows[0][0], "0");
    assert_eq!(rows[4][1].parse::<f64>().unwrap(), 7.5);
    assert_eq!(rows[4][2].parse::<f64>().unwrap(), 2.5);
    assert_eq!(&rows[60][3], "psp");

    let mut smoothed = csv::Reader::from_path(&paths[1]).unwrap();
    assert_eq!(
        smoothed.headers().unwrap(),
        vec!["episode", "mean", "condition"]
    );

    let mut freq = csv::Reader::from_path(&paths[2]).unwrap();
    assert_eq!(
        freq.headers().unwrap(),
        vec!["condition", "C_A", "C_B", "C_C", "C_D"]
    );
    for row in freq.records() {
        let row = row.unwrap();
        let total: f64 = (1..5).map(|i| row[i].parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    let mut entropy = csv::Reader::from_path(&paths[3]).unwrap();
    assert_eq!(
        entropy.headers().unwrap(),
        vec!["episode", "entropy", "condition"]
    );
    for row in entropy.records() {
        let h: f64 = row.unwrap()[1].parse().unwrap();
        assert!((0.0..=2.0).contains(&h));
    }
}

#[test]
fn config_file_round_trip() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("config.json");
    fs::write(
        &path,
        r#"{"episodes": 50, "runs": 2, "conditions": ["psp"], "output_dir": "out/x"}"#,
    )
    .unwrap();
    let c = load_config(&path).unwrap();
    assert_eq!(c.conditions, vec![Condition::Psp]);
    assert_eq!(c.output_dir, Path::new("out/x"));
    assert!(matches!(
        load_config(tmp.path().join("missing.json")),
        Err(Error::Io { .. })
    ));
}

#[test]
fn unwritable_output_is_reported() {
    let tmp = TempDir::new().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let mut cfg = smoke(&blocker.join("sub"));
    cfg.episodes = 2;
    assert!(matches!(run_experiment(&cfg), Err(Error::Io { .. })));
}

#[test]
fn parallel_and_sequential_runs_agree() {
    use commlab::par;
    use commlab::training::{run_training, TrainingConfig};
    let cfg = TrainingConfig {
        episodes: 8,
        ..Default::default()
    };
    let jobs: Vec<(Condition, u64)> = Condition::ALL
        .iter()
        .flat_map(|&c| (0..3u64).map(move |s| (c, s)))
        .collect();
    let a = par::map(&jobs, |&(c, s)| run_training(&cfg, c, s).unwrap());
    let b = par::map_sequential(&jobs, |&(c, s)| run_training(&cfg, c, s).unwrap());
    assert_eq!(a, b);
}
