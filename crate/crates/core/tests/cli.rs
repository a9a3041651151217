use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use curriculum::scheduler::read_trace;
use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_curriculum");
const STUB: &str = env!("CARGO_BIN_EXE_curriculum-learner-stub");

fn cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Six payloads of increasing entropy plus a manifest that lists them.
fn corpus(dir: &Path) -> PathBuf {
    let mut manifest = String::new();
    for i in 0..6u32 {
        let mut bytes = Vec::new();
        let mut x = 12345u32.wrapping_add(i);
        for j in 0..4096u32 {
            x = x.wrapping_mul(1103515245).wrapping_add(12345);
            let noisy = (x >> 16) as u8;
            bytes.push(if j % 6 < i { noisy } else { b'a' });
        }
        fs::write(dir.join(format!("p{i}.bin")), bytes).unwrap();
        manifest.push_str(&format!("utt{i}\tp{i}.bin\tline {i}\n"));
    }
    let path = dir.join("manifest.tsv");
    fs::write(&path, manifest).unwrap();
    path
}

fn tasks_file(dir: &Path, sizes: &[usize]) -> PathBuf {
    let tasks: Vec<Vec<String>> = sizes
        .iter()
        .enumerate()
        .map(|(t, &n)| (0..n).map(|i| format!("t{t}-{i}")).collect())
        .collect();
    let json = serde_json::json!({ "k": sizes.len(), "tasks": tasks, "compressor": "gzip@6" });
    let path = dir.join("tasks.json");
    fs::write(&path, json.to_string()).unwrap();
    path
}

fn run_trace(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let tasks = dir.join("tasks.json");
    let out = dir.join(format!("{name}.trace.jsonl"));
    let mut args = vec!["run", "--tasks-file", p(&tasks), "--out", p(&out)];
    args.extend_from_slice(extra);
    let o = cli(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn rank_then_partition() {
    let dir = TempDir::new().unwrap();
    let manifest = corpus(dir.path());
    let ranked = dir.path().join("ranked.jsonl");
    let o = cli(&["rank", "--manifest", p(&manifest), "--out", p(&ranked)]);
    assert_eq!(code(&o), 0);

    let text = fs::read_to_string(&ranked).unwrap();
    let rows: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let ids: Vec<&str> = rows.iter().map(|r| r["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["utt0", "utt1", "utt2", "utt3", "utt4", "utt5"]);
    assert_eq!(rows[2]["transcript"], "line 2");
    for r in &rows {
        let (before, after) = (r["size_before"].as_f64().unwrap(), r["size_after"].as_f64().unwrap());
        assert_eq!(before, 4096.0);
        assert!((r["cr"].as_f64().unwrap() - (1.0 - after / before)).abs() < 1e-12);
    }

    let again = dir.path().join("again.jsonl");
    assert_eq!(code(&cli(&["rank", "--manifest", p(&manifest), "--out", p(&again)])), 0);
    assert_eq!(fs::read(&ranked).unwrap(), fs::read(&again).unwrap());

    let tasks = dir.path().join("tasks.json");
    assert_eq!(code(&cli(&["partition", "--ranked", p(&ranked), "--k", "4", "--out", p(&tasks)])), 0);
    let set: Value = serde_json::from_str(&fs::read_to_string(&tasks).unwrap()).unwrap();
    assert_eq!(set["k"], 4);
    assert_eq!(set["compressor"], "gzip@6");
    assert_eq!(set["tasks"], serde_json::json!([["utt0", "utt1"], ["utt2", "utt3"], ["utt4"], ["utt5"]]));

    let o = cli(&["partition", "--ranked", p(&ranked), "--k", "7", "--out", p(&tasks)]);
    assert_ne!(code(&o), 0);
}

#[test]
fn rank_names_the_unreadable_example() {
    let dir = TempDir::new().unwrap();
    let manifest = corpus(dir.path());
    fs::remove_file(dir.path().join("p3.bin")).unwrap();
    let o = cli(&["rank", "--manifest", p(&manifest), "--out", p(&dir.path().join("r.jsonl"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("utt3"));
}

#[test]
fn run_is_reproducible_and_echoes_config() {
    let dir = TempDir::new().unwrap();
    tasks_file(dir.path(), &[20, 20, 20]);
    let flags = ["--algo", "exp3", "--gamma", "0.1", "--gain", "spg", "--epochs", "3", "--batch-size", "4", "--seed", "17", "--noise-sigma", "0.02"];
    let a = run_trace(dir.path(), "a", &flags);
    let b = run_trace(dir.path(), "b", &flags);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let trace = read_trace(&fs::read_to_string(&a).unwrap()).unwrap();
    let cfg = &trace.header.config;
    assert_eq!(serde_json::to_value(cfg.policy).unwrap(), serde_json::json!({"kind": "exp3", "gamma": 0.1}));
    assert_eq!((cfg.k, cfg.epochs, cfg.batch_size, cfg.seed), (3, 3, 4, 17));
    assert_eq!(trace.header.task_sizes, [20, 20, 20]);
    assert_eq!(trace.events.len(), 45);

    let c = run_trace(dir.path(), "c", &["--algo", "exp3", "--gamma", "0.1", "--gain", "spg", "--epochs", "3", "--batch-size", "4", "--seed", "18", "--noise-sigma", "0.02"]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn run_rejects_inconsistent_flags() {
    let dir = TempDir::new().unwrap();
    let tasks = tasks_file(dir.path(), &[5, 5]);
    let out = dir.path().join("x.trace.jsonl");
    for extra in [
        &["--algo", "ucb1", "--gamma", "0.1"][..],
        &["--algo", "exp3", "--c", "1"],
        &["--algo", "random", "--c", "1"],
        &["--algo", "exp3", "--gamma", "1.5"],
        &["--algo", "ucb1", "--batch-size", "0"],
        &["--algo", "ucb1", "--learner-cmd", STUB],
        &["--algo", "ucb1", "--learner", "external"],
        &["--algo", "ucb1", "--learner", "external", "--learner-cmd", STUB, "--eta", "0.1"],
        &["--algo", "bogus"],
        &[],
    ] {
        let mut args = vec!["run", "--tasks-file", p(&tasks), "--out", p(&out)];
        args.extend_from_slice(extra);
        assert_eq!(code(&cli(&args)), 1, "{extra:?}");
    }
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&cli(&["run", "--tasks-file", p(&missing), "--out", p(&out), "--algo", "ucb1"])), 2);
}

#[test]
fn run_with_external_learner() {
    let dir = TempDir::new().unwrap();
    tasks_file(dir.path(), &[6, 6]);
    let out = run_trace(
        dir.path(),
        "ext",
        &["--algo", "sequential", "--epochs", "2", "--batch-size", "3", "--learner", "external", "--learner-cmd", STUB, "--learner-arg", "fixed", "--learner-arg", "2.0", "--learner-arg", "1.5"],
    );
    let trace = read_trace(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(trace.events.len(), 8);
    assert!(trace.events.iter().all(|e| e.loss_before == 2.0 && e.loss_after == 1.5));

    let tasks = dir.path().join("tasks.json");
    let bad = dir.path().join("bad.trace.jsonl");
    let o = cli(&[
        "run", "--tasks-file", p(&tasks), "--out", p(&bad), "--algo", "ucb1", "--learner", "external",
        "--learner-cmd", STUB, "--learner-arg", "fixed", "--learner-arg", "--omit", "--learner-arg", "loss_after",
    ]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("loss_after"));
    let partial = fs::read_to_string(&bad).unwrap();
    assert_eq!(partial.lines().count(), 1, "header only");
}

#[test]
fn snr_study_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("snr.csv");
    assert_eq!(code(&cli(&["snr-study", "--out", p(&out)])), 0);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("snr_db,mean_cr"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), [0.0, 5.0, 10.0, 15.0]);
    assert!(rows.windows(2).all(|w| w[0].1 < w[1].1), "{rows:?}");

    let again = dir.path().join("again.csv");
    assert_eq!(code(&cli(&["snr-study", "--out", p(&again)])), 0);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());

    let single = dir.path().join("single.csv");
    assert_eq!(code(&cli(&["snr-study", "--snrs", "10", "--out", p(&single)])), 0);
    assert_eq!(fs::read_to_string(&single).unwrap().lines().count(), 2);
}

#[test]
fn wer_csv() {
    let dir = TempDir::new().unwrap();
    let r = dir.path().join("ref.txt");
    let h = dir.path().join("hyp.txt");
    fs::write(&r, "the cat sat\nhello world\n\n").unwrap();
    fs::write(&h, "the cat sat down\nhello word\nextra\n").unwrap();
    let o = cli(&["wer", "--reference", p(&r), "--hypothesis", p(&h)]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "line,ref_words,word_errors,wer,ref_chars,char_errors,cer");
    assert_eq!(lines[1], format!("1,3,1,{},11,5,{}", 1.0 / 3.0, 5.0 / 11.0));
    assert_eq!(lines[2], "2,2,1,0.5,11,1,0.09090909090909091");
    assert_eq!(lines[3], "3,0,1,inf,0,5,inf");
    assert_eq!(lines[4], format!("total,5,3,0.6,22,11,0.5"));

    fs::write(&h, "one line\n").unwrap();
    assert_eq!(code(&cli(&["wer", "--reference", p(&r), "--hypothesis", p(&h)])), 2);
}

fn csv_column(text: &str, col: usize) -> Vec<String> {
    text.lines().skip(1).map(|l| l.split(',').nth(col).unwrap_or("").to_owned()).collect()
}

#[test]
fn report_files() {
    let dir = TempDir::new().unwrap();
    tasks_file(dir.path(), &[8, 8, 8]);
    let common = ["--epochs", "2", "--batch-size", "2", "--eval-interval", "3"];
    let seq = run_trace(dir.path(), "seq", &[&["--algo", "sequential"][..], &common].concat());
    let ucb = run_trace(dir.path(), "ucb", &[&["--algo", "ucb1", "--gain", "spg"][..], &common].concat());
    let out = dir.path().join("report");
    let o = cli(&["report", p(&seq), p(&ucb), "--out-dir", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let names: Vec<String> = {
        let mut v: Vec<String> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        v.sort();
        v
    };
    assert_eq!(names, ["actions_epoch0.csv", "actions_epoch1.csv", "cumulative_reward.csv", "summary.json", "validation_loss.csv"]);

    let actions = fs::read_to_string(out.join("actions_epoch1.csv")).unwrap();
    assert!(actions.starts_with("step,seq,ucb\n"));
    assert_eq!(csv_column(&actions, 1), ["0", "0", "0", "0", "1", "1", "1", "1", "2", "2", "2", "2"]);

    let trace = read_trace(&fs::read_to_string(&ucb).unwrap()).unwrap();
    let cumulative = fs::read_to_string(out.join("cumulative_reward.csv")).unwrap();
    let mut sum = 0.0;
    for (e, cell) in trace.events.iter().zip(csv_column(&cumulative, 2)) {
        sum += e.reward;
        assert!((cell.parse::<f64>().unwrap() - sum).abs() < 1e-12);
    }

    let validation = fs::read_to_string(out.join("validation_loss.csv")).unwrap();
    let steps: Vec<String> = csv_column(&validation, 0);
    assert_eq!(steps, ["3", "6", "9", "12", "15", "18", "21", "24"]);

    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["k"], 3);
    assert_eq!(summary["runs"][0]["label"], "seq");
    assert_eq!(summary["runs"][0]["final_epoch_actions"], serde_json::json!([0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2]));
    assert_eq!(summary["runs"][1]["action_histograms"][1], serde_json::json!([4, 4, 4]));
    assert_eq!(summary["runs"][1]["steps"], 24);

    tasks_file(dir.path(), &[8, 8]);
    let two = run_trace(dir.path(), "two", &["--algo", "random", "--epochs", "1"]);
    let o = cli(&["report", p(&seq), p(&two), "--out-dir", p(&dir.path().join("mixed"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn help_and_bad_subcommand() {
    assert_eq!(code(&cli(&["--help"])), 0);
    assert_eq!(code(&cli(&["frobnicate"])), 1);
}
