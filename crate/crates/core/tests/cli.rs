use std::path::Path;
use std::process::{Command, Output};

use macroq::experiment::{Manifest, TrialStatus, OUTPUT_DIR_ENV};
use macroq::qlearn::{AnyQ, QDump};

const BIN: &str = env!("CARGO_BIN_EXE_macroq");

fn config(name: &str, kind: &str, extra_agent: &str) -> String {
    format!(
        r#"[experiment]
name = "{name}"
trials = 3
workers = 2

[env]
kind = "chain"
n = 8

[agent]
gamma = 0.9
epochs = 4
epoch_length = 300
eval_episodes = 3
{extra_agent}

[macros]
kind = "{kind}"
length = 3
"#
    )
}

fn write(dir: &Path, file: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(file);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove(OUTPUT_DIR_ENV);
    if let Some(d) = out_dir {
        cmd.env(OUTPUT_DIR_ENV, d);
    }
    cmd.output().unwrap()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn train_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let text = config("rep", "repetition", "");
    let cfg = write(tmp.path(), "rep.toml", &text);
    let out = tmp.path().join("out");
    let res = run(&["train", "--config", cfg.to_str().unwrap()], Some(&out));
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    assert_eq!(std::fs::read_to_string(out.join("config.toml")).unwrap(), text);
    assert_eq!(first_line(&out.join("curves.csv")), "epoch,mean,std,min,max,smoothed_mean");
    assert_eq!(
        first_line(&out.join("gap.csv")),
        "distance_to_reward,mean_gap,mean_top_q,agent_tag"
    );
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.trials.len(), 3);
    assert!(manifest.trials.iter().all(|t| t.status == TrialStatus::Ok));
    for t in 0..3 {
        let dir = out.join(format!("trial_{t}"));
        let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
        let mut lines = metrics.lines();
        assert_eq!(
            lines.next().unwrap(),
            "trial,epoch,env_steps,mean_return,std_return,action_gap_mean,epsilon,macro_event"
        );
        assert_eq!(lines.count(), 4);
        let slots = std::fs::read_to_string(dir.join("macros/epoch_0000.jsonl")).unwrap();
        assert_eq!(slots.lines().count(), 2);
        assert!(slots.contains(r#""actions":[1,1,1]"#));
        let dump: QDump =
            serde_json::from_str(&std::fs::read_to_string(dir.join("q_params.json")).unwrap()).unwrap();
        assert_eq!(dump.output_arity, 4);
        AnyQ::from_dump(&dump).unwrap();
    }
}

#[test]
fn reruns_are_byte_identical_and_seed_flag_applies() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "freq.toml", &config("freq", "frequency", "replacement_epochs = [1, 3]"));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    let path = cfg.to_str().unwrap();
    assert!(run(&["train", "--config", path], Some(&a)).status.success());
    assert!(run(&["train", "--config", path], Some(&b)).status.success());
    assert!(run(&["train", "--config", path, "--seed", "40"], Some(&c)).status.success());
    for file in ["curves.csv", "gap.csv", "trial_1/metrics.csv", "trial_2/q_params.json"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(c.join("manifest.json")).unwrap()).unwrap();
    let seeds: Vec<u64> = manifest.trials.iter().map(|t| t.seed).collect();
    assert_eq!(seeds, vec![40, 41, 42]);
    let events = std::fs::read_to_string(a.join("trial_0/macro_events.jsonl")).unwrap();
    assert_eq!(events.lines().count(), 2);
    assert!(a.join("trial_0/macros/epoch_0001.jsonl").exists());
    assert!(a.join("trial_0/macros/epoch_0003.jsonl").exists());
}

#[test]
fn config_errors_exit_two_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let text = config("bad", "none", "").replace("gamma = 0.9\n", "");
    let cfg = write(tmp.path(), "bad.toml", &text);
    let res = run(&["train", "--config", cfg.to_str().unwrap()], Some(tmp.path()));
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("gamma"));

    let text = config("bad", "frequency", "").replace("length = 3", "length = 3\nomega = 1.5");
    let cfg = write(tmp.path(), "omega.toml", &text);
    let res = run(&["train", "--config", cfg.to_str().unwrap()], Some(tmp.path()));
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("omega"));

    let res = run(&["train", "--config", "/nonexistent/x.toml"], Some(tmp.path()));
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn diverging_trials_are_recorded_and_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"[experiment]
name = "diverge"
trials = 2
backend = "network"

[env]
kind = "catch"
grid = 5
frames = 1

[agent]
gamma = 0.9
alpha = 50.0
epochs = 2
epoch_length = 300
hidden = 8
eval_episodes = 2
"#;
    let cfg = write(tmp.path(), "div.toml", text);
    let out = tmp.path().join("out");
    let res = run(&["train", "--config", cfg.to_str().unwrap()], Some(&out));
    assert_eq!(res.status.code(), Some(3));
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.failed(), 2);
    assert!(manifest.trials[0].error.as_deref().unwrap().contains("non-finite"));
}

#[test]
fn compare_writes_one_row_per_variant() {
    let tmp = tempfile::tempdir().unwrap();
    let names = [("atomic", "none"), ("rep3", "repetition"), ("rand3", "random")];
    let paths: Vec<String> = names
        .iter()
        .map(|(n, k)| {
            write(tmp.path(), &format!("{n}.toml"), &config(n, k, ""))
                .to_str()
                .unwrap()
                .to_string()
        })
        .collect();
    let out = tmp.path().join("cmp");
    let mut args = vec!["compare"];
    for p in &paths {
        args.push("--config");
        args.push(p);
    }
    let res = run(&args, Some(&out));
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("rep3"));

    let mut reader = csv::Reader::from_path(out.join("comparison.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        vec![
            "variant",
            "mean_return",
            "deviation",
            "best_mean",
            "lowest_deviation",
            "steps_to_threshold",
            "trials_reaching",
            "trials"
        ]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let steps = &r[5];
        assert!(steps == "∞" || steps.parse::<f64>().is_ok(), "{steps}");
    }
    assert!(rows.iter().any(|r| &r[3] == "true"));
    for (n, _) in names {
        let metrics = std::fs::read_to_string(out.join(n).join("trial_0/metrics.csv")).unwrap();
        assert_eq!(metrics.lines().count(), 5);
    }
    let gap = std::fs::read_to_string(out.join("gap.csv")).unwrap();
    assert!(gap.lines().skip(1).all(|l| names.iter().any(|(n, _)| l.ends_with(n))));
}

#[test]
fn compare_rejects_mismatched_budgets_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write(tmp.path(), "a.toml", &config("a", "none", ""));
    let b = write(
        tmp.path(),
        "b.toml",
        &config("b", "repetition", "").replace("epochs = 4", "epochs = 5"),
    );
    let out = tmp.path().join("cmp");
    let res = run(
        &["compare", "--config", a.to_str().unwrap(), "--config", b.to_str().unwrap()],
        Some(&out),
    );
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("budget"));
    assert!(!out.exists());
}

#[test]
fn discover_ranks_and_reports_overlap() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = write(tmp.path(), "aab.txt", "0 0 1 0 0 1 0 0 1\n");
    let jsonl = tmp.path().join("macros.jsonl");
    let res = run(
        &[
            "discover",
            "--trace",
            trace.to_str().unwrap(),
            "--length",
            "3",
            "--capacity",
            "2",
            "--omega",
            "0.6",
            "--out",
            jsonl.to_str().unwrap(),
        ],
        None,
    );
    assert!(res.status.success());
    let table = String::from_utf8_lossy(&res.stdout);
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].contains("0 0 1") && rows[0].contains("seed"));
    assert!(rows[1].contains("rejected") && rows[1].contains(" 2 "));
    let macros = std::fs::read_to_string(&jsonl).unwrap();
    assert_eq!(
        macros.trim(),
        r#"{"slot":0,"enabled":true,"actions":[0,0,1],"labels":["0","0","1"]}"#
    );

    let res = run(
        &["discover", "--trace", trace.to_str().unwrap(), "--length", "3", "--omega", "1.0"],
        None,
    );
    let table = String::from_utf8_lossy(&res.stdout);
    assert_eq!(table.matches("admitted").count() + table.matches("seed").count(), 2);

    let res = run(&["discover", "--trace", trace.to_str().unwrap(), "--length", "10"], None);
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stdout).starts_with("no windows"));

    let bad = write(tmp.path(), "bad.txt", "0 1\n1 9\n");
    let res = run(
        &["discover", "--trace", bad.to_str().unwrap(), "--length", "2", "--actions", "2"],
        None,
    );
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 2, column 3"));
}
