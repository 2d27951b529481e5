use std::path::Path;

use turbojet_fdi::cli::run;
use turbojet_fdi::faults::{FaultKind, FaultSchedule, FaultSpec};
use turbojet_fdi::runtime::StreamSummary;
use turbojet_fdi::Signal;

fn exit(args: &[&str]) -> i32 {
    let mut argv = vec!["turbojet-fdi"];
    argv.extend_from_slice(args);
    run(argv)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_schedule(path: &Path, specs: Vec<FaultSpec>) {
    std::fs::write(path, FaultSchedule::new(specs, 0.02).unwrap().to_text()).unwrap();
}

#[test]
fn bank_monitor_flags_a_faulty_stream_and_passes_a_clean_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let train = d.join("fd002.csv");
    assert_eq!(
        exit(&["gen-dataset", "--scenario", "FD002", "--seed", "1", "-o", s(&train)]),
        0
    );
    for c in ["T2", "T3"] {
        let model = d.join(format!("{c}.json"));
        assert_eq!(
            exit(&[
                "train",
                "--data",
                s(&train),
                "--algo",
                "lda",
                "--component",
                c,
                "-o",
                s(&model)
            ]),
            0
        );
    }
    std::fs::write(
        d.join("bank.toml"),
        "dt = 0.1\ndebounce = 5\n\n[[entry]]\ncomponent = \"T2\"\nmodel = \"T2.json\"\n\n[[entry]]\ncomponent = \"T3\"\nmodel = \"T3.json\"\n",
    )
    .unwrap();

    let faulty = d.join("faulty.txt");
    write_schedule(
        &faulty,
        vec![FaultSpec::sensor(FaultKind::SensorBias, Signal::T3, 0.05, 30.0, 60.0).unwrap()],
    );
    let clean = d.join("clean.txt");
    write_schedule(&clean, Vec::new());
    for (name, faults) in [("faulty", &faulty), ("clean", &clean)] {
        let stream = d.join(format!("{name}.csv"));
        let args = [
            "simulate",
            "--profile",
            "ramp:0:0.62,100:0.95",
            "--faults",
            s(faults),
            "-o",
            s(&stream),
        ];
        assert_eq!(exit(&args), 0);
    }

    let bank = d.join("bank.toml");
    let summary = d.join("summary.json");
    let status = d.join("status.jsonl");
    let monitor = |input: &Path| {
        exit(&[
            "monitor",
            "--bank",
            s(&bank),
            "--input",
            s(input),
            "-o",
            s(&status),
            "--summary",
            s(&summary),
        ])
    };
    assert_eq!(monitor(&d.join("faulty.csv")), 2);
    let report: StreamSummary = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    let t3 = report.components.iter().find(|c| c.component == "T3").unwrap();
    assert_eq!(t3.episodes.len(), 1);
    assert!((30.0..31.0).contains(&t3.episodes[0].onset), "{:?}", t3.episodes);
    assert!(report
        .components
        .iter()
        .find(|c| c.component == "T2")
        .unwrap()
        .episodes
        .is_empty());
    let records = std::fs::read_to_string(&status).unwrap();
    assert!(records
        .lines()
        .any(|l| l.contains("\"component\":\"T3\"") && l.contains("\"status\":\"red\"")));

    assert_eq!(monitor(&d.join("clean.csv")), 0);
    assert_eq!(monitor(&d.join("missing.csv")), 1);
    assert_eq!(
        exit(&[
            "monitor",
            "--bank",
            s(&d.join("nope.toml")),
            "--input",
            s(&d.join("clean.csv"))
        ]),
        1
    );
}

#[test]
fn compare_writes_the_report_set() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (train, test, out) = (d.join("train.csv"), d.join("test.csv"), d.join("cmp"));
    let gen = |split: &str, p: &Path| {
        exit(&[
            "gen-dataset",
            "--scenario",
            "FD001",
            "--split",
            split,
            "--duration",
            "40",
            "--seed",
            "4",
            "-o",
            s(p),
        ])
    };
    assert_eq!(gen("train", &train), 0);
    assert_eq!(gen("test", &test), 0);
    let args = [
        "compare",
        "--train",
        s(&train),
        "--test",
        s(&test),
        "--cv-folds",
        "3",
        "-o",
        s(&out),
    ];
    assert_eq!(exit(&args), 0);
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("classifier,accuracy,f1,train_time_s"));
    assert_eq!(lines.count(), 4);
    assert!(out.join("report.txt").exists() && out.join("report.json").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["artifacts"]["report.csv"]["command"], "compare");
    assert!(manifest["artifacts"]["report.csv"]["inputs"]["train.csv"].is_string());
}

#[test]
fn bad_arguments_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    assert_eq!(exit(&["gen-dataset", "--scenario", "FD009", "-o", s(&out)]), 1);
    assert_eq!(exit(&["simulate", "--profile", "wobble:3", "-o", s(&out)]), 1);
    assert_eq!(exit(&["train", "--data", s(&out), "--algo", "lda", "-o", s(&out)]), 1);
    assert_eq!(exit(&["frobnicate"]), 1);
}
