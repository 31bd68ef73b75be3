use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn qdagc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdagc"))
        .args(args)
        .output()
        .unwrap()
}

fn qdagc_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_qdagc"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn values(text: &str) -> Vec<(String, f64)> {
    text.lines()
        .filter_map(|l| l.split_once(' '))
        .filter_map(|(k, v)| Some((k.to_string(), v.parse().ok()?)))
        .collect()
}

fn assert_values(text: &str, expected: &[(&str, f64)]) {
    let got = values(text);
    assert_eq!(got.len(), expected.len(), "{text}");
    for ((k, v), (ek, ev)) in got.iter().zip(expected) {
        assert_eq!(k, ek);
        assert!((v - ev).abs() < 1e-9, "{k}: {v} vs {ev}");
    }
}

#[test]
fn compile_reproduces_golden_dags() {
    let cases = [
        ("fork.json", "B", "C", true, "fork.qdag"),
        ("fork.json", "B", "C", false, "fork_reduced.qdag"),
        ("pair.json", "A,B", "B", true, "pair.qdag"),
        ("chain3.json", "A", "B", true, "chain3.qdag"),
        (
            "diamond.json",
            "Cloudy,Wet",
            "Sprinkler,Wet",
            true,
            "diamond.qdag",
        ),
    ];
    for (net, query, evidence, raw, golden) in cases {
        let net = data(net);
        let mut args = vec!["compile", &net, "--query", query, "--evidence", evidence];
        if raw {
            args.push("--no-reduce");
        }
        assert_eq!(
            stdout(&qdagc(&args)),
            fs::read_to_string(data(golden)).unwrap(),
            "{golden}"
        );
    }
}

#[test]
fn fork_outputs() {
    let dag = data("fork.qdag");
    assert_values(
        &stdout(&qdagc(&["eval", &dag, "--set", "C=ON"])),
        &[("B=ON", 0.3475), ("B=OFF", 0.2725)],
    );
    assert_values(
        &stdout(&qdagc(&["eval", &dag, "--set", "C=OFF"])),
        &[("B=ON", 0.2875), ("B=OFF", 0.0925)],
    );
    assert_values(
        &stdout(&qdagc(&["eval", &dag, "--set", "C=?"])),
        &[("B=ON", 0.635), ("B=OFF", 0.365)],
    );
    assert_values(
        &stdout(&qdagc(&["eval", &dag, "--set", "C=ON", "--normalize", "B"])),
        &[
            ("B=ON", 0.3475),
            ("B=OFF", 0.2725),
            ("B=ON|e", 0.3475 / 0.62),
            ("B=OFF|e", 0.2725 / 0.62),
        ],
    );
}

#[test]
fn evidence_files_match_settings() {
    for (file, setting) in [
        ("c_on.ev", "C=ON"),
        ("c_off.ev", "C=OFF"),
        ("c_unknown.ev", "C=?"),
    ] {
        for dag in ["fork.qdag", "fork_reduced.qdag"] {
            let from_file = stdout(&qdagc(&[
                "eval",
                &data(dag),
                "--evidence-file",
                &data(file),
            ]));
            let from_flag = stdout(&qdagc(&["eval", &data("fork.qdag"), "--set", setting]));
            let (a, b) = (values(&from_file), values(&from_flag));
            for ((ka, va), (kb, vb)) in a.iter().zip(&b) {
                assert_eq!(ka, kb);
                assert!((va - vb).abs() <= 1e-12 * va.abs());
            }
        }
    }
}

#[test]
fn watch_matches_fresh_runs() {
    let dag = data("fork_reduced.qdag");
    let steps = ["C=ON", "C=OFF", "C=OFF", "C=?", "C=ON"];
    let out = stdout(&qdagc_stdin(
        &["eval", &dag, "--watch"],
        &(steps.join("\n") + "\n"),
    ));
    let mut lines = out.lines();
    for step in steps {
        let fresh = stdout(&qdagc(&["eval", &dag, "--set", step]));
        let block: Vec<&str> = lines.by_ref().take(fresh.lines().count()).collect();
        assert_eq!(block.join("\n") + "\n", fresh, "{step}");
        assert!(lines.next().unwrap().starts_with("recomputed "));
    }
    assert!(lines.next().is_none());
    assert!(
        out.contains("recomputed 0\n"),
        "repeated setting recomputes nothing"
    );
}

#[test]
fn voi_of_pair() {
    let out = stdout(&qdagc(&[
        "voi",
        &data("pair.qdag"),
        "B",
        "--utility",
        "2.5,-3",
    ]));
    let v: f64 = out.trim().parse().unwrap();
    assert!((v - (2.5 * 0.59 - 3.0 * 0.41)).abs() < 1e-9);
    let zero = stdout(&qdagc(&[
        "voi",
        &data("pair.qdag"),
        "B",
        "--utility",
        "0,0",
    ]));
    assert_eq!(zero.trim().parse::<f64>().unwrap(), 0.0);
}

#[test]
fn oracle_and_stats() {
    let net = data("fork.json");
    assert_values(
        &stdout(&qdagc(&["oracle", &net, "--query", "B", "--set", "C=OFF"])),
        &[("B=ON", 0.2875), ("B=OFF", 0.0925)],
    );
    assert_values(
        &stdout(&qdagc(&["oracle", &net, "--query", "C"])),
        &[("C=ON", 0.62), ("C=OFF", 0.38)],
    );
    assert_eq!(
        stdout(&qdagc(&["stats", &net])),
        "clusters 2\nmax-cluster-size 2\ntotal-table-size 8\n"
    );
}

#[test]
fn reduce_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("chain3_reduced.qdag");
    let run = qdagc(&[
        "reduce",
        &data("chain3.qdag"),
        "-o",
        out.to_str().unwrap(),
        "--report",
    ]);
    assert!(run.status.success());
    let report = String::from_utf8(run.stderr).unwrap();
    assert!(report.starts_with("nodes 23 -> 14\n"), "{report}");
    assert!(report.contains("numeric-reduction "));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().nth(3).unwrap(), "nodes 14");

    let single = qdagc(&[
        "reduce",
        &data("chain3.qdag"),
        "--rule",
        "numeric-reduction",
        "--report",
    ]);
    let report = String::from_utf8(single.stderr).unwrap();
    assert_eq!(
        report.lines().skip(2).collect::<Vec<_>>(),
        ["numeric-reduction 2"]
    );
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| qdagc(args).status.code().unwrap();
    let dag = data("fork.qdag");
    assert_eq!(code(&["eval", &dag]), 0);
    assert_eq!(code(&["eval"]), 1);
    assert_eq!(code(&["eval", &dag, "--set", "D=ON"]), 1);
    assert_eq!(code(&["eval", &dag, "--set", "C=MAYBE"]), 1);
    assert_eq!(code(&["eval", &dag, "--set", "C"]), 1);
    assert_eq!(code(&["reduce", &dag, "--rule", "constant-folding"]), 1);
    assert_eq!(code(&["compile", &data("fork.json"), "--query", "Z"]), 1);
    assert_eq!(
        code(&["voi", &data("pair.qdag"), "A", "--utility", "1,2"]),
        1
    );
    assert_eq!(code(&["voi", &data("pair.qdag"), "B", "--utility", "1"]), 1);
    for f in fs::read_dir(data("malformed")).unwrap() {
        assert_eq!(code(&["eval", f.unwrap().path().to_str().unwrap()]), 2);
    }
    assert_eq!(code(&["compile", &data("c_on.ev"), "--query", "A"]), 2);

    // Y=b has probability zero
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("det.json");
    fs::write(
        &net,
        r#"{"variables": [{"name": "X", "values": ["a", "b"]}, {"name": "Y", "values": ["a", "b"]}],
            "cpts": [{"child": "X", "table": [1, 0]}, {"child": "Y", "parents": ["X"], "table": [1, 0, 0, 1]}]}"#,
    )
    .unwrap();
    let dag = dir.path().join("det.qdag");
    assert_eq!(
        code(&[
            "compile",
            net.to_str().unwrap(),
            "--query",
            "X,Y",
            "--evidence",
            "Y",
            "-o",
            dag.to_str().unwrap()
        ]),
        0
    );
    let zero = qdagc(&[
        "eval",
        dag.to_str().unwrap(),
        "--set",
        "Y=b",
        "--normalize",
        "X",
    ]);
    assert_eq!(zero.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&zero.stderr).contains("evidence has zero probability"));
    assert_eq!(
        code(&[
            "voi",
            dag.to_str().unwrap(),
            "Y",
            "--utility",
            "1,1",
            "--set",
            "Y=a"
        ]),
        3
    );
    assert_eq!(code(&["eval", dag.to_str().unwrap(), "--set", "Y=b"]), 0);
}

#[test]
fn network_round_trip_through_files() {
    let net = qdagc::parse_network(&fs::read_to_string(data("diamond.json")).unwrap()).unwrap();
    let text = qdagc::render_network(&net);
    assert_eq!(qdagc::parse_network(&text).unwrap(), net);
}
