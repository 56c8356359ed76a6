use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::thread;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn bactint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bactint"))
        .args(args)
        .env_remove("BACTINT_NER_ENDPOINT")
        .env_remove("BACTINT_SCORE_ENDPOINT")
        .env_remove("BACTINT_SEARCH_ENDPOINT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fx(rel: &str) -> String {
    fixtures().join(rel).to_string_lossy().into_owned()
}

/// Answers `/ner` with the two capitalized words of each sentence and
/// `/score` with 0.9 per instance.
fn model_server() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let target = line.split_whitespace().nth(1).unwrap_or("").to_string();
            let mut length = 0;
            loop {
                let mut h = String::new();
                if reader.read_line(&mut h).unwrap() == 0 || h == "\r\n" {
                    break;
                }
                if let Some((k, v)) = h.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let req: serde_json::Value = serde_json::from_slice(&body).unwrap();
            let reply = if target.ends_with("/ner") {
                let mentions: Vec<serde_json::Value> = req["sentences"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|s| {
                        let s = s.as_str().unwrap();
                        let mut spans = Vec::new();
                        let mut pos = 0;
                        for w in s.split(' ') {
                            let n = w.chars().count();
                            if w.starts_with(char::is_uppercase) {
                                let end = pos + w.trim_end_matches('.').chars().count();
                                spans.push(serde_json::json!({"start": pos, "end": end, "label": "Bacteria"}));
                            }
                            pos += n + 1;
                        }
                        serde_json::Value::Array(spans)
                    })
                    .collect();
                serde_json::json!({ "mentions": mentions })
            } else {
                let n = req["instances"].as_array().unwrap().len();
                serde_json::json!({ "scores": vec![0.9; n] })
            };
            let body = reply.to_string();
            let head = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
                body.len()
            );
            stream.write_all(head.as_bytes()).unwrap();
            stream.write_all(body.as_bytes()).unwrap();
        }
    });
    url
}

#[test]
fn corpus_validate_reports_counts_and_fails_on_bad_pairs() {
    let o = bactint(&["corpus", "validate", &fx("e2e")]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("5 documents, 28 entities, 7 relations, 0 invalid"), "{}", stdout(&o));

    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.txt"), "short").unwrap();
    fs::write(dir.path().join("bad.ann"), "T1\tBacteria 0 99\tshort\n").unwrap();
    let o = bactint(&["corpus", "validate", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("1 invalid"));
}

#[test]
fn dataset_build_on_single_sentence_gives_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.jsonl");
    let o = bactint(&["dataset", "build", &fx("one_sentence"), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1);
    let line = text.lines().next().unwrap();
    let at: Vec<usize> = ["tagged_text", "label", "entity_a", "entity_b", "provenance"]
        .iter()
        .map(|k| line.find(&format!("\"{k}\":")).unwrap())
        .collect();
    assert!(at.windows(2).all(|w| w[0] < w[1]), "{line}");
}

#[test]
fn ablate_with_all_oracles_gives_identical_rows() {
    let o = bactint(&["ablate", &fx("e2e"), "--oracle"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(2).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!(r.ends_with("| 1.00      | 1.00   | 1.00 |"), "{out}");
    }
}

#[test]
fn baseline_train_prints_mean_std_and_saves_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let m = model.to_str().unwrap();
    let o = bactint(&["baseline", "train", "--synthetic", "120", "--runs", "3", "--save", m]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let cell = table_cell(&out, "F1");
    let chars: Vec<char> = cell.chars().collect();
    assert!(chars.len() == 11 && chars[1] == '.' && chars[4..7] == [' ', '±', ' '] && chars[8] == '.', "{cell:?}");

    let o = bactint(&["baseline", "eval", "--synthetic", "120", "--model", m]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("| Baseline"));
}

/// The value cell of a table row.
fn table_cell(table: &str, row: &str) -> String {
    let line = table.lines().find(|l| l.starts_with(&format!("| {row} "))).unwrap();
    line.split('|').nth(2).unwrap().trim().to_string()
}

#[test]
fn casestudy_offline_then_audit() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let o = bactint(&[
        "casestudy",
        "run",
        &fx("casestudy/network.tsv"),
        "--offline-store",
        &fx("casestudy/store"),
        "--json",
        json.to_str().unwrap(),
        "--workers",
        "3",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("2 of 5 edges") && out.contains("recall: unmeasured"), "{out}");

    // Without verdicts the audit refuses to compute precision.
    assert_eq!(bactint(&["casestudy", "audit", json.to_str().unwrap()]).status.code(), Some(1));

    let mut report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let mut first = true;
    for edge in report["edges"].as_array_mut().unwrap() {
        for p in edge["probable"].as_array_mut().unwrap() {
            p["correct"] = serde_json::Value::Bool(first);
            first = false;
        }
    }
    fs::write(&json, report.to_string()).unwrap();
    let o = bactint(&["casestudy", "audit", json.to_str().unwrap()]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("precision: 1/2 = 0.500"), "{out}");
    assert!(out.contains("| 1 | Bacillus subtilis produces"), "{out}");
}

#[test]
fn casestudy_without_a_source_is_a_config_error() {
    let o = bactint(&["casestudy", "run", &fx("casestudy/network.tsv")]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn config_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let c = cfg.to_str().unwrap();
    let e2e = fx("e2e");
    let run = |args: &[&str]| bactint(args).status.code();

    assert_eq!(run(&["--config", c, "corpus", "validate", &e2e]), Some(3));
    fs::write(&cfg, "seed = 1\n[endpoints]\nnerr = \"http://x\"\n").unwrap();
    assert_eq!(run(&["--config", c, "corpus", "validate", &e2e]), Some(4));
    fs::write(&cfg, "seed = [\n").unwrap();
    assert_eq!(run(&["--config", c, "corpus", "validate", &e2e]), Some(4));
    fs::write(&cfg, "runs = 1\n").unwrap();
    assert_eq!(run(&["--config", c, "corpus", "validate", &e2e]), Some(5));
    // A flag overrides the bad file value.
    assert_eq!(run(&["--config", c, "--runs", "2", "corpus", "validate", &e2e]), Some(0));
    assert_eq!(run(&["--threshold", "0", "corpus", "validate", &e2e]), Some(5));
    assert_eq!(run(&["corpus", "frobnicate"]), Some(2));
}

#[test]
fn endpoint_precedence_is_flag_then_env_then_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[endpoints]\nscore = \"ftp://file\"\n").unwrap();
    let c = cfg.to_str().unwrap();
    let e2e = fx("e2e");
    let with_env = |val: &str, extra: &[&str]| {
        let mut args = vec!["--config", c];
        args.extend_from_slice(extra);
        args.extend(["corpus", "validate", e2e.as_str()]);
        Command::new(env!("CARGO_BIN_EXE_bactint"))
            .args(&args)
            .env("BACTINT_SCORE_ENDPOINT", val)
            .output()
            .unwrap()
            .status
            .code()
    };
    // The bad file value is shadowed by a good env value, which a bad flag
    // in turn shadows.
    assert_eq!(with_env("http://env", &[]), Some(0));
    assert_eq!(with_env("ftp://env", &[]), Some(5));
    assert_eq!(with_env("ftp://env", &["--score-endpoint", "http://flag"]), Some(0));
    assert_eq!(with_env("http://env", &["--score-endpoint", "ftp://flag"]), Some(5));
}

#[test]
fn extract_through_remote_services() {
    let url = model_server();
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.txt");
    fs::write(&input, "Roseburia inhibits Eubacterium.\nnothing here\n").unwrap();
    let out = dir.path().join("p.jsonl");
    let o = bactint(&[
        "extract",
        "--mode",
        "ner-ie",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--ner-endpoint",
        &url,
        "--score-endpoint",
        &url,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let recs: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs.len(), 1, "{text}");
    assert_eq!(recs[0]["pair"], serde_json::json!(["eubacterium", "roseburia"]));
    assert_eq!(recs[0]["score"], 0.9);
    assert_eq!(recs[0]["doc_id"], "s");
}

#[test]
fn extract_modes_read_their_inputs() {
    let e2e = fx("e2e");
    let count = |mode: &str| {
        let o = bactint(&["extract", "--mode", mode, &e2e]);
        assert!(o.status.success(), "{mode}: {}", String::from_utf8_lossy(&o.stderr));
        stdout(&o).lines().count()
    };
    assert!(count("ss-ner-ie") > 0);
    assert!(count("ner-ie") > 0);
    assert!(count("only-ie") >= count("ner-ie"));
    let file = fixtures().join("e2e/dairy.txt");
    assert_eq!(bactint(&["extract", "--mode", "only-ie", file.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn harmonize_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h");
    let o = bactint(&[
        "harmonize",
        "--out",
        out.to_str().unwrap(),
        &fx("harmonize/genereg.toml"),
        &fx("harmonize/aimed.toml"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("GeneReg: 5 sentences, 3 of 7 relations kept (4 cross-sentence"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("drop_report.json")).unwrap()).unwrap();
    assert_eq!(report["total"]["source_relations"], 10);
    assert!(fs::read_to_string(out.join("dataset.jsonl")).unwrap().lines().count() > 0);
    assert!(out.join("sentences").is_dir());
}
