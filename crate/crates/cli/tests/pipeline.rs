use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tacrule_core::ilp::clause::parse_clauses;
use tacrule_core::ilp::cover::covers;
use tacrule_core::state::{corpus_to_string, parse_corpus, parse_state, Corpus};

const SMALL: &str = r#"
seed = 7
[budget]
max_nodes = 400
[synthetic.train]
per_tactic = 10
distractors = 20
[synthetic.validation]
per_tactic = 5
distractors = 10
[[synthetic.test]]
per_tactic = 5
distractors = 10
[grid]
pos = [8]
neg = [8]
qualt = [0.0, 0.1, 0.3]
variants = ["AF"]
"#;

fn tacrule(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tacrule"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "trace")
        .stdin(Stdio::null())
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.toml"), SMALL).unwrap();
    let out = tacrule(dir.path(), &["--config", "cfg.toml", "gen-synthetic", "-o", "data"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let root = dir.path().to_path_buf();
    (dir, root)
}

const DATA: [&str; 8] = [
    "--config",
    "cfg.toml",
    "--corpus",
    "data/corpus.jsonl",
    "--split",
    "data/split.toml",
    "--oracle",
    "data/oracle.txt",
];

fn with_data<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    DATA.iter().copied().chain(extra.iter().copied()).collect()
}

fn load_corpus(path: &Path) -> Corpus {
    parse_corpus(fs::read_to_string(path).unwrap().as_bytes()).unwrap()
}

#[test]
fn train_prune_predict_evaluate() {
    let (_dir, root) = setup();
    let out = tacrule(&root, &with_data(&["--model", "model.json", "train", "--rules", "rules.pl"]));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rules = fs::read_to_string(root.join("rules.pl")).unwrap();
    for tactic in ["assumption", "reflexivity", "simpl", "specialize"] {
        assert!(rules.contains(&format!("\"{tactic}\"")), "no {tactic} rule in\n{rules}");
    }

    let out = tacrule(
        &root,
        &with_data(&["--model", "model.json", "--rules", "rules.pl", "--qualt", "0.5", "prune", "-o", "pruned.pl"]),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stats = fs::read_to_string(root.join("pruned.stats.csv")).unwrap();
    assert!(stats.starts_with("rule_id,tp,fp,precision\n"));
    assert!(fs::read_to_string(root.join("pruned.pl")).unwrap().contains("% qualt 0.500000"));

    let out = tacrule(
        &root,
        &with_data(&["--model", "model.json", "--rules", "pruned.pl", "--reports", "reports", "evaluate"]),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let tsv = fs::read_to_string(root.join("reports/test.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 3, "header, test1, pooled");
    assert!(root.join("reports/test.json").exists());
    assert!(root.join("reports/effective_config.toml").exists());

    // Accepted tactics name rules that really cover the state.
    let corpus = load_corpus(&root.join("data/corpus.jsonl"));
    let batch: Vec<_> = corpus.states.iter().filter(|s| s.theory == "test1").take(10).cloned().collect();
    fs::write(root.join("batch.jsonl"), corpus_to_string(&Corpus::new(batch.clone()))).unwrap();
    let out = tacrule(
        &root,
        &["--model", "model.json", "--rules", "pruned.pl", "predict", "--input", "batch.jsonl", "--json"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<serde_json::Value> =
        String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), batch.len());
    let mut accepted = 0;
    for (state, line) in batch.iter().zip(&lines) {
        let fb = tacrule_core::encode(state, tacrule_core::Encoding::Anonymous);
        let ranking = line["ranking"].as_array().unwrap();
        let flags: Vec<bool> = ranking.iter().map(|r| r["accepted"].as_bool().unwrap()).collect();
        assert!(flags.windows(2).all(|w| w[0] || !w[1]), "accepted tactics come first");
        for r in ranking {
            let shown = r["rules"].as_array().unwrap();
            assert_eq!(r["accepted"].as_bool().unwrap(), !shown.is_empty());
            for rule in shown {
                let clause = parse_clauses(rule.as_str().unwrap()).unwrap().remove(0);
                assert_eq!(clause.tactic(), r["tactic"].as_str());
                assert!(covers(&clause, &fb, 1000), "{rule} shown for state {}", state.id);
                accepted += 1;
            }
        }
    }
    assert!(accepted > 0);
}

#[test]
fn sweep_is_byte_deterministic() {
    let (_dir, root) = setup();
    for run in ["a", "b"] {
        let out = tacrule(&root, &with_data(&["sweep", "--reports", run]));
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["sweep.tsv", "sweep.json", "best_AF.pl", "best_AF.stats.csv"] {
        let a = fs::read(root.join("a").join(file)).unwrap();
        let b = fs::read(root.join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }
    let tsv = fs::read_to_string(root.join("a/sweep.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 1 + 3, "one row per qualt");
}

#[test]
fn encode_writes_one_file_per_state() {
    let (_dir, root) = setup();
    let corpus = load_corpus(&root.join("data/corpus.jsonl"));
    let three = Corpus::new(corpus.states[..3].to_vec());
    fs::write(root.join("three.jsonl"), corpus_to_string(&three)).unwrap();
    let out = tacrule(&root, &["--corpus", "three.jsonl", "encode", "-o", "facts"]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read_dir(root.join("facts")).unwrap().count(), 3);
    for s in &three.states {
        let facts = fs::read_to_string(root.join(format!("facts/{}.pl", s.id))).unwrap();
        assert_eq!(facts.lines().filter(|l| !l.is_empty()).count(), s.node_count());
    }
    let again = tacrule(&root, &["--corpus", "three.jsonl", "encode", "-o", "facts2"]);
    assert_eq!(code(&again), 0);
    for s in &three.states {
        let name = format!("{}.pl", s.id);
        assert_eq!(
            fs::read(root.join("facts").join(&name)).unwrap(),
            fs::read(root.join("facts2").join(&name)).unwrap()
        );
    }
}

#[test]
fn zero_timeout_gives_empty_rules_and_partial_exit() {
    let (_dir, root) = setup();
    let out = tacrule(&root, &with_data(&["--timeout", "0", "train", "--rules", "rules.pl"]));
    assert_eq!(code(&out), 3);
    let text = fs::read_to_string(root.join("rules.pl")).unwrap();
    assert!(text.lines().all(|l| l.starts_with('%')), "{text}");
}

#[test]
fn single_tactic_corpus_learns_only_that_tactic() {
    let (_dir, root) = setup();
    let corpus = load_corpus(&root.join("data/corpus.jsonl"));
    let only: Vec<_> = corpus.states.into_iter().filter(|s| s.tactic == "simpl").collect();
    fs::write(root.join("simpl.jsonl"), corpus_to_string(&Corpus::new(only))).unwrap();
    let out = tacrule(
        &root,
        &["--config", "cfg.toml", "--corpus", "simpl.jsonl", "--split", "data/split.toml", "train", "--rules", "r.pl"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let clauses = parse_clauses(&fs::read_to_string(root.join("r.pl")).unwrap()).unwrap();
    assert!(!clauses.is_empty());
    assert!(clauses.iter().all(|c| c.tactic() == Some("simpl")));
}

#[test]
fn empty_rule_file_keeps_knn_order() {
    let (_dir, root) = setup();
    let out = tacrule(&root, &with_data(&["--model", "model.json", "train", "--rules", "rules.pl"]));
    assert_eq!(code(&out), 0);
    fs::write(root.join("empty.pl"), "% variant AF\n").unwrap();
    let corpus = load_corpus(&root.join("data/corpus.jsonl"));
    let state = corpus.states.iter().find(|s| s.theory == "test1").unwrap();
    fs::write(root.join("one.jsonl"), corpus_to_string(&Corpus::new(vec![state.clone()]))).unwrap();
    let out =
        tacrule(&root, &["--model", "model.json", "--rules", "empty.pl", "predict", "--input", "one.jsonl", "--json"]);
    assert_eq!(code(&out), 0);
    let line: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let scores: Vec<f64> = line["ranking"].as_array().unwrap().iter().map(|r| r["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]), "{scores:?}");
    assert!(line["ranking"].as_array().unwrap().iter().all(|r| r["accepted"] == false));
}

#[test]
fn unparseable_state_is_a_data_error() {
    let (_dir, root) = setup();
    let out = tacrule(&root, &with_data(&["--model", "model.json", "train", "--rules", "rules.pl"]));
    assert_eq!(code(&out), 0);
    fs::write(root.join("bad.jsonl"), "{\"id\": 1, \"goal\": 3}\n").unwrap();
    let out = tacrule(&root, &["--model", "model.json", "--rules", "rules.pl", "predict", "--input", "bad.jsonl"]);
    assert_eq!(code(&out), 2);
    assert!(parse_state("{\"id\": 1, \"goal\": 3}", 1).is_err());
}

#[test]
fn usage_errors_exit_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let out = tacrule(root, &["--seed", "1", "--corpus", "missing.jsonl", "train", "--rules", "r.pl"]);
    assert_eq!(code(&out), 1);
    assert!(!root.join("r.pl").exists());

    let out = tacrule(root, &["--corpus", "missing.jsonl", "encode", "-o", "facts"]);
    assert_eq!(code(&out), 1);
    assert!(!root.join("facts").exists());

    fs::write(root.join("c.jsonl"), "").unwrap();
    let out = tacrule(root, &["--corpus", "c.jsonl", "sweep", "--reports", "rep"]);
    assert_eq!(code(&out), 1, "seed is mandatory");

    fs::write(root.join("typo.toml"), "sede = 3\n").unwrap();
    assert_eq!(code(&tacrule(root, &["--config", "typo.toml", "sweep"])), 1);
    assert_eq!(code(&tacrule(root, &["no-such-command"])), 1);
    assert_eq!(code(&tacrule(root, &["--help"])), 0);
}

#[test]
fn print_config_echoes_effective_values() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.toml"), SMALL).unwrap();
    let out =
        tacrule(dir.path(), &["--config", "cfg.toml", "--seed", "11", "--max-nodes", "99", "--print-config", "sweep"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let echoed: toml::Value = toml::from_str(&text).unwrap();
    assert_eq!(echoed["seed"].as_integer(), Some(11));
    assert_eq!(echoed["budget"]["max_nodes"].as_integer(), Some(99));
    assert_eq!(echoed["grid"]["qualt"].as_array().unwrap().len(), 3);
}
