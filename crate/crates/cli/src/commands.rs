//! The subcommands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use num_rational::Ratio;
use serde::Serialize;
use tacrule_core::encoding::FactStore;
use tacrule_core::eval::{format_ratio, parse_decimal, Best, Experiment};
use tacrule_core::knn::NeighborModel;
use tacrule_core::ruleset::{Labeled, RuleSet};
use tacrule_core::selection::{orthogonalize as relabel, AutomationOracle};
use tacrule_core::state::{corpus_to_string, parse_corpus, parse_state, Corpus, Split};
use tacrule_core::synth::generate;

use crate::config::{load_split, qualt_ratio, split_to_toml, Config};
use crate::{CliError, Outcome};

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    path.as_deref().ok_or_else(|| CliError::Usage(format!("missing {what} path (config `paths` or --{what})")))
}

/// Checks that every input exists before anything is written.
fn require_inputs(paths: &[&Path]) -> Result<(), CliError> {
    for p in paths {
        if !p.exists() {
            return Err(CliError::Usage(format!("{} does not exist", p.display())));
        }
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_corpus(config: &Config) -> Result<Corpus, CliError> {
    let path = required(&config.paths.corpus, "corpus")?;
    let file = fs::File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let corpus = parse_corpus(BufReader::new(file)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    match &config.paths.split {
        Some(p) => corpus.with_split(load_split(p)?).map_err(|e| CliError::Data(e.to_string())),
        None => Ok(corpus),
    }
}

fn load_oracle(path: &Path) -> Result<AutomationOracle, CliError> {
    AutomationOracle::parse(&read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// The corpus, relabelled when an oracle is configured.
fn prepared_corpus(config: &Config) -> Result<Corpus, CliError> {
    let mut inputs = vec![required(&config.paths.corpus, "corpus")?];
    inputs.extend(config.paths.split.as_deref());
    inputs.extend(config.paths.oracle.as_deref());
    require_inputs(&inputs)?;
    let corpus = load_corpus(config)?;
    Ok(match &config.paths.oracle {
        Some(p) => relabel(&corpus, &load_oracle(p)?),
        None => corpus,
    })
}

fn load_model(config: &Config) -> Result<NeighborModel, CliError> {
    let path = required(&config.paths.model, "model")?;
    let file = fs::File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    NeighborModel::load(BufReader::new(file)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn fit_model(config: &Config, corpus: &Corpus) -> Result<NeighborModel, CliError> {
    let model = NeighborModel::fit(corpus.in_split(Split::Train), config.knn.clone())
        .map_err(|e| CliError::Data(format!("k-NN model: {e}")))?;
    if let Some(path) = &config.paths.model {
        let mut buf = Vec::new();
        model.save(&mut buf).map_err(|e| CliError::Data(e.to_string()))?;
        write(path, &String::from_utf8(buf).expect("JSON is UTF-8"))?;
    }
    Ok(model)
}

/// Header lines recording the parameters rules were learned with.
fn rule_header(pos: usize, neg: usize, qualt: &str) -> String {
    format!("% pos {pos}\n% neg {neg}\n% qualt {qualt}\n")
}

fn header_value(text: &str, key: &str) -> Option<String> {
    text.lines()
        .filter_map(|l| l.trim().strip_prefix('%'))
        .find_map(|l| l.trim().strip_prefix(key).filter(|rest| rest.starts_with(' ')).map(|v| v.trim().to_string()))
}

fn load_rules(config: &Config) -> Result<(RuleSet, String), CliError> {
    let path = required(&config.paths.rules, "rules")?;
    let text = read(path)?;
    let rules = RuleSet::parse_rule_file(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok((rules.with_proof_depth(config.budget.max_proof_depth), text))
}

fn write_reports(config: &Config, files: &[(&str, String)]) -> Result<(), CliError> {
    if let Some(dir) = &config.paths.reports {
        write(&dir.join("effective_config.toml"), &config.to_toml())?;
        for (name, text) in files {
            write(&dir.join(name), text)?;
        }
    }
    Ok(())
}

pub fn encode(config: &Config) -> Result<Outcome, CliError> {
    let out = required(&config.paths.out, "out")?.to_path_buf();
    require_inputs(&[required(&config.paths.corpus, "corpus")?])?;
    let corpus = load_corpus(config)?;
    let encoding = config.variant.encoding();
    for s in &corpus.states {
        write(&out.join(format!("{}.pl", s.id)), &tacrule_core::encode(s, encoding).to_prolog())?;
    }
    log::info!("wrote {} fact files to {}", corpus.states.len(), out.display());
    Ok(Outcome::Complete)
}

pub fn orthogonalize(config: &Config) -> Result<Outcome, CliError> {
    let out = required(&config.paths.out, "out")?.to_path_buf();
    let oracle_path = required(&config.paths.oracle, "oracle")?;
    require_inputs(&[required(&config.paths.corpus, "corpus")?, oracle_path])?;
    let corpus = load_corpus(config)?;
    let relabelled = relabel(&corpus, &load_oracle(oracle_path)?);
    let changed = corpus.states.iter().zip(&relabelled.states).filter(|(a, b)| a.tactic != b.tactic).count();
    write(&out, &corpus_to_string(&relabelled))?;
    log::info!("relabelled {changed} of {} states", corpus.states.len());
    Ok(Outcome::Complete)
}

pub fn train(config: &Config) -> Result<Outcome, CliError> {
    let seed = config.seed()?;
    let rules_path = required(&config.paths.rules, "rules")?.to_path_buf();
    let corpus = prepared_corpus(config)?;
    let model = fit_model(config, &corpus)?;
    let exp = Experiment::new(&corpus, &model, config.budget.clone(), config.cost.clone(), seed);
    let trained = exp.train(config.variant, config.selection.pos, config.selection.neg);
    let mut timing = String::from("tactic\ttasks\twallclock_secs\ttimeouts\n");
    for t in &trained.timing {
        log::info!("{}: {} tasks in {:.2?}", t.tactic, t.tasks, t.elapsed);
        let _ = writeln!(timing, "{}\t{}\t{:.3}\t{}", t.tactic, t.tasks, t.elapsed.as_secs_f64(), t.timed_out);
    }
    for f in &trained.failures {
        log::error!("{f}");
    }
    let header = rule_header(config.selection.pos, config.selection.neg, &format_ratio(Some(Ratio::from_integer(0))));
    write(&rules_path, &(header + &trained.rules.to_rule_file()))?;
    write_reports(config, &[("train_timing.tsv", timing)])?;
    log::info!("wrote {} rules to {}", trained.rules.len(), rules_path.display());
    let timeouts = trained.timing.iter().any(|t| t.timed_out > 0);
    Ok(if trained.failures.is_empty() && !timeouts { Outcome::Complete } else { Outcome::Partial })
}

fn validation_set<'a>(corpus: &'a Corpus, store: &'a FactStore, presel: &'a [Vec<String>]) -> Vec<Labeled<'a>> {
    corpus
        .in_split(Split::Validation)
        .zip(presel)
        .map(|(s, p)| Labeled { state: store.get(s.id).expect("encoded"), truth: &s.tactic, preselection: p })
        .collect()
}

pub fn prune(config: &Config) -> Result<Outcome, CliError> {
    let out = required(&config.paths.out, "out")?.to_path_buf();
    require_inputs(&[required(&config.paths.rules, "rules")?, required(&config.paths.model, "model")?])?;
    let corpus = prepared_corpus(config)?;
    let model = load_model(config)?;
    let (mut rules, text) = load_rules(config)?;
    let qualt = qualt_ratio(config.selection.qualt)?;
    let store = FactStore::build(corpus.in_split(Split::Validation), rules.variant().encoding());
    let presel: Vec<Vec<String>> = corpus.in_split(Split::Validation).map(|s| model.preselect(s).tactics()).collect();
    let labeled = validation_set(&corpus, &store, &presel);
    let counts = rules.accumulate_stats(&labeled).map_err(|e| CliError::Data(e.to_string()))?;
    let kept = rules.prune(qualt);
    log::info!(
        "validation before pruning: f1 {}; kept {} of {} rules at qualt {}",
        format_ratio(counts.f1()),
        kept.len(),
        rules.len(),
        format_ratio(Some(qualt))
    );
    let pos = header_value(&text, "pos").unwrap_or_else(|| "?".into());
    let neg = header_value(&text, "neg").unwrap_or_else(|| "?".into());
    let header = format!("% pos {pos}\n% neg {neg}\n% qualt {}\n", format_ratio(Some(qualt)));
    write(&out, &(header + &kept.to_rule_file()))?;
    let stats_path = config.paths.stats.clone().unwrap_or_else(|| out.with_extension("stats.csv"));
    write(&stats_path, &kept.stats_table())?;
    Ok(Outcome::Complete)
}

#[derive(Serialize)]
struct PredictionLine {
    state: u64,
    ranking: Vec<RankedLine>,
}

#[derive(Serialize)]
struct RankedLine {
    tactic: String,
    score: f64,
    accepted: bool,
    rules: Vec<String>,
}

pub fn predict(config: &Config, input: Option<&Path>, json: bool) -> Result<Outcome, CliError> {
    require_inputs(&[required(&config.paths.rules, "rules")?, required(&config.paths.model, "model")?])?;
    if let Some(p) = input {
        require_inputs(&[p])?;
    }
    let model = load_model(config)?;
    let (rules, _) = load_rules(config)?;
    let mut text = String::new();
    match input {
        Some(p) => text = read(p)?,
        None => {
            std::io::stdin().read_to_string(&mut text).map_err(|e| CliError::Data(format!("stdin: {e}")))?;
        }
    }
    let mut out = String::new();
    for (i, line) in BufReader::new(text.as_bytes()).lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let state = parse_state(&line, i + 1).map_err(|e| CliError::Data(format!("input: {e}")))?;
        let pre = model.preselect(&state);
        let scores: BTreeMap<&str, f64> = pre.ranked.iter().map(|(t, s)| (t.as_str(), *s)).collect();
        let fb = tacrule_core::encode(&state, rules.variant().encoding());
        let order = rules.reorder(&fb, &pre.tactics()).map_err(|e| CliError::Data(e.to_string()))?;
        let ranking: Vec<RankedLine> = order
            .iter()
            .map(|r| RankedLine {
                tactic: r.tactic.clone(),
                score: scores[r.tactic.as_str()],
                accepted: r.accepted(),
                rules: r.rules.iter().map(|&id| rules.rules()[id].clause.to_string()).collect(),
            })
            .collect();
        if json {
            let line = PredictionLine { state: state.id, ranking };
            out.push_str(&serde_json::to_string(&line).expect("prediction serializes"));
            out.push('\n');
        } else {
            let _ = writeln!(out, "state {}", state.id);
            for (rank, r) in ranking.iter().enumerate() {
                let flag = if r.accepted { "accept" } else { "reject" };
                let _ = writeln!(out, "  {:>2}. {:<24} {:>8.4}  {flag}", rank + 1, r.tactic, r.score);
                for rule in &r.rules {
                    let _ = writeln!(out, "        because {rule}");
                }
            }
        }
    }
    print!("{out}");
    Ok(Outcome::Complete)
}

pub fn evaluate(config: &Config) -> Result<Outcome, CliError> {
    require_inputs(&[required(&config.paths.rules, "rules")?, required(&config.paths.model, "model")?])?;
    let corpus = prepared_corpus(config)?;
    let model = load_model(config)?;
    let (rules, text) = load_rules(config)?;
    let num = |key: &str| header_value(&text, key).and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
    let qualt =
        header_value(&text, "qualt").and_then(|v| parse_decimal(&v).ok()).unwrap_or_else(|| Ratio::from_integer(0));
    let best = Best { variant: rules.variant(), pos: num("pos"), neg: num("neg"), qualt, f1: None, rules };
    let exp = Experiment::new(&corpus, &model, config.budget.clone(), config.cost.clone(), config.seed.unwrap_or(0));
    let report = exp.run_test(std::slice::from_ref(&best));
    print!("{}", report.summary());
    write_reports(config, &[("test.tsv", report.to_tsv()), ("test.json", report.to_json())])?;
    Ok(Outcome::Complete)
}

pub fn sweep(config: &Config) -> Result<Outcome, CliError> {
    let seed = config.seed()?;
    let reports = required(&config.paths.reports, "reports")?.to_path_buf();
    let grid = config.grid.to_sweep_grid()?;
    let corpus = prepared_corpus(config)?;
    if corpus.in_split(Split::Validation).next().is_none() {
        return Err(CliError::Data("the sweep needs states in the validation split".into()));
    }
    let model = fit_model(config, &corpus)?;
    let exp = Experiment::new(&corpus, &model, config.budget.clone(), config.cost.clone(), seed);
    log::info!("sweeping {} cells", grid.cells());
    let report = exp.run_sweep(&grid);
    let mut files = vec![
        ("sweep.tsv".to_string(), report.to_tsv()),
        ("sweep.json".to_string(), report.to_json()),
        ("timing.tsv".to_string(), report.timing_tsv()),
    ];
    for b in &report.best {
        log::info!(
            "{}: best pos {} neg {} qualt {} with validation f1 {}",
            b.variant,
            b.pos,
            b.neg,
            format_ratio(Some(b.qualt)),
            format_ratio(b.f1)
        );
        let header = rule_header(b.pos, b.neg, &format_ratio(Some(b.qualt)));
        files.push((format!("best_{}.pl", b.variant), header + &b.rules.to_rule_file()));
        files.push((format!("best_{}.stats.csv", b.variant), b.rules.stats_table()));
    }
    for f in &report.failures {
        log::error!("{f}");
    }
    let named: Vec<(&str, String)> = files.iter().map(|(n, t)| (n.as_str(), t.clone())).collect();
    let mut config = config.clone();
    config.paths.reports = Some(reports);
    write_reports(&config, &named)?;
    let timeouts = report.timing.iter().any(|t| t.timed_out > 0);
    Ok(if report.failures.is_empty() && !timeouts { Outcome::Complete } else { Outcome::Partial })
}

pub fn gen_synthetic(config: &Config) -> Result<Outcome, CliError> {
    let out = required(&config.paths.out, "out")?.to_path_buf();
    config.seed()?;
    let s = generate(&config.synthetic);
    write(&out.join("corpus.jsonl"), &corpus_to_string(&s.corpus))?;
    write(&out.join("split.toml"), &split_to_toml(&s.corpus.split))?;
    write(&out.join("oracle.txt"), &s.oracle.to_text())?;
    let mut planted = String::from("id\tpattern\ttactic\n");
    for (id, p) in &s.planted {
        let _ = writeln!(planted, "{id}\t{p:?}\t{}", p.tactic());
    }
    write(&out.join("planted.tsv"), &planted)?;
    log::info!("wrote {} states to {}", s.corpus.states.len(), out.display());
    Ok(Outcome::Complete)
}
