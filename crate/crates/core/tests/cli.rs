mod common;

use std::path::Path;
use std::process::{Command, Output};

use arbor::graph::Framework;
use arbor::io::{read_arbor_records, write_canonical, CanonicalGraphRecord};
use arbor::synthetic::synthetic_corpus;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

const VINKEN: &str = "(e / express-01 :ARG0 (p / person) :ARG1 (c / concern :poss p))";

fn arbor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arbor")).args(args).output().expect("binary runs")
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn write_corpus(dir: &TempDir, name: &str, framework: Framework, n: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let records: Vec<CanonicalGraphRecord> = synthetic_corpus(&mut rng, 3 * n)
        .into_iter()
        .filter(|r| r.framework == framework)
        .collect();
    let p = path(dir, name);
    std::fs::write(&p, write_canonical(&records).unwrap()).unwrap();
    p
}

fn train_tiny(dir: &TempDir, corpus: &str, tag: &str, extra: &[&str]) -> (Output, String, String) {
    let ckpt = path(dir, &format!("{tag}.ckpt"));
    let metrics = path(dir, &format!("{tag}.jsonl"));
    let mut args = vec![
        "train", "--train", corpus, "--dev", corpus, "--preset", "tiny", "--epochs", "2", "--batch-size", "4",
        "--seed", "3", "--checkpoint", &ckpt, "--metrics", &metrics,
    ];
    args.extend_from_slice(extra);
    (arbor(&args), ckpt, metrics)
}

fn without_seconds(log: &str) -> Vec<serde_json::Value> {
    log.lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("seconds");
            v
        })
        .collect()
}

#[test]
fn vinken_converts_with_a_shared_person_index() {
    let dir = TempDir::new().unwrap();
    let input = path(&dir, "vinken.amr");
    std::fs::write(&input, VINKEN).unwrap();
    let out = arbor(&["convert", "--framework", "amr", "--direction", "to-arbor", "--format", "penman", "--input", &input]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = read_arbor_records(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let mut persons = Vec::new();
    records[0].root.walk(&mut |_, n| {
        if n.label == "person" {
            persons.push(n.index);
        }
    });
    assert_eq!(persons, vec![2, 2]);

    let arbors = path(&dir, "vinken.jsonl");
    let out = arbor(&["convert", "--direction", "to-arbor", "--format", "penman", "--input", &input, "--output", &arbors]);
    assert!(out.status.success());
    let out = arbor(&["linearize", "--input", &arbors]);
    let tsv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(tsv.lines().count(), 4);
    assert!(tsv.lines().any(|l| l.split('\t').collect::<Vec<_>>() == ["concern", "3", "poss", "person", "2"]));
    let back = arbor(&["convert", "--direction", "from-arbor", "--format", "penman", "--input", &arbors]);
    assert!(back.status.success());
    let text = String::from_utf8(back.stdout).unwrap();
    let g = arbor::io::read_penman_corpus(&text).unwrap();
    let orig = arbor::io::read_penman(VINKEN).unwrap();
    assert!(arbor::graph::graph_isomorphic(&g[0], &orig).unwrap());
}

#[test]
fn exit_codes_separate_bad_input_from_io_failures() {
    let dir = TempDir::new().unwrap();
    let missing = path(&dir, "missing.jsonl");
    let out = arbor(&["linearize", "--input", &missing]);
    assert_eq!(out.status.code(), Some(2));
    let bad = path(&dir, "bad.amr");
    std::fs::write(&bad, "(a / b :ARG0").unwrap();
    let out = arbor(&["convert", "--direction", "to-arbor", "--format", "penman", "--input", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    assert_eq!(arbor(&["convert", "--direction", "sideways"]).status.code(), Some(1));
    assert_eq!(arbor(&["--help"]).status.code(), Some(0));
}

#[test]
fn training_is_reproducible_under_a_seed() {
    let dir = TempDir::new().unwrap();
    let corpus = write_corpus(&dir, "amr.jsonl", Framework::Amr, 6);
    let (a, _, ma) = train_tiny(&dir, &corpus, "a", &[]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let (b, _, mb) = train_tiny(&dir, &corpus, "b", &["--jobs", "2"]);
    assert!(b.status.success());
    let la = std::fs::read_to_string(ma).unwrap();
    assert_eq!(la.lines().count(), 2);
    assert_eq!(without_seconds(&la), without_seconds(&std::fs::read_to_string(mb).unwrap()));
}

#[test]
fn flags_override_the_config_file() {
    let dir = TempDir::new().unwrap();
    let corpus = write_corpus(&dir, "dm.jsonl", Framework::Dm, 4);
    let config = path(&dir, "cfg.toml");
    std::fs::write(&config, "[train]\nepochs = 3\npatience = 10\n[model]\nword_dim = 4\n").unwrap();
    let (out, ckpt, metrics) = train_tiny(&dir, &corpus, "c", &["--config", &config]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(metrics).unwrap().lines().count(), 2);
    let model = arbor::model::Model::load(Path::new(&ckpt)).unwrap();
    assert_eq!(model.config.word_dim, 4);
    assert_eq!(model.config.framework, Framework::Dm);

    std::fs::write(&config, "[train]\nepoch = 3\n").unwrap();
    let (out, _, _) = train_tiny(&dir, &corpus, "d", &["--config", &config]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn full_config_file_is_accepted() {
    let dir = TempDir::new().unwrap();
    let corpus = write_corpus(&dir, "amr.jsonl", Framework::Amr, 3);
    let config = path(&dir, "full.toml");
    let text = "[model]\nencoder_hidden = 16\ndecoder_hidden = 32\nattention_dim = 8\nfeatures = [\"lemma\"]\n\n\
                [train]\nepochs = 1\nbatch_size = 2\nlearning_rate = 0.001\nlabel_smoothing = 0.1\n\
                coverage_weight = 1.0\npatience = 10\n";
    std::fs::write(&config, text).unwrap();
    let (out, ckpt, _) = train_tiny(&dir, &corpus, "f", &["--config", &config]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model = arbor::model::Model::load(Path::new(&ckpt)).unwrap();
    assert_eq!((model.config.decoder_hidden, model.config.features.clone()), (32, vec!["lemma".to_string()]));
}

#[test]
fn mixed_corpora_need_a_framework() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = path(&dir, "mixed.jsonl");
    std::fs::write(&p, write_canonical(&synthetic_corpus(&mut rng, 6)).unwrap()).unwrap();
    let (out, _, _) = train_tiny(&dir, &p, "m", &[]);
    assert_eq!(out.status.code(), Some(1));
    let (out, _, _) = train_tiny(&dir, &p, "u", &["--framework", "ucca"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn parse_eval_and_bench_run_end_to_end() {
    let dir = TempDir::new().unwrap();
    let corpus = write_corpus(&dir, "amr.jsonl", Framework::Amr, 4);
    let (out, ckpt, _) = train_tiny(&dir, &corpus, "p", &[]);
    assert!(out.status.success());
    let sentences = path(&dir, "sents.txt");
    std::fs::write(&sentences, "the boy sees the girl\nthe dog runs\n").unwrap();
    let greedy = path(&dir, "greedy.amr");
    let beam1 = path(&dir, "beam1.amr");
    for (flags, out_path) in [(vec!["--greedy"], &greedy), (vec!["--beam-size", "1"], &beam1)] {
        let mut args = vec!["parse", "--checkpoint", &ckpt, "--input", &sentences, "--format", "penman", "--max-len", "6", "--output", out_path];
        args.extend(flags);
        let out = arbor(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&greedy).unwrap(), std::fs::read(&beam1).unwrap());

    let parsed = path(&dir, "parsed.jsonl");
    let out = arbor(&["parse", "--checkpoint", &ckpt, "--input", &corpus, "--input-format", "canonical", "--max-len", "8", "--output", &parsed]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = arbor(&["eval", "--gold", &corpus, "--pred", &corpus]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["metric"], "smatch");
    assert_eq!(report["score"]["f1"], 1.0);
    let out = arbor(&["eval", "--gold", &corpus, "--pred", &parsed, "--exact"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["score"]["f1"].as_f64().unwrap() <= 1.0);
    assert_eq!(report["audit"]["graphs"], 4);

    let out = arbor(&["bench", "--checkpoint", &ckpt, "--input", &sentences, "--lengths", "5,10,20", "--repeats", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["length_points"].as_array().unwrap().len(), 3);
}

#[test]
fn sdp_output_round_trips_for_dm() {
    let dir = TempDir::new().unwrap();
    let corpus = write_corpus(&dir, "dm.jsonl", Framework::Dm, 3);
    let arbors = path(&dir, "dm.arbor");
    assert!(arbor(&["convert", "--direction", "to-arbor", "--input", &corpus, "--output", &arbors]).status.success());
    let sdp = path(&dir, "dm.sdp");
    let out = arbor(&["convert", "--direction", "from-arbor", "--format", "sdp", "--input", &arbors, "--output", &sdp]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = arbor(&["eval", "--gold", &corpus, "--pred", &sdp, "--format", "canonical"]);
    assert_eq!(out.status.code(), Some(1), "sdp is not canonical");
    let back = path(&dir, "back.jsonl");
    let out = arbor(&["convert", "--direction", "to-arbor", "--format", "sdp", "--input", &sdp, "--output", &back]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = std::fs::read_to_string(&arbors).unwrap();
    let b = std::fs::read_to_string(&back).unwrap();
    let roots = |t: &str| read_arbor_records(t).unwrap().into_iter().map(|r| r.root).collect::<Vec<_>>();
    assert_eq!(roots(&a), roots(&b));
}
