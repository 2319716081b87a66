use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use synpg::parsekit::{extract_template, parse_ptb_line};

const TINY: &str = "seed = 5
[model]
d_model = 8
n_heads = 2
n_layers_enc_sem = 1
n_layers_enc_syn = 1
n_layers_dec = 1
d_ffn = 16
[train]
epochs = 1
";

fn synpg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synpg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = synpg(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        fs::write(root.join("tiny.toml"), TINY).unwrap();
        Self { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn corpus(&self, n: usize, pairs: usize) -> (PathBuf, PathBuf) {
        let (c, pr) = (self.path("corpus.txt"), self.path("pairs.tsv"));
        ok(&[
            "gen-corpus", "--n", &n.to_string(), "--out", p(&c), "--pairs", &pairs.to_string(),
            "--pairs-out", p(&pr), "--config", p(&self.path("tiny.toml")),
        ]);
        (c, pr)
    }

    fn train(&self, kind: &str, corpus: &Path) -> PathBuf {
        let out = self.path(&format!("{kind}.ckpt"));
        ok(&[
            "train", "--kind", kind, "--corpus", p(corpus), "--out", p(&out),
            "--config", p(&self.path("tiny.toml")),
        ]);
        out
    }
}

#[test]
fn gen_corpus_is_deterministic_and_reparses() {
    let f = Fixture::new();
    let (c, pairs) = f.corpus(30, 5);
    let first = fs::read_to_string(&c).unwrap();
    let first_pairs = fs::read_to_string(&pairs).unwrap();
    f.corpus(30, 5);
    assert_eq!(fs::read_to_string(&c).unwrap(), first);
    assert_eq!(fs::read_to_string(&pairs).unwrap(), first_pairs);
    assert_eq!(first.lines().count(), 30);
    for line in first.lines() {
        assert_eq!(parse_ptb_line(line).unwrap().to_string(), line);
    }
    for line in first_pairs.lines() {
        let (a, b) = line.split_once('\t').unwrap();
        let (a, b) = (parse_ptb_line(a).unwrap(), parse_ptb_line(b).unwrap());
        assert_ne!(extract_template(&a), extract_template(&b));
    }
}

#[test]
fn gen_corpus_zero_sentences_gives_empty_file() {
    let f = Fixture::new();
    let out = f.path("empty.txt");
    ok(&["gen-corpus", "--n", "0", "--out", p(&out)]);
    assert_eq!(fs::read_to_string(out).unwrap(), "");
}

#[test]
fn bad_inputs_exit_two() {
    let f = Fixture::new();
    let missing = synpg(&["train", "--kind", "synpg", "--corpus", "/nonexistent/c.txt", "--out", p(&f.path("m"))]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));

    let bad_cfg = f.path("bad.toml");
    fs::write(&bad_cfg, "[train]\nlearning_rat = 0.1\n").unwrap();
    let out = synpg(&["gen-corpus", "--n", "1", "--out", p(&f.path("c")), "--config", p(&bad_cfg)]);
    assert_eq!(out.status.code(), Some(2));

    let empty = f.path("empty.tsv");
    fs::write(&empty, "").unwrap();
    let out = synpg(&["eval", "--pairs", p(&empty), "--mode", "copy-input", "--out-dir", p(&f.path("ev"))]);
    assert_eq!(out.status.code(), Some(2));

    let bad_tree = f.path("bad.txt");
    fs::write(&bad_tree, "(S (NP a)\n").unwrap();
    let out = synpg(&["train", "--kind", "synpg", "--corpus", p(&bad_tree), "--out", p(&f.path("m"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!f.path("m").exists());
}

#[test]
fn train_is_deterministic_and_writes_loss_csv() {
    let f = Fixture::new();
    let (c, _) = f.corpus(12, 0);
    let ckpt = f.train("synpg", &c);
    let csv = fs::read_to_string(ckpt.with_extension("ckpt.loss.csv")).unwrap();
    let bytes = fs::read(&ckpt).unwrap();
    f.train("synpg", &c);
    assert_eq!(fs::read_to_string(ckpt.with_extension("ckpt.loss.csv")).unwrap(), csv);
    assert_eq!(fs::read(&ckpt).unwrap(), bytes);
    let mut rows = csv.lines();
    assert!(rows.next().unwrap().contains("loss"));
    assert_eq!(rows.count(), 12);
}

#[test]
fn eval_copy_input_scores_zero_template_match() {
    let f = Fixture::new();
    let (_, pairs) = f.corpus(5, 20);
    let dir = f.path("eval");
    ok(&["eval", "--pairs", p(&pairs), "--mode", "copy-input", "--out-dir", p(&dir)]);
    let report = fs::read_to_string(dir.join("report.json")).unwrap();
    assert!(report.contains("\"mode\": \"copy-input\""), "{report}");
    assert!(report.contains("\"tma\": 0.0"), "{report}");
    let tsv = fs::read_to_string(dir.join("pairs.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 21);
}

#[test]
fn generate_and_augment_with_tiny_models() {
    let f = Fixture::new();
    let (c, _) = f.corpus(20, 0);
    let sp = f.train("synpg", &c);
    let pg = f.train("parsegen", &c);
    let corpus = fs::read_to_string(&c).unwrap();
    let first = parse_ptb_line(corpus.lines().next().unwrap()).unwrap();
    let out = ok(&[
        "generate", "--synpg", p(&sp), "--sentence", &first.words().join(" "),
        "--target-parse", &first.to_string(),
    ]);
    assert!(out.lines().any(|l| !l.starts_with('#')));

    let dataset: String = corpus
        .lines()
        .take(6)
        .enumerate()
        .map(|(i, l)| {
            let t = parse_ptb_line(l).unwrap();
            format!("{}\t{}\t{l}\n", i % 2, t.words().join(" "))
        })
        .collect();
    let data = f.path("data.tsv");
    fs::write(&data, &dataset).unwrap();
    let run = |k: &str, out: &Path| {
        ok(&[
            "augment", "--synpg", p(&sp), "--parsegen", p(&pg), "--dataset", p(&data), "--out", p(out),
            "--k", k, "--corpus", p(&c), "--min-ngram-overlap", "0", "--min-similarity", "-1",
            "--config", p(&f.path("tiny.toml")),
        ])
    };
    let zero = f.path("aug0.tsv");
    run("0", &zero);
    assert_eq!(fs::read_to_string(&zero).unwrap(), dataset);

    let two = f.path("aug2.tsv");
    let report = run("2", &two);
    assert!(report.contains("total\t12\t"), "{report}");
    let augmented = fs::read_to_string(&two).unwrap();
    assert!(augmented.ends_with(&dataset));
    let extra = &augmented[..augmented.len() - dataset.len()];
    for line in extra.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 3);
        assert!(fields[0] == "0" || fields[0] == "1");
        let t = parse_ptb_line(fields[2]).unwrap();
        assert_eq!(t.words().join(" "), fields[1]);
    }
    run("2", &zero);
    assert_eq!(fs::read_to_string(&zero).unwrap(), augmented);
}

#[test]
fn parse_tools_roundtrip() {
    let f = Fixture::new();
    let input = f.path("in.txt");
    fs::write(&input, "(S (NP (PRP he)) (VP (VBD ate)) (. .))\n").unwrap();
    let lin = ok(&["parse-tools", "linearize", "--input", p(&input)]);
    assert_eq!(lin.trim(), "(S(NP(PRP))(VP(VBD))(.))");
    let tpl = ok(&["parse-tools", "template", "--input", p(&input)]);
    assert_eq!(tpl.trim(), "(S(NP)(VP)(.))");
    let tags = ok(&["parse-tools", "tags", "--input", p(&input)]);
    assert_eq!(tags.trim(), "PRP VBD .");
    let grammar = ok(&["parse-tools", "grammar"]);
    assert!(grammar.contains("->"));
}
