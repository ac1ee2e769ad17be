use std::fs;
use std::path::{Path, PathBuf};

use coast::coast::{CoastTree, Crd};
use coast::io::{file_digest, load_rankings, read_csv_column, RankingFile, RankingFormat};
use coast::perm::enumerate_permutations;
use coast_cli::dispatch;
use tempfile::TempDir;

fn run(args: &[&str]) -> i32 {
    dispatch(std::iter::once("coast").chain(args.iter().copied()))
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SPEC: &str = r#"{
  "n": 5,
  "seed": 11,
  "components": [
    {"type": "mallows", "center": [1, 2, 3, 4, 5], "phi": 1.5, "mix": 0.5},
    {"type": "mallows", "center": [5, 4, 3, 2, 1], "phi": 1.5, "mix": 0.5}
  ]
}"#;

fn sampled(dir: &TempDir, count: usize) -> PathBuf {
    let spec = p(dir, "spec.json");
    fs::write(&spec, SPEC).unwrap();
    let out = p(dir, "sample.csv");
    let count = count.to_string();
    assert_eq!(run(&["sample", "--spec", s(&spec), "--count", &count, "--out", s(&out)]), 0);
    out
}

fn fitted(dir: &TempDir, input: &Path, extra: &[&str]) -> PathBuf {
    let tree = p(dir, "tree.json");
    let mut args = vec!["fit", "--input", s(input), "--out", s(&tree)];
    args.extend_from_slice(extra);
    assert_eq!(run(&args), 0);
    tree
}

fn load_tree(path: &Path) -> CoastTree {
    CoastTree::from_json(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn sample_writes_labeled_rankings() {
    let dir = TempDir::new().unwrap();
    let out = sampled(&dir, 40);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("pos1,pos2,pos3,pos4,pos5,label\n"));
    let sample = load_rankings(&RankingFile::new(&out, RankingFormat::Ordering)).unwrap();
    assert_eq!(sample.len(), 40);
    assert!(sample.labels().unwrap().iter().all(|&l| l < 2));
}

#[test]
fn preset_sampling_and_ranks_round_trip() {
    let dir = TempDir::new().unwrap();
    let ord = p(&dir, "ord.csv");
    let ranks = p(&dir, "ranks.txt");
    let common =
        ["--preset", "mallows", "--items", "6", "--components", "3", "--phi", "1", "--seed", "5", "--count", "30"];
    let mut a = vec!["sample"];
    a.extend_from_slice(&common);
    a.extend_from_slice(&["--out", s(&ord)]);
    assert_eq!(run(&a), 0);
    let mut b = vec!["sample"];
    b.extend_from_slice(&common);
    b.extend_from_slice(&["--format", "ranks", "--delimiter", "whitespace", "--out", s(&ranks)]);
    assert_eq!(run(&b), 0);
    let x = load_rankings(&RankingFile::new(&ord, RankingFormat::Ordering)).unwrap();
    let y = load_rankings(&RankingFile::new(&ranks, RankingFormat::Ranks)).unwrap();
    assert_eq!(x, y);
}

#[test]
fn huge_epsilon_gives_a_single_node() {
    let dir = TempDir::new().unwrap();
    let input = sampled(&dir, 60);
    let tree = load_tree(&fitted(&dir, &input, &["--epsilon", "1e9"]));
    assert_eq!(tree.nodes().len(), 1);
    assert!(tree.root().median.is_some());
}

#[test]
fn finest_tree_on_distinct_rankings() {
    let dir = TempDir::new().unwrap();
    let perms = enumerate_permutations(5).unwrap();
    let mut text = String::new();
    for k in 0..50 {
        let r = &perms[(k * 37) % perms.len()];
        let row: Vec<String> = r.ordering().iter().map(|i| (i + 1).to_string()).collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    let input = p(&dir, "distinct.txt");
    fs::write(&input, text).unwrap();
    let crd_path = p(&dir, "crd.json");
    fitted(&dir, &input, &["--epsilon", "0", "--max-leaves", "100000", "--crd", s(&crd_path)]);
    let crd: Crd = serde_json::from_str(&fs::read_to_string(&crd_path).unwrap()).unwrap();
    assert!(crd.atoms.len() <= 50);
    let total: f64 = crd.atoms.iter().map(|a| a.weight).sum();
    assert!((total - 1.0).abs() < 1e-12);
    // every ranking ends alone in its leaf and is its own median
    let dist = crd.to_distribution().unwrap();
    assert_eq!(dist.support().len(), 50);
}

#[test]
fn eval_on_trivial_tree_has_w_equal_e() {
    let dir = TempDir::new().unwrap();
    let input = sampled(&dir, 50);
    let tree = fitted(&dir, &input, &["--epsilon", "1e9"]);
    let out = p(&dir, "eval.csv");
    assert_eq!(run(&["eval", "--tree", s(&tree), "--input", s(&input), "--out", s(&out)]), 0);
    let text = fs::read_to_string(&out).unwrap();
    let w = read_csv_column(&text, "w").unwrap();
    let e = read_csv_column(&text, "e").unwrap();
    assert_eq!(w.len(), 1);
    assert!((w[0] - e[0]).abs() < 1e-9, "W {} vs E {}", w[0], e[0]);
}

#[test]
fn eval_reports_every_pruning_step() {
    let dir = TempDir::new().unwrap();
    let input = sampled(&dir, 80);
    let tree_path = fitted(&dir, &input, &["--max-leaves", "6", "--one-split-per-iter"]);
    let leaves = load_tree(&tree_path).leaf_count();
    let out = p(&dir, "eval.csv");
    assert_eq!(run(&["eval", "--tree", s(&tree_path), "--input", s(&input), "--out", s(&out)]), 0);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("leaves,w,e,e_prime,e_dprime,coupling_cost\n"));
    let ks = read_csv_column(&text, "leaves").unwrap();
    let expected: Vec<f64> = (1..=leaves).rev().map(|k| k as f64).collect();
    assert_eq!(ks, expected);
    let w = read_csv_column(&text, "w").unwrap();
    let e = read_csv_column(&text, "e").unwrap();
    for (w, e) in w.iter().zip(&e) {
        assert!(w <= &(e + 1e-9));
    }
}

#[test]
fn prune_selects_by_lambda() {
    let dir = TempDir::new().unwrap();
    let input = sampled(&dir, 80);
    let tree = fitted(&dir, &input, &["--max-leaves", "8"]);
    let root = p(&dir, "root.json");
    let path = p(&dir, "path.csv");
    let args =
        ["prune", "--tree", s(&tree), "--input", s(&input), "--lambda", "1e9", "--out", s(&root), "--path", s(&path)];
    assert_eq!(run(&args), 0);
    assert_eq!(load_tree(&root).leaf_count(), 1);
    let full = p(&dir, "full.json");
    assert_eq!(run(&["prune", "--tree", s(&tree), "--lambda", "0", "--out", s(&full)]), 0);
    let grown = load_tree(&tree);
    assert!(load_tree(&full).criterion() <= grown.criterion() + 1e-12);
    let crit = read_csv_column(&fs::read_to_string(&path).unwrap(), "criterion").unwrap();
    assert_eq!(crit.len(), grown.leaf_count());
    assert!(crit.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn prune_rejects_a_foreign_sample() {
    let dir = TempDir::new().unwrap();
    let input = sampled(&dir, 30);
    let tree = fitted(&dir, &input, &[]);
    let other = p(&dir, "other.txt");
    fs::write(&other, "1 2 3 4 5\n").unwrap();
    let out = p(&dir, "x.json");
    assert_eq!(run(&["prune", "--tree", s(&tree), "--input", s(&other), "--lambda", "0", "--out", s(&out)]), 1);
}

#[test]
fn depth_anomaly_ddplot_and_hom_test() {
    let dir = TempDir::new().unwrap();
    let input = sampled(&dir, 60);
    let tree = fitted(&dir, &input, &["--max-leaves", "2", "--one-split-per-iter"]);
    let depth = p(&dir, "depth.csv");
    let anomaly = p(&dir, "anomaly.csv");
    let dd = p(&dir, "dd.csv");
    let base = ["--tree", s(&tree), "--fit", s(&input), "--query", s(&input)];
    let with = |cmd: &'static str, out: &Path, extra: &[&str]| {
        let mut a = vec![cmd];
        a.extend_from_slice(&base);
        a.extend_from_slice(&["--out", s(out)]);
        a.extend_from_slice(extra);
        run(&a)
    };
    assert_eq!(with("depth", &depth, &[]), 0);
    assert_eq!(with("anomaly", &anomaly, &[]), 0);
    let leaf = load_tree(&tree).leaves()[0].to_string();
    assert_eq!(with("ddplot", &dd, &["--reference-cell", &leaf]), 0);
    assert_eq!(with("ddplot", &dd, &["--reference-cell", "0"]), 1);

    let dtext = fs::read_to_string(&depth).unwrap();
    assert!(dtext.starts_with("index,local_depth,global_depth,cell,label\n"));
    let local = read_csv_column(&dtext, "local_depth").unwrap();
    let scores = read_csv_column(&fs::read_to_string(&anomaly).unwrap(), "score").unwrap();
    assert_eq!(local.len(), 60);
    for (d, a) in local.iter().zip(&scores) {
        assert_eq!(*a, -d);
    }

    let hom = p(&dir, "hom.csv");
    assert_eq!(run(&["hom-test", "--a", s(&depth), "--b", s(&depth), "--out", s(&hom)]), 0);
    let pv = read_csv_column(&fs::read_to_string(&hom).unwrap(), "p_value").unwrap();
    assert!(pv[0] > 0.9);
}

#[test]
fn smooth_and_comembership() {
    let dir = TempDir::new().unwrap();
    let input = sampled(&dir, 60);
    let tree_path = fitted(&dir, &input, &["--max-leaves", "2", "--one-split-per-iter"]);
    let tree = load_tree(&tree_path);
    let leaf = tree.leaves()[0];
    let out = p(&dir, "smooth.json");
    let disc = p(&dir, "disc.csv");
    let args = [
        "smooth",
        "--tree",
        s(&tree_path),
        "--input",
        s(&input),
        "--cell",
        &leaf.to_string(),
        "--method",
        "factorized",
        "--out",
        s(&out),
        "--discrepancies",
        s(&disc),
    ];
    assert_eq!(run(&args), 0);
    let probs: std::collections::BTreeMap<String, f64> =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(probs.len(), 60);
    let total: f64 = probs.values().sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(fs::read_to_string(&disc).unwrap().starts_with("a,b,enumeration,derived,appendix\n"));

    let cm = p(&dir, "cm.csv");
    assert_eq!(run(&["comembership", "--tree", s(&tree_path), "--input", s(&input), "--out", s(&cm)]), 0);
    let text = fs::read_to_string(&cm).unwrap();
    assert_eq!(text.lines().count(), 61);
    let diag = read_csv_column(&text, "1").unwrap();
    assert_eq!(diag[0], 1.0);
}

#[test]
fn identical_runs_hash_identically() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let digests = |dir: &TempDir| {
        let input = sampled(dir, 70);
        let tree = p(dir, "tree.json");
        let trace = p(dir, "trace.csv");
        let crd = p(dir, "crd.json");
        let args =
            ["fit", "--input", s(&input), "--out", s(&tree), "--trace", s(&trace), "--crd", s(&crd), "--seed", "3"];
        assert_eq!(run(&args), 0);
        [input, tree, trace, crd].map(|f| file_digest(&f).unwrap())
    };
    assert_eq!(digests(&a), digests(&b));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = TempDir::new().unwrap();
    let input = sampled(&dir, 70);
    let one = p(&dir, "one.json");
    let many = p(&dir, "many.json");
    assert_eq!(run(&["--threads", "1", "fit", "--input", s(&input), "--out", s(&one)]), 0);
    assert_eq!(run(&["fit", "--threads", "4", "--input", s(&input), "--out", s(&many)]), 0);
    assert_eq!(fs::read(&one).unwrap(), fs::read(&many).unwrap());
}

#[test]
fn manifest_replays_byte_identically() {
    let dir = TempDir::new().unwrap();
    let input = sampled(&dir, 50);
    let tree = p(&dir, "tree.json");
    let manifest = p(&dir, "run.json");
    let args = ["fit", "--input", s(&input), "--out", s(&tree), "--manifest", s(&manifest), "--seed", "9"];
    assert_eq!(run(&args), 0);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["command"], "fit");
    assert_eq!(m["seed"], 9);
    assert_eq!(m["outputs"][s(&tree)], file_digest(&tree).unwrap());
    assert_eq!(m["inputs"][s(&input)], file_digest(&input).unwrap());
    let first = fs::read(&tree).unwrap();
    fs::remove_file(&tree).unwrap();
    assert_eq!(run(&["replay", s(&manifest)]), 0);
    assert_eq!(fs::read(&tree).unwrap(), first);
    // a tampered output digest is reported as a mismatch
    let tampered = fs::read_to_string(&manifest).unwrap().replace(&file_digest(&tree).unwrap(), &"0".repeat(64));
    fs::write(&manifest, tampered).unwrap();
    assert_eq!(run(&["replay", s(&manifest)]), 1);
}

#[test]
fn usage_errors_exit_nonzero() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "t.json");
    assert_eq!(run(&["fit", "--bogus"]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&["fit", "--input", "/nonexistent/rankings.csv", "--out", s(&out)]), 2);
    assert_eq!(run(&["fit", "--input", "x.csv", "--out", s(&out), "--rule", "sideways"]), 2);
    let bad = p(&dir, "bad.txt");
    fs::write(&bad, "1 2 3\n1 1 3\n").unwrap();
    assert_eq!(run(&["fit", "--input", s(&bad), "--out", s(&out)]), 1);
    assert!(!out.exists());
}
