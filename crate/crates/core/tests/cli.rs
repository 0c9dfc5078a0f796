use std::path::{Path, PathBuf};
use std::process::Command;

use policy_tree::cli::Table;
use policy_tree::model::{document, Node, RewardMatrix};

const FEATURES: &str = "x1,x2,x3,x4,x5,x6,x7,x8,x9,x10";

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_policy-tree")).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn ok(args: &[&str]) -> Run {
    let r = run(args);
    assert_eq!(r.code, 0, "{args:?} failed: {}", r.stderr);
    r
}

fn bundled(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name).to_string_lossy().into_owned()
}

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> String {
        self.0.path().join(name).to_string_lossy().into_owned()
    }

    fn write(&self, name: &str, text: &str) -> String {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }
}

fn read_rewards(path: &str) -> RewardMatrix {
    RewardMatrix::read_table(std::fs::File::open(path).unwrap()).unwrap()
}

fn toy_discrete(dir: &Dir) -> String {
    let mut text = String::from("a,b,arm,y\n");
    for i in 0..20 {
        let arm = if i % 2 == 0 { "ctl" } else { "trt" };
        text += &format!("{},{},{arm},{}\n", i as f64 / 10.0, i % 3, (i * 7 % 5) as f64);
    }
    dir.write("toy.csv", &text)
}

#[test]
fn discrete_toy_reward_shape() {
    let dir = Dir::new();
    let data = toy_discrete(&dir);
    let out = dir.path("r.csv");
    let r = ok(&["estimate-rewards", "--data", &data, "--features", "a,b", "--treatment", "arm", "--outcome", "y", "--out", &out]);
    let g = read_rewards(&out);
    assert_eq!((g.n_rows(), g.n_candidates()), (20, 2));
    assert!(g.values().all_finite());
    assert_eq!(g.labels(), ["ctl", "trt"]);
    // no --seed: the generated seed is reported
    let report: serde_json::Value = serde_json::from_str(r.stdout.lines().next().unwrap()).unwrap();
    assert!(report["seed"].is_u64());
    assert_eq!(report["arm_sizes"], serde_json::json!([10, 10]));
    assert_eq!(report["k_folds"], 5);
}

#[test]
fn maximize_negates_rewards() {
    let dir = Dir::new();
    let data = toy_discrete(&dir);
    let (a, b) = (dir.path("a.csv"), dir.path("b.csv"));
    let base = ["estimate-rewards", "--data", &data, "--features", "a,b", "--treatment", "arm", "--outcome", "y", "--seed", "4"];
    ok(&[&base[..], &["--out", &a]].concat());
    ok(&[&base[..], &["--out", &b, "--maximize"]].concat());
    let (ga, gb) = (read_rewards(&a), read_rewards(&b));
    for i in 0..20 {
        for t in 0..2 {
            assert_eq!(ga.get(i, t), -gb.get(i, t));
        }
    }
}

#[test]
fn weighted_loss_mode() {
    let dir = Dir::new();
    let mut text = String::from("u,v,class\n");
    for i in 0..30 {
        text += &format!("{},{},{}\n", i, 30 - i, ["red", "green", "blue"][i % 3]);
    }
    let data = dir.write("cls.csv", &text);
    let penalty = dir.write("pen.csv", "red,green,blue\n0,1,1\n1,0,1\n1,1,0\n");
    let out = dir.path("r.csv");
    ok(&["estimate-rewards", "--data", &data, "--features", "u,v", "--treatment", "class", "--penalty", &penalty, "--out", &out, "--report", &dir.path("rep.jsonl")]);
    let g = read_rewards(&out);
    assert_eq!(g.labels(), ["red", "green", "blue"]);
    for i in 0..30 {
        for t in 0..3 {
            assert_eq!(g.get(i, t), if t == i % 3 { 0.0 } else { 1.0 });
        }
    }
}

#[test]
fn two_dose_grids_give_36_columns() {
    let dir = Dir::new();
    let data = dir.path("mc.csv");
    ok(&["generate", "--design", "multicont-1", "--n", "150", "--seed", "2", "--out", &data]);
    let out = dir.path("r.csv");
    ok(&[
        "estimate-rewards", "--data", &data, "--features", FEATURES, "--doses", "t1:-4:4:6", "--doses", "t2:-4:4:6",
        "--outcome", "y", "--trees", "20", "--seed", "1", "--out", &out, "--report", &dir.path("rep.jsonl"),
    ]);
    let g = read_rewards(&out);
    assert_eq!((g.n_rows(), g.n_candidates()), (150, 36));
    assert_eq!(g.labels()[0], "t1=-4&t2=-4");
}

#[test]
fn schema_errors_carry_coordinates() {
    let dir = Dir::new();
    let data = dir.write("bad.csv", "a,arm,y\n1,ctl,0\n2,trt,zz\n");
    let r = run(&["estimate-rewards", "--data", &data, "--features", "a", "--treatment", "arm", "--outcome", "y", "--out", &dir.path("r.csv")]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line 3") && r.stderr.contains("'y'"), "{}", r.stderr);

    let r = run(&["estimate-rewards", "--data", &data, "--features", "a,q,w", "--treatment", "arm", "--outcome", "y", "--out", &dir.path("r.csv")]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("q, w"), "{}", r.stderr);

    let good = dir.write("good.csv", "a,arm,y\n1,ctl,0\n2,oops,1\n");
    let r = run(&["estimate-rewards", "--data", &good, "--features", "a", "--treatment", "arm", "--labels", "ctl,trt", "--outcome", "y", "--out", &dir.path("r.csv")]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line 3") && r.stderr.contains("oops"), "{}", r.stderr);

    let r = run(&["estimate-rewards", "--data", &good, "--features", "a", "--outcome", "y", "--out", &dir.path("r.csv")]);
    assert_eq!(r.code, 3, "neither treatment nor doses is a configuration error");
}

/// Checkerboard on two features: treatment 0 is right where exactly one
/// coordinate is below one half.
fn xor_files(dir: &Dir) -> (String, String) {
    let mut data = String::from("u,v\n");
    let mut rewards = String::from("left,right\n");
    for i in 0..20 {
        for j in 0..20 {
            let (u, v) = ((i as f64 + 0.5) / 20.0, (j as f64 + 0.5) / 20.0);
            data += &format!("{u},{v}\n");
            let cell = (u < 0.5) ^ (v < 0.5);
            rewards += if cell { "0,1\n" } else { "1,0\n" };
        }
    }
    (dir.write("xor.csv", &data), dir.write("xor_r.csv", &rewards))
}

fn train_summary(report: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(report).unwrap();
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

#[test]
fn train_methods_depth_zero_and_determinism() {
    let dir = Dir::new();
    let (data, rewards) = xor_files(&dir);
    let common = ["train", "--data", &data, "--features", "u,v", "--rewards", &rewards, "--depth", "2", "--seed", "5"];
    let (tg, rg, to, ro) = (dir.path("g.json"), dir.path("g.jsonl"), dir.path("o.json"), dir.path("o.jsonl"));
    ok(&[&common[..], &["--method", "greedy", "--out", &tg, "--report", &rg]].concat());
    ok(&[&common[..], &["--method", "optimal", "--out", &to, "--report", &ro]].concat());
    let (g, o) = (train_summary(&rg), train_summary(&ro));
    let (og, oo) = (g["penalized_objective"].as_f64().unwrap(), o["penalized_objective"].as_f64().unwrap());
    assert!(oo <= og + 1e-12, "optimal {oo} greedy {og}");
    assert_eq!(oo, 0.0);
    assert_eq!(o["seed"], 5);
    // restart trajectories precede the summary
    let restarts = std::fs::read_to_string(&ro).unwrap().lines().filter(|l| l.contains("\"restart\"")).count();
    assert_eq!(restarts, 100);

    let again = dir.path("o2.json");
    ok(&[&common[..], &["--method", "optimal", "--out", &again, "--report", &dir.path("o2.jsonl")]].concat());
    assert_eq!(std::fs::read(&to).unwrap(), std::fs::read(&again).unwrap());

    let leaf = dir.path("leaf.json");
    ok(&["train", "--data", &data, "--features", "u,v", "--rewards", &rewards, "--depth", "0", "--out", &leaf, "--report", &dir.path("l.jsonl")]);
    let tree = document::from_str(&std::fs::read_to_string(&leaf).unwrap()).unwrap();
    // 200 rows favour each treatment: the tie goes to the first
    assert_eq!(tree.nodes(), [Node::Leaf { treatment: 0, n_train: 400 }]);
    let shown = ok(&["show", "--tree", &leaf]).stdout;
    assert_eq!(shown, "prescribe left (n=400)\n");

    let presc = ok(&["prescribe", "--tree", &leaf, "--data", &data]).stdout;
    let lines: Vec<&str> = presc.lines().collect();
    assert_eq!(lines.len(), 401);
    assert!(lines[1..].iter().all(|l| *l == "left"));
}

#[test]
fn train_rejects_mismatched_rows_and_unknown_method() {
    let dir = Dir::new();
    let (data, _) = xor_files(&dir);
    let short = dir.write("short.csv", "left,right\n0,1\n1,0\n");
    let r = run(&["train", "--data", &data, "--features", "u,v", "--rewards", &short, "--out", &dir.path("t.json")]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("2 rows"), "{}", r.stderr);
    let r = run(&["train", "--data", &data, "--features", "u,v", "--rewards", &short, "--method", "magic", "--out", &dir.path("t.json")]);
    assert_eq!(r.code, 3);
}

#[test]
fn tuned_training_reports_cells() {
    let dir = Dir::new();
    let (data, rewards) = xor_files(&dir);
    let report = dir.path("t.jsonl");
    ok(&[
        "train", "--data", &data, "--features", "u,v", "--rewards", &rewards, "--tune", "--depths", "1,2", "--alphas", "0,0.01",
        "--restarts", "10", "--seed", "1", "--out", &dir.path("t.json"), "--report", &report,
    ]);
    let text = std::fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains("tune_cell")).count(), 4);
    let summary = train_summary(&report);
    assert_eq!(summary["hyperparams"]["max_depth"], 2);
    assert!(summary["validation_objective"].is_f64());
}

#[test]
fn prescribe_schema_explain_and_parity() {
    let dir = Dir::new();
    let data = bundled("discrete_200.csv");
    let rewards = dir.path("r.csv");
    let tree = dir.path("t.json");
    ok(&["estimate-rewards", "--data", &data, "--features", FEATURES, "--treatment", "z", "--outcome", "y", "--trees", "30", "--seed", "2", "--out", &rewards, "--report", &dir.path("e.jsonl")]);
    ok(&["train", "--data", &data, "--features", FEATURES, "--rewards", &rewards, "--depth", "2", "--restarts", "10", "--seed", "2", "--out", &tree, "--report", &dir.path("t.jsonl")]);

    let out = dir.path("p.csv");
    ok(&["prescribe", "--tree", &tree, "--data", &data, "--explain", "--out", &out]);
    let t = document::from_str(&std::fs::read_to_string(&tree).unwrap()).unwrap();
    let x = Table::read(Path::new(&data)).unwrap().numeric(t.feature_names()).unwrap();
    let got = Table::read(Path::new(&out)).unwrap();
    let labels = got.text_column("prescription").unwrap();
    let paths = got.text_column("path").unwrap();
    for (i, row) in x.iter_rows().enumerate() {
        assert_eq!(labels[i], t.treatment_labels()[t.prescribe(row).unwrap()]);
        let steps = t.path(row).unwrap();
        let parts: Vec<&str> = paths[i].split("; ").collect();
        assert_eq!(parts.len(), steps.len());
        for (part, s) in parts.iter().zip(&steps) {
            let want = format!(
                "{} < {} {}",
                t.feature_names()[s.feature],
                s.threshold,
                if s.went_left { "left" } else { "right" }
            );
            assert_eq!(*part, want);
        }
    }

    let missing = dir.write("m.csv", "x1,x2\n0,1\n");
    let r = run(&["prescribe", "--tree", &tree, "--data", &missing]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("x3") && r.stderr.contains("x10"), "{}", r.stderr);

    let shown = ok(&["show", "--tree", &tree]).stdout;
    assert_eq!(shown.lines().count(), t.nodes().len());
    assert_eq!(ok(&["show", "--tree", &tree]).stdout, shown);
}

#[test]
fn malformed_tree_document() {
    let dir = Dir::new();
    let bad = dir.write("bad.json", "{\"format_version\": 1, \"tree\": 3}");
    assert_eq!(run(&["show", "--tree", &bad]).code, 2);
    let junk = dir.write("junk.json", "not json");
    assert_eq!(run(&["show", "--tree", &junk]).code, 2);
}

#[test]
fn benchmark_tables() {
    let dir = Dir::new();
    let (detail, summary) = (dir.path("d.csv"), dir.path("s.csv"));
    let fast = ["--n-test", "2000", "--trees", "20", "--restarts", "3", "--depths", "1,2", "--alphas", "0,0.01", "--seed", "9"];
    ok(&[&["benchmark", "--design", "binary-1", "--n", "500", "--reps", "3", "--out", &detail, "--summary", &summary, "--report", &dir.path("b.jsonl")][..], &fast[..]].concat());
    let d = Table::read(Path::new(&detail)).unwrap();
    let methods = d.text_column("method").unwrap();
    for m in ["greedy-policy", "optimal-policy", "regress-compare"] {
        assert_eq!(methods.iter().filter(|v| *v == m).count(), 3);
    }
    let regrets = d.numeric_column("regret").unwrap();
    let s = Table::read(Path::new(&summary)).unwrap();
    let s_methods = s.text_column("method").unwrap();
    let s_means = s.numeric_column("mean_regret").unwrap();
    for (m, mean) in s_methods.iter().zip(&s_means) {
        let rows: Vec<f64> = methods.iter().zip(&regrets).filter(|(v, _)| *v == m).map(|(_, r)| *r).collect();
        assert!((mean - rows.iter().sum::<f64>() / rows.len() as f64).abs() < 1e-12);
    }

    let only = dir.path("o.csv");
    ok(&[&["benchmark", "--design", "binary-1", "--n", "300", "--reps", "2", "--methods", "optimal-policy", "--out", &only, "--report", &dir.path("o.jsonl")][..], &fast[..]].concat());
    let o = Table::read(Path::new(&only)).unwrap();
    assert!(o.text_column("method").unwrap().iter().all(|m| m == "optimal-policy"));
    assert_eq!(o.n_rows(), 2);

    let r = run(&["benchmark", "--design", "binary-99", "--out", &dir.path("x.csv")]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("multicont-2"), "{}", r.stderr);
}

#[test]
fn config_document_supplies_flags() {
    let dir = Dir::new();
    let (data, rewards) = xor_files(&dir);
    let out = dir.path("t.json");
    let config = dir.write(
        "run.toml",
        &format!(
            "jobs = 1\n[train]\ndata = \"{data}\"\nfeatures = [\"u\", \"v\"]\nrewards = \"{rewards}\"\ndepth = 0\nout = \"{out}\"\nreport = \"{}\"\n",
            dir.path("r.jsonl")
        ),
    );
    ok(&["--config", &config, "train"]);
    let tree = document::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(tree.n_branches(), 0);
    // the command line overrides the document
    ok(&["--config", &config, "train", "--depth", "2", "--seed", "1"]);
    let tree = document::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(tree.depth(), 2);
}

#[test]
fn generate_is_reproducible() {
    let dir = Dir::new();
    let (a, b): (PathBuf, PathBuf) = (dir.path("a.csv").into(), dir.path("b.csv").into());
    for p in [&a, &b] {
        ok(&["generate", "--design", "multi-1", "--n", "50", "--seed", "3", "--out", p.to_str().unwrap()]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let t = Table::read(&a).unwrap();
    assert_eq!(t.header.last().unwrap(), "y");
    let arms: std::collections::BTreeSet<String> = t.text_column("z").unwrap().into_iter().collect();
    assert!(arms.iter().all(|a| ["control", "treatment1", "treatment2"].contains(&a.as_str())));
}
