use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sewtree::commands::{correlate, roundtrip, roundtrip_with};
use sewtree::corpus::{load_grammars, load_specs};
use sewtree::formats::ErrorRow;
use sewtree_core::grammar::DEFAULT_CAP;
use sewtree_core::pipeline::linearize_gold_tree;

fn fx(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
        .to_str()
        .unwrap()
        .to_string()
}

fn sewtree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sewtree")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = sewtree(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn score(corpus: &str) -> Output {
    sewtree(&["score", corpus, "--grammars", &fx("grammars"), "--specs", &fx("specs")])
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn scores_the_worked_skirt_document() {
    let out = ok(&[
        "score",
        &fx("corpus"),
        "--grammars",
        &fx("grammars"),
        "--specs",
        &fx("specs"),
        "--references",
        &fx("references"),
    ]);
    assert_eq!(column(&out, "doc_id"), ["skirt-worked"]);
    assert_eq!(column(&out, "tree_f1"), ["1.0"]);
    assert_eq!(column(&out, "bert_score"), [""]);
    assert!(!column(&out, "bleu")[0].is_empty());
}

#[test]
fn unknown_pattern_fails_naming_the_doc() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "c.json",
        r#"[{"pattern_id": "skirt", "doc_id": "good", "steps": ["Sew (A) to (B)."]},
            {"pattern_id": "cape", "doc_id": "stray", "steps": ["Sew (A) to (B)."]}]"#,
    );
    let out = score(dir.path().to_str().unwrap());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stray") && err.contains("cape"), "{err}");
    assert_eq!(column(&String::from_utf8_lossy(&out.stdout), "doc_id"), ["good"]);
}

fn linearized_corpus(dir: &Path) {
    let gs = load_grammars(Path::new(&fx("grammars"))).unwrap();
    let ss = load_specs(Path::new(&fx("specs"))).unwrap();
    for (id, g) in &gs {
        let docs: Vec<_> = sewtree_core::enumerate_gold_trees(g, DEFAULT_CAP)
            .unwrap()
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut d = linearize_gold_tree(t, &ss[id]);
                d.doc_id = format!("{id}-t{i}");
                sewtree::formats::DocJson::from(&d)
            })
            .collect();
        std::fs::write(dir.join(format!("{id}.json")), serde_json::to_string(&docs).unwrap()).unwrap();
    }
}

#[test]
fn linearized_gold_corpus_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    linearized_corpus(dir.path());
    let out = score(dir.path().to_str().unwrap());
    assert!(out.status.success());
    let f1 = column(&String::from_utf8(out.stdout).unwrap(), "tree_f1");
    assert_eq!(f1.len(), 15);
    assert!(f1.iter().all(|v| v == "1.0"));
}

#[test]
fn union_of_corpora_matches_separate_runs() {
    let dir = tempfile::tempdir().unwrap();
    let all = dir.path().join("all");
    std::fs::create_dir(&all).unwrap();
    linearized_corpus(&all);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    std::fs::create_dir(&a).unwrap();
    std::fs::create_dir(&b).unwrap();
    for (i, e) in std::fs::read_dir(&all).unwrap().enumerate() {
        let p = e.unwrap().path();
        let target = if i % 2 == 0 { &a } else { &b };
        std::fs::copy(&p, target.join(p.file_name().unwrap())).unwrap();
    }
    let rows = |d: &Path| -> Vec<String> {
        let out = String::from_utf8(score(d.to_str().unwrap()).stdout).unwrap();
        out.lines().skip(1).map(String::from).collect()
    };
    let mut separate = rows(&a);
    separate.extend(rows(&b));
    separate.sort();
    assert_eq!(rows(&all), separate);
}

#[test]
fn permute_single_step_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let doc = write(dir.path(), "one.json", r#"{"pattern_id": "p", "doc_id": "x", "steps": ["only"]}"#);
    let out: serde_json::Value = serde_json::from_str(&ok(&["permute", doc.to_str().unwrap(), "-k", "3"])).unwrap();
    assert_eq!(out.as_array().unwrap().len(), 3);
    assert_eq!(out[2]["doc_id"], "x-perm2");
    assert_eq!(out[0]["steps"], serde_json::json!(["only"]));
    let five = write(
        dir.path(),
        "five.json",
        r#"{"pattern_id": "p", "doc_id": "y", "steps": ["1", "2", "3", "4", "5"]}"#,
    );
    let f = five.to_str().unwrap();
    let a = ok(&["permute", f, "-k", "4", "--seed", "42"]);
    assert_eq!(a, ok(&["permute", f, "-k", "4", "--seed", "42"]));
    assert_ne!(a, ok(&["permute", f, "-k", "4", "--seed", "43"]));
    assert_eq!(sewtree(&["permute", f, "-k", "0"]).status.code(), Some(2));
}

#[test]
fn inject_errors_command() {
    let dir = tempfile::tempdir().unwrap();
    let doc = write(
        dir.path(),
        "d.json",
        r#"{"pattern_id": "skirt", "doc_id": "d", "steps": [
            "Sew the Over Skirt (A) to the Under Skirt (B).",
            "Sew the component containing the Over Skirt (A) to itself.",
            "Sew the component containing the Over Skirt (A) to the Waistband (C)."]}"#,
    );
    let d = doc.to_str().unwrap();
    let spec = fx("specs/skirt.json");
    let out_path = dir.path().join("bad.json");
    ok(&["inject-errors", d, "--spec", &spec, "--drop", "1", "--seed", "3", "--out", out_path.to_str().unwrap()]);
    let bad: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(bad[0]["steps"].as_array().unwrap().len(), 2);
    let errs = std::fs::read_to_string(dir.path().join("bad.json.errors.csv")).unwrap();
    assert_eq!(errs, "doc_id,errors\nd,1\n");

    // A swap changes the subtree trace of the rebuilt document.
    let swapped = dir.path().join("swapped.json");
    ok(&["inject-errors", d, "--spec", &spec, "--swap", "1", "--out", swapped.to_str().unwrap()]);
    let trace = |p: &Path| -> serde_json::Value {
        let b: serde_json::Value =
            serde_json::from_str(&ok(&["build", p.to_str().unwrap(), "--spec", &spec])).unwrap();
        b["subtree_trace"].clone()
    };
    assert_ne!(trace(&doc), trace(&swapped));

    let infeasible = sewtree(&["inject-errors", d, "--spec", &spec, "--drop", "3"]);
    assert_eq!(infeasible.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&infeasible.stderr).contains("cannot drop"));
}

#[test]
fn extract_and_build_from_extraction() {
    let doc = fx("corpus/skirt-worked.json");
    let spec = fx("specs/skirt.json");
    let x = ok(&["extract", &doc, "--spec", &spec]);
    let v: serde_json::Value = serde_json::from_str(&x).unwrap();
    assert_eq!(v["pieces_per_step"], serde_json::json!([["A", "B"], ["A", "B"], ["C", "A", "B"], ["C"], ["A", "B"]]));
    let dir = tempfile::tempdir().unwrap();
    let xp = write(dir.path(), "x.json", &x);
    let from_file = ok(&["build", &doc, "--spec", &spec, "--extraction", xp.to_str().unwrap()]);
    let direct = ok(&["build", &doc, "--spec", &spec]);
    let b: serde_json::Value = serde_json::from_str(&from_file).unwrap();
    assert_eq!(b["forest"]["trees"], serde_json::json!(["(ABC_1 (AB_1 (AB A B)) C)"]));
    let d: serde_json::Value = serde_json::from_str(&direct).unwrap();
    assert_eq!(b["forest"], d["forest"]);
    assert_eq!(b["steps"], d["steps"]);
}

#[test]
fn grammar_commands() {
    let out: serde_json::Value = serde_json::from_str(&ok(&["gen-gold", &fx("grammars/skirt.cfg")])).unwrap();
    assert_eq!(out["trees"], serde_json::json!(["(ABC_1 (AB_1 (AB A B)) C)"]));
    assert_eq!(out["counts"]["ABC_1"], 1);
    let capped = sewtree(&["gen-gold", &fx("grammars/pants.cfg"), "--cap", "3"]);
    assert_eq!(capped.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cfg", "pattern: x\npieces: A B\nroots: AB\nAB -> A A\n");
    let out = sewtree(&["validate-grammar", &fx("grammars/skirt.cfg"), bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("skirt.cfg: ok"));
    assert!(text.contains("bad.cfg: invalid"));
    assert_eq!(sewtree(&["gen-gold", "/nonexistent.cfg"]).status.code(), Some(2));
}

#[test]
fn roundtrip_command_and_negative_control() {
    let out = ok(&["roundtrip", &fx("grammars"), "--specs", &fx("specs")]);
    assert!(out.contains("skirt: 1/1"));
    assert!(out.contains("pants-b: 1/1"));

    let gs = load_grammars(Path::new(&fx("grammars"))).unwrap();
    let ss = load_specs(Path::new(&fx("specs"))).unwrap();
    assert!(roundtrip(&gs, &ss, DEFAULT_CAP).unwrap().iter().all(|r| r.failures.is_empty()));
    let broken = roundtrip_with(&gs, &ss, DEFAULT_CAP, |t, s| {
        let mut d = linearize_gold_tree(t, s);
        d.steps.reverse();
        d
    })
    .unwrap();
    let skirt = broken.iter().find(|r| r.pattern_id == "skirt").unwrap();
    assert_eq!(skirt.failures.len(), 1);
    assert!(skirt.failures[0].f1 < 1.0);
}

fn error_rows(pairs: &[(&str, usize)]) -> Vec<ErrorRow> {
    pairs
        .iter()
        .map(|(d, e)| ErrorRow {
            doc_id: d.to_string(),
            errors: *e,
        })
        .collect()
}

#[test]
fn correlate_scores() {
    let scores = "doc_id,n_steps,tree_f1,bleu\na,4,1.0,0.5\nb,4,0.75,0.5\nc,4,0.5,0.5\nd,2,0.0,\n";
    let errs = error_rows(&[("a", 0), ("b", 1), ("c", 2), ("d", 2)]);
    let rows = correlate(scores, &errs, &["tree_f1".into()]).unwrap();
    assert_eq!(rows[0].n, 4);
    assert!((rows[0].r + 1.0).abs() < 1e-12);
    assert!(correlate(scores, &errs, &["bleu".into()]).is_err());
    assert!(correlate(scores, &errs, &["rouge_l".into()]).is_err());
    assert!(correlate(scores, &errs[..2], &["tree_f1".into()]).is_err());

    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.csv", scores);
    let e = write(dir.path(), "e.csv", "doc_id,errors\na,0\nb,1\nc,2\nd,2\n");
    let out = ok(&[
        "correlate",
        "--scores",
        s.to_str().unwrap(),
        "--errors",
        e.to_str().unwrap(),
        "--columns",
        "tree_f1",
    ]);
    assert!(out.starts_with("metric,n,r,t,p\ntree_f1,4,-1"), "{out}");
    let constant = sewtree(&["correlate", "--scores", s.to_str().unwrap(), "--errors", e.to_str().unwrap(), "--columns", "bleu"]);
    assert_eq!(constant.status.code(), Some(1));
}

#[test]
fn aggregate_ratings_fixture() {
    let out = ok(&["aggregate-ratings", &fx("ratings/sample.csv")]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0].split(',').count(), 16);
    let d1: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(d1[0], "d1");
    // S1: 5, 4, 2.
    assert_eq!(d1[1].parse::<f64>().unwrap(), 11.0 / 3.0);
    assert_eq!(d1[2].parse::<f64>().unwrap(), 2.0 / 3.0);
    assert_eq!(d1[3].parse::<f64>().unwrap(), 1.0 / 3.0);
    // S2: 3, 3.
    assert_eq!(&d1[4..7], ["3", "0", "0"]);
    assert_eq!(&d1[7..], ["", "", "", "", "", "", "", "", ""]);
    let d2: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(&d2[1..4], ["1", "0", "1"]);
    // S5: 4, 5, 3, 2.
    assert_eq!(&d2[13..16], ["3.5", "0.5", "0.25"]);

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "doc_id,step_index,question,rating\nd,0,S1,9\n");
    let out = sewtree(&["aggregate-ratings", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn adapter_needs_a_url() {
    let out = sewtree(&["extract", &fx("corpus/skirt-worked.json"), "--spec", &fx("specs"), "--extractor", "adapter"]);
    assert_eq!(out.status.code(), Some(2));
}
