//! The bundled fixture set: synthetic trees with known corruptions, and the
//! library-level index values the CLI must reproduce on them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use vesseltopo::io::{encode_pgm, load_probmap, mask_to_gray, read_mask, read_probmap, write_gray, GrayImage};
use vesseltopo::synth::vessel_tree;
use vesseltopo::{cl_dice, exact_similarity, BinaryMask, CoherenceFn, Grid, PathStrategy};

const SIZE: usize = 40;

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Soft prediction: confident on a broken copy of the tree, unsure (below
/// threshold) inside the gaps, low elsewhere.
fn soft_prediction(truth: &BinaryMask, broken: &BinaryMask) -> GrayImage {
    let pixels = truth
        .data()
        .iter()
        .zip(broken.data())
        .enumerate()
        .map(|(i, (&t, &b))| match (t, b) {
            (_, true) => 230,
            (true, false) => 100,
            _ => 10 + (i * 7 % 23) as u8,
        })
        .collect();
    GrayImage {
        width: truth.width(),
        height: truth.height(),
        pixels,
    }
}

/// Stems and prediction images; every stem shares the reference tree as
/// ground truth.
fn predictions() -> (BinaryMask, Vec<(&'static str, GrayImage)>) {
    let t = vessel_tree(SIZE, 6);
    let empty = BinaryMask::empty(SIZE, SIZE).unwrap();
    let preds = vec![
        ("tree_broken", mask_to_gray(&t.broken_segments)),
        ("tree_empty", mask_to_gray(&empty)),
        ("tree_false_branch", mask_to_gray(&t.false_branch)),
        ("tree_identical", mask_to_gray(&t.truth)),
        ("tree_missing", mask_to_gray(&t.missing_termination)),
        ("tree_soft", soft_prediction(&t.truth, &t.broken_segments)),
    ];
    (t.truth, preds)
}

type Oracle = BTreeMap<String, BTreeMap<String, f64>>;

fn oracle_values(truth: &BinaryMask, pred: &BinaryMask) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (name, f) in [("mH", CoherenceFn::Hamming), ("mF", CoherenceFn::Feasible)] {
        let r = exact_similarity(pred, truth, f, PathStrategy::CenterlineGraph).unwrap();
        out.insert(name.to_owned(), r.value);
    }
    out.insert("cldice".to_owned(), cl_dice(pred, truth).unwrap());
    out
}

/// Rewrites the fixture images and the oracle file. Run with
/// `cargo test -p vesseltopo-cli --test fixtures -- --ignored` after a
/// deliberate change to the synthetic trees.
#[test]
#[ignore]
fn regenerate() {
    let dir = fixture_dir();
    std::fs::create_dir_all(dir.join("pred")).unwrap();
    std::fs::create_dir_all(dir.join("gt")).unwrap();
    let (truth, preds) = predictions();
    let mut oracle = Oracle::new();
    for (stem, img) in &preds {
        write_gray(img, dir.join("pred").join(format!("{stem}.png"))).unwrap();
        write_gray(&mask_to_gray(&truth), dir.join("gt").join(format!("{stem}.pgm"))).unwrap();
        let pred = read_probmap(dir.join("pred").join(format!("{stem}.png")))
            .unwrap()
            .threshold(0.5);
        oracle.insert(stem.to_string(), oracle_values(&truth, &pred));
    }
    let json = serde_json::to_string_pretty(&oracle).unwrap();
    std::fs::write(dir.join("oracle.json"), json + "\n").unwrap();
}

#[test]
fn bundled_images_match_the_generators() {
    let dir = fixture_dir();
    let (truth, preds) = predictions();
    for (stem, img) in &preds {
        let on_disk = std::fs::read(dir.join("pred").join(format!("{stem}.png"))).unwrap();
        assert_eq!(load_probmap(&on_disk).unwrap(), load_probmap(&encode_pgm(img)).unwrap(), "{stem}");
        assert_eq!(read_mask(dir.join("gt").join(format!("{stem}.pgm"))).unwrap(), truth);
    }
}

fn read_oracle() -> Oracle {
    serde_json::from_str(&std::fs::read_to_string(fixture_dir().join("oracle.json")).unwrap()).unwrap()
}

#[test]
fn oracle_values_are_current() {
    let dir = fixture_dir();
    let oracle = read_oracle();
    let (truth, preds) = predictions();
    assert_eq!(oracle.len(), preds.len());
    for (stem, _) in &preds {
        let pred = read_probmap(dir.join("pred").join(format!("{stem}.png")))
            .unwrap()
            .threshold(0.5);
        for (name, value) in oracle_values(&truth, &pred) {
            let pinned = oracle[*stem][&name];
            assert!((pinned - value).abs() <= 1e-12, "{stem} {name}: {pinned} vs {value}");
        }
    }
}

#[test]
fn exact_evaluation_reproduces_the_oracle() {
    let dir = fixture_dir();
    let output = Command::new(env!("CARGO_BIN_EXE_vesseltopo"))
        .args(["evaluate", "--exact", "--metrics", "cldice,mH,mF", "--pred"])
        .arg(dir.join("pred"))
        .arg("--gt")
        .arg(dir.join("gt"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    let csv = String::from_utf8(output.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "image_id,cldice,mH,mH_stderr,mF,mF_stderr,note");
    let oracle = read_oracle();
    let mut seen = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells[0] == "mean" {
            continue;
        }
        let expected = &oracle[cells[0]];
        for (col, name) in [(1, "cldice"), (2, "mH"), (4, "mF")] {
            let got: f64 = cells[col].parse().unwrap();
            assert!((got - expected[name]).abs() <= 5e-7, "{} {name}: {got} vs {}", cells[0], expected[name]);
        }
        seen += 1;
    }
    assert_eq!(seen, oracle.len());
    assert_eq!(oracle["tree_identical"]["mH"], 1.0);
    assert_eq!(oracle["tree_empty"]["mF"], 0.0);
    assert!(oracle["tree_broken"]["mF"] < oracle["tree_missing"]["mF"]);
}
