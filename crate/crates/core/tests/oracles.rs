mod common;

use std::collections::HashSet;

use offdetect::corpus::{score_to_label, Label, LabelHeuristic};
use offdetect::eval::{confusion, metrics};
use offdetect::features::{flesch_kincaid, FeatureConfig, Featurizer, TfIdfModel};
use offdetect::models::gbdt::Node;
use offdetect::models::{build_tree, train_gbdt, GbdtParams, SparseMatrix};
use offdetect::preprocess::SegmenterLexicon;
use offdetect::resources::Resources;
use offdetect::rng::SplitMix64;
use offdetect::tokenize::{wordpiece_tokenize, NGramSpec, NGramUnit, WordPieceVocab};

#[test]
fn heuristic_matches_grid_oracle() {
    let h = LabelHeuristic::default();
    for a in 0..=100u32 {
        for s in 0..=50u32 {
            let got = score_to_label(a as f64 / 100.0, s as f64 / 100.0, &h).is_positive();
            assert_eq!(
                got,
                common::heuristic_on_grid(a, s),
                "avg {a}/100 std {s}/100"
            );
        }
    }
    assert!(score_to_label(0.60, 0.05, &h).is_positive());
    assert!(!score_to_label(0.50, 0.01, &h).is_positive());
}

#[test]
fn wordpiece_matches_brute_force() {
    let mut rng = SplitMix64::new(11);
    let mut non_unk = 0;
    for _ in 0..2000 {
        let (tokens, word) = common::random_wordpiece_case(&mut rng, 50);
        let set: HashSet<String> = tokens.iter().cloned().collect();
        let vocab = WordPieceVocab::new(tokens).unwrap();
        let got = wordpiece_tokenize(&word, &vocab);
        assert_eq!(got, common::wordpiece_oracle(&word, &set), "word {word}");
        if got != ["[UNK]"] {
            non_unk += 1;
        }
    }
    assert!(non_unk > 200, "too few segmentable cases: {non_unk}");
}

#[test]
fn wordpiece_long_words_are_unknown() {
    let vocab = WordPieceVocab::new(
        ["[CLS]", "[SEP]", "[PAD]", "[UNK]", "a", "##a"]
            .map(String::from)
            .to_vec(),
    )
    .unwrap();
    assert_eq!(wordpiece_tokenize(&"a".repeat(100), &vocab).len(), 100);
    assert_eq!(wordpiece_tokenize(&"a".repeat(101), &vocab), ["[UNK]"]);
}

#[test]
fn segmentation_is_minimal() {
    let mut rng = SplitMix64::new(5);
    let alphabet = ['a', 'b', 'c'];
    for case in 0..300 {
        let n_words = 3 + rng.below(12);
        let words: Vec<String> = (0..n_words)
            .map(|_| {
                (0..1 + rng.below(4))
                    .map(|_| alphabet[rng.below(3)])
                    .collect()
            })
            .collect();
        let lex = SegmenterLexicon::from_ranked(&words);
        let set: HashSet<String> = words.iter().cloned().collect();
        let len = 1 + rng.below(20);
        let target: String = (0..len).map(|_| alphabet[rng.below(3)]).collect();
        let oracle = common::min_segmentation_words(&target, &set);
        match lex.segment(&target) {
            None => assert_eq!(oracle, None, "case {case}: {target}"),
            Some(starts) => {
                let mut bounds = starts.clone();
                bounds.push(target.len());
                let pieces: Vec<&str> = bounds.windows(2).map(|w| &target[w[0]..w[1]]).collect();
                assert!(
                    pieces.iter().all(|p| set.contains(*p)),
                    "case {case}: {pieces:?}"
                );
                assert_eq!(
                    Some(pieces.len()),
                    oracle,
                    "case {case}: {target} -> {pieces:?}"
                );
            }
        }
    }
}

#[test]
fn confusion_matches_recount() {
    let mut rng = SplitMix64::new(3);
    for _ in 0..1000 {
        let n = 1 + rng.below(50);
        let p: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.4)).collect();
        let g: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.3)).collect();
        let lab = |v: &[bool]| v.iter().map(|&b| Label::from_bool(b)).collect::<Vec<_>>();
        let cm = confusion(&lab(&p), &lab(&g)).unwrap();
        assert_eq!((cm.tp, cm.fp, cm.fn_, cm.tn), common::recount(&p, &g));
        let m = metrics(&cm).unwrap();
        let acc = (cm.tp + cm.tn) as f64 / n as f64;
        assert!((m.accuracy - acc).abs() < 1e-12);
    }
}

#[test]
fn tfidf_hand_fixture() {
    let spec = NGramSpec::new(NGramUnit::Word, vec![1]).unwrap();
    let m = TfIdfModel::fit(&[vec!["a", "b"], vec!["a", "c"]], &spec, 1).unwrap();
    let idf = |g: &str| m.idf()[m.column(g).unwrap() as usize];
    assert!((idf("a") - 1.0).abs() < 1e-12);
    let idf_b = (3.0f64 / 2.0).ln() + 1.0;
    assert!((idf("b") - idf_b).abs() < 1e-12);
    assert!((idf("b") - 1.4055).abs() < 1e-4);
    assert_eq!(idf("b"), idf("c"));
    let row = m.transform(&["a", "a", "b"]).unwrap();
    let norm = (4.0 + idf_b * idf_b).sqrt();
    let w = |g: &str| {
        row.iter()
            .find(|(c, _)| *c == m.column(g).unwrap())
            .unwrap()
            .1
    };
    assert!((w("a") - 2.0 / norm).abs() < 1e-9);
    assert!((w("b") - idf_b / norm).abs() < 1e-9);
}

#[test]
fn readability_hand_fixture() {
    let fk = flesch_kincaid("The cat sat.").unwrap();
    assert!((fk - (0.39 * 3.0 + 11.8 * 1.0 - 15.59)).abs() < 1e-9);
    let res = Resources::bundled();
    let f = Featurizer::fit(
        &["The cat sat.", "A dog ran."],
        FeatureConfig::default(),
        res.lexicons.clone(),
    )
    .unwrap();
    let v = f.transform("The cat sat.").unwrap();
    assert_eq!(&v.dense[..3], &[12.0, 3.0, 3.0]);
    assert!((v.dense[3] + 2.62).abs() < 0.01);
}

fn random_dense(rng: &mut SplitMix64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| 0.1 + 5.0 * rng.next_f64()).collect())
        .collect();
    let labels = rows
        .iter()
        .map(|r| r[0] + r[1] > 5.0 + rng.normal())
        .collect();
    (rows, labels)
}

#[test]
fn gbdt_splits_invariant_under_monotone_transform() {
    let mut rng = SplitMix64::new(9);
    for case in 0..20 {
        let (rows, labels) = random_dense(&mut rng, 60, 3);
        let grad: Vec<f64> = labels.iter().map(|&y| if y { -0.5 } else { 0.5 }).collect();
        let hess = vec![0.25; rows.len()];
        let params = GbdtParams {
            max_depth: 3,
            ..Default::default()
        };
        let k = case % 3;
        let warped: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r[k] = r[k].powi(3) + 0.5;
                r
            })
            .collect();
        let a = build_tree(
            &SparseMatrix::from_dense(&rows).unwrap(),
            &grad,
            &hess,
            &params,
        )
        .unwrap();
        let b = build_tree(
            &SparseMatrix::from_dense(&warped).unwrap(),
            &grad,
            &hess,
            &params,
        )
        .unwrap();
        let features = |t: &offdetect::models::Tree| {
            t.nodes
                .iter()
                .map(|n| match n {
                    Node::Split { feature, .. } => Some(*feature),
                    Node::Leaf { .. } => None,
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(features(&a), features(&b), "case {case}");
        for (r, w) in rows.iter().zip(&warped) {
            let cols: Vec<u32> = (0..r.len() as u32).collect();
            assert_eq!(a.eval(&cols, r), b.eval(&cols, w), "case {case}");
        }
    }
}

#[test]
fn gbdt_duplicating_samples_changes_nothing_without_regularisation() {
    let mut rng = SplitMix64::new(2);
    let (rows, labels) = random_dense(&mut rng, 80, 4);
    let params = GbdtParams {
        n_rounds: 10,
        l2_leaf_reg: 0.0,
        min_child_weight: 0.0,
        ..Default::default()
    };
    let doubled_rows: Vec<Vec<f64>> = rows.iter().chain(&rows).cloned().collect();
    let doubled_labels: Vec<bool> = labels.iter().chain(&labels).copied().collect();
    let x = SparseMatrix::from_dense(&rows).unwrap();
    let a = train_gbdt(&x, &labels, &params).unwrap().model;
    let b = train_gbdt(
        &SparseMatrix::from_dense(&doubled_rows).unwrap(),
        &doubled_labels,
        &params,
    )
    .unwrap()
    .model;
    for (pa, pb) in a.predict(&x).unwrap().iter().zip(b.predict(&x).unwrap()) {
        assert!((pa - pb).abs() < 1e-9, "{pa} vs {pb}");
    }
}
