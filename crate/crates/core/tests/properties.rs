use proptest::prelude::*;

use offdetect::corpus::{
    concat_datasets, score_to_label, stratified_split, Dataset, Label, LabelHeuristic, Sample,
    SplitSpec,
};
use offdetect::eval::{
    confusion, metrics, parse_report_csv, render_report, ReportFormat, SelectBy,
};
use offdetect::features::{
    flesch_kincaid, pos_tag, sentiment_scores, tfidf::smoothed_idf, PosTag, TfIdfModel,
};
use offdetect::models::{
    train_gbdt, GbdtParams, SparseMatrix, TransformerClassifier, TransformerConfig,
};
use offdetect::preprocess::{normalize_hashtags, replace_emojis};
use offdetect::resources::Resources;
use offdetect::tokenize::{
    extract_ngrams, wordpiece_tokenize, NGramSpec, NGramUnit, WordPieceVocab,
};

fn dataset(name: &str, labels: &[bool]) -> Dataset {
    let samples = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let mut s = Sample::labeled(format!("{i}"), format!("text {i}"), Label::from_bool(y));
            s.source = name.to_string();
            s
        })
        .collect();
    Dataset::new(name, "en", samples)
}

fn tweet() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        "[a-zA-Z]{1,8}",
        "#[a-zA-Z0-9]{0,12}",
        "#[a-z]{2,6}[A-Z][a-z]{2,6}",
        Just("😡".to_string()),
        Just("🤬🤬".to_string()),
        Just("👍🏽".to_string()),
        Just("@USER".to_string()),
        "[!?.,:]{1,3}",
        "[0-9]{1,4}",
        "[ \t]{1,2}",
        Just("😊#tag".to_string()),
    ];
    proptest::collection::vec(piece, 0..12).prop_map(|v| v.join(" "))
}

proptest! {
    #[test]
    fn heuristic_monotone_in_average(std in 0.0f64..0.5, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let h = LabelHeuristic::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(!(score_to_label(lo, std, &h).is_positive() && !score_to_label(hi, std, &h).is_positive()));
    }

    #[test]
    fn heuristic_high_disagreement_uses_hi_only(avg in 0.0f64..1.0, extra in 0.0f64..0.4) {
        let h = LabelHeuristic::default();
        let std = h.std_threshold + extra;
        prop_assert_eq!(score_to_label(avg, std, &h).is_positive(), avg > h.hi_threshold);
    }

    #[test]
    fn split_preserves_samples_and_ratio(
        labels in proptest::collection::vec(any::<bool>(), 10..300),
        ratio in 0.05f64..0.5,
        seed in any::<u64>(),
    ) {
        let n_pos = labels.iter().filter(|&&y| y).count();
        prop_assume!(n_pos >= 2 && labels.len() - n_pos >= 2);
        let d = dataset("d", &labels);
        let (train, val) = stratified_split(&d, &SplitSpec { validation_ratio: ratio, seed }).unwrap();
        prop_assume!(!val.is_empty() && !train.is_empty());
        let mut ids: Vec<&str> = train.samples.iter().chain(&val.samples).map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        let mut orig: Vec<&str> = d.samples.iter().map(|s| s.id.as_str()).collect();
        orig.sort_unstable();
        prop_assert_eq!(ids, orig);
        let parent = n_pos as f64 / d.len() as f64;
        let pos = |x: &Dataset| x.samples.iter().filter(|s| s.label == Some(Label::Positive)).count() as f64 / x.len() as f64;
        let tol = 1.0 / val.len() as f64 + 1e-12;
        prop_assert!((pos(&val) - parent).abs() <= tol);
        prop_assert!((pos(&train) - parent).abs() <= tol);
    }

    #[test]
    fn concat_is_associative(a in proptest::collection::vec(any::<bool>(), 0..20),
                             b in proptest::collection::vec(any::<bool>(), 0..20),
                             c in proptest::collection::vec(any::<bool>(), 0..20)) {
        let (a, b, c) = (dataset("a", &a), dataset("b", &b), dataset("c", &c));
        let ab = concat_datasets(&[&a, &b], "ab").unwrap();
        let bc = concat_datasets(&[&b, &c], "bc").unwrap();
        let left = concat_datasets(&[&ab, &c], "x").unwrap();
        let right = concat_datasets(&[&a, &bc], "x").unwrap();
        let flat = concat_datasets(&[&a, &b, &c], "x").unwrap();
        prop_assert_eq!(&left.samples, &right.samples);
        prop_assert_eq!(&left.samples, &flat.samples);
    }

    #[test]
    fn preprocessing_keeps_plain_characters(text in tweet()) {
        let res = Resources::bundled();
        let emoji_chars: std::collections::HashSet<char> =
            res.preprocessor.emoji.entries().flat_map(|(e, _)| e.chars()).collect();
        let count = |s: &str, c: char| s.chars().filter(|&x| x == c).count();
        let after_emoji = replace_emojis(&text, &res.preprocessor.emoji);
        let after_tags = normalize_hashtags(&after_emoji, &res.preprocessor.lexicon);
        for c in text.chars().filter(|c| !c.is_whitespace() && *c != '#' && !emoji_chars.contains(c)) {
            prop_assert!(count(&after_emoji, c) >= count(&text, c), "emoji pass lost {:?}", c);
            prop_assert!(count(&after_tags, c) >= count(&after_emoji, c), "hashtag pass lost {:?}", c);
        }
    }

    #[test]
    fn preprocessing_is_idempotent(text in tweet()) {
        let p = Resources::bundled().preprocessor;
        let once = p.apply(&text);
        prop_assert_eq!(p.apply(&once), once);
    }

    #[test]
    fn wordpiece_round_trip(word in "[a-d]{1,12}", extra in proptest::collection::vec("(##)?[a-d]{1,4}", 1..40)) {
        let mut tokens: Vec<String> = ["[CLS]", "[SEP]", "[PAD]", "[UNK]"].iter().map(|s| s.to_string()).collect();
        for t in extra {
            if !tokens.contains(&t) {
                tokens.push(t);
            }
        }
        let v = WordPieceVocab::new(tokens).unwrap();
        let pieces = wordpiece_tokenize(&word, &v);
        if !pieces.iter().any(|p| p == "[UNK]") {
            let joined: String = pieces.iter().map(|p| p.trim_start_matches("##")).collect();
            prop_assert_eq!(joined, word);
        }
    }

    #[test]
    fn ngram_counts(units in proptest::collection::vec("[a-z]{1,3}", 0..15), n in 1usize..6) {
        let spec = NGramSpec::new(NGramUnit::Word, vec![n]).unwrap();
        let grams = extract_ngrams(&units, &spec).unwrap();
        prop_assert_eq!(grams.len(), (units.len() + 1).saturating_sub(n));
    }

    #[test]
    fn tfidf_rows_are_unit_or_empty(
        docs in proptest::collection::vec(proptest::collection::vec("[a-e]", 1..6), 1..8),
        probe in proptest::collection::vec("[a-h]", 0..6),
    ) {
        let spec = NGramSpec::new(NGramUnit::Word, vec![1, 2]).unwrap();
        let m = TfIdfModel::fit(&docs, &spec, 1).unwrap();
        let row = m.transform(&probe).unwrap();
        let norm: f64 = row.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-9);
        prop_assert_eq!(norm == 0.0, row.is_empty());
    }

    #[test]
    fn idf_non_increasing(n in 1usize..1000, df in 0usize..1000) {
        prop_assume!(df < n);
        prop_assert!(smoothed_idf(n, df + 1) <= smoothed_idf(n, df));
    }

    #[test]
    fn sentiment_compound_bounds(tokens in proptest::collection::vec(prop_oneof![
        Just("good"), Just("bad"), Just("not"), Just("very"), Just("hate"), Just("love"), Just("the"), Just("x")
    ], 0..12)) {
        let lex = Resources::bundled().lexicons.sentiment;
        let s = sentiment_scores(&tokens, &lex);
        let signed = s.pos - s.neg;
        prop_assert!(s.compound > -1.0 && s.compound < 1.0);
        if signed.abs() > 1e-12 {
            prop_assert_eq!(s.compound.signum(), signed.signum());
        } else {
            prop_assert!(s.compound.abs() < 1e-9);
        }
    }

    #[test]
    fn pos_tags_cover_input(tokens in proptest::collection::vec("[a-zA-Z0-9!.,']{1,8}", 0..12)) {
        let lex = Resources::bundled().lexicons.pos;
        let tags = pos_tag(&tokens, &lex);
        prop_assert_eq!(tags.len(), tokens.len());
        prop_assert!(tags.iter().all(|t| PosTag::ALL.contains(t)));
    }

    #[test]
    fn readability_repetition_invariant(words in proptest::collection::vec("[a-z]{1,9}", 1..10), k in 2usize..6) {
        let sentence = format!("{}.", words.join(" "));
        let once = flesch_kincaid(&sentence).unwrap();
        let many = flesch_kincaid(&vec![sentence.as_str(); k].join(" ")).unwrap();
        prop_assert!((once - many).abs() < 1e-9);
    }

    #[test]
    fn metrics_macro_f1_swap_invariant(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..60)) {
        let p: Vec<Label> = pairs.iter().map(|x| Label::from_bool(x.0)).collect();
        let l: Vec<Label> = pairs.iter().map(|x| Label::from_bool(x.1)).collect();
        let flip = |v: &[Label]| v.iter().map(|x| Label::from_bool(!x.is_positive())).collect::<Vec<_>>();
        let a = metrics(&confusion(&p, &l).unwrap()).unwrap();
        let b = metrics(&confusion(&flip(&p), &flip(&l)).unwrap()).unwrap();
        prop_assert!((a.f1_macro - b.f1_macro).abs() < 1e-12);
        prop_assert!((a.accuracy - b.accuracy).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gbdt_loss_never_increases(
        rows in proptest::collection::vec((proptest::collection::vec(-3.0f64..3.0, 4), any::<bool>()), 6..60),
        depth in 1usize..5,
        lambda in 0.0f64..3.0,
    ) {
        let labels: Vec<bool> = rows.iter().map(|r| r.1).collect();
        prop_assume!(labels.iter().any(|&y| y) && labels.iter().any(|&y| !y));
        let x = SparseMatrix::from_dense(&rows.iter().map(|r| r.0.clone()).collect::<Vec<_>>()).unwrap();
        let params = GbdtParams { n_rounds: 15, max_depth: depth, l2_leaf_reg: lambda, ..Default::default() };
        let out = train_gbdt(&x, &labels, &params).unwrap();
        for w in out.history.windows(2) {
            prop_assert!(w[1].loss <= w[0].loss + 1e-12, "{:?}", out.history);
        }
    }

    #[test]
    fn transformer_rows_sum_to_one(ids in proptest::collection::vec(0u32..30, 1..20), seed in any::<u64>()) {
        let cfg = TransformerConfig { vocab_size: 30, d_model: 8, n_heads: 2, n_layers: 2, d_ff: 16, max_len: 16, ..Default::default() };
        let m = TransformerClassifier::new(cfg, seed).unwrap();
        let p = m.predict_probs(&ids).unwrap();
        prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-6);
        let seq = ids.len().min(16);
        for layer in m.attention_maps(&ids).unwrap() {
            for row in layer.chunks(seq) {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn report_csv_round_trip(f1 in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..6)) {
        let results: Vec<_> = f1.iter().enumerate().map(|(i, &(f, a))| {
            let mut r = fixture_result(i);
            r.metrics.f1_positive = f;
            r.metrics.accuracy = a;
            r
        }).collect();
        let csv = render_report(&results, ReportFormat::Csv, SelectBy::F1Positive).unwrap();
        let rows = parse_report_csv(&csv).unwrap();
        prop_assert_eq!(render_report(&results, ReportFormat::Csv, SelectBy::F1Positive).unwrap(),
                        offdetect::eval::render_rows(&rows, ReportFormat::Csv).unwrap());
        prop_assert_eq!(rows.iter().filter(|r| r.best).count(), 1);
    }
}

fn fixture_result(i: usize) -> offdetect::eval::ExperimentResult {
    use offdetect::eval::{ConfusionMatrix, ExperimentResult, ExperimentSpec, MetricsReport};
    use offdetect::pipeline::ModelSpec;
    ExperimentResult {
        spec: ExperimentSpec {
            name: format!("m{i}"),
            model: ModelSpec::Gbdt {
                features: Default::default(),
                params: GbdtParams::default(),
            },
            fine_tuning: vec!["a".into(), "b, c".into()],
            validation: "v".into(),
            seed: 0,
        },
        confusion: ConfusionMatrix::default(),
        metrics: MetricsReport {
            accuracy: 0.0,
            precision: 0.5,
            recall: 0.25,
            f1_positive: 0.0,
            f1_macro: 0.125,
        },
        progress: vec![],
        train_size: 0,
    }
}
