//! Randomized property tests over the library invariants.

use proptest::prelude::*;

use lexkit::analyzer::{analyze, Analyzer, AnalyzerConfig};
use lexkit::eval::{parse_qrels, parse_run, write_qrels, write_run, Qrels, Run};
use lexkit::porter::stem;
use lexkit::rerank::parse_permutation;
use lexkit::scoring::{dequantize_len, quantize_len};

proptest! {
    /// Analysis distributes over concatenation with a separator.
    #[test]
    fn analyze_concatenation(a in "[a-zA-Z0-9' ]{0,40}", b in "[a-zA-Z0-9' ]{0,40}") {
        let config = AnalyzerConfig::default();
        let analyzer = Analyzer::new(config);
        let joined = format!("{a} {b}");
        let mut expected = analyzer.analyze(&a).terms;
        expected.extend(analyzer.analyze(&b).terms);
        prop_assert_eq!(analyzer.analyze(&joined).terms, expected);
    }

    /// Analysis emits non-empty lowercase tokens under the default config.
    #[test]
    fn analyze_output_shape(text in ".{0,80}") {
        let config = AnalyzerConfig::default();
        for term in analyze(&text, &config).terms {
            prop_assert!(!term.is_empty());
            prop_assert_eq!(term.to_lowercase(), term.clone());
        }
    }

    /// Stemming never grows a word and leaves 1-2 letter words alone.
    #[test]
    fn stem_never_grows(word in "[a-z]{1,20}") {
        let stemmed = stem(&word);
        prop_assert!(stemmed.len() <= word.len());
        if word.len() <= 2 {
            prop_assert_eq!(stemmed, word);
        }
    }

    /// Length quantization is monotone and within tolerance everywhere.
    #[test]
    fn quantize_monotone(a in 0u32..1 << 25, b in 0u32..1 << 25) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(quantize_len(lo) <= quantize_len(hi));
        let capped = lo.min((1 << 24) - 1);
        let back = dequantize_len(quantize_len(lo));
        if capped <= 63 {
            prop_assert_eq!(back, capped);
        } else {
            let rel = (back as f64 - capped as f64).abs() / capped as f64;
            prop_assert!(rel <= 0.07, "relative error {} at {}", rel, capped);
        }
    }

    /// parse_permutation yields a bijection on 0..n for any input string.
    #[test]
    fn permutation_total(response in ".{0,100}", n in 1usize..40) {
        let mut perm = parse_permutation(&response, n);
        perm.sort_unstable();
        prop_assert_eq!(perm, (0..n).collect::<Vec<_>>());
    }

    /// Runs survive a write/parse round trip (scores at output precision).
    #[test]
    fn run_round_trip(lists in proptest::collection::vec(
        ("[a-z]{1,8}", proptest::collection::vec("[A-Za-z0-9_.-]{1,12}", 1..20)),
        1..5,
    )) {
        // distinct qids, distinct doc ids per query
        let mut seen_q = std::collections::HashSet::new();
        let mut ranked = Vec::new();
        for (qid, docs) in lists {
            if !seen_q.insert(qid.clone()) {
                continue;
            }
            let uniq: std::collections::BTreeSet<String> = docs.into_iter().collect();
            let scored: Vec<(String, f64)> = uniq
                .into_iter()
                .enumerate()
                .map(|(i, d)| (d, 1000.0 - i as f64))
                .collect();
            ranked.push((qid, scored));
        }
        prop_assume!(!ranked.is_empty());
        let run = Run::from_ranked_lists(ranked, "tag");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.txt");
        let mut buf = Vec::new();
        write_run(&run, &mut buf).unwrap();
        std::fs::write(&path, &buf).unwrap();
        let parsed = parse_run(&path).unwrap();
        prop_assert_eq!(parsed.entries, run.entries);
    }

    /// Qrels survive a write/parse round trip.
    #[test]
    fn qrels_round_trip(pairs in proptest::collection::vec(
        ("[a-z]{1,6}", "[A-Za-z0-9_.-]{1,10}", 0u32..4),
        0..30,
    )) {
        let mut grades = std::collections::HashMap::new();
        for (q, d, g) in pairs {
            grades.insert((q, d), g);
        }
        let qrels = Qrels { grades };

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qrels.txt");
        let mut buf = Vec::new();
        write_qrels(&qrels, &mut buf).unwrap();
        std::fs::write(&path, &buf).unwrap();
        prop_assert_eq!(parse_qrels(&path).unwrap(), qrels);
    }
}
