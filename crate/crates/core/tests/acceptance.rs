//! Acceptance suite: ten criteria covering formula oracles, behavioral
//! orderings on synthetic corpora, calibration, and reproducibility.
//! Each test prints one `[PASS]` line with the measured values.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{
    brute_force_bm25, brute_force_sdcg, collect_tree, final_sdcg, title_corpus, SynthHarness,
};
use tablesim_core::corpus::{Corpus, Modality, Table, TermSuggestions, TopicQrels};
use tablesim_core::eval::{
    mean_curve, read_curve_csv, sdcg, sdcg_curve, time_gain_curve, SdcgParams,
};
use tablesim_core::experiment::{
    run_experiment, sdcg_checkpoints, time_checkpoints, ExperimentConfig, GridAxes, InputPaths,
    ProfileBase,
};
use tablesim_core::querygen::{
    extract_keywords, FileSuggester, IdfFilter, StopwordList, StrategyKind,
};
use tablesim_core::retrieval::{build_index, tokenize, Bm25Params, FieldWeights};
use tablesim_core::simulator::{
    click_decision, run_session, session_rng, ClickModel, CostModel, SessionParams, UserProfile,
};
use tablesim_core::synth::{generate, write_files, SynthSpec};

/// Criterion 1: sDCG matches an independent brute-force evaluator on 1000
/// random sessions within 1e-12 relative error, in under 5 seconds.
#[test]
fn criterion_01_sdcg_oracle_equivalence() {
    let start = Instant::now();
    let params = SdcgParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let queries = rng.gen_range(1..=5);
        let gains: Vec<Vec<f64>> = (0..queries)
            .map(|_| {
                let ranks = rng.gen_range(0..=10);
                (0..ranks).map(|_| rng.gen_range(0..=2) as f64).collect()
            })
            .collect();
        let got = sdcg(&gains, &params);
        let expected = brute_force_sdcg(&gains, params.doc_log_base, params.query_log_base);
        if expected == 0.0 {
            assert_eq!(got, 0.0);
        } else {
            let rel = ((got - expected) / expected).abs();
            worst = worst.max(rel);
            assert!(rel < 1e-12, "relative error {rel}");
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!("[PASS] criterion 1: sdcg oracle equivalence, worst rel err {worst:.2e}, {elapsed:?}");
}

/// Criterion 2: hand-checked sDCG constants at b=2, bq=4.
#[test]
fn criterion_02_hand_checked_constants() {
    let params = SdcgParams::default();
    let first = sdcg(&[vec![1.0, 0.0, 2.0]], &params);
    assert!((first - 1.7737).abs() <= 1e-4, "got {first}");
    let second = sdcg(&[vec![], vec![1.0, 0.0, 2.0]], &params);
    assert!((second - 1.1825).abs() <= 1e-4, "got {second}");
    println!("[PASS] criterion 2: sdcg([1,0,2])={first:.6}, as query 2 ={second:.6}");
}

/// Criterion 3: search ordering equals per-document brute-force scoring on
/// 100 random small corpora, in under 10 seconds.
#[test]
fn criterion_03_bm25_brute_force_oracle() {
    let start = Instant::now();
    let params = Bm25Params::default();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for trial in 0..100 {
        let n_docs = rng.gen_range(1..=20);
        let pairs: Vec<(String, String)> = (0..n_docs)
            .map(|i| {
                let len = rng.gen_range(1..=15);
                let text: Vec<String> = (0..len)
                    .map(|_| format!("w{}", rng.gen_range(0..30)))
                    .collect();
                (format!("d{i:02}"), text.join(" "))
            })
            .collect();
        let corpus = title_corpus(&pairs);
        let index = build_index(&corpus, &FieldWeights::default(), params).unwrap();
        let query: Vec<String> = (0..rng.gen_range(1..=5))
            .map(|_| format!("w{}", rng.gen_range(0..30)))
            .collect();

        let token_docs: Vec<(String, Vec<String>)> = pairs
            .iter()
            .map(|(id, text)| (id.clone(), tokenize(text)))
            .collect();
        let expected = brute_force_bm25(&token_docs, &query, params.k1, params.b);
        let ranking = index.search(&query.join(" "), n_docs);
        let got: Vec<(String, f64)> = ranking
            .entries
            .iter()
            .map(|e| (e.table_id.clone(), e.score))
            .collect();
        assert_eq!(got, expected, "trial {trial} diverged");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("[PASS] criterion 3: bm25 ordering matches brute force on 100 corpora, {elapsed:?}");
}

/// Criterion 4: the keyword filter excludes idf < 0.5 terms and always
/// excludes stopwords, on the N=4 toy lexicon.
#[test]
fn criterion_04_keyword_filter() {
    // N=4: "common" df=3 (idf ln(4/3)=0.2877), "rare" df=1 (idf ln4=1.3863),
    // "the" df=1 would be kept by idf but is a stopword.
    let corpus = title_corpus(&[
        ("d1".to_string(), "common rare the".to_string()),
        ("d2".to_string(), "common other".to_string()),
        ("d3".to_string(), "common other".to_string()),
        ("d4".to_string(), "other filler".to_string()),
    ]);
    let index = build_index(&corpus, &FieldWeights::default(), Bm25Params::default()).unwrap();
    let lex = index.lexicon();
    assert!((lex.idf("common") - 0.2877).abs() < 1e-4);
    assert!((lex.idf("rare") - 1.3863).abs() < 1e-4);

    let suggestions = TermSuggestions {
        terms: [(
            "d1".to_string(),
            vec!["common".to_string(), "rare".to_string(), "the".to_string()],
        )]
        .into_iter()
        .collect(),
    };
    let suggester = FileSuggester::new(&suggestions);
    let keywords = extract_keywords(
        [corpus.get("d1").unwrap()],
        &suggester,
        lex,
        &StopwordList::builtin(),
        IdfFilter::default(),
    );
    assert!(
        !keywords.contains("common"),
        "idf 0.2877 term must be excluded"
    );
    assert!(keywords.contains("rare"), "idf 1.3863 term must be kept");
    assert!(!keywords.contains("the"), "stopwords are always excluded");
    println!("[PASS] criterion 4: keyword filter excludes idf<0.5 and stopwords, keeps rare terms");
}

/// Criterion 5: mean final sDCG over 30 topics x 20 seeds orders the
/// strategies d2q_feedback >= d2q >= static, with feedback beating static
/// by at least 5%, in under 2 minutes.
#[test]
fn criterion_05_strategy_ordering() {
    let start = Instant::now();
    let harness = SynthHarness::new(&SynthSpec::default());
    let params = SdcgParams::default();
    let profile = UserProfile {
        click_model: ClickModel::ModalityProbabilistic,
        p_click_rel: 0.9,
        p_click_nonrel: 0.3,
        browsing_depth: 10,
        max_queries: 10,
        ..UserProfile::default()
    };
    let costs = CostModel::default();

    let mean_for = |kind: StrategyKind, tag: &str| -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for seed in 0..20u64 {
            for topic_id in harness.topic_ids() {
                let log = harness.run(&topic_id, kind, None, &profile, &costs, seed, tag);
                total += final_sdcg(&log, &params);
                count += 1;
            }
        }
        total / count as f64
    };

    let static_mean = mean_for(StrategyKind::Static, "c5-static");
    let d2q_mean = mean_for(StrategyKind::D2q, "c5-d2q");
    let feedback_mean = mean_for(StrategyKind::D2qFeedback, "c5-feedback");

    assert!(
        feedback_mean >= d2q_mean,
        "feedback {feedback_mean} < d2q {d2q_mean}"
    );
    assert!(
        d2q_mean >= static_mean,
        "d2q {d2q_mean} < static {static_mean}"
    );
    assert!(
        feedback_mean >= 1.05 * static_mean,
        "feedback {feedback_mean} not 5% above static {static_mean}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    println!(
        "[PASS] criterion 5: mean sdcg feedback {feedback_mean:.3} >= d2q {d2q_mean:.3} >= static {static_mean:.3}, {elapsed:?}"
    );
}

/// Criterion 6: with 5 static variants the mean time-gain curve is exactly
/// constant after the last static action, while d2q_feedback keeps growing
/// at a later checkpoint under the same generous budget.
#[test]
fn criterion_06_variant_exhaustion_plateau() {
    let harness = SynthHarness::new(&SynthSpec::default());
    let budget = 2000.0;
    let profile = UserProfile {
        click_model: ClickModel::Oracle,
        browsing_depth: 10,
        max_queries: 30,
        time_budget: Some(budget),
        ..UserProfile::default()
    };
    let costs = CostModel::default();

    let mut static_curves = Vec::new();
    let mut feedback_curves = Vec::new();
    let mut static_end = 0.0f64;
    let mut max_elapsed = 0.0f64;
    for topic_id in harness.topic_ids() {
        let static_log = harness.run(
            &topic_id,
            StrategyKind::Static,
            Some(5),
            &profile,
            &costs,
            13,
            "c6-static",
        );
        let last_t = static_log.actions.last().unwrap().t;
        static_end = static_end.max(last_t);
        max_elapsed = max_elapsed.max(last_t);
        static_curves.push(time_gain_curve(&static_log).unwrap());

        let feedback_log = harness.run(
            &topic_id,
            StrategyKind::D2qFeedback,
            None,
            &profile,
            &costs,
            13,
            "c6-feedback",
        );
        max_elapsed = max_elapsed.max(feedback_log.actions.last().unwrap().t);
        feedback_curves.push(time_gain_curve(&feedback_log).unwrap());
    }

    let checkpoints = time_checkpoints(10.0, Some(budget), max_elapsed);
    let static_mean = mean_curve(&static_curves, &checkpoints).unwrap();
    let feedback_mean = mean_curve(&feedback_curves, &checkpoints).unwrap();

    let first_after = checkpoints
        .iter()
        .position(|&x| x >= static_end)
        .expect("budget horizon covers the static end");
    let plateau = static_mean.points()[first_after].1;
    for point in &static_mean.points()[first_after..] {
        assert_eq!(
            point.1, plateau,
            "static mean moved after the last session action at x={}",
            point.0
        );
    }

    let grew_later = feedback_mean.points()[first_after.max(1)..]
        .windows(2)
        .any(|w| w[1].0 > static_end && w[1].1 > w[0].1);
    assert!(grew_later, "feedback mean never grew after t={static_end}");
    println!(
        "[PASS] criterion 6: static plateau at {plateau:.3} after t={static_end}, feedback keeps growing"
    );
}

/// Criterion 7: oracle user with fixed queries — final sDCG non-decreasing
/// in browsing depth on every topic, mean curves pointwise ordered.
#[test]
fn criterion_07_depth_ordering() {
    let harness = SynthHarness::new(&SynthSpec::default());
    let params = SdcgParams::default();
    let costs = CostModel::default();
    let depths = [5usize, 10, 20];

    let mut curves_by_depth: Vec<Vec<tablesim_core::eval::GainCurve>> =
        vec![Vec::new(); depths.len()];
    for topic_id in harness.topic_ids() {
        let mut finals = Vec::new();
        for (d, &depth) in depths.iter().enumerate() {
            let profile = UserProfile {
                click_model: ClickModel::Oracle,
                browsing_depth: depth,
                max_queries: 10,
                ..UserProfile::default()
            };
            let log = harness.run(
                &topic_id,
                StrategyKind::Static,
                None,
                &profile,
                &costs,
                5,
                "c7-depth",
            );
            finals.push(final_sdcg(&log, &params));
            curves_by_depth[d].push(sdcg_curve(&log, &params).unwrap());
        }
        assert!(
            finals[0] <= finals[1] && finals[1] <= finals[2],
            "topic {topic_id}: final sdcg not monotone in depth: {finals:?}"
        );
    }

    let checkpoints = sdcg_checkpoints(10);
    let means: Vec<_> = curves_by_depth
        .iter()
        .map(|curves| mean_curve(curves, &checkpoints).unwrap())
        .collect();
    for (i, &x) in checkpoints.iter().enumerate() {
        let (d5, d10, d20) = (
            means[0].points()[i].1,
            means[1].points()[i].1,
            means[2].points()[i].1,
        );
        assert!(
            d5 <= d10 && d10 <= d20,
            "mean curves not ordered at query {x}: {d5} / {d10} / {d20}"
        );
    }
    println!(
        "[PASS] criterion 7: depth ordering holds on all topics; final means {:.3} <= {:.3} <= {:.3}",
        means[0].final_value(),
        means[1].final_value(),
        means[2].final_value()
    );
}

/// Criterion 8: probabilistic clicks at p=0.7 hit 0.7 +- 0.01 over 1e5
/// seeded decisions.
#[test]
fn criterion_08_click_frequency_calibration() {
    let profile = UserProfile {
        click_model: ClickModel::ModalityProbabilistic,
        p_click_rel: 0.7,
        p_click_nonrel: 0.3,
        ..UserProfile::default()
    };
    let mut rng = session_rng(88, "calibration", "c8");
    let n = 100_000;
    let clicks = (0..n)
        .filter(|_| click_decision(true, 1, &profile, &mut rng))
        .count();
    let rate = clicks as f64 / n as f64;
    assert!((rate - 0.7).abs() <= 0.01, "rate {rate}");
    println!("[PASS] criterion 8: click rate {rate:.4} within 0.7 +- 0.01");
}

/// Criterion 9: (a) a table duplicated across two rankings adds no extra
/// gain; (b) identical config and seed give byte-identical experiment
/// directories across two runs and across parallelism degrees 1 and 8.
#[test]
fn criterion_09_dedup_and_determinism() {
    // (a) same table retrieved by both queries, judged relevant twice.
    let corpus = Corpus::from_tables(vec![Table {
        id: "d1".to_string(),
        page_title: "topic words".to_string(),
        ..Table::default()
    }])
    .unwrap();
    let index = build_index(&corpus, &FieldWeights::default(), Bm25Params::default()).unwrap();
    let params = SessionParams {
        index: &index,
        corpus: &corpus,
        retrieval_depth: 100,
        page_size: 10,
    };
    let mut topic = TopicQrels {
        topic_id: "T1".to_string(),
        topic_query: "topic".to_string(),
        ..TopicQrels::default()
    };
    topic.table_grades.insert("d1".to_string(), 2);
    let profile = UserProfile {
        click_model: ClickModel::Oracle,
        browsing_depth: 5,
        max_queries: 2,
        ..UserProfile::default()
    };
    let run_with_queries = |max_queries: usize| {
        let mut profile = profile.clone();
        profile.max_queries = max_queries;
        let mut strategy = tablesim_core::querygen::SessionStrategy::fixed(
            "topic",
            vec!["topic words".to_string()],
        );
        let mut rng = session_rng(9, "T1", "c9a");
        run_session(
            &topic,
            &params,
            &mut strategy,
            &profile,
            &CostModel::default(),
            &mut rng,
        )
        .unwrap()
    };
    let single = run_with_queries(1);
    let double = run_with_queries(2);
    assert_eq!(single.total_gain, 2);
    assert_eq!(
        double.total_gain, single.total_gain,
        "duplicate ranking entry changed cumulative gain"
    );

    // (b) byte-identical experiment directories.
    let spec = SynthSpec {
        num_topics: 10,
        background_tables: 20,
        ..SynthSpec::default()
    };
    let data = generate(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_files(&data, &dir.path().join("inputs")).unwrap();
    let make_config = |out: std::path::PathBuf| ExperimentConfig {
        inputs: InputPaths {
            corpus: paths.corpus.clone(),
            topics: paths.topics.clone(),
            table_qrels: paths.table_qrels.clone(),
            modality_qrels: paths.modality_qrels.clone(),
            query_variants: Some(paths.query_variants.clone()),
            term_suggestions: None,
            stopwords: None,
        },
        strategy: StrategyKind::D2qFeedback,
        seed: 23,
        output: out,
        grid: GridAxes {
            click_models: vec![ClickModel::ModalityProbabilistic],
            p_click: vec![(0.9, 0.3), (0.5, 0.5)],
            modalities: vec![Modality::PageTitle],
            depths: vec![10],
        },
        profile: ProfileBase {
            max_queries: 5,
            ..ProfileBase::default()
        },
        ..serde_json::from_value(serde_json::json!({
            "inputs": {"corpus": "x", "topics": "x", "table_qrels": "x", "modality_qrels": "x"},
            "strategy": "d2q_feedback",
            "seed": 0,
            "output": "x"
        }))
        .unwrap()
    };

    let out1 = dir.path().join("run-serial");
    let out2 = dir.path().join("run-parallel");
    let out3 = dir.path().join("run-again");
    run_experiment(&make_config(out1.clone()), Some(1)).unwrap();
    run_experiment(&make_config(out2.clone()), Some(8)).unwrap();
    run_experiment(&make_config(out3.clone()), Some(8)).unwrap();

    let tree1 = collect_tree(&out1);
    let tree2 = collect_tree(&out2);
    let tree3 = collect_tree(&out3);
    assert_eq!(tree1, tree2, "parallelism 1 vs 8 changed output bytes");
    assert_eq!(tree2, tree3, "two identical runs diverged");
    assert!(tree1.len() > 4);
    println!(
        "[PASS] criterion 9: dedup holds; {} files byte-identical across runs and parallelism 1/8",
        tree1.len()
    );
}

/// Criterion 10: the six-cell click grid over 30 synthetic topics completes
/// in under 5 minutes and every cell's curve CSVs reload cleanly.
#[test]
fn criterion_10_click_grid_sweep() {
    let start = Instant::now();
    let data = generate(&SynthSpec::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_files(&data, &dir.path().join("inputs")).unwrap();
    let out = dir.path().join("exp");

    let config = ExperimentConfig {
        inputs: InputPaths {
            corpus: paths.corpus.clone(),
            topics: paths.topics.clone(),
            table_qrels: paths.table_qrels.clone(),
            modality_qrels: paths.modality_qrels.clone(),
            query_variants: None,
            term_suggestions: None,
            stopwords: None,
        },
        strategy: StrategyKind::D2qFeedback,
        seed: 42,
        output: out.clone(),
        grid: GridAxes {
            click_models: vec![ClickModel::ModalityProbabilistic],
            p_click: vec![
                (0.6, 0.3),
                (0.7, 0.3),
                (0.8, 0.3),
                (0.9, 0.3),
                (0.5, 0.5),
                (1.0, 0.0),
            ],
            modalities: vec![Modality::PageTitle],
            depths: vec![10],
        },
        profile: ProfileBase {
            max_queries: 10,
            ..ProfileBase::default()
        },
        ..serde_json::from_value(serde_json::json!({
            "inputs": {"corpus": "x", "topics": "x", "table_qrels": "x", "modality_qrels": "x"},
            "strategy": "d2q_feedback",
            "seed": 0,
            "output": "x"
        }))
        .unwrap()
    };

    let report = run_experiment(&config, None).unwrap();
    assert_eq!(report.cell_ids.len(), 6, "expected the six-cell click grid");
    let unique: BTreeSet<&String> = report.cell_ids.iter().collect();
    assert_eq!(unique.len(), 6);

    let mut csvs = 0;
    for id in &report.cell_ids {
        let cell_dir = out.join("cells").join(id);
        let logs = std::fs::read_dir(cell_dir.join("logs")).unwrap().count();
        assert_eq!(logs, 30, "cell {id} should hold one log per topic");
        for csv in ["sdcg_mean.csv", "timegain_mean.csv"] {
            let stats = read_curve_csv(&cell_dir.join(csv)).unwrap();
            assert!(!stats.is_empty(), "{id}/{csv} is empty");
            csvs += 1;
        }
    }
    assert_eq!(csvs, 12);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!(
        "[PASS] criterion 10: 6-cell sweep over 30 topics in {elapsed:?}, 12 curve CSVs reload cleanly"
    );
}
