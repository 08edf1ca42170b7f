use criterion::{black_box, criterion_group, criterion_main, Criterion};

use tablesim_bench::desk_scale_fixture;
use tablesim_core::eval::{sdcg, SdcgParams};
use tablesim_core::querygen::SessionStrategy;
use tablesim_core::simulator::{
    run_session, session_rng, ClickModel, CostModel, SessionParams, UserProfile,
};

fn bench_search(c: &mut Criterion) {
    let (data, index) = desk_scale_fixture();
    let query = format!("{} sig04x3", data.topics["T05"].topic_query);
    c.bench_function("search_top100_500docs", |b| {
        b.iter(|| black_box(index.search(black_box(&query), 100)))
    });
}

fn bench_index_build(c: &mut Criterion) {
    use tablesim_core::retrieval::{build_index, Bm25Params, FieldWeights};
    let (data, _) = desk_scale_fixture();
    c.bench_function("build_index_500docs", |b| {
        b.iter(|| {
            black_box(
                build_index(
                    &data.corpus,
                    &FieldWeights::default(),
                    Bm25Params::default(),
                )
                .unwrap(),
            )
        })
    });
}

fn bench_session(c: &mut Criterion) {
    let (data, index) = desk_scale_fixture();
    let topic = &data.topics["T05"];
    let params = SessionParams {
        index: &index,
        corpus: &data.corpus,
        retrieval_depth: 100,
        page_size: 10,
    };
    let profile = UserProfile {
        click_model: ClickModel::Oracle,
        browsing_depth: 10,
        max_queries: 10,
        ..UserProfile::default()
    };
    let variants = data.variants["T05"].variants.clone();
    c.bench_function("oracle_session_10_queries", |b| {
        b.iter(|| {
            let mut strategy = SessionStrategy::fixed(&topic.topic_query, variants.clone());
            let mut rng = session_rng(7, "T05", "bench");
            black_box(
                run_session(
                    topic,
                    &params,
                    &mut strategy,
                    &profile,
                    &CostModel::default(),
                    &mut rng,
                )
                .unwrap(),
            )
        })
    });
}

fn bench_sdcg(c: &mut Criterion) {
    let gains: Vec<Vec<f64>> = (0..10)
        .map(|q| (0..10).map(|i| ((q + i) % 3) as f64).collect())
        .collect();
    let params = SdcgParams::default();
    c.bench_function("sdcg_10x10", |b| {
        b.iter(|| black_box(sdcg(black_box(&gains), &params)))
    });
}

criterion_group!(
    benches,
    bench_search,
    bench_index_build,
    bench_session,
    bench_sdcg
);
criterion_main!(benches);
