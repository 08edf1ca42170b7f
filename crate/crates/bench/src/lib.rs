//! Shared fixtures for the criterion benchmarks.

use tablesim_core::retrieval::{build_index, Bm25Params, FieldWeights, Index};
use tablesim_core::synth::{generate, SynthData, SynthSpec};

/// The default desk-scale corpus (500 tables, 30 topics) plus its index.
pub fn desk_scale_fixture() -> (SynthData, Index) {
    let data = generate(&SynthSpec::default()).expect("synth generation");
    let index = build_index(
        &data.corpus,
        &FieldWeights::default(),
        Bm25Params::default(),
    )
    .expect("index build");
    (data, index)
}
