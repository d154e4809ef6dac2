//! Fixtures shared by the benchmarks.

use selfish_core::{build_base_model, MiningModel, MiningParams};

pub const ALPHA: f64 = 0.35;
pub const GAMMA: f64 = 0.5;

pub fn params() -> MiningParams {
    MiningParams::standard(ALPHA, GAMMA).expect("fixture parameters are valid")
}

pub fn model(truncation: u32) -> MiningModel {
    build_base_model(&params(), truncation).expect("fixture model builds")
}
