// Generated from `lambda_sweep(SWEEP_SEED, SWEEP_SAMPLES, SWEEP_MAX_WORDS)` and
// `n0_from_sweep`; the `constants_match_sweep` test regenerates and compares.

pub const SWEEP_SEED: u64 = 20;
pub const SWEEP_SAMPLES: usize = 500;
pub const SWEEP_MAX_WORDS: usize = 60;
pub const N0: usize = 4;
pub const LAMBDA_N0: f64 = 0.26666666666666705;
