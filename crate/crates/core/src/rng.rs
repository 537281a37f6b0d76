//! Counter-based random streams.
//!
//! Every consumer draws from a ChaCha8 keystream selected by
//! `(seed, purpose)` for the key and a 64-bit stream id derived from the
//! spacetime coordinate it serves. Draws are therefore independent of
//! evaluation order and thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    InitialCondition,
    KMeansSeeding,
    Decode,
    Forecast,
    Test,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::InitialCondition => 0x4c43_5349_4e49_5431,
            Purpose::KMeansSeeding => 0x4c43_534b_4d45_414e,
            Purpose::Decode => 0x4c43_5344_4543_4f44,
            Purpose::Forecast => 0x4c43_5346_4f52_4543,
            Purpose::Test => 0x4c43_5354_4553_5431,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for the whole of one purpose (stream id 0).
pub fn stream(seed: u64, purpose: Purpose) -> ChaCha8Rng {
    point_stream(seed, purpose, 0, 0)
}

/// Stream keyed by a spacetime coordinate. `t` and `r` must fit in 32 bits.
pub fn point_stream(seed: u64, purpose: Purpose, t: usize, r: usize) -> ChaCha8Rng {
    debug_assert!(t <= u32::MAX as usize && r <= u32::MAX as usize);
    let mut state = seed ^ purpose.tag();
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(((t as u64) << 32) | r as u64);
    rng
}

/// First uniform `[0, 1)` draw of a point stream.
pub fn point_uniform(seed: u64, purpose: Purpose, t: usize, r: usize) -> f64 {
    point_stream(seed, purpose, t, r).random::<f64>()
}

/// Inverse-CDF sample from a PMF given a uniform draw `u` in `[0, 1)`.
///
/// Zero-mass entries are never returned. If rounding leaves `u` above the
/// accumulated mass, the last entry with positive mass is returned.
pub fn sample_pmf(pmf: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in pmf.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}
