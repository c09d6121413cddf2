//! Counter-based uniforms keyed by cube address.
//!
//! Every cube `I` gets a 64-bit key obtained by hashing the seed, the geometry
//! and the tuple ranks of `I` in order. A uniform is a hash of `(key, stream)`,
//! so any draw can be recomputed from its address alone and the order in
//! which cubes are visited never changes the output.

use crate::index::CubeIndex;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_SALT: u64 = 0xD1B5_4A32_D192_ED03;
const REPLICATE_SALT: u64 = 0x8CB9_2BA7_2F3D_8DD7;

/// SplitMix64 finalizer.
#[inline]
pub const fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn root_key(seed: u64, base: u32, dim: u32) -> u64 {
    let geometry = ((base as u64) << 32) | dim as u64;
    mix64(seed ^ mix64(geometry.wrapping_mul(GOLDEN)))
}

#[inline]
pub fn child_key(parent: u64, rank: u32) -> u64 {
    mix64(parent.rotate_left(17) ^ (rank as u64 + 1).wrapping_mul(GOLDEN))
}

pub fn key_of(seed: u64, index: &CubeIndex) -> u64 {
    index
        .tuple_ranks()
        .fold(root_key(seed, index.base(), index.dim()), child_key)
}

/// Uniform in `[0, 1)` with 53 random bits.
#[inline]
pub fn stream_uniform(key: u64, stream: u32) -> f64 {
    let h = mix64(key ^ mix64((stream as u64).wrapping_add(1).wrapping_mul(STREAM_SALT)));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Independent seed for replicate `r` of a run seeded with `seed`.
pub fn replicate_seed(seed: u64, r: u64) -> u64 {
    mix64(seed ^ mix64(r.wrapping_add(1).wrapping_mul(REPLICATE_SALT)))
}

/// Fisher–Yates shuffle of the tuple ranks `0..len` driven by streams
/// `1..len` of `key`: for `i = len-1` down to `1`, draw `u` from stream `i`
/// and swap positions `i` and `floor(u * (i + 1))`.
pub fn shuffled_ranks(key: u64, len: u32, out: &mut Vec<u32>) {
    out.clear();
    out.extend(0..len);
    for i in (1..len).rev() {
        let u = stream_uniform(key, i);
        let j = ((u * (i + 1) as f64) as u32).min(i);
        out.swap(i as usize, j as usize);
    }
}
