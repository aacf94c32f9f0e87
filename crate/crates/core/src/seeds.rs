//! Derivation of independent deterministic random streams.
//!
//! Every stochastic stage owns a stream derived from the experiment seed and
//! its coordinates (scene, round, object), so concurrent execution and
//! re-runs reproduce serial results bit for bit.

/// SplitMix64 finalizer; decorrelates consecutive inputs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a base seed and a path of coordinates.
pub fn derive(base: u64, path: &[u64]) -> u64 {
    let mut state = mix(base);
    for &p in path {
        state = mix(state ^ mix(p.wrapping_add(0x517c_c1b7_2722_0a95)));
    }
    state
}
