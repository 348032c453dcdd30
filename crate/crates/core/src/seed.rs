/// Derive a child seed from a master seed and an index (splitmix64 step).
///
/// Grid points, k-means restarts and synthetic draws all seed their RNGs
/// through this so that concurrent evaluation order cannot change results.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
