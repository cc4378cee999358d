/// SplitMix64 finalizer.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines two seeds into one well-mixed seed.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    splitmix(splitmix(a) ^ b.rotate_left(32))
}

/// Seed of trial `index` within an experiment. Independent of the scenario
/// mode so every mode sees the same launch timings.
pub fn trial_seed(master_seed: u64, index: usize) -> u64 {
    mix_seed(master_seed, index as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_per_trial_and_master() {
        let a: Vec<u64> = (0..100).map(|i| trial_seed(42, i)).collect();
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), a.len());
        assert_ne!(trial_seed(42, 0), trial_seed(43, 0));
        assert_eq!(trial_seed(42, 7), trial_seed(42, 7));
    }
}
