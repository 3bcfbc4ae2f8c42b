//! Stable seed derivation.
//!
//! Every stochastic quantity in the crate is keyed by a master seed plus a
//! label (qubit id, trial index, purpose tag) so results never depend on
//! iteration order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Derives a child seed from `master` and an arbitrary byte label.
///
/// The mapping is SHA-256 over `master.to_le_bytes() || label`, truncated to
/// the first eight bytes, so it is stable across platforms and releases.
pub fn derive_seed(master: u64, label: &[u8]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label);
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

/// Seed for a named purpose (`"fab"`, `"tune"`, ...) of one qubit.
pub fn qubit_seed(master: u64, purpose: &str, qubit_id: &str) -> u64 {
    let mut label = Vec::with_capacity(purpose.len() + qubit_id.len() + 1);
    label.extend_from_slice(purpose.as_bytes());
    label.push(0);
    label.extend_from_slice(qubit_id.as_bytes());
    derive_seed(master, &label)
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Generator for Monte Carlo trial `index`: same key as the master seed, one
/// ChaCha stream per trial.
pub fn trial_rng(master: u64, index: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_stable_and_label_sensitive() {
        assert_eq!(derive_seed(7, b"q1"), derive_seed(7, b"q1"));
        assert_ne!(derive_seed(7, b"q1"), derive_seed(7, b"q2"));
        assert_ne!(derive_seed(7, b"q1"), derive_seed(8, b"q1"));
        assert_ne!(qubit_seed(1, "fab", "q1"), qubit_seed(1, "tune", "q1"));
        // purpose/id boundary is delimited
        assert_ne!(qubit_seed(1, "ab", "c"), qubit_seed(1, "a", "bc"));
    }

    #[test]
    fn trial_streams_are_independent_of_each_other() {
        let a: u64 = trial_rng(3, 0).random();
        let b: u64 = trial_rng(3, 1).random();
        let a2: u64 = trial_rng(3, 0).random();
        assert_eq!(a, a2);
        assert_ne!(a, b);
    }
}
