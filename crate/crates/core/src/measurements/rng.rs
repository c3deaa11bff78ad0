use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// One step of a derivation path.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Text(String),
    Index(u64),
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::Text(s.to_string())
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label::Text(s)
    }
}

impl From<u64> for Label {
    fn from(i: u64) -> Self {
        Label::Index(i)
    }
}

impl From<usize> for Label {
    fn from(i: usize) -> Self {
        Label::Index(i as u64)
    }
}

/// A reproducible source of randomness addressed by a root seed and a path
/// of labels. Streams with different paths are independent for all practical
/// purposes; the same seed and path always yield the same sequence, on every
/// platform.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    path: Vec<Label>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            path: Vec::new(),
        }
    }

    pub fn child(&self, label: impl Into<Label>) -> RngStream {
        let mut path = self.path.clone();
        path.push(label.into());
        RngStream {
            seed: self.seed,
            path,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[Label] {
        &self.path
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha20Rng {
        let mut h = Sha256::new();
        h.update(b"ledgerdp/rng/v1");
        h.update(self.seed.to_le_bytes());
        for label in &self.path {
            match label {
                Label::Text(s) => {
                    h.update([0u8]);
                    h.update((s.len() as u64).to_le_bytes());
                    h.update(s.as_bytes());
                }
                Label::Index(i) => {
                    h.update([1u8]);
                    h.update(i.to_le_bytes());
                }
            }
        }
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha20Rng::from_seed(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn same_path_same_sequence() {
        let a = RngStream::new(42).child("q").child(3u64);
        let b = RngStream::new(42).child("q").child(3u64);
        assert_eq!(a.rng().next_u64(), b.rng().next_u64());
    }

    #[test]
    fn paths_are_distinguished() {
        let root = RngStream::new(42);
        let draws: Vec<u64> = [
            root.clone(),
            root.child("a"),
            root.child("b"),
            root.child(0u64),
            root.child("0"),
            root.child("a").child("b"),
            root.child("ab"),
            RngStream::new(43),
        ]
        .iter()
        .map(|s| s.rng().next_u64())
        .collect();
        for i in 0..draws.len() {
            for j in 0..i {
                assert_ne!(draws[i], draws[j], "{i} vs {j}");
            }
        }
    }
}
