use super::EmbeddingProvider;

/// Feature-hashing embedder: each token becomes a signed one-hot vector.
///
/// The slot and sign come from a 64-bit FNV-1a hash of the provider seed
/// followed by the token's UTF-8 bytes, so vectors are identical across
/// runs and platforms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashedEmbedder {
    dim: usize,
    seed: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a_extend(state: u64, bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(state, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    fnv1a_extend(fnv1a_extend(FNV_OFFSET, &seed.to_le_bytes()), bytes)
}

// splitmix64 finalizer; FNV's low bits mix poorly
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl HashedEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim >= 1, "hashed embedder needs dim >= 1");
        Self { dim, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Slot and sign of a token.
    pub fn slot(&self, token: &str) -> (usize, f64) {
        let h = mix(fnv1a(self.seed, token.as_bytes()));
        let index = (h % self.dim as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        (index, sign)
    }
}

impl EmbeddingProvider for HashedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_claim(&self, tokens: &[String]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        if tokens.is_empty() {
            return v;
        }
        for t in tokens {
            let (i, s) = self.slot(t);
            v[i] += s;
        }
        let n = tokens.len() as f64;
        v.iter_mut().for_each(|x| *x /= n);
        v
    }
}
