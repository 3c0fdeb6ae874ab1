//! Counter-based deterministic RNG.
//!
//! Every random draw in the crate is a pure function of a 64-bit key and a
//! counter. Keys are derived from the global experiment seed plus a stream
//! name, so e.g. parameter initialization for a layer called `f_p.1.weight`
//! is identical across model variants that share the layer, and dropout
//! masks can be replayed from (seed, block, step) without storing them.

/// FNV-1a over the name bytes, used to fold stream names into keys.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Derive a stream key from a seed and a path of name parts.
pub fn stream_key(seed: u64, parts: &[&str]) -> u64 {
    let mut key = mix(seed ^ 0x6a09_e667_f3bc_c908);
    for p in parts {
        key = mix(key ^ fnv1a(p.as_bytes()));
    }
    key
}

/// Fold an integer (epoch, step, row index) into an existing key.
pub fn key_with(key: u64, extra: u64) -> u64 {
    mix(key ^ extra.wrapping_mul(GAMMA))
}

/// The i-th raw output of the stream with the given key.
pub fn u64_at(key: u64, i: u64) -> u64 {
    mix(key.wrapping_add(i.wrapping_add(1).wrapping_mul(GAMMA)))
}

/// The i-th uniform draw in [0, 1).
pub fn unit_at(key: u64, i: u64) -> f64 {
    (u64_at(key, i) >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Sequential view over a keyed stream.
#[derive(Debug, Clone)]
pub struct Stream {
    key: u64,
    counter: u64,
}

impl Stream {
    pub fn new(seed: u64, parts: &[&str]) -> Self {
        Stream {
            key: stream_key(seed, parts),
            counter: 0,
        }
    }

    pub fn from_key(key: u64) -> Self {
        Stream { key, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = u64_at(self.key, self.counter);
        self.counter += 1;
        v
    }

    /// Uniform in [0, 1).
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform in [lo, hi).
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_unit()
    }

    /// Standard normal via Box-Muller (two uniforms per draw).
    pub fn next_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_unit(); // (0, 1]
        let u2 = self.next_unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn next_bool(&mut self, p: f64) -> bool {
        self.next_unit() < p
    }

    /// Uniform integer in [0, n).
    pub fn next_below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
