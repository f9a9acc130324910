//! Counter-based splitmix64 stream. Every randomized experiment in the
//! crate draws from (seed, counter) pairs, so runs are reproducible from
//! the seed alone and no generator state threads through the code.

#[derive(Debug, Clone)]
pub struct SplitMix {
    seed: u64,
    counter: u64,
}

/// The raw mix: value of stream `seed` at position `ctr`.
pub fn splitmix64(seed: u64, ctr: u64) -> u64 {
    let mut z = seed.wrapping_add(ctr.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix {
    pub fn new(seed: u64) -> Self {
        SplitMix { seed, counter: 0 }
    }

    /// Independent substream: offsets the seed by a mixed tag.
    pub fn fork(&self, tag: u64) -> SplitMix {
        SplitMix::new(splitmix64(self.seed, tag ^ 0xD1B5_4A32_D192_ED03))
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = splitmix64(self.seed, self.counter);
        self.counter += 1;
        v
    }

    /// Uniform in {0, 1, …, n-1} by modulo; fine for the small n used here.
    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    /// Uniform in (0, 1].
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 1.0) / (1u64 << 53) as f64
    }

    /// Standard normal pair (Box-Muller).
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = 2.0 * std::f64::consts::PI * u2;
        (r * t.cos(), r * t.sin())
    }

    /// Standard complex normal (independent N(0,1) real and imaginary parts).
    pub fn complex_normal(&mut self) -> num_complex::Complex64 {
        let (re, im) = self.normal_pair();
        num_complex::Complex64::new(re, im)
    }

    /// Word of `len` letters over {0, …, alphabet-1}.
    pub fn letters(&mut self, alphabet: u64, len: usize) -> Vec<usize> {
        (0..len).map(|_| self.below(alphabet) as usize).collect()
    }
}
