//! Counter-based sample RNG: every sample's randomness is derived from
//! (master_seed, stream_id, salt, sample_index) alone, so parallel and
//! serial runs produce identical ensembles.

/// Distinct salts keep the operations' streams disjoint even when the
/// caller reuses one seed everywhere.
pub(crate) const SALT_TAU: u64 = 0x7455;
pub(crate) const SALT_MUTUAL_INFO: u64 = 0x4d49;
pub(crate) const SALT_DISORDER: u64 = 0x4449;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub(crate) struct SampleRng {
    state: u64,
}

impl SampleRng {
    pub fn from_key(master_seed: u64, stream_id: u64, salt: u64, index: u64) -> Self {
        let mut s = master_seed;
        let a = splitmix64(&mut s);
        let mut s = a ^ stream_id;
        let b = splitmix64(&mut s);
        let mut s = b ^ salt;
        let c = splitmix64(&mut s);
        let mut s = c ^ index;
        let d = splitmix64(&mut s);
        SampleRng { state: d }
    }

    pub fn next_u64(&mut self) -> u64 {
        splitmix64(&mut self.state)
    }

    /// Uniform on (0, 1]; never returns 0, so -ln(u) is always finite.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Pair of independent standard normals (Box-Muller).
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }
}
