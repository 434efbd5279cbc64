//! Combined multiple recursive generator MRG32k3a with O(log n) skip-ahead.
//!
//! All generator constants below are taken verbatim from L'Ecuyer,
//! "Good Parameters and Implementations for Combined Multiple Recursive
//! Random Number Generators", Operations Research 47(1), 1999. The generator
//! combines two order-3 linear recurrences modulo the primes [`M1`] and
//! [`M2`]; its period is about 2^191. Because each component is linear, the
//! state can be advanced by `n` steps by raising the two 3x3 companion
//! matrices to the n-th power modulo their respective primes, which is what
//! makes disjoint per-worker substreams cheap to construct.

use crate::error::{Error, Result};

/// First component modulus, 2^32 - 209.
pub const M1: u64 = 4_294_967_087;
/// Second component modulus, 2^32 - 22853.
pub const M2: u64 = 4_294_944_443;
/// Multiplier of x_{n-2} in the first recurrence.
pub const A12: u64 = 1_403_580;
/// Negated multiplier of x_{n-3} in the first recurrence.
pub const A13N: u64 = 810_728;
/// Multiplier of x_{n-1} in the second recurrence.
pub const A21: u64 = 527_612;
/// Negated multiplier of x_{n-3} in the second recurrence.
pub const A23N: u64 = 1_370_589;
/// Output scaling 1/(M1+1); maps the combined residue into (0,1).
pub const NORM: f64 = 1.0 / (M1 as f64 + 1.0);

/// 3x3 matrix of residues, row major.
pub type Mat3 = [[u64; 3]; 3];

/// Companion matrix of the first recurrence: state is ordered oldest first,
/// `(x_{n-3}, x_{n-2}, x_{n-1})`, and `x_n = a12 x_{n-2} - a13n x_{n-3}`.
pub const COMPANION_1: Mat3 = [[0, 1, 0], [0, 0, 1], [M1 - A13N, A12, 0]];
/// Companion matrix of the second recurrence: `x_n = a21 x_{n-1} - a23n x_{n-3}`.
pub const COMPANION_2: Mat3 = [[0, 1, 0], [0, 0, 1], [M2 - A23N, 0, A21]];

/// State of one MRG32k3a stream: three residues per component, oldest first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mrg32k3a {
    s1: [u64; 3],
    s2: [u64; 3],
}

impl Default for Mrg32k3a {
    /// The customary all-12345 seed state.
    fn default() -> Self {
        Mrg32k3a {
            s1: [12345; 3],
            s2: [12345; 3],
        }
    }
}

impl Mrg32k3a {
    /// Builds a state from explicit residues, enforcing the invariants:
    /// residues reduced modulo their prime and neither triple all zero.
    pub fn new(s1: [u64; 3], s2: [u64; 3]) -> Result<Self> {
        if s1.iter().any(|&v| v >= M1) || s2.iter().any(|&v| v >= M2) {
            return Err(Error::InvalidConfig(
                "MRG32k3a residues must lie in [0, m-1]".into(),
            ));
        }
        if s1 == [0; 3] || s2 == [0; 3] {
            return Err(Error::InvalidConfig(
                "MRG32k3a component state must not be all zero".into(),
            ));
        }
        Ok(Mrg32k3a { s1, s2 })
    }

    /// Derives a valid state from a 64-bit master seed. Each residue is
    /// mapped into [1, m-1], so the nonzero invariants hold for any seed.
    pub fn from_master_seed(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        let mut draw = |m: u64| 1 + sm.next_u64() % (m - 1);
        Mrg32k3a {
            s1: [draw(M1), draw(M1), draw(M1)],
            s2: [draw(M2), draw(M2), draw(M2)],
        }
    }

    /// Advances both recurrences one step and returns the combined residue
    /// `z = (x1_n - x2_n) mod m1`, in `[0, M1-1]`.
    pub fn next_residue(&mut self) -> u64 {
        let p1 = ((A12 as u128 * self.s1[1] as u128
            + (M1 - A13N) as u128 * self.s1[0] as u128)
            % M1 as u128) as u64;
        self.s1 = [self.s1[1], self.s1[2], p1];
        let p2 = ((A21 as u128 * self.s2[2] as u128
            + (M2 - A23N) as u128 * self.s2[0] as u128)
            % M2 as u128) as u64;
        self.s2 = [self.s2[1], self.s2[2], p2];
        (p1 + M1 - p2) % M1
    }

    /// One uniform draw, strictly inside (0,1): `z/(m1+1)` for `z > 0` and
    /// `m1/(m1+1)` when the combined residue is zero.
    pub fn next_f64(&mut self) -> f64 {
        let z = self.next_residue();
        if z > 0 {
            z as f64 * NORM
        } else {
            M1 as f64 * NORM
        }
    }

    /// State after `n` more steps, computed in O(log n) modular matrix
    /// products instead of `n` recurrence steps.
    pub fn skip_ahead(&self, n: u128) -> Self {
        let j1 = mat_pow_mod(&COMPANION_1, n, M1);
        let j2 = mat_pow_mod(&COMPANION_2, n, M2);
        self.apply_jump(&j1, &j2)
    }

    /// Applies precomputed jump matrices (powers of the companion matrices).
    pub fn apply_jump(&self, j1: &Mat3, j2: &Mat3) -> Self {
        Mrg32k3a {
            s1: mat_vec_mod(j1, &self.s1, M1),
            s2: mat_vec_mod(j2, &self.s2, M2),
        }
    }
}

/// Modular 3x3 matrix product.
pub fn mat_mul_mod(a: &Mat3, b: &Mat3, m: u64) -> Mat3 {
    let mut out = [[0u64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc: u128 = 0;
            for k in 0..3 {
                acc += a[i][k] as u128 * b[k][j] as u128;
            }
            out[i][j] = (acc % m as u128) as u64;
        }
    }
    out
}

/// Modular matrix-vector product.
pub fn mat_vec_mod(a: &Mat3, v: &[u64; 3], m: u64) -> [u64; 3] {
    let mut out = [0u64; 3];
    for i in 0..3 {
        let mut acc: u128 = 0;
        for k in 0..3 {
            acc += a[i][k] as u128 * v[k] as u128;
        }
        out[i] = (acc % m as u128) as u64;
    }
    out
}

/// Modular matrix power by square-and-multiply, least significant bit first.
pub fn mat_pow_mod(a: &Mat3, mut n: u128, m: u64) -> Mat3 {
    let mut result: Mat3 = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
    let mut base = *a;
    while n > 0 {
        if n & 1 == 1 {
            result = mat_mul_mod(&result, &base, m);
        }
        n >>= 1;
        if n > 0 {
            base = mat_mul_mod(&base, &base, m);
        }
    }
    result
}

/// SplitMix64 seed expander (Vigna); used to turn one 64-bit master seed
/// into the six generator residues and into xorshift seeding material.
#[derive(Clone, Debug)]
pub(crate) struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub(crate) fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub(crate) fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}
