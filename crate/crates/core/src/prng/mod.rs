//! Partitioned parallel pseudorandom streams.
//!
//! Every parallel element of a simulation (chain, particle) owns one
//! [`Stream`]: a generator state plus a one-slot cache for the Box-Muller
//! transform. Streams are confined to one worker at a time and may be moved
//! between workers between generations; nothing here shares mutable state.
//!
//! Two generators are provided. MRG32k3a substreams are contiguous blocks of
//! one global sequence, reached with the O(log n) skip-ahead, so stream `i`
//! starts at position `i * block_length` and blocks never overlap as long as
//! fewer than `block_length` draws are taken per stream. Xorshift streams are
//! instead seeded independently up front, with seed words hashed out of an
//! MRG32k3a stream keyed by the master seed.

mod mrg32k3a;
mod xorshift;

pub use mrg32k3a::{
    mat_mul_mod, mat_pow_mod, mat_vec_mod, Mat3, Mrg32k3a, A12, A13N, A21, A23N, COMPANION_1,
    COMPANION_2, M1, M2, NORM,
};
pub use xorshift::Xorshift128;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Draws reserved per substream by default: far more than any desk-scale run
/// consumes, so overlap checking is never needed at runtime.
pub const DEFAULT_BLOCK_LEN: u128 = 1 << 40;

/// Which uniform generator an experiment uses. The choice is per-run
/// configuration; both feed the same transforms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorKind {
    Mrg32k3a,
    Xorshift128,
}

impl GeneratorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GeneratorKind::Mrg32k3a => "mrg32k3a",
            GeneratorKind::Xorshift128 => "xorshift",
        }
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mrg32k3a" => Ok(GeneratorKind::Mrg32k3a),
            "xorshift" | "xorshift128" => Ok(GeneratorKind::Xorshift128),
            other => Err(Error::InvalidConfig(format!(
                "unknown generator '{other}' (expected mrg32k3a or xorshift)"
            ))),
        }
    }
}

impl std::fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Layout of MRG32k3a substreams: stream `i` owns the contiguous block
/// `[i * block_length, (i+1) * block_length)` of the master sequence.
#[derive(Clone, Debug)]
pub struct StreamPartition {
    pub master_seed: u64,
    pub stream_count: usize,
    pub block_length: u128,
}

/// Substream states for a partition: stream `i` equals the master stream
/// advanced by `i * block_length` steps. One jump matrix pair is raised to
/// the block length once and then applied per stream, so construction is
/// O(log block_length + stream_count).
pub fn make_substreams(p: &StreamPartition) -> Result<Vec<Mrg32k3a>> {
    if p.stream_count == 0 {
        return Err(Error::InvalidConfig("stream_count must be positive".into()));
    }
    if p.block_length == 0 {
        return Err(Error::InvalidConfig("block_length must be positive".into()));
    }
    p.block_length
        .checked_mul(p.stream_count as u128)
        .ok_or_else(|| Error::InvalidConfig("stream_count * block_length overflows".into()))?;
    let j1 = mat_pow_mod(&COMPANION_1, p.block_length, M1);
    let j2 = mat_pow_mod(&COMPANION_2, p.block_length, M2);
    let mut states = Vec::with_capacity(p.stream_count);
    let mut cur = Mrg32k3a::from_master_seed(p.master_seed);
    for _ in 0..p.stream_count {
        states.push(cur.clone());
        cur = cur.apply_jump(&j1, &j2);
    }
    Ok(states)
}

/// Per-stream xorshift seeds for `stream_count` streams, derived by hashing
/// `(master_seed, index)` through an MRG32k3a stream. Intended to run once at
/// startup; generation afterwards never touches the seeding path.
pub fn xorshift_make_seeds(master_seed: u64, stream_count: usize) -> Vec<Xorshift128> {
    let mut hash_stream = Mrg32k3a::from_master_seed(master_seed);
    let mut seeds = Vec::with_capacity(stream_count);
    for _ in 0..stream_count {
        let mut words = [0u32; 4];
        for w in &mut words {
            *w = hash_stream.next_residue() as u32;
        }
        if words == [0; 4] {
            words[3] = 1;
        }
        seeds.push(Xorshift128::new(words).expect("nonzero by construction"));
    }
    seeds
}

#[derive(Clone, Debug, PartialEq)]
enum Engine {
    Mrg(Mrg32k3a),
    Xorshift(Xorshift128),
}

/// One random-number substream plus its Box-Muller cache.
///
/// `next_gaussian` consumes exactly two uniforms per pair of calls: the first
/// call of a pair draws both uniforms and caches the second variate, the
/// second call consumes the cache and draws nothing. This keeps substream
/// accounting exact.
#[derive(Clone, Debug)]
pub struct Stream<T> {
    engine: Engine,
    cached_normal: Option<T>,
}

impl<T: Scalar> Stream<T> {
    pub fn from_mrg(state: Mrg32k3a) -> Self {
        Stream {
            engine: Engine::Mrg(state),
            cached_normal: None,
        }
    }

    pub fn from_xorshift(state: Xorshift128) -> Self {
        Stream {
            engine: Engine::Xorshift(state),
            cached_normal: None,
        }
    }

    /// One uniform draw in the open interval (0,1) at width `T`. The
    /// canonical draw is strictly inside (0,1) in f64; narrowing to f32 can
    /// round up to 1.0, so the result is nudged back inside the interval.
    pub fn next_uniform(&mut self) -> T {
        let u = match &mut self.engine {
            Engine::Mrg(g) => g.next_f64(),
            Engine::Xorshift(g) => g.next_f64(),
        };
        T::from_f64_lossy(u)
            .max(T::min_positive_value())
            .min(T::one() - T::epsilon())
    }

    /// One standard normal draw via the Box-Muller transform, evaluated at
    /// width `T`.
    pub fn next_gaussian(&mut self) -> T {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        let r = (-T::two() * u1.ln()).sqrt();
        let theta = T::two() * T::PI() * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Whether a Box-Muller variate is pending; exposed for accounting tests.
    pub fn has_cached_normal(&self) -> bool {
        self.cached_normal.is_some()
    }
}

/// Builds `count` substreams of the chosen generator from one master seed.
/// For MRG32k3a these are contiguous blocks of `block_length` draws; for
/// xorshift they are independently seeded streams and `block_length` is
/// ignored.
pub fn make_streams<T: Scalar>(
    kind: GeneratorKind,
    master_seed: u64,
    count: usize,
    block_length: u128,
) -> Result<Vec<Stream<T>>> {
    if count == 0 {
        return Err(Error::InvalidConfig("stream count must be positive".into()));
    }
    match kind {
        GeneratorKind::Mrg32k3a => {
            let partition = StreamPartition {
                master_seed,
                stream_count: count,
                block_length,
            };
            Ok(make_substreams(&partition)?
                .into_iter()
                .map(Stream::from_mrg)
                .collect())
        }
        GeneratorKind::Xorshift128 => Ok(xorshift_make_seeds(master_seed, count)
            .into_iter()
            .map(Stream::from_xorshift)
            .collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_stream_partition_equals_master() {
        let p = StreamPartition {
            master_seed: 42,
            stream_count: 1,
            block_length: DEFAULT_BLOCK_LEN,
        };
        let streams = make_substreams(&p).unwrap();
        assert_eq!(streams.len(), 1);
        assert_eq!(streams[0], Mrg32k3a::from_master_seed(42));
    }

    #[test]
    fn substreams_are_blocks_of_the_master_sequence() {
        let p = StreamPartition {
            master_seed: 7,
            stream_count: 4,
            block_length: 1000,
        };
        let streams = make_substreams(&p).unwrap();
        let mut master = Mrg32k3a::from_master_seed(7);
        let master_draws: Vec<u64> = (0..4000).map(|_| master.next_residue()).collect();
        let mut concat = Vec::new();
        for mut s in streams {
            for _ in 0..1000 {
                concat.push(s.next_residue());
            }
        }
        assert_eq!(concat, master_draws);
    }

    #[test]
    fn stream_one_first_draw_is_master_draw_after_block() {
        let p = StreamPartition {
            master_seed: 7,
            stream_count: 4,
            block_length: 1000,
        };
        let mut streams = make_substreams(&p).unwrap();
        let mut master = Mrg32k3a::from_master_seed(7);
        for _ in 0..1000 {
            master.next_residue();
        }
        assert_eq!(streams[1].next_residue(), master.next_residue());
    }

    #[test]
    fn partition_construction_is_deterministic() {
        let p = StreamPartition {
            master_seed: 3,
            stream_count: 8,
            block_length: 1 << 20,
        };
        assert_eq!(make_substreams(&p).unwrap(), make_substreams(&p).unwrap());
    }

    #[test]
    fn rejects_empty_partitions() {
        assert!(make_substreams(&StreamPartition {
            master_seed: 1,
            stream_count: 0,
            block_length: 10,
        })
        .is_err());
        assert!(make_substreams(&StreamPartition {
            master_seed: 1,
            stream_count: 10,
            block_length: 0,
        })
        .is_err());
    }

    #[test]
    fn xorshift_seeds_deterministic_and_distinct() {
        let a = xorshift_make_seeds(99, 1024);
        let b = xorshift_make_seeds(99, 1024);
        assert_eq!(a, b);
        for i in 0..a.len() {
            assert_ne!(a[i].words(), [0; 4]);
            for j in (i + 1)..a.len() {
                assert_ne!(a[i].words(), a[j].words(), "seeds {i} and {j} collide");
            }
        }
    }

    #[test]
    fn xorshift_single_seed_is_nonzero() {
        let seeds = xorshift_make_seeds(0, 1);
        assert_eq!(seeds.len(), 1);
        assert_ne!(seeds[0].words(), [0; 4]);
    }

    #[test]
    fn gaussian_consumes_two_uniforms_per_pair() {
        let mut s: Stream<f64> = Stream::from_mrg(Mrg32k3a::from_master_seed(5));
        let mut raw = Mrg32k3a::from_master_seed(5);
        let _ = s.next_gaussian();
        assert!(s.has_cached_normal());
        let _ = s.next_gaussian();
        assert!(!s.has_cached_normal());
        // After one pair the stream sits exactly two draws in.
        raw.next_residue();
        raw.next_residue();
        let mut advanced = Stream::<f64>::from_mrg(raw);
        assert_eq!(s.next_uniform(), advanced.next_uniform());
    }

    #[test]
    fn gaussian_reproducible_from_fixed_state() {
        let mut a: Stream<f64> = Stream::from_mrg(Mrg32k3a::from_master_seed(17));
        let mut b: Stream<f64> = Stream::from_mrg(Mrg32k3a::from_master_seed(17));
        for _ in 0..100 {
            assert_eq!(a.next_gaussian(), b.next_gaussian());
        }
    }

    #[test]
    fn f32_uniform_stays_strictly_inside_unit_interval() {
        // Exercise the clamp: canonical values near 1 - 2.3e-10 would round
        // to 1.0f32 without it.
        let mut s: Stream<f32> = Stream::from_mrg(Mrg32k3a::from_master_seed(1));
        for _ in 0..200_000 {
            let u = s.next_uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn make_streams_supports_both_generators() {
        let mrg: Vec<Stream<f64>> =
            make_streams(GeneratorKind::Mrg32k3a, 4, 3, DEFAULT_BLOCK_LEN).unwrap();
        let xs: Vec<Stream<f64>> =
            make_streams(GeneratorKind::Xorshift128, 4, 3, DEFAULT_BLOCK_LEN).unwrap();
        assert_eq!(mrg.len(), 3);
        assert_eq!(xs.len(), 3);
        assert!(make_streams::<f64>(GeneratorKind::Mrg32k3a, 4, 0, 1).is_err());
    }
}
