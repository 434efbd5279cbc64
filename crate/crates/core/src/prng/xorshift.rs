//! Marsaglia xorshift generator with 128 bits of state.
//!
//! Parameter triple (11, 19, 8) from Marsaglia, "Xorshift RNGs", Journal of
//! Statistical Software 8(14), 2003; the recurrence has full period 2^128-1
//! over the nonzero states. There is no cheap skip-ahead here: parallel
//! streams get independently derived seeds computed up front (see
//! [`xorshift_make_seeds`](super::xorshift_make_seeds)), trading seeding time
//! for a faster per-draw step.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Xorshift128 {
    x: u32,
    y: u32,
    z: u32,
    w: u32,
}

impl Xorshift128 {
    /// Builds a generator from four state words; all-zero is the one
    /// forbidden state.
    pub fn new(words: [u32; 4]) -> Result<Self> {
        if words == [0; 4] {
            return Err(Error::InvalidConfig(
                "xorshift state must not be all zero".into(),
            ));
        }
        Ok(Xorshift128 {
            x: words[0],
            y: words[1],
            z: words[2],
            w: words[3],
        })
    }

    pub fn words(&self) -> [u32; 4] {
        [self.x, self.y, self.z, self.w]
    }

    pub fn next_u32(&mut self) -> u32 {
        let t = self.x ^ (self.x << 11);
        self.x = self.y;
        self.y = self.z;
        self.z = self.w;
        self.w = (self.w ^ (self.w >> 19)) ^ (t ^ (t >> 8));
        self.w
    }

    /// One uniform draw, strictly inside (0,1): `(w + 1/2) / 2^32`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u32() as f64 + 0.5) * (1.0 / 4_294_967_296.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_all_zero_state() {
        assert!(Xorshift128::new([0; 4]).is_err());
        assert!(Xorshift128::new([0, 0, 0, 1]).is_ok());
    }

    #[test]
    fn output_strictly_inside_unit_interval() {
        let mut g = Xorshift128::new([123, 456, 789, 101112]).unwrap();
        for _ in 0..100_000 {
            let u = g.next_f64();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn never_reaches_zero_state() {
        let mut g = Xorshift128::new([1, 0, 0, 0]).unwrap();
        for _ in 0..10_000 {
            g.next_u32();
            assert_ne!(g.words(), [0; 4]);
        }
    }

    #[test]
    fn deterministic_sequence() {
        let mut a = Xorshift128::new([9, 8, 7, 6]).unwrap();
        let mut b = a.clone();
        for _ in 0..1000 {
            assert_eq!(a.next_u32(), b.next_u32());
        }
    }
}
