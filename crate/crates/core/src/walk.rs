//! Per-walker randomness and a lightweight one-dimensional walk.
//!
//! A walker owns two streams: a sequential stream for waiting times and a
//! random-access stream for jump directions, where the direction of the
//! `k`-th jump is read from block `k`. Timing and direction therefore never
//! share draws.

use crate::laws::JumpLaw;
use crate::stream::{tag, RandomStream};

/// Stream family for the walkers of one scope (e.g. one home site).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkerScope {
    pub seed: u64,
    pub prefix: Vec<i64>,
}

impl WalkerScope {
    pub fn new(seed: u64, prefix: Vec<i64>) -> Self {
        Self { seed, prefix }
    }

    /// Scope used by the lattice engine for walkers whose home is `home`.
    pub fn lattice(seed: u64, home: &[i64]) -> Self {
        let mut prefix = Vec::with_capacity(home.len() + 1);
        prefix.push(home.len() as i64);
        prefix.extend_from_slice(home);
        Self { seed, prefix }
    }

    fn path(&self, purpose: i64, index: u64) -> Vec<i64> {
        let mut p = Vec::with_capacity(self.prefix.len() + 3);
        p.push(tag::WALKER);
        p.push(purpose);
        p.extend_from_slice(&self.prefix);
        p.push(index as i64);
        p
    }

    /// `(wait, direction)` streams of walker `index` (1-based).
    pub fn streams(&self, index: u64) -> (RandomStream, RandomStream) {
        (
            RandomStream::derive(self.seed, &self.path(tag::WAIT, index)),
            RandomStream::derive(self.seed, &self.path(tag::DIR, index)),
        )
    }
}

/// Direction of jump number `jump` (0-based): `(axis, +1 | -1)`, uniform over
/// the `2 * dim` lattice neighbours.
#[inline]
pub fn direction_at(dir: &RandomStream, jump: u64, dim: usize) -> (usize, i64) {
    let word = dir.block_at(jump)[0];
    let choice = ((u64::from(word) * 2 * dim as u64) >> 32) as usize;
    (choice / 2, if choice.is_multiple_of(2) { 1 } else { -1 })
}

/// A one-dimensional continuous-time walk, clocked from its activation.
#[derive(Clone, Debug)]
pub struct Walk1d {
    wait: RandomStream,
    dir: RandomStream,
    pub position: i64,
    /// Time since activation of the next jump.
    pub next_jump: f64,
    pub jumps: u64,
}

impl Walk1d {
    pub fn new(law: &JumpLaw, scope: &WalkerScope, index: u64) -> Self {
        let (mut wait, dir) = scope.streams(index);
        let next_jump = law.sample_wait(&mut wait);
        Self { wait, dir, position: 0, next_jump, jumps: 0 }
    }

    /// Performs the pending jump and schedules the next one.
    #[inline]
    pub fn jump(&mut self, law: &JumpLaw) {
        let (_, sign) = direction_at(&self.dir, self.jumps, 1);
        self.position += sign;
        self.jumps += 1;
        self.next_jump += law.sample_wait(&mut self.wait);
    }

    /// Advances through every jump at time `<= t` and returns the position.
    pub fn advance_to(&mut self, law: &JumpLaw, t: f64) -> i64 {
        while self.next_jump <= t {
            self.jump(law);
        }
        self.position
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_cover_all_neighbours() {
        let scope = WalkerScope::new(3, vec![0]);
        let (_, dir) = scope.streams(1);
        for dim in 1..=3 {
            let mut counts = vec![0u32; 2 * dim];
            for k in 0..60_000 {
                let (axis, sign) = direction_at(&dir, k, dim);
                counts[2 * axis + usize::from(sign < 0)] += 1;
            }
            let expect = 60_000.0 / (2 * dim) as f64;
            for c in counts {
                assert!((f64::from(c) - expect).abs() < 5.0 * expect.sqrt());
            }
        }
    }

    #[test]
    fn point_mass_walk_is_clocked() {
        let law = JumpLaw::point_mass(1.0);
        let mut w = Walk1d::new(&law, &WalkerScope::new(1, vec![]), 1);
        assert_eq!(w.advance_to(&law, 0.5), 0);
        let p = w.advance_to(&law, 1.0);
        assert_eq!(p.abs(), 1);
        assert_eq!(w.jumps, 1);
        w.advance_to(&law, 10.0);
        assert_eq!(w.jumps, 10);
    }
}
