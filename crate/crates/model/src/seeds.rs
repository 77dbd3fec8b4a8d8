//! Deterministic seed derivation for dropout.
//!
//! Each dropout site draws the next seed from a counter stream derived from
//! (run seed, step, pass). The forward code executes sites in a fixed order,
//! so a (seed, step, pass) triple fully determines every mask, and the two
//! R-Drop passes see independent masks.

use std::cell::Cell;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[derive(Debug)]
pub struct SeedGen {
    base: u64,
    counter: Cell<u64>,
}

impl SeedGen {
    pub fn new(run_seed: u64, step: u64, pass: u64) -> SeedGen {
        let base = splitmix64(splitmix64(run_seed ^ splitmix64(step)) ^ splitmix64(pass));
        SeedGen { base, counter: Cell::new(0) }
    }

    /// Seed for the next dropout call site.
    pub fn next_seed(&self) -> u64 {
        let c = self.counter.get();
        self.counter.set(c + 1);
        splitmix64(self.base ^ c.wrapping_mul(0x2545f4914f6cdd1d))
    }
}

/// Whether a forward pass applies dropout, and with which seeds.
#[derive(Debug)]
pub enum Phase {
    Train(SeedGen),
    Eval,
}

impl Phase {
    pub fn train(run_seed: u64, step: u64, pass: u64) -> Phase {
        Phase::Train(SeedGen::new(run_seed, step, pass))
    }

    /// Apply dropout under this phase; identity during evaluation.
    pub fn dropout(
        &self,
        x: retro3d_tensor::Tensor,
        rate: f64,
    ) -> retro3d_tensor::Result<retro3d_tensor::Tensor> {
        match self {
            Phase::Train(seeds) if rate > 0.0 => x.dropout(rate, seeds.next_seed()),
            _ => Ok(x),
        }
    }
}
