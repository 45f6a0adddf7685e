//! Partitioning a sequential stream into alternating block pairs.
//!
//! Iteration `t` consumes `2 B_t` consecutive observations: the first `B_t`
//! feed trajectory `a`, the next `B_t` feed trajectory `b`.

use crate::error::{Error, Result};
use crate::models::Observation;
use crate::scalar::Scalar;
use crate::schedules::BlockSchedule;

/// Pull-based source of observations.
pub trait ObservationSource<T> {
    /// Next observation, or `None` at end of stream.
    fn pull(&mut self) -> Result<Option<Observation<T>>>;
}

impl<T, I> ObservationSource<T> for I
where
    I: Iterator<Item = Observation<T>>,
{
    fn pull(&mut self) -> Result<Option<Observation<T>>> {
        Ok(self.next())
    }
}

/// Adapts a fallible iterator (for example a file reader) into a source.
pub struct Fallible<I>(pub I);

impl<T, I> ObservationSource<T> for Fallible<I>
where
    I: Iterator<Item = Result<Observation<T>>>,
{
    fn pull(&mut self) -> Result<Option<Observation<T>>> {
        self.0.next().transpose()
    }
}

/// The two batches drawn at iteration `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPair<T> {
    pub t: usize,
    pub batch_a: Vec<Observation<T>>,
    pub batch_b: Vec<Observation<T>>,
}

impl<T> BlockPair<T> {
    pub fn block_size(&self) -> usize {
        self.batch_a.len()
    }
}

/// How a finite sample of `n` observations is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HorizonPlan {
    /// Number of complete iterations.
    pub iterations: usize,
    /// Observations consumed by complete pairs, `2 Σ_{t≤T} B_t`.
    pub consumed: usize,
    /// Observations discarded at the end of the stream.
    pub leftover: usize,
}

impl HorizonPlan {
    pub fn total(&self) -> usize {
        self.consumed + self.leftover
    }
}

/// Largest `T` with `2 Σ_{t≤T} B_t ≤ n`.
pub fn plan_horizon<T: Scalar>(n: usize, sched: &BlockSchedule<T>) -> HorizonPlan {
    let mut consumed = 0usize;
    let mut iterations = 0usize;
    loop {
        let need = 2 * sched.size(iterations + 1);
        if consumed + need > n {
            break;
        }
        consumed += need;
        iterations += 1;
    }
    HorizonPlan { iterations, consumed, leftover: n - consumed }
}

/// Single-pass cursor over a source, emitting one `BlockPair` per iteration.
pub struct BlockPartitioner<T, S> {
    source: S,
    schedule: BlockSchedule<T>,
    next_t: usize,
    consumed: usize,
    leftover: usize,
    exhausted: bool,
}

impl<T: Scalar, S: ObservationSource<T>> BlockPartitioner<T, S> {
    pub fn new(source: S, schedule: BlockSchedule<T>) -> Self {
        Self { source, schedule, next_t: 1, consumed: 0, leftover: 0, exhausted: false }
    }

    pub fn schedule(&self) -> &BlockSchedule<T> {
        &self.schedule
    }

    /// Index of the pair the next call will produce.
    pub fn next_index(&self) -> usize {
        self.next_t
    }

    /// Pulls the next pair. Once the source runs dry mid-pair the partial
    /// pair is discarded and every later call reports `StreamExhausted`.
    pub fn next_block_pair(&mut self) -> Result<BlockPair<T>> {
        let t = self.next_t;
        let size = self.schedule.size(t);
        let needed = 2 * size;
        if self.exhausted {
            return Err(Error::StreamExhausted { t, needed, read: 0 });
        }
        let mut batch_a = Vec::with_capacity(size);
        let mut batch_b = Vec::with_capacity(size);
        let mut read = 0usize;
        while read < needed {
            match self.source.pull()? {
                Some(z) => {
                    if read < size {
                        batch_a.push(z);
                    } else {
                        batch_b.push(z);
                    }
                    read += 1;
                }
                None => {
                    self.exhausted = true;
                    self.leftover += read;
                    return Err(Error::StreamExhausted { t, needed, read });
                }
            }
        }
        self.consumed += needed;
        self.next_t += 1;
        Ok(BlockPair { t, batch_a, batch_b })
    }

    /// `Some(pair)` until the stream is exhausted; source errors propagate.
    pub fn try_next(&mut self) -> Result<Option<BlockPair<T>>> {
        match self.next_block_pair() {
            Ok(pair) => Ok(Some(pair)),
            Err(Error::StreamExhausted { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Usage so far; final once the stream has been exhausted.
    pub fn plan(&self) -> HorizonPlan {
        HorizonPlan { iterations: self.next_t - 1, consumed: self.consumed, leftover: self.leftover }
    }

    pub fn into_source(self) -> S {
        self.source
    }
}
