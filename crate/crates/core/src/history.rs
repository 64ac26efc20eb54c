use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Pool of previously translated images used to update a discriminator.
///
/// While filling, every image is stored and passed through. Once full,
/// each incoming image is swapped with a uniformly chosen stored one with
/// probability ½, otherwise passed through.
#[derive(Clone, Debug)]
pub struct HistoryBuffer<T> {
    capacity: usize,
    store: Vec<Tensor<T>>,
    rng: ChaCha8Rng,
}

impl<T: Real> HistoryBuffer<T> {
    pub fn new(capacity: usize, seed: u64) -> Self {
        HistoryBuffer {
            capacity,
            store: Vec::with_capacity(capacity),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    /// Returns a batch of the same shape as `fresh`, drawn per image from
    /// the pool rule above. `fresh` itself is never modified.
    pub fn query(&mut self, fresh: &Tensor<T>) -> Result<Tensor<T>> {
        if self.capacity == 0 {
            return Ok(fresh.clone());
        }
        let (n, _, _, _) = fresh.dims4("history_query")?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let image = fresh.batch_item(i)?;
            if self.store.len() < self.capacity {
                self.store.push(image.clone());
                out.push(image);
            } else if self.rng.random::<f64>() < 0.5 {
                let slot = self.rng.random_range(0..self.store.len());
                out.push(core::mem::replace(&mut self.store[slot], image));
            } else {
                out.push(image);
            }
        }
        Tensor::stack_batch(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(v: f64) -> Tensor<f64> {
        Tensor::full(&[1, 1, 2, 2], v)
    }

    #[test]
    fn zero_capacity_passes_through() {
        let mut buf = HistoryBuffer::new(0, 1);
        for i in 0..10 {
            let x = image(i as f64);
            assert_eq!(buf.query(&x).unwrap(), x);
        }
        assert!(buf.is_empty());
    }

    #[test]
    fn fill_phase_returns_inputs() {
        let mut buf = HistoryBuffer::new(5, 3);
        for i in 0..5 {
            let x = image(i as f64);
            assert_eq!(buf.query(&x).unwrap(), x);
            assert_eq!(buf.len(), i + 1);
        }
    }

    #[test]
    fn batch_query_keeps_shape() {
        let mut buf = HistoryBuffer::new(3, 3);
        let batch = Tensor::stack_batch(&[image(1.0), image(2.0), image(3.0), image(4.0)]).unwrap();
        let out = buf.query(&batch).unwrap();
        assert_eq!(out.shape(), batch.shape());
        assert_eq!(buf.len(), 3);
    }
}
