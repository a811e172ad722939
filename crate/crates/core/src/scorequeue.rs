//! Bounded FIFO of detached (prediction, label) pairs from recent batches.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreQueue {
    capacity: usize,
    entries: VecDeque<(f64, f64)>,
}

/// Constant copy of a queue's contents, oldest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueueSnapshot {
    pub preds: Vec<f64>,
    pub gts: Vec<f64>,
}

impl QueueSnapshot {
    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }
}

/// `K = max(1, floor(ratio * dataset_size))` for `0 < ratio <= 1`.
pub fn capacity_from_ratio(ratio: f64, dataset_size: usize) -> Result<usize> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "queue ratio {ratio} outside (0, 1]"
        )));
    }
    if dataset_size == 0 {
        return Err(Error::InvalidArgument("dataset size must be >= 1".into()));
    }
    // guard against 0.6 * 100 = 59.999...
    let k = (ratio * dataset_size as f64 + 1e-9).floor() as usize;
    Ok(k.max(1))
}

impl ScoreQueue {
    /// A queue of capacity 0 never retains anything.
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Append newest-last, evicting oldest entries beyond capacity.
    pub fn push_batch(&mut self, preds: &[f64], gts: &[f64]) -> Result<()> {
        if preds.len() != gts.len() {
            return Err(Error::LengthMismatch(preds.len(), gts.len()));
        }
        let skip = preds.len().saturating_sub(self.capacity);
        for (&p, &g) in preds.iter().zip(gts).skip(skip) {
            if self.entries.len() == self.capacity {
                self.entries.pop_front();
            }
            self.entries.push_back((p, g));
        }
        Ok(())
    }

    pub fn snapshot(&self) -> QueueSnapshot {
        let (preds, gts) = self.entries.iter().copied().unzip();
        QueueSnapshot { preds, gts }
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.entries.iter().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_examples() {
        assert_eq!(capacity_from_ratio(0.6, 100).unwrap(), 60);
        assert_eq!(capacity_from_ratio(0.2, 5).unwrap(), 1);
        assert_eq!(capacity_from_ratio(1.0, 7).unwrap(), 7);
        assert_eq!(capacity_from_ratio(0.1, 3).unwrap(), 1);
        assert!(capacity_from_ratio(0.0, 10).is_err());
        assert!(capacity_from_ratio(1.5, 10).is_err());
        assert!(capacity_from_ratio(0.5, 0).is_err());
    }

    #[test]
    fn fifo_eviction() {
        let mut q = ScoreQueue::new(2);
        q.push_batch(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(q.iter().collect::<Vec<_>>(), vec![(2.0, 2.0), (3.0, 3.0)]);
        q.push_batch(&[], &[]).unwrap();
        assert_eq!(q.len(), 2);
    }

    #[test]
    fn order_preserved() {
        let mut q = ScoreQueue::new(3);
        q.push_batch(&[1.0], &[1.0]).unwrap();
        q.push_batch(&[2.0], &[2.0]).unwrap();
        assert_eq!(q.iter().collect::<Vec<_>>(), vec![(1.0, 1.0), (2.0, 2.0)]);
        assert!(q.push_batch(&[1.0], &[]).is_err());
    }

    #[test]
    fn snapshot_is_a_copy() {
        let mut q = ScoreQueue::new(4);
        assert!(q.snapshot().is_empty());
        q.push_batch(&[1.0], &[5.0]).unwrap();
        let snap = q.snapshot();
        assert_eq!(snap.preds, vec![1.0]);
        assert_eq!(snap.gts, vec![5.0]);
        q.push_batch(&[2.0], &[6.0]).unwrap();
        assert_eq!(snap.preds, vec![1.0]);
    }

    #[test]
    fn zero_capacity_stays_empty() {
        let mut q = ScoreQueue::new(0);
        q.push_batch(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert!(q.is_empty());
    }
}
