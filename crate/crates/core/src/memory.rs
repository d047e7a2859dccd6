//! Fixed-capacity episodic memory with reservoir insertion and the
//! flush/resample primitives of adaptive memory realignment.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::streams::Sample;

#[derive(Debug, Clone)]
pub struct MemoryBuffer {
    capacity: usize,
    slots: Vec<Option<Sample>>,
    seen: u64,
    class_index: BTreeMap<usize, BTreeSet<usize>>,
    rng: ChaCha8Rng,
}

impl MemoryBuffer {
    pub fn new(capacity: usize, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("buffer capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            slots: vec![None; capacity],
            seen: 0,
            class_index: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of samples offered to the reservoir so far.
    pub fn seen_count(&self) -> u64 {
        self.seen
    }

    pub fn len(&self) -> usize {
        self.class_index.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slots(&self) -> &[Option<Sample>] {
        &self.slots
    }

    /// Occupied slot indices of class `c`.
    pub fn class_slots(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.class_index.get(&c).into_iter().flatten().copied()
    }

    pub fn class_count(&self, c: usize) -> usize {
        self.class_index.get(&c).map_or(0, BTreeSet::len)
    }

    pub fn class_samples(&self, c: usize) -> Vec<Sample> {
        self.class_slots(c)
            .map(|j| self.slots[j].clone().expect("indexed slot is occupied"))
            .collect()
    }

    pub fn classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.class_index.keys().copied()
    }

    pub fn occupied(&self) -> impl Iterator<Item = &Sample> {
        self.slots.iter().flatten()
    }

    fn put(&mut self, slot: usize, sample: Sample) {
        if let Some(old) = self.slots[slot].take() {
            let set = self.class_index.get_mut(&old.label).expect("coherent index");
            set.remove(&slot);
            if set.is_empty() {
                self.class_index.remove(&old.label);
            }
        }
        self.class_index.entry(sample.label).or_default().insert(slot);
        self.slots[slot] = Some(sample);
    }

    /// Algorithm R: fill free slots while warming up, then keep each new
    /// sample with probability `capacity / (seen + 1)` in a uniform slot.
    /// Returns the slot the sample landed in, if any.
    pub fn reservoir_update(&mut self, sample: Sample) -> Option<usize> {
        let target = if (self.seen as usize) < self.capacity {
            self.slots.iter().position(Option::is_none)
        } else {
            let j = self.rng.gen_range(0..=self.seen);
            ((j as usize) < self.capacity).then_some(j as usize)
        };
        self.seen += 1;
        if let Some(slot) = target {
            self.put(slot, sample);
        }
        target
    }

    /// Empties every slot of class `c` and returns the freed indices.
    /// The reservoir's seen count is left untouched.
    pub fn amr_flush(&mut self, c: usize) -> Vec<usize> {
        let freed: Vec<usize> = self
            .class_index
            .remove(&c)
            .map(|s| s.into_iter().collect())
            .unwrap_or_default();
        for &j in &freed {
            self.slots[j] = None;
        }
        freed
    }

    /// Places `min(freed.len(), pool.len())` samples, drawn uniformly without
    /// replacement from `pool`, into the freed slots (in slot order). Any
    /// leftover freed slots stay empty.
    pub fn amr_resample(&mut self, c: usize, pool: &[Sample], freed: &[usize]) -> Result<usize> {
        if let Some(bad) = pool.iter().find(|s| s.label != c) {
            return Err(Error::LabelMismatch {
                expected: c,
                found: bad.label,
            });
        }
        if let Some(&j) = freed.iter().find(|&&j| j >= self.capacity) {
            return Err(Error::Config(format!(
                "slot {j} outside buffer of capacity {}",
                self.capacity
            )));
        }
        let n = freed.len().min(pool.len());
        let picks = sample_indices(&mut self.rng, pool.len(), n);
        for (slot, p) in freed.iter().zip(picks.iter()) {
            self.put(*slot, pool[p].clone());
        }
        Ok(n)
    }

    /// Uniform draw without replacement of up to `n` resident samples.
    pub fn sample_replay<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Sample> {
        let occupied: Vec<&Sample> = self.occupied().collect();
        let n = n.min(occupied.len());
        sample_indices(rng, occupied.len(), n)
            .iter()
            .map(|i| occupied[i].clone())
            .collect()
    }

    pub fn snapshot(&self) -> Vec<SnapshotRecord> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(slot, s)| {
                s.as_ref().map(|s| SnapshotRecord {
                    slot,
                    label: s.label,
                    drift_version: s.drift_version,
                    features: s.features.to_vec(),
                })
            })
            .collect()
    }

    /// Writes the snapshot as JSON lines, one occupied slot per line.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for rec in self.snapshot() {
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Full rescan of the index against the slots.
    pub fn index_is_coherent(&self) -> bool {
        let mut rebuilt: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for (j, s) in self.slots.iter().enumerate() {
            if let Some(s) = s {
                rebuilt.entry(s.label).or_default().insert(j);
            }
        }
        rebuilt == self.class_index
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub slot: usize,
    pub label: usize,
    pub drift_version: u32,
    pub features: Vec<f64>,
}

/// Probability that one resident sample is overwritten after `n_c`
/// insertions that each hit a uniform slot: `1 - (1 - 1/|M|)^n_c`.
pub fn replacement_probability(capacity: usize, n_c: u64) -> f64 {
    if capacity == 0 {
        return 0.0;
    }
    1.0 - (1.0 - 1.0 / capacity as f64).powf(n_c as f64)
}

/// Expected replaced residents of one class holding `|M| / K` slots.
pub fn expected_replaced(capacity: usize, num_classes: usize, n_c: u64) -> f64 {
    if num_classes == 0 {
        return 0.0;
    }
    capacity as f64 / num_classes as f64 * replacement_probability(capacity, n_c)
}

/// Hypergeometric probability that `n_c` distinct slot hits cover all
/// `class_slots` residents of a class:
/// `C(|M| - |M_c|, n_c - |M_c|) / C(|M|, n_c)` when `n_c >= |M_c|`, else 0.
/// Evaluated as the product `prod_{i < |M_c|} (n_c - i) / (|M| - i)`; hits
/// beyond `|M|` cover every slot, so `n_c > |M|` saturates at 1.
pub fn replace_all_probability(capacity: usize, class_slots: usize, n_c: u64) -> f64 {
    if class_slots == 0 {
        return 1.0;
    }
    if (n_c as usize) < class_slots {
        return 0.0;
    }
    let n = (n_c as usize).min(capacity);
    (0..class_slots)
        .map(|i| (n - i) as f64 / (capacity - i) as f64)
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(id: u64, label: usize, version: u32) -> Sample {
        Sample::new(id, vec![id as f64], label, version)
    }

    #[test]
    fn warm_up_keeps_first_items() {
        let mut b = MemoryBuffer::new(3, 0).unwrap();
        for i in 0..3 {
            assert_eq!(b.reservoir_update(s(i, i as usize, 0)), Some(i as usize));
        }
        let ids: Vec<u64> = b.occupied().map(|x| x.id).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        assert_eq!(b.seen_count(), 3);
        assert!(b.index_is_coherent());
    }

    #[test]
    fn zero_capacity_rejected() {
        assert!(MemoryBuffer::new(0, 1).is_err());
    }

    #[test]
    fn full_after_capacity_offers() {
        let mut b = MemoryBuffer::new(10, 3).unwrap();
        for i in 0..100 {
            b.reservoir_update(s(i, (i % 4) as usize, 0));
            assert!(b.len() <= 10);
            assert!(b.index_is_coherent());
        }
        assert_eq!(b.len(), 10);
        let partition: usize = (0..4).map(|c| b.class_count(c)).sum();
        assert_eq!(partition, b.len());
    }

    #[test]
    fn flush_absent_class_is_noop() {
        let mut b = MemoryBuffer::new(4, 0).unwrap();
        b.reservoir_update(s(0, 1, 0));
        assert!(b.amr_flush(7).is_empty());
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn flush_frees_exactly_the_class_slots() {
        let mut b = MemoryBuffer::new(12, 0).unwrap();
        for i in 0..12 {
            b.reservoir_update(s(i, if i < 7 { 2 } else { 5 }, 0));
        }
        let before: Vec<usize> = b.class_slots(2).collect();
        let seen = b.seen_count();
        let freed = b.amr_flush(2);
        assert_eq!(freed, before);
        assert_eq!(freed.len(), 7);
        assert_eq!(b.class_count(2), 0);
        assert!(b.class_samples(2).is_empty());
        assert_eq!(b.seen_count(), seen);
        assert!(b.index_is_coherent());
    }

    #[test]
    fn resample_obeys_min_rule() {
        let mut b = MemoryBuffer::new(20, 9).unwrap();
        for i in 0..20 {
            b.reservoir_update(s(i, if i < 10 { 0 } else { 1 }, 0));
        }
        let freed = b.amr_flush(0);
        let pool: Vec<Sample> = (0..500).map(|i| s(1000 + i, 0, 1)).collect();
        assert_eq!(b.amr_resample(0, &pool, &freed).unwrap(), 10);
        assert_eq!(b.class_count(0), 10);
        assert!(b.class_samples(0).iter().all(|x| x.drift_version == 1));

        let freed = b.amr_flush(0);
        let small: Vec<Sample> = (0..4).map(|i| s(2000 + i, 0, 2)).collect();
        assert_eq!(b.amr_resample(0, &small, &freed).unwrap(), 4);
        assert_eq!(b.class_count(0), 4);
        assert_eq!(b.len(), 14);
        assert!(b.index_is_coherent());
    }

    #[test]
    fn resample_rejects_wrong_label() {
        let mut b = MemoryBuffer::new(4, 0).unwrap();
        b.reservoir_update(s(0, 0, 0));
        let freed = b.amr_flush(0);
        let pool = vec![s(1, 0, 1), s(2, 3, 1)];
        assert!(matches!(
            b.amr_resample(0, &pool, &freed),
            Err(Error::LabelMismatch { expected: 0, found: 3 })
        ));
    }

    #[test]
    fn closed_forms() {
        let p = replacement_probability(500, 50);
        assert!((p - 0.095_252_6).abs() < 1e-6, "{p}");
        assert!((expected_replaced(500, 10, 50) - 4.762_63).abs() < 1e-4);
        assert_eq!(replacement_probability(500, 0), 0.0);
        assert_eq!(replace_all_probability(500, 50, 49), 0.0);
        assert_eq!(replace_all_probability(500, 50, 500), 1.0);
        // C(3,1)/C(5,3) = 3/10 with |M|=5, |M_c|=2, n_c=3.
        assert!((replace_all_probability(5, 2, 3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn snapshot_roundtrips_through_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = MemoryBuffer::new(3, 0).unwrap();
        b.reservoir_update(s(4, 1, 2));
        let path = dir.path().join("buf.jsonl");
        b.write_snapshot(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let rec: SnapshotRecord = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(
            rec,
            SnapshotRecord {
                slot: 0,
                label: 1,
                drift_version: 2,
                features: vec![4.0]
            }
        );
    }
}
