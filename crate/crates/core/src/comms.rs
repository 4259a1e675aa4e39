//! Range-limited connectivity, hop counts and multi-hop aged exchange.
//!
//! A record relayed over `h` hops reaches its destination `h - 1` steps after
//! emission, so at step `k` agent `i` holds sender `j`'s record from
//! `k - h_ij + 1`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::radar::MeasurementRecord;

/// Hop count marking an unreachable pair.
pub const UNREACHABLE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommsConfig {
    /// Single-hop radius, m. May be infinite.
    pub r_max: f64,
    pub h_max: usize,
}

impl Default for CommsConfig {
    fn default() -> Self {
        Self {
            r_max: 900.0,
            h_max: 1,
        }
    }
}

impl CommsConfig {
    pub fn is_valid(&self) -> bool {
        self.r_max > 0.0 && self.h_max >= 1
    }
}

/// Shortest-path hop counts between all agents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopMatrix {
    n: usize,
    hops: Vec<usize>,
}

impl HopMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.hops[i * self.n + j]
    }

    /// Stable 64-bit digest, used to summarise topology in logs.
    pub fn digest(&self) -> u64 {
        // FNV-1a
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &v in &self.hops {
            for b in (v as u64).to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// BFS hop counts on the graph with an edge wherever two agents are within `r_max`.
pub fn build_graph(positions: &[Vec3], r_max: f64) -> HopMatrix {
    let n = positions.len();
    let r_sq = r_max * r_max;
    let adjacent = |a: usize, b: usize| (positions[a] - positions[b]).norm_squared() <= r_sq;
    let mut hops = vec![UNREACHABLE; n * n];
    let mut queue = VecDeque::with_capacity(n);
    for src in 0..n {
        let row = &mut hops[src * n..(src + 1) * n];
        row[src] = 0;
        queue.clear();
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let next = row[u] + 1;
            for v in 0..n {
                if row[v] == UNREACHABLE && adjacent(u, v) {
                    row[v] = next;
                    queue.push_back(v);
                }
            }
        }
    }
    HopMatrix { n, hops }
}

/// The last few records an agent has emitted, newest at the back.
#[derive(Debug, Clone, Default)]
pub struct RecordHistory {
    capacity: usize,
    records: VecDeque<MeasurementRecord>,
}

impl RecordHistory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            records: VecDeque::with_capacity(capacity.max(1)),
        }
    }

    pub fn push(&mut self, record: MeasurementRecord) {
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(record);
    }

    pub fn emitted_at(&self, k: usize) -> Option<&MeasurementRecord> {
        self.records.iter().rev().find(|r| r.emitted_at == k)
    }
}

/// One record as delivered to a receiving agent.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoEntry {
    pub record: MeasurementRecord,
    pub hops: usize,
    /// Emission step `k - hops + 1` (or `k` for the receiver's own record).
    pub effective_time: usize,
}

/// Everything agent `i` holds at step `k`, ordered by sender id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InfoVector {
    pub entries: Vec<InfoEntry>,
}

impl InfoVector {
    pub fn records(&self) -> impl Iterator<Item = &MeasurementRecord> {
        self.entries.iter().map(|e| &e.record)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Assembles agent `receiver`'s info vector at step `k` (steps start at 1).
pub fn gather(
    receiver: usize,
    histories: &[RecordHistory],
    hops: &HopMatrix,
    k: usize,
    h_max: usize,
) -> InfoVector {
    let mut entries = Vec::new();
    for (sender, history) in histories.iter().enumerate() {
        let h = hops.get(receiver, sender);
        if h == UNREACHABLE || h > h_max {
            continue;
        }
        let effective_time = if h == 0 {
            k
        } else {
            // Records from before the first step do not exist.
            match (k + 1).checked_sub(h) {
                Some(t) if t >= 1 => t,
                _ => continue,
            }
        };
        if let Some(record) = history.emitted_at(effective_time) {
            entries.push(InfoEntry {
                record: record.clone(),
                hops: h,
                effective_time,
            });
        }
    }
    InfoVector { entries }
}

/// Info vectors for every agent at step `k`.
pub fn exchange(
    histories: &[RecordHistory],
    hops: &HopMatrix,
    k: usize,
    h_max: usize,
) -> Vec<InfoVector> {
    (0..histories.len())
        .map(|i| gather(i, histories, hops, k, h_max))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radar::CapabilitySet;
    use proptest::prelude::*;

    fn record(sender: usize, k: usize) -> MeasurementRecord {
        MeasurementRecord {
            sender,
            sender_position: Vec3::zeros(),
            sender_velocity: Vec3::zeros(),
            emitted_at: k,
            los: true,
            caps: CapabilitySet::RANGING,
            range: None,
            azimuth: None,
            elevation: None,
            doppler: None,
        }
    }

    fn line(n: usize, spacing: f64) -> Vec<Vec3> {
        (0..n)
            .map(|i| Vec3::new(i as f64 * spacing, 0.0, 0.0))
            .collect()
    }

    fn histories(n: usize, upto: usize, capacity: usize) -> Vec<RecordHistory> {
        (0..n)
            .map(|j| {
                let mut h = RecordHistory::new(capacity);
                for k in 1..=upto {
                    h.push(record(j, k));
                }
                h
            })
            .collect()
    }

    #[test]
    fn hop_examples() {
        let g = build_graph(&line(3, 400.0), 505.0);
        assert_eq!(g.get(0, 2), 2);
        assert_eq!(g.get(0, 1), 1);

        let square = [
            Vec3::new(-50.0, -50.0, 100.0),
            Vec3::new(-50.0, 500.0, 120.0),
            Vec3::new(500.0, -50.0, 90.0),
            Vec3::new(500.0, 500.0, 140.0),
        ];
        let g = build_graph(&square, 900.0);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(g.get(i, j), usize::from(i != j));
            }
        }

        let mut pts = line(2, 10.0);
        pts.push(Vec3::new(1e6, 0.0, 0.0));
        let g = build_graph(&pts, 100.0);
        assert_eq!(g.get(2, 0), UNREACHABLE);
        assert_eq!(g.get(1, 2), UNREACHABLE);
        assert_eq!(g.get(2, 2), 0);
    }

    #[test]
    fn two_hop_record_is_one_step_old() {
        let g = build_graph(&line(3, 400.0), 505.0);
        let hist = histories(3, 30, 3);
        let info = gather(0, &hist, &g, 30, 3);
        let far = info.entries.iter().find(|e| e.record.sender == 2).unwrap();
        assert_eq!(far.effective_time, 29);
        assert_eq!(far.record.emitted_at, 29);
        let near = info.entries.iter().find(|e| e.record.sender == 1).unwrap();
        assert_eq!(near.effective_time, 30);
        let own = info.entries.iter().find(|e| e.record.sender == 0).unwrap();
        assert_eq!(own.effective_time, 30);
    }

    #[test]
    fn single_hop_limit_on_a_chain() {
        let g = build_graph(&line(3, 400.0), 505.0);
        let hist = histories(3, 5, 1);
        let infos = exchange(&hist, &g, 5, 1);
        let senders = |i: usize| infos[i].records().map(|r| r.sender).collect::<Vec<_>>();
        assert_eq!(senders(1), vec![0, 1, 2]);
        assert_eq!(senders(0), vec![0, 1]);
        assert_eq!(senders(2), vec![1, 2]);
    }

    #[test]
    fn startup_omits_records_from_before_step_one() {
        let g = build_graph(&line(4, 400.0), 505.0);
        let hist = histories(4, 1, 4);
        let info = gather(0, &hist, &g, 1, 4);
        let senders: Vec<_> = info.records().map(|r| r.sender).collect();
        assert_eq!(senders, vec![0, 1]);
    }

    #[test]
    fn infinite_range_shares_everything_instantly() {
        let pts = line(5, 1e5);
        let g = build_graph(&pts, f64::INFINITY);
        let hist = histories(5, 7, 1);
        for info in exchange(&hist, &g, 7, 1) {
            assert_eq!(info.len(), 5);
            assert!(info.entries.iter().all(|e| e.effective_time == 7));
        }
    }

    proptest! {
        #[test]
        fn hop_matrix_is_a_metric(coords in proptest::collection::vec((0.0..1000.0f64, 0.0..1000.0f64), 1..12),
                                  r in 50.0..600.0f64) {
            let pts: Vec<Vec3> = coords.iter().map(|&(x, y)| Vec3::new(x, y, 0.0)).collect();
            let g = build_graph(&pts, r);
            let n = pts.len();
            for i in 0..n {
                prop_assert_eq!(g.get(i, i), 0);
                for j in 0..n {
                    prop_assert_eq!(g.get(i, j), g.get(j, i));
                    for k in 0..n {
                        let (ij, jk, ik) = (g.get(i, j), g.get(j, k), g.get(i, k));
                        if ij != UNREACHABLE && jk != UNREACHABLE {
                            prop_assert!(ik <= ij + jk);
                        }
                    }
                }
            }
        }

        #[test]
        fn delivered_records_are_causal(coords in proptest::collection::vec((0.0..1500.0f64, 0.0..1500.0f64), 2..8),
                                        k in 1usize..20, h_max in 1usize..4) {
            let pts: Vec<Vec3> = coords.iter().map(|&(x, y)| Vec3::new(x, y, 0.0)).collect();
            let g = build_graph(&pts, 505.0);
            let hist = histories(pts.len(), k, h_max);
            for (i, info) in exchange(&hist, &g, k, h_max).iter().enumerate() {
                for e in &info.entries {
                    let h = g.get(i, e.record.sender);
                    prop_assert!(h <= h_max);
                    prop_assert!(e.record.emitted_at <= k);
                    let expected = if h == 0 { k } else { k + 1 - h };
                    prop_assert_eq!(e.record.emitted_at, expected);
                }
            }
        }
    }
}
