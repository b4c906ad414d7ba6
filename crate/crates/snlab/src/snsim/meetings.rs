//! Meeting detection and the friend-cluster filtration.
//!
//! At every time step the active walkers are bucketed by position; all
//! walkers sharing a bucket are pairwise acquainted. Components of the
//! induced equivalence relation only ever merge as time grows, so the whole
//! filtration is stored as a log of merge events with their meeting times.

use std::collections::HashMap;

use crate::error::Result;
use crate::graphs::VertexId;
use crate::snsim::field::WalkerField;
use crate::snsim::unionfind::UnionFind;

/// One partition-changing meeting.
#[derive(Clone, Copy, Debug)]
pub struct MergeEvent {
    pub a: u32,
    pub b: u32,
    pub time: u32,
}

/// The friend-cluster filtration over the walkers of one field.
#[derive(Clone, Debug)]
pub struct FriendClusters {
    pub walker_count: u32,
    pub horizon: u32,
    origins: Vec<VertexId>,
    first_boundary: Vec<Option<u32>>,
    merges: Vec<MergeEvent>,
}

impl FriendClusters {
    /// Rebuild the partition as it stood at time `t`.
    pub fn partition_at(&self, t: u32) -> UnionFind {
        let mut uf = UnionFind::new(self.walker_count as usize);
        for m in &self.merges {
            if m.time > t {
                break;
            }
            uf.union(m.a, m.b);
        }
        uf
    }

    /// Walkers equivalent to some walker of `u` at time `t`; empty when `u`
    /// is initially unoccupied.
    pub fn friend_cluster(&self, u: VertexId, t: u32) -> Vec<u32> {
        let seeds: Vec<u32> = self
            .origins
            .iter()
            .enumerate()
            .filter(|(_, &o)| o == u)
            .map(|(i, _)| i as u32)
            .collect();
        let Some(&first) = seeds.first() else {
            return Vec::new();
        };
        let mut uf = self.partition_at(t);
        let root = uf.find(first);
        (0..self.walker_count).filter(|&w| uf.find(w) == root).collect()
    }

    /// Size of the largest component at time `t` and whether that component
    /// contains a walker that touched the window boundary by time `t`.
    pub fn max_cluster_size(&self, t: u32) -> (u32, bool) {
        if self.walker_count == 0 {
            return (0, false);
        }
        let mut uf = self.partition_at(t);
        let mut sizes: HashMap<u32, u32> = HashMap::new();
        let mut touched: HashMap<u32, bool> = HashMap::new();
        for w in 0..self.walker_count {
            let r = uf.find(w);
            *sizes.entry(r).or_insert(0) += 1;
            let hit = matches!(self.first_boundary[w as usize], Some(s) if s <= t);
            *touched.entry(r).or_insert(false) |= hit;
        }
        let (&root, &size) = sizes
            .iter()
            .max_by_key(|&(r, s)| (*s, std::cmp::Reverse(*r)))
            .expect("nonempty");
        (size, touched[&root])
    }

    /// Whether the clusters of `u` and `v` coincide at time `t`.
    pub fn same_cluster(&self, u: VertexId, v: VertexId, t: u32) -> bool {
        if u == v {
            return !self.walkers_of(u).is_empty();
        }
        let (su, sv) = (self.walkers_of(u), self.walkers_of(v));
        let (Some(&wu), Some(&wv)) = (su.first(), sv.first()) else {
            return false;
        };
        let mut uf = self.partition_at(t);
        uf.connected(wu, wv)
    }

    fn walkers_of(&self, u: VertexId) -> Vec<u32> {
        self.origins
            .iter()
            .enumerate()
            .filter(|(_, &o)| o == u)
            .map(|(i, _)| i as u32)
            .collect()
    }

    pub fn merges(&self) -> &[MergeEvent] {
        &self.merges
    }
}

/// Vertex-level acquaintance graph: initially occupied vertices joined by an
/// edge once walkers from the two origins have met, tagged with the first
/// meeting time.
#[derive(Clone, Debug, Default)]
pub struct AcquaintanceGraph {
    /// Canonical (low, high) origin pairs mapped to first meeting time.
    pub edges: HashMap<(VertexId, VertexId), u32>,
}

impl AcquaintanceGraph {
    pub fn edges_at(&self, t: u32) -> Vec<(VertexId, VertexId)> {
        let mut out: Vec<_> = self
            .edges
            .iter()
            .filter(|&(_, &s)| s <= t)
            .map(|(&e, _)| e)
            .collect();
        out.sort();
        out
    }

    fn record(&mut self, u: VertexId, v: VertexId, t: u32) {
        if u == v {
            return;
        }
        let key = if u < v { (u, v) } else { (v, u) };
        self.edges.entry(key).or_insert(t);
    }
}

/// Run the meeting dynamics over a realized field. Walkers sharing a vertex
/// at a time step are united (to the lowest walker id; the partition does
/// not depend on that order) and the origin pair is recorded.
pub fn simulate_meetings(field: &WalkerField) -> Result<(FriendClusters, AcquaintanceGraph)> {
    let n = field.walkers.len();
    let mut uf = UnionFind::new(n);
    let mut merges = Vec::new();
    let mut ac = AcquaintanceGraph::default();
    let mut buckets: HashMap<VertexId, Vec<u32>> = HashMap::new();
    for t in 0..=field.horizon {
        buckets.clear();
        for (i, w) in field.walkers.iter().enumerate() {
            if w.is_active(t) {
                buckets.entry(w.position(t)).or_default().push(i as u32);
            }
        }
        for members in buckets.values() {
            if members.len() < 2 {
                continue;
            }
            let head = members[0];
            for &other in &members[1..] {
                if uf.union(head, other) {
                    merges.push(MergeEvent {
                        a: head,
                        b: other,
                        time: t,
                    });
                }
                ac.record(
                    field.walkers[head as usize].origin,
                    field.walkers[other as usize].origin,
                    t,
                );
            }
            // origin pairs among the non-head members are acquainted too
            for i in 1..members.len() {
                for j in (i + 1)..members.len() {
                    ac.record(
                        field.walkers[members[i] as usize].origin,
                        field.walkers[members[j] as usize].origin,
                        t,
                    );
                }
            }
        }
    }
    let clusters = FriendClusters {
        walker_count: n as u32,
        horizon: field.horizon,
        origins: field.walkers.iter().map(|w| w.origin).collect(),
        first_boundary: field.walkers.iter().map(|w| w.first_boundary).collect(),
        merges,
    };
    Ok((clusters, ac))
}
