//! Finite observation windows of infinite regular graphs: the d-regular tree,
//! the cycle, and the torus, with exact neighbor and distance structure.
//!
//! Vertices carry stable 64-bit ids. On the tree the id is the breadth-first
//! index, which is equivalent to the canonical root-to-vertex path of child
//! indices and decodes back to it exactly; on the cycle and torus it packs
//! the coordinates. Window vertex sets are closed balls around a designated
//! root; neighbors that fall outside the window are flagged, never dropped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque vertex identifier, injective within a window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphFamily {
    /// Infinite d-regular tree, d >= 3.
    RegularTree { degree: u32 },
    /// Cycle on `length` vertices (2-regular).
    Cycle { length: u64 },
    /// `dim`-dimensional torus of side `side` (2*dim-regular).
    Torus { dim: u32, side: u64 },
}

impl GraphFamily {
    pub fn degree(&self) -> u32 {
        match *self {
            GraphFamily::RegularTree { degree } => degree,
            GraphFamily::Cycle { .. } => 2,
            GraphFamily::Torus { dim, .. } => 2 * dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GraphFamily::RegularTree { degree } if degree < 3 => {
                Err(Error::domain("regular tree requires degree >= 3"))
            }
            GraphFamily::Cycle { length } if length < 3 => {
                Err(Error::domain("cycle requires length >= 3"))
            }
            GraphFamily::Torus { dim, side } if dim == 0 || side < 3 => {
                Err(Error::domain("torus requires dim >= 1 and side >= 3"))
            }
            _ => Ok(()),
        }
    }

    /// True when the whole (finite) graph fits in any ball of radius >= r.
    fn covering_radius(&self) -> Option<u32> {
        match *self {
            GraphFamily::RegularTree { .. } => None,
            GraphFamily::Cycle { length } => Some((length / 2) as u32),
            GraphFamily::Torus { dim, side } => Some(dim * (side / 2) as u32),
        }
    }
}

/// What happens to walkers at the edge of the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Steps are renormalized over in-window neighbors.
    Absorb,
    /// A walker that draws an out-of-window step freezes and the run is
    /// flagged censored for any cluster that touched the boundary.
    Reject,
}

/// A closed ball of given radius around the family's root vertex.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Window {
    pub family: GraphFamily,
    pub radius: u32,
    pub boundary_policy: BoundaryPolicy,
    /// First id of each tree level, levels 0..=radius+1.
    #[serde(skip)]
    tree_offsets: Vec<u64>,
    #[serde(skip)]
    vertex_count: u64,
}

impl Window {
    pub fn new(family: GraphFamily, radius: u32, boundary_policy: BoundaryPolicy) -> Result<Self> {
        family.validate()?;
        let mut w = Window {
            family,
            radius,
            boundary_policy,
            tree_offsets: Vec::new(),
            vertex_count: 0,
        };
        w.build_index()?;
        Ok(w)
    }

    /// Window that covers the entire finite graph (cycle/torus only); walkers
    /// never meet a boundary there, so occupation statistics are exact.
    pub fn full(family: GraphFamily, boundary_policy: BoundaryPolicy) -> Result<Self> {
        let radius = family
            .covering_radius()
            .ok_or_else(|| Error::domain("infinite family has no covering window"))?;
        Window::new(family, radius, boundary_policy)
    }

    fn build_index(&mut self) -> Result<()> {
        match self.family {
            GraphFamily::RegularTree { degree } => {
                let d = u64::from(degree);
                let mut offsets = Vec::with_capacity(self.radius as usize + 2);
                offsets.push(0u64);
                offsets.push(1u64);
                let mut level = d; // size of level 1
                for k in 1..=self.radius as usize {
                    let next = offsets[k]
                        .checked_add(level)
                        .ok_or_else(|| Error::domain("tree window too large for 64-bit ids"))?;
                    offsets.push(next);
                    level = level
                        .checked_mul(d - 1)
                        .ok_or_else(|| Error::domain("tree window too large for 64-bit ids"))?;
                }
                self.vertex_count = *offsets.last().expect("nonempty");
                self.tree_offsets = offsets;
            }
            GraphFamily::Cycle { length } => {
                self.vertex_count = (2 * u64::from(self.radius) + 1).min(length);
            }
            GraphFamily::Torus { dim, side } => {
                let mut count = 0u64;
                let total = side.pow(dim);
                for id in 0..total {
                    if self.torus_root_distance(id) <= u64::from(self.radius) {
                        count += 1;
                    }
                }
                self.vertex_count = count;
            }
        }
        Ok(())
    }

    pub fn root(&self) -> VertexId {
        VertexId(0)
    }

    /// Number of vertices in the window ball.
    pub fn ball_size(&self) -> u64 {
        self.vertex_count
    }

    /// Whether the window is the whole finite graph (no boundary at all).
    pub fn is_saturated(&self) -> bool {
        match self.family {
            GraphFamily::RegularTree { .. } => false,
            GraphFamily::Cycle { length } => self.vertex_count == length,
            GraphFamily::Torus { dim, side } => self.vertex_count == side.pow(dim),
        }
    }

    pub fn contains(&self, v: VertexId) -> bool {
        match self.family {
            GraphFamily::RegularTree { .. } => v.0 < self.vertex_count,
            GraphFamily::Cycle { length } => {
                v.0 < length && self.cycle_root_distance(v.0) <= u64::from(self.radius)
            }
            GraphFamily::Torus { dim, side } => {
                v.0 < side.pow(dim) && self.torus_root_distance(v.0) <= u64::from(self.radius)
            }
        }
    }

    /// Graph distance of `v` from the root.
    pub fn depth(&self, v: VertexId) -> Result<u32> {
        if !self.contains(v) {
            return Err(Error::OutOfWindow(v));
        }
        Ok(match self.family {
            GraphFamily::RegularTree { .. } => self.tree_depth(v.0),
            GraphFamily::Cycle { .. } => self.cycle_root_distance(v.0) as u32,
            GraphFamily::Torus { .. } => self.torus_root_distance(v.0) as u32,
        })
    }

    /// Iterate the ids of every vertex in the window.
    pub fn iter_vertices(&self) -> Box<dyn Iterator<Item = VertexId> + '_> {
        match self.family {
            GraphFamily::RegularTree { .. } => Box::new((0..self.vertex_count).map(VertexId)),
            GraphFamily::Cycle { length } => {
                let r = u64::from(self.radius);
                Box::new((0..length).map(VertexId).filter(move |v| {
                    self.cycle_root_distance(v.0) <= r
                }))
            }
            GraphFamily::Torus { dim, side } => {
                let r = u64::from(self.radius);
                Box::new((0..side.pow(dim)).map(VertexId).filter(move |v| {
                    self.torus_root_distance(v.0) <= r
                }))
            }
        }
    }

    /// All `d` neighbors of `v` in the infinite graph, each flagged with
    /// whether it lies inside the window. Order is fixed: on the tree the
    /// parent comes first, then children by child index; on the cycle +1
    /// before -1; on the torus axis-major, + before -.
    pub fn neighbors(&self, v: VertexId) -> Result<Vec<(VertexId, bool)>> {
        if !self.contains(v) {
            return Err(Error::OutOfWindow(v));
        }
        let d = self.family.degree();
        let mut out = Vec::with_capacity(d as usize);
        for j in 0..d {
            out.push(self.step_target(v, j));
        }
        debug_assert_eq!(out.len(), d as usize);
        Ok(out)
    }

    /// The `j`-th neighbor of `v` (same order as [`Window::neighbors`]),
    /// with its in-window flag. O(1); this is the walker hot path.
    #[inline]
    pub fn step_target(&self, v: VertexId, j: u32) -> (VertexId, bool) {
        match self.family {
            GraphFamily::RegularTree { degree } => self.tree_step(v.0, j, degree),
            GraphFamily::Cycle { length } => {
                let t = if j == 0 {
                    (v.0 + 1) % length
                } else {
                    (v.0 + length - 1) % length
                };
                (VertexId(t), self.cycle_root_distance(t) <= u64::from(self.radius))
            }
            GraphFamily::Torus { dim: _, side } => {
                let axis = j / 2;
                let base = side.pow(axis);
                let coord = (v.0 / base) % side;
                let shifted = if j % 2 == 0 {
                    (coord + 1) % side
                } else {
                    (coord + side - 1) % side
                };
                let t = v.0 - coord * base + shifted * base;
                (VertexId(t), self.torus_root_distance(t) <= u64::from(self.radius))
            }
        }
    }

    #[inline]
    fn tree_step(&self, v: u64, j: u32, degree: u32) -> (VertexId, bool) {
        let d = u64::from(degree);
        if v == 0 {
            // root: all d slots are children
            let child = 1 + u64::from(j);
            (VertexId(child), self.radius >= 1)
        } else {
            let depth = self.tree_depth(v) as usize;
            if j == 0 {
                (VertexId(self.tree_parent(v, depth)), true)
            } else {
                let idx = v - self.tree_offsets[depth];
                let child_level_start = if depth + 1 < self.tree_offsets.len() {
                    self.tree_offsets[depth + 1]
                } else {
                    // children beyond radius+1 are never materialized as ids;
                    // depth == radius here because contains(v) held
                    u64::MAX
                };
                let in_window = (depth as u32) < self.radius;
                if child_level_start == u64::MAX {
                    return (VertexId(u64::MAX), false);
                }
                let child = child_level_start + idx * (d - 1) + u64::from(j - 1);
                (VertexId(child), in_window)
            }
        }
    }

    #[inline]
    pub(crate) fn tree_depth(&self, v: u64) -> u32 {
        // offsets are tiny (<= radius+2 entries); linear scan beats binary
        // search at these sizes and is branch-predictable for walkers that
        // mostly sit near the boundary.
        let mut k = 0u32;
        for (i, &off) in self.tree_offsets.iter().enumerate().skip(1) {
            if v < off {
                return k;
            }
            k = i as u32;
        }
        k
    }

    #[inline]
    fn tree_parent(&self, v: u64, depth: usize) -> u64 {
        debug_assert!(depth >= 1);
        if depth == 1 {
            return 0;
        }
        let d = u64::from(self.family.degree());
        let idx = v - self.tree_offsets[depth];
        self.tree_offsets[depth - 1] + idx / (d - 1)
    }

    fn cycle_root_distance(&self, v: u64) -> u64 {
        let GraphFamily::Cycle { length } = self.family else {
            unreachable!()
        };
        v.min(length - v)
    }

    fn torus_root_distance(&self, v: u64) -> u64 {
        let GraphFamily::Torus { dim, side } = self.family else {
            unreachable!()
        };
        let mut dist = 0;
        let mut rest = v;
        for _ in 0..dim {
            let c = rest % side;
            rest /= side;
            dist += c.min(side - c);
        }
        dist
    }

    /// Exact graph distance in the infinite graph between two window vertices.
    pub fn distance(&self, u: VertexId, v: VertexId) -> Result<u64> {
        if !self.contains(u) {
            return Err(Error::OutOfWindow(u));
        }
        if !self.contains(v) {
            return Err(Error::OutOfWindow(v));
        }
        Ok(match self.family {
            GraphFamily::RegularTree { .. } => {
                let (mut a, mut b) = (u.0, v.0);
                let (mut da, mut db) = (self.tree_depth(a) as i64, self.tree_depth(b) as i64);
                let mut steps = 0u64;
                while da > db {
                    a = self.tree_parent(a, da as usize);
                    da -= 1;
                    steps += 1;
                }
                while db > da {
                    b = self.tree_parent(b, db as usize);
                    db -= 1;
                    steps += 1;
                }
                while a != b {
                    a = self.tree_parent(a, da as usize);
                    b = self.tree_parent(b, db as usize);
                    da -= 1;
                    db -= 1;
                    steps += 2;
                }
                steps
            }
            GraphFamily::Cycle { length } => {
                let diff = u.0.abs_diff(v.0);
                diff.min(length - diff)
            }
            GraphFamily::Torus { dim, side } => {
                let (mut ru, mut rv) = (u.0, v.0);
                let mut dist = 0;
                for _ in 0..dim {
                    let (cu, cv) = (ru % side, rv % side);
                    ru /= side;
                    rv /= side;
                    let diff = cu.abs_diff(cv);
                    dist += diff.min(side - diff);
                }
                dist
            }
        })
    }

    /// Vertex at graph distance `k` from the root along the canonical first
    /// direction (tree: child 0 chain; cycle/torus: +1 along the first axis).
    pub fn vertex_at_distance(&self, k: u32) -> Result<VertexId> {
        if u64::from(k) > u64::from(self.radius) {
            return Err(Error::domain(format!("distance {k} exceeds window radius")));
        }
        match self.family {
            GraphFamily::RegularTree { .. } => {
                let mut v = VertexId(0);
                for _ in 0..k {
                    v = self.step_target(v, if v.0 == 0 { 0 } else { 1 }).0;
                }
                Ok(v)
            }
            GraphFamily::Cycle { length } => {
                if u64::from(k) >= length {
                    return Err(Error::domain("distance exceeds cycle size"));
                }
                Ok(VertexId(u64::from(k)))
            }
            GraphFamily::Torus { side, .. } => {
                if u64::from(k) > side / 2 {
                    return Err(Error::domain("distance exceeds torus reach on one axis"));
                }
                Ok(VertexId(u64::from(k)))
            }
        }
    }

    /// Decode a tree vertex into its root path of child indices.
    pub fn tree_path(&self, v: VertexId) -> Result<Vec<u8>> {
        let GraphFamily::RegularTree { degree } = self.family else {
            return Err(Error::domain("tree path requested on non-tree family"));
        };
        if !self.contains(v) {
            return Err(Error::OutOfWindow(v));
        }
        let d = u64::from(degree);
        let mut path = Vec::new();
        let mut cur = v.0;
        let mut depth = self.tree_depth(cur) as usize;
        while depth > 0 {
            let idx = cur - self.tree_offsets[depth];
            let child = if depth == 1 { idx } else { idx % (d - 1) };
            path.push(child as u8);
            cur = self.tree_parent(cur, depth);
            depth -= 1;
        }
        path.reverse();
        Ok(path)
    }

    /// Encode a root path of child indices back into a tree vertex id.
    pub fn tree_encode(&self, path: &[u8]) -> Result<VertexId> {
        let GraphFamily::RegularTree { degree } = self.family else {
            return Err(Error::domain("tree encode requested on non-tree family"));
        };
        let mut v = VertexId(0);
        for (i, &c) in path.iter().enumerate() {
            let fan = if i == 0 { degree } else { degree - 1 };
            if u32::from(c) >= fan {
                return Err(Error::domain(format!("child index {c} out of range")));
            }
            let slot = if i == 0 { u32::from(c) } else { u32::from(c) + 1 };
            let (next, _) = self.step_target(v, slot);
            if next.0 == u64::MAX {
                return Err(Error::domain("path leaves the indexable window"));
            }
            v = next;
        }
        Ok(v)
    }

    /// Children of a tree vertex, split into the leftmost floor((d-1)/2) and
    /// the remaining rightmost ones; the root keeps d - floor((d-1)/2)
    /// children on the right.
    pub fn left_right_split(&self, a: VertexId) -> Result<(Vec<VertexId>, Vec<VertexId>)> {
        let GraphFamily::RegularTree { degree } = self.family else {
            return Err(Error::domain("left/right split requested on non-tree family"));
        };
        if !self.contains(a) {
            return Err(Error::OutOfWindow(a));
        }
        let l = (degree - 1) / 2;
        let child_slots: Vec<u32> = if a.0 == 0 {
            (0..degree).collect()
        } else {
            (1..degree).collect()
        };
        let mut children = Vec::with_capacity(child_slots.len());
        for slot in child_slots {
            let (c, _) = self.step_target(a, slot);
            if c.0 == u64::MAX {
                return Err(Error::domain(
                    "children of a boundary vertex are not indexable; widen the window",
                ));
            }
            children.push(c);
        }
        let right = children.split_off(l as usize);
        Ok((children, right))
    }

    /// True when `v` sits on the window boundary (only meaningful when the
    /// window does not already cover the whole graph).
    pub fn is_boundary(&self, v: VertexId) -> bool {
        if self.is_saturated() {
            return false;
        }
        match self.depth(v) {
            Ok(depth) => depth == self.radius,
            Err(_) => true,
        }
    }

    /// Number of in-window neighbors of `v` (used by the Absorb step law).
    pub fn in_window_degree(&self, v: VertexId) -> u32 {
        let d = self.family.degree();
        (0..d).filter(|&j| self.step_target(v, j).1).count() as u32
    }

    /// The `j`-th in-window neighbor (Absorb step law).
    pub fn in_window_neighbor(&self, v: VertexId, j: u32) -> Option<VertexId> {
        let d = self.family.degree();
        let mut seen = 0;
        for slot in 0..d {
            let (t, inside) = self.step_target(v, slot);
            if inside {
                if seen == j {
                    return Some(t);
                }
                seen += 1;
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tree(d: u32, r: u32) -> Window {
        Window::new(GraphFamily::RegularTree { degree: d }, r, BoundaryPolicy::Reject).unwrap()
    }

    #[test]
    fn cycle_adjacency_of_origin() {
        let w = Window::full(GraphFamily::Cycle { length: 5 }, BoundaryPolicy::Reject).unwrap();
        let n = w.neighbors(VertexId(0)).unwrap();
        assert_eq!(n, vec![(VertexId(1), true), (VertexId(4), true)]);
    }

    #[test]
    fn tree_root_has_d_children_in_window() {
        let w = tree(3, 2);
        let n = w.neighbors(w.root()).unwrap();
        assert_eq!(n.len(), 3);
        assert!(n.iter().all(|&(_, inside)| inside));
    }

    #[test]
    fn tree_boundary_vertex_flags_children_outside() {
        let w = tree(3, 2);
        let v = w.vertex_at_distance(2).unwrap();
        let n = w.neighbors(v).unwrap();
        assert_eq!(n.len(), 3);
        assert!(n[0].1, "parent must be in window");
        assert!(!n[1].1 && !n[2].1, "children at depth 3 are outside");
    }

    #[test]
    fn ball_sizes_match_closed_forms() {
        assert_eq!(tree(3, 2).ball_size(), 10); // 1 + 3 + 6
        assert_eq!(tree(4, 1).ball_size(), 5);
        let w = Window::new(GraphFamily::Cycle { length: 9 }, 3, BoundaryPolicy::Reject).unwrap();
        assert_eq!(w.ball_size(), 7);
        // closed form 1 + d((d-1)^R - 1)/(d-2) for a couple of deeper cases
        let w = tree(4, 6);
        assert_eq!(w.ball_size(), 1 + 4 * (3u64.pow(6) - 1) / 2);
    }

    #[test]
    fn tree_distances() {
        let w = tree(3, 4);
        let v3 = w.vertex_at_distance(3).unwrap();
        assert_eq!(w.distance(w.root(), v3).unwrap(), 3);
        // two depth-2 vertices sharing the depth-1 parent
        let a = w.tree_encode(&[0, 0]).unwrap();
        let b = w.tree_encode(&[0, 1]).unwrap();
        assert_eq!(w.distance(a, b).unwrap(), 2);
    }

    #[test]
    fn torus_distance_wraps() {
        let w = Window::full(GraphFamily::Torus { dim: 2, side: 8 }, BoundaryPolicy::Reject)
            .unwrap();
        let far = VertexId(7 + 7 * 8); // (7, 7)
        assert_eq!(w.distance(VertexId(0), far).unwrap(), 2);
    }

    #[test]
    fn torus_distance_matches_bfs_oracle() {
        let w = Window::full(GraphFamily::Torus { dim: 2, side: 8 }, BoundaryPolicy::Reject)
            .unwrap();
        // breadth-first search from the root over the explicit torus
        let total = 64usize;
        let mut dist = vec![u64::MAX; total];
        let mut queue = std::collections::VecDeque::new();
        dist[0] = 0;
        queue.push_back(VertexId(0));
        while let Some(v) = queue.pop_front() {
            for (n, _) in w.neighbors(v).unwrap() {
                if dist[n.0 as usize] == u64::MAX {
                    dist[n.0 as usize] = dist[v.0 as usize] + 1;
                    queue.push_back(n);
                }
            }
        }
        for id in 0..total as u64 {
            assert_eq!(
                w.distance(VertexId(0), VertexId(id)).unwrap(),
                dist[id as usize],
                "vertex {id}"
            );
        }
    }

    #[test]
    fn regularity_every_vertex_has_d_flagged_neighbors() {
        for w in [
            tree(3, 3),
            tree(5, 2),
            Window::new(GraphFamily::Cycle { length: 12 }, 4, BoundaryPolicy::Absorb).unwrap(),
            Window::full(GraphFamily::Torus { dim: 2, side: 5 }, BoundaryPolicy::Reject).unwrap(),
        ] {
            let d = w.family.degree() as usize;
            for v in w.iter_vertices() {
                assert_eq!(w.neighbors(v).unwrap().len(), d);
            }
        }
    }

    #[test]
    fn split_sizes_follow_the_root_special_case() {
        let w = tree(5, 2);
        let a = w.vertex_at_distance(1).unwrap();
        let (l, r) = w.left_right_split(a).unwrap();
        assert_eq!((l.len(), r.len()), (2, 2));
        let (lr, rr) = w.left_right_split(w.root()).unwrap();
        assert_eq!((lr.len(), rr.len()), (2, 3));
        let w3 = tree(3, 2);
        let a3 = w3.vertex_at_distance(1).unwrap();
        let (l3, r3) = w3.left_right_split(a3).unwrap();
        assert_eq!((l3.len(), r3.len()), (1, 1));
    }

    #[test]
    fn split_partitions_the_children() {
        let w = tree(6, 3);
        for v in w.iter_vertices().take(50) {
            if w.depth(v).unwrap() >= w.radius {
                continue;
            }
            let (l, r) = w.left_right_split(v).unwrap();
            let mut all: Vec<_> = l.iter().chain(r.iter()).collect();
            all.sort();
            all.dedup();
            let expected = if v == w.root() { 6 } else { 5 };
            assert_eq!(all.len(), expected, "children partition exactly");
            for c in l.iter().chain(r.iter()) {
                assert_eq!(w.distance(v, *c).unwrap(), 1);
            }
        }
    }

    #[test]
    fn out_of_window_vertex_is_rejected() {
        let w = tree(3, 2);
        let outside = VertexId(w.ball_size());
        assert!(w.neighbors(outside).is_err());
        assert!(w.distance(w.root(), outside).is_err());
    }

    proptest! {
        #[test]
        fn tree_path_roundtrip(depth in 0usize..=12, seed in 0u64..10_000) {
            let w = tree(3, 12);
            let mut path = Vec::with_capacity(depth);
            let mut state = seed;
            for i in 0..depth {
                let fan = if i == 0 { 3 } else { 2 };
                state = crate::rng::mix64(state.wrapping_add(i as u64));
                path.push((state % fan) as u8);
            }
            let v = w.tree_encode(&path).unwrap();
            prop_assert_eq!(w.tree_path(v).unwrap(), path);
        }

        #[test]
        fn distance_symmetric_and_triangular(a in 0u64..40, b in 0u64..40, c in 0u64..40) {
            let w = tree(3, 4);
            let n = w.ball_size();
            let (a, b, c) = (VertexId(a % n), VertexId(b % n), VertexId(c % n));
            let ab = w.distance(a, b).unwrap();
            let ba = w.distance(b, a).unwrap();
            prop_assert_eq!(ab, ba);
            let ac = w.distance(a, c).unwrap();
            let cb = w.distance(c, b).unwrap();
            prop_assert!(ab <= ac + cb);
        }
    }
}
