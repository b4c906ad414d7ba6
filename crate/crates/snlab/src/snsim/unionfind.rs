/// Disjoint-set forest with union by size and path compression.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = x;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    /// Merge the sets of `a` and `b`; returns true when they were distinct.
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (big, small) = if self.size[ra as usize] >= self.size[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        true
    }

    pub fn component_size(&mut self, x: u32) -> u32 {
        let r = self.find(x);
        self.size[r as usize]
    }

    pub fn connected(&mut self, a: u32, b: u32) -> bool {
        self.find(a) == self.find(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_unions() {
        let mut uf = UnionFind::new(6);
        assert!(uf.union(0, 1));
        assert!(uf.union(2, 3));
        assert!(!uf.connected(0, 2));
        assert!(uf.union(1, 2));
        assert!(!uf.union(0, 3), "already joined");
        assert!(uf.connected(0, 3));
        assert_eq!(uf.component_size(3), 4);
        assert_eq!(uf.component_size(5), 1);
    }

    #[test]
    fn partition_is_independent_of_union_order() {
        let pairs = [(0u32, 1u32), (1, 2), (4, 5), (2, 4), (6, 7)];
        let mut perms: Vec<Vec<(u32, u32)>> = vec![pairs.to_vec()];
        let mut rev = pairs.to_vec();
        rev.reverse();
        perms.push(rev);
        let mut canon: Option<Vec<Vec<u32>>> = None;
        for perm in perms {
            let mut uf = UnionFind::new(8);
            for (a, b) in perm {
                uf.union(a, b);
            }
            let mut groups: std::collections::HashMap<u32, Vec<u32>> = Default::default();
            for x in 0..8 {
                groups.entry(uf.find(x)).or_default().push(x);
            }
            let mut sets: Vec<Vec<u32>> = groups.into_values().collect();
            sets.sort();
            match &canon {
                None => canon = Some(sets),
                Some(c) => assert_eq!(c, &sets),
            }
        }
    }
}
