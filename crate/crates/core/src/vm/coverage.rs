use super::EdgeId;

/// AFL-style hit-count class as a single bit: 1, 2, 3, 4-7, 8-15, 16-31,
/// 32-127, 128+. Zero hits map to no bit.
pub fn bucket(hits: u32) -> u8 {
    match hits {
        0 => 0,
        1 => 1,
        2 => 1 << 1,
        3 => 1 << 2,
        4..=7 => 1 << 3,
        8..=15 => 1 << 4,
        16..=31 => 1 << 5,
        32..=127 => 1 << 6,
        _ => 1 << 7,
    }
}

/// Global coverage: for each edge, the set of hit-count buckets seen so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMap {
    seen: Vec<u8>,
    edges: usize,
}

impl CoverageMap {
    pub fn new(num_edges: usize) -> CoverageMap {
        CoverageMap {
            seen: vec![0; num_edges],
            edges: 0,
        }
    }

    /// Would observing `edges` set any new bucket bit?
    pub fn is_interesting(&self, edges: &[(EdgeId, u32)]) -> bool {
        edges
            .iter()
            .any(|&(e, n)| bucket(n) & !self.seen[e] != 0)
    }

    /// Records `edges`; returns whether anything new was seen.
    pub fn observe(&mut self, edges: &[(EdgeId, u32)]) -> bool {
        let mut new = false;
        for &(e, n) in edges {
            let b = bucket(n);
            if b & !self.seen[e] != 0 {
                if self.seen[e] == 0 {
                    self.edges += 1;
                }
                self.seen[e] |= b;
                new = true;
            }
        }
        new
    }

    pub fn merge(&mut self, other: &CoverageMap) {
        for (a, b) in self.seen.iter_mut().zip(&other.seen) {
            if *a == 0 && *b != 0 {
                self.edges += 1;
            }
            *a |= b;
        }
    }

    pub fn covers(&self, e: EdgeId) -> bool {
        self.seen[e] != 0
    }

    pub fn edges_covered(&self) -> usize {
        self.edges
    }
}
