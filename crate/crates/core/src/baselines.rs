//! Reference searchers: exhaustive linear scan (the correctness oracle) and
//! a ball tree over Hamming space with triangle-inequality pruning.

use crate::bitcode::{BitCode, CodeSet};
use crate::error::{Error, Result};

/// Exact r-neighbor set by scanning the whole collection.
pub fn linear_scan(codes: &CodeSet, q: &BitCode, r: u32) -> Result<Vec<u32>> {
    if q.width() != codes.width() {
        return Err(Error::WidthMismatch {
            left: codes.width(),
            right: q.width(),
        });
    }
    Ok((0..codes.len() as u32)
        .filter(|&id| codes.code(id).hamming_unchecked(q) <= r)
        .collect())
}

/// Default bucket size for leaves.
pub const DEFAULT_LEAF_CAP: usize = 16;

#[derive(Debug)]
enum NodeKind {
    Leaf { ids: Vec<u32> },
    Internal { left: u32, right: u32 },
}

#[derive(Debug)]
struct Node {
    pivot: u32,
    covering_radius: u32,
    kind: NodeKind,
}

/// Query-side accounting. `full_verifications` counts distinct enrolled codes
/// whose full Hamming distance to the query was computed (pivot checks
/// included, deduplicated by id), which is what penetration-rate accounting
/// wants to know.
#[derive(Clone, Copy, Debug, Default)]
pub struct BallQueryStats {
    pub nodes_visited: u64,
    pub full_verifications: u64,
}

/// Ball tree over a code collection.
///
/// Construction picks each node's pivot as the member farthest from the
/// parent pivot, then partitions members to the nearer of that pivot and the
/// member farthest from it. Every code in a subtree lies within the node's
/// covering radius of its pivot, so a subtree can be skipped whenever
/// `d(q, pivot) > r + covering_radius`.
pub struct BallTree {
    codes: Vec<BitCode>,
    width: u32,
    nodes: Vec<Node>,
    root: u32,
}

impl BallTree {
    pub fn build(codes: &CodeSet, leaf_cap: usize) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::Empty("ball tree input"));
        }
        if leaf_cap == 0 {
            return Err(Error::InvalidParam("leaf_cap must be at least 1".into()));
        }
        let mut tree = Self {
            codes: codes.codes().to_vec(),
            width: codes.width(),
            nodes: Vec::new(),
            root: 0,
        };
        let all: Vec<u32> = (0..codes.len() as u32).collect();
        tree.build_nodes(all, leaf_cap);
        Ok(tree)
    }

    fn dist(&self, a: u32, b: u32) -> u32 {
        self.codes[a as usize].hamming_unchecked(&self.codes[b as usize])
    }

    /// Farthest member from `from`, ties to the smallest id.
    fn farthest(&self, ids: &[u32], from: u32) -> u32 {
        let mut best = ids[0];
        let mut best_d = self.dist(best, from);
        for &id in &ids[1..] {
            let d = self.dist(id, from);
            if d > best_d {
                best = id;
                best_d = d;
            }
        }
        best
    }

    fn build_nodes(&mut self, all: Vec<u32>, leaf_cap: usize) {
        // (node slot, members, parent pivot); the root's parent pivot is
        // seeded with the first code.
        self.root = 0;
        let mut work = vec![(0u32, all, 0u32)];
        self.nodes.push(Node {
            pivot: 0,
            covering_radius: 0,
            kind: NodeKind::Leaf { ids: vec![] },
        });
        while let Some((slot, ids, parent_pivot)) = work.pop() {
            let pivot = self.farthest(&ids, parent_pivot);
            let covering_radius = ids.iter().map(|&id| self.dist(id, pivot)).max().unwrap();
            if ids.len() <= leaf_cap {
                self.nodes[slot as usize] = Node {
                    pivot,
                    covering_radius,
                    kind: NodeKind::Leaf { ids },
                };
                continue;
            }
            let far = self.farthest(&ids, pivot);
            let mut left = Vec::new();
            let mut right = Vec::new();
            for &id in &ids {
                if self.dist(id, pivot) <= self.dist(id, far) {
                    left.push(id);
                } else {
                    right.push(id);
                }
            }
            if left.is_empty() || right.is_empty() {
                // Degenerate geometry (e.g. duplicates): fall back to a
                // median split on distance to the pivot.
                let mut by_dist: Vec<u32> = ids;
                by_dist.sort_by_key(|&id| (self.dist(id, pivot), id));
                let mid = by_dist.len() / 2;
                right = by_dist.split_off(mid);
                left = by_dist;
            }
            let left_slot = self.nodes.len() as u32;
            let right_slot = left_slot + 1;
            for _ in 0..2 {
                self.nodes.push(Node {
                    pivot: 0,
                    covering_radius: 0,
                    kind: NodeKind::Leaf { ids: vec![] },
                });
            }
            self.nodes[slot as usize] = Node {
                pivot,
                covering_radius,
                kind: NodeKind::Internal {
                    left: left_slot,
                    right: right_slot,
                },
            };
            work.push((right_slot, right, pivot));
            work.push((left_slot, left, pivot));
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Exact r-neighbor search with subtree pruning.
    pub fn query(&self, q: &BitCode, r: u32) -> Result<(Vec<u32>, BallQueryStats)> {
        if q.width() != self.width {
            return Err(Error::WidthMismatch {
                left: self.width,
                right: q.width(),
            });
        }
        let mut stats = BallQueryStats::default();
        let mut result = Vec::new();
        // Distance cache doubles as the verification dedup set.
        let mut cache = vec![u32::MAX; self.codes.len()];
        let mut dist = |id: u32, stats: &mut BallQueryStats| {
            let slot = &mut cache[id as usize];
            if *slot == u32::MAX {
                *slot = self.codes[id as usize].hamming_unchecked(q);
                stats.full_verifications += 1;
            }
            *slot
        };
        let mut stack = vec![self.root];
        while let Some(slot) = stack.pop() {
            let node = &self.nodes[slot as usize];
            stats.nodes_visited += 1;
            let d = dist(node.pivot, &mut stats);
            if d > r + node.covering_radius {
                continue;
            }
            match &node.kind {
                NodeKind::Leaf { ids } => {
                    for &id in ids {
                        if dist(id, &mut stats) <= r {
                            result.push(id);
                        }
                    }
                }
                NodeKind::Internal { left, right } => {
                    stack.push(*right);
                    stack.push(*left);
                }
            }
        }
        result.sort_unstable();
        Ok((result, stats))
    }
}
