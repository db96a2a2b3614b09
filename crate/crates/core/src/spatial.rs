//! Exact nearest-neighbor search: a 3D kd-tree over cloud points and a
//! linear-scan index over high-dimensional descriptor vectors.
//!
//! All queries break distance ties deterministically (lowest point index,
//! lexicographically smallest provenance) so results match a brute-force
//! scan exactly.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::math::Vec3;

#[derive(Clone)]
struct Entry {
    pos: [f64; 3],
    /// index into the source cloud's point array
    idx: usize,
}

struct Node {
    entry: Entry,
    axis: usize,
    left: Option<Box<Node>>,
    right: Option<Box<Node>>,
}

/// Balanced kd-tree over the valid points of a cloud.
pub struct KdTree3 {
    root: Option<Box<Node>>,
    size: usize,
}

fn dist_sq(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn build(mut entries: Vec<Entry>, depth: usize) -> Option<Box<Node>> {
    if entries.is_empty() {
        return None;
    }
    let axis = depth % 3;
    let mid = entries.len() / 2;
    entries.select_nth_unstable_by(mid, |a, b| {
        a.pos[axis]
            .partial_cmp(&b.pos[axis])
            .unwrap()
            .then(a.idx.cmp(&b.idx))
    });
    let right: Vec<Entry> = entries.split_off(mid + 1);
    let entry = entries.pop().unwrap();
    Some(Box::new(Node {
        entry,
        axis,
        left: build(entries, depth + 1),
        right: build(right, depth + 1),
    }))
}

impl KdTree3 {
    /// Indexes exactly the valid points of the cloud.
    pub fn build(cloud: &PointCloud) -> Result<KdTree3> {
        let entries: Vec<Entry> = cloud
            .points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_valid())
            .map(|(i, p)| Entry { pos: [p.x, p.y, p.z], idx: i })
            .collect();
        if entries.is_empty() {
            return Err(Error::Empty("cloud has no valid points".into()));
        }
        let size = entries.len();
        Ok(KdTree3 { root: build(entries, 0), size })
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// The single nearest indexed point (ties: lowest index).
    pub fn nearest(&self, query: Vec3) -> (usize, f64) {
        let r = self.knn(query, 1);
        r[0]
    }

    /// The k nearest points as (cloud index, distance), ascending by
    /// (distance, index). Returns fewer when the tree is smaller than k.
    pub fn knn(&self, query: Vec3, k: usize) -> Vec<(usize, f64)> {
        assert!(k >= 1, "k must be >= 1");
        let q = [query.x, query.y, query.z];
        // max-heap on (d2, idx) keeps the current worst on top
        let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        fn worse(a: (f64, usize), b: (f64, usize)) -> bool {
            a.0 > b.0 || (a.0 == b.0 && a.1 > b.1)
        }
        fn push(heap: &mut Vec<(f64, usize)>, k: usize, item: (f64, usize)) {
            if heap.len() < k {
                heap.push(item);
                heap.sort_by(|a, b| {
                    b.0.partial_cmp(&a.0).unwrap().then(b.1.cmp(&a.1))
                });
            } else if worse(heap[0], item) {
                heap[0] = item;
                heap.sort_by(|a, b| {
                    b.0.partial_cmp(&a.0).unwrap().then(b.1.cmp(&a.1))
                });
            }
        }

        fn visit(
            node: &Node,
            q: &[f64; 3],
            k: usize,
            heap: &mut Vec<(f64, usize)>,
        ) {
            let d2 = dist_sq(&node.entry.pos, q);
            push(heap, k, (d2, node.entry.idx));
            let delta = q[node.axis] - node.entry.pos[node.axis];
            let (near, far) = if delta < 0.0 {
                (&node.left, &node.right)
            } else {
                (&node.right, &node.left)
            };
            if let Some(n) = near {
                visit(n, q, k, heap);
            }
            if let Some(f) = far {
                let worst = if heap.len() < k { f64::INFINITY } else { heap[0].0 };
                if delta * delta <= worst {
                    visit(f, q, k, heap);
                }
            }
        }

        if let Some(root) = &self.root {
            visit(root, &q, k, &mut heap);
        }
        heap.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        heap.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect()
    }

    /// All points within radius r as (cloud index, distance), ascending by
    /// (distance, index).
    pub fn radius_search(&self, query: Vec3, r: f64) -> Vec<(usize, f64)> {
        assert!(r > 0.0, "radius must be positive");
        let q = [query.x, query.y, query.z];
        let r2 = r * r;
        let mut out: Vec<(f64, usize)> = Vec::new();

        fn visit(node: &Node, q: &[f64; 3], r2: f64, out: &mut Vec<(f64, usize)>) {
            let d2 = dist_sq(&node.entry.pos, q);
            if d2 <= r2 {
                out.push((d2, node.entry.idx));
            }
            let delta = q[node.axis] - node.entry.pos[node.axis];
            let (near, far) = if delta < 0.0 {
                (&node.left, &node.right)
            } else {
                (&node.right, &node.left)
            };
            if let Some(n) = near {
                visit(n, q, r2, out);
            }
            if let Some(f) = far {
                if delta * delta <= r2 {
                    visit(f, q, r2, out);
                }
            }
        }

        if let Some(root) = &self.root {
            visit(root, &q, r2, &mut out);
        }
        out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        out.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect()
    }

    /// Number of indexed points within radius r (no sort, no allocation of
    /// distances); used by density weighting.
    pub fn radius_count(&self, query: Vec3, r: f64) -> usize {
        let q = [query.x, query.y, query.z];
        let r2 = r * r;
        fn visit(node: &Node, q: &[f64; 3], r2: f64, count: &mut usize) {
            if dist_sq(&node.entry.pos, q) <= r2 {
                *count += 1;
            }
            let delta = q[node.axis] - node.entry.pos[node.axis];
            let (near, far) = if delta < 0.0 {
                (&node.left, &node.right)
            } else {
                (&node.right, &node.left)
            };
            if let Some(n) = near {
                visit(n, q, r2, count);
            }
            if let Some(f) = far {
                if delta * delta <= r2 {
                    visit(f, q, r2, count);
                }
            }
        }
        let mut count = 0;
        if let Some(root) = &self.root {
            visit(root, &q, r2, &mut count);
        }
        count
    }
}

/// Identifies a descriptor row: (model, view, keypoint) positions in the
/// database's sorted order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Provenance {
    pub model: u32,
    pub view: u32,
    pub keypoint: u32,
}

/// Contiguous matrix of D-dimensional descriptor vectors with per-row
/// provenance; exact Euclidean nearest-neighbor by linear scan.
pub struct DescriptorIndex {
    dim: usize,
    data: Vec<f64>,
    provenance: Vec<Provenance>,
}

impl DescriptorIndex {
    pub fn new(dim: usize) -> Self {
        DescriptorIndex { dim, data: Vec::new(), provenance: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }

    pub fn push(&mut self, row: &[f64], prov: Provenance) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "descriptor has {} values, index dimension is {}",
                row.len(),
                self.dim
            )));
        }
        self.data.extend_from_slice(row);
        self.provenance.push(prov);
        Ok(())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn provenance(&self, i: usize) -> Provenance {
        self.provenance[i]
    }

    /// Exact nearest row by Euclidean distance; ties go to the
    /// lexicographically smallest provenance.
    pub fn nearest(&self, query: &[f64]) -> Result<(Provenance, f64)> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "query has {} values, index dimension is {}",
                query.len(),
                self.dim
            )));
        }
        if self.is_empty() {
            return Err(Error::Empty("descriptor index is empty".into()));
        }
        let mut best_d2 = f64::INFINITY;
        let mut best = 0usize;
        for i in 0..self.len() {
            let row = self.row(i);
            let mut d2 = 0.0;
            for (a, b) in row.iter().zip(query) {
                let d = a - b;
                d2 += d * d;
            }
            if d2 < best_d2 || (d2 == best_d2 && self.provenance[i] < self.provenance[best]) {
                best_d2 = d2;
                best = i;
            }
        }
        Ok((self.provenance[best], best_d2.sqrt()))
    }
}
