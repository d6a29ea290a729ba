//! Static 2-d tree over points for radius queries.

/// Immutable k-d tree: items are reordered in place so that each subtree is
/// a contiguous range split at its median.
#[derive(Debug, Clone)]
pub struct KdIndex {
    items: Vec<(u32, [f64; 2])>,
    node_size: usize,
}

impl KdIndex {
    pub fn new(points: impl IntoIterator<Item = [f64; 2]>) -> Self {
        Self::with_node_size(points, 64)
    }

    pub fn with_node_size(points: impl IntoIterator<Item = [f64; 2]>, node_size: usize) -> Self {
        let mut items: Vec<(u32, [f64; 2])> = points.into_iter().enumerate().map(|(i, p)| (i as u32, p)).collect();
        let node_size = node_size.max(1);
        build(&mut items, 0, node_size);
        KdIndex { items, node_size }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Ids of points with squared distance `<= r²` from `(x, y)`, ascending.
    pub fn within(&self, x: f64, y: f64, r: f64) -> Vec<usize> {
        let q = [x, y];
        let r2 = r * r;
        let mut out = Vec::new();
        let mut stack = vec![(0usize, self.items.len(), 0usize)];
        while let Some((lo, hi, axis)) = stack.pop() {
            if hi - lo <= self.node_size {
                for (id, p) in &self.items[lo..hi] {
                    if sq_dist(*p, q) <= r2 {
                        out.push(*id as usize);
                    }
                }
                continue;
            }
            let m = lo + (hi - lo) / 2;
            let (id, p) = self.items[m];
            if sq_dist(p, q) <= r2 {
                out.push(id as usize);
            }
            if q[axis] - r <= p[axis] {
                stack.push((lo, m, 1 - axis));
            }
            if q[axis] + r >= p[axis] {
                stack.push((m + 1, hi, 1 - axis));
            }
        }
        out.sort_unstable();
        out
    }
}

fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn build(items: &mut [(u32, [f64; 2])], axis: usize, node_size: usize) {
    if items.len() <= node_size {
        return;
    }
    let m = items.len() / 2;
    items.select_nth_unstable_by(m, |a, b| a.1[axis].total_cmp(&b.1[axis]).then(a.0.cmp(&b.0)));
    let (left, rest) = items.split_at_mut(m);
    build(left, 1 - axis, node_size);
    build(&mut rest[1..], 1 - axis, node_size);
}
