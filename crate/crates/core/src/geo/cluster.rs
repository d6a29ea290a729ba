//! Zoom-hierarchical greedy point clustering.
//!
//! Levels are built once, from `max_zoom - 1` down to 0. At each level the
//! previous level's items are visited in order; an unvisited item absorbs
//! every unvisited item within `radius_px / (extent_px * 2^zoom)` world units.
//! A cluster sits at the mean of its member leaves. The top level
//! (`max_zoom`) holds the leaves themselves.

use super::kdindex::KdIndex;
use super::{GeoError, WorldPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterOptions {
    pub radius_px: f64,
    pub extent_px: f64,
    pub max_zoom: u8,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions { radius_px: 40.0, extent_px: 512.0, max_zoom: 16 }
    }
}

impl ClusterOptions {
    pub fn validate(&self) -> Result<(), GeoError> {
        if !(self.radius_px.is_finite() && self.radius_px > 0.0) {
            return Err(GeoError::BadOptions(format!("radius_px must be positive, got {}", self.radius_px)));
        }
        if !(self.extent_px.is_finite() && self.extent_px > 0.0) {
            return Err(GeoError::BadOptions(format!("extent_px must be positive, got {}", self.extent_px)));
        }
        if self.max_zoom > 30 {
            return Err(GeoError::BadOptions(format!("max_zoom {} above 30", self.max_zoom)));
        }
        Ok(())
    }

    /// Clustering radius in world units at `zoom`.
    pub fn world_radius(&self, zoom: u8) -> f64 {
        self.radius_px / (self.extent_px * 2f64.powi(i32::from(zoom)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterKind {
    /// Index of the input point.
    Leaf {
        index: usize,
    },
    Cluster {
        id: usize,
        expansion_zoom: u8,
    },
}

/// A feature at some zoom level: one input point or a cluster of several.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterNode {
    pub position: WorldPoint,
    pub count: u32,
    pub kind: ClusterKind,
    sum: [f64; 2],
}

#[derive(Debug, Clone)]
struct ClusterRecord {
    zoom: u8,
    /// Indices into the level at `zoom + 1`.
    children: Vec<usize>,
}

/// All levels for one point set.
#[derive(Debug, Clone)]
pub struct ClusterIndex {
    options: ClusterOptions,
    levels: Vec<Vec<ClusterNode>>,
    clusters: Vec<ClusterRecord>,
}

impl ClusterIndex {
    pub fn build(points: &[WorldPoint], options: ClusterOptions) -> Result<Self, GeoError> {
        options.validate()?;
        let max = usize::from(options.max_zoom);
        let mut levels: Vec<Vec<ClusterNode>> = vec![Vec::new(); max + 1];
        levels[max] = points
            .iter()
            .enumerate()
            .map(|(index, p)| ClusterNode {
                position: *p,
                count: 1,
                kind: ClusterKind::Leaf { index },
                sum: [p.x, p.y],
            })
            .collect();
        let mut clusters = Vec::new();
        for zoom in (0..options.max_zoom).rev() {
            let next = cluster_level(&levels[usize::from(zoom) + 1], zoom, &options, &mut clusters);
            levels[usize::from(zoom)] = next;
        }
        Ok(ClusterIndex { options, levels, clusters })
    }

    pub fn options(&self) -> &ClusterOptions {
        &self.options
    }

    fn check_zoom(&self, zoom: i64) -> Result<usize, GeoError> {
        if zoom < 0 || zoom > i64::from(self.options.max_zoom) {
            return Err(GeoError::ZoomOutOfRange { zoom, max_zoom: self.options.max_zoom });
        }
        Ok(zoom as usize)
    }

    /// Features at `zoom`, in deterministic order.
    pub fn clusters(&self, zoom: i64) -> Result<&[ClusterNode], GeoError> {
        let z = self.check_zoom(zoom)?;
        Ok(&self.levels[z])
    }

    /// Smallest zoom at which the cluster's members no longer form a single
    /// feature; capped at `max_zoom`.
    pub fn expansion_zoom(&self, node: &ClusterNode) -> Result<u8, GeoError> {
        match node.kind {
            ClusterKind::Cluster { expansion_zoom, .. } => Ok(expansion_zoom),
            ClusterKind::Leaf { index } => Err(GeoError::NotACluster(index)),
        }
    }

    /// Input indices of every leaf under `node`, ascending.
    pub fn leaves(&self, node: &ClusterNode) -> Vec<usize> {
        let mut out = Vec::with_capacity(node.count as usize);
        let mut stack = vec![node.kind];
        while let Some(kind) = stack.pop() {
            match kind {
                ClusterKind::Leaf { index } => out.push(index),
                ClusterKind::Cluster { id, .. } => {
                    let rec = &self.clusters[id];
                    let below = &self.levels[usize::from(rec.zoom) + 1];
                    stack.extend(rec.children.iter().map(|&c| below[c].kind));
                }
            }
        }
        out.sort_unstable();
        out
    }
}

fn cluster_level(
    prev: &[ClusterNode],
    zoom: u8,
    options: &ClusterOptions,
    clusters: &mut Vec<ClusterRecord>,
) -> Vec<ClusterNode> {
    let tree = KdIndex::new(prev.iter().map(|n| [n.position.x, n.position.y]));
    let r = options.world_radius(zoom);
    let mut visited = vec![false; prev.len()];
    let mut out = Vec::with_capacity(prev.len());
    for i in 0..prev.len() {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let seed = &prev[i];
        let neighbors: Vec<usize> =
            tree.within(seed.position.x, seed.position.y, r).into_iter().filter(|&j| !visited[j]).collect();
        if neighbors.is_empty() {
            out.push(seed.clone());
            continue;
        }
        let mut sum = seed.sum;
        let mut count = seed.count;
        let mut children = Vec::with_capacity(neighbors.len() + 1);
        children.push(i);
        for j in neighbors {
            visited[j] = true;
            sum[0] += prev[j].sum[0];
            sum[1] += prev[j].sum[1];
            count += prev[j].count;
            children.push(j);
        }
        let id = clusters.len();
        clusters.push(ClusterRecord { zoom, children });
        let n = f64::from(count);
        out.push(ClusterNode {
            position: WorldPoint { x: sum[0] / n, y: sum[1] / n },
            count,
            kind: ClusterKind::Cluster { id, expansion_zoom: (zoom + 1).min(options.max_zoom) },
            sum,
        });
    }
    out
}

/// Builds an index over `points` and returns the features at `zoom`.
pub fn cluster(points: &[WorldPoint], zoom: i64, options: ClusterOptions) -> Result<Vec<ClusterNode>, GeoError> {
    let index = ClusterIndex::build(points, options)?;
    Ok(index.clusters(zoom)?.to_vec())
}
