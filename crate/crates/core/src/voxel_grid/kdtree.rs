use crate::pc_io::{Coord, PointCloud};

/// Inclusive axis-aligned integer box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Aabb {
    pub min: Coord,
    pub max: Coord,
}

impl Aabb {
    pub fn of(coords: impl IntoIterator<Item = Coord>) -> Option<Self> {
        let mut it = coords.into_iter();
        let first = it.next()?;
        Some(it.fold(Aabb { min: first, max: first }, |b, c| Aabb {
            min: std::array::from_fn(|k| b.min[k].min(c[k])),
            max: std::array::from_fn(|k| b.max[k].max(c[k])),
        }))
    }

    pub fn contains(&self, c: Coord) -> bool {
        (0..3).all(|k| self.min[k] <= c[k] && c[k] <= self.max[k])
    }

    /// First axis of maximal extent (ties go x, then y, then z).
    pub fn longest_axis(&self) -> usize {
        let ext: [u32; 3] = std::array::from_fn(|k| self.max[k] - self.min[k]);
        let mut axis = 0;
        for k in 1..3 {
            if ext[k] > ext[axis] {
                axis = k;
            }
        }
        axis
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    /// Indices into the partitioned cloud, ascending.
    pub indices: Vec<usize>,
    /// Tight box of the members; empty patches inherit their parent's box.
    pub bounds: Aabb,
}

/// Recursive median split into exactly `2^depth` patches.
///
/// Each node splits along the longest extent of its bounding box. Members
/// are ordered by that axis (full coordinate, then index, breaks ties) and
/// the lower half takes `ceil(n/2)` points, so the median goes low.
pub fn kd_partition(pc: &PointCloud, depth: u32) -> Vec<Patch> {
    let coords = pc.coords();
    let root = Aabb::of(coords.iter().copied()).unwrap_or(Aabb { min: [0; 3], max: [0; 3] });
    let mut out = Vec::with_capacity(1 << depth);
    split(coords, (0..coords.len()).collect(), root, depth, &mut out);
    out
}

fn split(coords: &[Coord], mut indices: Vec<usize>, hint: Aabb, depth: u32, out: &mut Vec<Patch>) {
    let bounds = Aabb::of(indices.iter().map(|&i| coords[i])).unwrap_or(hint);
    if depth == 0 {
        indices.sort_unstable();
        out.push(Patch { indices, bounds });
        return;
    }
    let axis = bounds.longest_axis();
    indices.sort_unstable_by_key(|&i| {
        let c = coords[i];
        (c[axis], c, i)
    });
    let upper = indices.split_off(indices.len().div_ceil(2));
    split(coords, indices, bounds, depth - 1, out);
    split(coords, upper, bounds, depth - 1, out);
}
