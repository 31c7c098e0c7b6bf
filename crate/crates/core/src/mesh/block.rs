use crate::error::{Error, Result};
use crate::math::{Vec3, ZERO3};

/// One side of a block: an axis and a direction along it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Side {
    pub axis: usize,
    pub positive: bool,
}

impl Side {
    pub const fn new(axis: usize, positive: bool) -> Self {
        Side { axis, positive }
    }

    pub const fn lower(axis: usize) -> Self {
        Side { axis, positive: false }
    }

    pub const fn upper(axis: usize) -> Self {
        Side { axis, positive: true }
    }

    /// Outward normal sign `N_f`.
    pub fn sign(self) -> f64 {
        if self.positive {
            1.0
        } else {
            -1.0
        }
    }

    pub fn index(self) -> usize {
        2 * self.axis + usize::from(self.positive)
    }

    pub fn from_index(index: usize) -> Self {
        Side { axis: index / 2, positive: index % 2 == 1 }
    }

    pub fn opposite(self) -> Self {
        Side { axis: self.axis, positive: !self.positive }
    }

    pub fn all(dim: usize) -> impl Iterator<Item = Side> {
        (0..2 * dim).map(Side::from_index)
    }

    pub fn name(self) -> &'static str {
        ["-x", "+x", "-y", "+y", "-z", "+z"][self.index()]
    }

    pub fn parse(s: &str) -> Option<Side> {
        ["-x", "+x", "-y", "+y", "-z", "+z"].iter().position(|n| *n == s).map(Side::from_index)
    }
}

/// Maps each axis of the source block to an axis of the target block, optionally reversed.
/// The entry for the connected (normal) axis must map onto the target side's axis; its flip
/// flag is ignored because the crossing direction is fixed by the two sides.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Orientation {
    pub axis_map: [usize; 3],
    pub flip: [bool; 3],
}

impl Orientation {
    pub const IDENTITY: Orientation = Orientation { axis_map: [0, 1, 2], flip: [false; 3] };

    pub fn inverse(&self) -> Orientation {
        let mut inv = Orientation::IDENTITY;
        for k in 0..3 {
            inv.axis_map[self.axis_map[k]] = k;
            inv.flip[self.axis_map[k]] = self.flip[k];
        }
        inv
    }
}

impl Default for Orientation {
    fn default() -> Self {
        Orientation::IDENTITY
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoundarySpec {
    /// Prescribed velocity per boundary face.
    Dirichlet {
        velocity: Vec<Vec3>,
    },
    Connection {
        block: usize,
        side: Side,
        orientation: Orientation,
    },
    /// Non-reflecting outlet; `velocity` is the initial face velocity.
    AdvectiveOutflow {
        characteristic: Vec3,
        velocity: Vec<Vec3>,
    },
}

impl BoundarySpec {
    pub fn wall(faces: usize) -> Self {
        BoundarySpec::Dirichlet { velocity: vec![ZERO3; faces] }
    }

    pub fn uniform(faces: usize, velocity: Vec3) -> Self {
        BoundarySpec::Dirichlet { velocity: vec![velocity; faces] }
    }

    pub fn connect(block: usize, side: Side) -> Self {
        BoundarySpec::Connection { block, side, orientation: Orientation::IDENTITY }
    }
}

/// Structured block: cell resolution, vertex coordinates and one boundary spec per side.
///
/// Vertices are stored with the first axis fastest; a 2D block has `resolution[2] == 1` and a
/// single vertex layer.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpec {
    pub dim: usize,
    pub resolution: [usize; 3],
    pub vertices: Vec<Vec3>,
    pub boundaries: Vec<BoundarySpec>,
}

impl BlockSpec {
    /// Block with walls on every side.
    pub fn from_vertices(dim: usize, resolution: [usize; 3], vertices: Vec<Vec3>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidMesh(format!("dimension must be 2 or 3, got {dim}")));
        }
        let mut res = resolution;
        if dim == 2 {
            res[2] = 1;
        }
        if res[..dim].contains(&0) {
            return Err(Error::InvalidMesh(format!("zero resolution {res:?}")));
        }
        let mut block = BlockSpec { dim, resolution: res, vertices, boundaries: Vec::new() };
        let expected: usize = block.vertex_dims().iter().product();
        if block.vertices.len() != expected {
            return Err(Error::InvalidMesh(format!(
                "vertex array has {} entries, resolution {:?} needs {expected}",
                block.vertices.len(),
                res
            )));
        }
        block.boundaries = Side::all(dim).map(|s| BoundarySpec::wall(block.face_count(s))).collect();
        Ok(block)
    }

    /// Block whose vertex `(i, j, k)` is placed at `map([i, j, k])`.
    pub fn from_map(dim: usize, resolution: [usize; 3], map: impl Fn([f64; 3]) -> Vec3) -> Result<Self> {
        let mut res = resolution;
        if dim == 2 {
            res[2] = 1;
        }
        let vd = vertex_dims(dim, res);
        let mut vertices = Vec::with_capacity(vd.iter().product());
        for k in 0..vd[2] {
            for j in 0..vd[1] {
                for i in 0..vd[0] {
                    vertices.push(map([i as f64, j as f64, k as f64]));
                }
            }
        }
        Self::from_vertices(dim, res, vertices)
    }

    /// Tensor-product block from per-axis vertex coordinates.
    pub fn tensor(coords: &[Vec<f64>]) -> Result<Self> {
        let dim = coords.len();
        if !(2..=3).contains(&dim) || coords.iter().any(|c| c.len() < 2) {
            return Err(Error::InvalidMesh("tensor block needs 2 or 3 axes with ≥ 2 vertices".into()));
        }
        let mut res = [1; 3];
        for (a, c) in coords.iter().enumerate() {
            res[a] = c.len() - 1;
        }
        Self::from_map(dim, res, |ijk| {
            let mut x = ZERO3;
            for a in 0..dim {
                x[a] = coords[a][ijk[a] as usize];
            }
            x
        })
    }

    /// Uniform axis-aligned block.
    pub fn uniform(dim: usize, resolution: [usize; 3], origin: Vec3, size: Vec3) -> Result<Self> {
        let coords: Vec<Vec<f64>> =
            (0..dim).map(|a| (0..=resolution[a]).map(|i| origin[a] + size[a] * i as f64 / resolution[a] as f64).collect()).collect();
        Self::tensor(&coords)
    }

    pub fn with_boundary(mut self, side: Side, spec: BoundarySpec) -> Self {
        self.set_boundary(side, spec);
        self
    }

    pub fn set_boundary(&mut self, side: Side, spec: BoundarySpec) {
        self.boundaries[side.index()] = spec;
    }

    pub fn boundary(&self, side: Side) -> &BoundarySpec {
        &self.boundaries[side.index()]
    }

    pub fn vertex_dims(&self) -> [usize; 3] {
        vertex_dims(self.dim, self.resolution)
    }

    pub fn n_cells(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn vertex(&self, ijk: [usize; 3]) -> Vec3 {
        let vd = self.vertex_dims();
        self.vertices[ijk[0] + vd[0] * (ijk[1] + vd[1] * ijk[2])]
    }

    pub fn cell_index(&self, c: [usize; 3]) -> usize {
        c[0] + self.resolution[0] * (c[1] + self.resolution[1] * c[2])
    }

    pub fn cell_coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.resolution;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// Axes tangential to `side`, in increasing order.
    pub fn tangential_axes(&self, side: Side) -> Vec<usize> {
        (0..self.dim).filter(|&a| a != side.axis).collect()
    }

    pub fn face_count(&self, side: Side) -> usize {
        self.tangential_axes(side).iter().map(|&a| self.resolution[a]).product()
    }

    /// Index of the boundary face of cell `c` on `side`, first tangential axis fastest.
    pub fn face_index(&self, side: Side, c: [usize; 3]) -> usize {
        let mut index = 0;
        let mut stride = 1;
        for a in self.tangential_axes(side) {
            index += c[a] * stride;
            stride *= self.resolution[a];
        }
        index
    }

    /// Cell adjacent to boundary face `face` of `side`.
    pub fn face_cell(&self, side: Side, face: usize) -> [usize; 3] {
        let mut c = [0; 3];
        let mut rest = face;
        for a in self.tangential_axes(side) {
            c[a] = rest % self.resolution[a];
            rest /= self.resolution[a];
        }
        c[side.axis] = if side.positive { self.resolution[side.axis] - 1 } else { 0 };
        c
    }

    /// Whether cell `c` touches `side`.
    pub fn on_side(&self, side: Side, c: [usize; 3]) -> bool {
        if side.positive {
            c[side.axis] + 1 == self.resolution[side.axis]
        } else {
            c[side.axis] == 0
        }
    }
}

fn vertex_dims(dim: usize, res: [usize; 3]) -> [usize; 3] {
    let mut vd = [1; 3];
    for a in 0..dim {
        vd[a] = res[a] + 1;
    }
    vd
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn side_index_roundtrip() {
        for s in Side::all(3) {
            assert_eq!(Side::from_index(s.index()), s);
            assert_eq!(Side::parse(s.name()), Some(s));
        }
    }

    #[test]
    fn face_index_roundtrip() {
        let b = BlockSpec::uniform(3, [3, 4, 2], ZERO3, [1.0; 3]).unwrap();
        for s in Side::all(3) {
            for f in 0..b.face_count(s) {
                let c = b.face_cell(s, f);
                assert!(b.on_side(s, c));
                assert_eq!(b.face_index(s, c), f);
            }
        }
    }

    #[test]
    fn orientation_inverse() {
        let o = Orientation { axis_map: [1, 2, 0], flip: [true, false, true] };
        let inv = o.inverse();
        for k in 0..3 {
            assert_eq!(inv.axis_map[o.axis_map[k]], k);
            assert_eq!(inv.flip[o.axis_map[k]], o.flip[k]);
        }
        assert_eq!(inv.inverse(), o);
    }

    #[test]
    fn vertex_count_mismatch_rejected() {
        assert!(BlockSpec::from_vertices(2, [2, 2, 1], vec![ZERO3; 8]).is_err());
    }
}
