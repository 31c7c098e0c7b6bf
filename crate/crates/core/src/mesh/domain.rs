use std::ops::Range;

use super::block::{BlockSpec, BoundarySpec, Orientation, Side};
use super::metrics::{compute_metrics, FaceMetrics, PointMetrics, TransformMetrics};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::math::{Mat3, Vec3};

/// Axis map from one cell's computational frame to a neighbor's: axis `k` of the origin frame
/// corresponds to axis `perm[k]` of the neighbor, scaled by `sign[k]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub perm: [usize; 3],
    pub sign: [f64; 3],
}

impl Frame {
    pub const IDENTITY: Frame = Frame { perm: [0, 1, 2], sign: [1.0; 3] };

    pub fn compose(self, next: Frame) -> Frame {
        let mut out = Frame::IDENTITY;
        for k in 0..3 {
            out.perm[k] = next.perm[self.perm[k]];
            out.sign[k] = self.sign[k] * next.sign[self.perm[k]];
        }
        out
    }

    /// Expresses an origin-frame side in the neighbor's frame.
    pub fn side(self, side: Side) -> Side {
        Side::new(self.perm[side.axis], self.sign[side.axis] * side.sign() > 0.0)
    }

    /// Contravariant components of the neighbor, re-expressed in the origin frame.
    #[inline]
    pub fn vec(self, v: Vec3) -> Vec3 {
        [self.sign[0] * v[self.perm[0]], self.sign[1] * v[self.perm[1]], self.sign[2] * v[self.perm[2]]]
    }

    /// Metric rows `T_k` of the neighbor, re-expressed in the origin frame.
    #[inline]
    pub fn rows(self, t: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for k in 0..3 {
            for i in 0..3 {
                out[k][i] = self.sign[k] * t[self.perm[k]][i];
            }
        }
        out
    }

    #[inline]
    pub fn alpha(self, a: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for j in 0..3 {
            for k in 0..3 {
                out[j][k] = self.sign[j] * self.sign[k] * a[self.perm[j]][self.perm[k]];
            }
        }
        out
    }

    pub fn is_identity(self) -> bool {
        self == Frame::IDENTITY
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Link {
    pub cell: usize,
    pub frame: Frame,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Neighbor {
    Cell(Link),
    /// Index into [`Domain::boundary_faces`].
    Boundary(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FaceKind {
    Dirichlet,
    Outflow { characteristic: Vec3 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFace {
    pub cell: usize,
    pub side: Side,
    pub block: usize,
    /// Index within the block side.
    pub index: usize,
    pub kind: FaceKind,
    pub center: Vec3,
    pub metrics: PointMetrics,
    /// Adjacent faces on the same block side, indexed by `Side::index` of the tangential
    /// direction; `None` at the side's edges.
    pub tangential: [Option<usize>; 6],
}

#[derive(Clone, Debug)]
pub struct Block {
    pub spec: BlockSpec,
    pub metrics: TransformMetrics,
    pub offset: usize,
}

/// CSR pattern shared by every matrix assembled on a domain: the diagonal plus direct
/// neighbors. `side_slot[cell][side]` is the value slot of that neighbor, `usize::MAX` for
/// boundary faces.
#[derive(Clone, Debug)]
pub struct StencilPattern {
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub diag_slot: Vec<usize>,
    pub side_slot: Vec<[usize; 6]>,
}

impl StencilPattern {
    pub fn zeros(&self) -> CsrMatrix {
        CsrMatrix::from_parts_unchecked(self.row_ptr.len() - 1, self.row_ptr.clone(), self.col_idx.clone(), vec![0.0; self.col_idx.len()])
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }
}

/// Multi-block domain with global cell numbering, resolved neighbors and metrics.
/// Immutable after construction.
#[derive(Clone, Debug)]
pub struct Domain {
    dim: usize,
    blocks: Vec<Block>,
    n_cells: usize,
    cells: Vec<PointMetrics>,
    centers: Vec<Vec3>,
    neighbors: Vec<[Neighbor; 6]>,
    boundary_faces: Vec<BoundaryFace>,
    side_ranges: Vec<[Option<Range<usize>>; 6]>,
    initial_boundary: Vec<Vec3>,
    pattern: StencilPattern,
}

impl Domain {
    pub fn new(blocks: Vec<BlockSpec>) -> Result<Self> {
        let dim = blocks.first().ok_or_else(|| Error::InvalidMesh("no blocks".into()))?.dim;
        validate(&blocks, dim)?;

        let mut built = Vec::with_capacity(blocks.len());
        let mut offset = 0;
        for (b, spec) in blocks.into_iter().enumerate() {
            let metrics = compute_metrics(&spec, b)?;
            let n = spec.n_cells();
            built.push(Block { spec, metrics, offset });
            offset += n;
        }
        let n_cells = offset;

        let mut cells = Vec::with_capacity(n_cells);
        let mut centers = Vec::with_capacity(n_cells);
        for b in &built {
            cells.extend_from_slice(&b.metrics.cells);
            centers.extend_from_slice(&b.metrics.centers);
        }

        // Boundary faces, block by block and side by side.
        let mut boundary_faces = Vec::new();
        let mut initial_boundary = Vec::new();
        let mut side_ranges = vec![[None, None, None, None, None, None]; built.len()];
        for (b, block) in built.iter().enumerate() {
            for side in Side::all(dim) {
                let (kind, values) = match block.spec.boundary(side) {
                    BoundarySpec::Connection { .. } => continue,
                    BoundarySpec::Dirichlet { velocity } => (FaceKind::Dirichlet, velocity),
                    BoundarySpec::AdvectiveOutflow { characteristic, velocity } => {
                        (FaceKind::Outflow { characteristic: *characteristic }, velocity)
                    }
                };
                let start = boundary_faces.len();
                let metrics: &Vec<FaceMetrics> = &block.metrics.faces[side.index()];
                for (f, fm) in metrics.iter().enumerate() {
                    let c = block.spec.face_cell(side, f);
                    boundary_faces.push(BoundaryFace {
                        cell: block.offset + block.spec.cell_index(c),
                        side,
                        block: b,
                        index: f,
                        kind,
                        center: fm.center,
                        metrics: fm.metrics,
                        tangential: [None; 6],
                    });
                    initial_boundary.push(values[f]);
                }
                side_ranges[b][side.index()] = Some(start..boundary_faces.len());
            }
        }
        for face in boundary_faces.iter_mut() {
            let spec = &built[face.block].spec;
            let start = side_ranges[face.block][face.side.index()].as_ref().map(|r| r.start).unwrap_or(0);
            let c = spec.face_cell(face.side, face.index);
            for t in spec.tangential_axes(face.side) {
                for dir in [Side::lower(t), Side::upper(t)] {
                    let mut nc = c;
                    if dir.positive {
                        if c[t] + 1 >= spec.resolution[t] {
                            continue;
                        }
                        nc[t] += 1;
                    } else {
                        if c[t] == 0 {
                            continue;
                        }
                        nc[t] -= 1;
                    }
                    face.tangential[dir.index()] = Some(start + spec.face_index(face.side, nc));
                }
            }
        }

        let mut neighbors = Vec::with_capacity(n_cells);
        for (b, block) in built.iter().enumerate() {
            let spec = &block.spec;
            for i in 0..spec.n_cells() {
                let c = spec.cell_coords(i);
                let mut row = [Neighbor::Boundary(usize::MAX); 6];
                for side in Side::all(dim) {
                    row[side.index()] = resolve(&built, &side_ranges, b, c, side);
                }
                neighbors.push(row);
            }
        }

        let pattern = build_pattern(dim, &neighbors);
        Ok(Domain { dim, blocks: built, n_cells, cells, centers, neighbors, boundary_faces, side_ranges, initial_boundary, pattern })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block_range(&self, block: usize) -> Range<usize> {
        let b = &self.blocks[block];
        b.offset..b.offset + b.spec.n_cells()
    }

    pub fn global_index(&self, block: usize, local: usize) -> usize {
        self.blocks[block].offset + local
    }

    /// Inverse of [`Domain::global_index`].
    pub fn locate(&self, cell: usize) -> (usize, usize) {
        let b = self.blocks.partition_point(|blk| blk.offset <= cell) - 1;
        (b, cell - self.blocks[b].offset)
    }

    #[inline]
    pub fn cell(&self, cell: usize) -> &PointMetrics {
        &self.cells[cell]
    }

    #[inline]
    pub fn center(&self, cell: usize) -> Vec3 {
        self.centers[cell]
    }

    pub fn centers(&self) -> &[Vec3] {
        &self.centers
    }

    #[inline]
    pub fn neighbor(&self, cell: usize, side: Side) -> Neighbor {
        self.neighbors[cell][side.index()]
    }

    /// Steps from a neighbor reached via `from` towards `side`, where `side` is expressed in
    /// the origin cell's frame. The returned link frame is relative to the origin cell.
    pub fn neighbor_via(&self, from: Link, side: Side) -> Neighbor {
        match self.neighbors[from.cell][from.frame.side(side).index()] {
            Neighbor::Cell(next) => Neighbor::Cell(Link { cell: next.cell, frame: from.frame.compose(next.frame) }),
            b => b,
        }
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    pub fn n_boundary_faces(&self) -> usize {
        self.boundary_faces.len()
    }

    pub fn boundary_range(&self, block: usize, side: Side) -> Option<Range<usize>> {
        self.side_ranges[block][side.index()].clone()
    }

    /// Boundary velocities as declared in the block specs.
    pub fn initial_boundary(&self) -> &[Vec3] {
        &self.initial_boundary
    }

    pub fn pattern(&self) -> &StencilPattern {
        &self.pattern
    }

    pub fn volume(&self) -> f64 {
        self.cells.iter().map(|c| c.det).sum()
    }

    pub fn has_outflow(&self) -> bool {
        self.boundary_faces.iter().any(|f| matches!(f.kind, FaceKind::Outflow { .. }))
    }

    /// Whether no boundary face admits flux, i.e. the pressure system is always singular.
    /// Pressure systems are treated as singular regardless; see the solver notes.
    pub fn is_closed(&self) -> bool {
        !self.has_outflow()
    }

    /// Largest cross-metric ratio `|α_jk| / sqrt(α_jj α_kk)` over cells and boundary faces.
    pub fn max_skew(&self) -> f64 {
        let skew = |a: &Mat3| {
            let mut m: f64 = 0.0;
            for j in 0..self.dim {
                for k in 0..self.dim {
                    if j != k {
                        m = m.max(a[j][k].abs() / (a[j][j] * a[k][k]).sqrt());
                    }
                }
            }
            m
        };
        let cells = self.cells.iter().map(|c| skew(&c.alpha)).fold(0.0, f64::max);
        let faces = self.boundary_faces.iter().map(|f| skew(&f.metrics.alpha)).fold(0.0, f64::max);
        cells.max(faces)
    }
}

fn validate(blocks: &[BlockSpec], dim: usize) -> Result<()> {
    for (b, spec) in blocks.iter().enumerate() {
        if spec.dim != dim {
            return Err(Error::InvalidMesh(format!("block {b} has dimension {}, expected {dim}", spec.dim)));
        }
        if spec.boundaries.len() != 2 * dim {
            return Err(Error::InvalidMesh(format!("block {b} declares {} boundary specs, needs {}", spec.boundaries.len(), 2 * dim)));
        }
        for side in Side::all(dim) {
            let faces = spec.face_count(side);
            match spec.boundary(side) {
                BoundarySpec::Dirichlet { velocity } | BoundarySpec::AdvectiveOutflow { velocity, .. } => {
                    if velocity.len() != faces {
                        return Err(Error::InvalidMesh(format!(
                            "block {b} side {}: {} boundary values for {faces} faces",
                            side.name(),
                            velocity.len()
                        )));
                    }
                }
                BoundarySpec::Connection { block, side: target, orientation } => {
                    check_connection(blocks, dim, b, side, *block, *target, orientation)?;
                }
            }
        }
    }
    Ok(())
}

fn check_connection(blocks: &[BlockSpec], dim: usize, b: usize, side: Side, target: usize, tside: Side, o: &Orientation) -> Result<()> {
    let err = |msg: String| Err(Error::InvalidMesh(format!("block {b} side {}: {msg}", side.name())));
    let Some(other) = blocks.get(target) else {
        return err(format!("connection to missing block {target}"));
    };
    if tside.axis >= dim {
        return err(format!("target side axis {} out of range", tside.axis));
    }
    let mut seen = [false; 3];
    for k in 0..dim {
        let m = o.axis_map[k];
        if m >= dim || seen[m] {
            return err(format!("axis map {:?} is not a permutation", o.axis_map));
        }
        seen[m] = true;
    }
    if o.axis_map[side.axis] != tside.axis {
        return err("axis map does not send the normal axis onto the target side".into());
    }
    for k in 0..dim {
        if k != side.axis && blocks[b].resolution[k] != other.resolution[o.axis_map[k]] {
            return err(format!("non-conformal connection to block {target} side {}", tside.name()));
        }
    }
    if target == b && side.axis == tside.axis && blocks[b].resolution[side.axis] < 2 {
        return err("periodic axis needs at least 2 cells".into());
    }
    match other.boundary(tside) {
        BoundarySpec::Connection { block, side: back, orientation } if *block == b && *back == side => {
            let inv = o.inverse();
            for k in 0..dim {
                if k != tside.axis && (orientation.axis_map[k] != inv.axis_map[k] || orientation.flip[k] != inv.flip[k]) {
                    return err(format!("connection to block {target} is not mutual (orientation differs)"));
                }
            }
            Ok(())
        }
        _ => err(format!("connection to block {target} side {} is not mutual", tside.name())),
    }
}

fn resolve(blocks: &[Block], side_ranges: &[[Option<Range<usize>>; 6]], b: usize, c: [usize; 3], side: Side) -> Neighbor {
    let spec = &blocks[b].spec;
    if !spec.on_side(side, c) {
        let mut nc = c;
        if side.positive {
            nc[side.axis] += 1;
        } else {
            nc[side.axis] -= 1;
        }
        return Neighbor::Cell(Link { cell: blocks[b].offset + spec.cell_index(nc), frame: Frame::IDENTITY });
    }
    match spec.boundary(side) {
        BoundarySpec::Connection { block: target, side: tside, orientation } => {
            let other = &blocks[*target].spec;
            let mut tc = [0; 3];
            let mut frame = Frame::IDENTITY;
            for k in 0..spec.dim {
                let m = orientation.axis_map[k];
                frame.perm[k] = m;
                if k == side.axis {
                    tc[m] = if tside.positive { other.resolution[m] - 1 } else { 0 };
                    frame.sign[k] = -tside.sign() * side.sign();
                } else if orientation.flip[k] {
                    tc[m] = other.resolution[m] - 1 - c[k];
                    frame.sign[k] = -1.0;
                } else {
                    tc[m] = c[k];
                }
            }
            Neighbor::Cell(Link { cell: blocks[*target].offset + other.cell_index(tc), frame })
        }
        _ => {
            let start = side_ranges[b][side.index()].as_ref().expect("boundary side has faces").start;
            Neighbor::Boundary(start + spec.face_index(side, c))
        }
    }
}

fn build_pattern(dim: usize, neighbors: &[[Neighbor; 6]]) -> StencilPattern {
    let n = neighbors.len();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut diag_slot = Vec::with_capacity(n);
    let mut side_slot = Vec::with_capacity(n);
    row_ptr.push(0);
    for (p, row) in neighbors.iter().enumerate() {
        let mut cols = vec![p];
        for s in Side::all(dim) {
            if let Neighbor::Cell(l) = row[s.index()] {
                cols.push(l.cell);
            }
        }
        cols.sort_unstable();
        cols.dedup();
        let base = col_idx.len();
        let slot_of = |c: usize| base + cols.binary_search(&c).expect("column present");
        diag_slot.push(slot_of(p));
        let mut slots = [usize::MAX; 6];
        for s in Side::all(dim) {
            if let Neighbor::Cell(l) = row[s.index()] {
                slots[s.index()] = slot_of(l.cell);
            }
        }
        side_slot.push(slots);
        col_idx.extend_from_slice(&cols);
        row_ptr.push(col_idx.len());
    }
    StencilPattern { row_ptr, col_idx, diag_slot, side_slot }
}
