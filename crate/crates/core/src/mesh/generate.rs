//! Builders for the benchmark geometries.

use super::block::{BlockSpec, BoundarySpec, Side};
use super::domain::Domain;
use crate::error::{Error, Result};
use crate::math::{Vec3, ZERO3};

/// Vertex coordinates on `[0, length]` with cell sizes growing geometrically by `base` away
/// from both ends.
pub fn wall_refined_coords(cells: usize, length: f64, base: f64) -> Result<Vec<f64>> {
    if cells < 2 || !(base >= 1.0) {
        return Err(Error::InvalidInput(format!("refined axis needs ≥ 2 cells and base ≥ 1 (got {cells}, {base})")));
    }
    let sizes: Vec<f64> = (0..cells).map(|i| base.powi(i.min(cells - 1 - i) as i32)).collect();
    let total: f64 = sizes.iter().sum();
    let mut coords = Vec::with_capacity(cells + 1);
    let mut x = 0.0;
    coords.push(0.0);
    for s in &sizes {
        x += s * length / total;
        coords.push(x);
    }
    coords[cells] = length;
    Ok(coords)
}

fn uniform_coords(cells: usize, start: f64, end: f64) -> Vec<f64> {
    (0..=cells).map(|i| start + (end - start) * i as f64 / cells as f64).collect()
}

fn check_res(res: &[usize]) -> Result<()> {
    if res.iter().any(|&n| n < 2) {
        return Err(Error::InvalidInput(format!("resolutions must be ≥ 2 per axis, got {res:?}")));
    }
    Ok(())
}

/// Makes `axis` of a single block periodic.
pub fn make_periodic(block: &mut BlockSpec, axis: usize) {
    block.set_boundary(Side::lower(axis), BoundarySpec::connect(0, Side::upper(axis)));
    block.set_boundary(Side::upper(axis), BoundarySpec::connect(0, Side::lower(axis)));
}

/// Axis-aligned box with walls, optionally periodic along selected axes.
pub fn periodic_box(dim: usize, resolution: [usize; 3], size: Vec3, periodic: [bool; 3]) -> Result<Domain> {
    check_res(&resolution[..dim])?;
    let mut block = BlockSpec::uniform(dim, resolution, ZERO3, size)?;
    for a in 0..dim {
        if periodic[a] {
            make_periodic(&mut block, a);
        }
    }
    Domain::new(vec![block])
}

/// Square cavity `[0, size]²` with no-slip walls; `lid_side` moves with `lid_velocity` along x.
pub fn cavity(n: usize, size: f64, lid_side: Side, lid_velocity: f64) -> Result<Domain> {
    check_res(&[n, n])?;
    let mut block = BlockSpec::uniform(2, [n, n, 1], ZERO3, [size, size, 1.0])?;
    let faces = block.face_count(lid_side);
    block.set_boundary(lid_side, BoundarySpec::uniform(faces, [lid_velocity, 0.0, 0.0]));
    Domain::new(vec![block])
}

/// Rotational distortion around `(0.5, 0.5)`: points at radius `r < 0.5` are turned by
/// `theta_max · (1 − 2r)²`; the unit square's edges stay fixed.
pub fn swirl(p: Vec3, theta_max: f64) -> Vec3 {
    let (dx, dy) = (p[0] - 0.5, p[1] - 0.5);
    let r = (dx * dx + dy * dy).sqrt();
    if r >= 0.5 {
        return p;
    }
    let th = theta_max * (1.0 - 2.0 * r).powi(2);
    let (s, c) = th.sin_cos();
    [0.5 + c * dx - s * dy, 0.5 + s * dx + c * dy, p[2]]
}

/// Unit channel, periodic in x, walls at y = 0 and y = 1, optionally distorted by [`swirl`].
pub fn poiseuille(n: usize, theta_max: f64) -> Result<Domain> {
    check_res(&[n, n])?;
    let h = 1.0 / n as f64;
    let mut block = BlockSpec::from_map(2, [n, n, 1], |x| swirl([x[0] * h, x[1] * h, 0.0], theta_max))?;
    make_periodic(&mut block, 0);
    Domain::new(vec![block])
}

/// Channel `[0, Lx] × [0, 2δ] × [0, Lz]`, periodic in x (and z in 3D), walls in y with
/// geometric wall refinement.
pub fn channel(dim: usize, resolution: [usize; 3], size: Vec3, base: f64) -> Result<Domain> {
    check_res(&resolution[..dim])?;
    let mut coords = vec![uniform_coords(resolution[0], 0.0, size[0]), wall_refined_coords(resolution[1], size[1], base)?];
    if dim == 3 {
        coords.push(uniform_coords(resolution[2], 0.0, size[2]));
    }
    let mut block = BlockSpec::tensor(&coords)?;
    make_periodic(&mut block, 0);
    if dim == 3 {
        make_periodic(&mut block, 2);
    }
    Domain::new(vec![block])
}

/// Block index per `[segment x][segment y]`, `None` where skipped.
pub type BlockIds = Vec<Vec<Option<usize>>>;

/// Rectangular arrangement of 2D blocks with conformal connections between present
/// neighbors. `xs`/`ys` are segment boundaries with `nx`/`ny` cells per segment; cells listed
/// in `skip` are left out. Outer sides default to walls.
pub struct BlockGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub nx: Vec<usize>,
    pub ny: Vec<usize>,
    pub skip: Vec<(usize, usize)>,
}

impl BlockGrid {
    /// Returns the blocks and `ids[i][j]`, the block index of segment `(i, j)`.
    pub fn build(&self) -> Result<(Vec<BlockSpec>, BlockIds)> {
        if self.xs.len() != self.nx.len() + 1 || self.ys.len() != self.ny.len() + 1 {
            return Err(Error::InvalidInput("segment boundaries and cell counts disagree".into()));
        }
        check_res(&self.nx)?;
        check_res(&self.ny)?;
        let (ni, nj) = (self.nx.len(), self.ny.len());
        let mut ids = vec![vec![None; nj]; ni];
        let mut blocks = Vec::new();
        for j in 0..nj {
            for i in 0..ni {
                if self.skip.contains(&(i, j)) {
                    continue;
                }
                ids[i][j] = Some(blocks.len());
                blocks.push(BlockSpec::tensor(&[
                    uniform_coords(self.nx[i], self.xs[i], self.xs[i + 1]),
                    uniform_coords(self.ny[j], self.ys[j], self.ys[j + 1]),
                ])?);
            }
        }
        for i in 0..ni {
            for j in 0..nj {
                let Some(a) = ids[i][j] else { continue };
                if i + 1 < ni {
                    if let Some(b) = ids[i + 1][j] {
                        blocks[a].set_boundary(Side::upper(0), BoundarySpec::connect(b, Side::lower(0)));
                        blocks[b].set_boundary(Side::lower(0), BoundarySpec::connect(a, Side::upper(0)));
                    }
                }
                if j + 1 < nj {
                    if let Some(b) = ids[i][j + 1] {
                        blocks[a].set_boundary(Side::upper(1), BoundarySpec::connect(b, Side::lower(1)));
                        blocks[b].set_boundary(Side::lower(1), BoundarySpec::connect(a, Side::upper(1)));
                    }
                }
            }
        }
        Ok((blocks, ids))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BfsParams {
    /// Step height.
    pub step: f64,
    pub inlet_length: f64,
    pub channel_length: f64,
    pub buffer_length: f64,
    /// Cells per step height.
    pub cells_per_step: usize,
    pub inflow_velocity: f64,
}

impl Default for BfsParams {
    fn default() -> Self {
        BfsParams { step: 1.0, inlet_length: 5.0, channel_length: 32.0, buffer_length: 3.0, cells_per_step: 4, inflow_velocity: 1.0 }
    }
}

/// Backward-facing step: inlet channel of height `step` above the step, expanding to `2·step`.
/// Five blocks: inlet, upper/lower main channel, upper/lower buffer with advective outflow.
/// Inflow is a parabolic profile with bulk velocity `inflow_velocity`.
pub fn backward_facing_step(p: &BfsParams) -> Result<Domain> {
    let h = p.step;
    let cells = |len: f64| ((len / h) * p.cells_per_step as f64).round().max(2.0) as usize;
    let grid = BlockGrid {
        xs: vec![-p.inlet_length, 0.0, p.channel_length, p.channel_length + p.buffer_length],
        ys: vec![0.0, h, 2.0 * h],
        nx: vec![cells(p.inlet_length), cells(p.channel_length), cells(p.buffer_length)],
        ny: vec![p.cells_per_step.max(2), p.cells_per_step.max(2)],
        skip: vec![(0, 0)],
    };
    let (mut blocks, ids) = grid.build()?;
    let inlet = ids[0][1].expect("inlet block");
    let ny = grid.ny[1];
    let inflow: Vec<Vec3> = (0..ny)
        .map(|j| {
            let eta = (j as f64 + 0.5) / ny as f64;
            [6.0 * p.inflow_velocity * eta * (1.0 - eta), 0.0, 0.0]
        })
        .collect();
    blocks[inlet].set_boundary(Side::lower(0), BoundarySpec::Dirichlet { velocity: inflow });
    for j in 0..2 {
        let b = ids[2][j].expect("buffer block");
        let faces = blocks[b].face_count(Side::upper(0));
        blocks[b].set_boundary(
            Side::upper(0),
            BoundarySpec::AdvectiveOutflow { characteristic: [p.inflow_velocity, 0.0, 0.0], velocity: vec![ZERO3; faces] },
        );
    }
    Domain::new(blocks)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VortexStreetParams {
    pub length: f64,
    pub height: f64,
    /// Obstacle lower-left corner and edge length.
    pub obstacle: [f64; 3],
    pub cells_per_unit: usize,
    pub inflow_velocity: f64,
}

impl Default for VortexStreetParams {
    fn default() -> Self {
        VortexStreetParams { length: 16.0, height: 8.0, obstacle: [3.0, 3.25, 1.5], cells_per_unit: 2, inflow_velocity: 1.0 }
    }
}

/// Channel with a square obstacle: eight blocks around the obstacle, uniform inflow at −x,
/// advective outflow at +x and slip-velocity walls at ±y.
pub fn vortex_street(p: &VortexStreetParams) -> Result<Domain> {
    let [ox, oy, e] = p.obstacle;
    if !(ox > 0.0 && oy > 0.0 && ox + e < p.length && oy + e < p.height) {
        return Err(Error::InvalidInput("obstacle must lie inside the domain".into()));
    }
    let cells = |len: f64| ((len * p.cells_per_unit as f64).round() as usize).max(2);
    let grid = BlockGrid {
        xs: vec![0.0, ox, ox + e, p.length],
        ys: vec![0.0, oy, oy + e, p.height],
        nx: vec![cells(ox), cells(e), cells(p.length - ox - e)],
        ny: vec![cells(oy), cells(e), cells(p.height - oy - e)],
        skip: vec![(1, 1)],
    };
    let (mut blocks, ids) = grid.build()?;
    let free = [p.inflow_velocity, 0.0, 0.0];
    for j in 0..3 {
        let b = ids[0][j].expect("inflow column");
        let faces = blocks[b].face_count(Side::lower(0));
        blocks[b].set_boundary(Side::lower(0), BoundarySpec::uniform(faces, free));
        let b = ids[2][j].expect("outflow column");
        let faces = blocks[b].face_count(Side::upper(0));
        blocks[b].set_boundary(Side::upper(0), BoundarySpec::AdvectiveOutflow { characteristic: free, velocity: vec![free; faces] });
    }
    for i in 0..3 {
        for (j, side) in [(0, Side::lower(1)), (2, Side::upper(1))] {
            let b = ids[i][j].expect("outer row");
            let faces = blocks[b].face_count(side);
            blocks[b].set_boundary(side, BoundarySpec::uniform(faces, free));
        }
    }
    Domain::new(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Neighbor;

    #[test]
    fn refined_coords_are_symmetric_and_exact() {
        let c = wall_refined_coords(8, 2.0, 1.095).unwrap();
        assert_eq!(c[0], 0.0);
        assert_eq!(c[8], 2.0);
        for i in 0..=8 {
            assert!((c[i] + c[8 - i] - 2.0).abs() < 1e-14);
        }
        let d0 = c[1] - c[0];
        let d1 = c[2] - c[1];
        assert!((d1 / d0 - 1.095).abs() < 1e-12);
    }

    #[test]
    fn bfs_has_five_blocks_and_outflow() {
        let d = backward_facing_step(&BfsParams { cells_per_step: 2, ..Default::default() }).unwrap();
        assert_eq!(d.blocks().len(), 5);
        assert!(d.has_outflow());
    }

    #[test]
    fn vortex_street_has_eight_blocks() {
        let d = vortex_street(&VortexStreetParams::default()).unwrap();
        assert_eq!(d.blocks().len(), 8);
        let expected = 16.0 * 8.0 - 1.5 * 1.5;
        assert!((d.volume() - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn cavity_lid_face_carries_velocity() {
        let d = cavity(4, 1.0, Side::upper(1), 1.0).unwrap();
        match d.neighbor(d.global_index(0, 13), Side::upper(1)) {
            Neighbor::Boundary(f) => assert_eq!(d.initial_boundary()[f], [1.0, 0.0, 0.0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn resolution_below_two_rejected() {
        assert!(periodic_box(2, [1, 4, 1], [1.0; 3], [false; 3]).is_err());
        assert!(wall_refined_coords(4, 1.0, 0.9).is_err());
    }
}
