//! Geometry-only precomputation shared by all kernels of a domain: the deferred
//! cross-derivative stencils of the momentum and pressure equations.

use crate::mesh::{Domain, Link, Neighbor, Side};

/// Unknown referenced by a stencil term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Cell(usize),
    /// Boundary face index.
    Face(usize),
}

/// One term `coef · value(col)` contributing to row `row`. For pressure terms the value is
/// additionally divided by the diagonal coefficient of cell `src`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossTerm {
    pub row: usize,
    pub src: usize,
    pub coef: f64,
    pub col: Target,
}

#[derive(Clone, Debug)]
pub struct Discretization {
    domain: Domain,
    /// Momentum cross-diffusion, already divided by the row cell's `J`; multiply by ν.
    velocity_cross: Vec<CrossTerm>,
    /// Pressure cross-flux terms; divide by `A[src]`.
    pressure_cross: Vec<CrossTerm>,
    skew: f64,
}

impl Discretization {
    pub fn new(domain: Domain) -> Self {
        let skew = domain.max_skew();
        let (velocity_cross, pressure_cross) = if skew > 1e-12 { build_cross(&domain) } else { (Vec::new(), Vec::new()) };
        Discretization { domain, velocity_cross, pressure_cross, skew }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn velocity_cross(&self) -> &[CrossTerm] {
        &self.velocity_cross
    }

    pub fn pressure_cross(&self) -> &[CrossTerm] {
        &self.pressure_cross
    }

    /// Largest normalized cross metric; zero on orthogonal meshes.
    pub fn skew(&self) -> f64 {
        self.skew
    }

    pub fn is_orthogonal(&self) -> bool {
        self.velocity_cross.is_empty()
    }
}

impl std::ops::Deref for Discretization {
    type Target = Domain;
    fn deref(&self) -> &Domain {
        &self.domain
    }
}

enum Missing {
    /// Missing neighbor takes the boundary face value.
    Face,
    /// Missing neighbor takes the cell's own value.
    Own,
}

/// Terms of `0.5 (v(X, +k) − v(X, −k))` for the cell reached via `x` (frame relative to the
/// row cell), scaled by `w`.
fn tangential(domain: &Domain, x: Link, k: usize, w: f64, missing: &Missing, out: &mut Vec<(Target, f64)>) {
    for (side, s) in [(Side::upper(k), 0.5), (Side::lower(k), -0.5)] {
        let t = match domain.neighbor_via(x, side) {
            Neighbor::Cell(l) => Target::Cell(l.cell),
            Neighbor::Boundary(f) => match missing {
                Missing::Face => Target::Face(f),
                Missing::Own => Target::Cell(x.cell),
            },
        };
        out.push((t, s * w));
    }
}

fn build_cross(domain: &Domain) -> (Vec<CrossTerm>, Vec<CrossTerm>) {
    let dim = domain.dim();
    let mut vel = Vec::new();
    let mut pre = Vec::new();
    let mut grad = Vec::new();
    for p in 0..domain.n_cells() {
        let jp = domain.cell(p).det;
        let here = Link { cell: p, frame: crate::mesh::Frame::IDENTITY };
        for side in Side::all(dim) {
            let j = side.axis;
            let n = side.sign();
            match domain.neighbor(p, side) {
                Neighbor::Cell(f) => {
                    let alpha_p = domain.cell(p).alpha;
                    let alpha_f = f.frame.alpha(&domain.cell(f.cell).alpha);
                    for k in (0..dim).filter(|&k| k != j) {
                        for (missing, list, per_volume) in [(Missing::Face, &mut vel, true), (Missing::Own, &mut pre, false)] {
                            grad.clear();
                            tangential(domain, here, k, 0.5, &missing, &mut grad);
                            tangential(domain, f, k, 0.5, &missing, &mut grad);
                            for (src, a) in [(p, alpha_p[j][k]), (f.cell, alpha_f[j][k])] {
                                let scale = n * 0.5 * a / if per_volume { jp } else { 1.0 };
                                if scale == 0.0 {
                                    continue;
                                }
                                for &(col, w) in &grad {
                                    list.push(CrossTerm { row: p, src, coef: scale * w, col });
                                }
                            }
                        }
                    }
                }
                Neighbor::Boundary(b) => {
                    let face = &domain.boundary_faces()[b];
                    let alpha_b = face.metrics.alpha;
                    for k in (0..dim).filter(|&k| k != j) {
                        let scale = n * alpha_b[j][k] / jp;
                        if scale == 0.0 {
                            continue;
                        }
                        let up = face.tangential[Side::upper(k).index()];
                        let lo = face.tangential[Side::lower(k).index()];
                        let terms: Vec<(usize, f64)> = match (up, lo) {
                            (Some(u), Some(l)) => vec![(u, 0.5), (l, -0.5)],
                            (Some(u), None) => vec![(u, 1.0), (b, -1.0)],
                            (None, Some(l)) => vec![(b, 1.0), (l, -1.0)],
                            (None, None) => vec![],
                        };
                        for (col, w) in terms {
                            vel.push(CrossTerm { row: p, src: p, coef: scale * w, col: Target::Face(col) });
                        }
                    }
                }
            }
        }
    }
    (merge(vel, false), merge(pre, true))
}

/// Sums terms sharing row, column (and source when it matters); drops exact cancellations.
fn merge(mut terms: Vec<CrossTerm>, keep_src: bool) -> Vec<CrossTerm> {
    let key = |t: &CrossTerm| {
        let (kind, idx) = match t.col {
            Target::Cell(c) => (0, c),
            Target::Face(f) => (1, f),
        };
        (t.row, if keep_src { t.src } else { 0 }, kind, idx)
    };
    if !keep_src {
        for t in terms.iter_mut() {
            t.src = t.row;
        }
    }
    terms.sort_by_key(key);
    let mut out: Vec<CrossTerm> = Vec::with_capacity(terms.len());
    for t in terms {
        match out.last_mut() {
            Some(last) if key(last) == key(&t) => last.coef += t.coef,
            _ => out.push(t),
        }
    }
    out.retain(|t| t.coef != 0.0);
    out
}
