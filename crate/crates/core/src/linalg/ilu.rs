use super::CsrMatrix;
use crate::error::{Error, Result};

/// Incomplete LU factorization without fill. `L` (unit diagonal) and `U` share the input
/// sparsity pattern.
#[derive(Clone, Debug)]
pub struct Ilu0 {
    factors: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let mut lu = a.clone();
        let diag = a.diag_slots();
        let cols = a.col_idx().to_vec();
        let rp = a.row_ptr().to_vec();
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in rp[i]..rp[i + 1] {
                pos[cols[k]] = k;
            }
            for k in rp[i]..diag[i] {
                let col = cols[k];
                let pivot = lu.values()[diag[col]];
                if pivot == 0.0 || !pivot.is_finite() {
                    return Err(Error::ZeroPivot { row: col });
                }
                let factor = lu.values()[k] / pivot;
                lu.values_mut()[k] = factor;
                for m in diag[col] + 1..rp[col + 1] {
                    let target = pos[cols[m]];
                    if target != usize::MAX {
                        let v = lu.values()[m];
                        lu.values_mut()[target] -= factor * v;
                    }
                }
            }
            if lu.values()[diag[i]] == 0.0 || !lu.values()[diag[i]].is_finite() {
                return Err(Error::ZeroPivot { row: i });
            }
            for k in rp[i]..rp[i + 1] {
                pos[cols[k]] = usize::MAX;
            }
        }
        Ok(Ilu0 { factors: lu, diag })
    }

    /// Combined factors: strict lower part is `L`, upper part including the diagonal is `U`.
    pub fn factors(&self) -> &CsrMatrix {
        &self.factors
    }

    /// Solves `L U z = r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let f = &self.factors;
        let (rp, cols, vals) = (f.row_ptr(), f.col_idx(), f.values());
        let n = f.n();
        for i in 0..n {
            let mut acc = r[i];
            for k in rp[i]..self.diag[i] {
                acc -= vals[k] * z[cols[k]];
            }
            z[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in self.diag[i] + 1..rp[i + 1] {
                acc -= vals[k] * z[cols[k]];
            }
            z[i] = acc / vals[self.diag[i]];
        }
    }
}
