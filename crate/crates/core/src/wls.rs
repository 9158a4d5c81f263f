//! Weighted normal-equation solves shared by both position solvers.

use nalgebra::{DMatrix, DVector};

/// Reciprocal condition number below which the normal matrix is treated as
/// singular.
const MIN_RCOND: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Singular;

/// (GᵀWG)⁻¹ for diagonal W given as a weight vector.
pub(crate) fn normal_inverse(g: &DMatrix<f64>, w: &DVector<f64>) -> Result<DMatrix<f64>, Singular> {
    let gw = scale_rows(g, w);
    let n = g.transpose() * gw;
    check_conditioning(&n)?;
    n.cholesky().map(|c| c.inverse()).ok_or(Singular)
}

/// Solve (GᵀWG)x = GᵀW·r.
pub(crate) fn weighted_step(
    g: &DMatrix<f64>,
    w: &DVector<f64>,
    r: &DVector<f64>,
) -> Result<DVector<f64>, Singular> {
    let gw = scale_rows(g, w);
    let n = g.transpose() * &gw;
    check_conditioning(&n)?;
    let rhs = gw.transpose() * r;
    n.cholesky().map(|c| c.solve(&rhs)).ok_or(Singular)
}

fn scale_rows(g: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut out = g.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= w[i];
    }
    out
}

fn check_conditioning(n: &DMatrix<f64>) -> Result<(), Singular> {
    if n.iter().any(|v| !v.is_finite()) {
        return Err(Singular);
    }
    let eig = n.clone().symmetric_eigen().eigenvalues;
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if max <= 0.0 || min / max < MIN_RCOND {
        return Err(Singular);
    }
    Ok(())
}

/// sqrt of the trace of the leading `k`×`k` block.
pub(crate) fn block_trace_sqrt(m: &DMatrix<f64>, k: usize) -> f64 {
    (0..k).map(|i| m[(i, i)]).sum::<f64>().sqrt()
}
