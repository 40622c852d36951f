//! Small dense linear-algebra helpers shared by the GP and DPP code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// First jitter tried after a plain factorization fails.
pub const JITTER_START: f64 = 1e-10;
/// Largest jitter before giving up.
pub const JITTER_MAX: f64 = 1e-6;

/// Cholesky factorization with bounded jitter escalation.
///
/// The plain matrix is tried first; on failure `JITTER_START * mean(diag)` is
/// added to the diagonal and multiplied by ten until `JITTER_MAX * mean(diag)`.
/// Returns the factor and the absolute jitter that was added.
pub fn cholesky_with_jitter(mut m: DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument("cholesky of a non-square matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite entry in Gram matrix".into()));
    }
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok((c, 0.0));
    }
    let n = m.nrows().max(1);
    let scale = (m.diagonal().sum() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut added = 0.0;
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-12) {
        let step = jitter * scale - added;
        for i in 0..m.nrows() {
            m[(i, i)] += step;
        }
        added = jitter * scale;
        if let Some(c) = Cholesky::new(m.clone()) {
            return Ok((c, added));
        }
        jitter *= 10.0;
    }
    Err(Error::NumericalFailure(format!(
        "matrix not positive definite after jitter {:.0e}",
        JITTER_MAX
    )))
}

/// log-determinant from a Cholesky factor.
pub fn chol_logdet(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Relative pivot size below which a PSD minor counts as singular.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-12;

/// log det of a small symmetric PSD matrix, `-inf` when it is singular.
///
/// Used for DPP minors, where singular sets are legitimate and simply have
/// zero probability. A pivot `l_ii^2` (the variance of item `i` given the
/// earlier items) below `SINGULAR_PIVOT_TOL * m_ii` is round-off from an
/// exactly singular minor and is treated as zero.
pub fn logdet_psd(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let Some(c) = Cholesky::new(m.clone()) else {
        return f64::NEG_INFINITY;
    };
    let l = c.l_dirty();
    for i in 0..m.nrows() {
        let piv = l[(i, i)] * l[(i, i)];
        if !(piv > SINGULAR_PIVOT_TOL * m[(i, i)]) {
            return f64::NEG_INFINITY;
        }
    }
    let ld = chol_logdet(&c);
    if ld.is_finite() {
        ld
    } else {
        f64::NEG_INFINITY
    }
}

/// Solves `L v = b` for the lower-triangular factor of `c`.
pub fn forward_solve(c: &Cholesky<f64, Dyn>, b: &DVector<f64>) -> DVector<f64> {
    c.l_dirty()
        .solve_lower_triangular(b)
        .unwrap_or_else(|| DVector::from_element(b.len(), f64::NAN))
}

/// Largest and smallest singular values of a matrix.
pub fn singular_value_range(m: &DMatrix<f64>) -> (f64, f64) {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    (max, min)
}

/// Full row rank with singular values checked relative to the largest.
pub fn has_full_row_rank(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if m.nrows() > m.ncols() || m.nrows() == 0 {
        return false;
    }
    let (max, min) = singular_value_range(m);
    max > 0.0 && min > rel_tol * max
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
