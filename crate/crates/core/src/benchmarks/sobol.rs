//! Unscrambled Sobol points on a box.
//!
//! Direction numbers are Joe–Kuo (`new-joe-kuo-6`), the all-zero first point
//! is skipped, and `seed` selects the block of `n` consecutive points
//! `1 + seed * n ..= (seed + 1) * n` of the sequence.

use std::sync::OnceLock;

use sobol::params::JoeKuoD6;
use sobol::Sobol;

use crate::domain::BoxDomain;
use crate::error::{Error, Result};

fn params_1000() -> &'static JoeKuoD6 {
    static P: OnceLock<JoeKuoD6> = OnceLock::new();
    P.get_or_init(JoeKuoD6::standard)
}

fn params_extended() -> &'static JoeKuoD6 {
    static P: OnceLock<JoeKuoD6> = OnceLock::new();
    P.get_or_init(JoeKuoD6::extended)
}

/// Points `skip + 1 ..= skip + n` of the unit-cube sequence (index 0 is the
/// origin and is never returned).
pub fn sobol_unit(dim: usize, n: usize, skip: usize) -> Result<Vec<Vec<f64>>> {
    if dim == 0 {
        return Err(Error::InvalidArgument("Sobol dimension must be positive".into()));
    }
    let params = if dim <= params_1000().max_dims {
        params_1000()
    } else if dim <= params_extended().max_dims {
        params_extended()
    } else {
        return Err(Error::InvalidArgument(format!("Sobol supports at most 21201 dimensions, got {dim}")));
    };
    let seq = Sobol::<f64>::new(dim, params);
    Ok(seq.skip(1 + skip).take(n).collect())
}

/// First `n` points of the seeded Sobol block scaled to `domain`.
pub fn sobol_init(domain: &BoxDomain, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sobol_init needs n >= 1".into()));
    }
    let skip = (seed as usize)
        .checked_mul(n)
        .ok_or_else(|| Error::InvalidArgument("Sobol seed too large".into()))?;
    let pts = sobol_unit(domain.dim(), n, skip)?;
    Ok(pts
        .into_iter()
        .map(|u| {
            let mut x = domain.from_unit_cube(&u);
            domain.clip(&mut x);
            x
        })
        .collect())
}
