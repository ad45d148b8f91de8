//! Central-difference gradient verification.

use rand::seq::index::sample;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{stream, RngSeed};

use super::dense::DenseMatrix;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Coordinates probed per parameter block; `None` probes all of them.
    pub max_coords_per_block: Option<usize>,
    pub seed: RngSeed,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            eps: 1e-5,
            max_coords_per_block: None,
            seed: RngSeed::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Max relative error per parameter block.
    pub per_block: Vec<f64>,
    /// (block, flat index) of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub coords_checked: usize,
}

/// Compares `analytic` against central differences of `loss`.
///
/// Per coordinate the error is `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn finite_diff_check<F>(
    mut loss: F,
    params: &[DenseMatrix],
    analytic: &[DenseMatrix],
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: FnMut(&[DenseMatrix]) -> f64,
{
    if params.len() != analytic.len() {
        return Err(Error::shape(
            "finite_diff_check",
            format!("{} parameter blocks, {} gradients", params.len(), analytic.len()),
        ));
    }
    for (i, (p, g)) in params.iter().zip(analytic).enumerate() {
        if p.shape() != g.shape() {
            return Err(Error::shape(
                "finite_diff_check",
                format!("block {i}: {:?} vs {:?}", p.shape(), g.shape()),
            ));
        }
    }
    if !(opts.eps > 0.0) {
        return Err(Error::Config(format!("eps must be positive, got {}", opts.eps)));
    }

    let mut rng = opts.seed.stream(stream::GRADCHECK);
    let mut work: Vec<DenseMatrix> = params.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        per_block: vec![0.0; params.len()],
        worst: None,
        coords_checked: 0,
    };

    for block in 0..params.len() {
        let len = params[block].as_slice().len();
        let coords: Vec<usize> = match opts.max_coords_per_block {
            Some(k) if k < len => {
                let mut v = sample(&mut rng, len, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..len).collect(),
        };
        for idx in coords {
            let orig = params[block].as_slice()[idx];
            work[block].as_mut_slice()[idx] = orig + opts.eps;
            let up = loss(&work);
            work[block].as_mut_slice()[idx] = orig - opts.eps;
            let down = loss(&work);
            work[block].as_mut_slice()[idx] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss while perturbing block {block} index {idx}"
                )));
            }
            let numeric = (up - down) / (2.0 * opts.eps);
            let a = analytic[block].as_slice()[idx];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.coords_checked += 1;
            if err > report.per_block[block] {
                report.per_block[block] = err;
            }
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = report.max_relative_error.max(err);
                report.worst = Some((block, idx));
            }
        }
    }
    Ok(report)
}
