//! Synthetic instance generators with known ground truth: a 1D chain of
//! AR(1)-correlated predictors and a 3D cube of Gaussian-smoothed noise with
//! cubic regions of interest, plus SNR bookkeeping.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::parallel;

/// Voxel margin of the neutral band around the 3D support.
pub const NEUTRAL_MARGIN: usize = 5;

/// A generated regression instance.
#[derive(Debug, Clone)]
pub struct LinearModelInstance {
    /// n x p design, samples in rows.
    pub design: Array2<f64>,
    pub response: Array1<f64>,
}

/// What the generator knows and the analyst is asked to recover.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub w_star: Array1<f64>,
    /// Sorted indices of the nonzero coefficients.
    pub support: Vec<usize>,
    /// Dilation band around the support where detections are neither true
    /// nor false positives; all-false for 1D instances.
    pub neutral_mask: Vec<bool>,
    pub sigma_star: f64,
    /// ||X w*|| / (sigma_star ||eps||) for the realized noise draw.
    pub realized_snr: f64,
}

/// 1D chain instance: rows are stationary AR(1) processes over the features,
/// so consecutive predictors have correlation rho and lag-k pairs rho^k.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sim1DSpec {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    /// Number of leading features with nonzero weight.
    pub support_size: usize,
    pub weight: f64,
    pub sigma_star: f64,
    pub seed: u64,
}

impl Default for Sim1DSpec {
    fn default() -> Self {
        Self {
            n: 100,
            p: 2000,
            rho: 0.95,
            support_size: 50,
            weight: 1.0,
            sigma_star: 10.0,
            seed: 0,
        }
    }
}

/// 3D cube instance: per-sample white noise smoothed with a separable
/// Gaussian filter, five cubic ROIs (four alternating corners plus the
/// center), columns rescaled to unit empirical variance.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sim3DSpec {
    /// Cube edge length H; p = H^3.
    pub edge_length: usize,
    pub n: usize,
    /// ROI cube width h; the support has 5 h^3 voxels.
    pub roi_width: usize,
    pub sigma_smooth: f64,
    pub sigma_star: f64,
    pub seed: u64,
}

impl Default for Sim3DSpec {
    fn default() -> Self {
        Self {
            edge_length: 50,
            n: 400,
            roi_width: 6,
            sigma_smooth: 2.0,
            sigma_star: 8.0,
            seed: 0,
        }
    }
}

/// Row-major flattening of 3D coordinates.
pub fn voxel_index(coords: [usize; 3], edge: usize) -> usize {
    (coords[0] * edge + coords[1]) * edge + coords[2]
}

/// Inverse of [`voxel_index`].
pub fn voxel_coords(index: usize, edge: usize) -> [usize; 3] {
    [index / (edge * edge), (index / edge) % edge, index % edge]
}

/// Support of the five-ROI weight map: cubes of width `roi` flush in four
/// alternating corners (a tetrahedral arrangement) and one centered cube.
pub fn roi_support_indices(edge: usize, roi: usize) -> Vec<usize> {
    let far = edge - roi;
    let mid = (edge - roi) / 2;
    let origins = [
        [0, 0, 0],
        [far, far, 0],
        [far, 0, far],
        [0, far, far],
        [mid, mid, mid],
    ];
    let mut support = Vec::with_capacity(5 * roi * roi * roi);
    for o in origins {
        for dx in 0..roi {
            for dy in 0..roi {
                for dz in 0..roi {
                    support.push(voxel_index([o[0] + dx, o[1] + dy, o[2] + dz], edge));
                }
            }
        }
    }
    support.sort_unstable();
    support.dedup();
    support
}

/// L-infinity dilation of a voxel set by `margin`, clipped to the grid.
pub fn dilate_mask(shape: &[usize], voxels: &[usize], margin: usize) -> Vec<bool> {
    let p: usize = shape.iter().product();
    let mut mask = vec![false; p];
    match shape {
        [len] => {
            for &v in voxels {
                let lo = v.saturating_sub(margin);
                let hi = (v + margin).min(len - 1);
                for j in lo..=hi {
                    mask[j] = true;
                }
            }
        }
        [_, _, _] => {
            let edge = shape[0];
            for &v in voxels {
                let c = voxel_coords(v, edge);
                let lo = |x: usize| x.saturating_sub(margin);
                let hi = |x: usize| (x + margin).min(edge - 1);
                for x in lo(c[0])..=hi(c[0]) {
                    for y in lo(c[1])..=hi(c[1]) {
                        for z in lo(c[2])..=hi(c[2]) {
                            mask[voxel_index([x, y, z], edge)] = true;
                        }
                    }
                }
            }
        }
        _ => unreachable!("dilate_mask supports 1D and cubic 3D shapes"),
    }
    mask
}

fn realized_snr(signal_norm: f64, sigma_star: f64, eps_norm: f64) -> f64 {
    if signal_norm == 0.0 {
        0.0
    } else if sigma_star * eps_norm == 0.0 {
        f64::INFINITY
    } else {
        signal_norm / (sigma_star * eps_norm)
    }
}

/// Generate the 1D instance of the spec.
pub fn generate_1d(spec: &Sim1DSpec) -> Result<(LinearModelInstance, GroundTruth)> {
    if !(0.0..1.0).contains(&spec.rho) {
        return Err(Error::Spec(format!("rho must lie in [0, 1), got {}", spec.rho)));
    }
    if spec.support_size > spec.p {
        return Err(Error::Spec(format!(
            "support_size {} exceeds p = {}",
            spec.support_size, spec.p
        )));
    }
    if spec.n == 0 || spec.p == 0 {
        return Err(Error::Spec("n and p must be positive".into()));
    }
    if spec.sigma_star < 0.0 {
        return Err(Error::Spec("sigma_star must be >= 0".into()));
    }
    let (n, p) = (spec.n, spec.p);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let innovation_scale = (1.0 - spec.rho * spec.rho).sqrt();
    let mut design = Array2::<f64>::zeros((n, p));
    for i in 0..n {
        let mut row = design.row_mut(i);
        let mut value: f64 = rng.sample(StandardNormal);
        row[0] = value;
        for j in 1..p {
            let innovation: f64 = rng.sample(StandardNormal);
            value = spec.rho * value + innovation_scale * innovation;
            row[j] = value;
        }
    }
    let mut w_star = Array1::<f64>::zeros(p);
    for j in 0..spec.support_size {
        w_star[j] = spec.weight;
    }
    let signal = design.dot(&w_star);
    let eps: Array1<f64> = Array1::from_shape_fn(n, |_| rng.sample(StandardNormal));
    let response = &signal + &(&eps * spec.sigma_star);
    let snr = realized_snr(
        signal.dot(&signal).sqrt(),
        spec.sigma_star,
        eps.dot(&eps).sqrt(),
    );
    Ok((
        LinearModelInstance { design, response },
        GroundTruth {
            w_star,
            support: (0..spec.support_size).collect(),
            neutral_mask: vec![false; p],
            sigma_star: spec.sigma_star,
            realized_snr: snr,
        },
    ))
}

/// Generate the 3D cube instance of the spec.
pub fn generate_3d(spec: &Sim3DSpec) -> Result<(LinearModelInstance, GroundTruth)> {
    let edge = spec.edge_length;
    let roi = spec.roi_width;
    if roi < 1 {
        return Err(Error::Spec("roi_width must be >= 1".into()));
    }
    if 5 * roi.pow(3) > edge.pow(3) {
        return Err(Error::Spec(format!(
            "five ROIs of width {roi} do not fit in a cube of edge {edge}"
        )));
    }
    if roi > edge {
        return Err(Error::Spec("roi_width exceeds edge_length".into()));
    }
    if spec.n == 0 {
        return Err(Error::Spec("n must be positive".into()));
    }
    if spec.sigma_smooth < 0.0 || spec.sigma_star < 0.0 {
        return Err(Error::Spec("bandwidth and noise level must be >= 0".into()));
    }
    let (n, p) = (spec.n, edge.pow(3));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut flat = vec![0.0f64; n * p];
    for v in flat.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    if spec.sigma_smooth > 0.0 {
        let kernel = gaussian_kernel(spec.sigma_smooth);
        let mut rows: Vec<&mut [f64]> = flat.chunks_mut(p).collect();
        parallel::for_each_mut(&mut rows, |_, row| {
            smooth_cube_in_place(row, edge, &kernel);
        });
    }
    let mut design =
        Array2::from_shape_vec((n, p), flat).expect("row-major buffer matches shape");

    // Unit empirical variance per column, so sigma_star means the same
    // thing as in the unsmoothed 1D case.
    for j in 0..p {
        let mut col = design.column_mut(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        if var == 0.0 {
            return Err(Error::Spec(format!("degenerate voxel column {j}")));
        }
        let inv_sd = 1.0 / var.sqrt();
        col.mapv_inplace(|v| v * inv_sd);
    }

    let support = roi_support_indices(edge, roi);
    let mut w_star = Array1::<f64>::zeros(p);
    for &j in &support {
        w_star[j] = 1.0;
    }
    let neutral_dilated = dilate_mask(&[edge, edge, edge], &support, NEUTRAL_MARGIN);
    let mut neutral_mask = neutral_dilated;
    for &j in &support {
        neutral_mask[j] = false;
    }

    let signal = design.dot(&w_star);
    let eps: Array1<f64> = Array1::from_shape_fn(n, |_| rng.sample(StandardNormal));
    let response = &signal + &(&eps * spec.sigma_star);
    let snr = realized_snr(
        signal.dot(&signal).sqrt(),
        spec.sigma_star,
        eps.dot(&eps).sqrt(),
    );
    Ok((
        LinearModelInstance { design, response },
        GroundTruth {
            w_star,
            support,
            neutral_mask,
            sigma_star: spec.sigma_star,
            realized_snr: snr,
        },
    ))
}

/// Realized signal-to-noise ratio ||X w*|| / (sigma_star ||eps||).
pub fn compute_snr(
    design: &Array2<f64>,
    w_star: &Array1<f64>,
    sigma_star: f64,
    epsilon: &Array1<f64>,
) -> Result<f64> {
    if design.ncols() != w_star.len() || design.nrows() != epsilon.len() {
        return Err(Error::Dimension(
            "design, weights and noise dimensions disagree".into(),
        ));
    }
    let eps_norm = epsilon.dot(epsilon).sqrt();
    if sigma_star * eps_norm == 0.0 {
        return Err(Error::DegenerateNoise);
    }
    let signal = design.dot(w_star);
    Ok(signal.dot(&signal).sqrt() / (sigma_star * eps_norm))
}

/// Noise level that hits `target_snr` in expectation:
/// ||X w*|| / (target_snr sqrt(n)), using E||eps|| ~ sqrt(n).
pub fn calibrate_sigma(
    design: &Array2<f64>,
    w_star: &Array1<f64>,
    target_snr: f64,
) -> Result<f64> {
    if !(target_snr > 0.0) {
        return Err(Error::Spec(format!(
            "target SNR must be > 0, got {target_snr}"
        )));
    }
    if design.ncols() != w_star.len() {
        return Err(Error::Dimension(
            "design and weight dimensions disagree".into(),
        ));
    }
    let signal = design.dot(w_star);
    let norm = signal.dot(&signal).sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok(norm / (target_snr * (design.nrows() as f64).sqrt()))
}

/// Discrete Gaussian taps out to radius ceil(4 sigma), normalized to sum one.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as usize;
    let mut kernel = Vec::with_capacity(2 * radius + 1);
    for k in -(radius as isize)..=(radius as isize) {
        kernel.push((-0.5 * (k as f64 / sigma).powi(2)).exp());
    }
    let total: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= total;
    }
    kernel
}

/// Fold an out-of-range index back into [0, len) by edge reflection.
fn reflect(mut i: isize, len: usize) -> usize {
    let len = len as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= len {
            i = 2 * len - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Separable 3D convolution over one flattened H^3 sample.
fn smooth_cube_in_place(data: &mut [f64], edge: usize, kernel: &[f64]) {
    let radius = kernel.len() / 2;
    let mut line = vec![0.0f64; edge];
    let strides = [edge * edge, edge, 1];
    for axis in 0..3 {
        let stride = strides[axis];
        let (outer_a, outer_b) = match axis {
            0 => (strides[1], strides[2]),
            1 => (strides[0], strides[2]),
            _ => (strides[0], strides[1]),
        };
        for a in 0..edge {
            for b in 0..edge {
                let base = a * outer_a + b * outer_b;
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + i * stride];
                }
                for i in 0..edge {
                    let mut acc = 0.0;
                    for (k, &w) in kernel.iter().enumerate() {
                        let src = reflect(i as isize + k as isize - radius as isize, edge);
                        acc += w * line[src];
                    }
                    data[base + i * stride] = acc;
                }
            }
        }
    }
}
