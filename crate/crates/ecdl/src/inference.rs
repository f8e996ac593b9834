//! Desparsified-Lasso inference: nodewise regressions, the debiased
//! estimator, and per-coefficient p-values / confidence intervals.
//!
//! For each feature j the Lasso residual of x_j on the remaining columns
//! acts as an instrument: the debiased coefficient is
//! `w_j + z_j'r / (z_j'x_j)` with r the main-fit residual, and its standard
//! error is `sigma * ||z_j|| / |z_j'x_j|`. Dividing by the column scale maps
//! both back to the original coordinates.

use ndarray::{Array1, Array2, ArrayView1, ShapeBuilder};

use crate::error::{Error, Result};
use crate::lasso::{fit_lasso, LambdaRule, LassoFit, SolverConfig, StandardizedDesign};
use crate::parallel;
use crate::stats::{std_normal_isf, two_sided_p_from_z};

/// P-values are floored here before any z transform so downstream medians
/// never see zeros or infinities.
pub const P_VALUE_FLOOR: f64 = 1e-300;

/// Desparsified-Lasso settings on top of the plain solver configuration.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct DlConfig {
    pub solver: SolverConfig,
    /// Universal-rate multiplier shared by all nodewise regressions.
    pub kappa_nodewise: f64,
    /// When set, a solver that exhausts its sweep budget aborts the run;
    /// otherwise the best iterate is accepted.
    pub strict: bool,
}

impl Default for DlConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            kappa_nodewise: 1.0,
            strict: false,
        }
    }
}

/// Residual of one nodewise regression.
#[derive(Debug, Clone)]
pub struct NodewiseFit {
    pub target_index: usize,
    /// Coefficients of x_j on the remaining p-1 columns, in column order
    /// with column j skipped.
    pub gamma: Array1<f64>,
    /// z_j = x_j - X_{-j} gamma.
    pub residual: Array1<f64>,
    /// z_j'x_j / n; strictly positive for non-collinear designs.
    pub tau_sq: f64,
}

/// Full inference output; all vectors are indexed by feature.
#[derive(Debug, Clone)]
pub struct DlResult {
    /// Debiased coefficients on the original column scale.
    pub w_hat: Array1<f64>,
    /// Per-coefficient variance factors: (se_j / sigma_hat)^2.
    pub omega_diag: Array1<f64>,
    pub sigma_hat: f64,
    /// Two-sided p-values in [1e-300, 1].
    pub p_values: Array1<f64>,
    pub ci_lower: Array1<f64>,
    pub ci_upper: Array1<f64>,
    /// Signed z-scores, capped at the quantile of the p-value floor.
    pub z_scores: Array1<f64>,
    /// Confidence level the intervals were computed at.
    pub alpha: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Accept or reject a non-converged iterate according to the strict flag.
fn resolve_fit(result: Result<LassoFit>, strict: bool) -> Result<LassoFit> {
    match result {
        Ok(fit) => Ok(fit),
        Err(Error::NotConverged { fit, .. }) if !strict => Ok(*fit),
        Err(e) => Err(e),
    }
}

/// Lasso regression of column j on all remaining columns.
///
/// The sub-design inherits the standardization of its parent columns, so no
/// re-centering happens here.
pub fn nodewise_lasso(
    design: &StandardizedDesign,
    j: usize,
    config: &SolverConfig,
) -> Result<NodewiseFit> {
    nodewise_lasso_impl(design, j, config, false)
}

fn nodewise_lasso_impl(
    design: &StandardizedDesign,
    j: usize,
    config: &SolverConfig,
    strict: bool,
) -> Result<NodewiseFit> {
    let (n, p) = (design.n, design.p);
    if p < 2 {
        return Err(Error::Dimension(format!(
            "nodewise regression needs p >= 2, got {p}"
        )));
    }
    if j >= p {
        return Err(Error::Dimension(format!(
            "nodewise target {j} out of range for p = {p}"
        )));
    }
    let mut values = Array2::<f64>::zeros((n, p - 1).f());
    for (dst, k) in (0..p).filter(|&k| k != j).enumerate() {
        values.column_mut(dst).assign(&design.values.column(k));
    }
    let sub = StandardizedDesign {
        values,
        column_means: Array1::zeros(p - 1),
        column_scales: Array1::ones(p - 1),
        n,
        p: p - 1,
    };
    let target = design.values.column(j);
    let fit = resolve_fit(fit_lasso(&sub, target, config), strict)?;

    let mut residual = target.to_owned();
    for (k, &g) in fit.coefficients.iter().enumerate() {
        if g != 0.0 {
            let col = sub.col(k);
            for (r, &x) in residual.iter_mut().zip(col) {
                *r -= g * x;
            }
        }
    }
    let target_slice = design.col(j);
    let tau_sq = dot(residual.as_slice().unwrap(), target_slice) / n as f64;
    if tau_sq <= 1e-12 {
        return Err(Error::DegenerateResidual(j));
    }
    Ok(NodewiseFit {
        target_index: j,
        gamma: fit.coefficients,
        residual,
        tau_sq,
    })
}

/// Noise standard deviation from a residual vector with `df` coefficients
/// spent: sqrt(||r||^2 / (n - df)).
pub fn estimate_noise_std(residual: ArrayView1<'_, f64>, df: usize) -> Result<f64> {
    let n = residual.len();
    if n <= df {
        return Err(Error::DegenerateDf { n, df });
    }
    let sumsq: f64 = residual.iter().map(|&r| r * r).sum();
    Ok((sumsq / (n - df) as f64).sqrt())
}

/// Signed z-scores from two-sided p-values: sign * Phi^{-1}(1 - p/2).
///
/// P-values are floored at [`P_VALUE_FLOOR`] so the transform never returns
/// an infinity.
pub fn pvalue_to_signed_z(p_values: &Array1<f64>, signs: &Array1<f64>) -> Array1<f64> {
    p_values
        .iter()
        .zip(signs.iter())
        .map(|(&p, &s)| {
            let p = p.max(P_VALUE_FLOOR);
            if p >= 1.0 {
                0.0
            } else {
                s.signum() * std_normal_isf(0.5 * p)
            }
        })
        .collect()
}

/// Run the full desparsified-Lasso inference at confidence level `alpha`.
///
/// The p nodewise regressions are independent and run on the worker pool;
/// results are keyed by feature index, so the output does not depend on
/// execution order.
pub fn desparsified_lasso(
    design: &StandardizedDesign,
    response: ArrayView1<'_, f64>,
    config: &DlConfig,
    alpha: f64,
) -> Result<DlResult> {
    let (n, p) = (design.n, design.p);
    if n < 4 {
        return Err(Error::Dimension(format!("inference needs n >= 4, got {n}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Dimension(format!(
            "confidence level must lie in (0,1), got {alpha}"
        )));
    }
    if response.len() != n {
        return Err(Error::Dimension(format!(
            "response length {} does not match n = {n}",
            response.len()
        )));
    }

    let main_fit = resolve_fit(fit_lasso(design, response, &config.solver), config.strict)?;

    // Residual of the main fit on the centered response.
    let mut residual: Vec<f64> = response.iter().map(|&v| v - main_fit.intercept).collect();
    for (j, &w) in main_fit.coefficients.iter().enumerate() {
        if w != 0.0 {
            for (r, &x) in residual.iter_mut().zip(design.col(j)) {
                *r -= w * x;
            }
        }
    }
    let df = main_fit.active_count();
    let sigma_hat = estimate_noise_std(ArrayView1::from(&residual), df)?;

    let nodewise_config = SolverConfig {
        lambda_rule: match config.solver.lambda_rule {
            LambdaRule::Fixed(v) => LambdaRule::Fixed(v),
            LambdaRule::Universal { .. } => LambdaRule::Universal {
                kappa: config.kappa_nodewise,
            },
        },
        ..config.solver
    };

    // Per-feature debiased estimate and variance factor, standardized scale.
    let per_feature: Vec<(f64, f64)> = parallel::try_map_indexed(p, |j| {
        let node = nodewise_lasso_impl(design, j, &nodewise_config, config.strict)?;
        let z = node.residual.as_slice().unwrap();
        let zx = node.tau_sq * n as f64; // z_j'x_j
        let w_debiased = main_fit.coefficients[j] + dot(z, &residual) / zx;
        let omega_std = dot(z, z) / (zx * zx);
        Ok::<(f64, f64), Error>((w_debiased, omega_std))
    })?;

    let z_quantile = std_normal_isf(0.5 * alpha);
    let mut w_hat = Array1::<f64>::zeros(p);
    let mut omega_diag = Array1::<f64>::zeros(p);
    let mut p_values = Array1::<f64>::zeros(p);
    let mut z_scores = Array1::<f64>::zeros(p);
    let mut ci_lower = Array1::<f64>::zeros(p);
    let mut ci_upper = Array1::<f64>::zeros(p);
    for (j, &(w_std, omega_std)) in per_feature.iter().enumerate() {
        let scale = design.column_scales[j];
        let w = w_std / scale;
        let omega = omega_std / (scale * scale);
        let se = sigma_hat * omega.sqrt();
        let z = if w == 0.0 { 0.0 } else { w / se };
        let p_raw = two_sided_p_from_z(z);
        let p_val = p_raw.max(P_VALUE_FLOOR);
        // Beyond the floor (or at se = 0) the z-score is re-derived from the
        // floored p-value, which caps it at the representable quantile.
        let z_final = if p_raw >= P_VALUE_FLOOR && z.is_finite() {
            z
        } else {
            z.signum() * std_normal_isf(0.5 * p_val)
        };
        w_hat[j] = w;
        omega_diag[j] = omega;
        p_values[j] = p_val;
        z_scores[j] = z_final;
        ci_lower[j] = w - z_quantile * se;
        ci_upper[j] = w + z_quantile * se;
    }

    Ok(DlResult {
        w_hat,
        omega_diag,
        sigma_hat,
        p_values,
        ci_lower,
        ci_upper,
        z_scores,
        alpha,
    })
}
