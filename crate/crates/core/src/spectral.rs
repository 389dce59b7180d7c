//! Discrete realization of L²(0,π) with the Dirichlet Laplacian.
//!
//! The operator is −d²/dx² with homogeneous Dirichlet conditions, so the
//! eigenpairs are explicit: λ_p = p² and φ_p(x) = √(2/π)·sin(px). Functions
//! are carried either as coefficient vectors in that basis ([`SpectralField`])
//! or as samples on a uniform collocation grid; [`EigenBasis`] converts
//! between the two and applies the heat semigroup, fractional powers of the
//! operator and spectrally weighted (Gevrey) norms.

use crate::error::{QbvError, Result};
use std::f64::consts::PI;

/// Threshold above which `exp` overflows to infinity.
pub(crate) const EXP_OVERFLOW: f64 = 709.0;

/// Sine eigenbasis of the 1-D Dirichlet Laplacian on (0,π), together with a
/// uniform collocation grid used for quadrature.
///
/// The grid has `collocation + 1` nodes x_j = jπ/M_x, j = 0..M_x, including
/// both endpoints; the composite trapezoid rule on those nodes integrates
/// products of basis functions exactly (discrete sine orthogonality), so the
/// Gram matrix of {φ_p} is the identity up to rounding.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    modes: usize,
    collocation: usize,
    eigenvalues: Vec<f64>,
    nodes: Vec<f64>,
    /// φ_p(x_j), row-major `modes × (collocation + 1)`. Endpoint columns are
    /// exactly zero (Dirichlet).
    basis_values: Vec<f64>,
}

impl EigenBasis {
    /// Build the basis with `modes` eigenfunctions and `collocation` grid
    /// intervals. Requires `collocation ≥ 2·modes` so that band-limited
    /// fields round-trip through sampling without aliasing.
    pub fn new(modes: usize, collocation: usize) -> Result<Self> {
        if modes == 0 {
            return Err(QbvError::domain("mode count must be positive"));
        }
        if collocation < 2 * modes {
            return Err(QbvError::domain(format!(
                "collocation count {collocation} must be at least twice the mode count {modes}"
            )));
        }
        let eigenvalues: Vec<f64> = (1..=modes).map(|p| (p * p) as f64).collect();
        let sample_len = collocation + 1;
        let h = PI / collocation as f64;
        let nodes: Vec<f64> = (0..sample_len).map(|j| j as f64 * h).collect();
        let scale = (2.0 / PI).sqrt();
        let mut basis_values = vec![0.0; modes * sample_len];
        for p in 1..=modes {
            let row = &mut basis_values[(p - 1) * sample_len..p * sample_len];
            for (j, value) in row.iter_mut().enumerate() {
                // sin(p·jπ/M_x) is exactly zero at both ends; pin it so the
                // trapezoid endpoint weights never contribute rounding noise.
                if j == 0 || j == collocation {
                    *value = 0.0;
                } else {
                    *value = scale * ((p as f64) * nodes[j]).sin();
                }
            }
        }
        Ok(EigenBasis {
            modes,
            collocation,
            eigenvalues,
            nodes,
            basis_values,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn collocation(&self) -> usize {
        self.collocation
    }

    /// Number of entries in a sample vector (`collocation + 1` grid nodes).
    pub fn sample_len(&self) -> usize {
        self.collocation + 1
    }

    /// Collocation nodes x_j = jπ/M_x including both endpoints.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Eigenvalues λ_p = p², p = 1..P.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// λ for the 1-based mode index.
    pub fn eigenvalue(&self, mode: usize) -> f64 {
        self.eigenvalues[mode - 1]
    }

    fn basis_row(&self, mode_idx: usize) -> &[f64] {
        let n = self.sample_len();
        &self.basis_values[mode_idx * n..(mode_idx + 1) * n]
    }

    /// Project grid samples onto the eigenbasis: c_p = ⟨u, φ_p⟩ by the
    /// composite trapezoid rule.
    pub fn analyze(&self, samples: &[f64]) -> Result<SpectralField> {
        if samples.len() != self.sample_len() {
            return Err(QbvError::DimensionMismatch {
                expected: self.sample_len(),
                actual: samples.len(),
            });
        }
        let h = PI / self.collocation as f64;
        let mut coeffs = Vec::with_capacity(self.modes);
        for p in 0..self.modes {
            let row = self.basis_row(p);
            let mut acc = 0.5 * (samples[0] * row[0] + samples[self.collocation] * row[self.collocation]);
            for j in 1..self.collocation {
                acc += samples[j] * row[j];
            }
            coeffs.push(acc * h);
        }
        Ok(SpectralField::new(coeffs))
    }

    /// Evaluate the field on the collocation grid: u(x_j) = Σ_p c_p φ_p(x_j).
    pub fn synthesize(&self, field: &SpectralField) -> Result<Vec<f64>> {
        self.check_field(field)?;
        let n = self.sample_len();
        let mut samples = vec![0.0; n];
        for (p, &c) in field.coeffs().iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = self.basis_row(p);
            for j in 0..n {
                samples[j] += c * row[j];
            }
        }
        Ok(samples)
    }

    /// Apply the heat semigroup e^{−t𝒜}: c_p ↦ e^{−tλ_p} c_p, t ≥ 0.
    pub fn semigroup(&self, field: &SpectralField, t: f64) -> Result<SpectralField> {
        self.check_field(field)?;
        if !(t >= 0.0) {
            return Err(QbvError::domain(format!("semigroup time must be nonnegative, got {t}")));
        }
        let coeffs = field
            .coeffs()
            .iter()
            .zip(&self.eigenvalues)
            .map(|(&c, &lam)| c * (-t * lam).exp())
            .collect();
        Ok(SpectralField::new(coeffs))
    }

    /// Apply 𝒜^r through the functional calculus: c_p ↦ λ_p^r c_p, r ≥ 0.
    pub fn operator_power(&self, field: &SpectralField, r: f64) -> Result<SpectralField> {
        self.check_field(field)?;
        if !(r >= 0.0) {
            return Err(QbvError::domain(format!(
                "operator power must be nonnegative, got {r} (inverse powers unsupported)"
            )));
        }
        let coeffs = field
            .coeffs()
            .iter()
            .zip(&self.eigenvalues)
            .map(|(&c, &lam)| c * lam.powf(r))
            .collect();
        Ok(SpectralField::new(coeffs))
    }

    /// Spectrally weighted norm ‖u‖ = (Σ_p λ_p^s e^{2σλ_p} c_p²)^{1/2}.
    ///
    /// Terms are formed in log space; if any term (or the sum) exceeds the
    /// floating range the result is `f64::INFINITY`, never NaN. Zero
    /// coefficients contribute nothing even where the weight alone would
    /// overflow.
    pub fn gevrey_norm(&self, field: &SpectralField, params: &GevreyParams) -> Result<f64> {
        self.check_field(field)?;
        let mut sum = 0.0f64;
        for (&c, &lam) in field.coeffs().iter().zip(&self.eigenvalues) {
            if c == 0.0 {
                continue;
            }
            let log_term = params.order() * lam.ln() + 2.0 * params.index() * lam + 2.0 * c.abs().ln();
            if log_term > EXP_OVERFLOW {
                return Ok(f64::INFINITY);
            }
            sum += log_term.exp();
            if !sum.is_finite() {
                return Ok(f64::INFINITY);
            }
        }
        Ok(sum.sqrt())
    }

    fn check_field(&self, field: &SpectralField) -> Result<()> {
        if field.len() != self.modes {
            return Err(QbvError::DimensionMismatch {
                expected: self.modes,
                actual: field.len(),
            });
        }
        Ok(())
    }
}

/// A function in ℋ represented by its coefficients in the sine eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Self {
        SpectralField { coeffs }
    }

    pub fn zeros(modes: usize) -> Self {
        SpectralField { coeffs: vec![0.0; modes] }
    }

    /// Field with a single nonzero coefficient at the 1-based mode index.
    pub fn unit_mode(modes: usize, mode: usize, value: f64) -> Self {
        let mut coeffs = vec![0.0; modes];
        coeffs[mode - 1] = value;
        SpectralField { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient for the 1-based mode index.
    pub fn coeff(&self, mode: usize) -> f64 {
        self.coeffs[mode - 1]
    }

    /// ℋ-norm via Parseval: ‖u‖ = (Σ_p c_p²)^{1/2}.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn scale(&self, factor: f64) -> Self {
        SpectralField::new(self.coeffs.iter().map(|c| c * factor).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        SpectralField::new(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        SpectralField::new(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// ‖self − other‖.
    pub fn distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Order/index pair for the spectrally weighted norm Σ λ^s e^{2σλ} c².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GevreyParams {
    order: f64,
    index: f64,
}

impl GevreyParams {
    pub fn new(order: f64, index: f64) -> Result<Self> {
        if !(order >= 0.0) {
            return Err(QbvError::domain(format!("Gevrey order must be >= 0, got {order}")));
        }
        if !(index > 0.0) {
            return Err(QbvError::domain(format!("Gevrey index must be > 0, got {index}")));
        }
        Ok(GevreyParams { order, index })
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn index(&self) -> f64 {
        self.index
    }
}
