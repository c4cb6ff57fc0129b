//! Diagonal shrinkage functions `F ↦ (φ_1(F), …, φ_ℓ(F))` and their
//! diagonal partial derivatives `∂φ_i/∂f_i`.

use std::fmt;
use std::sync::Arc;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Relative step of the central finite-difference derivative.
pub const FD_STEP: f64 = 1e-6;

#[derive(Clone)]
enum Kind {
    /// `φ_i = h(f_i)`.
    Separable { value: ScalarFn, deriv: Option<ScalarFn> },
    General { values: VectorFn, derivs: Option<VectorFn> },
}

/// A shrinkage function for the general classes of mean and covariance
/// estimators.
///
/// Separable functions (`φ_i` depends on `f_i` only) let divided differences
/// `(g(f_i) − g(f_j))/(f_i − f_j)` fall back to `g'(f_i)` at tied
/// eigenvalues; general functions reject ties.
#[derive(Clone)]
pub struct ShrinkageFunction {
    kind: Kind,
    label: String,
}

impl fmt::Debug for ShrinkageFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl ShrinkageFunction {
    pub fn separable(
        label: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind: Kind::Separable { value: Arc::new(value), deriv: Some(Arc::new(deriv)) },
            label: label.into(),
        }
    }

    /// Separable function whose derivative is taken by central differences.
    pub fn separable_fd(
        label: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { kind: Kind::Separable { value: Arc::new(value), deriv: None }, label: label.into() }
    }

    /// General vector map with user-supplied `∂φ_i/∂f_i`.
    pub fn general(
        label: impl Into<String>,
        values: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        derivs: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind: Kind::General { values: Arc::new(values), derivs: Some(Arc::new(derivs)) },
            label: label.into(),
        }
    }

    /// General vector map; `∂φ_i/∂f_i` by central differences.
    pub fn general_fd(
        label: impl Into<String>,
        values: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { kind: Kind::General { values: Arc::new(values), derivs: None }, label: label.into() }
    }

    pub fn zero() -> Self {
        Self::separable("0", |_| 0.0, |_| 0.0)
    }

    /// `α / (1 + β f)`: the mean-matrix family and the tall-case covariance
    /// family.
    pub fn rational(alpha: f64, beta: f64) -> Self {
        Self::separable(
            format!("{alpha}/(1+{beta}f)"),
            move |f| alpha / (1.0 + beta * f),
            move |f| {
                let g = 1.0 / (1.0 + beta * f);
                -alpha * beta * g * g
            },
        )
    }

    /// `−α f / (1 + β f)`: the wide-case covariance family.
    pub fn rational_cov_wide(alpha: f64, beta: f64) -> Self {
        Self::separable(
            format!("-{alpha}f/(1+{beta}f)"),
            move |f| -alpha * f / (1.0 + beta * f),
            move |f| {
                let g = 1.0 / (1.0 + beta * f);
                -alpha * g * g
            },
        )
    }

    /// `c / f`: the Efron–Morris shrinkage.
    pub fn inverse(c: f64) -> Self {
        Self::separable(format!("{c}/f"), move |f| c / f, move |f| -c / (f * f))
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.kind, Kind::Separable { .. })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn values(&self, f: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Separable { value, .. } => f.iter().map(|&v| value(v)).collect(),
            Kind::General { values, .. } => values(f),
        }
    }

    /// `∂φ_i/∂f_i` at `f`.
    pub fn derivs(&self, f: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Separable { value, deriv } => match deriv {
                Some(d) => f.iter().map(|&v| d(v)).collect(),
                None => f.iter().map(|&v| central_diff(|t| value(t), v)).collect(),
            },
            Kind::General { values, derivs } => match derivs {
                Some(d) => d(f),
                None => (0..f.len())
                    .map(|i| {
                        let mut g = f.to_vec();
                        central_diff(
                            |t| {
                                g[i] = t;
                                values(&g)[i]
                            },
                            f[i],
                        )
                    })
                    .collect(),
            },
        }
    }

    /// Scalar derivative of a separable function, used for tied divided
    /// differences. `None` for general functions.
    pub(crate) fn scalar_deriv(&self, f: f64) -> Option<f64> {
        match &self.kind {
            Kind::Separable { value, deriv } => Some(match deriv {
                Some(d) => d(f),
                None => central_diff(|t| value(t), f),
            }),
            Kind::General { .. } => None,
        }
    }

    pub(crate) fn scalar_value(&self, f: f64) -> Option<f64> {
        match &self.kind {
            Kind::Separable { value, .. } => Some(value(f)),
            Kind::General { .. } => None,
        }
    }
}

fn central_diff(mut g: impl FnMut(f64) -> f64, x: f64) -> f64 {
    let h = FD_STEP * x.abs().max(FD_STEP);
    (g(x + h) - g(x - h)) / (2.0 * h)
}
