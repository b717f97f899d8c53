//! Control functions `φ` and the contraction forms they enter.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::index_algebra::{is_permuted, BinaryOp};
use crate::scalar::Scalar;
use crate::spaces::Provenance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContractionError {
    #[error("alpha = {0} must lie in [0, 1)")]
    AlphaOutOfRange(String),
    #[error("weights must be nonnegative with sum below 1, got sum {0}")]
    WeightsOutOfRange(String),
    #[error("piecewise control function needs breakpoints starting at 0 in increasing order")]
    BadBreakpoints,
    #[error("{form} form requires {requirement}")]
    FormPreconditionUnmet { form: &'static str, requirement: &'static str },
}

/// Families of control functions, ordered by inclusion
/// `Im ⊂ Theta ⊂ Psi ⊂ Omega` and `Im ⊂ Theta ⊂ Phi ⊂ Omega`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ControlClass {
    Im,
    Theta,
    Psi,
    Phi,
    Omega,
    /// `t ↦ α t` with `α < 1`, which lies in every family.
    Linear,
}

impl fmt::Display for ControlClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Upward closure of a class in the inclusion lattice.
pub fn implied_classes(declared: ControlClass) -> BTreeSet<ControlClass> {
    use ControlClass::*;
    let list: &[ControlClass] = match declared {
        Im | Linear => &[Im, Theta, Psi, Phi, Omega],
        Theta => &[Theta, Psi, Phi, Omega],
        Psi => &[Psi, Omega],
        Phi => &[Phi, Omega],
        Omega => &[Omega],
    };
    list.iter().copied().collect()
}

type CustomFn<T> = Arc<dyn Fn(&T) -> T + Send + Sync>;

#[derive(Clone)]
pub enum PhiKind<T> {
    Linear(T),
    /// `t / (1 + t)`
    Rational,
    /// `max(0, t - t²/2)`
    ClampedQuadratic,
    /// `α_j t` on `[b_j, b_{j+1})`; pairs `(b_j, α_j)` with `b_0 = 0`.
    Piecewise(Vec<(T, T)>),
    Custom { name: String, f: CustomFn<T> },
}

/// A control function together with the family it is claimed to belong to.
#[derive(Clone)]
pub struct ControlFunction<T> {
    kind: PhiKind<T>,
    class: ControlClass,
    class_provenance: Provenance,
}

impl<T: Scalar> ControlFunction<T> {
    pub fn linear(alpha: T) -> Result<Self, ContractionError> {
        if alpha < T::zero() || alpha >= T::one() {
            return Err(ContractionError::AlphaOutOfRange(alpha.to_string()));
        }
        Ok(Self {
            kind: PhiKind::Linear(alpha),
            class: ControlClass::Linear,
            class_provenance: Provenance::MachineVerified,
        })
    }

    pub fn rational() -> Self {
        Self {
            kind: PhiKind::Rational,
            class: ControlClass::Im,
            class_provenance: Provenance::MachineVerified,
        }
    }

    pub fn clamped_quadratic() -> Self {
        Self {
            kind: PhiKind::ClampedQuadratic,
            class: ControlClass::Im,
            class_provenance: Provenance::MachineVerified,
        }
    }

    /// Step-wise slope; right continuous, so it belongs to `Theta`.
    pub fn piecewise(pieces: Vec<(T, T)>) -> Result<Self, ContractionError> {
        if pieces.is_empty() || !pieces[0].0.is_zero() || pieces.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(ContractionError::BadBreakpoints);
        }
        if let Some((_, a)) = pieces.iter().find(|(_, a)| *a < T::zero() || *a >= T::one()) {
            return Err(ContractionError::AlphaOutOfRange(a.to_string()));
        }
        Ok(Self {
            kind: PhiKind::Piecewise(pieces),
            class: ControlClass::Theta,
            class_provenance: Provenance::MachineVerified,
        })
    }

    /// An arbitrary evaluator whose family membership is only declared.
    pub fn custom(name: impl Into<String>, class: ControlClass, f: impl Fn(&T) -> T + Send + Sync + 'static) -> Self {
        Self {
            kind: PhiKind::Custom {
                name: name.into(),
                f: Arc::new(f),
            },
            class,
            class_provenance: Provenance::Declared,
        }
    }

    pub fn eval(&self, t: &T) -> T {
        match &self.kind {
            PhiKind::Linear(a) => a.clone() * t.clone(),
            PhiKind::Rational => t.clone() / (T::one() + t.clone()),
            PhiKind::ClampedQuadratic => {
                let two = T::one() + T::one();
                let v = t.clone() - t.clone() * t.clone() / two;
                if v < T::zero() {
                    T::zero()
                } else {
                    v
                }
            }
            PhiKind::Piecewise(pieces) => {
                let alpha = pieces.iter().rev().find(|(b, _)| b <= t).map(|(_, a)| a.clone()).unwrap_or_else(T::zero);
                alpha * t.clone()
            }
            PhiKind::Custom { f, .. } => f(t),
        }
    }

    pub fn class(&self) -> ControlClass {
        self.class
    }

    /// Built-in catalog entries have known classes; custom closures are declared.
    pub fn class_provenance(&self) -> Provenance {
        self.class_provenance
    }

    pub fn kind(&self) -> &PhiKind<T> {
        &self.kind
    }

    pub fn name(&self) -> String {
        match &self.kind {
            PhiKind::Linear(a) => format!("linear({a})"),
            PhiKind::Rational => "t/(1+t)".into(),
            PhiKind::ClampedQuadratic => "max(0, t - t^2/2)".into(),
            PhiKind::Piecewise(p) => {
                let parts: Vec<String> = p.iter().map(|(b, a)| format!("{a} from {b}")).collect();
                format!("piecewise({})", parts.join(", "))
            }
            PhiKind::Custom { name, .. } => name.clone(),
        }
    }

    /// Known to be nondecreasing without sampling.
    pub fn increasing_by_construction(&self) -> bool {
        matches!(self.kind, PhiKind::Linear(_) | PhiKind::Rational)
    }
}

impl<T: Scalar> fmt::Debug for ControlFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ControlFunction({}, {:?})", self.name(), self.class)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BelowIdentityReport<T> {
    pub checked: usize,
    /// Sample points `t > 0` with `φ(t) ≥ t`.
    pub violations: Vec<T>,
}

impl<T> BelowIdentityReport<T> {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples `φ(t) < t` on the positive points of `grid`.
pub fn check_below_identity<T: Scalar>(phi: &ControlFunction<T>, grid: &[T]) -> BelowIdentityReport<T> {
    let positive: Vec<&T> = grid.iter().filter(|t| **t > T::zero()).collect();
    BelowIdentityReport {
        checked: positive.len(),
        violations: positive.into_iter().filter(|t| !(phi.eval(t) < **t)).cloned().collect(),
    }
}

/// First sampled pair `s < t` with `φ(s) > φ(t)`.
pub fn sampled_increasing<T: Scalar>(phi: &ControlFunction<T>, grid: &[T]) -> Option<(T, T)> {
    let mut pts: Vec<T> = grid.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let values: Vec<T> = pts.iter().map(|t| phi.eval(t)).collect();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if !values[i].approx_le(&values[j]) {
                return Some((pts[i].clone(), pts[j].clone()));
            }
        }
    }
    None
}

/// `points` logarithmically spaced values between `lo` and `hi` (both positive).
pub fn log_grid<T: Scalar>(lo: f64, hi: f64, points: usize) -> Vec<T> {
    let (lo, hi) = (lo.max(f64::MIN_POSITIVE), hi.max(lo));
    if points <= 1 || lo == hi {
        return vec![T::from_f64_lossy(lo)];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|k| T::from_f64_lossy((a + (b - a) * k as f64 / (points - 1) as f64).exp()))
        .collect()
}

pub const DEFAULT_GRID_POINTS: usize = 64;

/// Default sampling grid over the range of distances `[lo, hi]`.
pub fn default_grid<T: Scalar>(lo: f64, hi: f64) -> Vec<T> {
    log_grid(lo, hi, DEFAULT_GRID_POINTS)
}

/// Which inequality bounds `F` by `φ`.
#[derive(Debug, Clone, PartialEq)]
pub enum ContractionForm<T> {
    /// `(1/n) Σ d(F(U*i), F(V*i)) ≤ φ(Δ_n(GU, GV))`
    Sum,
    /// `max d(F(U*i), F(V*i)) ≤ φ(∇_n(GU, GV))`
    Max,
    /// `d(F(U), F(V)) ≤ φ(Δ_n(GU, GV))`; needs a permuted operation.
    PointwiseSum,
    /// `d(F(U), F(V)) ≤ φ(∇_n(GU, GV))`; needs a permuted operation or increasing `φ`.
    PointwiseMax,
    /// `d(F(U), F(V)) ≤ Σ α_i d(g x_i, g y_i)` with `Σ α_i < 1`; `φ` is unused.
    WeightedLinear(Vec<T>),
}

impl<T: Scalar> ContractionForm<T> {
    pub fn name(&self) -> &'static str {
        match self {
            ContractionForm::Sum => "sum",
            ContractionForm::Max => "max",
            ContractionForm::PointwiseSum => "pointwise-sum",
            ContractionForm::PointwiseMax => "pointwise-max",
            ContractionForm::WeightedLinear(_) => "weighted-linear",
        }
    }

    pub fn weighted(weights: Vec<T>) -> Result<Self, ContractionError> {
        let sum = weights.iter().fold(T::zero(), |a, w| a + w.clone());
        if weights.iter().any(|w| *w < T::zero()) || sum >= T::one() {
            return Err(ContractionError::WeightsOutOfRange(sum.to_string()));
        }
        Ok(ContractionForm::WeightedLinear(weights))
    }

    /// Whether the form measures tuples with `∇_n` rather than `Δ_n`.
    pub fn uses_max_metric(&self) -> bool {
        matches!(self, ContractionForm::Max | ContractionForm::PointwiseMax | ContractionForm::WeightedLinear(_))
    }
}

/// Checks the side conditions attached to the pointwise forms.
pub fn form_precondition<T: Scalar>(
    form: &ContractionForm<T>,
    op: &BinaryOp,
    phi: &ControlFunction<T>,
    grid: &[T],
) -> Result<(), ContractionError> {
    match form {
        ContractionForm::PointwiseSum if !is_permuted(op).permuted => Err(ContractionError::FormPreconditionUnmet {
            form: "pointwise-sum",
            requirement: "a permuted operation",
        }),
        ContractionForm::PointwiseMax
            if !is_permuted(op).permuted && !phi.increasing_by_construction() && sampled_increasing(phi, grid).is_some() =>
        {
            Err(ContractionError::FormPreconditionUnmet {
                form: "pointwise-max",
                requirement: "a permuted operation or an increasing control function",
            })
        }
        ContractionForm::WeightedLinear(w) if w.len() != op.n() => Err(ContractionError::FormPreconditionUnmet {
            form: "weighted-linear",
            requirement: "one weight per coordinate",
        }),
        _ => Ok(()),
    }
}
