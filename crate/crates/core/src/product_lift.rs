//! The product space `X^n`: slices `U*i`, the lifted maps `F_*` and `G`, the
//! metrics `Δ_n`, `∇_n` and the product order `⊑`.

use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::index_algebra::{is_member_u, is_permuted, BinaryOp, Partition};
use crate::scalar::Scalar;
use crate::spaces::{MultiMap, OrderedMetricSpace, SelfMap, SpaceError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiftError {
    #[error("slice index {index} outside 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("tuple lengths differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("precondition unmet: {0}")]
    PreconditionUnmet(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

fn check_len(left: usize, right: usize) -> Result<(), LiftError> {
    if left == right {
        Ok(())
    } else {
        Err(LiftError::DimensionMismatch { left, right })
    }
}

pub(crate) fn slice0<P: Clone>(u: &[P], op: &BinaryOp, i: usize) -> Vec<P> {
    op.row0(i).iter().map(|&k| u[k].clone()).collect()
}

/// `U*i`: coordinate `k` is `x_{*(i,k)}`. `i` is 1-based.
pub fn slice<P: Clone>(u: &[P], op: &BinaryOp, i: usize) -> Result<Vec<P>, LiftError> {
    check_len(u.len(), op.n())?;
    if i < 1 || i > op.n() {
        return Err(LiftError::IndexOutOfRange { index: i, n: op.n() });
    }
    Ok(slice0(u, op, i - 1))
}

/// `F_*(U) = (F(U*1), .., F(U*n))`.
pub fn apply_f_star<P: Clone>(f: &dyn MultiMap<P>, op: &BinaryOp, u: &[P]) -> Result<Vec<P>, SpaceError> {
    if u.len() != op.n() {
        return Err(SpaceError::ArityMismatch {
            expected: op.n(),
            got: u.len(),
        });
    }
    (0..op.n()).map(|i| f.eval(&slice0(u, op, i))).collect()
}

/// `G(U) = (g x_1, .., g x_n)`.
pub fn apply_g<P>(g: &dyn SelfMap<P>, u: &[P]) -> Vec<P> {
    u.iter().map(|x| g.eval(x)).collect()
}

/// `Δ_n(U, V) = (1/n) Σ d(x_i, y_i)`.
pub fn delta_n<S: OrderedMetricSpace>(space: &S, u: &[S::Point], v: &[S::Point]) -> Result<S::Scalar, LiftError> {
    check_len(u.len(), v.len())?;
    let sum = u
        .iter()
        .zip(v)
        .fold(S::Scalar::zero(), |acc, (a, b)| acc + space.dist(a, b));
    Ok(sum / S::Scalar::from_count(u.len().max(1)))
}

/// `∇_n(U, V) = max d(x_i, y_i)`.
pub fn nabla_n<S: OrderedMetricSpace>(space: &S, u: &[S::Point], v: &[S::Point]) -> Result<S::Scalar, LiftError> {
    check_len(u.len(), v.len())?;
    Ok(u
        .iter()
        .zip(v)
        .fold(S::Scalar::zero(), |acc, (a, b)| S::Scalar::max_of(acc, space.dist(a, b))))
}

/// `U ⊑ V`: `x_i ⪯ y_i` on `A` and `x_i ⪰ y_i` on `B`.
pub fn product_leq<S: OrderedMetricSpace>(space: &S, u: &[S::Point], v: &[S::Point], part: &Partition) -> bool {
    u.len() == v.len()
        && u.len() == part.n()
        && u.iter().zip(v).enumerate().all(|(i, (a, b))| {
            if part.in_a0(i) {
                space.leq(a, b)
            } else {
                space.leq(b, a)
            }
        })
}

/// `U ⊑ V` or `V ⊑ U`.
pub fn comparable<S: OrderedMetricSpace>(space: &S, u: &[S::Point], v: &[S::Point], part: &Partition) -> bool {
    product_leq(space, u, v, part) || product_leq(space, v, u, part)
}

/// Result of the slice-ordering check: rows whose required order failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Lemma4Report {
    pub violating_rows: Vec<usize>,
}

impl Lemma4Report {
    pub fn holds(&self) -> bool {
        self.violating_rows.is_empty()
    }
}

/// Given `G(U) ⊑ G(V)` and `*` in `U_ι`, checks `G(U*i) ⊑ G(V*i)` for `i` in `A`
/// and `G(U*i) ⊒ G(V*i)` for `i` in `B`.
pub fn lemma4_check<S: OrderedMetricSpace>(
    space: &S,
    g: &dyn SelfMap<S::Point>,
    op: &BinaryOp,
    part: &Partition,
    u: &[S::Point],
    v: &[S::Point],
) -> Result<Lemma4Report, LiftError> {
    check_len(u.len(), op.n())?;
    check_len(v.len(), op.n())?;
    let membership = is_member_u(op, part).map_err(|e| LiftError::PreconditionUnmet(e.to_string()))?;
    if !membership.member {
        return Err(LiftError::PreconditionUnmet(format!(
            "operation is not in U for partition {part} ({} closure violations)",
            membership.violations.len()
        )));
    }
    let (gu, gv) = (apply_g(g, u), apply_g(g, v));
    if !product_leq(space, &gu, &gv, part) {
        return Err(LiftError::PreconditionUnmet("G(U) is not below G(V)".into()));
    }
    let violating_rows = (0..op.n())
        .filter(|&i| {
            let su = apply_g(g, &slice0(u, op, i));
            let sv = apply_g(g, &slice0(v, op, i));
            let ok = if part.in_a0(i) {
                product_leq(space, &su, &sv, part)
            } else {
                product_leq(space, &sv, &su, part)
            };
            !ok
        })
        .map(|i| i + 1)
        .collect();
    Ok(Lemma4Report { violating_rows })
}

/// Per-row comparison of slice distances with `Δ_n` and `∇_n` of `G U`, `G V`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Lemma6Report {
    pub permuted: bool,
    /// Rows whose average slice distance differs from `Δ_n`.
    pub average_differs: Vec<usize>,
    /// Rows whose maximal slice distance differs from `∇_n`.
    pub max_differs: Vec<usize>,
    /// Rows whose maximal slice distance exceeds `∇_n`.
    pub max_exceeds: Vec<usize>,
}

impl Lemma6Report {
    /// Equalities are only claimed for permuted operations; the bound always.
    pub fn holds(&self) -> bool {
        self.max_exceeds.is_empty() && (!self.permuted || (self.average_differs.is_empty() && self.max_differs.is_empty()))
    }
}

pub fn lemma6_check<S: OrderedMetricSpace>(
    space: &S,
    g: &dyn SelfMap<S::Point>,
    op: &BinaryOp,
    u: &[S::Point],
    v: &[S::Point],
) -> Result<Lemma6Report, LiftError> {
    check_len(u.len(), op.n())?;
    check_len(v.len(), op.n())?;
    let (gu, gv) = (apply_g(g, u), apply_g(g, v));
    let delta = delta_n(space, &gu, &gv)?;
    let nabla = nabla_n(space, &gu, &gv)?;
    let mut report = Lemma6Report {
        permuted: is_permuted(op).permuted,
        average_differs: Vec::new(),
        max_differs: Vec::new(),
        max_exceeds: Vec::new(),
    };
    for i in 0..op.n() {
        let su = slice0(&gu, op, i);
        let sv = slice0(&gv, op, i);
        let avg = delta_n(space, &su, &sv)?;
        let max = nabla_n(space, &su, &sv)?;
        if !avg.approx_eq(&delta) {
            report.average_differs.push(i + 1);
        }
        if !max.approx_eq(&nabla) {
            report.max_differs.push(i + 1);
        }
        if !max.approx_le(&nabla) {
            report.max_exceeds.push(i + 1);
        }
    }
    Ok(report)
}
