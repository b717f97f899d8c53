//! Hypothesis checks and the monotone coincidence iteration.

use num_traits::Zero;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::contractions::{check_below_identity, default_grid, form_precondition, ContractionError, ContractionForm, ControlFunction};
use crate::index_algebra::{is_member_u, is_permuted, BinaryOp, Partition};
use crate::product_lift::{apply_f_star, apply_g, comparable, delta_n, nabla_n, product_leq};
use crate::scalar::Scalar;
use crate::spaces::{
    check_commuting, check_g_increasing, check_g_injective, check_weak_star_compat, tuple_count, tuples, Assumption,
    AssumptionSet, MultiMap, OrderedMetricSpace, Provenance, SelfMap, SpaceError,
};

/// Largest number of tuples any exhaustive scan will visit.
pub const DEFAULT_SIZE_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// `F(X^n) ⊆ g(X) ∩ E` with compatibility of `F` and `g`.
    Compatible,
    /// `F(X^n) ⊆ E ⊆ g(X)`.
    Range,
    /// `g` is the identity.
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gate {
    NotInU,
    MonotoneViolation,
    ContractionViolation,
    NoInitialPoint,
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gate::NotInU => "NotInU",
            Gate::MonotoneViolation => "MonotoneViolation",
            Gate::ContractionViolation => "ContractionViolation",
            Gate::NoInitialPoint => "NoInitialPoint",
        })
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("gate {gate} failed: {detail}")]
    GateFailed {
        gate: Gate,
        detail: String,
        report: Box<HypothesisReport>,
    },
    #[error("coordinate {coordinate} has no g-preimage at step {step}")]
    SectionFailure { step: usize, coordinate: usize },
    #[error("no initial tuple satisfies the starting condition in either orientation")]
    NotFound,
    #[error("exhaustive scan over {needed} tuples exceeds the limit of {limit}")]
    SizeLimit { needed: String, limit: u64 },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Contraction(#[from] ContractionError),
}

/// A tupled coincidence problem.
pub struct ProblemInstance<S: OrderedMetricSpace> {
    pub space: S,
    /// The subspace `E`; `None` means all of `X`.
    pub subspace: Option<Vec<S::Point>>,
    pub f: Box<dyn MultiMap<S::Point>>,
    pub g: Box<dyn SelfMap<S::Point>>,
    pub op: BinaryOp,
    pub part: Partition,
    pub phi: ControlFunction<S::Scalar>,
    pub form: ContractionForm<S::Scalar>,
    pub assumptions: AssumptionSet,
    pub mode: Mode,
    pub initial: Option<Vec<S::Point>>,
}

impl<S: OrderedMetricSpace> ProblemInstance<S> {
    pub fn new(
        space: S,
        f: Box<dyn MultiMap<S::Point>>,
        g: Box<dyn SelfMap<S::Point>>,
        op: BinaryOp,
        part: Partition,
        phi: ControlFunction<S::Scalar>,
    ) -> Result<Self, SolveError> {
        if op.n() != part.n() || op.n() != f.arity() {
            return Err(SolveError::InvalidInstance(format!(
                "operation has n = {}, partition n = {}, F arity {}",
                op.n(),
                part.n(),
                f.arity()
            )));
        }
        let mode = if g.is_identity() { Mode::FixedPoint } else { Mode::Compatible };
        Ok(Self {
            space,
            subspace: None,
            f,
            g,
            op,
            part,
            phi,
            form: ContractionForm::Sum,
            assumptions: AssumptionSet::new(),
            mode,
            initial: None,
        })
    }

    pub fn with_form(mut self, form: ContractionForm<S::Scalar>) -> Self {
        self.form = form;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Result<Self, SolveError> {
        if mode == Mode::FixedPoint && !self.g.is_identity() {
            return Err(SolveError::InvalidInstance("fixed-point mode needs g = identity".into()));
        }
        self.mode = mode;
        Ok(self)
    }

    pub fn with_initial(mut self, u0: Vec<S::Point>) -> Self {
        self.initial = Some(u0);
        self
    }

    pub fn with_subspace(mut self, e: Vec<S::Point>) -> Self {
        self.subspace = Some(e);
        self
    }

    pub fn with_assumptions(mut self, a: AssumptionSet) -> Self {
        self.assumptions = a;
        self
    }

    pub fn n(&self) -> usize {
        self.op.n()
    }

    pub fn in_subspace(&self, p: &S::Point) -> bool {
        self.subspace.as_ref().is_none_or(|e| e.contains(p))
    }

    /// All `n`-tuples of a finite carrier, refusing above `limit`.
    pub fn all_tuples(&self, limit: u64) -> Result<Vec<Vec<S::Point>>, SolveError> {
        let elems = self.space.elements().ok_or_else(|| SolveError::InvalidInstance("carrier is infinite".into()))?;
        match tuple_count(elems.len(), self.n()) {
            Some(c) if c <= limit => Ok(tuples(&elems, self.n()).collect()),
            c => Err(SolveError::SizeLimit {
                needed: c.map_or_else(|| "more than u64::MAX".to_string(), |c| c.to_string()),
                limit,
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub tol: f64,
    pub max_iters: usize,
    /// Pairs drawn by sampled checks on infinite carriers.
    pub samples: usize,
    pub seed: u64,
    pub stall_window: usize,
    pub size_limit: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 1000,
            samples: 10_000,
            seed: 0x5EED,
            stall_window: 50,
            size_limit: DEFAULT_SIZE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HypothesisEntry {
    pub name: String,
    pub holds: bool,
    pub provenance: Provenance,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct HypothesisReport {
    pub entries: Vec<HypothesisEntry>,
}

impl HypothesisReport {
    pub fn push(&mut self, name: impl Into<String>, holds: bool, provenance: Provenance, detail: impl Into<String>) {
        self.entries.push(HypothesisEntry {
            name: name.into(),
            holds,
            provenance,
            detail: detail.into(),
        });
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// A pair of argument tuples on which a required inequality fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairViolation {
    pub left: serde_json::Value,
    pub right: serde_json::Value,
    pub detail: String,
}

const KEPT_VIOLATIONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub holds: bool,
    pub provenance: Provenance,
    pub checked: usize,
    pub violation_count: usize,
    /// The first few violations.
    pub violations: Vec<PairViolation>,
}

impl CheckReport {
    fn new(provenance: Provenance) -> Self {
        Self {
            holds: true,
            provenance,
            checked: 0,
            violation_count: 0,
            violations: Vec::new(),
        }
    }

    fn record(&mut self, v: impl FnOnce() -> PairViolation) {
        self.holds = false;
        self.violation_count += 1;
        if self.violations.len() < KEPT_VIOLATIONS {
            self.violations.push(v());
        }
    }

    fn summary(&self) -> String {
        format!("{} cases, {} violations", self.checked, self.violation_count)
    }
}

fn provenance_of<S: OrderedMetricSpace>(space: &S) -> Provenance {
    if space.is_finite() {
        Provenance::MachineVerified
    } else {
        Provenance::Sampled
    }
}

/// `F` is g-increasing in arguments of `A` and g-decreasing in arguments of `B`.
pub fn check_mixed_monotone<S: OrderedMetricSpace>(inst: &ProblemInstance<S>, cfg: &SolveConfig) -> Result<CheckReport, SolveError> {
    let n = inst.n();
    let space = &inst.space;
    let mut report = CheckReport::new(provenance_of(space));
    let mut visit = |pos: usize, ctx: &[S::Point], a: &S::Point, b: &S::Point| -> Result<(), SolveError> {
        let mut lo = ctx.to_vec();
        lo[pos] = a.clone();
        let mut hi = ctx.to_vec();
        hi[pos] = b.clone();
        let (fl, fh) = (inst.f.eval(&lo)?, inst.f.eval(&hi)?);
        let increasing = inst.part.in_a0(pos);
        let ok = if increasing { space.leq(&fl, &fh) } else { space.leq(&fh, &fl) };
        report.checked += 1;
        if !ok {
            report.record(|| PairViolation {
                left: space.tuple_json(&lo),
                right: space.tuple_json(&hi),
                detail: format!(
                    "argument {} must be g-{}",
                    pos + 1,
                    if increasing { "increasing" } else { "decreasing" }
                ),
            });
        }
        Ok(())
    };
    if let Some(elems) = space.elements() {
        inst.all_tuples(cfg.size_limit)?;
        let images: Vec<S::Point> = elems.iter().map(|x| inst.g.eval(x)).collect();
        for pos in 0..n {
            for ctx in tuples(&elems, n) {
                if ctx[pos] != elems[0] {
                    continue;
                }
                for (ia, a) in elems.iter().enumerate() {
                    for (ib, b) in elems.iter().enumerate() {
                        if ia != ib && space.leq(&images[ia], &images[ib]) {
                            visit(pos, &ctx, a, b)?;
                        }
                    }
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for s in 0..cfg.samples {
            let pos = s % n;
            let ctx: Vec<S::Point> = (0..n).map(|_| space.sample_point(&mut rng)).collect();
            let mut a = space.sample_point(&mut rng);
            let mut b = space.sample_point(&mut rng);
            if !space.leq(&inst.g.eval(&a), &inst.g.eval(&b)) {
                std::mem::swap(&mut a, &mut b);
            }
            if space.leq(&inst.g.eval(&a), &inst.g.eval(&b)) {
                visit(pos, &ctx, &a, &b)?;
            }
        }
    }
    Ok(report)
}

/// Smallest positive and largest distance, for sizing sample grids.
fn distance_range<S: OrderedMetricSpace>(space: &S) -> (f64, f64) {
    match space.elements() {
        Some(elems) => {
            let ds: Vec<f64> = elems
                .iter()
                .flat_map(|a| elems.iter().map(move |b| (a, b)))
                .map(|(a, b)| space.dist(a, b).to_f64_lossy())
                .filter(|d| *d > 0.0)
                .collect();
            let lo = ds.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ds.iter().cloned().fold(0.0, f64::max);
            if ds.is_empty() {
                (1.0, 1.0)
            } else {
                (lo / elems.len().max(1) as f64, hi)
            }
        }
        None => {
            let pts = space.scan_points();
            let hi = match (pts.first(), pts.last()) {
                (Some(a), Some(b)) => space.dist(a, b).to_f64_lossy(),
                _ => 1.0,
            };
            (1e-6, hi.max(1e-6))
        }
    }
}

/// Grid used for sampled properties of `φ`.
pub fn phi_grid<S: OrderedMetricSpace>(inst: &ProblemInstance<S>) -> Vec<S::Scalar> {
    let (lo, hi) = distance_range(&inst.space);
    default_grid(lo, hi)
}

struct Lifted<P> {
    u: Vec<P>,
    gu: Vec<P>,
    f_plain: P,
    f_star: Vec<P>,
}

fn lift<S: OrderedMetricSpace>(inst: &ProblemInstance<S>, u: Vec<S::Point>) -> Result<Lifted<S::Point>, SolveError> {
    Ok(Lifted {
        gu: apply_g(inst.g.as_ref(), &u),
        f_plain: inst.f.eval(&u)?,
        f_star: apply_f_star(inst.f.as_ref(), &inst.op, &u)?,
        u,
    })
}

/// Returns `(lhs, rhs)` of the selected contraction inequality.
fn contraction_sides<S: OrderedMetricSpace>(
    inst: &ProblemInstance<S>,
    a: &Lifted<S::Point>,
    b: &Lifted<S::Point>,
) -> Result<(S::Scalar, S::Scalar), SolveError> {
    let space = &inst.space;
    let pointwise = space.dist(&a.f_plain, &b.f_plain);
    Ok(match &inst.form {
        ContractionForm::Sum => (delta_n(space, &a.f_star, &b.f_star).unwrap(), inst.phi.eval(&delta_n(space, &a.gu, &b.gu).unwrap())),
        ContractionForm::Max => (nabla_n(space, &a.f_star, &b.f_star).unwrap(), inst.phi.eval(&nabla_n(space, &a.gu, &b.gu).unwrap())),
        ContractionForm::PointwiseSum => (pointwise, inst.phi.eval(&delta_n(space, &a.gu, &b.gu).unwrap())),
        ContractionForm::PointwiseMax => (pointwise, inst.phi.eval(&nabla_n(space, &a.gu, &b.gu).unwrap())),
        ContractionForm::WeightedLinear(w) => {
            let rhs = w
                .iter()
                .zip(a.gu.iter().zip(&b.gu))
                .fold(S::Scalar::zero(), |acc, (wi, (x, y))| acc + wi.clone() * space.dist(x, y));
            (pointwise, rhs)
        }
    })
}

/// Evaluates the contraction inequality over all (finite) or sampled (real)
/// pairs whose `G`-images are comparable.
pub fn check_contraction<S: OrderedMetricSpace>(inst: &ProblemInstance<S>, cfg: &SolveConfig) -> Result<CheckReport, SolveError> {
    form_precondition(&inst.form, &inst.op, &inst.phi, &phi_grid(inst))?;
    let space = &inst.space;
    let mut report = CheckReport::new(provenance_of(space));
    let mut visit = |a: &Lifted<S::Point>, b: &Lifted<S::Point>| -> Result<(), SolveError> {
        let (lhs, rhs) = contraction_sides(inst, a, b)?;
        report.checked += 1;
        if !lhs.approx_le(&rhs) {
            report.record(|| PairViolation {
                left: space.tuple_json(&a.u),
                right: space.tuple_json(&b.u),
                detail: format!("{} form: {} > {}", inst.form.name(), lhs, rhs),
            });
        }
        Ok(())
    };
    if space.is_finite() {
        let lifted: Vec<Lifted<S::Point>> = inst
            .all_tuples(cfg.size_limit)?
            .into_iter()
            .map(|u| lift(inst, u))
            .collect::<Result<_, _>>()?;
        for (i, a) in lifted.iter().enumerate() {
            for b in &lifted[i + 1..] {
                if comparable(space, &a.gu, &b.gu, &inst.part) {
                    visit(a, b)?;
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xC0_47AC);
        let n = inst.n();
        for _ in 0..cfg.samples {
            let mut u = Vec::with_capacity(n);
            let mut v = Vec::with_capacity(n);
            for i in 0..n {
                let mut x = space.sample_point(&mut rng);
                let mut y = space.sample_point(&mut rng);
                let (gx, gy) = (inst.g.eval(&x), inst.g.eval(&y));
                let ordered = if inst.part.in_a0(i) { space.leq(&gx, &gy) } else { space.leq(&gy, &gx) };
                if !ordered {
                    std::mem::swap(&mut x, &mut y);
                }
                u.push(x);
                v.push(y);
            }
            let (a, b) = (lift(inst, u)?, lift(inst, v)?);
            if comparable(space, &a.gu, &b.gu, &inst.part) {
                visit(&a, &b)?;
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// `G(U0) ⊑ F_*(U0)`
    Ascending,
    /// `G(U0) ⊒ F_*(U0)`
    Descending,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialPoint<P> {
    pub tuple: Vec<P>,
    pub orientation: Orientation,
}

fn orientation_of<S: OrderedMetricSpace>(inst: &ProblemInstance<S>, u: &[S::Point]) -> Result<Option<Orientation>, SolveError> {
    let gu = apply_g(inst.g.as_ref(), u);
    let fu = apply_f_star(inst.f.as_ref(), &inst.op, u)?;
    Ok(if product_leq(&inst.space, &gu, &fu, &inst.part) {
        Some(Orientation::Ascending)
    } else if product_leq(&inst.space, &fu, &gu, &inst.part) {
        Some(Orientation::Descending)
    } else {
        None
    })
}

/// First tuple with `g(x_i) ⪯ F(U*i)` on `A` and `⪰` on `B`, or the reverse.
/// Tries `candidates`, then every tuple (finite) or a grid scan (infinite).
pub fn find_initial<S: OrderedMetricSpace>(
    inst: &ProblemInstance<S>,
    candidates: &[Vec<S::Point>],
    cfg: &SolveConfig,
) -> Result<InitialPoint<S::Point>, SolveError> {
    let n = inst.n();
    for c in candidates {
        if c.len() == n && c.iter().all(|p| inst.space.contains(p)) {
            if let Some(orientation) = orientation_of(inst, c)? {
                return Ok(InitialPoint {
                    tuple: c.clone(),
                    orientation,
                });
            }
        }
    }
    let pool = match inst.space.elements() {
        Some(elems) => {
            inst.all_tuples(cfg.size_limit)?;
            elems
        }
        None => {
            let pts = inst.space.scan_points();
            let per_axis = ((200_000f64).powf(1.0 / n as f64).floor() as usize).clamp(2, pts.len().max(2));
            let step = (pts.len() as f64 / per_axis as f64).max(1.0);
            (0..per_axis.min(pts.len()))
                .map(|k| pts[((k as f64 * step) as usize).min(pts.len() - 1)].clone())
                .collect()
        }
    };
    for u in tuples(&pool, n) {
        if let Some(orientation) = orientation_of(inst, &u)? {
            return Ok(InitialPoint { tuple: u, orientation });
        }
    }
    Err(SolveError::NotFound)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIters,
    Stalled,
}

/// `U(0), U(1), ..` with the residuals `Δ_n` and `∇_n` of `(G U(m+1), G U(m))`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace<P, T> {
    pub tuples: Vec<Vec<P>>,
    pub delta_residuals: Vec<T>,
    pub nabla_residuals: Vec<T>,
    pub status: Status,
    /// Residuals `t` met during the run with `φ(t) ≥ t`.
    pub phi_violations: Vec<T>,
}

impl<P, T> IterationTrace<P, T> {
    pub fn steps(&self) -> usize {
        self.nabla_residuals.len()
    }

    pub fn last(&self) -> &[P] {
        self.tuples.last().expect("trace holds the initial tuple")
    }
}

/// Picard iteration `g(x_i^(m+1)) = F(U(m)*i)` through the section of `g`.
pub fn iterate<S: OrderedMetricSpace>(
    inst: &ProblemInstance<S>,
    u0: Vec<S::Point>,
    cfg: &SolveConfig,
) -> Result<IterationTrace<S::Point, S::Scalar>, SolveError> {
    let space = &inst.space;
    let tol = S::Scalar::from_f64_lossy(cfg.tol);
    let finite = space.is_finite();
    let mut trace = IterationTrace {
        tuples: vec![u0],
        delta_residuals: Vec::new(),
        nabla_residuals: Vec::new(),
        status: Status::MaxIters,
        phi_violations: Vec::new(),
    };
    let mut non_decreasing = 0usize;
    for step in 0..cfg.max_iters {
        let u = trace.tuples.last().unwrap().clone();
        let fu = apply_f_star(inst.f.as_ref(), &inst.op, &u)?;
        let gu = apply_g(inst.g.as_ref(), &u);
        let nabla = nabla_n(space, &fu, &gu).unwrap();
        let delta = delta_n(space, &fu, &gu).unwrap();
        if nabla > S::Scalar::zero() && !(inst.phi.eval(&nabla) < nabla) {
            trace.phi_violations.push(nabla.clone());
        }
        match trace.nabla_residuals.last() {
            Some(prev) if nabla >= *prev && nabla > tol => non_decreasing += 1,
            _ => non_decreasing = 0,
        }
        trace.delta_residuals.push(delta);
        trace.nabla_residuals.push(nabla.clone());
        if nabla.is_zero() {
            trace.status = Status::Converged;
            return Ok(trace);
        }
        let next = fu
            .iter()
            .enumerate()
            .map(|(i, y)| {
                inst.g.section(y).ok_or(SolveError::SectionFailure {
                    step,
                    coordinate: i + 1,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let repeated = finite && trace.tuples.contains(&next);
        trace.tuples.push(next);
        if nabla <= tol {
            trace.status = Status::Converged;
            return Ok(trace);
        }
        if repeated || non_decreasing >= cfg.stall_window {
            trace.status = Status::Stalled;
            return Ok(trace);
        }
    }
    Ok(trace)
}

/// Exhaustive or sampled check that `F(X^n)` lands where the mode requires.
pub fn check_range_condition<S: OrderedMetricSpace>(
    inst: &ProblemInstance<S>,
    mode: Mode,
    cfg: &SolveConfig,
) -> Result<CheckReport, SolveError> {
    let space = &inst.space;
    let mut report = CheckReport::new(provenance_of(space));
    let g_image_of = |y: &S::Point| inst.g.section(y).is_some_and(|x| inst.g.eval(&x) == *y);
    let mut visit = |u: &[S::Point]| -> Result<(), SolveError> {
        let y = inst.f.eval(u)?;
        report.checked += 1;
        let ok = space.contains(&y) && inst.in_subspace(&y) && (mode == Mode::FixedPoint || g_image_of(&y));
        if !ok {
            report.record(|| PairViolation {
                left: space.tuple_json(u),
                right: space.point_json(&y),
                detail: "F-image outside the required range".into(),
            });
        }
        Ok(())
    };
    if space.is_finite() {
        for u in inst.all_tuples(cfg.size_limit)? {
            visit(&u)?;
        }
        if mode == Mode::Range {
            // E ⊆ g(X)
            if let Some(e) = &inst.subspace {
                for y in e {
                    if !g_image_of(y) {
                        report.record(|| PairViolation {
                            left: space.point_json(y),
                            right: serde_json::Value::Null,
                            detail: "E is not contained in g(X)".into(),
                        });
                    }
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7A_46E);
        for _ in 0..cfg.samples.min(1000) {
            let u: Vec<S::Point> = (0..inst.n()).map(|_| space.sample_point(&mut rng)).collect();
            visit(&u)?;
        }
    }
    Ok(report)
}

/// The instance's assumptions with every flag that can be decided on a
/// finite carrier replaced by its decided value.
pub fn machine_assumptions<S: OrderedMetricSpace>(inst: &ProblemInstance<S>, cfg: &SolveConfig) -> Result<AssumptionSet, SolveError> {
    let mut set = inst.assumptions.clone();
    if !inst.space.is_finite() {
        return Ok(set);
    }
    inst.all_tuples(cfg.size_limit)?;
    set.mark_vacuous_on_finite();
    let mv = Provenance::MachineVerified;
    let f = inst.f.as_ref();
    let g = inst.g.as_ref();
    let weak = check_weak_star_compat(f, g, &inst.op, &inst.space)?.holds;
    set.set(Assumption::WeaklyStarCompatible, weak, mv);
    // On a discrete carrier the sequential compatibility collapses to the weak form.
    set.set(Assumption::StarOCompatible, weak, mv);
    set.set(Assumption::Commuting, check_commuting(f, g, &inst.space)?.holds, mv);
    set.set(Assumption::GOneOne, check_g_injective(g, &inst.space)?.holds, mv);
    let increasing = check_g_increasing(g, &inst.space)?.holds;
    set.set(Assumption::GIncreasing, increasing, mv);
    // An increasing two-step sequence x ⪯ y, y, y, .. forces g x ⪯ g y.
    set.set(Assumption::GMcb, increasing, mv);
    set.set(Assumption::RangeCondition, check_range_condition(inst, inst.mode, cfg)?.holds, mv);
    Ok(set)
}

/// Outcome of a successful [`solve`].
#[derive(Debug, Clone)]
pub struct SolveOutcome<P, T> {
    pub tuple: Vec<P>,
    pub initial: InitialPoint<P>,
    pub trace: IterationTrace<P, T>,
    pub report: HypothesisReport,
}

fn gate(gate: Gate, detail: String, report: &HypothesisReport) -> SolveError {
    SolveError::GateFailed {
        gate,
        detail,
        report: Box::new(report.clone()),
    }
}

/// Runs every gate, then iterates from the first admissible initial tuple.
pub fn solve<S: OrderedMetricSpace>(
    inst: &ProblemInstance<S>,
    cfg: &SolveConfig,
) -> Result<SolveOutcome<S::Point, S::Scalar>, SolveError> {
    let mut report = HypothesisReport::default();
    let mv = Provenance::MachineVerified;

    let membership = is_member_u(&inst.op, &inst.part).map_err(|e| SolveError::InvalidInstance(e.to_string()))?;
    let witnesses: Vec<String> = membership.violations.iter().map(|v| v.to_string()).collect();
    report.push("membership_u", membership.member, mv, witnesses.join("; "));
    report.push("permuted", is_permuted(&inst.op).permuted, mv, "");
    if !membership.member {
        return Err(gate(Gate::NotInU, format!("operation not in U for {}: {}", inst.part, witnesses.join("; ")), &report));
    }

    let mono = check_mixed_monotone(inst, cfg)?;
    report.push("mixed_monotone", mono.holds, mono.provenance, mono.summary());
    if !mono.holds {
        let first = mono.violations.first().map(|v| format!("{} at {} vs {}", v.detail, v.left, v.right));
        return Err(gate(Gate::MonotoneViolation, first.unwrap_or_default(), &report));
    }

    let contraction = check_contraction(inst, cfg)?;
    report.push(format!("contraction_{}", inst.form.name()), contraction.holds, contraction.provenance, contraction.summary());
    if !contraction.holds {
        let first = contraction.violations.first().map(|v| format!("{} at {} vs {}", v.detail, v.left, v.right));
        return Err(gate(Gate::ContractionViolation, first.unwrap_or_default(), &report));
    }

    let phi = &inst.phi;
    report.push("control_class", true, phi.class_provenance(), format!("{} in {}", phi.name(), phi.class()));
    let below = check_below_identity(phi, &phi_grid(inst));
    report.push("phi_below_identity", below.holds(), Provenance::Sampled, format!("{} grid points", below.checked));

    let range = check_range_condition(inst, inst.mode, cfg)?;
    let range_prov = match inst.assumptions.get(Assumption::RangeCondition) {
        Some(flag) if !inst.space.is_finite() => flag.provenance,
        _ => range.provenance,
    };
    report.push("range_condition", range.holds, range_prov, range.summary());

    let assumptions = machine_assumptions(inst, cfg)?;
    for (a, flag) in assumptions.iter() {
        report.push(format!("assumption:{}", a.key()), flag.value, flag.provenance, "");
    }

    let candidates: Vec<Vec<S::Point>> = inst.initial.iter().cloned().collect();
    let initial = match find_initial(inst, &candidates, cfg) {
        Ok(p) => p,
        Err(SolveError::NotFound) => return Err(gate(Gate::NoInitialPoint, "no admissible initial tuple".into(), &report)),
        Err(e) => return Err(e),
    };
    report.push(
        "initial_tuple",
        true,
        mv,
        format!("{} ({:?})", inst.space.tuple_json(&initial.tuple), initial.orientation),
    );

    let trace = iterate(inst, initial.tuple.clone(), cfg)?;
    Ok(SolveOutcome {
        tuple: trace.last().to_vec(),
        initial,
        trace,
        report,
    })
}

/// Hypotheses that upgrade existence to uniqueness.
#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport<P> {
    /// Every two `G`-images have a common comparable `G`-image.
    pub directed: bool,
    pub directed_witness: Option<(Vec<P>, Vec<P>)>,
    pub g_one_one: Option<bool>,
    pub weakly_star_compatible: Option<bool>,
}

impl<P> UniquenessReport<P> {
    pub fn holds(&self) -> bool {
        self.directed && self.g_one_one != Some(false) && self.weakly_star_compatible != Some(false)
    }
}

pub fn check_uniqueness_hypothesis<S: OrderedMetricSpace>(
    inst: &ProblemInstance<S>,
    require_one_one: bool,
    require_weak_compat: bool,
    cfg: &SolveConfig,
) -> Result<UniquenessReport<S::Point>, SolveError> {
    if !inst.space.is_finite() {
        return Err(SpaceError::InfiniteSpaceUndecidable("directedness").into());
    }
    let mut images: Vec<Vec<S::Point>> = Vec::new();
    for u in inst.all_tuples(cfg.size_limit)? {
        let gu = apply_g(inst.g.as_ref(), &u);
        if !images.contains(&gu) {
            images.push(gu);
        }
    }
    let cube = (images.len() as u64).saturating_pow(3);
    if cube > cfg.size_limit.saturating_mul(100) {
        return Err(SolveError::SizeLimit {
            needed: cube.to_string(),
            limit: cfg.size_limit.saturating_mul(100),
        });
    }
    let space = &inst.space;
    let part = &inst.part;
    let mut witness = None;
    'outer: for (i, a) in images.iter().enumerate() {
        for b in &images[i + 1..] {
            if comparable(space, a, b, part) {
                continue;
            }
            if !images.iter().any(|w| comparable(space, w, a, part) && comparable(space, w, b, part)) {
                witness = Some((a.clone(), b.clone()));
                break 'outer;
            }
        }
    }
    let g_one_one = if require_one_one {
        Some(check_g_injective(inst.g.as_ref(), space)?.holds)
    } else {
        None
    };
    let weak = if require_weak_compat {
        Some(check_weak_star_compat(inst.f.as_ref(), inst.g.as_ref(), &inst.op, space)?.holds)
    } else {
        None
    };
    Ok(UniquenessReport {
        directed: witness.is_none(),
        directed_witness: witness,
        g_one_one,
        weakly_star_compatible: weak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index_algebra::{preset, PresetParams};
    use crate::spaces::{Elem, FiniteMultiMap, FiniteSelfMap, FiniteSpace, FnMultiMap, Identity, RealSpace};
    use crate::Exact;
    use num_rational::Ratio;

    fn coupled() -> (BinaryOp, Partition) {
        preset("coupled", 2, &PresetParams::default()).unwrap()
    }

    fn demo() -> ProblemInstance<RealSpace<f64>> {
        let (op, part) = coupled();
        ProblemInstance::new(
            RealSpace::line(),
            Box::new(FnMultiMap::new(2, |u: &[f64]| (u[0] - u[1]) / 4.0)),
            Box::new(Identity),
            op,
            part,
            ControlFunction::linear(0.5).unwrap(),
        )
        .unwrap()
        .with_form(ContractionForm::PointwiseSum)
    }

    fn real_instance(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, lo: f64) -> ProblemInstance<RealSpace<f64>> {
        let (op, part) = coupled();
        ProblemInstance::new(
            RealSpace::interval(lo, 10.0).unwrap(),
            Box::new(FnMultiMap::new(2, f)),
            Box::new(Identity),
            op,
            part,
            ControlFunction::linear(0.9).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn monotone_examples() {
        let cfg = SolveConfig::default();
        let r = check_mixed_monotone(&demo(), &cfg).unwrap();
        assert!(r.holds && r.provenance == Provenance::Sampled && r.checked > 9000);
        assert!(check_mixed_monotone(&real_instance(|_| 1.0, -10.0), &cfg).unwrap().holds);
        let product = check_mixed_monotone(&real_instance(|u| u[0] * u[1], 0.1), &cfg).unwrap();
        assert!(!product.holds);
        assert!(product.violations.iter().all(|v| v.detail.starts_with("argument 2")));
    }

    #[test]
    fn contraction_examples() {
        let cfg = SolveConfig::default();
        assert!(check_contraction(&demo(), &cfg).unwrap().holds);
        assert!(check_contraction(&real_instance(|_| 3.0, -10.0), &cfg).unwrap().holds);
        for form in [ContractionForm::Sum, ContractionForm::Max, ContractionForm::PointwiseSum, ContractionForm::PointwiseMax] {
            let inst = real_instance(|u| 2.0 * u[0], -10.0).with_form(form);
            assert!(!check_contraction(&inst, &cfg).unwrap().holds);
        }
    }

    #[test]
    fn pointwise_sum_needs_permuted() {
        let op = BinaryOp::skew_1(3).unwrap();
        let part = Partition::new(3, &[1, 3], &[2]).unwrap();
        let inst = ProblemInstance::new(
            RealSpace::<f64>::line(),
            Box::new(FnMultiMap::new(3, |_: &[f64]| 0.0)),
            Box::new(Identity),
            op,
            part,
            ControlFunction::linear(0.5).unwrap(),
        )
        .unwrap()
        .with_form(ContractionForm::PointwiseSum);
        assert!(matches!(
            check_contraction(&inst, &SolveConfig::default()),
            Err(SolveError::Contraction(ContractionError::FormPreconditionUnmet { .. }))
        ));
    }

    #[test]
    fn initial_tuple_examples() {
        let cfg = SolveConfig::default();
        let p = find_initial(&demo(), &[vec![-1.0, 1.0]], &cfg).unwrap();
        assert_eq!(p.tuple, vec![-1.0, 1.0]);
        assert_eq!(p.orientation, Orientation::Ascending);
        // a coincidence tuple satisfies the condition with equality
        assert!(find_initial(&demo(), &[vec![0.0, 0.0]], &cfg).is_ok());

        let r = |n| Ratio::from_integer(n);
        let s: FiniteSpace<Exact> = FiniteSpace::antichain(vec!["a".into(), "b".into()], &[r(0), r(1)]).unwrap();
        let (op, part) = coupled();
        let f = FiniteMultiMap::from_fn(2, 2, |u| Elem::nth(3 - u[0].position()));
        let inst = ProblemInstance::new(s, Box::new(f), Box::new(Identity), op, part, ControlFunction::linear(Ratio::new(1, 2)).unwrap()).unwrap();
        assert!(matches!(find_initial(&inst, &[], &cfg), Err(SolveError::NotFound)));
    }

    #[test]
    fn coupled_demo_converges() {
        let inst = demo().with_initial(vec![-1.0, 1.0]);
        let out = solve(&inst, &SolveConfig::default()).unwrap();
        assert_eq!(out.trace.status, Status::Converged);
        assert!(out.tuple.iter().all(|x| x.abs() <= 1e-10));
        assert!(out.trace.steps() <= 40);
        for w in out.trace.nabla_residuals.windows(2) {
            assert!(w[1] <= w[0] * (0.5 + 1e-6));
        }
        assert_eq!(out.report.get("mixed_monotone").unwrap().provenance, Provenance::Sampled);
        assert!(out.trace.phi_violations.is_empty());
    }

    #[test]
    fn already_coincident_start() {
        let trace = iterate(&demo(), vec![0.0, 0.0], &SolveConfig::default()).unwrap();
        assert_eq!(trace.tuples.len(), 1);
        assert_eq!(trace.status, Status::Converged);
    }

    #[test]
    fn section_failure_when_range_missed() {
        let r = |n| Ratio::from_integer(n);
        let s: FiniteSpace<Exact> = FiniteSpace::chain(vec!["a".into(), "b".into()], &[r(0), r(1)]).unwrap();
        let (op, part) = coupled();
        let f = FiniteMultiMap::constant(2, 2, Elem::nth(2));
        let g = FiniteSelfMap::from_positions(&[1, 1]).unwrap();
        let inst = ProblemInstance::new(s, Box::new(f), Box::new(g), op, part, ControlFunction::linear(Ratio::new(1, 2)).unwrap()).unwrap();
        let err = iterate(&inst, vec![Elem::nth(1), Elem::nth(1)], &SolveConfig::default()).unwrap_err();
        assert!(matches!(err, SolveError::SectionFailure { step: 0, coordinate: 1 }));
        assert!(!check_range_condition(&inst, Mode::Compatible, &SolveConfig::default()).unwrap().holds);
    }

    #[test]
    fn corollary_43_gate() {
        let op = BinaryOp::forward_cyclic(3).unwrap();
        let part = Partition::odd_even(3).unwrap();
        let inst = ProblemInstance::new(
            RealSpace::<f64>::line(),
            Box::new(FnMultiMap::new(3, |_: &[f64]| 0.0)),
            Box::new(Identity),
            op,
            part,
            ControlFunction::linear(0.5).unwrap(),
        )
        .unwrap();
        match solve(&inst, &SolveConfig::default()) {
            Err(SolveError::GateFailed { gate: Gate::NotInU, .. }) => {}
            other => panic!("expected NotInU, got {other:?}"),
        }
    }

    #[test]
    fn uniqueness_examples() {
        let r = |n| Ratio::from_integer(n);
        let (op, part) = coupled();
        let phi = || ControlFunction::linear(Ratio::new(1, 2)).unwrap();
        let labels = || vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let chain: FiniteSpace<Exact> = FiniteSpace::chain(labels(), &[r(0), r(1), r(2)]).unwrap();
        let inst = ProblemInstance::new(chain, Box::new(FiniteMultiMap::constant(3, 2, Elem::nth(1))), Box::new(Identity), op.clone(), part.clone(), phi()).unwrap();
        let rep = check_uniqueness_hypothesis(&inst, true, true, &SolveConfig::default()).unwrap();
        assert!(rep.holds());

        let anti: FiniteSpace<Exact> = FiniteSpace::antichain(labels()[..2].to_vec(), &[r(0), r(1)]).unwrap();
        let inst = ProblemInstance::new(anti, Box::new(FiniteMultiMap::constant(2, 2, Elem::nth(1))), Box::new(Identity), op.clone(), part.clone(), phi()).unwrap();
        let rep = check_uniqueness_hypothesis(&inst, false, false, &SolveConfig::default()).unwrap();
        assert!(!rep.directed && rep.directed_witness.is_some());

        let chain: FiniteSpace<Exact> = FiniteSpace::chain(labels(), &[r(0), r(1), r(2)]).unwrap();
        let g = FiniteSelfMap::from_positions(&[2, 2, 2]).unwrap();
        let inst = ProblemInstance::new(chain, Box::new(FiniteMultiMap::constant(3, 2, Elem::nth(2))), Box::new(g), op, part, phi()).unwrap();
        let rep = check_uniqueness_hypothesis(&inst, true, false, &SolveConfig::default()).unwrap();
        assert_eq!(rep.g_one_one, Some(false));
        assert!(check_uniqueness_hypothesis(&demo(), true, false, &SolveConfig::default()).is_err());
    }
}
