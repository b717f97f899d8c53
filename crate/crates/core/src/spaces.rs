//! Ordered metric spaces, mappings on them, and declared assumptions.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::Float;
use rand::{Rng, RngCore};
use serde::Serialize;
use thiserror::Error;

use crate::index_algebra::BinaryOp;
use crate::product_lift::{apply_f_star, apply_g};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("mapping has no entry for arguments {0:?}")]
    PartialMapping(Vec<usize>),
    #[error("mapping expects {expected} arguments, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("malformed space: {0}")]
    Malformed(String),
    #[error("{0} is undecidable on an infinite space")]
    InfiniteSpaceUndecidable(&'static str),
}

/// A set with a metric and a partial order.
pub trait OrderedMetricSpace: Send + Sync {
    type Point: Clone + PartialEq + fmt::Debug + Send + Sync;
    type Scalar: Scalar;

    fn dist(&self, a: &Self::Point, b: &Self::Point) -> Self::Scalar;

    /// `a ⪯ b`.
    fn leq(&self, a: &Self::Point, b: &Self::Point) -> bool;

    fn contains(&self, p: &Self::Point) -> bool;

    /// Every element, when the carrier is finite.
    fn elements(&self) -> Option<Vec<Self::Point>>;

    fn sample_point(&self, rng: &mut dyn RngCore) -> Self::Point;

    /// Points used by grid scans on infinite carriers.
    fn scan_points(&self) -> Vec<Self::Point>;

    fn point_json(&self, p: &Self::Point) -> serde_json::Value;

    fn is_finite(&self) -> bool {
        self.elements().is_some()
    }

    fn comparable(&self, a: &Self::Point, b: &Self::Point) -> bool {
        self.leq(a, b) || self.leq(b, a)
    }

    fn tuple_json(&self, u: &[Self::Point]) -> serde_json::Value {
        serde_json::Value::Array(u.iter().map(|p| self.point_json(p)).collect())
    }
}

/// An element of a finite space, identified by its 1-based position.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Elem(usize);

impl Elem {
    /// The `i`-th element, counting from 1.
    pub fn nth(i: usize) -> Self {
        assert!(i >= 1, "element positions start at 1");
        Elem(i - 1)
    }

    pub fn position(self) -> usize {
        self.0 + 1
    }

    pub(crate) fn idx(self) -> usize {
        self.0
    }

    pub(crate) fn from_idx(i: usize) -> Self {
        Elem(i)
    }
}

impl fmt::Debug for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.position())
    }
}

/// A finite ordered metric space given by explicit tables.
#[derive(Clone, Debug)]
pub struct FiniteSpace<T: Scalar> {
    labels: Vec<String>,
    dist: Vec<T>,
    leq: Vec<bool>,
}

impl<T: Scalar> FiniteSpace<T> {
    /// `leq` lists the pairs `(x, y)` with `x ⪯ y`, 1-based. Nothing is implied:
    /// reflexive pairs must be listed too.
    pub fn new(labels: Vec<String>, dist: Vec<Vec<T>>, leq: &[(usize, usize)]) -> Result<Self, SpaceError> {
        let size = labels.len();
        let mut rel = vec![vec![false; size]; size];
        for &(a, b) in leq {
            if a < 1 || a > size || b < 1 || b > size {
                return Err(SpaceError::Malformed(format!("order pair ({a},{b}) outside 1..={size}")));
            }
            rel[a - 1][b - 1] = true;
        }
        Self::from_relation(labels, dist, rel)
    }

    pub fn from_relation(labels: Vec<String>, dist: Vec<Vec<T>>, leq: Vec<Vec<bool>>) -> Result<Self, SpaceError> {
        let size = labels.len();
        if size == 0 {
            return Err(SpaceError::Malformed("no elements".into()));
        }
        for (idx, label) in labels.iter().enumerate() {
            if labels[..idx].contains(label) {
                return Err(SpaceError::Malformed(format!("duplicate label `{label}`")));
            }
        }
        if dist.len() != size || dist.iter().any(|r| r.len() != size) {
            return Err(SpaceError::Malformed(format!("distance table must be {size}x{size}")));
        }
        if leq.len() != size || leq.iter().any(|r| r.len() != size) {
            return Err(SpaceError::Malformed(format!("order relation must be {size}x{size}")));
        }
        Ok(Self {
            labels,
            dist: dist.into_iter().flatten().collect(),
            leq: leq.into_iter().flatten().collect(),
        })
    }

    /// Points on a line at the given positions, ordered by position.
    pub fn chain(labels: Vec<String>, positions: &[T]) -> Result<Self, SpaceError> {
        if labels.len() != positions.len() {
            return Err(SpaceError::Malformed("one position per label".into()));
        }
        let dist = positions
            .iter()
            .map(|a| positions.iter().map(|b| (a.clone() - b.clone()).abs()).collect())
            .collect();
        let leq = positions.iter().map(|a| positions.iter().map(|b| a <= b).collect()).collect();
        Self::from_relation(labels, dist, leq)
    }

    /// Like [`FiniteSpace::chain`] but with the discrete order (only `x ⪯ x`).
    pub fn antichain(labels: Vec<String>, positions: &[T]) -> Result<Self, SpaceError> {
        let mut s = Self::chain(labels, positions)?;
        let size = s.size();
        for a in 0..size {
            for b in 0..size {
                s.leq[a * size + b] = a == b;
            }
        }
        Ok(s)
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn all(&self) -> Vec<Elem> {
        (0..self.size()).map(Elem).collect()
    }

    pub fn elem(&self, label: &str) -> Option<Elem> {
        self.labels.iter().position(|l| l == label).map(Elem)
    }

    pub fn label(&self, e: Elem) -> &str {
        &self.labels[e.0]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    fn d(&self, a: usize, b: usize) -> &T {
        &self.dist[a * self.size() + b]
    }

    fn le(&self, a: usize, b: usize) -> bool {
        self.leq[a * self.size() + b]
    }
}

impl<T: Scalar> OrderedMetricSpace for FiniteSpace<T> {
    type Point = Elem;
    type Scalar = T;

    fn dist(&self, a: &Elem, b: &Elem) -> T {
        self.d(a.0, b.0).clone()
    }

    fn leq(&self, a: &Elem, b: &Elem) -> bool {
        self.le(a.0, b.0)
    }

    fn contains(&self, p: &Elem) -> bool {
        p.0 < self.size()
    }

    fn elements(&self) -> Option<Vec<Elem>> {
        Some(self.all())
    }

    fn sample_point(&self, rng: &mut dyn RngCore) -> Elem {
        Elem(rng.gen_range(0..self.size()))
    }

    fn scan_points(&self) -> Vec<Elem> {
        self.all()
    }

    fn point_json(&self, p: &Elem) -> serde_json::Value {
        serde_json::Value::String(self.label(*p).to_string())
    }
}

/// A broken axiom of a finite ordered metric space. Fields hold labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "axiom", rename_all = "snake_case")]
pub enum AxiomViolation {
    NonzeroSelfDistance { x: String },
    NegativeDistance { x: String, y: String },
    Symmetry { x: String, y: String },
    IdentityOfIndiscernibles { x: String, y: String },
    Triangle { x: String, y: String, z: String },
    Reflexivity { x: String },
    Antisymmetry { x: String, y: String },
    Transitivity { x: String, y: String, z: String },
}

impl fmt::Display for AxiomViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxiomViolation::NonzeroSelfDistance { x } => write!(f, "zero self-distance: d({x},{x}) != 0"),
            AxiomViolation::NegativeDistance { x, y } => write!(f, "nonnegativity: d({x},{y}) < 0"),
            AxiomViolation::Symmetry { x, y } => write!(f, "symmetry: d({x},{y}) != d({y},{x})"),
            AxiomViolation::IdentityOfIndiscernibles { x, y } => {
                write!(f, "identity of indiscernibles: d({x},{y}) = 0")
            }
            AxiomViolation::Triangle { x, y, z } => write!(f, "triangle inequality: d({x},{z}) > d({x},{y}) + d({y},{z})"),
            AxiomViolation::Reflexivity { x } => write!(f, "reflexivity: {x} is not <= {x}"),
            AxiomViolation::Antisymmetry { x, y } => write!(f, "antisymmetry: {x} <= {y} and {y} <= {x}"),
            AxiomViolation::Transitivity { x, y, z } => write!(f, "transitivity: {x} <= {y} <= {z} but not {x} <= {z}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<AxiomViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the metric and partial-order axioms, listing every violation.
pub fn validate_space<T: Scalar>(s: &FiniteSpace<T>) -> ValidationReport {
    let n = s.size();
    let l = |i: usize| s.labels[i].clone();
    let zero = T::zero();
    let mut violations = Vec::new();
    for x in 0..n {
        if !s.d(x, x).is_zero() {
            violations.push(AxiomViolation::NonzeroSelfDistance { x: l(x) });
        }
        if !s.le(x, x) {
            violations.push(AxiomViolation::Reflexivity { x: l(x) });
        }
    }
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            if *s.d(x, y) < zero {
                violations.push(AxiomViolation::NegativeDistance { x: l(x), y: l(y) });
            }
            if x < y && !s.d(x, y).approx_eq(s.d(y, x)) {
                violations.push(AxiomViolation::Symmetry { x: l(x), y: l(y) });
            }
            if x < y && s.d(x, y).is_zero() {
                violations.push(AxiomViolation::IdentityOfIndiscernibles { x: l(x), y: l(y) });
            }
            if x < y && s.le(x, y) && s.le(y, x) {
                violations.push(AxiomViolation::Antisymmetry { x: l(x), y: l(y) });
            }
        }
    }
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                if !s.d(x, z).approx_le(&(s.d(x, y).clone() + s.d(y, z).clone())) {
                    violations.push(AxiomViolation::Triangle { x: l(x), y: l(y), z: l(z) });
                }
                if s.le(x, y) && s.le(y, z) && !s.le(x, z) {
                    violations.push(AxiomViolation::Transitivity { x: l(x), y: l(y), z: l(z) });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// The real line or a closed interval of it, with `d(x, y) = |x - y|` and the usual order.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSpace<T> {
    pub lower: Option<T>,
    pub upper: Option<T>,
}

impl<T: Float + Scalar> RealSpace<T> {
    pub fn line() -> Self {
        Self { lower: None, upper: None }
    }

    pub fn interval(lower: T, upper: T) -> Result<Self, SpaceError> {
        if !(lower <= upper) {
            return Err(SpaceError::Malformed("interval lower bound exceeds upper bound".into()));
        }
        Ok(Self {
            lower: Some(lower),
            upper: Some(upper),
        })
    }

    /// Range used for sampling and grid scans.
    pub fn sampling_range(&self) -> (T, T) {
        let ten = <T as num_traits::NumCast>::from(10.0).unwrap();
        match (self.lower, self.upper) {
            (Some(a), Some(b)) => (a, b),
            (Some(a), None) => (a, a + ten + ten),
            (None, Some(b)) => (b - ten - ten, b),
            (None, None) => (-ten, ten),
        }
    }
}

impl<T: Float + Scalar> OrderedMetricSpace for RealSpace<T> {
    type Point = T;
    type Scalar = T;

    fn dist(&self, a: &T, b: &T) -> T {
        Float::abs(*a - *b)
    }

    fn leq(&self, a: &T, b: &T) -> bool {
        a <= b
    }

    fn contains(&self, p: &T) -> bool {
        Float::is_finite(*p) && self.lower.is_none_or(|lo| *p >= lo) && self.upper.is_none_or(|hi| *p <= hi)
    }

    fn elements(&self) -> Option<Vec<T>> {
        None
    }

    fn sample_point(&self, rng: &mut dyn RngCore) -> T {
        let (lo, hi) = self.sampling_range();
        let u: f64 = rng.gen();
        lo + (hi - lo) * T::from_f64_lossy(u)
    }

    fn scan_points(&self) -> Vec<T> {
        let (lo, hi) = self.sampling_range();
        let steps = 20;
        (0..=steps)
            .map(|k| lo + (hi - lo) * T::from_f64_lossy(k as f64 / steps as f64))
            .collect()
    }

    fn point_json(&self, p: &T) -> serde_json::Value {
        p.to_json()
    }
}

/// A mapping `F: X^n -> X`.
pub trait MultiMap<P>: Send + Sync {
    fn arity(&self) -> usize;
    fn eval(&self, args: &[P]) -> Result<P, SpaceError>;
}

/// A self-mapping `g: X -> X` together with a chosen section (right inverse).
pub trait SelfMap<P>: Send + Sync {
    fn eval(&self, x: &P) -> P;

    /// Some `x` with `g(x) = y`, if one is known.
    fn section(&self, y: &P) -> Option<P>;

    fn is_identity(&self) -> bool {
        false
    }
}

/// `F` given by a table over a finite space; entries may be missing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteMultiMap {
    size: usize,
    arity: usize,
    table: Vec<Option<usize>>,
}

impl FiniteMultiMap {
    pub fn from_fn(size: usize, arity: usize, f: impl Fn(&[Elem]) -> Elem) -> Self {
        let elems: Vec<Elem> = (0..size).map(Elem).collect();
        let table = tuples(&elems, arity)
            .map(|args| {
                let v = f(&args);
                assert!(v.0 < size, "image outside the carrier");
                Some(v.0)
            })
            .collect();
        Self { size, arity, table }
    }

    /// Table with only the listed entries defined.
    pub fn from_entries(size: usize, arity: usize, entries: &[(Vec<Elem>, Elem)]) -> Result<Self, SpaceError> {
        let total = tuple_count(size, arity)
            .filter(|&t| t <= 10_000_000)
            .ok_or_else(|| SpaceError::Malformed("table too large".into()))?;
        let mut table = vec![None; total as usize];
        for (args, value) in entries {
            if args.len() != arity {
                return Err(SpaceError::ArityMismatch {
                    expected: arity,
                    got: args.len(),
                });
            }
            if value.0 >= size || args.iter().any(|a| a.0 >= size) {
                return Err(SpaceError::Malformed(format!("table entry {args:?} -> {value:?} leaves the carrier")));
            }
            table[Self::code(size, args)] = Some(value.0);
        }
        Ok(Self { size, arity, table })
    }

    pub fn constant(size: usize, arity: usize, c: Elem) -> Self {
        Self::from_fn(size, arity, |_| c)
    }

    fn code(size: usize, args: &[Elem]) -> usize {
        args.iter().fold(0, |acc, a| acc * size + a.0)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_total(&self) -> bool {
        self.table.iter().all(Option::is_some)
    }
}

impl MultiMap<Elem> for FiniteMultiMap {
    fn arity(&self) -> usize {
        self.arity
    }

    fn eval(&self, args: &[Elem]) -> Result<Elem, SpaceError> {
        if args.len() != self.arity {
            return Err(SpaceError::ArityMismatch {
                expected: self.arity,
                got: args.len(),
            });
        }
        self.table[Self::code(self.size, args)]
            .map(Elem)
            .ok_or_else(|| SpaceError::PartialMapping(args.iter().map(|a| a.position()).collect()))
    }
}

/// `g` given by a table over a finite space. Its section picks the smallest preimage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteSelfMap {
    image: Vec<usize>,
}

impl FiniteSelfMap {
    pub fn from_fn(size: usize, f: impl Fn(Elem) -> Elem) -> Self {
        Self {
            image: (0..size).map(|i| f(Elem(i)).0).collect(),
        }
    }

    /// `images[k]` is the 1-based position of `g` of the `k+1`-th element.
    pub fn from_positions(images: &[usize]) -> Result<Self, SpaceError> {
        let size = images.len();
        if let Some(bad) = images.iter().find(|&&v| v < 1 || v > size) {
            return Err(SpaceError::Malformed(format!("image {bad} outside 1..={size}")));
        }
        Ok(Self {
            image: images.iter().map(|v| v - 1).collect(),
        })
    }

    pub fn identity(size: usize) -> Self {
        Self::from_fn(size, |e| e)
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = vec![false; self.image.len()];
        self.image.iter().all(|&v| !std::mem::replace(&mut seen[v], true))
    }
}

impl SelfMap<Elem> for FiniteSelfMap {
    fn eval(&self, x: &Elem) -> Elem {
        Elem(self.image[x.0])
    }

    fn section(&self, y: &Elem) -> Option<Elem> {
        self.image.iter().position(|&v| v == y.0).map(Elem)
    }

    fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(i, &v)| i == v)
    }
}

/// The identity mapping on any carrier.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl<P: Clone> SelfMap<P> for Identity {
    fn eval(&self, x: &P) -> P {
        x.clone()
    }

    fn section(&self, y: &P) -> Option<P> {
        Some(y.clone())
    }

    fn is_identity(&self) -> bool {
        true
    }
}

type RealFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
type RealSelfFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// `F` given by a closure on real tuples.
#[derive(Clone)]
pub struct FnMultiMap<T> {
    arity: usize,
    f: RealFn<T>,
}

impl<T> FnMultiMap<T> {
    pub fn new(arity: usize, f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Self { arity, f: Arc::new(f) }
    }
}

impl<T: Send + Sync> MultiMap<T> for FnMultiMap<T> {
    fn arity(&self) -> usize {
        self.arity
    }

    fn eval(&self, args: &[T]) -> Result<T, SpaceError> {
        if args.len() != self.arity {
            return Err(SpaceError::ArityMismatch {
                expected: self.arity,
                got: args.len(),
            });
        }
        Ok((self.f)(args))
    }
}

/// `g` given by a closure, with an optional user-supplied right inverse.
#[derive(Clone)]
pub struct FnSelfMap<T> {
    f: RealSelfFn<T>,
    inverse: Option<RealSelfFn<T>>,
}

impl<T> FnSelfMap<T> {
    pub fn new(f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            inverse: None,
        }
    }

    pub fn with_inverse(f: impl Fn(T) -> T + Send + Sync + 'static, inverse: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            inverse: Some(Arc::new(inverse)),
        }
    }
}

impl<T: Copy + Send + Sync> SelfMap<T> for FnSelfMap<T> {
    fn eval(&self, x: &T) -> T {
        (self.f)(*x)
    }

    fn section(&self, y: &T) -> Option<T> {
        self.inverse.as_ref().map(|inv| inv(*y))
    }
}

/// Number of `n`-tuples over a carrier of the given size, if it fits in `u64`.
pub fn tuple_count(size: usize, n: usize) -> Option<u64> {
    (size as u64).checked_pow(n as u32)
}

/// All `n`-tuples over `elements` in lexicographic order, first coordinate most significant.
pub fn tuples<P: Clone>(elements: &[P], n: usize) -> Tuples<'_, P> {
    Tuples {
        elements,
        digits: vec![0; n],
        done: elements.is_empty() && n > 0,
    }
}

pub struct Tuples<'a, P> {
    elements: &'a [P],
    digits: Vec<usize>,
    done: bool,
}

impl<P: Clone> Iterator for Tuples<'_, P> {
    type Item = Vec<P>;

    fn next(&mut self) -> Option<Vec<P>> {
        if self.done {
            return None;
        }
        let out = self.digits.iter().map(|&d| self.elements[d].clone()).collect();
        let mut pos = self.digits.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.digits[pos] += 1;
            if self.digits[pos] < self.elements.len() {
                break;
            }
            self.digits[pos] = 0;
        }
        Some(out)
    }
}

/// Outcome of an exhaustive check, with the first counterexample found.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict<P> {
    pub holds: bool,
    pub witness: Option<Vec<P>>,
}

impl<P> Verdict<P> {
    fn ok() -> Self {
        Self {
            holds: true,
            witness: None,
        }
    }

    fn fail(witness: Vec<P>) -> Self {
        Self {
            holds: false,
            witness: Some(witness),
        }
    }
}

fn finite_elements<S: OrderedMetricSpace>(space: &S, what: &'static str) -> Result<Vec<S::Point>, SpaceError> {
    space.elements().ok_or(SpaceError::InfiniteSpaceUndecidable(what))
}

/// `g(F(x_1..x_n)) = F(g x_1, .., g x_n)` for every tuple.
pub fn check_commuting<S: OrderedMetricSpace>(
    f: &dyn MultiMap<S::Point>,
    g: &dyn SelfMap<S::Point>,
    space: &S,
) -> Result<Verdict<S::Point>, SpaceError> {
    let elems = finite_elements(space, "commutativity")?;
    for u in tuples(&elems, f.arity()) {
        let lhs = g.eval(&f.eval(&u)?);
        let rhs = f.eval(&apply_g(g, &u))?;
        if lhs != rhs {
            return Ok(Verdict::fail(u));
        }
    }
    Ok(Verdict::ok())
}

/// Whenever `g(x_i) = F(U*i)` for all `i`, also `g(F(U*i)) = F((GU)*i)` for all `i`.
pub fn check_weak_star_compat<S: OrderedMetricSpace>(
    f: &dyn MultiMap<S::Point>,
    g: &dyn SelfMap<S::Point>,
    op: &BinaryOp,
    space: &S,
) -> Result<Verdict<S::Point>, SpaceError> {
    let elems = finite_elements(space, "weak *-compatibility")?;
    for u in tuples(&elems, op.n()) {
        let fu = apply_f_star(f, op, &u)?;
        let gu = apply_g(g, &u);
        if fu != gu {
            continue;
        }
        let g_of_f = apply_g(g, &fu);
        let f_of_g = apply_f_star(f, op, &gu)?;
        if g_of_f != f_of_g {
            return Ok(Verdict::fail(u));
        }
    }
    Ok(Verdict::ok())
}

/// `x ⪯ y ⇒ g x ⪯ g y`; the witness is the offending pair.
pub fn check_g_increasing<S: OrderedMetricSpace>(g: &dyn SelfMap<S::Point>, space: &S) -> Result<Verdict<S::Point>, SpaceError> {
    let elems = finite_elements(space, "monotonicity of g")?;
    for x in &elems {
        for y in &elems {
            if space.leq(x, y) && !space.leq(&g.eval(x), &g.eval(y)) {
                return Ok(Verdict::fail(vec![x.clone(), y.clone()]));
            }
        }
    }
    Ok(Verdict::ok())
}

/// `g x = g y ⇒ x = y`; the witness is a colliding pair.
pub fn check_g_injective<S: OrderedMetricSpace>(g: &dyn SelfMap<S::Point>, space: &S) -> Result<Verdict<S::Point>, SpaceError> {
    let elems = finite_elements(space, "injectivity of g")?;
    for (i, x) in elems.iter().enumerate() {
        for y in &elems[i + 1..] {
            if g.eval(x) == g.eval(y) {
                return Ok(Verdict::fail(vec![x.clone(), y.clone()]));
            }
        }
    }
    Ok(Verdict::ok())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Asserted by the instance author, not checked.
    Declared,
    /// Decided exhaustively.
    MachineVerified,
    /// Checked on seeded random samples only.
    Sampled,
    /// Automatically true because the carrier is finite.
    VacuousOnFinite,
}

impl Provenance {
    /// Whether a certificate may rely on a flag with this provenance.
    pub fn is_machine_backed(self) -> bool {
        matches!(self, Provenance::MachineVerified | Provenance::VacuousOnFinite)
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Declared => "declared",
            Provenance::MachineVerified => "machine-verified",
            Provenance::Sampled => "sampled",
            Provenance::VacuousOnFinite => "vacuous-on-finite",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    OCompleteSubspace,
    FOContinuous,
    GOContinuous,
    FGOContinuous,
    StarOCompatible,
    WeaklyStarCompatible,
    Commuting,
    GMcb,
    Mcb,
    GOneOne,
    GIncreasing,
    RangeCondition,
}

impl Assumption {
    pub const ALL: [Assumption; 12] = [
        Assumption::OCompleteSubspace,
        Assumption::FOContinuous,
        Assumption::GOContinuous,
        Assumption::FGOContinuous,
        Assumption::StarOCompatible,
        Assumption::WeaklyStarCompatible,
        Assumption::Commuting,
        Assumption::GMcb,
        Assumption::Mcb,
        Assumption::GOneOne,
        Assumption::GIncreasing,
        Assumption::RangeCondition,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Assumption::OCompleteSubspace => "o_complete_subspace",
            Assumption::FOContinuous => "F_o_continuous",
            Assumption::GOContinuous => "g_o_continuous",
            Assumption::FGOContinuous => "F_g_o_continuous",
            Assumption::StarOCompatible => "star_o_compatible",
            Assumption::WeaklyStarCompatible => "weakly_star_compatible",
            Assumption::Commuting => "commuting",
            Assumption::GMcb => "g_mcb",
            Assumption::Mcb => "mcb",
            Assumption::GOneOne => "g_one_one",
            Assumption::GIncreasing => "g_increasing",
            Assumption::RangeCondition => "range_condition",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.key() == key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Flag {
    pub value: bool,
    pub provenance: Provenance,
}

/// Hypotheses about an instance, each tagged with how it is known.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssumptionSet {
    flags: BTreeMap<Assumption, Flag>,
}

impl AssumptionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, a: Assumption, value: bool) {
        self.set(a, value, Provenance::Declared);
    }

    pub fn set(&mut self, a: Assumption, value: bool, provenance: Provenance) {
        self.flags.insert(a, Flag { value, provenance });
    }

    pub fn get(&self, a: Assumption) -> Option<Flag> {
        self.flags.get(&a).copied()
    }

    /// True and backed by a machine check.
    pub fn is_verified(&self, a: Assumption) -> bool {
        self.get(a).is_some_and(|f| f.value && f.provenance.is_machine_backed())
    }

    /// True, however it is known.
    pub fn holds(&self, a: Assumption) -> bool {
        self.get(a).is_some_and(|f| f.value)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Assumption, Flag)> + '_ {
        self.flags.iter().map(|(a, f)| (*a, *f))
    }

    /// Sets the flags that every finite space satisfies: convergent monotone
    /// sequences there are eventually constant.
    pub fn mark_vacuous_on_finite(&mut self) {
        for a in [
            Assumption::OCompleteSubspace,
            Assumption::FOContinuous,
            Assumption::GOContinuous,
            Assumption::FGOContinuous,
            Assumption::Mcb,
        ] {
            self.set(a, true, Provenance::VacuousOnFinite);
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .flags
            .iter()
            .map(|(a, f)| (a.key().to_string(), serde_json::json!({"value": f.value, "provenance": f.provenance})))
            .collect();
        serde_json::Value::Object(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Exact;
    use num_rational::Ratio;

    fn r(n: i64) -> Exact {
        Ratio::from_integer(n)
    }

    fn two_point(d: i64, leq: &[(usize, usize)]) -> FiniteSpace<Exact> {
        FiniteSpace::new(vec!["a".into(), "b".into()], vec![vec![r(0), r(d)], vec![r(d), r(0)]], leq).unwrap()
    }

    #[test]
    fn validates_small_spaces() {
        assert!(validate_space(&two_point(1, &[(1, 1), (2, 2), (1, 2)])).is_valid());
        let report = validate_space(&two_point(0, &[(1, 1), (2, 2)]));
        assert_eq!(report.violations, vec![AxiomViolation::IdentityOfIndiscernibles { x: "a".into(), y: "b".into() }]);
        assert!(report.violations[0].to_string().contains("identity of indiscernibles"));
        let report = validate_space(&two_point(1, &[(1, 1), (2, 2), (1, 2), (2, 1)]));
        assert_eq!(report.violations, vec![AxiomViolation::Antisymmetry { x: "a".into(), y: "b".into() }]);
        assert!(report.violations[0].to_string().starts_with("antisymmetry"));
        let report = validate_space(&two_point(1, &[(1, 2)]));
        assert_eq!(report.violations.len(), 2);
    }

    #[test]
    fn flags_triangle_and_transitivity() {
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let dist = vec![vec![r(0), r(1), r(5)], vec![r(1), r(0), r(1)], vec![r(5), r(1), r(0)]];
        let s = FiniteSpace::new(labels, dist, &[(1, 1), (2, 2), (3, 3), (1, 2), (2, 3)]).unwrap();
        let v = validate_space(&s).violations;
        assert!(v.contains(&AxiomViolation::Triangle { x: "a".into(), y: "b".into(), z: "c".into() }));
        assert!(v.contains(&AxiomViolation::Transitivity { x: "a".into(), y: "b".into(), z: "c".into() }));
    }

    #[test]
    fn chain_is_valid() {
        let s = FiniteSpace::chain(vec!["p".into(), "q".into(), "r".into()], &[r(0), r(2), r(3)]).unwrap();
        assert!(validate_space(&s).is_valid());
        assert!(s.leq(&Elem::nth(1), &Elem::nth(3)));
        assert_eq!(s.dist(&Elem::nth(1), &Elem::nth(3)), r(3));
        let a = FiniteSpace::antichain(vec!["p".into(), "q".into()], &[r(0), r(1)]).unwrap();
        assert!(!a.comparable(&Elem::nth(1), &Elem::nth(2)));
        assert!(validate_space(&a).is_valid());
    }

    #[test]
    fn commuting_examples() {
        let s = two_point(1, &[(1, 1), (2, 2)]);
        let f = FiniteMultiMap::from_fn(2, 2, |u| u[1]);
        assert!(check_commuting(&f, &Identity, &s).unwrap().holds);
        let a = Elem::nth(1);
        let swap = FiniteSelfMap::from_positions(&[2, 1]).unwrap();
        let fixes_a = FiniteSelfMap::from_positions(&[1, 1]).unwrap();
        let constant = FiniteMultiMap::constant(2, 2, a);
        assert!(check_commuting(&constant, &fixes_a, &s).unwrap().holds);
        let v = check_commuting(&constant, &swap, &s).unwrap();
        assert!(!v.holds);
        assert_eq!(v.witness, Some(vec![a, a]));
    }

    #[test]
    fn weak_compatibility_vacuous_and_undecidable() {
        let s = two_point(1, &[(1, 1), (2, 2)]);
        let op = BinaryOp::forward_cyclic(2).unwrap();
        // F never agrees with g on the diagonal pattern, so no coincidence tuples exist.
        let f = FiniteMultiMap::from_fn(2, 2, |u| Elem::nth(3 - u[0].position()));
        assert!(check_weak_star_compat(&f, &Identity, &op, &s).unwrap().holds);
        let line = RealSpace::<f64>::line();
        let real_f = FnMultiMap::new(2, |u: &[f64]| u[0]);
        assert_eq!(
            check_weak_star_compat(&real_f, &Identity, &op, &line),
            Err(SpaceError::InfiniteSpaceUndecidable("weak *-compatibility"))
        );
        assert!(check_commuting(&real_f, &Identity, &line).is_err());
    }

    #[test]
    fn tables_report_missing_entries() {
        let f = FiniteMultiMap::from_entries(2, 2, &[(vec![Elem::nth(1), Elem::nth(1)], Elem::nth(2))]).unwrap();
        assert_eq!(f.eval(&[Elem::nth(1), Elem::nth(1)]), Ok(Elem::nth(2)));
        assert_eq!(f.eval(&[Elem::nth(2), Elem::nth(1)]), Err(SpaceError::PartialMapping(vec![2, 1])));
        assert!(!f.is_total());
    }

    #[test]
    fn sections_pick_smallest_preimage() {
        let g = FiniteSelfMap::from_positions(&[2, 2, 1]).unwrap();
        assert_eq!(g.section(&Elem::nth(2)), Some(Elem::nth(1)));
        assert_eq!(g.section(&Elem::nth(3)), None);
        assert!(!g.is_injective());
        assert!(FiniteSelfMap::identity(3).is_identity());
    }

    #[test]
    fn tuple_enumeration_order() {
        let all: Vec<Vec<u8>> = tuples(&[0u8, 1], 2).collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(tuples::<u8>(&[], 2).count(), 0);
        assert_eq!(tuples(&[1u8], 0).count(), 1);
    }

    #[test]
    fn assumption_flags_carry_provenance() {
        let mut a = AssumptionSet::new();
        a.declare(Assumption::Commuting, true);
        assert!(a.holds(Assumption::Commuting));
        assert!(!a.is_verified(Assumption::Commuting));
        a.mark_vacuous_on_finite();
        assert!(a.is_verified(Assumption::Mcb));
        assert_eq!(Assumption::from_key("g_mcb"), Some(Assumption::GMcb));
        assert_eq!(a.to_json()["mcb"]["provenance"], "vacuous-on-finite");
    }

    #[test]
    fn real_space_bounds() {
        let s = RealSpace::interval(0.0f64, 1.0).unwrap();
        assert!(s.contains(&0.5) && !s.contains(&1.5));
        assert!(RealSpace::interval(1.0f64, 0.0).is_err());
        assert_eq!(s.scan_points().len(), 21);
        assert_eq!(RealSpace::<f64>::line().sampling_range(), (-10.0, 10.0));
    }
}
