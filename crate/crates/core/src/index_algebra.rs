//! Binary operations on the index set `{1..n}` and their classification.
//!
//! A binary operation `*` is stored as an `n x n` matrix whose entry in row
//! `i`, column `k` is `*(i, k)`. Everything public is 1-based; the 0-based
//! storage never escapes this module.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndexError {
    #[error("index operations need n >= 2, got n = {0}")]
    ArityTooSmall(usize),
    #[error("expected a {expected}x{expected} grid: {detail}")]
    ShapeMismatch { expected: usize, detail: String },
    #[error("entry ({row},{col}) = {value} lies outside 1..={n}")]
    OutOfRangeEntry {
        row: usize,
        col: usize,
        value: usize,
        n: usize,
    },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("{map}_{index}({arg}) = {value} is outside its allowed range {allowed}")]
    DomainViolation {
        map: &'static str,
        index: usize,
        arg: usize,
        value: usize,
        allowed: String,
    },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("preset `{preset}` needs {expected}, got n = {got}")]
    BadArity {
        preset: String,
        expected: String,
        got: usize,
    },
    #[error("preset `{preset}` needs parameter `{param}`")]
    MissingParameter { preset: String, param: &'static str },
}

/// A binary operation `*: I_n x I_n -> I_n`, `n >= 2`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryOp {
    n: usize,
    // row-major, 0-based values
    entries: Vec<usize>,
}

impl BinaryOp {
    /// Builds an operation from a 1-based row-major grid.
    pub fn from_rows(n: usize, rows: &[Vec<usize>]) -> Result<Self, IndexError> {
        if n < 2 {
            return Err(IndexError::ArityTooSmall(n));
        }
        if rows.len() != n {
            return Err(IndexError::ShapeMismatch {
                expected: n,
                detail: format!("{} rows", rows.len()),
            });
        }
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(IndexError::ShapeMismatch {
                    expected: n,
                    detail: format!("row {} has {} entries", i + 1, row.len()),
                });
            }
            for (k, &value) in row.iter().enumerate() {
                if value < 1 || value > n {
                    return Err(IndexError::OutOfRangeEntry {
                        row: i + 1,
                        col: k + 1,
                        value,
                        n,
                    });
                }
                entries.push(value - 1);
            }
        }
        Ok(Self { n, entries })
    }

    fn from_formula(n: usize, f: impl Fn(usize, usize) -> usize) -> Result<Self, IndexError> {
        let rows: Vec<Vec<usize>> = (1..=n).map(|i| (1..=n).map(|k| f(i, k)).collect()).collect();
        Self::from_rows(n, &rows)
    }

    /// Forward cyclic operation: row `i` is `(i, i+1, ..., n, 1, ..., i-1)`.
    pub fn forward_cyclic(n: usize) -> Result<Self, IndexError> {
        Self::from_formula(n, |i, k| if k + i <= n + 1 { i + k - 1 } else { i + k - n - 1 })
    }

    /// Backward cyclic operation: row `i` is `(i, i-1, ..., 1, n, ..., i+1)`.
    pub fn backward_cyclic(n: usize) -> Result<Self, IndexError> {
        Self::from_formula(n, |i, k| if k <= i { i + 1 - k } else { n + i + 1 - k })
    }

    /// 1-skew cyclic operation: `*(i, k) = |i - k| + 1`.
    pub fn skew_1(n: usize) -> Result<Self, IndexError> {
        Self::from_formula(n, |i, k| if k <= i { i + 1 - k } else { k + 1 - i })
    }

    /// n-skew cyclic operation: reflects at `n` instead of at `1`.
    pub fn skew_n(n: usize) -> Result<Self, IndexError> {
        Self::from_formula(n, |i, k| if k + i <= n + 1 { i + k - 1 } else { 2 * n + 1 - i - k })
    }

    /// Operation assembled from `2n` index maps split at `p`.
    ///
    /// `phis[i]` lists `phi_{i+1}(1..=p)` and `psis[i]` lists `psi_{i+1}(p+1..=n)`.
    /// Rows `1..=p` must keep both halves in place; rows `p+1..=n` must swap them.
    pub fn berzig_samet(
        n: usize,
        p: usize,
        phis: &[Vec<usize>],
        psis: &[Vec<usize>],
    ) -> Result<Self, IndexError> {
        if n < 2 {
            return Err(IndexError::ArityTooSmall(n));
        }
        if p < 1 || p >= n {
            return Err(IndexError::InvalidPartition(format!("split point p = {p} must satisfy 1 <= p < {n}")));
        }
        if phis.len() != n || psis.len() != n {
            return Err(IndexError::ShapeMismatch {
                expected: n,
                detail: format!("{} phi maps and {} psi maps", phis.len(), psis.len()),
            });
        }
        let low = 1..=p;
        let high = p + 1..=n;
        let mut rows = Vec::with_capacity(n);
        for i in 1..=n {
            let phi = &phis[i - 1];
            let psi = &psis[i - 1];
            if phi.len() != p || psi.len() != n - p {
                return Err(IndexError::ShapeMismatch {
                    expected: n,
                    detail: format!("phi_{i} has {} values (want {p}), psi_{i} has {} (want {})", phi.len(), psi.len(), n - p),
                });
            }
            let (phi_range, psi_range) = if i <= p { (&low, &high) } else { (&high, &low) };
            for (k, &v) in phi.iter().enumerate() {
                if !phi_range.contains(&v) {
                    return Err(IndexError::DomainViolation {
                        map: "phi",
                        index: i,
                        arg: k + 1,
                        value: v,
                        allowed: format!("{}..={}", phi_range.start(), phi_range.end()),
                    });
                }
            }
            for (k, &v) in psi.iter().enumerate() {
                if !psi_range.contains(&v) {
                    return Err(IndexError::DomainViolation {
                        map: "psi",
                        index: i,
                        arg: p + k + 1,
                        value: v,
                        allowed: format!("{}..={}", psi_range.start(), psi_range.end()),
                    });
                }
            }
            rows.push(phi.iter().chain(psi.iter()).copied().collect());
        }
        Self::from_rows(n, &rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `*(i, k)`, all 1-based.
    pub fn get(&self, i: usize, k: usize) -> usize {
        assert!((1..=self.n).contains(&i) && (1..=self.n).contains(&k), "index out of range");
        self.entries[(i - 1) * self.n + (k - 1)] + 1
    }

    /// 0-based lookup for the tuple machinery in this crate.
    pub(crate) fn at0(&self, i: usize, k: usize) -> usize {
        self.entries[i * self.n + k]
    }

    pub(crate) fn row0(&self, i: usize) -> &[usize] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// 1-based row `i`.
    pub fn row(&self, i: usize) -> Vec<usize> {
        self.row0(i - 1).iter().map(|v| v + 1).collect()
    }

    pub fn rows(&self) -> Vec<Vec<usize>> {
        (1..=self.n).map(|i| self.row(i)).collect()
    }

    /// All `n^(n*n)` operations on `I_n`, in lexicographic order of their entries.
    pub fn enumerate_all(n: usize) -> impl Iterator<Item = BinaryOp> {
        let cells = n * n;
        let total = (n as u64).checked_pow(cells as u32).expect("operation count overflows u64");
        (0..total).map(move |mut code| {
            let mut entries = vec![0; cells];
            for slot in entries.iter_mut().rev() {
                *slot = (code % n as u64) as usize;
                code /= n as u64;
            }
            BinaryOp { n, entries }
        })
    }

    /// Builds an operation from 0-based entries; used by random generators.
    pub(crate) fn from_entries0(n: usize, entries: Vec<usize>) -> Self {
        debug_assert!(entries.len() == n * n && entries.iter().all(|&e| e < n));
        BinaryOp { n, entries }
    }
}

impl fmt::Debug for BinaryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryOp{:?}", self.rows())
    }
}

impl fmt::Display for BinaryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (idx, row) in self.rows().iter().enumerate() {
            if idx > 0 {
                writeln!(f)?;
            }
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>2}")).collect();
            write!(f, "[{} ]", cells.join(" "))?;
        }
        Ok(())
    }
}

impl Serialize for BinaryOp {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

/// A nontrivial partition `{A, B}` of `I_n`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    in_a: Vec<bool>,
}

impl Partition {
    pub fn new(n: usize, a: &[usize], b: &[usize]) -> Result<Self, IndexError> {
        if n < 2 {
            return Err(IndexError::ArityTooSmall(n));
        }
        let mut seen = vec![None; n];
        for (set, members, flag) in [("A", a, true), ("B", b, false)] {
            if members.is_empty() {
                return Err(IndexError::InvalidPartition(format!("{set} is empty")));
            }
            for &m in members {
                if m < 1 || m > n {
                    return Err(IndexError::InvalidPartition(format!("{set} contains {m}, outside 1..={n}")));
                }
                if seen[m - 1].is_some() {
                    return Err(IndexError::InvalidPartition(format!("index {m} listed twice")));
                }
                seen[m - 1] = Some(flag);
            }
        }
        if let Some(missing) = seen.iter().position(Option::is_none) {
            return Err(IndexError::InvalidPartition(format!("index {} is in neither A nor B", missing + 1)));
        }
        Ok(Self {
            in_a: seen.into_iter().map(|s| s.unwrap()).collect(),
        })
    }

    /// `A` = odd indices, `B` = even indices.
    pub fn odd_even(n: usize) -> Result<Self, IndexError> {
        if n < 2 {
            return Err(IndexError::ArityTooSmall(n));
        }
        Ok(Self {
            in_a: (1..=n).map(|i| i % 2 == 1).collect(),
        })
    }

    /// `A = {1..p}`, `B = {p+1..n}`.
    pub fn split(n: usize, p: usize) -> Result<Self, IndexError> {
        let a: Vec<usize> = (1..=p).collect();
        let b: Vec<usize> = (p + 1..=n).collect();
        Self::new(n, &a, &b)
    }

    /// Every ordered partition of `I_n` with both parts nonempty.
    pub fn enumerate_all(n: usize) -> impl Iterator<Item = Partition> {
        (1u64..(1u64 << n) - 1).map(move |mask| Partition {
            in_a: (0..n).map(|i| mask & (1 << i) != 0).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.in_a.len()
    }

    /// Whether 1-based index `i` belongs to `A`.
    pub fn in_a(&self, i: usize) -> bool {
        self.in_a[i - 1]
    }

    pub(crate) fn in_a0(&self, i: usize) -> bool {
        self.in_a[i]
    }

    pub fn a(&self) -> Vec<usize> {
        (1..=self.n()).filter(|&i| self.in_a(i)).collect()
    }

    pub fn b(&self) -> Vec<usize> {
        (1..=self.n()).filter(|&i| !self.in_a(i)).collect()
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Vec<usize>| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "{{{{{}}},{{{}}}}}", show(self.a()), show(self.b()))
    }
}

impl Serialize for Partition {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("Partition", 2)?;
        s.serialize_field("A", &self.a())?;
        s.serialize_field("B", &self.b())?;
        s.end()
    }
}

/// Which closure condition of the class `U` a pair breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Closure {
    /// `*(A x A) ⊂ A`
    #[serde(rename = "a")]
    AA,
    /// `*(A x B) ⊂ B`
    #[serde(rename = "b")]
    AB,
    /// `*(B x A) ⊂ B`
    #[serde(rename = "c")]
    BA,
    /// `*(B x B) ⊂ A`
    #[serde(rename = "d")]
    BB,
}

impl Closure {
    fn of(row_in_a: bool, col_in_a: bool) -> Self {
        match (row_in_a, col_in_a) {
            (true, true) => Closure::AA,
            (true, false) => Closure::AB,
            (false, true) => Closure::BA,
            (false, false) => Closure::BB,
        }
    }

    /// Whether the image must land in `A`.
    pub fn target_is_a(self) -> bool {
        matches!(self, Closure::AA | Closure::BB)
    }
}

impl fmt::Display for Closure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Closure::AA => "(a) *(AxA) in A",
            Closure::AB => "(b) *(AxB) in B",
            Closure::BA => "(c) *(BxA) in B",
            Closure::BB => "(d) *(BxB) in A",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ClosureViolation {
    pub row: usize,
    pub col: usize,
    pub value: usize,
    pub condition: Closure,
}

impl fmt::Display for ClosureViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let target = if self.condition.target_is_a() { "A" } else { "B" };
        write!(f, "*({},{})={} not in {} {}", self.row, self.col, self.value, target, self.condition)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Membership {
    pub member: bool,
    pub violations: Vec<ClosureViolation>,
}

/// Checks all four closure conditions and reports every violating pair.
pub fn is_member_u(op: &BinaryOp, part: &Partition) -> Result<Membership, IndexError> {
    if op.n() != part.n() {
        return Err(IndexError::DimensionMismatch {
            left: op.n(),
            right: part.n(),
        });
    }
    let n = op.n();
    let mut violations = Vec::new();
    for i in 0..n {
        for k in 0..n {
            let condition = Closure::of(part.in_a0(i), part.in_a0(k));
            let value = op.at0(i, k);
            if part.in_a0(value) != condition.target_is_a() {
                violations.push(ClosureViolation {
                    row: i + 1,
                    col: k + 1,
                    value: value + 1,
                    condition,
                });
            }
        }
    }
    Ok(Membership {
        member: violations.is_empty(),
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Permutedness {
    pub permuted: bool,
    /// First row (1-based) that is not a permutation of `I_n`.
    pub first_bad_row: Option<usize>,
}

/// Whether every row of the matrix is a permutation of `I_n`.
pub fn is_permuted(op: &BinaryOp) -> Permutedness {
    let n = op.n();
    let first_bad_row = (0..n)
        .find(|&i| {
            let mut seen = vec![false; n];
            op.row0(i).iter().any(|&v| std::mem::replace(&mut seen[v], true))
        })
        .map(|i| i + 1);
    Permutedness {
        permuted: first_bad_row.is_none(),
        first_bad_row,
    }
}

/// An `n`-tuple of self-maps `sigma_i` of `I_n`; not necessarily injective.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct UpsilonTuple {
    n: usize,
    // sigmas[i][k] = sigma_{i+1}(k+1) - 1
    sigmas: Vec<Vec<usize>>,
}

impl UpsilonTuple {
    /// `sigmas[i]` lists `sigma_{i+1}(1), ..., sigma_{i+1}(n)`, 1-based.
    pub fn new(n: usize, sigmas: &[Vec<usize>]) -> Result<Self, IndexError> {
        // Same shape and range rules as a matrix.
        let op = BinaryOp::from_rows(n, sigmas)?;
        Ok(Self {
            n,
            sigmas: (0..n).map(|i| op.row0(i).to_vec()).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `sigma_i(k)`, 1-based.
    pub fn sigma(&self, i: usize, k: usize) -> usize {
        self.sigmas[i - 1][k - 1] + 1
    }

    pub fn sigmas(&self) -> Vec<Vec<usize>> {
        self.sigmas.iter().map(|s| s.iter().map(|v| v + 1).collect()).collect()
    }
}

/// `i_k = sigma_i(k)`.
pub fn from_upsilon(u: &UpsilonTuple) -> BinaryOp {
    BinaryOp::from_entries0(u.n, u.sigmas.iter().flatten().copied().collect())
}

/// Rows of the matrix become the maps `sigma_i`.
pub fn to_upsilon(op: &BinaryOp) -> UpsilonTuple {
    UpsilonTuple {
        n: op.n(),
        sigmas: (0..op.n()).map(|i| op.row0(i).to_vec()).collect(),
    }
}

/// `sigma_i` preserves `A` and `B` for `i` in `A`, and swaps them for `i` in `B`.
pub fn upsilon_compatible(u: &UpsilonTuple, part: &Partition) -> Result<bool, IndexError> {
    if u.n() != part.n() {
        return Err(IndexError::DimensionMismatch {
            left: u.n(),
            right: part.n(),
        });
    }
    let n = u.n();
    let image = |sigma: &[usize], from_a: bool| -> BTreeSet<bool> {
        (0..n).filter(|&k| part.in_a0(k) == from_a).map(|k| part.in_a0(sigma[k])).collect()
    };
    Ok(u.sigmas.iter().enumerate().all(|(i, sigma)| {
        let keeps = part.in_a0(i);
        let from_a = image(sigma, true);
        let from_b = image(sigma, false);
        // preserving: A -> A, B -> B; swapping: A -> B, B -> A
        from_a.iter().all(|&lands_in_a| lands_in_a == keeps) && from_b.iter().all(|&lands_in_a| lands_in_a != keeps)
    }))
}

/// Named `(*, iota_n)` configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetName {
    Coupled,
    BerindeBorcut,
    WuLiu3,
    BerzigSamet3,
    KarapinarLuong,
    WuLiu4,
    BerzigSamet4,
    ForwardCyclic,
    BackwardCyclic,
    Skew1,
    SkewN,
    BerzigSametGeneral,
    Upsilon,
}

impl PresetName {
    pub const ALL: [PresetName; 13] = [
        PresetName::Coupled,
        PresetName::BerindeBorcut,
        PresetName::WuLiu3,
        PresetName::BerzigSamet3,
        PresetName::KarapinarLuong,
        PresetName::WuLiu4,
        PresetName::BerzigSamet4,
        PresetName::ForwardCyclic,
        PresetName::BackwardCyclic,
        PresetName::Skew1,
        PresetName::SkewN,
        PresetName::BerzigSametGeneral,
        PresetName::Upsilon,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Coupled => "coupled",
            PresetName::BerindeBorcut => "berinde-borcut",
            PresetName::WuLiu3 => "wu-liu-3",
            PresetName::BerzigSamet3 => "berzig-samet-3",
            PresetName::KarapinarLuong => "karapinar-luong",
            PresetName::WuLiu4 => "wu-liu-4",
            PresetName::BerzigSamet4 => "berzig-samet-4",
            PresetName::ForwardCyclic => "forward-cyclic",
            PresetName::BackwardCyclic => "backward-cyclic",
            PresetName::Skew1 => "skew-1",
            PresetName::SkewN => "skew-n",
            PresetName::BerzigSametGeneral => "berzig-samet-general",
            PresetName::Upsilon => "upsilon",
        }
    }

    /// Fixed arity of the preset, if any.
    pub fn fixed_arity(self) -> Option<usize> {
        match self {
            PresetName::Coupled => Some(2),
            PresetName::BerindeBorcut | PresetName::WuLiu3 | PresetName::BerzigSamet3 => Some(3),
            PresetName::KarapinarLuong | PresetName::WuLiu4 | PresetName::BerzigSamet4 => Some(4),
            _ => None,
        }
    }
}

impl std::str::FromStr for PresetName {
    type Err = IndexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PresetName::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| IndexError::UnknownPreset(s.to_string()))
    }
}

/// Extra inputs for the parametric presets.
#[derive(Debug, Clone, Default)]
pub struct PresetParams {
    /// Split point for `berzig-samet-general`.
    pub p: Option<usize>,
    pub phis: Option<Vec<Vec<usize>>>,
    pub psis: Option<Vec<Vec<usize>>>,
    /// Row maps for `upsilon`.
    pub sigmas: Option<Vec<Vec<usize>>>,
    /// Overrides the preset's own partition.
    pub partition: Option<Partition>,
}

pub const BERZIG_SAMET_3: [[usize; 3]; 3] = [[1, 2, 3], [2, 1, 3], [3, 3, 2]];
pub const BERZIG_SAMET_4: [[usize; 4]; 4] = [[1, 2, 3, 4], [1, 2, 4, 3], [3, 4, 2, 1], [3, 4, 1, 2]];

fn grid<const N: usize>(rows: [[usize; N]; N]) -> Vec<Vec<usize>> {
    rows.iter().map(|r| r.to_vec()).collect()
}

/// Looks up a named configuration. Operations the class `U` rejects (for
/// instance cyclic ones at odd `n`) are still built; membership is a separate query.
pub fn preset(name: &str, n: usize, params: &PresetParams) -> Result<(BinaryOp, Partition), IndexError> {
    let which: PresetName = name.parse()?;
    if let Some(expected) = which.fixed_arity() {
        if n != expected {
            return Err(IndexError::BadArity {
                preset: name.to_string(),
                expected: format!("n = {expected}"),
                got: n,
            });
        }
    }
    if n < 2 {
        return Err(IndexError::ArityTooSmall(n));
    }
    let (op, default_part) = match which {
        PresetName::Coupled => (BinaryOp::from_rows(2, &[vec![1, 2], vec![2, 1]])?, Partition::new(2, &[1], &[2])?),
        PresetName::BerindeBorcut => (BinaryOp::skew_1(3)?, Partition::new(3, &[1, 3], &[2])?),
        PresetName::WuLiu3 => (BinaryOp::skew_n(3)?, Partition::new(3, &[1, 3], &[2])?),
        PresetName::BerzigSamet3 => (BinaryOp::from_rows(3, &grid(BERZIG_SAMET_3))?, Partition::split(3, 2)?),
        PresetName::KarapinarLuong => (BinaryOp::forward_cyclic(4)?, Partition::new(4, &[1, 3], &[2, 4])?),
        PresetName::WuLiu4 => (BinaryOp::backward_cyclic(4)?, Partition::new(4, &[1, 3], &[2, 4])?),
        PresetName::BerzigSamet4 => (BinaryOp::from_rows(4, &grid(BERZIG_SAMET_4))?, Partition::split(4, 2)?),
        PresetName::ForwardCyclic => (BinaryOp::forward_cyclic(n)?, Partition::odd_even(n)?),
        PresetName::BackwardCyclic => (BinaryOp::backward_cyclic(n)?, Partition::odd_even(n)?),
        PresetName::Skew1 => (BinaryOp::skew_1(n)?, Partition::odd_even(n)?),
        PresetName::SkewN => (BinaryOp::skew_n(n)?, Partition::odd_even(n)?),
        PresetName::BerzigSametGeneral => {
            let missing = |param| IndexError::MissingParameter {
                preset: name.to_string(),
                param,
            };
            let p = params.p.ok_or_else(|| missing("p"))?;
            let phis = params.phis.as_ref().ok_or_else(|| missing("phis"))?;
            let psis = params.psis.as_ref().ok_or_else(|| missing("psis"))?;
            (BinaryOp::berzig_samet(n, p, phis, psis)?, Partition::split(n, p)?)
        }
        PresetName::Upsilon => {
            let sigmas = params.sigmas.as_ref().ok_or_else(|| IndexError::MissingParameter {
                preset: name.to_string(),
                param: "sigmas",
            })?;
            let part = params.partition.clone().ok_or_else(|| IndexError::MissingParameter {
                preset: name.to_string(),
                param: "partition",
            })?;
            (from_upsilon(&UpsilonTuple::new(n, sigmas)?), part)
        }
    };
    let part = params.partition.clone().unwrap_or(default_part);
    if part.n() != op.n() {
        return Err(IndexError::DimensionMismatch {
            left: op.n(),
            right: part.n(),
        });
    }
    Ok((op, part))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows<const N: usize>(r: [[usize; N]; N]) -> Vec<Vec<usize>> {
        grid(r)
    }

    #[test]
    fn builds_from_matrix_and_rejects_bad_entries() {
        let op = BinaryOp::from_rows(3, &rows([[1, 2, 3], [2, 1, 2], [3, 2, 1]])).unwrap();
        assert_eq!(op, BinaryOp::skew_1(3).unwrap());
        assert_eq!(op.get(2, 3), 2);
        let coupled = BinaryOp::from_rows(2, &rows([[1, 2], [2, 1]])).unwrap();
        assert_eq!(coupled.rows(), vec![vec![1, 2], vec![2, 1]]);
        assert_eq!(
            BinaryOp::from_rows(2, &rows([[1, 3], [2, 1]])),
            Err(IndexError::OutOfRangeEntry { row: 1, col: 2, value: 3, n: 2 })
        );
        assert!(matches!(
            BinaryOp::from_rows(2, &[vec![1, 2], vec![1]]),
            Err(IndexError::ShapeMismatch { .. })
        ));
        assert!(matches!(BinaryOp::from_rows(2, &[vec![1, 2]]), Err(IndexError::ShapeMismatch { .. })));
        assert_eq!(BinaryOp::from_rows(1, &[vec![1]]), Err(IndexError::ArityTooSmall(1)));
        assert!(matches!(
            BinaryOp::from_rows(2, &rows([[0, 1], [1, 1]])),
            Err(IndexError::OutOfRangeEntry { row: 1, col: 1, .. })
        ));
    }

    #[test]
    fn cyclic_families() {
        assert_eq!(
            BinaryOp::forward_cyclic(4).unwrap().rows(),
            rows([[1, 2, 3, 4], [2, 3, 4, 1], [3, 4, 1, 2], [4, 1, 2, 3]])
        );
        assert_eq!(BinaryOp::forward_cyclic(2).unwrap().rows(), rows([[1, 2], [2, 1]]));
        assert_eq!(BinaryOp::forward_cyclic(3).unwrap().rows(), rows([[1, 2, 3], [2, 3, 1], [3, 1, 2]]));
        assert_eq!(
            BinaryOp::backward_cyclic(4).unwrap().rows(),
            rows([[1, 4, 3, 2], [2, 1, 4, 3], [3, 2, 1, 4], [4, 3, 2, 1]])
        );
        assert_eq!(BinaryOp::backward_cyclic(2).unwrap().rows(), rows([[1, 2], [2, 1]]));
        assert_eq!(BinaryOp::backward_cyclic(3).unwrap().rows(), rows([[1, 3, 2], [2, 1, 3], [3, 2, 1]]));
        assert_eq!(BinaryOp::skew_1(3).unwrap().rows(), rows([[1, 2, 3], [2, 1, 2], [3, 2, 1]]));
        assert_eq!(BinaryOp::skew_n(3).unwrap().rows(), rows([[1, 2, 3], [2, 3, 2], [3, 2, 1]]));
        assert_eq!(BinaryOp::skew_1(2).unwrap().rows(), rows([[1, 2], [2, 1]]));
        assert_eq!(BinaryOp::forward_cyclic(1), Err(IndexError::ArityTooSmall(1)));
    }

    #[test]
    fn berzig_samet_matrices_and_domain_checks() {
        let op3 = BinaryOp::berzig_samet(
            3,
            2,
            &[vec![1, 2], vec![2, 1], vec![3, 3]],
            &[vec![3], vec![3], vec![2]],
        )
        .unwrap();
        assert_eq!(op3.rows(), grid(BERZIG_SAMET_3));
        let op4 = BinaryOp::berzig_samet(
            4,
            2,
            &[vec![1, 2], vec![1, 2], vec![3, 4], vec![3, 4]],
            &[vec![3, 4], vec![4, 3], vec![2, 1], vec![1, 2]],
        )
        .unwrap();
        assert_eq!(op4.rows(), grid(BERZIG_SAMET_4));
        // phi_3 must map into {3}, not {1, 2}
        let err = BinaryOp::berzig_samet(3, 2, &[vec![1, 2], vec![2, 1], vec![1, 3]], &[vec![3], vec![3], vec![2]]);
        assert!(matches!(err, Err(IndexError::DomainViolation { map: "phi", index: 3, arg: 1, value: 1, .. })));
        let err = BinaryOp::berzig_samet(3, 2, &[vec![1, 2], vec![2, 1], vec![3, 3]], &[vec![3], vec![1], vec![2]]);
        assert!(matches!(err, Err(IndexError::DomainViolation { map: "psi", index: 2, arg: 3, .. })));
        assert!(BinaryOp::berzig_samet(3, 3, &[], &[]).is_err());
    }

    #[test]
    fn corollary_43_witnesses() {
        let m = is_member_u(&BinaryOp::forward_cyclic(3).unwrap(), &Partition::odd_even(3).unwrap()).unwrap();
        assert!(!m.member);
        let cells: Vec<(usize, usize, usize)> = m.violations.iter().map(|v| (v.row, v.col, v.value)).collect();
        assert_eq!(cells, vec![(2, 3, 1), (3, 2, 1), (3, 3, 2)]);
        assert_eq!(m.violations[2].condition, Closure::AA);
    }

    #[test]
    fn membership_examples() {
        let kl = is_member_u(&BinaryOp::forward_cyclic(4).unwrap(), &Partition::new(4, &[1, 3], &[2, 4]).unwrap()).unwrap();
        assert!(kl.member && kl.violations.is_empty());
        let bs = BinaryOp::from_rows(3, &grid(BERZIG_SAMET_3)).unwrap();
        assert!(is_member_u(&bs, &Partition::split(3, 2).unwrap()).unwrap().member);
        assert_eq!(
            is_member_u(&bs, &Partition::odd_even(4).unwrap()),
            Err(IndexError::DimensionMismatch { left: 3, right: 4 })
        );
    }

    #[test]
    fn permutedness_examples() {
        let star = BinaryOp::from_rows(3, &rows([[1, 2, 3], [2, 1, 3], [3, 2, 1]])).unwrap();
        let circ = BinaryOp::from_rows(3, &grid(BERZIG_SAMET_3)).unwrap();
        assert!(is_permuted(&star).permuted);
        assert_eq!(is_permuted(&circ), Permutedness { permuted: false, first_bad_row: Some(3) });
        assert!(!is_permuted(&BinaryOp::skew_1(3).unwrap()).permuted);
        assert_eq!(is_permuted(&BinaryOp::skew_1(3).unwrap()).first_bad_row, Some(2));
    }

    #[test]
    fn upsilon_conversion_examples() {
        let u = to_upsilon(&BinaryOp::skew_1(3).unwrap());
        assert_eq!(u.sigmas(), rows([[1, 2, 3], [2, 1, 2], [3, 2, 1]]));
        assert_eq!(u.sigma(2, 3), 2);
        let fc = BinaryOp::forward_cyclic(5).unwrap();
        let from_rows = UpsilonTuple::new(5, &fc.rows()).unwrap();
        assert_eq!(from_upsilon(&from_rows), fc);
        assert!(!upsilon_compatible(&to_upsilon(&BinaryOp::forward_cyclic(3).unwrap()), &Partition::odd_even(3).unwrap()).unwrap());
        let coupled = to_upsilon(&BinaryOp::forward_cyclic(2).unwrap());
        assert!(upsilon_compatible(&coupled, &Partition::new(2, &[1], &[2]).unwrap()).unwrap());
        assert!(upsilon_compatible(&coupled, &Partition::odd_even(3).unwrap()).is_err());
    }

    #[test]
    fn partitions_validate() {
        assert!(Partition::new(3, &[1, 3], &[2]).is_ok());
        assert!(Partition::new(3, &[1], &[2]).is_err());
        assert!(Partition::new(3, &[1, 2], &[2, 3]).is_err());
        assert!(Partition::new(3, &[], &[1, 2, 3]).is_err());
        assert!(Partition::new(3, &[1, 4], &[2, 3]).is_err());
        assert_eq!(Partition::odd_even(5).unwrap().a(), vec![1, 3, 5]);
        assert_eq!(Partition::split(4, 1).unwrap().b(), vec![2, 3, 4]);
        assert_eq!(Partition::enumerate_all(3).count(), 6);
        assert_eq!(format!("{}", Partition::new(3, &[1, 3], &[2]).unwrap()), "{{1,3},{2}}");
    }

    #[test]
    fn presets() {
        let none = PresetParams::default();
        let (op, part) = preset("karapinar-luong", 4, &none).unwrap();
        assert_eq!(op, BinaryOp::forward_cyclic(4).unwrap());
        assert_eq!(part, Partition::new(4, &[1, 3], &[2, 4]).unwrap());
        let (op, part) = preset("berinde-borcut", 3, &none).unwrap();
        assert_eq!(op, BinaryOp::skew_1(3).unwrap());
        assert_eq!(part, Partition::new(3, &[1, 3], &[2]).unwrap());
        let (op, part) = preset("coupled", 2, &none).unwrap();
        assert_eq!(op.rows(), rows([[1, 2], [2, 1]]));
        assert_eq!(part, Partition::new(2, &[1], &[2]).unwrap());
        assert_eq!(preset("unknown-name", 3, &none), Err(IndexError::UnknownPreset("unknown-name".into())));
        assert!(matches!(preset("coupled", 3, &none), Err(IndexError::BadArity { .. })));
        let (op, _) = preset("forward-cyclic", 3, &none).unwrap();
        assert_eq!(op, BinaryOp::forward_cyclic(3).unwrap());
        assert!(matches!(preset("upsilon", 3, &none), Err(IndexError::MissingParameter { param: "sigmas", .. })));
        let params = PresetParams {
            sigmas: Some(rows([[1, 2, 3], [2, 1, 2], [3, 2, 1]])),
            partition: Some(Partition::new(3, &[1, 3], &[2]).unwrap()),
            ..Default::default()
        };
        assert_eq!(preset("upsilon", 3, &params).unwrap().0, BinaryOp::skew_1(3).unwrap());
        let params = PresetParams {
            p: Some(2),
            phis: Some(vec![vec![1, 2], vec![2, 1], vec![3, 3]]),
            psis: Some(vec![vec![3], vec![3], vec![2]]),
            ..Default::default()
        };
        let (op, part) = preset("berzig-samet-general", 3, &params).unwrap();
        assert_eq!(op.rows(), grid(BERZIG_SAMET_3));
        assert_eq!(part, Partition::split(3, 2).unwrap());
        for name in PresetName::ALL {
            assert_eq!(name.as_str().parse::<PresetName>().unwrap(), name);
        }
    }

    #[test]
    fn enumerates_all_ops() {
        let all: Vec<BinaryOp> = BinaryOp::enumerate_all(2).collect();
        assert_eq!(all.len(), 16);
        assert_eq!(all[0].rows(), rows([[1, 1], [1, 1]]));
        assert_eq!(all[15].rows(), rows([[2, 2], [2, 2]]));
    }
}
