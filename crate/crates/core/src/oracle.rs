//! Exhaustive ground truth on finite spaces.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::contractions::ControlFunction;
use crate::index_algebra::{
    from_upsilon, is_member_u, is_permuted, to_upsilon, upsilon_compatible, BinaryOp, Partition,
};
use crate::product_lift::{
    apply_f_star, apply_g, comparable, delta_n, lemma4_check, lemma6_check, nabla_n, product_leq, slice0,
};
use num_traits::Zero;
use crate::solver::{
    check_contraction, check_mixed_monotone, check_range_condition, check_uniqueness_hypothesis, find_initial,
    HypothesisReport, Mode, ProblemInstance, SolveConfig, SolveError,
};
use crate::spaces::{
    check_g_injective, check_weak_star_compat, tuple_count, tuples, Elem, FiniteMultiMap, FiniteSelfMap, FiniteSpace,
    MultiMap, OrderedMetricSpace, Provenance, SelfMap, SpaceError,
};
use crate::{Exact, FiniteInstance};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle requires a finite space")]
    NotFinite,
    #[error("enumeration needs {needed} tuples, above the limit of {limit}")]
    SizeLimit { needed: String, limit: u64 },
    #[error("hypotheses of {theorem} not machine-verified: {}", failed.join(", "))]
    HypothesesNotMachineVerified {
        theorem: Theorem,
        failed: Vec<String>,
        report: Box<HypothesisReport>,
    },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

fn all_tuples<S: OrderedMetricSpace>(space: &S, n: usize, limit: u64) -> Result<Vec<Vec<S::Point>>, OracleError> {
    let elems = space.elements().ok_or(OracleError::NotFinite)?;
    match tuple_count(elems.len(), n) {
        Some(c) if c <= limit => Ok(tuples(&elems, n).collect()),
        c => Err(OracleError::SizeLimit {
            needed: c.map_or_else(|| "more than u64::MAX".into(), |c| c.to_string()),
            limit,
        }),
    }
}

/// The arguments `(x_{*(i,1)}, .., x_{*(i,n)})`, built from the public 1-based lookup.
fn row_args<P: Clone>(u: &[P], op: &BinaryOp, i: usize) -> Vec<P> {
    (1..=op.n()).map(|k| u[op.get(i, k) - 1].clone()).collect()
}

/// `F(x_{*(i,1)}, .., x_{*(i,n)}) = x_i` for every `i`.
pub fn is_star_fixed<P: Clone + PartialEq>(f: &dyn MultiMap<P>, op: &BinaryOp, u: &[P]) -> Result<bool, SpaceError> {
    for i in 1..=op.n() {
        if f.eval(&row_args(u, op, i))? != u[i - 1] {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `F(x_{*(i,1)}, .., x_{*(i,n)}) = g(x_i)` for every `i`.
pub fn is_star_coincidence<P: Clone + PartialEq>(
    f: &dyn MultiMap<P>,
    g: &dyn SelfMap<P>,
    op: &BinaryOp,
    u: &[P],
) -> Result<bool, SpaceError> {
    for i in 1..=op.n() {
        if f.eval(&row_args(u, op, i))? != g.eval(&u[i - 1]) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every tuple fixed in the tupled sense, in enumeration order.
pub fn enumerate_star_fixed<S: OrderedMetricSpace>(
    space: &S,
    f: &dyn MultiMap<S::Point>,
    op: &BinaryOp,
    limit: u64,
) -> Result<Vec<Vec<S::Point>>, OracleError> {
    let mut out = Vec::new();
    for u in all_tuples(space, op.n(), limit)? {
        if is_star_fixed(f, op, &u)? {
            out.push(u);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceSets<P> {
    /// Tuples with `F(U*i) = g x_i` for all `i`.
    pub coincidence_points: Vec<Vec<P>>,
    /// Distinct `G`-images of coincidence points.
    pub points_of_coincidence: Vec<Vec<P>>,
    /// Coincidence points with `g x_i = x_i`.
    pub common_fixed: Vec<Vec<P>>,
}

pub fn enumerate_star_coincidence<S: OrderedMetricSpace>(
    space: &S,
    f: &dyn MultiMap<S::Point>,
    g: &dyn SelfMap<S::Point>,
    op: &BinaryOp,
    limit: u64,
) -> Result<CoincidenceSets<S::Point>, OracleError> {
    let mut sets = CoincidenceSets {
        coincidence_points: Vec::new(),
        points_of_coincidence: Vec::new(),
        common_fixed: Vec::new(),
    };
    for u in all_tuples(space, op.n(), limit)? {
        if !is_star_coincidence(f, g, op, &u)? {
            continue;
        }
        let gu = apply_g(g, &u);
        if gu == u {
            sets.common_fixed.push(u.clone());
        }
        if !sets.points_of_coincidence.contains(&gu) {
            sets.points_of_coincidence.push(gu);
        }
        sets.coincidence_points.push(u);
    }
    Ok(sets)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Theorem {
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
    T8,
    T9,
}

impl Theorem {
    pub const ALL: [Theorem; 9] = [
        Theorem::T1,
        Theorem::T2,
        Theorem::T3,
        Theorem::T4,
        Theorem::T5,
        Theorem::T6,
        Theorem::T7,
        Theorem::T8,
        Theorem::T9,
    ];

    fn range_mode(self) -> Mode {
        match self {
            Theorem::T1 | Theorem::T2 | Theorem::T3 => Mode::Compatible,
            Theorem::T4 | Theorem::T5 | Theorem::T6 | Theorem::T7 => Mode::Range,
            Theorem::T8 | Theorem::T9 => Mode::FixedPoint,
        }
    }

    fn needs_directedness(self) -> bool {
        !matches!(self, Theorem::T1 | Theorem::T4 | Theorem::T8)
    }

    fn needs_one_one(self) -> bool {
        matches!(self, Theorem::T3 | Theorem::T6)
    }

    fn needs_weak_compat(self) -> bool {
        matches!(self, Theorem::T7)
    }

    fn needs_compat(self) -> bool {
        matches!(self, Theorem::T1 | Theorem::T2 | Theorem::T3)
    }

    pub fn conclusion(self) -> &'static str {
        match self {
            Theorem::T1 | Theorem::T4 => "a *-coincidence point exists",
            Theorem::T2 => "unique point of *-coincidence, also a unique common *-fixed point",
            Theorem::T3 | Theorem::T6 => "unique *-coincidence point",
            Theorem::T5 => "unique point of *-coincidence",
            Theorem::T7 => "unique common *-fixed point",
            Theorem::T8 => "a *-fixed point exists",
            Theorem::T9 => "unique *-fixed point",
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Theorem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Theorem::ALL
            .into_iter()
            .find(|t| t.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown theorem `{s}` (expected T1..T9)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetSizes {
    pub coincidence_points: usize,
    pub points_of_coincidence: usize,
    pub common_fixed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub theorem: Theorem,
    pub hypotheses: HypothesisReport,
    pub conclusion: String,
    pub verified: bool,
    pub sets: SetSizes,
    pub witness: Option<serde_json::Value>,
    /// Present when the hypotheses hold but the conclusion fails.
    pub counterexample: Option<serde_json::Value>,
}

/// `φ(t) < t` at every distance `Δ_n` or `∇_n` realised between `G`-images.
fn phi_below_identity_exact<S: OrderedMetricSpace>(inst: &ProblemInstance<S>, images: &[Vec<S::Point>]) -> Option<S::Scalar> {
    for (i, a) in images.iter().enumerate() {
        for b in &images[i + 1..] {
            for t in [delta_n(&inst.space, a, b).unwrap(), nabla_n(&inst.space, a, b).unwrap()] {
                if t > S::Scalar::zero() && !(inst.phi.eval(&t) < t) {
                    return Some(t);
                }
            }
        }
    }
    None
}

/// Checks the hypotheses of `theorem` exhaustively and, if all are
/// machine-backed, compares its conclusion with the enumerated solution sets.
pub fn certify_theorem<S: OrderedMetricSpace>(
    inst: &ProblemInstance<S>,
    theorem: Theorem,
    cfg: &SolveConfig,
) -> Result<Certificate, OracleError> {
    if !inst.space.is_finite() {
        return Err(OracleError::NotFinite);
    }
    let tuples_all = all_tuples(&inst.space, inst.n(), cfg.size_limit)?;
    let mut report = HypothesisReport::default();
    let mv = Provenance::MachineVerified;
    let vac = Provenance::VacuousOnFinite;
    let f = inst.f.as_ref();
    let g = inst.g.as_ref();

    let membership = is_member_u(&inst.op, &inst.part).map_err(|e| SolveError::InvalidInstance(e.to_string()))?;
    report.push("membership_u", membership.member, mv, format!("{} closure violations", membership.violations.len()));

    let mode = theorem.range_mode();
    if mode == Mode::FixedPoint {
        let identity = inst.space.elements().unwrap().iter().all(|x| g.eval(x) == *x);
        report.push("g_identity", identity, mv, "");
    }
    let range = check_range_condition(inst, mode, cfg)?;
    report.push("range_condition", range.holds, mv, format!("{:?} mode, {} violations", mode, range.violation_count));
    report.push("o_complete_subspace", true, vac, "");

    let mono = check_mixed_monotone(inst, cfg)?;
    report.push("mixed_monotone", mono.holds, mono.provenance, format!("{} violations", mono.violation_count));

    if theorem.needs_compat() {
        let weak = check_weak_star_compat(f, g, &inst.op, &inst.space)?;
        report.push("star_o_compatible", weak.holds, mv, "decided through weak *-compatibility on a discrete carrier");
        report.push("g_o_continuous", true, vac, "");
    }
    report.push("F_o_continuous", true, vac, "");

    let candidates: Vec<Vec<S::Point>> = inst.initial.iter().cloned().collect();
    let initial = match find_initial(inst, &candidates, cfg) {
        Ok(p) => Some(p),
        Err(SolveError::NotFound) => None,
        Err(e) => return Err(e.into()),
    };
    report.push("initial_tuple", initial.is_some(), mv, "");

    match check_contraction(inst, cfg) {
        Ok(c) => report.push(format!("contraction_{}", inst.form.name()), c.holds, c.provenance, format!("{} violations", c.violation_count)),
        Err(SolveError::Contraction(e)) => report.push(format!("contraction_{}", inst.form.name()), false, mv, e.to_string()),
        Err(e) => return Err(e.into()),
    }
    let images: Vec<Vec<S::Point>> = {
        let mut out: Vec<Vec<S::Point>> = Vec::new();
        for u in &tuples_all {
            let gu = apply_g(g, u);
            if !out.contains(&gu) {
                out.push(gu);
            }
        }
        out
    };
    if !matches!(inst.form, crate::contractions::ContractionForm::WeightedLinear(_)) {
        report.push("control_class", true, inst.phi.class_provenance(), format!("{} in {}", inst.phi.name(), inst.phi.class()));
        let bad = phi_below_identity_exact(inst, &images);
        report.push(
            "phi_below_identity",
            bad.is_none(),
            mv,
            bad.map_or_else(|| "all realised distances".to_string(), |t| format!("fails at {t}")),
        );
    }

    if theorem.needs_directedness() || theorem.needs_one_one() || theorem.needs_weak_compat() {
        let u = check_uniqueness_hypothesis(inst, false, false, cfg)?;
        report.push("directedness", u.directed, mv, "");
    }
    if theorem.needs_one_one() {
        report.push("g_one_one", check_g_injective(g, &inst.space)?.holds, mv, "");
    }
    if theorem.needs_weak_compat() {
        report.push("weakly_star_compatible", check_weak_star_compat(f, g, &inst.op, &inst.space)?.holds, mv, "");
    }

    let failed: Vec<String> = report
        .entries
        .iter()
        .filter(|e| !e.holds || !e.provenance.is_machine_backed())
        .map(|e| e.name.clone())
        .collect();
    if !failed.is_empty() {
        return Err(OracleError::HypothesesNotMachineVerified {
            theorem,
            failed,
            report: Box::new(report),
        });
    }

    let sets = enumerate_star_coincidence(&inst.space, f, g, &inst.op, cfg.size_limit)?;
    let space = &inst.space;
    let set_json = |v: &[Vec<S::Point>]| serde_json::Value::Array(v.iter().map(|u| space.tuple_json(u)).collect());
    let (verified, relevant) = match theorem {
        Theorem::T1 | Theorem::T4 | Theorem::T8 => (!sets.coincidence_points.is_empty(), &sets.coincidence_points),
        Theorem::T2 => (
            sets.points_of_coincidence.len() == 1 && sets.common_fixed.len() == 1,
            &sets.points_of_coincidence,
        ),
        Theorem::T3 | Theorem::T6 | Theorem::T9 => (sets.coincidence_points.len() == 1, &sets.coincidence_points),
        Theorem::T5 => (sets.points_of_coincidence.len() == 1, &sets.points_of_coincidence),
        Theorem::T7 => (sets.common_fixed.len() == 1, &sets.common_fixed),
    };
    let (witness, counterexample) = if verified {
        (relevant.first().map(|u| space.tuple_json(u)), None)
    } else {
        (None, Some(set_json(relevant)))
    };
    Ok(Certificate {
        theorem,
        hypotheses: report,
        conclusion: theorem.conclusion().to_string(),
        verified,
        sets: SetSizes {
            coincidence_points: sets.coincidence_points.len(),
            points_of_coincidence: sets.points_of_coincidence.len(),
            common_fixed: sets.common_fixed.len(),
        },
        witness,
        counterexample,
    })
}

/// Seeded random finite structures.
pub mod generate {
    use super::*;

    pub fn labels(size: usize) -> Vec<String> {
        (1..=size).map(|i| format!("x{i}")).collect()
    }

    /// A random poset whose order is contained in the index order, with
    /// distances in `[1, 2]` (so the triangle inequality holds).
    pub fn random_space(rng: &mut ChaCha8Rng, size: usize) -> FiniteSpace<Exact> {
        let mut leq = vec![vec![false; size]; size];
        for i in 0..size {
            leq[i][i] = true;
            for j in i + 1..size {
                leq[i][j] = rng.gen_bool(0.5);
            }
        }
        for k in 0..size {
            for i in 0..size {
                for j in 0..size {
                    if leq[i][k] && leq[k][j] {
                        leq[i][j] = true;
                    }
                }
            }
        }
        let mut dist = vec![vec![Ratio::from_integer(0); size]; size];
        for i in 0..size {
            for j in i + 1..size {
                let d = Ratio::new(4 + rng.gen_range(0..=4), 4);
                dist[i][j] = d;
                dist[j][i] = d;
            }
        }
        FiniteSpace::from_relation(labels(size), dist, leq).expect("generated space is well formed")
    }

    pub fn random_table(rng: &mut ChaCha8Rng, size: usize, n: usize) -> FiniteMultiMap {
        let total = tuple_count(size, n).unwrap() as usize;
        let values: Vec<usize> = (0..total).map(|_| rng.gen_range(0..size)).collect();
        FiniteMultiMap::from_fn(size, n, |u| {
            let index = u.iter().fold(0, |acc, x| acc * size + x.idx());
            Elem::from_idx(values[index])
        })
    }

    pub fn random_self_map(rng: &mut ChaCha8Rng, size: usize) -> FiniteSelfMap {
        let image: Vec<usize> = (0..size).map(|_| rng.gen_range(0..size)).collect();
        FiniteSelfMap::from_fn(size, |e| Elem::from_idx(image[e.idx()]))
    }

    pub fn random_partition(rng: &mut ChaCha8Rng, n: usize) -> Partition {
        let all: Vec<Partition> = Partition::enumerate_all(n).collect();
        all.choose(rng).unwrap().clone()
    }

    pub fn random_op(rng: &mut ChaCha8Rng, n: usize) -> BinaryOp {
        BinaryOp::from_entries0(n, (0..n * n).map(|_| rng.gen_range(0..n)).collect())
    }

    pub fn random_permuted_op(rng: &mut ChaCha8Rng, n: usize) -> BinaryOp {
        let mut entries = Vec::with_capacity(n * n);
        for _ in 0..n {
            let mut row: Vec<usize> = (0..n).collect();
            row.shuffle(rng);
            entries.extend(row);
        }
        BinaryOp::from_entries0(n, entries)
    }

    /// A random member of `U` for `part`: each entry drawn from its required side.
    pub fn random_op_in_u(rng: &mut ChaCha8Rng, part: &Partition) -> BinaryOp {
        let n = part.n();
        let a: Vec<usize> = (0..n).filter(|&i| part.in_a0(i)).collect();
        let b: Vec<usize> = (0..n).filter(|&i| !part.in_a0(i)).collect();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for k in 0..n {
                let to_a = part.in_a0(i) == part.in_a0(k);
                entries.push(*if to_a { &a } else { &b }.choose(rng).unwrap());
            }
        }
        BinaryOp::from_entries0(n, entries)
    }

    /// A chain inside `space` starting at a random element, climbing by smallest index.
    fn random_chain(rng: &mut ChaCha8Rng, space: &FiniteSpace<Exact>) -> Vec<Elem> {
        let all = space.all();
        let mut chain = vec![*all.choose(rng).unwrap()];
        loop {
            let last = *chain.last().unwrap();
            match all.iter().find(|&&x| x != last && space.leq(&last, &x)) {
                Some(&next) => chain.push(next),
                None => break,
            }
        }
        chain
    }

    /// `F` with the mixed g-monotone property by construction: a monotone step
    /// function of `Σ_A rank(g x_j) - Σ_B rank(g x_j)` into a chain. Ranks follow
    /// the index order, which extends the partial order of generated spaces.
    pub fn monotone_table(rng: &mut ChaCha8Rng, space: &FiniteSpace<Exact>, g: &FiniteSelfMap, part: &Partition) -> FiniteMultiMap {
        let size = space.size();
        let n = part.n();
        let chain = random_chain(rng, space);
        let span = (n * size.saturating_sub(1)) as i64;
        let mut cuts: Vec<i64> = (1..chain.len()).map(|_| rng.gen_range(-span..=span + 1)).collect();
        cuts.sort_unstable();
        FiniteMultiMap::from_fn(size, n, |u| {
            let score: i64 = u
                .iter()
                .enumerate()
                .map(|(j, x)| {
                    let r = g.eval(x).idx() as i64;
                    if part.in_a0(j) {
                        r
                    } else {
                        -r
                    }
                })
                .sum();
            chain[cuts.iter().filter(|&&c| c <= score).count()]
        })
    }

    /// A gated instance on a chain with a tight cluster of two points far
    /// below the others. `F` is a monotone threshold into the cluster that
    /// only sees which block each `g x_j` falls in, so it is contractive for
    /// `φ(t) = t/2`.
    pub fn contractive_instance(rng: &mut ChaCha8Rng, n: usize, max_size: usize) -> FiniteInstance {
        let size = rng.gen_range(2..=max_size.max(2));
        let eps = Ratio::new(1, 30);
        let cluster = if size >= 3 { 2 } else { rng.gen_range(1..=2) };
        let positions: Vec<Exact> = (0..size)
            .map(|i| if i < cluster { eps * Ratio::from_integer(i as i64) } else { Ratio::from_integer((i - cluster + 1) as i64) })
            .collect();
        let space = FiniteSpace::chain(labels(size), &positions).unwrap();
        let block = move |i: usize| if i < cluster { 0i64 } else { (i - cluster + 1) as i64 };
        let identity = rng.gen_bool(0.5);
        let g = if identity {
            FiniteSelfMap::identity(size)
        } else {
            let mut image: Vec<usize> = (0..cluster).collect();
            image.extend((cluster..size).map(|_| rng.gen_range(0..size)));
            image.sort_unstable();
            FiniteSelfMap::from_fn(size, |e| Elem::from_idx(image[e.idx()]))
        };
        let part = random_partition(rng, n);
        let op = random_op_in_u(rng, &part);
        let top = block(size - 1) * n as i64;
        let threshold = rng.gen_range(-top..=top + 1);
        let (low, high) = (Elem::from_idx(0), Elem::from_idx(cluster - 1));
        let g_table = g.clone();
        let part_f = part.clone();
        let f = FiniteMultiMap::from_fn(size, n, move |u| {
            let score: i64 = u
                .iter()
                .enumerate()
                .map(|(j, x)| {
                    let b = block(g_table.eval(x).idx());
                    if part_f.in_a0(j) {
                        b
                    } else {
                        -b
                    }
                })
                .sum();
            if score >= threshold {
                high
            } else {
                low
            }
        });
        let phi = ControlFunction::linear(Ratio::new(1, 2)).unwrap();
        let form = if rng.gen_bool(0.5) {
            crate::contractions::ContractionForm::Sum
        } else {
            crate::contractions::ContractionForm::Max
        };
        let inst = ProblemInstance::new(space, Box::new(f), Box::new(g), op, part, phi).unwrap().with_form(form);
        if identity {
            inst
        } else {
            inst.with_mode(Mode::Compatible).unwrap()
        }
    }
}

#[derive(Debug, Clone)]
pub struct LemmaConfig {
    /// Largest tuple length; `n = 2` is exhaustive, larger `n` sampled.
    pub max_n: usize,
    pub max_size: usize,
    /// Random `(F, g)` tables per carrier size in the exhaustive part.
    pub trials: usize,
    /// Random cases per larger `n`.
    pub sampled_cases: usize,
    pub seed: u64,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self {
            max_n: 3,
            max_size: 3,
            trials: 200,
            sampled_cases: 10_000,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LemmaCheck {
    pub name: String,
    pub cases: u64,
    pub violations: u64,
    pub first_violation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LemmaReport {
    pub seed: u64,
    pub max_n: usize,
    pub max_size: usize,
    pub trials: usize,
    pub sampled_cases: usize,
    pub warnings: Vec<String>,
    pub checks: Vec<LemmaCheck>,
    /// Observations on claims that are tested as stated but not relied on.
    pub findings: Vec<String>,
    pub total_violations: u64,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.total_violations == 0
    }
}

const CHECK_NAMES: [&str; 16] = [
    "lemma3_iii_coincidence",
    "lemma3_iv_fixed",
    "lemma3_v_common_fixed",
    "lemma4_slice_order",
    "lemma5_g_increasing_lift",
    "lemma6_i_row_average",
    "lemma6_ii_row_max",
    "lemma6_iii_row_max_bound",
    "remark8_iii_slice_commutes",
    "remark8_iv_metric_equivalence",
    "prop3_upsilon_equivalence",
    "prop3_upsilon_round_trip",
    "prop4_permuted_rows",
    "prop6_convergence_equivalence",
    "prop7_monotone_coordinates",
    "mixed_monotone_construction",
];

struct Tally {
    checks: Vec<LemmaCheck>,
}

impl Tally {
    fn new() -> Self {
        Self {
            checks: CHECK_NAMES
                .iter()
                .map(|n| LemmaCheck {
                    name: n.to_string(),
                    cases: 0,
                    violations: 0,
                    first_violation: None,
                })
                .collect(),
        }
    }

    fn record(&mut self, name: &str, ok: bool, context: impl FnOnce() -> String) {
        let c = self.checks.iter_mut().find(|c| c.name == name).expect("registered check");
        c.cases += 1;
        if !ok {
            c.violations += 1;
            if c.first_violation.is_none() {
                c.first_violation = Some(context());
            }
        }
    }
}

struct Case<'a> {
    space: &'a FiniteSpace<Exact>,
    f: &'a FiniteMultiMap,
    f_mono: &'a FiniteMultiMap,
    g: &'a FiniteSelfMap,
    op: &'a BinaryOp,
    part: &'a Partition,
}

impl Case<'_> {
    fn describe(&self, extra: &str) -> String {
        format!("op {:?}, partition {}, |X| = {}{}", self.op.rows(), self.part, self.space.size(), extra)
    }
}

fn check_lemma3(t: &mut Tally, c: &Case, u: &[Elem]) {
    let f_star = apply_f_star(c.f, c.op, u).unwrap();
    let gu = apply_g(c.g, u);
    let ctx = || c.describe(&format!(", U = {u:?}"));
    t.record("lemma3_iii_coincidence", is_star_coincidence(c.f, c.g, c.op, u).unwrap() == (f_star == gu), ctx);
    t.record("lemma3_iv_fixed", is_star_fixed(c.f, c.op, u).unwrap() == (f_star == u), ctx);
    let common = is_star_coincidence(c.f, c.g, c.op, u).unwrap() && gu == u;
    t.record("lemma3_v_common_fixed", common == (f_star == u && gu == u), ctx);
    for i in 0..c.op.n() {
        let lhs = apply_g(c.g, &slice0(u, c.op, i));
        let rhs = slice0(&gu, c.op, i);
        t.record("remark8_iii_slice_commutes", lhs == rhs, ctx);
    }
}

fn check_pair(t: &mut Tally, c: &Case, u: &[Elem], v: &[Elem], in_u: bool) {
    let space = c.space;
    let (gu, gv) = (apply_g(c.g, u), apply_g(c.g, v));
    let ctx = || c.describe(&format!(", U = {u:?}, V = {v:?}"));
    let delta = delta_n(space, &gu, &gv).unwrap();
    let nabla = nabla_n(space, &gu, &gv).unwrap();
    let n = Ratio::from_integer(c.op.n() as i64);
    t.record("remark8_iv_metric_equivalence", nabla / n <= delta && delta <= nabla, ctx);

    let r6 = lemma6_check(space, c.g, c.op, u, v).unwrap();
    t.record("lemma6_iii_row_max_bound", r6.max_exceeds.is_empty(), ctx);
    if r6.permuted {
        t.record("lemma6_i_row_average", r6.average_differs.is_empty(), ctx);
        t.record("lemma6_ii_row_max", r6.max_differs.is_empty(), ctx);
    }

    if in_u && product_leq(space, &gu, &gv, c.part) {
        let r4 = lemma4_check(space, c.g, c.op, c.part, u, v).unwrap();
        t.record("lemma4_slice_order", r4.holds(), ctx);
        let fu = apply_f_star(c.f_mono, c.op, u).unwrap();
        let fv = apply_f_star(c.f_mono, c.op, v).unwrap();
        t.record("lemma5_g_increasing_lift", product_leq(space, &fu, &fv, c.part), ctx);
    }
}

fn check_prop3_4(t: &mut Tally, op: &BinaryOp, part: &Partition) {
    let ctx = || format!("op {:?}, partition {part}", op.rows());
    let member = is_member_u(op, part).unwrap().member;
    let compatible = upsilon_compatible(&to_upsilon(op), part).unwrap();
    t.record("prop3_upsilon_equivalence", member == compatible, ctx);
    t.record("prop3_upsilon_round_trip", from_upsilon(&to_upsilon(op)) == *op, ctx);
    let full_rows = (1..=op.n()).all(|i| op.row(i).into_iter().collect::<BTreeSet<_>>() == (1..=op.n()).collect());
    t.record("prop4_permuted_rows", is_permuted(op).permuted == full_rows, ctx);
}

fn check_prop6(t: &mut Tally, rng: &mut ChaCha8Rng, space: &FiniteSpace<Exact>, n: usize) {
    let elems = space.all();
    let limit: Vec<Elem> = (0..n).map(|_| *elems.choose(rng).unwrap()).collect();
    let settle = rng.gen_range(0..8);
    let seq: Vec<Vec<Elem>> = (0..10)
        .map(|m| {
            if m >= settle && rng.gen_bool(0.8) {
                limit.clone()
            } else {
                (0..n).map(|_| *elems.choose(rng).unwrap()).collect()
            }
        })
        .collect();
    let tail = &seq[6..];
    let by_delta = tail.iter().all(|u| delta_n(space, u, &limit).unwrap().is_zero());
    let by_nabla = tail.iter().all(|u| nabla_n(space, u, &limit).unwrap().is_zero());
    let by_coords = (0..n).all(|i| tail.iter().all(|u| u[i] == limit[i]));
    t.record("prop6_convergence_equivalence", by_delta == by_nabla && by_nabla == by_coords, || {
        format!("sequence {seq:?} against {limit:?}")
    });
}

fn check_prop7(t: &mut Tally, rng: &mut ChaCha8Rng, space: &FiniteSpace<Exact>, part: &Partition, all: &[Vec<Elem>]) {
    let mut walk = vec![all.choose(rng).unwrap().clone()];
    for _ in 0..5 {
        let last = walk.last().unwrap();
        let above: Vec<&Vec<Elem>> = all.iter().filter(|v| product_leq(space, last, v, part)).collect();
        walk.push((*above.choose(rng).unwrap()).clone());
    }
    let monotone = walk.windows(2).all(|w| {
        (0..part.n()).all(|i| if part.in_a0(i) { space.leq(&w[0][i], &w[1][i]) } else { space.leq(&w[1][i], &w[0][i]) })
    });
    let from_start = walk.iter().all(|u| comparable(space, &walk[0], u, part) && product_leq(space, &walk[0], u, part));
    t.record("prop7_monotone_coordinates", monotone && from_start, || format!("walk {walk:?} for {part}"));
}

/// Runs every lemma-level identity on seeded random instances.
pub fn lemma_suite(cfg: &LemmaConfig) -> LemmaReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut t = Tally::new();
    let mut warnings = Vec::new();
    let mut findings = Vec::new();
    if cfg.max_size < 2 {
        warnings.push(format!("degenerate bound: max_size = {} makes every check vacuous", cfg.max_size));
    }
    if cfg.max_n < 2 {
        warnings.push(format!("degenerate bound: max_n = {} leaves no tuple length to check", cfg.max_n));
    }

    if cfg.max_n >= 2 {
        let n = 2;
        let partitions: Vec<Partition> = Partition::enumerate_all(n).collect();
        let ops: Vec<BinaryOp> = BinaryOp::enumerate_all(n).collect();
        for op in &ops {
            for part in &partitions {
                check_prop3_4(&mut t, op, part);
            }
        }
        for size in 1..=cfg.max_size.max(1) {
            for _ in 0..cfg.trials {
                let space = generate::random_space(&mut rng, size);
                let g = if rng.gen_bool(0.3) { FiniteSelfMap::identity(size) } else { generate::random_self_map(&mut rng, size) };
                let f = generate::random_table(&mut rng, size, n);
                let all: Vec<Vec<Elem>> = tuples(&space.all(), n).collect();
                for part in &partitions {
                    let f_mono = generate::monotone_table(&mut rng, &space, &g, part);
                    for op in &ops {
                        let in_u = is_member_u(op, part).unwrap().member;
                        let case = Case {
                            space: &space,
                            f: &f,
                            f_mono: &f_mono,
                            g: &g,
                            op,
                            part,
                        };
                        if in_u {
                            check_mono_construction(&mut t, &case);
                            for u in &all {
                                check_lemma3(&mut t, &case, u);
                            }
                        }
                        for u in &all {
                            for v in &all {
                                check_pair(&mut t, &case, u, v, in_u);
                            }
                        }
                    }
                    check_prop7(&mut t, &mut rng, &space, part, &all);
                }
                check_prop6(&mut t, &mut rng, &space, n);
            }
        }
    }

    for n in 3..=cfg.max_n {
        for _ in 0..cfg.sampled_cases {
            let op = generate::random_op(&mut rng, n);
            let part = generate::random_partition(&mut rng, n);
            check_prop3_4(&mut t, &op, &part);

            let size = rng.gen_range(1..=cfg.max_size.max(1));
            let space = generate::random_space(&mut rng, size);
            let g = if rng.gen_bool(0.3) { FiniteSelfMap::identity(size) } else { generate::random_self_map(&mut rng, size) };
            let f = generate::random_table(&mut rng, size, n);
            let f_mono = generate::monotone_table(&mut rng, &space, &g, &part);
            let op_u = generate::random_op_in_u(&mut rng, &part);
            let all: Vec<Vec<Elem>> = tuples(&space.all(), n).collect();
            let case = Case {
                space: &space,
                f: &f,
                f_mono: &f_mono,
                g: &g,
                op: &op_u,
                part: &part,
            };
            if rng.gen_bool(0.05) {
                check_mono_construction(&mut t, &case);
            }
            for u in &all {
                check_lemma3(&mut t, &case, u);
            }
            let u = all.choose(&mut rng).unwrap();
            let gu = apply_g(&g, u);
            let above: Vec<&Vec<Elem>> = all.iter().filter(|v| product_leq(&space, &gu, &apply_g(&g, v), &part)).collect();
            let v = above.choose(&mut rng).unwrap();
            check_pair(&mut t, &case, u, v, true);
            let permuted = generate::random_permuted_op(&mut rng, n);
            for other in [&op, &permuted] {
                let c2 = Case { op: other, ..case };
                let w = all.choose(&mut rng).unwrap();
                check_pair(&mut t, &c2, u, w, false);
            }
            check_prop6(&mut t, &mut rng, &space, n);
            check_prop7(&mut t, &mut rng, &space, &part, &all);
        }
    }

    let mut total = 0;
    for c in &t.checks {
        if c.name == "lemma6_ii_row_max" {
            if c.violations > 0 {
                findings.push(format!(
                    "row-max equality failed in {} of {} permuted cases; first: {}",
                    c.violations,
                    c.cases,
                    c.first_violation.clone().unwrap_or_default()
                ));
            } else {
                findings.push(format!("row-max equality held in all {} permuted cases", c.cases));
            }
        } else {
            total += c.violations;
        }
    }
    LemmaReport {
        seed: cfg.seed,
        max_n: cfg.max_n,
        max_size: cfg.max_size,
        trials: cfg.trials,
        sampled_cases: cfg.sampled_cases,
        warnings,
        checks: t.checks,
        findings,
        total_violations: total,
    }
}

/// The generated monotone table must pass the exhaustive monotonicity check.
fn check_mono_construction(t: &mut Tally, c: &Case) {
    let inst = ProblemInstance::new(
        c.space.clone(),
        Box::new(c.f_mono.clone()),
        Box::new(c.g.clone()),
        c.op.clone(),
        c.part.clone(),
        ControlFunction::linear(Ratio::new(1, 2)).unwrap(),
    )
    .unwrap();
    let ok = check_mixed_monotone(&inst, &SolveConfig::default()).is_ok_and(|r| r.holds);
    t.record("mixed_monotone_construction", ok, || c.describe(""));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index_algebra::{preset, PresetParams};
    use crate::spaces::Identity;

    fn chain(size: usize) -> FiniteSpace<Exact> {
        let pos: Vec<Exact> = (0..size as i64).map(Ratio::from_integer).collect();
        FiniteSpace::chain(generate::labels(size), &pos).unwrap()
    }

    #[test]
    fn projection_fixes_every_pair() {
        let s = chain(3);
        let (op, _) = preset("coupled", 2, &PresetParams::default()).unwrap();
        let f = FiniteMultiMap::from_fn(3, 2, |u| u[0]);
        assert_eq!(enumerate_star_fixed(&s, &f, &op, 1000).unwrap().len(), 9);
    }

    #[test]
    fn constant_map_has_diagonal_fixed_point() {
        let s = chain(3);
        let op = BinaryOp::skew_1(3).unwrap();
        let c = Elem::nth(2);
        let f = FiniteMultiMap::constant(3, 3, c);
        assert_eq!(enumerate_star_fixed(&s, &f, &op, 1000).unwrap(), vec![vec![c, c, c]]);
    }

    #[test]
    fn random_tables_match_recheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = chain(3);
        let op = BinaryOp::skew_1(3).unwrap();
        for _ in 0..20 {
            let f = generate::random_table(&mut rng, 3, 3);
            let fixed = enumerate_star_fixed(&s, &f, &op, 1000).unwrap();
            for u in tuples(&s.all(), 3) {
                let by_lift = apply_f_star(&f, &op, &u).unwrap() == u;
                assert_eq!(fixed.contains(&u), by_lift);
            }
        }
    }

    #[test]
    fn identity_g_reduces_to_fixed_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = chain(3);
        let op = BinaryOp::forward_cyclic(2).unwrap();
        for _ in 0..20 {
            let f = generate::random_table(&mut rng, 3, 2);
            let sets = enumerate_star_coincidence(&s, &f, &Identity, &op, 1000).unwrap();
            assert_eq!(sets.coincidence_points, enumerate_star_fixed(&s, &f, &op, 1000).unwrap());
            assert_eq!(sets.common_fixed, sets.coincidence_points);
        }
    }

    #[test]
    fn size_limit_refuses() {
        let s = chain(10);
        let op = BinaryOp::forward_cyclic(4).unwrap();
        let f = FiniteMultiMap::constant(10, 4, Elem::nth(1));
        assert!(matches!(enumerate_star_fixed(&s, &f, &op, 1000), Err(OracleError::SizeLimit { .. })));
    }

    #[test]
    fn theorem_names_parse() {
        assert_eq!("t3".parse::<Theorem>().unwrap(), Theorem::T3);
        assert!("T10".parse::<Theorem>().is_err());
    }

    #[test]
    fn small_lemma_suite_is_clean() {
        let report = lemma_suite(&LemmaConfig {
            max_n: 3,
            max_size: 3,
            trials: 10,
            sampled_cases: 200,
            seed: 1,
        });
        assert!(report.passed(), "{:#?}", report.checks.iter().filter(|c| c.violations > 0).collect::<Vec<_>>());
        assert!(report.checks.iter().all(|c| c.cases > 0), "{:#?}", report.checks);
    }

    #[test]
    fn degenerate_bound_warns() {
        let report = lemma_suite(&LemmaConfig {
            max_n: 2,
            max_size: 1,
            trials: 2,
            sampled_cases: 0,
            seed: 1,
        });
        assert!(report.passed());
        assert!(report.warnings[0].contains("degenerate bound"));
    }

    #[test]
    fn contractive_instances_pass_gates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 3] {
            for _ in 0..5 {
                let inst = generate::contractive_instance(&mut rng, n, if n == 2 { 4 } else { 3 });
                let cfg = SolveConfig::default();
                assert!(check_mixed_monotone(&inst, &cfg).unwrap().holds);
                assert!(check_contraction(&inst, &cfg).unwrap().holds);
            }
        }
    }
}
