//! JSON instance files.
//!
//! Indices are 1-based everywhere. Points of a finite carrier may be given by
//! label or by 1-based position. See `docs/instance-format.md` for the schema.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::contractions::{ContractionError, ContractionForm, ControlFunction};
use crate::index_algebra::{preset, BinaryOp, IndexError, Partition, PresetParams};
use crate::scalar::{parse_rational, Scalar};
use crate::solver::{Mode, ProblemInstance, SolveError};
use crate::spaces::{
    validate_space, Assumption, AssumptionSet, Elem, FiniteMultiMap, FiniteSelfMap, FiniteSpace, FnMultiMap, FnSelfMap,
    Identity, MultiMap, RealSpace, SelfMap, SpaceError,
};
use crate::{Exact, FiniteInstance, RealInstance};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Contraction(#[from] ContractionError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

fn invalid(msg: impl Into<String>) -> InstanceError {
    InstanceError::Invalid(msg.into())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    fn exact(&self) -> Result<Exact, InstanceError> {
        match self {
            Num::Int(i) => Ok(Exact::from_integer(*i)),
            Num::Float(x) => parse_rational(&x.to_string()).ok_or_else(|| invalid(format!("not a finite number: {x}"))),
            Num::Text(s) => parse_rational(s).ok_or_else(|| invalid(format!("not a number: `{s}`"))),
        }
    }

    fn float(&self) -> Result<f64, InstanceError> {
        match self {
            Num::Int(i) => Ok(*i as f64),
            Num::Float(x) => Ok(*x),
            Num::Text(s) => parse_rational(s)
                .map(|r| r.to_f64_lossy())
                .ok_or_else(|| invalid(format!("not a number: `{s}`"))),
        }
    }
}

/// A carrier element, by label or 1-based position.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PointRef {
    Position(usize),
    Label(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PartitionSpec {
    Named(String),
    Sets {
        #[serde(rename = "A")]
        a: Vec<usize>,
        #[serde(rename = "B")]
        b: Vec<usize>,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarSpec {
    pub preset: Option<String>,
    pub matrix: Option<Vec<Vec<usize>>>,
    pub p: Option<usize>,
    pub phis: Option<Vec<Vec<usize>>>,
    pub psis: Option<Vec<Vec<usize>>>,
    pub sigmas: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteSpec {
    pub elements: Vec<String>,
    pub dist: Vec<Vec<Num>>,
    pub leq: Vec<(PointRef, PointRef)>,
    pub subspace: Option<Vec<PointRef>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealSpec {
    #[serde(default = "one")]
    pub dim: usize,
    pub bounds: Option<(Num, Num)>,
    pub subspace: Option<(Num, Num)>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum SpaceSpec {
    Finite(FiniteSpec),
    Real(RealSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Builtin {
    pub builtin: String,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MapSpec {
    Named(String),
    Table { table: Vec<Vec<PointRef>> },
    Builtin(Builtin),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    pub alpha: Num,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum PhiSpec {
    Linear(LinearSpec),
    Builtin(String),
    Piecewise(Vec<(Num, Num)>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default)]
    pub description: Option<String>,
    pub n: usize,
    pub partition: Option<PartitionSpec>,
    pub star: StarSpec,
    pub space: SpaceSpec,
    #[serde(rename = "F")]
    pub f: MapSpec,
    pub g: Option<MapSpec>,
    pub phi: PhiSpec,
    pub contraction_form: Option<String>,
    pub weights: Option<Vec<Num>>,
    pub mode: Option<String>,
    #[serde(default)]
    pub assumptions: BTreeMap<String, bool>,
    pub initial: Option<Vec<serde_json::Value>>,
}

pub enum LoadedInstance {
    Finite(FiniteInstance),
    Real(RealInstance),
}

impl LoadedInstance {
    pub fn is_finite(&self) -> bool {
        matches!(self, LoadedInstance::Finite(_))
    }
}

pub fn load_instance(path: &Path) -> Result<LoadedInstance, InstanceError> {
    let text = std::fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_instance(&text)
}

pub fn parse_instance(text: &str) -> Result<LoadedInstance, InstanceError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| InstanceError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    build(file)
}

fn build(file: InstanceFile) -> Result<LoadedInstance, InstanceError> {
    let n = file.n;
    let (op, part) = star_and_partition(n, &file.star, file.partition.as_ref())?;
    match &file.space {
        SpaceSpec::Finite(spec) => build_finite(&file, spec, op, part).map(LoadedInstance::Finite),
        SpaceSpec::Real(spec) => build_real(&file, spec, op, part).map(LoadedInstance::Real),
    }
}

fn partition_from(n: usize, spec: &PartitionSpec) -> Result<Partition, InstanceError> {
    match spec {
        PartitionSpec::Named(name) if name == "odd-even" => Ok(Partition::odd_even(n)?),
        PartitionSpec::Named(name) => Err(invalid(format!("unknown partition `{name}`"))),
        PartitionSpec::Sets { a, b } => Ok(Partition::new(n, a, b)?),
    }
}

pub fn star_and_partition(n: usize, star: &StarSpec, part: Option<&PartitionSpec>) -> Result<(BinaryOp, Partition), InstanceError> {
    let part = part.map(|p| partition_from(n, p)).transpose()?;
    match (&star.preset, &star.matrix) {
        (Some(name), None) => {
            let params = PresetParams {
                p: star.p,
                phis: star.phis.clone(),
                psis: star.psis.clone(),
                sigmas: star.sigmas.clone(),
                partition: part,
            };
            Ok(preset(name, n, &params)?)
        }
        (None, Some(rows)) => {
            let op = BinaryOp::from_rows(n, rows)?;
            let part = match part {
                Some(p) => p,
                None => Partition::odd_even(n)?,
            };
            Ok((op, part))
        }
        _ => Err(invalid("star needs exactly one of `preset` or `matrix`")),
    }
}

fn resolve(space: &FiniteSpace<Exact>, r: &PointRef) -> Result<Elem, InstanceError> {
    match r {
        PointRef::Position(i) if (1..=space.size()).contains(i) => Ok(Elem::nth(*i)),
        PointRef::Position(i) => Err(invalid(format!("element position {i} outside 1..={}", space.size()))),
        PointRef::Label(l) => space.elem(l).ok_or_else(|| invalid(format!("unknown element `{l}`"))),
    }
}

fn resolve_value(space: &FiniteSpace<Exact>, v: &serde_json::Value) -> Result<Elem, InstanceError> {
    let r: PointRef = serde_json::from_value(v.clone()).map_err(|_| invalid(format!("not an element reference: {v}")))?;
    resolve(space, &r)
}

fn finite_space(spec: &FiniteSpec) -> Result<FiniteSpace<Exact>, InstanceError> {
    let size = spec.elements.len();
    if size == 0 {
        return Err(invalid("finite space has no elements"));
    }
    if spec.dist.len() != size || spec.dist.iter().any(|r| r.len() != size) {
        return Err(invalid(format!("dist must be a {size}x{size} table")));
    }
    let dist = spec
        .dist
        .iter()
        .map(|row| row.iter().map(Num::exact).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let probe = FiniteSpace::new(spec.elements.clone(), dist.clone(), &[])?;
    let mut pairs: Vec<(usize, usize)> = (1..=size).map(|i| (i, i)).collect();
    for (x, y) in &spec.leq {
        pairs.push((resolve(&probe, x)?.position(), resolve(&probe, y)?.position()));
    }
    let space = FiniteSpace::new(spec.elements.clone(), dist, &pairs)?;
    let report = validate_space(&space);
    if !report.is_valid() {
        let list: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(invalid(format!("space axioms fail: {}", list.join("; "))));
    }
    Ok(space)
}

fn finite_f(space: &FiniteSpace<Exact>, n: usize, spec: &MapSpec) -> Result<FiniteMultiMap, InstanceError> {
    match spec {
        MapSpec::Table { table } => {
            let mut entries = Vec::with_capacity(table.len());
            for (k, row) in table.iter().enumerate() {
                if row.len() != n + 1 {
                    return Err(invalid(format!("F table row {} has {} entries, expected {}", k + 1, row.len(), n + 1)));
                }
                let args = row[..n].iter().map(|r| resolve(space, r)).collect::<Result<Vec<_>, _>>()?;
                entries.push((args, resolve(space, &row[n])?));
            }
            let f = FiniteMultiMap::from_entries(space.size(), n, &entries)?;
            if !f.is_total() {
                return Err(invalid(format!("F table covers {} of {} tuples", entries.len(), space.size().pow(n as u32))));
            }
            Ok(f)
        }
        MapSpec::Builtin(b) if b.builtin == "constant" => {
            let c = b.params.get("c").ok_or_else(|| invalid("constant F needs params.c"))?;
            Ok(FiniteMultiMap::constant(space.size(), n, resolve_value(space, c)?))
        }
        MapSpec::Builtin(b) => Err(invalid(format!("builtin F `{}` is not available on a finite space", b.builtin))),
        MapSpec::Named(s) => Err(invalid(format!("F must be a table or builtin, got `{s}`"))),
    }
}

fn finite_g(space: &FiniteSpace<Exact>, spec: Option<&MapSpec>) -> Result<Box<dyn SelfMap<Elem>>, InstanceError> {
    match spec {
        None => Ok(Box::new(Identity)),
        Some(MapSpec::Named(s)) if s == "identity" => Ok(Box::new(Identity)),
        Some(MapSpec::Table { table }) => {
            let mut images = vec![None; space.size()];
            for (k, row) in table.iter().enumerate() {
                if row.len() != 2 {
                    return Err(invalid(format!("g table row {} must be [x, g(x)]", k + 1)));
                }
                let x = resolve(space, &row[0])?;
                images[x.position() - 1] = Some(resolve(space, &row[1])?.position());
            }
            let images: Vec<usize> = images
                .iter()
                .enumerate()
                .map(|(i, v)| v.ok_or_else(|| invalid(format!("g table has no entry for `{}`", space.labels()[i]))))
                .collect::<Result<_, _>>()?;
            let g = FiniteSelfMap::from_positions(&images)?;
            if images.iter().enumerate().all(|(i, &v)| v == i + 1) {
                return Ok(Box::new(Identity));
            }
            Ok(Box::new(g))
        }
        Some(other) => Err(invalid(format!("g on a finite space must be `identity` or a table, got {other:?}"))),
    }
}

fn phi_from<T: Scalar>(spec: &PhiSpec, num: impl Fn(&Num) -> Result<T, InstanceError>) -> Result<ControlFunction<T>, InstanceError> {
    match spec {
        PhiSpec::Linear(l) => Ok(ControlFunction::linear(num(&l.alpha)?)?),
        PhiSpec::Builtin(name) => match name.as_str() {
            "t/(1+t)" | "rational" => Ok(ControlFunction::rational()),
            "t-t^2/2" | "clamped-quadratic" => Ok(ControlFunction::clamped_quadratic()),
            other => Err(invalid(format!("unknown builtin phi `{other}`"))),
        },
        PhiSpec::Piecewise(pieces) => {
            let pieces = pieces.iter().map(|(b, a)| Ok((num(b)?, num(a)?))).collect::<Result<Vec<_>, InstanceError>>()?;
            Ok(ControlFunction::piecewise(pieces)?)
        }
    }
}

fn form_from<T: Scalar>(
    name: Option<&str>,
    weights: Option<&[Num]>,
    n: usize,
    num: impl Fn(&Num) -> Result<T, InstanceError>,
) -> Result<ContractionForm<T>, InstanceError> {
    match name.unwrap_or("sum") {
        "sum" => Ok(ContractionForm::Sum),
        "max" => Ok(ContractionForm::Max),
        "pointwise-sum" => Ok(ContractionForm::PointwiseSum),
        "pointwise-max" => Ok(ContractionForm::PointwiseMax),
        "weighted-linear" => {
            let w = weights.ok_or_else(|| invalid("weighted-linear form needs `weights`"))?;
            if w.len() != n {
                return Err(invalid(format!("weights has {} entries, expected {n}", w.len())));
            }
            Ok(ContractionForm::weighted(w.iter().map(num).collect::<Result<_, _>>()?)?)
        }
        other => Err(invalid(format!("unknown contraction_form `{other}`"))),
    }
}

fn mode_from(name: &str) -> Result<Mode, InstanceError> {
    match name {
        "compatible" => Ok(Mode::Compatible),
        "range" => Ok(Mode::Range),
        "fixed-point" => Ok(Mode::FixedPoint),
        other => Err(invalid(format!("unknown mode `{other}`"))),
    }
}

fn assumptions_from(map: &BTreeMap<String, bool>) -> Result<AssumptionSet, InstanceError> {
    let mut set = AssumptionSet::new();
    for (k, v) in map {
        let a = Assumption::from_key(k).ok_or_else(|| invalid(format!("unknown assumption `{k}`")))?;
        set.declare(a, *v);
    }
    Ok(set)
}

fn finish<S: crate::OrderedMetricSpace>(
    mut inst: ProblemInstance<S>,
    file: &InstanceFile,
    num: impl Fn(&Num) -> Result<S::Scalar, InstanceError>,
) -> Result<ProblemInstance<S>, InstanceError> {
    inst = inst.with_form(form_from(file.contraction_form.as_deref(), file.weights.as_deref(), file.n, num)?);
    if let Some(m) = &file.mode {
        inst = inst.with_mode(mode_from(m)?)?;
    }
    Ok(inst.with_assumptions(assumptions_from(&file.assumptions)?))
}

fn build_finite(file: &InstanceFile, spec: &FiniteSpec, op: BinaryOp, part: Partition) -> Result<FiniteInstance, InstanceError> {
    let space = finite_space(spec)?;
    let f = finite_f(&space, file.n, &file.f)?;
    let g = finite_g(&space, file.g.as_ref())?;
    let phi = phi_from(&file.phi, Num::exact)?;
    let subspace = spec
        .subspace
        .as_ref()
        .map(|e| e.iter().map(|r| resolve(&space, r)).collect::<Result<Vec<_>, _>>())
        .transpose()?;
    let initial = file
        .initial
        .as_ref()
        .map(|u| u.iter().map(|v| resolve_value(&space, v)).collect::<Result<Vec<_>, _>>())
        .transpose()?;
    let mut inst = finish(ProblemInstance::new(space, Box::new(f), g, op, part, phi)?, file, Num::exact)?;
    if let Some(e) = subspace {
        inst = inst.with_subspace(e);
    }
    if let Some(u) = initial {
        if u.len() != file.n {
            return Err(invalid(format!("initial tuple has {} entries, expected {}", u.len(), file.n)));
        }
        inst = inst.with_initial(u);
    }
    Ok(inst)
}

fn param(b: &Builtin, key: &str) -> Result<serde_json::Value, InstanceError> {
    b.params.get(key).cloned().ok_or_else(|| invalid(format!("builtin `{}` needs params.{key}", b.builtin)))
}

fn param_num(b: &Builtin, key: &str) -> Result<f64, InstanceError> {
    let v: Num = serde_json::from_value(param(b, key)?).map_err(|e| invalid(e.to_string()))?;
    v.float()
}

fn real_f(n: usize, spec: &MapSpec) -> Result<Box<dyn MultiMap<f64>>, InstanceError> {
    let MapSpec::Builtin(b) = spec else {
        return Err(invalid("F on a real space must be a builtin"));
    };
    match b.builtin.as_str() {
        "affine" => {
            let c = if b.params.contains_key("c") { param_num(b, "c")? } else { 0.0 };
            let coeffs: Vec<Num> = serde_json::from_value(param(b, "coeffs")?).map_err(|e| invalid(e.to_string()))?;
            let coeffs = coeffs.iter().map(Num::float).collect::<Result<Vec<_>, _>>()?;
            if coeffs.len() != n {
                return Err(invalid(format!("affine F needs {n} coeffs, got {}", coeffs.len())));
            }
            Ok(Box::new(FnMultiMap::new(n, move |x: &[f64]| {
                c + coeffs.iter().zip(x).map(|(a, xi)| a * xi).sum::<f64>()
            })))
        }
        "constant" => {
            let c = param_num(b, "c")?;
            Ok(Box::new(FnMultiMap::new(n, move |_: &[f64]| c)))
        }
        other => Err(invalid(format!("unknown builtin F `{other}`"))),
    }
}

fn real_g(spec: Option<&MapSpec>) -> Result<Box<dyn SelfMap<f64>>, InstanceError> {
    match spec {
        None => Ok(Box::new(Identity)),
        Some(MapSpec::Named(s)) if s == "identity" => Ok(Box::new(Identity)),
        Some(MapSpec::Builtin(b)) if b.builtin == "affine" => {
            let a = param_num(b, "a")?;
            let c = if b.params.contains_key("b") { param_num(b, "b")? } else { 0.0 };
            if a == 0.0 {
                return Err(invalid("affine g needs a nonzero slope"));
            }
            Ok(Box::new(FnSelfMap::with_inverse(move |x: f64| a * x + c, move |y: f64| (y - c) / a)))
        }
        Some(other) => Err(invalid(format!("g on a real space must be `identity` or builtin affine, got {other:?}"))),
    }
}

fn build_real(file: &InstanceFile, spec: &RealSpec, op: BinaryOp, part: Partition) -> Result<RealInstance, InstanceError> {
    if spec.dim != 1 {
        return Err(invalid(format!("real spaces of dimension {} are not supported; use dim = 1", spec.dim)));
    }
    let space = match &spec.bounds {
        Some((lo, hi)) => RealSpace::interval(lo.float()?, hi.float()?)?,
        None => RealSpace::line(),
    };
    let f = real_f(file.n, &file.f)?;
    let g = real_g(file.g.as_ref())?;
    let phi = phi_from(&file.phi, Num::float)?;
    let mut inst = finish(ProblemInstance::new(space, f, g, op, part, phi)?, file, Num::float)?;
    if spec.subspace.is_some() {
        return Err(invalid("a real subspace E cannot be represented as a point list; omit it"));
    }
    if let Some(u) = &file.initial {
        let u = u
            .iter()
            .map(|v| serde_json::from_value::<Num>(v.clone()).map_err(|e| invalid(e.to_string()))?.float())
            .collect::<Result<Vec<_>, _>>()?;
        if u.len() != file.n {
            return Err(invalid(format!("initial tuple has {} entries, expected {}", u.len(), file.n)));
        }
        inst = inst.with_initial(u);
    }
    Ok(inst)
}
