//! Section-level domain types: state vectors observed at labeled event
//! crossings, the left/right relabeling operator, fixed points, residuals and
//! the stacked input/output datasets the section maps are fitted on.

use std::fmt;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite state vector at one section crossing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state vector".into()));
        }
        Ok(Self(values))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn from_dvector(v: &DVector<f64>) -> Result<Self> {
        Self::new(v.iter().copied().collect())
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &StateVector) -> Result<StateVector> {
        check_dim(self.len(), other.len())?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    pub fn add(&self, other: &StateVector) -> Result<StateVector> {
        check_dim(self.len(), other.len())?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<StateVector> for Vec<f64> {
    fn from(s: StateVector) -> Self {
        s.0
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Side::Left => 'L',
            Side::Right => 'R',
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s.trim() {
            "L" | "l" => Some(Side::Left),
            "R" | "r" => Some(Side::Right),
            _ => None,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// State observed at one labeled event. `k` is the 1-based event index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionSample {
    pub k: usize,
    pub time: f64,
    pub label: Side,
    pub state: StateVector,
}

/// Checks strictly increasing times, strict L/R alternation and a shared
/// dimension. Returns that dimension.
pub fn validate_sections(sections: &[SectionSample]) -> Result<usize> {
    let d = sections.first().map(|s| s.state.len()).unwrap_or(0);
    for (i, s) in sections.iter().enumerate() {
        check_dim(d, s.state.len())?;
        if i > 0 {
            let prev = &sections[i - 1];
            if !(s.time > prev.time) {
                return Err(Error::NonMonotonicTime { index: i });
            }
            if s.label == prev.label {
                return Err(Error::LabelAlternation { index: i, label: s.label });
            }
        }
    }
    Ok(d)
}

/// Signed permutation exchanging left and right coordinates:
/// `out[i] = signs[i] * s[perm[i]]`. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMirror", into = "RawMirror")]
pub struct MirrorSpec {
    perm: Vec<usize>,
    signs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMirror {
    perm: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signs: Option<Vec<f64>>,
}

impl TryFrom<RawMirror> for MirrorSpec {
    type Error = Error;

    fn try_from(raw: RawMirror) -> Result<Self> {
        match raw.signs {
            Some(signs) => MirrorSpec::new(raw.perm, signs),
            None => MirrorSpec::from_perm(raw.perm),
        }
    }
}

impl From<MirrorSpec> for RawMirror {
    fn from(m: MirrorSpec) -> Self {
        let signs = if m.signs.iter().all(|&s| s == 1.0) { None } else { Some(m.signs) };
        RawMirror { perm: m.perm, signs }
    }
}

impl MirrorSpec {
    /// Validates that the operator is an involution: `perm` is a permutation
    /// with `perm[perm[i]] == i`, signs are ±1 and `signs[i] == signs[perm[i]]`.
    pub fn new(perm: Vec<usize>, signs: Vec<f64>) -> Result<Self> {
        let d = perm.len();
        if d == 0 {
            return Err(Error::InvalidMirror("empty permutation".into()));
        }
        if signs.len() != d {
            return Err(Error::InvalidMirror(format!("{} signs for a permutation of length {d}", signs.len())));
        }
        let mut seen = vec![false; d];
        for &p in &perm {
            if p >= d || seen[p] {
                return Err(Error::InvalidMirror(format!("{perm:?} is not a permutation of 0..{d}")));
            }
            seen[p] = true;
        }
        for i in 0..d {
            if perm[perm[i]] != i {
                return Err(Error::InvalidMirror(format!("permutation is not an involution at {i}")));
            }
            if signs[i] != 1.0 && signs[i] != -1.0 {
                return Err(Error::InvalidMirror(format!("sign {} is not ±1", signs[i])));
            }
            if signs[i] != signs[perm[i]] {
                return Err(Error::InvalidMirror(format!(
                    "signs at {i} and {} differ; operator would not be an involution",
                    perm[i]
                )));
            }
        }
        Ok(Self { perm, signs })
    }

    pub fn from_perm(perm: Vec<usize>) -> Result<Self> {
        let d = perm.len();
        Self::new(perm, vec![1.0; d])
    }

    pub fn identity(d: usize) -> Self {
        Self { perm: (0..d).collect(), signs: vec![1.0; d] }
    }

    /// Block swap for states laid out as `[θ_L, θ_R, θ̇_L, θ̇_R]`, each block of
    /// `per_side` coordinates (d = 4 · per_side).
    pub fn bilateral(per_side: usize) -> Self {
        let n = per_side;
        let mut perm = Vec::with_capacity(4 * n);
        for block in [1usize, 0, 3, 2] {
            perm.extend((0..n).map(|j| block * n + j));
        }
        Self { signs: vec![1.0; perm.len()], perm }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn is_sign_free(&self) -> bool {
        self.signs.iter().all(|&s| s == 1.0)
    }

    /// Matrix form `M` with `M x = mirror(x)`. `M` is orthogonal and symmetric.
    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            m[(i, self.perm[i])] = self.signs[i];
        }
        m
    }

    pub fn apply(&self, s: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), s.len())?;
        Ok(self.perm.iter().zip(&self.signs).map(|(&p, &sg)| sg * s[p]).collect())
    }

    /// Mirrors every row of `x`, i.e. returns `x · Mᵀ`.
    pub fn apply_rows(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x.ncols())?;
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (i, (&p, &sg)) in self.perm.iter().zip(&self.signs).enumerate() {
            out.set_column(i, &(x.column(p) * sg));
        }
        Ok(out)
    }

    /// `M · A · Mᵀ`.
    pub fn conjugate(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), a.nrows())?;
        check_dim(self.dim(), a.ncols())?;
        let m = self.matrix();
        Ok(&m * a * m.transpose())
    }
}

pub fn mirror_state(s: &StateVector, m: &MirrorSpec) -> Result<StateVector> {
    Ok(StateVector(m.apply(s.as_slice())?))
}

/// Per-label mean section states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointPair {
    pub mu_l: StateVector,
    pub mu_r: StateVector,
    pub counts: (usize, usize),
}

impl FixedPointPair {
    pub fn for_side(&self, side: Side) -> &StateVector {
        match side {
            Side::Left => &self.mu_l,
            Side::Right => &self.mu_r,
        }
    }
}

pub fn estimate_fixed_points(sections: &[SectionSample]) -> Result<FixedPointPair> {
    let d = sections.first().map(|s| s.state.len()).unwrap_or(0);
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    let mut counts = [0usize; 2];
    for s in sections {
        check_dim(d, s.state.len())?;
        let slot = (s.label == Side::Right) as usize;
        counts[slot] += 1;
        for (acc, v) in sums[slot].iter_mut().zip(s.state.as_slice()) {
            *acc += v;
        }
    }
    if counts[0] == 0 {
        return Err(Error::EmptyLabelClass(Side::Left));
    }
    if counts[1] == 0 {
        return Err(Error::EmptyLabelClass(Side::Right));
    }
    let [sum_l, sum_r] = sums;
    let mean = |sum: Vec<f64>, n: usize| StateVector::new(sum.into_iter().map(|v| v / n as f64).collect());
    Ok(FixedPointPair { mu_l: mean(sum_l, counts[0])?, mu_r: mean(sum_r, counts[1])?, counts: (counts[0], counts[1]) })
}

/// `q[k] = z[k] − μ_label(k)`.
pub fn residuals(sections: &[SectionSample], fp: &FixedPointPair) -> Result<Vec<SectionSample>> {
    sections.iter().map(|s| Ok(SectionSample { state: s.state.sub(fp.for_side(s.label))?, ..s.clone() })).collect()
}

/// `‖μ_L − mirror(μ_R)‖₂`.
pub fn kinematic_asymmetry(fp: &FixedPointPair, m: &MirrorSpec) -> Result<f64> {
    let mirrored = mirror_state(&fp.mu_r, m)?;
    Ok(fp.mu_l.sub(&mirrored)?.norm())
}

/// Transition kinds: steps (one event ahead) and strides (two events ahead).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionKind {
    LR,
    RL,
    LL,
    RR,
}

impl TransitionKind {
    pub const ALL: [TransitionKind; 4] = [Self::LR, Self::RL, Self::LL, Self::RR];

    pub fn source(self) -> Side {
        match self {
            Self::LR | Self::LL => Side::Left,
            Self::RL | Self::RR => Side::Right,
        }
    }

    pub fn target(self) -> Side {
        match self {
            Self::LR | Self::RR => Side::Right,
            Self::RL | Self::LL => Side::Left,
        }
    }

    /// Events between input and output.
    pub fn lag(self) -> usize {
        if self.is_step() {
            1
        } else {
            2
        }
    }

    pub fn is_step(self) -> bool {
        matches!(self, Self::LR | Self::RL)
    }

    /// The mirrored counterpart: LR ↔ RL, LL ↔ RR.
    pub fn partner(self) -> Self {
        match self {
            Self::LR => Self::RL,
            Self::RL => Self::LR,
            Self::LL => Self::RR,
            Self::RR => Self::LL,
        }
    }
}

impl fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::LR => "LR",
            Self::RL => "RL",
            Self::LL => "LL",
            Self::RR => "RR",
        };
        f.write_str(s)
    }
}

/// Stacked input/output residuals; row `i` of `x` maps to row `i` of `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    kind: TransitionKind,
    x: DMatrix<f64>,
    y: DMatrix<f64>,
}

impl PairedDataset {
    pub fn new(kind: TransitionKind, x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::LengthMismatch { left: x.nrows(), right: y.nrows() });
        }
        check_dim(x.ncols(), y.ncols())?;
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("paired dataset".into()));
        }
        Ok(Self { kind, x, y })
    }

    pub fn kind(&self) -> TransitionKind {
        self.kind
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Applies the relabeling to every input and output row, expressing a
    /// dataset in its partner's frame.
    pub fn mirrored(&self, m: &MirrorSpec) -> Result<Self> {
        Ok(Self { kind: self.kind, x: m.apply_rows(&self.x)?, y: m.apply_rows(&self.y)? })
    }

    /// Keeps the first `n` pairs.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self { kind: self.kind, x: self.x.rows(0, n).into_owned(), y: self.y.rows(0, n).into_owned() }
    }

    pub fn select(&self, rows: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.x.select_rows(rows), self.y.select_rows(rows))
    }
}

/// Stacks residual pairs for one transition kind.
///
/// Step kinds pair each source-label event with the next event; stride kinds
/// pair it with the event two ahead. Pairs never share a sample: after a pair
/// `(i, i + lag)` the next candidate source is the first source-label event
/// after `i + lag`. A trailing source event without a successor is dropped.
pub fn build_pairs(residuals: &[SectionSample], kind: TransitionKind) -> Result<PairedDataset> {
    let d = validate_sections(residuals)?;
    let lag = kind.lag();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut i = 0;
    while i < residuals.len() {
        if residuals[i].label != kind.source() {
            i += 1;
            continue;
        }
        if i + lag >= residuals.len() {
            debug!("dropping trailing {} event k={} without a {kind} successor", residuals[i].label, residuals[i].k);
            break;
        }
        inputs.push(&residuals[i].state);
        outputs.push(&residuals[i + lag].state);
        i += lag + 1;
    }
    if inputs.is_empty() {
        return Err(Error::InsufficientPairs(kind));
    }
    let stack = |rows: &[&StateVector]| {
        DMatrix::from_row_iterator(rows.len(), d, rows.iter().flat_map(|s| s.as_slice().iter().copied()))
    };
    PairedDataset::new(kind, stack(&inputs), stack(&outputs))
}

/// The (normal, mirrored) dataset pair for the condition whose normal set is
/// `normal_kind`: the partner kind is mirrored into the normal frame and both
/// are truncated to a common length so that index `i` refers to temporally
/// corresponding transitions.
pub fn condition_datasets(
    residuals: &[SectionSample],
    normal_kind: TransitionKind,
    mirror: &MirrorSpec,
) -> Result<(PairedDataset, PairedDataset)> {
    let normal = build_pairs(residuals, normal_kind)?;
    let mirrored = build_pairs(residuals, normal_kind.partner())?.mirrored(mirror)?;
    let n = normal.len().min(mirrored.len());
    Ok((normal.truncated(n), mirrored.truncated(n)))
}
