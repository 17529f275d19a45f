//! Operator-sum representations of linear and Hermitian maps, their Choi
//! matrices, and classification into linear / Hermitian / CP.
//!
//! A linear map acts as `rho -> sum_a E_a rho E'_a^dag`. A Hermitian map is the
//! special case `rho -> sum_a c_a K_a rho K_a^dag` with real weights `c_a`.
//! Operation elements are only defined up to a gauge, so two maps are compared
//! by their action on the matrix units `|i><j|` and never by element lists.
//!
//! The Choi matrix is unnormalized: `(I (x) Phi)[sum_ij |i><j| (x) |i><j|]`,
//! i.e. block `(i, j)` is `Phi(|i><j|)` and the identity map has trace `n`.

use nalgebra::DVector;

use crate::error::{shape_err, Error, Result};
use crate::numerics::{
    self, eigh, ensure_square, hermiticity_residual, identity, matrix_unit, max_abs,
    max_abs_diff, pauli, rank_cutoff, re, svd, CMatrix, C64, EPS_HERM,
};

/// Anything that acts linearly on `dim_in x dim_in` matrices.
pub trait QuantumMap {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn apply(&self, rho: &CMatrix) -> Result<CMatrix>;
    fn to_linear(&self) -> LinearMapRep;
}

fn check_input(rho: &CMatrix, dim_in: usize) -> Result<()> {
    if rho.shape() != (dim_in, dim_in) {
        return shape_err(format!(
            "map expects a {dim_in}x{dim_in} input, got {}x{}",
            rho.nrows(),
            rho.ncols()
        ));
    }
    Ok(())
}

/// `rho -> sum_a E_a rho E'_a^dag`, with every `E_a` and `E'_a` of shape
/// `dim_out x dim_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMapRep {
    dim_in: usize,
    dim_out: usize,
    elements: Vec<(CMatrix, CMatrix)>,
}

impl LinearMapRep {
    pub fn new(dim_in: usize, dim_out: usize, elements: Vec<(CMatrix, CMatrix)>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidInput("a linear map needs at least one element pair".into()));
        }
        for (idx, (e, ep)) in elements.iter().enumerate() {
            if e.shape() != (dim_out, dim_in) || ep.shape() != (dim_out, dim_in) {
                return shape_err(format!(
                    "element pair {idx} has shapes {:?}/{:?}, expected ({dim_out}, {dim_in})",
                    e.shape(),
                    ep.shape()
                ));
            }
            numerics::ensure_finite(e)?;
            numerics::ensure_finite(ep)?;
        }
        Ok(Self { dim_in, dim_out, elements })
    }

    /// The map that sends everything to zero.
    pub fn zero(dim_in: usize, dim_out: usize) -> Self {
        let z = CMatrix::zeros(dim_out, dim_in);
        Self { dim_in, dim_out, elements: vec![(z.clone(), z)] }
    }

    pub fn identity(n: usize) -> Self {
        Self { dim_in: n, dim_out: n, elements: vec![(identity(n), identity(n))] }
    }

    pub fn elements(&self) -> &[(CMatrix, CMatrix)] {
        &self.elements
    }

    pub fn left(&self) -> impl Iterator<Item = &CMatrix> {
        self.elements.iter().map(|(e, _)| e)
    }

    pub fn right(&self) -> impl Iterator<Item = &CMatrix> {
        self.elements.iter().map(|(_, e)| e)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

impl QuantumMap for LinearMapRep {
    fn dim_in(&self) -> usize {
        self.dim_in
    }

    fn dim_out(&self) -> usize {
        self.dim_out
    }

    fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        check_input(rho, self.dim_in)?;
        let mut out = CMatrix::zeros(self.dim_out, self.dim_out);
        for (e, ep) in &self.elements {
            out += e * rho * ep.adjoint();
        }
        Ok(out)
    }

    fn to_linear(&self) -> LinearMapRep {
        self.clone()
    }
}

/// One real-weighted term `c K rho K^dag`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianTerm {
    pub weight: f64,
    pub op: CMatrix,
}

/// `rho -> sum_a c_a K_a rho K_a^dag` with real `c_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMapRep {
    dim_in: usize,
    dim_out: usize,
    terms: Vec<HermitianTerm>,
}

impl HermitianMapRep {
    /// Terms with zero weight are dropped; an empty term list is the zero map.
    pub fn new(dim_in: usize, dim_out: usize, terms: Vec<(f64, CMatrix)>) -> Result<Self> {
        let mut kept = Vec::with_capacity(terms.len());
        for (idx, (w, k)) in terms.into_iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::InvalidInput(format!("term {idx} has non-finite weight")));
            }
            if k.shape() != (dim_out, dim_in) {
                return shape_err(format!(
                    "term {idx} has shape {:?}, expected ({dim_out}, {dim_in})",
                    k.shape()
                ));
            }
            numerics::ensure_finite(&k)?;
            if w != 0.0 {
                kept.push(HermitianTerm { weight: w, op: k });
            }
        }
        Ok(Self { dim_in, dim_out, terms: kept })
    }

    pub fn square(dim: usize, terms: Vec<(f64, CMatrix)>) -> Result<Self> {
        Self::new(dim, dim, terms)
    }

    pub fn terms(&self) -> &[HermitianTerm] {
        &self.terms
    }

    pub fn weights(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.weight).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Same map with every operator rescaled to `||K||_F^2 = dim_in` and the
    /// scale moved into the weight, so e.g. the Pauli expansion reads
    /// `{(c0, I), (c1, Z)}`.
    pub fn with_unitary_scale(&self) -> Self {
        let target = self.dim_in as f64;
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let f2 = t.op.norm_squared();
                if f2 == 0.0 {
                    return t.clone();
                }
                let s = (target / f2).sqrt();
                HermitianTerm { weight: t.weight / (s * s), op: &t.op * re(s) }
            })
            .collect();
        Self { dim_in: self.dim_in, dim_out: self.dim_out, terms }
    }

    /// Weight of the term whose operator is proportional to `op`, after
    /// rescaling both to unit Frobenius norm; `None` when no term matches.
    pub fn weight_along(&self, op: &CMatrix) -> Option<f64> {
        let target = op / re(op.norm());
        self.terms.iter().find_map(|t| {
            let f = t.op.norm();
            let overlap = target.dotc(&t.op) / re(f);
            (overlap.norm() > 1.0 - 1e-9).then(|| t.weight * f * f / op.norm_squared())
        })
    }
}

impl QuantumMap for HermitianMapRep {
    fn dim_in(&self) -> usize {
        self.dim_in
    }

    fn dim_out(&self) -> usize {
        self.dim_out
    }

    fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        check_input(rho, self.dim_in)?;
        let mut out = CMatrix::zeros(self.dim_out, self.dim_out);
        for t in &self.terms {
            out += &t.op * rho * t.op.adjoint() * re(t.weight);
        }
        Ok(out)
    }

    /// `E = sqrt|c| K`, `E' = sign(c) sqrt|c| K`.
    fn to_linear(&self) -> LinearMapRep {
        if self.terms.is_empty() {
            return LinearMapRep::zero(self.dim_in, self.dim_out);
        }
        let elements = self
            .terms
            .iter()
            .map(|t| {
                let s = t.weight.abs().sqrt();
                let e = &t.op * re(s);
                let ep = &e * re(t.weight.signum());
                (e, ep)
            })
            .collect();
        LinearMapRep { dim_in: self.dim_in, dim_out: self.dim_out, elements }
    }
}

/// Either representation, as read from a map file.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyMap {
    Linear(LinearMapRep),
    Hermitian(HermitianMapRep),
}

impl AnyMap {
    pub fn as_map(&self) -> &dyn QuantumMap {
        match self {
            AnyMap::Linear(m) => m,
            AnyMap::Hermitian(m) => m,
        }
    }
}

impl QuantumMap for AnyMap {
    fn dim_in(&self) -> usize {
        self.as_map().dim_in()
    }
    fn dim_out(&self) -> usize {
        self.as_map().dim_out()
    }
    fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.as_map().apply(rho)
    }
    fn to_linear(&self) -> LinearMapRep {
        self.as_map().to_linear()
    }
}

impl From<LinearMapRep> for AnyMap {
    fn from(m: LinearMapRep) -> Self {
        AnyMap::Linear(m)
    }
}

impl From<HermitianMapRep> for AnyMap {
    fn from(m: HermitianMapRep) -> Self {
        AnyMap::Hermitian(m)
    }
}

/// Largest entrywise deviation between the actions of two maps on the
/// matrix units `|i><j|`.
pub fn action_deviation<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: QuantumMap + ?Sized,
    B: QuantumMap + ?Sized,
{
    if a.dim_in() != b.dim_in() || a.dim_out() != b.dim_out() {
        return shape_err("maps have different dimensions");
    }
    let n = a.dim_in();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let unit = matrix_unit(n, i, j);
            worst = worst.max(max_abs_diff(&a.apply(&unit)?, &b.apply(&unit)?));
        }
    }
    Ok(worst)
}

/// `Phi_2 o Phi_1`: element pairs are all products `(E2 E1, E2' E1')`.
pub fn compose<A, B>(second: &A, first: &B) -> Result<LinearMapRep>
where
    A: QuantumMap + ?Sized,
    B: QuantumMap + ?Sized,
{
    if first.dim_out() != second.dim_in() {
        return shape_err(format!(
            "cannot compose: first map outputs dim {}, second expects {}",
            first.dim_out(),
            second.dim_in()
        ));
    }
    let (l2, l1) = (second.to_linear(), first.to_linear());
    let elements = l2
        .elements
        .iter()
        .flat_map(|(e2, f2)| l1.elements.iter().map(move |(e1, f1)| (e2 * e1, f2 * f1)))
        .collect();
    LinearMapRep::new(first.dim_in(), second.dim_out(), elements)
}

/// Trace preservation of `sum_a E'_a^dag E_a = I`, with the max-entry residual.
pub fn is_trace_preserving<M: QuantumMap + ?Sized>(map: &M) -> Result<(bool, f64)> {
    if map.dim_in() != map.dim_out() {
        return shape_err("trace preservation needs dim_in = dim_out");
    }
    let lin = map.to_linear();
    let mut sum = CMatrix::zeros(map.dim_in(), map.dim_in());
    for (e, ep) in &lin.elements {
        sum += ep.adjoint() * e;
    }
    let residual = max_abs_diff(&sum, &identity(map.dim_in()));
    Ok((residual <= 1e-10, residual))
}

/// Choi matrix `(I (x) Phi)[M~]`, an `n x n` array of `m x m` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    dim_in: usize,
    dim_out: usize,
    matrix: CMatrix,
}

impl ChoiMatrix {
    pub fn new(dim_in: usize, dim_out: usize, matrix: CMatrix) -> Result<Self> {
        let size = dim_in * dim_out;
        if matrix.shape() != (size, size) {
            return shape_err(format!(
                "Choi matrix for dims ({dim_in}, {dim_out}) must be {size}x{size}"
            ));
        }
        numerics::ensure_finite(&matrix)?;
        Ok(Self { dim_in, dim_out, matrix })
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Block `(i, j)`, equal to `Phi(|i><j|)`.
    pub fn block(&self, i: usize, j: usize) -> CMatrix {
        let m = self.dim_out;
        self.matrix.view((i * m, j * m), (m, m)).into_owned()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        hermiticity_residual(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(eigh(&self.matrix)?.values)
    }
}

impl QuantumMap for ChoiMatrix {
    fn dim_in(&self) -> usize {
        self.dim_in
    }

    fn dim_out(&self) -> usize {
        self.dim_out
    }

    fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        check_input(rho, self.dim_in)?;
        let mut out = CMatrix::zeros(self.dim_out, self.dim_out);
        for i in 0..self.dim_in {
            for j in 0..self.dim_in {
                if rho[(i, j)] != C64::new(0.0, 0.0) {
                    out += self.block(i, j) * rho[(i, j)];
                }
            }
        }
        Ok(out)
    }

    fn to_linear(&self) -> LinearMapRep {
        from_choi_linear(self)
    }
}

pub fn choi<M: QuantumMap + ?Sized>(map: &M) -> ChoiMatrix {
    let (n, m) = (map.dim_in(), map.dim_out());
    let mut matrix = CMatrix::zeros(n * m, n * m);
    for i in 0..n {
        for j in 0..n {
            let block = map
                .apply(&matrix_unit(n, i, j))
                .expect("matrix unit has the map's input shape");
            matrix.view_mut((i * m, j * m), (m, m)).copy_from(&block);
        }
    }
    ChoiMatrix { dim_in: n, dim_out: m, matrix }
}

/// `E[r, i] = v[i * m + r]`: segment `i` of the vector becomes column `i`.
fn unstack(v: &DVector<C64>, dim_in: usize, dim_out: usize) -> CMatrix {
    CMatrix::from_fn(dim_out, dim_in, |r, i| v[i * dim_out + r])
}

/// Element pairs from the SVD `C = sum s_a |u_a><v_a|`, with
/// `E_a = sqrt(s_a) unstack(u_a)` and `E'_a = sqrt(s_a) unstack(v_a)`.
pub fn from_choi_linear(choi: &ChoiMatrix) -> LinearMapRep {
    let (n, m) = (choi.dim_in, choi.dim_out);
    let dec = svd(&choi.matrix).expect("Choi matrix entries are finite");
    let cut = rank_cutoff(dec.sigma.iter().copied());
    let v = dec.v_dag.adjoint();
    let elements: Vec<(CMatrix, CMatrix)> = dec
        .sigma
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > cut)
        .map(|(k, &s)| {
            let root = re(s.sqrt());
            let e = unstack(&dec.u.column(k).into_owned(), n, m) * root;
            let ep = unstack(&v.column(k).into_owned(), n, m) * root;
            (e, ep)
        })
        .collect();
    if elements.is_empty() {
        return LinearMapRep::zero(n, m);
    }
    LinearMapRep { dim_in: n, dim_out: m, elements }
}

/// Eigendecomposition route for Hermitian Choi matrices: `K_a` is the
/// unstacked unit eigenvector and `c_a` its eigenvalue.
pub fn from_choi_hermitian(choi: &ChoiMatrix) -> Result<HermitianMapRep> {
    let (n, m) = (choi.dim_in, choi.dim_out);
    let dec = eigh(&choi.matrix)?;
    let cut = rank_cutoff(dec.values.iter().copied());
    let terms = dec
        .values
        .iter()
        .enumerate()
        .filter(|(_, &w)| w.abs() > cut)
        .map(|(k, &w)| (w, unstack(&dec.vectors.column(k).into_owned(), n, m)))
        .collect();
    HermitianMapRep::new(n, m, terms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapClass {
    Linear,
    Hermitian,
    Cp,
}

impl std::fmt::Display for MapClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MapClass::Linear => "linear",
            MapClass::Hermitian => "hermitian",
            MapClass::Cp => "cp",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: MapClass,
    /// Max entrywise `|C - C^dag|` of the Choi matrix.
    pub asymmetry: f64,
    /// Smallest Choi eigenvalue, when the Choi matrix is Hermitian.
    pub min_eigenvalue: Option<f64>,
}

impl Classification {
    pub fn is_hermitian(&self) -> bool {
        self.class != MapClass::Linear
    }

    pub fn is_cp(&self) -> bool {
        self.class == MapClass::Cp
    }

    /// The violating quantity: the negative Choi eigenvalue for Hermitian
    /// non-CP maps, the asymmetry residual for non-Hermitian maps.
    pub fn witness(&self) -> Option<f64> {
        match self.class {
            MapClass::Cp => None,
            MapClass::Hermitian => self.min_eigenvalue,
            MapClass::Linear => Some(self.asymmetry),
        }
    }

    pub fn describe(&self) -> String {
        match self.class {
            MapClass::Cp => "cp".into(),
            MapClass::Hermitian => format!(
                "hermitian (not cp), witness eigenvalue {:.12}",
                self.min_eigenvalue.unwrap_or(f64::NAN)
            ),
            MapClass::Linear => {
                format!("linear (not hermitian), witness asymmetry {:.12}", self.asymmetry)
            }
        }
    }
}

pub fn classify<M: QuantumMap + ?Sized>(map: &M) -> Classification {
    classify_choi(&choi(map))
}

pub fn classify_choi(c: &ChoiMatrix) -> Classification {
    let asymmetry = c.hermiticity_residual();
    if asymmetry > EPS_HERM {
        return Classification { class: MapClass::Linear, asymmetry, min_eigenvalue: None };
    }
    let values = c.eigenvalues().expect("Hermitian within tolerance");
    let min = *values.last().expect("non-empty spectrum");
    let cut = rank_cutoff(values.iter().copied());
    let class = if min >= -cut { MapClass::Cp } else { MapClass::Hermitian };
    Classification { class, asymmetry, min_eigenvalue: Some(min) }
}

/// Split a Hermitian map into `Phi+ - Phi-` with both parts CP, using the
/// sign of the Choi spectrum.
pub fn cp_difference(map: &HermitianMapRep) -> Result<(HermitianMapRep, HermitianMapRep)> {
    let canonical = from_choi_hermitian(&choi(map))?;
    let (mut plus, mut minus) = (Vec::new(), Vec::new());
    for t in canonical.terms {
        if t.weight > 0.0 {
            plus.push((t.weight, t.op));
        } else {
            minus.push((-t.weight, t.op));
        }
    }
    Ok((
        HermitianMapRep::new(map.dim_in, map.dim_out, plus)?,
        HermitianMapRep::new(map.dim_in, map.dim_out, minus)?,
    ))
}

/// Matrix `S` with `vec(Phi(rho)) = S vec(rho)` for row-major `vec`.
pub fn superoperator<M: QuantumMap + ?Sized>(map: &M) -> CMatrix {
    let (n, m) = (map.dim_in(), map.dim_out());
    let mut s = CMatrix::zeros(m * m, n * n);
    for i in 0..n {
        for j in 0..n {
            let out = map.apply(&matrix_unit(n, i, j)).expect("matrix unit has input shape");
            for r in 0..m {
                for c in 0..m {
                    s[(r * m + c, i * n + j)] = out[(r, c)];
                }
            }
        }
    }
    s
}

#[derive(Debug, Clone)]
pub struct Inverse {
    pub map: LinearMapRep,
    /// `sigma_max / sigma_min` of the superoperator.
    pub condition: f64,
}

/// Inverse map obtained by inverting the superoperator and converting back
/// through the Choi matrix.
pub fn invert<M: QuantumMap + ?Sized>(map: &M) -> Result<Inverse> {
    if map.dim_in() != map.dim_out() {
        return shape_err("only maps with dim_in = dim_out can be inverted");
    }
    let n = map.dim_in();
    let s = superoperator(map);
    let dec = svd(&s)?;
    let (smax, smin) = (dec.sigma[0], *dec.sigma.last().expect("non-empty"));
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if ratio <= 1e-12 {
        return Err(Error::NotInvertible { ratio });
    }
    let inv_sigma = CMatrix::from_diagonal(&DVector::from_iterator(
        dec.sigma.len(),
        dec.sigma.iter().map(|&x| re(1.0 / x)),
    ));
    let s_inv = dec.v_dag.adjoint() * inv_sigma * dec.u.adjoint();
    let mut cm = CMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let col = s_inv.column(i * n + j);
            for r in 0..n {
                for c in 0..n {
                    cm[(i * n + r, j * n + c)] = col[r * n + c];
                }
            }
        }
    }
    let c = ChoiMatrix { dim_in: n, dim_out: n, matrix: cm };
    Ok(Inverse { map: from_choi_linear(&c), condition: 1.0 / ratio })
}

/// Named builders for the maps used throughout the examples and tests.
#[derive(Debug, Clone, PartialEq)]
pub enum StandardMap {
    Identity { dim: usize },
    Unitary(CMatrix),
    /// `(1-p) rho + p Z rho Z`.
    PhaseFlip { p: f64 },
    /// Inverse of the phase flip: `c0 rho + c1 Z rho Z`, `c1 = p/(2p-1)`.
    InversePhaseFlip { p: f64 },
    /// Single-flip three-qubit bit flip: `(1-3p) rho + p sum_n X_n rho X_n`.
    BitFlip3q { p: f64 },
    /// `c0 rho + c1 sum_n X_n rho X_n` with `c0 = 1 - 3 c1` and `c0 c1 < 0`.
    InverseBitFlip3q { c1: f64 },
    /// Qubit depolarizing: `(1-p) rho + (p/3)(X rho X + Y rho Y + Z rho Z)`.
    Depolarizing { p: f64 },
}

pub const STANDARD_MAP_NAMES: [&str; 7] = [
    "identity",
    "unitary",
    "phase_flip",
    "inverse_phase_flip",
    "bit_flip_3q",
    "inverse_bit_flip_3q",
    "depolarizing",
];

fn probability(p: f64, max: f64) -> Result<f64> {
    if (0.0..=max).contains(&p) {
        Ok(p)
    } else {
        Err(Error::InvalidInput(format!("parameter {p} outside [0, {max}]")))
    }
}

impl StandardMap {
    /// Look a builder up by name. `unitary` takes its matrix from `matrix`;
    /// `identity` reads an optional dimension (default 2) from `params`.
    pub fn from_name(name: &str, params: &[f64], matrix: Option<&CMatrix>) -> Result<Self> {
        let first = || {
            params
                .first()
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("{name} needs a parameter")))
        };
        Ok(match name {
            "identity" => {
                let dim = params.first().map_or(2.0, |&d| d);
                if dim < 1.0 || dim.fract() != 0.0 {
                    return Err(Error::InvalidInput(format!("bad identity dimension {dim}")));
                }
                StandardMap::Identity { dim: dim as usize }
            }
            "unitary" => StandardMap::Unitary(
                matrix
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput("unitary needs a matrix".into()))?,
            ),
            "phase_flip" => StandardMap::PhaseFlip { p: first()? },
            "inverse_phase_flip" => StandardMap::InversePhaseFlip { p: first()? },
            "bit_flip_3q" => StandardMap::BitFlip3q { p: first()? },
            "inverse_bit_flip_3q" => StandardMap::InverseBitFlip3q { c1: first()? },
            "depolarizing" => StandardMap::Depolarizing { p: first()? },
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown map `{other}`, expected one of {STANDARD_MAP_NAMES:?}"
                )))
            }
        })
    }

    pub fn build(&self) -> Result<HermitianMapRep> {
        match *self {
            StandardMap::Identity { dim } => HermitianMapRep::square(dim, vec![(1.0, identity(dim))]),
            StandardMap::Unitary(ref u) => {
                let n = ensure_square(u, "unitary")?;
                let dev = max_abs_diff(&(u.adjoint() * u), &identity(n));
                if dev > 1e-10 {
                    return Err(Error::InvalidInput(format!("matrix is not unitary ({dev:.3e})")));
                }
                HermitianMapRep::square(n, vec![(1.0, u.clone())])
            }
            StandardMap::PhaseFlip { p } => {
                let p = probability(p, 1.0)?;
                HermitianMapRep::square(2, vec![(1.0 - p, identity(2)), (p, pauli::z())])
            }
            StandardMap::InversePhaseFlip { p } => {
                let p = probability(p, 1.0)?;
                if (2.0 * p - 1.0).abs() < 1e-12 {
                    return Err(Error::NotInvertible { ratio: 0.0 });
                }
                let c1 = p / (2.0 * p - 1.0);
                HermitianMapRep::square(2, vec![(1.0 - c1, identity(2)), (c1, pauli::z())])
            }
            StandardMap::BitFlip3q { p } => {
                let p = probability(p, 1.0 / 3.0)?;
                bit_flip_family(1.0 - 3.0 * p, p)
            }
            StandardMap::InverseBitFlip3q { c1 } => {
                let c0 = 1.0 - 3.0 * c1;
                if (c0 * c1).is_nan() || c0 * c1 >= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "inverse bit flip needs opposite-sign weights, got c0 = {c0}, c1 = {c1}"
                    )));
                }
                bit_flip_family(c0, c1)
            }
            StandardMap::Depolarizing { p } => {
                let p = probability(p, 1.0)?;
                HermitianMapRep::square(
                    2,
                    vec![
                        (1.0 - p, identity(2)),
                        (p / 3.0, pauli::x()),
                        (p / 3.0, pauli::y()),
                        (p / 3.0, pauli::z()),
                    ],
                )
            }
        }
    }
}

fn bit_flip_family(c0: f64, c1: f64) -> Result<HermitianMapRep> {
    let mut terms = vec![(c0, identity(8))];
    for q in 0..3 {
        terms.push((c1, pauli::on_qubit(&pauli::x(), q, 3)));
    }
    HermitianMapRep::square(8, terms)
}

/// Convenience wrapper over [`StandardMap::from_name`] + [`StandardMap::build`].
pub fn standard_map(name: &str, params: &[f64], matrix: Option<&CMatrix>) -> Result<HermitianMapRep> {
    StandardMap::from_name(name, params, matrix)?.build()
}

pub fn phase_flip(p: f64) -> Result<HermitianMapRep> {
    StandardMap::PhaseFlip { p }.build()
}

pub fn inverse_phase_flip(p: f64) -> Result<HermitianMapRep> {
    StandardMap::InversePhaseFlip { p }.build()
}

pub fn unitary_map(u: &CMatrix) -> Result<HermitianMapRep> {
    StandardMap::Unitary(u.clone()).build()
}

/// Max-entry size of a map's Choi matrix; handy as a scale for tolerances.
pub fn choi_scale<M: QuantumMap + ?Sized>(map: &M) -> f64 {
    max_abs(&choi(map).matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c, from_real_rows, from_rows, ZERO};
    use crate::random::{random_density, random_matrix, random_unitary, seeded};

    fn plus_state() -> CMatrix {
        from_real_rows(2, 2, &[0.5, 0.5, 0.5, 0.5])
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn apply_examples() {
        let id = LinearMapRep::identity(2);
        let rho = plus_state();
        assert_eq!(id.apply(&rho).unwrap(), rho);

        let ipf = inverse_phase_flip(0.25).unwrap();
        let out = ipf.apply(&rho).unwrap();
        let expect = from_real_rows(2, 2, &[0.5, 1.0, 1.0, 0.5]);
        assert!(max_abs_diff(&out, &expect) < 1e-15);
        let vals = eigh(&out).unwrap().values;
        assert!(close(vals[0], 1.5, 1e-14) && close(vals[1], -0.5, 1e-14));

        let p = 0.3;
        let pf = phase_flip(p).unwrap();
        let z = pauli::z();
        let manual = &rho * re(1.0 - p) + &z * &rho * &z * re(p);
        assert!(max_abs_diff(&pf.apply(&rho).unwrap(), &manual) < 1e-15);
    }

    #[test]
    fn apply_rejects_bad_shape() {
        let id = LinearMapRep::identity(2);
        assert!(matches!(id.apply(&identity(3)), Err(Error::Shape(_))));
    }

    #[test]
    fn compose_examples() {
        let pf = phase_flip(0.25).unwrap();
        let ipf = inverse_phase_flip(0.25).unwrap();
        let both = compose(&ipf, &pf).unwrap();
        assert!(action_deviation(&both, &LinearMapRep::identity(2)).unwrap() <= 1e-12);

        let same = compose(&LinearMapRep::identity(2), &pf).unwrap();
        assert!(action_deviation(&same, &pf).unwrap() <= 1e-15);

        let mut rng = seeded(1);
        let (u, v) = (random_unitary(&mut rng, 3), random_unitary(&mut rng, 3));
        let uv = compose(&unitary_map(&u).unwrap(), &unitary_map(&v).unwrap()).unwrap();
        assert!(action_deviation(&uv, &unitary_map(&(&u * &v)).unwrap()).unwrap() <= 1e-12);

        assert!(compose(&LinearMapRep::identity(3), &pf).is_err());
    }

    #[test]
    fn trace_preservation_examples() {
        assert!(is_trace_preserving(&phase_flip(0.3).unwrap()).unwrap().0);
        for p in [0.1, 0.25, 0.4, 0.7] {
            assert!(is_trace_preserving(&inverse_phase_flip(p).unwrap()).unwrap().0);
        }
        // |c| weights sum to |c0| + |c1| != 1.
        for p in [0.1, 0.25, 0.4, 0.7] {
            let ipf = inverse_phase_flip(p).unwrap();
            let abs_terms = ipf.terms().iter().map(|t| (t.weight.abs(), t.op.clone())).collect();
            let cp = HermitianMapRep::square(2, abs_terms).unwrap();
            assert!(!is_trace_preserving(&cp).unwrap().0);
        }
    }

    #[test]
    fn choi_examples() {
        let id = choi(&LinearMapRep::identity(2));
        let expect = from_real_rows(
            4,
            4,
            &[1., 0., 0., 1., 0., 0., 0., 0., 0., 0., 0., 0., 1., 0., 0., 1.],
        );
        assert_eq!(id.matrix(), &expect);

        let p = 0.2;
        let c = choi(&phase_flip(p).unwrap());
        assert!(close(c.matrix()[(0, 3)].re, 1.0 - 2.0 * p, 1e-15));
        assert!(close(c.matrix()[(3, 0)].re, 1.0 - 2.0 * p, 1e-15));
        let vals = c.eigenvalues().unwrap();
        for (v, x) in vals.iter().zip([2.0 - 2.0 * p, 2.0 * p, 0.0, 0.0]) {
            assert!(close(*v, x, 1e-12), "{vals:?}");
        }

        let c = choi(&inverse_phase_flip(0.25).unwrap());
        assert!(close(c.matrix()[(0, 3)].re, 2.0, 1e-14));
        let vals = c.eigenvalues().unwrap();
        for (v, x) in vals.iter().zip([3.0, 0.0, 0.0, -1.0]) {
            assert!(close(*v, x, 1e-12), "{vals:?}");
        }
        assert_eq!(c.block(0, 1), from_real_rows(2, 2, &[0., 2., 0., 0.]));
    }

    #[test]
    fn from_choi_linear_examples() {
        let lin = from_choi_linear(&choi(&LinearMapRep::identity(2)));
        assert_eq!(lin.len(), 1);
        let (e, ep) = &lin.elements()[0];
        let ratio = e[(0, 0)];
        assert!(max_abs_diff(e, &(identity(2) * ratio)) < 1e-14);
        assert!(ep[(1, 0)].norm() < 1e-14 && (ep[(0, 0)] - ep[(1, 1)]).norm() < 1e-14);
        assert!(action_deviation(&lin, &LinearMapRep::identity(2)).unwrap() < 1e-14);

        let ipf = inverse_phase_flip(0.25).unwrap();
        let lin = from_choi_linear(&choi(&ipf));
        assert_eq!(lin.len(), 2);
        assert!(action_deviation(&lin, &ipf).unwrap() < 1e-12);

        let mut rng = seeded(4);
        let elements = (0..3)
            .map(|_| (random_matrix(&mut rng, 2, 2), random_matrix(&mut rng, 2, 2)))
            .collect();
        let map = LinearMapRep::new(2, 2, elements).unwrap();
        let lin = from_choi_linear(&choi(&map));
        assert!(action_deviation(&lin, &map).unwrap() <= 1e-10);
    }

    #[test]
    fn from_choi_linear_rectangular() {
        let mut rng = seeded(14);
        let elements = (0..2)
            .map(|_| (random_matrix(&mut rng, 3, 2), random_matrix(&mut rng, 3, 2)))
            .collect();
        let map = LinearMapRep::new(2, 3, elements).unwrap();
        let c = choi(&map);
        assert_eq!(c.matrix().shape(), (6, 6));
        let lin = from_choi_linear(&c);
        assert!(action_deviation(&lin, &map).unwrap() <= 1e-10);
    }

    #[test]
    fn from_choi_hermitian_examples() {
        let h = from_choi_hermitian(&choi(&inverse_phase_flip(0.25).unwrap())).unwrap();
        assert_eq!(h.weights().len(), 2);
        assert!(close(h.weights()[0], 3.0, 1e-12) && close(h.weights()[1], -1.0, 1e-12));
        let scaled = h.with_unitary_scale();
        assert!(close(scaled.weight_along(&identity(2)).unwrap(), 1.5, 1e-12));
        assert!(close(scaled.weight_along(&pauli::z()).unwrap(), -0.5, 1e-12));
        assert!(close(h.weight_along(&pauli::z()).unwrap(), -0.5, 1e-12));

        let pf = from_choi_hermitian(&choi(&phase_flip(0.3).unwrap())).unwrap();
        assert!(pf.weights().iter().all(|&w| w > 0.0));

        let id = from_choi_hermitian(&choi(&LinearMapRep::identity(2))).unwrap();
        assert_eq!(id.terms().len(), 1);
        assert!(close(id.terms()[0].weight, 2.0, 1e-12));
        let k = &id.terms()[0].op;
        assert!(max_abs_diff(k, &(identity(2) * re(0.5f64.sqrt()))) < 1e-12);

        let rho_z = LinearMapRep::new(2, 2, vec![(identity(2), pauli::z())]).unwrap();
        assert!(matches!(from_choi_hermitian(&choi(&rho_z)), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&phase_flip(0.3).unwrap()).class, MapClass::Cp);
        let cls = classify(&inverse_phase_flip(0.25).unwrap());
        assert_eq!(cls.class, MapClass::Hermitian);
        assert!(close(cls.witness().unwrap(), -1.0, 1e-12));
        assert_eq!(cls.describe(), "hermitian (not cp), witness eigenvalue -1.000000000000");
        let rho_z = LinearMapRep::new(2, 2, vec![(identity(2), pauli::z())]).unwrap();
        let cls = classify(&rho_z);
        assert_eq!(cls.class, MapClass::Linear);
        assert!(cls.witness().unwrap() > 0.5);
        assert_eq!(classify(&LinearMapRep::identity(3)).class, MapClass::Cp);
    }

    #[test]
    fn cp_difference_examples() {
        let ipf = inverse_phase_flip(0.25).unwrap();
        let (plus, minus) = cp_difference(&ipf).unwrap();
        assert!(close(plus.with_unitary_scale().weight_along(&identity(2)).unwrap(), 1.5, 1e-12));
        assert!(close(minus.with_unitary_scale().weight_along(&pauli::z()).unwrap(), 0.5, 1e-12));
        assert!(classify(&plus).is_cp() && classify(&minus).is_cp());
        for i in 0..2 {
            for j in 0..2 {
                let u = matrix_unit(2, i, j);
                let lhs = ipf.apply(&u).unwrap();
                let rhs = plus.apply(&u).unwrap() - minus.apply(&u).unwrap();
                assert!(max_abs_diff(&lhs, &rhs) <= 1e-12);
            }
        }

        let (plus, minus) = cp_difference(&phase_flip(0.2).unwrap()).unwrap();
        assert!(minus.is_zero() && !plus.is_zero());

        let neg = HermitianMapRep::square(
            2,
            phase_flip(0.2).unwrap().terms().iter().map(|t| (-t.weight, t.op.clone())).collect(),
        )
        .unwrap();
        let (plus, minus) = cp_difference(&neg).unwrap();
        assert!(plus.is_zero() && !minus.is_zero());
    }

    #[test]
    fn invert_examples() {
        let inv = invert(&phase_flip(0.25).unwrap()).unwrap();
        let h = from_choi_hermitian(&choi(&inv.map)).unwrap();
        assert!(close(h.weight_along(&pauli::z()).unwrap(), -0.5, 1e-12));
        assert!(close(h.weight_along(&identity(2)).unwrap(), 1.5, 1e-12));
        assert!(inv.condition.is_finite() && inv.condition >= 1.0);

        let mut rng = seeded(2);
        let u = random_unitary(&mut rng, 2);
        let inv = invert(&unitary_map(&u).unwrap()).unwrap();
        assert!(action_deviation(&inv.map, &unitary_map(&u.adjoint()).unwrap()).unwrap() <= 1e-10);

        assert!(matches!(invert(&phase_flip(0.5).unwrap()), Err(Error::NotInvertible { .. })));
    }

    #[test]
    fn standard_map_examples() {
        let ipf = standard_map("inverse_phase_flip", &[0.25], None).unwrap();
        assert!(close(ipf.weight_along(&identity(2)).unwrap(), 1.5, 1e-15));
        assert!(close(ipf.weight_along(&pauli::z()).unwrap(), -0.5, 1e-15));

        let ibf = standard_map("inverse_bit_flip_3q", &[-0.1], None).unwrap();
        assert!(close(ibf.terms()[0].weight, 1.3, 1e-15));
        assert!(ibf.terms()[1..].iter().all(|t| t.weight == -0.1));
        assert!(is_trace_preserving(&ibf).unwrap().0);

        let id = standard_map("identity", &[], None).unwrap();
        assert_eq!(classify(&id).class, MapClass::Cp);
        assert!(standard_map("inverse_bit_flip_3q", &[0.2], None).is_err());
        assert!(standard_map("phase_flip", &[1.5], None).is_err());
        assert!(standard_map("nope", &[], None).is_err());
        assert!(standard_map("unitary", &[], None).is_err());
        assert!(matches!(
            standard_map("inverse_phase_flip", &[0.5], None),
            Err(Error::NotInvertible { .. })
        ));
        let dep = standard_map("depolarizing", &[0.3], None).unwrap();
        assert!(is_trace_preserving(&dep).unwrap().0 && classify(&dep).is_cp());
        let bf = standard_map("bit_flip_3q", &[0.1], None).unwrap();
        assert!(is_trace_preserving(&bf).unwrap().0 && classify(&bf).is_cp());
        let bad = from_rows(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), ZERO, c(1.0, 0.0)]);
        assert!(standard_map("unitary", &[], Some(&bad)).is_err());
    }

    #[test]
    fn gauge_equivalent_elements_share_action() {
        // F_b = sum_a u_ab E_a, F'_b = sum_a v_ab E'_a with u v^dag = I.
        let mut rng = seeded(9);
        let es: Vec<_> = (0..3).map(|_| random_matrix(&mut rng, 2, 2)).collect();
        let eps: Vec<_> = (0..3).map(|_| random_matrix(&mut rng, 2, 2)).collect();
        let base = LinearMapRep::new(2, 2, es.iter().cloned().zip(eps.iter().cloned()).collect())
            .unwrap();
        let u = random_matrix(&mut rng, 3, 3) + identity(3) * re(2.0);
        let v = u.clone().try_inverse().unwrap().adjoint();
        let mix = |ops: &[CMatrix], g: &CMatrix, b: usize| {
            ops.iter().enumerate().fold(CMatrix::zeros(2, 2), |acc, (a, e)| acc + e * g[(a, b)])
        };
        let gauged = LinearMapRep::new(
            2,
            2,
            (0..3).map(|b| (mix(&es, &u, b), mix(&eps, &v, b))).collect(),
        )
        .unwrap();
        assert!(action_deviation(&base, &gauged).unwrap() <= 1e-10);
    }

    #[test]
    fn hermitian_map_preserves_hermiticity() {
        let mut rng = seeded(12);
        let h = from_choi_hermitian(&choi(&inverse_phase_flip(0.1).unwrap())).unwrap();
        let rho = random_density(&mut rng, 2);
        assert!(numerics::is_hermitian(&h.apply(&rho).unwrap(), 1e-12));
    }
}
