//! Reduced system dynamics `rho_S(t) = Tr_B[U rho_SB U^dag]` written as a
//! Hermitian map on the system, for arbitrary (possibly correlated) initial
//! states, plus sequential composition of noise and gate steps.
//!
//! Bipartite matrices use the index `i * dim_B + b` for system index `i` and
//! bath index `b`, so block `(i, j)` is the `dim_B x dim_B` bath operator that
//! multiplies `|i><j|`.

use crate::error::{shape_err, Error, Result};
use crate::maps::{
    choi_scale, classify, compose, from_choi_hermitian, AnyMap, ChoiMatrix, Classification,
    HermitianMapRep, LinearMapRep, QuantumMap,
};
use crate::numerics::{
    ensure_square, hermiticity_residual, identity, kron, matrix_unit, max_abs, max_abs_diff,
    partial_trace, re, svd, trace, CMatrix, Keep, C64, EPS_HERM,
};
use crate::positivity::BlochBasis;

/// Absolute tolerance for calling a bath block traceless or zero.
pub const EPS_TRACE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteState {
    dim_s: usize,
    dim_b: usize,
    matrix: CMatrix,
}

impl BipartiteState {
    pub fn new(dim_s: usize, dim_b: usize, matrix: CMatrix) -> Result<Self> {
        let size = dim_s * dim_b;
        if dim_s == 0 || dim_b == 0 || matrix.shape() != (size, size) {
            return shape_err(format!(
                "bipartite state with dims ({dim_s}, {dim_b}) must be {size}x{size}"
            ));
        }
        crate::numerics::ensure_finite(&matrix)?;
        let residual = hermiticity_residual(&matrix);
        if residual > EPS_HERM {
            return Err(Error::NotHermitian { residual });
        }
        let tr = trace(&matrix);
        if (tr - re(1.0)).norm() > 1e-10 {
            return Err(Error::InvalidInput(format!("bipartite state has trace {tr}")));
        }
        Ok(Self { dim_s, dim_b, matrix })
    }

    pub fn product(rho_s: &CMatrix, rho_b: &CMatrix) -> Result<Self> {
        let ds = ensure_square(rho_s, "system state")?;
        let db = ensure_square(rho_b, "bath state")?;
        Self::new(ds, db, kron(rho_s, rho_b))
    }

    pub fn dim_s(&self) -> usize {
        self.dim_s
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Bath block multiplying `|i><j|`.
    pub fn block(&self, i: usize, j: usize) -> CMatrix {
        let k = self.dim_b;
        self.matrix.view((i * k, j * k), (k, k)).into_owned()
    }

    pub fn reduced_system(&self) -> CMatrix {
        partial_trace(&self.matrix, (self.dim_s, self.dim_b), Keep::First)
            .expect("dims match by construction")
    }

    /// `(V (x) I) rho (V (x) I)^dag` for a system unitary `V`.
    pub fn conjugate_system(&self, v: &CMatrix) -> Result<Self> {
        let w = kron(v, &identity(self.dim_b));
        Self::new(self.dim_s, self.dim_b, &w * &self.matrix * w.adjoint())
    }
}

/// Block with unit trace (or zero), carrying the trace as `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlTerm {
    pub i: usize,
    pub j: usize,
    pub alpha: C64,
    pub phi: CMatrix,
}

/// Traceless nonzero block, carried with `beta = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NslTerm {
    pub i: usize,
    pub j: usize,
    pub beta: C64,
    pub psi: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlSplit {
    pub dim_s: usize,
    pub dim_b: usize,
    pub sl_terms: Vec<SlTerm>,
    pub nsl_terms: Vec<NslTerm>,
}

impl SlSplit {
    pub fn reassemble(&self) -> CMatrix {
        let (ds, db) = (self.dim_s, self.dim_b);
        let mut out = CMatrix::zeros(ds * db, ds * db);
        for t in &self.sl_terms {
            out += kron(&matrix_unit(ds, t.i, t.j), &(&t.phi * t.alpha));
        }
        for t in &self.nsl_terms {
            out += kron(&matrix_unit(ds, t.i, t.j), &(&t.psi * t.beta));
        }
        out
    }

    pub fn is_sl(&self) -> bool {
        self.nsl_terms.is_empty()
    }
}

pub fn sl_split(state: &BipartiteState) -> SlSplit {
    let (ds, db) = (state.dim_s, state.dim_b);
    let mut sl_terms = Vec::new();
    let mut nsl_terms = Vec::new();
    for i in 0..ds {
        for j in 0..ds {
            let block = state.block(i, j);
            let tr = trace(&block);
            if tr.norm() > EPS_TRACE {
                sl_terms.push(SlTerm { i, j, alpha: tr, phi: block / tr });
            } else if max_abs(&block) <= EPS_TRACE {
                sl_terms.push(SlTerm { i, j, alpha: C64::new(0.0, 0.0), phi: CMatrix::zeros(db, db) });
            } else {
                nsl_terms.push(NslTerm { i, j, beta: C64::new(1.0, 0.0), psi: block });
            }
        }
    }
    SlSplit { dim_s: ds, dim_b: db, sl_terms, nsl_terms }
}

pub fn is_sl_state(state: &BipartiteState) -> bool {
    sl_split(state).is_sl()
}

pub fn check_unitary(u: &CMatrix, dim: usize) -> Result<()> {
    if u.shape() != (dim, dim) {
        return shape_err(format!("unitary must be {dim}x{dim}, got {:?}", u.shape()));
    }
    crate::numerics::ensure_finite(u)?;
    let dev = max_abs_diff(&(u.adjoint() * u), &identity(dim));
    if dev > 1e-10 {
        return Err(Error::InvalidInput(format!("matrix is not unitary (deviation {dev:.3e})")));
    }
    Ok(())
}

/// System operator `(I (x) <k|) U (I (x) |x>)`.
fn bath_contraction(u: &CMatrix, x: &nalgebra::DVector<C64>, k: usize, ds: usize, db: usize) -> CMatrix {
    CMatrix::from_fn(ds, ds, |s, t| {
        (0..db).map(|b| u[(s * db + k, t * db + b)] * x[b]).sum()
    })
}

/// Element pairs `(sqrt(l) V P_i, sqrt(l) W P_j)` with `V = <k|U|x>`,
/// `W = <k|U|y>` from the SVD `phi_ij = sum l |x><y|`; enumerated by `(i, j)`,
/// then bath index `k`, then singular index.
pub fn build_phi_sl(split: &SlSplit, u: &CMatrix) -> Result<LinearMapRep> {
    let (ds, db) = (split.dim_s, split.dim_b);
    check_unitary(u, ds * db)?;
    let mut elements = Vec::new();
    for t in &split.sl_terms {
        if t.alpha == C64::new(0.0, 0.0) {
            continue;
        }
        let dec = svd(&t.phi)?;
        let v = dec.v_dag.adjoint();
        let rank = dec.rank();
        let (pi, pj) = (matrix_unit(ds, t.i, t.i), matrix_unit(ds, t.j, t.j));
        for k in 0..db {
            for a in 0..rank {
                let root = re(dec.sigma[a].sqrt());
                let vk = bath_contraction(u, &dec.u.column(a).into_owned(), k, ds, db);
                let wk = bath_contraction(u, &v.column(a).into_owned(), k, ds, db);
                elements.push((vk * &pi * root, wk * &pj * root));
            }
        }
    }
    if elements.is_empty() {
        return Ok(LinearMapRep::zero(ds, ds));
    }
    LinearMapRep::new(ds, ds, elements)
}

/// `K = sum beta_ij Tr_B[U (|i><j| (x) psi_ij) U^dag]`.
pub fn build_k_nsl(split: &SlSplit, u: &CMatrix) -> Result<CMatrix> {
    let (ds, db) = (split.dim_s, split.dim_b);
    check_unitary(u, ds * db)?;
    let mut k = CMatrix::zeros(ds, ds);
    for t in &split.nsl_terms {
        let joint = kron(&matrix_unit(ds, t.i, t.j), &(&t.psi * t.beta));
        k += partial_trace(&(u * joint * u.adjoint()), (ds, db), Keep::First)?;
    }
    Ok(k)
}

/// The Hermitian map fixed by `Phi_H(I) = Phi_SL(I) + N K` and
/// `Phi_H(F_mu) = Phi_SL(F_mu)` on a traceless Hermitian basis.
pub fn assemble_hermitian_map<M: QuantumMap + ?Sized>(
    phi_sl: &M,
    k_nsl: &CMatrix,
    dim: usize,
) -> Result<HermitianMapRep> {
    if phi_sl.dim_in() != dim || phi_sl.dim_out() != dim || k_nsl.shape() != (dim, dim) {
        return shape_err("Phi_SL and K_nSL must act on the system dimension");
    }
    let basis = BlochBasis::new(dim)?;
    let n = dim as f64;
    let on_identity = phi_sl.apply(&identity(dim))? + k_nsl * re(n);
    let on_basis = basis
        .elements()
        .iter()
        .map(|f| phi_sl.apply(f))
        .collect::<Result<Vec<_>>>()?;
    let mut cm = CMatrix::zeros(dim * dim, dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            // |i><j| = (delta_ij I + sum_mu <j|F_mu|i> F_mu) / N
            let mut out = if i == j { on_identity.clone() } else { CMatrix::zeros(dim, dim) };
            for (f, image) in basis.elements().iter().zip(&on_basis) {
                out += image * f[(j, i)];
            }
            cm.view_mut((i * dim, j * dim), (dim, dim)).copy_from(&(out / re(n)));
        }
    }
    let choi = ChoiMatrix::new(dim, dim, cm)?;
    let asym = choi.hermiticity_residual();
    if asym > EPS_HERM * choi_scale(&choi).max(1.0) {
        return Err(Error::Internal(format!("assembled Choi matrix is not Hermitian ({asym:.3e})")));
    }
    from_choi_hermitian(&choi)
}

/// `Tr_B[U rho_SB U^dag]`.
pub fn evolve_exact(state: &BipartiteState, u: &CMatrix) -> Result<CMatrix> {
    check_unitary(u, state.dim_s * state.dim_b)?;
    partial_trace(&(u * &state.matrix * u.adjoint()), (state.dim_s, state.dim_b), Keep::First)
}

#[derive(Debug, Clone)]
pub struct QdpResult {
    pub split: SlSplit,
    pub phi_sl: LinearMapRep,
    pub k_nsl: CMatrix,
    pub phi_h: HermitianMapRep,
}

/// Full reduction of `(rho_SB, U)` to the system map.
pub fn reduce(state: &BipartiteState, u: &CMatrix) -> Result<QdpResult> {
    let split = sl_split(state);
    let phi_sl = build_phi_sl(&split, u)?;
    let k_nsl = build_k_nsl(&split, u)?;
    let phi_h = assemble_hermitian_map(&phi_sl, &k_nsl, state.dim_s)?;
    Ok(QdpResult { split, phi_sl, k_nsl, phi_h })
}

/// One time step: noise followed by an ideal gate.
#[derive(Debug, Clone)]
pub struct FtqecStep {
    pub noise: AnyMap,
    pub gate: CMatrix,
}

#[derive(Debug, Clone)]
pub struct FtqecResult {
    pub total: LinearMapRep,
    pub classification: Classification,
}

/// `prod_i Phi_U(t_i) Phi(t_i, t_{i-1})`, with the first step applied first.
pub fn ftqec_compose(steps: &[FtqecStep]) -> Result<FtqecResult> {
    let first = steps
        .first()
        .ok_or_else(|| Error::InvalidInput("ftqec pipeline needs at least one step".into()))?;
    let dim = first.noise.dim_in();
    let mut total = LinearMapRep::identity(dim);
    for (idx, step) in steps.iter().enumerate() {
        if step.noise.dim_in() != dim || step.noise.dim_out() != dim {
            return shape_err(format!("step {idx} noise does not act on dimension {dim}"));
        }
        check_unitary(&step.gate, dim)?;
        let gate = LinearMapRep::new(dim, dim, vec![(step.gate.clone(), step.gate.clone())])?;
        total = compose(&gate, &compose(&step.noise, &total)?)?;
        total = crate::maps::from_choi_linear(&crate::maps::choi(&total));
    }
    let classification = classify(&total);
    Ok(FtqecResult { total, classification })
}

/// Two-qubit SWAP.
pub fn swap(dim: usize) -> CMatrix {
    CMatrix::from_fn(dim * dim, dim * dim, |r, c| {
        let (a, b) = (r / dim, r % dim);
        if c == b * dim + a { re(1.0) } else { re(0.0) }
    })
}

/// `|Phi+><Phi+|` on two qubits.
pub fn bell_state() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    for (r, c) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
        m[(r, c)] = re(0.5);
    }
    m
}

/// CNOT with the system qubit as control and the bath qubit as target.
pub fn cnot() -> CMatrix {
    CMatrix::from_fn(4, 4, |r, c| {
        let (s, b) = (c / 2, c % 2);
        if r == s * 2 + (b ^ s) { re(1.0) } else { re(0.0) }
    })
}

/// `cos(t) I - i sin(t) SWAP`.
pub fn partial_swap(theta: f64, dim: usize) -> CMatrix {
    identity(dim * dim) * re(theta.cos()) + swap(dim) * C64::new(0.0, -theta.sin())
}
