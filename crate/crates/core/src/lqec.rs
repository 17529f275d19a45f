//! Linear quantum error correction: generalized correction conditions for
//! linear and Hermitian noise, and synthesis of CP, linear, and Hermitian
//! recovery maps together with their predicted correction factors.
//!
//! Recovered states are compared against `factor * rho` on random code
//! states; element lists are gauge-dependent and never compared directly.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{shape_err, Error, Result};
use crate::maps::{compose, AnyMap, HermitianMapRep, LinearMapRep, QuantumMap};
use crate::numerics::{
    eigh, ensure_square, identity, max_abs, max_abs_diff, pauli, polar_unitary, rank_cutoff, re,
    trace, CMatrix, C64,
};
use crate::random::{random_density, seeded};

/// Residual threshold for calling a correction condition satisfied.
pub const EPS_COND: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CodeProjector {
    dim: usize,
    p: CMatrix,
    rank: usize,
    basis: CMatrix,
}

impl CodeProjector {
    pub fn new(p: CMatrix) -> Result<Self> {
        let dim = ensure_square(&p, "code projector")?;
        crate::numerics::ensure_finite(&p)?;
        let idempotent = max_abs_diff(&(&p * &p), &p);
        let hermitian = max_abs_diff(&p, &p.adjoint());
        if idempotent > 1e-10 || hermitian > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "not an orthogonal projector (|P^2 - P| = {idempotent:.3e}, |P - P^dag| = {hermitian:.3e})"
            )));
        }
        let dec = eigh(&p)?;
        let rank = dec.values.iter().filter(|&&v| v > 0.5).count();
        if rank == 0 {
            return Err(Error::InvalidInput("code projector has rank 0".into()));
        }
        let basis = dec.vectors.columns(0, rank).into_owned();
        Ok(Self { dim, p, rank, basis })
    }

    /// Projector onto the span of orthonormal codewords.
    pub fn from_codewords(codewords: &[DVector<C64>]) -> Result<Self> {
        let first = codewords
            .first()
            .ok_or_else(|| Error::InvalidInput("at least one codeword is required".into()))?;
        let dim = first.len();
        if codewords.iter().any(|v| v.len() != dim) {
            return shape_err("codewords have different lengths");
        }
        let basis = CMatrix::from_columns(codewords);
        let gram_dev = max_abs_diff(&(basis.adjoint() * &basis), &identity(codewords.len()));
        if gram_dev > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "codewords are not orthonormal (deviation {gram_dev:.3e})"
            )));
        }
        let p = &basis * basis.adjoint();
        Ok(Self { dim, p, rank: codewords.len(), basis })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, p: identity(dim), rank: dim, basis: identity(dim) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.p
    }

    /// Orthonormal columns spanning the code space.
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    /// Random code state `V sigma V^dag` with `sigma` a random density on the
    /// code space.
    pub fn random_state(&self, rng: &mut crate::random::Rng) -> CMatrix {
        let sigma = random_density(rng, self.rank);
        &self.basis * sigma * self.basis.adjoint()
    }
}

/// Code spanned by `|000>` and `|111>`.
pub fn three_qubit_code() -> CodeProjector {
    let mut zero = DVector::zeros(8);
    let mut one = DVector::zeros(8);
    zero[0] = re(1.0);
    one[7] = re(1.0);
    CodeProjector::from_codewords(&[zero, one]).expect("orthonormal codewords")
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlReport {
    pub lambda: CMatrix,
    pub residual: f64,
}

impl KlReport {
    pub fn satisfied(&self) -> bool {
        self.residual <= EPS_COND
    }
}

/// `G_ij = Tr(P A_i^dag B_j P) / rank` and `max |P A_i^dag B_j P - G_ij P|`.
fn gram_on_code(code: &CodeProjector, a: &[CMatrix], b: &[CMatrix]) -> Result<(CMatrix, f64)> {
    for m in a.iter().chain(b) {
        if m.shape() != (code.dim, code.dim) {
            return shape_err(format!(
                "operator of shape {:?} does not act on the code dimension {}",
                m.shape(),
                code.dim
            ));
        }
    }
    let p = &code.p;
    let pa: Vec<CMatrix> = a.iter().map(|x| x * p).collect();
    let pb: Vec<CMatrix> = b.iter().map(|x| x * p).collect();
    let mut g = CMatrix::zeros(a.len(), b.len());
    let mut residual = 0.0f64;
    for (i, ai) in pa.iter().enumerate() {
        for (j, bj) in pb.iter().enumerate() {
            let block = ai.adjoint() * bj;
            let value = trace(&block) / re(code.rank as f64);
            residual = residual.max(max_abs_diff(&block, &(p * value)));
            g[(i, j)] = value;
        }
    }
    Ok((g, residual))
}

/// Knill-Laflamme test `P F_i^dag F_j P = lambda_ij P`.
pub fn check_kl(code: &CodeProjector, elements: &[CMatrix]) -> Result<KlReport> {
    let (lambda, residual) = gram_on_code(code, elements, elements)?;
    Ok(KlReport { lambda, residual })
}

/// Condition matrices for `rho -> sum E_i rho E'_i^dag`:
/// (i) `P E_i^dag E_j P = 2 alpha_ij P`, (ii) the same for `E'`, and
/// (iii) `P E_i^dag E'_j P = 2 gamma_ij P`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqecCertificate {
    pub alpha: CMatrix,
    pub alpha_prime: CMatrix,
    pub gamma: CMatrix,
    /// Residuals of conditions (i), (ii), (iii).
    pub residuals: [f64; 3],
    pub satisfied: [bool; 3],
    /// For Hermitian input: deviation from `alpha'_ij = s_i s_j alpha_ij` and
    /// `gamma_ij = s_j alpha_ij`, with `s = sign(c)`.
    pub relation_residual: Option<f64>,
}

impl LqecCertificate {
    /// `2 Tr gamma^dag`, which equals 1 for trace-preserving noise.
    pub fn two_tr_gamma_dag(&self) -> C64 {
        self.gamma.trace().conj() * re(2.0)
    }

    pub fn all_satisfied(&self) -> bool {
        self.satisfied.iter().all(|&s| s)
    }
}

fn split_pairs(lin: &LinearMapRep) -> (Vec<CMatrix>, Vec<CMatrix>) {
    (lin.left().cloned().collect(), lin.right().cloned().collect())
}

fn check_square_on_code<M: QuantumMap + ?Sized>(code: &CodeProjector, map: &M) -> Result<()> {
    if map.dim_in() != code.dim || map.dim_out() != code.dim {
        return shape_err(format!(
            "map acts on ({}, {}), code on {}",
            map.dim_in(),
            map.dim_out(),
            code.dim
        ));
    }
    Ok(())
}

pub fn check_lqec_conditions(code: &CodeProjector, map: &AnyMap) -> Result<LqecCertificate> {
    check_square_on_code(code, map)?;
    let lin = map.to_linear();
    let (e, ep) = split_pairs(&lin);
    let (ga, ra) = gram_on_code(code, &e, &e)?;
    let (gp, rp) = gram_on_code(code, &ep, &ep)?;
    let (gg, rg) = gram_on_code(code, &e, &ep)?;
    let residuals = [ra, rp, rg];
    let relation_residual = match map {
        AnyMap::Hermitian(h) if !h.is_zero() => {
            let s: Vec<f64> = h.terms().iter().map(|t| t.weight.signum()).collect();
            let n = s.len();
            let mut worst = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((gp[(i, j)] - ga[(i, j)] * re(s[i] * s[j])).norm());
                    worst = worst.max((gg[(i, j)] - ga[(i, j)] * re(s[j])).norm());
                }
            }
            Some(worst / 2.0)
        }
        _ => None,
    };
    Ok(LqecCertificate {
        alpha: ga / re(2.0),
        alpha_prime: gp / re(2.0),
        gamma: gg / re(2.0),
        residuals,
        satisfied: residuals.map(|r| r <= EPS_COND),
        relation_residual,
    })
}

/// The CP map whose code and recovery also correct `map`: `{(|c_i|, K_i)}`
/// for Hermitian input, `{(1/2, E_i)} + {(1/2, E'_i)}` for linear input.
pub fn expanded_cp(map: &AnyMap) -> Result<HermitianMapRep> {
    let (n, m) = (map.dim_in(), map.dim_out());
    match map {
        AnyMap::Hermitian(h) => HermitianMapRep::new(
            n,
            m,
            h.terms().iter().map(|t| (t.weight.abs(), t.op.clone())).collect(),
        ),
        AnyMap::Linear(l) => HermitianMapRep::new(
            n,
            m,
            l.left().chain(l.right()).map(|e| (0.5, e.clone())).collect(),
        ),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecoveryKind {
    /// `rho -> sum R_k rho R_k^dag`.
    Cp(Vec<CMatrix>),
    /// `rho -> sum R_k rho R'_k^dag`.
    Linear(Vec<(CMatrix, CMatrix)>),
    /// `rho -> sum h_k R_k rho R_k^dag`.
    Hermitian(Vec<(f64, CMatrix)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryMapRep {
    pub dim: usize,
    pub kind: RecoveryKind,
}

impl RecoveryMapRep {
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            RecoveryKind::Cp(_) => "cp",
            RecoveryKind::Linear(_) => "linear",
            RecoveryKind::Hermitian(_) => "hermitian",
        }
    }

    pub fn len(&self) -> usize {
        match &self.kind {
            RecoveryKind::Cp(v) => v.len(),
            RecoveryKind::Linear(v) => v.len(),
            RecoveryKind::Hermitian(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_any(&self) -> AnyMap {
        match &self.kind {
            RecoveryKind::Hermitian(v) => AnyMap::Hermitian(
                HermitianMapRep::square(self.dim, v.clone()).expect("recovery shapes are consistent"),
            ),
            _ => AnyMap::Linear(self.to_linear()),
        }
    }
}

impl QuantumMap for RecoveryMapRep {
    fn dim_in(&self) -> usize {
        self.dim
    }

    fn dim_out(&self) -> usize {
        self.dim
    }

    fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.to_linear().apply(rho)
    }

    fn to_linear(&self) -> LinearMapRep {
        let pairs: Vec<(CMatrix, CMatrix)> = match &self.kind {
            RecoveryKind::Cp(v) => v.iter().map(|r| (r.clone(), r.clone())).collect(),
            RecoveryKind::Linear(v) => v.clone(),
            RecoveryKind::Hermitian(v) => {
                return HermitianMapRep::square(self.dim, v.clone())
                    .expect("recovery shapes are consistent")
                    .to_linear()
            }
        };
        if pairs.is_empty() {
            return LinearMapRep::zero(self.dim, self.dim);
        }
        LinearMapRep::new(self.dim, self.dim, pairs).expect("recovery shapes are consistent")
    }
}

/// Recovery elements `R_k = U_k^dag P_k = P U_k^dag` built from `G = F u`,
/// where `u` diagonalizes the Gram matrix `gram` of `F` on the code. Indices
/// with negligible eigenvalue are dropped.
struct Diagonalized {
    /// Columns of `u` that were kept, and their eigenvalues.
    kept: Vec<usize>,
    values: Vec<f64>,
    u: CMatrix,
    elements: Vec<CMatrix>,
    orthogonality_residual: f64,
}

fn diagonalize_and_polar(code: &CodeProjector, ops: &[CMatrix], gram: &CMatrix) -> Result<Diagonalized> {
    let dec = eigh(gram)?;
    let cut = rank_cutoff(dec.values.iter().copied());
    let p = &code.p;
    let g: Vec<CMatrix> = (0..ops.len())
        .map(|k| {
            ops.iter()
                .enumerate()
                .fold(CMatrix::zeros(code.dim, code.dim), |acc, (i, f)| acc + f * dec.vectors[(i, k)])
        })
        .collect();
    let kept: Vec<usize> = (0..ops.len()).filter(|&k| dec.values[k] > cut).collect();
    let mut elements = Vec::with_capacity(kept.len());
    for &k in &kept {
        let uk = polar_unitary(&g[k], p)?;
        elements.push(p * uk.adjoint());
    }
    let mut residual = 0.0f64;
    for (a, &k) in kept.iter().enumerate() {
        for (l, gl) in g.iter().enumerate() {
            let target = if l == k { p * re(dec.values[k].sqrt()) } else { CMatrix::zeros(code.dim, code.dim) };
            residual = residual.max(max_abs_diff(&(&elements[a] * gl * p), &target));
        }
    }
    Ok(Diagonalized {
        values: kept.iter().map(|&k| dec.values[k]).collect(),
        kept,
        u: dec.vectors,
        elements,
        orthogonality_residual: residual,
    })
}

#[derive(Debug, Clone)]
pub struct CpRecovery {
    pub recovery: RecoveryMapRep,
    pub lambda: CMatrix,
    pub kl_residual: f64,
    /// Kept eigenvalues `d_k` of `lambda`.
    pub eigenvalues: Vec<f64>,
    /// `max |R_k G_l P - delta_kl sqrt(d_k) P|`.
    pub orthogonality_residual: f64,
}

/// Standard recovery for a CP map `rho -> sum c_i K_i rho K_i^dag`, `c_i >= 0`.
pub fn synthesize_cp_recovery(code: &CodeProjector, cp: &HermitianMapRep) -> Result<CpRecovery> {
    check_square_on_code(code, cp)?;
    if let Some(t) = cp.terms().iter().find(|t| t.weight < 0.0) {
        return Err(Error::InvalidInput(format!(
            "CP recovery needs non-negative weights, found {}",
            t.weight
        )));
    }
    let f: Vec<CMatrix> = cp.terms().iter().map(|t| &t.op * re(t.weight.sqrt())).collect();
    let kl = check_kl(code, &f)?;
    if !kl.satisfied() {
        return Err(Error::NotCorrectable(format!("KL residual {:.3e}", kl.residual)));
    }
    let diag = diagonalize_and_polar(code, &f, &kl.lambda)?;
    Ok(CpRecovery {
        recovery: RecoveryMapRep { dim: code.dim, kind: RecoveryKind::Cp(diag.elements) },
        lambda: kl.lambda,
        kl_residual: kl.residual,
        eigenvalues: diag.values,
        orthogonality_residual: diag.orthogonality_residual,
    })
}

#[derive(Debug, Clone)]
pub struct LinearRecovery {
    pub recovery: RecoveryMapRep,
    pub certificate: LqecCertificate,
    /// Predicted `R[Phi(rho)] / rho` on the code space.
    pub factor: C64,
    pub orthogonality_residual: f64,
}

/// Non-CP recovery from conditions (i) and (ii) alone. With `G = E u`,
/// `G' = E' u'` diagonalizing `2 alpha` and `2 alpha'` to `D`, `D'`, the
/// factor is `sum_k (u^dag u')_kk sqrt(D_k D'_k)`, summed over indices kept
/// on both sides.
pub fn synthesize_linear_recovery(code: &CodeProjector, map: &AnyMap) -> Result<LinearRecovery> {
    let certificate = check_lqec_conditions(code, map)?;
    if !certificate.satisfied[0] || !certificate.satisfied[1] {
        return Err(Error::NotCorrectable(format!(
            "conditions (i)/(ii) fail with residuals {:.3e}/{:.3e}",
            certificate.residuals[0], certificate.residuals[1]
        )));
    }
    let (e, ep) = split_pairs(&map.to_linear());
    let left = diagonalize_and_polar(code, &e, &(&certificate.alpha * re(2.0)))?;
    let right = diagonalize_and_polar(code, &ep, &(&certificate.alpha_prime * re(2.0)))?;
    let mut pairs = Vec::new();
    let mut factor = C64::new(0.0, 0.0);
    for (a, &k) in left.kept.iter().enumerate() {
        if let Some(b) = right.kept.iter().position(|&kk| kk == k) {
            let overlap = left.u.column(k).dotc(&right.u.column(k));
            factor += overlap * re((left.values[a] * right.values[b]).sqrt());
            pairs.push((left.elements[a].clone(), right.elements[b].clone()));
        }
    }
    Ok(LinearRecovery {
        recovery: RecoveryMapRep { dim: code.dim, kind: RecoveryKind::Linear(pairs) },
        certificate,
        factor,
        orthogonality_residual: left.orthogonality_residual.max(right.orthogonality_residual),
    })
}

#[derive(Debug, Clone)]
pub struct HermitianRecovery {
    pub recovery: RecoveryMapRep,
    /// Gram matrix of `F_i = sqrt|c_i| K_i` on the code.
    pub beta: CMatrix,
    pub kl_residual: f64,
    /// `sum_i sign(c_i) beta_ii`, equal to 1 for trace-preserving noise.
    pub sign_sum: f64,
    pub weights: Vec<f64>,
    /// Predicted `sum_i sign(c_i) (u d h u^dag)_ii`.
    pub factor: f64,
    pub orthogonality_residual: f64,
}

/// Hermitian recovery `sum_k h_k R_k rho R_k^dag` from the recovery elements
/// of the expanded CP map. `weights = None` means all ones.
pub fn synthesize_hermitian_recovery(
    code: &CodeProjector,
    map: &HermitianMapRep,
    weights: Option<&[f64]>,
) -> Result<HermitianRecovery> {
    check_square_on_code(code, map)?;
    let signs: Vec<f64> = map.terms().iter().map(|t| t.weight.signum()).collect();
    let f: Vec<CMatrix> = map.terms().iter().map(|t| &t.op * re(t.weight.abs().sqrt())).collect();
    let kl = check_kl(code, &f)?;
    if !kl.satisfied() {
        return Err(Error::NotCorrectable(format!("KL residual {:.3e}", kl.residual)));
    }
    let diag = diagonalize_and_polar(code, &f, &kl.lambda)?;
    let h: Vec<f64> = match weights {
        None => vec![1.0; diag.kept.len()],
        Some(w) if w.len() == diag.kept.len() => w.to_vec(),
        Some(w) => {
            return Err(Error::InvalidInput(format!(
                "expected {} recovery weights, got {}",
                diag.kept.len(),
                w.len()
            )))
        }
    };
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("recovery weights must be finite".into()));
    }
    let mut factor = 0.0;
    for (i, s) in signs.iter().enumerate() {
        for (a, &k) in diag.kept.iter().enumerate() {
            factor += s * h[a] * diag.u[(i, k)].norm_sqr() * diag.values[a];
        }
    }
    let sign_sum = signs.iter().enumerate().map(|(i, s)| s * kl.lambda[(i, i)].re).sum();
    let elements = h.iter().copied().zip(diag.elements).collect();
    Ok(HermitianRecovery {
        recovery: RecoveryMapRep { dim: code.dim, kind: RecoveryKind::Hermitian(elements) },
        beta: kl.lambda,
        kl_residual: kl.residual,
        sign_sum,
        weights: h,
        factor,
        orthogonality_residual: diag.orthogonality_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verification {
    /// Mean of `Tr R[Phi(rho)]` over the samples.
    pub factor: C64,
    /// `max |R[Phi(rho)] - factor_s rho|` over samples.
    pub max_dev: f64,
    /// `max |factor_s - factor|` over samples.
    pub spread: f64,
}

/// Apply `recovery o noise` to random code states and fit `sigma = f rho`.
pub fn verify_recovery<R, M>(
    recovery: &R,
    noise: &M,
    code: &CodeProjector,
    samples: usize,
    seed: u64,
) -> Result<Verification>
where
    R: QuantumMap + ?Sized,
    M: QuantumMap + ?Sized,
{
    if samples == 0 {
        return Err(Error::InvalidInput("verification needs at least one sample".into()));
    }
    check_square_on_code(code, noise)?;
    check_square_on_code(code, recovery)?;
    let total = compose(recovery, noise)?;
    let mut rng = seeded(seed);
    let states: Vec<CMatrix> = (0..samples).map(|_| code.random_state(&mut rng)).collect();
    let fits = states
        .par_iter()
        .map(|rho| {
            let sigma = total.apply(rho)?;
            let f = trace(&sigma);
            Ok((f, max_abs(&(sigma - rho * f))))
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = fits.iter().map(|(f, _)| *f).sum::<C64>() / re(samples as f64);
    let max_dev = fits.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    let spread = fits.iter().map(|(f, _)| (f - mean).norm()).fold(0.0, f64::max);
    Ok(Verification { factor: mean, max_dev, spread })
}

/// `X` on qubit `n` (0-based, most significant first) of three.
pub fn x_on(n: usize) -> CMatrix {
    pauli::on_qubit(&pauli::x(), n, 3)
}

pub fn z_on(n: usize) -> CMatrix {
    pauli::on_qubit(&pauli::z(), n, 3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{classify, inverse_phase_flip, standard_map, unitary_map};
    use crate::numerics::pauli;
    use crate::random::random_unitary;

    fn ibf(c1: f64) -> HermitianMapRep {
        standard_map("inverse_bit_flip_3q", &[c1], None).unwrap()
    }

    #[test]
    fn code_projector_examples() {
        let code = three_qubit_code();
        assert_eq!(code.rank(), 2);
        let (mut v000, mut v010) = (DVector::zeros(8), DVector::zeros(8));
        v000[0] = re(1.0);
        v010[2] = re(1.0);
        assert_eq!(code.matrix() * &v000, v000);
        assert!((code.matrix() * &v010).norm() == 0.0);
        let from_p = CodeProjector::new(code.matrix().clone()).unwrap();
        assert_eq!(from_p.rank(), 2);
        assert!(CodeProjector::new(identity(2) * re(0.5)).is_err());
        assert!(CodeProjector::new(CMatrix::zeros(2, 2)).is_err());
        let skew = DVector::from_vec(vec![re(1.0), re(1.0)]);
        assert!(CodeProjector::from_codewords(&[skew]).is_err());
    }

    #[test]
    fn kl_examples() {
        let code = three_qubit_code();
        let flips = [identity(8), x_on(0), x_on(1), x_on(2)];
        let r = check_kl(&code, &flips).unwrap();
        assert!(max_abs_diff(&r.lambda, &identity(4)) <= 1e-12 && r.residual <= 1e-12);

        let r = check_kl(&code, &[identity(8), z_on(0)]).unwrap();
        assert!((r.residual - 1.0).abs() <= 1e-12 && !r.satisfied());

        let r = check_kl(&CodeProjector::identity(2), &[identity(2)]).unwrap();
        assert_eq!((r.lambda[(0, 0)], r.residual), (re(1.0), 0.0));
        assert!(check_kl(&code, &[identity(2)]).is_err());
    }

    #[test]
    fn certificate_for_inverse_bit_flip() {
        let code = three_qubit_code();
        let cert = check_lqec_conditions(&code, &AnyMap::from(ibf(-0.1))).unwrap();
        assert!(cert.all_satisfied());
        let expect = CMatrix::from_diagonal(&DVector::from_vec(vec![re(0.65), re(0.05), re(0.05), re(0.05)]));
        assert!(max_abs_diff(&cert.alpha, &expect) <= 1e-12);
        assert!(cert.relation_residual.unwrap() <= 1e-12);
        let s = CMatrix::from_diagonal(&DVector::from_vec(vec![re(1.0), re(-1.0), re(-1.0), re(-1.0)]));
        assert!(max_abs_diff(&cert.gamma, &(&cert.alpha * &s)) <= 1e-12);
        assert!((cert.two_tr_gamma_dag() - re(1.0)).norm() <= 1e-12);
    }

    #[test]
    fn certificate_collapses_for_cp_maps() {
        let code = three_qubit_code();
        let bf = standard_map("bit_flip_3q", &[0.1], None).unwrap();
        let cert = check_lqec_conditions(&code, &AnyMap::from(bf)).unwrap();
        assert_eq!(cert.alpha, cert.alpha_prime);
        assert_eq!(cert.alpha, cert.gamma);
        assert!(cert.all_satisfied());
    }

    #[test]
    fn certificate_failing_only_condition_three() {
        // rho -> rho Z_1: E = I, E' = Z_1.
        let code = three_qubit_code();
        let map = LinearMapRep::new(8, 8, vec![(identity(8), z_on(0))]).unwrap();
        let cert = check_lqec_conditions(&code, &AnyMap::from(map.clone())).unwrap();
        assert_eq!(cert.satisfied, [true, true, false]);
        assert!((cert.residuals[2] - 1.0).abs() <= 1e-12);
        assert!(cert.relation_residual.is_none());

        let rec = synthesize_linear_recovery(&code, &AnyMap::from(map.clone())).unwrap();
        assert!((rec.factor - re(1.0)).norm() <= 1e-12);
        let v = verify_recovery(&rec.recovery, &map, &code, 8, 1).unwrap();
        assert!((v.factor - rec.factor).norm() <= 1e-10 && v.max_dev <= 1e-10);
        assert!(synthesize_cp_recovery(&code, &expanded_cp(&AnyMap::from(map)).unwrap()).is_err());
    }

    #[test]
    fn expanded_cp_examples() {
        let e = expanded_cp(&AnyMap::from(inverse_phase_flip(0.25).unwrap())).unwrap();
        assert!((e.weight_along(&identity(2)).unwrap() - 1.5).abs() <= 1e-15);
        assert!((e.weight_along(&pauli::z()).unwrap() - 0.5).abs() <= 1e-15);
        assert!(classify(&e).is_cp());

        let e = expanded_cp(&AnyMap::from(ibf(-0.1))).unwrap();
        assert!(classify(&e).is_cp());
        assert!(!crate::maps::is_trace_preserving(&e).unwrap().0);

        let lin = LinearMapRep::new(2, 2, vec![(pauli::x(), pauli::x())]).unwrap();
        let e = expanded_cp(&AnyMap::from(lin.clone())).unwrap();
        assert_eq!(e.terms().len(), 2);
        assert!(crate::maps::action_deviation(&e, &lin).unwrap() <= 1e-15);
    }

    #[test]
    fn cp_recovery_of_bit_flip_code() {
        let code = three_qubit_code();
        for c1 in [-0.1, -0.3] {
            let noise = ibf(c1);
            let rec = synthesize_cp_recovery(&code, &expanded_cp(&AnyMap::from(noise.clone())).unwrap())
                .unwrap();
            assert!(rec.kl_residual <= 1e-10 && rec.orthogonality_residual <= 1e-8);
            let expect = LinearMapRep::new(
                8,
                8,
                [identity(8), x_on(0), x_on(1), x_on(2)]
                    .iter()
                    .map(|x| (code.matrix() * x, code.matrix() * x))
                    .collect(),
            )
            .unwrap();
            assert!(crate::maps::action_deviation(&rec.recovery, &expect).unwrap() <= 1e-10);
            let v = verify_recovery(&rec.recovery, &noise, &code, 16, 3).unwrap();
            assert!((v.factor - re(1.0)).norm() <= 1e-10 && v.max_dev <= 1e-10 && v.spread <= 1e-10);
        }
    }

    #[test]
    fn cp_recovery_trivial_cases() {
        let id = HermitianMapRep::square(2, vec![(1.0, identity(2))]).unwrap();
        let rec = synthesize_cp_recovery(&CodeProjector::identity(2), &id).unwrap();
        assert!(crate::maps::action_deviation(&rec.recovery, &LinearMapRep::identity(2)).unwrap() <= 1e-12);

        let mut rng = seeded(5);
        let u = random_unitary(&mut rng, 8);
        let code = three_qubit_code();
        let noise = unitary_map(&u).unwrap();
        let rec = synthesize_cp_recovery(&code, &noise).unwrap();
        let v = verify_recovery(&rec.recovery, &noise, &code, 8, 4).unwrap();
        assert!((v.factor - re(1.0)).norm() <= 1e-10 && v.max_dev <= 1e-10);

        let neg = HermitianMapRep::square(2, vec![(-1.0, identity(2))]).unwrap();
        assert!(synthesize_cp_recovery(&CodeProjector::identity(2), &neg).is_err());
    }

    #[test]
    fn cp_recovery_rejects_uncorrectable_noise() {
        let noise = HermitianMapRep::square(8, vec![(0.5, identity(8)), (0.5, z_on(0))]).unwrap();
        let err = synthesize_cp_recovery(&three_qubit_code(), &noise).unwrap_err();
        assert!(matches!(err, Error::NotCorrectable(_)) && err.is_domain_failure());
    }

    #[test]
    fn linear_recovery_examples() {
        let code = three_qubit_code();
        let noise = AnyMap::from(ibf(-0.1));
        let rec = synthesize_linear_recovery(&code, &noise).unwrap();
        assert!(rec.orthogonality_residual <= 1e-8);
        let v = verify_recovery(&rec.recovery, &noise, &code, 16, 5).unwrap();
        assert!((v.factor - rec.factor).norm() <= 1e-8 && v.max_dev <= 1e-8);
        // alpha' = alpha is diagonal, so u = u' and G'_k = sign(c_k) G_k: the
        // right elements carry the sign and the factor is sum |c_i| = 1.6.
        assert!((rec.factor - re(1.6)).norm() <= 1e-12);

        let id = AnyMap::from(LinearMapRep::identity(2));
        let rec = synthesize_linear_recovery(&CodeProjector::identity(2), &id).unwrap();
        assert!((rec.factor - re(1.0)).norm() <= 1e-12);
        assert!(crate::maps::action_deviation(&rec.recovery, &LinearMapRep::identity(2)).unwrap() <= 1e-12);

        let bad = AnyMap::from(HermitianMapRep::square(8, vec![(1.5, identity(8)), (-0.5, z_on(0))]).unwrap());
        assert!(matches!(synthesize_linear_recovery(&code, &bad), Err(Error::NotCorrectable(_))));
    }

    #[test]
    fn hermitian_recovery_examples() {
        let code = three_qubit_code();
        let noise = ibf(-0.3);
        let rec = synthesize_hermitian_recovery(&code, &noise, None).unwrap();
        assert!((rec.sign_sum - 1.0).abs() <= 1e-12 && (rec.factor - 1.0).abs() <= 1e-12);
        let v = verify_recovery(&rec.recovery, &noise, &code, 16, 6).unwrap();
        assert!((v.factor - re(1.0)).norm() <= 1e-10 && v.max_dev <= 1e-10);

        let mut h = vec![1.0; rec.weights.len()];
        h[0] = 2.0;
        let rec = synthesize_hermitian_recovery(&code, &noise, Some(&h)).unwrap();
        // The leading eigenvector is I with beta = |c0| = 1.9 and sign +1.
        assert!((rec.factor - 2.9).abs() <= 1e-12);
        let v = verify_recovery(&rec.recovery, &noise, &code, 16, 7).unwrap();
        assert!((v.factor - re(rec.factor)).norm() <= 1e-8 && v.max_dev <= 1e-8);

        let rec = synthesize_hermitian_recovery(&code, &noise, Some(&[0.0; 4])).unwrap();
        assert_eq!(rec.factor, 0.0);
        let v = verify_recovery(&rec.recovery, &noise, &code, 4, 8).unwrap();
        assert!(v.factor.norm() == 0.0 && v.max_dev == 0.0);

        assert!(synthesize_hermitian_recovery(&code, &noise, Some(&[1.0])).is_err());
    }

    #[test]
    fn zero_recovery_has_zero_factor() {
        let code = three_qubit_code();
        let zero = RecoveryMapRep { dim: 8, kind: RecoveryKind::Cp(vec![]) };
        let v = verify_recovery(&zero, &ibf(-0.1), &code, 4, 9).unwrap();
        assert_eq!(v.factor, re(0.0));
        assert!(verify_recovery(&zero, &ibf(-0.1), &code, 0, 9).is_err());
    }
}
