//! Generalized Bloch vectors and the positivity domain `{rho : Phi(rho) >= 0}`
//! of a map, found by scanning rays out of the maximally mixed state.

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::QuantumMap;
use crate::numerics::{
    c, eigh, hermiticity_residual, identity, is_hermitian, min_eigenvalue, re, trace, CMatrix,
    EPS_HERM,
};
use crate::random::{gaussian, seeded};

/// Tolerance of the positivity predicate: `min eig >= -EPS_POS`.
pub const EPS_POS: f64 = 1e-10;
pub const DEFAULT_GRID: usize = 64;
pub const DEFAULT_TOL: f64 = 1e-8;

/// Traceless Hermitian basis `{F_mu}` with `Tr(F_mu F_nu) = N delta_mu_nu`.
#[derive(Debug, Clone)]
pub struct BlochBasis {
    n: usize,
    f: Vec<CMatrix>,
}

impl BlochBasis {
    /// Generalized Gell-Mann matrices scaled by `sqrt(N/2)`: symmetric pairs
    /// `j<k`, then antisymmetric pairs, then the diagonal family.
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("Bloch basis needs N >= 2, got {n}")));
        }
        let scale = (n as f64 / 2.0).sqrt();
        let pairs: Vec<(usize, usize)> =
            (0..n).flat_map(|j| (j + 1..n).map(move |k| (j, k))).collect();
        let mut f = Vec::with_capacity(n * n - 1);
        for &(j, k) in &pairs {
            let mut m = CMatrix::zeros(n, n);
            m[(j, k)] = re(scale);
            m[(k, j)] = re(scale);
            f.push(m);
        }
        for &(j, k) in &pairs {
            let mut m = CMatrix::zeros(n, n);
            m[(j, k)] = c(0.0, -scale);
            m[(k, j)] = c(0.0, scale);
            f.push(m);
        }
        for l in 1..n {
            let norm = scale * (2.0 / (l * (l + 1)) as f64).sqrt();
            let mut m = CMatrix::zeros(n, n);
            for k in 0..l {
                m[(k, k)] = re(norm);
            }
            m[(l, l)] = re(-norm * l as f64);
            f.push(m);
        }
        Ok(Self { n, f })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.f
    }

    /// `F_n = sum_mu n_mu F_mu`.
    pub fn combine(&self, coeffs: &[f64]) -> Result<CMatrix> {
        if coeffs.len() != self.f.len() {
            return Err(Error::Shape(format!(
                "expected {} Bloch components, got {}",
                self.f.len(),
                coeffs.len()
            )));
        }
        let mut out = CMatrix::zeros(self.n, self.n);
        for (x, f) in coeffs.iter().zip(&self.f) {
            out += f * re(*x);
        }
        Ok(out)
    }

    /// Max entrywise deviation of `Tr(F_mu F_nu)` from `N delta_mu_nu`, and of
    /// `Tr F_mu` from zero.
    pub fn orthogonality_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (a, fa) in self.f.iter().enumerate() {
            worst = worst.max(trace(fa).norm());
            for (b, fb) in self.f.iter().enumerate() {
                let target = if a == b { self.n as f64 } else { 0.0 };
                worst = worst.max((fa.dotc(fb) - re(target)).norm());
            }
        }
        worst
    }
}

/// Real coefficients `b_mu = Tr(rho F_mu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochVector {
    pub dim: usize,
    pub b: Vec<f64>,
}

pub fn bloch_from_rho(rho: &CMatrix, basis: &BlochBasis) -> Result<BlochVector> {
    if rho.shape() != (basis.n, basis.n) {
        return Err(Error::Shape(format!("state must be {0}x{0}", basis.n)));
    }
    if !is_hermitian(rho, EPS_HERM) {
        return Err(Error::NotHermitian { residual: hermiticity_residual(rho) });
    }
    let tr = trace(rho);
    if (tr - re(1.0)).norm() > 1e-10 {
        return Err(Error::InvalidInput(format!("state trace is {tr}, expected 1")));
    }
    let b = basis.f.iter().map(|f| (rho * f).trace().re).collect();
    Ok(BlochVector { dim: basis.n, b })
}

/// `rho = (I + sum_mu b_mu F_mu) / N`.
pub fn rho_from_bloch(b: &[f64], basis: &BlochBasis) -> Result<CMatrix> {
    let n = basis.n as f64;
    Ok((identity(basis.n) + basis.combine(b)?) / re(n))
}

fn check_direction(dir: &[f64], basis: &BlochBasis) -> Result<()> {
    if dir.len() != basis.len() {
        return Err(Error::Shape(format!(
            "direction has {} components, expected {}",
            dir.len(),
            basis.len()
        )));
    }
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidInput("direction is the zero vector".into()));
    }
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!("direction has norm {norm}, expected 1")));
    }
    Ok(())
}

/// Largest `r` such that `rho_from_bloch(r n)` is PSD: `1 / |min eig F_n|`.
pub fn bloch_radius(dir: &[f64], basis: &BlochBasis) -> Result<f64> {
    check_direction(dir, basis)?;
    let m = min_eigenvalue(&basis.combine(dir)?)?;
    Ok(1.0 / m.abs())
}

/// Whether `out` is a positive semidefinite operator within `EPS_POS`.
pub fn is_positive(out: &CMatrix) -> bool {
    if !is_hermitian(out, EPS_HERM) {
        return false;
    }
    min_eigenvalue(out).is_ok_and(|m| m >= -EPS_POS)
}

fn check_state(rho: &CMatrix, n: usize) -> Result<()> {
    if rho.shape() != (n, n) {
        return Err(Error::Shape(format!("state must be {n}x{n}")));
    }
    if !is_hermitian(rho, EPS_HERM) {
        return Err(Error::InvalidInput("state is not Hermitian".into()));
    }
    if (trace(rho) - re(1.0)).norm() > 1e-10 {
        return Err(Error::InvalidInput("state does not have unit trace".into()));
    }
    if eigh(rho)?.values.last().is_some_and(|&m| m < -EPS_POS) {
        return Err(Error::InvalidInput("state is not positive semidefinite".into()));
    }
    Ok(())
}

/// Membership in the positivity domain of `map`.
pub fn contains<M: QuantumMap + ?Sized>(map: &M, rho: &CMatrix) -> Result<bool> {
    check_state(rho, map.dim_in())?;
    Ok(is_positive(&map.apply(rho)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    pub grid: usize,
    pub tol: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { grid: DEFAULT_GRID, tol: DEFAULT_TOL }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Directions {
    /// `count` directions from normalized standard Gaussians.
    Random { count: usize, seed: u64 },
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub direction: Vec<f64>,
    pub r_bloch: f64,
    /// Radii where positivity of `Phi(rho_n(r))` changes, ascending. A ray
    /// that stays positive up to the state boundary reports `r_bloch`.
    pub crossings: Vec<f64>,
    pub origin_positive: bool,
    /// Set when the coarse grid saw more than two sign changes.
    pub diagnostic: Option<String>,
}

impl BoundaryPoint {
    /// Radial interval `[lo, hi]` along the ray that lies in the domain.
    pub fn interior_interval(&self) -> Option<(f64, f64)> {
        match (self.origin_positive, self.crossings.as_slice()) {
            (true, [first, ..]) => Some((0.0, *first)),
            (false, [a]) => Some((*a, self.r_bloch)),
            (false, [a, b, ..]) => Some((*a, *b)),
            _ => None,
        }
    }
}

pub fn random_directions(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded(seed);
    (0..count)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| gaussian(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect()
}

struct Ray<'a, M: ?Sized> {
    map: &'a M,
    basis: &'a BlochBasis,
    f_n: CMatrix,
}

impl<M: QuantumMap + ?Sized> Ray<'_, M> {
    fn positive(&self, r: f64) -> Result<bool> {
        let n = self.basis.n;
        let rho = (identity(n) + &self.f_n * re(r)) / re(n as f64);
        Ok(is_positive(&self.map.apply(&rho)?))
    }

    fn bisect(&self, mut lo: f64, mut hi: f64, lo_state: bool, tol: f64) -> Result<f64> {
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.positive(mid)? == lo_state {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn scan_direction<M: QuantumMap + ?Sized>(
    map: &M,
    basis: &BlochBasis,
    dir: &[f64],
    cfg: ScanConfig,
) -> Result<BoundaryPoint> {
    let r_bloch = bloch_radius(dir, basis)?;
    let ray = Ray { map, basis, f_n: basis.combine(dir)? };
    let steps = cfg.grid.max(2) - 1;
    let radii: Vec<f64> = (0..=steps).map(|k| r_bloch * k as f64 / steps as f64).collect();
    let states = radii.iter().map(|&r| ray.positive(r)).collect::<Result<Vec<_>>>()?;
    let origin_positive = states[0];
    let mut crossings = Vec::new();
    for k in 0..steps {
        if states[k] != states[k + 1] {
            crossings.push(ray.bisect(radii[k], radii[k + 1], states[k], cfg.tol)?);
        }
    }
    let diagnostic = (crossings.len() > 2).then(|| {
        format!("{} sign changes along the ray, expected at most 2", crossings.len())
    });
    if origin_positive && crossings.is_empty() {
        crossings.push(r_bloch);
    }
    Ok(BoundaryPoint { direction: dir.to_vec(), r_bloch, crossings, origin_positive, diagnostic })
}

/// Coarse grid plus bisection along each direction; results keep input order.
pub fn scan_boundary<M: QuantumMap + Sync + ?Sized>(
    map: &M,
    directions: &Directions,
    cfg: ScanConfig,
) -> Result<Vec<BoundaryPoint>> {
    if map.dim_in() != map.dim_out() {
        return Err(Error::Shape("positivity scan needs a square map".into()));
    }
    if cfg.tol.is_nan() || cfg.tol <= 0.0 {
        return Err(Error::InvalidInput(format!("bisection tolerance must be positive, got {}", cfg.tol)));
    }
    let basis = BlochBasis::new(map.dim_in())?;
    let dirs = match directions {
        Directions::Random { count, seed } => random_directions(*count, basis.len(), *seed),
        Directions::Explicit(list) => list.clone(),
    };
    dirs.par_iter().map(|d| scan_direction(map, &basis, d, cfg)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvexityReport {
    pub pairs: usize,
    pub violations: usize,
}

/// Draw random interior points from scanned rays and test that midpoints of
/// random pairs stay in the domain.
pub fn midpoint_convexity<M: QuantumMap + Sync + ?Sized>(
    map: &M,
    points: &[BoundaryPoint],
    pairs: usize,
    seed: u64,
) -> Result<ConvexityReport> {
    let basis = BlochBasis::new(map.dim_in())?;
    let usable: Vec<_> = points.iter().filter_map(|p| p.interior_interval().map(|i| (p, i))).collect();
    if usable.is_empty() {
        return Ok(ConvexityReport { pairs: 0, violations: 0 });
    }
    let mut rng = seeded(seed);
    let draw = |rng: &mut crate::random::Rng| {
        let (p, (lo, hi)) = usable[rng.random_range(0..usable.len())];
        let r = lo + (hi - lo) * rng.random::<f64>();
        p.direction.iter().map(|x| x * r).collect::<Vec<f64>>()
    };
    let samples: Vec<(Vec<f64>, Vec<f64>)> =
        (0..pairs).map(|_| (draw(&mut rng), draw(&mut rng))).collect();
    let violations = samples
        .par_iter()
        .map(|(a, b)| {
            let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
            let rho = rho_from_bloch(&mid, &basis)?;
            Ok(usize::from(!contains(map, &rho)?))
        })
        .sum::<Result<usize>>()?;
    Ok(ConvexityReport { pairs, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{inverse_phase_flip, phase_flip, LinearMapRep};
    use crate::numerics::{from_real_rows, max_abs_diff, pauli};
    use crate::random::random_density;

    #[test]
    fn qubit_basis_is_pauli() {
        let b = BlochBasis::new(2).unwrap();
        assert_eq!(b.elements(), &[pauli::x(), pauli::y(), pauli::z()]);
        assert!(BlochBasis::new(1).is_err());
    }

    #[test]
    fn basis_normalization() {
        for n in 2..=6 {
            let b = BlochBasis::new(n).unwrap();
            assert_eq!(b.len(), n * n - 1);
            assert!(b.orthogonality_residual() <= 1e-12, "N = {n}");
            for f in b.elements() {
                assert!(is_hermitian(f, 0.0));
            }
        }
        let q = BlochBasis::new(3).unwrap();
        let lambda8 = from_real_rows(3, 3, &[1., 0., 0., 0., 1., 0., 0., 0., -2.]) / re(3f64.sqrt());
        assert!(max_abs_diff(&q.elements()[7], &(lambda8 * re(1.5f64.sqrt()))) < 1e-15);
    }

    #[test]
    fn bloch_round_trip() {
        let b2 = BlochBasis::new(2).unwrap();
        let v = bloch_from_rho(&(identity(2) / re(2.0)), &b2).unwrap();
        assert!(v.b.iter().all(|x| x.abs() < 1e-15));
        let zero = from_real_rows(2, 2, &[1., 0., 0., 0.]);
        assert_eq!(bloch_from_rho(&zero, &b2).unwrap().b, vec![0.0, 0.0, 1.0]);

        let b3 = BlochBasis::new(3).unwrap();
        let mut rng = seeded(3);
        let rho = random_density(&mut rng, 3);
        let v = bloch_from_rho(&rho, &b3).unwrap();
        for (mu, f) in b3.elements().iter().enumerate() {
            assert!((v.b[mu] - (&rho * f).trace().re).abs() < 1e-14);
        }
        assert!(max_abs_diff(&rho_from_bloch(&v.b, &b3).unwrap(), &rho) <= 1e-12);
        assert!(bloch_from_rho(&identity(2), &b2).is_err());
    }

    #[test]
    fn radius_examples() {
        let b2 = BlochBasis::new(2).unwrap();
        for d in random_directions(20, 3, 5) {
            assert!((bloch_radius(&d, &b2).unwrap() - 1.0).abs() <= 1e-12);
        }
        let b3 = BlochBasis::new(3).unwrap();
        let axis = |k: usize, s: f64| {
            let mut d = vec![0.0; 8];
            d[k] = s;
            d
        };
        assert!((bloch_radius(&axis(7, 1.0), &b3).unwrap() - 0.5f64.sqrt()).abs() <= 1e-10);
        assert!((bloch_radius(&axis(7, -1.0), &b3).unwrap() - 2f64.sqrt()).abs() <= 1e-10);
        assert!((bloch_radius(&axis(6, 1.0), &b3).unwrap() - (2.0f64 / 3.0).sqrt()).abs() <= 1e-10);
        assert!(bloch_radius(&[0.0; 8], &b3).is_err());
        assert!(bloch_radius(&[1.0, 1.0, 0.0], &b2).is_err());
    }

    #[test]
    fn radius_is_the_psd_edge() {
        for n in [2, 3, 4] {
            let b = BlochBasis::new(n).unwrap();
            for d in random_directions(50, b.len(), 100 + n as u64) {
                let r = bloch_radius(&d, &b).unwrap();
                let at = |s: f64| {
                    let v: Vec<f64> = d.iter().map(|x| x * s).collect();
                    min_eigenvalue(&rho_from_bloch(&v, &b).unwrap()).unwrap()
                };
                assert!(at(r * (1.0 - 1e-6)) >= 0.0);
                assert!(at(r * (1.0 + 1e-6)) < 0.0);
            }
        }
    }

    #[test]
    fn contains_examples() {
        let plus = from_real_rows(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let ipf = inverse_phase_flip(0.25).unwrap();
        assert!(contains(&LinearMapRep::identity(2), &plus).unwrap());
        assert!(!contains(&ipf, &plus).unwrap());
        assert!(contains(&ipf, &(identity(2) / re(2.0))).unwrap());
        assert!(contains(&ipf, &identity(2)).is_err());
    }

    #[test]
    fn scan_identity_is_the_bloch_ball() {
        let pts = scan_boundary(
            &LinearMapRep::identity(2),
            &Directions::Random { count: 32, seed: 1 },
            ScanConfig::default(),
        )
        .unwrap();
        for p in pts {
            assert_eq!(p.crossings.len(), 1);
            assert!((p.crossings[0] - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn scan_inverse_phase_flip() {
        let s = 0.5f64.sqrt();
        let dirs = Directions::Explicit(vec![vec![1., 0., 0.], vec![0., 0., 1.], vec![s, 0., s]]);
        let pts = scan_boundary(&inverse_phase_flip(0.25).unwrap(), &dirs, ScanConfig::default())
            .unwrap();
        let expect = [0.5, 1.0, 0.4f64.sqrt()];
        for (p, e) in pts.iter().zip(expect) {
            assert!(p.origin_positive);
            assert_eq!(p.crossings.len(), 1);
            assert!((p.crossings[0] - e).abs() <= 1e-6, "{p:?}");
        }
    }

    #[test]
    fn scan_is_deterministic_and_ordered() {
        let map = inverse_phase_flip(0.3).unwrap();
        let dirs = Directions::Random { count: 40, seed: 11 };
        let a = scan_boundary(&map, &dirs, ScanConfig::default()).unwrap();
        let b = scan_boundary(&map, &dirs, ScanConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].direction, random_directions(1, 3, 11)[0]);
    }

    #[test]
    fn ray_without_sign_change_ends_at_state_boundary() {
        let map = inverse_phase_flip(0.25).unwrap();
        let pts = scan_boundary(&map, &Directions::Explicit(vec![vec![0.0, 0.0, 1.0]]), ScanConfig::default())
            .unwrap();
        assert_eq!(pts[0].crossings, vec![pts[0].r_bloch]);
        let (lo, hi) = pts[0].interior_interval().unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn scan_without_interior_origin() {
        let neg = crate::maps::HermitianMapRep::square(2, vec![(-1.0, identity(2))]).unwrap();
        let pts = scan_boundary(&neg, &Directions::Random { count: 8, seed: 2 }, ScanConfig::default())
            .unwrap();
        for p in pts {
            assert!(!p.origin_positive && p.crossings.is_empty() && p.diagnostic.is_none());
            assert!(p.interior_interval().is_none());
        }

        // rho -> rho - 0.4 Tr(rho) |2><2| on a qutrit: I/3 is mapped outside,
        // and along -F_8 the domain starts at r = 0.2 / sqrt(2).
        let mut elements = vec![(identity(3), identity(3))];
        for k in 0..3 {
            let unit = crate::numerics::matrix_unit(3, 2, k);
            elements.push((&unit * re(-0.4), unit));
        }
        let map = LinearMapRep::new(3, 3, elements).unwrap();
        let mut dir = vec![0.0; 8];
        dir[7] = -1.0;
        let p = &scan_boundary(&map, &Directions::Explicit(vec![dir]), ScanConfig::default())
            .unwrap()[0];
        assert!(!p.origin_positive);
        assert_eq!(p.crossings.len(), 1);
        assert!((p.crossings[0] - 0.2 / 2f64.sqrt()).abs() <= 1e-8);
    }

    #[test]
    fn convexity_of_scanned_domain() {
        let map = inverse_phase_flip(0.25).unwrap();
        let pts = scan_boundary(&map, &Directions::Random { count: 64, seed: 4 }, ScanConfig::default())
            .unwrap();
        let rep = midpoint_convexity(&map, &pts, 200, 9).unwrap();
        assert_eq!(rep, ConvexityReport { pairs: 200, violations: 0 });
        let cp = phase_flip(0.2).unwrap();
        let pts = scan_boundary(&cp, &Directions::Random { count: 16, seed: 4 }, ScanConfig::default())
            .unwrap();
        assert!(pts.iter().all(|p| p.crossings.len() == 1 && (p.crossings[0] - p.r_bloch).abs() < 1e-12));
    }
}
