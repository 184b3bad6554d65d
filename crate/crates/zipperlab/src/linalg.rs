//! Shared dense and banded linear algebra over C.
//!
//! Everything here is desk-scale: matrices are at most a few thousand rows,
//! blocks are L x L with L <= 8. The only performance-sensitive pieces are
//! the banded LU (resolvent solves on long windows) and the banded matvec
//! (time evolution), both linear in the window length.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Result, ZipperError};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Matrix norm selector used by estimators and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Spectral,
    Frobenius,
}

impl NormKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormKind::Spectral => "spectral",
            NormKind::Frobenius => "frobenius",
        }
    }

    pub fn parse(s: &str) -> Option<NormKind> {
        match s {
            "spectral" => Some(NormKind::Spectral),
            "frobenius" => Some(NormKind::Frobenius),
            _ => None,
        }
    }
}

pub fn cid(l: usize) -> CMat {
    CMat::identity(l, l)
}

pub fn czeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sv = m.clone().singular_values();
    sv.iter().cloned().fold(0.0, f64::max)
}

pub fn fro_norm(m: &CMat) -> f64 {
    m.norm()
}

pub fn mat_norm(m: &CMat, kind: NormKind) -> f64 {
    match kind {
        NormKind::Spectral => spectral_norm(m),
        NormKind::Frobenius => fro_norm(m),
    }
}

/// Smallest singular value.
pub fn smallest_singular(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sv = m.clone().singular_values();
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Hermitian square root of a (numerically) Hermitian PSD matrix.
///
/// Eigenvalues are clamped at zero before the square root so that round-off
/// negativity near a rank-deficient input cannot produce NaNs.
pub fn herm_sqrt(m: &CMat) -> CMat {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let n = eig.eigenvalues.len();
    let mut d = czeros(n, n);
    for i in 0..n {
        let ev = eig.eigenvalues[i].max(0.0);
        d[(i, i)] = C64::new(ev.sqrt(), 0.0);
    }
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

pub fn try_inverse(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

/// Extract the four L x L corner blocks of a 2L x 2L matrix.
pub fn quad_blocks(m: &CMat) -> (CMat, CMat, CMat, CMat) {
    let l = m.nrows() / 2;
    (
        m.view((0, 0), (l, l)).into_owned(),
        m.view((0, l), (l, l)).into_owned(),
        m.view((l, 0), (l, l)).into_owned(),
        m.view((l, l), (l, l)).into_owned(),
    )
}

/// Assemble [[a, b], [c, d]] from four equal-size blocks.
pub fn from_quad(a: &CMat, b: &CMat, c: &CMat, d: &CMat) -> CMat {
    let l = a.nrows();
    let mut m = czeros(2 * l, 2 * l);
    m.view_mut((0, 0), (l, l)).copy_from(a);
    m.view_mut((0, l), (l, l)).copy_from(b);
    m.view_mut((l, 0), (l, l)).copy_from(c);
    m.view_mut((l, l), (l, l)).copy_from(d);
    m
}

/// The indefinite form diag(I_L, -I_L) preserved by transfer matrices on the circle.
pub fn lorentz(l: usize) -> CMat {
    let mut m = cid(2 * l);
    for i in l..2 * l {
        m[(i, i)] = C64::new(-1.0, 0.0);
    }
    m
}

pub fn unitarity_defect(m: &CMat) -> f64 {
    let n = m.ncols();
    spectral_norm(&(m.adjoint() * m - cid(n)))
}

// ---------------------------------------------------------------------------
// Banded LU with partial pivoting (LAPACK-style band storage).
// ---------------------------------------------------------------------------

/// LU factorization of an n x n matrix with lower bandwidth `kl` and upper
/// bandwidth `ku`, with partial pivoting. Storage is column-major band
/// layout with `kl` extra super-rows for pivoting fill-in.
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<C64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Factor a banded matrix given an entry accessor. `get(i, j)` is only
    /// consulted inside the declared band |i - j| <= max(kl, ku).
    pub fn factor(
        n: usize,
        kl: usize,
        ku: usize,
        get: impl Fn(usize, usize) -> C64,
    ) -> Result<BandedLu> {
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![C64::new(0.0, 0.0); ldab * n];
        for j in 0..n {
            let ilo = j.saturating_sub(ku);
            let ihi = (j + kl).min(n - 1);
            for i in ilo..=ihi {
                ab[j * ldab + (kv + i - j)] = get(i, j);
            }
        }
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0usize;
            let mut amax = ab[j * ldab + kv].norm();
            for p in 1..=km {
                let v = ab[j * ldab + kv + p].norm();
                if v > amax {
                    amax = v;
                    jp = p;
                }
            }
            ipiv[j] = j + jp;
            if amax == 0.0 || !amax.is_finite() {
                return Err(ZipperError::SolveFailure { col: j });
            }
            let chi = (j + kv).min(n - 1);
            if jp != 0 {
                for c in j..=chi {
                    let r1 = c * ldab + (kv + j - c);
                    let r2 = c * ldab + (kv + j + jp - c);
                    ab.swap(r1, r2);
                }
            }
            let piv = ab[j * ldab + kv];
            for p in 1..=km {
                let idx = j * ldab + kv + p;
                ab[idx] /= piv;
            }
            for c in (j + 1)..=chi {
                let ujc = ab[c * ldab + (kv + j - c)];
                if ujc.norm_sqr() != 0.0 {
                    for p in 1..=km {
                        let mult = ab[j * ldab + kv + p];
                        ab[c * ldab + (kv + j + p - c)] -= mult * ujc;
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            ku,
            ldab,
            ab,
            ipiv,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solve A x = b in place.
    pub fn solve_in_place(&self, b: &mut [C64]) {
        assert_eq!(b.len(), self.n);
        let kv = self.kl + self.ku;
        for j in 0..self.n {
            if self.ipiv[j] != j {
                b.swap(j, self.ipiv[j]);
            }
            let bj = b[j];
            if bj.norm_sqr() != 0.0 {
                let km = self.kl.min(self.n - 1 - j);
                for p in 1..=km {
                    let mult = self.ab[j * self.ldab + kv + p];
                    b[j + p] -= mult * bj;
                }
            }
        }
        for j in (0..self.n).rev() {
            let chi = (j + kv).min(self.n - 1);
            let mut acc = b[j];
            for c in (j + 1)..=chi {
                acc -= self.ab[c * self.ldab + (kv + j - c)] * b[c];
            }
            b[j] = acc / self.ab[j * self.ldab + kv];
        }
    }

    pub fn solve_vec(&self, b: &CVec) -> CVec {
        let mut x: Vec<C64> = b.iter().cloned().collect();
        self.solve_in_place(&mut x);
        CVec::from_vec(x)
    }
}

// ---------------------------------------------------------------------------
// Weighted least squares on a line.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FitLine {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    pub n_points: usize,
}

/// Weighted least squares of y against x with weights w (w_i ~ 1/sigma_i^2).
/// The slope standard error is scaled by the reduced chi-square, so it stays
/// meaningful when the supplied weights are only relative.
pub fn wls_line(x: &[f64], y: &[f64], w: &[f64]) -> Result<FitLine> {
    let n = x.len();
    if n < 2 || y.len() != n || w.len() != n {
        return Err(ZipperError::InsufficientData {
            required: 2,
            got: n.min(y.len()).min(w.len()),
        });
    }
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let wi = if w[i].is_finite() && w[i] > 0.0 {
            w[i]
        } else {
            1.0
        };
        sw += wi;
        sx += wi * x[i];
        sy += wi * y[i];
        sxx += wi * x[i] * x[i];
        sxy += wi * x[i] * y[i];
    }
    let delta = sw * sxx - sx * sx;
    if delta.abs() < 1e-300 {
        return Err(ZipperError::InsufficientData {
            required: 2,
            got: 1,
        });
    }
    let slope = (sw * sxy - sx * sy) / delta;
    let intercept = (sxx * sy - sx * sxy) / delta;
    let ybar = sy / sw;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for i in 0..n {
        let wi = if w[i].is_finite() && w[i] > 0.0 {
            w[i]
        } else {
            1.0
        };
        let fit = intercept + slope * x[i];
        ss_res += wi * (y[i] - fit) * (y[i] - fit);
        ss_tot += wi * (y[i] - ybar) * (y[i] - ybar);
    }
    let r_squared = if ss_tot < 1e-300 {
        0.0
    } else {
        1.0 - ss_res / ss_tot
    };
    let slope_stderr = if n > 2 {
        ((sw / delta) * (ss_res / (n as f64 - 2.0)).max(0.0)).sqrt()
    } else {
        0.0
    };
    Ok(FitLine {
        slope,
        intercept,
        r_squared,
        slope_stderr,
        n_points: n,
    })
}

// ---------------------------------------------------------------------------
// Compound (exterior-power) matrices and structure maps.
// ---------------------------------------------------------------------------

fn combinations(k: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..p).collect();
    loop {
        out.push(idx.clone());
        let mut i = p;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + k - p {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in (i + 1)..p {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Compound matrix of p x p minors in lexicographic row/column order.
pub fn compound_matrix(m: &CMat, p: usize) -> Result<CMat> {
    let k = m.nrows();
    if k != m.ncols() || k > 8 {
        return Err(ZipperError::DimensionTooLarge { dim: k });
    }
    if p < 1 || p > k {
        return Err(ZipperError::DimensionTooLarge { dim: p });
    }
    let combos = combinations(k, p);
    let dim = combos.len();
    let mut out = czeros(dim, dim);
    for (ri, rows) in combos.iter().enumerate() {
        for (ci, cols) in combos.iter().enumerate() {
            let mut sub = czeros(p, p);
            for (a, &r) in rows.iter().enumerate() {
                for (b, &c) in cols.iter().enumerate() {
                    sub[(a, b)] = m[(r, c)];
                }
            }
            out[(ri, ci)] = sub.determinant();
        }
    }
    Ok(out)
}

/// The fixed Cayley matrix C = (1/sqrt(2)) [[I, -iI], [I, iI]] of size 2L.
pub fn cayley_matrix(l: usize) -> CMat {
    let s = 1.0 / 2.0_f64.sqrt();
    let mut c = czeros(2 * l, 2 * l);
    for i in 0..l {
        c[(i, i)] = C64::new(s, 0.0);
        c[(i, l + i)] = C64::new(0.0, -s);
        c[(l + i, i)] = C64::new(s, 0.0);
        c[(l + i, l + i)] = C64::new(0.0, s);
    }
    c
}

/// Conjugation by the Cayley matrix: C* M C.
pub fn cayley_conjugate(m: &CMat) -> CMat {
    let l = m.nrows() / 2;
    let c = cayley_matrix(l);
    c.adjoint() * m * c
}

/// Realification pi(A + iB) = [[A, -B], [B, A]], a multiplicative map into
/// real matrices of doubled size.
pub fn realify(m: &CMat) -> DMatrix<f64> {
    let (r, c) = (m.nrows(), m.ncols());
    let mut out = DMatrix::<f64>::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let v = m[(i, j)];
            out[(i, j)] = v.re;
            out[(i, c + j)] = -v.im;
            out[(r + i, j)] = v.im;
            out[(r + i, c + j)] = v.re;
        }
    }
    out
}

/// The complex symplectic form J = [[0, -I], [I, 0]] of size 2L.
pub fn symplectic_form(l: usize) -> CMat {
    let mut j = czeros(2 * l, 2 * l);
    for i in 0..l {
        j[(i, l + i)] = C64::new(-1.0, 0.0);
        j[(l + i, i)] = C64::new(1.0, 0.0);
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn banded_lu_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(n, kl, ku) in &[(1usize, 0usize, 0usize), (7, 2, 1), (24, 5, 5), (60, 3, 7)] {
            let mut dense = czeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if j + kl >= i && i + ku >= j {
                        dense[(i, j)] =
                            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                    }
                }
                dense[(i, i)] += C64::new(3.0, 0.0);
            }
            let lu = BandedLu::factor(n, kl, ku, |i, j| dense[(i, j)]).unwrap();
            let b = CVec::from_fn(n, |i, _| C64::new(i as f64 + 0.25, -(i as f64) * 0.5));
            let x = lu.solve_vec(&b);
            let res = (&dense * &x - &b).norm() / b.norm();
            assert!(res < 1e-11, "n={n} kl={kl} ku={ku} residual {res}");
        }
    }

    #[test]
    fn banded_lu_needs_pivoting_case() {
        // Zero on the first diagonal entry forces a row swap.
        let dense = CMat::from_row_slice(
            3,
            3,
            &[
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(2.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(3.0, 0.0),
            ],
        );
        let lu = BandedLu::factor(3, 1, 1, |i, j| dense[(i, j)]).unwrap();
        let b = CVec::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(2.0, -1.0),
        ]);
        let x = lu.solve_vec(&b);
        assert!(((&dense * &x) - &b).norm() < 1e-12);
    }

    #[test]
    fn banded_lu_reports_singularity() {
        let err = BandedLu::factor(2, 0, 0, |_, _| C64::new(0.0, 0.0));
        assert!(matches!(err, Err(ZipperError::SolveFailure { .. })));
    }

    #[test]
    fn herm_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = rand_cmat(&mut rng, 4, 4);
        let h = &a * a.adjoint();
        let r = herm_sqrt(&h);
        assert!(spectral_norm(&(&r * &r - &h)) < 1e-10);
        assert!(spectral_norm(&(&r - r.adjoint())) < 1e-10);
    }

    #[test]
    fn herm_sqrt_clamps_negative_roundoff() {
        // Rank-deficient PSD matrix whose tiny eigenvalue may round negative.
        let v = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]);
        let h = &v * v.adjoint() * C64::new(1e-18, 0.0);
        let r = herm_sqrt(&h);
        assert!(r.iter().all(|e| e.re.is_finite() && e.im.is_finite()));
    }

    #[test]
    fn wls_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.3 * v).collect();
        let w = [1.0; 5];
        let fit = wls_line(&x, &y, &w).unwrap();
        assert!((fit.slope + 0.3).abs() < 1e-12);
        assert!((fit.intercept - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wls_flat_data_has_zero_r_squared() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [5.0; 4];
        let w = [1.0; 4];
        let fit = wls_line(&x, &y, &w).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert_eq!(fit.r_squared, 0.0);
    }

    #[test]
    fn compound_matrix_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = rand_cmat(&mut rng, 4, 4);
        let n = rand_cmat(&mut rng, 4, 4);
        let lhs = compound_matrix(&(&m * &n), 2).unwrap();
        let rhs = compound_matrix(&m, 2).unwrap() * compound_matrix(&n, 2).unwrap();
        assert!(spectral_norm(&(lhs - rhs)) < 1e-10);
    }

    #[test]
    fn compound_edge_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = rand_cmat(&mut rng, 3, 3);
        let p1 = compound_matrix(&m, 1).unwrap();
        assert!(spectral_norm(&(&p1 - &m)) < 1e-14);
        let pk = compound_matrix(&m, 3).unwrap();
        assert_eq!(pk.nrows(), 1);
        assert!((pk[(0, 0)] - m.determinant()).norm() < 1e-12);
        assert!(matches!(
            compound_matrix(&m, 4),
            Err(ZipperError::DimensionTooLarge { .. })
        ));
    }

    #[test]
    fn realify_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = rand_cmat(&mut rng, 3, 3);
        let n = rand_cmat(&mut rng, 3, 3);
        let lhs = realify(&(&m * &n));
        let rhs = realify(&m) * realify(&n);
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn cayley_sends_lorentz_to_symplectic() {
        // C* L C = i J links the indefinite form to the symplectic form.
        let l = 2;
        let lhs = cayley_conjugate(&lorentz(l));
        let rhs = symplectic_form(l) * C64::new(0.0, 1.0);
        assert!(spectral_norm(&(lhs - rhs)) < 1e-12);
    }
}
