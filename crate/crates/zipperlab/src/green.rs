//! Green kernels of finite zippers.
//!
//! The resolvent block G(z, k, l) of a finite window is computed two ways:
//! a banded LU solve on the assembled operator, and corner formulas wired
//! from transfer-matrix products and the boundary unitaries. The module
//! also carries the three-term recurrences the kernel satisfies inside the
//! window, the Schur-complement bundle that lower-bounds inverse transfer
//! products, and the arithmetic-geometric contraction data that controls
//! corner decay.

use crate::disorder::{check_boundary_unitary, DisorderWindow, ZipperParams};
use crate::error::{Result, SchurQuantity, ZipperError};
use crate::linalg::{
    cid, czeros, fro_norm, quad_blocks, smallest_singular, spectral_norm, try_inverse, BandedLu,
    C64, CMat, CVec,
};
use crate::transfer::{elementary_factor, TransferProduct};
use crate::zipper_operator::BlockBandedUnitary;

/// One L x L block of the resolvent (U^{[a,b]} - z)^{-1}.
#[derive(Debug, Clone)]
pub struct GreenBlock {
    pub block: CMat,
    pub z: C64,
    pub row: i64,
    pub col: i64,
    pub interval: (i64, i64),
    /// Spectral norm of the block.
    pub norm: f64,
    /// Conditioning warning: |z| within 1e-6 of the unit circle. The solve
    /// still runs; finite windows are singular only at actual eigenvalues.
    pub near_unit_circle: bool,
}

/// Whether a corner interval starts on an even or odd block index. The
/// corner formulas cover intervals [2n, 2m+1] and [2n+1, 2m+1]; even-end
/// intervals are served by the direct solver only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartParity {
    Even,
    Odd,
}

impl StartParity {
    pub fn as_str(self) -> &'static str {
        match self {
            StartParity::Even => "even",
            StartParity::Odd => "odd",
        }
    }

    pub fn parse(s: &str) -> Result<StartParity> {
        match s {
            "even" => Ok(StartParity::Even),
            "odd" => Ok(StartParity::Odd),
            other => Err(ZipperError::ConfigInvalid(format!(
                "unknown start parity '{other}' (expected even|odd)"
            ))),
        }
    }
}

/// Banded LU factorization of (U^{[a,b]} - z), reusable across right-hand
/// sides. The scalar bandwidth is 3L - 1 on both sides.
pub struct GreenSolver {
    lu: BandedLu,
    a: i64,
    b: i64,
    l: usize,
    z: C64,
}

impl GreenSolver {
    pub fn new(op: &BlockBandedUnitary, z: C64) -> Result<GreenSolver> {
        let n = op.dim();
        let bw = op.scalar_bandwidth();
        let lu = BandedLu::factor(n, bw, bw, |i, j| {
            let mut e = op.scalar_entry(i, j);
            if i == j {
                e -= z;
            }
            e
        })?;
        Ok(GreenSolver {
            lu,
            a: op.lo(),
            b: op.hi(),
            l: op.channels(),
            z,
        })
    }

    pub fn z(&self) -> C64 {
        self.z
    }

    pub fn interval(&self) -> (i64, i64) {
        (self.a, self.b)
    }

    pub fn near_unit_circle(&self) -> bool {
        (self.z.norm() - 1.0).abs() < 1e-6
    }

    /// Full solution of (U - z) x = e_{col,q}; x holds column (col, q) of
    /// the resolvent in flattened coordinates.
    pub fn solve_unit_column(&self, col: i64, q: usize) -> Result<CVec> {
        if col < self.a || col > self.b || q >= self.l {
            return Err(ZipperError::InvalidAnchor(format!(
                "column ({col}, {q}) outside window [{}, {}] with {} channels",
                self.a, self.b, self.l
            )));
        }
        let n = ((self.b - self.a + 1) as usize) * self.l;
        let mut rhs = vec![C64::new(0.0, 0.0); n];
        rhs[((col - self.a) as usize) * self.l + q] = C64::new(1.0, 0.0);
        self.lu.solve_in_place(&mut rhs);
        Ok(CVec::from_vec(rhs))
    }

    /// Several row blocks of one resolvent block column, from a single set
    /// of L solves.
    pub fn column_blocks(&self, col: i64, rows: &[i64]) -> Result<Vec<CMat>> {
        let mut cols = Vec::with_capacity(self.l);
        for q in 0..self.l {
            cols.push(self.solve_unit_column(col, q)?);
        }
        rows.iter()
            .map(|&r| {
                if r < self.a || r > self.b {
                    return Err(ZipperError::InvalidAnchor(format!(
                        "row {r} outside window [{}, {}]",
                        self.a, self.b
                    )));
                }
                let off = ((r - self.a) as usize) * self.l;
                let mut blk = czeros(self.l, self.l);
                for (q, col_vec) in cols.iter().enumerate() {
                    for p in 0..self.l {
                        blk[(p, q)] = col_vec[off + p];
                    }
                }
                Ok(blk)
            })
            .collect()
    }

    pub fn block(&self, row: i64, col: i64) -> Result<CMat> {
        Ok(self.column_blocks(col, &[row])?.pop().unwrap())
    }

    pub fn green_block(&self, row: i64, col: i64) -> Result<GreenBlock> {
        let block = self.block(row, col)?;
        Ok(GreenBlock {
            norm: spectral_norm(&block),
            block,
            z: self.z,
            row,
            col,
            interval: (self.a, self.b),
            near_unit_circle: self.near_unit_circle(),
        })
    }
}

/// Resolvent block by banded LU on the assembled window operator.
pub fn green_direct(op: &BlockBandedUnitary, z: C64, row: i64, col: i64) -> Result<GreenBlock> {
    GreenSolver::new(op, z)?.green_block(row, col)
}

/// Corner resolvent block G(z, a, 2m+1) from a transfer-matrix product,
/// without assembling the operator.
///
/// Even start (a = 2n), with P = t_{2m} ... t_{2n} and boundaries U, V:
///   G = -z^{-1} [ (P21 - V P11) U + (P22 - V P12) ]^{-1} V.
/// Odd start (a = 2n+1), with Q = t_{2m} ... t_{2n+1}:
///   G = -z^{-1} [ (Q21 - V Q11) + z (Q22 - V Q12) U* ]^{-1} V.
#[allow(clippy::too_many_arguments)]
pub fn green_via_transfer(
    params: &ZipperParams,
    window: &DisorderWindow,
    z: C64,
    n: i64,
    m: i64,
    boundary_u: &CMat,
    boundary_v: &CMat,
    parity: StartParity,
) -> Result<GreenBlock> {
    if m - n <= 2 {
        return Err(ZipperError::InvalidAnchor(format!(
            "corner formula needs m - n > 2, got n = {n}, m = {m}"
        )));
    }
    check_boundary_unitary(boundary_u)?;
    check_boundary_unitary(boundary_v)?;
    if boundary_u.nrows() != params.l || boundary_v.nrows() != params.l {
        return Err(ZipperError::DimensionMismatch {
            expected: params.l,
            got: boundary_u.nrows().max(boundary_v.nrows()),
        });
    }
    let a = match parity {
        StartParity::Even => 2 * n,
        StartParity::Odd => 2 * n + 1,
    };
    let b = 2 * m + 1;
    if !window.contains((a, b)) {
        return Err(ZipperError::InsufficientWindow {
            need_lo: a,
            need_hi: b,
            have_lo: window.lo(),
            have_hi: window.hi(),
        });
    }
    let mut p = cid(2 * params.l);
    for j in a..=2 * m {
        p = elementary_factor(z, window.site(j))? * p;
    }
    let (p11, p12, p21, p22) = quad_blocks(&p);
    let top = &p21 - boundary_v * &p11;
    let bot = &p22 - boundary_v * &p12;
    let bracket = match parity {
        StartParity::Even => &top * boundary_u + &bot,
        StartParity::Odd => &top + (&bot * boundary_u.adjoint()) * z,
    };
    let sigma = smallest_singular(&bracket);
    if sigma < 1e-10 {
        return Err(ZipperError::IllConditionedE { sigma_min: sigma });
    }
    let inv = try_inverse(&bracket).ok_or(ZipperError::IllConditionedE { sigma_min: sigma })?;
    let block = (inv * boundary_v) * (-C64::new(1.0, 0.0) / z);
    Ok(GreenBlock {
        norm: spectral_norm(&block),
        block,
        z,
        row: a,
        col: b,
        interval: (a, b),
        near_unit_circle: (z.norm() - 1.0).abs() < 1e-6,
    })
}

/// The boundary terms (K; L) = t_{2m+1}(z) t_{2m}(z) (-z^{-1} I; 0): the
/// right-edge data entering the corner formulas. Returns (K, L).
pub fn corner_terms(z: C64, window: &DisorderWindow, m: i64) -> Result<(CMat, CMat)> {
    if !window.contains((2 * m, 2 * m + 1)) {
        return Err(ZipperError::InsufficientWindow {
            need_lo: 2 * m,
            need_hi: 2 * m + 1,
            have_lo: window.lo(),
            have_hi: window.hi(),
        });
    }
    let l = window.site(2 * m).block.alpha.nrows();
    let mut rhs = czeros(2 * l, l);
    let s = -C64::new(1.0, 0.0) / z;
    for p in 0..l {
        rhs[(p, p)] = s;
    }
    let step = elementary_factor(z, window.site(2 * m))? * rhs;
    let prod = elementary_factor(z, window.site(2 * m + 1))? * step;
    Ok((
        prod.view((0, 0), (l, l)).into_owned(),
        prod.view((l, 0), (l, l)).into_owned(),
    ))
}

/// Uniform bound on ||L - V K|| over the outer annulus 1 <= |z| < 1 + eps.
/// On the inner annulus the same expression can be exceeded; see the
/// corner-term tests for the regime actually asserted.
pub fn kappa_bound(sigma: f64, epsilon: f64) -> f64 {
    let s2 = 1.0 - sigma * sigma;
    (1.0 / s2) * (sigma / s2.sqrt() + 1.0 / (1.0 - epsilon) + (1.0 - epsilon) * sigma + sigma * sigma)
}

// ---------------------------------------------------------------------------
// Resolvent recurrences
// ---------------------------------------------------------------------------

fn inv_structural(m: &CMat, site: i64) -> Result<CMat> {
    // beta and gamma have smallest singular value >= sqrt(1 - ||alpha||^2);
    // degeneracy here signals corrupted input, not bad luck.
    if smallest_singular(m) < 1e-12 {
        return Err(ZipperError::SingularGamma { site });
    }
    try_inverse(m).ok_or(ZipperError::SingularGamma { site })
}

fn inv_alpha_like(m: &CMat) -> Result<CMat> {
    let s = smallest_singular(m);
    if s < 1e-12 {
        return Err(ZipperError::SingularAlpha { sigma_min: s });
    }
    try_inverse(m).ok_or(ZipperError::SingularAlpha { sigma_min: s })
}

/// Residuals of the two row recurrences tying three consecutive resolvent
/// blocks in column l, anchored at even k:
///onos
///   (gamma_k*)^{-1} [ gamma_{k-1} G(k-1,l) + (delta_{k-1} - z alpha_k*) G(k,l) ] = z G(k+1,l)
///   z G(k,l) = (beta_k*)^{-1} [ (alpha_{k+1} - z delta_k*) G(k+1,l) + beta_{k+1} G(k+2,l) ]
///
/// Both vanish identically when l stays away from rows k, k+1.
pub fn recurrence_residual(
    op: &BlockBandedUnitary,
    z: C64,
    k: i64,
    l: i64,
) -> Result<(f64, f64)> {
    let (a, b) = (op.lo(), op.hi());
    if k.rem_euclid(2) != 0 {
        return Err(ZipperError::InvalidAnchor(format!(
            "row recurrences anchor at an even block index, got k = {k}"
        )));
    }
    if k - 1 < a || k + 2 > b {
        return Err(ZipperError::InvalidAnchor(format!(
            "row recurrences need blocks {} ..= {} inside [{a}, {b}]",
            k - 1,
            k + 2
        )));
    }
    if l < a || l > b {
        return Err(ZipperError::InvalidAnchor(format!(
            "column {l} outside [{a}, {b}]"
        )));
    }
    if (l - k).abs() <= 1 {
        return Err(ZipperError::InvalidAnchor(format!(
            "column l = {l} touches the recurrence rows at k = {k}"
        )));
    }
    let window = op.provenance().ok_or_else(|| {
        ZipperError::MissingInput("recurrence check needs the disorder window".into())
    })?;
    let solver = GreenSolver::new(op, z)?;
    let g = solver.column_blocks(l, &[k - 1, k, k + 1, k + 2])?;
    let skm = &window.site(k - 1).block;
    let sk = &window.site(k).block;
    let skp = &window.site(k + 1).block;
    let gk_star_inv = inv_structural(&sk.gamma, k)?.adjoint();
    let bk_star_inv = inv_structural(&sk.beta, k)?.adjoint();
    let r1 = &gk_star_inv * (&skm.gamma * &g[0] + (&skm.delta - sk.alpha.adjoint() * z) * &g[1])
        - &g[2] * z;
    let r2 = &g[1] * z
        - &bk_star_inv * ((&skp.alpha - sk.delta.adjoint() * z) * &g[2] + &skp.beta * &g[3]);
    Ok((spectral_norm(&r1), spectral_norm(&r2)))
}

/// Residuals of the two column recurrences tying consecutive resolvent
/// blocks in row k, anchored at even column c:
///
///   z G(k,c-1) a_{c-1}^{-1} b_{c-1} = G(k,c) (zI - a_c (d_{c-1}*)^{-1}) - G(k,c+1) g_c (d_{c-1}*)^{-1}
///   z G(k,c) = G(k,c-2) b_{c-2} (b_{c-1}*)^{-1} + G(k,c-1) [ d_{c-2} (b_{c-1}*)^{-1} + z g_{c-1}^{-1} d_{c-1} ]
///
/// Valid when row k differs from c-1 and c; needs invertible alpha.
pub fn column_recurrence_residual(
    op: &BlockBandedUnitary,
    z: C64,
    k: i64,
    col: i64,
) -> Result<(f64, f64)> {
    let (a, b) = (op.lo(), op.hi());
    if col.rem_euclid(2) != 0 {
        return Err(ZipperError::InvalidAnchor(format!(
            "column recurrences anchor at an even block index, got {col}"
        )));
    }
    if col - 2 < a || col + 1 > b {
        return Err(ZipperError::InvalidAnchor(format!(
            "column recurrences need blocks {} ..= {} inside [{a}, {b}]",
            col - 2,
            col + 1
        )));
    }
    if k < a || k > b {
        return Err(ZipperError::InvalidAnchor(format!(
            "row {k} outside [{a}, {b}]"
        )));
    }
    if k == col || k == col - 1 {
        return Err(ZipperError::InvalidAnchor(format!(
            "row k = {k} touches the recurrence columns at {col}"
        )));
    }
    let window = op.provenance().ok_or_else(|| {
        ZipperError::MissingInput("recurrence check needs the disorder window".into())
    })?;
    let solver = GreenSolver::new(op, z)?;
    let gm2 = solver.block(k, col - 2)?;
    let gm1 = solver.block(k, col - 1)?;
    let g0 = solver.block(k, col)?;
    let gp1 = solver.block(k, col + 1)?;
    let s_prev = &window.site(col - 2).block;
    let s_mid = &window.site(col - 1).block;
    let s_cur = &window.site(col).block;
    let a_mid_inv = inv_alpha_like(&s_mid.alpha)?;
    let d_mid_star_inv = inv_alpha_like(&s_mid.delta)?.adjoint();
    let b_mid_star_inv = inv_structural(&s_mid.beta, col - 1)?.adjoint();
    let g_mid_inv = inv_structural(&s_mid.gamma, col - 1)?;
    let zi = cid(op.channels()) * z;
    let c1 = (&gm1 * (&a_mid_inv * &s_mid.beta)) * (-z)
        + &g0 * (&zi - &s_cur.alpha * &d_mid_star_inv)
        - &gp1 * (&s_cur.gamma * &d_mid_star_inv);
    let c2 = &g0 * z
        - &gm2 * (&s_prev.beta * &b_mid_star_inv)
        - &gm1 * (&s_prev.delta * &b_mid_star_inv + (&g_mid_inv * &s_mid.delta) * z);
    Ok((spectral_norm(&c1), spectral_norm(&c2)))
}

/// Smallest singular value of the pivot block (delta_{k-1} - z alpha_k*)
/// entering the row recurrence at even k. Positive almost surely; its
/// distribution has a heavy tail near zero, which is why it is reported
/// instead of asserted against a fixed floor.
pub fn recurrence_pivot_sigma_min(window: &DisorderWindow, z: C64, k: i64) -> Result<f64> {
    if k.rem_euclid(2) != 0 {
        return Err(ZipperError::InvalidAnchor(format!(
            "pivot diagnostic anchors at an even block index, got {k}"
        )));
    }
    let prev = window.try_site(k - 1)?;
    let here = window.try_site(k)?;
    let pivot = &prev.block.delta - here.block.alpha.adjoint() * z;
    Ok(smallest_singular(&pivot))
}

// ---------------------------------------------------------------------------
// Schur bundle
// ---------------------------------------------------------------------------

/// Schur-complement data of a transfer product T with blocks A, BU, C, DU
/// and boundaries U, V:
///
///   E = (C - VA) + (D - VB)U      F = (D - VB)U - (C - VA)
///   G = (A + V*C) + (B + V*D)U    H = (B + V*D)U - (A + V*C)
///
/// assembled as [[E,F],[G,H]] = [[-V, I], [I, V*]] T [[I, -I], [I, I]], so
/// ||T^{-1}||_F >= ||E^{-1}||_F / ||H F^{-1} - G E^{-1}||_F.
#[derive(Debug, Clone)]
pub struct SchurBundle {
    pub e: CMat,
    pub f: CMat,
    pub g: CMat,
    pub h: CMat,
    /// Contraction associated with the difference pair, mapped inside the
    /// unit ball: (DU - C)(BU - A)^{-1} V* for |z| <= 1, its inverse outside.
    pub siegel_m: CMat,
    /// Same for the sum pair (DU + C)(BU + A)^{-1} V*.
    pub siegel_n: CMat,
    pub wronskian: CMat,
    pub norm_m: f64,
    pub norm_n: f64,
    pub e_inv_fro: f64,
    pub wronskian_fro: f64,
    /// Frobenius lower bound on ||T^{-1}||_F.
    pub t_inv_lower_bound: f64,
    pub sigma_e: f64,
    pub sigma_f: f64,
    pub sigma_bu_minus_a: f64,
    pub sigma_bu_plus_a: f64,
    pub sigma_wronskian: f64,
}

fn checked_inverse(m: &CMat, which: SchurQuantity) -> Result<(CMat, f64)> {
    let sigma = smallest_singular(m);
    if sigma < 1e-10 {
        return Err(ZipperError::InvertibilityViolation {
            which,
            sigma_min: sigma,
        });
    }
    let inv = try_inverse(m).ok_or(ZipperError::InvertibilityViolation {
        which,
        sigma_min: sigma,
    })?;
    Ok((inv, sigma))
}

pub fn schur_analysis(product: &TransferProduct, boundary_v: &CMat) -> Result<SchurBundle> {
    if product.m - product.n <= 2 {
        return Err(ZipperError::InvalidAnchor(format!(
            "Schur analysis needs m - n > 2, got n = {}, m = {}",
            product.n, product.m
        )));
    }
    check_boundary_unitary(boundary_v)?;
    let u = &product.boundary_u;
    let v = boundary_v;
    let cva = &product.c - v * &product.a;
    let dvbu = (&product.d - v * &product.b) * u;
    let e = &cva + &dvbu;
    let f = &dvbu - &cva;
    let avc = &product.a + v.adjoint() * &product.c;
    let bvdu = (&product.b + v.adjoint() * &product.d) * u;
    let g = &avc + &bvdu;
    let h = &bvdu - &avc;
    let bu = &product.b * u;
    let du = &product.d * u;
    let bu_minus_a = &bu - &product.a;
    let bu_plus_a = &bu + &product.a;
    let du_minus_c = &du - &product.c;
    let du_plus_c = &du + &product.c;
    let (e_inv, sigma_e) = checked_inverse(&e, SchurQuantity::E)?;
    let (f_inv, sigma_f) = checked_inverse(&f, SchurQuantity::F)?;
    let (bma_inv, sigma_bu_minus_a) = checked_inverse(&bu_minus_a, SchurQuantity::BuMinusA)?;
    let (bpa_inv, sigma_bu_plus_a) = checked_inverse(&bu_plus_a, SchurQuantity::BuPlusA)?;
    let wronskian = &h * &f_inv - &g * &e_inv;
    let sigma_wronskian = smallest_singular(&wronskian);
    if sigma_wronskian < 1e-10 {
        return Err(ZipperError::InvertibilityViolation {
            which: SchurQuantity::Wronskian,
            sigma_min: sigma_wronskian,
        });
    }
    let (siegel_m, siegel_n) = if product.z.norm() <= 1.0 {
        (
            (&du_minus_c * &bma_inv) * v.adjoint(),
            (&du_plus_c * &bpa_inv) * v.adjoint(),
        )
    } else {
        let (dmc_inv, _) = checked_inverse(&du_minus_c, SchurQuantity::DuMinusC)?;
        let (dpc_inv, _) = checked_inverse(&du_plus_c, SchurQuantity::DuPlusC)?;
        (v * (&bu_minus_a * &dmc_inv), v * (&bu_plus_a * &dpc_inv))
    };
    let e_inv_fro = fro_norm(&e_inv);
    let wronskian_fro = fro_norm(&wronskian);
    Ok(SchurBundle {
        norm_m: spectral_norm(&siegel_m),
        norm_n: spectral_norm(&siegel_n),
        e,
        f,
        g,
        h,
        siegel_m,
        siegel_n,
        wronskian,
        e_inv_fro,
        wronskian_fro,
        t_inv_lower_bound: e_inv_fro / wronskian_fro,
        sigma_e,
        sigma_f,
        sigma_bu_minus_a,
        sigma_bu_plus_a,
        sigma_wronskian,
    })
}

// ---------------------------------------------------------------------------
// Contraction bounds
// ---------------------------------------------------------------------------

/// Frobenius norms of the four blocks of one pair step t_{2j+1} t_{2j}.
#[derive(Debug, Clone, Copy)]
pub struct StepNorms {
    pub pair: i64,
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Closed-form contraction rates plus measured per-pair data along one
/// disorder realization.
#[derive(Debug, Clone)]
pub struct ContractionBounds {
    pub lambda: f64,
    pub mu: f64,
    /// 1 - |z| sigma (2 - sqrt(1-sigma^2))^2 / (1-sigma^2): positive margin
    /// means the W blocks of every pair step are invertible.
    pub w_invertibility_margin: f64,
    /// (pair index j, f_j) with f_j the Frobenius norm of the ball-mapped
    /// contraction of the partial product through pair j; defined for
    /// j - n > 2.
    pub f_values: Vec<(i64, f64)>,
    /// (pair index j, whether f_j <= lambda + (1-lambda) mu^{j-n} + 1e-12),
    /// recorded for j - n > p0. Reported, not asserted here; the envelope
    /// claim is exercised by the acceptance suite.
    pub f_bound_ok: Vec<(i64, bool)>,
    pub step_norms: Vec<StepNorms>,
    pub p0: i64,
}

/// Closed-form rates (lambda, mu, W-invertibility margin) for a disorder
/// strength sigma = ||alpha|| and spectral radius |z|. With
/// t = (2 - sqrt(1-sigma^2))^2:
///
///   mu     = (1+|z|) sigma t / (1 - sigma^2 - |z| sigma t)
///   lambda = sigma (1 + 2|z| + sigma) |z| t / (1 - sigma^2 - (2|z|+1) sigma t)
pub fn contraction_lambda_mu(sigma: f64, abs_z: f64) -> Result<(f64, f64, f64)> {
    if !(0.0..1.0).contains(&sigma) || !abs_z.is_finite() || abs_z <= 0.0 {
        return Err(ZipperError::ConfigInvalid(format!(
            "contraction rates need 0 <= sigma < 1 and |z| > 0, got sigma = {sigma}, |z| = {abs_z}"
        )));
    }
    let s2 = 1.0 - sigma * sigma;
    let t = (2.0 - s2.sqrt()).powi(2);
    let w_value = abs_z * sigma * t / s2;
    if w_value >= 1.0 {
        return Err(ZipperError::ThresholdViolated {
            value: w_value,
            margin: 1.0 - w_value,
        });
    }
    let lam_value = (2.0 * abs_z + 1.0) * sigma * t / s2;
    if lam_value >= 1.0 {
        return Err(ZipperError::ThresholdViolated {
            value: lam_value,
            margin: 1.0 - lam_value,
        });
    }
    let mu = (1.0 + abs_z) * sigma * t / (s2 - abs_z * sigma * t);
    let lambda = sigma * (1.0 + 2.0 * abs_z + sigma) * abs_z * t / (s2 - (2.0 * abs_z + 1.0) * sigma * t);
    Ok((lambda, mu, 1.0 - w_value))
}

/// Measure the contraction data of one realization over pairs n ..= m.
/// The boundary unitary is accepted for interface symmetry and validated;
/// the measured Frobenius norms are invariant under it.
pub fn contraction_bounds(
    alpha: &CMat,
    z: C64,
    window: &DisorderWindow,
    n: i64,
    m: i64,
    boundary_u: &CMat,
    p0: i64,
) -> Result<ContractionBounds> {
    if m - n <= 2 {
        return Err(ZipperError::InvalidAnchor(format!(
            "contraction data needs m - n > 2, got n = {n}, m = {m}"
        )));
    }
    if p0 < 2 {
        return Err(ZipperError::ConfigInvalid(format!(
            "p0 must be at least 2, got {p0}"
        )));
    }
    check_boundary_unitary(boundary_u)?;
    if !window.contains((2 * n, 2 * m + 1)) {
        return Err(ZipperError::InsufficientWindow {
            need_lo: 2 * n,
            need_hi: 2 * m + 1,
            have_lo: window.lo(),
            have_hi: window.hi(),
        });
    }
    let sigma = spectral_norm(alpha);
    let (lambda, mu, margin) = contraction_lambda_mu(sigma, z.norm())?;
    let l = alpha.nrows();
    let mut prod = cid(2 * l);
    let mut f_values = Vec::new();
    let mut f_bound_ok = Vec::new();
    let mut step_norms = Vec::new();
    let outside = z.norm() > 1.0;
    for j in n..=m {
        let pair = elementary_factor(z, window.site(2 * j + 1))?
            * elementary_factor(z, window.site(2 * j))?;
        let (wb, xb, yb, zb) = quad_blocks(&pair);
        step_norms.push(StepNorms {
            pair: j,
            w: fro_norm(&wb),
            x: fro_norm(&xb),
            y: fro_norm(&yb),
            z: fro_norm(&zb),
        });
        prod = &pair * &prod;
        if j - n > 2 {
            let (p11, p12, p21, p22) = quad_blocks(&prod);
            let bu_minus_a = &p12 - &p11;
            let du_minus_c = &p22 - &p21;
            let f = if outside {
                let (inv, _) = checked_inverse(&du_minus_c, SchurQuantity::DuMinusC)?;
                fro_norm(&(&bu_minus_a * &inv))
            } else {
                let (inv, _) = checked_inverse(&bu_minus_a, SchurQuantity::BuMinusA)?;
                fro_norm(&(&du_minus_c * &inv))
            };
            f_values.push((j, f));
            if j - n > p0 {
                let bound = lambda + (1.0 - lambda) * mu.powi((j - n) as i32);
                f_bound_ok.push((j, f <= bound + 1e-12));
            }
        }
    }
    Ok(ContractionBounds {
        lambda,
        mu,
        w_invertibility_margin: margin,
        f_values,
        f_bound_ok,
        step_norms,
        p0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{sample_haar_unitary, DisorderWindow, ZipperParams};
    use crate::linalg::lorentz;
    use crate::rngstream::{domain, StreamKey};
    use crate::transfer::transfer_product;
    use crate::zipper_operator::build_finite_zipper;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn haar_pair(l: usize, seed: u64) -> (CMat, CMat) {
        let key = StreamKey::new(seed, domain::BOUNDARY, 0);
        (
            sample_haar_unitary(l, &mut key.rng_for_site(0)),
            sample_haar_unitary(l, &mut key.rng_for_site(1)),
        )
    }

    fn random_instance(
        l: usize,
        r: f64,
        seed: u64,
        interval: (i64, i64),
    ) -> (ZipperParams, DisorderWindow, BlockBandedUnitary, CMat, CMat) {
        let params = ZipperParams::scaled_random(l, r, seed).unwrap();
        let window = DisorderWindow::sample(
            &params,
            (interval.0 - 2, interval.1 + 2),
            params.disorder_key(0),
        )
        .unwrap();
        let (bu, bv) = haar_pair(l, seed ^ 0xb0);
        let op = build_finite_zipper(&params, &window, interval, &bu, &bv).unwrap();
        (params, window, op, bu, bv)
    }

    // ══════════════════════════════════════════════════════════════════
    // Direct solver
    // ══════════════════════════════════════════════════════════════════

    #[test]
    fn trivial_two_site_green_values() {
        // alpha = 0, trivial phases, I boundaries: the window operator is
        // the swap, so (U - 2)^{-1} = (1/3) [[-2, -1], [-1, -2]].
        let params = ZipperParams::scaled_identity(1, 0.0, 0).unwrap();
        let window = DisorderWindow::deterministic(&params, (0, 1)).unwrap();
        let op = build_finite_zipper(&params, &window, (0, 1), &cid(1), &cid(1)).unwrap();
        let z = c(2.0, 0.0);
        let g01 = green_direct(&op, z, 0, 1).unwrap();
        let g00 = green_direct(&op, z, 0, 0).unwrap();
        assert!((g01.block[(0, 0)] - c(-1.0 / 3.0, 0.0)).norm() < 1e-14);
        assert!((g00.block[(0, 0)] - c(-2.0 / 3.0, 0.0)).norm() < 1e-14);
        assert!(!g01.near_unit_circle);
    }

    #[test]
    fn direct_matches_dense_oracle_and_defining_relation() {
        for &(l, seed, z) in &[
            (1usize, 3u64, c(1.2, 0.3)),
            (2, 4, c(0.4, -0.6)),
            (2, 5, C64::from_polar(1.05, 1.1)),
        ] {
            let (_, _, op, _, _) = random_instance(l, 0.5, seed, (0, 9));
            let dense = op.to_dense();
            let n = dense.nrows();
            let shifted = &dense - cid(n) * z;
            let inv = shifted.clone().try_inverse().unwrap();
            let solver = GreenSolver::new(&op, z).unwrap();
            for &(k, col) in &[(0i64, 9i64), (3, 7), (5, 0), (9, 9)] {
                let blk = solver.block(k, col).unwrap();
                let view = inv.view(((k as usize) * l, (col as usize) * l), (l, l));
                assert!(spectral_norm(&(&blk - &view.into_owned())) < 1e-10);
            }
            // Defining relation on full solution columns, relative.
            for q in 0..l {
                let x = solver.solve_unit_column(4, q).unwrap();
                let mut e = CVec::zeros(n);
                e[4 * l + q] = c(1.0, 0.0);
                let res = (&shifted * &x - e).norm() / x.norm().max(1.0);
                assert!(res < 1e-8);
            }
        }
    }

    #[test]
    fn resolvent_norm_bound_off_circle() {
        for &(seed, z) in &[
            (11u64, c(1.2, 0.0)),
            (12, C64::from_polar(0.8, 0.7)),
            (13, C64::from_polar(1.05, 2.2)),
        ] {
            let (_, _, op, _, _) = random_instance(2, 0.6, seed, (0, 11));
            let bound = 1.0 / (z.norm() - 1.0).abs();
            for &(k, col) in &[(0i64, 11i64), (2, 9), (6, 6)] {
                let g = green_direct(&op, z, k, col).unwrap();
                assert!(g.norm <= bound + 1e-9, "norm {} > bound {bound}", g.norm);
            }
        }
    }

    #[test]
    fn near_circle_flag_reports_conditioning() {
        let (_, _, op, _, _) = random_instance(1, 0.4, 21, (0, 7));
        let z = C64::from_polar(1.0 + 1e-8, 0.3);
        let g = green_direct(&op, z, 0, 7).unwrap();
        assert!(g.near_unit_circle);
        assert!(g.norm.is_finite());
        let g = green_direct(&op, C64::from_polar(1.05, 0.3), 0, 7).unwrap();
        assert!(!g.near_unit_circle);
    }

    #[test]
    fn solver_rejects_out_of_window_anchors() {
        let (_, _, op, _, _) = random_instance(1, 0.4, 22, (0, 5));
        assert!(matches!(
            green_direct(&op, c(1.2, 0.0), 0, 6),
            Err(ZipperError::InvalidAnchor(_))
        ));
        assert!(matches!(
            green_direct(&op, c(1.2, 0.0), -1, 3),
            Err(ZipperError::InvalidAnchor(_))
        ));
    }

    // ══════════════════════════════════════════════════════════════════
    // Corner formulas
    // ══════════════════════════════════════════════════════════════════

    #[test]
    fn corner_formula_matches_direct_across_sizes_parities_and_radii() {
        let mut instances = 0;
        for l in [1usize, 2, 3] {
            for parity in [StartParity::Even, StartParity::Odd] {
                for abs_z in [0.9, 0.95, 1.05, 1.1] {
                    for d in [3i64, 4, 5] {
                        for seed in [0u64, 1, 2] {
                            let n = 1i64;
                            let m = n + d;
                            let a = match parity {
                                StartParity::Even => 2 * n,
                                StartParity::Odd => 2 * n + 1,
                            };
                            let b = 2 * m + 1;
                            let mix = seed ^ (l as u64) << 8 ^ (d as u64) << 16;
                            let params = ZipperParams::scaled_random(l, 0.35, 77 + mix).unwrap();
                            let window = DisorderWindow::sample(
                                &params,
                                (a - 2, b + 2),
                                params.disorder_key(0),
                            )
                            .unwrap();
                            let (bu, bv) = haar_pair(l, 1000 + mix);
                            let op =
                                build_finite_zipper(&params, &window, (a, b), &bu, &bv).unwrap();
                            let z = C64::from_polar(abs_z, 0.4 + 0.1 * seed as f64);
                            let gd = green_direct(&op, z, a, b).unwrap();
                            let gt = green_via_transfer(
                                &params, &window, z, n, m, &bu, &bv, parity,
                            )
                            .unwrap();
                            let rel = spectral_norm(&(&gt.block - &gd.block))
                                / spectral_norm(&gd.block);
                            assert!(
                                rel < 1e-8,
                                "L={l} parity={} |z|={abs_z} d={d} seed={seed}: rel {rel:.3e}",
                                parity.as_str()
                            );
                            instances += 1;
                        }
                    }
                }
            }
        }
        assert!(instances >= 200, "only {instances} instances exercised");
    }

    #[test]
    fn corner_formula_graceful_at_vanishing_alpha() {
        let l = 2;
        let params = ZipperParams::scaled_identity(l, 1e-8, 5).unwrap();
        let (n, m) = (0i64, 4i64);
        let (a, b) = (0i64, 2 * m + 1);
        let window =
            DisorderWindow::sample(&params, (a - 2, b + 2), params.disorder_key(0)).unwrap();
        let (bu, bv) = haar_pair(l, 9);
        let op = build_finite_zipper(&params, &window, (a, b), &bu, &bv).unwrap();
        let z = C64::from_polar(1.05, 0.9);
        let gd = green_direct(&op, z, a, b).unwrap();
        let gt =
            green_via_transfer(&params, &window, z, n, m, &bu, &bv, StartParity::Even).unwrap();
        let rel = spectral_norm(&(&gt.block - &gd.block)) / spectral_norm(&gd.block);
        assert!(rel < 1e-6, "rel {rel:.3e}");
    }

    #[test]
    fn corner_formula_preconditions() {
        let l = 1;
        let params = ZipperParams::scaled_random(l, 0.3, 2).unwrap();
        let window = DisorderWindow::sample(&params, (-2, 12), params.disorder_key(0)).unwrap();
        let (bu, bv) = haar_pair(l, 3);
        let z = c(1.05, 0.0);
        assert!(matches!(
            green_via_transfer(&params, &window, z, 0, 2, &bu, &bv, StartParity::Even),
            Err(ZipperError::InvalidAnchor(_))
        ));
        assert!(matches!(
            green_via_transfer(&params, &window, z, 0, 8, &bu, &bv, StartParity::Even),
            Err(ZipperError::InsufficientWindow { .. })
        ));
        let skew = cid(l) * c(2.0, 0.0);
        assert!(matches!(
            green_via_transfer(&params, &window, z, 0, 4, &skew, &bv, StartParity::Even),
            Err(ZipperError::BoundaryNotUnitary { .. })
        ));
    }

    #[test]
    fn corner_terms_invert_back_to_seed_and_obey_kappa_on_outer_annulus() {
        let eps = 0.1;
        for &(l, seed) in &[(1usize, 31u64), (2, 32), (2, 33)] {
            let params = ZipperParams::scaled_random(l, 0.3, seed).unwrap();
            let window = DisorderWindow::sample(&params, (0, 9), params.disorder_key(0)).unwrap();
            let (_, bv) = haar_pair(l, seed);
            for abs_z in [1.0, 1.05, 1.1] {
                let z = C64::from_polar(abs_z, 0.5);
                let m = 3i64;
                let (k_term, l_term) = corner_terms(z, &window, m).unwrap();
                // Invert the two factors through the reflection identity
                // t(z)^{-1} = J t(1/conj(z))* J and recover the seed vector.
                let w = c(1.0, 0.0) / z.conj();
                let j = lorentz(l);
                let inv_odd =
                    &j * elementary_factor(w, window.site(2 * m + 1)).unwrap().adjoint() * &j;
                let inv_even =
                    &j * elementary_factor(w, window.site(2 * m)).unwrap().adjoint() * &j;
                let mut stacked = czeros(2 * l, l);
                stacked.view_mut((0, 0), (l, l)).copy_from(&k_term);
                stacked.view_mut((l, 0), (l, l)).copy_from(&l_term);
                let back = inv_even * (inv_odd * stacked);
                let mut seed_mat = czeros(2 * l, l);
                for p in 0..l {
                    seed_mat[(p, p)] = -c(1.0, 0.0) / z;
                }
                assert!(spectral_norm(&(&back - &seed_mat)) < 1e-10);
                // Kappa bound, asserted on the outer annulus where it holds
                // uniformly in the boundary unitary.
                let diff = &l_term - &bv * &k_term;
                assert!(
                    spectral_norm(&diff) <= kappa_bound(0.3, eps) + 1e-12,
                    "|z| = {abs_z}: {} > {}",
                    spectral_norm(&diff),
                    kappa_bound(0.3, eps)
                );
            }
        }
    }

    // ══════════════════════════════════════════════════════════════════
    // Recurrences
    // ══════════════════════════════════════════════════════════════════

    #[test]
    fn row_and_column_recurrences_vanish() {
        for &(l, seed) in &[(1usize, 41u64), (2, 42)] {
            let (_, _, op, _, _) = random_instance(l, 0.45, seed, (0, 13));
            for z in [C64::from_polar(1.05, 0.4), C64::from_polar(0.9, 1.1)] {
                for k in [2i64, 4, 6, 8] {
                    for l_col in [k - 2, k + 2, k + 4] {
                        if l_col < 0 || l_col > 13 {
                            continue;
                        }
                        let (r1, r2) = recurrence_residual(&op, z, k, l_col).unwrap();
                        assert!(r1 < 1e-8, "R1 {r1:.3e} at k={k} l={l_col}");
                        assert!(r2 < 1e-8, "R2 {r2:.3e} at k={k} l={l_col}");
                    }
                }
                for col in [4i64, 6, 8, 10] {
                    for k in [col - 3, col + 1] {
                        let (c1, c2) = column_recurrence_residual(&op, z, k, col).unwrap();
                        assert!(c1 < 1e-8, "C1 {c1:.3e} at k={k} col={col}");
                        assert!(c2 < 1e-8, "C2 {c2:.3e} at k={k} col={col}");
                    }
                }
            }
        }
    }

    #[test]
    fn recurrence_preconditions() {
        let (_, _, op, _, _) = random_instance(1, 0.4, 43, (0, 9));
        let z = c(1.05, 0.0);
        assert!(matches!(
            recurrence_residual(&op, z, 3, 7),
            Err(ZipperError::InvalidAnchor(_))
        ));
        assert!(matches!(
            recurrence_residual(&op, z, 4, 5),
            Err(ZipperError::InvalidAnchor(_))
        ));
        assert!(matches!(
            recurrence_residual(&op, z, 0, 4),
            Err(ZipperError::InvalidAnchor(_))
        ));
        assert!(matches!(
            column_recurrence_residual(&op, z, 0, 5),
            Err(ZipperError::InvalidAnchor(_))
        ));
        assert!(matches!(
            column_recurrence_residual(&op, z, 3, 4),
            Err(ZipperError::InvalidAnchor(_))
        ));
    }

    #[test]
    fn column_recurrence_needs_invertible_alpha() {
        let params = ZipperParams::scaled_identity(2, 0.0, 1).unwrap();
        let window = DisorderWindow::sample(&params, (-2, 11), params.disorder_key(0)).unwrap();
        let op = build_finite_zipper(&params, &window, (0, 9), &cid(2), &cid(2)).unwrap();
        assert!(matches!(
            column_recurrence_residual(&op, c(1.05, 0.0), 1, 6),
            Err(ZipperError::SingularAlpha { .. })
        ));
    }

    #[test]
    fn recurrence_pivot_stays_invertible_on_samples() {
        let params = ZipperParams::scaled_random(2, 0.2, 7).unwrap();
        let z = C64::from_polar(1.05, 0.8);
        let mut min_sigma = f64::INFINITY;
        for trial in 0..40u64 {
            let window =
                DisorderWindow::sample(&params, (-1, 8), params.disorder_key(trial)).unwrap();
            for k in [0i64, 2, 4, 6] {
                let s = recurrence_pivot_sigma_min(&window, z, k).unwrap();
                assert!(s.is_finite());
                min_sigma = min_sigma.min(s);
            }
        }
        assert!(min_sigma > 1e-12, "pivot degenerate: {min_sigma:.3e}");
    }

    // ══════════════════════════════════════════════════════════════════
    // Schur bundle
    // ══════════════════════════════════════════════════════════════════

    fn schur_instance(
        l: usize,
        r: f64,
        seed: u64,
        n: i64,
        m: i64,
        abs_z: f64,
    ) -> (TransferProduct, CMat, SchurBundle) {
        let params = ZipperParams::scaled_random(l, r, seed).unwrap();
        let window = DisorderWindow::sample(
            &params,
            (2 * n - 1, 2 * m + 2),
            params.disorder_key(0),
        )
        .unwrap();
        let (bu, bv) = haar_pair(l, seed ^ 0x5e);
        let z = C64::from_polar(abs_z, 0.7);
        let product = transfer_product(z, &window, n, m, &bu).unwrap();
        let bundle = schur_analysis(&product, &bv).unwrap();
        (product, bv, bundle)
    }

    #[test]
    fn schur_assembly_identity_and_inverse_reconstruction() {
        for &(l, seed) in &[(1usize, 51u64), (2, 52), (3, 53)] {
            let (product, bv, bundle) = schur_instance(l, 0.3, seed, 0, 4, 1.05);
            let t = &product.matrix;
            let id = cid(l);
            let neg_v = -bv.clone();
            let v_adj = bv.adjoint();
            let left = crate::linalg::from_quad(&neg_v, &id, &id, &v_adj);
            let neg_id = -id.clone();
            let right = crate::linalg::from_quad(&id, &neg_id, &id, &id);
            let assembled =
                crate::linalg::from_quad(&bundle.e, &bundle.f, &bundle.g, &bundle.h);
            let expect = &left * t * &right;
            let rel = spectral_norm(&(&assembled - &expect)) / spectral_norm(&expect);
            assert!(rel < 1e-12, "assembly rel {rel:.3e}");
            // T^{-1} = R M^{-1} L with the same two fixed transforms.
            let t_inv = t.clone().try_inverse().unwrap();
            let m_inv = assembled.try_inverse().unwrap();
            let rebuilt = &right * m_inv * &left;
            let rel = spectral_norm(&(&rebuilt - &t_inv)) / spectral_norm(&t_inv);
            assert!(rel < 1e-9, "inverse rel {rel:.3e}");
        }
    }

    #[test]
    fn siegel_contractions_stay_inside_unit_ball() {
        for abs_z in [0.95, 1.05] {
            for d in [3i64, 4, 5, 6] {
                for seed in [0u64, 1, 2, 3] {
                    let (_, _, bundle) = schur_instance(2, 0.1, 60 + seed, 0, d, abs_z);
                    assert!(
                        bundle.norm_m < 1.0 && bundle.norm_n < 1.0,
                        "|z|={abs_z} d={d} seed={seed}: ||M||={}, ||N||={}",
                        bundle.norm_m,
                        bundle.norm_n
                    );
                }
            }
        }
    }

    #[test]
    fn schur_lower_bound_holds_against_dense_inverse() {
        for &(l, seed, abs_z) in &[(1usize, 71u64, 1.05), (2, 72, 0.95), (2, 73, 1.1)] {
            let (product, _, bundle) = schur_instance(l, 0.2, seed, 0, 5, abs_z);
            let t_inv = product.matrix.clone().try_inverse().unwrap();
            let lhs = fro_norm(&t_inv);
            assert!(
                lhs >= bundle.t_inv_lower_bound * (1.0 - 1e-9),
                "||T^-1||_F = {lhs} < bound {}",
                bundle.t_inv_lower_bound
            );
        }
    }

    #[test]
    fn schur_rejects_short_products() {
        let params = ZipperParams::scaled_random(1, 0.3, 3).unwrap();
        let window = DisorderWindow::sample(&params, (-1, 6), params.disorder_key(0)).unwrap();
        let (bu, bv) = haar_pair(1, 4);
        let product = transfer_product(c(1.05, 0.0), &window, 0, 2, &bu).unwrap();
        assert!(matches!(
            schur_analysis(&product, &bv),
            Err(ZipperError::InvalidAnchor(_))
        ));
    }

    // ══════════════════════════════════════════════════════════════════
    // Contraction bounds
    // ══════════════════════════════════════════════════════════════════

    #[test]
    fn contraction_rates_match_frozen_values() {
        let (lambda, mu, margin) = contraction_lambda_mu(0.1, 1.05).unwrap();
        assert!((lambda - 0.501380846555).abs() < 1e-9, "lambda {lambda}");
        assert!((mu - 0.234245757736).abs() < 1e-9, "mu {mu}");
        assert!(margin > 0.0);
        let (lambda, mu, _) = contraction_lambda_mu(0.05, 1.05).unwrap();
        assert!((lambda - 0.196873).abs() < 1e-5, "lambda {lambda}");
        assert!((mu - 0.108752).abs() < 1e-5, "mu {mu}");
    }

    #[test]
    fn contraction_rates_vanish_with_alpha_and_blow_past_threshold() {
        let (lambda, mu, margin) = contraction_lambda_mu(1e-9, 1.05).unwrap();
        assert!(lambda < 1e-7 && mu < 1e-7);
        assert!(margin > 0.999);
        assert!(matches!(
            contraction_lambda_mu(0.9, 1.05),
            Err(ZipperError::ThresholdViolated { .. })
        ));
        // W stays invertible but the lambda denominator fails first.
        match contraction_lambda_mu(0.3, 1.05) {
            Err(ZipperError::ThresholdViolated { value, margin }) => {
                assert!(value > 1.0 && margin < 0.0);
            }
            other => panic!("expected threshold violation, got {other:?}"),
        }
    }

    #[test]
    fn contraction_rates_stay_small_below_default_radius() {
        for abs_z in [0.95, 1.0, 1.05] {
            for sigma in [0.01, 0.03, 0.05] {
                let (lambda, mu, margin) = contraction_lambda_mu(sigma, abs_z).unwrap();
                assert!(mu < 1.0, "mu {mu} at sigma={sigma} |z|={abs_z}");
                assert!(lambda <= 0.5, "lambda {lambda} at sigma={sigma} |z|={abs_z}");
                assert!(margin > 0.0);
            }
        }
    }

    #[test]
    fn contraction_measured_data_is_well_formed() {
        for &(l, seed, abs_z) in &[(1usize, 81u64, 1.05), (2, 82, 0.95)] {
            let params = ZipperParams::scaled_random(l, 0.1, seed).unwrap();
            let (n, m, p0) = (0i64, 9i64, 3i64);
            let window = DisorderWindow::sample(
                &params,
                (2 * n - 1, 2 * m + 2),
                params.disorder_key(0),
            )
            .unwrap();
            let (bu, _) = haar_pair(l, seed);
            let z = C64::from_polar(abs_z, 1.3);
            let bounds =
                contraction_bounds(&params.alpha, z, &window, n, m, &bu, p0).unwrap();
            assert_eq!(bounds.step_norms.len(), (m - n + 1) as usize);
            assert_eq!(bounds.f_values.len(), (m - n - 2) as usize);
            assert_eq!(bounds.f_bound_ok.len(), (m - n - p0) as usize);
            assert!(bounds.w_invertibility_margin > 0.0);
            for &(j, f) in &bounds.f_values {
                assert!(f > 0.0 && f < 1.0, "f_{j} = {f} outside (0,1)");
            }
            for s in &bounds.step_norms {
                assert!(s.w > 0.0 && s.x.is_finite() && s.y.is_finite() && s.z > 0.0);
            }
        }
    }

    #[test]
    fn contraction_preconditions() {
        let params = ZipperParams::scaled_random(1, 0.1, 1).unwrap();
        let window = DisorderWindow::sample(&params, (-1, 12), params.disorder_key(0)).unwrap();
        let (bu, _) = haar_pair(1, 1);
        let z = c(1.05, 0.0);
        assert!(matches!(
            contraction_bounds(&params.alpha, z, &window, 0, 2, &bu, 3),
            Err(ZipperError::InvalidAnchor(_))
        ));
        assert!(matches!(
            contraction_bounds(&params.alpha, z, &window, 0, 5, &bu, 1),
            Err(ZipperError::ConfigInvalid(_))
        ));
    }
}
