//! Transfer matrices, the two-site cocycle, Lyapunov spectra, and the
//! structure-group validators.
//!
//! The bijection phi rewires a scattering relation (p;q) = S(x;y) into a
//! left-to-right propagation phi(S)(x;p) = (q;y). Elementary site factors are
//!     t_k(z) = phi(z^{-1} S^{(k)})   for k even,
//!     t_k(z) = phi(S^{(k)})          for k odd,
//! and the cocycle step over the site pair (2n, 2n-1) is
//!     T^{(n)}(z) = t_{2n}(z) t_{2n-1}(z).
//! Both factors split as diag(V, U*) times a middle matrix that depends only
//! on alpha and z; the split is used here as a fast construction path and is
//! cross-checked against the phi composition in the tests. On |z| = 1 every
//! factor preserves the indefinite form diag(I, -I), and for all z != 0 the
//! inverse satisfies t(z)^{-1} = L t(1/conj(z))* L with L that form.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::disorder::{
    defect_roots, phase_pair, sample_site_disorder, DisorderWindow, PhasePair, SiteDisorder,
    SiteRealization, ZipperParams,
};
use crate::error::{Result, ZipperError};
use crate::linalg::{
    cayley_conjugate, cid, compound_matrix, from_quad, lorentz, quad_blocks, realify,
    smallest_singular, spectral_norm, try_inverse, C64, CMat,
};
use crate::rngstream::StreamKey;

/// One cocycle step T^{(n)}(z) built from the sites 2n and 2n-1.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    pub matrix: CMat,
    pub z: C64,
    pub pair_index: i64,
}

/// Ordered product of elementary factors over the sites 2n .. 2m+1, with the
/// corner blocks extracted in the boundary-U convention:
/// A = P11, B = P12 U*, C = P21, D = P22 U*, so that
/// matrix = [[A, B U], [C, D U]] exactly.
#[derive(Debug, Clone)]
pub struct TransferProduct {
    pub matrix: CMat,
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
    pub d: CMat,
    pub z: C64,
    pub n: i64,
    pub m: i64,
    pub boundary_u: CMat,
}

/// Estimated Lyapunov spectrum of the two-site cocycle, sorted descending.
#[derive(Debug, Clone)]
pub struct LyapunovSpectrum {
    pub z: C64,
    pub gammas: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub n_steps: usize,
    pub n_realizations: usize,
}

/// Monte Carlo estimate of the inverse-product decay observable at one
/// distance: mean of ||(T^{(n+d-1)} ... T^{(n)})^{-1} v||^{-s} over trials.
#[derive(Debug, Clone)]
pub struct InverseDecayEstimate {
    pub distance: usize,
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

/// The bijection phi([[a,b],[c,d]]) = [[c - d b^{-1} a, d b^{-1}],
/// [-b^{-1} a, b^{-1}]]; defined whenever the upper-right block is
/// invertible, and sends unitaries to matrices preserving diag(I, -I).
pub fn phi_map(s: &CMat) -> Result<CMat> {
    let (a, b, c, d) = quad_blocks(s);
    let smin = smallest_singular(&b);
    if smin < 1e-12 {
        return Err(ZipperError::SingularBeta { sigma_min: smin });
    }
    let b_inv = try_inverse(&b).ok_or(ZipperError::SingularBeta { sigma_min: smin })?;
    let binv_a = &b_inv * &a;
    let d_binv = &d * &b_inv;
    let tl = &c - &d_binv * &a;
    Ok(from_quad(&tl, &d_binv, &(-binv_a), &b_inv))
}

/// Cached alpha-dependent pieces of the elementary factors: both factors are
/// diag(V, U*) . [[zeta^{-1} rho~^{-1}, -rho~^{-1} alpha*],
///                [-alpha rho~^{-1},    zeta rho^{-1}    ]]
/// with zeta = z on even sites and zeta = 1 on odd sites.
pub(crate) struct FactorCache {
    l: usize,
    rho_inv: CMat,
    rho_tilde_inv: CMat,
    m01: CMat,
    m10: CMat,
}

impl FactorCache {
    pub fn new(alpha: &CMat) -> Result<FactorCache> {
        let (rho, rho_tilde) = defect_roots(alpha)?;
        let norm = spectral_norm(alpha);
        let rho_inv = try_inverse(&rho).ok_or(ZipperError::NormTooLarge { norm })?;
        let rho_tilde_inv =
            try_inverse(&rho_tilde).ok_or(ZipperError::NormTooLarge { norm })?;
        let m01 = -(&rho_tilde_inv * alpha.adjoint());
        let m10 = -(alpha * &rho_tilde_inv);
        Ok(FactorCache {
            l: alpha.nrows(),
            rho_inv,
            rho_tilde_inv,
            m01,
            m10,
        })
    }

    /// Elementary factor for one site; `z_even` is Some(z) on even sites.
    pub fn factor(&self, z_even: Option<C64>, phases: &PhasePair) -> Result<CMat> {
        let one = C64::new(1.0, 0.0);
        let (s00, s11) = match z_even {
            Some(z) => {
                if z.norm_sqr() == 0.0 {
                    return Err(ZipperError::ZeroSpectralParameter);
                }
                (one / z, z)
            }
            None => (one, one),
        };
        let tl = &phases.v_phase * &self.rho_tilde_inv * s00;
        let tr = &phases.v_phase * &self.m01;
        let u_adj = phases.u_phase.adjoint();
        let bl = &u_adj * &self.m10;
        let br = &u_adj * &self.rho_inv * s11;
        let _ = self.l;
        Ok(from_quad(&tl, &tr, &bl, &br))
    }
}

/// Elementary factor t_k(z) for one realized site; the site's parity decides
/// whether the z-scaling is applied.
pub fn elementary_factor(z: C64, site: &SiteRealization) -> Result<CMat> {
    let cache = FactorCache::new(&site.block.alpha)?;
    let z_even = if site.block.site_index.rem_euclid(2) == 0 {
        Some(z)
    } else {
        None
    };
    cache.factor(z_even, &site.phases)
}

/// Cocycle step T^{(n)}(z) = t_{2n}(z) t_{2n-1}(z) from the raw disorder of
/// the two sites and the shared coupling alpha.
pub fn transfer_matrix(
    z: C64,
    even_site: &SiteDisorder,
    odd_site: &SiteDisorder,
    alpha: &CMat,
) -> Result<TransferMatrix> {
    if z.norm_sqr() == 0.0 {
        return Err(ZipperError::ZeroSpectralParameter);
    }
    if even_site.site_index.rem_euclid(2) != 0 {
        return Err(ZipperError::ParityMismatch {
            a: even_site.site_index,
        });
    }
    if odd_site.site_index != even_site.site_index - 1 {
        return Err(ZipperError::ParityMismatch {
            a: odd_site.site_index,
        });
    }
    let cache = FactorCache::new(alpha)?;
    let pe = phase_pair(even_site);
    let po = phase_pair(odd_site);
    let matrix = cache.factor(Some(z), &pe)? * cache.factor(None, &po)?;
    Ok(TransferMatrix {
        matrix,
        z,
        pair_index: even_site.site_index.div_euclid(2),
    })
}

/// Ordered product t_{2m+1}(z) ... t_{2n}(z) over a realized window, with the
/// A, B, C, D corner blocks extracted in the boundary-U convention.
pub fn transfer_product(
    z: C64,
    sites: &DisorderWindow,
    n: i64,
    m: i64,
    boundary_u: &CMat,
) -> Result<TransferProduct> {
    if m < n {
        return Err(ZipperError::EmptyInterval { a: n, b: m });
    }
    if z.norm_sqr() == 0.0 {
        return Err(ZipperError::ZeroSpectralParameter);
    }
    if !sites.contains((2 * n, 2 * m + 1)) {
        return Err(ZipperError::InsufficientWindow {
            need_lo: 2 * n,
            need_hi: 2 * m + 1,
            have_lo: sites.lo(),
            have_hi: sites.hi(),
        });
    }
    crate::disorder::check_boundary_unitary(boundary_u)?;
    let alpha = &sites.site(2 * n).block.alpha;
    let l = alpha.nrows();
    let cache = FactorCache::new(alpha)?;
    let mut p = cid(2 * l);
    for k in (2 * n)..=(2 * m + 1) {
        let site = sites.site(k);
        let z_even = if k.rem_euclid(2) == 0 { Some(z) } else { None };
        p = cache.factor(z_even, &site.phases)? * p;
    }
    let (p11, p12, p21, p22) = quad_blocks(&p);
    let u_adj = boundary_u.adjoint();
    let a = p11;
    let b = &p12 * &u_adj;
    let c = p21;
    let d = &p22 * &u_adj;
    let matrix = from_quad(&a, &(&b * boundary_u), &c, &(&d * boundary_u));
    Ok(TransferProduct {
        matrix,
        a,
        b,
        c,
        d,
        z,
        n,
        m,
        boundary_u: boundary_u.clone(),
    })
}

/// Exterior power: the compound matrix of p x p minors (desk scale, k <= 8).
pub fn exterior_power(m: &CMat, p: usize) -> Result<CMat> {
    compound_matrix(m, p)
}

/// Structure maps of a 2L x 2L matrix: conjugation by the Cayley matrix
/// (sends the indefinite-form group to the complex symplectic group) and
/// the realification [[Re, -Im], [Im, Re]].
pub fn structure_maps(m: &CMat) -> (CMat, DMatrix<f64>) {
    (cayley_conjugate(m), realify(m))
}

/// Accumulate cocycle exponents for `n_steps` factors supplied by `next`,
/// re-orthogonalizing by QR every `qr_every` steps (or sooner on overflow).
fn cocycle_exponents(
    mut next: impl FnMut(usize) -> Result<CMat>,
    dim: usize,
    n_steps: usize,
    qr_every: usize,
) -> Result<Vec<f64>> {
    let mut q = cid(dim);
    let mut logs = vec![0.0f64; dim];
    let mut pending = 0usize;
    for j in 0..n_steps {
        let t = next(j)?;
        q = &t * &q;
        pending += 1;
        let overflow = q.iter().any(|e| !e.re.is_finite() || !e.im.is_finite() || e.norm_sqr() > 1e200);
        if pending >= qr_every || overflow || j + 1 == n_steps {
            let qr = q.qr();
            let r = qr.r();
            for i in 0..dim {
                let mag = r[(i, i)].norm();
                if !mag.is_finite() || mag == 0.0 {
                    return Err(ZipperError::DegenerateCocycle { step: j });
                }
                logs[i] += mag.ln();
            }
            q = qr.q();
            pending = 0;
        }
    }
    Ok(logs.into_iter().map(|v| v / n_steps as f64).collect())
}

fn qr_cadence(l: usize) -> usize {
    if l <= 2 {
        1
    } else {
        5
    }
}

/// Estimate the 2L Lyapunov exponents of the i.i.d. two-site cocycle at z by
/// QR-accumulated log growth over `n_steps` steps, averaged over
/// `n_realizations` independent disorder realizations. Standard errors come
/// from the across-realization spread. Positivity claims about gamma_L
/// additionally need alpha invertible; that is the caller's lookout.
pub fn lyapunov_spectrum(
    z: C64,
    params: &ZipperParams,
    n_steps: usize,
    n_realizations: usize,
    stream: StreamKey,
) -> Result<LyapunovSpectrum> {
    if z.norm_sqr() == 0.0 {
        return Err(ZipperError::ZeroSpectralParameter);
    }
    if n_steps < 100 {
        return Err(ZipperError::ConfigInvalid(format!(
            "lyapunov estimation needs n_steps >= 100, got {n_steps}"
        )));
    }
    if n_realizations == 0 {
        return Err(ZipperError::ConfigInvalid(
            "n_realizations must be positive".into(),
        ));
    }
    let cache = FactorCache::new(&params.alpha)?;
    let dim = 2 * params.l;
    let per_real: Result<Vec<Vec<f64>>> = (0..n_realizations)
        .into_par_iter()
        .map(|r| {
            let kr = stream.with_trial(r as u64);
            let mut gammas = cocycle_exponents(
                |j| {
                    let even = sample_site_disorder(params, 2 * j as i64, kr);
                    let odd = sample_site_disorder(params, 2 * j as i64 - 1, kr);
                    let t = cache.factor(Some(z), &phase_pair(&even))?
                        * cache.factor(None, &phase_pair(&odd))?;
                    Ok(t)
                },
                dim,
                n_steps,
                qr_cadence(params.l),
            )?;
            gammas.sort_by(|a, b| b.partial_cmp(a).unwrap());
            Ok(gammas)
        })
        .collect();
    let per_real = per_real?;
    let mut gammas = vec![0.0f64; dim];
    let mut stderrs = vec![0.0f64; dim];
    for k in 0..dim {
        let vals: Vec<f64> = per_real.iter().map(|g| g[k]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        gammas[k] = mean;
        if vals.len() > 1 {
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (vals.len() as f64 - 1.0);
            stderrs[k] = (var / vals.len() as f64).sqrt();
        }
    }
    Ok(LyapunovSpectrum {
        z,
        gammas,
        stderrs,
        n_steps,
        n_realizations,
    })
}

/// Same estimator driven by the constant transfer matrix of the phase-free
/// environment (every U, V forced to the identity). For a constant cocycle
/// the exponents converge to the logarithms of the eigenvalue moduli of T;
/// they agree with the singular-value logarithms exactly when T is normal
/// (e.g. the diagonal alpha = 0 case).
pub fn lyapunov_spectrum_deterministic(
    z: C64,
    params: &ZipperParams,
    n_steps: usize,
) -> Result<LyapunovSpectrum> {
    if z.norm_sqr() == 0.0 {
        return Err(ZipperError::ZeroSpectralParameter);
    }
    if n_steps < 100 {
        return Err(ZipperError::ConfigInvalid(format!(
            "lyapunov estimation needs n_steps >= 100, got {n_steps}"
        )));
    }
    let window = DisorderWindow::deterministic(params, (-1, 0))?;
    let t = elementary_factor(z, window.site(0))? * elementary_factor(z, window.site(-1))?;
    let dim = 2 * params.l;
    let mut gammas = cocycle_exponents(|_| Ok(t.clone()), dim, n_steps, qr_cadence(params.l))?;
    gammas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(LyapunovSpectrum {
        z,
        gammas,
        stderrs: vec![0.0; dim],
        n_steps,
        n_realizations: 1,
    })
}

/// Monte Carlo probe of the decay observable ||P_d^{-1} v||^{-s} where
/// P_d = T^{(d-1)} ... T^{(0)} and v is a random unit vector.
///
/// Since ||P^{-1} v|| grows at the top Lyapunov rate for generic v, the
/// negative fractional power is the quantity with an exponentially decaying
/// mean; its log-mean slope against distance is the measured rate. The
/// inverse is never formed by elimination: the symmetry
/// P(z)^{-1} = L P(1/conj(z))* L is used, accumulating the mirror product at
/// 1/conj(z) alongside the main one, which keeps the conditioning of long
/// products out of the sample values.
pub fn inverse_product_decay_probe(
    z: C64,
    params: &ZipperParams,
    s: f64,
    distances: &[usize],
    n_trials: usize,
    stream: StreamKey,
) -> Result<Vec<InverseDecayEstimate>> {
    if z.norm_sqr() == 0.0 {
        return Err(ZipperError::ZeroSpectralParameter);
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(ZipperError::ConfigInvalid(format!(
            "fractional exponent s must lie in (0,1), got {s}"
        )));
    }
    if distances.is_empty() || n_trials < 2 {
        return Err(ZipperError::InsufficientData {
            required: 2,
            got: distances.len().min(n_trials),
        });
    }
    params.require_invertible_alpha()?;
    let mut dlist: Vec<usize> = distances.iter().cloned().filter(|&d| d > 0).collect();
    dlist.sort_unstable();
    dlist.dedup();
    if dlist.is_empty() {
        return Err(ZipperError::InsufficientData {
            required: 1,
            got: 0,
        });
    }
    let dmax = *dlist.last().unwrap();
    let cache = FactorCache::new(&params.alpha)?;
    let w = C64::new(1.0, 0.0) / z.conj();
    let dim = 2 * params.l;
    let ll = lorentz(params.l);
    let v_site = 2 * dmax as i64 + 11;
    let per_trial: Result<Vec<Vec<f64>>> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let kt = stream.with_trial(t as u64);
            let mut vrng = kt.rng_for_site(v_site);
            let mut v = crate::linalg::CVec::from_fn(dim, |_, _| {
                C64::new(
                    vrng.random::<f64>() - 0.5,
                    vrng.random::<f64>() - 0.5,
                )
            });
            let nv = v.norm();
            v /= C64::new(nv, 0.0);
            let mut pw = cid(dim);
            let mut vals = Vec::with_capacity(dlist.len());
            for j in 0..dmax {
                let even = sample_site_disorder(params, 2 * j as i64, kt);
                let odd = sample_site_disorder(params, 2 * j as i64 - 1, kt);
                let step = cache.factor(Some(w), &phase_pair(&even))?
                    * cache.factor(None, &phase_pair(&odd))?;
                pw = step * pw;
                if dlist.binary_search(&(j + 1)).is_ok() {
                    let p_inv = &ll * pw.adjoint() * &ll;
                    vals.push((p_inv * &v).norm().powf(-s));
                }
            }
            Ok(vals)
        })
        .collect();
    let per_trial = per_trial?;
    let mut out = Vec::with_capacity(dlist.len());
    for (i, &d) in dlist.iter().enumerate() {
        let vals: Vec<f64> = per_trial.iter().map(|v| v[i]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (vals.len() as f64 - 1.0);
        out.push(InverseDecayEstimate {
            distance: d,
            mean,
            stderr: (var / vals.len() as f64).sqrt(),
            n_samples: vals.len(),
        });
    }
    Ok(out)
}
