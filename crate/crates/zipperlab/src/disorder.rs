//! Random environment: Haar unitaries, sign and phase vectors, and the
//! 2L x 2L scattering blocks they generate.
//!
//! One site of disorder consists of two independent Haar unitaries Utilde,
//! Vtilde, two vectors of +-1 signs D, d, and two phase vectors Theta, theta.
//! They compose into the phase unitaries
//!     U = exp(i diag(Theta)) . Utilde diag(D) Utilde*
//!     V = Vtilde diag(d) Vtilde* . exp(i diag(theta))
//! and, together with the fixed contraction alpha, into the unitary block
//!     S(alpha, U, V) = [[alpha, rho U], [V rho~, -V alpha* U]]
//! where rho = (I - alpha alpha*)^{1/2} and rho~ = (I - alpha* alpha)^{1/2}.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, ZipperError};
use crate::linalg::{cid, czeros, herm_sqrt, smallest_singular, spectral_norm, C64, CMat, NormKind};
use crate::rngstream::{domain, StreamKey};

/// How the coupling matrix alpha was produced (echoed into reports).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaKind {
    ScaledIdentity,
    ScaledRandom,
}

impl AlphaKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlphaKind::ScaledIdentity => "scaled_identity",
            AlphaKind::ScaledRandom => "scaled_random",
        }
    }

    pub fn parse(s: &str) -> Option<AlphaKind> {
        match s {
            "scaled_identity" => Some(AlphaKind::ScaledIdentity),
            "scaled_random" => Some(AlphaKind::ScaledRandom),
            _ => None,
        }
    }
}

/// Model parameters shared by every site.
#[derive(Debug, Clone)]
pub struct ZipperParams {
    pub l: usize,
    pub alpha: CMat,
    pub alpha_kind: AlphaKind,
    pub bernoulli_p: f64,
    pub norm_kind: NormKind,
    pub master_seed: u64,
}

impl ZipperParams {
    pub fn new(
        l: usize,
        alpha: CMat,
        alpha_kind: AlphaKind,
        bernoulli_p: f64,
        norm_kind: NormKind,
        master_seed: u64,
    ) -> Result<ZipperParams> {
        if l == 0 {
            return Err(ZipperError::ConfigInvalid("L must be >= 1".into()));
        }
        if alpha.nrows() != l || alpha.ncols() != l {
            return Err(ZipperError::DimensionMismatch {
                expected: l,
                got: alpha.nrows().max(alpha.ncols()),
            });
        }
        let norm = spectral_norm(&alpha);
        if norm >= 1.0 {
            return Err(ZipperError::NormTooLarge { norm });
        }
        if !(bernoulli_p > 0.0 && bernoulli_p < 1.0) {
            return Err(ZipperError::ConfigInvalid(format!(
                "bernoulli_p must lie in (0,1), got {bernoulli_p}"
            )));
        }
        Ok(ZipperParams {
            l,
            alpha,
            alpha_kind,
            bernoulli_p,
            norm_kind,
            master_seed,
        })
    }

    /// alpha = r I with 0 <= r < 1.
    pub fn scaled_identity(l: usize, r: f64, master_seed: u64) -> Result<ZipperParams> {
        let alpha = cid(l) * C64::new(r, 0.0);
        ZipperParams::new(
            l,
            alpha,
            AlphaKind::ScaledIdentity,
            0.5,
            NormKind::Spectral,
            master_seed,
        )
    }

    /// alpha = r G / ||G|| for a complex Ginibre G drawn from the master seed,
    /// so the spectral norm is exactly r and alpha is generically invertible.
    pub fn scaled_random(l: usize, r: f64, master_seed: u64) -> Result<ZipperParams> {
        let mut rng = StreamKey::new(master_seed, domain::ALPHA, 0).rng_for_site(0);
        let g = ginibre(l, &mut rng);
        let norm = spectral_norm(&g);
        let alpha = if norm > 0.0 {
            g * C64::new(r / norm, 0.0)
        } else {
            cid(l) * C64::new(r, 0.0)
        };
        ZipperParams::new(
            l,
            alpha,
            AlphaKind::ScaledRandom,
            0.5,
            NormKind::Spectral,
            master_seed,
        )
    }

    pub fn alpha_norm(&self) -> f64 {
        spectral_norm(&self.alpha)
    }

    /// Decay and Lyapunov-positivity diagnostics additionally need alpha
    /// invertible; report the offending singular value if it is not.
    pub fn require_invertible_alpha(&self) -> Result<()> {
        let smin = smallest_singular(&self.alpha);
        if smin <= 0.0 {
            return Err(ZipperError::SingularAlpha { sigma_min: smin });
        }
        Ok(())
    }

    pub fn disorder_key(&self, trial: u64) -> StreamKey {
        StreamKey::new(self.master_seed, domain::DISORDER, trial)
    }
}

/// The raw random data of one site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteDisorder {
    pub v_tilde: CMat,
    pub d: Vec<i8>,
    pub theta: Vec<f64>,
    pub u_tilde: CMat,
    pub big_d: Vec<i8>,
    pub big_theta: Vec<f64>,
    pub site_index: i64,
}

/// Composed phase unitaries and their Hermitian-involution cores.
#[derive(Debug, Clone)]
pub struct PhasePair {
    pub u_phase: CMat,
    pub v_phase: CMat,
    pub u_hat: CMat,
    pub v_hat: CMat,
}

/// One unitary scattering block with its four L x L corners.
#[derive(Debug, Clone)]
pub struct ScatteringBlock {
    pub matrix: CMat,
    pub alpha: CMat,
    pub beta: CMat,
    pub gamma: CMat,
    pub delta: CMat,
    pub site_index: i64,
}

/// Everything the transfer and operator layers need about one site.
#[derive(Debug, Clone)]
pub struct SiteRealization {
    pub phases: PhasePair,
    pub block: ScatteringBlock,
}

/// Contiguous sites [a, b] realized from one trial stream.
#[derive(Debug, Clone)]
pub struct DisorderWindow {
    a: i64,
    b: i64,
    sites: Vec<SiteRealization>,
}

impl DisorderWindow {
    pub fn sample(params: &ZipperParams, interval: (i64, i64), key: StreamKey) -> Result<Self> {
        let (a, b) = interval;
        if a > b {
            return Err(ZipperError::EmptyInterval { a, b });
        }
        let sites = (a..=b)
            .map(|k| realize_site(params, k, key))
            .collect::<Result<Vec<_>>>()?;
        Ok(DisorderWindow { a, b, sites })
    }

    /// Deterministic window for structural tests: every site gets identity
    /// phase unitaries, so the blocks reduce to [[alpha, rho],[rho~, -alpha*]].
    pub fn deterministic(params: &ZipperParams, interval: (i64, i64)) -> Result<Self> {
        let (a, b) = interval;
        if a > b {
            return Err(ZipperError::EmptyInterval { a, b });
        }
        let id = cid(params.l);
        let phases = PhasePair {
            u_phase: id.clone(),
            v_phase: id.clone(),
            u_hat: id.clone(),
            v_hat: id.clone(),
        };
        let sites = (a..=b)
            .map(|k| {
                Ok(SiteRealization {
                    phases: phases.clone(),
                    block: scattering_block(&params.alpha, &phases, k)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DisorderWindow { a, b, sites })
    }

    pub fn lo(&self) -> i64 {
        self.a
    }

    pub fn hi(&self) -> i64 {
        self.b
    }

    pub fn contains(&self, range: (i64, i64)) -> bool {
        self.a <= range.0 && range.1 <= self.b
    }

    pub fn site(&self, k: i64) -> &SiteRealization {
        assert!(
            self.a <= k && k <= self.b,
            "site {k} outside window [{}, {}]",
            self.a,
            self.b
        );
        &self.sites[(k - self.a) as usize]
    }

    pub fn try_site(&self, k: i64) -> Result<&SiteRealization> {
        if k < self.a || k > self.b {
            return Err(ZipperError::InsufficientWindow {
                need_lo: k,
                need_hi: k,
                have_lo: self.a,
                have_hi: self.b,
            });
        }
        Ok(&self.sites[(k - self.a) as usize])
    }
}

/// Complex Ginibre matrix: i.i.d. standard complex Gaussian entries.
pub fn ginibre(l: usize, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(l, l, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    })
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the R diagonal
/// rephased to positive reals, which removes the QR gauge ambiguity and
/// makes the law exactly Haar.
pub fn sample_haar_unitary(l: usize, rng: &mut ChaCha8Rng) -> CMat {
    let g = ginibre(l, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..l {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..l {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Draw the six components of one site in a fixed order from the stream
/// addressed by (key, site), so the result is reproducible independently of
/// call order and thread schedule.
pub fn sample_site_disorder(params: &ZipperParams, site: i64, key: StreamKey) -> SiteDisorder {
    let mut rng = key.rng_for_site(site);
    let l = params.l;
    let p = params.bernoulli_p;
    let signs = |rng: &mut ChaCha8Rng| -> Vec<i8> {
        (0..l)
            .map(|_| if rng.random::<f64>() < p { 1 } else { -1 })
            .collect()
    };
    let angles = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..l).map(|_| rng.random::<f64>() * TAU).collect()
    };
    let v_tilde = sample_haar_unitary(l, &mut rng);
    let d = signs(&mut rng);
    let theta = angles(&mut rng);
    let u_tilde = sample_haar_unitary(l, &mut rng);
    let big_d = signs(&mut rng);
    let big_theta = angles(&mut rng);
    SiteDisorder {
        v_tilde,
        d,
        theta,
        u_tilde,
        big_d,
        big_theta,
        site_index: site,
    }
}

fn sign_diag(signs: &[i8]) -> CMat {
    let l = signs.len();
    CMat::from_fn(l, l, |i, j| {
        if i == j {
            C64::new(signs[i] as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

fn phase_diag(angles: &[f64]) -> CMat {
    let l = angles.len();
    CMat::from_fn(l, l, |i, j| {
        if i == j {
            C64::from_polar(1.0, angles[i])
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Compose the phase unitaries of one site:
/// U_hat = Utilde diag(D) Utilde*, V_hat = Vtilde diag(d) Vtilde*,
/// U = exp(i diag(Theta)) U_hat, V = V_hat exp(i diag(theta)).
pub fn phase_pair(site: &SiteDisorder) -> PhasePair {
    let u_hat = &site.u_tilde * sign_diag(&site.big_d) * site.u_tilde.adjoint();
    let v_hat = &site.v_tilde * sign_diag(&site.d) * site.v_tilde.adjoint();
    let u_phase = phase_diag(&site.big_theta) * &u_hat;
    let v_phase = &v_hat * phase_diag(&site.theta);
    PhasePair {
        u_phase,
        v_phase,
        u_hat,
        v_hat,
    }
}

/// rho = (I - alpha alpha*)^{1/2} and rho~ = (I - alpha* alpha)^{1/2}.
pub fn defect_roots(alpha: &CMat) -> Result<(CMat, CMat)> {
    let norm = spectral_norm(alpha);
    if norm >= 1.0 {
        return Err(ZipperError::NormTooLarge { norm });
    }
    let l = alpha.nrows();
    let rho = herm_sqrt(&(cid(l) - alpha * alpha.adjoint()));
    let rho_tilde = herm_sqrt(&(cid(l) - alpha.adjoint() * alpha));
    Ok((rho, rho_tilde))
}

/// Assemble S(alpha, U, V) = [[alpha, rho U], [V rho~, -V alpha* U]].
pub fn scattering_block(
    alpha: &CMat,
    phases: &PhasePair,
    site: i64,
) -> Result<ScatteringBlock> {
    let (rho, rho_tilde) = defect_roots(alpha)?;
    let l = alpha.nrows();
    let beta = &rho * &phases.u_phase;
    let gamma = &phases.v_phase * &rho_tilde;
    let delta = -(&phases.v_phase * alpha.adjoint() * &phases.u_phase);
    let mut matrix = czeros(2 * l, 2 * l);
    matrix.view_mut((0, 0), (l, l)).copy_from(alpha);
    matrix.view_mut((0, l), (l, l)).copy_from(&beta);
    matrix.view_mut((l, 0), (l, l)).copy_from(&gamma);
    matrix.view_mut((l, l), (l, l)).copy_from(&delta);
    Ok(ScatteringBlock {
        matrix,
        alpha: alpha.clone(),
        beta,
        gamma,
        delta,
        site_index: site,
    })
}

/// Sample one site and build its phases and scattering block.
pub fn realize_site(params: &ZipperParams, site: i64, key: StreamKey) -> Result<SiteRealization> {
    let raw = sample_site_disorder(params, site, key);
    let phases = phase_pair(&raw);
    let block = scattering_block(&params.alpha, &phases, site)?;
    Ok(SiteRealization { phases, block })
}

/// Boundary condition applied at the ends of a finite window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Identity,
    Haar,
}

impl BoundaryKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryKind::Identity => "identity",
            BoundaryKind::Haar => "haar",
        }
    }

    pub fn parse(s: &str) -> Option<BoundaryKind> {
        match s {
            "identity" => Some(BoundaryKind::Identity),
            "haar" => Some(BoundaryKind::Haar),
            _ => None,
        }
    }

    /// Realize the boundary unitary for one end; `end` tags the stream so the
    /// two ends of a window are independent.
    pub fn realize(&self, l: usize, master_seed: u64, trial: u64, end: i64) -> CMat {
        match self {
            BoundaryKind::Identity => cid(l),
            BoundaryKind::Haar => {
                let key = StreamKey::new(master_seed, domain::BOUNDARY, trial);
                sample_haar_unitary(l, &mut key.rng_for_site(end))
            }
        }
    }
}

/// Check a proposed boundary matrix is unitary; used when accepting external
/// boundary data.
pub fn check_boundary_unitary(u: &CMat) -> Result<()> {
    let defect = crate::linalg::unitarity_defect(u);
    if defect > 1e-10 {
        return Err(ZipperError::BoundaryNotUnitary { defect });
    }
    Ok(())
}
