//! Finite windows of the scattering-zipper unitary.
//!
//! The operator on the window [a, b] is the product of two block layers:
//! the even layer stacks the blocks S^{(2k)} that fit inside the window and
//! the odd layer stacks the S^{(2k+1)}; whichever block rows a layer leaves
//! uncovered at the window ends are padded with the boundary unitaries
//! (U at the left end, V at the right end). All four (a, b) parities are
//! supported; the product is unitary and block five-diagonal.
//!
//! Block index k runs over [a, b]; intra-block coordinate p over 0..L; the
//! flattened scalar index is (k - a) L + p.

use std::fmt::Write as _;

use crate::disorder::{check_boundary_unitary, DisorderWindow, ZipperParams};
use crate::error::{Result, ZipperError};
use crate::linalg::{cid, czeros, C64, CMat, CVec};

/// Finite-volume zipper stored as five block diagonals (offsets -2..=2).
#[derive(Debug, Clone)]
pub struct BlockBandedUnitary {
    a: i64,
    b: i64,
    l: usize,
    diags: [Vec<CMat>; 5],
    boundary_u: CMat,
    boundary_v: CMat,
    provenance: Option<DisorderWindow>,
}

/// State on a window, stored as the flattened block coordinates.
#[derive(Debug, Clone)]
pub struct StateVector {
    a: i64,
    l: usize,
    data: Vec<C64>,
}

/// Which layer a split cuts through: an even split point severs an odd-layer
/// block, an odd split point severs an even-layer block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitParity {
    Even,
    Odd,
}

/// Finite-rank defect left over when a window is cut in two: at most eight
/// L x L blocks supported within two block indices of the split point.
#[derive(Debug, Clone)]
pub struct DefectOperator {
    pub split: i64,
    pub parity: SplitParity,
    pub blocks: Vec<(i64, i64, CMat)>,
}

/// Dense factors of the even-start factorization U = Y . D . V' . W.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub y: CMat,
    pub d: CMat,
    pub vprime: CMat,
    pub w: CMat,
}

// ---------------------------------------------------------------------------
// Layer assembly
// ---------------------------------------------------------------------------

/// One layer (even or odd) of the zipper: block tridiagonal, offsets -1..=1.
struct HalfLayer {
    a: i64,
    b: i64,
    l: usize,
    diags: [Vec<CMat>; 3],
}

impl HalfLayer {
    fn empty(a: i64, b: i64, l: usize) -> HalfLayer {
        let nb = (b - a + 1) as usize;
        HalfLayer {
            a,
            b,
            l,
            diags: std::array::from_fn(|_| vec![czeros(l, l); nb]),
        }
    }

    fn set(&mut self, row: i64, col: i64, m: CMat) {
        let o = (col - row) as isize;
        debug_assert!((-1..=1).contains(&o));
        self.diags[(o + 1) as usize][(row - self.a) as usize] = m;
    }

    fn block(&self, row: i64, col: i64) -> Option<&CMat> {
        let o = col - row;
        if !(-1..=1).contains(&o) || row < self.a || row > self.b || col < self.a || col > self.b {
            return None;
        }
        Some(&self.diags[(o + 1) as usize][(row - self.a) as usize])
    }

    fn to_dense(&self) -> CMat {
        let nb = (self.b - self.a + 1) as usize;
        let mut m = czeros(nb * self.l, nb * self.l);
        for i in self.a..=self.b {
            for o in -1..=1i64 {
                let j = i + o;
                if let Some(blk) = self.block(i, j) {
                    m.view_mut(
                        (((i - self.a) as usize) * self.l, ((j - self.a) as usize) * self.l),
                        (self.l, self.l),
                    )
                    .copy_from(blk);
                }
            }
        }
        m
    }
}

/// Even layer: blocks S^{(2k)} with both rows inside [a, b]; row a padded
/// with U when a is odd, row b padded with V when b is even.
fn even_layer(window: &DisorderWindow, a: i64, b: i64, bu: &CMat, bv: &CMat, l: usize) -> HalfLayer {
    let mut layer = HalfLayer::empty(a, b, l);
    let k_lo = (a + 1).div_euclid(2);
    let k_hi = (b - 1).div_euclid(2);
    for k in k_lo..=k_hi {
        let s = &window.site(2 * k).block;
        layer.set(2 * k, 2 * k, s.alpha.clone());
        layer.set(2 * k, 2 * k + 1, s.beta.clone());
        layer.set(2 * k + 1, 2 * k, s.gamma.clone());
        layer.set(2 * k + 1, 2 * k + 1, s.delta.clone());
    }
    if a.rem_euclid(2) == 1 {
        layer.set(a, a, bu.clone());
    }
    if b.rem_euclid(2) == 0 {
        layer.set(b, b, bv.clone());
    }
    layer
}

/// Odd layer: blocks S^{(2k+1)} with both rows inside [a, b]; row a padded
/// with U when a is even, row b padded with V when b is odd.
fn odd_layer(window: &DisorderWindow, a: i64, b: i64, bu: &CMat, bv: &CMat, l: usize) -> HalfLayer {
    let mut layer = HalfLayer::empty(a, b, l);
    let j_lo = if a.rem_euclid(2) == 1 { a } else { a + 1 };
    let mut j = j_lo;
    while j + 1 <= b {
        let s = &window.site(j).block;
        layer.set(j, j, s.alpha.clone());
        layer.set(j, j + 1, s.beta.clone());
        layer.set(j + 1, j, s.gamma.clone());
        layer.set(j + 1, j + 1, s.delta.clone());
        j += 2;
    }
    if a.rem_euclid(2) == 0 {
        layer.set(a, a, bu.clone());
    }
    if b.rem_euclid(2) == 1 {
        layer.set(b, b, bv.clone());
    }
    layer
}

fn build_from_window(
    window: &DisorderWindow,
    interval: (i64, i64),
    boundary_u: &CMat,
    boundary_v: &CMat,
) -> Result<BlockBandedUnitary> {
    let (a, b) = interval;
    if b - a < 1 {
        return Err(ZipperError::EmptyInterval { a, b });
    }
    if !window.contains((a, b)) {
        return Err(ZipperError::InsufficientWindow {
            need_lo: a,
            need_hi: b,
            have_lo: window.lo(),
            have_hi: window.hi(),
        });
    }
    check_boundary_unitary(boundary_u)?;
    check_boundary_unitary(boundary_v)?;
    let l = window.site(a).block.alpha.nrows();
    let v = even_layer(window, a, b, boundary_u, boundary_v, l);
    let w = odd_layer(window, a, b, boundary_u, boundary_v, l);
    let nb = (b - a + 1) as usize;
    let mut diags: [Vec<CMat>; 5] = std::array::from_fn(|_| vec![czeros(l, l); nb]);
    for i in a..=b {
        for ov in -1..=1i64 {
            let m = i + ov;
            if m < a || m > b {
                continue;
            }
            let vb = v.block(i, m).unwrap();
            if vb.iter().all(|e| e.norm_sqr() == 0.0) {
                continue;
            }
            for ow in -1..=1i64 {
                let j = m + ow;
                if j < a || j > b {
                    continue;
                }
                let wb = w.block(m, j).unwrap();
                let off = (j - i + 2) as usize;
                let slot = &mut diags[off][(i - a) as usize];
                *slot += vb * wb;
            }
        }
    }
    Ok(BlockBandedUnitary {
        a,
        b,
        l,
        diags,
        boundary_u: boundary_u.clone(),
        boundary_v: boundary_v.clone(),
        provenance: Some(window.clone()),
    })
}

/// Assemble the finite zipper on [a, b] from realized disorder, as the
/// product of the even and odd layers with boundary padding.
pub fn build_finite_zipper(
    params: &ZipperParams,
    window: &DisorderWindow,
    interval: (i64, i64),
    boundary_u: &CMat,
    boundary_v: &CMat,
) -> Result<BlockBandedUnitary> {
    if boundary_u.nrows() != params.l || boundary_v.nrows() != params.l {
        return Err(ZipperError::DimensionMismatch {
            expected: params.l,
            got: boundary_u.nrows().max(boundary_v.nrows()),
        });
    }
    build_from_window(window, interval, boundary_u, boundary_v)
}

impl BlockBandedUnitary {
    pub fn lo(&self) -> i64 {
        self.a
    }

    pub fn hi(&self) -> i64 {
        self.b
    }

    pub fn channels(&self) -> usize {
        self.l
    }

    pub fn n_blocks(&self) -> usize {
        (self.b - self.a + 1) as usize
    }

    pub fn dim(&self) -> usize {
        self.n_blocks() * self.l
    }

    pub fn boundary_u(&self) -> &CMat {
        &self.boundary_u
    }

    pub fn boundary_v(&self) -> &CMat {
        &self.boundary_v
    }

    pub fn provenance(&self) -> Option<&DisorderWindow> {
        self.provenance.as_ref()
    }

    /// Block at (row, col) in global block indices; None outside the band
    /// or the window.
    pub fn block(&self, row: i64, col: i64) -> Option<&CMat> {
        let o = col - row;
        if !(-2..=2).contains(&o)
            || row < self.a
            || row > self.b
            || col < self.a
            || col > self.b
        {
            return None;
        }
        Some(&self.diags[(o + 2) as usize][(row - self.a) as usize])
    }

    /// Scalar entry in flattened coordinates (used by banded solvers).
    pub fn scalar_entry(&self, gi: usize, gj: usize) -> C64 {
        let bi = self.a + (gi / self.l) as i64;
        let bj = self.a + (gj / self.l) as i64;
        match self.block(bi, bj) {
            Some(blk) => blk[(gi % self.l, gj % self.l)],
            None => C64::new(0.0, 0.0),
        }
    }

    /// Scalar bandwidth of the flattened matrix: 3L - 1 on both sides.
    pub fn scalar_bandwidth(&self) -> usize {
        3 * self.l - 1
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.dim();
        let mut m = czeros(n, n);
        for i in self.a..=self.b {
            for o in -2..=2i64 {
                let j = i + o;
                if let Some(blk) = self.block(i, j) {
                    m.view_mut(
                        (((i - self.a) as usize) * self.l, ((j - self.a) as usize) * self.l),
                        (self.l, self.l),
                    )
                    .copy_from(blk);
                }
            }
        }
        m
    }

    /// Banded matvec: cost O(n_blocks L^2).
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.a != self.a || psi.data.len() != self.dim() || psi.l != self.l {
            return Err(ZipperError::DimensionMismatch {
                expected: self.dim(),
                got: psi.data.len(),
            });
        }
        let l = self.l;
        let mut out = StateVector::zeros(self.a, self.b, l);
        for i in self.a..=self.b {
            let ri = ((i - self.a) as usize) * l;
            for o in -2..=2i64 {
                let j = i + o;
                if let Some(blk) = self.block(i, j) {
                    let cj = ((j - self.a) as usize) * l;
                    for p in 0..l {
                        let mut acc = C64::new(0.0, 0.0);
                        for q in 0..l {
                            acc += blk[(p, q)] * psi.data[cj + q];
                        }
                        out.data[ri + p] += acc;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Banded matvec with the adjoint operator.
    pub fn apply_adjoint(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.a != self.a || psi.data.len() != self.dim() || psi.l != self.l {
            return Err(ZipperError::DimensionMismatch {
                expected: self.dim(),
                got: psi.data.len(),
            });
        }
        let l = self.l;
        let mut out = StateVector::zeros(self.a, self.b, l);
        for i in self.a..=self.b {
            let ri = ((i - self.a) as usize) * l;
            for o in -2..=2i64 {
                let j = i + o;
                if let Some(blk) = self.block(i, j) {
                    let cj = ((j - self.a) as usize) * l;
                    for q in 0..l {
                        let mut acc = C64::new(0.0, 0.0);
                        for p in 0..l {
                            acc += blk[(p, q)].conj() * psi.data[ri + p];
                        }
                        out.data[cj + q] += acc;
                    }
                }
            }
        }
        Ok(out)
    }
}

impl StateVector {
    pub fn zeros(a: i64, b: i64, l: usize) -> StateVector {
        StateVector {
            a,
            l,
            data: vec![C64::new(0.0, 0.0); ((b - a + 1) as usize) * l],
        }
    }

    /// Basis state e_{k,p}: block k, coordinate p (zero-based).
    pub fn basis(a: i64, b: i64, l: usize, k: i64, p: usize) -> Result<StateVector> {
        if k < a || k > b || p >= l {
            return Err(ZipperError::DimensionMismatch {
                expected: l,
                got: p,
            });
        }
        let mut s = StateVector::zeros(a, b, l);
        s.data[((k - a) as usize) * l + p] = C64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn lo(&self) -> i64 {
        self.a
    }

    pub fn hi(&self) -> i64 {
        self.a + (self.data.len() / self.l) as i64 - 1
    }

    pub fn channels(&self) -> usize {
        self.l
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|e| e.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn amplitude(&self, k: i64, p: usize) -> C64 {
        self.data[((k - self.a) as usize) * self.l + p]
    }

    pub fn block(&self, k: i64) -> CVec {
        let off = ((k - self.a) as usize) * self.l;
        CVec::from_column_slice(&self.data[off..off + self.l])
    }

    pub fn set_block(&mut self, k: i64, v: &CVec) {
        let off = ((k - self.a) as usize) * self.l;
        for p in 0..self.l {
            self.data[off + p] = v[p];
        }
    }

    /// Block indices carrying any weight above `tol`.
    pub fn support(&self, tol: f64) -> Vec<i64> {
        let nb = self.data.len() / self.l;
        (0..nb)
            .filter(|&i| {
                self.data[i * self.l..(i + 1) * self.l]
                    .iter()
                    .any(|e| e.norm() > tol)
            })
            .map(|i| self.a + i as i64)
            .collect()
    }
}

/// Repeatedly apply the operator, recording every intermediate state.
/// The window must be wide enough that the support (spreading at most two
/// blocks per step) cannot touch either end within n_max steps.
pub fn evolve(
    op: &BlockBandedUnitary,
    psi0: &StateVector,
    n_max: usize,
) -> Result<Vec<StateVector>> {
    let support = psi0.support(0.0);
    if support.is_empty() {
        return Err(ZipperError::MissingInput("initial state is zero".into()));
    }
    let dist = support
        .iter()
        .map(|&k| (k - op.a).min(op.b - k))
        .min()
        .unwrap();
    let required = 2 * n_max as i64 + 4;
    if dist <= required {
        return Err(ZipperError::WindowTooSmall {
            a: op.a,
            b: op.b,
            required,
            actual: dist,
        });
    }
    let mut states = Vec::with_capacity(n_max + 1);
    states.push(psi0.clone());
    for _ in 0..n_max {
        let next = op.apply(states.last().unwrap())?;
        states.push(next);
    }
    Ok(states)
}

/// Factor an even-start window as Y . D . V' . W: Y carries the Hermitian
/// involutions of the even layer's V phases, D their diagonal phase factors,
/// V' the remaining even-layer blocks with V replaced by the identity, and
/// W is the odd layer unchanged.
pub fn factorize(op: &BlockBandedUnitary) -> Result<Factorization> {
    if op.a.rem_euclid(2) != 0 {
        return Err(ZipperError::ParityMismatch { a: op.a });
    }
    let window = op
        .provenance()
        .ok_or_else(|| ZipperError::MissingInput("factorize needs the disorder window".into()))?;
    let (a, b, l) = (op.a, op.b, op.l);
    let n = op.dim();
    let mut y = cid(n);
    let mut d = cid(n);
    let mut vp = czeros(n, n);
    let put = |m: &mut CMat, row: i64, col: i64, blk: &CMat| {
        m.view_mut(
            (((row - a) as usize) * l, ((col - a) as usize) * l),
            (l, l),
        )
        .copy_from(blk);
    };
    let k_lo = (a + 1).div_euclid(2);
    let k_hi = (b - 1).div_euclid(2);
    for k in k_lo..=k_hi {
        let site = window.site(2 * k);
        let s = &site.block;
        // S^{(2k)} = [[I,0],[0,V_hat]] . [[I,0],[0,e^{i theta}]] . [[alpha, beta],[rho~, -alpha* U]]
        put(&mut y, 2 * k + 1, 2 * k + 1, &site.phases.v_hat);
        let mut phase = site.phases.v_hat.adjoint() * &site.phases.v_phase;
        for p in 0..l {
            for q in 0..l {
                if p != q {
                    phase[(p, q)] = C64::new(0.0, 0.0);
                }
            }
        }
        put(&mut d, 2 * k + 1, 2 * k + 1, &phase);
        let v_inv = site.phases.v_phase.adjoint();
        put(&mut vp, 2 * k, 2 * k, &s.alpha);
        put(&mut vp, 2 * k, 2 * k + 1, &s.beta);
        put(&mut vp, 2 * k + 1, 2 * k, &(&v_inv * &s.gamma));
        put(&mut vp, 2 * k + 1, 2 * k + 1, &(&v_inv * &s.delta));
    }
    if b.rem_euclid(2) == 0 {
        put(&mut vp, b, b, &op.boundary_v);
    }
    let w = odd_layer(window, a, b, &op.boundary_u, &op.boundary_v, l).to_dense();
    Ok(Factorization { y, d, vprime: vp, w })
}

/// Closed-form defect blocks for a cut at an even split point s = 2n: the
/// severed odd-layer block S^{(2n-1)} leaves terms in rows 2n-2 .. 2n+1 and
/// columns 2n-1, 2n, with the cut boundaries (identity) subtracted where the
/// severed block's corners used to sit.
fn even_split_defect(window: &DisorderWindow, s: i64, l: usize) -> DefectOperator {
    let id = cid(l);
    let sm2 = &window.site(s - 2).block;
    let sm1 = &window.site(s - 1).block;
    let s0 = &window.site(s).block;
    let a_m1 = &sm1.alpha - &id;
    let d_m1 = &sm1.delta - &id;
    let blocks = vec![
        (s - 2, s - 1, &sm2.beta * &a_m1),
        (s - 2, s, &sm2.beta * &sm1.beta),
        (s - 1, s - 1, &sm2.delta * &a_m1),
        (s - 1, s, &sm2.delta * &sm1.beta),
        (s, s - 1, &s0.alpha * &sm1.gamma),
        (s, s, &s0.alpha * &d_m1),
        (s + 1, s - 1, &s0.gamma * &sm1.gamma),
        (s + 1, s, &s0.gamma * &d_m1),
    ];
    DefectOperator {
        split: s,
        parity: SplitParity::Even,
        blocks,
    }
}

/// Closed-form defect blocks for a cut at an odd split point s = 2m+1: the
/// severed even-layer block S^{(2m)} leaves terms in rows 2m, 2m+1 and
/// columns 2m-1 .. 2m+2.
fn odd_split_defect(window: &DisorderWindow, s: i64, l: usize) -> DefectOperator {
    let id = cid(l);
    let s0 = &window.site(s - 1).block;
    let sm1 = &window.site(s - 2).block;
    let sp1 = &window.site(s).block;
    let a_0 = &s0.alpha - &id;
    let d_0 = &s0.delta - &id;
    let blocks = vec![
        (s - 1, s - 2, &a_0 * &sm1.gamma),
        (s - 1, s - 1, &a_0 * &sm1.delta),
        (s - 1, s, &s0.beta * &sp1.alpha),
        (s - 1, s + 1, &s0.beta * &sp1.beta),
        (s, s - 2, &s0.gamma * &sm1.gamma),
        (s, s - 1, &s0.gamma * &sm1.delta),
        (s, s, &d_0 * &sp1.alpha),
        (s, s + 1, &d_0 * &sp1.beta),
    ];
    DefectOperator {
        split: s,
        parity: SplitParity::Odd,
        blocks,
    }
}

impl DefectOperator {
    pub fn to_dense(&self, a: i64, b: i64, l: usize) -> CMat {
        let nb = (b - a + 1) as usize;
        let mut m = czeros(nb * l, nb * l);
        for (r, c, blk) in &self.blocks {
            m.view_mut(
                (((r - a) as usize) * l, ((c - a) as usize) * l),
                (l, l),
            )
            .copy_from(blk);
        }
        m
    }
}

/// Cut the window at `split` into independent left and right zippers with
/// identity boundaries at the cut, plus the finite-rank defect that restores
/// the original operator: dense(op) = dense(left + right) + dense(defect).
pub fn split_with_defect(
    op: &BlockBandedUnitary,
    split: i64,
    parity: SplitParity,
) -> Result<(BlockBandedUnitary, BlockBandedUnitary, DefectOperator)> {
    if split < op.a + 2 || split > op.b - 1 {
        return Err(ZipperError::SplitOutOfRange {
            split,
            a: op.a,
            b: op.b,
        });
    }
    let expected_parity = match parity {
        SplitParity::Even => 0,
        SplitParity::Odd => 1,
    };
    if split.rem_euclid(2) != expected_parity {
        return Err(ZipperError::ParityMismatch { a: split });
    }
    let window = op
        .provenance()
        .ok_or_else(|| ZipperError::MissingInput("split needs the disorder window".into()))?;
    let id = cid(op.l);
    let left = build_from_window(window, (op.a, split - 1), &op.boundary_u, &id)?;
    let right = build_from_window(window, (split, op.b), &id, &op.boundary_v)?;
    let defect = match parity {
        SplitParity::Even => even_split_defect(window, split, op.l),
        SplitParity::Odd => odd_split_defect(window, split, op.l),
    };
    Ok((left, right, defect))
}

// ---------------------------------------------------------------------------
// Textual serialization
// ---------------------------------------------------------------------------

fn write_matrix(out: &mut String, m: &CMat) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(' ');
            }
            let e = m[(i, j)];
            let _ = write!(out, "{:.16e},{:.16e}", e.re, e.im);
        }
        out.push('\n');
    }
}

impl BlockBandedUnitary {
    /// Serialize to the documented plain-text format: a header, both boundary
    /// unitaries, then each in-band block row-major with entries "re,im" at
    /// 17 significant digits. Disorder provenance is not serialized.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "zipper-operator v1");
        let _ = writeln!(out, "interval {} {}", self.a, self.b);
        let _ = writeln!(out, "channels {}", self.l);
        let _ = writeln!(out, "boundary_U");
        write_matrix(&mut out, &self.boundary_u);
        let _ = writeln!(out, "boundary_V");
        write_matrix(&mut out, &self.boundary_v);
        for o in -2..=2i64 {
            for i in self.a..=self.b {
                let j = i + o;
                if j < self.a || j > self.b {
                    continue;
                }
                let _ = writeln!(out, "block {} {}", i, j);
                write_matrix(&mut out, self.block(i, j).unwrap());
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<BlockBandedUnitary> {
        let bad = |msg: &str| ZipperError::MalformedSerialization(msg.to_string());
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("zipper-operator v1") {
            return Err(bad("missing header"));
        }
        let interval_line = lines.next().ok_or_else(|| bad("missing interval"))?;
        let mut it = interval_line.split_whitespace();
        if it.next() != Some("interval") {
            return Err(bad("missing interval"));
        }
        let a: i64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad interval"))?;
        let b: i64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad interval"))?;
        let channels_line = lines.next().ok_or_else(|| bad("missing channels"))?;
        let mut it = channels_line.split_whitespace();
        if it.next() != Some("channels") {
            return Err(bad("missing channels"));
        }
        let l: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad channels"))?;
        if b - a < 1 || l == 0 {
            return Err(bad("degenerate interval or channels"));
        }
        let read_matrix = |lines: &mut std::str::Lines| -> Result<CMat> {
            let mut m = czeros(l, l);
            for i in 0..l {
                let row = lines.next().ok_or_else(|| bad("truncated matrix"))?;
                let mut cols = 0;
                for (j, tok) in row.split_whitespace().enumerate() {
                    let (re, im) = tok
                        .split_once(',')
                        .ok_or_else(|| bad("entry is not re,im"))?;
                    let re: f64 = re.parse().map_err(|_| bad("bad real part"))?;
                    let im: f64 = im.parse().map_err(|_| bad("bad imaginary part"))?;
                    if j >= l {
                        return Err(bad("row too long"));
                    }
                    m[(i, j)] = C64::new(re, im);
                    cols += 1;
                }
                if cols != l {
                    return Err(bad("row too short"));
                }
            }
            Ok(m)
        };
        if lines.next().map(str::trim) != Some("boundary_U") {
            return Err(bad("missing boundary_U"));
        }
        let boundary_u = read_matrix(&mut lines)?;
        if lines.next().map(str::trim) != Some("boundary_V") {
            return Err(bad("missing boundary_V"));
        }
        let boundary_v = read_matrix(&mut lines)?;
        let nb = (b - a + 1) as usize;
        let mut diags: [Vec<CMat>; 5] = std::array::from_fn(|_| vec![czeros(l, l); nb]);
        while let Some(line) = lines.next() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            if it.next() != Some("block") {
                return Err(bad("expected block header"));
            }
            let i: i64 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("bad block row"))?;
            let j: i64 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("bad block col"))?;
            let o = j - i;
            if !(-2..=2).contains(&o) || i < a || i > b || j < a || j > b {
                return Err(bad("block outside band"));
            }
            diags[(o + 2) as usize][(i - a) as usize] = read_matrix(&mut lines)?;
        }
        Ok(BlockBandedUnitary {
            a,
            b,
            l,
            diags,
            boundary_u,
            boundary_v,
            provenance: None,
        })
    }
}

// ---------------------------------------------------------------------------
// Desk-scale eigenpairs (Rayleigh-quotient iteration on the dense operator)
// ---------------------------------------------------------------------------

/// One eigenpair of the dense operator near the unit-circle guess, by
/// inverse iteration with Rayleigh-quotient shifts. Unitary operators are
/// normal, so the iteration is well behaved from a generic start.
pub fn eigenpair_near(op: &BlockBandedUnitary, guess: C64, max_iter: usize) -> Result<(C64, CVec)> {
    let dense = op.to_dense();
    let n = dense.nrows();
    let mut v = CVec::from_fn(n, |i, _| {
        C64::new(
            ((i * 2654435761 % 1000) as f64) / 1000.0 - 0.5,
            ((i * 40503 % 997) as f64) / 997.0 - 0.5,
        )
    });
    v /= C64::new(v.norm(), 0.0);
    let mut mu = guess;
    for it in 0..max_iter {
        let shifted = &dense - cid(n) * mu;
        let x = match shifted.clone().full_piv_lu().solve(&v) {
            Some(x) => x,
            None => {
                mu += C64::new(1e-12, 1e-12);
                continue;
            }
        };
        let nx = x.norm();
        if !nx.is_finite() || nx == 0.0 {
            mu += C64::new(1e-12, -1e-12);
            continue;
        }
        v = x / C64::new(nx, 0.0);
        let uv = &dense * &v;
        mu = (v.adjoint() * &uv)[(0, 0)];
        let residual = (&uv - &v * mu).norm();
        if residual < 1e-12 {
            return Ok((mu, v));
        }
        let _ = it;
    }
    let residual = (&dense * &v - &v * mu).norm();
    if residual < 1e-9 {
        Ok((mu, v))
    } else {
        Err(ZipperError::InvariantFailure(format!(
            "eigenpair iteration stalled at residual {residual:.3e}"
        )))
    }
}

/// Verify the scattering relations of one eigenpair: with psi = W phi, each
/// even-layer block must satisfy S^{(2k)} (psi_{2k}; psi_{2k+1}) =
/// z (phi_{2k}; phi_{2k+1}), the odd-layer blocks map phi pairs to psi
/// pairs, and the padded rows reduce to psi = U phi / psi = V phi. Returns
/// the largest residual over all relations.
pub fn solution_propagation_residual(
    op: &BlockBandedUnitary,
    z: C64,
    phi: &CVec,
) -> Result<f64> {
    let window = op
        .provenance()
        .ok_or_else(|| ZipperError::MissingInput("needs the disorder window".into()))?;
    let (a, b, l) = (op.a, op.b, op.l);
    let mut phi_state = StateVector::zeros(a, b, l);
    for (i, e) in phi.iter().enumerate() {
        phi_state.data[i] = *e;
    }
    let w = odd_layer(window, a, b, &op.boundary_u, &op.boundary_v, l).to_dense();
    let psi = &w * phi;
    let mut psi_state = StateVector::zeros(a, b, l);
    for (i, e) in psi.iter().enumerate() {
        psi_state.data[i] = *e;
    }
    let mut worst: f64 = 0.0;
    let stack = |top: &CVec, bot: &CVec| -> CVec {
        let mut v = CVec::zeros(2 * top.len());
        v.rows_mut(0, top.len()).copy_from(top);
        v.rows_mut(top.len(), bot.len()).copy_from(bot);
        v
    };
    // Even layer: S^{(2k)} psi-pair = z phi-pair; pads multiply by the
    // boundary unitaries.
    let k_lo = (a + 1).div_euclid(2);
    let k_hi = (b - 1).div_euclid(2);
    for k in k_lo..=k_hi {
        let s = &window.site(2 * k).block.matrix;
        let lhs = s * stack(&psi_state.block(2 * k), &psi_state.block(2 * k + 1));
        let rhs = stack(&phi_state.block(2 * k), &phi_state.block(2 * k + 1)) * z;
        worst = worst.max((lhs - rhs).norm());
    }
    if a.rem_euclid(2) == 1 {
        worst = worst.max((&op.boundary_u * psi_state.block(a) - phi_state.block(a) * z).norm());
    }
    if b.rem_euclid(2) == 0 {
        worst = worst.max((&op.boundary_v * psi_state.block(b) - phi_state.block(b) * z).norm());
    }
    // Odd layer: psi-pair = S^{(2k+1)} phi-pair; pads are psi = U phi etc.
    let j_lo = if a.rem_euclid(2) == 1 { a } else { a + 1 };
    let mut j = j_lo;
    while j + 1 <= b {
        let s = &window.site(j).block.matrix;
        let lhs = stack(&psi_state.block(j), &psi_state.block(j + 1));
        let rhs = s * stack(&phi_state.block(j), &phi_state.block(j + 1));
        worst = worst.max((lhs - rhs).norm());
        j += 2;
    }
    if a.rem_euclid(2) == 0 {
        worst = worst.max((&op.boundary_u * phi_state.block(a) - psi_state.block(a)).norm());
    }
    if b.rem_euclid(2) == 1 {
        worst = worst.max((&op.boundary_v * phi_state.block(b) - psi_state.block(b)).norm());
    }
    Ok(worst)
}
