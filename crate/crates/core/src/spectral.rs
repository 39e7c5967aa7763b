//! Eigen-analysis: spectra, local-symmetry checks, compact localized state
//! search and symmetry-adapted block decompositions.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{max_asymmetry, SEVEN_COUPLINGS};
use crate::state::StateVector;

/// Amplitudes at or below this magnitude count as zero.
pub const SUPPORT_THRESHOLD: f64 = 1e-10;

/// Eigenvalues closer than this belong to one degenerate cluster.
pub const CLUSTER_GAP: f64 = 1e-9;

/// Tolerance for `[H, S] = 0`.
pub const COMMUTATION_TOL: f64 = 1e-12;

fn check_hermitian(h: &DMatrix<f64>) -> Result<()> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), got: h.ncols() });
    }
    let scale = h.amax().max(1.0);
    let asym = max_asymmetry(h);
    if !(asym <= 1e-12 * scale) {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    Ok(())
}

/// Eigenvalues in ascending order with orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, k: usize) -> DVector<f64> {
        self.eigenvectors.column(k).into_owned()
    }

    /// Index ranges of degenerate clusters (consecutive gaps below [`CLUSTER_GAP`]).
    pub fn clusters(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.eigenvalues.len() {
            if k == self.eigenvalues.len() || self.eigenvalues[k] - self.eigenvalues[k - 1] >= CLUSTER_GAP {
                out.push(start..k);
                start = k;
            }
        }
        out
    }

    /// Largest `‖Hφ − Eφ‖∞` over all columns.
    pub fn max_residual(&self, h: &DMatrix<f64>) -> f64 {
        let hv = h * &self.eigenvectors;
        (0..self.dim())
            .map(|k| (hv.column(k) - self.eigenvectors.column(k) * self.eigenvalues[k]).amax())
            .fold(0.0, f64::max)
    }

    /// Largest deviation of `VᵀV` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.eigenvectors.transpose() * &self.eigenvectors;
        (g - DMatrix::identity(self.dim(), self.dim())).amax()
    }
}

/// Full eigendecomposition of a real symmetric matrix.
pub fn spectrum(h: &DMatrix<f64>) -> Result<Spectrum> {
    check_hermitian(h)?;
    Ok(eigh_unchecked(h))
}

pub(crate) fn eigh_unchecked(h: &DMatrix<f64>) -> Spectrum {
    let n = h.nrows();
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
    Spectrum { eigenvalues, eigenvectors }
}

/// Site permutation: site `i` is mapped to `images[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &p in &images {
            if p >= n || seen[p] {
                return Err(Error::InvalidPermutation(n));
            }
            seen[p] = true;
        }
        Ok(Permutation(images))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    /// Transposition of two sites.
    pub fn swap(n: usize, a: usize, b: usize) -> Result<Self> {
        if a >= n || b >= n {
            return Err(Error::InvalidPermutation(n));
        }
        let mut p: Vec<usize> = (0..n).collect();
        p.swap(a, b);
        Ok(Permutation(p))
    }

    /// Cycle `c[0] → c[1] → … → c[0]`, identity elsewhere.
    pub fn cycle(n: usize, c: &[usize]) -> Result<Self> {
        let mut p: Vec<usize> = (0..n).collect();
        for (k, &s) in c.iter().enumerate() {
            if s >= n {
                return Err(Error::InvalidPermutation(n));
            }
            p[s] = c[(k + 1) % c.len()];
        }
        Permutation::new(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn image(&self, i: usize) -> usize {
        self.0[i]
    }

    /// Disjoint cycles, each starting at its smallest site.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.0.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            let mut c = vec![s];
            seen[s] = true;
            let mut x = self.0[s];
            while x != s {
                seen[x] = true;
                c.push(x);
                x = self.0[x];
            }
            out.push(c);
        }
        out
    }

    pub fn order(&self) -> usize {
        fn gcd(a: usize, b: usize) -> usize {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        self.cycles().iter().fold(1, |acc, c| acc / gcd(acc, c.len()) * c.len())
    }
}

/// `max |(HS − SH)_{ij}|` for the permutation matrix `S`.
pub fn commutator_residual(h: &DMatrix<f64>, perm: &Permutation) -> Result<f64> {
    if perm.len() != h.nrows() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), got: perm.len() });
    }
    let n = h.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((h[(perm.image(i), perm.image(j))] - h[(i, j)]).abs());
        }
    }
    Ok(worst)
}

pub fn commutes_with_permutation(h: &DMatrix<f64>, perm: &Permutation) -> bool {
    commutator_residual(h, perm).is_ok_and(|r| r <= COMMUTATION_TOL)
}

/// An eigenvector with amplitudes confined to a few sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactState {
    pub energy: f64,
    pub support: Vec<usize>,
    pub vector: StateVector,
    /// Whether the state is the antisymmetric combination on a pair of sites
    /// exchanged by a local symmetry of `H`, and so survives any change of
    /// the Hamiltonian that keeps the pair twins.
    pub protected: bool,
}

impl CompactState {
    /// Real amplitudes on the support, in support order.
    pub fn support_amplitudes(&self) -> Vec<f64> {
        self.support.iter().map(|&s| self.vector[s].re).collect()
    }
}

/// Site pairs `(i, j)` exchanged by a local reflection symmetry: equal
/// potentials and identical couplings to every other site.
pub fn twin_pairs(h: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = h.nrows();
    let tol = 1e-12 * h.amax().max(1.0);
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if (h[(i, i)] - h[(j, j)]).abs() > tol {
                continue;
            }
            if (0..n).filter(|&k| k != i && k != j).all(|k| (h[(i, k)] - h[(j, k)]).abs() <= tol) {
                out.push((i, j));
            }
        }
    }
    out
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k == 0 || k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        while i > 0 && cur[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for m in i..k {
            cur[m] = cur[m - 1] + 1;
        }
    }
}

/// Candidate supports in search order: by size, twin pairs first among
/// pairs, lexicographic otherwise.
fn candidate_supports(h: &DMatrix<f64>, max_support: usize, preferred: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = h.nrows();
    let mut out: Vec<Vec<usize>> = preferred
        .iter()
        .map(|p| {
            let mut p = p.clone();
            p.sort_unstable();
            p
        })
        .filter(|p| !p.is_empty() && p.len() <= max_support && p.iter().all(|&s| s < n))
        .collect();
    for size in 1..=max_support.min(n) {
        if size == 2 {
            let twins = twin_pairs(h);
            out.extend(twins.iter().map(|&(a, b)| vec![a, b]));
            out.extend(
                combinations(n, 2).into_iter().filter(|c| !twins.contains(&(c[0], c[1]))),
            );
        } else {
            out.extend(combinations(n, size));
        }
    }
    out
}

/// Null vector of `(H − E)` restricted to the columns in `support`, if any.
fn restricted_null_vector(h: &DMatrix<f64>, energy: f64, support: &[usize]) -> Option<DVector<f64>> {
    let n = h.nrows();
    let m = DMatrix::from_fn(n, support.len(), |i, c| {
        let s = support[c];
        h[(i, s)] - if i == s { energy } else { 0.0 }
    });
    let svd = m.svd(false, true);
    let v_t = svd.v_t?;
    let (k, &sigma) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    if sigma > SUPPORT_THRESHOLD * h.amax().max(1.0) {
        return None;
    }
    let mut x = DVector::zeros(n);
    for (c, &s) in support.iter().enumerate() {
        x[s] = v_t[(k, c)];
    }
    Some(x)
}

/// Compact localized eigenstates with at most `max_support` sites.
///
/// For every distinct eigenvalue the search solves `(H − E)x = 0` restricted
/// to each candidate support, so states hidden inside a degenerate eigenspace
/// are found regardless of how the eigensolver rotated it. Within one
/// eigenvalue the accepted supports are pairwise disjoint, the first
/// candidate in search order winning.
pub fn find_cls(h: &DMatrix<f64>, max_support: usize) -> Result<Vec<CompactState>> {
    find_cls_preferring(h, max_support, &[])
}

/// Like [`find_cls`], trying the `preferred` supports (typically the dimers
/// of a lattice) before any other candidate.
///
/// `H` alone cannot tell a dimer from any other pair of equivalent sites, so
/// passing the intended dimers makes the chosen family match the geometry.
pub fn find_cls_preferring(h: &DMatrix<f64>, max_support: usize, preferred: &[Vec<usize>]) -> Result<Vec<CompactState>> {
    check_hermitian(h)?;
    if max_support < 1 {
        return Err(Error::InvalidParameters("max_support must be at least 1".into()));
    }
    let spec = eigh_unchecked(h);
    let candidates = candidate_supports(h, max_support, preferred);
    let twins = twin_pairs(h);
    let n = h.nrows();
    let mut found = Vec::new();
    for cluster in spec.clusters() {
        let energy = cluster.clone().map(|k| spec.eigenvalues[k]).sum::<f64>() / cluster.len() as f64;
        let mut used = vec![false; n];
        let mut accepted = 0;
        for support in &candidates {
            if accepted == cluster.len() {
                break;
            }
            if support.iter().any(|&s| used[s]) {
                continue;
            }
            let Some(mut x) = restricted_null_vector(h, energy, support) else { continue };
            if support.iter().any(|&s| x[s].abs() <= SUPPORT_THRESHOLD) {
                continue;
            }
            let first = support.iter().map(|&s| x[s]).find(|a| a.abs() > SUPPORT_THRESHOLD).unwrap_or(1.0);
            x *= first.signum() / x.norm();
            let e = x.dot(&(h * &x));
            if (h * &x - &x * e).amax() > SUPPORT_THRESHOLD {
                continue;
            }
            support.iter().for_each(|&s| used[s] = true);
            accepted += 1;
            let vals: Vec<f64> = x.iter().copied().collect();
            let protected = support.len() == 2
                && twins.contains(&(support[0], support[1]))
                && (x[support[0]] + x[support[1]]).abs() <= SUPPORT_THRESHOLD;
            found.push(CompactState {
                energy: e,
                support: support.clone(),
                vector: StateVector::from_real(&vals),
                protected,
            });
        }
    }
    Ok(found)
}

/// Block of a symmetry-adapted decomposition: `matrix = basisᵀ H basis`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub label: String,
    pub matrix: DMatrix<f64>,
    /// Orthonormal columns embedding block coordinates into site space.
    pub basis: DMatrix<f64>,
}

impl Block {
    pub fn spectrum(&self) -> Spectrum {
        eigh_unchecked(&self.matrix)
    }
}

/// Reduced blocks whose spectra together make up the full spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionBlocks {
    pub blocks: Vec<Block>,
    /// `J₃² + J₄²` for the seven-site decomposition.
    pub xi: Option<f64>,
}

impl PartitionBlocks {
    /// Sorted multiset union of all block eigenvalues.
    pub fn union_eigenvalues(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.blocks.iter().flat_map(|b| b.spectrum().eigenvalues).collect();
        all.sort_by(f64::total_cmp);
        all
    }

    /// Full-space eigenpairs reconstructed from block eigenvectors.
    pub fn lifted(&self) -> Vec<(f64, DVector<f64>)> {
        let mut out = Vec::new();
        for b in &self.blocks {
            let s = b.spectrum();
            for k in 0..s.dim() {
                let v = &b.basis * s.vector(k);
                let norm = v.norm();
                out.push((s.eigenvalues[k], v / norm));
            }
        }
        out
    }

    /// Largest off-block coupling `‖Q_aᵀ H Q_b‖` plus block reconstruction error.
    pub fn decoupling_residual(&self, h: &DMatrix<f64>) -> f64 {
        let mut worst = 0.0f64;
        for (a, ba) in self.blocks.iter().enumerate() {
            let hq = h * &ba.basis;
            worst = worst.max((ba.basis.transpose() * &hq - &ba.matrix).amax());
            for (b, bb) in self.blocks.iter().enumerate() {
                if a != b {
                    worst = worst.max((bb.basis.transpose() * &hq).amax());
                }
            }
        }
        worst
    }
}

/// Symmetry-adapted blocks for any site permutation commuting with `H`.
///
/// Sites are grouped into the cycles of the permutation and each cycle is
/// expanded in real Fourier modes. Modes sharing a character of the cyclic
/// group generated by the permutation form one `H`-invariant sector; the
/// fully symmetric sector is the quotient (equitable partition) block.
pub fn equitable_blocks(h: &DMatrix<f64>, perm: &Permutation) -> Result<PartitionBlocks> {
    check_hermitian(h)?;
    let residual = commutator_residual(h, perm)?;
    if residual > COMMUTATION_TOL {
        return Err(Error::SymmetryViolated { residual });
    }
    let n = h.nrows();
    let cycles = perm.cycles();
    let m = perm.order();
    let mut blocks = Vec::new();
    for k in 0..=m / 2 {
        let paired = k > 0 && 2 * k < m;
        let mut cols: Vec<DVector<f64>> = Vec::new();
        let mut sin_cols: Vec<DVector<f64>> = Vec::new();
        for c in &cycles {
            let len = c.len();
            if (k * len) % m != 0 {
                continue;
            }
            let q = (k * len / m) as f64;
            let phase = |j: usize| 2.0 * std::f64::consts::PI * q * j as f64 / len as f64;
            let mut cv = DVector::zeros(n);
            for (j, &s) in c.iter().enumerate() {
                cv[s] = phase(j).cos();
            }
            cols.push(cv.normalize());
            if paired {
                let mut sv = DVector::zeros(n);
                for (j, &s) in c.iter().enumerate() {
                    sv[s] = phase(j).sin();
                }
                sin_cols.push(sv.normalize());
            }
        }
        cols.extend(sin_cols);
        if cols.is_empty() {
            continue;
        }
        let basis = DMatrix::from_columns(&cols);
        let matrix = basis.transpose() * h * &basis;
        let label = if k == 0 { "symmetric".to_string() } else { format!("character-{k}") };
        blocks.push(Block { label, matrix, basis });
    }
    let out = PartitionBlocks { blocks, xi: None };
    let r = out.decoupling_residual(h);
    if r > 1e-10 * h.amax().max(1.0) {
        return Err(Error::SymmetryViolated { residual: r });
    }
    Ok(out)
}

/// Equitable partition of the five-site star under the 4-cycle of its outer sites.
pub fn equitable_blocks_star(h: &DMatrix<f64>, perm: &Permutation) -> Result<PartitionBlocks> {
    if h.nrows() != 5 {
        return Err(Error::DimensionMismatch { expected: 5, got: h.nrows() });
    }
    let cycles = perm.cycles();
    if !cycles.iter().any(|c| c.len() == 4 && !c.contains(&crate::lattice::STAR_CENTER)) {
        return Err(Error::InvalidParameters("expected a 4-cycle of the outer star sites".into()));
    }
    equitable_blocks(h, perm)
}

/// Nonequitable partition of the seven-site unit into `R` (4×4) and `C₀` (3×3).
///
/// Requires the dimer couplings `J₁ = J₂ = J₅ = J₆ ≡ J`, equal potentials on
/// all four dimer sites, equal potentials on the two hubs, and `J₄ ≠ 0`.
/// `R` couples the connector to the mirrored hub pair through `√(J₃² + J₄²)`.
pub fn nonequitable_blocks_seven(h7: &DMatrix<f64>) -> Result<PartitionBlocks> {
    check_hermitian(h7)?;
    if h7.nrows() != 7 {
        return Err(Error::DimensionMismatch { expected: 7, got: h7.nrows() });
    }
    let tol = 1e-12 * h7.amax().max(1.0);
    let mut residual = 0.0f64;
    for i in 0..7 {
        for j in i + 1..7 {
            if !SEVEN_COUPLINGS.contains(&(i, j)) {
                residual = residual.max(h7[(i, j)].abs());
            }
        }
    }
    let j = h7[(0, 2)];
    for &e in &[(1, 2), (4, 5), (4, 6)] {
        residual = residual.max((h7[e] - j).abs());
    }
    let v_dimer = h7[(0, 0)];
    for s in [1, 5, 6] {
        residual = residual.max((h7[(s, s)] - v_dimer).abs());
    }
    let v_hub = h7[(2, 2)];
    residual = residual.max((h7[(4, 4)] - v_hub).abs());
    if residual > tol {
        return Err(Error::SymmetryViolated { residual });
    }
    let (j3, j4) = (h7[(2, 3)], h7[(3, 4)]);
    if j4.abs() <= tol {
        return Err(Error::InvalidParameters("J4 must be nonzero".into()));
    }
    let v_conn = h7[(3, 3)];
    let xi = j3 * j3 + j4 * j4;
    let root = xi.sqrt();
    let r = DMatrix::from_row_slice(
        4,
        4,
        &[
            v_conn, root, 0.0, 0.0, //
            root, v_hub, j, j, //
            0.0, j, v_dimer, 0.0, //
            0.0, j, 0.0, v_dimer,
        ],
    );
    let c0 = DMatrix::from_row_slice(3, 3, &[v_hub, j, j, j, v_dimer, 0.0, j, 0.0, v_dimer]);
    let (a, b) = (j3 / root, j4 / root);
    // R coordinates (x1..x4) ↦ (a x4, a x3, a x2, x1, b x2, b x3, b x4)
    let mut qr = DMatrix::zeros(7, 4);
    qr[(3, 0)] = 1.0;
    qr[(2, 1)] = a;
    qr[(4, 1)] = b;
    qr[(1, 2)] = a;
    qr[(5, 2)] = b;
    qr[(0, 3)] = a;
    qr[(6, 3)] = b;
    // C0 coordinates (w1..w3) ↦ (w3, w2, w1, 0, −(J3/J4) w1, −(J3/J4) w2, −(J3/J4) w3), normalized
    let mut qc = DMatrix::zeros(7, 3);
    qc[(2, 0)] = b;
    qc[(4, 0)] = -a;
    qc[(1, 1)] = b;
    qc[(5, 1)] = -a;
    qc[(0, 2)] = b;
    qc[(6, 2)] = -a;
    Ok(PartitionBlocks {
        blocks: vec![
            Block { label: "R".into(), matrix: r, basis: qr },
            Block { label: "C0".into(), matrix: c0, basis: qc },
        ],
        xi: Some(xi),
    })
}
