//! Smallest eigenpairs of a sparse symmetric operator.
//!
//! Block Krylov expansion with full re-orthogonalization, Rayleigh–Ritz
//! extraction and thick restarts. The block width exceeds the number of
//! wanted pairs, so repeated eigenvalues (disconnected graphs) are found.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const START_SEED: u64 = 0x05EE_D5EE_D5EE_D5EE;
const MAX_RESTARTS: usize = 400;
const BASIS_LIMIT: usize = 192;

pub(crate) struct Eigenpairs {
    pub values: Vec<f64>,
    /// One unit vector per value.
    pub vectors: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthogonalizes `v` against `basis` (two classical Gram–Schmidt passes)
/// and normalizes it. Returns `false` if nothing independent is left.
fn orthonormalize_against(basis: &[Vec<f64>], v: &mut [f64]) -> bool {
    let start = norm(v);
    if start == 0.0 {
        return false;
    }
    for _ in 0..2 {
        let coeffs: Vec<f64> = basis.iter().map(|b| dot(b, v)).collect();
        for (b, c) in basis.iter().zip(coeffs) {
            axpy(-c, b, v);
        }
    }
    let len = norm(v);
    if len <= 1e-10 * start {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= len);
    true
}

struct Subspace<'a, F: Fn(&[f64], &mut [f64])> {
    op: &'a F,
    n: usize,
    basis: Vec<Vec<f64>>,
    images: Vec<Vec<f64>>,
    /// Projected operator `Vᵀ A V`, grown incrementally.
    projected: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
}

impl<F: Fn(&[f64], &mut [f64])> Subspace<'_, F> {
    fn random_vector(&mut self) -> Vec<f64> {
        (0..self.n).map(|_| StandardNormal.sample(&mut self.rng)).collect()
    }

    /// Adds the candidate (or a random replacement) after orthonormalization.
    fn push(&mut self, mut candidate: Vec<f64>) -> bool {
        if self.basis.len() >= self.n {
            return false;
        }
        if !orthonormalize_against(&self.basis, &mut candidate) {
            let mut accepted = false;
            for _ in 0..3 {
                candidate = self.random_vector();
                if orthonormalize_against(&self.basis, &mut candidate) {
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return false;
            }
        }
        let mut image = vec![0.0; self.n];
        (self.op)(&candidate, &mut image);
        let mut row: Vec<f64> = self.basis.iter().map(|b| dot(b, &image)).collect();
        row.push(dot(&candidate, &image));
        for (r, existing) in self.projected.iter_mut().zip(&row) {
            r.push(*existing);
        }
        self.projected.push(row);
        self.basis.push(candidate);
        self.images.push(image);
        true
    }

    fn rayleigh_ritz(&self) -> (Vec<f64>, DMatrix<f64>) {
        let m = self.basis.len();
        let h = DMatrix::from_fn(m, m, |r, c| 0.5 * (self.projected[r][c] + self.projected[c][r]));
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let coeffs = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
        (values, coeffs)
    }

    fn combine(&self, coeffs: &DMatrix<f64>, col: usize, source: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (k, v) in source.iter().enumerate() {
            let c = coeffs[(k, col)];
            if c != 0.0 {
                axpy(c, v, &mut out);
            }
        }
        out
    }
}

/// Restarts without a 1% gain in the worst wanted residual before giving up.
const STALL_RESTARTS: usize = 15;

/// Approximations to the `nev` smallest eigenpairs of the symmetric operator
/// `op` on `ℝⁿ`. Iterates until every residual `‖A v − λ v‖ ≤ tol`; when
/// progress stalls the best pairs seen are returned and the caller judges
/// their residuals.
pub(crate) fn smallest_eigenpairs<F>(op: &F, n: usize, nev: usize, tol: f64) -> Result<Eigenpairs>
where
    F: Fn(&[f64], &mut [f64]),
{
    if nev == 0 || nev > n {
        return Err(Error::InvalidInput(format!("cannot extract {nev} eigenpairs from dimension {n}")));
    }
    let block = (nev + 2).min(n);
    let limit = n.min(BASIS_LIMIT.max(8 * block));
    // A generous restart core keeps clusters of tiny eigenvalues (nearly
    // disconnected graphs) from stalling convergence.
    let keep = (2 * nev + 6).max(limit / 4).min(limit.saturating_sub(block)).max(nev);

    let mut space = Subspace {
        op,
        n,
        basis: Vec::with_capacity(limit),
        images: Vec::with_capacity(limit),
        projected: Vec::with_capacity(limit),
        rng: ChaCha8Rng::seed_from_u64(START_SEED),
    };
    for _ in 0..block {
        let v = space.random_vector();
        space.push(v);
    }
    let mut last_block: Vec<usize> = (0..space.basis.len()).collect();
    let mut best: Option<(f64, Eigenpairs)> = None;
    let mut stalled = 0;

    for _ in 0..MAX_RESTARTS {
        // Expand with the images of the newest block until the basis is full.
        while space.basis.len() + block <= limit && !last_block.is_empty() {
            let candidates: Vec<Vec<f64>> = last_block.iter().map(|&i| space.images[i].clone()).collect();
            let before = space.basis.len();
            for c in candidates {
                space.push(c);
            }
            last_block = (before..space.basis.len()).collect();
        }

        let (values, coeffs) = space.rayleigh_ritz();
        let exhausted = space.basis.len() == n;
        let mut ritz = Vec::with_capacity(keep);
        let mut images = Vec::with_capacity(keep);
        let mut residuals = Vec::with_capacity(keep);
        for col in 0..keep.min(values.len()) {
            let y = space.combine(&coeffs, col, &space.basis);
            let ay = space.combine(&coeffs, col, &space.images);
            let mut r = ay.clone();
            axpy(-values[col], &y, &mut r);
            ritz.push(y);
            images.push(ay);
            residuals.push(r);
        }
        let worst = residuals[..nev].iter().map(|r| norm(r)).fold(0.0, f64::max);
        let snapshot = || Eigenpairs {
            values: values[..nev].to_vec(),
            vectors: ritz[..nev].to_vec(),
        };
        if worst <= tol || exhausted {
            return Ok(snapshot());
        }
        match &best {
            Some((b, _)) if worst >= 0.99 * b => stalled += 1,
            _ => {
                best = Some((worst, snapshot()));
                stalled = 0;
            }
        }
        if stalled >= STALL_RESTARTS {
            break;
        }

        // Thick restart: the kept Ritz vectors diagonalize the projection.
        let kept = ritz.len();
        space.projected = (0..kept)
            .map(|r| (0..kept).map(|c| if r == c { values[r] } else { 0.0 }).collect())
            .collect();
        space.basis = ritz;
        space.images = images;
        let before = space.basis.len();
        for r in residuals.into_iter().take(block) {
            space.push(r);
        }
        last_block = (before..space.basis.len()).collect();
    }
    best.map(|(_, pairs)| pairs).ok_or_else(|| {
        Error::ConvergenceFailure(format!("no eigenpair estimate after {MAX_RESTARTS} restarts"))
    })
}
