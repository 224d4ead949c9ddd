//! Eigenpairs of a Hermitian band matrix inside an energy window.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::banded::HermitianBand;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialOptions {
    /// Krylov block size.
    pub block: usize,
    /// Largest Krylov basis before giving up.
    pub max_dim: usize,
    /// Residual bound `|H v - lambda v|` relative to `max(1, max |H_ij|)`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for PartialOptions {
    fn default() -> Self {
        Self {
            block: 8,
            max_dim: 800,
            tol: 1e-12,
            seed: 7,
        }
    }
}

/// Eigenpairs with eigenvalue in `[lo, hi]`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct WindowEigenpairs {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
    /// Orthonormal columns.
    pub vectors: CMat,
    pub max_residual: f64,
}

impl WindowEigenpairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Reference path: full dense diagonalization.
pub fn dense_window_eigenpairs(h: &HermitianBand, lo: f64, hi: f64) -> Result<WindowEigenpairs> {
    let e = linalg::eigh(&h.to_dense())?;
    let keep: Vec<usize> = (0..e.values.len()).filter(|&i| e.values[i] >= lo && e.values[i] <= hi).collect();
    let vectors = CMat::from_fn(h.len(), keep.len(), |r, k| e.vectors[(r, keep[k])]);
    let values: Vec<f64> = keep.iter().map(|&i| e.values[i]).collect();
    let max_residual = residuals(h, &values, &vectors).into_iter().fold(0.0, f64::max);
    Ok(WindowEigenpairs {
        lo,
        hi,
        values,
        vectors,
        max_residual,
    })
}

fn residuals(h: &HermitianBand, values: &[f64], vectors: &CMat) -> Vec<f64> {
    let hv = h.apply(vectors);
    (0..values.len())
        .map(|k| {
            (0..h.len())
                .map(|i| (hv[(i, k)] - vectors[(i, k)] * values[k]).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Orthonormalize the columns of `x` against the first `m` columns of `q` and among themselves,
/// returning the accepted columns.
fn orthonormalize(q: &CMat, m: usize, mut x: CMat, rng: &mut ChaCha8Rng) -> CMat {
    let n = x.nrows();
    let qm = q.as_ref().subcols(0, m);
    let before: Vec<f64> = (0..x.ncols()).map(|k| x.col(k).norm_l2()).collect();
    for _ in 0..2 {
        if m > 0 {
            let coef = qm.adjoint() * x.as_ref();
            x -= qm * coef.as_ref();
        }
    }
    let mut out: Vec<Vec<C64>> = Vec::new();
    for k in 0..x.ncols() {
        let mut v: Vec<C64> = (0..n).map(|i| x[(i, k)]).collect();
        let mut reference = before[k];
        for attempt in 0..3 {
            for _ in 0..2 {
                for u in &out {
                    project_out(&mut v, u);
                }
            }
            let after = norm(&v);
            if after > 1e-8 * reference && after > 0.0 {
                let inv = 1.0 / after;
                v.iter_mut().for_each(|z| *z *= inv);
                out.push(v);
                break;
            }
            if attempt == 2 {
                break;
            }
            // the Krylov block lost rank: continue with a random direction
            let r = CMat::from_fn(n, 1, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let mut r = r;
            for _ in 0..2 {
                if m > 0 {
                    let coef = qm.adjoint() * r.as_ref();
                    r -= qm * coef.as_ref();
                }
            }
            v = (0..n).map(|i| r[(i, 0)]).collect();
            reference = norm(&v).max(f64::MIN_POSITIVE);
        }
    }
    CMat::from_fn(n, out.len(), |i, k| out[k][i])
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn project_out(v: &mut [C64], u: &[C64]) {
    let dot: C64 = u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
    for (x, a) in v.iter_mut().zip(u) {
        *x -= a * dot;
    }
}

/// Shift-invert block Krylov with Rayleigh-Ritz on `H`.
///
/// The number of eigenvalues in `[lo, hi]` is fixed beforehand by inertia
/// counts; the iteration stops once that many Ritz pairs in the window have
/// residual below the tolerance.
pub fn window_eigenpairs(h: &HermitianBand, lo: f64, hi: f64, opts: &PartialOptions) -> Result<WindowEigenpairs> {
    if !(lo < hi) {
        return Err(Error::InvalidWindow(format!("empty window [{lo}, {hi}]")));
    }
    let n = h.len();
    let count = h.robust_count_below(hi)? - h.robust_count_below(lo)?;
    if count == 0 {
        return Ok(WindowEigenpairs {
            lo,
            hi,
            values: Vec::new(),
            vectors: linalg::zeros(n, 0),
            max_residual: 0.0,
        });
    }
    if count * 2 + opts.block >= n {
        return dense_window_eigenpairs(h, lo, hi);
    }
    let scale = h.max_abs().max(1.0);
    let tol = opts.tol * scale;
    let lu = h.shifted_lu(0.5 * (lo + hi))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let max_dim = opts.max_dim.min(n);
    let mut q = linalg::zeros(n, max_dim);
    let mut hq = linalg::zeros(n, max_dim);
    let mut t = linalg::zeros(max_dim, max_dim);
    let mut m = 0;
    let b = opts.block.max(1);
    let mut block = CMat::from_fn(n, b, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let mut best_residual = f64::INFINITY;
    let mut last_rr = 0;
    loop {
        let x = orthonormalize(&q, m, block, &mut rng);
        let add = x.ncols().min(max_dim - m);
        if add == 0 {
            break;
        }
        let x = x.as_ref().subcols(0, add).to_owned();
        let hx = h.apply(&x);
        for k in 0..add {
            for i in 0..n {
                q[(i, m + k)] = x[(i, k)];
                hq[(i, m + k)] = hx[(i, k)];
            }
        }
        // T = Q^H H Q, new columns and their mirrored rows
        let qh = q.as_ref().subcols(0, m + add).adjoint().to_owned();
        let tnew = &qh * hx.as_ref();
        for k in 0..add {
            for r in 0..m + add {
                t[(r, m + k)] = tnew[(r, k)];
                t[(m + k, r)] = tnew[(r, k)].conj();
            }
        }
        m += add;
        // Rayleigh-Ritz gets expensive for large bases; space the checks out
        if m >= count + b && (m - last_rr >= b.max(m / 8) || m >= max_dim) {
            last_rr = m;
            let mut tm = t.as_ref().submatrix(0, 0, m, m).to_owned();
            linalg::symmetrize(&mut tm);
            let e = linalg::eigh(&tm)?;
            let inside: Vec<usize> = (0..m).filter(|&i| e.values[i] >= lo && e.values[i] <= hi).collect();
            if inside.len() >= count {
                let y = CMat::from_fn(m, inside.len(), |r, k| e.vectors[(r, inside[k])]);
                let v = q.as_ref().subcols(0, m) * y.as_ref();
                let hv = hq.as_ref().subcols(0, m) * y.as_ref();
                let values: Vec<f64> = inside.iter().map(|&i| e.values[i]).collect();
                let res: Vec<f64> = (0..inside.len())
                    .map(|k| (0..n).map(|i| (hv[(i, k)] - v[(i, k)] * values[k]).norm_sqr()).sum::<f64>().sqrt())
                    .collect();
                let converged: Vec<usize> = (0..inside.len()).filter(|&k| res[k] <= tol).collect();
                best_residual = best_residual.min(res.iter().copied().fold(0.0, f64::max));
                if converged.len() == count && inside.len() == count {
                    let max_residual = res.iter().copied().fold(0.0, f64::max);
                    return Ok(WindowEigenpairs {
                        lo,
                        hi,
                        values,
                        vectors: v,
                        max_residual,
                    });
                }
            }
        }
        if m >= max_dim {
            break;
        }
        let mut next = x;
        lu.solve_in_place(&mut next);
        block = next;
    }
    Err(Error::NoConvergence(format!(
        "{count} eigenpairs in [{lo}, {hi}] not resolved within a basis of {m} vectors (best residual {best_residual:.2e})"
    )))
}
