//! Internal linear-algebra kernels tuned to tridiagonal(-plus-corner)
//! structure: implicit-shift QL eigenvalues, inverse-iteration eigenvectors,
//! and a pivoted tridiagonal LU shared by the real and complex solve paths.

use nalgebra::{ComplexField, DMatrix};

use crate::{Error, Result};

const MAX_QL_SWEEPS: usize = 60;

/// All eigenvalues of the symmetric tridiagonal matrix with diagonal `diag`
/// and off-diagonal `off`, in ascending order. Implicit-shift QL, no
/// eigenvector accumulation.
pub fn sym_tridiag_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    assert_eq!(off.len() + 1, n.max(1));
    let mut d = diag.to_vec();
    if n <= 1 {
        return Ok(d);
    }
    let mut e = off.to_vec();
    e.push(0.0);

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            // locate a negligible subdiagonal element
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_QL_SWEEPS {
                return Err(Error::ConvergenceFailure(format!(
                    "QL sweep budget exhausted at index {l}"
                )));
            }

            // Wilkinson-style shift from the leading 2x2 block
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let denom = g + if g >= 0.0 { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / denom;

            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // rotation underflow: deflate and restart the sweep
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                f = (d[i] - g) * s + 2.0 * c * b;
                p = s * f;
                d[i + 1] = g + p;
                g = c * f - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Pivoted LU factorization of a general tridiagonal matrix (LAPACK `gttrf`
/// layout: multipliers in `dl`, two superdiagonals `du`, `du2`, adjacent-row
/// pivoting flags). Works for real and complex scalars.
pub struct TridiagFactor<T: ComplexField> {
    d: Vec<T>,
    du: Vec<T>,
    du2: Vec<T>,
    dl: Vec<T>,
    swap: Vec<bool>,
}

impl<T: ComplexField<RealField = f64> + Copy> TridiagFactor<T> {
    /// Factor the matrix with subdiagonal `dl`, diagonal `d`, superdiagonal
    /// `du`. `pivot_floor` rejects pivots below it; pass a floor of zero with
    /// `perturb = true` to instead substitute tiny pivots (inverse-iteration
    /// mode), using `scale` as the magnitude reference.
    pub fn new(
        dl: &[T],
        d: &[T],
        du: &[T],
        pivot_floor: f64,
        perturb: bool,
        scale: f64,
    ) -> Result<Self> {
        let n = d.len();
        assert!(n >= 1);
        assert_eq!(dl.len() + 1, n.max(1));
        assert_eq!(du.len() + 1, n.max(1));
        let mut d = d.to_vec();
        let mut du_v = du.to_vec();
        let mut du2 = vec![T::zero(); n.saturating_sub(2)];
        let mut dl_v = dl.to_vec();
        let mut swap = vec![false; n.saturating_sub(1)];
        let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE);

        let fix = |x: T| -> Result<T> {
            let m = x.modulus();
            if m < pivot_floor {
                return Err(Error::NearSingular {
                    pivot: m,
                    floor: pivot_floor,
                });
            }
            if perturb && m < tiny {
                return Ok(T::from_real(nalgebra::convert(tiny)));
            }
            Ok(x)
        };

        for i in 0..n - 1 {
            if d[i].modulus() >= dl_v[i].modulus() {
                // no interchange
                d[i] = fix(d[i])?;
                let fact = dl_v[i] / d[i];
                dl_v[i] = fact;
                d[i + 1] -= fact * du_v[i];
                if i + 2 < n {
                    // du2 stays zero
                }
            } else {
                // interchange rows i and i+1
                let fact = d[i] / dl_v[i];
                d[i] = dl_v[i];
                dl_v[i] = fact;
                let old_d1 = d[i + 1];
                d[i + 1] = du_v[i] - fact * old_d1;
                du_v[i] = old_d1;
                if i + 2 < n {
                    let old_du1 = du_v[i + 1];
                    du2[i] = old_du1;
                    du_v[i + 1] = -fact * old_du1;
                }
                swap[i] = true;
            }
        }
        d[n - 1] = fix(d[n - 1])?;
        Ok(Self {
            d,
            du: du_v,
            du2,
            dl: dl_v,
            swap,
        })
    }

    /// Solve the factored system for one right-hand side, in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.d.len();
        assert_eq!(b.len(), n);
        for i in 0..n - 1 {
            if self.swap[i] {
                let t = b[i];
                b[i] = b[i + 1];
                b[i + 1] = t - self.dl[i] * b[i];
            } else {
                let t = b[i];
                b[i + 1] -= self.dl[i] * t;
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n >= 2 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Solver for `M x = b` where `M` is tridiagonal plus symmetric corner
/// entries `(0, n-1)` and `(n-1, 0)` (closed-ring structure), via a rank-2
/// Woodbury correction of the pivoted tridiagonal factorization.
pub struct RingFactor<T: ComplexField> {
    base: TridiagFactor<T>,
    y1: Vec<T>,
    y2: Vec<T>,
    cap: [[T; 2]; 2],
}

impl<T: ComplexField<RealField = f64> + Copy> RingFactor<T> {
    pub fn new(
        dl: &[T],
        d: &[T],
        du: &[T],
        corner: T,
        pivot_floor: f64,
        scale: f64,
    ) -> Result<Self> {
        let n = d.len();
        assert!(n >= 3);
        let base = TridiagFactor::new(dl, d, du, pivot_floor, false, scale)?;
        // M = A + u1 v1^T + u2 v2^T, u1 = corner e_0, v1 = e_{n-1},
        // u2 = corner e_{n-1}, v2 = e_0
        let mut u1 = vec![T::zero(); n];
        u1[0] = corner;
        let mut u2 = vec![T::zero(); n];
        u2[n - 1] = corner;
        base.solve_in_place(&mut u1);
        base.solve_in_place(&mut u2);
        let cap = [
            [T::one() + u1[n - 1], u2[n - 1]],
            [u1[0], T::one() + u2[0]],
        ];
        let det = cap[0][0] * cap[1][1] - cap[0][1] * cap[1][0];
        let norm = cap[0][0].modulus()
            + cap[0][1].modulus()
            + cap[1][0].modulus()
            + cap[1][1].modulus();
        if det.modulus() < 1e-13 * (1.0 + norm) {
            return Err(Error::NearSingular {
                pivot: det.modulus(),
                floor: 1e-13 * (1.0 + norm),
            });
        }
        Ok(Self {
            base,
            y1: u1,
            y2: u2,
            cap,
        })
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = b.len();
        self.base.solve_in_place(b);
        let r1 = b[n - 1];
        let r2 = b[0];
        let det = self.cap[0][0] * self.cap[1][1] - self.cap[0][1] * self.cap[1][0];
        let w1 = (self.cap[1][1] * r1 - self.cap[0][1] * r2) / det;
        let w2 = (self.cap[0][0] * r2 - self.cap[1][0] * r1) / det;
        for i in 0..n {
            b[i] -= self.y1[i] * w1 + self.y2[i] * w2;
        }
    }
}

/// Deterministic start vectors for inverse iteration.
fn splitmix(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

/// Eigenvectors of a symmetric tridiagonal matrix by inverse iteration with
/// reorthogonalization inside eigenvalue clusters. `eigenvalues` must ascend.
/// Returns the column matrix aligned with `eigenvalues`.
pub fn sym_tridiag_eigenvectors(
    diag: &[f64],
    off: &[f64],
    eigenvalues: &[f64],
) -> Result<DMatrix<f64>> {
    let n = diag.len();
    let scale = eigenvalues
        .iter()
        .fold(1e-300f64, |m, l| m.max(l.abs()))
        .max(off.iter().fold(0.0f64, |m, t| m.max(2.0 * t.abs())));
    let cluster_gap = 1e-4 * scale;
    let mut vectors = DMatrix::zeros(n, n);
    let mut rng_state: u64 = 0x5DEECE66D;

    let mut k = 0;
    while k < n {
        // cluster of near-degenerate eigenvalues
        let mut end = k + 1;
        while end < n && eigenvalues[end] - eigenvalues[end - 1] <= cluster_gap {
            end += 1;
        }
        for (j, kk) in (k..end).enumerate() {
            // separate shifts inside a cluster by a few ulps
            let shift = eigenvalues[kk] + (j as f64) * f64::EPSILON * scale * 8.0;
            let d_shift: Vec<f64> = diag.iter().map(|x| x - shift).collect();
            let factor = TridiagFactor::new(off, &d_shift, off, 0.0, true, scale)?;

            let mut v: Vec<f64> = (0..n).map(|_| splitmix(&mut rng_state)).collect();
            for _ in 0..4 {
                factor.solve_in_place(&mut v);
                // orthogonalize against earlier members of this cluster
                for prev in k..kk {
                    let col = vectors.column(prev);
                    let dot: f64 = (0..n).map(|i| col[i] * v[i]).sum();
                    for i in 0..n {
                        v[i] -= dot * col[i];
                    }
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm == 0.0 || !norm.is_finite() {
                    return Err(Error::ConvergenceFailure(
                        "inverse iteration produced a null vector".into(),
                    ));
                }
                for x in &mut v {
                    *x /= norm;
                }
            }
            for i in 0..n {
                vectors[(i, kk)] = v[i];
            }
        }
        k = end;
    }
    Ok(vectors)
}
