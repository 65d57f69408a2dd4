//! Brute-force reference implementations for validating the adaptive engine.
//!
//! Everything here favors directness over speed: dense Gaussian
//! elimination, explicit L×L inverses, finite differences of the scalar
//! cost. Tests in the main crate compare the engine's Woodbury-reduced
//! update against these references on small random instances. Nothing in
//! this crate is imported by production code.
//!
//! Conventions shared with the engine:
//! * `U` is the L×N fullband input data matrix; column k holds u(n−k).
//! * `d` is the desired history, entry k = d(n−k).
//! * `H` is the N×M analysis bank matrix; `U_b = U·H`, `e_b = Hᵀ·e`.

use subband_adapt::linalg::Mat;

/// Affine-scaled state: q = W^{−1/2}·s for W = diag(w_sqrt)².
#[derive(Debug, Clone)]
pub struct AstState {
    pub q: Vec<f64>,
    pub w_sqrt: Vec<f64>,
}

impl AstState {
    /// Builds the scaled state from tap-domain s and the weight square roots.
    pub fn from_taps(s: &[f64], w_sqrt: &[f64]) -> Self {
        assert_eq!(s.len(), w_sqrt.len());
        let q = s.iter().zip(w_sqrt).map(|(si, wi)| si / wi).collect();
        AstState { q, w_sqrt: w_sqrt.to_vec() }
    }

    /// Tap-domain vector s = W^{1/2}·q.
    pub fn taps(&self) -> Vec<f64> {
        self.q.iter().zip(&self.w_sqrt).map(|(qi, wi)| qi * wi).collect()
    }
}

/// Frame data the scalar cost depends on, independent of q.
#[derive(Debug, Clone, Copy)]
pub struct CostData<'a> {
    /// L×N fullband input data matrix.
    pub u: &'a Mat,
    /// Desired history, entry k = d(n−k), length N.
    pub d: &'a [f64],
    /// N×M analysis bank matrix.
    pub h: &'a Mat,
    pub tau: f64,
}

/// J(q) = Σ_i (h_iᵀ[d − Uᵀ·W^{1/2}q])² + τ·qᵀq.
pub fn cost(data: &CostData, state: &AstState) -> f64 {
    let s = state.taps();
    let e = fullband_error(data.u, data.d, &s);
    let m = data.h.cols();
    let mut j = 0.0;
    for i in 0..m {
        let hi = data.h.col(i);
        let ei: f64 = hi.iter().zip(&e).map(|(a, b)| a * b).sum();
        j += ei * ei;
    }
    j + data.tau * state.q.iter().map(|q| q * q).sum::<f64>()
}

/// Second implementation of the same cost with a different loop structure
/// (per-band accumulation without forming e), for cross-checking.
pub fn cost_alt(data: &CostData, state: &AstState) -> f64 {
    let s = state.taps();
    let (l, n) = (data.u.rows(), data.u.cols());
    let m = data.h.cols();
    let mut j = 0.0;
    for i in 0..m {
        let mut ei = 0.0;
        for k in 0..n {
            let mut pred = 0.0;
            for r in 0..l {
                pred += data.u.get(r, k) * s[r];
            }
            ei += data.h.get(k, i) * (data.d[k] - pred);
        }
        j += ei * ei;
    }
    let reg: f64 = state.q.iter().map(|q| q * q).sum();
    j + data.tau * reg
}

/// e(n) = d(n) − Uᵀ(n)·s by direct dense product.
pub fn fullband_error(u: &Mat, d: &[f64], s: &[f64]) -> Vec<f64> {
    let (l, n) = (u.rows(), u.cols());
    assert_eq!(d.len(), n);
    assert_eq!(s.len(), l);
    (0..n)
        .map(|k| {
            let uk = u.col(k);
            d[k] - uk.iter().zip(s).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

/// (U_b, e_b) = (U·H, Hᵀ·e) by dense products.
pub fn subband_decompose(u: &Mat, e: &[f64], h: &Mat) -> (Mat, Vec<f64>) {
    let (l, n) = (u.rows(), u.cols());
    let m = h.cols();
    assert_eq!(h.rows(), n);
    assert_eq!(e.len(), n);
    let mut u_b = Mat::zeros(l, m);
    for i in 0..m {
        for r in 0..l {
            let mut acc = 0.0;
            for k in 0..n {
                acc += u.get(r, k) * h.get(k, i);
            }
            u_b.set(r, i, acc);
        }
    }
    let e_b = (0..m)
        .map(|i| h.col(i).iter().zip(e).map(|(a, b)| a * b).sum())
        .collect();
    (u_b, e_b)
}

/// Gradient of J at q per the analytic formula −2W^{1/2}U_b·e_b + 2τq.
pub fn analytic_gradient(data: &CostData, state: &AstState) -> Vec<f64> {
    let s = state.taps();
    let e = fullband_error(data.u, data.d, &s);
    let (u_b, e_b) = subband_decompose(data.u, &e, data.h);
    let l = u_b.rows();
    let mut g = vec![0.0; l];
    for i in 0..u_b.cols() {
        let col = u_b.col(i);
        for r in 0..l {
            g[r] += col[r] * e_b[i];
        }
    }
    for r in 0..l {
        g[r] = -2.0 * state.w_sqrt[r] * g[r] + 2.0 * data.tau * state.q[r];
    }
    g
}

/// Hessian of J: 2W^{1/2}U_bU_bᵀW^{1/2} + 2τI.
pub fn analytic_hessian(data: &CostData, state: &AstState) -> Vec<Vec<f64>> {
    let s = state.taps();
    let e = fullband_error(data.u, data.d, &s);
    let (u_b, _) = subband_decompose(data.u, &e, data.h);
    let l = u_b.rows();
    let mut h = vec![vec![0.0; l]; l];
    for i in 0..u_b.cols() {
        let col = u_b.col(i);
        for r in 0..l {
            for c in 0..l {
                h[r][c] += col[r] * col[c];
            }
        }
    }
    for r in 0..l {
        for c in 0..l {
            h[r][c] *= 2.0 * state.w_sqrt[r] * state.w_sqrt[c];
        }
        h[r][r] += 2.0 * data.tau;
    }
    h
}

/// Central-difference gradient with per-coordinate step h·max(1, |q_i|).
pub fn numeric_gradient(data: &CostData, state: &AstState, h: f64) -> Vec<f64> {
    let l = state.q.len();
    let mut g = vec![0.0; l];
    let mut probe = state.clone();
    for i in 0..l {
        let step = h * state.q[i].abs().max(1.0);
        probe.q[i] = state.q[i] + step;
        let plus = cost(data, &probe);
        probe.q[i] = state.q[i] - step;
        let minus = cost(data, &probe);
        probe.q[i] = state.q[i];
        g[i] = (plus - minus) / (2.0 * step);
    }
    g
}

/// Central-difference Hessian with per-coordinate steps h·max(1, |q_i|).
pub fn numeric_hessian(data: &CostData, state: &AstState, h: f64) -> Vec<Vec<f64>> {
    let l = state.q.len();
    let mut out = vec![vec![0.0; l]; l];
    let mut probe = state.clone();
    let step = |i: usize| h * state.q[i].abs().max(1.0);
    for i in 0..l {
        for j in 0..l {
            let (si, sj) = (step(i), step(j));
            let mut eval = |di: f64, dj: f64| {
                probe.q[i] = state.q[i] + di;
                probe.q[j] += dj;
                let v = cost(data, &probe);
                probe.q[i] = state.q[i];
                probe.q[j] = state.q[j];
                v
            };
            let pp = eval(si, sj);
            let pm = eval(si, -sj);
            let mp = eval(-si, sj);
            let mm = eval(-si, -sj);
            out[i][j] = (pp - pm - mp + mm) / (4.0 * si * sj);
        }
    }
    out
}

/// Dense Gaussian elimination with partial pivoting. Panics on exactly
/// singular systems, which the callers' δ > 0 regularization rules out.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    assert_eq!(a.len(), n);
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            assert_eq!(row.len(), n);
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        assert!(m[pivot][col] != 0.0, "singular system");
        m.swap(col, pivot);
        for row in (col + 1)..n {
            let f = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = m[row][n];
        for k in (row + 1)..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    x
}

/// Entry-by-entry reference for the regularized weighted Gram matrix.
pub fn triple_loop_gram(u_b: &Mat, w: &[f64], ridge: f64) -> Vec<Vec<f64>> {
    let (l, m) = (u_b.rows(), u_b.cols());
    assert_eq!(w.len(), l);
    let mut g = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0.0;
            for k in 0..l {
                acc += u_b.get(k, i) * w[k] * u_b.get(k, j);
            }
            g[i][j] = acc + if i == j { ridge } else { 0.0 };
        }
    }
    g
}

/// One damped regularized Newton step: q − μ·(∇²J + 2δI)⁻¹∇J.
pub fn dense_newton_step(
    q: &[f64],
    grad: &[f64],
    hess: &[Vec<f64>],
    mu: f64,
    delta: f64,
) -> Vec<f64> {
    let l = q.len();
    let mut a: Vec<Vec<f64>> = hess.to_vec();
    for i in 0..l {
        a[i][i] += 2.0 * delta;
    }
    let step = gauss_solve(&a, grad);
    q.iter().zip(&step).map(|(qi, si)| qi - mu * si).collect()
}

/// Woodbury-free direction: W^{1/2}·[W^{1/2}U_bU_bᵀW^{1/2} + δI_L]⁻¹·W^{1/2}U_b·e_b,
/// formed and solved densely at L×L.
pub fn dense_direction(u_b: &Mat, e_b: &[f64], w: &[f64], delta: f64) -> Vec<f64> {
    let (l, m) = (u_b.rows(), u_b.cols());
    assert_eq!(e_b.len(), m);
    assert_eq!(w.len(), l);
    let w_sqrt: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let mut a = vec![vec![0.0; l]; l];
    for i in 0..m {
        let col = u_b.col(i);
        for r in 0..l {
            for c in 0..l {
                a[r][c] += w_sqrt[r] * col[r] * col[c] * w_sqrt[c];
            }
        }
    }
    for r in 0..l {
        a[r][r] += delta;
    }
    let mut rhs = vec![0.0; l];
    for i in 0..m {
        let col = u_b.col(i);
        for r in 0..l {
            rhs[r] += w_sqrt[r] * col[r] * e_b[i];
        }
    }
    let x = gauss_solve(&a, &rhs);
    x.iter().zip(&w_sqrt).map(|(xi, wi)| wi * xi).collect()
}

/// The q-domain update
/// q⁺ = (I − μτ/(δ+τ)·[I − W^{1/2}U_bΦU_bᵀW^{1/2}])·q + μ·W^{1/2}U_bΦ·e_b
/// with Φ = [(δ+τ)I_M + U_bᵀWU_b]⁻¹, all products dense.
pub fn q_domain_update(
    state: &AstState,
    u_b: &Mat,
    e_b: &[f64],
    mu: f64,
    delta: f64,
    tau: f64,
) -> Vec<f64> {
    let (l, m) = (u_b.rows(), u_b.cols());
    let w: Vec<f64> = state.w_sqrt.iter().map(|x| x * x).collect();
    let phi_inv = triple_loop_gram(u_b, &w, delta + tau);
    // B = W^{1/2}·U_b, columns solved against Φ⁻¹ one at a time.
    let mut b = Mat::zeros(l, m);
    for i in 0..m {
        let col = u_b.col(i);
        for r in 0..l {
            b.set(r, i, state.w_sqrt[r] * col[r]);
        }
    }
    // y = Φ·e_b and Z = Φ·Bᵀ·q.
    let y = gauss_solve(&phi_inv, e_b);
    let btq: Vec<f64> = (0..m)
        .map(|i| b.col(i).iter().zip(&state.q).map(|(a, c)| a * c).sum())
        .collect();
    let z = gauss_solve(&phi_inv, &btq);
    let alpha = mu * tau / (delta + tau);
    let mut q_next = vec![0.0; l];
    for r in 0..l {
        let mut bz = 0.0;
        let mut by = 0.0;
        for i in 0..m {
            bz += b.get(r, i) * z[i];
            by += b.get(r, i) * y[i];
        }
        q_next[r] = state.q[r] - alpha * (state.q[r] - bz) + mu * by;
    }
    q_next
}

/// Per-subband normalized sum form of the direction:
/// g = Σ_i e_b_i · W·u_i / (u_iᵀWu_i + δ).
pub fn ptnsaf_sum_direction(u_b: &Mat, e_b: &[f64], w: &[f64], delta: f64) -> Vec<f64> {
    let (l, m) = (u_b.rows(), u_b.cols());
    let mut g = vec![0.0; l];
    for i in 0..m {
        let col = u_b.col(i);
        let denom: f64 = col.iter().zip(w).map(|(u, wi)| u * wi * u).sum::<f64>() + delta;
        for r in 0..l {
            g[r] += e_b[i] * w[r] * col[r] / denom;
        }
    }
    g
}

/// Gram-Schmidt in the W inner product: makes the columns of `u` satisfy
/// u_iᵀWu_j = 0 for i ≠ j. Columns are assumed linearly independent.
pub fn w_orthogonalize(u: &mut Mat, w: &[f64]) {
    let (l, m) = (u.rows(), u.cols());
    assert_eq!(w.len(), l);
    for j in 0..m {
        for i in 0..j {
            let mut num = 0.0;
            let mut den = 0.0;
            for r in 0..l {
                num += u.get(r, j) * w[r] * u.get(r, i);
                den += u.get(r, i) * w[r] * u.get(r, i);
            }
            let f = num / den;
            for r in 0..l {
                let v = u.get(r, j) - f * u.get(r, i);
                u.set(r, j, v);
            }
        }
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvector columns), unsorted. Intended for the
/// weighted-correlation eigenbank construction in tests (N ≤ 16).
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for i in 0..n {
        v[i][i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigs = (0..n).map(|i| m[i][i]).collect();
    (eigs, v)
}

/// One textbook NLMS step on explicit vectors: returns (error, updated taps).
pub fn textbook_nlms_step(
    s: &[f64],
    u: &[f64],
    d: f64,
    mu: f64,
    delta: f64,
) -> (f64, Vec<f64>) {
    let e = d - u.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
    let norm2: f64 = u.iter().map(|x| x * x).sum();
    let f = mu * e / (norm2 + delta);
    (e, s.iter().zip(u).map(|(si, ui)| si + f * ui).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_solve_matches_known_inverse() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = gauss_solve(&a, &[5.0, 10.0]);
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_recovers_diagonal_eigenvalues() {
        let a = vec![vec![3.0, 0.0], vec![0.0, 7.0]];
        let (eigs, _) = jacobi_eigen(&a);
        let mut sorted = eigs.clone();
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0] - 3.0).abs() < 1e-12 && (sorted[1] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_eigenvectors_diagonalize() {
        let a = vec![vec![2.0, 1.0, 0.0], vec![1.0, 2.0, 1.0], vec![0.0, 1.0, 2.0]];
        let (eigs, v) = jacobi_eigen(&a);
        // A·v_k = λ_k·v_k for each column k.
        for k in 0..3 {
            for r in 0..3 {
                let av: f64 = (0..3).map(|c| a[r][c] * v[c][k]).sum();
                assert!((av - eigs[k] * v[r][k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn w_orthogonalize_zeroes_cross_terms() {
        let mut u = Mat::from_col_major(
            4,
            3,
            &[1.0, 2.0, -1.0, 0.5, 0.3, -1.0, 2.0, 1.0, 1.5, 0.2, 0.7, -0.4],
        )
        .unwrap();
        let w = [0.5, 1.0, 2.0, 4.0];
        w_orthogonalize(&mut u, &w);
        for i in 0..3 {
            for j in (i + 1)..3 {
                let dot: f64 = (0..4).map(|r| u.get(r, i) * w[r] * u.get(r, j)).sum();
                assert!(dot.abs() < 1e-12, "columns {i},{j} not W-orthogonal: {dot}");
            }
        }
    }
}
