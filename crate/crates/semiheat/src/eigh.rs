//! Dense symmetric eigendecomposition: Householder tridiagonalization
//! followed by implicit-shift QL with eigenvector accumulation (the classic
//! tred2/tql2 pair).
//!
//! The graph spectra here are heavily degenerate (lattice symmetries), which
//! trips the eigenvalue/eigenvector pairing in some library routines; this
//! implementation keeps the accumulated transform attached to its eigenvalue
//! and is validated against exact spectra in the tests.

use nalgebra::{DMatrix, DVector};

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a
/// symmetric matrix. The input is consumed as workspace.
pub fn symmetric_eigen(mut a: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];

    // --- tred2: Householder reduction, accumulating transforms in `a` ---
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += a[(i, k)].abs();
            }
            if scale == 0.0 {
                e[i] = a[(i, l)];
            } else {
                for k in 0..=l {
                    a[(i, k)] /= scale;
                    h += a[(i, k)] * a[(i, k)];
                }
                let mut f = a[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[(i, l)] = f - g;
                f = 0.0;
                for j in 0..=l {
                    a[(j, i)] = a[(i, j)] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[(j, k)] * a[(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g += a[(k, j)] * a[(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * a[(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[(j, k)] -= f * e[k] + g * a[(i, k)];
                    }
                }
            }
        } else {
            e[i] = a[(i, l)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += a[(i, k)] * a[(k, j)];
                }
                for k in 0..i {
                    a[(k, j)] -= g * a[(k, i)];
                }
            }
        }
        d[i] = a[(i, i)];
        a[(i, i)] = 1.0;
        for j in 0..i {
            a[(j, i)] = 0.0;
            a[(i, j)] = 0.0;
        }
    }

    // --- tql2: implicit-shift QL on the tridiagonal (d, e) ---
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            // find a small subdiagonal element
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
            iter += 1;
            assert!(iter <= 50, "QL iteration failed to converge");
            // form shift
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let sign_r = if g >= 0.0 { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                // accumulate the rotation
                for k in 0..n {
                    f = a[(k, i + 1)];
                    a[(k, i + 1)] = s * a[(k, i)] + c * f;
                    a[(k, i)] = c * a[(k, i)] - s * f;
                }
            }
            if r == 0.0 && m > l {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    // sort ascending, carrying the columns along
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].total_cmp(&d[y]));
    let values = DVector::from_fn(n, |i, _| d[order[i]]);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &a.column(src));
    }
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residuals(a: &DMatrix<f64>, vals: &DVector<f64>, vecs: &DMatrix<f64>) -> f64 {
        let n = a.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            let v = vecs.column(i);
            worst = worst.max((a * v - vals[i] * v).amax());
        }
        worst
    }

    fn orthogonality(vecs: &DMatrix<f64>) -> f64 {
        let n = vecs.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let ip = vecs.column(i).dot(&vecs.column(j));
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - want).abs());
            }
        }
        worst
    }

    #[test]
    fn random_symmetric() {
        let n = 40;
        let mut a = DMatrix::zeros(n, n);
        let mut state = 0x12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for i in 0..n {
            for j in 0..=i {
                let v = next();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let (vals, vecs) = symmetric_eigen(a.clone());
        assert!(residuals(&a, &vals, &vecs) < 1e-10);
        assert!(orthogonality(&vecs) < 1e-10);
        for i in 1..n {
            assert!(vals[i] >= vals[i - 1]);
        }
    }

    #[test]
    fn degenerate_torus_spectrum() {
        // 3x3 torus walk Laplacian: eigenvalues {0, 0.75 x4, 1.5 x4}
        let side = 3;
        let n = side * side;
        let idx = |i: usize, j: usize| (i % side) * side + (j % side);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..side {
            for j in 0..side {
                let x = idx(i, j);
                a[(x, x)] += 1.0;
                a[(x, idx(i + 1, j))] -= 0.25;
                a[(x, idx(i + side - 1, j))] -= 0.25;
                a[(x, idx(i, j + 1))] -= 0.25;
                a[(x, idx(i, j + side - 1))] -= 0.25;
            }
        }
        let (vals, vecs) = symmetric_eigen(a.clone());
        assert!(residuals(&a, &vals, &vecs) < 1e-12, "pairing broken");
        assert!(orthogonality(&vecs) < 1e-12);
        let want = [0.0, 0.75, 0.75, 0.75, 0.75, 1.5, 1.5, 1.5, 1.5];
        for i in 0..n {
            assert!((vals[i] - want[i]).abs() < 1e-12, "vals[{i}] = {}", vals[i]);
        }
    }

    #[test]
    fn diagonal_and_tiny() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -1.0, 2.0]));
        let (vals, vecs) = symmetric_eigen(a.clone());
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[2] - 3.0).abs() < 1e-14);
        assert!(residuals(&a, &vals, &vecs) < 1e-13);

        let a = DMatrix::from_element(1, 1, 5.0);
        let (vals, _) = symmetric_eigen(a);
        assert_eq!(vals[0], 5.0);

        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        let (vals, vecs) = symmetric_eigen(a.clone());
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
        assert!(residuals(&a, &vals, &vecs) < 1e-14);
    }
}
