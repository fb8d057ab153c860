//! Thin wrappers over nalgebra factorizations with a fixed ordering and
//! sign convention, so every downstream consumer sees deterministic output.

use nalgebra::DMatrix;

/// SVD with singular values sorted descending and the matching column/row
/// permutation applied to the factors.
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub vt: DMatrix<f64>,
}

/// Full thin SVD, sorted by singular value descending (ties keep the
/// underlying factorization's order).
pub fn svd_sorted(m: DMatrix<f64>) -> SortedSvd {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd with u requested");
    let vt = svd.v_t.expect("svd with v_t requested");
    let values: Vec<f64> = svd.singular_values.iter().copied().collect();

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());

    let sorted: Vec<f64> = order.iter().map(|&k| values[k]).collect();
    let u_sorted = DMatrix::from_fn(u.nrows(), order.len(), |i, c| u[(i, order[c])]);
    let vt_sorted = DMatrix::from_fn(order.len(), vt.ncols(), |r, j| vt[(order[r], j)]);
    SortedSvd {
        u: u_sorted,
        singular_values: sorted,
        vt: vt_sorted,
    }
}

/// Singular values only, sorted descending.
pub fn singular_values_sorted(m: DMatrix<f64>) -> Vec<f64> {
    let mut values: Vec<f64> = m.singular_values().iter().copied().collect();
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    values
}

/// Thin QR: for an m x n matrix with m >= n, Q is m x n with orthonormal
/// columns and R is n x n.
pub fn thin_qr(m: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = m.qr();
    (qr.q(), qr.r())
}

/// Deterministic sign convention: flip each left singular vector so its
/// maximum-absolute-value component (first such index on ties) is positive,
/// flipping the paired right vector with it.
pub fn fix_signs(u: &mut DMatrix<f64>, vt: &mut DMatrix<f64>) {
    let pairs = u.ncols().min(vt.nrows());
    for k in 0..pairs {
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for i in 0..u.nrows() {
            let a = u[(i, k)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if u[(best, k)] < 0.0 {
            for i in 0..u.nrows() {
                u[(i, k)] = -u[(i, k)];
            }
            for j in 0..vt.ncols() {
                vt[(k, j)] = -vt[(k, j)];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        use rand::Rng;
        let mut rng = crate::rng::seeded_rng(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn sorted_svd_reconstructs() {
        let m = random_matrix(8, 5, 3);
        let svd = svd_sorted(m.clone());
        assert!(svd
            .singular_values
            .windows(2)
            .all(|w| w[0] >= w[1] && w[1] >= 0.0));
        let sigma = DMatrix::from_fn(svd.u.ncols(), svd.vt.nrows(), |i, j| {
            if i == j {
                svd.singular_values[i]
            } else {
                0.0
            }
        });
        let recon = &svd.u * sigma * &svd.vt;
        assert!((recon - m).norm() < 1e-12);
    }

    #[test]
    fn sign_convention_is_idempotent_and_preserves_product() {
        let m = random_matrix(6, 6, 17);
        let svd = svd_sorted(m.clone());
        let (mut u, mut vt) = (svd.u.clone(), svd.vt.clone());
        fix_signs(&mut u, &mut vt);
        for k in 0..u.ncols() {
            let (mut best, mut best_abs) = (0, 0.0);
            for i in 0..u.nrows() {
                if u[(i, k)].abs() > best_abs {
                    best_abs = u[(i, k)].abs();
                    best = i;
                }
            }
            assert!(u[(best, k)] > 0.0);
        }
        let sigma = DMatrix::from_fn(u.ncols(), vt.nrows(), |i, j| {
            if i == j {
                svd.singular_values[i]
            } else {
                0.0
            }
        });
        assert!((&u * sigma * &vt - m).norm() < 1e-12);

        let (u2, vt2) = (u.clone(), vt.clone());
        fix_signs(&mut u, &mut vt);
        assert_eq!(u, u2);
        assert_eq!(vt, vt2);
    }

    #[test]
    fn thin_qr_shapes_and_orthonormality() {
        let m = random_matrix(9, 4, 23);
        let (q, r) = thin_qr(m.clone());
        assert_eq!((q.nrows(), q.ncols()), (9, 4));
        assert_eq!((r.nrows(), r.ncols()), (4, 4));
        let qtq = q.transpose() * &q;
        assert!((qtq - DMatrix::identity(4, 4)).norm() < 1e-12);
        assert!((q * r - m).norm() < 1e-12);
    }
}
