//! Eigenvalues of a real symmetric 3×3 matrix, closed form.

/// Eigenvalues of the symmetric matrix
/// `[[a11, a12, a13], [a12, a22, a23], [a13, a23, a33]]`,
/// returned in ascending order.
///
/// Uses the trigonometric solution of the characteristic cubic on the
/// trace-shifted matrix, which is stable for the well-scaled matrices
/// produced here.
pub fn eigvalsh3(a11: f64, a12: f64, a13: f64, a22: f64, a23: f64, a33: f64) -> [f64; 3] {
    let p1 = a12 * a12 + a13 * a13 + a23 * a23;
    if p1 == 0.0 {
        let mut e = [a11, a22, a33];
        e.sort_by(|x, y| x.partial_cmp(y).unwrap());
        return e;
    }
    let q = (a11 + a22 + a33) / 3.0;
    let b11 = a11 - q;
    let b22 = a22 - q;
    let b33 = a33 - q;
    let p2 = b11 * b11 + b22 * b22 + b33 * b33 + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    // det(B)/2 with B = (A - qI)/p
    let det_b = b11 * (b22 * b33 - a23 * a23) - a12 * (a12 * b33 - a23 * a13)
        + a13 * (a12 * a23 - b22 * a13);
    let r = (det_b / (2.0 * p * p * p)).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e_hi = q + 2.0 * p * phi.cos();
    let e_lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e_mid = 3.0 * q - e_hi - e_lo;
    [e_lo, e_mid, e_hi]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(m: [[f64; 3]; 3], expect: [f64; 3]) {
        let e = eigvalsh3(m[0][0], m[0][1], m[0][2], m[1][1], m[1][2], m[2][2]);
        for (a, b) in e.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12, "{e:?} vs {expect:?}");
        }
    }

    #[test]
    fn diagonal() {
        check([[3.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 2.0]], [-1.0, 2.0, 3.0]);
    }

    #[test]
    fn known_spectrum() {
        // [[2,1,0],[1,2,1],[0,1,2]] has eigenvalues 2, 2±√2
        let s = 2.0_f64.sqrt();
        check(
            [[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]],
            [2.0 - s, 2.0, 2.0 + s],
        );
    }

    #[test]
    fn characteristic_polynomial_vanishes() {
        // pseudo-random symmetric matrices
        let mut state = 42u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        for _ in 0..50 {
            let (a, b, c, d, e, f) = (next(), next(), next(), next(), next(), next());
            let eig = eigvalsh3(a, b, c, d, e, f);
            assert!(eig[0] <= eig[1] && eig[1] <= eig[2]);
            for lam in eig {
                // det(A - λI)
                let x = a - lam;
                let y = d - lam;
                let z = f - lam;
                let det = x * (y * z - e * e) - b * (b * z - e * c) + c * (b * e - y * c);
                assert!(det.abs() < 1e-10, "det {det}");
            }
        }
    }
}
