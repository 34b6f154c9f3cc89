//! Dense helpers shared by the Gramian code.

use nalgebra::DMatrix;

const THETA_13: f64 = 5.371920351148152;

const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn norm_1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub(crate) fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = norm_1(a);
    let s = if norm > THETA_13 { (norm / THETA_13).log2().ceil() as i32 } else { 0 };
    let a = a * 2f64.powi(-s);
    let b = &PADE_13;
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = &a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is nonsingular after scaling");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub(crate) fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone().symmetric_eigenvalues().iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// `tr(M⁻¹)` for a symmetric positive definite `M`, or `None` when the
/// Cholesky factorization breaks down.
pub(crate) fn trace_inverse_spd(m: &DMatrix<f64>) -> Option<f64> {
    let n = m.nrows();
    let chol = m.clone().cholesky()?;
    let l = chol.l();
    // tr(M⁻¹) = ‖L⁻¹‖_F²
    let mut linv = DMatrix::<f64>::identity(n, n);
    if !l.solve_lower_triangular_mut(&mut linv) {
        return None;
    }
    let t = linv.iter().map(|x| x * x).sum::<f64>();
    t.is_finite().then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_scalar_and_rotation() {
        let e = expm(&DMatrix::from_element(1, 1, 1.0));
        assert!((e[(0, 0)] - std::f64::consts::E).abs() < 1e-14);
        let big = expm(&DMatrix::from_element(1, 1, -30.0));
        assert!((big[(0, 0)] / (-30f64).exp() - 1.0).abs() < 1e-12);
        let t = 2.5;
        let rot = expm(&DMatrix::from_row_slice(2, 2, &[0.0, -t, t, 0.0]));
        let want = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        assert!((rot - want).norm() < 1e-13);
    }

    #[test]
    fn expm_nilpotent() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let e = expm(&(a * 7.0));
        let want = DMatrix::from_row_slice(3, 3, &[1.0, 7.0, 24.5, 0.0, 1.0, 7.0, 0.0, 0.0, 1.0]);
        assert!((e - want).norm() < 1e-11);
    }

    #[test]
    fn trace_inverse_matches_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 4.0]));
        assert!((trace_inverse_spd(&m).unwrap() - 1.75).abs() < 1e-15);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(trace_inverse_spd(&bad).is_none());
    }
}
