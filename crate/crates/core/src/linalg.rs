//! Dense 2×2 helpers.

pub type Mat2 = [[f64; 2]; 2];
pub type Tensor3 = [[[f64; 2]; 2]; 2];
pub type Tensor4 = [[[[f64; 2]; 2]; 2]; 2];

pub fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn inv2(m: &Mat2) -> Option<Mat2> {
    let d = det2(m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    Some([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
}

pub fn mat_vec(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

pub fn quad_form(m: &Mat2, a: [f64; 2], b: [f64; 2]) -> f64 {
    let mb = mat_vec(m, b);
    a[0] * mb[0] + a[1] * mb[1]
}

/// Eigenvalues of a symmetric 2×2 matrix in ascending order.
pub fn sym_eigenvalues(m: &Mat2) -> [f64; 2] {
    let a = m[0][0];
    let d = m[1][1];
    let b = 0.5 * (m[0][1] + m[1][0]);
    let mean = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    [mean - r, mean + r]
}

pub fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

pub fn rotate(v: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

pub fn max_abs3(t: &Tensor3) -> f64 {
    t.iter()
        .flatten()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn max_abs_diff3(a: &Tensor3, b: &Tensor3) -> f64 {
    let mut m = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                m = m.max((a[i][j][k] - b[i][j][k]).abs());
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal_and_rotated() {
        assert_eq!(sym_eigenvalues(&[[3.0, 0.0], [0.0, 1.0]]), [1.0, 3.0]);
        let e = sym_eigenvalues(&[[2.0, 1.0], [1.0, 2.0]]);
        assert!((e[0] - 1.0).abs() < 1e-15 && (e[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_round_trip() {
        let m = [[2.0, 0.5], [0.5, 1.0]];
        let i = inv2(&m).unwrap();
        let p = [
            [m[0][0] * i[0][0] + m[0][1] * i[1][0], m[0][0] * i[0][1] + m[0][1] * i[1][1]],
            [m[1][0] * i[0][0] + m[1][1] * i[1][0], m[1][0] * i[0][1] + m[1][1] * i[1][1]],
        ];
        assert!((p[0][0] - 1.0).abs() < 1e-15 && p[0][1].abs() < 1e-15);
        assert!(inv2(&[[1.0, 1.0], [1.0, 1.0]]).is_none());
    }
}
