//! Small fixed-size linear algebra helpers shared by all modules.

use crate::error::{Result, VerifyError};
use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector3};
use std::f64::consts::PI;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

pub fn check_dimension(n: usize) -> Result<()> {
    if n == 2 || n == 3 {
        Ok(())
    } else {
        Err(VerifyError::UnsupportedDimension(n))
    }
}

/// Embeds a slice of length `n` into a [`Vec3`].
pub fn to_vec3(n: usize, v: &[f64]) -> Result<Vec3> {
    if v.len() != n {
        return Err(VerifyError::DimensionMismatch { expected: n, got: v.len() });
    }
    let mut out = Vec3::zeros();
    for (i, x) in v.iter().enumerate() {
        out[i] = *x;
    }
    Ok(out)
}

pub fn to_slice(n: usize, v: &Vec3) -> Vec<f64> {
    v.iter().take(n).copied().collect()
}

pub fn to_mat3(n: usize, m: &[Vec<f64>]) -> Result<Mat3> {
    if m.len() != n || m.iter().any(|row| row.len() != n) {
        return Err(VerifyError::DimensionMismatch { expected: n, got: m.len() });
    }
    let mut out = Mat3::zeros();
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = m[i][j];
        }
    }
    Ok(out)
}

pub fn mat_rows(n: usize, m: &Mat3) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect()
}

pub fn unit(n: usize, i: usize) -> Vec3 {
    debug_assert!(i < n);
    let mut e = Vec3::zeros();
    e[i] = 1.0;
    e
}

/// Ascending eigenvalues and matching unit eigenvectors of the leading `n x n` block.
pub fn sym_eigen(n: usize, m: &Mat3) -> (Vec<f64>, Vec<Vec3>) {
    let mut pairs: Vec<(f64, Vec3)> = if n == 2 {
        let b = Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let eig = SymmetricEigen::new(b);
        (0..2)
            .map(|i| {
                let c = eig.eigenvectors.column(i);
                (eig.eigenvalues[i], Vec3::new(c[0], c[1], 0.0))
            })
            .collect()
    } else {
        let eig = SymmetricEigen::new(*m);
        (0..3)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
            .collect()
    };
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

pub fn is_symmetric(n: usize, m: &Mat3, tol: f64) -> bool {
    let scale = m.abs().max().max(1.0);
    (0..n).all(|i| (0..n).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * scale))
}

/// Orthonormal basis of the orthogonal complement of `u` inside R^n.
pub fn complement_basis(n: usize, u: &Vec3) -> Vec<Vec3> {
    let u = u.normalize();
    if n == 2 {
        return vec![Vec3::new(-u[1], u[0], 0.0)];
    }
    let pick = if u[0].abs() < 0.6 { Vec3::x() } else if u[1].abs() < 0.6 { Vec3::y() } else { Vec3::z() };
    let b1 = (pick - u * u.dot(&pick)).normalize();
    let b2 = u.cross(&b1);
    vec![b1, b2]
}

/// Surface measure of the unit sphere S^{n-1}.
pub fn sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => 2.0 * PI.powf(n as f64 / 2.0) / gamma_fn(n as f64 / 2.0),
    }
}

/// Volume of the unit ball in R^n.
pub fn ball_volume(n: usize) -> f64 {
    sphere_area(n) / n as f64
}

/// Gamma function via the Lanczos approximation (g = 7, 9 terms).
pub fn gamma_fn(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_fn(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Unit vector in the plane at angle `alpha` (dimension 2 embedding).
pub fn polar(alpha: f64) -> Vec3 {
    Vec3::new(alpha.cos(), alpha.sin(), 0.0)
}

/// Quasi-uniform points on S^2 (Fibonacci lattice).
pub fn fibonacci_sphere(count: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Direction grid covering S^{n-1}: `count` equispaced angles for n = 2, a Fibonacci lattice for n = 3.
pub fn direction_grid(n: usize, count: usize) -> Vec<Vec3> {
    if n == 2 {
        (0..count).map(|i| polar(2.0 * PI * i as f64 / count as f64)).collect()
    } else {
        fibonacci_sphere(count)
    }
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
