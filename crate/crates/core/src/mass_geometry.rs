//! Where the mass of a distribution sits: outside tubes around lines, beyond slabs,
//! and on either side of a hyperplane through the mean velocity.

use crate::dist_model::Mixture;
use crate::error::{Result, VerifyError};
use crate::linalg::{complement_basis, direction_grid, golden_min, polar, to_slice, to_vec3, Vec3};
use crate::quadrature::{Constraint, Cubature, QuadBudget};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSpec {
    pub point: Vec3,
    /// Unit.
    pub dir: Vec3,
}

impl LineSpec {
    pub fn new(n: usize, point: &[f64], dir: &[f64]) -> Result<Self> {
        let point = to_vec3(n, point)?;
        let dir = to_vec3(n, dir)?;
        Self::from_vecs(point, dir)
    }

    pub fn from_vecs(point: Vec3, dir: Vec3) -> Result<Self> {
        let norm = dir.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(VerifyError::InvalidParameter("line direction must be nonzero".into()));
        }
        Ok(LineSpec { point, dir: dir / norm })
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 {
        Ok(())
    } else {
        Err(VerifyError::InvalidParameter(format!("{name} must be positive, got {x}")))
    }
}

/// `int_{B_R(center) \ L_delta} f`; `r = inf` drops the ball.
pub fn tube_complement_mass_around(f: &Mixture, line: &LineSpec, delta: f64, r: f64, center: &Vec3, budget: &QuadBudget) -> Result<f64> {
    positive("tube radius", delta)?;
    positive("ball radius", r)?;
    let n = f.dimension();
    let mut cub = Cubature::new(f, budget).restrict(Constraint::tube(n, line.point, line.dir, delta, false));
    if r.is_finite() {
        cub = cub.restrict(Constraint::Ball { center: *center, radius: r, inside: true });
    }
    Ok(cub.integrate(|_, d| d)?.value)
}

/// `int_{B_R \ L_delta} f` with `B_R` centered at the origin.
pub fn tube_complement_mass(f: &Mixture, line: &LineSpec, delta: f64, r: f64, budget: &QuadBudget) -> Result<f64> {
    tube_complement_mass_around(f, line, delta, r, &Vec3::zeros(), budget)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub direction: Vec<f64>,
    pub offset: Vec<f64>,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TubeScan {
    pub min_mass: f64,
    pub line: LineSpec,
    pub rows: Vec<ScanRow>,
}

/// Minimizes the tube-complement mass over lines `vbar + offset + R dir`, with directions on a
/// half-sphere grid and offsets (scalars, used along each axis of `dir`'s complement) inside
/// `[-2R, 2R]`, followed by a local golden-section polish of the grid minimizer.
pub fn worst_tube_scan(f: &Mixture, delta: f64, r: f64, direction_count: usize, offsets: &[f64], budget: &QuadBudget) -> Result<TubeScan> {
    positive("tube radius", delta)?;
    positive("ball radius", r)?;
    if direction_count == 0 || offsets.is_empty() {
        return Err(VerifyError::InvalidParameter("tube scan grids must be nonempty".into()));
    }
    let n = f.dimension();
    let vbar = f.first_moment() / f.mass();
    let bound = 2.0 * r;
    let offsets: Vec<f64> = offsets.iter().map(|o| o.clamp(-bound, bound)).collect();
    let dirs: Vec<Vec3> = if n == 2 {
        (0..direction_count).map(|i| polar(std::f64::consts::PI * i as f64 / direction_count as f64)).collect()
    } else {
        direction_grid(3, 2 * direction_count).into_iter().filter(|d| d[2] > 0.0 || (d[2] == 0.0 && (d[1] > 0.0 || (d[1] == 0.0 && d[0] > 0.0)))).collect()
    };
    let mut cells: Vec<(Vec3, Vec<f64>)> = Vec::new();
    for d in &dirs {
        if n == 2 {
            for &o in &offsets {
                cells.push((*d, vec![o]));
            }
        } else {
            for &a in &offsets {
                for &b in &offsets {
                    cells.push((*d, vec![a, b]));
                }
            }
        }
    }
    let line_of = |d: &Vec3, off: &[f64]| -> LineSpec {
        let basis = complement_basis(n, d);
        let shift: Vec3 = basis.iter().zip(off).map(|(b, o)| b * *o).sum();
        LineSpec { point: vbar + shift, dir: *d }
    };
    let masses: Vec<Result<f64>> = cells.par_iter().map(|(d, off)| tube_complement_mass(f, &line_of(d, off), delta, r, budget)).collect();
    let mut rows = Vec::with_capacity(cells.len());
    let mut best = (f64::INFINITY, 0usize);
    for (i, ((d, off), m)) in cells.iter().zip(masses).enumerate() {
        let m = m?;
        if m < best.0 {
            best = (m, i);
        }
        rows.push(ScanRow { direction: to_slice(n, d), offset: off.clone(), mass: m });
    }
    let (mut best_mass, idx) = best;
    let (mut dir, mut off) = cells[idx].clone();
    let step = if offsets.len() > 1 { (offsets[offsets.len() - 1] - offsets[0]).abs() / (offsets.len() - 1) as f64 } else { delta };
    let eval = |d: &Vec3, o: &[f64]| tube_complement_mass(f, &line_of(d, o), delta, r, budget).unwrap_or(f64::INFINITY);
    for _ in 0..2 {
        for k in 0..off.len() {
            let c = off[k];
            let mut trial = off.clone();
            let (x, m) = golden_min(
                |t| {
                    trial[k] = t.clamp(-bound, bound);
                    eval(&dir, &trial)
                },
                c - step,
                c + step,
                30,
            );
            if m < best_mass {
                best_mass = m;
                off[k] = x.clamp(-bound, bound);
            }
        }
        if n == 2 {
            let a0 = dir[1].atan2(dir[0]);
            let da = std::f64::consts::PI / direction_count as f64;
            let (a, m) = golden_min(|a| eval(&polar(a), &off), a0 - da, a0 + da, 30);
            if m < best_mass {
                best_mass = m;
                dir = polar(a);
            }
        }
    }
    Ok(TubeScan { min_mass: best_mass, line: line_of(&dir, &off), rows })
}

/// `sup_{e perp sigma} int_{|w . e| >= eta} f(vbar + w) |w . e|^2 dw`, with the sup over
/// `e_count` directions of the complement (one direction when n = 2).
pub fn slab_second_moment(f: &Mixture, sigma: &Vec3, eta: f64, e_count: usize, budget: &QuadBudget) -> Result<f64> {
    if !(eta >= 0.0) {
        return Err(VerifyError::InvalidParameter(format!("slab half-width must be nonnegative, got {eta}")));
    }
    if sigma.norm() == 0.0 {
        return Err(VerifyError::InvalidParameter("sigma must be nonzero".into()));
    }
    let n = f.dimension();
    let vbar = f.first_moment() / f.mass();
    let basis = complement_basis(n, sigma);
    let es: Vec<Vec3> = if n == 2 {
        vec![basis[0]]
    } else {
        let m = e_count.max(1);
        (0..m).map(|k| std::f64::consts::PI * k as f64 / m as f64).map(|a| basis[0] * a.cos() + basis[1] * a.sin()).collect()
    };
    let vals: Vec<Result<f64>> = es
        .par_iter()
        .map(|e| {
            let mut cub = Cubature::new(f, budget);
            if eta > 0.0 {
                cub = cub.restrict(Constraint::Slab { center: vbar, normal: *e, half_width: eta, inside: false });
            }
            cub.integrate(|x, d| d * (x - vbar).dot(e).powi(2)).map(|q| q.value)
        })
        .collect();
    let mut best = f64::NEG_INFINITY;
    for v in vals {
        best = best.max(v?);
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassBalance {
    /// `int_{w . e0 >= eta} f(vbar + w)`.
    pub forward: f64,
    /// `int_{B_varrho, w . e0 <= 0} f(vbar + w)`.
    pub backward: f64,
    /// `int_{|w| >= varrho} f(vbar + w) |w . e0|`.
    pub tail: f64,
    /// `forward * eta <= tail + varrho * backward`.
    pub chain_holds: bool,
    /// Whether `tail <= forward * eta / 2`, the regime where the lower bound applies.
    pub conclusion_applicable: bool,
    /// `backward >= forward * eta / (2 varrho)`.
    pub conclusion_holds: bool,
}

pub fn halfspace_mass_balance(f: &Mixture, e0: &Vec3, eta: f64, varrho: f64, budget: &QuadBudget) -> Result<MassBalance> {
    positive("eta", eta)?;
    positive("varrho", varrho)?;
    let norm = e0.norm();
    if norm == 0.0 {
        return Err(VerifyError::InvalidParameter("e0 must be nonzero".into()));
    }
    let e = e0 / norm;
    let vbar = f.first_moment() / f.mass();
    let c = vbar.dot(&e);
    let forward = Cubature::new(f, budget).restrict(Constraint::HalfSpace { normal: e, offset: c + eta }).integrate(|_, d| d)?.value;
    let backward = Cubature::new(f, budget)
        .restrict(Constraint::Ball { center: vbar, radius: varrho, inside: true })
        .restrict(Constraint::HalfSpace { normal: -e, offset: -c })
        .integrate(|_, d| d)?
        .value;
    let tail = Cubature::new(f, budget)
        .restrict(Constraint::Ball { center: vbar, radius: varrho, inside: false })
        .kink(vbar)
        .integrate(|x, d| d * (x - vbar).dot(&e).abs())?
        .value;
    let slack = 1e-9 * (forward * eta).max(1e-300);
    Ok(MassBalance {
        forward,
        backward,
        tail,
        chain_holds: forward * eta <= tail + varrho * backward + slack,
        conclusion_applicable: tail <= 0.5 * forward * eta,
        conclusion_holds: backward >= forward * eta / (2.0 * varrho) - slack,
    })
}

/// `inf_sigma int_{B_R(vbar)} 1{dist(x - vbar, <sigma>) >= delta0} f(x) dx` over a direction grid.
pub fn mass_location(f: &Mixture, delta0: f64, r: f64, sigma_count: usize, budget: &QuadBudget) -> Result<(f64, Vec3)> {
    let n = f.dimension();
    let vbar = f.first_moment() / f.mass();
    let sigmas: Vec<Vec3> = if n == 2 {
        (0..sigma_count.max(1)).map(|i| polar(std::f64::consts::PI * i as f64 / sigma_count.max(1) as f64)).collect()
    } else {
        direction_grid(3, sigma_count.max(1))
    };
    let vals: Vec<Result<f64>> = sigmas.par_iter().map(|s| tube_complement_mass_around(f, &LineSpec { point: vbar, dir: *s }, delta0, r, &vbar, budget)).collect();
    let mut best = (f64::INFINITY, Vec3::zeros());
    for (s, v) in sigmas.iter().zip(vals) {
        let v = v?;
        if v < best.0 {
            best = (v, *s);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn coarse() -> QuadBudget {
        QuadBudget { rel_tol: 1e-7, ..Default::default() }
    }

    fn erf_oracle(x: f64) -> f64 {
        // P(|Z| < x) for a standard normal, by Simpson on the density
        let m = 20_000;
        let h = x / m as f64;
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
        let mut s = phi(0.0) + phi(x);
        for i in 1..m {
            s += phi(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        2.0 * s * h / 3.0
    }

    #[test]
    fn maxwellian_tube_complement() {
        let f = Mixture::maxwellian(2).unwrap();
        let line = LineSpec::new(2, &[0.0, 0.0], &[0.0, 1.0]).unwrap();
        let full = tube_complement_mass(&f, &line, 0.1, f64::INFINITY, &coarse()).unwrap();
        assert_relative_eq!(full, 1.0 - erf_oracle(0.1), max_relative = 1e-7);
        let ball = tube_complement_mass(&f, &line, 0.1, 5.0, &coarse()).unwrap();
        assert!(ball >= 0.8 && ball < full);
    }

    #[test]
    fn tube_missing_support_keeps_ball_mass() {
        let f = Mixture::from_spec(&crate::DistributionSpec { dimension: 2, components: vec![crate::ComponentSpec::Ball { center: vec![0.0, 0.0], radius: 1.0, weight: 1.0 }] }).unwrap();
        let line = LineSpec::new(2, &[10.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_relative_eq!(tube_complement_mass(&f, &line, 0.5, 5.0, &coarse()).unwrap(), PI, max_relative = 1e-8);
    }

    #[test]
    fn counterexample_tube() {
        for r in [5.0f64, 10.0, 20.0] {
            let f = Mixture::counterexample(r).unwrap();
            let line = LineSpec::new(2, &[0.0, 0.0], &[0.0, 1.0]).unwrap();
            let m = tube_complement_mass(&f, &line, 0.5, 2.0 * r, &coarse()).unwrap();
            assert_relative_eq!(m, 4.0 * r.powi(-2) * (1.0 - 0.5 / r), max_relative = 1e-8);
        }
    }

    #[test]
    fn scan_finds_center_line_for_maxwellian() {
        let f = Mixture::maxwellian(2).unwrap();
        let offsets: Vec<f64> = (-4..=4).map(|k| k as f64 * 0.5).collect();
        let scan = worst_tube_scan(&f, 0.1, 5.0, 12, &offsets, &QuadBudget { rel_tol: 1e-6, ..Default::default() }).unwrap();
        assert!(scan.min_mass > 0.8);
        let perp = scan.line.point - scan.line.dir * scan.line.point.dot(&scan.line.dir);
        assert!(perp.norm() < 1e-3);
        assert_eq!(scan.rows.len(), 12 * 9);
    }

    #[test]
    fn scan_degenerates_with_squeezing() {
        let offsets: Vec<f64> = (-2..=2).map(|k| k as f64 * 0.25).collect();
        let bud = QuadBudget { rel_tol: 1e-6, ..Default::default() };
        let mut prev = f64::INFINITY;
        for eps in [1.0, 0.3, 0.1, 0.03] {
            let f = Mixture::squeezed_gaussian(eps, &[1.0, 0.0]).unwrap();
            let m = worst_tube_scan(&f, 0.1, 5.0, 8, &offsets, &bud).unwrap().min_mass;
            assert!(m < prev);
            prev = m;
        }
        assert!(prev < 0.01);
    }

    #[test]
    fn slab_moments() {
        let f3 = Mixture::maxwellian(3).unwrap();
        let v = slab_second_moment(&f3, &Vec3::new(0.3, 0.4, 0.5), 0.0, 6, &coarse()).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-6);
        let f2 = Mixture::maxwellian(2).unwrap();
        assert!(slab_second_moment(&f2, &Vec3::x(), 20.0, 1, &coarse()).unwrap() < 1e-30);
        let (p0, m0, lambda) = (1.0f64, 1.0, 0.5);
        let eta = ((p0 - lambda) / m0).sqrt();
        assert!(slab_second_moment(&f2, &Vec3::x(), eta, 1, &coarse()).unwrap() >= lambda);
    }

    #[test]
    fn mass_balance_cases() {
        let f = Mixture::maxwellian(2).unwrap();
        let bal = halfspace_mass_balance(&f, &Vec3::x(), 1.0, 5.0, &coarse()).unwrap();
        let inside = 1.0 - (-12.5f64).exp();
        assert_relative_eq!(bal.backward, 0.5 * inside, max_relative = 1e-7);
        assert!(bal.chain_holds && bal.conclusion_applicable && bal.conclusion_holds);

        let boxed = Mixture::from_spec(&crate::DistributionSpec { dimension: 2, components: vec![crate::ComponentSpec::Box { center: vec![2.0, 0.0], half_widths: vec![0.5, 0.5], weight: 1.0 }] }).unwrap();
        let b = halfspace_mass_balance(&boxed, &Vec3::x(), 0.25, 5.0, &coarse()).unwrap();
        // recentered at vbar = 2 e1: forward is the strip (0.25, 0.5), backward the left half
        assert_relative_eq!(b.forward, 0.25, max_relative = 1e-9);
        assert_relative_eq!(b.backward, 0.5, max_relative = 1e-9);

        let balls = Mixture::from_spec(&crate::DistributionSpec {
            dimension: 2,
            components: vec![
                crate::ComponentSpec::Ball { center: vec![2.0, 0.0], radius: 0.5, weight: 1.0 },
                crate::ComponentSpec::Ball { center: vec![-2.0, 0.0], radius: 0.5, weight: 1.0 },
            ],
        })
        .unwrap();
        let h = halfspace_mass_balance(&balls, &Vec3::x(), 1.0, 5.0, &coarse()).unwrap();
        assert_relative_eq!(h.forward, 0.25 * PI, max_relative = 1e-8);
        assert_relative_eq!(h.backward, 0.25 * PI, max_relative = 1e-8);
    }

    #[test]
    fn centered_first_moment_vanishes() {
        let f = Mixture::from_spec(&crate::DistributionSpec {
            dimension: 2,
            components: vec![
                crate::ComponentSpec::Box { center: vec![1.0, 0.5], half_widths: vec![0.5, 1.0], weight: 1.0 },
                crate::ComponentSpec::Gaussian { mean: vec![-1.0, 0.0], covariance: vec![vec![1.0, 0.2], vec![0.2, 0.5]], weight: 0.5 },
            ],
        })
        .unwrap();
        let vbar = f.first_moment() / f.mass();
        for k in 0..6 {
            let e = polar(k as f64);
            let m = Cubature::new(&f, &coarse()).integrate(|x, d| d * (x - vbar).dot(&e)).unwrap().value;
            assert!(m.abs() < 1e-7);
        }
    }

    #[test]
    fn mass_location_positive_for_maxwellian() {
        let f = Mixture::maxwellian(2).unwrap();
        let (m, _) = mass_location(&f, 0.5, 4.0, 18, &coarse()).unwrap();
        assert!(m > 0.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn monotone_in_delta_and_radius(d1 in 0.05f64..1.0, dd in 0.0f64..1.0, r1 in 0.5f64..4.0, dr in 0.0f64..3.0, a in 0.0f64..3.14) {
            let f = Mixture::gaussian(&[0.3, -0.2], vec![vec![1.0, 0.3], vec![0.3, 0.6]], 1.0).unwrap();
            let line = LineSpec::from_vecs(Vec3::new(0.1, 0.2, 0.0), polar(a)).unwrap();
            let b = QuadBudget { rel_tol: 1e-8, ..Default::default() };
            let base = tube_complement_mass(&f, &line, d1, r1, &b).unwrap();
            let wider = tube_complement_mass(&f, &line, d1 + dd, r1, &b).unwrap();
            let bigger = tube_complement_mass(&f, &line, d1, r1 + dr, &b).unwrap();
            prop_assert!(wider <= base + 1e-9);
            prop_assert!(bigger >= base - 1e-9);
        }
    }
}
