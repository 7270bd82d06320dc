//! Lebesgue and homogeneous Sobolev norms on the grid, the
//! Gagliardo-Nirenberg ratio, and running space-time integrals.
//!
//! All spatial quadrature is the torus rectangle rule h^2 * sum, which is
//! exact for trigonometric polynomials below Nyquist at p = 2.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField2};
use crate::spectral;

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "Lebesgue exponent must satisfy p >= 1, got {p}"
        )));
    }
    Ok(())
}

fn quadrature_norm(values: impl Iterator<Item = f64>, h_sq: f64, p: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, |m, v| m.max(v.abs()))
    } else if p == 1.0 {
        h_sq * values.map(|v| v.abs()).sum::<f64>()
    } else if p == 2.0 {
        (h_sq * values.map(|v| v * v).sum::<f64>()).sqrt()
    } else {
        (h_sq * values.map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
    }
}

/// L^p norm of a scalar field, p in [1, inf].
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    check_p(p)?;
    let h = f.grid().h();
    Ok(quadrature_norm(f.data().iter().copied(), h * h, p))
}

/// L^p norm of a multi-component field using the pointwise Euclidean
/// magnitude across components.
pub fn lp_norm_multi(comps: &[&ScalarField], p: f64) -> Result<f64> {
    check_p(p)?;
    let first = comps
        .first()
        .ok_or(Error::DegenerateInput("no components given"))?;
    let grid = first.grid();
    for c in comps {
        if c.grid() != grid {
            return Err(Error::GridMismatch("lp_norm_multi components"));
        }
    }
    let n2 = grid.count();
    let h = grid.h();
    let mags = (0..n2).map(|m| {
        comps
            .iter()
            .map(|c| c.data()[m] * c.data()[m])
            .sum::<f64>()
            .sqrt()
    });
    Ok(quadrature_norm(mags, h * h, p))
}

/// Homogeneous Sobolev norm |||nabla|^s f||_2 via Parseval, s > 0.
/// The k = 0 mode contributes nothing (|xi|^(2s) vanishes there).
pub fn sobolev_norm(f: &ScalarField, s: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Sobolev order must be positive and finite, got {s}"
        )));
    }
    let c = spectral::to_spectral(f);
    let grid = f.grid();
    let n = grid.n();
    let mut sum = 0.0;
    for i in 0..n {
        let xi1 = grid.xi(i);
        for j in 0..n {
            let xi2 = grid.xi(j);
            let w = (xi1 * xi1 + xi2 * xi2).powf(s);
            sum += w * c.data()[i * n + j].norm_sqr();
        }
    }
    let nf = n as f64;
    Ok((grid.length() * grid.length() / (nf * nf * nf * nf) * sum).sqrt())
}

/// One Gagliardo-Nirenberg evaluation ||u||_4 <= C ||u||_2^(1/2) ||grad u||_2^(1/2):
/// reports the ratio; bounding the constant is left to corpus-level sweeps.
#[derive(Debug, Clone, Copy)]
pub struct GnReport {
    pub l4: f64,
    pub l2: f64,
    pub grad_l2: f64,
    pub ratio: f64,
}

fn gn_from_parts(l4: f64, l2: f64, grad_l2: f64) -> Result<GnReport> {
    if l2 < 1e-14 || grad_l2 < 1e-14 {
        return Err(Error::DegenerateInput(
            "Gagliardo-Nirenberg denominator is numerically zero",
        ));
    }
    Ok(GnReport {
        l4,
        l2,
        grad_l2,
        ratio: l4 / (l2.sqrt() * grad_l2.sqrt()),
    })
}

pub fn gn_check(f: &ScalarField) -> Result<GnReport> {
    let grad = spectral::gradient(f);
    gn_from_parts(
        lp_norm(f, 4.0)?,
        lp_norm(f, 2.0)?,
        lp_norm_multi(&[grad.comp(0), grad.comp(1)], 2.0)?,
    )
}

pub fn gn_check_vector(u: &VectorField2) -> Result<GnReport> {
    let g0 = spectral::gradient(u.comp(0));
    let g1 = spectral::gradient(u.comp(1));
    gn_from_parts(
        lp_norm_multi(&[u.comp(0), u.comp(1)], 4.0)?,
        lp_norm_multi(&[u.comp(0), u.comp(1)], 2.0)?,
        lp_norm_multi(
            &[g0.comp(0), g0.comp(1), g1.comp(0), g1.comp(1)],
            2.0,
        )?,
    )
}

/// Left-endpoint running integral of a nonnegative scalar over time.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpaceTimeAccumulator {
    total: f64,
    steps: usize,
}

impl SpaceTimeAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Resume an integral from a previously recorded total.
    pub fn with_total(total: f64) -> Result<Self> {
        if !(total >= 0.0 && total.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "accumulator total must be finite and nonnegative, got {total}"
            )));
        }
        Ok(SpaceTimeAccumulator { total, steps: 0 })
    }

    pub fn add(&mut self, dt: f64, value: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "accumulator step requires dt > 0, got {dt}"
            )));
        }
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "accumulator value must be finite and nonnegative, got {value}"
            )));
        }
        self.total += dt * value;
        self.steps += 1;
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid2D;
    use std::f64::consts::PI;

    fn grid() -> Grid2D {
        Grid2D::new(64, 20.0 * PI).unwrap()
    }

    #[test]
    fn constant_l2_is_side_length() {
        let g = grid();
        let f = ScalarField::from_fn(g, |_, _| 1.0);
        let v = lp_norm(&f, 2.0).unwrap();
        assert!((v - g.length()).abs() < 1e-12 * g.length());
    }

    #[test]
    fn sine_l2_closed_form() {
        let g = grid();
        let f = ScalarField::from_fn(g, |x, _| (2.0 * PI * x / g.length()).sin());
        let v = lp_norm(&f, 2.0).unwrap();
        let exact = g.length() / 2.0f64.sqrt();
        assert!((v - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn linf_is_sample_max() {
        let g = Grid2D::new(8, 1.0).unwrap();
        let mut f = ScalarField::zeros(g);
        f.set(3, 5, -7.5);
        f.set(1, 1, 2.0);
        assert_eq!(lp_norm(&f, f64::INFINITY).unwrap(), 7.5);
    }

    #[test]
    fn rejects_exponents_below_one() {
        let g = Grid2D::new(8, 1.0).unwrap();
        let f = ScalarField::zeros(g);
        assert!(lp_norm(&f, 0.5).is_err());
        assert!(lp_norm(&f, f64::NAN).is_err());
    }

    #[test]
    fn multi_component_uses_euclidean_magnitude() {
        let g = grid();
        let a = ScalarField::from_fn(g, |_, _| 3.0);
        let b = ScalarField::from_fn(g, |_, _| 4.0);
        let sup = lp_norm_multi(&[&a, &b], f64::INFINITY).unwrap();
        assert!((sup - 5.0).abs() < 1e-14);
        let l2 = lp_norm_multi(&[&a, &b], 2.0).unwrap();
        assert!((l2 - 5.0 * g.length()).abs() < 1e-11 * g.length());
    }

    #[test]
    fn hoelder_l2_between_l1_linf() {
        let g = grid();
        let f = ScalarField::from_fn(g, |x, y| (0.3 * x).sin() + 0.7 * (0.9 * y).cos() + 0.1);
        let l1 = lp_norm(&f, 1.0).unwrap();
        let l2 = lp_norm(&f, 2.0).unwrap();
        let li = lp_norm(&f, f64::INFINITY).unwrap();
        assert!(l2 * l2 <= l1 * li * (1.0 + 1e-14));
    }

    #[test]
    fn sobolev_one_matches_gradient_norm() {
        let g = grid();
        let f = ScalarField::from_fn(g, |x, y| {
            (2.0 * PI * 3.0 * x / g.length()).sin() + 0.4 * (2.0 * PI * 5.0 * y / g.length()).cos()
        });
        let grad = spectral::gradient(&f);
        let via_grad = lp_norm_multi(&[grad.comp(0), grad.comp(1)], 2.0).unwrap();
        let via_spec = sobolev_norm(&f, 1.0).unwrap();
        assert!((via_grad - via_spec).abs() < 1e-12 * via_spec.max(1.0));
    }

    #[test]
    fn sobolev_two_matches_laplacian_norm() {
        let g = grid();
        let f = ScalarField::from_fn(g, |x, y| {
            (2.0 * PI * (2.0 * x + y) / g.length()).sin()
        });
        let lap = spectral::laplacian(&f);
        let via_lap = lp_norm(&lap, 2.0).unwrap();
        let via_spec = sobolev_norm(&f, 2.0).unwrap();
        assert!((via_lap - via_spec).abs() < 1e-12 * via_spec.max(1.0));
        assert!(sobolev_norm(&f, 0.0).is_err());
        assert!(sobolev_norm(&f, -1.0).is_err());
    }

    #[test]
    fn gn_rejects_zero_field() {
        let g = Grid2D::new(8, 1.0).unwrap();
        let f = ScalarField::zeros(g);
        assert!(matches!(gn_check(&f), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn gn_plane_wave_ratio_is_order_one() {
        let g = grid();
        let f = ScalarField::from_fn(g, |x, _| (2.0 * PI * 4.0 * x / g.length()).sin());
        let rep = gn_check(&f).unwrap();
        assert!(rep.ratio > 0.1 && rep.ratio < 10.0, "ratio {}", rep.ratio);
    }

    #[test]
    fn accumulator_arithmetic_and_split_invariance() {
        let mut a = SpaceTimeAccumulator::new();
        a.add(0.1, 2.0).unwrap();
        assert!((a.total() - 0.2).abs() < 1e-16);

        let (dt, v) = (0.3, 1.7);
        let mut whole = SpaceTimeAccumulator::new();
        whole.add(dt, v).unwrap();
        let mut halves = SpaceTimeAccumulator::new();
        halves.add(dt / 2.0, v).unwrap();
        halves.add(dt / 2.0, v).unwrap();
        assert_eq!(whole.total(), halves.total());
    }

    #[test]
    fn accumulator_rejects_bad_steps() {
        let mut a = SpaceTimeAccumulator::new();
        assert!(a.add(0.0, 1.0).is_err());
        assert!(a.add(-0.1, 1.0).is_err());
        assert!(a.add(0.1, -1.0).is_err());
        assert!(a.add(0.1, f64::NAN).is_err());
        assert!(a.add(f64::INFINITY, 1.0).is_err());
        assert_eq!(a.total(), 0.0);
    }

    #[test]
    fn constant_value_integrates_exactly() {
        let mut a = SpaceTimeAccumulator::new();
        for _ in 0..64 {
            a.add(0.25, 3.0).unwrap();
        }
        assert!((a.total() - 48.0).abs() < 1e-12);
    }
}
