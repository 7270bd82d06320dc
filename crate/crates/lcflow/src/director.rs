// Geometry of sphere-valued director fields: tension field, pointwise
// sphere identities, coercivity ratio and the angle infimum.
//
// Everything here is diagnostics-grade: derivatives are spectral and the
// pointwise products are formed on the full grid without dealiasing, so a
// quantity like |∇d|² is exactly the square of the sampled derivative at
// every node.

use crate::error::{Error, Result};
use crate::field::{DirectorField, ScalarField};
use crate::spectral::{
    derivative_spec, radial_multiplier_inplace, to_physical, to_physical_pair, to_spectral,
    to_spectral_pair,
};

/// Tangency tolerance for the tension field on production grids.
pub const TOL_TANGENT: f64 = 1e-6;

/// Below this Laplacian norm a field counts as flat and the coercivity
/// ratio is undefined.
const LAP_FLOOR: f64 = 1e-12;

/// All first and second spectral derivatives of a director field.
///
/// `grad[c][a]` holds the samples of the a-th partial of component c and
/// `lap[c]` the samples of its Laplacian. Computing the whole set at once
/// shares the forward transforms between the six partials and the three
/// Laplacians.
pub(crate) struct DirectorDerivatives {
    pub(crate) grad: [[ScalarField; 2]; 3],
    pub(crate) lap: [ScalarField; 3],
}

impl DirectorDerivatives {
    /// The six first partials, flattened for norm evaluation.
    pub(crate) fn partials(&self) -> [&ScalarField; 6] {
        [
            &self.grad[0][0],
            &self.grad[0][1],
            &self.grad[1][0],
            &self.grad[1][1],
            &self.grad[2][0],
            &self.grad[2][1],
        ]
    }

    pub(crate) fn laplacians(&self) -> [&ScalarField; 3] {
        [&self.lap[0], &self.lap[1], &self.lap[2]]
    }

    /// Samples of |∇d|² = Σ_{c,a} (∂_a d_c)².
    pub(crate) fn grad_sq_field(&self) -> ScalarField {
        let grid = self.lap[0].grid();
        let mut out = ScalarField::zeros(grid);
        let dst = out.data_mut();
        for c in 0..3 {
            for a in 0..2 {
                for (o, v) in dst.iter_mut().zip(self.grad[c][a].data()) {
                    *o += v * v;
                }
            }
        }
        out
    }
}

/// Compute every first and second derivative of `d` with five forward /
/// inverse transform pairs (components one and two share packed FFTs).
pub(crate) fn derivatives(d: &DirectorField) -> DirectorDerivatives {
    let (mut c1, mut c2) = to_spectral_pair(d.comp(0), d.comp(1));
    let mut c3 = to_spectral(d.comp(2));

    let mut grads: Vec<[ScalarField; 2]> = Vec::with_capacity(3);
    for c in [&c1, &c2, &c3] {
        let gx = derivative_spec(c, 0);
        let gy = derivative_spec(c, 1);
        let (fx, fy) = to_physical_pair(&gx, &gy);
        grads.push([fx, fy]);
    }

    for c in [&mut c1, &mut c2, &mut c3] {
        radial_multiplier_inplace(c, |xi_sq| -xi_sq);
    }
    let (l1, l2) = to_physical_pair(&c1, &c2);
    let l3 = to_physical(&c3);

    let mut it = grads.into_iter();
    DirectorDerivatives {
        grad: [
            it.next().expect("three gradients"),
            it.next().expect("three gradients"),
            it.next().expect("three gradients"),
        ],
        lap: [l1, l2, l3],
    }
}

/// Samples of the local gradient energy density |∇d|².
pub fn grad_sq(d: &DirectorField) -> ScalarField {
    derivatives(d).grad_sq_field()
}

/// L^p norm of ∇d treated as a single six-component field.
pub fn grad_lp_norm(d: &DirectorField, p: f64) -> Result<f64> {
    crate::norms::lp_norm_multi(&derivatives(d).partials(), p)
}

/// The tension field g = Δd + |∇d|² d of a sphere-valued map.
///
/// For an exactly unit-length field g is tangent to the sphere at d, and a
/// map is harmonic precisely when g vanishes.
#[derive(Debug, Clone)]
pub struct TensionField {
    pub g1: ScalarField,
    pub g2: ScalarField,
    pub g3: ScalarField,
}

impl TensionField {
    pub fn comp(&self, c: usize) -> &ScalarField {
        match c {
            0 => &self.g1,
            1 => &self.g2,
            _ => &self.g3,
        }
    }

    /// L² norm of the full three-component tension field.
    pub fn l2_norm(&self) -> f64 {
        crate::norms::lp_norm_multi(&[&self.g1, &self.g2, &self.g3], 2.0)
            .expect("fixed valid exponent")
    }

    /// Largest pointwise |g·d|; zero in exact arithmetic when |d| ≡ 1.
    pub fn max_tangent_defect(&self, d: &DirectorField) -> f64 {
        let mut worst = 0.0f64;
        let n2 = d.grid().count();
        for idx in 0..n2 {
            let dot = self.g1.data()[idx] * d.comp(0).data()[idx]
                + self.g2.data()[idx] * d.comp(1).data()[idx]
                + self.g3.data()[idx] * d.comp(2).data()[idx];
            worst = worst.max(dot.abs());
        }
        worst
    }
}

pub(crate) fn tension_from(derivs: &DirectorDerivatives, d: &DirectorField) -> TensionField {
    let q = derivs.grad_sq_field();
    let mut comps: Vec<ScalarField> = Vec::with_capacity(3);
    for c in 0..3 {
        let mut g = derivs.lap[c].clone();
        for (o, (qv, dv)) in g
            .data_mut()
            .iter_mut()
            .zip(q.data().iter().zip(d.comp(c).data()))
        {
            *o += qv * dv;
        }
        comps.push(g);
    }
    let g3 = comps.pop().expect("three components");
    let g2 = comps.pop().expect("three components");
    let g1 = comps.pop().expect("three components");
    TensionField { g1, g2, g3 }
}

/// Tension field g = Δd + |∇d|² d.
pub fn tension(d: &DirectorField) -> TensionField {
    tension_from(&derivatives(d), d)
}

/// L² size of the pointwise defect Δd·d + |∇d|², which vanishes on the
/// continuum for any unit-length field.
pub fn sphere_identity_residual(d: &DirectorField) -> f64 {
    let derivs = derivatives(d);
    let q = derivs.grad_sq_field();
    let grid = d.grid();
    let mut r = ScalarField::zeros(grid);
    let dst = r.data_mut();
    for c in 0..3 {
        for (o, (lv, dv)) in dst
            .iter_mut()
            .zip(derivs.lap[c].data().iter().zip(d.comp(c).data()))
        {
            *o += lv * dv;
        }
    }
    for (o, qv) in dst.iter_mut().zip(q.data()) {
        *o += qv;
    }
    crate::norms::lp_norm(&r, 2.0).expect("fixed valid exponent")
}

/// Dissipation rate contributed by the director: ‖Δd + |∇d|²d‖₂².
pub fn harmonic_energy(d: &DirectorField) -> f64 {
    let t = tension(d);
    let n = t.l2_norm();
    n * n
}

/// The ratio ‖∇d‖₄⁴ / ‖Δd‖₂², the quantity whose distance from one
/// measures how coercive the harmonic energy is at d.
pub fn coercivity_ratio(d: &DirectorField) -> Result<f64> {
    let derivs = derivatives(d);
    coercivity_ratio_from(&derivs)
}

pub(crate) fn coercivity_ratio_from(derivs: &DirectorDerivatives) -> Result<f64> {
    let lap2 = crate::norms::lp_norm_multi(&derivs.laplacians(), 2.0)?;
    if lap2 <= LAP_FLOOR {
        return Err(Error::DegenerateInput(
            "coercivity ratio is undefined for flat fields (Laplacian below 1e-12)",
        ));
    }
    let grad4 = crate::norms::lp_norm_multi(&derivs.partials(), 4.0)?;
    Ok(grad4.powi(4) / (lap2 * lap2))
}

/// Smallest sampled third component; positive values mean the field stays
/// inside the open upper hemisphere.
pub fn angle_infimum(d: &DirectorField) -> f64 {
    d.min_d3()
}

/// Outcome of one coercivity inequality evaluation.
#[derive(Debug, Clone, Copy)]
pub struct CoercivityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluate ‖Δd + |∇d|²d‖₂² ≥ (δ₀/2)(‖Δd‖₂² + ‖∇d‖₄⁴) for a given δ₀.
pub fn coercivity_check(d: &DirectorField, delta0: f64) -> Result<CoercivityReport> {
    if !(delta0 > 0.0 && delta0 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta0 must lie in (0,1), got {delta0}"
        )));
    }
    let derivs = derivatives(d);
    let lhs = {
        let t = tension_from(&derivs, d);
        let n = t.l2_norm();
        n * n
    };
    let lap2 = crate::norms::lp_norm_multi(&derivs.laplacians(), 2.0)?;
    let grad4 = crate::norms::lp_norm_multi(&derivs.partials(), 4.0)?;
    let rhs = 0.5 * delta0 * (lap2 * lap2 + grad4.powi(4));
    Ok(CoercivityReport {
        lhs,
        rhs,
        holds: lhs >= rhs,
    })
}
