//! Time integration of the coupled velocity/director system and of the
//! zero-velocity gradient flow it reduces to.
//!
//! One integrating-factor step of size dt:
//!   u* = exp(dt Lap) [u + dt P(-(u.grad)u - div(grad d (x) grad d))]
//!   d* = exp(dt Lap) [d + dt (-(u.grad)d + |grad d|^2 d)]
//!   u_new = P(u*),   d_new = d* / |d*|
//! with P the Leray projection. Every quadratic or cubic product is formed
//! pointwise from band-limited factors and re-truncated to the retained band,
//! so products are alias-free whenever the state itself stays band-limited.
//!
//! The same core drives both systems; the gradient flow simply skips the
//! velocity work, so a coupled run from zero velocity reproduces the gradient
//! flow step for step.

use crate::diagnostics::{self, DiagnosticsRecord, IntegralSet};
use crate::director;
use crate::error::{Error, Result};
use crate::field::{DirectorField, Grid2D, ScalarField, VectorField2, NORM_FLOOR, TOL_EVOLVE};
use crate::norms;
use crate::spectral::{
    self, div_accum_negate, gradient_pair_to_physical, lap_terms, leray_project_spec,
    to_physical_pair_into, to_spectral_into, to_spectral_pair_into, truncate_modes_inplace,
    two_thirds_kmax, weighted_l2_sq, SpectralCoeffs,
};

/// Spectral divergence of the velocity must stay below this factor times
/// max(||u||_2, 1).
pub const DIV_TOL_FACTOR: f64 = 1e-10;

/// Which evolution to advance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    /// Coupled velocity/director flow.
    LiquidCrystal,
    /// Director-only gradient flow (zero velocity throughout).
    HeatFlow,
}

/// Time-step selection mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    Fixed,
    Cfl,
}

/// Step-size policy.
///
/// In `Cfl` mode the step is
///   cfl_number * min(h / (max|u| + eps), 1 / (max|grad d|^2 + eps),
///                    h^2 * nl_safety)
/// with eps = 1e-12, clamped to `dt_max` when set. A result below `dt_min`
/// is reported as `StepCollapse`; `dt_min = 0` disables the floor.
#[derive(Debug, Clone)]
pub struct StepPolicy {
    pub mode: StepMode,
    pub dt_fixed: f64,
    pub cfl_number: f64,
    pub dt_min: f64,
    pub dt_max: Option<f64>,
    pub nl_safety: f64,
}

impl StepPolicy {
    pub fn fixed(dt: f64) -> Self {
        StepPolicy {
            mode: StepMode::Fixed,
            dt_fixed: dt,
            cfl_number: 0.4,
            dt_min: 0.0,
            dt_max: None,
            nl_safety: 1.0,
        }
    }

    pub fn cfl() -> Self {
        StepPolicy {
            mode: StepMode::Cfl,
            dt_fixed: 0.0,
            cfl_number: 0.4,
            dt_min: 0.0,
            dt_max: None,
            nl_safety: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == StepMode::Fixed && !(self.dt_fixed > 0.0 && self.dt_fixed.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "fixed step size must be positive, got {}",
                self.dt_fixed
            )));
        }
        if !(self.cfl_number > 0.0 && self.cfl_number <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cfl number must lie in (0, 1], got {}",
                self.cfl_number
            )));
        }
        if !(self.dt_min >= 0.0 && self.dt_min.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dt_min must be nonnegative, got {}",
                self.dt_min
            )));
        }
        if let Some(m) = self.dt_max {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "dt_max must be positive, got {m}"
                )));
            }
            if m < self.dt_min {
                return Err(Error::InvalidParameter(
                    "dt_max must not be below dt_min".into(),
                ));
            }
        }
        if !(self.nl_safety > 0.0 && self.nl_safety.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "nl_safety must be positive, got {}",
                self.nl_safety
            )));
        }
        if self.mode == StepMode::Fixed && self.dt_fixed > 0.0 && self.dt_fixed < self.dt_min {
            return Err(Error::InvalidParameter(
                "fixed step size lies below dt_min".into(),
            ));
        }
        Ok(())
    }

    /// Step size from the current state bounds; `q_max` is max |grad d|^2.
    pub(crate) fn dt_from(&self, h: f64, u_sup: f64, q_max: f64, t: f64) -> Result<f64> {
        const EPS: f64 = 1e-12;
        let dt = match self.mode {
            StepMode::Fixed => self.dt_fixed,
            StepMode::Cfl => {
                let advect = h / (u_sup + EPS);
                let react = 1.0 / (q_max + EPS);
                let diffuse = h * h * self.nl_safety;
                self.cfl_number * advect.min(react).min(diffuse)
            }
        };
        let dt = match self.dt_max {
            Some(m) => dt.min(m),
            None => dt,
        };
        if dt < self.dt_min {
            return Err(Error::StepCollapse {
                t,
                required: dt,
                floor: self.dt_min,
            });
        }
        Ok(dt)
    }
}

/// Instantaneous simulation state: time, velocity samples, director samples.
#[derive(Debug, Clone)]
pub struct SimState {
    t: f64,
    u: VectorField2,
    d: DirectorField,
}

impl SimState {
    /// Validated construction: fields must share a grid, be finite, the
    /// director must be unit to the evolution tolerance, and the velocity
    /// divergence-free to `DIV_TOL_FACTOR`.
    pub fn new(t: f64, u: VectorField2, d: DirectorField) -> Result<Self> {
        if u.grid() != d.grid() {
            return Err(Error::GridMismatch("velocity and director"));
        }
        if !t.is_finite() {
            return Err(Error::InvalidParameter(format!("time must be finite, got {t}")));
        }
        if let Some((i, j)) = u.first_non_finite() {
            return Err(Error::NonFinite { what: "velocity", i, j });
        }
        if let Some((i, j)) = d.first_non_finite() {
            return Err(Error::NonFinite { what: "director", i, j });
        }
        let unit_err = d.unit_error();
        if unit_err > TOL_EVOLVE {
            return Err(Error::InvariantViolation(format!(
                "director unit-norm error {unit_err:.3e} exceeds {TOL_EVOLVE:.1e}"
            )));
        }
        let div = spectral::divergence(&u);
        let div_norm = norms::lp_norm(&div, 2.0)?;
        let u_norm = norms::lp_norm_multi(&[u.comp(0), u.comp(1)], 2.0)?;
        if div_norm > DIV_TOL_FACTOR * u_norm.max(1.0) {
            return Err(Error::InvariantViolation(format!(
                "velocity divergence {div_norm:.3e} exceeds {DIV_TOL_FACTOR:.1e} * max(||u||, 1)"
            )));
        }
        Ok(SimState { t, u, d })
    }

    /// Construction without the validation passes, for states produced by the
    /// stepper itself (which maintains the invariants by construction).
    pub(crate) fn trusted(t: f64, u: VectorField2, d: DirectorField) -> Self {
        SimState { t, u, d }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn u(&self) -> &VectorField2 {
        &self.u
    }

    pub fn d(&self) -> &DirectorField {
        &self.d
    }

    pub fn grid(&self) -> Grid2D {
        self.d.grid()
    }

    pub fn into_parts(self) -> (f64, VectorField2, DirectorField) {
        (self.t, self.u, self.d)
    }

    /// Total energy (kinetic plus elastic):
    /// E = 1/2 (||u||_2^2 + ||grad d||_2^2).
    pub fn energy(&self) -> f64 {
        let un = norms::lp_norm_multi(&[self.u.comp(0), self.u.comp(1)], 2.0)
            .expect("p = 2 is valid");
        let gd = director::grad_lp_norm(&self.d, 2.0).expect("p = 2 is valid");
        0.5 * (un * un + gd * gd)
    }
}

/// Per-step integrand values, all evaluated at the state the step departed
/// from (left-endpoint quadrature for the running time integrals).
#[derive(Debug, Clone, Copy, Default)]
pub struct Integrands {
    /// ||u||_{L^4}^4
    pub u_l4_4: f64,
    /// ||grad d||_{L^2}^2
    pub grad_d_sq: f64,
    /// ||grad d||_{L^4}^4
    pub grad_d_l4_4: f64,
    /// ||Lap d||_{L^2}^2
    pub lap_d_sq: f64,
    /// ||grad u||_{L^2}^2
    pub grad_u_sq: f64,
    /// ||Lap d + |grad d|^2 d||_{L^2}^2
    pub tension_sq: f64,
}

impl Integrands {
    /// Instantaneous energy dissipation rate D = ||grad u||^2 + ||tension||^2.
    pub fn dissipation(&self) -> f64 {
        self.grad_u_sq + self.tension_sq
    }
}

/// Report for one completed step.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    /// Step size actually taken.
    pub dt: f64,
    /// Largest deviation of |d*| from 1 before renormalization.
    pub drift: f64,
    /// sup |grad d| at the departing state (from the band-limited gradient).
    pub grad_sup: f64,
    /// sup |u| at the departing state.
    pub u_sup: f64,
    pub integrands: Integrands,
}

enum DtSpec<'a> {
    Given(f64),
    Policy { policy: &'a StepPolicy, cap: Option<f64> },
}

/// Scratch buffers for the fused step, allocated once per grid.
pub(crate) struct Stepper {
    grid: Grid2D,
    kmax: i64,
    // full-band state spectra
    su: [SpectralCoeffs; 2],
    sd: [SpectralCoeffs; 3],
    // band-limited copies feeding the products
    tu: [SpectralCoeffs; 2],
    td: [SpectralCoeffs; 3],
    // scratch spectrum for the q round trip
    da: SpectralCoeffs,
    // gradient samples gd[c][a] = d_a d_c, and the vorticity samples
    gd: [[ScalarField; 2]; 3],
    w: ScalarField,
    // |grad d|^2 raw and band-limited
    q: ScalarField,
    qt: ScalarField,
    // pointwise product staging
    p1: ScalarField,
    p2: ScalarField,
    p3: ScalarField,
    // product spectra
    nu: [SpectralCoeffs; 2],
    qd: [SpectralCoeffs; 3],
    cv: [SpectralCoeffs; 3],
    st: [SpectralCoeffs; 3], // T11, T12, T22
    // per-step semigroup factors exp(-xi(m)^2 dt)
    decay: Vec<f64>,
    // recycled sample storage for the output fields; refilled by `recycle`
    // so steady stepping does not allocate
    spare: Vec<Vec<f64>>,
}

impl Stepper {
    pub(crate) fn new(grid: Grid2D) -> Self {
        let sc = || SpectralCoeffs::zeros(grid);
        let sf = || ScalarField::zeros(grid);
        Stepper {
            grid,
            kmax: two_thirds_kmax(grid.n()),
            su: [sc(), sc()],
            sd: [sc(), sc(), sc()],
            tu: [sc(), sc()],
            td: [sc(), sc(), sc()],
            da: sc(),
            gd: [[sf(), sf()], [sf(), sf()], [sf(), sf()]],
            w: sf(),
            q: sf(),
            qt: sf(),
            p1: sf(),
            p2: sf(),
            p3: sf(),
            nu: [sc(), sc()],
            qd: [sc(), sc(), sc()],
            cv: [sc(), sc(), sc()],
            st: [sc(), sc(), sc()],
            decay: vec![0.0; grid.n()],
            spare: Vec::new(),
        }
    }

    /// Reclaim the sample storage of a retired state for future outputs.
    pub(crate) fn recycle(&mut self, state: SimState) {
        if state.grid() != self.grid {
            return;
        }
        let (_, u, d) = state.into_parts();
        for f in u.into_comps() {
            self.spare.push(f.into_data());
        }
        for f in d.into_comps() {
            self.spare.push(f.into_data());
        }
    }

    fn fresh_field(spare: &mut Vec<Vec<f64>>, grid: Grid2D) -> ScalarField {
        match spare.pop() {
            Some(v) => ScalarField::from_data(grid, v).expect("recycled buffers match the grid"),
            None => ScalarField::zeros(grid),
        }
    }

    /// Advance one step. Returns the new state and the step report.
    fn step(
        &mut self,
        state: &SimState,
        system: System,
        dt_spec: DtSpec<'_>,
    ) -> Result<(SimState, StepInfo)> {
        let grid = self.grid;
        if state.grid() != grid {
            return Err(Error::GridMismatch("state and stepper"));
        }
        let n = grid.n();
        let h = grid.h();
        let lc = system == System::LiquidCrystal;
        let Stepper {
            kmax,
            su,
            sd,
            tu,
            td,
            da,
            gd,
            w,
            q,
            qt,
            p1,
            p2,
            p3,
            nu,
            qd,
            cv,
            st,
            decay,
            spare,
            ..
        } = self;
        let kmax = *kmax;
        let u = &state.u;
        let d = &state.d;

        // State spectra, then band-limited copies for the products.
        {
            let [sd0, sd1, _] = &mut *sd;
            to_spectral_pair_into(d.comp(0), d.comp(1), sd0, sd1);
        }
        to_spectral_into(d.comp(2), &mut sd[2]);
        for c in 0..3 {
            td[c].data_mut().copy_from_slice(sd[c].data());
            truncate_modes_inplace(&mut td[c], kmax);
        }
        if lc {
            {
                let [su0, su1] = &mut *su;
                to_spectral_pair_into(u.comp(0), u.comp(1), su0, su1);
            }
            for i in 0..2 {
                tu[i].data_mut().copy_from_slice(su[i].data());
                truncate_modes_inplace(&mut tu[i], kmax);
            }
        }

        // Gradient samples from the band-limited spectra.
        for c in 0..3 {
            let [g0, g1] = &mut gd[c];
            gradient_pair_to_physical(&td[c], g0, g1);
        }

        // q = |grad d|^2, band-limited before it enters the cubic term.
        dot3_into(q, (&gd[0][0], &gd[0][0]), (&gd[0][1], &gd[0][1]), (&gd[1][0], &gd[1][0]));
        dot3_accum(q, (&gd[1][1], &gd[1][1]), (&gd[2][0], &gd[2][0]), (&gd[2][1], &gd[2][1]));

        let (q_max, int_q, int_q2) = q_stats(q, h * h);
        let u_sup = if lc { u.max_magnitude() } else { 0.0 };

        // Everything above is dt-independent, so an adaptive policy can use
        // the freshly measured bounds without extra transforms.
        let dt = match dt_spec {
            DtSpec::Given(v) => v,
            DtSpec::Policy { policy, cap } => {
                let dt = policy.dt_from(h, u_sup, q_max, state.t)?;
                match cap {
                    Some(c) => dt.min(c),
                    None => dt,
                }
            }
        };
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive and finite, got {dt}"
            )));
        }

        if lc {
            // Stress tensor T_ab = sum_c (d_a d_c)(d_b d_c), band-limited.
            // Its forward transform shares one FFT with q, and the vorticity
            // inverse shares one with the band-limited q.
            dot3_into(p1, (&gd[0][0], &gd[0][0]), (&gd[1][0], &gd[1][0]), (&gd[2][0], &gd[2][0]));
            dot3_into(p2, (&gd[0][1], &gd[0][1]), (&gd[1][1], &gd[1][1]), (&gd[2][1], &gd[2][1]));
            dot3_into(p3, (&gd[0][0], &gd[0][1]), (&gd[1][0], &gd[1][1]), (&gd[2][0], &gd[2][1]));
            {
                let [t11, t12, t22] = &mut *st;
                to_spectral_pair_into(p1, p2, t11, t22);
                to_spectral_pair_into(q, p3, da, t12);
            }
            for c in st.iter_mut() {
                truncate_modes_inplace(c, kmax);
            }
            truncate_modes_inplace(da, kmax);
            spectral::curl_spec_into(&tu[0], &tu[1], &mut nu[1]);
            to_physical_pair_into(da, &nu[1], qt, w);
        } else {
            to_spectral_into(q, da);
            truncate_modes_inplace(da, kmax);
            spectral::to_physical_into(da, qt);
        }

        // q d products (the only nonlinearity of the gradient flow).
        mul_into(p1, qt, d.comp(0));
        mul_into(p2, qt, d.comp(1));
        if lc {
            {
                let [qd0, qd1, _] = &mut *qd;
                to_spectral_pair_into(p1, p2, qd0, qd1);
            }
            // Director convection cv_c = (u.grad) d_c rides along with the
            // remaining q d component.
            mul_into(p1, qt, d.comp(2));
            dot2_into(p2, (u.comp(0), &gd[0][0]), (u.comp(1), &gd[0][1]));
            to_spectral_pair_into(p1, p2, &mut qd[2], &mut cv[0]);
            dot2_into(p1, (u.comp(0), &gd[1][0]), (u.comp(1), &gd[1][1]));
            dot2_into(p2, (u.comp(0), &gd[2][0]), (u.comp(1), &gd[2][1]));
            {
                let [_, cv1, cv2] = &mut *cv;
                to_spectral_pair_into(p1, p2, cv1, cv2);
            }
            for c in cv.iter_mut() {
                truncate_modes_inplace(c, kmax);
            }

            // Rotational form of the velocity convection:
            // (u.grad)u = omega (-u_2, u_1) + grad(|u|^2/2), and the
            // projection annihilates the gradient part exactly.
            {
                let wd = w.data();
                let u1d = u.comp(0).data();
                let u2d = u.comp(1).data();
                for ((o, &wv), &uv) in p1.data_mut().iter_mut().zip(wd).zip(u2d) {
                    *o = -(wv * uv);
                }
                for ((o, &wv), &uv) in p2.data_mut().iter_mut().zip(wd).zip(u1d) {
                    *o = wv * uv;
                }
            }
            {
                let [nu0, nu1] = &mut *nu;
                to_spectral_pair_into(p1, p2, nu0, nu1);
            }
        } else {
            {
                let [qd0, qd1, _] = &mut *qd;
                to_spectral_pair_into(p1, p2, qd0, qd1);
            }
            mul_into(p3, qt, d.comp(2));
            to_spectral_into(p3, &mut qd[2]);
        }
        for c in qd.iter_mut() {
            truncate_modes_inplace(c, kmax);
        }

        // Accounting at the departing state (shared by both systems).
        let (mut lap_sum, mut ten_sum) = (0.0, 0.0);
        for c in 0..3 {
            let (l, t) = lap_terms(&sd[c], &qd[c]);
            lap_sum += l;
            ten_sum += t;
        }
        let mut ig = Integrands {
            u_l4_4: if lc { quartic_energy(u, h * h) } else { 0.0 },
            grad_d_sq: int_q,
            grad_d_l4_4: int_q2,
            lap_d_sq: lap_sum,
            grad_u_sq: 0.0,
            tension_sq: ten_sum,
        };

        if lc {
            ig.grad_u_sq = su.iter().map(|c| weighted_l2_sq(c, |xisq| xisq)).sum();

            // N_u,i = -(u.grad)u_i - (d_1 T_i1 + d_2 T_i2), Leray-projected.
            for i in 0..2 {
                truncate_modes_inplace(&mut nu[i], kmax);
                // T index map over (T11, T12, T22): row i uses entries i, i+1.
                div_accum_negate(&st[i], &st[i + 1], &mut nu[i]);
            }
            {
                let [nu0, nu1] = &mut *nu;
                leray_project_spec(nu0, nu1);
            }
        }

        // Semigroup factors for this dt, separable across the two axes.
        for (m, slot) in decay.iter_mut().enumerate() {
            let xi = grid.xi(m);
            *slot = (-xi * xi * dt).exp();
        }

        // Per-mode update. The decay factor is symmetric in the two indices,
        // so the loop is insensitive to the spectral layout.
        for c in 0..3 {
            let nl = qd[c].data();
            let cvd = cv[c].data();
            let s = sd[c].data_mut();
            for row in 0..n {
                let fr = decay[row];
                let sr = &mut s[row * n..][..n];
                let nr = &nl[row * n..][..n];
                if lc {
                    let cr = &cvd[row * n..][..n];
                    for (((sv, &nv), &cc), &fc) in
                        sr.iter_mut().zip(nr).zip(cr).zip(decay.iter())
                    {
                        *sv = fr * fc * (*sv + dt * (nv - cc));
                    }
                } else {
                    for ((sv, &nv), &fc) in sr.iter_mut().zip(nr).zip(decay.iter()) {
                        *sv = fr * fc * (*sv + dt * nv);
                    }
                }
            }
        }
        if lc {
            for i in 0..2 {
                let nl = nu[i].data();
                let s = su[i].data_mut();
                for row in 0..n {
                    let fr = decay[row];
                    let sr = &mut s[row * n..][..n];
                    let nr = &nl[row * n..][..n];
                    for ((sv, &nv), &fc) in sr.iter_mut().zip(nr).zip(decay.iter()) {
                        *sv = fr * fc * (*sv + dt * nv);
                    }
                }
            }
            let [su0, su1] = su;
            leray_project_spec(su0, su1);
        }

        // Back to samples, into recycled storage when available.
        let mut d1 = Self::fresh_field(spare, grid);
        let mut d2 = Self::fresh_field(spare, grid);
        let mut d3 = Self::fresh_field(spare, grid);
        to_physical_pair_into(&sd[0], &sd[1], &mut d1, &mut d2);
        spectral::to_physical_into(&sd[2], &mut d3);
        let mut u1 = Self::fresh_field(spare, grid);
        let mut u2 = Self::fresh_field(spare, grid);
        if lc {
            to_physical_pair_into(&su[0], &su[1], &mut u1, &mut u2);
        } else {
            u1.data_mut().copy_from_slice(u.comp(0).data());
            u2.data_mut().copy_from_slice(u.comp(1).data());
        }
        let new_u = VectorField2::new(u1, u2)?;

        if let Some((i, j)) = new_u.first_non_finite() {
            return Err(Error::NonFinite { what: "velocity", i, j });
        }
        let mut new_d = DirectorField::new(d1, d2, d3)?;
        if let Some((i, j)) = new_d.first_non_finite() {
            return Err(Error::NonFinite { what: "director", i, j });
        }
        let drift = new_d.unit_error();
        new_d.normalize(NORM_FLOOR)?;

        let info = StepInfo {
            dt,
            drift,
            grad_sup: q_max.sqrt(),
            u_sup,
            integrands: ig,
        };
        Ok((SimState::trusted(state.t + dt, new_u, new_d), info))
    }
}

type Pair<'a> = (&'a ScalarField, &'a ScalarField);

/// dst = a.0*a.1 + b.0*b.1, one pass.
fn dot2_into(dst: &mut ScalarField, a: Pair<'_>, b: Pair<'_>) {
    for ((((o, x0), y0), x1), y1) in dst
        .data_mut()
        .iter_mut()
        .zip(a.0.data())
        .zip(a.1.data())
        .zip(b.0.data())
        .zip(b.1.data())
    {
        *o = x0 * y0 + x1 * y1;
    }
}

/// dst = a.0*a.1 + b.0*b.1 + c.0*c.1, one pass.
fn dot3_into(dst: &mut ScalarField, a: Pair<'_>, b: Pair<'_>, c: Pair<'_>) {
    for ((((((o, x0), y0), x1), y1), x2), y2) in dst
        .data_mut()
        .iter_mut()
        .zip(a.0.data())
        .zip(a.1.data())
        .zip(b.0.data())
        .zip(b.1.data())
        .zip(c.0.data())
        .zip(c.1.data())
    {
        *o = x0 * y0 + x1 * y1 + x2 * y2;
    }
}

/// dst += a.0*a.1 + b.0*b.1 + c.0*c.1, one pass.
fn dot3_accum(dst: &mut ScalarField, a: Pair<'_>, b: Pair<'_>, c: Pair<'_>) {
    for ((((((o, x0), y0), x1), y1), x2), y2) in dst
        .data_mut()
        .iter_mut()
        .zip(a.0.data())
        .zip(a.1.data())
        .zip(b.0.data())
        .zip(b.1.data())
        .zip(c.0.data())
        .zip(c.1.data())
    {
        *o += x0 * y0 + x1 * y1 + x2 * y2;
    }
}

fn mul_into(dst: &mut ScalarField, a: &ScalarField, b: &ScalarField) {
    for (o, (x, y)) in dst
        .data_mut()
        .iter_mut()
        .zip(a.data().iter().zip(b.data()))
    {
        *o = x * y;
    }
}

/// (max q, h^2 sum q, h^2 sum q^2) in one pass.
fn q_stats(q: &ScalarField, h2: f64) -> (f64, f64, f64) {
    let mut qmax = 0.0f64;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for &v in q.data() {
        qmax = qmax.max(v);
        s1 += v;
        s2 += v * v;
    }
    (qmax, h2 * s1, h2 * s2)
}

/// h^2 sum |u|^4 over the grid.
fn quartic_energy(u: &VectorField2, h2: f64) -> f64 {
    let mut s = 0.0;
    for (a, b) in u.comp(0).data().iter().zip(u.comp(1).data()) {
        let m2 = a * a + b * b;
        s += m2 * m2;
    }
    h2 * s
}

/// One gradient-flow step of size dt. The velocity is carried through
/// untouched (callers keep it zero).
pub fn step_heat_flow(state: &SimState, dt: f64) -> Result<(SimState, StepInfo)> {
    Stepper::new(state.grid()).step(state, System::HeatFlow, DtSpec::Given(dt))
}

/// One coupled step of size dt.
pub fn step_liquid_crystal(state: &SimState, dt: f64) -> Result<(SimState, StepInfo)> {
    Stepper::new(state.grid()).step(state, System::LiquidCrystal, DtSpec::Given(dt))
}

/// Step size the policy would select at this state. Uses the full-band
/// gradient, so it can differ at roundoff level from the in-step choice.
pub fn choose_dt(state: &SimState, policy: &StepPolicy) -> Result<f64> {
    policy.validate()?;
    let q = director::grad_sq(&state.d);
    policy.dt_from(
        state.grid().h(),
        state.u.max_magnitude(),
        q.max_abs(),
        state.t,
    )
}

/// Divergence of the elastic stress tensor: component i holds
/// sum_j d_j (d_i d . d_j d), with band-limited products.
pub fn elastic_stress(d: &DirectorField) -> VectorField2 {
    let grid = d.grid();
    let kmax = two_thirds_kmax(grid.n());
    let mut gx: Vec<ScalarField> = Vec::with_capacity(3);
    let mut gy: Vec<ScalarField> = Vec::with_capacity(3);
    for c in 0..3 {
        let mut sc = spectral::to_spectral(d.comp(c));
        truncate_modes_inplace(&mut sc, kmax);
        let dx = spectral::derivative_spec(&sc, 0);
        let dy = spectral::derivative_spec(&sc, 1);
        let (fx, fy) = spectral::to_physical_pair(&dx, &dy);
        gx.push(fx);
        gy.push(fy);
    }
    let mut t11 = ScalarField::zeros(grid);
    let mut t12 = ScalarField::zeros(grid);
    let mut t22 = ScalarField::zeros(grid);
    dot3_into(&mut t11, (&gx[0], &gx[0]), (&gx[1], &gx[1]), (&gx[2], &gx[2]));
    dot3_into(&mut t12, (&gx[0], &gy[0]), (&gx[1], &gy[1]), (&gx[2], &gy[2]));
    dot3_into(&mut t22, (&gy[0], &gy[0]), (&gy[1], &gy[1]), (&gy[2], &gy[2]));
    let (mut c11, mut c22) = spectral::to_spectral_pair(&t11, &t22);
    let mut c12 = spectral::to_spectral(&t12);
    truncate_modes_inplace(&mut c11, kmax);
    truncate_modes_inplace(&mut c12, kmax);
    truncate_modes_inplace(&mut c22, kmax);
    let mut s1 = spectral::derivative_spec(&c11, 0);
    let d12 = spectral::derivative_spec(&c12, 1);
    let mut s2 = spectral::derivative_spec(&c12, 0);
    let d22 = spectral::derivative_spec(&c22, 1);
    for (a, b) in s1.data_mut().iter_mut().zip(d12.data()) {
        *a += b;
    }
    for (a, b) in s2.data_mut().iter_mut().zip(d22.data()) {
        *a += b;
    }
    let (f1, f2) = spectral::to_physical_pair(&s1, &s2);
    VectorField2::new(f1, f2).expect("grids match")
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    BlowupDetected,
    Aborted,
}

/// Running-integral seeds for resuming a run mid-flight.
#[derive(Debug, Clone, Copy)]
pub struct ResumeSeed {
    pub int_u_l4_4: f64,
    pub int_grad_d_l4_4: f64,
    pub int_lap_d_sq: f64,
    pub int_grad_d_sq: f64,
    pub int_d: f64,
    /// Initial total energy of the original run, reconstructed so the
    /// resumed energy-balance column continues seamlessly.
    pub e0: f64,
}

impl ResumeSeed {
    /// Rebuild the seeds from the last diagnostics row of the interrupted
    /// run: E(0) = E(t) + int_D(t) - residual(t) exactly inverts the
    /// residual bookkeeping.
    pub fn from_record(rec: &DiagnosticsRecord) -> Self {
        ResumeSeed {
            int_u_l4_4: rec.int_u_l4_4,
            int_grad_d_l4_4: rec.int_grad_d_l4_4,
            int_lap_d_sq: rec.int_lap_d_sq,
            int_grad_d_sq: rec.int_grad_d_sq,
            int_d: rec.int_d,
            e0: rec.e + rec.int_d - rec.energy_residual,
        }
    }
}

/// Everything a run needs.
#[derive(Debug, Clone)]
pub struct RunParams {
    pub system: System,
    pub initial: SimState,
    pub t_end: f64,
    pub policy: StepPolicy,
    /// Diagnostics cadence in simulated time.
    pub record_interval: f64,
    /// Snapshot cadence; `None` keeps only the final state.
    pub snapshot_interval: Option<f64>,
    /// Unit-norm drift above this value stops the run as a blowup signal.
    pub tol_evolve: f64,
    pub seed: Option<ResumeSeed>,
}

impl RunParams {
    pub fn new(system: System, initial: SimState, t_end: f64) -> Self {
        let record_interval = (t_end - initial.t()) / 100.0;
        RunParams {
            system,
            initial,
            t_end,
            policy: StepPolicy::cfl(),
            record_interval,
            snapshot_interval: None,
            tol_evolve: TOL_EVOLVE,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if !(self.t_end > self.initial.t()) {
            return Err(Error::InvalidParameter(format!(
                "t_end {} must exceed the initial time {}",
                self.t_end,
                self.initial.t()
            )));
        }
        if !(self.record_interval > 0.0 && self.record_interval.is_finite()) {
            return Err(Error::InvalidParameter(
                "record interval must be positive".into(),
            ));
        }
        if let Some(s) = self.snapshot_interval {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(
                    "snapshot interval must be positive".into(),
                ));
            }
        }
        if !(self.tol_evolve > 0.0) {
            return Err(Error::InvalidParameter(
                "evolution tolerance must be positive".into(),
            ));
        }
        if self.system == System::HeatFlow && self.initial.u().max_magnitude() > 1e-12 {
            return Err(Error::InvalidParameter(
                "gradient-flow runs require zero velocity".into(),
            ));
        }
        Ok(())
    }
}

/// Result of a run: diagnostics rows, periodic state snapshots, and summary
/// extrema. `records` always includes the initial and final states.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<SimState>,
    pub status: RunStatus,
    pub stop_reason: String,
    pub final_state: SimState,
    pub steps: usize,
    pub grad_sup_initial: f64,
    pub grad_sup_max: f64,
    pub max_drift: f64,
}

/// Growth of sup |grad d| past this factor times its initial value stops the
/// run as a blowup signal.
pub const GROWTH_LIMIT: f64 = 1e3;

/// Advance from the initial state to `t_end`, recording diagnostics on the
/// requested cadence. Physical blowup indicators (step collapse, director
/// degeneration, drift past tolerance, thousandfold gradient growth) end the
/// run with `BlowupDetected`; non-finite samples end it with `Aborted`; other
/// errors propagate.
pub fn run(params: &RunParams) -> Result<Trajectory> {
    params.validate()?;
    let grid = params.initial.grid();
    let mut stepper = Stepper::new(grid);
    let mut state = params.initial.clone();
    let t_end = params.t_end;
    let mut ints = match &params.seed {
        Some(s) => IntegralSet::from_seed(s)?,
        None => IntegralSet::new(),
    };
    let mut e0 = params.seed.as_ref().map(|s| s.e0);
    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    let mut snapshots: Vec<SimState> = Vec::new();
    let eps = 1e-9 * params.record_interval;
    let mut next_record = state.t;
    let mut next_snap = params.snapshot_interval.map(|s| state.t + s);
    let mut steps = 0usize;
    let mut grad_sup_initial = f64::NAN;
    let mut grad_sup_max = 0.0f64;
    let mut max_drift = 0.0f64;

    let push_record =
        |state: &SimState, ints: &IntegralSet, e0: &mut Option<f64>, out: &mut Vec<DiagnosticsRecord>| {
            let rec = diagnostics::assemble(state, ints, *e0);
            if e0.is_none() {
                *e0 = Some(rec.e + rec.int_d);
            }
            out.push(rec);
        };

    let (status, stop_reason) = loop {
        if state.t + eps >= next_record {
            push_record(&state, &ints, &mut e0, &mut records);
            while next_record <= state.t + eps {
                next_record += params.record_interval;
            }
        }
        if let (Some(step_len), Some(due)) = (params.snapshot_interval, next_snap) {
            if state.t + eps >= due {
                snapshots.push(state.clone());
                let mut t = due;
                while t <= state.t + eps {
                    t += step_len;
                }
                next_snap = Some(t);
            }
        }
        if state.t + eps >= t_end {
            break (RunStatus::Completed, "reached end time".to_string());
        }

        let cap = t_end - state.t;
        match stepper.step(
            &state,
            params.system,
            DtSpec::Policy {
                policy: &params.policy,
                cap: Some(cap),
            },
        ) {
            Ok((next, info)) => {
                steps += 1;
                if grad_sup_initial.is_nan() {
                    grad_sup_initial = info.grad_sup;
                }
                grad_sup_max = grad_sup_max.max(info.grad_sup);
                max_drift = max_drift.max(info.drift);
                if ints.add(info.dt, &info.integrands).is_err() {
                    // finite fields can still overflow the quartic integrands
                    break (
                        RunStatus::Aborted,
                        format!("diagnostics integrand overflowed at t = {:.6e}", state.t),
                    );
                }
                let retired = std::mem::replace(&mut state, next);
                stepper.recycle(retired);
                if info.drift > params.tol_evolve {
                    break (
                        RunStatus::BlowupDetected,
                        format!(
                            "unit-norm drift {:.3e} exceeded tolerance {:.1e} at t = {:.6e}",
                            info.drift, params.tol_evolve, state.t
                        ),
                    );
                }
                if grad_sup_initial > 0.0 && info.grad_sup > GROWTH_LIMIT * grad_sup_initial {
                    break (
                        RunStatus::BlowupDetected,
                        format!(
                            "sup |grad d| grew {GROWTH_LIMIT:.0e}-fold from {:.3e} at t = {:.6e}",
                            grad_sup_initial, state.t
                        ),
                    );
                }
            }
            Err(Error::StepCollapse { t, required, floor }) => {
                break (
                    RunStatus::BlowupDetected,
                    format!("step size collapsed at t = {t:.6e} ({required:.3e} < {floor:.3e})"),
                );
            }
            Err(Error::DegenerateDirector { i, j, norm, .. }) => {
                break (
                    RunStatus::BlowupDetected,
                    format!("director norm {norm:.3e} degenerate at sample ({i}, {j})"),
                );
            }
            Err(Error::NonFinite { what, i, j }) => {
                break (
                    RunStatus::Aborted,
                    format!("non-finite {what} sample at ({i}, {j})"),
                );
            }
            Err(e) => return Err(e),
        }
    };

    if records
        .last()
        .map_or(true, |r| (r.t - state.t).abs() > eps)
    {
        push_record(&state, &ints, &mut e0, &mut records);
    }

    Ok(Trajectory {
        records,
        snapshots,
        status,
        stop_reason,
        final_state: state,
        steps,
        grad_sup_initial: if grad_sup_initial.is_nan() {
            0.0
        } else {
            grad_sup_initial
        },
        grad_sup_max,
        max_drift,
    })
}
