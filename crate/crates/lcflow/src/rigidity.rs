//! Coercivity-gap estimation and frequency-band diagnostics.
//!
//! The central object is the ratio ||grad d||_4^4 / ||lap d||_2^2 maximized
//! over director fields confined to the spherical cap d3 >= eps0 with
//! gradient energy at most C0^2. The gap between the supremum and 1 is
//! estimated by multistart projected gradient ascent with a hard cap
//! projection and a quadratic energy penalty. The band utilities locate
//! where the gradient energy density |grad d|^2 lives in frequency and
//! bound its band norms.

use crate::director::{self, DirectorDerivatives};
use crate::error::{Error, Result};
use crate::field::{DirectorField, Grid2D, ScalarField, VectorField2, NORM_FLOOR};
use crate::scenarios::smooth_random_director;
use crate::spectral::{self, bump};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Feasible candidates must keep the ratio below 1 by this margin; anything
/// closer means the grid can no longer be trusted to resolve the field.
const RATIO_GUARD: f64 = 1e-6;
/// Arithmetic slack on the pointwise cap constraint.
const CAP_SLACK: f64 = 1e-12;
/// Relative slack on the squared gradient-energy budget.
const ENERGY_SLACK: f64 = 1e-9;
/// Below this Laplacian norm the ratio is numerically undefined.
const LAP_FLOOR: f64 = 1e-12;
/// Resolution certificate: for pointwise-unit fields the identity
/// ||lap d + q d||^2 = ||lap d||^2 - ||q||^2 holds on the continuum, so its
/// relative defect measures how badly the grid under-resolves the field.
/// Candidates beyond this defect are treated as unrepresentable: their
/// ratios are grid artifacts (they can even exceed 1) and must not be
/// visited or recorded.
const RESOLUTION_TOL: f64 = 5e-4;
/// Pole-blend schedule: s = 0.05 * k for k = 0..=BLEND_STEPS. The cap at
/// s = 0.8 is deliberate: caps so tight that even an 80% blend toward the
/// pole cannot enter them are treated as infeasible rather than explored
/// with an essentially constant field.
const BLEND_STEPS: usize = 16;
const TAU_MIN: f64 = 1e-14;
const TAU_MAX: f64 = 1e6;
/// Consecutive near-zero objective gains tolerated before a start stops.
const STALL_LIMIT: usize = 5;
/// Low-pass levels tried when restoring the energy budget after ascent.
const REPAIR_LEVELS: usize = 12;

/// Knobs for the projected-ascent search.
#[derive(Debug, Clone)]
pub struct OptimizerSettings {
    /// Initial trial step; the backtracking line search rescales it freely.
    pub step_size: f64,
    /// Ascent iterations allowed per start.
    pub max_iters: usize,
    /// Number of independent random starts.
    pub starts: usize,
    /// Base seed; each start derives its own stream deterministically.
    pub seed: u64,
    /// Weight of the quadratic penalty on gradient energy above the budget.
    pub penalty_weight: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            step_size: 0.05,
            max_iters: 150,
            starts: 8,
            seed: 1,
            penalty_weight: 10.0,
        }
    }
}

/// A cap-and-budget instance: maximize the coercivity ratio over unit fields
/// with d3 >= epsilon0 pointwise and ||grad d||_2 <= c0.
#[derive(Debug, Clone)]
pub struct RigidityProblem {
    pub epsilon0: f64,
    pub c0: f64,
    pub grid: Grid2D,
    pub optimizer: OptimizerSettings,
}

impl RigidityProblem {
    pub fn new(epsilon0: f64, c0: f64, grid: Grid2D) -> Result<Self> {
        let p = RigidityProblem {
            epsilon0,
            c0,
            grid,
            optimizer: OptimizerSettings::default(),
        };
        p.check()?;
        Ok(p)
    }

    pub fn with_optimizer(mut self, optimizer: OptimizerSettings) -> Self {
        self.optimizer = optimizer;
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.epsilon0 > 0.0 && self.epsilon0 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cap height eps0 must lie in (0, 1), got {}",
                self.epsilon0
            )));
        }
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gradient budget C0 must be positive and finite, got {}",
                self.c0
            )));
        }
        let o = &self.optimizer;
        if !(o.step_size > 0.0 && o.step_size.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive and finite, got {}",
                o.step_size
            )));
        }
        if !(o.penalty_weight >= 0.0 && o.penalty_weight.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "penalty weight must be nonnegative and finite, got {}",
                o.penalty_weight
            )));
        }
        if o.starts == 0 {
            return Err(Error::InvalidParameter(
                "optimizer needs at least one start".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one start: how far it got and the best feasible ratio it saw
/// (None when the start never produced a feasible field).
#[derive(Debug, Clone)]
pub struct StartRecord {
    pub start: usize,
    pub iterations: usize,
    pub best_ratio: Option<f64>,
    pub feasible: bool,
}

/// Best feasible candidate over all starts.
#[derive(Debug, Clone)]
pub struct RigidityResult {
    pub best_ratio: f64,
    /// The estimated coercivity gap, 1 - best_ratio.
    pub delta0_estimate: f64,
    pub best_field: DirectorField,
    pub history: Vec<StartRecord>,
}

/// One cell of a (eps0, C0) parameter sweep.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub epsilon0: f64,
    pub c0: f64,
    pub n: usize,
    pub length: f64,
    pub best_ratio: f64,
    pub delta0_estimate: f64,
    pub starts: usize,
    pub iterations: usize,
}

/// Best ratio found by pure random sampling of the feasible set.
#[derive(Debug, Clone)]
pub struct RandomSearchReport {
    pub best_ratio: f64,
    pub feasible: usize,
    pub attempts: usize,
}

/// Everything the optimizer needs to know about one candidate field.
struct Eval {
    derivs: DirectorDerivatives,
    q: ScalarField,
    den: f64,
    ratio: f64,
    grad_sq_l2: f64,
    excess: f64,
    value: f64,
    /// Whether the grid still resolves this field (see RESOLUTION_TOL).
    /// Meaningful only for pointwise-unit fields.
    resolved: bool,
}

/// Feasibility fingerprint of an evaluated candidate, kept so a parameter
/// sweep can score every candidate against every cell it is feasible for.
#[derive(Debug, Clone, Copy)]
struct PoolEntry {
    min_d3: f64,
    grad_sq_l2: f64,
    ratio: f64,
}

/// Ratio, penalty and reusable derivatives of a candidate field. Works for
/// non-unit fields too, which the finite-difference gradient check exploits.
fn evaluate(d: &DirectorField, c0: f64, mu: f64) -> Result<Eval> {
    let grid = d.grid();
    let h2 = grid.h() * grid.h();
    let derivs = director::derivatives(d);
    let q = derivs.grad_sq_field();
    let mut num = 0.0;
    let mut qsum = 0.0;
    for &v in q.data() {
        num += v * v;
        qsum += v;
    }
    let mut den = 0.0;
    let mut gsum = 0.0;
    for c in 0..3 {
        let lap = &derivs.lap[c];
        for ((&lv, &qv), &dv) in lap.data().iter().zip(q.data()).zip(d.comp(c).data()) {
            den += lv * lv;
            let gv = lv + qv * dv;
            gsum += gv * gv;
        }
    }
    if (h2 * den).sqrt() <= LAP_FLOOR {
        return Err(Error::DegenerateInput(
            "flat director: the coercivity ratio needs a nonzero Laplacian",
        ));
    }
    let ratio = num / den;
    let resolved = (gsum - (den - num)).abs() <= RESOLUTION_TOL * den;
    let grad_sq_l2 = h2 * qsum;
    let excess = (grad_sq_l2 - c0 * c0).max(0.0);
    let value = ratio - mu * excess * excess;
    Ok(Eval {
        derivs,
        q,
        den,
        ratio,
        grad_sq_l2,
        excess,
        value,
        resolved,
    })
}

/// Sample-wise partial derivatives of the penalized objective. The spectral
/// first-derivative matrix is exactly skew-adjoint and the Laplacian exactly
/// self-adjoint for the plain sum pairing, so the chain rule lands on
/// -4 div(q grad d_c) for the numerator, 2 lap^2 d_c for the denominator and
/// -2 h^2 div(grad d_c) for the gradient energy, with no quadrature residue.
/// The energy term must be the composition div(grad .), not the radial
/// Laplacian: the first-derivative table drops the Nyquist row, so the two
/// operators differ there, and only the composition is the exact adjoint of
/// what the objective actually sums.
fn euclid_grad(d: &DirectorField, ev: &Eval, mu: f64) -> Result<[ScalarField; 3]> {
    let grid = d.grid();
    let h2 = grid.h() * grid.h();
    let pen_coeff = 4.0 * mu * ev.excess * h2;
    let inv_den = 1.0 / ev.den;
    let mut out: Vec<ScalarField> = Vec::with_capacity(3);
    for c in 0..3 {
        let mut m1 = ScalarField::zeros(grid);
        let mut m2 = ScalarField::zeros(grid);
        {
            let g = &ev.derivs.grad[c];
            for ((o, &qv), &gv) in m1.data_mut().iter_mut().zip(ev.q.data()).zip(g[0].data()) {
                *o = qv * gv;
            }
            for ((o, &qv), &gv) in m2.data_mut().iter_mut().zip(ev.q.data()).zip(g[1].data()) {
                *o = qv * gv;
            }
        }
        let div = spectral::divergence(&VectorField2::new(m1, m2)?);
        let bilap = spectral::fractional_laplacian(d.comp(c), 4.0)?;
        let divgrad = if pen_coeff != 0.0 {
            let g = &ev.derivs.grad[c];
            Some(spectral::divergence(&VectorField2::new(
                g[0].clone(),
                g[1].clone(),
            )?))
        } else {
            None
        };
        let mut g = ScalarField::zeros(grid);
        {
            let dst = g.data_mut();
            for ((o, &dv), &bv) in dst.iter_mut().zip(div.data()).zip(bilap.data()) {
                *o = inv_den * (-4.0 * dv - 2.0 * ev.ratio * bv);
            }
            if let Some(dg) = &divgrad {
                for (o, &lv) in dst.iter_mut().zip(dg.data()) {
                    *o += pen_coeff * lv;
                }
            }
        }
        out.push(g);
    }
    let mut it = out.into_iter();
    Ok([
        it.next().expect("three components"),
        it.next().expect("three components"),
        it.next().expect("three components"),
    ])
}

/// Project a Euclidean gradient onto the sphere tangent at every sample.
/// Where the cap constraint is active and the tangent step would push d3
/// further down, the in-sphere direction that lowers d3 is removed as well,
/// so boundary samples slide along the cap edge instead of fighting the
/// clamp.
fn tangent_project(d: &DirectorField, g: &mut [ScalarField; 3], eps0: f64) {
    let (d1, d2, d3) = (d.comp(0).data(), d.comp(1).data(), d.comp(2).data());
    let [g1, g2, g3] = g;
    let g1 = g1.data_mut();
    let g2 = g2.data_mut();
    let g3 = g3.data_mut();
    for k in 0..d1.len() {
        let (a, b, c) = (d1[k], d2[k], d3[k]);
        let dot = g1[k] * a + g2[k] * b + g3[k] * c;
        let mut t1 = g1[k] - dot * a;
        let mut t2 = g2[k] - dot * b;
        let mut t3 = g3[k] - dot * c;
        if c <= eps0 + 1e-9 {
            // boundary frame: unit tangent that raises d3 is (e3 - c d) / s
            let s = (1.0 - c * c).max(0.0).sqrt();
            if s > 1e-9 {
                let along = (-c * (t1 * a + t2 * b) + t3 * (1.0 - c * c)) / s;
                if along < 0.0 {
                    t1 -= along * (-c * a) / s;
                    t2 -= along * (-c * b) / s;
                    t3 -= along * s;
                }
            }
        }
        g1[k] = t1;
        g2[k] = t2;
        g3[k] = t3;
    }
}

/// Exact pointwise projection onto the unit-sphere cap d3 >= eps0. Samples
/// already inside are untouched; outside samples keep their planar bearing
/// and land on the cap edge.
fn clamp_to_cap(d: &mut DirectorField, eps0: f64) {
    let planar = (1.0 - eps0 * eps0).max(0.0).sqrt();
    let [c1, c2, c3] = d.comps_mut();
    let (a, b, c) = (c1.data_mut(), c2.data_mut(), c3.data_mut());
    for ((x, y), z) in a.iter_mut().zip(b.iter_mut()).zip(c.iter_mut()) {
        if *z >= eps0 {
            continue;
        }
        let p = (*x * *x + *y * *y).sqrt();
        if p > 1e-300 {
            let s = planar / p;
            *x *= s;
            *y *= s;
        } else {
            *x = planar;
            *y = 0.0;
        }
        *z = eps0;
    }
}

/// Blend toward the constant north-pole state and renormalize: s = 0 is the
/// original field, s = 1 the pole itself. Blending preserves smoothness,
/// unlike the cap clamp, which can crease a field it moves far.
fn toward_pole(d: &DirectorField, s: f64) -> Result<DirectorField> {
    let mut out = d.clone();
    {
        let [c1, c2, c3] = out.comps_mut();
        for v in c1.data_mut() {
            *v *= 1.0 - s;
        }
        for v in c2.data_mut() {
            *v *= 1.0 - s;
        }
        for v in c3.data_mut() {
            *v = (1.0 - s) * *v + s;
        }
    }
    out.normalize(NORM_FLOOR)?;
    Ok(out)
}

fn energy_feasible(ev: &Eval, c0: f64) -> bool {
    ev.grad_sq_l2 <= c0 * c0 * (1.0 + ENERGY_SLACK)
}

/// Walk the pole-blend schedule and return the least-blended version of
/// `raw` that satisfies all constraints, or None when the schedule runs out.
/// The cap test happens before the clamp, so accepted starts are smooth
/// fields genuinely inside the cap, with the clamp only absorbing roundoff.
fn prepare_start(
    raw: &DirectorField,
    problem: &RigidityProblem,
) -> Result<Option<(DirectorField, Eval)>> {
    let mu = problem.optimizer.penalty_weight;
    for k in 0..=BLEND_STEPS {
        let s = 0.05 * k as f64;
        let mut cand = match toward_pole(raw, s) {
            Ok(c) => c,
            Err(_) => continue,
        };
        if cand.min_d3() < problem.epsilon0 - CAP_SLACK {
            continue;
        }
        clamp_to_cap(&mut cand, problem.epsilon0);
        let ev = match evaluate(&cand, problem.c0, mu) {
            Ok(e) => e,
            // blending only gets flatter from here on
            Err(Error::DegenerateInput(_)) => break,
            Err(e) => return Err(e),
        };
        if ev.resolved && energy_feasible(&ev, problem.c0) {
            return Ok(Some((cand, ev)));
        }
    }
    Ok(None)
}

/// Draw one random candidate field from an already-seeded stream.
fn draw_candidate(rng: &mut ChaCha8Rng, grid: Grid2D) -> Result<DirectorField> {
    let max_mode = rng.random_range(1..=4i64);
    let amplitude = rng.random_range(0.3..1.6);
    let fseed = rng.random::<u64>();
    smooth_random_director(fseed, max_mode, amplitude, grid)
}

/// Screen a seeded batch of random candidates and keep the best `starts` of
/// them as ascent starts, ranked by ratio. Screening costs one evaluation
/// per candidate and makes the multistart at least as good as drawing the
/// same batch blindly.
fn screen_starts(
    problem: &RigidityProblem,
    pool: &mut Vec<PoolEntry>,
) -> Result<Vec<(DirectorField, Eval)>> {
    let o = &problem.optimizer;
    let mut rng = ChaCha8Rng::seed_from_u64(
        o.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0xD1B5_4A32_D192_ED03),
    );
    let budget = (o.starts * 50).clamp(o.starts, 600);
    let mut kept: Vec<(DirectorField, Eval)> = Vec::new();
    for _ in 0..budget {
        let raw = draw_candidate(&mut rng, problem.grid)?;
        if let Some((d, ev)) = prepare_start(&raw, problem)? {
            note(pool, &d, &ev);
            kept.push((d, ev));
            kept.sort_by(|a, b| b.1.ratio.total_cmp(&a.1.ratio));
            kept.truncate(o.starts);
        }
    }
    Ok(kept)
}

/// Low-pass smooth a field until its gradient energy fits the budget, then
/// re-project onto the cap. Returns the first feasible smoothed candidate.
fn repair(
    d: &DirectorField,
    problem: &RigidityProblem,
    mu: f64,
) -> Result<Option<(DirectorField, Eval)>> {
    let grid = problem.grid;
    let xi_top = std::f64::consts::PI * grid.n() as f64 / grid.length();
    for level in 1..=REPAIR_LEVELS {
        let beta = xi_top * 0.5f64.powi(level as i32);
        let c1 = spectral::lp_low(d.comp(0), beta)?;
        let c2 = spectral::lp_low(d.comp(1), beta)?;
        let c3 = spectral::lp_low(d.comp(2), beta)?;
        let mut cand = DirectorField::new(c1, c2, c3)?;
        if cand.normalize(NORM_FLOOR).is_err() {
            continue;
        }
        clamp_to_cap(&mut cand, problem.epsilon0);
        let ev = match evaluate(&cand, problem.c0, mu) {
            Ok(e) => e,
            Err(Error::DegenerateInput(_)) => break,
            Err(e) => return Err(e),
        };
        if ev.resolved && energy_feasible(&ev, problem.c0) {
            return Ok(Some((cand, ev)));
        }
    }
    Ok(None)
}

fn note(pool: &mut Vec<PoolEntry>, d: &DirectorField, ev: &Eval) {
    pool.push(PoolEntry {
        min_d3: d.min_d3(),
        grad_sq_l2: ev.grad_sq_l2,
        ratio: ev.ratio,
    });
}

/// Record a feasible candidate: enforce the resolution guard, then keep the
/// running maxima. Cap feasibility is guaranteed by construction (every
/// candidate passes through the clamp); only the energy budget is checked.
fn consider(
    best: &mut Option<(f64, DirectorField, usize)>,
    start_best: &mut Option<f64>,
    d: &DirectorField,
    ev: &Eval,
    c0: f64,
    start: usize,
) -> Result<()> {
    if !energy_feasible(ev, c0) {
        return Ok(());
    }
    if ev.ratio >= 1.0 - RATIO_GUARD {
        return Err(Error::InvariantViolation(format!(
            "feasible candidate reached coercivity ratio {:.9}; the discrete \
             maximum cannot touch 1, so the resolution is no longer trusted",
            ev.ratio
        )));
    }
    if start_best.map_or(true, |r| ev.ratio > r) {
        *start_best = Some(ev.ratio);
    }
    let better = match best {
        None => true,
        Some((r, _, s)) => ev.ratio > *r || (ev.ratio == *r && start < *s),
    };
    if better {
        *best = Some((ev.ratio, d.clone(), start));
    }
    Ok(())
}

struct AscentOutcome {
    best: Option<(f64, DirectorField, usize)>,
    history: Vec<StartRecord>,
    iterations: usize,
}

/// Multistart projected gradient ascent. Every evaluated candidate is
/// fingerprinted into `pool` so sweeps can share candidates across cells.
fn ascend(problem: &RigidityProblem, pool: &mut Vec<PoolEntry>) -> Result<AscentOutcome> {
    problem.check()?;
    let o = problem.optimizer.clone();
    let mu = o.penalty_weight;
    let c0 = problem.c0;
    let mut best: Option<(f64, DirectorField, usize)> = None;
    let mut history = Vec::with_capacity(o.starts);
    let mut total_iters = 0usize;

    let mut prepared = screen_starts(problem, pool)?;
    for start in 0..o.starts {
        if prepared.is_empty() {
            history.push(StartRecord {
                start,
                iterations: 0,
                best_ratio: None,
                feasible: false,
            });
            continue;
        }
        let (mut d, mut ev) = prepared.remove(0);
        let mut start_best: Option<f64> = None;
        consider(&mut best, &mut start_best, &d, &ev, c0, start)?;

        let mut tau = o.step_size;
        let mut iters = 0usize;
        let mut stalls = 0usize;
        while iters < o.max_iters {
            let mut g = euclid_grad(&d, &ev, mu)?;
            tangent_project(&d, &mut g, problem.epsilon0);
            let gsq: f64 = g
                .iter()
                .map(|c| c.data().iter().map(|v| v * v).sum::<f64>())
                .sum();
            if gsq <= 1e-28 {
                break;
            }
            let mut accepted = false;
            while tau >= TAU_MIN {
                let mut cand = d.clone();
                {
                    let [c1, c2, c3] = cand.comps_mut();
                    for (dst, src) in [(c1, &g[0]), (c2, &g[1]), (c3, &g[2])] {
                        for (v, &gv) in dst.data_mut().iter_mut().zip(src.data()) {
                            *v += tau * gv;
                        }
                    }
                }
                if cand.normalize(NORM_FLOOR).is_err() {
                    tau *= 0.5;
                    continue;
                }
                clamp_to_cap(&mut cand, problem.epsilon0);
                let cev = match evaluate(&cand, c0, mu) {
                    Ok(e) => e,
                    Err(Error::DegenerateInput(_)) => {
                        tau *= 0.5;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                if !cev.resolved {
                    // stepping onto a field the grid cannot represent;
                    // treat like a failed retraction and shorten the step
                    tau *= 0.5;
                    continue;
                }
                note(pool, &cand, &cev);
                if cev.value > ev.value + 1e-15 * (1.0 + ev.value.abs()) {
                    let gain = cev.value - ev.value;
                    d = cand;
                    ev = cev;
                    stalls = if gain <= 1e-11 * (1.0 + ev.value.abs()) {
                        stalls + 1
                    } else {
                        0
                    };
                    tau = (tau * 1.2).min(TAU_MAX);
                    accepted = true;
                    break;
                }
                tau *= 0.5;
            }
            if !accepted {
                break;
            }
            iters += 1;
            consider(&mut best, &mut start_best, &d, &ev, c0, start)?;
            if stalls >= STALL_LIMIT {
                break;
            }
        }
        // the penalty may leave the final iterate slightly over budget;
        // smooth it back into the feasible set and score that too
        if !energy_feasible(&ev, c0) {
            if let Some((rd, rev)) = repair(&d, problem, mu)? {
                note(pool, &rd, &rev);
                consider(&mut best, &mut start_best, &rd, &rev, c0, start)?;
            }
        }
        total_iters += iters;
        history.push(StartRecord {
            start,
            iterations: iters,
            best_ratio: start_best,
            feasible: true,
        });
    }
    Ok(AscentOutcome {
        best,
        history,
        iterations: total_iters,
    })
}

/// Estimate the coercivity gap 1 - sup(ratio) for one cap-and-budget cell.
///
/// Starts that cannot be blended into the constraint set are recorded as
/// infeasible; if none survives, the whole problem is reported infeasible.
pub fn estimate_delta0(problem: &RigidityProblem) -> Result<RigidityResult> {
    let mut scratch = Vec::new();
    let out = ascend(problem, &mut scratch)?;
    let (best_ratio, best_field, _) = out.best.ok_or_else(|| {
        Error::Infeasible(format!(
            "none of {} starts reached a curved director inside the cap \
             d3 >= {} with gradient budget {}",
            problem.optimizer.starts, problem.epsilon0, problem.c0
        ))
    })?;
    Ok(RigidityResult {
        best_ratio,
        delta0_estimate: 1.0 - best_ratio,
        best_field,
        history: out.history,
    })
}

/// Draw random smooth fields, blend each into the feasible set, and record
/// the best coercivity ratio seen. `samples` counts feasible fields, not
/// draws; the search gives up after 50x that many draws.
pub fn random_search(
    problem: &RigidityProblem,
    samples: usize,
    seed: u64,
) -> Result<RandomSearchReport> {
    problem.check()?;
    if samples == 0 {
        return Err(Error::InvalidParameter(
            "random search needs at least one sample".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NEG_INFINITY;
    let mut feasible = 0usize;
    let mut attempts = 0usize;
    while feasible < samples && attempts < samples.saturating_mul(50) {
        attempts += 1;
        let max_mode = rng.random_range(1..=3i64);
        let amplitude = rng.random_range(0.2..1.6);
        let fseed = rng.random::<u64>();
        let raw = smooth_random_director(fseed, max_mode, amplitude, problem.grid)?;
        if let Some((_, ev)) = prepare_start(&raw, problem)? {
            feasible += 1;
            if ev.ratio > best {
                best = ev.ratio;
            }
        }
    }
    if feasible < samples {
        return Err(Error::Infeasible(format!(
            "random search found only {feasible} feasible fields in {attempts} draws"
        )));
    }
    Ok(RandomSearchReport {
        best_ratio: best,
        feasible,
        attempts,
    })
}

/// Estimate the gap on a grid of (eps0, C0) cells with one shared candidate
/// pool. Every candidate evaluated anywhere in the sweep is scored against
/// every cell it is feasible for. Feasible sets are nested — raising eps0
/// shrinks them, raising C0 grows them — so the reported per-cell maxima,
/// and hence the gap estimates, are exactly monotone along both axes.
pub fn run_sweep(
    epsilon0s: &[f64],
    c0s: &[f64],
    grid: Grid2D,
    optimizer: &OptimizerSettings,
) -> Result<Vec<SweepCell>> {
    if epsilon0s.is_empty() || c0s.is_empty() {
        return Err(Error::InvalidParameter(
            "sweep needs at least one eps0 and one C0".into(),
        ));
    }
    let mut pool: Vec<PoolEntry> = Vec::new();
    let mut runs = Vec::new();
    for &e in epsilon0s {
        for &c in c0s {
            let problem = RigidityProblem::new(e, c, grid)?.with_optimizer(optimizer.clone());
            let out = ascend(&problem, &mut pool)?;
            // Re-clamp this cell's winner at every other cap level so the
            // pool couples the cells beyond what their own runs saw.
            if let Some((_, field, _)) = &out.best {
                for &e2 in epsilon0s {
                    let mut cand = field.clone();
                    clamp_to_cap(&mut cand, e2);
                    if let Ok(ev) = evaluate(&cand, c, optimizer.penalty_weight) {
                        if ev.resolved {
                            note(&mut pool, &cand, &ev);
                        }
                    }
                }
            }
            runs.push((e, c, out));
        }
    }
    let mut cells = Vec::with_capacity(runs.len());
    for (e, c, out) in runs {
        let mut best = out
            .best
            .as_ref()
            .map(|(r, _, _)| *r)
            .unwrap_or(f64::NEG_INFINITY);
        let budget = c * c * (1.0 + ENERGY_SLACK);
        for entry in &pool {
            if entry.min_d3 >= e - CAP_SLACK
                && entry.grad_sq_l2 <= budget
                && entry.ratio > best
            {
                best = entry.ratio;
            }
        }
        if !best.is_finite() {
            return Err(Error::Infeasible(format!(
                "sweep cell (eps0 = {e}, C0 = {c}) has no feasible candidate"
            )));
        }
        if best >= 1.0 - RATIO_GUARD {
            return Err(Error::InvariantViolation(format!(
                "sweep cell (eps0 = {e}, C0 = {c}) reached ratio {best:.9}; \
                 the resolution is no longer trusted"
            )));
        }
        cells.push(SweepCell {
            epsilon0: e,
            c0: c,
            n: grid.n(),
            length: grid.length(),
            best_ratio: best,
            delta0_estimate: 1.0 - best,
            starts: optimizer.starts,
            iterations: out.iterations,
        });
    }
    Ok(cells)
}

/// Sample location and magnitude of the band-passed peak of a field.
#[derive(Debug, Clone, Copy)]
pub struct ConcentrationPoint {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

/// Argmax over grid samples of |band-pass of f| for the band (1/N, N).
/// Ties break toward the smallest row-major index, which together with the
/// translation equivariance of the band filter makes the result shift with
/// the field when the field is shifted by a grid vector.
pub fn concentration_center(f: &ScalarField, n_band: f64) -> Result<ConcentrationPoint> {
    if !(n_band >= 2.0 && n_band.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "band parameter must be a finite value >= 2, got {n_band}"
        )));
    }
    let band = spectral::lp_band(f, 1.0 / n_band, n_band)?;
    let grid = f.grid();
    let n = grid.n();
    let (mut bi, mut bj, mut bv) = (0usize, 0usize, f64::NEG_INFINITY);
    for (k, &v) in band.data().iter().enumerate() {
        let a = v.abs();
        if a > bv {
            bv = a;
            bi = k / n;
            bj = k % n;
        }
    }
    let (x, y) = grid.xy(bi, bj);
    Ok(ConcentrationPoint {
        i: bi,
        j: bj,
        x,
        y,
        value: bv,
    })
}

/// Band norms of the gradient energy density q = |grad d|^2 for the dyadic
/// split at 1/N and N, together with the bounds they are checked against.
#[derive(Debug, Clone, Copy)]
pub struct BandSplit {
    /// L2 norm of the low band P_{<1/N} q.
    pub low: f64,
    /// L2 norm of the middle band.
    pub mid: f64,
    /// L2 norm of the high band P_{>N} q.
    pub high: f64,
    pub q_l1: f64,
    pub q_l2: f64,
    /// Rigorous convolution bound on the low band: the L2 mass of the
    /// low-pass kernel times ||q||_1. Computed from the actual multiplier,
    /// so it carries the exact discrete constant for this grid and N.
    pub low_bound: f64,
    /// high * sqrt(N) / (||lap d||_2 ||grad d||_2); reported for corpus
    /// boundedness, not asserted pointwise.
    pub high_ratio: f64,
}

/// Split |grad d|^2 into low/mid/high bands at cuts 1/N and N and verify the
/// bounds that make the split useful: the low band is controlled by the L1
/// norm through the kernel bound, and the three bands reconstruct the L2
/// norm within the triangle inequality because the band multipliers sum to
/// one exactly.
pub fn band_split_bounds(d: &DirectorField, n_band: f64) -> Result<BandSplit> {
    if !(n_band >= 2.0 && n_band.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "band parameter must be a finite value >= 2, got {n_band}"
        )));
    }
    let grid = d.grid();
    let n = grid.n();
    let h2 = grid.h() * grid.h();
    let derivs = director::derivatives(d);
    let q = derivs.grad_sq_field();

    let low_f = spectral::lp_low(&q, 1.0 / n_band)?;
    let mid_f = spectral::lp_band(&q, 1.0 / n_band, n_band)?;
    let high_f = spectral::lp_high(&q, n_band)?;
    let l2 = |f: &ScalarField| (h2 * f.data().iter().map(|v| v * v).sum::<f64>()).sqrt();
    let low = l2(&low_f);
    let mid = l2(&mid_f);
    let high = l2(&high_f);
    let q_l2 = l2(&q);
    let q_l1 = h2 * q.data().iter().map(|v| v.abs()).sum::<f64>();

    // Kernel bound: the low-pass is convolution against a kernel whose L2
    // norm is sqrt(sum of squared multiplier values) / L, mean mode included.
    let mut msq = 0.0;
    for m1 in 0..n {
        for m2 in 0..n {
            let x1 = grid.xi(m1);
            let x2 = grid.xi(m2);
            let r = (x1 * x1 + x2 * x2).sqrt();
            let w = bump(r * n_band);
            msq += w * w;
        }
    }
    let low_bound = msq.sqrt() / grid.length() * q_l1;
    if low > low_bound * (1.0 + 1e-6) {
        return Err(Error::InvariantViolation(format!(
            "low band {low:.6e} exceeds its kernel bound {low_bound:.6e}"
        )));
    }
    let slack = 1e-9 * (q_l2 + low + high) + 1e-300;
    if mid < q_l2 - low - high - slack || mid > q_l2 + low + high + slack {
        return Err(Error::InvariantViolation(format!(
            "band norms break the triangle inequality: low {low:.6e}, \
             mid {mid:.6e}, high {high:.6e}, total {q_l2:.6e}"
        )));
    }

    let mut lap_sq = 0.0;
    for lap in derivs.laplacians() {
        for &v in lap.data() {
            lap_sq += v * v;
        }
    }
    let lap_l2 = (h2 * lap_sq).sqrt();
    let grad_l2 = q_l1.sqrt();
    let denom = lap_l2 * grad_l2;
    let high_ratio = if denom > 0.0 {
        high * n_band.sqrt() / denom
    } else {
        0.0
    };
    Ok(BandSplit {
        low,
        mid,
        high,
        q_l1,
        q_l2,
        low_bound,
        high_ratio,
    })
}
