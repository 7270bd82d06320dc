//! Per-run bookkeeping: instantaneous diagnostics rows, running space-time
//! integrals, and trajectory-level checks (energy balance, maximum
//! principle, a Gronwall-type bound, blowup indicators, and the coercivity
//! gap along a flow).

use crate::director;
use crate::dynamics::{Integrands, ResumeSeed, SimState, Trajectory};
use crate::error::{Error, Result};
use crate::norms::{self, SpaceTimeAccumulator};
use crate::spectral::{to_spectral_pair, weighted_l2_sq};

/// One diagnostics row. Field order matches the CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// Total energy 1/2 (||u||_2^2 + ||grad d||_2^2).
    pub e: f64,
    pub grad_u_sq: f64,
    /// ||Lap d + |grad d|^2 d||_2^2.
    pub tension_sq: f64,
    pub grad_d_l4_4: f64,
    pub lap_d_sq: f64,
    /// Smallest sampled third director component.
    pub inf_d3: f64,
    pub d_minus_e3_sq: f64,
    pub int_u_l4_4: f64,
    pub int_grad_d_l4_4: f64,
    pub int_lap_d_sq: f64,
    pub int_grad_d_sq: f64,
    /// Running integral of the dissipation D = ||grad u||^2 + ||tension||^2.
    pub int_d: f64,
    /// E(t) + int_D - E(0); stays within scheme error of zero.
    pub energy_residual: f64,
    pub u_l4_4: f64,
}

/// Running space-time integrals advanced once per step.
#[derive(Debug, Clone, Default)]
pub struct IntegralSet {
    u_l4_4: SpaceTimeAccumulator,
    grad_d_l4_4: SpaceTimeAccumulator,
    lap_d_sq: SpaceTimeAccumulator,
    grad_d_sq: SpaceTimeAccumulator,
    diss: SpaceTimeAccumulator,
}

impl IntegralSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Seed the totals from an interrupted run's last diagnostics row.
    pub(crate) fn from_seed(seed: &ResumeSeed) -> Result<Self> {
        Ok(IntegralSet {
            u_l4_4: SpaceTimeAccumulator::with_total(seed.int_u_l4_4)?,
            grad_d_l4_4: SpaceTimeAccumulator::with_total(seed.int_grad_d_l4_4)?,
            lap_d_sq: SpaceTimeAccumulator::with_total(seed.int_lap_d_sq)?,
            grad_d_sq: SpaceTimeAccumulator::with_total(seed.int_grad_d_sq)?,
            diss: SpaceTimeAccumulator::with_total(seed.int_d)?,
        })
    }

    /// One left-endpoint quadrature panel: integrands evaluated at the state
    /// the step departed from.
    pub fn add(&mut self, dt: f64, ig: &Integrands) -> Result<()> {
        self.u_l4_4.add(dt, ig.u_l4_4)?;
        self.grad_d_l4_4.add(dt, ig.grad_d_l4_4)?;
        self.lap_d_sq.add(dt, ig.lap_d_sq)?;
        self.grad_d_sq.add(dt, ig.grad_d_sq)?;
        self.diss.add(dt, ig.dissipation())?;
        Ok(())
    }

    pub fn int_u_l4_4(&self) -> f64 {
        self.u_l4_4.total()
    }

    pub fn int_grad_d_l4_4(&self) -> f64 {
        self.grad_d_l4_4.total()
    }

    pub fn int_lap_d_sq(&self) -> f64 {
        self.lap_d_sq.total()
    }

    pub fn int_grad_d_sq(&self) -> f64 {
        self.grad_d_sq.total()
    }

    pub fn int_d(&self) -> f64 {
        self.diss.total()
    }
}

/// Instantaneous field quantities of one state, full spectral precision.
struct Instant {
    e: f64,
    grad_u_sq: f64,
    tension_sq: f64,
    grad_d_sq: f64,
    grad_d_l4_4: f64,
    lap_d_sq: f64,
    inf_d3: f64,
    d_minus_e3_sq: f64,
    u_l4_4: f64,
}

fn measure(state: &SimState) -> Instant {
    let u = state.u();
    let d = state.d();
    let grid = state.grid();
    let h2 = grid.h() * grid.h();

    // Velocity: L^2 and L^4 from samples, gradient via Parseval.
    let (a, b) = (u.comp(0).data(), u.comp(1).data());
    let mut u_sq = 0.0;
    let mut u_4 = 0.0;
    for k in 0..a.len() {
        let m2 = a[k] * a[k] + b[k] * b[k];
        u_sq += m2;
        u_4 += m2 * m2;
    }
    u_sq *= h2;
    u_4 *= h2;
    let grad_u_sq = if u_sq == 0.0 {
        0.0
    } else {
        let (c1, c2) = to_spectral_pair(u.comp(0), u.comp(1));
        weighted_l2_sq(&c1, |xisq| xisq) + weighted_l2_sq(&c2, |xisq| xisq)
    };

    // Director: one derivative evaluation feeds every remaining quantity.
    let derivs = director::derivatives(d);
    let grad_l2 = norms::lp_norm_multi(&derivs.partials(), 2.0).expect("p = 2 is valid");
    let grad_l4 = norms::lp_norm_multi(&derivs.partials(), 4.0).expect("p = 4 is valid");
    let lap_l2 = norms::lp_norm_multi(&derivs.laplacians(), 2.0).expect("p = 2 is valid");
    let tension = director::tension_from(&derivs, d);
    let tension_l2 = tension.l2_norm();

    let (d1, d2, d3) = (d.comp(0).data(), d.comp(1).data(), d.comp(2).data());
    let mut dist = 0.0;
    for k in 0..d1.len() {
        let z = d3[k] - 1.0;
        dist += d1[k] * d1[k] + d2[k] * d2[k] + z * z;
    }
    dist *= h2;

    Instant {
        e: 0.5 * (u_sq + grad_l2 * grad_l2),
        grad_u_sq,
        tension_sq: tension_l2 * tension_l2,
        grad_d_sq: grad_l2 * grad_l2,
        grad_d_l4_4: grad_l4.powi(4),
        lap_d_sq: lap_l2 * lap_l2,
        inf_d3: d.min_d3(),
        d_minus_e3_sq: dist,
        u_l4_4: u_4,
    }
}

/// Build a row from a state and the runner's integral accumulators.
/// `e0 = None` marks the baseline row: its residual is zero by definition.
pub(crate) fn assemble(state: &SimState, ints: &IntegralSet, e0: Option<f64>) -> DiagnosticsRecord {
    let m = measure(state);
    let int_d = ints.int_d();
    let e0 = e0.unwrap_or(m.e + int_d);
    DiagnosticsRecord {
        t: state.t(),
        e: m.e,
        grad_u_sq: m.grad_u_sq,
        tension_sq: m.tension_sq,
        grad_d_l4_4: m.grad_d_l4_4,
        lap_d_sq: m.lap_d_sq,
        inf_d3: m.inf_d3,
        d_minus_e3_sq: m.d_minus_e3_sq,
        int_u_l4_4: ints.int_u_l4_4(),
        int_grad_d_l4_4: ints.int_grad_d_l4_4(),
        int_lap_d_sq: ints.int_lap_d_sq(),
        int_grad_d_sq: ints.int_grad_d_sq(),
        int_d,
        energy_residual: m.e + int_d - e0,
        u_l4_4: m.u_l4_4,
    }
}

/// Standalone row assembly: all instantaneous fields from the state, with
/// the running integrals of `prev` extended by one quadrature panel of
/// width `dt_last` using this state's integrand values. With `prev = None`
/// the row is the baseline (integrals and residual zero). The runner itself
/// integrates per step at the departing state instead; this form is for
/// post-hoc construction at record cadence.
pub fn record(
    state: &SimState,
    dt_last: f64,
    prev: Option<&DiagnosticsRecord>,
) -> DiagnosticsRecord {
    let m = measure(state);
    let diss = m.grad_u_sq + m.tension_sq;
    let (int_u, int_g4, int_lap, int_g2, int_d, e0) = match prev {
        None => (0.0, 0.0, 0.0, 0.0, 0.0, m.e),
        Some(p) => (
            p.int_u_l4_4 + dt_last * m.u_l4_4,
            p.int_grad_d_l4_4 + dt_last * m.grad_d_l4_4,
            p.int_lap_d_sq + dt_last * m.lap_d_sq,
            p.int_grad_d_sq + dt_last * m.grad_d_sq,
            p.int_d + dt_last * diss,
            p.e + p.int_d - p.energy_residual,
        ),
    };
    DiagnosticsRecord {
        t: state.t(),
        e: m.e,
        grad_u_sq: m.grad_u_sq,
        tension_sq: m.tension_sq,
        grad_d_l4_4: m.grad_d_l4_4,
        lap_d_sq: m.lap_d_sq,
        inf_d3: m.inf_d3,
        d_minus_e3_sq: m.d_minus_e3_sq,
        int_u_l4_4: int_u,
        int_grad_d_l4_4: int_g4,
        int_lap_d_sq: int_lap,
        int_grad_d_sq: int_g2,
        int_d,
        energy_residual: m.e + int_d - e0,
        u_l4_4: m.u_l4_4,
    }
}

/// Drift allowance for the discrete maximum principle; the continuum
/// statement is exact but the splitting scheme is not monotone.
pub const TOL_MP: f64 = 1e-4;

#[derive(Debug, Clone, Copy)]
pub struct MaxPrincipleReport {
    /// False when the initial field leaves the open upper hemisphere; the
    /// principle then says nothing and `holds` is reported vacuously true.
    pub applicable: bool,
    pub initial: f64,
    pub worst: f64,
    pub holds: bool,
}

/// Check that inf_x d_3 never falls below its initial value (minus the
/// scheme drift allowance) when it starts positive.
pub fn max_principle_check(records: &[DiagnosticsRecord]) -> MaxPrincipleReport {
    let initial = records.first().map_or(0.0, |r| r.inf_d3);
    let worst = records
        .iter()
        .map(|r| r.inf_d3)
        .fold(f64::INFINITY, f64::min);
    let applicable = initial > 0.0;
    MaxPrincipleReport {
        applicable,
        initial,
        worst: if worst.is_finite() { worst } else { initial },
        holds: !applicable || worst >= initial - TOL_MP,
    }
}

/// Multiplicative headroom in the Gronwall comparison, fixed against the
/// acceptance corpus.
pub const GRONWALL_CONSTANT: f64 = 2.0;

#[derive(Debug, Clone, Copy)]
pub struct GronwallReport {
    /// max over records of lhs/rhs; 0/0 counts as 0.
    pub max_ratio: f64,
    pub t_at: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub c_g: f64,
}

/// Compare ||d(t) - e3||_2^2 + int ||grad d||_2^2 against
/// c_g * ||d(0) - e3||_2^2 * exp(int ||Lap d||_2^2) row by row.
pub fn gronwall_check(records: &[DiagnosticsRecord], c_g: f64) -> GronwallReport {
    let base = records.first().map_or(0.0, |r| r.d_minus_e3_sq);
    let mut report = GronwallReport {
        max_ratio: 0.0,
        t_at: records.first().map_or(0.0, |r| r.t),
        lhs: 0.0,
        rhs: 0.0,
        c_g,
    };
    for r in records {
        let lhs = r.d_minus_e3_sq + r.int_grad_d_sq;
        let rhs = c_g * base * r.int_lap_d_sq.exp();
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.t_at = r.t;
            report.lhs = lhs;
            report.rhs = rhs;
        }
    }
    report
}

/// Fraction of the run (in time) treated as the plateau window.
pub const PLATEAU_WINDOW: f64 = 0.2;
/// Largest relative growth of a running integral over the window that still
/// counts as a plateau.
pub const PLATEAU_TOL: f64 = 0.01;
/// sup |grad d| growth factor separating tame runs from blowup-like ones.
pub const GROWTH_FACTOR_LIMIT: f64 = 1e3;

#[derive(Debug, Clone, Copy)]
pub struct BlowupReport {
    pub int_grad_d_l4_4: f64,
    pub int_u_l4_4: f64,
    pub growth_factor: f64,
    pub plateau_grad: bool,
    pub plateau_u: bool,
    /// True when both integrals plateau and the gradient growth stays tame:
    /// the discrete signature of a flow that continues past the horizon.
    pub global_like: bool,
}

fn plateaued(records: &[DiagnosticsRecord], pick: impl Fn(&DiagnosticsRecord) -> f64) -> bool {
    let (first, last) = match (records.first(), records.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return true,
    };
    let total = pick(last);
    if total <= 1e-12 {
        return true;
    }
    let cutoff = last.t - PLATEAU_WINDOW * (last.t - first.t);
    let base = records
        .iter()
        .rev()
        .find(|r| r.t <= cutoff)
        .map_or_else(|| pick(first), &pick);
    (total - base) / total < PLATEAU_TOL
}

/// Aggregate the non-blowup indicators over a finished run.
pub fn blowup_monitor(traj: &Trajectory) -> BlowupReport {
    blowup_monitor_from(&traj.records, traj.grad_sup_initial, traj.grad_sup_max)
}

/// Same, from raw records plus the gradient sup extrema tracked per step.
pub fn blowup_monitor_from(
    records: &[DiagnosticsRecord],
    grad_sup_initial: f64,
    grad_sup_max: f64,
) -> BlowupReport {
    let plateau_grad = plateaued(records, |r| r.int_grad_d_l4_4);
    let plateau_u = plateaued(records, |r| r.int_u_l4_4);
    let growth_factor = if grad_sup_initial > 0.0 {
        grad_sup_max / grad_sup_initial
    } else if grad_sup_max <= 1e-12 {
        1.0
    } else {
        f64::INFINITY
    };
    BlowupReport {
        int_grad_d_l4_4: records.last().map_or(0.0, |r| r.int_grad_d_l4_4),
        int_u_l4_4: records.last().map_or(0.0, |r| r.int_u_l4_4),
        growth_factor,
        plateau_grad,
        plateau_u,
        global_like: plateau_grad && plateau_u && growth_factor < GROWTH_FACTOR_LIMIT,
    }
}

/// Laplacian floor below which the coercivity ratio is left undefined.
pub const TRACK_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct CoercivityTrackReport {
    /// min over usable records of 1 - ||grad d||_4^4 / ||Lap d||_2^2;
    /// `None` when every record was degenerate.
    pub min_gap: Option<f64>,
    pub records_used: usize,
    pub min_inf_d3: f64,
    /// Whether the flow stayed at or above the hemisphere floor it started
    /// from, up to the scheme drift allowance.
    pub angle_floor_held: bool,
}

/// Empirical coercivity gap along a flow, from the recorded norm columns.
pub fn coercivity_tracker(
    records: &[DiagnosticsRecord],
    epsilon0: f64,
) -> Result<CoercivityTrackReport> {
    if !(epsilon0 > 0.0 && epsilon0 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon0 must lie in (0,1), got {epsilon0}"
        )));
    }
    let mut min_gap: Option<f64> = None;
    let mut used = 0usize;
    let mut min_inf = f64::INFINITY;
    for r in records {
        min_inf = min_inf.min(r.inf_d3);
        if r.lap_d_sq <= TRACK_FLOOR {
            continue;
        }
        let gap = 1.0 - r.grad_d_l4_4 / r.lap_d_sq;
        min_gap = Some(match min_gap {
            Some(g) => g.min(gap),
            None => gap,
        });
        used += 1;
    }
    Ok(CoercivityTrackReport {
        min_gap,
        records_used: used,
        min_inf_d3: if min_inf.is_finite() { min_inf } else { 0.0 },
        angle_floor_held: min_inf.is_finite() && min_inf >= epsilon0 - TOL_MP,
    })
}
