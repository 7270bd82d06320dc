// Plain-text run configuration: one `key = value` pair per line, '#' starts
// a comment, keys are dotted paths (grid.n = 128). Unknown keys and
// duplicate keys are hard errors; omitted optional keys take the defaults
// documented on the fields below.

use std::path::PathBuf;
use std::str::FromStr;

use crate::dynamics::{RunParams, SimState, StepPolicy, System};
use crate::error::{Error, Result};
use crate::field::{DirectorField, Grid2D, VectorField2, TOL_EVOLVE};
use crate::scenarios::{self, RadialProfile};

/// Initial director selection. Parameters mirror the generator arguments in
/// `scenarios`; see the key table in [`parse_config`].
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// d ≡ e₃ everywhere.
    Constant,
    /// Seeded band-limited perturbation of e₃ confined to d₃ ≥ ε₀.
    Hemisphere {
        epsilon0: f64,
        max_mode: i64,
        amplitude: f64,
        seed: u64,
    },
    /// Equivariant map with prescribed profile-angle supremum.
    Radial {
        sup_psi: f64,
        width: f64,
        r_cut: f64,
        center: (f64, f64),
    },
    /// Harmonic equator map of winding number m.
    Equator { m: i64 },
    /// Degree-one inverse-stereographic bubble of the given scale.
    Bubble { scale: f64, center: (f64, f64) },
}

/// Initial velocity selection.
#[derive(Debug, Clone, PartialEq)]
pub enum VelocityInit {
    Zero,
    /// Seeded band-limited stream-function field with ½‖u‖₂² = energy.
    Random { seed: u64, max_mode: i64, energy: f64 },
    /// Taylor–Green vortex with ½‖u‖₂² = energy.
    TaylorGreen { energy: f64 },
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub system: System,
    pub grid: Grid2D,
    /// Final simulated time; runs start at t = 0.
    pub t_end: f64,
    pub scenario: Scenario,
    pub velocity: VelocityInit,
    pub policy: StepPolicy,
    /// Diagnostics cadence (default t_end / 100).
    pub record_interval: f64,
    /// Snapshot cadence; `None` keeps only the final state (default).
    pub snapshot_interval: Option<f64>,
    /// Where the CLI writes diagnostics and snapshots (default "out").
    pub output_dir: PathBuf,
    /// Unit-norm drift treated as blowup (default 1e-6).
    pub tol_evolve: f64,
}

// ---------------------------------------------------------------------------
// raw key=value layer

struct Entry {
    key: String,
    value: String,
    line: usize,
    used: bool,
}

struct RawConfig {
    entries: Vec<Entry>,
}

fn missing(key: &str) -> Error {
    Error::ValidationError(format!("missing required key '{key}'"))
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<Entry> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let body = match raw_line.find('#') {
                Some(p) => &raw_line[..p],
                None => raw_line,
            };
            let body = body.trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(Error::ParseError {
                    line,
                    msg: format!("expected 'key = value', got '{body}'"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '_')
            {
                return Err(Error::ParseError {
                    line,
                    msg: format!("malformed key '{key}'"),
                });
            }
            if value.is_empty() {
                return Err(Error::ParseError {
                    line,
                    msg: format!("missing value for key '{key}'"),
                });
            }
            if let Some(prev) = entries.iter().find(|e| e.key == key) {
                return Err(Error::ParseError {
                    line,
                    msg: format!("duplicate key '{key}' already set at line {}", prev.line),
                });
            }
            entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line,
                used: false,
            });
        }
        Ok(RawConfig { entries })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.iter_mut().find(|e| e.key == key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn num<T: FromStr>(&mut self, key: &str, want: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|_| Error::ParseError {
                line,
                msg: format!("value '{v}' for key '{key}' is not {want}"),
            }),
        }
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.num(key, "a number")
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn req_f64(&mut self, key: &str) -> Result<f64> {
        self.f64(key)?.ok_or_else(|| missing(key))
    }

    fn i64_or(&mut self, key: &str, default: i64) -> Result<i64> {
        Ok(self.num(key, "an integer")?.unwrap_or(default))
    }

    fn u64_or(&mut self, key: &str, default: u64) -> Result<u64> {
        Ok(self.num(key, "a nonnegative integer")?.unwrap_or(default))
    }

    fn req_usize(&mut self, key: &str) -> Result<usize> {
        self.num(key, "a nonnegative integer")?
            .ok_or_else(|| missing(key))
    }

    fn str_or(&mut self, key: &str, default: &str) -> String {
        self.take(key)
            .map(|(v, _)| v)
            .unwrap_or_else(|| default.to_string())
    }

    fn req_str(&mut self, key: &str) -> Result<String> {
        self.take(key).map(|(v, _)| v).ok_or_else(|| missing(key))
    }

    fn finish(&self) -> Result<()> {
        match self.entries.iter().find(|e| !e.used) {
            Some(e) => Err(Error::ValidationError(format!(
                "unknown key '{}' (line {})",
                e.key, e.line
            ))),
            None => Ok(()),
        }
    }
}

// ---------------------------------------------------------------------------
// typed layer

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::ValidationError(format!(
            "{key} must be positive and finite, got {v}"
        )))
    }
}

fn nonnegative(key: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::ValidationError(format!(
            "{key} must be nonnegative and finite, got {v}"
        )))
    }
}

fn in_open_interval(key: &str, v: f64, lo: f64, hi: f64) -> Result<f64> {
    if v > lo && v < hi {
        Ok(v)
    } else {
        Err(Error::ValidationError(format!(
            "{key} must lie in ({lo}, {hi}), got {v}"
        )))
    }
}

/// Parse and validate a configuration.
///
/// Required keys: `system` (liquid_crystal | heat_flow), `grid.n` (power of
/// two ≥ 8), `grid.L` (> 0), `t_end` (> 0), `scenario.name`
/// (constant | hemisphere | radial | equator | bubble).
///
/// Scenario keys (only those for the selected scenario are accepted):
/// - hemisphere: `scenario.epsilon0` (0.5), `scenario.max_mode` (2),
///   `scenario.amplitude` (1.0), `scenario.seed` (7)
/// - radial: `scenario.sup_psi` (required), `scenario.width` (L/16),
///   `scenario.r_cut` (L/5), `scenario.center_x` / `scenario.center_y` (L/2)
/// - equator: `scenario.m` (1)
/// - bubble: `scenario.scale` (L/40), `scenario.center_x` /
///   `scenario.center_y` (L/2)
///
/// Velocity keys: `velocity.name` (zero | random | taylor_green; default
/// zero). random: `velocity.seed` (11), `velocity.max_mode` (1),
/// `velocity.energy` (1.0); taylor_green: `velocity.energy` (1.0).
/// `heat_flow` runs require the zero velocity.
///
/// Step keys: `step.mode` (fixed | cfl; default cfl). fixed: `step.dt`
/// (required). cfl: `step.cfl` (0.4), `step.nl_safety` (1.0). Both modes:
/// `step.dt_min` (0 = no floor), `step.dt_max` (unset = no cap).
///
/// Remaining keys: `record_interval` (t_end/100), `snapshot_interval`
/// (0 = final state only), `output.dir` ("out"), `tol.evolve` (1e-6).
pub fn parse_config(text: &str) -> Result<Config> {
    let mut raw = RawConfig::parse(text)?;

    let system = match raw.req_str("system")?.as_str() {
        "liquid_crystal" => System::LiquidCrystal,
        "heat_flow" => System::HeatFlow,
        other => {
            return Err(Error::ValidationError(format!(
                "system must be liquid_crystal or heat_flow, got '{other}'"
            )))
        }
    };

    let n = raw.req_usize("grid.n")?;
    if !(n.is_power_of_two() && n >= 8) {
        return Err(Error::ValidationError(format!(
            "grid.n = {n} is not a power of two at least 8"
        )));
    }
    let l = positive("grid.L", raw.req_f64("grid.L")?)?;
    let grid = Grid2D::new(n, l)?;

    let t_end = positive("t_end", raw.req_f64("t_end")?)?;

    let scenario = match raw.req_str("scenario.name")?.as_str() {
        "constant" => Scenario::Constant,
        "hemisphere" => {
            let epsilon0 =
                in_open_interval("scenario.epsilon0", raw.f64_or("scenario.epsilon0", 0.5)?, 0.0, 1.0)?;
            let max_mode = raw.i64_or("scenario.max_mode", 2)?;
            if max_mode < 1 {
                return Err(Error::ValidationError(format!(
                    "scenario.max_mode must be at least 1, got {max_mode}"
                )));
            }
            let amplitude =
                nonnegative("scenario.amplitude", raw.f64_or("scenario.amplitude", 1.0)?)?;
            let seed = raw.u64_or("scenario.seed", 7)?;
            Scenario::Hemisphere {
                epsilon0,
                max_mode,
                amplitude,
                seed,
            }
        }
        "radial" => parse_radial(&mut raw, l)?,
        "equator" => {
            let m = raw.i64_or("scenario.m", 1)?;
            if m == 0 {
                return Err(Error::ValidationError(
                    "scenario.m must be a nonzero winding number".into(),
                ));
            }
            Scenario::Equator { m }
        }
        "bubble" => {
            let scale = positive("scenario.scale", raw.f64_or("scenario.scale", l / 40.0)?)?;
            let cx = raw.f64_or("scenario.center_x", 0.5 * l)?;
            let cy = raw.f64_or("scenario.center_y", 0.5 * l)?;
            Scenario::Bubble {
                scale,
                center: (cx, cy),
            }
        }
        other => {
            return Err(Error::ValidationError(format!(
                "scenario.name '{other}' is not one of constant, hemisphere, radial, equator, bubble"
            )))
        }
    };

    let velocity = match raw.str_or("velocity.name", "zero").as_str() {
        "zero" => VelocityInit::Zero,
        "random" => {
            let seed = raw.u64_or("velocity.seed", 11)?;
            let max_mode = raw.i64_or("velocity.max_mode", 1)?;
            if max_mode < 1 {
                return Err(Error::ValidationError(format!(
                    "velocity.max_mode must be at least 1, got {max_mode}"
                )));
            }
            let energy = nonnegative("velocity.energy", raw.f64_or("velocity.energy", 1.0)?)?;
            VelocityInit::Random {
                seed,
                max_mode,
                energy,
            }
        }
        "taylor_green" => {
            let energy = nonnegative("velocity.energy", raw.f64_or("velocity.energy", 1.0)?)?;
            VelocityInit::TaylorGreen { energy }
        }
        other => {
            return Err(Error::ValidationError(format!(
                "velocity.name '{other}' is not one of zero, random, taylor_green"
            )))
        }
    };
    if system == System::HeatFlow && velocity != VelocityInit::Zero {
        return Err(Error::ValidationError(
            "velocity.name must be zero when system = heat_flow".into(),
        ));
    }

    let mut policy = match raw.str_or("step.mode", "cfl").as_str() {
        "cfl" => {
            let mut p = StepPolicy::cfl();
            p.cfl_number = raw.f64_or("step.cfl", p.cfl_number)?;
            p.nl_safety = raw.f64_or("step.nl_safety", p.nl_safety)?;
            p
        }
        "fixed" => StepPolicy::fixed(raw.req_f64("step.dt")?),
        other => {
            return Err(Error::ValidationError(format!(
                "step.mode '{other}' is not one of fixed, cfl"
            )))
        }
    };
    policy.dt_min = raw.f64_or("step.dt_min", 0.0)?;
    policy.dt_max = raw.f64("step.dt_max")?;
    policy
        .validate()
        .map_err(|e| Error::ValidationError(format!("step policy rejected: {e}")))?;

    let record_interval = positive(
        "record_interval",
        raw.f64_or("record_interval", t_end / 100.0)?,
    )?;
    let snap = nonnegative("snapshot_interval", raw.f64_or("snapshot_interval", 0.0)?)?;
    let snapshot_interval = (snap > 0.0).then_some(snap);
    let output_dir = PathBuf::from(raw.str_or("output.dir", "out"));
    let tol_evolve = positive("tol.evolve", raw.f64_or("tol.evolve", TOL_EVOLVE)?)?;

    raw.finish()?;

    Ok(Config {
        system,
        grid,
        t_end,
        scenario,
        velocity,
        policy,
        record_interval,
        snapshot_interval,
        output_dir,
        tol_evolve,
    })
}

fn parse_radial(raw: &mut RawConfig, l: f64) -> Result<Scenario> {
    let sup_psi = in_open_interval(
        "scenario.sup_psi",
        raw.req_f64("scenario.sup_psi")?,
        0.0,
        2.0 * std::f64::consts::PI,
    )?;
    let width = positive("scenario.width", raw.f64_or("scenario.width", l / 16.0)?)?;
    let r_cut = in_open_interval(
        "scenario.r_cut",
        raw.f64_or("scenario.r_cut", l / 5.0)?,
        0.0,
        0.5 * l,
    )?;
    let cx = raw.f64_or("scenario.center_x", 0.5 * l)?;
    let cy = raw.f64_or("scenario.center_y", 0.5 * l)?;
    Ok(Scenario::Radial {
        sup_psi,
        width,
        r_cut,
        center: (cx, cy),
    })
}

impl Config {
    /// Build the configured initial director.
    pub fn initial_director(&self) -> Result<DirectorField> {
        match &self.scenario {
            Scenario::Constant => Ok(DirectorField::constant_e3(self.grid)),
            Scenario::Hemisphere {
                epsilon0,
                max_mode,
                amplitude,
                seed,
            } => Ok(scenarios::hemisphere_random_data(
                *epsilon0, *max_mode, *amplitude, *seed, self.grid,
            )?
            .field),
            Scenario::Radial {
                sup_psi,
                width,
                r_cut,
                center,
            } => {
                let profile = RadialProfile::with_sup(*sup_psi, *width, *r_cut)?;
                scenarios::radial_data(&profile, *center, self.grid)
            }
            Scenario::Equator { m } => scenarios::equator_map(self.grid, *m),
            Scenario::Bubble { scale, center } => {
                Ok(scenarios::stereographic_bubble(*scale, *center, self.grid)?.field)
            }
        }
    }

    /// Build the configured initial velocity.
    pub fn initial_velocity(&self) -> Result<VectorField2> {
        match &self.velocity {
            VelocityInit::Zero => Ok(VectorField2::zeros(self.grid)),
            VelocityInit::Random {
                seed,
                max_mode,
                energy,
            } => scenarios::divergence_free_velocity(*seed, *max_mode, *energy, self.grid),
            VelocityInit::TaylorGreen { energy } => {
                scenarios::taylor_green_velocity(*energy, self.grid)
            }
        }
    }

    /// Build the full initial state at t = 0.
    pub fn initial_state(&self) -> Result<SimState> {
        SimState::new(0.0, self.initial_velocity()?, self.initial_director()?)
    }

    /// Assemble run parameters (fresh start, no resume seed).
    pub fn run_params(&self) -> Result<RunParams> {
        let mut params = RunParams::new(self.system, self.initial_state()?, self.t_end);
        params.policy = self.policy.clone();
        params.record_interval = self.record_interval;
        params.snapshot_interval = self.snapshot_interval;
        params.tol_evolve = self.tol_evolve;
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::StepMode;

    const MINIMAL: &str = "\
system = liquid_crystal
grid.n = 16
grid.L = 5
t_end = 2
scenario.name = constant
";

    #[test]
    fn minimal_config_applies_documented_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.system, System::LiquidCrystal);
        assert_eq!(c.grid.n(), 16);
        assert_eq!(c.grid.length(), 5.0);
        assert_eq!(c.t_end, 2.0);
        assert_eq!(c.scenario, Scenario::Constant);
        assert_eq!(c.velocity, VelocityInit::Zero);
        assert_eq!(c.policy.mode, StepMode::Cfl);
        assert_eq!(c.policy.cfl_number, 0.4);
        assert_eq!(c.policy.nl_safety, 1.0);
        assert_eq!(c.policy.dt_min, 0.0);
        assert_eq!(c.policy.dt_max, None);
        assert_eq!(c.record_interval, 0.02);
        assert_eq!(c.snapshot_interval, None);
        assert_eq!(c.output_dir, PathBuf::from("out"));
        assert_eq!(c.tol_evolve, 1e-6);

        let s = c.initial_state().unwrap();
        assert_eq!(s.u().max_magnitude(), 0.0);
        assert_eq!(s.d().min_d3(), 1.0);
        c.run_params().unwrap().validate().unwrap();
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "\
# full-line comment

system = liquid_crystal   # trailing comment
grid.n = 16
grid.L = 5
t_end = 2
scenario.name = constant
";
        let c = parse_config(text).unwrap();
        assert_eq!(c.grid.n(), 16);
    }

    #[test]
    fn non_power_of_two_grid_is_a_validation_error() {
        let text = MINIMAL.replace("grid.n = 16", "grid.n = 100");
        match parse_config(&text) {
            Err(Error::ValidationError(msg)) => {
                assert!(msg.contains("grid.n"), "{msg}");
                assert!(msg.contains("100"), "{msg}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let text = format!("{MINIMAL}grid.n = 32\n");
        match parse_config(&text) {
            Err(Error::ParseError { line, msg }) => {
                assert_eq!(line, 6);
                assert!(msg.contains("grid.n"), "{msg}");
                assert!(msg.contains("line 2"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected_with_its_line() {
        let text = format!("{MINIMAL}grid.m = 4\n");
        match parse_config(&text) {
            Err(Error::ValidationError(msg)) => {
                assert!(msg.contains("grid.m"), "{msg}");
                assert!(msg.contains("line 6"), "{msg}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn scenario_keys_for_another_scenario_are_unknown() {
        let text = format!("{MINIMAL}scenario.epsilon0 = 0.5\n");
        match parse_config(&text) {
            Err(Error::ValidationError(msg)) => {
                assert!(msg.contains("scenario.epsilon0"), "{msg}")
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn missing_required_key_is_named() {
        let text = MINIMAL.replace("t_end = 2\n", "");
        match parse_config(&text) {
            Err(Error::ValidationError(msg)) => assert!(msg.contains("t_end"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_lines_are_parse_errors() {
        match parse_config("system liquid_crystal\n") {
            Err(Error::ParseError { line: 1, .. }) => {}
            other => panic!("expected parse error at line 1, got {other:?}"),
        }
        let text = MINIMAL.replace("grid.n = 16", "grid.n = sixteen");
        match parse_config(&text) {
            Err(Error::ParseError { line: 2, msg }) => assert!(msg.contains("grid.n"), "{msg}"),
            other => panic!("expected parse error at line 2, got {other:?}"),
        }
        match parse_config("key =\n") {
            Err(Error::ParseError { line: 1, .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn heat_flow_rejects_nonzero_velocity() {
        let text = MINIMAL
            .replace("liquid_crystal", "heat_flow")
            .to_string()
            + "velocity.name = random\n";
        match parse_config(&text) {
            Err(Error::ValidationError(msg)) => assert!(msg.contains("velocity.name"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
        let ok = MINIMAL.replace("liquid_crystal", "heat_flow");
        parse_config(&ok).unwrap().run_params().unwrap().validate().unwrap();
    }

    #[test]
    fn fixed_mode_requires_a_step_size() {
        let text = format!("{MINIMAL}step.mode = fixed\n");
        match parse_config(&text) {
            Err(Error::ValidationError(msg)) => assert!(msg.contains("step.dt"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
        let text = format!("{MINIMAL}step.mode = fixed\nstep.dt = 1e-3\n");
        let c = parse_config(&text).unwrap();
        assert_eq!(c.policy.mode, StepMode::Fixed);
        assert_eq!(c.policy.dt_fixed, 1e-3);
    }

    #[test]
    fn every_scenario_builds_a_unit_initial_state() {
        let base = "\
system = liquid_crystal
grid.n = 32
grid.L = 6.283185307179586
t_end = 1
";
        let cases = [
            "scenario.name = hemisphere\nscenario.epsilon0 = 0.6\n",
            "scenario.name = radial\nscenario.sup_psi = 2.5\n",
            "scenario.name = equator\nscenario.m = 2\n",
            "scenario.name = bubble\nscenario.scale = 0.3\n",
        ];
        for extra in cases {
            let c = parse_config(&format!("{base}{extra}")).unwrap();
            let s = c.initial_state().unwrap();
            assert!(s.d().unit_error() <= 1e-12, "{extra}");
        }
    }

    #[test]
    fn taylor_green_velocity_is_configurable() {
        let text = format!(
            "{MINIMAL}velocity.name = taylor_green\nvelocity.energy = 0.25\n"
        );
        let c = parse_config(&text).unwrap();
        assert_eq!(c.velocity, VelocityInit::TaylorGreen { energy: 0.25 });
        let u = c.initial_velocity().unwrap();
        let e = {
            let n = crate::norms::lp_norm_multi(&[u.comp(0), u.comp(1)], 2.0).unwrap();
            0.5 * n * n
        };
        assert!((e - 0.25).abs() < 1e-13, "energy {e}");
    }

    #[test]
    fn out_of_range_scenario_parameters_name_the_key() {
        let text = MINIMAL.replace(
            "scenario.name = constant",
            "scenario.name = hemisphere\nscenario.epsilon0 = 1.5",
        );
        match parse_config(&text) {
            Err(Error::ValidationError(msg)) => {
                assert!(msg.contains("scenario.epsilon0"), "{msg}")
            }
            other => panic!("expected validation error, got {other:?}"),
        }
        let text = MINIMAL.replace(
            "scenario.name = constant",
            "scenario.name = radial\nscenario.sup_psi = 7.0",
        );
        match parse_config(&text) {
            Err(Error::ValidationError(msg)) => {
                assert!(msg.contains("scenario.sup_psi"), "{msg}")
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }
}
