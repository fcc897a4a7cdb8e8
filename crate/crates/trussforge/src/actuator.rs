//! The member-module abstraction: a speed-limited linear actuator with a
//! PWM dead zone, closed around a loadcell by a PI force controller.
//!
//! The drive is modelled as a velocity source (the geared motor is slow
//! enough that inertia never matters at quasi-static time scales). The
//! friction-drive dead zone sits on the PWM input: below the break-away
//! threshold nothing moves, above it the winding speed grows linearly
//! from zero. Positive drive output *retracts* the member — the polarity
//! that makes positive force error (too little tension) wind the member
//! in and raise tension.

use serde::{Deserialize, Serialize};

/// Physical parameters of one member module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorModel {
    /// Shortest reachable length, m.
    pub l_min_m: f64,
    /// Longest reachable length, m.
    pub l_max_m: f64,
    /// Winding speed limit, m/s.
    pub v_max_m_per_s: f64,
    /// PWM dead-zone threshold, fraction of full scale.
    pub dead_zone_pwm: f64,
    /// Winding speed per unit PWM beyond the dead zone, m/s.
    pub velocity_gain_m_per_s: f64,
    /// Axial force magnitude limit, N.
    pub force_limit_n: f64,
    /// Effective axial stiffness the member works against when loaded, N/m.
    pub axial_stiffness_n_per_m: f64,
    /// Loadcell noise standard deviation, N.
    pub loadcell_noise_sd_n: f64,
}

impl Default for ActuatorModel {
    fn default() -> Self {
        Self {
            l_min_m: 0.3,
            l_max_m: 2.5,
            v_max_m_per_s: 0.03,
            dead_zone_pwm: 0.08,
            velocity_gain_m_per_s: 0.05,
            force_limit_n: 200.0,
            axial_stiffness_n_per_m: 2.0e4,
            loadcell_noise_sd_n: 0.2,
        }
    }
}

impl ActuatorModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.l_min_m > 0.0 && self.l_min_m < self.l_max_m) {
            return Err(format!(
                "length limits must satisfy 0 < l_min < l_max, got [{}, {}]",
                self.l_min_m, self.l_max_m
            ));
        }
        if self.v_max_m_per_s <= 0.0 {
            return Err("v_max must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dead_zone_pwm) {
            return Err(format!("dead zone {} outside [0, 1)", self.dead_zone_pwm));
        }
        if self.axial_stiffness_n_per_m <= 0.0 {
            return Err("axial stiffness must be positive".into());
        }
        if self.loadcell_noise_sd_n < 0.0 {
            return Err("noise standard deviation must be non-negative".into());
        }
        Ok(())
    }
}

/// Gains of the per-member PI force loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiGains {
    /// Proportional gain, PWM per N of force error.
    pub k_p_pwm_per_n: f64,
    /// Integral gain, PWM per (N·s).
    pub k_i_pwm_per_n_s: f64,
    /// Anti-windup clamp on the integrator, PWM units.
    pub integrator_limit_pwm: f64,
}

impl Default for PiGains {
    fn default() -> Self {
        Self {
            k_p_pwm_per_n: 0.005,
            k_i_pwm_per_n_s: 0.02,
            integrator_limit_pwm: 0.6,
        }
    }
}

impl PiGains {
    pub fn validate(&self) -> Result<(), String> {
        if self.k_p_pwm_per_n < 0.0 || self.k_i_pwm_per_n_s < 0.0 {
            return Err("PI gains must be non-negative".into());
        }
        if self.integrator_limit_pwm <= 0.0 {
            return Err("integrator limit must be positive".into());
        }
        Ok(())
    }
}

/// Runtime state of one member module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorState {
    /// Wound length of the drive, m.
    pub length: f64,
    /// Latest loadcell reading, N, tension positive.
    pub measured_force: f64,
    /// PI integrator, PWM units.
    pub integrator: f64,
    /// Latest force command, N.
    pub commanded_force: f64,
}

impl ActuatorState {
    pub fn at_length(length: f64) -> Self {
        Self {
            length,
            measured_force: 0.0,
            integrator: 0.0,
            commanded_force: 0.0,
        }
    }
}

/// What the member is mechanically working against, reduced to the axis.
///
/// The contexts cover the bench configurations a lone module sees; inside
/// a full truss the world model supplies the loadcell readings instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadContext {
    /// Nothing resists: the loadcell reads zero (plus noise).
    Free,
    /// Clamped between rigid mounts separated by `span` metres.
    RigidFixture { span: f64 },
    /// Mounts with their own compliance `stiffness` (N/m) at a relaxed
    /// separation of `span` metres; the member's axial stiffness acts in
    /// series with it.
    Compliant { span: f64, stiffness: f64 },
}

impl LoadContext {
    /// Loadcell reading for a drive wound to `length`, tension positive.
    pub fn measured_force(&self, length: f64, model: &ActuatorModel) -> f64 {
        match *self {
            LoadContext::Free => 0.0,
            LoadContext::RigidFixture { span } => {
                model.axial_stiffness_n_per_m * (span - length)
            }
            LoadContext::Compliant { span, stiffness } => {
                let k_ax = model.axial_stiffness_n_per_m;
                let series = k_ax * stiffness / (k_ax + stiffness);
                series * (span - length)
            }
        }
    }
}

/// One PI update: advances the integrator in `state` and returns the PWM
/// command `u = clamp(k_P e + ∫, −1, 1)` for error `e = λ_cmd − λ_curr`.
pub fn pi_step(state: &mut ActuatorState, commanded_force: f64, dt: f64, gains: &PiGains) -> f64 {
    debug_assert!(dt > 0.0);
    state.commanded_force = commanded_force;
    let error = commanded_force - state.measured_force;
    let limit = gains.integrator_limit_pwm;
    state.integrator = (state.integrator + gains.k_i_pwm_per_n_s * error * dt).clamp(-limit, limit);
    (gains.k_p_pwm_per_n * error + state.integrator).clamp(-1.0, 1.0)
}

/// Dead-zone map from PWM to winding speed: zero inside the break-away
/// band, then linear in the excess, clamped to the speed limit.
pub fn dead_zone(u: f64, model: &ActuatorModel) -> f64 {
    let excess = u.abs() - model.dead_zone_pwm;
    if excess <= 0.0 {
        return 0.0;
    }
    (model.velocity_gain_m_per_s * excess).min(model.v_max_m_per_s) * u.signum()
}

/// Result of one actuator step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: ActuatorState,
    /// The length limit stopped the drive this step. Informational.
    pub limit_saturated: bool,
}

/// Advance one member module by `dt` against `context`, updating the
/// loadcell reading with `noise` newtons added (pass 0 for an ideal
/// loadcell; the caller owns the RNG so runs stay reproducible).
pub fn actuator_step(
    state: &ActuatorState,
    commanded_force: f64,
    dt: f64,
    model: &ActuatorModel,
    gains: &PiGains,
    context: &LoadContext,
    noise: f64,
) -> StepOutcome {
    let mut next = *state;
    let u = pi_step(&mut next, commanded_force, dt, gains);
    let speed = dead_zone(u, model);
    // Positive drive retracts: tension rises when the member winds in.
    let target = next.length - speed * dt;
    let clamped = target.clamp(model.l_min_m, model.l_max_m);
    let limit_saturated = clamped != target;
    next.length = clamped;
    next.measured_force = context.measured_force(next.length, model) + noise;
    StepOutcome {
        state: next,
        limit_saturated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model() -> ActuatorModel {
        ActuatorModel::default()
    }

    #[test]
    fn pi_zero_error_zero_output() {
        let mut state = ActuatorState::at_length(1.0);
        state.measured_force = 25.0;
        let u = pi_step(&mut state, 25.0, 0.01, &PiGains::default());
        assert_eq!(u, 0.0);
        assert_eq!(state.integrator, 0.0);
    }

    #[test]
    fn pi_pure_proportional() {
        let gains = PiGains {
            k_p_pwm_per_n: 0.01,
            k_i_pwm_per_n_s: 0.0,
            integrator_limit_pwm: 1.0,
        };
        let mut state = ActuatorState::at_length(1.0);
        let u = pi_step(&mut state, 50.0, 0.01, &gains);
        assert_relative_eq!(u, 0.5);
    }

    #[test]
    fn pi_integral_accumulation() {
        let gains = PiGains {
            k_p_pwm_per_n: 0.0,
            k_i_pwm_per_n_s: 0.01,
            integrator_limit_pwm: 1.0,
        };
        let mut state = ActuatorState::at_length(1.0);
        let mut u = 0.0;
        for _ in 0..100 {
            state.measured_force = 0.0;
            u = pi_step(&mut state, 10.0, 0.01, &gains);
        }
        assert_relative_eq!(u, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn pi_output_saturates_at_full_scale() {
        let mut state = ActuatorState::at_length(1.0);
        let u = pi_step(&mut state, 1e6, 0.01, &PiGains::default());
        assert_eq!(u, 1.0);
    }

    #[test]
    fn dead_zone_inside_band_is_zero() {
        let m = model();
        assert_eq!(dead_zone(0.5 * m.dead_zone_pwm, &m), 0.0);
        assert_eq!(dead_zone(m.dead_zone_pwm, &m), 0.0);
        assert_eq!(dead_zone(-m.dead_zone_pwm, &m), 0.0);
    }

    #[test]
    fn dead_zone_linear_beyond_band() {
        let m = ActuatorModel {
            dead_zone_pwm: 0.1,
            velocity_gain_m_per_s: 0.1,
            v_max_m_per_s: 1.0,
            ..model()
        };
        assert_relative_eq!(dead_zone(0.6, &m), 0.05);
        assert_relative_eq!(dead_zone(-0.6, &m), -0.05);
    }

    #[test]
    fn dead_zone_clamps_to_speed_limit() {
        let m = ActuatorModel {
            dead_zone_pwm: 0.0,
            velocity_gain_m_per_s: 10.0,
            v_max_m_per_s: 0.03,
            ..model()
        };
        assert_relative_eq!(dead_zone(1.0, &m), 0.03);
    }

    #[test]
    fn matched_command_leaves_state_unchanged() {
        let m = model();
        let ctx = LoadContext::RigidFixture { span: 1.0 };
        let mut state = ActuatorState::at_length(1.0);
        state.measured_force = ctx.measured_force(1.0, &m);
        let out = actuator_step(&state, state.measured_force, 0.01, &m, &PiGains::default(), &ctx, 0.0);
        assert_eq!(out.state.length, state.length);
        assert_eq!(out.state.measured_force, state.measured_force);
        assert!(!out.limit_saturated);
    }

    #[test]
    fn length_never_exits_limits() {
        let m = model();
        let gains = PiGains::default();
        let mut state = ActuatorState::at_length(m.l_min_m + 0.01);
        let ctx = LoadContext::Free;
        let mut saturated = false;
        for _ in 0..10_000 {
            let out = actuator_step(&state, 150.0, 0.01, &m, &gains, &ctx, 0.0);
            state = out.state;
            saturated |= out.limit_saturated;
            assert!(state.length >= m.l_min_m && state.length <= m.l_max_m);
        }
        // Free context never develops force, so the drive winds to the stop.
        assert!(saturated);
        assert_eq!(state.length, m.l_min_m);
    }

    /// Drive a module against a context until the ramp-and-hold command
    /// completes; returns the force trace sampled every step.
    fn run_ramp(
        target: f64,
        rate: f64,
        hold: f64,
        m: &ActuatorModel,
        gains: &PiGains,
        ctx: &LoadContext,
    ) -> Vec<f64> {
        let dt = 0.01;
        let ramp_time = target.abs() / rate;
        let steps = ((ramp_time + hold) / dt).round() as usize;
        let mut state = ActuatorState::at_length(1.0);
        state.measured_force = ctx.measured_force(state.length, m);
        let mut trace = Vec::with_capacity(steps);
        for i in 0..steps {
            let t = i as f64 * dt;
            let cmd = if t < ramp_time {
                target.signum() * rate * t
            } else {
                target
            };
            state = actuator_step(&state, cmd, dt, m, gains, ctx, 0.0).state;
            trace.push(state.measured_force);
        }
        trace
    }

    #[test]
    fn ramp_to_50_newton_holds_within_5_percent() {
        let m = model();
        let gains = PiGains::default();
        let ctx = LoadContext::RigidFixture { span: 1.0 };
        let trace = run_ramp(50.0, 10.0, 5.0, &m, &gains, &ctx);
        // Assess the second half of the hold phase.
        let hold = &trace[trace.len() - 250..];
        let mean_err: f64 =
            hold.iter().map(|f| (f - 50.0).abs()).sum::<f64>() / hold.len() as f64;
        assert!(
            mean_err < 0.05 * 50.0,
            "holding error {mean_err:.3} N exceeds 5% of 50 N"
        );
    }

    #[test]
    fn low_force_ramp_shows_dead_zone_steps() {
        let m = model();
        let gains = PiGains::default();
        let ctx = LoadContext::RigidFixture { span: 1.0 };
        let trace = run_ramp(10.0, 10.0, 2.0, &m, &gains, &ctx);
        let ramp_steps: usize = 100; // 1 s ramp at 10 N/s
        // Look for a window where the force barely moves while the
        // command keeps ramping.
        let window = 20;
        let mut found = false;
        for start in 0..ramp_steps.saturating_sub(window) {
            let seg = &trace[start..start + window];
            let lo = seg.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = seg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo < 0.2 {
                found = true;
                break;
            }
        }
        assert!(found, "no flat dead-zone interval during the low-force ramp");
    }

    #[test]
    fn constant_command_converges_and_stays_bounded() {
        let m = model();
        let gains = PiGains::default();
        for &(cmd, stiffness) in
            &[(30.0, 5.0e4), (-80.0, 5.0e4), (150.0, 1.0e4), (10.0, 2.0e5)]
        {
            let ctx = LoadContext::Compliant {
                span: 1.0,
                stiffness,
            };
            let mut state = ActuatorState::at_length(1.0);
            state.measured_force = ctx.measured_force(state.length, &m);
            let mut tail_max: f64 = 0.0;
            for i in 0..6000 {
                state = actuator_step(&state, cmd, 0.01, &m, &gains, &ctx, 0.0).state;
                if i >= 4500 {
                    tail_max = tail_max.max((state.measured_force - cmd).abs());
                }
            }
            let band = (0.05 * cmd.abs()).max(1.0);
            assert!(
                tail_max <= band,
                "command {cmd} N against {stiffness} N/m: tail error {tail_max:.3} N > band {band:.3} N"
            );
        }
    }

    proptest! {
        #[test]
        fn dead_zone_is_monotone(u1 in -1.0..1.0f64, u2 in -1.0..1.0f64) {
            let m = model();
            let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
            prop_assert!(dead_zone(lo, &m) <= dead_zone(hi, &m) + 1e-15);
        }

        #[test]
        fn integrator_never_exceeds_limit(cmds in proptest::collection::vec(-500.0..500.0f64, 200)) {
            let gains = PiGains::default();
            let m = model();
            let ctx = LoadContext::Compliant { span: 1.0, stiffness: 3.0e4 };
            let mut state = ActuatorState::at_length(1.0);
            state.measured_force = ctx.measured_force(state.length, &m);
            for cmd in cmds {
                state = actuator_step(&state, cmd, 0.01, &m, &gains, &ctx, 0.0).state;
                prop_assert!(state.integrator.abs() <= gains.integrator_limit_pwm + 1e-15);
            }
        }
    }
}
