//! Situational-aware adaptive gain: contact detection, operating-structure
//! estimation and the three-regime gain law.
//!
//! ```text
//!          | σ_high                               |F| < C
//! σ(t) =   | σ_contact                            C ≤ |F| < U
//!          | (σ_contact − σ_low)·e^(−η·X) + σ_low   |F| ≥ U
//! ```
//!
//! `U` is the activation threshold λ of the operating structure and `X` the
//! accumulated overforce since onset `t₀`: `∫ₜ₀ᵗ (|F| − U) dτ` (integral law)
//! or `(|F(t)| − U)(t − t₀)` (literal law).

use serde::{Deserialize, Serialize};

use crate::twin::{nearest_structure, StructureSpec, SAFETY_MARGIN};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SigmaLaw {
    #[default]
    Integral,
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerParams {
    pub enabled: bool,
    /// Gain applied when the controller is disabled.
    pub fixed_sigma: f64,
    pub sigma_high: f64,
    pub sigma_contact: f64,
    pub sigma_low: f64,
    /// N⁻¹·s⁻¹.
    pub eta: f64,
    /// Contact threshold C (N).
    pub contact_threshold: f64,
    /// Gap between activation threshold λ and the safety limit (N). Only
    /// metrics use it.
    pub activation_margin: f64,
    /// Contact is left below `C − hysteresis`.
    pub hysteresis: f64,
    /// Maximum |dσ/dt| (s⁻¹); no limit when absent.
    pub slew_limit: Option<f64>,
    pub sigma_law: SigmaLaw,
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams {
            enabled: true,
            fixed_sigma: 1.0,
            sigma_high: 1.7,
            sigma_contact: 0.7,
            sigma_low: 0.3,
            eta: 1.0,
            contact_threshold: 0.3,
            activation_margin: SAFETY_MARGIN,
            hysteresis: 0.05,
            slew_limit: None,
            sigma_law: SigmaLaw::Integral,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self, problems: &mut Vec<String>) {
        let p = |s: &str| format!("controller.{s}");
        if !(self.sigma_low > 0.0 && self.sigma_low < self.sigma_contact && self.sigma_contact < self.sigma_high) {
            problems.push(p("sigma_* must satisfy 0 < sigma_low < sigma_contact < sigma_high"));
        }
        if !self.sigma_high.is_finite() {
            problems.push(p("sigma_high must be finite"));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            problems.push(p(&format!("eta must be > 0, got {}", self.eta)));
        }
        if !(self.contact_threshold > 0.0) || !self.contact_threshold.is_finite() {
            problems.push(p(&format!(
                "contact_threshold must be > 0, got {}",
                self.contact_threshold
            )));
        }
        if !(self.hysteresis >= 0.0 && self.hysteresis < self.contact_threshold) {
            problems.push(p("hysteresis must be in [0, contact_threshold)"));
        }
        if !(self.activation_margin >= 0.0) {
            problems.push(p("activation_margin must be >= 0"));
        }
        if let Some(limit) = self.slew_limit {
            if !(limit > 0.0) {
                problems.push(p("slew_limit must be > 0 (omit it to disable)"));
            }
        }
        if !(self.fixed_sigma > 0.0) || !self.fixed_sigma.is_finite() {
            problems.push(p("fixed_sigma must be > 0"));
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    #[default]
    Free,
    Contact,
    Overforce,
}

impl Regime {
    pub fn code(self) -> u8 {
        match self {
            Regime::Free => 0,
            Regime::Contact => 1,
            Regime::Overforce => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Regime> {
        match c {
            0 => Some(Regime::Free),
            1 => Some(Regime::Contact),
            2 => Some(Regime::Overforce),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Free => "free",
            Regime::Contact => "contact",
            Regime::Overforce => "overforce",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerState {
    pub regime: Regime,
    /// Operating structure (label index).
    pub structure: Option<u8>,
    /// The structure came from the nearest-structure fallback.
    pub structure_fallback: bool,
    /// Adaptive gain before the enable switch.
    pub sigma: f64,
    pub t0: Option<f64>,
    pub excess_integral: f64,
    /// Active overforce threshold U (N).
    pub threshold: Option<f64>,
    last_excess: f64,
    last_t: Option<f64>,
}

impl ControllerState {
    pub fn new(params: &ControllerParams) -> Self {
        ControllerState {
            regime: Regime::Free,
            structure: None,
            structure_fallback: false,
            sigma: params.sigma_high,
            t0: None,
            excess_integral: 0.0,
            threshold: None,
            last_excess: 0.0,
            last_t: None,
        }
    }

    pub fn in_contact(&self) -> bool {
        self.regime != Regime::Free
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Regime {
        from: Regime,
        to: Regime,
    },
    Structure {
        from: Option<u8>,
        to: Option<u8>,
    },
    OverforceEnter,
    OverforceExit,
    /// In contact with no structure inside its proximity radius γ.
    FallbackStructure {
        structure: u8,
    },
    StaleForce,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
    pub regime: Regime,
    pub structure: Option<u8>,
    pub sigma: f64,
    pub force: f64,
    pub threshold: Option<f64>,
}

/// Contact flag with hysteresis: enter at `|F| ≥ C`, leave at `|F| < C − band`.
pub fn detect_contact(force: f64, was_in_contact: bool, params: &ControllerParams) -> bool {
    if was_in_contact {
        force >= params.contact_threshold - params.hysteresis
    } else {
        force >= params.contact_threshold
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StructureEstimate {
    /// Position in `specs`.
    pub pos: usize,
    pub index: u8,
    /// No structure was within its proximity radius.
    pub fallback: bool,
}

/// Nearest structure to the tip while in contact, ties going to critical
/// structures and then the lower index.
pub fn estimate_operating_structure(
    distances: &[f64],
    in_contact: bool,
    specs: &[StructureSpec],
) -> Result<Option<StructureEstimate>> {
    if distances.is_empty() || distances.len() != specs.len() {
        return Err(Error::Config(format!(
            "distance vector has {} entries for {} structures",
            distances.len(),
            specs.len()
        )));
    }
    if !in_contact {
        return Ok(None);
    }
    let Some(pos) = nearest_structure(distances, |i| (specs[i].critical, specs[i].index)) else {
        return Ok(None);
    };
    Ok(Some(StructureEstimate {
        pos,
        index: specs[pos].index,
        fallback: distances[pos] > specs[pos].gamma,
    }))
}

/// Overforce branch of the gain law for accumulated excess `x` (N·s).
pub fn overforce_sigma(x: f64, params: &ControllerParams) -> f64 {
    (params.sigma_contact - params.sigma_low) * (-params.eta * x).exp() + params.sigma_low
}

/// Gain for the current tick given the regime already decided by
/// [`step_controller`]'s bookkeeping (`state.excess_integral`, `state.t0`).
pub fn compute_gain_adjustment(force: f64, state: &ControllerState, t: f64, params: &ControllerParams) -> f64 {
    match state.regime {
        Regime::Free => params.sigma_high,
        Regime::Contact => params.sigma_contact,
        Regime::Overforce => {
            let u = state.threshold.unwrap_or(f64::INFINITY);
            let x = match params.sigma_law {
                SigmaLaw::Integral => state.excess_integral,
                SigmaLaw::Literal => ((force - u) * (t - state.t0.unwrap_or(t))).max(0.0),
            };
            overforce_sigma(x, params)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerInputs<'a> {
    pub t: f64,
    /// Estimated |F_T| (N).
    pub force: f64,
    /// Signed distance to every structure (spec order).
    pub distances: &'a [f64],
    pub stale: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerOutput {
    /// Gain handed to the admittance solve.
    pub sigma: f64,
    pub events: Vec<ControllerEvent>,
}

/// One control tick: contact, structure, threshold, regime and gain.
pub fn step_controller(
    inputs: &ControllerInputs<'_>,
    state: &mut ControllerState,
    params: &ControllerParams,
    specs: &[StructureSpec],
) -> Result<ControllerOutput> {
    let t = inputs.t;
    if !t.is_finite() || !inputs.force.is_finite() || inputs.force < 0.0 {
        return Err(Error::NonFinite("controller input"));
    }
    if let Some(prev) = state.last_t {
        if t < prev {
            return Err(Error::NonMonotoneTime { prev, now: t });
        }
    }
    let dt = state.last_t.map_or(0.0, |p| t - p);
    let force = inputs.force;
    let prev_regime = state.regime;
    let prev_structure = state.structure;
    let was_fallback = state.structure_fallback;
    let mut kinds = Vec::new();

    let contact = detect_contact(force, state.in_contact(), params);
    let estimate = estimate_operating_structure(inputs.distances, contact, specs)?;
    state.structure = estimate.map(|e| e.index);
    state.structure_fallback = estimate.is_some_and(|e| e.fallback);
    state.threshold = estimate.map(|e| specs[e.pos].lambda);

    let u = state.threshold.unwrap_or(f64::INFINITY);
    let regime = if !contact {
        Regime::Free
    } else if force >= u {
        Regime::Overforce
    } else {
        Regime::Contact
    };
    let excess = force - u;
    if regime == Regime::Overforce {
        let restart = prev_regime != Regime::Overforce || prev_structure != state.structure;
        if restart {
            state.t0 = Some(t);
            state.excess_integral = 0.0;
        } else {
            state.excess_integral += 0.5 * (state.last_excess + excess) * dt;
        }
        state.last_excess = excess;
    } else {
        state.t0 = None;
        state.excess_integral = 0.0;
        state.last_excess = 0.0;
    }
    state.regime = regime;

    let target = compute_gain_adjustment(force, state, t, params);
    state.sigma = if let (Some(limit), Some(_)) = (params.slew_limit, state.last_t) {
        let step = limit * dt;
        target.clamp(state.sigma - step, state.sigma + step)
    } else {
        target
    }
    .clamp(params.sigma_low, params.sigma_high);
    state.last_t = Some(t);

    if regime != prev_regime {
        kinds.push(EventKind::Regime {
            from: prev_regime,
            to: regime,
        });
        if regime == Regime::Overforce {
            kinds.push(EventKind::OverforceEnter);
        } else if prev_regime == Regime::Overforce {
            kinds.push(EventKind::OverforceExit);
        }
    }
    if state.structure != prev_structure {
        kinds.push(EventKind::Structure {
            from: prev_structure,
            to: state.structure,
        });
    }
    if state.structure_fallback && (!was_fallback || state.structure != prev_structure) {
        kinds.push(EventKind::FallbackStructure {
            structure: state.structure.expect("fallback implies a structure"),
        });
    }
    if inputs.stale && contact {
        kinds.push(EventKind::StaleForce);
    }

    let sigma = if params.enabled {
        state.sigma
    } else {
        params.fixed_sigma
    };
    let events = kinds
        .into_iter()
        .map(|kind| ControllerEvent {
            t,
            kind,
            regime,
            structure: state.structure,
            sigma,
            force,
            threshold: state.threshold,
        })
        .collect();
    Ok(ControllerOutput { sigma, events })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specs() -> Vec<StructureSpec> {
        StructureSpec::temporal_bone()
    }

    fn near_nerve() -> Vec<f64> {
        vec![0.2, 3.0, 3.0, 2.0, 2.0]
    }

    fn step(state: &mut ControllerState, t: f64, force: f64, d: &[f64]) -> ControllerOutput {
        let p = ControllerParams::default();
        step_controller(
            &ControllerInputs {
                t,
                force,
                distances: d,
                stale: false,
            },
            state,
            &p,
            &specs(),
        )
        .unwrap()
    }

    #[test]
    fn regime_gains() {
        let p = ControllerParams::default();
        let mut s = ControllerState::new(&p);
        assert_eq!(step(&mut s, 0.0, 0.2, &near_nerve()).sigma, 1.7);
        assert_eq!(step(&mut s, 0.002, 0.5, &near_nerve()).sigma, 0.7);
        assert_eq!(s.structure, Some(1));
        let onset = step(&mut s, 0.004, 0.9, &near_nerve());
        assert_eq!(s.regime, Regime::Overforce);
        assert!((onset.sigma - 0.7).abs() < 1e-12);
    }

    #[test]
    fn structure_estimates() {
        let d = [1.0, 3.0, 3.0, 2.0, 2.0];
        let e = estimate_operating_structure(&d, true, &specs()).unwrap().unwrap();
        assert_eq!((e.index, e.fallback), (1, false));
        let d = [3.0, 3.0, 3.0, 0.0, 2.0];
        let e = estimate_operating_structure(&d, true, &specs()).unwrap().unwrap();
        assert_eq!((e.index, e.fallback), (4, false));
        assert_eq!(estimate_operating_structure(&d, false, &specs()).unwrap(), None);
        let far = [2.0, 3.0, 3.0, 0.5, 2.0];
        assert!(
            estimate_operating_structure(&far, true, &specs())
                .unwrap()
                .unwrap()
                .fallback
        );
        assert!(estimate_operating_structure(&[], true, &[]).is_err());
    }

    #[test]
    fn constant_overforce_closed_form() {
        let p = ControllerParams::default();
        for law in [SigmaLaw::Integral, SigmaLaw::Literal] {
            let params = ControllerParams { sigma_law: law, ..p };
            let mut s = ControllerState::new(&params);
            let d = near_nerve();
            let mut sigma = 0.0;
            for i in 0..=500 {
                let out = step_controller(
                    &ControllerInputs {
                        t: 1.0 + i as f64 * 0.002,
                        force: 1.8,
                        distances: &d,
                        stale: false,
                    },
                    &mut s,
                    &params,
                    &specs(),
                )
                .unwrap();
                sigma = out.sigma;
            }
            assert!((sigma - (0.4 * (-1.0f64).exp() + 0.3)).abs() < 1e-9, "{law:?}: {sigma}");
        }
    }

    #[test]
    fn drop_returns_to_contact_and_resets() {
        let p = ControllerParams::default();
        let mut s = ControllerState::new(&p);
        step(&mut s, 0.0, 1.0, &near_nerve());
        step(&mut s, 0.5, 1.0, &near_nerve());
        assert!(s.excess_integral > 0.0);
        let out = step(&mut s, 0.6, 0.5, &near_nerve());
        assert_eq!(out.sigma, 0.7);
        assert_eq!(s.regime, Regime::Contact);
        assert_eq!(s.excess_integral, 0.0);
        assert!(out.events.iter().any(|e| e.kind == EventKind::OverforceExit));
    }

    #[test]
    fn hysteresis_limits_transitions() {
        let p = ControllerParams::default();
        let mut inside = false;
        let mut transitions = 0;
        for i in 0..100 {
            let f = if i % 2 == 0 { 0.31 } else { 0.29 };
            let now = detect_contact(f, inside, &p);
            transitions += usize::from(now != inside);
            inside = now;
        }
        assert_eq!(transitions, 1);
    }

    #[test]
    fn rejects_time_going_backwards() {
        let p = ControllerParams::default();
        let mut s = ControllerState::new(&p);
        step(&mut s, 1.0, 0.0, &near_nerve());
        let r = step_controller(
            &ControllerInputs {
                t: 0.5,
                force: 0.0,
                distances: &near_nerve(),
                stale: false,
            },
            &mut s,
            &p,
            &specs(),
        );
        assert!(matches!(r, Err(Error::NonMonotoneTime { .. })));
    }

    #[test]
    fn disabled_outputs_fixed_gain() {
        let p = ControllerParams {
            enabled: false,
            ..ControllerParams::default()
        };
        let mut s = ControllerState::new(&p);
        for (i, f) in [0.0, 0.5, 1.5].into_iter().enumerate() {
            let out = step_controller(
                &ControllerInputs {
                    t: i as f64,
                    force: f,
                    distances: &near_nerve(),
                    stale: false,
                },
                &mut s,
                &p,
                &specs(),
            )
            .unwrap();
            assert_eq!(out.sigma, 1.0);
        }
        assert_eq!(s.regime, Regime::Overforce);
    }
}
