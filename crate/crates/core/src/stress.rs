//! Stress scenarios for trained operators: parameter shifts, boundary and
//! payoff shifts, resolution doubling, long rollouts, and input
//! perturbations, each reduced to a degradation factor D = E_stress/E_base.
//!
//! Worst-case semantics: scenarios with a setting grid report the maximum
//! per-setting D. Settings whose solves fail are excluded from the maximum
//! and surfaced as warnings, never silently dropped. Every instance draw is
//! keyed by (seed, stream, family, scenario, setting, instance), so any
//! single number in a result can be recomputed in isolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fno::{forward, FnoParams};
use crate::grid::{rel_l2_error, Field, GridSpec};
use crate::problems::{
    assemble_input, fine_grid, interpolate_instance, sample_instance, solve_targets, train_grid,
    InputEncoding, PdeFamily, PdeInstance, Regimes, SampleVariant,
};
use crate::sampler::perturb_input;
use crate::seeds::{self, stream};
use crate::spectrum::{error_energy_fraction_above, spectral_error_profile, SpectralProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    ParamShift,
    BoundaryShift,
    ResolutionShift,
    Rollout,
    Perturbation,
}

pub const ALL_SCENARIOS: [ScenarioKind; 5] = [
    ScenarioKind::ParamShift,
    ScenarioKind::BoundaryShift,
    ScenarioKind::ResolutionShift,
    ScenarioKind::Rollout,
    ScenarioKind::Perturbation,
];

impl ScenarioKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ScenarioKind::ParamShift => "param_shift",
            ScenarioKind::BoundaryShift => "boundary_shift",
            ScenarioKind::ResolutionShift => "resolution_shift",
            ScenarioKind::Rollout => "rollout",
            ScenarioKind::Perturbation => "perturbation",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        ALL_SCENARIOS
            .into_iter()
            .find(|s| s.tag() == tag)
            .ok_or_else(|| Error::Config(format!("unknown scenario tag '{tag}'")))
    }

    /// Stable numeric id used in seed derivation; 0 is reserved for the
    /// baseline test set. Never reorder.
    pub fn index(&self) -> u64 {
        match self {
            ScenarioKind::ParamShift => 1,
            ScenarioKind::BoundaryShift => 2,
            ScenarioKind::ResolutionShift => 3,
            ScenarioKind::Rollout => 4,
            ScenarioKind::Perturbation => 5,
        }
    }

    /// The scenario-task applicability matrix. Parameter shifts need a
    /// scalar parameter channel, boundary shifts need non-periodic input
    /// data, resolution needs a solver that converges on the doubled grid,
    /// and rollouts need a time-stepping task.
    pub fn applies_to(&self, family: PdeFamily) -> bool {
        use PdeFamily::*;
        match self {
            ScenarioKind::ParamShift => {
                matches!(family, Nls | Poisson | NavierStokes | BlackScholes)
            }
            ScenarioKind::BoundaryShift => matches!(family, Poisson | BlackScholes),
            ScenarioKind::ResolutionShift => {
                matches!(family, Nls | Poisson | NavierStokes | BlackScholes)
            }
            ScenarioKind::Rollout => matches!(family, Nls | NavierStokes | KuramotoSivashinsky),
            ScenarioKind::Perturbation => true,
        }
    }
}

/// Everything a scenario needs about one trained model. The forcing must be
/// the exact field the model was trained with (Navier-Stokes only).
pub struct StressContext<'a> {
    pub family: PdeFamily,
    pub regimes: &'a Regimes,
    pub params: &'a FnoParams,
    pub encoding: &'a InputEncoding,
    pub forcing: Option<Field>,
    /// Campaign seed for this model; stress draws derive from it.
    pub seed: u64,
    /// Baseline error on the held-out in-distribution test set.
    pub e_base: f64,
    /// Instances evaluated per setting.
    pub n_instances: usize,
}

/// One evaluated instance within a setting: either an error (plus the
/// paired baseline error where the scenario is self-normalizing) or a
/// failure message.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub instance: u64,
    pub error: Option<f64>,
    /// Paired denominator: unperturbed error (perturbation), one-step error
    /// (rollout), train-resolution error (resolution).
    pub base_error: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SettingResult {
    pub setting_id: String,
    pub setting_value: f64,
    pub outcomes: Vec<InstanceOutcome>,
    /// Mean error over successful instances.
    pub error: f64,
    /// The denominator used for this setting's degradation factor.
    pub base: f64,
    pub d: f64,
}

/// Spectral decomposition of the resolution scenario's error, weighted by
/// squared error so instances with more error count proportionally.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralSummary {
    /// Fraction of squared error energy above the training Nyquist index.
    pub frac_above_train_nyquist: f64,
    pub profile: SpectralProfile,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub pde: String,
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub e_base: f64,
    pub settings: Vec<SettingResult>,
    /// Worst per-setting degradation factor.
    pub d_worst: f64,
    /// Rollout only: earliest step at which any instance went non-finite.
    pub divergence_horizon: Option<u64>,
    /// Resolution only, periodic tasks only.
    pub spectral: Option<SpectralSummary>,
    pub warnings: Vec<String>,
}

/// The per-family setting grid of a scenario: (id, knob value) pairs.
/// Values are the literal shifted quantities (kappa, nu, alpha, sigma,
/// digital mix, grid factor, horizon multiple, relative amplitude).
pub fn scenario_settings(
    family: PdeFamily,
    kind: ScenarioKind,
    regimes: &Regimes,
) -> Vec<(String, f64)> {
    use PdeFamily::*;
    match kind {
        ScenarioKind::ParamShift => match family {
            Nls => [1.5, 2.0, 2.5]
                .iter()
                .map(|f| (format!("kappa_x{f:.1}"), f * regimes.nls.kappa_hi))
                .collect(),
            NavierStokes => [-0.25, -0.5]
                .iter()
                .map(|e| (format!("nu_down_{}", -e), regimes.ns.nu * 10f64.powf(*e)))
                .collect(),
            Poisson => [2.0, 1.5]
                .iter()
                .map(|a| (format!("alpha_{a:.1}"), *a))
                .collect(),
            BlackScholes => [1.5, 2.0, 2.5]
                .iter()
                .map(|f| (format!("sigma_x{f:.1}"), f * regimes.bs.sigma_hi))
                .collect(),
            KuramotoSivashinsky => vec![],
        },
        ScenarioKind::BoundaryShift => match family {
            Poisson => vec![(
                "trace_band_shift".to_string(),
                regimes.poisson.shifted_amplitude_factor,
            )],
            BlackScholes => vec![
                ("digital_half".to_string(), 0.5),
                ("digital_all".to_string(), 1.0),
            ],
            _ => vec![],
        },
        ScenarioKind::ResolutionShift => {
            if kind.applies_to(family) {
                vec![("double".to_string(), 2.0)]
            } else {
                vec![]
            }
        }
        ScenarioKind::Rollout => {
            if kind.applies_to(family) {
                [2u64, 3, 5]
                    .iter()
                    .map(|h| (format!("horizon_{h}"), *h as f64))
                    .collect()
            } else {
                vec![]
            }
        }
        ScenarioKind::Perturbation => [0.005, 0.01, 0.02]
            .iter()
            .map(|r| (format!("rel_{r}"), *r))
            .collect(),
    }
}

/// Worst-case degradation factor over a scenario's per-setting errors.
/// Failed settings must be excluded before calling; an empty list means
/// every setting failed, which is an error rather than a silent zero.
pub fn build_degradation_record(e_base: f64, setting_errors: &[f64]) -> Result<f64> {
    if !(e_base > 0.0) || !e_base.is_finite() {
        return Err(Error::Degenerate(format!("baseline error {e_base} is unusable")));
    }
    if setting_errors.is_empty() {
        return Err(Error::Degenerate(
            "every setting failed; no degradation factor exists".into(),
        ));
    }
    if setting_errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite("setting error in degradation record".into()));
    }
    let worst = setting_errors.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(worst / e_base)
}

fn instance_rng(ctx: &StressContext, kind: ScenarioKind, setting: u64, instance: u64) -> rand_chacha::ChaCha8Rng {
    seeds::rng_from(&[
        ctx.seed,
        stream::STRESS_INSTANCE,
        ctx.family.index(),
        kind.index(),
        setting,
        instance,
    ])
}

/// Run one scenario against one trained model. Fails fast if the scenario
/// does not apply to the task.
pub fn run_scenario(ctx: &StressContext, kind: ScenarioKind) -> Result<ScenarioResult> {
    if !kind.applies_to(ctx.family) {
        return Err(Error::Config(format!(
            "scenario {} is not applicable to {}",
            kind.tag(),
            ctx.family.tag()
        )));
    }
    if ctx.n_instances == 0 {
        return Err(Error::Config("scenario needs at least one instance".into()));
    }
    match kind {
        ScenarioKind::ParamShift | ScenarioKind::BoundaryShift => shifted_sampling(ctx, kind),
        ScenarioKind::ResolutionShift => resolution(ctx),
        ScenarioKind::Rollout => rollout(ctx),
        ScenarioKind::Perturbation => perturbation(ctx),
    }
}

/// Evaluate the model on one instance at training resolution.
fn eval_instance(ctx: &StressContext, inst: &PdeInstance, grid: &GridSpec) -> Result<f64> {
    let x = assemble_input(inst, ctx.encoding, grid)?;
    let truth = solve_targets(ctx.family, ctx.regimes, inst, &[1])?.remove(0);
    let y = forward(ctx.params, &x)?;
    rel_l2_error(&y, &truth)
}

/// Mean in-distribution error over fresh draws from the given setting slot;
/// the control arm for shift scenarios. Exposed so tests can pin the
/// in-range ratio to 1 without a full campaign.
pub fn in_range_control(ctx: &StressContext, n: usize) -> Result<f64> {
    let grid = train_grid(ctx.family, ctx.regimes)?;
    let mut total = 0.0;
    for i in 0..n {
        let mut rng = instance_rng(ctx, ScenarioKind::ParamShift, u64::MAX, i as u64);
        let inst = sample_instance(
            ctx.family,
            ctx.regimes,
            &SampleVariant::InDist,
            ctx.forcing.as_ref(),
            &mut rng,
        )?;
        total += eval_instance(ctx, &inst, &grid)?;
    }
    Ok(total / n as f64)
}

fn finish(
    ctx: &StressContext,
    kind: ScenarioKind,
    settings: Vec<SettingResult>,
    divergence_horizon: Option<u64>,
    spectral: Option<SpectralSummary>,
    warnings: Vec<String>,
) -> Result<ScenarioResult> {
    let ok: Vec<f64> = settings
        .iter()
        .filter(|s| s.d.is_finite())
        .map(|s| s.d)
        .collect();
    if ok.is_empty() {
        return Err(Error::Campaign(format!(
            "{} on {}: every setting failed ({})",
            kind.tag(),
            ctx.family.tag(),
            warnings.join("; ")
        )));
    }
    let d_worst = ok.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ScenarioResult {
        pde: ctx.family.tag().to_string(),
        scenario: kind,
        seed: ctx.seed,
        e_base: ctx.e_base,
        settings,
        d_worst,
        divergence_horizon,
        spectral,
        warnings,
    })
}

/// Settings that draw instances from a shifted input distribution and
/// compare their mean error against the campaign baseline.
fn shifted_sampling(ctx: &StressContext, kind: ScenarioKind) -> Result<ScenarioResult> {
    let grid = train_grid(ctx.family, ctx.regimes)?;
    let mut warnings = Vec::new();
    let mut settings = Vec::new();
    for (si, (id, value)) in scenario_settings(ctx.family, kind, ctx.regimes).into_iter().enumerate() {
        let variant = match (kind, ctx.family) {
            (ScenarioKind::ParamShift, _) => SampleVariant::ParamShift(value),
            (ScenarioKind::BoundaryShift, PdeFamily::Poisson) => SampleVariant::BoundaryShift,
            (ScenarioKind::BoundaryShift, PdeFamily::BlackScholes) => {
                SampleVariant::PayoffShift(value)
            }
            _ => unreachable!("settings exist only for applicable scenarios"),
        };
        let mut outcomes = Vec::new();
        let mut sum = 0.0;
        let mut n_ok = 0usize;
        for i in 0..ctx.n_instances {
            let mut rng = instance_rng(ctx, kind, si as u64, i as u64);
            let run = sample_instance(ctx.family, ctx.regimes, &variant, ctx.forcing.as_ref(), &mut rng)
                .and_then(|inst| eval_instance(ctx, &inst, &grid));
            match run {
                Ok(e) => {
                    sum += e;
                    n_ok += 1;
                    outcomes.push(InstanceOutcome {
                        instance: i as u64,
                        error: Some(e),
                        base_error: None,
                        failure: None,
                    });
                }
                Err(err) => {
                    warnings.push(format!("{id} instance {i}: {err}"));
                    outcomes.push(InstanceOutcome {
                        instance: i as u64,
                        error: None,
                        base_error: None,
                        failure: Some(err.to_string()),
                    });
                }
            }
        }
        let (error, d) = if n_ok > 0 {
            let e = sum / n_ok as f64;
            (e, e / ctx.e_base)
        } else {
            warnings.push(format!("{id}: all {} instances failed", ctx.n_instances));
            (f64::NAN, f64::NAN)
        };
        settings.push(SettingResult {
            setting_id: id,
            setting_value: value,
            outcomes,
            error,
            base: ctx.e_base,
            d,
        });
    }
    finish(ctx, kind, settings, None, None, warnings)
}

/// Resolution doubling: the same instances are evaluated at the training
/// grid and, input-interpolated, at the doubled grid with ground truth
/// re-solved natively there. D is paired (fine over coarse on identical
/// instances), so running with fine = train gives exactly 1.
fn resolution(ctx: &StressContext) -> Result<ScenarioResult> {
    let kind = ScenarioKind::ResolutionShift;
    let coarse = train_grid(ctx.family, ctx.regimes)?;
    let fine = fine_grid(ctx.family, ctx.regimes)?;
    // Integer wavenumber of the training grid's Nyquist mode.
    let nyq = (coarse.sizes()[0] / 2) as f64;
    let spectral_bins = 16;
    let periodic = coarse.boundary() == crate::grid::BoundaryKind::Periodic;

    let mut warnings = Vec::new();
    let mut outcomes = Vec::new();
    let mut sum_fine = 0.0;
    let mut sum_coarse = 0.0;
    let mut n_ok = 0usize;
    let mut weighted_frac = 0.0;
    let mut weight = 0.0;
    let mut profile_acc: Option<SpectralProfile> = None;

    for i in 0..ctx.n_instances {
        let mut rng = instance_rng(ctx, kind, 0, i as u64);
        let run = (|| -> Result<(f64, f64, Option<(f64, SpectralProfile)>)> {
            let inst = sample_instance(
                ctx.family,
                ctx.regimes,
                &SampleVariant::InDist,
                ctx.forcing.as_ref(),
                &mut rng,
            )?;
            let e_coarse = eval_instance(ctx, &inst, &coarse)?;
            let fi = interpolate_instance(&inst, ctx.regimes, &fine)?;
            let x = assemble_input(&fi, ctx.encoding, &fine)?;
            let truth = solve_targets(ctx.family, ctx.regimes, &fi, &[1])?.remove(0);
            let y = forward(ctx.params, &x)?;
            let e_fine = rel_l2_error(&y, &truth)?;
            let spec = if periodic {
                Some((
                    error_energy_fraction_above(&y, &truth, nyq)?,
                    spectral_error_profile(&y, &truth, spectral_bins)?,
                ))
            } else {
                None
            };
            Ok((e_coarse, e_fine, spec))
        })();
        match run {
            Ok((e_coarse, e_fine, spec)) => {
                sum_fine += e_fine;
                sum_coarse += e_coarse;
                n_ok += 1;
                if let Some((frac, prof)) = spec {
                    let w = e_fine * e_fine;
                    weighted_frac += w * frac;
                    weight += w;
                    match &mut profile_acc {
                        None => {
                            let mut p = prof;
                            p.energies.iter_mut().for_each(|e| *e *= w);
                            profile_acc = Some(p);
                        }
                        Some(acc) => {
                            for (a, e) in acc.energies.iter_mut().zip(&prof.energies) {
                                *a += w * e;
                            }
                        }
                    }
                }
                outcomes.push(InstanceOutcome {
                    instance: i as u64,
                    error: Some(e_fine),
                    base_error: Some(e_coarse),
                    failure: None,
                });
            }
            Err(err) => {
                warnings.push(format!("double instance {i}: {err}"));
                outcomes.push(InstanceOutcome {
                    instance: i as u64,
                    error: None,
                    base_error: None,
                    failure: Some(err.to_string()),
                });
            }
        }
    }

    let (error, base, d) = if n_ok > 0 {
        let e = sum_fine / n_ok as f64;
        let b = sum_coarse / n_ok as f64;
        (e, b, e / b)
    } else {
        warnings.push(format!("double: all {} instances failed", ctx.n_instances));
        (f64::NAN, f64::NAN, f64::NAN)
    };
    let spectral = profile_acc.map(|mut p| {
        if weight > 0.0 {
            p.energies.iter_mut().for_each(|e| *e /= weight);
        }
        SpectralSummary {
            frac_above_train_nyquist: if weight > 0.0 { weighted_frac / weight } else { f64::NAN },
            profile: p,
        }
    });
    let settings = vec![SettingResult {
        setting_id: "double".to_string(),
        setting_value: 2.0,
        outcomes,
        error,
        base,
        d,
    }];
    finish(ctx, kind, settings, None, spectral, warnings)
}

/// Feed the model its own output for several steps and compare against the
/// reference trajectory at each listed multiple. D for a horizon is the
/// mean error there over the mean one-step error on the same instances.
fn rollout(ctx: &StressContext) -> Result<ScenarioResult> {
    let kind = ScenarioKind::Rollout;
    let grid = train_grid(ctx.family, ctx.regimes)?;
    let settings_spec = scenario_settings(ctx.family, kind, ctx.regimes);
    let max_h = settings_spec
        .iter()
        .map(|(_, v)| *v as usize)
        .max()
        .unwrap_or(1);
    let all_steps: Vec<usize> = (1..=max_h).collect();

    let mut warnings = Vec::new();
    let mut divergence: Option<u64> = None;
    // errs[i][h-1] = error of instance i at horizon h, NaN once diverged.
    let mut errs: Vec<Vec<f64>> = Vec::new();
    let mut failed: Vec<Option<String>> = Vec::new();

    for i in 0..ctx.n_instances {
        let mut rng = instance_rng(ctx, kind, 0, i as u64);
        let run = (|| -> Result<Vec<f64>> {
            let inst = sample_instance(
                ctx.family,
                ctx.regimes,
                &SampleVariant::InDist,
                ctx.forcing.as_ref(),
                &mut rng,
            )?;
            let truths = solve_targets(ctx.family, ctx.regimes, &inst, &all_steps)?;
            let mut state = assemble_input(&inst, ctx.encoding, &grid)?;
            let mut out = vec![f64::NAN; max_h];
            for (step, truth) in truths.iter().enumerate() {
                let y = forward(ctx.params, &state)?;
                if y.as_real()?.iter().any(|v| !v.is_finite()) {
                    let h = (step + 1) as u64;
                    divergence = Some(divergence.map_or(h, |d| d.min(h)));
                    break;
                }
                out[step] = rel_l2_error(&y, truth)?;
                if step + 1 < max_h {
                    state = crate::problems::rollout_reencode(&inst, ctx.encoding, &y)?;
                }
            }
            Ok(out)
        })();
        match run {
            Ok(e) => {
                errs.push(e);
                failed.push(None);
            }
            Err(err) => {
                warnings.push(format!("rollout instance {i}: {err}"));
                errs.push(vec![f64::NAN; max_h]);
                failed.push(Some(err.to_string()));
            }
        }
    }

    let mut settings = Vec::new();
    for (id, value) in settings_spec {
        let h = value as usize;
        let mut outcomes = Vec::new();
        let mut sum_h = 0.0;
        let mut sum_1 = 0.0;
        let mut n_ok = 0usize;
        for (i, e) in errs.iter().enumerate() {
            let (eh, e1) = (e[h - 1], e[0]);
            if eh.is_finite() && e1.is_finite() {
                sum_h += eh;
                sum_1 += e1;
                n_ok += 1;
                outcomes.push(InstanceOutcome {
                    instance: i as u64,
                    error: Some(eh),
                    base_error: Some(e1),
                    failure: None,
                });
            } else {
                let why = failed[i]
                    .clone()
                    .unwrap_or_else(|| "diverged before this horizon".to_string());
                outcomes.push(InstanceOutcome {
                    instance: i as u64,
                    error: None,
                    base_error: e1.is_finite().then_some(e1),
                    failure: Some(why),
                });
            }
        }
        let (error, base, d) = if n_ok > 0 {
            let e = sum_h / n_ok as f64;
            let b = sum_1 / n_ok as f64;
            (e, b, e / b)
        } else {
            warnings.push(format!("{id}: no instance survived"));
            (f64::NAN, f64::NAN, f64::NAN)
        };
        settings.push(SettingResult {
            setting_id: id,
            setting_value: value,
            outcomes,
            error,
            base,
            d,
        });
    }
    finish(ctx, kind, settings, divergence, None, warnings)
}

/// Perturb the primary input with small relative noise and compare the
/// error against the same instance unperturbed; D is the mean ratio, not a
/// ratio of means, so instance difficulty cancels.
fn perturbation(ctx: &StressContext) -> Result<ScenarioResult> {
    let settings = scenario_settings(ctx.family, ScenarioKind::Perturbation, ctx.regimes);
    run_perturbation_settings(ctx, &settings, 2)
}

/// Perturbation guts with an explicit setting grid so tests can probe tiny
/// amplitudes without redefining the campaign defaults.
pub fn run_perturbation_settings(
    ctx: &StressContext,
    settings_spec: &[(String, f64)],
    draws_per_instance: usize,
) -> Result<ScenarioResult> {
    let kind = ScenarioKind::Perturbation;
    let grid = train_grid(ctx.family, ctx.regimes)?;
    let mut warnings = Vec::new();
    let mut settings = Vec::new();
    for (si, (id, rel)) in settings_spec.iter().enumerate() {
        let mut outcomes = Vec::new();
        let mut sum_ratio = 0.0;
        let mut n_ok = 0usize;
        for i in 0..ctx.n_instances {
            let mut rng = instance_rng(ctx, kind, si as u64, i as u64);
            let run = (|| -> Result<(f64, f64)> {
                let inst = sample_instance(
                    ctx.family,
                    ctx.regimes,
                    &SampleVariant::InDist,
                    ctx.forcing.as_ref(),
                    &mut rng,
                )?;
                let e0 = eval_instance(ctx, &inst, &grid)?;
                if e0 < 1e-12 {
                    return Err(Error::Degenerate(
                        "baseline error too small to form a ratio".into(),
                    ));
                }
                let mut e_pert = 0.0;
                for d in 0..draws_per_instance {
                    let mut noise_rng = seeds::rng_from(&[
                        ctx.seed,
                        stream::PERTURBATION,
                        ctx.family.index(),
                        si as u64,
                        i as u64,
                        d as u64,
                    ]);
                    let base = crate::problems::primary_input(&inst, &grid)?;
                    let noisy = perturb_input(&base, *rel, &mut noise_rng)?;
                    let pi = crate::problems::with_primary_input(&inst, noisy)?;
                    e_pert += eval_instance(ctx, &pi, &grid)? / draws_per_instance as f64;
                }
                Ok((e_pert, e0))
            })();
            match run {
                Ok((e_pert, e0)) => {
                    sum_ratio += e_pert / e0;
                    n_ok += 1;
                    outcomes.push(InstanceOutcome {
                        instance: i as u64,
                        error: Some(e_pert),
                        base_error: Some(e0),
                        failure: None,
                    });
                }
                Err(err) => {
                    warnings.push(format!("{id} instance {i}: {err}"));
                    outcomes.push(InstanceOutcome {
                        instance: i as u64,
                        error: None,
                        base_error: None,
                        failure: Some(err.to_string()),
                    });
                }
            }
        }
        let (error, base, d) = if n_ok > 0 {
            let ratio = sum_ratio / n_ok as f64;
            // error/base carry the ratio's parts for the record; D is the
            // mean of per-instance ratios, not error/base.
            let e: f64 = outcomes.iter().filter_map(|o| o.error).sum::<f64>() / n_ok as f64;
            let b: f64 = outcomes.iter().filter_map(|o| o.base_error).sum::<f64>() / n_ok as f64;
            (e, b, ratio)
        } else {
            warnings.push(format!("{id}: all {} instances failed", ctx.n_instances));
            (f64::NAN, f64::NAN, f64::NAN)
        };
        settings.push(SettingResult {
            setting_id: id.clone(),
            setting_value: *rel,
            outcomes,
            error,
            base,
            d,
        });
    }
    finish(ctx, kind, settings, None, None, warnings)
}

/// One CSV row per evaluated instance, fixed column order. The error cell
/// is empty for failed instances (they are surfaced, never averaged in);
/// e_base carries the setting's degradation denominator so the summary is
/// recomputable from the CSV alone: group by setting_id, mean the error
/// column, divide by e_base, take the max. Floats use Rust's shortest
/// round-trip formatting so re-parsing reproduces the exact values.
pub fn scenario_csv(res: &ScenarioResult) -> String {
    let mut out = String::from("pde,scenario,seed,setting_id,setting_value,error,e_base,d_worst\n");
    for s in &res.settings {
        for o in &s.outcomes {
            let err = o.error.map(|e| e.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                res.pde,
                res.scenario.tag(),
                res.seed,
                s.setting_id,
                s.setting_value,
                err,
                s.base,
                res.d_worst
            ));
        }
    }
    out
}
