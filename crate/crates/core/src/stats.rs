//! Cross-seed aggregation: degradation factors from repeated campaigns per
//! (task, scenario) cell are reduced to mean, sample standard deviation,
//! and a 95% normal confidence interval (1.96 standard errors).
//!
//! Sums run over sorted values so every permutation of the same seeds
//! produces bitwise identical statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{PdeFamily, ALL_FAMILIES};
use crate::stress::{ScenarioKind, ScenarioResult, ALL_SCENARIOS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Mean, sample std (n-1 denominator), and the 95% interval. Requires at
/// least two finite values; intervals from a single seed would be fiction.
pub fn summarize(values: &[f64]) -> Result<SummaryStats> {
    if values.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 values for a summary, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("summary input".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let ss = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    let std = (ss / (n - 1.0)).sqrt();
    let half = 1.96 * std / n.sqrt();
    Ok(SummaryStats {
        n: sorted.len(),
        mean,
        std,
        ci_low: mean - half,
        ci_high: mean + half,
    })
}

/// One (task, scenario) cell of the cross-seed table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DegradationSummary {
    pub pde: String,
    pub scenario: ScenarioKind,
    /// Flattened so the JSON rows read {pde, scenario, mean, std, ...}.
    #[serde(flatten)]
    pub stats: SummaryStats,
}

/// Group scenario results by (task, scenario) and summarize the worst-case
/// degradation factors across seeds. Order is deterministic: families in
/// their stable order, scenarios in theirs.
pub fn summarize_degradations(results: &[ScenarioResult]) -> Result<Vec<DegradationSummary>> {
    let mut cells: BTreeMap<(u64, u64), Vec<f64>> = BTreeMap::new();
    for r in results {
        let fam = PdeFamily::from_tag(&r.pde)?;
        cells
            .entry((fam.index(), r.scenario.index()))
            .or_default()
            .push(r.d_worst);
    }
    let mut out = Vec::new();
    for ((fam_idx, sc_idx), ds) in cells {
        let fam = ALL_FAMILIES[fam_idx as usize];
        let scenario = ALL_SCENARIOS
            .into_iter()
            .find(|s| s.index() == sc_idx)
            .expect("index came from a ScenarioKind");
        out.push(DegradationSummary {
            pde: fam.tag().to_string(),
            scenario,
            stats: summarize(&ds)?,
        });
    }
    Ok(out)
}

/// Mean degradation factor per (family, scenario) cell; None where the
/// scenario does not apply or no data exists. Rows follow ALL_FAMILIES,
/// columns ALL_SCENARIOS.
pub fn heatmap_matrix(summaries: &[DegradationSummary]) -> [[Option<f64>; 5]; 5] {
    let mut m = [[None; 5]; 5];
    for s in summaries {
        let Ok(fam) = PdeFamily::from_tag(&s.pde) else {
            continue;
        };
        let row = ALL_FAMILIES.iter().position(|f| *f == fam).unwrap();
        let col = ALL_SCENARIOS.iter().position(|k| *k == s.scenario).unwrap();
        m[row][col] = Some(s.stats.mean);
    }
    m
}

/// Pointwise cross-seed statistics along a common time grid: one
/// SummaryStats per time point, giving the mean curve and its 95% band.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthBand {
    pub times: Vec<f64>,
    pub stats: Vec<SummaryStats>,
}

/// Aggregate per-seed error-vs-time curves. Every curve must live on the
/// same time grid; anything else is a contract violation, not data.
pub fn error_growth_curve(times: &[f64], per_seed: &[Vec<f64>]) -> Result<GrowthBand> {
    if per_seed.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 seed curves, got {}",
            per_seed.len()
        )));
    }
    for (i, curve) in per_seed.iter().enumerate() {
        if curve.len() != times.len() {
            return Err(Error::Shape(format!(
                "curve {i} has {} points but the time grid has {}",
                curve.len(),
                times.len()
            )));
        }
    }
    let mut stats = Vec::with_capacity(times.len());
    let mut column = vec![0.0; per_seed.len()];
    for t in 0..times.len() {
        for (s, curve) in per_seed.iter().enumerate() {
            column[s] = curve[t];
        }
        stats.push(summarize(&column)?);
    }
    Ok(GrowthBand {
        times: times.to_vec(),
        stats,
    })
}

/// Per-family rollout bands: horizon multiples (1 included via the paired
/// one-step error) against cross-seed error statistics. Seeds whose curve
/// has any failed horizon are dropped whole so the band stays aligned.
pub fn rollout_bands(results: &[ScenarioResult]) -> Result<Vec<(String, GrowthBand)>> {
    let mut per_family: BTreeMap<u64, Vec<Vec<f64>>> = BTreeMap::new();
    let mut grids: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in results {
        if r.scenario != ScenarioKind::Rollout || r.settings.is_empty() {
            continue;
        }
        let fam = PdeFamily::from_tag(&r.pde)?;
        let mut times = vec![1.0];
        let mut curve = vec![r.settings[0].base];
        for s in &r.settings {
            times.push(s.setting_value);
            curve.push(s.error);
        }
        if curve.iter().any(|e| !e.is_finite()) {
            continue;
        }
        match grids.entry(fam.index()) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(times);
            }
            std::collections::btree_map::Entry::Occupied(e) => {
                if *e.get() != times {
                    return Err(Error::Shape(format!(
                        "rollout horizon grids differ across seeds for {}",
                        r.pde
                    )));
                }
            }
        }
        per_family.entry(fam.index()).or_default().push(curve);
    }
    let mut out = Vec::new();
    for (fam_idx, curves) in per_family {
        let fam = ALL_FAMILIES[fam_idx as usize];
        let band = error_growth_curve(&grids[&fam_idx], &curves)?;
        out.push((fam.tag().to_string(), band));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_constant_values() {
        let s = summarize(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 0.0);
        assert_eq!(s.ci_low, 2.0);
        assert_eq!(s.ci_high, 2.0);
    }

    #[test]
    fn summary_is_permutation_invariant_bitwise() {
        let a = [1.37, 9.02, 0.11, 4.44, 2.78];
        let b = [4.44, 0.11, 9.02, 2.78, 1.37];
        let sa = summarize(&a).unwrap();
        let sb = summarize(&b).unwrap();
        assert_eq!(sa.mean.to_bits(), sb.mean.to_bits());
        assert_eq!(sa.std.to_bits(), sb.std.to_bits());
        assert_eq!(sa.ci_low.to_bits(), sb.ci_low.to_bits());
    }

    #[test]
    fn too_few_or_non_finite_values_are_rejected() {
        assert!(summarize(&[1.0]).is_err());
        assert!(summarize(&[]).is_err());
        assert!(summarize(&[1.0, f64::NAN]).is_err());
    }

    /// Frozen cross-seed rows (n = 200): the interval must fall out of
    /// mean +/- 1.96 std / sqrt(n) to within the rounding of the source.
    #[test]
    fn ci_formula_reproduces_frozen_rows() {
        #[rustfmt::skip]
        let rows: [(&str, &str, f64, f64, f64, f64); 18] = [
            ("poisson", "param_shift",      1.973, 0.423,  1.914,  2.032),
            ("poisson", "boundary_shift",   1.503, 0.205,  1.475,  1.531),
            ("poisson", "resolution_shift", 18.186, 5.976, 17.357, 19.014),
            ("poisson", "perturbation",     11.125, 3.627, 10.622, 11.627),
            ("nls",     "param_shift",      3.907, 1.177,  3.744,  4.071),
            ("nls",     "resolution_shift", 1.009, 0.063,  1.001,  1.018),
            ("nls",     "rollout",          1.439, 0.251,  1.404,  1.474),
            ("nls",     "perturbation",     1.007, 0.063,  0.998,  1.016),
            ("ns",      "param_shift",      1.032, 0.126,  1.015,  1.050),
            ("ns",      "resolution_shift", 1.038, 0.125,  1.021,  1.055),
            ("ns",      "rollout",          3.524, 0.930,  3.395,  3.652),
            ("ns",      "perturbation",     1.023, 0.126,  1.005,  1.040),
            ("bs",      "param_shift",      2.130, 0.679,  2.035,  2.224),
            ("bs",      "boundary_shift",   6.225, 2.425,  5.889,  6.561),
            ("bs",      "resolution_shift", 2.255, 0.521,  2.183,  2.327),
            ("bs",      "perturbation",     0.956, 0.207,  0.927,  0.985),
            ("ks",      "rollout",          1.607, 0.385,  1.553,  1.660),
            ("ks",      "perturbation",     0.961, 0.095,  0.948,  0.975),
        ];
        for (pde, scenario, mean, std, lo, hi) in rows {
            // Applicability must agree with the published table's cells.
            let fam = PdeFamily::from_tag(pde).unwrap();
            let kind = ScenarioKind::from_tag(scenario).unwrap();
            assert!(kind.applies_to(fam), "{pde}:{scenario}");

            let half = 1.96 * std / (200f64).sqrt();
            assert!(
                (mean - half - lo).abs() < 1e-3,
                "{pde} {scenario} low: {} vs {lo}",
                mean - half
            );
            assert!(
                (mean + half - hi).abs() < 1e-3,
                "{pde} {scenario} high: {} vs {hi}",
                mean + half
            );
        }
    }

    #[test]
    fn interval_formula_on_known_values() {
        // n = 4, mean 2.5, sample std = sqrt(5/3).
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((s.mean - 2.5).abs() < 1e-15);
        let expect_std = (5.0f64 / 3.0).sqrt();
        assert!((s.std - expect_std).abs() < 1e-15);
        let half = 1.96 * expect_std / 2.0;
        assert!((s.ci_low - (2.5 - half)).abs() < 1e-15);
        assert!((s.ci_high - (2.5 + half)).abs() < 1e-15);
    }

    #[test]
    fn duplicated_constant_curve_gives_zero_width_band() {
        let times = [1.0, 2.0, 3.0];
        let curve = vec![0.5, 0.5, 0.5];
        let band = error_growth_curve(&times, &[curve.clone(), curve]).unwrap();
        for s in &band.stats {
            assert_eq!(s.mean, 0.5);
            assert_eq!(s.ci_low, 0.5);
            assert_eq!(s.ci_high, 0.5);
        }
    }

    #[test]
    fn band_width_shrinks_like_inverse_sqrt_n() {
        // Same empirical spread, 4x the seeds: the half-width halves.
        let times = [1.0];
        let small: Vec<Vec<f64>> = vec![vec![1.0], vec![2.0]];
        let big: Vec<Vec<f64>> = vec![
            vec![1.0],
            vec![2.0],
            vec![1.0],
            vec![2.0],
            vec![1.0],
            vec![2.0],
            vec![1.0],
            vec![2.0],
        ];
        let b_small = error_growth_curve(&times, &small).unwrap();
        let b_big = error_growth_curve(&times, &big).unwrap();
        let hw_small = b_small.stats[0].ci_high - b_small.stats[0].mean;
        let hw_big = b_big.stats[0].ci_high - b_big.stats[0].mean;
        // Sample std also changes slightly with n; compare against the
        // exact ratio: (std_small / sqrt(2)) vs (std_big / sqrt(8)).
        let expect = 1.96 * b_big.stats[0].std / (8.0f64).sqrt();
        assert!((hw_big - expect).abs() < 1e-12);
        assert!(hw_big < 0.6 * hw_small);
    }

    #[test]
    fn mismatched_time_grids_are_a_contract_error() {
        let times = [1.0, 2.0];
        let res = error_growth_curve(&times, &[vec![1.0, 2.0], vec![1.0]]);
        assert!(res.is_err());
    }

    #[test]
    fn heatmap_respects_the_stable_orders() {
        let summaries = vec![
            DegradationSummary {
                pde: "ns".into(),
                scenario: ScenarioKind::Rollout,
                stats: summarize(&[3.0, 4.0]).unwrap(),
            },
            DegradationSummary {
                pde: "nls".into(),
                scenario: ScenarioKind::ParamShift,
                stats: summarize(&[2.0, 2.0]).unwrap(),
            },
        ];
        let m = heatmap_matrix(&summaries);
        // nls row 0, param col 0; ns row 2, rollout col 3.
        assert_eq!(m[0][0], Some(2.0));
        assert_eq!(m[2][3], Some(3.5));
        assert_eq!(m[0][1], None);
    }
}
