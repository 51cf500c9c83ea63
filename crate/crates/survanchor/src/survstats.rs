//! Survival statistics on right-censored data: Breslow baseline hazard,
//! per-subject survival curves under proportional hazards, Harrell's
//! concordance index, the two-sample log-rank test, and curve medians.
//!
//! Event indicators are `u8` throughout: 1 = event observed, 0 = censored.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::chi_square_sf;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("input slices have mismatched lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite score at row {0}")]
    NonFiniteScore(usize),
    #[error("non-finite time at row {0}")]
    NonFiniteTime(usize),
    #[error("event indicator at row {0} is {1}, must be 0 or 1")]
    BadEventFlag(usize, u8),
    #[error("no events in input")]
    NoEvents,
    #[error("one of the groups is empty")]
    EmptyGroup,
    #[error("no comparable pairs")]
    NoComparablePairs,
    #[error("empty survival curve")]
    EmptyCurve,
}

/// Step-function survival curve: `values[i]` holds on `[times[i], times[i+1])`,
/// with survival 1 before `times[0]`. Times are strictly ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl SurvivalCurve {
    /// Curve value at time `t` (1.0 before the first step).
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&x| x <= t);
        if idx == 0 {
            1.0
        } else {
            self.values[idx - 1]
        }
    }
}

/// Median survival time of a curve, with an explicit marker when the curve
/// never reaches 1/2 on its grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "time")]
pub enum MedianSurvival {
    Time(f64),
    BeyondMaxTime,
}

/// Breslow estimate of the baseline hazard: increments at each distinct
/// event time (ties grouped) plus their cumulative sums.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BreslowBaseline {
    pub times: Vec<f64>,
    pub hazard: Vec<f64>,
    pub cum_hazard: Vec<f64>,
}

fn validate_labels(times: &[f64], events: &[u8]) -> Result<(), StatsError> {
    if times.len() != events.len() {
        return Err(StatsError::LengthMismatch(times.len(), events.len()));
    }
    if times.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    for (i, &t) in times.iter().enumerate() {
        if !t.is_finite() {
            return Err(StatsError::NonFiniteTime(i));
        }
    }
    for (i, &e) in events.iter().enumerate() {
        if e > 1 {
            return Err(StatsError::BadEventFlag(i, e));
        }
    }
    Ok(())
}

fn validate_scores(scores: &[f64]) -> Result<(), StatsError> {
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(StatsError::NonFiniteScore(i));
        }
    }
    Ok(())
}

/// Fits the baseline hazard increment d_l / Σ_{j at risk} exp(score_j) at
/// each distinct event time. Scores are max-shifted internally so large
/// magnitudes cannot overflow the denominator.
pub fn fit_breslow(
    times: &[f64],
    events: &[u8],
    scores: &[f64],
) -> Result<BreslowBaseline, StatsError> {
    validate_labels(times, events)?;
    if scores.len() != times.len() {
        return Err(StatsError::LengthMismatch(times.len(), scores.len()));
    }
    validate_scores(scores)?;
    if !events.contains(&1) {
        return Err(StatsError::NoEvents);
    }

    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));

    // Walking times in descending order grows the at-risk set one tie group
    // at a time; the denominator is kept in log space so any finite score
    // range stays stable.
    let mut log_at_risk = f64::NEG_INFINITY;
    let mut steps: Vec<(f64, f64)> = Vec::new();
    let mut pos = 0;
    while pos < order.len() {
        let t = times[order[pos]];
        let mut d = 0u64;
        while pos < order.len() && times[order[pos]] == t {
            let i = order[pos];
            log_at_risk = crate::special::log_add_exp(log_at_risk, scores[i]);
            if events[i] == 1 {
                d += 1;
            }
            pos += 1;
        }
        if d > 0 {
            steps.push((t, ((d as f64).ln() - log_at_risk).exp()));
        }
    }
    steps.reverse();

    let times_out: Vec<f64> = steps.iter().map(|s| s.0).collect();
    let hazard: Vec<f64> = steps.iter().map(|s| s.1).collect();
    let mut cum_hazard = Vec::with_capacity(hazard.len());
    let mut acc = 0.0;
    for &h in &hazard {
        acc += h;
        cum_hazard.push(acc);
    }
    Ok(BreslowBaseline {
        times: times_out,
        hazard,
        cum_hazard,
    })
}

/// Survival curve S(t) = exp(−exp(score) · H0(t)) on the baseline's event
/// time grid.
pub fn predict_survival(baseline: &BreslowBaseline, score: f64) -> SurvivalCurve {
    let scale = score.exp();
    let values = baseline
        .cum_hazard
        .iter()
        .map(|&h| (-scale * h).exp())
        .collect();
    SurvivalCurve {
        times: baseline.times.clone(),
        values,
    }
}

/// Harrell's concordance index. A pair (i, j) is comparable when
/// `times[i] < times[j]` and subject i had the event; a higher score on the
/// shorter survival counts 1, a score tie counts 1/2.
pub fn concordance_index(
    times: &[f64],
    events: &[u8],
    scores: &[f64],
) -> Result<f64, StatsError> {
    validate_labels(times, events)?;
    if scores.len() != times.len() {
        return Err(StatsError::LengthMismatch(times.len(), scores.len()));
    }
    validate_scores(scores)?;

    let n = times.len();
    let mut num = 0.0f64;
    let mut den = 0u64;
    for i in 0..n {
        if events[i] != 1 {
            continue;
        }
        for j in 0..n {
            if times[i] < times[j] {
                den += 1;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    if den == 0 {
        return Err(StatsError::NoComparablePairs);
    }
    Ok(num / den as f64)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LogRankResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample log-rank test with the tie-adjusted hypergeometric variance,
/// referred to the chi-square distribution with one degree of freedom.
pub fn logrank_test(
    times_a: &[f64],
    events_a: &[u8],
    times_b: &[f64],
    events_b: &[u8],
) -> Result<LogRankResult, StatsError> {
    if times_a.is_empty() || times_b.is_empty() {
        return Err(StatsError::EmptyGroup);
    }
    validate_labels(times_a, events_a)?;
    validate_labels(times_b, events_b)?;

    let mut sorted_a = times_a.to_vec();
    sorted_a.sort_by(f64::total_cmp);
    let mut sorted_b = times_b.to_vec();
    sorted_b.sort_by(f64::total_cmp);

    let mut event_times: Vec<f64> = times_a
        .iter()
        .zip(events_a)
        .chain(times_b.iter().zip(events_b))
        .filter(|(_, &e)| e == 1)
        .map(|(&t, _)| t)
        .collect();
    if event_times.is_empty() {
        return Err(StatsError::NoEvents);
    }
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();

    let count_at_risk = |sorted: &[f64], t: f64| sorted.len() - sorted.partition_point(|&x| x < t);
    let count_events = |times: &[f64], events: &[u8], t: f64| {
        times
            .iter()
            .zip(events)
            .filter(|(&ti, &ei)| ei == 1 && ti == t)
            .count() as f64
    };

    let mut observed = 0.0f64;
    let mut expected = 0.0f64;
    let mut variance = 0.0f64;
    for &t in &event_times {
        let n1 = count_at_risk(&sorted_a, t) as f64;
        let n2 = count_at_risk(&sorted_b, t) as f64;
        let n = n1 + n2;
        let d1 = count_events(times_a, events_a, t);
        let d2 = count_events(times_b, events_b, t);
        let d = d1 + d2;
        observed += d1;
        expected += d * n1 / n;
        if n > 1.0 {
            variance += d * (n1 / n) * (1.0 - n1 / n) * (n - d) / (n - 1.0);
        }
    }

    if variance <= 1e-300 {
        return Ok(LogRankResult {
            statistic: 0.0,
            p_value: 1.0,
        });
    }
    let statistic = (observed - expected).powi(2) / variance;
    Ok(LogRankResult {
        statistic,
        p_value: chi_square_sf(statistic, 1.0),
    })
}

/// First grid time where the curve is at or below 1/2, or `BeyondMaxTime`
/// when survival stays above 1/2 on the whole grid.
pub fn median_from_curve(curve: &SurvivalCurve) -> Result<MedianSurvival, StatsError> {
    if curve.times.is_empty() {
        return Err(StatsError::EmptyCurve);
    }
    for (t, v) in curve.times.iter().zip(&curve.values) {
        if *v <= 0.5 {
            return Ok(MedianSurvival::Time(*t));
        }
    }
    Ok(MedianSurvival::BeyondMaxTime)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn breslow_single_event_two_at_risk() {
        let b = fit_breslow(&[1.0, 2.0], &[1, 0], &[0.0, 0.0]).unwrap();
        assert_eq!(b.times, vec![1.0]);
        assert!((b.hazard[0] - 0.5).abs() < TOL);
    }

    #[test]
    fn breslow_groups_tied_events() {
        let b = fit_breslow(&[1.0, 1.0, 1.0], &[1, 1, 1], &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(b.times, vec![1.0]);
        assert!((b.hazard[0] - 1.0).abs() < TOL);
    }

    #[test]
    fn breslow_six_subject_reference() {
        // Reference values from direct summation over risk sets.
        let t = [2.0, 3.0, 3.0, 5.0, 7.0, 8.0];
        let e = [1, 0, 1, 1, 0, 1];
        let s = [0.5, -0.2, 0.1, 0.0, 0.3, -0.4];
        let b = fit_breslow(&t, &e, &s).unwrap();
        assert_eq!(b.times, vec![2.0, 3.0, 5.0, 8.0]);
        let expect_h = [
            0.15168057997554404,
            0.2022620778506589,
            0.3311062186943541,
            1.4918246976412703,
        ];
        let expect_cum = [
            0.15168057997554404,
            0.35394265782620293,
            0.685048876520557,
            2.1768735741618275,
        ];
        for i in 0..4 {
            assert!((b.hazard[i] - expect_h[i]).abs() < TOL, "hazard {i}");
            assert!((b.cum_hazard[i] - expect_cum[i]).abs() < TOL, "cum {i}");
        }
        let curve = predict_survival(&b, 0.3);
        let expect_s = [
            0.8148531493540053,
            0.6201631973524135,
            0.396642757095448,
            0.052946571062301793,
        ];
        for i in 0..4 {
            assert!((curve.values[i] - expect_s[i]).abs() < TOL, "surv {i}");
        }
    }

    #[test]
    fn breslow_score_shift_leaves_curves_invariant() {
        let t = [1.0, 2.0, 3.0, 4.0, 5.0];
        let e = [1, 1, 0, 1, 0];
        let s = [0.4, -0.3, 0.2, 0.0, -0.8];
        let shifted: Vec<f64> = s.iter().map(|x| x + 3.7).collect();
        let b0 = fit_breslow(&t, &e, &s).unwrap();
        let b1 = fit_breslow(&t, &e, &shifted).unwrap();
        let c0 = predict_survival(&b0, 0.25);
        let c1 = predict_survival(&b1, 0.25 + 3.7);
        for (v0, v1) in c0.values.iter().zip(&c1.values) {
            assert!((v0 - v1).abs() < 1e-9);
        }
    }

    #[test]
    fn breslow_rejects_bad_input() {
        assert!(matches!(
            fit_breslow(&[1.0], &[0], &[0.0]),
            Err(StatsError::NoEvents)
        ));
        assert!(matches!(
            fit_breslow(&[1.0, 2.0], &[1], &[0.0, 0.0]),
            Err(StatsError::LengthMismatch(2, 1))
        ));
        assert!(matches!(
            fit_breslow(&[1.0], &[1], &[f64::NAN]),
            Err(StatsError::NonFiniteScore(0))
        ));
    }

    #[test]
    fn breslow_extreme_scores_stay_finite() {
        let b = fit_breslow(&[1.0, 2.0, 3.0], &[1, 1, 1], &[400.0, 0.0, -400.0]).unwrap();
        for h in &b.hazard {
            assert!(h.is_finite() && *h >= 0.0);
        }
    }

    #[test]
    fn concordance_perfect_and_reversed() {
        let t = [1.0, 2.0, 3.0];
        let e = [1, 1, 1];
        assert!((concordance_index(&t, &e, &[3.0, 2.0, 1.0]).unwrap() - 1.0).abs() < TOL);
        assert!(concordance_index(&t, &e, &[1.0, 2.0, 3.0]).unwrap().abs() < TOL);
        assert!((concordance_index(&t, &e, &[5.0, 5.0, 5.0]).unwrap() - 0.5).abs() < TOL);
    }

    #[test]
    fn concordance_five_subject_reference() {
        // 7 comparable pairs, one score tie: 6.5 / 7.
        let t = [1.0, 2.0, 2.0, 4.0, 5.0];
        let e = [1, 1, 0, 1, 0];
        let s = [0.9, 0.7, 0.7, 0.7, 0.1];
        let c = concordance_index(&t, &e, &s).unwrap();
        assert!((c - 6.5 / 7.0).abs() < TOL);
    }

    #[test]
    fn concordance_censored_rows_do_not_anchor_pairs() {
        // Only the event at t=1 forms comparable pairs.
        let t = [1.0, 2.0, 3.0];
        let e = [1, 0, 0];
        let c = concordance_index(&t, &e, &[2.0, 1.0, 0.0]).unwrap();
        assert!((c - 1.0).abs() < TOL);
    }

    #[test]
    fn concordance_all_censored_is_an_error() {
        assert!(matches!(
            concordance_index(&[1.0, 2.0], &[0, 0], &[0.1, 0.2]),
            Err(StatsError::NoComparablePairs)
        ));
    }

    #[test]
    fn logrank_identical_groups() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let e = [1, 0, 1, 1];
        let r = logrank_test(&t, &e, &t, &e).unwrap();
        assert!(r.statistic.abs() < TOL);
        assert!((r.p_value - 1.0).abs() < TOL);
    }

    #[test]
    fn logrank_reference_table() {
        // Hand-computed risk table with a cross-group tie at t = 9.
        let ta = [3.1, 6.8, 9.0, 9.0, 11.3];
        let ea = [1, 0, 1, 1, 0];
        let tb = [8.7, 9.0, 10.1, 12.4, 15.0, 15.0];
        let eb = [1, 1, 0, 1, 1, 0];
        let r = logrank_test(&ta, &ea, &tb, &eb).unwrap();
        assert!((r.statistic - 1.2153916201694348).abs() < 1e-10);
        assert!((r.p_value - 0.27026694807222157).abs() < 1e-10);
    }

    #[test]
    fn logrank_separated_groups_reject() {
        let ta: Vec<f64> = (1..=30).map(|i| i as f64 * 0.1).collect();
        let tb: Vec<f64> = (1..=30).map(|i| 100.0 + i as f64 * 0.1).collect();
        let ea = vec![1u8; 30];
        let eb = vec![1u8; 30];
        let r = logrank_test(&ta, &ea, &tb, &eb).unwrap();
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn logrank_input_validation() {
        assert!(matches!(
            logrank_test(&[], &[], &[1.0], &[1]),
            Err(StatsError::EmptyGroup)
        ));
        assert!(matches!(
            logrank_test(&[1.0], &[0], &[2.0], &[0]),
            Err(StatsError::NoEvents)
        ));
    }

    #[test]
    fn median_examples() {
        let c = SurvivalCurve {
            times: vec![1.0, 2.0, 3.0],
            values: vec![0.9, 0.5, 0.2],
        };
        assert_eq!(median_from_curve(&c).unwrap(), MedianSurvival::Time(2.0));
        let high = SurvivalCurve {
            times: vec![1.0, 2.0],
            values: vec![0.9, 0.8],
        };
        assert_eq!(
            median_from_curve(&high).unwrap(),
            MedianSurvival::BeyondMaxTime
        );
        let empty = SurvivalCurve {
            times: vec![],
            values: vec![],
        };
        assert!(matches!(
            median_from_curve(&empty),
            Err(StatsError::EmptyCurve)
        ));
    }

    #[test]
    fn curve_value_lookup_is_a_step_function() {
        let c = SurvivalCurve {
            times: vec![1.0, 3.0],
            values: vec![0.8, 0.4],
        };
        assert!((c.value_at(0.5) - 1.0).abs() < TOL);
        assert!((c.value_at(1.0) - 0.8).abs() < TOL);
        assert!((c.value_at(2.9) - 0.8).abs() < TOL);
        assert!((c.value_at(3.0) - 0.4).abs() < TOL);
        assert!((c.value_at(99.0) - 0.4).abs() < TOL);
    }

    fn arb_survival_data(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u8>, Vec<f64>)> {
        (2..max_n).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.01f64..50.0, n),
                proptest::collection::vec(0u8..2, n),
                proptest::collection::vec(-3.0f64..3.0, n),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn breslow_hazards_positive_and_cumulative_monotone(
            (t, mut e, s) in arb_survival_data(30)
        ) {
            e[0] = 1;
            let b = fit_breslow(&t, &e, &s).unwrap();
            prop_assert!(b.hazard.iter().all(|&h| h > 0.0));
            for w in b.cum_hazard.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            for w in b.times.windows(2) {
                prop_assert!(w[1] > w[0]);
            }
        }

        #[test]
        fn predicted_curves_are_valid_survival_functions(
            (t, mut e, s) in arb_survival_data(30), score in -2.0f64..2.0
        ) {
            e[0] = 1;
            let b = fit_breslow(&t, &e, &s).unwrap();
            let c = predict_survival(&b, score);
            prop_assert!(c.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
            for w in c.values.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-15);
            }
        }

        #[test]
        fn concordance_in_unit_interval((t, mut e, s) in arb_survival_data(30)) {
            e[0] = 1;
            if let Ok(c) = concordance_index(&t, &e, &s) {
                prop_assert!((0.0..=1.0).contains(&c));
            }
        }

        #[test]
        fn logrank_p_in_unit_interval(
            (ta, mut ea, _) in arb_survival_data(20),
            (tb, eb, _) in arb_survival_data(20)
        ) {
            ea[0] = 1;
            let r = logrank_test(&ta, &ea, &tb, &eb).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            prop_assert!(r.statistic >= 0.0);
        }

        #[test]
        fn logrank_is_symmetric_in_groups(
            (ta, mut ea, _) in arb_survival_data(15),
            (tb, mut eb, _) in arb_survival_data(15)
        ) {
            ea[0] = 1;
            eb[0] = 1;
            let ab = logrank_test(&ta, &ea, &tb, &eb).unwrap();
            let ba = logrank_test(&tb, &eb, &ta, &ea).unwrap();
            prop_assert!((ab.statistic - ba.statistic).abs() < 1e-9);
        }
    }
}
