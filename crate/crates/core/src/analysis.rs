//! Energy curves and the statistics used to compare them.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::latent::LatentGrid;
use crate::sampler::RunResult;

/// Per-step average latent energy of one run (or a mean over runs).
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    pub label: String,
    /// `(step, energy)`, steps strictly increasing.
    pub rows: Vec<(usize, f64)>,
}

impl EnergyTrace {
    pub fn new(label: impl Into<String>, rows: Vec<(usize, f64)>) -> Result<Self> {
        if rows.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Comparison(
                "trace steps must be strictly increasing".into(),
            ));
        }
        if rows.iter().any(|r| !(r.1 >= 0.0)) {
            return Err(Error::Comparison("energies must be non-negative".into()));
        }
        Ok(Self {
            label: label.into(),
            rows,
        })
    }

    pub fn energy_at(&self, step: usize) -> Option<f64> {
        self.rows
            .binary_search_by_key(&step, |r| r.0)
            .ok()
            .map(|i| self.rows[i].1)
    }

    /// Mean energy over steps in `[from, to]`.
    pub fn window_mean(&self, from: usize, to: usize) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.0 >= from && r.0 <= to)
            .map(|r| r.1)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// Stepwise mean of several traces over the same steps.
    pub fn mean_of(label: impl Into<String>, traces: &[EnergyTrace]) -> Result<Self> {
        let Some(first) = traces.first() else {
            return Err(Error::Comparison("no traces to average".into()));
        };
        let steps: Vec<usize> = first.rows.iter().map(|r| r.0).collect();
        let mut sums = alloc::vec![0.0; steps.len()];
        for t in traces {
            if t.rows.len() != steps.len() || t.rows.iter().zip(&steps).any(|(r, s)| r.0 != *s) {
                return Err(Error::Comparison(format!(
                    "trace `{}` covers different steps",
                    t.label
                )));
            }
            for (acc, r) in sums.iter_mut().zip(&t.rows) {
                *acc += r.1;
            }
        }
        let n = traces.len() as f64;
        Self::new(
            label,
            steps
                .into_iter()
                .zip(sums)
                .map(|(s, v)| (s, v / n))
                .collect(),
        )
    }
}

/// Copies `(step, latent_energy)` out of a run.
pub fn trace_from_run(result: &RunResult, label: impl Into<String>) -> EnergyTrace {
    EnergyTrace {
        label: label.into(),
        rows: result
            .trace
            .iter()
            .map(|r| (r.step, r.latent_energy))
            .collect(),
    }
}

/// Stepwise gap `reference - candidate` from `window_start` on.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveComparison {
    pub reference_label: String,
    pub candidate_label: String,
    pub per_step_gap: Vec<(usize, f64)>,
    /// `(window_start, mean gap over the window)`.
    pub mean_gap_after: (usize, f64),
}

pub fn compare_traces(
    reference: &EnergyTrace,
    candidate: &EnergyTrace,
    window_start: usize,
) -> Result<CurveComparison> {
    let per_step_gap: Vec<(usize, f64)> = reference
        .rows
        .iter()
        .filter(|r| r.0 >= window_start)
        .filter_map(|&(step, e)| candidate.energy_at(step).map(|c| (step, e - c)))
        .collect();
    let ref_window = reference
        .rows
        .iter()
        .filter(|r| r.0 >= window_start)
        .count();
    let cand_window = candidate
        .rows
        .iter()
        .filter(|r| r.0 >= window_start)
        .count();
    if per_step_gap.is_empty()
        || per_step_gap.len() != ref_window
        || per_step_gap.len() != cand_window
    {
        return Err(Error::Comparison(format!(
            "`{}` and `{}` do not share the steps from {window_start} on",
            reference.label, candidate.label
        )));
    }
    let mean = per_step_gap.iter().map(|g| g.1).sum::<f64>() / per_step_gap.len() as f64;
    Ok(CurveComparison {
        reference_label: reference.label.clone(),
        candidate_label: candidate.label.clone(),
        per_step_gap,
        mean_gap_after: (window_start, mean),
    })
}

/// Mean squared change between consecutive `p_x0` snapshots.
///
/// A resolution change splits the series; each segment is returned on its
/// own. The step attached to a value is the later snapshot's step.
pub fn p_x0_mse_series(snapshots: &[(usize, LatentGrid)]) -> Result<Vec<Vec<(usize, f64)>>> {
    if snapshots.len() < 2 {
        return Err(Error::Statistic("need at least two snapshots".into()));
    }
    let mut segments = Vec::new();
    let mut current = Vec::new();
    for pair in snapshots.windows(2) {
        let (_, prev) = &pair[0];
        let (step, next) = &pair[1];
        if pair[1].0 <= pair[0].0 {
            return Err(Error::Statistic("snapshot steps must increase".into()));
        }
        if prev.shape() != next.shape() {
            if !current.is_empty() {
                segments.push(core::mem::take(&mut current));
            }
            continue;
        }
        current.push((*step, prev.mse(next)?));
    }
    if !current.is_empty() {
        segments.push(current);
    }
    Ok(segments)
}

/// Kendall tau-b between the two coordinates.
pub fn monotonicity_stat(pairs: &[(f64, f64)]) -> Result<f64> {
    let mut distinct: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Statistic(format!(
            "need at least 3 distinct omega values, got {}",
            distinct.len()
        )));
    }
    let n = pairs.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut ties_x, mut ties_y) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = pairs[i].0.total_cmp(&pairs[j].0) as i64;
            let dy = pairs[i].1.total_cmp(&pairs[j].1) as i64;
            if dx == 0 {
                ties_x += 1;
            }
            if dy == 0 {
                ties_y += 1;
            }
            match dx * dy {
                1 => concordant += 1,
                -1 => discordant += 1,
                _ => {}
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let den = libm::sqrt(((n0 - ties_x) * (n0 - ties_y)) as f64);
    if den == 0.0 {
        return Err(Error::Statistic("all energies tie".into()));
    }
    Ok((concordant - discordant) as f64 / den)
}

/// `(z of the sample mean, sample variance / expected variance)`.
pub fn z_test_mean_var(
    samples: &[f64],
    expected_mean: f64,
    expected_var: f64,
) -> Result<(f64, f64)> {
    const MIN_SAMPLES: usize = 10_000;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Statistic(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if !(expected_var > 0.0) {
        return Err(Error::Statistic(
            "expected variance must be positive".into(),
        ));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let z = (mean - expected_mean) / libm::sqrt(expected_var / n);
    Ok((z, var / expected_var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoisePurpose, SeededRng};

    fn trace(label: &str, rows: &[(usize, f64)]) -> EnergyTrace {
        EnergyTrace::new(label, rows.to_vec()).unwrap()
    }

    #[test]
    fn self_comparison_is_zero() {
        let t = trace("a", &[(0, 1.0), (1, 0.5), (2, 0.7)]);
        let c = compare_traces(&t, &t, 0).unwrap();
        assert!(c.per_step_gap.iter().all(|g| g.1 == 0.0));
        assert_eq!(c.mean_gap_after, (0, 0.0));
    }

    #[test]
    fn constant_gap() {
        let r = trace("r", &[(0, 2.0), (1, 2.0), (2, 2.0)]);
        let c = trace("c", &[(0, 1.5), (1, 1.5), (2, 1.5)]);
        let cmp = compare_traces(&r, &c, 1).unwrap();
        assert_eq!(cmp.per_step_gap, [(1, 0.5), (2, 0.5)]);
        assert_eq!(cmp.mean_gap_after, (1, 0.5));
    }

    #[test]
    fn disjoint_traces_fail() {
        let r = trace("r", &[(0, 2.0), (1, 2.0)]);
        let c = trace("c", &[(5, 1.5), (6, 1.5)]);
        assert!(compare_traces(&r, &c, 0).is_err());
        assert!(compare_traces(&r, &r, 9).is_err());
    }

    #[test]
    fn trace_validation() {
        assert!(EnergyTrace::new("x", alloc::vec![(1, 1.0), (1, 2.0)]).is_err());
        assert!(EnergyTrace::new("x", alloc::vec![(1, -1.0)]).is_err());
    }

    #[test]
    fn mean_of_traces() {
        let a = trace("a", &[(0, 1.0), (1, 3.0)]);
        let b = trace("b", &[(0, 3.0), (1, 5.0)]);
        assert_eq!(
            EnergyTrace::mean_of("m", &[a.clone(), b]).unwrap().rows,
            [(0, 2.0), (1, 4.0)]
        );
        assert!(EnergyTrace::mean_of("m", &[a, trace("c", &[(0, 1.0)])]).is_err());
    }

    #[test]
    fn mse_examples() {
        let g = LatentGrid::filled(1, 2, 2, 0.3);
        let s = p_x0_mse_series(&[(0, g.clone()), (1, g)]).unwrap();
        assert_eq!(s, [[(1, 0.0)]]);
        let s =
            p_x0_mse_series(&[(3, LatentGrid::scalar(1.0)), (4, LatentGrid::scalar(3.0))]).unwrap();
        assert_eq!(s, [[(4, 4.0)]]);
        assert!(p_x0_mse_series(&[(0, LatentGrid::scalar(1.0))]).is_err());
    }

    #[test]
    fn mse_splits_at_shape_change() {
        let a = LatentGrid::filled(1, 2, 2, 1.0);
        let b = LatentGrid::filled(1, 2, 2, 2.0);
        let c = LatentGrid::filled(1, 4, 4, 0.0);
        let d = LatentGrid::filled(1, 4, 4, 0.5);
        let s = p_x0_mse_series(&[(0, a), (1, b), (2, c), (3, d)]).unwrap();
        assert_eq!(s, [alloc::vec![(1, 1.0)], alloc::vec![(3, 0.25)]]);
    }

    #[test]
    fn kendall_examples() {
        let up = [(1.0, 1.0), (2.0, 2.0), (3.0, 5.0), (4.0, 9.0)];
        assert_eq!(monotonicity_stat(&up).unwrap(), 1.0);
        let down = [(1.0, 9.0), (2.0, 2.0), (3.0, 1.0)];
        assert_eq!(monotonicity_stat(&down).unwrap(), -1.0);
        // C = 2, D = 0, one tie in y: 2 / sqrt(3 * 2)
        let tied = monotonicity_stat(&[(1.0, 5.0), (5.0, 5.0), (10.0, 6.0)]).unwrap();
        assert!((tied - 0.816_496_580_927_726).abs() < 1e-15);
        assert!(monotonicity_stat(&[(1.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).is_err());
    }

    #[test]
    fn z_test_examples() {
        let flat = alloc::vec![2.0; 10_000];
        assert_eq!(z_test_mean_var(&flat, 2.0, 3.0).unwrap().0, 0.0);

        let mut s = SeededRng::new(21).stream(NoisePurpose::Diagnostic, 0);
        let draws: Vec<f64> = (0..100_000).map(|_| s.next_normal()).collect();
        let (z, ratio) = z_test_mean_var(&draws, 0.0, 1.0).unwrap();
        assert!(z.abs() < 4.0, "{z}");
        assert!((0.97..=1.03).contains(&ratio), "{ratio}");

        let (z1, _) = z_test_mean_var(&alloc::vec![1.0; 10_000], 0.0, 1.0).unwrap();
        let (z4, _) = z_test_mean_var(&alloc::vec![1.0; 40_000], 0.0, 1.0).unwrap();
        assert!((z4 / z1 - 2.0).abs() < 1e-12);

        assert!(z_test_mean_var(&[0.0; 10], 0.0, 1.0).is_err());
        assert!(z_test_mean_var(&flat, 0.0, 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn compare_traces_is_antisymmetric(
                a in proptest::collection::vec(0.0f64..5.0, 8),
                b in proptest::collection::vec(0.0f64..5.0, 8),
                start in 0usize..8,
            ) {
                let ta = EnergyTrace::new("a", a.iter().copied().enumerate().collect()).unwrap();
                let tb = EnergyTrace::new("b", b.iter().copied().enumerate().collect()).unwrap();
                let ab = compare_traces(&ta, &tb, start).unwrap();
                let ba = compare_traces(&tb, &ta, start).unwrap();
                for (x, y) in ab.per_step_gap.iter().zip(&ba.per_step_gap) {
                    prop_assert_eq!(x.0, y.0);
                    prop_assert_eq!(x.1, -y.1);
                }
                prop_assert!((ab.mean_gap_after.1 + ba.mean_gap_after.1).abs() < 1e-12);
            }

            #[test]
            fn kendall_ignores_increasing_transforms(
                pts in proptest::collection::vec((0u8..6, 0u8..6), 3..10),
            ) {
                let pairs: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
                let moved: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (libm::exp(x) + 3.0, y * y * y - 1.0)).collect();
                match (monotonicity_stat(&pairs), monotonicity_stat(&moved)) {
                    (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
                    (Err(_), Err(_)) => {}
                    (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
                }
            }

            #[test]
            fn mse_series_ignores_sign_flip(vals in proptest::collection::vec(-4.0f64..4.0, 4 * 5)) {
                let snaps: Vec<(usize, LatentGrid)> = vals
                    .chunks(4)
                    .enumerate()
                    .map(|(i, v)| (i, LatentGrid::new(1, 2, 2, v.to_vec()).unwrap()))
                    .collect();
                let flipped: Vec<(usize, LatentGrid)> = snaps.iter().map(|(i, g)| (*i, g.map(|v| -v))).collect();
                prop_assert_eq!(p_x0_mse_series(&snaps).unwrap(), p_x0_mse_series(&flipped).unwrap());
            }
        }
    }
}
