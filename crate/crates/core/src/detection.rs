//! Binomial abstraction of the detection-confirmation logic.
//!
//! A detection vector of `n` per-image Bernoulli responses is confirmed when
//! at least `x_min` hits occur; confirmation fails when at least
//! `y_min = (n - x_min) + 1` misses occur. Everything here is expressed in
//! terms of the binomial upper tail.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probability::{check_unit_interval, deserialize_flexible, format_sci};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// P(X >= k) for X ~ Binomial(n, p).
///
/// Terms follow the multiplicative recurrence
/// `t_{i+1} = t_i * (n-i)/(i+1) * p/(1-p)` and are accumulated
/// smallest-first. Boundary values of `p` return exact 0/1.
pub fn binomial_tail_geq(n: usize, k: usize, p: f64) -> Result<f64> {
    if k > n {
        return Err(Error::Domain(format!("k = {k} > n = {n}")));
    }
    check_unit_interval("p", p)?;
    if k == 0 {
        return Ok(1.0);
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let q = 1.0 - p;
    // t_k = C(n,k) p^k q^(n-k)
    let mut term = q.powi((n - k) as i32);
    for i in 0..k {
        term *= (n - i) as f64 / (i + 1) as f64 * p;
    }
    let mut terms = Vec::with_capacity(n - k + 1);
    terms.push(term);
    for i in k..n {
        term *= (n - i) as f64 / (i + 1) as f64 * (p / q);
        terms.push(term);
    }
    terms.sort_by(f64::total_cmp);
    Ok(terms.iter().sum::<f64>().clamp(0.0, 1.0))
}

/// Parameters of the k-of-n confirmation logic together with the per-image
/// hit/miss probabilities.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConfirmationModel {
    pub n: usize,
    pub x_min: usize,
    pub y_min: usize,
    pub p_hit: f64,
    pub p_miss: f64,
}

impl ConfirmationModel {
    /// Build a model from `n`, `x_min` and `p_hit`; `y_min` and `p_miss`
    /// follow from the complement relations.
    pub fn new(n: usize, x_min: usize, p_hit: f64) -> Result<Self> {
        check_unit_interval("p_hit", p_hit)?;
        if n == 0 {
            return Err(Error::Domain("n must be positive".into()));
        }
        if x_min > n {
            return Err(Error::Domain(format!("x_min = {x_min} > n = {n}")));
        }
        Ok(ConfirmationModel {
            n,
            x_min,
            y_min: n - x_min + 1,
            p_hit,
            p_miss: 1.0 - p_hit,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_unit_interval("p_hit", self.p_hit)?;
        check_unit_interval("p_miss", self.p_miss)?;
        if (self.p_hit + self.p_miss - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("p_hit + p_miss must equal 1".into()));
        }
        if self.x_min > self.n {
            return Err(Error::Domain(format!("x_min = {} > n = {}", self.x_min, self.n)));
        }
        if self.y_min != self.n - self.x_min + 1 {
            return Err(Error::Domain(format!(
                "y_min = {} inconsistent with n - x_min + 1 = {}",
                self.y_min,
                self.n - self.x_min + 1
            )));
        }
        Ok(())
    }

    /// Apply the confirmation logic to a realized detection vector.
    /// Order-insensitive: only the hit count matters.
    pub fn confirm(&self, v: &DetectionVector) -> Result<bool> {
        if v.entries.len() != self.n {
            return Err(Error::VectorLength { expected: self.n, got: v.entries.len() });
        }
        Ok(confirm(&v.entries, self.x_min))
    }
}

/// Hit count meets the confirmation threshold.
pub fn confirm(entries: &[bool], x_min: usize) -> bool {
    entries.iter().filter(|&&d| d).count() >= x_min
}

/// A realized sequence of per-image hit (true) / miss (false) responses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionVector {
    pub entries: Vec<bool>,
}

/// Taxiing kinematics from which the detection window and vector size are
/// derived.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KinematicProfile {
    /// m/s
    #[serde(deserialize_with = "deserialize_flexible")]
    pub taxi_speed: f64,
    /// m/s^2
    #[serde(deserialize_with = "deserialize_flexible")]
    pub max_decel: f64,
    /// s
    #[serde(deserialize_with = "deserialize_flexible")]
    pub reaction_time: f64,
    /// m
    #[serde(deserialize_with = "deserialize_flexible")]
    pub detection_distance: f64,
    /// Hz
    #[serde(deserialize_with = "deserialize_flexible")]
    pub detection_frequency: f64,
}

impl KinematicProfile {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("taxi_speed", self.taxi_speed),
            ("max_decel", self.max_decel),
            ("reaction_time", self.reaction_time),
            ("detection_distance", self.detection_distance),
            ("detection_frequency", self.detection_frequency),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// P(T=1): probability of confirming detection.
pub fn prob_confirm(model: &ConfirmationModel) -> Result<f64> {
    model.validate()?;
    binomial_tail_geq(model.n, model.x_min, model.p_hit)
}

/// P(T=0): probability of failing to confirm detection. `y_min = n + 1`
/// (i.e. `x_min = 0`) makes rejection impossible.
pub fn prob_reject(model: &ConfirmationModel) -> Result<f64> {
    model.validate()?;
    if model.y_min > model.n {
        return Ok(0.0);
    }
    binomial_tail_geq(model.n, model.y_min, model.p_miss)
}

/// Largest per-image miss probability `p` with
/// `binomial_tail_geq(n, y_min, p) <= q_tr`, found by bisection on the
/// monotone tail.
pub fn critical_miss_probability(n: usize, y_min: usize, q_tr: f64) -> Result<f64> {
    if y_min < 1 || y_min > n {
        return Err(Error::Domain(format!("y_min = {y_min} out of 1..={n}")));
    }
    if !(q_tr > 0.0 && q_tr <= 1.0) {
        return Err(Error::Domain(format!("q_tr = {q_tr} outside (0,1]")));
    }
    if q_tr == 1.0 {
        // any p satisfies tail <= 1
        return Ok(1.0);
    }
    // tail(0) = 0 <= q < 1 = tail(1); the tail is strictly increasing in p.
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if binomial_tail_geq(n, y_min, mid)? <= q_tr {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// One admissible operating point: a confirmation threshold and the largest
/// miss probability that still meets the QSO.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub x_min: usize,
    pub y_min: usize,
    pub critical_p_miss: f64,
}

/// Critical miss probability for every confirmation threshold `1..=n`.
/// Critical p_miss grows as x_min decreases.
pub fn admissible_frontier(n: usize, q_tr: f64) -> Result<Vec<FrontierPoint>> {
    let xs: Vec<usize> = (1..=n).collect();
    map_maybe_parallel(&xs, |&x_min| {
        let y_min = n - x_min + 1;
        Ok(FrontierPoint {
            x_min,
            y_min,
            critical_p_miss: critical_miss_probability(n, y_min, q_tr)?,
        })
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurveRow {
    pub y_min: usize,
    pub p_miss: f64,
    pub prob_no_confirm: f64,
}

/// Grid evaluation of P(T=0) over rejection thresholds and a miss
/// probability grid, for plot emission.
pub fn curve_dataset(
    n: usize,
    y_min_range: std::ops::RangeInclusive<usize>,
    p_grid: &[f64],
) -> Result<Vec<CurveRow>> {
    let cells: Vec<(usize, f64)> = y_min_range
        .flat_map(|y| p_grid.iter().map(move |&p| (y, p)))
        .collect();
    map_maybe_parallel(&cells, |&(y_min, p_miss)| {
        Ok(CurveRow {
            y_min,
            p_miss,
            prob_no_confirm: binomial_tail_geq(n, y_min, p_miss)?,
        })
    })
}

/// Emit curve rows as CSV: header `y_min,p_miss,prob_no_confirm`,
/// probabilities in scientific notation with 9 significant digits, LF line
/// endings.
pub fn write_curve_csv<W: Write>(rows: &[CurveRow], mut out: W) -> std::io::Result<()> {
    out.write_all(b"y_min,p_miss,prob_no_confirm\n")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{}",
            row.y_min,
            format_sci(row.p_miss),
            format_sci(row.prob_no_confirm)
        )?;
    }
    Ok(())
}

/// Tolerable miss ratio `m_t = (mu_m + sigma_m) / n` for
/// `M ~ Binomial(n, p_miss)`.
pub fn tolerable_miss_ratio(n: usize, p_miss: f64) -> Result<f64> {
    check_unit_interval("p_miss", p_miss)?;
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    let nf = n as f64;
    let mean = nf * p_miss;
    let sd = (nf * p_miss * (1.0 - p_miss)).sqrt();
    Ok((mean + sd) / nf)
}

/// Detection window (seconds) and detection-vector size from taxiing
/// kinematics, under the constant-deceleration stopping model.
pub fn detection_vector_size(k: &KinematicProfile) -> Result<(f64, usize)> {
    k.validate()?;
    let stopping = k.taxi_speed * k.reaction_time + k.taxi_speed.powi(2) / (2.0 * k.max_decel);
    if stopping >= k.detection_distance {
        return Err(Error::InfeasibleKinematics {
            stopping,
            detection: k.detection_distance,
        });
    }
    let window = (k.detection_distance - stopping) / k.taxi_speed;
    let n = (window * k.detection_frequency).floor() as usize;
    Ok((window, n))
}

#[cfg(feature = "parallel")]
fn map_maybe_parallel<T: Sync, U: Send>(
    items: &[T],
    f: impl Fn(&T) -> Result<U> + Sync + Send,
) -> Result<Vec<U>> {
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_maybe_parallel<T, U>(items: &[T], f: impl Fn(&T) -> Result<U>) -> Result<Vec<U>> {
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tail_whole_sample_space() {
        assert_eq!(binomial_tail_geq(12, 0, 0.37).unwrap(), 1.0);
    }

    #[test]
    fn tail_six_term_sum() {
        // direct summation of the six closed-form terms for (12, 7, 0.1)
        assert_abs_diff_eq!(
            binomial_tail_geq(12, 7, 0.1).unwrap(),
            5.018033800000002e-5,
            epsilon = 1e-9
        );
    }

    #[test]
    fn tail_at_critical_miss_probability() {
        assert_abs_diff_eq!(binomial_tail_geq(12, 7, 0.124).unwrap(), 2.0e-4, epsilon = 1e-5);
    }

    #[test]
    fn tail_boundaries_are_exact() {
        assert_eq!(binomial_tail_geq(12, 7, 0.0).unwrap(), 0.0);
        assert_eq!(binomial_tail_geq(12, 7, 1.0).unwrap(), 1.0);
        assert_eq!(binomial_tail_geq(12, 0, 0.0).unwrap(), 1.0);
        assert!(binomial_tail_geq(12, 13, 0.5).is_err());
    }

    #[test]
    fn confirm_and_reject_probabilities() {
        let m = ConfirmationModel::new(12, 6, 0.9).unwrap();
        assert_abs_diff_eq!(prob_confirm(&m).unwrap(), 0.99995, epsilon = 1e-5);
        assert_abs_diff_eq!(prob_reject(&m).unwrap(), 5.018e-5, epsilon = 1e-8);

        let m = ConfirmationModel::new(12, 0, 0.3).unwrap();
        assert_eq!(prob_confirm(&m).unwrap(), 1.0);
        assert_eq!(prob_reject(&m).unwrap(), 0.0);

        let m = ConfirmationModel::new(12, 6, 1.0).unwrap();
        assert_eq!(prob_confirm(&m).unwrap(), 1.0);

        let m = ConfirmationModel::new(12, 6, 0.0).unwrap();
        assert_eq!(prob_reject(&m).unwrap(), 1.0);
    }

    #[test]
    fn confirm_counts_hits_anywhere() {
        let m = ConfirmationModel::new(12, 6, 0.9).unwrap();
        let mut entries = vec![false; 12];
        for i in [0, 2, 5, 7, 9, 11] {
            entries[i] = true;
        }
        assert!(m.confirm(&DetectionVector { entries }).unwrap());
        assert!(!m.confirm(&DetectionVector { entries: vec![false; 12] }).unwrap());
        assert!(m.confirm(&DetectionVector { entries: vec![true; 12] }).unwrap());
        assert!(m.confirm(&DetectionVector { entries: vec![true; 11] }).is_err());
    }

    #[test]
    fn critical_miss_probability_paper_point() {
        let p = critical_miss_probability(12, 7, 2e-4).unwrap();
        assert_abs_diff_eq!(p, 0.124, epsilon = 5e-4);
        // solution sits on the constraint boundary
        assert!(binomial_tail_geq(12, 7, p).unwrap() <= 2e-4);
    }

    #[test]
    fn critical_miss_probability_closed_form() {
        // y_min = n: tail is p^n, so the critical p is q^(1/n)
        let p = critical_miss_probability(12, 12, 2e-4).unwrap();
        assert_abs_diff_eq!(p, (2e-4_f64).powf(1.0 / 12.0), epsilon = 1e-9);
    }

    #[test]
    fn critical_miss_probability_near_one_limit() {
        assert_eq!(critical_miss_probability(12, 7, 1.0).unwrap(), 1.0);
        let p = critical_miss_probability(12, 7, 1.0 - 1e-12).unwrap();
        assert!(p > 0.98);
        assert!(critical_miss_probability(12, 7, 1.0 + 1e-12).is_err());
        assert!(critical_miss_probability(12, 7, 0.0).is_err());
    }

    #[test]
    fn frontier_is_monotone() {
        let frontier = admissible_frontier(12, 2e-4).unwrap();
        assert_eq!(frontier.len(), 12);
        for w in frontier.windows(2) {
            // larger x_min -> smaller critical p_miss
            assert!(w[1].critical_p_miss < w[0].critical_p_miss);
        }
        let at = |x: usize| frontier.iter().find(|f| f.x_min == x).unwrap().critical_p_miss;
        assert_abs_diff_eq!(at(6), 0.124, epsilon = 5e-4);
    }

    #[test]
    fn curve_rows_and_csv() {
        let rows = curve_dataset(12, 7..=7, &[0.0, 0.1, 0.124]).unwrap();
        assert_eq!(rows[0].prob_no_confirm, 0.0);
        assert_abs_diff_eq!(rows[1].prob_no_confirm, 5.018e-5, epsilon = 1e-8);
        assert_abs_diff_eq!(rows[2].prob_no_confirm, 2e-4, epsilon = 1e-5);
        let mut buf = Vec::new();
        write_curve_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("y_min,p_miss,prob_no_confirm\n"));
        assert!(text.contains("7,1.00000000e-1,5.01803380e-5"));
    }

    #[test]
    fn miss_ratio_values() {
        assert_abs_diff_eq!(tolerable_miss_ratio(12, 0.1).unwrap(), 0.18660, epsilon = 1e-5);
        assert_eq!(tolerable_miss_ratio(12, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            tolerable_miss_ratio(12, 0.5).unwrap(),
            (6.0 + 3.0_f64.sqrt()) / 12.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn vector_size_from_kinematics() {
        let k = KinematicProfile {
            taxi_speed: 15.43,
            max_decel: 6.0,
            reaction_time: 3.0,
            detection_distance: 85.0,
            detection_frequency: 10.0,
        };
        let (window, n) = detection_vector_size(&k).unwrap();
        assert_abs_diff_eq!(window, 1.22, epsilon = 0.01);
        assert_eq!(n, 12);

        // doubling the frequency doubles n (floor effects aside)
        let k2 = KinematicProfile { detection_frequency: 20.0, ..k };
        assert_eq!(detection_vector_size(&k2).unwrap().1, 24);

        // stopping distance at the detection distance leaves no window
        let k3 = KinematicProfile { detection_distance: 66.0, ..k };
        assert!(matches!(
            detection_vector_size(&k3),
            Err(Error::InfeasibleKinematics { .. })
        ));
    }
}
