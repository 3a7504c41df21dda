//! Empirical sums over quadratic fields compared with the predicted constants.

use std::collections::HashMap;

use serde::Serialize;

use crate::density::{
    self, check_correlation_setup, delta_ls, predicted_correlation, predicted_inner, predicted_mean,
    predicted_mean_conjectural, predicted_mean_dual, ProductEstimate,
};
use crate::error::{Error, Result};
use crate::localdata::{dual_disc, local_class, local_class_probability, ArchClass, ClassKind, STuple};
use crate::quadfields::{enumerate_discs, real_records, sieve_class_numbers_imag, FieldRecord, HRCache};

pub const IMAG_CUTOFF_LIMIT: u64 = 10_000_000;
pub const REAL_CUTOFF_LIMIT: u64 = 100_000;

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub prime_bound: u64,
    /// lift the cutoff cost guard
    pub override_guard: bool,
    /// run S-tuples with fewer than two field places against the same constant
    pub allow_conjectural: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { prime_bound: 100_000, override_guard: false, allow_conjectural: false }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PredictionSummary {
    pub constant_name: String,
    pub float_value: f64,
    pub decimal: String,
    pub prime_bound: u64,
    pub tail_bound_log: f64,
}

impl From<&ProductEstimate> for PredictionSummary {
    fn from(p: &ProductEstimate) -> Self {
        PredictionSummary {
            constant_name: p.constant_name.clone(),
            float_value: p.float_value,
            decimal: p.decimal.clone(),
            prime_bound: p.prime_bound,
            tail_bound_log: p.tail_bound_log,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub statistic: String,
    pub config: String,
    pub ktilde: Option<i64>,
    pub label: Option<String>,
    pub cutoffs: Vec<u64>,
    pub field_count: Vec<u64>,
    pub empirical: Vec<f64>,
    /// exact integer sums when every field involved is imaginary
    pub exact_sums: Option<Vec<String>>,
    pub prediction: PredictionSummary,
    pub rel_err: Vec<f64>,
    pub heuristic_count: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("X,count,empirical,prediction,rel_err\n");
        for i in 0..self.cutoffs.len() {
            s += &format!(
                "{},{},{:.12e},{:.12e},{:.6e}\n",
                self.cutoffs[i], self.field_count[i], self.empirical[i], self.prediction.float_value, self.rel_err[i]
            );
        }
        s
    }

    /// `|rel_err|` at the largest cutoff is within `tol` and does not grow
    /// over the last `decades` steps.
    pub fn converges(&self, tol: f64, decades: usize) -> bool {
        let e: Vec<f64> = self.rel_err.iter().map(|x| x.abs()).collect();
        let n = e.len();
        if n == 0 || e[n - 1] > tol {
            return false;
        }
        let k = decades.min(n - 1);
        e[n - 1 - k..].windows(2).all(|w| w[1] <= w[0])
    }
}

fn check_cutoffs(cutoffs: &[u64]) -> Result<Vec<u64>> {
    if cutoffs.is_empty() || cutoffs.iter().any(|&x| x < 3) {
        return Err(Error::Invalid("cutoffs must be nonempty and at least 3".into()));
    }
    let mut c = cutoffs.to_vec();
    c.sort_unstable();
    c.dedup();
    Ok(c)
}

fn guard(max_imag: u64, max_real: u64, opts: &RunOptions) -> Result<()> {
    if opts.override_guard {
        return Ok(());
    }
    if max_imag > IMAG_CUTOFF_LIMIT {
        return Err(Error::Guard(format!(
            "imaginary discriminants up to {max_imag} exceed {IMAG_CUTOFF_LIMIT}; pass the override to proceed"
        )));
    }
    if max_real > REAL_CUTOFF_LIMIT {
        return Err(Error::Guard(format!(
            "real discriminants up to {max_real} exceed {REAL_CUTOFF_LIMIT}; pass the override to proceed"
        )));
    }
    Ok(())
}

/// Expected number of fields with `|d| <= x` in the family, from local masses.
pub fn heuristic_count(s: &STuple, x: u64) -> f64 {
    let base = 3.0 * x as f64 / std::f64::consts::PI.powi(2);
    s.finite.iter().fold(base, |acc, (&p, c)| acc * local_class_probability(p, c))
}

/// Supplies `(h, R)` for any fundamental discriminant in range.
struct FieldSource {
    imag: Option<crate::quadfields::ClassNumberTable>,
    real: HashMap<i64, FieldRecord>,
}

impl FieldSource {
    fn build(discs: &[i64], cache: &mut HRCache) -> Result<Self> {
        let max_imag = discs.iter().filter(|&&d| d < 0).map(|d| d.unsigned_abs()).max();
        let imag = max_imag.map(|x| sieve_class_numbers_imag(x.max(4)));
        let mut reals: Vec<i64> = discs.iter().copied().filter(|&d| d > 0).collect();
        reals.sort_unstable();
        reals.dedup();
        let recs = real_records(&reals, cache)?;
        Ok(FieldSource { imag, real: recs.into_iter().map(|r| (r.d, r)).collect() })
    }

    fn h_r(&self, d: i64) -> (u64, f64) {
        if d < 0 {
            let h = self.imag.as_ref().and_then(|t| t.get(d.unsigned_abs())).expect("sieved range covers d");
            (h as u64, 1.0)
        } else {
            let r = self.real[&d];
            (r.h, r.r)
        }
    }
}

/// Running sum that stays exact for integers and compensated for floats.
#[derive(Clone, Copy, Default)]
struct Acc {
    exact: u128,
    sum: f64,
    comp: f64,
}

impl Acc {
    fn add_int(&mut self, v: u128) {
        self.exact += v;
        self.add_f(v as f64);
    }

    fn add_f(&mut self, t: f64) {
        let y = self.sum + t;
        self.comp += if self.sum.abs() >= t.abs() { (self.sum - y) + t } else { (t - y) + self.sum };
        self.sum = y;
    }

    fn value(&self, all_int: bool) -> f64 {
        if all_int {
            self.exact as f64
        } else {
            self.sum + self.comp
        }
    }
}

fn rel_errs(emp: &[f64], pred: f64) -> Vec<f64> {
    emp.iter().map(|e| e / pred - 1.0).collect()
}

fn count_warnings(s: &STuple, cutoffs: &[u64], counts: &[u64]) -> (Vec<f64>, Vec<String>) {
    let heur: Vec<f64> = cutoffs.iter().map(|&x| heuristic_count(s, x)).collect();
    let mut warn = Vec::new();
    for i in 0..cutoffs.len() {
        let r = counts[i] as f64 / heur[i];
        if cutoffs[i] >= 100_000 && (r - 1.0).abs() > 0.2 {
            warn.push(format!("field count {} at X={} is {:.3} times the heuristic", counts[i], cutoffs[i], r));
        }
    }
    (heur, warn)
}

/// `X^-2 sum (h R)^2` over the family at each cutoff.
pub fn mean_square_run(s: &STuple, cutoffs: &[u64], cache: &mut HRCache, opts: &RunOptions) -> Result<ExperimentReport> {
    let cutoffs = check_cutoffs(cutoffs)?;
    let (pred, label) = if s.field_place_count() >= 2 {
        (predicted_mean(s, opts.prime_bound)?, None)
    } else if opts.allow_conjectural {
        (predicted_mean_conjectural(s, opts.prime_bound)?, Some("CONJECTURAL".to_string()))
    } else {
        return Err(Error::Hypothesis(format!(
            "the mean-value law needs at least 2 places of S where L_v is a field; {s} has {}",
            s.field_place_count()
        )));
    };
    let xmax = *cutoffs.last().expect("nonempty");
    let imag = s.arch == ArchClass::CC;
    guard(if imag { xmax } else { 0 }, if imag { 0 } else { xmax }, opts)?;
    let discs = enumerate_discs(xmax, s);
    let src = FieldSource::build(&discs, cache)?;
    let mut acc = Acc::default();
    let (mut sums, mut exact, mut counts) = (Vec::new(), Vec::new(), Vec::new());
    let mut k = 0;
    for &x in &cutoffs {
        while k < discs.len() && discs[k].unsigned_abs() <= x {
            let (h, r) = src.h_r(discs[k]);
            if imag {
                acc.add_int((h as u128) * (h as u128));
            } else {
                acc.add_f((h as f64 * r).powi(2));
            }
            k += 1;
        }
        counts.push(k as u64);
        sums.push(acc.value(imag) / (x as f64).powi(2));
        exact.push(acc.exact.to_string());
    }
    let (heur, warnings) = count_warnings(s, &cutoffs, &counts);
    Ok(ExperimentReport {
        statistic: "mean".into(),
        config: s.to_string(),
        ktilde: None,
        label,
        rel_err: rel_errs(&sums, pred.float_value),
        cutoffs,
        field_count: counts,
        empirical: sums,
        exact_sums: imag.then_some(exact),
        prediction: (&pred).into(),
        heuristic_count: heur,
        warnings,
    })
}

/// The four statistics of a correlation experiment over the same family.
#[derive(Clone, Debug, Serialize)]
pub struct CorrelationReport {
    pub mean: ExperimentReport,
    pub mean_dual: ExperimentReport,
    pub inner: ExperimentReport,
    pub correlation: ExperimentReport,
}

pub fn correlation_run(
    m: i64,
    s: &STuple,
    cutoffs: &[u64],
    cache: &mut HRCache,
    opts: &RunOptions,
) -> Result<CorrelationReport> {
    let cutoffs = check_cutoffs(cutoffs)?;
    check_correlation_setup(m, s)?;
    let xmax = *cutoffs.last().expect("nonempty");
    let discs: Vec<i64> = enumerate_discs(xmax, s).into_iter().filter(|&d| d != m).collect();
    let duals: Vec<i64> = discs.iter().map(|&d| dual_disc(d, m)).collect::<Result<_>>()?;
    let all: Vec<i64> = discs.iter().chain(duals.iter()).copied().collect();
    let max_imag = all.iter().filter(|&&d| d < 0).map(|d| d.unsigned_abs()).max().unwrap_or(0);
    let max_real = all.iter().filter(|&&d| d > 0).map(|d| d.unsigned_abs()).max().unwrap_or(0);
    guard(max_imag, max_real, opts)?;
    let src = FieldSource::build(&all, cache)?;
    let all_int = max_real == 0;

    let (mut a_ff, mut a_dd, mut a_fd) = (Acc::default(), Acc::default(), Acc::default());
    let mut rows: Vec<[f64; 3]> = Vec::new();
    let mut exact: Vec<[u128; 3]> = Vec::new();
    let mut k = 0;
    let mut counts = Vec::new();
    for &x in &cutoffs {
        while k < discs.len() && discs[k].unsigned_abs() <= x {
            let (h1, r1) = src.h_r(discs[k]);
            let (h2, r2) = src.h_r(duals[k]);
            if all_int {
                let (h1, h2) = (h1 as u128, h2 as u128);
                a_ff.add_int(h1 * h1);
                a_dd.add_int(h2 * h2);
                a_fd.add_int(h1 * h2);
            } else {
                let (v1, v2) = (h1 as f64 * r1, h2 as f64 * r2);
                a_ff.add_f(v1 * v1);
                a_dd.add_f(v2 * v2);
                a_fd.add_f(v1 * v2);
            }
            k += 1;
        }
        counts.push(k as u64);
        rows.push([a_ff.value(all_int), a_dd.value(all_int), a_fd.value(all_int)]);
        exact.push([a_ff.exact, a_dd.exact, a_fd.exact]);
    }

    let p_mean = predicted_mean(s, opts.prime_bound)?;
    let p_dual = predicted_mean_dual(m, s, opts.prime_bound)?;
    let p_inner = predicted_inner(m, s, opts.prime_bound)?;
    let p_cor = predicted_correlation(m, s, opts.prime_bound)?;
    let (heur, warnings) = count_warnings(s, &cutoffs, &counts);
    let make = |stat: &str, emp: Vec<f64>, ex: Option<Vec<String>>, pred: &ProductEstimate| ExperimentReport {
        statistic: stat.into(),
        config: s.to_string(),
        ktilde: Some(m),
        label: None,
        cutoffs: cutoffs.clone(),
        field_count: counts.clone(),
        rel_err: rel_errs(&emp, pred.float_value),
        empirical: emp,
        exact_sums: ex,
        prediction: pred.into(),
        heuristic_count: heur.clone(),
        warnings: warnings.clone(),
    };
    let x2: Vec<f64> = cutoffs.iter().map(|&x| (x as f64).powi(2)).collect();
    let col = |i: usize| -> Vec<f64> { rows.iter().zip(&x2).map(|(r, x)| r[i] / x).collect() };
    let ex = |i: usize| all_int.then(|| exact.iter().map(|e| e[i].to_string()).collect::<Vec<_>>());
    let cor: Vec<f64> = rows.iter().map(|r| r[2] / (r[0] * r[1]).sqrt()).collect();
    Ok(CorrelationReport {
        mean: make("mean", col(0), ex(0), &p_mean),
        mean_dual: make("mean_dual", col(1), ex(1), &p_dual),
        inner: make("inner", col(2), ex(2), &p_inner),
        correlation: make("correlation", cor, None, &p_cor),
    })
}

pub fn inner_product_run(
    m: i64,
    s: &STuple,
    cutoffs: &[u64],
    cache: &mut HRCache,
    opts: &RunOptions,
) -> Result<ExperimentReport> {
    Ok(correlation_run(m, s, cutoffs, cache, opts)?.inner)
}

#[derive(Clone, Debug, Serialize)]
pub struct TwistReport {
    pub m: i64,
    pub config: String,
    pub x: u64,
    pub checked: u64,
    /// `(d, d*, |d*| expected as num/den)`
    pub counterexamples: Vec<(i64, i64, String)>,
}

/// Checks `|d*| = Delta_{L_S} |d|` for every field in the family up to `x`.
pub fn verify_disc_twist(m: i64, s: &STuple, x: u64) -> Result<TwistReport> {
    s.validate()?;
    if m % 2 == 0 || !crate::localdata::is_fundamental(m) {
        return Err(Error::Hypothesis(format!("m={m} must be a fundamental discriminant unramified at 2")));
    }
    let ram = density::ramified_primes(m);
    let mut checked = 0;
    let mut bad = Vec::new();
    for d in enumerate_discs(x, s).into_iter().filter(|&d| d != m) {
        let ds = dual_disc(d, m)?;
        // Delta as num/den from the local classes of this field
        let (mut num, mut den) = (1u128, 1u128);
        for &p in &ram {
            if local_class(d, p).kind == ClassKind::Ramified {
                den *= p as u128;
            } else {
                num *= p as u128;
            }
        }
        checked += 1;
        if ds.unsigned_abs() as u128 * den != d.unsigned_abs() as u128 * num {
            bad.push((d, ds, format!("{}/{}", d.unsigned_abs() as u128 * num, den)));
        }
    }
    Ok(TwistReport { m, config: s.to_string(), x, checked, counterexamples: bad })
}

/// `delta_ls` of the S-tuple, exposed for reports.
pub fn family_delta(m: i64, s: &STuple) -> Result<String> {
    let d = delta_ls(m, s)?;
    Ok(format!("{}/{}", d.numer(), d.denom()))
}
