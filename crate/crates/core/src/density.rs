//! Local densities, Euler factors and the predicted constants.
//!
//! Every p-adic factor is an exact rational. Products over primes are formed
//! exactly (numerator and denominator product trees) and converted to a
//! high-precision float once, so the result does not depend on how the work
//! was split.

pub mod hp;

use astro_float::BigFloat;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde::Serialize;

use crate::arith::primes_up_to;
use crate::error::{Error, Result};
use crate::localdata::{
    kronecker, local_class, twist_stuple, ArchClass, ClassKind, QuadAlgebraClass, STuple, SplitType,
};
use hp::Hp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FactorLabel {
    /// local density of a class
    SmallE,
    /// Euler factor of the mean value
    BigE,
    SmallF,
    BigF,
    Alpha,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EulerFactor {
    pub value: BigRational,
    pub q: u64,
    pub label: FactorLabel,
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn inv_pow(q: u64, k: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(q).pow(k))
}

fn one_minus(x: BigRational) -> BigRational {
    BigRational::one() - x
}

fn one_plus(x: BigRational) -> BigRational {
    BigRational::one() + x
}

pub fn e_v(q: u64, c: &QuadAlgebraClass) -> EulerFactor {
    let half = rat(1, 2);
    let value = match c.kind {
        ClassKind::Split => half * one_plus(inv_pow(q, 1)) * one_minus(inv_pow(q, 2)),
        ClassKind::Inert => half * one_minus(inv_pow(q, 1)).pow(3),
        ClassKind::Ramified => {
            half * inv_pow(q, c.delta) * one_minus(inv_pow(q, 1)) * one_minus(inv_pow(q, 2)).pow(2)
        }
    };
    EulerFactor { value, q, label: FactorLabel::SmallE }
}

/// `1 - 3q^-3 + 2q^-4 + q^-5 - q^-6`
pub fn big_e_v(q: u64) -> EulerFactor {
    let value = BigRational::one() - inv_pow(q, 3) * BigInt::from(3) + inv_pow(q, 4) * BigInt::from(2)
        + inv_pow(q, 5)
        - inv_pow(q, 6);
    EulerFactor { value, q, label: FactorLabel::BigE }
}

pub fn f_v(q: u64, c: &QuadAlgebraClass, split: SplitType, is_ktilde_local: bool) -> Result<EulerFactor> {
    let half = rat(1, 2);
    let value = match split {
        SplitType::Sp => e_v(q, c).value,
        SplitType::In => match c.kind {
            ClassKind::Split | ClassKind::Inert => half * one_minus(inv_pow(q, 1)) * one_plus(inv_pow(q, 2)),
            ClassKind::Ramified => half * inv_pow(q, c.delta) * one_minus(inv_pow(q, 1)) * one_minus(inv_pow(q, 4)),
        },
        SplitType::Rm => {
            if q % 2 == 0 {
                return Err(Error::Hypothesis(
                    "the auxiliary field may not ramify at a dyadic place".into(),
                ));
            }
            match c.kind {
                ClassKind::Split => half * one_minus(inv_pow(q, 2)),
                ClassKind::Inert => half * one_minus(inv_pow(q, 1)).pow(2),
                ClassKind::Ramified if is_ktilde_local => half * inv_pow(q, 2) * one_minus(inv_pow(q, 2)),
                ClassKind::Ramified => half * inv_pow(q, 2) * one_minus(inv_pow(q, 1)).pow(2),
            }
        }
    };
    Ok(EulerFactor { value, q, label: FactorLabel::SmallF })
}

pub fn big_f_v(q: u64, split: SplitType) -> Result<EulerFactor> {
    let value = match split {
        SplitType::Sp => big_e_v(q).value,
        SplitType::In => {
            one_plus(inv_pow(q, 2)) * (BigRational::one() - inv_pow(q, 2) - inv_pow(q, 3) + inv_pow(q, 4))
        }
        SplitType::Rm => {
            return Err(Error::Invalid("the correlation Euler factor is undefined at ramified places".into()))
        }
    };
    Ok(EulerFactor { value, q, label: FactorLabel::BigF })
}

/// `1 - 2q^-2 / (1 + q^-1 + q^-2 - 2q^-3 + q^-5)`
pub fn correlation_factor(q: u64) -> EulerFactor {
    let den = BigRational::one() + inv_pow(q, 1) + inv_pow(q, 2) - inv_pow(q, 3) * BigInt::from(2) + inv_pow(q, 5);
    let value = BigRational::one() - inv_pow(q, 2) * BigInt::from(2) / den;
    EulerFactor { value, q, label: FactorLabel::Alpha }
}

/// Archimedean density as `rational * pi^k`.
pub fn e_infty_exact(arch: ArchClass) -> (BigRational, i32) {
    match arch {
        ArchClass::RR => (rat(1, 4), 0),
        ArchClass::CC => (rat(1, 2), -1),
    }
}

pub fn e_infty(s: &STuple) -> f64 {
    match s.arch {
        ArchClass::RR => 0.25,
        ArchClass::CC => 1.0 / (2.0 * std::f64::consts::PI),
    }
}

#[derive(Clone, Debug)]
pub struct BaseFieldConstants {
    pub r1: u32,
    pub r2: u32,
    pub e_k: u64,
    pub delta_k: u64,
    pub c_k: BigRational,
}

impl BaseFieldConstants {
    pub fn rationals() -> Self {
        BaseFieldConstants { r1: 1, r2: 0, e_k: 2, delta_k: 1, c_k: BigRational::one() }
    }
}

/// `2^{-(r1+r2+1)} e_k^2 C_k^3`
pub fn r_k(b: &BaseFieldConstants) -> BigRational {
    inv_pow(2, b.r1 + b.r2 + 1) * BigInt::from(b.e_k * b.e_k) * b.c_k.pow(3)
}

/// Integer numerator/denominator of a factor as polynomials in p.
type PolyPair = fn(u128) -> (u128, u128);

fn e_poly(p: u128) -> (u128, u128) {
    let p2 = p * p;
    let p3 = p2 * p;
    (p3 * p3 + 2 * p2 + p - 3 * p3 - 1, p3 * p3)
}

fn f_in_poly(p: u128) -> (u128, u128) {
    let p2 = p * p;
    let p3 = p2 * p;
    ((p2 + 1) * (p2 * p2 + 1 - p2 - p), p3 * p3)
}

fn alpha_poly(p: u128) -> (u128, u128) {
    let p2 = p * p;
    let p3 = p2 * p;
    let p4 = p3 * p;
    let p5 = p4 * p;
    (p5 + p4 + 1 - p3 - 2 * p2, p5 + p4 + p3 + 1 - 2 * p2)
}

fn product_tree(xs: &[BigUint]) -> BigUint {
    match xs.len() {
        0 => BigUint::one(),
        1 => xs[0].clone(),
        n if n < 64 => xs.iter().fold(BigUint::one(), |a, b| a * b),
        n => {
            let (l, r) = xs.split_at(n / 2);
            let (a, b) = rayon::join(|| product_tree(l), || product_tree(r));
            a * b
        }
    }
}

/// Exact `(num, den)` of `prod f(p)` over the listed primes.
fn exact_product(primes: &[u64], f: PolyPair) -> (BigUint, BigUint) {
    let (ns, ds): (Vec<BigUint>, Vec<BigUint>) = primes
        .iter()
        .map(|&p| {
            let (n, d) = f(p as u128);
            (BigUint::from(n), BigUint::from(d))
        })
        .unzip();
    let (n, d) = rayon::join(|| product_tree(&ns), || product_tree(&ds));
    (n, d)
}

/// A truncated Euler product times explicit constants.
#[derive(Clone, Debug)]
pub struct ProductEstimate {
    pub constant_name: String,
    /// Exact rational prefactor (local densities at S and rational constants).
    pub rational_part: BigRational,
    /// The full value is `rational_part * pi^pi_power * euler_product * transcendental`.
    pub pi_power: i32,
    pub transcendental: Option<(String, f64)>,
    pub euler_product: f64,
    pub truncated_value: BigFloat,
    pub float_value: f64,
    pub decimal: String,
    pub prime_bound: u64,
    /// Certified bound on `|log(full / truncated)|`.
    pub tail_bound_log: f64,
    pub notes: Vec<String>,
}

impl ProductEstimate {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "constant_name": self.constant_name,
            "rational_part": format!("{}/{}", self.rational_part.numer(), self.rational_part.denom()),
            "pi_power": self.pi_power,
            "transcendental": self.transcendental.as_ref().map(|(k, v)| serde_json::json!({"name": k, "value": v})),
            "euler_product": self.euler_product,
            "float_value": self.decimal,
            "prime_bound": self.prime_bound,
            "tail_bound_log": self.tail_bound_log,
            "notes": self.notes,
        })
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        s += &format!("constant_name={}\n", self.constant_name);
        s += &format!("rational_part={}/{}\n", self.rational_part.numer(), self.rational_part.denom());
        s += &format!("pi_power={}\n", self.pi_power);
        if let Some((k, v)) = &self.transcendental {
            s += &format!("transcendental={k}:{v:.17e}\n");
        }
        s += &format!("euler_product={:.17e}\n", self.euler_product);
        s += &format!("float_value={}\n", self.decimal);
        s += &format!("prime_bound={}\n", self.prime_bound);
        s += &format!("tail_bound_log={:.6e}\n", self.tail_bound_log);
        for n in &self.notes {
            s += &format!("note={n}\n");
        }
        s
    }

    /// Interval `[lo, hi]` guaranteed to contain the untruncated constant.
    pub fn interval(&self) -> (f64, f64) {
        let t = self.tail_bound_log;
        (self.float_value * (-t).exp(), self.float_value * t.exp())
    }
}

fn big_rat_to_parts(r: &BigRational) -> (BigUint, BigUint) {
    assert!(r.is_positive());
    (r.numer().magnitude().clone(), r.denom().magnitude().clone())
}

struct Assembly {
    name: String,
    prefactor: BigRational,
    pi_power: i32,
    transcendental: Option<(String, BigFloat)>,
    product: (BigUint, BigUint),
    prime_bound: u64,
    tail: f64,
    notes: Vec<String>,
}

fn assemble(a: Assembly) -> ProductEstimate {
    let mut hp = Hp::new();
    let (pn, pd) = big_rat_to_parts(&a.prefactor);
    let prod = hp.ratio(&a.product.0, &a.product.1);
    let mut v = hp.mul(&hp.ratio(&pn, &pd), &prod);
    if a.pi_power != 0 {
        let pi = hp.pi();
        let pk = hp.powi(&pi, a.pi_power.unsigned_abs() as usize);
        v = if a.pi_power > 0 { hp.mul(&v, &pk) } else { hp.div(&v, &pk) };
    }
    let transcendental = a.transcendental.map(|(k, t)| {
        v = hp.mul(&v, &t);
        (k, hp.to_f64(&t))
    });
    ProductEstimate {
        constant_name: a.name,
        rational_part: a.prefactor,
        pi_power: a.pi_power,
        transcendental,
        euler_product: hp.to_f64(&prod),
        float_value: hp.to_f64(&v),
        decimal: hp.to_decimal(&v, 60),
        truncated_value: v,
        prime_bound: a.prime_bound,
        tail_bound_log: a.tail,
        notes: a.notes,
    }
}

/// `sum_{p > P} -log(1 - x_p)` for `0 <= x_p <= 3p^-3`: at most `2 / P^2`.
pub fn cubic_tail(prime_bound: u64) -> f64 {
    let p = prime_bound.max(2) as f64;
    2.0 / (p * p)
}

/// Same for `0 <= x_p <= 2p^-2`: at most `2 / (P (1 - 2/P^2))`.
pub fn quadratic_tail(prime_bound: u64) -> f64 {
    let p = prime_bound.max(2) as f64;
    2.0 / (p * (1.0 - 2.0 / (p * p)))
}

/// Number of fully specified local classes an S-tuple entry stands for.
///
/// An untagged ramified entry is the disjoint union of its tagged classes,
/// and the limit laws are additive over such unions.
pub fn admitted_classes(p: u64, c: &QuadAlgebraClass) -> u64 {
    match (c.kind, c.unit_tag) {
        (ClassKind::Ramified, None) if p == 2 => 1 << (c.delta - 1),
        (ClassKind::Ramified, None) => 2,
        _ => 1,
    }
}

fn multiplicity_notes(s: &STuple) -> Vec<String> {
    s.finite
        .iter()
        .filter(|(p, c)| admitted_classes(**p, c) > 1)
        .map(|(p, c)| format!("untagged ramified entry at {p} sums over {} local classes", admitted_classes(*p, c)))
        .collect()
}

fn primes_outside(s: &STuple, prime_bound: u64) -> Vec<u64> {
    primes_up_to(prime_bound).into_iter().filter(|p| !s.finite.contains_key(p)).collect()
}

fn require_field_places(s: &STuple, what: &str) -> Result<()> {
    let n = s.field_place_count();
    if n < 2 {
        return Err(Error::Hypothesis(format!(
            "the mean-value law needs at least 2 places of S where {what} is a field; {s} has {n}"
        )));
    }
    Ok(())
}

/// Predicted `lim X^-2 sum h^2 R^2` over fields with the local conditions `s`.
pub fn predicted_mean(s: &STuple, prime_bound: u64) -> Result<ProductEstimate> {
    s.validate()?;
    require_field_places(s, "L_v")?;
    Ok(mean_unchecked(s, prime_bound, "mean"))
}

/// The same constant without the two-field-place hypothesis (conjectural).
pub fn predicted_mean_conjectural(s: &STuple, prime_bound: u64) -> Result<ProductEstimate> {
    s.validate()?;
    let mut est = mean_unchecked(s, prime_bound, "mean_conjectural");
    est.notes.push("CONJECTURAL: fewer than 2 field places; the limit law is unproved here".into());
    Ok(est)
}

fn mean_unchecked(s: &STuple, prime_bound: u64, name: &str) -> ProductEstimate {
    let (einf, einf_pi) = e_infty_exact(s.arch);
    let mut prefactor = r_k(&BaseFieldConstants::rationals()) * rat(1, 36) * einf.pow(2);
    for (&p, c) in &s.finite {
        prefactor *= e_v(p, c).value * BigInt::from(admitted_classes(p, c));
    }
    let primes = primes_outside(s, prime_bound);
    let mut notes = multiplicity_notes(s);
    if !s.finite.is_empty() {
        let extra = s.finite.keys().fold(BigRational::one(), |a, &p| a * big_e_v(p).value);
        notes.push(format!(
            "reading the Euler product over all primes instead of primes outside S multiplies the value by {}/{} ({:.12})",
            extra.numer(),
            extra.denom(),
            extra.to_f64().unwrap_or(f64::NAN)
        ));
    }
    assemble(Assembly {
        name: name.into(),
        prefactor,
        pi_power: 4 + 2 * einf_pi,
        transcendental: None,
        product: exact_product(&primes, e_poly),
        prime_bound,
        tail: cubic_tail(prime_bound),
        notes,
    })
}

/// Checks the correlation hypotheses and returns the twisted S-tuple.
pub fn check_correlation_setup(m: i64, s: &STuple) -> Result<STuple> {
    s.validate()?;
    if !crate::localdata::is_fundamental(m) {
        return Err(Error::Invalid(format!("m={m} is not a fundamental discriminant")));
    }
    if m % 2 == 0 {
        return Err(Error::Hypothesis(format!(
            "the auxiliary field Q(sqrt {m}) ramifies at 2; ramified places must be nondyadic"
        )));
    }
    for p in ramified_primes(m) {
        if !s.finite.contains_key(&p) {
            return Err(Error::Hypothesis(format!(
                "S must contain every prime ramified in the auxiliary field; {p} is missing"
            )));
        }
    }
    let dual = twist_stuple(s, m)?;
    require_field_places(s, "L_v")?;
    require_field_places(&dual, "L_v*")?;
    Ok(dual)
}

pub fn ramified_primes(m: i64) -> Vec<u64> {
    let mut n = m.unsigned_abs();
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

pub fn predicted_correlation(m: i64, s: &STuple, prime_bound: u64) -> Result<ProductEstimate> {
    check_correlation_setup(m, s)?;
    let inert: Vec<u64> =
        primes_outside(s, prime_bound).into_iter().filter(|&p| kronecker(m, p) == -1).collect();
    Ok(assemble(Assembly {
        name: "correlation".into(),
        prefactor: BigRational::one(),
        pi_power: 0,
        transcendental: None,
        product: exact_product(&inert, alpha_poly),
        prime_bound,
        tail: quadratic_tail(prime_bound),
        notes: Vec::new(),
    }))
}

/// `prod_{p | m} p^{sgn}` with `sgn = -1` exactly when `L_p` is ramified.
pub fn delta_ls(m: i64, s: &STuple) -> Result<BigRational> {
    let mut r = BigRational::one();
    for p in ramified_primes(m) {
        let c = s.finite.get(&p).ok_or_else(|| {
            Error::Hypothesis(format!("S does not specify L_{p} at the ramified prime {p}"))
        })?;
        if c.kind == ClassKind::Ramified {
            r /= BigInt::from(p);
        } else {
            r *= BigInt::from(p);
        }
    }
    Ok(r)
}

pub fn predicted_mean_dual(m: i64, s: &STuple, prime_bound: u64) -> Result<ProductEstimate> {
    let dual = check_correlation_setup(m, s)?;
    let mut est = mean_unchecked(&dual, prime_bound, "mean_dual");
    let d = delta_ls(m, s)?;
    let scale = d.pow(2);
    let mut hp = Hp::new();
    let (n, dd) = big_rat_to_parts(&scale);
    est.truncated_value = hp.mul(&est.truncated_value, &hp.ratio(&n, &dd));
    est.float_value = hp.to_f64(&est.truncated_value);
    est.decimal = hp.to_decimal(&est.truncated_value, 60);
    est.rational_part *= scale;
    est.notes.push(format!("dual local conditions {dual}"));
    Ok(est)
}

/// `L(2, chi_m)` by direct summation of `N` terms with an error bound.
///
/// Tail: partial sums of a character are bounded by `|m|/2`, so by Abel
/// summation the tail after N terms is at most `|m| / (2 (N+1)^2)`.
pub fn l2_chi(m: i64, terms: u64) -> (f64, f64) {
    let period = m.unsigned_abs();
    let table: Vec<i32> =
        (0..period).map(|a| crate::arith::kronecker_u(m, if a == 0 { period } else { a })).collect();
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut abs_sum = 0.0f64;
    for n in 1..=terms {
        let c = table[(n % period) as usize];
        if c == 0 {
            continue;
        }
        let nf = n as f64;
        let t = c as f64 / (nf * nf);
        abs_sum += t.abs();
        let y = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - y) + t;
        } else {
            comp += (t - y) + sum;
        }
        sum = y;
    }
    let tail = period as f64 / (2.0 * ((terms + 1) as f64).powi(2));
    let rounding = 4.0 * f64::EPSILON * abs_sum;
    (sum + comp, tail + rounding)
}

pub const L2_TERMS: u64 = 4_000_000;

pub fn predicted_inner(m: i64, s: &STuple, prime_bound: u64) -> Result<ProductEstimate> {
    let dual = check_correlation_setup(m, s)?;
    let (e1, k1) = e_infty_exact(s.arch);
    let (e2, k2) = e_infty_exact(dual.arch);
    let mut prefactor = r_k(&BaseFieldConstants::rationals()) * rat(1, 6) * e1 * e2;
    for (&p, c) in &s.finite {
        let split = crate::localdata::splitting_in_ktilde(p, m);
        let is_ktilde = split == SplitType::Rm && *c == local_class(m, p);
        if split == SplitType::Rm && c.kind == ClassKind::Ramified && c.unit_tag.is_none() {
            return Err(Error::Invalid(format!("L_{p} must be tagged rm+ or rm- at a prime dividing m")));
        }
        prefactor *= f_v(p, c, split, is_ktilde)?.value * BigInt::from(admitted_classes(p, c));
    }
    let primes = primes_outside(s, prime_bound);
    let (sp, inert): (Vec<u64>, Vec<u64>) = primes.iter().partition(|&&p| kronecker(m, p) == 1);
    let (a, b) = rayon::join(|| exact_product(&sp, e_poly), || exact_product(&inert, f_in_poly));
    let product = (a.0 * b.0, a.1 * b.1);
    let (l2, l2_err) = l2_chi(m, L2_TERMS);
    let hp = Hp::new();
    let t = hp.mul(&hp.f64(l2), &hp.sqrt(&hp.int(m.unsigned_abs())));
    let l2_tail = (l2_err / (l2 - l2_err)).ln_1p();
    Ok(assemble(Assembly {
        name: "inner".into(),
        prefactor,
        pi_power: 2 + k1 + k2,
        transcendental: Some(("L(2,chi_m)*sqrt|m|".into(), t)),
        product,
        prime_bound,
        tail: cubic_tail(prime_bound) + l2_tail,
        notes: {
            let mut n = multiplicity_notes(s);
            n.push(format!("L(2,chi_m) series error <= {l2_err:.3e}; dual local conditions {dual}"));
            n
        },
    }))
}

/// Comparison of `inner / sqrt(mean * dual)` with the correlation product.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub ratio: f64,
    pub correlation: f64,
    pub rel_discrepancy: f64,
    pub combined_tail: f64,
}

pub fn identity_check(m: i64, s: &STuple, prime_bound: u64) -> Result<IdentityCheck> {
    let inner = predicted_inner(m, s, prime_bound)?;
    let mean = predicted_mean(s, prime_bound)?;
    let dual = predicted_mean_dual(m, s, prime_bound)?;
    let cor = predicted_correlation(m, s, prime_bound)?;
    let hp = Hp::new();
    let prod = hp.mul(&mean.truncated_value, &dual.truncated_value);
    let ratio = hp.div(&inner.truncated_value, &hp.sqrt(&prod));
    let q = hp.div(&ratio, &cor.truncated_value);
    let rel = hp.to_f64(&q) - 1.0;
    Ok(IdentityCheck {
        ratio: hp.to_f64(&ratio),
        correlation: cor.float_value,
        rel_discrepancy: rel.abs(),
        combined_tail: inner.tail_bound_log
            + 0.5 * (mean.tail_bound_log + dual.tail_bound_log)
            + cor.tail_bound_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localdata::QuadAlgebraClass as Q;

    fn r(n: i64, d: i64) -> BigRational {
        rat(n, d)
    }

    #[test]
    fn e_examples() {
        assert_eq!(e_v(3, &Q::SPLIT).value, r(16, 27));
        assert_eq!(e_v(3, &Q::INERT).value, r(4, 27));
        assert_eq!(e_v(3, &Q::ramified(1, None)).value, r(64, 729));
    }

    #[test]
    fn big_e_examples() {
        assert_eq!(big_e_v(2).value, r(49, 64));
        assert_eq!(big_e_v(3).value, r(668, 729));
        let mut last = big_e_v(2).value;
        for q in 3..200 {
            let v = big_e_v(q).value;
            assert!(v > last && v < BigRational::one());
            last = v;
        }
    }

    #[test]
    fn f_examples() {
        assert_eq!(f_v(3, &Q::SPLIT, SplitType::In, false).unwrap().value, r(10, 27));
        assert_eq!(f_v(3, &Q::ramified(1, None), SplitType::In, false).unwrap().value, r(80, 729));
        assert_eq!(f_v(3, &Q::ramified(1, Some(0)), SplitType::Rm, true).unwrap().value, r(4, 81));
        assert!(f_v(2, &Q::SPLIT, SplitType::Rm, false).is_err());
    }

    #[test]
    fn big_f_examples() {
        assert_eq!(big_f_v(3, SplitType::In).unwrap().value, r(700, 729));
        assert_eq!(big_f_v(2, SplitType::In).unwrap().value, r(55, 64));
        assert_eq!(big_f_v(3, SplitType::Sp).unwrap().value, r(668, 729));
        assert!(big_f_v(3, SplitType::Rm).is_err());
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(correlation_factor(2).value, r(33, 49));
        assert_eq!(correlation_factor(3).value, r(140, 167));
    }

    #[test]
    fn polynomials_match_rationals() {
        for q in [2u64, 3, 5, 7, 101, 99991] {
            let check = |f: PolyPair, want: BigRational| {
                let (n, d) = f(q as u128);
                assert_eq!(BigRational::new(BigInt::from(n), BigInt::from(d)), want);
            };
            check(e_poly, big_e_v(q).value);
            check(f_in_poly, big_f_v(q, SplitType::In).unwrap().value);
            check(alpha_poly, correlation_factor(q).value);
        }
    }

    #[test]
    fn rk_examples() {
        assert_eq!(r_k(&BaseFieldConstants::rationals()), BigRational::one());
        let c = |r1, r2| BaseFieldConstants { r1, r2, e_k: 2, delta_k: 1, c_k: BigRational::one() };
        assert_eq!(r_k(&c(0, 1)), BigRational::one());
        assert_eq!(r_k(&c(2, 0)), r(1, 2));
    }

    #[test]
    fn e_infty_values() {
        assert_eq!(e_infty(&STuple::new(ArchClass::RR)), 0.25);
        let c = e_infty(&STuple::new(ArchClass::CC));
        assert!((c - 0.15915494309189535).abs() < 1e-16);
        assert!((c * c - 1.0 / (4.0 * std::f64::consts::PI.powi(2))).abs() < 1e-16);
    }

    #[test]
    fn product_tree_independent_of_split() {
        let ps = primes_up_to(3000);
        let (n, d) = exact_product(&ps, e_poly);
        let (n1, d1) = exact_product(&ps[..100], e_poly);
        let (n2, d2) = exact_product(&ps[100..], e_poly);
        assert_eq!((n, d), (n1 * n2, d1 * d2));
    }

    #[test]
    fn mean_needs_two_field_places() {
        assert!(matches!(predicted_mean(&STuple::new(ArchClass::CC), 100), Err(Error::Hypothesis(_))));
        let s: STuple = "inf=R;3=rm".parse().unwrap();
        assert!(predicted_mean(&s, 100).is_err());
    }

    #[test]
    fn mean_direct_evaluation() {
        // small bound, compared with a plain f64 evaluation of the formula
        let s: STuple = "inf=C;3=rm+".parse().unwrap();
        let est = predicted_mean(&s, 50).unwrap();
        let mut want = std::f64::consts::PI.powi(4) / 36.0 / (4.0 * std::f64::consts::PI.powi(2)) * 64.0 / 729.0;
        for p in primes_up_to(50).into_iter().filter(|&p| p != 3) {
            let q = p as f64;
            want *= 1.0 - 3.0 / q.powi(3) + 2.0 / q.powi(4) + 1.0 / q.powi(5) - 1.0 / q.powi(6);
        }
        assert!((est.float_value / want - 1.0).abs() < 1e-13);
        assert_eq!(est.pi_power, 2);
        assert_eq!(est.rational_part, r(64, 729 * 144));
        // the untagged entry covers both ramified classes at 3
        let both = predicted_mean(&"inf=C;3=rm".parse().unwrap(), 50).unwrap();
        assert_eq!(both.rational_part, r(128, 729 * 144));
        let minus = predicted_mean(&"inf=C;3=rm-".parse().unwrap(), 50).unwrap();
        assert!((both.float_value / (est.float_value + minus.float_value) - 1.0).abs() < 1e-15);
        assert_eq!(admitted_classes(2, &QuadAlgebraClass::ramified(3, None)), 4);
        assert_eq!(admitted_classes(2, &QuadAlgebraClass::ramified(2, None)), 2);
    }

    #[test]
    fn tail_bounds_cover_doubling() {
        let s: STuple = "inf=C;3=rm".parse().unwrap();
        for pb in [100u64, 1000, 5000] {
            let a = predicted_mean(&s, pb).unwrap();
            let b = predicted_mean(&s, 2 * pb).unwrap();
            assert!((b.float_value / a.float_value).ln().abs() <= a.tail_bound_log);
            assert!(b.tail_bound_log < a.tail_bound_log);
        }
    }

    #[test]
    fn correlation_hypotheses() {
        let s: STuple = "inf=C;5=rm-;7=sp".parse().unwrap();
        assert!(predicted_correlation(8, &s, 100).is_err());
        assert!(predicted_correlation(5, &"inf=C;7=in".parse().unwrap(), 100).is_err());
        let v = predicted_correlation(5, &s, 1000).unwrap().float_value;
        assert!(v > 0.0 && v < 1.0);
        // untagged ramified class at 5 cannot be twisted
        assert!(predicted_correlation(5, &"inf=C;5=rm;7=sp".parse().unwrap(), 100).is_err());
    }

    #[test]
    fn delta_ls_examples() {
        let s5r: STuple = "inf=C;5=rm-".parse().unwrap();
        let s5s: STuple = "inf=C;5=sp".parse().unwrap();
        assert_eq!(delta_ls(5, &s5r).unwrap(), r(1, 5));
        assert_eq!(delta_ls(5, &s5s).unwrap(), r(5, 1));
        let s: STuple = "inf=C;5=rm+;13=in".parse().unwrap();
        assert_eq!(delta_ls(65, &s).unwrap(), r(13, 5));
        assert!(delta_ls(65, &s5r).is_err());
    }

    #[test]
    fn l2_chi5_closed_form() {
        // L(2, chi_5) = 4 pi^2 / (25 sqrt 5)
        let (v, err) = l2_chi(5, 1_000_000);
        let want = 4.0 * std::f64::consts::PI.powi(2) / (25.0 * 5f64.sqrt());
        assert!((v - want).abs() <= err.max(1e-15));
        assert!(err < 1e-11);
    }
}
