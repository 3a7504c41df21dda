//! Local classification of quadratic algebras over Q, fundamental
//! discriminants, S-tuples of local conditions and the twist `F -> F*`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arith::{is_prime, is_squarefree, kronecker_u};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassKind {
    Split,
    Inert,
    Ramified,
}

/// A quadratic etale algebra over Q_p, up to isomorphism.
///
/// `unit_tag` separates ramified classes of equal `delta`. At odd p it is
/// 0 when the squarefree core of the discriminant is p times a square and 1
/// when it is p times a nonresidue. At p = 2 it is the odd unit u mod 8 in
/// the square class (`u` for delta 2, `2u` for delta 3). `None` means
/// "any ramified class with this delta" and is only meaningful in S-tuples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuadAlgebraClass {
    pub kind: ClassKind,
    pub delta: u32,
    pub unit_tag: Option<u8>,
}

impl QuadAlgebraClass {
    pub const SPLIT: Self = Self { kind: ClassKind::Split, delta: 0, unit_tag: None };
    pub const INERT: Self = Self { kind: ClassKind::Inert, delta: 0, unit_tag: None };

    pub fn ramified(delta: u32, unit_tag: Option<u8>) -> Self {
        Self { kind: ClassKind::Ramified, delta, unit_tag }
    }

    pub fn is_field(&self) -> bool {
        self.kind != ClassKind::Split
    }

    /// Validity of the class at the prime p.
    pub fn check(&self, p: u64) -> Result<()> {
        let ok = match self.kind {
            ClassKind::Split | ClassKind::Inert => self.delta == 0 && self.unit_tag.is_none(),
            ClassKind::Ramified if p == 2 => {
                matches!(
                    (self.delta, self.unit_tag),
                    (2, None | Some(3) | Some(7)) | (3, None | Some(1) | Some(3) | Some(5) | Some(7))
                )
            }
            ClassKind::Ramified => self.delta == 1 && matches!(self.unit_tag, None | Some(0) | Some(1)),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("{self:?} is not a local class at p={p}")))
        }
    }

    /// Whether a fully specified class satisfies this (possibly untagged) condition.
    pub fn admits(&self, actual: &QuadAlgebraClass) -> bool {
        self.kind == actual.kind
            && self.delta == actual.delta
            && (self.unit_tag.is_none() || self.unit_tag == actual.unit_tag)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArchClass {
    /// R x R
    RR,
    /// C
    CC,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitType {
    Rm,
    In,
    Sp,
}

/// Local conditions at the infinite place and finitely many primes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct STuple {
    pub arch: ArchClass,
    pub finite: BTreeMap<u64, QuadAlgebraClass>,
}

impl STuple {
    pub fn new(arch: ArchClass) -> Self {
        Self { arch, finite: BTreeMap::new() }
    }

    pub fn with(mut self, p: u64, c: QuadAlgebraClass) -> Self {
        self.finite.insert(p, c);
        self
    }

    /// Places where L_v is a field; the archimedean place counts when it is C.
    pub fn field_place_count(&self) -> usize {
        (self.arch == ArchClass::CC) as usize + self.finite.values().filter(|c| c.is_field()).count()
    }

    pub fn validate(&self) -> Result<()> {
        for (&p, c) in &self.finite {
            if !is_prime(p) {
                return Err(Error::Invalid(format!("{p} is not prime")));
            }
            c.check(p)?;
        }
        Ok(())
    }

    /// Restriction to a subset of the finite primes.
    pub fn restrict(&self, keep: impl Fn(u64) -> bool) -> STuple {
        STuple {
            arch: self.arch,
            finite: self.finite.iter().filter(|(p, _)| keep(**p)).map(|(p, c)| (*p, *c)).collect(),
        }
    }
}

/// A discriminant of a quadratic field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FundamentalDiscriminant(i64);

impl FundamentalDiscriminant {
    pub fn new(d: i64) -> Result<Self> {
        if is_fundamental(d) {
            Ok(Self(d))
        } else {
            Err(Error::Invalid(format!("{d} is not a fundamental discriminant")))
        }
    }

    pub fn get(self) -> i64 {
        self.0
    }
}

pub fn kronecker(d: i64, p: u64) -> i32 {
    kronecker_u(d, p)
}

pub fn is_fundamental(d: i64) -> bool {
    if d == 0 || d == 1 {
        return false;
    }
    match d.rem_euclid(4) {
        1 => is_squarefree(d.unsigned_abs()),
        0 => {
            let m = d / 4;
            matches!(m.rem_euclid(4), 2 | 3) && is_squarefree(m.unsigned_abs())
        }
        _ => false,
    }
}

/// Isomorphism class of `Q_p(sqrt d)` for a fundamental discriminant d.
pub fn local_class(d: i64, p: u64) -> QuadAlgebraClass {
    if p == 2 {
        if d % 2 != 0 {
            return if d.rem_euclid(8) == 1 { QuadAlgebraClass::SPLIT } else { QuadAlgebraClass::INERT };
        }
        let m = d / 4;
        if m % 2 != 0 {
            QuadAlgebraClass::ramified(2, Some(m.rem_euclid(8) as u8))
        } else {
            QuadAlgebraClass::ramified(3, Some((m / 2).rem_euclid(8) as u8))
        }
    } else {
        match kronecker(d, p) {
            1 => QuadAlgebraClass::SPLIT,
            -1 => QuadAlgebraClass::INERT,
            _ => {
                let unit = d / p as i64;
                let tag = if kronecker(unit, p) == 1 { 0 } else { 1 };
                QuadAlgebraClass::ramified(1, Some(tag))
            }
        }
    }
}

pub fn arch_class(d: i64) -> ArchClass {
    if d > 0 {
        ArchClass::RR
    } else {
        ArchClass::CC
    }
}

pub fn matches(d: i64, s: &STuple) -> bool {
    arch_class(d) == s.arch && s.finite.iter().all(|(&p, c)| c.admits(&local_class(d, p)))
}

/// Discriminant of the third quadratic subfield of `Q(sqrt d, sqrt m)`.
pub fn dual_disc(d: i64, m: i64) -> Result<i64> {
    if d == m {
        return Err(Error::Invalid(format!("dual of the auxiliary field itself (d = m = {d})")));
    }
    let g = num_integer::gcd(d, m);
    let mut core = (d / g) * (m / g);
    // odd parts of d/g and m/g are squarefree and coprime, so only 4 can divide twice
    while core % 4 == 0 {
        core /= 4;
    }
    Ok(if core.rem_euclid(4) == 1 { core } else { 4 * core })
}

pub fn splitting_in_ktilde(p: u64, m: i64) -> SplitType {
    match local_class(m, p).kind {
        ClassKind::Ramified => SplitType::Rm,
        ClassKind::Inert => SplitType::In,
        ClassKind::Split => SplitType::Sp,
    }
}

/// The two kinds of ramified-extension counts.
#[derive(Clone, Copy, Debug)]
pub enum RamifiedQuery {
    /// disc exponent 2l, `1 <= l <= m_v`
    Even(u32),
    /// disc exponent `2 m_v + 1`
    Top,
}

pub fn count_ramified_classes(q: u64, query: RamifiedQuery, m_v: u32) -> Result<u64> {
    match query {
        RamifiedQuery::Even(l) => {
            if l == 0 || l > m_v {
                return Err(Error::Invalid(format!("l={l} outside 1..={m_v}")));
            }
            Ok(2 * q.pow(l - 1) * (q - 1))
        }
        RamifiedQuery::Top => Ok(2 * q.pow(m_v)),
    }
}

/// Every fully specified local class at p (with ramified tags).
pub fn all_classes(p: u64) -> Vec<QuadAlgebraClass> {
    let mut v = vec![QuadAlgebraClass::SPLIT, QuadAlgebraClass::INERT];
    if p == 2 {
        v.extend([3, 7].map(|t| QuadAlgebraClass::ramified(2, Some(t))));
        v.extend([1, 3, 5, 7].map(|t| QuadAlgebraClass::ramified(3, Some(t))));
    } else {
        v.extend([0, 1].map(|t| QuadAlgebraClass::ramified(1, Some(t))));
    }
    v
}

// Square classes: (v, u) with v the parity of the valuation and u the unit
// part (0/1 residue flag at odd p, unit mod 8 at p = 2).
fn square_class(c: &QuadAlgebraClass, p: u64) -> Option<(u32, u8)> {
    Some(match (c.kind, p == 2) {
        (ClassKind::Split, false) => (0, 0),
        (ClassKind::Inert, false) => (0, 1),
        (ClassKind::Ramified, false) => (1, c.unit_tag?),
        (ClassKind::Split, true) => (0, 1),
        (ClassKind::Inert, true) => (0, 5),
        (ClassKind::Ramified, true) => (c.delta - 2, c.unit_tag?),
    })
}

fn from_square_class(v: u32, u: u8, p: u64) -> QuadAlgebraClass {
    if p == 2 {
        match (v, u) {
            (0, 1) => QuadAlgebraClass::SPLIT,
            (0, 5) => QuadAlgebraClass::INERT,
            (0, t) => QuadAlgebraClass::ramified(2, Some(t)),
            (_, t) => QuadAlgebraClass::ramified(3, Some(t)),
        }
    } else {
        match (v, u) {
            (0, 0) => QuadAlgebraClass::SPLIT,
            (0, _) => QuadAlgebraClass::INERT,
            (_, t) => QuadAlgebraClass::ramified(1, Some(t)),
        }
    }
}

fn mul_square_class(a: (u32, u8), b: (u32, u8), p: u64) -> (u32, u8) {
    if p == 2 {
        ((a.0 + b.0) % 2, ((a.1 as u32 * b.1 as u32) % 8) as u8)
    } else {
        ((a.0 + b.0) % 2, a.1 ^ b.1)
    }
}

/// The class of `L_p*` given `L_p` and the auxiliary discriminant m.
///
/// Untagged ramified classes twist to untagged ramified classes when p does
/// not divide m; at p | m the tag is required to decide the result.
pub fn twist_local(c: &QuadAlgebraClass, p: u64, m: i64) -> Result<QuadAlgebraClass> {
    let mc = local_class(m, p);
    let mclass = square_class(&mc, p).expect("local_class is tagged");
    match square_class(c, p) {
        Some(sc) => {
            let (v, u) = mul_square_class(sc, mclass, p);
            Ok(from_square_class(v, u, p))
        }
        None => {
            if mclass.0 == 1 || (p == 2 && mc.kind == ClassKind::Ramified) {
                Err(Error::Invalid(format!(
                    "ramified class at p={p} dividing m={m} must carry a tag (rm+ or rm-)"
                )))
            } else {
                Ok(*c)
            }
        }
    }
}

pub fn twist_stuple(s: &STuple, m: i64) -> Result<STuple> {
    let arch = if m < 0 {
        match s.arch {
            ArchClass::RR => ArchClass::CC,
            ArchClass::CC => ArchClass::RR,
        }
    } else {
        s.arch
    };
    let mut finite = BTreeMap::new();
    for (&p, c) in &s.finite {
        finite.insert(p, twist_local(c, p, m)?);
    }
    Ok(STuple { arch, finite })
}

fn token_str(c: &QuadAlgebraClass, p: u64) -> String {
    match c.kind {
        ClassKind::Split => "sp".into(),
        ClassKind::Inert => "in".into(),
        ClassKind::Ramified if p == 2 => format!("rm:d{}", c.delta),
        ClassKind::Ramified => match c.unit_tag {
            None => "rm".into(),
            Some(0) => "rm+".into(),
            Some(_) => "rm-".into(),
        },
    }
}

impl fmt::Display for STuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "inf={}", if self.arch == ArchClass::CC { "C" } else { "R" })?;
        for (&p, c) in &self.finite {
            write!(f, ";{p}={}", token_str(c, p))?;
        }
        Ok(())
    }
}

impl FromStr for STuple {
    type Err = Error;

    /// Grammar: `inf=C|R` then `;<p>=sp|in|rm[+|-]|rm:d2|rm:d3` entries.
    fn from_str(text: &str) -> Result<Self> {
        let perr = |token: &str, pos: usize, reason: &str| Error::Parse {
            token: token.to_string(),
            pos,
            reason: reason.to_string(),
        };
        let mut pos = 0;
        let mut out: Option<STuple> = None;
        for (i, item) in text.split(';').enumerate() {
            let here = pos;
            pos += item.len() + 1;
            let Some((key, val)) = item.split_once('=') else {
                return Err(perr(item, here, "expected key=value"));
            };
            if i == 0 {
                let arch = match (key, val) {
                    ("inf", "C") => ArchClass::CC,
                    ("inf", "R") => ArchClass::RR,
                    ("inf", _) => return Err(perr(val, here + 4, "archimedean class must be C or R")),
                    _ => return Err(perr(key, here, "first entry must be inf=C or inf=R")),
                };
                out = Some(STuple::new(arch));
                continue;
            }
            let s = out.as_mut().expect("set on first entry");
            let p: u64 = key.parse().map_err(|_| perr(key, here, "expected a prime"))?;
            if !is_prime(p) {
                return Err(perr(key, here, "not a prime"));
            }
            if s.finite.contains_key(&p) {
                return Err(perr(key, here, "prime listed twice"));
            }
            let vpos = here + key.len() + 1;
            let c = match (val, p == 2) {
                ("sp", _) => QuadAlgebraClass::SPLIT,
                ("in", _) => QuadAlgebraClass::INERT,
                ("rm", false) => QuadAlgebraClass::ramified(1, None),
                ("rm+", false) => QuadAlgebraClass::ramified(1, Some(0)),
                ("rm-", false) => QuadAlgebraClass::ramified(1, Some(1)),
                ("rm:d2", true) => QuadAlgebraClass::ramified(2, None),
                ("rm:d3", true) => QuadAlgebraClass::ramified(3, None),
                (_, true) => return Err(perr(val, vpos, "at p=2 use sp, in, rm:d2 or rm:d3")),
                (_, false) => return Err(perr(val, vpos, "at odd p use sp, in, rm, rm+ or rm-")),
            };
            s.finite.insert(p, c);
        }
        out.ok_or_else(|| perr(text, 0, "empty S-tuple"))
    }
}

/// Fraction of fundamental discriminants of one sign lying in a local class.
pub fn local_class_probability(p: u64, c: &QuadAlgebraClass) -> f64 {
    let p_f = p as f64;
    if p == 2 {
        // masses 1/2, 1/2, 1/8 per delta-2 class, 1/16 per delta-3 class; total 3/2
        let per_class = match c.kind {
            ClassKind::Split | ClassKind::Inert => 0.5,
            ClassKind::Ramified if c.delta == 2 => 0.125,
            ClassKind::Ramified => 0.0625,
        };
        let classes = match (c.kind, c.unit_tag) {
            (ClassKind::Ramified, None) if c.delta == 2 => 2.0,
            (ClassKind::Ramified, None) => 4.0,
            _ => 1.0,
        };
        per_class * classes / 1.5
    } else {
        match (c.kind, c.unit_tag) {
            (ClassKind::Split | ClassKind::Inert, _) => p_f / (2.0 * (p_f + 1.0)),
            (ClassKind::Ramified, None) => 1.0 / (p_f + 1.0),
            (ClassKind::Ramified, Some(_)) => 1.0 / (2.0 * (p_f + 1.0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker(5, 5), 0);
        assert_eq!(kronecker(-4, 5), 1);
        assert_eq!(kronecker(-4, 3), -1);
    }

    #[test]
    fn fundamental_examples() {
        assert!(is_fundamental(-4));
        assert!(!is_fundamental(9));
        assert!(is_fundamental(12));
        assert!(!is_fundamental(1));
        assert!(!is_fundamental(-12));
        assert!(is_fundamental(-8) && is_fundamental(8) && is_fundamental(-3));
    }

    #[test]
    fn local_class_examples() {
        let c = local_class(-4, 2);
        assert_eq!((c.kind, c.delta), (ClassKind::Ramified, 2));
        let c = local_class(5, 5);
        assert_eq!((c.kind, c.delta), (ClassKind::Ramified, 1));
        assert_eq!(local_class(-4, 5), QuadAlgebraClass::SPLIT);
        // Q_5(sqrt 5) versus Q_5(sqrt 10)
        assert_eq!(local_class(5, 5).unit_tag, Some(0));
        assert_eq!(local_class(40, 5).unit_tag, Some(1));
    }

    #[test]
    fn matches_examples() {
        let s = STuple::new(ArchClass::CC).with(5, QuadAlgebraClass::ramified(1, None));
        assert!(matches(-20, &s));
        let s = STuple::new(ArchClass::RR).with(5, QuadAlgebraClass::ramified(1, None));
        assert!(!matches(-20, &s));
        assert!(matches(-20, &STuple::new(ArchClass::CC).with(3, QuadAlgebraClass::SPLIT)));
        assert!(!matches(-20, &STuple::new(ArchClass::CC).with(3, QuadAlgebraClass::INERT)));
    }

    #[test]
    fn dual_disc_examples() {
        assert_eq!(dual_disc(-4, 5).unwrap(), -20);
        assert_eq!(dual_disc(-3, 5).unwrap(), -15);
        assert_eq!(dual_disc(8, 5).unwrap(), 40);
        assert_eq!(dual_disc(-20, 5).unwrap(), -4);
        assert_eq!(dual_disc(-4, 8).unwrap(), -8);
        assert!(dual_disc(5, 5).is_err());
    }

    #[test]
    fn splitting_examples() {
        assert_eq!(splitting_in_ktilde(5, 5), SplitType::Rm);
        assert_eq!(splitting_in_ktilde(7, 5), SplitType::In);
        assert_eq!(splitting_in_ktilde(11, 5), SplitType::Sp);
    }

    #[test]
    fn ramified_counts() {
        assert_eq!(count_ramified_classes(2, RamifiedQuery::Even(1), 1).unwrap(), 2);
        assert_eq!(count_ramified_classes(2, RamifiedQuery::Top, 1).unwrap(), 4);
        assert_eq!(count_ramified_classes(3, RamifiedQuery::Top, 0).unwrap(), 2);
        assert!(count_ramified_classes(2, RamifiedQuery::Even(2), 1).is_err());
        // the tagged enumeration realizes exactly these counts
        let c2 = all_classes(2);
        assert_eq!(c2.iter().filter(|c| c.delta == 2).count(), 2);
        assert_eq!(c2.iter().filter(|c| c.delta == 3).count(), 4);
    }

    #[test]
    fn every_local_class_occurs() {
        // each tagged class is realized by some fundamental discriminant
        for p in [2u64, 3, 5, 7] {
            for c in all_classes(p) {
                let hit = (-400i64..400).filter(|&d| is_fundamental(d)).any(|d| local_class(d, p) == c);
                assert!(hit, "class {c:?} at {p} unrealized");
            }
        }
    }

    #[test]
    fn twist_agrees_with_dual_disc() {
        for m in [5i64, -3, 13, -7, 21, -15] {
            for d in (-3000i64..3000).filter(|&d| is_fundamental(d) && d != m) {
                let ds = dual_disc(d, m).unwrap();
                for p in [2u64, 3, 5, 7, 11, 13] {
                    let tw = twist_local(&local_class(d, p), p, m).unwrap();
                    assert_eq!(tw, local_class(ds, p), "d={d} m={m} p={p}");
                }
                assert_eq!(arch_class(ds) == arch_class(d), m > 0);
            }
        }
    }

    #[test]
    fn untagged_ramified_at_m_needs_tag() {
        assert!(twist_local(&QuadAlgebraClass::ramified(1, None), 5, 5).is_err());
        assert_eq!(
            twist_local(&QuadAlgebraClass::ramified(1, Some(1)), 5, 5).unwrap(),
            QuadAlgebraClass::INERT
        );
        assert_eq!(twist_local(&QuadAlgebraClass::ramified(1, None), 3, 5).unwrap().delta, 1);
    }

    #[test]
    fn parse_examples() {
        let s: STuple = "inf=C;3=rm;7=sp".parse().unwrap();
        assert_eq!(s.arch, ArchClass::CC);
        assert_eq!(s.finite[&3], QuadAlgebraClass::ramified(1, None));
        assert_eq!(s.finite[&7], QuadAlgebraClass::SPLIT);
        assert_eq!(s.to_string(), "inf=C;3=rm;7=sp");
        assert_eq!("inf=R".parse::<STuple>().unwrap(), STuple::new(ArchClass::RR));
        match "inf=C;4=sp".parse::<STuple>() {
            Err(Error::Parse { token, pos, .. }) => assert_eq!((token.as_str(), pos), ("4", 6)),
            other => panic!("{other:?}"),
        }
        assert!("inf=C;2=rm".parse::<STuple>().is_err());
        assert!("inf=C;3=rm:d2".parse::<STuple>().is_err());
        assert!("3=sp".parse::<STuple>().is_err());
        assert!("inf=C;3=sp;3=in".parse::<STuple>().is_err());
        assert!("inf=C;3=spx".parse::<STuple>().is_err());
        let s: STuple = "inf=R;2=rm:d3;5=rm-".parse().unwrap();
        assert_eq!(s.to_string(), "inf=R;2=rm:d3;5=rm-");
    }

    #[test]
    fn local_probabilities_sum_to_one() {
        for p in [2u64, 3, 5, 7] {
            let total: f64 = all_classes(p).iter().map(|c| local_class_probability(p, c)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
