//! Local densities by brute force: arithmetic mod p^n in M(2,2) and in the
//! ramified quaternion order, orbit BFS of the group action on V = B + B,
//! stabilizer congruence counts and the majorant series.

use crate::arith::{is_prime, jacobi, primitive_root_prime_power};
use crate::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::str::FromStr;

/// Largest state space for the bitmap visited set.
pub const MAX_STATE_SPACE: u64 = 1 << 35;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FiniteRing {
    pub p: u64,
    pub n: u32,
    pub modulus: u64,
}

impl FiniteRing {
    pub fn new(p: u64, n: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::Invalid(format!("{p} is not prime")));
        }
        if n == 0 {
            return Err(Error::Invalid("exponent n must be at least 1".into()));
        }
        let modulus = p
            .checked_pow(n)
            .filter(|&m| m < 1 << 31)
            .ok_or_else(|| Error::Invalid(format!("{p}^{n} too large")))?;
        Ok(FiniteRing { p, n, modulus })
    }

    #[inline]
    pub fn red(&self, a: i64) -> u64 {
        a.rem_euclid(self.modulus as i64) as u64
    }
    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        (a + b) % self.modulus
    }
    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        (a + self.modulus - b) % self.modulus
    }
    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        a * b % self.modulus
    }
    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        (self.modulus - a) % self.modulus
    }

    /// p-adic valuation of a residue, `None` for zero.
    pub fn ord(&self, mut a: u64) -> Option<u32> {
        a %= self.modulus;
        if a == 0 {
            return None;
        }
        let mut k = 0;
        while a % self.p == 0 {
            a /= self.p;
            k += 1;
        }
        Some(k)
    }

    /// Generators of (Z/p^n)^x.
    pub fn unit_generators(&self) -> Vec<u64> {
        if self.p != 2 {
            return vec![primitive_root_prime_power(self.p, self.n) % self.modulus];
        }
        match self.n {
            1 => vec![],
            2 => vec![3],
            _ => vec![self.modulus - 1, 5],
        }
    }
}

/// Coordinates of an algebra element: matrix entries (a, b, c, d) row by row,
/// or (x0, x1, y0, y1) for (x0 + x1 θ) + (y0 + y1 θ)√π.
pub type AlgebraElt = [u64; 4];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algebra {
    Matrix(FiniteRing),
    /// θ² = c0 + c1 θ generates the unramified quadratic order.
    Quaternion { ring: FiniteRing, c0: u64, c1: u64 },
}

/// θ² = c0 + c1 θ with t² - c1 t - c0 irreducible mod p.
pub fn unramified_theta(p: u64) -> (u64, u64) {
    if p == 2 {
        (1, 1)
    } else {
        let u = (2..p).find(|&u| jacobi(u as i64, p) == -1).expect("odd prime has a nonresidue");
        (u, 0)
    }
}

impl Algebra {
    pub fn matrix(p: u64, n: u32) -> Result<Self> {
        Ok(Algebra::Matrix(FiniteRing::new(p, n)?))
    }

    pub fn quaternion(p: u64, n: u32) -> Result<Self> {
        let ring = FiniteRing::new(p, n)?;
        let (c0, c1) = unramified_theta(p);
        Ok(Algebra::Quaternion { ring, c0, c1 })
    }

    pub fn ring(&self) -> FiniteRing {
        match *self {
            Algebra::Matrix(r) => r,
            Algebra::Quaternion { ring, .. } => ring,
        }
    }

    pub fn is_division(&self) -> bool {
        matches!(self, Algebra::Quaternion { .. })
    }

    pub fn one(&self) -> AlgebraElt {
        match self {
            Algebra::Matrix(_) => [1, 0, 0, 1],
            Algebra::Quaternion { .. } => [1, 0, 0, 0],
        }
    }

    pub fn scalar(&self, s: u64) -> AlgebraElt {
        let s = s % self.ring().modulus;
        match self {
            Algebra::Matrix(_) => [s, 0, 0, s],
            Algebra::Quaternion { .. } => [s, 0, 0, 0],
        }
    }

    pub fn add(&self, a: &AlgebraElt, b: &AlgebraElt) -> AlgebraElt {
        let r = self.ring();
        [r.add(a[0], b[0]), r.add(a[1], b[1]), r.add(a[2], b[2]), r.add(a[3], b[3])]
    }

    pub fn scale(&self, s: u64, a: &AlgebraElt) -> AlgebraElt {
        let r = self.ring();
        [r.mul(s, a[0]), r.mul(s, a[1]), r.mul(s, a[2]), r.mul(s, a[3])]
    }

    #[inline]
    fn fmul(r: &FiniteRing, c0: u64, c1: u64, x: (u64, u64), y: (u64, u64)) -> (u64, u64) {
        let x1y1 = r.mul(x.1, y.1);
        (
            (x.0 * y.0 + c0 * x1y1) % r.modulus,
            (x.0 * y.1 + x.1 * y.0 + c1 * x1y1) % r.modulus,
        )
    }

    #[inline]
    fn fsigma(r: &FiniteRing, c1: u64, x: (u64, u64)) -> (u64, u64) {
        ((x.0 + c1 * x.1) % r.modulus, r.neg(x.1))
    }

    #[inline]
    fn fnorm(r: &FiniteRing, c0: u64, c1: u64, x: (u64, u64)) -> u64 {
        let s = x.0 * x.0 + c1 * r.mul(x.0, x.1);
        r.sub(s % r.modulus, r.mul(c0, r.mul(x.1, x.1)))
    }

    #[inline]
    pub fn mul(&self, a: &AlgebraElt, b: &AlgebraElt) -> AlgebraElt {
        match *self {
            Algebra::Matrix(r) => {
                let m = r.modulus;
                [
                    (a[0] * b[0] + a[1] * b[2]) % m,
                    (a[0] * b[1] + a[1] * b[3]) % m,
                    (a[2] * b[0] + a[3] * b[2]) % m,
                    (a[2] * b[1] + a[3] * b[3]) % m,
                ]
            }
            Algebra::Quaternion { ring: r, c0, c1 } => {
                // (α1 + β1√π)(α2 + β2√π) = α1α2 + p β1 β2^σ + (α1β2 + β1 α2^σ)√π
                let (a1, b1) = ((a[0], a[1]), (a[2], a[3]));
                let (a2, b2) = ((b[0], b[1]), (b[2], b[3]));
                let aa = Self::fmul(&r, c0, c1, a1, a2);
                let bb = Self::fmul(&r, c0, c1, b1, Self::fsigma(&r, c1, b2));
                let ab = Self::fmul(&r, c0, c1, a1, b2);
                let ba = Self::fmul(&r, c0, c1, b1, Self::fsigma(&r, c1, a2));
                let p = r.p % r.modulus;
                [
                    (aa.0 + p * bb.0) % r.modulus,
                    (aa.1 + p * bb.1) % r.modulus,
                    r.add(ab.0, ba.0),
                    r.add(ab.1, ba.1),
                ]
            }
        }
    }

    /// Reduced norm: determinant, or N(α) - p N(β).
    pub fn norm(&self, a: &AlgebraElt) -> u64 {
        match *self {
            Algebra::Matrix(r) => r.sub(r.mul(a[0], a[3]), r.mul(a[1], a[2])),
            Algebra::Quaternion { ring: r, c0, c1 } => {
                let na = Self::fnorm(&r, c0, c1, (a[0], a[1]));
                let nb = Self::fnorm(&r, c0, c1, (a[2], a[3]));
                r.sub(na, r.mul(r.p % r.modulus, nb))
            }
        }
    }

    pub fn is_unit(&self, a: &AlgebraElt) -> bool {
        self.norm(a) % self.ring().p != 0
    }

    pub fn theta(&self) -> Option<AlgebraElt> {
        match self {
            Algebra::Quaternion { .. } => Some([0, 1, 0, 0]),
            Algebra::Matrix(_) => None,
        }
    }

    pub fn sqrt_pi(&self) -> Option<AlgebraElt> {
        match self {
            Algebra::Quaternion { .. } => Some([0, 0, 1, 0]),
            Algebra::Matrix(_) => None,
        }
    }

    /// Number of elements of the ring mod p^n.
    pub fn size(&self) -> u64 {
        self.ring().modulus.pow(4)
    }

    fn index(&self, a: &AlgebraElt) -> u64 {
        let m = self.ring().modulus;
        ((a[3] * m + a[2]) * m + a[1]) * m + a[0]
    }

    /// Order of the unit group mod p^n.
    pub fn unit_group_order(&self) -> BigInt {
        let r = self.ring();
        group_factor_order(r.p, r.n, self.is_division())
    }

    /// Generators of the unit group mod p^n; completeness is checked by `unit_group`.
    pub fn unit_generators(&self) -> Vec<AlgebraElt> {
        let r = self.ring();
        let mut gens = Vec::new();
        match *self {
            Algebra::Matrix(_) => {
                gens.push([1, 1, 0, 1]);
                gens.push([1, 0, 1, 1]);
                gens.push([0, 1, 1, 0]);
                for u in r.unit_generators() {
                    gens.push([u, 0, 0, 1]);
                }
            }
            Algebra::Quaternion { c0, c1, .. } => {
                let p = r.p;
                gens.push([0, 1, 0, 0]);
                gens.push([1, 1, 0, 0]);
                // a generator of the residue field units, lifted
                let fp = FiniteRing { p, n: 1, modulus: p };
                let target = p * p - 1;
                'search: for x0 in 0..p {
                    for x1 in 1..p {
                        let mut y = (x0, x1);
                        let mut k = 1;
                        while y != (1, 0) {
                            y = Self::fmul(&fp, c0 % p, c1 % p, y, (x0, x1));
                            k += 1;
                            if k > target {
                                break;
                            }
                        }
                        if k == target {
                            gens.push([x0, x1, 0, 0]);
                            break 'search;
                        }
                    }
                }
                for u in r.unit_generators() {
                    gens.push([u, 0, 0, 0]);
                }
                if r.n > 1 {
                    gens.push([(1 + p) % r.modulus, 0, 0, 0]);
                    gens.push([1, p % r.modulus, 0, 0]);
                }
                gens.push([1, 0, 1, 0]);
                gens.push([1, 0, 0, 1]);
            }
        }
        gens
    }

    /// All units mod p^n, generated by closure. Errors if the generators fall short.
    pub fn unit_group(&self) -> Result<Vec<AlgebraElt>> {
        let size = self.size();
        if size > 1 << 28 {
            return Err(Error::Guard(format!("unit group enumeration over {size} elements")));
        }
        let gens = self.unit_generators();
        let mut seen = vec![false; size as usize];
        let one = self.one();
        seen[self.index(&one) as usize] = true;
        let mut out = vec![one];
        let mut head = 0;
        while head < out.len() {
            let x = out[head];
            head += 1;
            for g in &gens {
                let y = self.mul(&x, g);
                let i = self.index(&y) as usize;
                if !seen[i] {
                    seen[i] = true;
                    out.push(y);
                }
            }
        }
        let expected = self.unit_group_order();
        if BigInt::from(out.len()) != expected {
            return Err(Error::Inconsistency(format!(
                "unit generators produce {} elements, expected {expected}",
                out.len()
            )));
        }
        Ok(out)
    }
}

/// Checks associativity, distributivity and multiplicativity of the norm on random triples.
pub fn check_ring_laws(alg: &Algebra, trials: usize, seed: u64) -> Result<()> {
    let m = alg.ring().modulus;
    let r = alg.ring();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> AlgebraElt { std::array::from_fn(|_| rng.gen_range(0..m)) };
    for _ in 0..trials {
        let (a, b, c) = (draw(), draw(), draw());
        if alg.mul(&alg.mul(&a, &b), &c) != alg.mul(&a, &alg.mul(&b, &c)) {
            return Err(Error::Inconsistency(format!("associativity fails for {a:?} {b:?} {c:?}")));
        }
        if alg.mul(&a, &alg.add(&b, &c)) != alg.add(&alg.mul(&a, &b), &alg.mul(&a, &c)) {
            return Err(Error::Inconsistency(format!("distributivity fails for {a:?} {b:?} {c:?}")));
        }
        if alg.norm(&alg.mul(&a, &b)) != r.mul(alg.norm(&a), alg.norm(&b)) {
            return Err(Error::Inconsistency(format!("norm not multiplicative for {a:?} {b:?}")));
        }
    }
    Ok(())
}

/// A point (x1, x2) of V = B + B over the finite quotient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VPoint {
    pub x1: AlgebraElt,
    pub x2: AlgebraElt,
}

impl VPoint {
    fn encode(&self, m: u64) -> u64 {
        let mut code = 0u64;
        for &c in self.x2.iter().rev().chain(self.x1.iter().rev()) {
            code = code * m + c;
        }
        code
    }

    fn decode(mut code: u64, m: u64) -> Self {
        let mut c = [0u64; 8];
        for slot in c.iter_mut() {
            *slot = code % m;
            code /= m;
        }
        VPoint { x1: [c[0], c[1], c[2], c[3]], x2: [c[4], c[5], c[6], c[7]] }
    }
}

/// Coefficients (a0, a1, a2) of N(v1 x1 + v2 x2) = a0 v1² + a1 v1 v2 + a2 v2².
pub fn binary_form(alg: &Algebra, x: &VPoint) -> (u64, u64, u64) {
    let r = alg.ring();
    let a0 = alg.norm(&x.x1);
    let a2 = alg.norm(&x.x2);
    let s = alg.norm(&alg.add(&x.x1, &x.x2));
    (a0, r.sub(r.sub(s, a0), a2), a2)
}

/// P(x) = a1² - 4 a0 a2.
pub fn rel_invariant(alg: &Algebra, x: &VPoint) -> u64 {
    let r = alg.ring();
    let (a0, a1, a2) = binary_form(alg, x);
    r.sub(r.mul(a1, a1), r.mul(4 % r.modulus, r.mul(a0, a2)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocalType {
    UrSp,
    UrUr,
    UrRm,
    RmUr,
    RmRm,
}

impl LocalType {
    pub const ALL: [LocalType; 5] = [LocalType::UrSp, LocalType::UrUr, LocalType::UrRm, LocalType::RmUr, LocalType::RmRm];

    /// Whether the representative lives in the ramified quaternion order.
    pub fn over_division(&self) -> bool {
        matches!(self, LocalType::RmUr | LocalType::RmRm)
    }

    pub fn ramified_extension(&self) -> bool {
        matches!(self, LocalType::UrRm | LocalType::RmRm)
    }
}

impl fmt::Display for LocalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LocalType::UrSp => "ur-sp",
            LocalType::UrUr => "ur-ur",
            LocalType::UrRm => "ur-rm",
            LocalType::RmUr => "rm-ur",
            LocalType::RmRm => "rm-rm",
        })
    }
}

impl FromStr for LocalType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LocalType::ALL
            .into_iter()
            .find(|t| t.to_string() == s.trim())
            .ok_or_else(|| Error::Invalid(format!("unknown local type `{s}` (ur-sp, ur-ur, ur-rm, rm-ur, rm-rm)")))
    }
}

/// Coefficients (a1, a2) of the Eisenstein polynomial t² + a1 t + a2 of the
/// standard ramified representative, with the congruence level n = δ + 2m + 1.
pub fn ramified_coefficients(p: u64, delta: u32) -> Result<(i64, i64, u32)> {
    if p == 2 {
        match delta {
            2 => Ok((2, 2, 5)),
            3 => Ok((0, -2, 6)),
            _ => Err(Error::Invalid(format!("dyadic disc exponent {delta} not in {{2, 3}}"))),
        }
    } else if delta == 1 {
        let (u, _) = unramified_theta(p);
        Ok((0, -((p * u) as i64), 2))
    } else {
        Err(Error::Invalid(format!("disc exponent at odd p is 1, got {delta}")))
    }
}

/// Level at which the orbit mod p^n determines the p-adic orbit.
pub fn orbit_level(p: u64, class: LocalType) -> u32 {
    let m = u32::from(p == 2);
    let delta = if class.ramified_extension() {
        if p == 2 { 2 } else { 1 }
    } else {
        0
    };
    if p != 2 && !class.ramified_extension() {
        1
    } else {
        delta + 2 * m + 1
    }
}

/// The standard representative of the given type.
pub fn std_rep(alg: &Algebra, class: LocalType) -> Result<VPoint> {
    let r = alg.ring();
    if class.over_division() != alg.is_division() {
        return Err(Error::Invalid(format!(
            "type {class} needs the {} order",
            if class.over_division() { "quaternion" } else { "matrix" }
        )));
    }
    let (c0, c1) = unramified_theta(r.p);
    let one = alg.one();
    let x = match class {
        LocalType::UrSp => VPoint { x1: one, x2: [0, 0, 1, 1] },
        LocalType::UrUr => VPoint { x1: one, x2: [0, c0 % r.modulus, 1, c1 % r.modulus] },
        LocalType::UrRm => {
            if r.p == 2 {
                return Err(Error::Invalid("dyadic ur-rm orbits are checked through stabilizer counts".into()));
            }
            let (a1, a2, _) = ramified_coefficients(r.p, 1)?;
            let (a1, a2) = (r.red(a1), r.red(a2));
            let a1sq = r.mul(a1, a1);
            VPoint { x1: [0, 1, 1, a1], x2: [1, a1, a1, r.sub(a1sq, a2)] }
        }
        LocalType::RmUr => VPoint { x1: one, x2: alg.theta().expect("quaternion") },
        LocalType::RmRm => VPoint { x1: one, x2: alg.sqrt_pi().expect("quaternion") },
    };
    Ok(x)
}

fn big_pow(p: u64, e: u32) -> BigInt {
    BigInt::from(p).pow(e)
}

/// Order of one factor of the group mod p^n: GL2, or the unit group of the ramified order.
pub fn group_factor_order(p: u64, n: u32, ramified: bool) -> BigInt {
    let p2m1 = BigInt::from(p * p - 1);
    if ramified {
        big_pow(p, 4 * n - 2) * p2m1
    } else {
        big_pow(p, 4 * n - 3) * BigInt::from(p - 1) * p2m1
    }
}

/// |G mod p^n| for G = B^x × B^x × GL2.
pub fn group_order(p: u64, n: u32, ramified: bool) -> BigInt {
    let b = group_factor_order(p, n, ramified);
    let gl = group_factor_order(p, n, false);
    &b * &b * gl
}

#[derive(Clone, Copy, Debug)]
pub struct OrbitOptions {
    pub mem_cap_bytes: u64,
    pub escape_trials: usize,
    pub seed: u64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions { mem_cap_bytes: 3 << 30, escape_trials: 10_000, seed: 0x5eed }
    }
}

/// Size of the orbit of `x` mod p^n under B^x × B^x × GL2.
pub fn orbit_bfs(alg: &Algebra, x: &VPoint, opts: &OrbitOptions) -> Result<u64> {
    let r = alg.ring();
    let m = r.modulus;
    let states = m
        .checked_pow(8)
        .filter(|&s| s <= MAX_STATE_SPACE)
        .ok_or_else(|| Error::Guard(format!("state space {}^8 exceeds 2^35", m)))?;
    let bitmap_bytes = states.div_ceil(64) * 8;
    if bitmap_bytes > opts.mem_cap_bytes {
        return Err(Error::Guard(format!("bitmap needs {bitmap_bytes} bytes, cap {}", opts.mem_cap_bytes)));
    }
    let units = alg.unit_group()?;
    let gl_alg = Algebra::Matrix(r);
    let gl = gl_alg.unit_group()?;
    let bgens = alg.unit_generators();
    let glgens = gl_alg.unit_generators();

    let mut visited = vec![0u64; (states as usize).div_ceil(64)];
    let mark = |v: &mut [u64], c: u64| -> bool {
        let (w, b) = ((c / 64) as usize, c % 64);
        let fresh = v[w] >> b & 1 == 0;
        v[w] |= 1 << b;
        fresh
    };
    let start = x.encode(m);
    mark(&mut visited, start);
    let mut queue = vec![start];
    let mut head = 0;
    while head < queue.len() {
        let y = VPoint::decode(queue[head], m);
        head += 1;
        let push = |z: VPoint, visited: &mut [u64], queue: &mut Vec<u64>| -> Result<()> {
            let c = z.encode(m);
            if mark(visited, c) {
                queue.push(c);
                if bitmap_bytes + 8 * queue.len() as u64 > opts.mem_cap_bytes {
                    return Err(Error::Guard(format!("orbit queue exceeds memory cap {}", opts.mem_cap_bytes)));
                }
            }
            Ok(())
        };
        for g in &bgens {
            push(VPoint { x1: alg.mul(g, &y.x1), x2: alg.mul(g, &y.x2) }, &mut visited, &mut queue)?;
            push(VPoint { x1: alg.mul(&y.x1, g), x2: alg.mul(&y.x2, g) }, &mut visited, &mut queue)?;
        }
        for h in &glgens {
            let z = mix(alg, h, &y);
            push(z, &mut visited, &mut queue)?;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.escape_trials {
        let y = VPoint::decode(queue[rng.gen_range(0..queue.len())], m);
        let g1 = &units[rng.gen_range(0..units.len())];
        let g2 = &units[rng.gen_range(0..units.len())];
        let h = &gl[rng.gen_range(0..gl.len())];
        let z = VPoint {
            x1: alg.mul(&alg.mul(g1, &y.x1), g2),
            x2: alg.mul(&alg.mul(g1, &y.x2), g2),
        };
        let c = mix(alg, h, &z).encode(m);
        if visited[(c / 64) as usize] >> (c % 64) & 1 == 0 {
            return Err(Error::Inconsistency(format!(
                "random group element leaves the computed orbit (p={}, n={})",
                r.p, r.n
            )));
        }
    }
    Ok(queue.len() as u64)
}

#[inline]
fn mix(alg: &Algebra, h: &AlgebraElt, y: &VPoint) -> VPoint {
    VPoint {
        x1: alg.add(&alg.scale(h[0], &y.x1), &alg.scale(h[1], &y.x2)),
        x2: alg.add(&alg.scale(h[2], &y.x1), &alg.scale(h[3], &y.x2)),
    }
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn one_pm(q: u64, k: u32, sign: i64) -> BigRational {
    BigRational::one() + BigRational::new(BigInt::from(sign), big_pow(q, k))
}

/// Closed-form local density ε of the standard representative; `delta` is the
/// disc exponent of the ramified extension (ignored otherwise).
pub fn epsilon_closed_form(q: u64, class: LocalType, delta: u32) -> BigRational {
    let half = rat(1, 2);
    let qd = BigRational::new(BigInt::one(), big_pow(q, delta));
    match class {
        LocalType::UrSp => half * one_pm(q, 1, 1) * one_pm(q, 2, -1).pow(2),
        LocalType::UrUr => half * one_pm(q, 1, -1).pow(3) * one_pm(q, 2, -1),
        LocalType::UrRm => half * qd * one_pm(q, 1, -1) * one_pm(q, 2, -1).pow(3),
        LocalType::RmUr => half * one_pm(q, 2, -1) * one_pm(q, 1, -1),
        LocalType::RmRm => half * qd * one_pm(q, 1, 1) * one_pm(q, 2, -1).pow(2),
    }
}

/// Required value of vol/ε, or `None` where it is measured.
pub fn expected_relation(class: LocalType) -> Option<i64> {
    match class {
        LocalType::UrRm | LocalType::RmRm => Some(1),
        LocalType::RmUr => Some(2),
        LocalType::UrSp | LocalType::UrUr => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitReport {
    pub p: u64,
    pub n: u32,
    pub class: LocalType,
    pub orbit_size: u64,
    pub volume: BigRational,
    pub epsilon_expected: BigRational,
    pub relation_factor: BigRational,
    pub status: String,
}

impl OrbitReport {
    pub const CSV_HEADER: &'static str =
        "p,n,class,orbit_size,volume_num,volume_den,epsilon_num,epsilon_den,relation_factor,status";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.p,
            self.n,
            self.class,
            self.orbit_size,
            self.volume.numer(),
            self.volume.denom(),
            self.epsilon_expected.numer(),
            self.epsilon_expected.denom(),
            self.relation_factor,
            self.status
        )
    }
}

/// Orbit size and volume orbit_size / p^{8n} of the standard representative at level n.
pub fn orbit_volume(p: u64, n: u32, class: LocalType, opts: &OrbitOptions) -> Result<(u64, BigRational)> {
    let alg = if class.over_division() { Algebra::quaternion(p, n)? } else { Algebra::matrix(p, n)? };
    let x = std_rep(&alg, class)?;
    let size = orbit_bfs(&alg, &x, opts)?;
    Ok((size, BigRational::new(BigInt::from(size), big_pow(p, 8 * n))))
}

/// Measures vol(K x) by BFS at the level where the orbit is determined and
/// compares it with the closed-form ε.
pub fn epsilon_from_orbit(p: u64, class: LocalType, opts: &OrbitOptions) -> Result<OrbitReport> {
    if p == 2 && class.ramified_extension() {
        return Err(Error::Guard("dyadic ramified orbits need 2^40 states; use stabilizer counts".into()));
    }
    orbit_report(p, orbit_level(p, class), class, opts)
}

/// Same as `epsilon_from_orbit` at an explicit level `n >= orbit_level(p, class)`.
pub fn orbit_report(p: u64, n: u32, class: LocalType, opts: &OrbitOptions) -> Result<OrbitReport> {
    let level = orbit_level(p, class);
    if n < level {
        return Err(Error::Invalid(format!("{class} at p={p} needs n >= {level}")));
    }
    let (orbit_size, volume) = orbit_volume(p, n, class, opts)?;
    let delta = u32::from(class.ramified_extension());
    let epsilon_expected = epsilon_closed_form(p, class, delta);
    let relation_factor = &volume / &epsilon_expected;
    let status = match expected_relation(class) {
        Some(k) if relation_factor == BigRational::from_integer(k.into()) => "ok".to_string(),
        Some(k) => {
            return Err(Error::Inconsistency(format!(
                "{class} at p={p}, n={n}: vol/ε = {relation_factor}, expected {k}"
            )))
        }
        None if relation_factor == BigRational::one() || relation_factor == rat(2, 1) => {
            "measured".to_string()
        }
        None => {
            return Err(Error::Inconsistency(format!(
                "{class} at p={p}, n={n}: vol/ε = {relation_factor} not in {{1, 2}}"
            )))
        }
    };
    Ok(OrbitReport { p, n, class, orbit_size, volume, epsilon_expected, relation_factor, status })
}

/// Number of (u, s) mod p^n with 2u + a1 s = a1 and u² + a1 s u + a2 s² = a2.
pub fn stabilizer_congruence_count(p: u64, n: u32, a1: i64, a2: i64) -> Result<u64> {
    let r = FiniteRing::new(p, n)?;
    let m = r.modulus as i64;
    let (a1, a2) = (a1.rem_euclid(m), a2.rem_euclid(m));
    let mut count = 0;
    for u in 0..m {
        for s in 0..m {
            if (2 * u + a1 * s - a1).rem_euclid(m) != 0 {
                continue;
            }
            let e = (u * u % m + a1 * s % m * u % m + a2 * (s * s % m) % m - a2).rem_euclid(m);
            if e == 0 {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// vol(K x) for a ramified-extension type assembled from the stabilizer count:
/// |GL2 mod p^n|³ / (p^{8n} · count · |(O_E / p^n)^x|²).
pub fn volume_from_stabilizer(p: u64, n: u32, count: u64) -> BigRational {
    let gl = group_factor_order(p, n, false);
    let torus = big_pow(p, 2 * n - 1) * BigInt::from(p - 1);
    BigRational::new(gl.pow(3), big_pow(p, 8 * n) * BigInt::from(count) * torus.pow(2))
}

/// Coefficients l_0..l_N in t = q^{-s} of
/// (1 + 29 q^{-2(s-1)} - 21 q^{-4(s-1)} + 7 q^{-6(s-1)}) / ((1 - q^{-(2s-1)})(1 - q^{-2(s-1)})^4).
pub fn majorant_series(q: u64, n_max: usize) -> Result<Vec<BigInt>> {
    if n_max > 64 {
        return Err(Error::Invalid(format!("series length {n_max} exceeds 64")));
    }
    // in y = t²: q^{-2(s-1)} = q² y and q^{-(2s-1)} = q y
    let len = n_max / 2 + 1;
    let q = BigInt::from(q);
    let q2 = &q * &q;
    let mut series = vec![BigInt::zero(); len];
    for (k, c) in [1i64, 29, -21, 7].into_iter().enumerate() {
        if k < len {
            series[k] = BigInt::from(c) * q2.pow(k as u32);
        }
    }
    let divide = |ratio: &BigInt, series: &mut Vec<BigInt>| {
        for k in 1..len {
            let prev = &series[k - 1] * ratio;
            series[k] += prev;
        }
    };
    divide(&q, &mut series);
    for _ in 0..4 {
        divide(&q2, &mut series);
    }
    let mut out = vec![BigInt::zero(); n_max + 1];
    for (k, c) in series.into_iter().enumerate() {
        if c.is_negative() {
            return Err(Error::Inconsistency(format!("majorant coefficient of t^{} is {c}", 2 * k)));
        }
        out[2 * k] = c;
    }
    Ok(out)
}

/// The orbit tasks that pin the closed forms.
pub fn standard_tasks() -> Vec<(u64, LocalType)> {
    vec![
        (3, LocalType::UrSp),
        (3, LocalType::UrUr),
        (3, LocalType::RmUr),
        (3, LocalType::UrRm),
        (3, LocalType::RmRm),
        (5, LocalType::UrSp),
        (5, LocalType::UrUr),
        (5, LocalType::RmUr),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_forms_of_examples() {
        let alg = Algebra::matrix(3, 1).unwrap();
        let x = VPoint { x1: alg.one(), x2: [0, 0, 1, 1] };
        assert_eq!(binary_form(&alg, &x), (1, 1, 0));
        assert_eq!(rel_invariant(&alg, &x), 1);
        let z = VPoint { x1: alg.one(), x2: [0; 4] };
        assert_eq!(binary_form(&alg, &z), (1, 0, 0));
        assert_eq!(rel_invariant(&alg, &z), 0);

        let alg = Algebra::matrix(3, 3).unwrap();
        let x = std_rep(&alg, LocalType::UrRm).unwrap();
        assert_eq!(x.x2, [1, 0, 0, 6]);
        assert_eq!(alg.ring().ord(rel_invariant(&alg, &x)), Some(1));
    }

    #[test]
    fn std_reps_have_expected_valuation() {
        for p in [3u64, 5, 7] {
            for class in LocalType::ALL {
                let alg = if class.over_division() {
                    Algebra::quaternion(p, 3).unwrap()
                } else {
                    Algebra::matrix(p, 3).unwrap()
                };
                let x = std_rep(&alg, class).unwrap();
                let d = u32::from(class.ramified_extension());
                assert_eq!(alg.ring().ord(rel_invariant(&alg, &x)), Some(d), "{p} {class}");
            }
        }
        let alg = Algebra::quaternion(3, 1).unwrap();
        assert!(std_rep(&alg, LocalType::UrSp).is_err());
    }

    #[test]
    fn ring_laws_hold() {
        for (p, n) in [(2u64, 1u32), (2, 4), (3, 2), (5, 1), (7, 2)] {
            check_ring_laws(&Algebra::matrix(p, n).unwrap(), 2000, p).unwrap();
            check_ring_laws(&Algebra::quaternion(p, n).unwrap(), 2000, p).unwrap();
        }
    }

    #[test]
    fn quaternion_relations() {
        let alg = Algebra::quaternion(5, 2).unwrap();
        let t = alg.theta().unwrap();
        let j = alg.sqrt_pi().unwrap();
        assert_eq!(alg.mul(&j, &j), alg.scalar(5));
        // √π θ = θ^σ √π = -θ √π
        let jt = alg.mul(&j, &t);
        let tj = alg.mul(&t, &j);
        assert_eq!(alg.add(&jt, &tj), [0; 4]);
    }

    #[test]
    fn group_orders() {
        assert_eq!(group_order(3, 1, false), BigInt::from(110592));
        assert_eq!(group_order(3, 1, true), BigInt::from(248832));
        assert_eq!(group_order(3, 2, true), BigInt::from(5832u64 * 5832 * 3888));
        for (p, n) in [(2u64, 1u32), (2, 3), (3, 1), (3, 2), (5, 1)] {
            Algebra::matrix(p, n).unwrap().unit_group().unwrap();
            Algebra::quaternion(p, n).unwrap().unit_group().unwrap();
        }
    }

    #[test]
    fn rm_ur_volume_at_three() {
        let r = epsilon_from_orbit(3, LocalType::RmUr, &OrbitOptions::default()).unwrap();
        assert_eq!(r.volume, rat(16, 27));
        assert_eq!(r.epsilon_expected, rat(8, 27));
        assert_eq!(r.status, "ok");
    }

    #[test]
    fn stabilizer_counts() {
        for (p, delta) in [(3u64, 1u32), (5, 1), (7, 1), (2, 2), (2, 3)] {
            let (a1, a2, n) = ramified_coefficients(p, delta).unwrap();
            let c = stabilizer_congruence_count(p, n, a1, a2).unwrap();
            assert_eq!(c, 2 * p.pow(delta), "{p} {delta}");
            assert_eq!(volume_from_stabilizer(p, n, c), epsilon_closed_form(p, LocalType::UrRm, delta));
        }
        assert_eq!(stabilizer_congruence_count(3, 2, 0, -6).unwrap(), 6);
    }

    #[test]
    fn majorant() {
        for q in [2u64, 3, 5] {
            let l = majorant_series(q, 64).unwrap();
            assert_eq!(l[0], BigInt::one());
            assert!(l[1].is_zero());
            assert_eq!(l[2], BigInt::from(q + 33 * q * q));
            assert!(l.iter().skip(1).step_by(2).all(|c| c.is_zero()));
        }
        assert!(majorant_series(2, 65).is_err());
    }

    #[test]
    fn epsilon_values() {
        assert_eq!(epsilon_closed_form(3, LocalType::UrRm, 1), rat(512, 6561));
        assert_eq!(epsilon_closed_form(3, LocalType::RmRm, 1), rat(128, 729));
        assert_eq!("rm-rm".parse::<LocalType>().unwrap(), LocalType::RmRm);
        assert!("rm".parse::<LocalType>().is_err());
    }
}
