use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use quadmoment_core::arith::{is_prime, spf_table};
use quadmoment_core::density::{big_e_v, big_f_v, correlation_factor, e_v, f_v};
use quadmoment_core::localdata::{
    all_classes, dual_disc, is_fundamental, local_class, matches, ArchClass, ClassKind, QuadAlgebraClass, STuple,
    SplitType,
};
use quadmoment_core::orbitcount::{
    check_ring_laws, majorant_series, ramified_coefficients, stabilizer_congruence_count, Algebra,
};
use quadmoment_core::quadfields::{
    class_number_imag_analytic, class_number_imag_forms, sieve_class_numbers_imag, ClassNumberTable, FieldRecord,
    HRCache,
};

const SMALL_PRIMES: [u64; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

fn fundamental(max: i64) -> impl Strategy<Value = i64> {
    (3..=max, any::<bool>())
        .prop_map(|(a, neg)| if neg { -a } else { a })
        .prop_filter("fundamental", |&d| is_fundamental(d))
}

fn prime_up_to(max: u64) -> impl Strategy<Value = u64> {
    (2..=max).prop_filter("prime", |&q| is_prime(q))
}

fn stuple() -> impl Strategy<Value = STuple> {
    (any::<bool>(), proptest::collection::vec((0usize..10, 0usize..8), 0..4)).prop_map(|(cc, picks)| {
        let mut s = STuple::new(if cc { ArchClass::CC } else { ArchClass::RR });
        for (i, j) in picks {
            let p = SMALL_PRIMES[i];
            let classes = all_classes(p);
            s = s.with(p, classes[j % classes.len()]);
        }
        s
    })
}

fn imag_table() -> &'static ClassNumberTable {
    static T: OnceLock<ClassNumberTable> = OnceLock::new();
    T.get_or_init(|| sieve_class_numbers_imag(1_000_000))
}

fn spf() -> &'static [u32] {
    static S: OnceLock<Vec<u32>> = OnceLock::new();
    S.get_or_init(|| spf_table(1_000_000))
}

fn inv(q: u64, k: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(q).pow(k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn one_kind_and_ramified_iff_divides(d in fundamental(1_000_000), i in 0usize..10) {
        let p = SMALL_PRIMES[i];
        let c = local_class(d, p);
        prop_assert_eq!(c.kind == ClassKind::Ramified, d % p as i64 == 0);
        prop_assert!(c.check(p).is_ok());
    }

    #[test]
    fn delta_ranges(d in fundamental(1_000_000), i in 0usize..10) {
        let p = SMALL_PRIMES[i];
        let delta = local_class(d, p).delta;
        if p == 2 {
            prop_assert!([0, 2, 3].contains(&delta));
        } else {
            prop_assert!(delta <= 1);
        }
    }

    #[test]
    fn dual_is_involution(d in fundamental(1_000_000), mi in 0usize..8) {
        let m = [5i64, -3, -7, 13, -11, 17, -4, 8][mi];
        prop_assume!(d != m);
        let ds = dual_disc(d, m).unwrap();
        prop_assert!(is_fundamental(ds));
        prop_assert_ne!(ds, m);
        prop_assert_eq!(dual_disc(ds, m).unwrap(), d);
    }

    #[test]
    fn matches_monotone_under_restriction(d in fundamental(200_000), s in stuple(), mask in any::<u16>()) {
        let t = s.restrict(|p| mask >> SMALL_PRIMES.iter().position(|&q| q == p).unwrap() & 1 == 1);
        if matches(d, &s) {
            prop_assert!(matches(d, &t));
        }
    }

    #[test]
    fn sieve_agrees_with_forms(start in 3u64..=999_900) {
        let n = (start..).find(|&n| is_fundamental(-(n as i64))).unwrap();
        let d = -(n as i64);
        let h = class_number_imag_forms(d).unwrap();
        prop_assert_eq!(imag_table().get(n).map(u64::from), Some(h));
        prop_assert_eq!(class_number_imag_analytic(d, spf()), h);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mass_formulas(q in prime_up_to(10_000)) {
        let sum = all_classes(q).iter().fold(BigRational::zero(), |a, c| a + e_v(q, c).value);
        prop_assert_eq!(&sum, &big_e_v(q).value);
        if q != 2 {
            let f = all_classes(q)
                .iter()
                .fold(BigRational::zero(), |a, c| a + f_v(q, c, SplitType::In, false).unwrap().value);
            let big_f = big_f_v(q, SplitType::In).unwrap().value;
            prop_assert_eq!(&f, &big_f);
            let one = BigRational::one();
            let alpha = (&one - inv(q, 2)).pow(2) / (&one - inv(q, 4)) * &big_f / big_e_v(q).value;
            prop_assert_eq!(alpha, correlation_factor(q).value);
        }
    }

    #[test]
    fn euler_factors_in_unit_interval(q in prime_up_to(10_000)) {
        let one = BigRational::one();
        for c in all_classes(q) {
            let e = e_v(q, &c).value;
            prop_assert!(e > BigRational::zero() && e <= one);
        }
        let e = big_e_v(q).value;
        prop_assert!(e > BigRational::zero() && e <= one);
    }

    #[test]
    fn ring_laws(seed in any::<u64>(), pi in 0usize..5, n in 1u32..4) {
        let p = [2u64, 3, 5, 7, 11][pi];
        check_ring_laws(&Algebra::matrix(p, n).unwrap(), 500, seed).unwrap();
        check_ring_laws(&Algebra::quaternion(p, n).unwrap(), 500, seed).unwrap();
    }

    #[test]
    fn cache_round_trip(recs in proptest::collection::vec((fundamental(10_000_000), 1u64..100_000, 0.01f64..1e6), 0..40)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hr.cache");
        let mut c = HRCache::open(&path).unwrap();
        let mut want = std::collections::BTreeMap::new();
        for &(d, h, r) in &recs {
            let r = if d < 0 { 1.0 } else { r };
            c.insert(&FieldRecord { d, h, r, abs_norm_disc: d.unsigned_abs() });
            want.insert(d, (h, r));
        }
        c.save().unwrap();
        let back = HRCache::open(&path).unwrap();
        prop_assert_eq!(back.len(), want.len());
        for (d, (h, r)) in want {
            let got = back.get(d).unwrap();
            prop_assert_eq!(got.h, h);
            prop_assert!((got.r - r).abs() <= 1e-10 * r);
        }
        prop_assert_eq!(back.render(), c.render());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn majorant_nonnegative(q in prime_up_to(100)) {
        let l = majorant_series(q, 64).unwrap();
        prop_assert_eq!(&l[0], &BigInt::one());
        prop_assert_eq!(&l[2], &BigInt::from(q + 33 * q * q));
    }

    #[test]
    fn stabilizer_counts_odd(p in prime_up_to(23).prop_filter("odd", |&p| p != 2)) {
        let (a1, a2, n) = ramified_coefficients(p, 1).unwrap();
        prop_assert_eq!(stabilizer_congruence_count(p, n, a1, a2).unwrap(), 2 * p);
        // the count does not change at a higher level
        if p <= 7 {
            prop_assert_eq!(stabilizer_congruence_count(p, n + 1, a1, a2).unwrap(), 2 * p);
        }
    }

    #[test]
    fn untagged_admits_every_tag(i in 0usize..10) {
        let p = SMALL_PRIMES[i];
        let deltas: &[u32] = if p == 2 { &[2, 3] } else { &[1] };
        for &dl in deltas {
            let any = QuadAlgebraClass::ramified(dl, None);
            let n = all_classes(p).iter().filter(|c| any.admits(c)).count();
            prop_assert_eq!(n as u64, if p == 2 { 1 << (dl - 1) } else { 2 });
        }
    }
}
