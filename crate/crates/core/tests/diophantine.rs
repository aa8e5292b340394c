use mtp::dimfun::{ApproxFunction, DimensionFunction, TransferPair};
use mtp::diophantine::{
    approx_witnesses, compute_m, enumerate_pairs, gcd, is_primitive, shell, Partition, SceneConfig,
};
use mtp::Error;
use proptest::prelude::*;

fn powerlaw(c: f64, tau: f64) -> ApproxFunction {
    ApproxFunction::power_law(c, tau).unwrap()
}

fn block_gcd(v: &[i64], block: &[usize]) -> u64 {
    let mut g = 0u64;
    for &i in block {
        let (mut a, mut b) = (g, v[i - 1].unsigned_abs());
        while b != 0 {
            (a, b) = (b, a % b);
        }
        g = a;
    }
    g
}

#[test]
fn is_primitive_examples() {
    let whole = Partition::whole(3).unwrap();
    assert!(!is_primitive(&[2, 4, 6], &whole).unwrap());
    assert!(is_primitive(&[2, 3, 4], &whole).unwrap());
    let pairs = Partition::new(4, vec![vec![1, 2], vec![3, 4]]).unwrap();
    assert!(!is_primitive(&[2, 4, 3, 6], &pairs).unwrap());
    assert!(is_primitive(&[2, 3, -3, 7], &pairs).unwrap());
    assert!(!is_primitive(&[0, 0, 1, 1], &pairs).unwrap());
    assert!(matches!(
        is_primitive(&[1, 2], &pairs),
        Err(Error::DimensionMismatch { expected: 4, got: 2 })
    ));
}

#[test]
fn partition_validation() {
    assert!(Partition::new(3, vec![vec![1]]).is_err());
    assert!(Partition::new(3, vec![vec![1, 4]]).is_err());
    assert!(Partition::new(3, vec![vec![0, 1]]).is_err());
    assert!(Partition::new(4, vec![vec![1, 2], vec![2, 3]]).is_err());
    let p = Partition::new(5, vec![vec![1, 2, 3], vec![4, 5]]).unwrap();
    assert!(p.strong_enough(1));
    assert!(!p.strong_enough(2));
}

#[test]
fn compute_m_examples() {
    let pair = TransferPair::derive(&DimensionFunction::power_law(1.0).unwrap(), 0, 1).unwrap();
    assert_eq!(compute_m(&powerlaw(1.0, 1.0), &pair, 1).unwrap(), 2.0);
    assert_eq!(compute_m(&powerlaw(0.5, 0.0), &pair, 1).unwrap(), 2.0);
    assert_eq!(compute_m(&ApproxFunction::Zero, &pair, 1).unwrap(), 2.0);
    assert_eq!(compute_m(&ApproxFunction::Zero.clamped(1.0), &pair, 1).unwrap(), 2.0);
    let pair2 = TransferPair::derive(&DimensionFunction::power_law(1.5).unwrap(), 1, 2).unwrap();
    for psi in [powerlaw(1.0, 3.0), ApproxFunction::Zero, powerlaw(1.0, 0.0)] {
        assert!(compute_m(&psi, &pair2, 2).unwrap() >= 4.0);
    }
    assert_eq!(compute_m(&ApproxFunction::Zero, &pair2, 2).unwrap(), 4.0);
}

#[test]
fn enumerate_examples() {
    let cfg = SceneConfig::homogeneous(1, 1, powerlaw(1.0, 1.0));
    let pairs: Vec<_> = enumerate_pairs(&cfg, 1, 2.0).unwrap().collect();
    assert_eq!(pairs.len(), 10);
    assert!(enumerate_pairs(&cfg, 0, 2.0).is_err());
    // ordered by |q|, then q, then p
    let pairs: Vec<_> = enumerate_pairs(&cfg, 3, 2.0).unwrap().collect();
    let keys: Vec<_> = pairs.iter().map(|(p, q)| (q[0].unsigned_abs(), q.clone(), p.clone())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);

    let mut filtered = SceneConfig::homogeneous(1, 1, powerlaw(1.0, 1.0));
    filtered.partition = Some(Partition::whole(2).unwrap());
    let pairs: Vec<_> = enumerate_pairs(&filtered, 4, 2.0).unwrap().collect();
    assert!(!pairs.contains(&(vec![2], vec![2])));
    assert!(pairs.iter().all(|(p, q)| gcd(p[0].unsigned_abs(), q[0].unsigned_abs()) == 1));
}

#[test]
fn shells_have_expected_sizes() {
    assert_eq!(shell(1, 3), vec![vec![-3], vec![3]]);
    for s in 1..6u64 {
        let n2 = shell(2, s);
        assert_eq!(n2.len() as u64, 8 * s);
        assert_eq!(shell(3, s).len() as u64, (2 * s + 1).pow(3) - (2 * s - 1).pow(3));
    }
}

#[test]
fn witness_examples() {
    let cfg = SceneConfig::homogeneous(1, 1, powerlaw(1.0, 1.0));
    let w = approx_witnesses(&[0.5], &cfg, 2).unwrap();
    assert!(w.iter().any(|w| w.q == vec![2] && w.p == vec![-1] && w.error == 0.0));

    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let w = approx_witnesses(&[golden], &cfg, 100).unwrap();
    for q in [1i64, 2, 3, 5, 8, 13, 21, 34, 55, 89] {
        assert!(w.iter().any(|w| w.q == vec![q]), "q = {q} missing");
    }
    for w in &w {
        let v = w.q[0] as f64 * golden + w.p[0] as f64;
        assert!(v.abs() < 1.0 / w.q[0].unsigned_abs() as f64);
        assert!((v.abs() - w.error).abs() < 1e-12);
    }

    let zero = SceneConfig::homogeneous(1, 1, ApproxFunction::Zero);
    assert!(approx_witnesses(&[golden], &zero, 100).unwrap().is_empty());
}

#[test]
fn inhomogeneous_witnesses_use_shift() {
    let mut cfg = SceneConfig::homogeneous(1, 1, powerlaw(0.01, 0.0));
    cfg.y = vec![0.25];
    // 4 * 0.3125 - 1 - 0.25 = 0
    let w = approx_witnesses(&[0.3125], &cfg, 4).unwrap();
    assert!(w.iter().any(|w| w.q == vec![4] && w.p == vec![-1] && w.error < 1e-12));
}

fn naive_witness_set(x: &[f64], n: usize, m: usize, psi: &ApproxFunction, q_max: i64) -> Vec<(Vec<i64>, Vec<i64>)> {
    let mut out = Vec::new();
    let qs: Vec<Vec<i64>> = (1..=q_max as u64).flat_map(|s| shell(n, s)).collect();
    for q in qs {
        let width = psi.eval(q.iter().map(|v| v.unsigned_abs()).max().unwrap());
        let mut ps = vec![Vec::new()];
        for l in 0..m {
            let u: f64 = (0..n).map(|i| q[i] as f64 * x[l * n + i]).sum();
            let cands: Vec<i64> = (-(u.ceil() as i64) - 2..=-(u.floor() as i64) + 2)
                .filter(|p| (u + *p as f64).abs() < width)
                .collect();
            ps = ps
                .into_iter()
                .flat_map(|pre| cands.iter().map(move |c| [pre.clone(), vec![*c]].concat()))
                .collect();
        }
        for p in ps {
            out.push((p, q.clone()));
        }
    }
    out.sort();
    out
}

proptest! {
    #[test]
    fn primitivity_is_sign_invariant(v in prop::collection::vec(-50i64..50, 4)) {
        let pi = Partition::new(4, vec![vec![1, 3], vec![2, 4]]).unwrap();
        let neg: Vec<i64> = v.iter().map(|x| -x).collect();
        prop_assert_eq!(is_primitive(&v, &pi).unwrap(), is_primitive(&neg, &pi).unwrap());
        let want = pi.blocks.iter().all(|b| block_gcd(&v, b) == 1);
        prop_assert_eq!(is_primitive(&v, &pi).unwrap(), want);
    }

    #[test]
    fn witnesses_monotone_in_q(x in prop::collection::vec(0.0f64..1.0, 2), q1 in 1u64..30, extra in 0u64..30) {
        let cfg = SceneConfig::homogeneous(2, 1, powerlaw(1.0, 1.5));
        let a = approx_witnesses(&x, &cfg, q1).unwrap();
        let b = approx_witnesses(&x, &cfg, q1 + extra).unwrap();
        for w in &a {
            prop_assert!(b.iter().any(|v| v.p == w.p && v.q == w.q));
        }
    }

    #[test]
    fn witnesses_monotone_in_psi(x in prop::collection::vec(0.0f64..1.0, 2), c in 0.1f64..1.0, boost in 1.0f64..3.0) {
        let small = SceneConfig::homogeneous(1, 2, powerlaw(c, 1.0));
        let large = SceneConfig::homogeneous(1, 2, powerlaw(c * boost, 1.0));
        let a = approx_witnesses(&x, &small, 25).unwrap();
        let b = approx_witnesses(&x, &large, 25).unwrap();
        for w in &a {
            prop_assert!(b.iter().any(|v| v.p == w.p && v.q == w.q));
        }
    }

    #[test]
    fn witnesses_match_naive_search(x in prop::collection::vec(0.0f64..1.0, 4), n in 1usize..3, c in 0.2f64..2.0) {
        let m = 4 / (2 * n).max(1);
        let x = &x[..n * m];
        let psi = powerlaw(c, n as f64 / m as f64);
        let cfg = SceneConfig::homogeneous(n, m, psi.clone());
        let mut got: Vec<_> = approx_witnesses(x, &cfg, 12).unwrap().into_iter().map(|w| (w.p, w.q)).collect();
        got.sort();
        prop_assert_eq!(got, naive_witness_set(x, n, m, &psi, 12));
    }
}
