use bispec_core::band::*;
use proptest::prelude::*;

fn group(f: Family, n: usize) -> GroupType {
    GroupType::new(f, n).unwrap()
}

/// All dominant weights of `g` with coordinates bounded by `max` in
/// absolute value.
fn dominant_weights(g: GroupType, max: i64) -> Vec<Weight> {
    let n = g.n();
    let mut out = Vec::new();
    let mut cur = vec![0i64; n];
    fn rec(i: usize, upper: i64, cur: &mut Vec<i64>, g: GroupType, out: &mut Vec<Weight>) {
        let n = g.n();
        if i == n {
            if let Ok(w) = g.weight(cur) {
                if check_dominant(g, &w).is_ok() {
                    out.push(w);
                }
            }
            return;
        }
        let (lower, upper) = match g.family() {
            Family::D if i == n - 1 => (-upper, upper),
            Family::A if i == n - 1 => (0, 0),
            _ => (0, upper),
        };
        for c in lower..=upper {
            cur[i] = c;
            rec(i + 1, c, cur, g, out);
        }
    }
    rec(0, max, &mut cur, g, &mut out);
    out.sort();
    out.dedup();
    out
}

/// Admissibility by expanding `2λ` in doubled simply-connected fundamental
/// weights and reading off the spin parity.
fn brute_force_admissible(g: GroupType, w: &Weight) -> bool {
    let n = g.n();
    let c: Vec<i64> = w.coords().to_vec();
    let ones = |k: usize, scale: i64| -> Vec<i64> {
        (0..n).map(|i| if i < k { scale } else { 0 }).collect()
    };
    let (basis, spin): (Vec<Vec<i64>>, Vec<usize>) = match g.family() {
        Family::A => ((1..n).map(|k| ones(k, 2)).collect(), vec![]),
        Family::C => ((1..=n).map(|k| ones(k, 2)).collect(), vec![]),
        // SO(3) coordinates already count half-units: ω = (1), target 2λ
        Family::B if n == 1 => (vec![vec![2]], vec![0]),
        Family::B => {
            let mut b: Vec<_> = (1..n).map(|k| ones(k, 2)).collect();
            b.push(ones(n, 1));
            (b, vec![n - 1])
        }
        Family::D => {
            let mut b: Vec<_> = (1..n - 1).map(|k| ones(k, 2)).collect();
            let mut minus = ones(n, 1);
            minus[n - 1] = -1;
            b.push(minus);
            b.push(ones(n, 1));
            (b, vec![n - 2, n - 1])
        }
    };
    let target: Vec<i64> = c.iter().map(|x| 2 * x).collect();
    let bound = target.iter().map(|x| x.abs()).max().unwrap_or(0) as usize + 1;
    let mut coeffs = vec![0usize; basis.len()];
    fn search(
        i: usize,
        rest: Vec<i64>,
        basis: &[Vec<i64>],
        bound: usize,
        coeffs: &mut Vec<usize>,
    ) -> bool {
        if i == basis.len() {
            return rest.iter().all(|&x| x == 0);
        }
        let mut r = rest;
        for k in 0..=bound {
            coeffs[i] = k;
            if search(i + 1, r.clone(), basis, bound, coeffs) {
                return true;
            }
            r.iter_mut().zip(&basis[i]).for_each(|(a, b)| *a -= b);
        }
        false
    }
    let found = search(0, target, &basis, 2 * bound, &mut coeffs);
    assert!(found, "{g} {w}: no expansion in the fundamental weights");
    spin.iter().map(|&i| coeffs[i]).sum::<usize>() % 2 == 0
}

#[test]
fn admissibility_matches_brute_force() {
    let mut checked = 0;
    for (f, ns) in [
        (Family::A, 2..=6),
        (Family::B, 1..=5),
        (Family::C, 1..=5),
        (Family::D, 2..=5),
    ] {
        for n in ns {
            let g = group(f, n);
            for w in dominant_weights(g, 4) {
                assert_eq!(
                    is_admissible(g, &w).unwrap(),
                    brute_force_admissible(g, &w),
                    "{g} {w}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn schedules_are_acyclic() {
    for f in [Family::A, Family::B, Family::C, Family::D] {
        for n in 1..=8 {
            let Ok(g) = GroupType::new(f, n) else {
                continue;
            };
            let steps = classical_schedule(g);
            for (i, s) in steps.iter().enumerate() {
                assert!(s.prerequisites.iter().all(|&p| p < i), "{g} step {i}");
                assert_eq!(band_of(g, &s.left).unwrap(), 1, "{g} step {i}");
            }
        }
    }
}

fn dn_weight() -> impl Strategy<Value = (usize, Vec<i64>, bool)> {
    (2usize..=6).prop_flat_map(|n| {
        (
            Just(n),
            proptest::collection::vec(0i64..=8, n),
            any::<bool>(),
        )
    })
}

fn any_weight() -> impl Strategy<Value = (GroupType, Weight)> {
    let fam = prop_oneof![
        Just(Family::A),
        Just(Family::B),
        Just(Family::C),
        Just(Family::D)
    ];
    (
        fam,
        1usize..=6,
        proptest::collection::vec(0i64..=8, 6),
        any::<bool>(),
    )
        .prop_filter_map("valid group", |(f, n, mut c, flip)| {
            let g = GroupType::new(f, n).ok()?;
            c.truncate(n);
            c.sort_unstable_by(|a, b| b.cmp(a));
            if f == Family::A {
                let last = c[n - 1];
                c.iter_mut().for_each(|x| *x -= last);
            }
            if f == Family::D && flip {
                c[n - 1] = -c[n - 1];
            }
            if f == Family::B && n == 1 {
                c[0] *= 2;
            }
            let w = g.weight(&c).ok()?;
            is_admissible(g, &w).ok()?.then_some((g, w))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn dn_band_is_well_defined((n, mut c, flip) in dn_weight()) {
        c.sort_unstable_by(|a, b| b.cmp(a));
        if flip {
            c[n - 1] = -c[n - 1];
        }
        let g = group(Family::D, n);
        let w = g.weight(&c).unwrap();
        let sums: Vec<u64> = expansions(g, &w).unwrap().iter().map(|e| e.iter().sum()).collect();
        prop_assert!(!sums.is_empty());
        prop_assert!(sums.iter().all(|&s| s == c[0] as u64), "{:?} -> {:?}", c, sums);
        prop_assert_eq!(band_of(g, &w).unwrap(), c[0] as u64);
    }

    #[test]
    fn band_is_first_coordinate((g, w) in any_weight()) {
        let band = band_of(g, &w).unwrap();
        let first = w.coords()[0] as u64;
        if g.family() == Family::B && g.n() == 1 {
            prop_assert_eq!(band, first / 2);
        } else {
            prop_assert_eq!(band, first);
        }
    }

    #[test]
    fn halfband_split_is_valid((g, w) in any_weight()) {
        let band = band_of(g, &w).unwrap();
        match halfband_split(g, &w) {
            Err(_) => prop_assert!(band <= 1),
            Ok((mu, nu)) => {
                prop_assert_eq!(&(&mu + &nu), &w);
                for part in [&mu, &nu] {
                    prop_assert!(check_dominant(g, part).is_ok());
                    prop_assert!(is_admissible(g, part).unwrap());
                    prop_assert!(band_of(g, part).unwrap() <= band.div_ceil(2));
                }
            }
        }
    }

    #[test]
    fn marching_pair_lowers_band((g, w) in any_weight()) {
        let band = band_of(g, &w).unwrap();
        match marching_pair(g, &w) {
            Err(_) => prop_assert!(band <= 1),
            Ok(step) => {
                prop_assert_eq!(band_of(g, &step.left).unwrap(), 1);
                prop_assert_eq!(band_of(g, &step.right).unwrap(), band - 1);
                prop_assert_eq!(&(&step.left + &step.right), &w);
            }
        }
    }
}
