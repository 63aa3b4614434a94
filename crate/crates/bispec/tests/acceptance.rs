//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints one PASS/FAIL line; exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use bispec::checks::{
    coupling_errors, inversion_error, m1m2_error, oracle_errors, random_fourier, random_rotations,
};
use bispec::commands::{band_output, s1_counterexample_output, s1_demo};
use bispec::sweep::{rate_sweep, SweepParams};
use bispec_core::band::{band_of, band_one_irreps, expansions, Family, GroupType};
use bispec_core::moments::{moment2, moments, recover_m1_m2_from_m3};
use bispec_core::mra::CHUNK_SIZE;
use bispec_core::quadrature::{build_quadrature, quadrature_of_degree, schur_orthogonality_error};
use bispec_core::recovery::{
    factor_gram, recover_orbit, resolve_sign, RecoveryOptions, SignChoice,
};
use bispec_core::signal::{distance_up_to_group, random_signal, RealStructure, RepSpec, Signal};
use bispec_core::su2::CgTable;
use bispec_core::{CMat, Error};
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn max(xs: impl IntoIterator<Item = f64>) -> f64 {
    // NaN is sticky so a broken metric cannot pass
    xs.into_iter().fold(0.0, |a: f64, b| {
        if a.is_nan() || b.is_nan() {
            f64::NAN
        } else {
            a.max(b)
        }
    })
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let table = CgTable::new(3);
    let mut cases = Vec::new();
    for l in 1..=3 {
        for r in 1..=3 {
            for seed in 0..10 {
                for s in [RealStructure::CryoReal, RealStructure::GenericComplex] {
                    cases.push((l, r, seed, s));
                }
            }
        }
    }
    let rules: Vec<_> = (1..=3).map(|l| build_quadrature(l, 3).unwrap()).collect();
    let errs: Vec<f64> = cases
        .par_iter()
        .map(|&(l, r, seed, s)| {
            let f = random_signal(&RepSpec::uniform(l, r).unwrap(), s, seed);
            max(oracle_errors(&f, &table, &rules[l - 1]).unwrap())
        })
        .collect();
    let worst = max(errs);
    let t = start.elapsed();
    outcome(
        worst <= 1e-9 && within(t, 60.0),
        format!(
            "max blockwise error {worst:.2e} over {} signals (L, R <= 3), {:.1} s",
            cases.len(),
            t.as_secs_f64()
        ),
    )
}

fn cryo_recovery() -> Outcome {
    let start = Instant::now();
    let table = CgTable::new(5);
    let opts = RecoveryOptions::default();
    let mut lines = Vec::new();
    let mut all = true;
    for (l, r) in [(3, 5), (4, 6), (5, 7)] {
        let spec = RepSpec::uniform(l, r).unwrap();
        let errs: Vec<f64> = (0..50u64)
            .into_par_iter()
            .map(|seed| {
                let f = random_signal(&spec, RealStructure::CryoReal, seed);
                let m3 = moments(&f, &table).unwrap().m3;
                match recover_orbit(&m3, &spec, RealStructure::CryoReal, &table, &opts) {
                    Ok(mut rep) => rep.register(&f).unwrap_or(f64::INFINITY),
                    Err(_) => f64::INFINITY,
                }
            })
            .collect();
        let ok = errs.iter().filter(|&&e| e <= 1e-6).count();
        all &= ok == 50;
        lines.push(format!("({l},{r}) {ok}/50 max {:.1e}", max(errs)));
    }
    let t = start.elapsed();
    outcome(
        all && within(t, 300.0),
        format!("{}, {:.1} s", lines.join("; "), t.as_secs_f64()),
    )
}

fn l1_signal(f: &Signal, block: CMat) -> Signal {
    let r = f.spec().multiplicity(1);
    Signal::new(RepSpec::new(vec![(1, r)]).unwrap(), vec![block]).unwrap()
}

fn sign_resolution() -> Outcome {
    let table = CgTable::new(2);
    let spec = RepSpec::uniform(2, 4).unwrap();
    let opts = RecoveryOptions::default();
    let results: Vec<(bool, f64)> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let f = random_signal(&spec, RealStructure::CryoReal, seed);
            let g1 = &moment2(&f)[&1];
            let m111 = &moments(&f, &table).unwrap().m3[&(1, 1, 1)];
            let (factor, _) = factor_gram(g1, RealStructure::CryoReal).unwrap();
            let (_, sign) = resolve_sign(&factor, m111, &table, &opts).unwrap();
            // the correct sign is the one whose factor lies in the SO(3) orbit of the truth
            let truth = l1_signal(&f, f.block(1).unwrap().clone());
            let plus = distance_up_to_group(&truth, &l1_signal(&f, factor.clone()))
                .unwrap()
                .1;
            let minus = distance_up_to_group(&truth, &l1_signal(&f, -factor))
                .unwrap()
                .1;
            let correct = if plus < minus {
                SignChoice::Plus
            } else {
                SignChoice::Minus
            };
            let ratio = sign.loser_residual / sign.winner_residual;
            (sign.choice == correct && plus.min(minus) < 1e-8, ratio)
        })
        .collect();
    let correct = results.iter().filter(|r| r.0).count();
    let min_ratio = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    outcome(
        correct == 100 && min_ratio >= 1e6,
        format!("{correct}/100 correct, min loser/winner ratio {min_ratio:.2e}"),
    )
}

fn m1m2_round_trip() -> Outcome {
    let table = CgTable::new(3);
    let errs: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let s = if seed % 2 == 0 {
                RealStructure::CryoReal
            } else {
                RealStructure::GenericComplex
            };
            let f = random_signal(&RepSpec::uniform(3, 3).unwrap(), s, seed);
            m1m2_error(&f, &table).unwrap()
        })
        .collect();
    let worst = max(errs);
    let spec = RepSpec::uniform(2, 3).unwrap();
    let mut f = random_signal(&spec, RealStructure::CryoReal, 5);
    f.block_mut(0).unwrap().fill(bispec_core::c64(0.0, 0.0));
    let m3 = moments(&f, &CgTable::new(2)).unwrap().m3;
    let zero = recover_m1_m2_from_m3(&m3, &spec);
    let documented = matches!(&zero, Err(Error::Unrecoverable(_)));
    let msg = match &zero {
        Err(e) => e.to_string(),
        Ok(_) => "no error".into(),
    };
    outcome(
        worst <= 1e-9 && documented,
        format!("max error {worst:.2e} over 100 seeds; A_0 = 0 gives \"{msg}\""),
    )
}

fn block_inversion() -> Outcome {
    let table = CgTable::new(4);
    let mut cases = Vec::new();
    for l in 1..=4 {
        for seed in 0..20 {
            cases.push((l, seed));
        }
    }
    let worst = max(cases
        .par_iter()
        .map(|&(l, seed)| inversion_error(&random_fourier(l, seed), &table).unwrap())
        .collect::<Vec<_>>());
    outcome(
        worst <= 1e-9,
        format!("max relative error {worst:.2e} over L = 1..4, 20 seeds each"),
    )
}

fn representation_identities() -> Outcome {
    let table = CgTable::new(5);
    let rotations = random_rotations(20, 11);
    let pairs: Vec<(usize, usize)> = (0..=5).flat_map(|a| (0..=5).map(move |b| (a, b))).collect();
    let errs: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(a, b)| coupling_errors(a, b, &rotations, &table).unwrap())
        .collect();
    let inter = max(errs.iter().map(|e| e.0));
    let unit = max(errs.iter().map(|e| e.1));
    let schur = schur_orthogonality_error(5, &quadrature_of_degree(10)).unwrap();
    outcome(
        inter <= 1e-10 && unit <= 1e-12 && schur <= 1e-11,
        format!("intertwining {inter:.2e}, unitarity {unit:.2e}, Schur {schur:.2e} (l <= 5)"),
    )
}

fn dn_weights(n: usize, top: i64) -> Vec<Vec<i64>> {
    fn rec(n: usize, prefix: &mut Vec<i64>, top: i64, out: &mut Vec<Vec<i64>>) {
        if prefix.len() == n - 1 {
            let a = *prefix.last().unwrap();
            for last in -a..=a {
                let mut w = prefix.clone();
                w.push(last);
                out.push(w);
            }
            return;
        }
        let hi = prefix.last().copied().unwrap_or(top);
        for c in 0..=hi {
            prefix.push(c);
            rec(n, prefix, top, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, &mut Vec::new(), top, &mut out);
    out
}

fn band_calculus() -> Outcome {
    let mut all = Vec::new();
    for n in 2..=6 {
        let g = GroupType::new(Family::D, n).unwrap();
        all.extend(dn_weights(n, 3).into_iter().map(|w| (g, w)));
    }
    let picked: Vec<_> = (0..500).map(|i| all[i * all.len() / 500].clone()).collect();
    let consistent = picked
        .par_iter()
        .filter(|(g, c)| {
            let w = g.weight(c).unwrap();
            let b = band_of(*g, &w).unwrap();
            let ex = expansions(*g, &w).unwrap();
            !ex.is_empty() && ex.iter().all(|e| e.iter().sum::<u64>() == b)
        })
        .count();
    let mut counts_ok = true;
    for rank in 1..=6usize {
        for (fam, expect) in [
            (Family::A, rank),
            (Family::B, rank),
            (Family::C, rank),
            (Family::D, rank + 1),
        ] {
            // band-one counts n-1 / n / n / n+1 in the group parameter n
            if fam == Family::D && rank < 2 {
                continue;
            }
            let n = if fam == Family::A { rank + 1 } else { rank };
            counts_ok &= band_one_irreps(GroupType::new(fam, n).unwrap()).len() == expect;
        }
    }
    let so3 = band_one_irreps(GroupType::new(Family::B, 1).unwrap());
    let su2 = band_one_irreps(GroupType::new(Family::A, 2).unwrap());
    let fund_ok =
        so3.len() == 1 && so3[0].coords() == [2] && su2.len() == 1 && su2[0].coords()[0] == 1;
    let d4 = band_output("D", 4, &[2, 2, 2, 0])
        .map(|o| o.band)
        .unwrap_or(0);
    outcome(
        consistent == 500 && counts_ok && fund_ok && d4 == 2,
        format!(
            "{consistent}/500 D_n weights single-valued; band-one counts {}; SO(3) {:?}, SU(2) {:?}; D4 (2,2,2,0) band {d4}",
            if counts_ok { "ok" } else { "WRONG" },
            so3[0].coords(),
            &su2[0].coords()[..1],
        ),
    )
}

fn s1_reference() -> Outcome {
    let worst = max((0..20u64).map(|seed| s1_demo(8, seed).unwrap().error));
    let c = s1_counterexample_output().unwrap();
    outcome(
        worst <= 1e-12 && c.invariant_gap <= 1e-12 && c.orbit_distance > 0.1,
        format!(
            "band 8 error {worst:.2e} (20 seeds); counterexample gap {:.2e}, orbit distance {:.3}",
            c.invariant_gap, c.orbit_distance
        ),
    )
}

fn mra_statistics() -> Outcome {
    let start = Instant::now();
    let spec = RepSpec::uniform(2, 4).unwrap();
    let f = random_signal(&spec, RealStructure::CryoReal, 0);
    let ns: Vec<usize> = (0..5).map(|k| CHUNK_SIZE << (2 * k)).collect();
    let p = SweepParams {
        sigma: 0.3,
        structure: RealStructure::CryoReal,
        seed: 1,
        total: 2 * ns[4],
        ns,
        recover: true,
        max_recover: 16,
        rate_band: 0.3,
    };
    let s = rate_sweep(&f, &p, &CgTable::new(2)).unwrap();
    let ratios: Vec<String> = s.ratios.iter().map(|r| format!("{r:.3}")).collect();
    let errs: Vec<String> = s
        .points
        .iter()
        .map(|q| q.rel_error_mean.map_or("-".into(), |e| format!("{e:.1e}")))
        .collect();
    outcome(
        s.rate_ok && s.recovery_monotone == Some(true),
        format!(
            "error ratios per 4x N [{}]; mean recovery error [{}]; {:.1} s",
            ratios.join(", "),
            errs.join(", "),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("cryo recovery from exact m3", cryo_recovery),
        ("sign resolution", sign_resolution),
        ("m3 -> (m1, m2) round trip", m1m2_round_trip),
        ("bispectrum block inversion", block_inversion),
        (
            "CG and representation identities",
            representation_identities,
        ),
        ("band calculus", band_calculus),
        ("circle reference", s1_reference),
        ("MRA statistics", mra_statistics),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = std::panic::catch_unwind(run).unwrap_or_else(|_| outcome(false, "panicked".into()));
        println!(
            "{} {}. {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {}/{} passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
