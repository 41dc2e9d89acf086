//! Acceptance suite: one line per criterion, each pinned to its tolerance.
//!
//! Criteria listed in `KNOWN_FAILURES` print FAIL. For those the run then
//! checks that the failure has exactly the characterized shape (see README),
//! so any change in behavior, better or worse, still stops the run.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use gaudin_core::bethe::{verify_s1_lemma, BetheError, DerivationOffset, EigenReport};
use gaudin_core::contour::{beta_pochhammer, random_beta_samples, stokes_check, stokes_family, ContourSpec};
use gaudin_core::gaudin::GaudinContext;
use gaudin_core::oper::{bethe_root, canonicalize, v_closed, MiuraData, PrincipalData};
use gaudin_core::poly::Var;
use gaudin_core::tensor::{verify_tensor_identities, TensorTable};
use gaudin_core::twopoint::{unit_cycle, TwoPointContext, TwoPointError};
use gaudin_core::{QTwist, QVerma, Q};
use num_complex::Complex;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KNOWN_FAILURES: &[u32] = &[3, 9, 10, 13];

fn q(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

fn table(m: usize) -> Arc<TensorTable<Q>> {
    Arc::new(TensorTable::for_rank(m).unwrap())
}

struct Outcome {
    pass: bool,
    detail: String,
    /// For known failures: does the failure match its characterization?
    characterized: Option<bool>,
}

impl Outcome {
    fn plain(pass: bool, detail: String) -> Self {
        Outcome { pass, detail, characterized: None }
    }
}

fn verma(pairings: &[[i64; 3]], points: Vec<Q>, depth: i64, off: DerivationOffset) -> QVerma {
    let pr = pairings.iter().map(|p| p.iter().map(|x| q(*x, 1)).collect()).collect();
    let data = MiuraData::from_pairings(3, points, pr, vec![]).unwrap();
    QVerma::new(table(3), data, depth, off).unwrap()
}

/// Integer pairings at two sites with every level, and their sum, prime to 3.
fn weight_draw(rng: &mut ChaCha8Rng, min_entry: i64) -> [[i64; 3]; 2] {
    loop {
        let mut p = [[0i64; 3]; 2];
        for row in p.iter_mut() {
            for x in row.iter_mut() {
                *x = rng.gen_range(min_entry..=2);
            }
        }
        let k: Vec<i64> = p.iter().map(|r| r.iter().sum()).collect();
        if k[0] % 3 != 0 && k[1] % 3 != 0 && (k[0] + k[1]) % 3 != 0 {
            return p;
        }
    }
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let mut bad = Vec::new();
    let mut count = 0;
    for m in [3, 4, 5] {
        let rep = verify_tensor_identities(&TensorTable::<Q>::for_rank(m).unwrap());
        count += rep.checks.len();
        bad.extend(rep.failures().map(|c| format!("M={m}: {}", c.name)));
    }
    let el = t0.elapsed();
    Outcome::plain(
        bad.is_empty() && el < Duration::from_secs(10),
        format!("{count} identities exact for M=3,4,5 in {el:.1?} (limit 10s) {bad:?}"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = Vec::new();
    let mut worst = Duration::ZERO;
    let mut checks = 0;
    for m in [3, 4] {
        let tab = table(m);
        for n in [1, 2] {
            for _ in 0..5 {
                let ctx = GaudinContext::new(tab.clone(), QTwist::random(&mut rng, m, n));
                for (i, j) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
                    let t0 = Instant::now();
                    let r = ctx.verify_zeroth_theorem(i, j);
                    worst = worst.max(t0.elapsed());
                    checks += 1;
                    if !r.is_zero() {
                        bad.push(format!("M={m} N={n} ({i},{j})"));
                    }
                }
            }
        }
    }
    Outcome::plain(
        bad.is_empty() && worst < Duration::from_secs(600),
        format!("{checks} exact zero residuals over 5 draws each; slowest {worst:.1?} (limit 10 min) {bad:?}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ctx = GaudinContext::new(table(3), QTwist::random(&mut rng, 3, 2));
    let mut missing = Vec::new();
    let mut mismatched = Vec::new();
    let mut half_of_displayed = true;
    for (i, j) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        let rep = ctx.verify_regularity_mod_t(i, j);
        for t in &rep.terms {
            if t.preimage.is_none() {
                missing.push(format!("({i},{j}) order {}", t.order));
            }
            if t.matches_closed_form == Some(false) {
                mismatched.push(format!("({i},{j}) order {}", t.order));
                // characterized defect: the preimage is (M/2) varsigma_2, half the displayed M varsigma_2
                let expect = ctx.sigma(2, Var::Z).scale(&q(3, 2)).to_state();
                half_of_displayed &= (i, j, t.order) == (1, 2, 1)
                    && t.preimage.as_ref().is_some_and(|p| p.sub(&expect).is_zero());
            }
        }
    }
    let pass = missing.is_empty() && mismatched.is_empty();
    Outcome {
        pass,
        detail: format!(
            "all singular coefficients are translates: {}; closed-form mismatches {mismatched:?} (preimage is half the displayed form)",
            missing.is_empty()
        ),
        characterized: Some(missing.is_empty() && mismatched.len() == 1 && half_of_displayed),
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ctx = GaudinContext::new(table(3), QTwist::random(&mut rng, 3, 2));
    let dim = ctx.table.dim();
    let mut bad = Vec::new();
    for i in [1, 2] {
        for n in 0..=3 {
            for e in 0..dim {
                let mut x = vec![Q::zero(); dim];
                x[e] = q(1, 1);
                if !ctx.verify_gsym(&x, n, i).is_zero() {
                    bad.push(format!("i={i} n={n} x={e}"));
                }
            }
        }
    }
    Outcome::plain(bad.is_empty(), format!("{} basis elements x 4 modes x 2 states, failures {bad:?}", dim))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ctx = GaudinContext::new(table(3), QTwist::random(&mut rng, 3, 2));
    let res: Vec<bool> = [1, 2].iter().map(|&j| ctx.verify_s1_zeroth(j).is_zero()).collect();
    Outcome::plain(res.iter().all(|x| *x), format!("s1 zeroth product against varsigma_1, varsigma_2: {res:?}"))
}

fn criterion_6() -> Outcome {
    let twist = QTwist::new(3, vec![q(1, 2), q(-4, 5), q(2, 7)], vec![q(0, 1), q(1, 1), q(-3, 2)]).unwrap();
    let spec = ContourSpec::<f64>::for_twist(&twist, 0, 1).unwrap();
    let mut worst = 0.0f64;
    for i in [1, 2] {
        for g in stokes_family(&twist) {
            let (v, scale) = stokes_check(&g, i, &twist, &spec).unwrap();
            worst = worst.max(v.norm() / scale);
        }
    }
    Outcome::plain(worst <= 1e-10, format!("worst |int P^(-i/M) D g| / L1 = {worst:.2e} (limit 1e-10)"))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let samples = random_beta_samples(&mut rng, 20);
    let checks = gaudin_core::contour::verify_beta_recurrences(&samples).unwrap();
    let worst = checks.iter().map(|c| c.worst()).fold(0.0, f64::max);
    let b00 = beta_pochhammer(0.0f64, 0.0).unwrap().value().norm();
    Outcome::plain(
        worst <= 1e-9 && b00 <= 1e-12,
        format!("worst recurrence residual {worst:.2e} (limit 1e-9) on 20 samples; |B(0,0)| = {b00:.1e} (limit 1e-12)"),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad = 0;
    let mut draws = 0;
    for m in [3, 4] {
        let pd = PrincipalData::new(m, 2).unwrap();
        for k in 0..10 {
            let data = MiuraData::<Q>::random(&mut rng, m, 2, k % 2 == 1);
            let c = canonicalize(&data.connection(&pd), &pd, 2).unwrap();
            let (v1, v2) = v_closed(&data);
            draws += 1;
            if c.v[&1] != v1 || c.v[&2] != v2 {
                bad += 1;
            }
        }
    }
    Outcome::plain(bad == 0, format!("{draws} draws (M=3,4, half with a Bethe root), {bad} mismatches"))
}

fn eigen_line(label: &str, r: &EigenReport<Q>) -> String {
    format!("{label}: dev {:.2e} exact {}", r.max_deviation, r.all_exact())
}

fn criterion_9() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut pass = true;
    let mut shape = true;
    let mut lines = Vec::new();
    let mut skipped = 0;
    while lines.len() < 2 {
        let w = weight_draw(&mut rng, 0);
        let md = verma(&w, vec![q(0, 1), q(1, 1)], 1, DerivationOffset::Zero);
        let stated = match md.eigencheck(2, None, (0, 1), None) {
            Ok(r) => r,
            // v_2 and the image vanish identically (self-conjugate finite weight)
            Err(BetheError::ZeroCycle) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Outcome::plain(false, format!("{w:?}: {e}")),
        };
        pass &= stated.max_deviation <= 1e-8;
        let doubled = md.eigencheck(2, None, (0, 1), Some(Complex::new(-6.0, 0.0))).unwrap();
        // characterized: integral of q is exactly twice -M int v_2
        shape &= (stated.max_deviation - 1.0).abs() < 1e-6 && doubled.max_deviation <= 1e-8 && doubled.all_exact();
        lines.push(format!("{w:?} {} / {}", eigen_line("c=-M", &stated), eigen_line("c=-2M", &doubled)));
    }
    let el = t0.elapsed();
    pass &= el < Duration::from_secs(300);
    Outcome {
        pass,
        detail: format!("{} in {el:.1?} ({skipped} draws with vanishing v_2 skipped)", lines.join("; ")),
        characterized: Some(shape),
    }
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let w = weight_draw(&mut rng, 1);
    let md = verma(&w, vec![q(0, 1), q(1, 1)], 1, DerivationOffset::Zero);
    let mut pass = true;
    let mut shape = true;
    let mut lines = Vec::new();
    for n in 0..3 {
        let root = bethe_root(&md.data, n).unwrap();
        let stated = md.eigencheck(2, Some((root.clone(), n)), (0, 1), None).unwrap();
        let doubled = md.eigencheck(2, Some((root.clone(), n)), (0, 1), Some(Complex::new(-6.0, 0.0))).unwrap();
        let off = md.eigencheck(2, Some((root.clone() + q(1, 7), n)), (0, 1), None).unwrap();
        let off2 = md.eigencheck(2, Some((root.clone() + q(1, 7), n)), (0, 1), Some(Complex::new(-6.0, 0.0))).unwrap();
        pass &= stated.on_shell() && stated.max_deviation <= 1e-8 && off.max_deviation > 1e-4;
        shape &= (stated.max_deviation - 1.0).abs() < 1e-6
            && doubled.max_deviation <= 1e-8
            && doubled.all_exact()
            && off.max_deviation > 1e-4
            && off2.max_deviation > 1e-4;
        lines.push(format!(
            "color {n} w={root}: {} / c=-2M dev {:.1e}, off-shell dev {:.2e}",
            eigen_line("c=-M", &stated),
            doubled.max_deviation,
            off2.max_deviation
        ));
    }
    Outcome { pass, detail: format!("{w:?} {}", lines.join("; ")), characterized: Some(shape) }
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = unit_cycle().unwrap();
    let tab = table(3);
    let mut worst = (0.0f64, 0.0f64);
    let mut xi_exact = true;
    let mut draws = Vec::new();
    while draws.len() < 5 {
        let k1 = q(rng.gen_range(-9..=9), rng.gen_range(2..=7));
        let k2 = q(rng.gen_range(-9..=9), rng.gen_range(2..=7));
        let Ok(ctx) = TwoPointContext::new(tab.clone(), k1.clone(), k2.clone()) else { continue };
        match ctx.verify_integral_forms(&spec) {
            Ok(r) => {
                worst = (worst.0.max(r.omega.deviation), worst.1.max(r.w.deviation));
                let kk = k1.clone() + k2.clone() + q(3, 1);
                xi_exact &= ctx.xi().add(&ctx.omega().scale(&kk)).is_zero();
                draws.push(format!("({k1},{k2})"));
            }
            // integer exponents or vanishing prefactors: not a generic draw
            Err(TwoPointError::ZeroCycle | TwoPointError::Degenerate(_)) => continue,
            Err(e) => return Outcome::plain(false, format!("({k1},{k2}): {e}")),
        }
    }
    Outcome::plain(
        worst.0 <= 1e-9 && worst.1 <= 1e-9 && xi_exact,
        format!("levels {}: omega dev {:.1e}, W dev {:.1e} (limit 1e-9); Xi = -(K+M) omega exact: {xi_exact}", draws.join(" "), worst.0, worst.1),
    )
}

fn criterion_12() -> Outcome {
    let ctx = TwoPointContext::new(table(3), q(1, 1), q(1, 1)).unwrap();
    let bad: Vec<i64> = ctx.virasoro_residuals().into_iter().filter(|(_, r)| !r.is_zero()).map(|(n, _)| n).collect();
    let c = ctx.central_charge();
    // dim sl_3 (1/4 + 1/4 - 2/5)
    let oracle = q(8, 1) * (q(1, 4) + q(1, 4) - q(2, 5));
    // second level pair against the same closed form
    let ctx2 = TwoPointContext::new(table(3), q(2, 3), q(-5, 2)).unwrap();
    let (k1, k2, m) = (q(2, 3), q(-5, 2), q(3, 1));
    let kk = k1.clone() + k2.clone();
    let oracle2 = q(8, 1) * (k1.clone() / (k1 + m.clone()) + k2.clone() / (k2 + m.clone()) - kk.clone() / (kk + m));
    Outcome::plain(
        bad.is_empty() && c == q(4, 5) && c == oracle && ctx2.central_charge() == oracle2,
        format!("omega_(n) omega exact for n=0..4 (failing n: {bad:?}); c = {c}"),
    )
}

fn criterion_13() -> Outcome {
    let md = verma(&[[1, 0, 1], [0, 1, 2]], vec![q(0, 1), q(2, 1)], 3, DerivationOffset::CasimirQuotient);
    let rep = verify_s1_lemma(&md).unwrap();
    // independent value of the central defect for levels (2, 3), points (0, 2):
    // c_i = 8 k_i / (24 (k_i + 3)) = (2/15, 1/6); k_1 c_2 + k_2 c_1 = 1/3 + 2/5 = 11/15, over z (z - 2)
    let c1 = q(8 * 2, 24 * 5);
    let c2 = q(8 * 3, 24 * 6);
    let coef = q(2, 1) * c2 + q(3, 1) * c1;
    let expect = gaudin_core::QRatFun::pole(Var::Z, &q(0, 1), 1)
        .mul(&gaudin_core::QRatFun::pole(Var::Z, &q(2, 1), 1))
        .scale(&coef);
    let defect_ok = md.s1_scalar_defect().sub(&expect).is_zero();
    Outcome {
        pass: rep.passed(),
        detail: format!(
            "depth 3, {} columns: {} differ by the central term {} Id, {} other failures",
            rep.basis_size,
            rep.defect_columns,
            rep.scalar_defect,
            rep.failures.len()
        ),
        characterized: Some(defect_ok && rep.passed_up_to_scalar() && rep.defect_columns == rep.basis_size),
    }
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 13] = [
        (1, "tensor identities", criterion_1),
        (2, "zeroth products of varsigma_i, varsigma_j", criterion_2),
        (3, "regularity modulo T", criterion_3),
        (4, "diagonal symmetry", criterion_4),
        (5, "s1 zeroth product", criterion_5),
        (6, "twisted Stokes", criterion_6),
        (7, "Beta recurrences", criterion_7),
        (8, "oper canonical form", criterion_8),
        (9, "vacuum cubic eigenvalue", criterion_9),
        (10, "depth-1 cubic eigenvalue", criterion_10),
        (11, "two-point integral forms", criterion_11),
        (12, "coset Virasoro", criterion_12),
        (13, "s1 zero-mode lemma", criterion_13),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = Vec::new();
    let (mut passed, mut failed) = (0, 0);
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {tag} {name} [{:.1?}]: {}", t0.elapsed(), o.detail);
        if o.pass {
            passed += 1;
        } else {
            failed += 1;
        }
        let known = KNOWN_FAILURES.contains(&id);
        match (o.pass, known) {
            (true, false) => {}
            (false, true) if o.characterized == Some(true) => {}
            (false, true) => unexpected.push(format!("criterion {id} fails differently from its characterization")),
            (true, true) => unexpected.push(format!("criterion {id} now passes; update KNOWN_FAILURES")),
            (false, false) => unexpected.push(format!("criterion {id} failed")),
        }
    }
    println!("acceptance: {passed} passed, {failed} failed (known: {KNOWN_FAILURES:?})");
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        for u in &unexpected {
            println!("unexpected: {u}");
        }
        ExitCode::FAILURE
    }
}
