use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenery_lab::ifs::{check_strong_separation, preset};
use scenery_lab::subsystem::{
    approximate_dimension, extract, induced_system, moran_exponent, vitali_select, BoundingBall,
};
use scenery_lab::symbolic::{incomparable, Word, DEFAULT_WORD_CAP};

fn random_balls(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<BoundingBall> {
    (0..n)
        .map(|i| {
            let c: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            BoundingBall::new(Word::new(vec![i % 7, i]), c, 0.01 + 0.2 * rng.gen::<f64>().powi(2))
        })
        .collect()
}

fn check_three_b(balls: &[BoundingBall]) {
    let sel = vitali_select(balls).unwrap();
    for (a, &i) in sel.selected.iter().enumerate() {
        for &j in &sel.selected[a + 1..] {
            assert!(balls[i].disjoint(&balls[j]));
        }
    }
    for (i, b) in balls.iter().enumerate() {
        // brute force over all accepted balls, independent of the recorded blocker
        let covered = sel
            .selected
            .iter()
            .any(|&j| !b.disjoint(&balls[j]) && balls[j].radius >= b.radius && b.inside_scaled(&balls[j], 3.0));
        assert!(covered, "ball {i} not inside 3x an accepted ball");
    }
    assert!(sel.inflation(balls) <= 3.0 * (1.0 + 1e-12));
}

#[test]
fn vitali_three_b_on_random_families() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..100 {
        let d = 1 + trial % 3;
        let balls = random_balls(&mut rng, 100, d);
        check_three_b(&balls);
    }
}

proptest! {
    #[test]
    fn vitali_three_b_property(seed in any::<u64>(), n in 1usize..60, d in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        check_three_b(&random_balls(&mut rng, n, d));
    }

    #[test]
    fn moran_decreases_with_any_ratio(
        lips in prop::collection::vec(0.05f64..0.6, 2..8),
        idx in any::<prop::sample::Index>(),
        shrink in 0.5f64..0.95,
    ) {
        let t = moran_exponent(&lips).unwrap();
        let mut smaller = lips.clone();
        let i = idx.index(lips.len());
        smaller[i] *= shrink;
        prop_assert!(moran_exponent(&smaller).unwrap() < t);
    }

    #[test]
    fn moran_solves_its_equation(lips in prop::collection::vec(0.01f64..0.9, 2..10)) {
        let t = moran_exponent(&lips).unwrap();
        let s: f64 = lips.iter().map(|l| l.powf(t)).sum();
        prop_assert!((s - 1.0).abs() < 1e-8);
    }
}

/// Closed forms for uniform-ratio full shifts where every connector is one
/// symbol: the number of kept words `n_k` and `t_k = ln n_k / ((k+1) ln(1/r))`.
#[test]
fn uniform_presets_match_counting_oracle() {
    let cases: [(&str, f64, fn(usize) -> f64); 3] = [
        ("cantor3", 1.0 / 3.0, |k| 2f64.powi(k as i32 - 2)),
        ("fourcorner4", 0.25, |k| 4f64.powi(k as i32 - 1)),
        ("rot5", 1.0 / 3.0, |k| 5f64.powi(k as i32 - 2)),
    ];
    for (name, r, count) in cases {
        let p = preset(name).unwrap();
        for k in 3..=6 {
            let res = extract(&p.system, k, None).unwrap();
            let n = count(k);
            assert_eq!(res.words.len() as f64, n, "{name} k={k}");
            let oracle = n.ln() / ((k + 1) as f64 * (1.0 / r).ln());
            assert!((res.t_k - oracle).abs() < 1e-9, "{name} k={k}: {} vs {oracle}", res.t_k);
            assert!(res.t_k <= p.oracle_dimension.unwrap() + 1e-10);
        }
    }
}

#[test]
fn results_respect_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for name in ["cantor3", "goldenmean2", "counterexample3", "schottky3", "julia_quad(0.1)"] {
        let p = preset(name).unwrap();
        let s = p.system.symbolic();
        let res = extract(&p.system, 6, None).unwrap();
        assert!(s.allowed(res.tau, 0));
        for w in &res.words {
            assert_eq!(w.word.first(), Some(0));
            assert_eq!(w.word.last(), Some(res.tau));
            assert!(w.word.len() <= 6 + res.connector_len);
            assert!(res.connector_len <= s.alphabet_size());
            assert!(s.is_admissible(&w.word).unwrap());
            assert!(w.lip_minus <= w.lip_plus);
        }
        for (a, u) in res.words.iter().enumerate() {
            for v in &res.words[a + 1..] {
                assert!(incomparable(&u.word, &v.word));
            }
        }
        let lips = res.lips();
        let sum: f64 = lips.iter().map(|l| l.powf(res.t_k)).sum();
        if lips.len() > 1 {
            assert!((sum - 1.0).abs() < 1e-9, "{name}: {sum}");
        }
        for _ in 0..1000 {
            let u = &res.words[rng.gen_range(0..res.words.len())].word;
            let v = &res.words[rng.gen_range(0..res.words.len())].word;
            assert!(s.is_admissible(&u.concat(v)).unwrap(), "{name}");
        }
        assert!(res.separation.gap > 0.0 || res.words.len() == 1);
    }
}

#[test]
fn induced_full_shift_is_strongly_separated() {
    for name in ["cantor3", "fourcorner4", "rot5", "goldenmean2", "counterexample3"] {
        let p = preset(name).unwrap();
        let res = extract(&p.system, 4, None).unwrap();
        let induced = induced_system(&p.system, &res).unwrap();
        assert!(induced.symbolic().is_full_shift());
        assert!(check_strong_separation(&induced, 2).unwrap().is_pass(), "{name}");
    }
}

#[test]
fn removing_a_word_lowers_the_exponent() {
    let p = preset("goldenmean2").unwrap();
    let res = extract(&p.system, 8, None).unwrap();
    let lips = res.lips();
    for i in 0..lips.len() {
        let mut fewer = lips.clone();
        fewer.remove(i);
        let t = if fewer.len() == 1 { 0.0 } else { moran_exponent(&fewer).unwrap() };
        assert!(t < res.t_k);
    }
}

#[test]
fn default_tau_and_explicit_tau() {
    let p = preset("counterexample3").unwrap();
    let res = extract(&p.system, 4, None).unwrap();
    // row 1 is the least with a transition into 0
    assert_eq!(res.tau, 1);
    assert!(extract(&p.system, 4, Some(0)).is_err());
    let res2 = extract(&p.system, 4, Some(2)).unwrap();
    assert!(res2.words.iter().all(|w| w.word.last() == Some(2)));
}

#[test]
fn schottky_running_best_is_monotone() {
    let p = preset("schottky3").unwrap();
    let approx = approximate_dimension(&p.system, 0.1, 7, None, DEFAULT_WORD_CAP).unwrap();
    assert_eq!(approx.steps.len(), 6);
    assert!(approx.confirmed.is_none());
    for pair in approx.steps.windows(2) {
        assert!(pair[1].running_best >= pair[0].running_best);
    }
    assert_eq!(approx.t_best, approx.steps.last().unwrap().running_best);
}

#[test]
fn approximation_reports_oracle_comparison() {
    let p = preset("fourcorner4").unwrap();
    let approx = approximate_dimension(&p.system, 0.1, 6, p.oracle_dimension, DEFAULT_WORD_CAP).unwrap();
    assert_eq!(approx.k_best, 6);
    assert!((approx.t_best - 5.0 / 7.0).abs() < 1e-9);
    assert_eq!(approx.confirmed, Some(approx.t_best >= 0.9));
    let capped = approximate_dimension(&p.system, 0.1, 6, p.oracle_dimension, 100).unwrap();
    assert!(capped.capped);
    assert_eq!(capped.k_best, 4);
}

#[test]
fn csv_exports() {
    let p = preset("rot5").unwrap();
    let res = extract(&p.system, 3, None).unwrap();
    let words = res.words_csv();
    assert!(words.starts_with("word,lip_minus,lip_plus,x,y,radius\n"));
    assert_eq!(words.lines().count(), 1 + res.words.len());
    let summary = res.summary_csv();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "k,tau,t_k,n_words,C");
    assert!(lines[1].starts_with("3,0,"));
}
