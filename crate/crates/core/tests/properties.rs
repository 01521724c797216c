use jury_core::clustering::{fit_gmm, fit_kmeans, GmmConfig, KMeansConfig, Points};
use jury_core::labeling::{
    aggregate_labels, expected_jury, keep_count, lasso_logistic, ClusterDesign, JuryMode, Jury, Label, LassoConfig,
    MisclassSummary, TypeStat,
};
use jury_core::metrics::{majority_vote, mcs};
use jury_core::model::{AgentType, Beliefs, NoiseLevel, Population, Properties, Sign, TypeCounts};
use jury_core::numerics::{correlation_matrix, decompose, SymmetricMatrix};
use jury_core::rng::StreamKey;
use jury_core::sim::{RoundFilter, RunData, RunMeta, VoteMatrix};
use proptest::prelude::*;
use rand::Rng;

fn s(v: i8) -> Sign {
    Sign::from_bool(v > 0)
}

// Expected vote for (quality belief, p2 belief, p3/personal belief), one row
// per type in canonical order, columns ordered (+,+,+), (+,+,−), (+,−,+),
// (+,−,−), (−,+,+), (−,+,−), (−,−,+), (−,−,−).
const TABLE: [[i8; 8]; 10] = [
    [1, 1, 1, 1, -1, -1, -1, -1],  // A
    [1, 1, 1, 1, 1, 1, -1, -1],    // B up
    [1, 1, -1, -1, -1, -1, -1, -1], // B down
    [1, 1, -1, -1, 1, 1, -1, -1],  // B both
    [1, 1, 1, 1, 1, -1, 1, -1],    // D up
    [-1, 1, -1, 1, -1, -1, -1, -1], // D down
    [-1, 1, -1, 1, 1, -1, 1, -1],  // D both
    [1, 1, 1, 1, 1, -1, 1, -1],    // L up
    [-1, 1, -1, 1, -1, -1, -1, -1], // L down
    [-1, 1, -1, 1, 1, -1, 1, -1],  // L both
];

#[test]
fn vote_table_is_exhaustively_conformant() {
    for t in AgentType::ALL {
        for combo in 0..8 {
            let q = if combo & 4 == 0 { 1 } else { -1 };
            let b = if combo & 2 == 0 { 1 } else { -1 };
            let d = if combo & 1 == 0 { 1 } else { -1 };
            let beliefs = if t.is_lone_wolf() {
                // the shared p3 belief is the opposite of the private cue and must not matter
                Beliefs { quality: s(q), boost: s(b), distort: s(-d), personal: Some(s(d)) }
            } else {
                Beliefs { quality: s(q), boost: s(b), distort: s(d), personal: None }
            };
            let want = TABLE[t.index()][combo];
            assert_eq!(t.vote(&beliefs).value(), want, "{t} with beliefs ({q},{b},{d})");
        }
    }
}

#[test]
fn ties_and_empty_juries_go_to_plus() {
    assert_eq!(majority_vote(&[1, -1], &Jury::everyone(2)), Sign::Plus);
    assert_eq!(majority_vote(&[1, -1, -1, 1], &Jury::everyone(4)), Sign::Plus);
    assert_eq!(majority_vote(&[-1, -1], &Jury::default()), Sign::Plus);
    assert_eq!(majority_vote(&[-1, -1, 1], &Jury::everyone(3)), Sign::Minus);
}

#[test]
fn four_of_five_truth_table() {
    for mask in 0u32..32 {
        let boots: Vec<Vec<Label>> = (0..5)
            .map(|b| vec![if mask >> b & 1 == 1 { Label::Authentic } else { Label::Inauthentic }])
            .collect();
        let got = aggregate_labels(boots.iter().map(|v| v.as_slice()), 1, 4)[0];
        let want = if mask.count_ones() >= 4 { Label::Authentic } else { Label::Inauthentic };
        assert_eq!(got, want, "mask {mask:05b}");
    }
}

#[test]
fn lasso_zeroes_independent_predictors() {
    for seed in 0..5u64 {
        let mut rng = StreamKey::new(seed).stream();
        let r = 400;
        let k = 4;
        let y: Vec<Sign> = (0..r).map(|_| Sign::from_bool(rng.gen_bool(0.75))).collect();
        let data: Vec<f64> = (0..r * k).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let design = ClusterDesign::new(r, k, data, y).unwrap();
        let fit = lasso_logistic(&design, &mut StreamKey::new(seed).child(1).stream(), &LassoConfig::default()).unwrap();
        assert!(fit.beta.iter().all(|&b| b == 0.0), "seed {seed}: {:?}", fit.beta);
    }
}

fn run_from(rows: &[Vec<i8>], p1: &[i8], p2: &[i8]) -> RunData {
    let n = rows[0].len();
    let votes = VoteMatrix::from_raw(rows.len(), n, rows.concat()).unwrap();
    let props = p1.iter().zip(p2).map(|(&a, &b)| Properties::new(s(a), s(b), Sign::Plus)).collect();
    let pop = Population::new(TypeCounts::empty().with(AgentType::Authentic, n)).unwrap();
    let meta = RunMeta { population: pop, noise: NoiseLevel::LOW, competence: Default::default(), seed: 0, run_index: 0 };
    RunData::new(votes, props, meta).unwrap()
}

fn sign_strategy() -> impl Strategy<Value = i8> {
    prop_oneof![Just(1i8), Just(-1i8)]
}

fn table_strategy() -> impl Strategy<Value = (Vec<Vec<i8>>, Vec<i8>, Vec<i8>, Vec<bool>)> {
    (1usize..=5, 1usize..=8).prop_flat_map(|(n, r)| {
        (
            prop::collection::vec(prop::collection::vec(sign_strategy(), n), r),
            prop::collection::vec(sign_strategy(), r),
            prop::collection::vec(sign_strategy(), r),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

proptest! {
    #[test]
    fn mcs_matches_brute_force((rows, p1, p2, members) in table_strategy(), filtered in any::<bool>()) {
        let data = run_from(&rows, &p1, &p2);
        let jury = Jury::new(members.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect());
        let filter = if filtered { RoundFilter { p2: Some(Sign::Plus), ..RoundFilter::NONE } } else { RoundFilter::NONE };
        let mut kept = 0;
        let mut right = 0;
        for t in 0..rows.len() {
            if filtered && p2[t] != 1 {
                continue;
            }
            kept += 1;
            let ups = (0..rows[t].len()).filter(|&a| members[a] && rows[t][a] == 1).count();
            let downs = (0..rows[t].len()).filter(|&a| members[a] && rows[t][a] == -1).count();
            let majority = if ups >= downs { 1 } else { -1 };
            if majority == p1[t] {
                right += 1;
            }
        }
        let got = mcs(&data, &jury, &filter);
        if kept == 0 {
            prop_assert_eq!(got, None);
        } else {
            let want = 100.0 * right as f64 / kept as f64;
            prop_assert!((got.unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn majority_ignores_order_and_cancelling_pairs(votes in prop::collection::vec(sign_strategy(), 0..12), seed in any::<u64>()) {
        let n = votes.len();
        let base = majority_vote(&votes, &Jury::everyone(n));
        let mut shuffled = votes.clone();
        let mut rng = StreamKey::new(seed).stream();
        for i in (1..n).rev() {
            shuffled.swap(i, rng.gen_range(0..=i));
        }
        prop_assert_eq!(majority_vote(&shuffled, &Jury::everyone(n)), base);
        let mut padded = votes.clone();
        padded.extend([1, -1]);
        prop_assert_eq!(majority_vote(&padded, &Jury::everyone(n + 2)), base);
    }

    #[test]
    fn expected_jury_sizes(size_a in 1usize..150, size_b in 1usize..150, ma in 0.0f64..1.0, sa in 0.0f64..0.6, mb in 0.0f64..1.0, sb in 0.0f64..0.6) {
        let pop = Population::new(TypeCounts::empty().with(AgentType::Authentic, size_a).with(AgentType::BoosterUp, size_b)).unwrap();
        let mut summary = MisclassSummary::default();
        summary.set(AgentType::Authentic, TypeStat { mean: ma, sd: sa });
        summary.set(AgentType::BoosterUp, TypeStat { mean: mb, sd: sb });
        let mut previous_inauthentic = 0;
        for mode in [JuryMode::Best, JuryMode::Average, JuryMode::Worst] {
            let (da, db) = match mode {
                JuryMode::Average => (ma, mb),
                JuryMode::Best => ((ma - 2.0 * sa).max(0.0), (mb - 2.0 * sb).max(0.0)),
                JuryMode::Worst => ((ma + 2.0 * sa).min(1.0), (mb + 2.0 * sb).min(1.0)),
            };
            let jury = expected_jury(&pop, &summary, mode).unwrap();
            let comp = jury.composition(&pop);
            prop_assert_eq!(comp[0], keep_count(size_a, 1.0 - da));
            prop_assert_eq!(comp[1], keep_count(size_b, db));
            prop_assert!(comp[0] <= size_a && comp[1] <= size_b);
            prop_assert!(comp[1] >= previous_inauthentic);
            previous_inauthentic = comp[1];
        }
    }

    #[test]
    fn correlation_matrix_invariants(n in 2usize..12, r in 3usize..40, seed in any::<u64>()) {
        let mut rng = StreamKey::new(seed).stream();
        let data: Vec<i8> = (0..r * n).map(|_| if rng.gen_bool(0.6) { 1 } else { -1 }).collect();
        let votes = VoteMatrix::from_raw(r, n, data).unwrap();
        let c = correlation_matrix(&votes).unwrap();
        let mut trace = 0.0;
        for i in 0..n {
            trace += c.get(i, i);
            prop_assert_eq!(c.get(i, i), 1.0);
            for j in 0..n {
                prop_assert_eq!(c.get(i, j), c.get(j, i));
                prop_assert!(c.get(i, j).abs() <= 1.0);
            }
        }
        prop_assert!((trace - n as f64).abs() < 1e-12);
    }

    #[test]
    fn spectral_reconstruction(n in 1usize..25, seed in any::<u64>()) {
        let mut rng = StreamKey::new(seed).stream();
        let raw: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = SymmetricMatrix::from_fn(n, |i, j| raw[i.min(j) * n + i.max(j)]).unwrap();
        let d = decompose(&m).unwrap();
        let back = d.reconstruct();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((back.get(i, j) - m.get(i, j)).abs() <= 1e-8);
            }
        }
        prop_assert!(d.values().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn em_and_lloyd_are_monotone(n in 12usize..80, k in 1usize..5, seed in any::<u64>()) {
        let mut rng = StreamKey::new(seed).stream();
        let data: Vec<f64> = (0..2 * n)
            .map(|i| rng.gen_range(-1.0..1.0) + if i % 4 < 2 { 3.0 } else { 0.0 })
            .collect();
        let pts = Points::new(n, 2, data).unwrap();
        // without the covariance ridge EM is an exact likelihood ascent
        let plain = GmmConfig { reg_scale: 0.0, ..GmmConfig::default() };
        if let Ok(m) = fit_gmm(&pts, k, &mut rng, &plain) {
            for w in m.loglik_trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{:?}", m.loglik_trace);
            }
        }
        let km = fit_kmeans(&pts, k, &mut rng, &KMeansConfig::default()).unwrap();
        for w in km.dispersion_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].max(1.0));
        }
    }
}
