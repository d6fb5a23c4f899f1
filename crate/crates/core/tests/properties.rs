use num_complex::Complex64;
use proptest::prelude::*;

use vmscma::analysis::{snr_threshold_for, ser_from_model};
use vmscma::channel::{draw_channel, n0_from_snr_db, transmit};
use vmscma::codebook::{allocate_codebooks, allocate_power, xi};
use vmscma::constellation::aipd_of_mc;
use vmscma::montecarlo::run_ser;
use vmscma::rng::stream_rng;
use vmscma::vmm_design::{enumerate_default, optimize_vmm_traced, tau_metric};
use vmscma::*;

fn orders_for(rate: u32, pick: usize) -> ModCombination {
    let c = enumerate_default(6, rate);
    c[pick % c.len()].clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn aipd_invariant_under_common_phase(m_idx in 0usize..4, pick in 0usize..2) {
        let theta = [std::f64::consts::PI / 7.0, std::f64::consts::PI / 3.0][pick];
        let pool = builtin_mc_pool::<f64>();
        let mc = pool.get([2u32, 4, 8, 16][m_idx]).unwrap();
        let rot = Complex64::from_polar(1.0, theta);
        let rows: Vec<Vec<Complex64>> = mc.matrix.iter().map(|r| r.iter().map(|x| x * rot).collect()).collect();
        let a = aipd_of_mc(&rows).unwrap();
        prop_assert!((a - mc.aipd).abs() <= 1e-10 * mc.aipd);
    }

    #[test]
    fn aipd_scales_with_inverse_power_of_dimension(m_idx in 0usize..4, s in 0.2f64..5.0) {
        let pool = builtin_mc_pool::<f64>();
        let mc = pool.get([2u32, 4, 8, 16][m_idx]).unwrap();
        let rows: Vec<Vec<Complex64>> = mc.matrix.iter().map(|r| r.iter().map(|x| x * s).collect()).collect();
        let a = aipd_of_mc(&rows).unwrap();
        let want = mc.aipd * s.powi(-2 * mc.dimension as i32);
        prop_assert!((a - want).abs() <= 1e-10 * want);
    }

    #[test]
    fn powers_equalize_user_terms(
        rate in 6u32..=24,
        pick in 0usize..64,
        d in prop::collection::vec(1.0f64..5.0, 6),
        alpha in 1.0f64..5.0,
    ) {
        let aipd = builtin_mc_pool::<f64>().aipd_by_order();
        let a: Vec<f64> = orders_for(rate, pick).orders().iter().map(|m| aipd[m]).collect();
        let p = allocate_power(&a, &d, alpha, 2).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 6.0).abs() < 1e-12);
        let x = xi(&a, &d, alpha, 2).unwrap();
        for j in 0..6 {
            let term = d[j].powf(alpha) / p[j] * a[j].sqrt();
            // every user's term equals Xi / (J / J) = Xi
            prop_assert!((term - x).abs() <= 1e-10 * x);
        }
    }

    #[test]
    fn switch_trace_never_increases(rate in 6u32..=24, pick in 0usize..64, seed in any::<u64>()) {
        let graph = FactorGraph::default_4x6();
        let aipd = builtin_mc_pool::<f64>().aipd_by_order();
        let comb = orders_for(rate, pick);
        let (vmm, trace) = optimize_vmm_traced(&graph, &comb, &aipd, seed).unwrap();
        let mut last = trace.initial_tau;
        for &t in &trace.accepted {
            prop_assert!(t <= last);
            last = t;
        }
        prop_assert_eq!(vmm.tau, last);
        prop_assert_eq!(vmm.tau, tau_metric(&graph, &vmm.orders, &aipd).unwrap());
        prop_assert!(trace.accepted.len() <= 72);
        let mut sorted = vmm.orders.clone();
        sorted.sort();
        prop_assert_eq!(sorted.as_slice(), comb.orders());
    }

    #[test]
    fn farther_users_get_no_worse_codebooks(
        a in prop::collection::vec(0.1f64..50.0, 6),
        d in prop::collection::vec(1.0f64..5.0, 6),
    ) {
        let asg = allocate_codebooks(&a, &d).unwrap();
        let mut seen = asg.clone();
        seen.sort();
        prop_assert_eq!(seen, (0..6).collect::<Vec<_>>());
        for i in 0..6 {
            for j in 0..6 {
                if d[i] > d[j] {
                    prop_assert!(a[asg[i]] <= a[asg[j]]);
                }
            }
        }
    }

    #[test]
    fn model_threshold_inverts_prediction(a in 0.05f64..1.0, b in 0.01f64..100.0, frac in 0.01f64..0.99) {
        let model = SerModel::new(a, b, 10.0).unwrap();
        let ser = a * frac;
        let g = snr_threshold_for(&model, ser).unwrap();
        prop_assert!((ser_from_model(&model, g) - ser).abs() <= 1e-9 * ser);
    }

    #[test]
    fn deployment_is_sorted_and_clamped(d in prop::collection::vec(0.01f64..5.0, 1..10)) {
        let dep = Deployment::new(d.clone(), 2.0).unwrap();
        prop_assert_eq!(dep.users(), d.len());
        prop_assert!(dep.distances().windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(dep.distances().iter().all(|&x| (1.0..=5.0).contains(&x)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mpa_decisions_ignore_common_channel_rotation(seed in any::<u64>(), theta in 0.0f64..6.28, snr in 0.0f64..20.0) {
        let graph = FactorGraph::default_4x6();
        let pool = builtin_mc_pool::<f64>();
        let dep = Deployment::new(vec![3.0, 2.0, 1.5, 1.2, 1.1, 1.0], 2.0).unwrap();
        let set = CodebookSpec::Rate(12).build(&graph, &pool, &dep, DesignOptions::default()).unwrap();
        let n0 = n0_from_snr_db(snr);
        let mut rng = stream_rng(seed, &[1], 0);
        let s: Vec<usize> = (0..6).map(|j| (seed as usize >> (4 * j)) % set.user_order(j)).collect();
        let h = draw_channel(&dep, 4, &mut rng);
        let y = transmit(&set, &s, &h, n0, &mut rng).unwrap();
        let rot = Complex64::from_polar(1.0, theta);
        let h2 = ChannelRealization64 { h: h.h.iter().map(|r| r.iter().map(|x| x * rot).collect()).collect() };
        let y2: Vec<Complex64> = y.iter().map(|x| x * rot).collect();
        let cfg = MpaConfig::default();
        let a = mpa_decode(&y, &set, &h, n0, &cfg).unwrap();
        let b = mpa_decode(&y2, &set, &h2, n0, &cfg).unwrap();
        prop_assert_eq!(a.decisions, b.decisions);
    }

    #[test]
    fn mpa_decisions_invariant_to_likelihood_scale(seed in any::<u64>(), c in 0.1f64..10.0) {
        // scaling y and h by c and N0 by c^2 leaves every likelihood unchanged
        let graph = FactorGraph::default_4x6();
        let pool = builtin_mc_pool::<f64>();
        let dep = Deployment::equal(6, 2.0).unwrap();
        let set = CodebookSpec::Rate(17).build(&graph, &pool, &dep, DesignOptions::default()).unwrap();
        let n0 = n0_from_snr_db(12.0);
        let mut rng = stream_rng(seed, &[2], 0);
        let s: Vec<usize> = (0..6).map(|j| (seed as usize >> (4 * j)) % set.user_order(j)).collect();
        let h = draw_channel(&dep, 4, &mut rng);
        let y = transmit(&set, &s, &h, n0, &mut rng).unwrap();
        let h2 = ChannelRealization64 { h: h.h.iter().map(|r| r.iter().map(|x| x * c).collect()).collect() };
        let y2: Vec<Complex64> = y.iter().map(|x| x * c).collect();
        let cfg = MpaConfig::default();
        let a = mpa_decode(&y, &set, &h, n0, &cfg).unwrap();
        let b = mpa_decode(&y2, &set, &h2, n0 * c * c, &cfg).unwrap();
        prop_assert_eq!(a.decisions, b.decisions);
    }

    #[test]
    fn noiseless_mpa_recovers_symbols(seed in any::<u64>(), rate in 6u32..=18) {
        let graph = FactorGraph::default_4x6();
        let pool = builtin_mc_pool::<f64>();
        let dep = Deployment::equal(6, 2.0).unwrap();
        let set = CodebookSpec::Rate(rate).build(&graph, &pool, &dep, DesignOptions::default()).unwrap();
        let s: Vec<usize> = (0..6).map(|j| (seed as usize >> (4 * j)) % set.user_order(j)).collect();
        let h = draw_channel(&dep, 4, &mut stream_rng(seed, &[3], 0));
        let y = vmscma::channel::superpose(&set, &s, &h).unwrap();
        let out = mpa_decode(&y, &set, &h, 1e-4, &MpaConfig::default()).unwrap();
        prop_assert_eq!(out.decisions, s);
    }
}

#[test]
fn aggregate_ser_is_mean_of_user_ser() {
    let graph = FactorGraph::default_4x6();
    let pool = builtin_mc_pool::<f64>();
    let dep = Deployment::new(vec![2.0, 1.8, 1.5, 1.3, 1.1, 1.0], 3.0).unwrap();
    let set = CodebookSpec::Rate(14).build(&graph, &pool, &dep, DesignOptions::default()).unwrap();
    let c = Campaign {
        snr_db: vec![4.0, 10.0],
        trials_cap: 3000,
        batch_size: 500,
        seed: 4,
        ..Campaign::default()
    };
    for p in run_ser(&set, &dep, &c).unwrap().points {
        let mean = p.ser.iter().sum::<f64>() / p.ser.len() as f64;
        assert!((p.aggregate_ser - mean).abs() < 1e-15);
        assert!(p.ser.iter().all(|s| (0.0..=1.0).contains(s)));
    }
}
