use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vmscma::analysis::{
    aser_union_bound, exponential_e1, pep, pep_high_snr, scaled_e1, single_layer_union, statistical_snr,
};
use vmscma::channel::{draw_channel, n0_from_snr_db, superpose, transmit};
use vmscma::constellation::{lds_mc, permute_mc};
use vmscma::mpa_decoder::ml_decode;
use vmscma::rng::stream_rng;
use vmscma::vmm_design::{optimize_vmm_restarts, tau_metric};
use vmscma::*;

fn diverse() -> Deployment64 {
    Deployment::new(vec![4.70, 4.60, 1.62, 1.25, 1.20, 1.13], 2.0).unwrap()
}

// Composite Simpson on int_0^1 e^{-x/u}/u du, the substitution u = 1/t of E1.
fn e1_quadrature(x: f64) -> f64 {
    let n = 200_000;
    let h = 1.0 / n as f64;
    let f = |u: f64| if u == 0.0 { 0.0 } else { (-x / u).exp() / u };
    let mut s = f(0.0) + f(1.0);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn e1_matches_quadrature() {
    assert!((exponential_e1(1.0).unwrap() - 0.219_383_934_395_520_3).abs() < 1e-14);
    for x in [0.05, 0.3, 1.0, 1.5, 4.0, 12.0] {
        let q = e1_quadrature(x);
        let e = exponential_e1(x).unwrap();
        assert!((e - q).abs() <= 1e-8 * q, "x={x}: {e} vs {q}");
        assert!((scaled_e1(x).unwrap() - x.exp() * q).abs() <= 1e-8 * x.exp() * q);
    }
}

#[test]
fn permutation_search_beats_lds_baseline() {
    for m in [4u32, 8, 16] {
        let base = Constellation64::basic(m).unwrap();
        assert!(permute_mc(&base, 2).unwrap().aipd.is_finite());
        assert!(lds_mc(&base, 2).unwrap().aipd >= permute_mc(&base, 2).unwrap().aipd);
    }
}

#[test]
fn vmm_optimizer_hits_exhaustive_minimum_for_example_combination() {
    let graph = FactorGraph::default_4x6();
    let aipd = builtin_mc_pool::<f64>().aipd_by_order();
    let comb = ModCombination::new(vec![2, 2, 8, 16, 16, 16]).unwrap();
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..6).collect();
    // Heap's algorithm over all 720 assignments
    let mut c = [0usize; 6];
    let mut eval = |idx: &[usize]| {
        let o: Vec<u32> = idx.iter().map(|&i| comb.orders()[i]).collect();
        best = best.min(tau_metric(&graph, &o, &aipd).unwrap());
    };
    eval(&idx);
    let mut i = 0;
    while i < 6 {
        if c[i] < i {
            if i % 2 == 0 {
                idx.swap(0, i);
            } else {
                idx.swap(c[i], i);
            }
            eval(&idx);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let got = optimize_vmm_restarts(&graph, &comb, &aipd, 1, 8).unwrap();
    assert_eq!(got.tau, best);
    assert!(best > 0.0);
}

#[test]
fn rate_17_design_examples() {
    let graph = FactorGraph::default_4x6();
    let pool = builtin_mc_pool::<f64>();
    let equal = design_vm_scma(&graph, 17, &Deployment::equal(6, 2.0).unwrap(), &pool, DesignOptions::default()).unwrap();
    assert_eq!(equal.set.vmm.combination().orders(), &[4, 8, 8, 8, 8, 8]);
    let diverse = design_vm_scma(&graph, 17, &diverse(), &pool, DesignOptions::default()).unwrap();
    assert_eq!(diverse.set.vmm.combination().orders(), &[2, 2, 8, 16, 16, 16]);
    assert!(diverse.candidates.windows(2).all(|w| w[0].xi <= w[1].xi));
}

#[test]
fn fading_amplitude_is_rayleigh() {
    let dep = Deployment::equal(1, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 20_000;
    let mut r: Vec<f64> = (0..n).map(|_| draw_channel(&dep, 1, &mut rng).h[0][0].norm()).collect();
    r.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ks = r
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = 1.0 - (-x * x).exp();
            (cdf - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - cdf).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the one-sample KS statistic
    assert!(ks < 1.63 / (n as f64).sqrt(), "KS statistic {ks}");
}

#[test]
fn noise_power_matches_n0() {
    let graph = FactorGraph::default_4x6();
    let pool = builtin_mc_pool::<f64>();
    let dep = Deployment::equal(6, 2.0).unwrap();
    let set = CodebookSpec::Tm(1).build(&graph, &pool, &dep, DesignOptions::default()).unwrap();
    let n0 = n0_from_snr_db(7.0);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let h = ChannelRealization64::flat(6, 4);
    let s = [0usize; 6];
    let clean = superpose(&set, &s, &h).unwrap();
    let draws = 50_000;
    let mut acc = 0.0;
    for _ in 0..draws {
        let y = transmit(&set, &s, &h, n0, &mut rng).unwrap();
        acc += y.iter().zip(&clean).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / 4.0;
    }
    assert!((acc / draws as f64 - n0).abs() < 0.02 * n0);
}

#[test]
fn statistical_snr_matches_simulated_average() {
    let graph = FactorGraph::default_4x6();
    let pool = builtin_mc_pool::<f64>();
    let dep = diverse();
    let set = CodebookSpec::Rate(12).build(&graph, &pool, &dep, DesignOptions::default()).unwrap();
    let n0 = n0_from_snr_db(10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let draws = 100_000;
    let mut acc = 0.0;
    for _ in 0..draws {
        let h = draw_channel(&dep, 1, &mut rng);
        acc += (0..6).map(|j| set.powers()[j] * h.h[j][0].norm_sqr()).sum::<f64>() / n0;
    }
    let want = statistical_snr(&set, n0).unwrap();
    assert!((acc / draws as f64 - want).abs() < 0.02 * want);
}

#[test]
fn ml_and_mpa_agree_on_bpsk() {
    let graph = FactorGraph::default_4x6();
    let pool = builtin_mc_pool::<f64>();
    let dep = Deployment::equal(6, 2.0).unwrap();
    let set = CodebookSpec::Tm(1).build(&graph, &pool, &dep, DesignOptions::default()).unwrap();
    let n0 = n0_from_snr_db(10.0);
    let trials = 2000;
    let agree = (0..trials)
        .filter(|&t| {
            let mut rng = stream_rng(21, &[7], t);
            let s: Vec<usize> = (0..6).map(|_| rng.random_range(0..2)).collect();
            let h = draw_channel(&dep, 4, &mut rng);
            let y = transmit(&set, &s, &h, n0, &mut rng).unwrap();
            mpa_decode(&y, &set, &h, n0, &MpaConfig::default()).unwrap().decisions
                == ml_decode(&y, &set, &h, n0).unwrap()
        })
        .count();
    assert!(agree as f64 >= 0.99 * trials as f64);
}

#[test]
fn high_snr_pep_is_the_asymptote_of_pep() {
    let graph = FactorGraph::default_4x6();
    let pool = builtin_mc_pool::<f64>();
    let dep = diverse();
    let set = CodebookSpec::Rate(12).build(&graph, &pool, &dep, DesignOptions::default()).unwrap();
    let s = [0usize, 1, 0, 2, 3, 1];
    let s_hat = [1usize, 1, 0, 2, 3, 0];
    let n0 = 1e-7;
    let exact = pep(&s, &s_hat, &set, n0).unwrap();
    let approx = pep_high_snr(&s, &s_hat, &set, n0).unwrap();
    assert!((exact / approx - 1.0).abs() < 1e-3);
}

#[test]
fn single_layer_events_dominate_union_bound_at_high_snr() {
    let graph = FactorGraph::default_4x6();
    let pool = builtin_mc_pool::<f64>();
    let dep = Deployment::equal(6, 2.0).unwrap();
    let set = CodebookSpec::Tm(1).build(&graph, &pool, &dep, DesignOptions::default()).unwrap();
    let n0 = n0_from_snr_db(40.0);
    let full = aser_union_bound(&set, n0).unwrap();
    let single = single_layer_union(&set, n0).unwrap();
    let ratio = full.average_user() / single;
    assert!(ratio >= 1.0 && ratio < 1.2, "ratio {ratio}");
}

#[test]
fn capacity_matches_exponential_gain_average() {
    let k = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let snr = 10.0;
    let draws = 200_000;
    let mut acc = 0.0;
    for _ in 0..draws {
        for _ in 0..k {
            // |g|^2 ~ Exp(1)
            let e: f64 = -(1.0 - rng.random::<f64>()).ln();
            acc += (1.0 + e * snr).log2();
        }
    }
    let c = analysis::ergodic_capacity(1.0, 1.0 / snr, k, CapacityUnit::Bits).unwrap();
    assert!((c - acc / draws as f64).abs() < 0.02 * c);
}
