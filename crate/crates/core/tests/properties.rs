use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use thermal_qkd::channel::{apply_channel, eve_tap, ChannelParams, PhaseDriftParams, TapSpec};
use thermal_qkd::distill::{amplitude, bit_error_rate, median_slice, BitString};
use thermal_qkd::harness::ScenarioConfig;
use thermal_qkd::info::{conditional_mutual_information, entropy, mutual_information, JointCounts};
use thermal_qkd::modem::{
    bits_to_symbols, derotate, estimate_delay, fold_quarter, quadrant_decision, rotate,
    symbol_phase, symbols_to_bits, SymbolStream,
};
use thermal_qkd::optics::{apply_beamsplitter, QuadraturePair};

fn complex() -> impl Strategy<Value = Complex64> {
    (-50.0..50.0f64, -50.0..50.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn quad() -> impl Strategy<Value = QuadraturePair> {
    (-50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, p)| QuadraturePair::new(x, p))
}

fn bits(max: usize) -> impl Strategy<Value = BitString> {
    prop::collection::vec(any::<bool>(), 2..max).prop_map(BitString)
}

fn table(vars: usize) -> impl Strategy<Value = JointCounts> {
    prop::collection::vec(0u64..500, 1 << vars)
        .prop_filter("non-empty", |c| c.iter().sum::<u64>() > 0)
        .prop_map(move |c| JointCounts::new(vars, c).unwrap())
}

fn still_link(t: f64, delay: usize, taps: Vec<TapSpec>, offset: f64) -> ChannelParams {
    ChannelParams {
        transmittance: t,
        delay,
        drift: PhaseDriftParams {
            offset,
            ..Default::default()
        },
        taps,
        rx_noise_var: 0.0,
    }
}

proptest! {
    #[test]
    fn beamsplitter_conserves_energy(a in complex(), b in complex(), t in 0.0..=1.0f64) {
        let (c, d) = apply_beamsplitter(a, b, t).unwrap();
        let before = a.norm_sqr() + b.norm_sqr();
        prop_assert!((c.norm_sqr() + d.norm_sqr() - before).abs() <= 1e-9 * before.max(1.0));
    }

    #[test]
    fn beamsplitter_rejects_bad_transmittance(t in prop_oneof![-5.0..-1e-9f64, 1.0 + 1e-9..5.0f64]) {
        prop_assert!(apply_beamsplitter(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), t).is_err());
    }

    #[test]
    fn eve_tap_splits_intensity(stream in prop::collection::vec(complex(), 1..50), t in 0.0..=1.0f64) {
        let (bob, eve) = eve_tap(&stream, t).unwrap();
        for ((a, b), e) in stream.iter().zip(&bob).zip(&eve) {
            prop_assert!((b.norm_sqr() - t * a.norm_sqr()).abs() < 1e-9 * a.norm_sqr().max(1.0));
            prop_assert!((e.norm_sqr() - (1.0 - t) * a.norm_sqr()).abs() < 1e-9 * a.norm_sqr().max(1.0));
        }
    }

    #[test]
    fn rotation_and_derotation_are_isometries(q in quad(), theta in -10.0..10.0f64, s in 0u8..4) {
        let r = rotate(q, theta);
        prop_assert!((amplitude(r) - amplitude(q)).abs() < 1e-9);
        let d = derotate(q, s).unwrap();
        prop_assert!((amplitude(d) - amplitude(q)).abs() < 1e-9);
    }

    #[test]
    fn derotation_inverts_symbol_rotation(s in 0u8..4, r in 0.1..20.0f64) {
        // a noiseless point on the phase-0 axis, rotated onto symbol s
        let phase = symbol_phase(s).unwrap();
        let q = rotate(QuadraturePair::new(r, 0.0), phase);
        prop_assert_eq!(quadrant_decision(q), s);
        let back = derotate(q, s).unwrap();
        prop_assert!((back.x - r).abs() < 1e-9 && back.p.abs() < 1e-9);
    }

    #[test]
    fn bits_round_trip_through_symbols(raw in prop::collection::vec(any::<bool>(), 0..200)) {
        let mut even = raw.clone();
        if even.len() % 2 == 1 {
            even.pop();
        }
        prop_assert_eq!(symbols_to_bits(&bits_to_symbols(&even)), even);
    }

    #[test]
    fn neighbouring_symbols_differ_in_one_bit(s in 0u8..4) {
        let one = SymbolStream::new(vec![s]).unwrap();
        let next = SymbolStream::new(vec![(s + 1) % 4]).unwrap();
        let a = symbols_to_bits(&one);
        let b = symbols_to_bits(&next);
        prop_assert_eq!(a.iter().zip(&b).filter(|(x, y)| x != y).count(), 1);
    }

    #[test]
    fn quarter_fold_range(theta in -100.0..100.0f64) {
        let f = fold_quarter(theta);
        prop_assert!((-std::f64::consts::FRAC_PI_4..std::f64::consts::FRAC_PI_4).contains(&f));
        let k = (theta - f) / std::f64::consts::FRAC_PI_2;
        prop_assert!((k - k.round()).abs() < 1e-9);
    }

    #[test]
    fn planted_delay_is_recovered(
        seed in any::<u64>(),
        lag in -100i64..=100,
        n in 400usize..1500,
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reference: Vec<u8> = (0..n).map(|_| rng.random_range(0..4u8)).collect();
        let rx: Vec<u8> = (0..n as i64)
            .map(|j| {
                let t = j - lag;
                if (0..n as i64).contains(&t) { reference[t as usize] } else { rng.random_range(0..4u8) }
            })
            .collect();
        let found = estimate_delay(&SymbolStream::new(reference).unwrap(), &SymbolStream::new(rx).unwrap(), 100).unwrap();
        prop_assert_eq!(found.lag, lag);
        prop_assert_eq!(found.match_fraction, 1.0);
    }

    #[test]
    fn median_slicing_balances_distinct_values(raw in prop::collection::hash_set(-1_000_000i64..1_000_000, 2..300)) {
        let zs: Vec<f64> = raw.into_iter().map(|v| v as f64).collect();
        let ones = median_slice(&zs).unwrap().count_ones();
        prop_assert_eq!(ones, zs.len() / 2);
    }

    #[test]
    fn ber_is_symmetric_and_bounded(a in bits(100), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = BitString(a.0.iter().map(|&x| x ^ rng.random_bool(0.3)).collect());
        let ab = bit_error_rate(&a, &b).unwrap();
        prop_assert_eq!(ab, bit_error_rate(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn mi_is_bounded_by_marginal_entropies(t in table(2)) {
        let mi = mutual_information(&t).unwrap();
        let ha = entropy(&t.marginal(&[0]).unwrap()).unwrap();
        let hb = entropy(&t.marginal(&[1]).unwrap()).unwrap();
        prop_assert!(mi >= 0.0);
        prop_assert!(mi <= ha.min(hb) + 1e-12);
    }

    #[test]
    fn cmi_is_non_negative_and_bounded(t in table(3)) {
        let cmi = conditional_mutual_information(&t).unwrap();
        let ha = entropy(&t.marginal(&[0]).unwrap()).unwrap();
        prop_assert!(cmi >= 0.0);
        prop_assert!(cmi <= ha + 1e-12);
    }

    #[test]
    fn channel_is_linear_without_noise(
        xs in prop::collection::vec(complex(), 20..60),
        ys in prop::collection::vec(complex(), 20..60),
        t in 0.01..1.0f64,
        delay in 0usize..5,
        offset in -3.0..3.0f64,
        scale in -3.0..3.0f64,
    ) {
        let n = xs.len().min(ys.len());
        let taps = vec![TapSpec { delay: 2, amplitude: 0.1, phase: 0.4 }];
        let link = still_link(t, delay, taps, offset);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mixed: Vec<Complex64> = xs[..n].iter().zip(&ys[..n]).map(|(x, y)| x * scale + y).collect();
        let out_x = apply_channel(&xs[..n], &link, &mut rng).unwrap();
        let out_y = apply_channel(&ys[..n], &link, &mut rng).unwrap();
        let out_m = apply_channel(&mixed, &link, &mut rng).unwrap();
        for ((m, x), y) in out_m.iter().zip(&out_x).zip(&out_y) {
            prop_assert!((m - (x * scale + y)).norm() < 1e-9);
        }
    }

    #[test]
    fn lossy_line_scales_intensity(
        xs in prop::collection::vec(complex(), 10..80),
        t in 0.0..=1.0f64,
        delay in 0usize..8,
        offset in -3.0..3.0f64,
    ) {
        let link = still_link(t, delay, Vec::new(), offset);
        let out = apply_channel(&xs, &link, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        prop_assert_eq!(out.len(), xs.len());
        for (k, o) in out.iter().enumerate() {
            let expected = if k >= delay { t * xs[k - delay].norm_sqr() } else { 0.0 };
            prop_assert!((o.norm_sqr() - expected).abs() < 1e-9 * expected.max(1.0));
        }
    }

    #[test]
    fn packed_bits_round_trip(b in bits(300)) {
        prop_assert_eq!(BitString::from_packed(&b.to_packed(), b.len()).unwrap(), b);
    }

    #[test]
    fn numeric_settings_round_trip_through_text(v in 0.0..5.0f64, t in 0.0..=1.0f64) {
        let mut cfg = ScenarioConfig::waveguide();
        cfg.set_param("bob_link.rx_noise_var", v).unwrap();
        cfg.set_param("eve_transmittance", t).unwrap();
        prop_assert_eq!(cfg.bob_link.rx_noise_var, v);
        let back = ScenarioConfig::from_config_str(&cfg.to_config_string()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
