use proptest::prelude::*;

use tbs_noma_core::analytic::{
    abep_e2e, abep_sic_at_ue1, direct_terms, phi_threshold, sic_terms, table1_coeffs, ModeCoefficients, NetworkConfig,
    PhiThreshold,
};
use tbs_noma_core::constellation::{demodulate, modulate, Mode, PowerAllocation, Scheme};
use tbs_noma_core::sim::{run_slot, RelayPolicy, SimContext, SlotRng};
use tbs_noma_core::threshold::{solve_closed_form, sinr_th_opt};
use tbs_noma_core::constellation::Receiver;

fn scheme() -> impl Strategy<Value = Scheme> {
    prop_oneof![Just(Scheme::Bpsk), Just(Scheme::Qpsk), Just(Scheme::Qam16)]
}

fn mode() -> impl Strategy<Value = Mode> {
    (1u8..=6).prop_map(|m| Mode::new(m).unwrap())
}

/// Near-user share that keeps every pattern of every mode valid.
fn a1() -> impl Strategy<Value = f64> {
    0.01f64..0.2
}

proptest! {
    #[test]
    fn modulate_demodulate_identity(s in scheme(), idx in 0usize..16) {
        let idx = idx % s.order();
        let bits = s.bits_of(idx);
        let x = modulate(bits.as_slice(), s).unwrap();
        prop_assert_eq!(demodulate(x, s), bits);
        prop_assert_eq!(s.index_of(bits.as_slice()).unwrap(), idx);
    }

    #[test]
    fn nearest_neighbours_differ_in_one_bit(s in scheme(), idx in 0usize..16) {
        let pts = s.points();
        let idx = idx % pts.len();
        let dmin = pts.iter().enumerate().filter(|&(j, _)| j != idx)
            .map(|(_, p)| (p - pts[idx]).norm()).fold(f64::INFINITY, f64::min);
        for (j, p) in pts.iter().enumerate() {
            if j != idx && ((p - pts[idx]).norm() - dmin).abs() < 1e-12 {
                prop_assert_eq!((j ^ idx).count_ones(), 1);
            }
        }
    }

    #[test]
    fn threshold_round_trip(phi in 0.0f64..1e6, a1 in 0.01f64..0.49) {
        let pa = PowerAllocation::from_near_share(a1).unwrap();
        let s = sinr_th_opt(phi, &pa);
        prop_assert!(s < pa.a2() / pa.a1());
        match phi_threshold(s, &pa) {
            PhiThreshold::Finite(p) => prop_assert!((p - phi).abs() <= 1e-12 * phi.max(1.0) * (1.0 + a1 * phi)),
            PhiThreshold::Infeasible => prop_assert!(false, "round trip left the feasible region"),
        }
    }

    #[test]
    fn sic_at_zero_threshold_is_direct(m in mode(), a1 in a1(), g in 1e-3f64..1e6) {
        let c = table1_coeffs(m, a1, 1.0 - a1).unwrap();
        let s = sic_terms(&c, PhiThreshold::Finite(0.0), g).unwrap();
        for (x, y) in s.iter().zip(direct_terms(&c, g)) {
            prop_assert_eq!(*x, y);
        }
    }

    #[test]
    fn sic_is_a_probability(m in mode(), a1 in a1(), g in 1e-3f64..1e6, phi in 0.0f64..1e4) {
        let c = table1_coeffs(m, a1, 1.0 - a1).unwrap();
        let p = abep_sic_at_ue1(&c, PhiThreshold::Finite(phi), g).unwrap();
        prop_assert!((0.0..=0.5).contains(&p));
    }

    #[test]
    fn e2e_bounded_and_scale_invariant(
        m in mode(), a1 in a1(), rho_db in -10.0f64..50.0, s1 in -10.0f64..10.0,
        s2 in -10.0f64..10.0, r in -10.0f64..10.0, th in 0.0f64..20.0, k_db in -20.0f64..20.0,
    ) {
        let cfg = NetworkConfig::from_db(a1, rho_db, s1, s2, r, 0.5).unwrap();
        let c = ModeCoefficients::for_allocation(m, &cfg.pa).unwrap();
        let p = abep_e2e(&c, &cfg, th).unwrap();
        prop_assert!((0.0..=0.5).contains(&p));
        // Moving gain between ρ and the σ² leaves every average SNR unchanged.
        let moved = NetworkConfig::from_db(a1, rho_db + k_db, s1 - k_db, s2 - k_db, r - k_db, 0.5).unwrap();
        let q = abep_e2e(&c, &moved, th).unwrap();
        prop_assert!((p - q).abs() <= 1e-9 * p.max(1e-300) + 1e-300, "{} vs {}", p, q);
    }

    #[test]
    fn closed_form_optimum_is_feasible(m in mode(), a1 in a1(), rho_db in -10.0f64..60.0, s in -10.0f64..10.0) {
        let cfg = NetworkConfig::from_db(a1, rho_db, s, 0.0, s, 0.5).unwrap();
        let c = ModeCoefficients::for_allocation(m, &cfg.pa).unwrap();
        let sol = solve_closed_form(&c, &cfg);
        prop_assert!(sol.phi_opt >= 0.0);
        prop_assert!(sol.sinr_th_opt >= 0.0 && sol.sinr_th_opt < cfg.pa.a2() / cfg.pa.a1());
        if !sol.active_terms.iter().any(|&a| a) {
            prop_assert_eq!(sol.phi_opt, 0.0);
        }
    }

    #[test]
    fn slots_are_pure_functions_of_seed(m in mode(), seed in any::<u64>(), slot in any::<u64>()) {
        let cfg = NetworkConfig::from_db(0.1, 10.0, 0.0, 0.0, 0.0, 0.5).unwrap();
        let ctx = SimContext::new(cfg, m, RelayPolicy::FixedThreshold(2.0), Receiver::default()).unwrap();
        let a = run_slot(&ctx, &mut SlotRng::new(seed).stream(slot));
        let b = run_slot(&ctx, &mut SlotRng::new(seed).stream(slot));
        prop_assert_eq!(a, b);
        prop_assert!(a.ue2_bit_errors <= a.bits);
    }
}
