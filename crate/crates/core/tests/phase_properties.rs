use bdris_core::channel::ChannelRealization;
use bdris_core::linalg::{random_complex_vector, random_unitary, unitarity_error, CMatrix, C64};
use bdris_core::metrics::{effective_gain, uniform_feed, GainMode, LinkBudget, RisArchitecture, RisState};
use bdris_core::phase::{dris_baseline, riemannian_ascend, riemannian_ascend_observed, ManifoldStepConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn chan(rng: &mut ChaCha8Rng, m: usize) -> ChannelRealization {
    ChannelRealization {
        h: random_complex_vector(rng, m),
        g: random_complex_vector(rng, m),
        f: C64::new(0.3, -0.2),
    }
}

#[test]
fn unconstrained_bd_dominates_cophasing() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let budget = LinkBudget {
        p_max: 1.0,
        q_p: 1.0,
        sigma2: 0.1,
        i_th: 1e12,
    };
    let cfg = ManifoldStepConfig {
        rho: 0.0,
        enforce_feasibility: false,
        ..Default::default()
    };
    for trial in 0..100 {
        let m = [2, 4, 8, 16][trial % 4];
        let c = chan(&mut rng, m);
        let (bd, _) = riemannian_ascend(&c, &RisState::identity(m), GainMode::FeedVector, 1.0, &budget, &cfg).unwrap();
        let d = dris_baseline(&c.h, &uniform_feed(m)).unwrap();
        let bd_gain = effective_gain(&c.h, &bd, GainMode::FeedVector).unwrap();
        let d_gain = effective_gain(&c.h, &d, GainMode::FeedVector).unwrap();
        assert!(bd_gain >= d_gain - 1e-9, "trial {trial}: {bd_gain} < {d_gain}");
    }
}

#[test]
fn cophasing_is_optimal_among_diagonals() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let feed = uniform_feed(2);
    for _ in 0..5 {
        let h = random_complex_vector(&mut rng, 2);
        let d = dris_baseline(&h, &feed).unwrap();
        let best = effective_gain(&h, &d, GainMode::FeedVector).unwrap();
        let step = std::f64::consts::TAU / 360.0;
        for i in 0..360 {
            for j in 0..360 {
                let diag = [
                    C64::from_polar(1.0, i as f64 * step),
                    C64::from_polar(1.0, j as f64 * step),
                ];
                // |hᴴ Φ a|² for diagonal Φ, without building the matrix.
                let z = h[0].conj() * diag[0] * feed[0] + h[1].conj() * diag[1] * feed[1];
                assert!(z.norm_sqr() <= best + 1e-12);
            }
        }
    }
}

#[test]
fn accepted_steps_ascend_at_fixed_multiplier() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..20 {
        let m = 8;
        let c = chan(&mut rng, m);
        let budget = LinkBudget {
            p_max: 1.0,
            q_p: 1.0,
            sigma2: 0.1,
            i_th: rng.random_range(0.05..2.0),
        };
        let ris0 = RisState {
            phi: random_unitary(&mut rng, m),
            ..RisState::identity(m)
        };
        let (_, trace) = riemannian_ascend(
            &c,
            &ris0,
            GainMode::FeedVector,
            0.5,
            &budget,
            &ManifoldStepConfig::default(),
        )
        .unwrap();
        for it in trace.iterates.iter().filter(|it| it.accepted) {
            assert!(it.lagrangian_after >= it.lagrangian_before - 1e-9);
        }
    }
}

#[test]
fn every_candidate_is_unitary() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let c = chan(&mut rng, 32);
    let budget = LinkBudget {
        p_max: 1.0,
        q_p: 1.0,
        sigma2: 0.1,
        i_th: 0.2,
    };
    let mut seen = 0;
    let (ris, trace) = riemannian_ascend_observed(
        &c,
        &RisState::identity(32),
        GainMode::FeedVector,
        1.0,
        &budget,
        &ManifoldStepConfig::default(),
        |phi: &CMatrix| {
            seen += 1;
            assert!(unitarity_error(phi) < 1e-8);
        },
    )
    .unwrap();
    assert_eq!(seen, trace.retractions);
    assert_eq!(ris.mode, RisArchitecture::Bd);
    assert!(trace.max_retraction_error < 1e-8);
    if trace.converged {
        assert!(trace.final_delta < ManifoldStepConfig::default().epsilon);
    }
}

#[test]
fn literal_mode_is_phase_blind() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let v = random_complex_vector(&mut rng, 6);
    let a = RisState {
        phi: random_unitary(&mut rng, 6),
        ..RisState::identity(6)
    };
    let b = RisState {
        phi: random_unitary(&mut rng, 6),
        ..RisState::identity(6)
    };
    let ga = effective_gain(&v, &a, GainMode::LiteralNorm).unwrap();
    let gb = effective_gain(&v, &b, GainMode::LiteralNorm).unwrap();
    assert!((ga - gb).abs() < 1e-9 * v.norm_squared());
}
