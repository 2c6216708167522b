//! Randomized invariants over the geometry, path and container layers.

use proptest::prelude::*;

use slfm_core::container::LatentContainer;
use slfm_core::diagnostics::component_swap;
use slfm_core::flow::shift_time;
use slfm_core::numeric::{dist, dot, norm};
use slfm_core::paths::{chord_norm_sq, linear_path, radial_split, PairPath, PathKind};
use slfm_core::sphere::{
    angle_between, exp_map, radial_project, slerp, slerp_velocity, tangent_project, SlerpPlan, SlerpRegime,
    SphereToken, TangentVector,
};

fn vector(d: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    d.prop_flat_map(|d| prop::collection::vec(-10.0f64..10.0, d))
        .prop_filter("away from the origin", |v| norm(v) > 1e-3)
}

fn pair(d: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    d.prop_flat_map(|d| {
        (
            prop::collection::vec(-10.0f64..10.0, d),
            prop::collection::vec(-10.0f64..10.0, d),
        )
    })
    .prop_filter("away from the origin", |(a, b)| norm(a) > 1e-3 && norm(b) > 1e-3)
}

proptest! {
    #[test]
    fn projection_lands_on_sphere_and_is_idempotent(v in vector(2..40), r in 0.1f64..50.0) {
        let p = radial_project(&v, r).unwrap();
        prop_assert!((norm(&p) - r).abs() <= 1e-12 * r);
        let q = radial_project(&p, r).unwrap();
        prop_assert!(dist(&p, &q) <= 1e-12 * r);
        // direction is preserved
        prop_assert!(angle_between(&v, &p) < 1e-6 || dot(&v, &p) > 0.0);
    }

    #[test]
    fn slerp_hits_endpoints_and_stays_on_sphere((a, b) in pair(2..24), r in 0.5f64..20.0, t in 0.0f64..=1.0) {
        let x0 = radial_project(&a, r).unwrap();
        let x1 = radial_project(&b, r).unwrap();
        let z = slerp(&x0, &x1, t).unwrap();
        prop_assert!((norm(&z) - r).abs() <= 1e-9 * r);
        prop_assert!(dist(&slerp(&x0, &x1, 0.0).unwrap(), &x0) <= 1e-9 * r);
        let plan = SlerpPlan::new(&x0, &x1).unwrap();
        if !matches!(plan.regime(), SlerpRegime::NearAntipodal { .. }) {
            prop_assert!(dist(&slerp(&x0, &x1, 1.0).unwrap(), &x1) <= 1e-6 * r);
        }
        let v = slerp_velocity(&x0, &x1, t).unwrap();
        prop_assert!(dot(&v, &z).abs() <= 1e-6 * r * (1.0 + v.norm()));
    }

    #[test]
    fn tangent_projection_is_orthogonal_and_idempotent((v, base) in pair(3..16)) {
        let p = radial_project(&base, 2.0).unwrap();
        let t = tangent_project(&v, &p).unwrap();
        prop_assert!(dot(&t, &p).abs() <= 1e-9 * (1.0 + norm(&v)));
        let tt = tangent_project(&t, &p).unwrap();
        prop_assert!(dist(&t, &tt) <= 1e-12 * (1.0 + norm(&v)));
    }

    #[test]
    fn exp_map_preserves_radius((base, step) in pair(2..16)) {
        let p = radial_project(&base, 3.0).unwrap();
        let v: TangentVector = tangent_project(&step, &p).unwrap();
        let q: SphereToken = exp_map(&p, &v);
        prop_assert!((norm(&q) - 3.0).abs() <= 1e-12 * 3.0);
    }

    #[test]
    fn chord_identity_holds((a, b) in pair(2..64), t in 0.0f64..=1.0) {
        let direct = norm(&linear_path(&a, &b, t).unwrap().z_t).powi(2);
        let (r0, r1) = (norm(&a), norm(&b));
        let closed = chord_norm_sq(r0, r1, dot(&a, &b) / (r0 * r1), t);
        prop_assert!((direct - closed).abs() <= 1e-9 * (r0 * r0 + r1 * r1));
    }

    #[test]
    fn path_endpoints_are_reproduced((a, b) in pair(2..24), kind_ix in 0usize..2) {
        let kind = [PathKind::Linear, PathKind::Shell][kind_ix];
        // the antipodal fallback ends at the reflected start instead
        prop_assume!(kind == PathKind::Linear || angle_between(&a, &b) < std::f64::consts::PI - 0.1);
        let path = PairPath::new(kind, &a, &b).unwrap();
        let scale = norm(&a) + norm(&b);
        prop_assert!(dist(&path.at(0.0).z_t, &a) <= 1e-9 * scale);
        prop_assert!(dist(&path.at(1.0).z_t, &b) <= 1e-6 * scale);
    }

    #[test]
    fn radial_share_is_a_fraction((u, z) in pair(2..16)) {
        let s = radial_split(&u, &z).unwrap();
        prop_assert!((0.0..=1.0).contains(&s.share));
        prop_assert!((s.radial_energy + s.tangential_energy - dot(&u, &u)).abs() <= 1e-9 * dot(&u, &u));
    }

    #[test]
    fn swap_twice_restores_tokens((a, s) in pair(2..32)) {
        let first = component_swap(&a, &s).unwrap();
        let back = component_swap(&first.keep_radius, &first.keep_direction).unwrap();
        prop_assert!(dist(&back.keep_direction, &s) <= 1e-9 * norm(&s));
        prop_assert!(dist(&back.keep_radius, &a) <= 1e-9 * norm(&a));
        prop_assert!((norm(&first.keep_direction) - norm(&s)).abs() <= 1e-9 * norm(&s));
    }

    #[test]
    fn shift_is_monotone(u in 0.0f64..1.0, du in 1e-9f64..0.5, s in 0.05f64..20.0) {
        let v = (u + du).min(1.0);
        prop_assume!(v > u);
        prop_assert!(shift_time(v, s) > shift_time(u, s));
    }

    #[test]
    fn container_round_trip_is_bit_exact(
        d in 1u32..6, h in 1u32..5, w in 1u32..5, n in 0u32..4,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let len = (d * h * w * n) as usize;
        let data: Vec<f32> = (0..len).map(|_| f32::from_bits(rng.random::<u32>() & 0xbf7f_ffff)).collect();
        let c = LatentContainer::new(d, h, w, n, data).unwrap();
        let bytes = c.to_bytes();
        prop_assert_eq!(bytes.len(), 22 + 4 * len);
        let back = LatentContainer::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        prop_assert_eq!(back, c);
    }
}
