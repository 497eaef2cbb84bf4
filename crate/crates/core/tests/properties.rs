use std::sync::Arc;

use fluxprobe::angular_spectrum::{
    eta3, project_propagating, time_reverse, AngularField, AnnulusSpec, DirectionGrid, FrequencyBand, Orientation,
};
use fluxprobe::flux::{flux, flux_inner, w_norm_sq};
use fluxprobe::media::{Layer, LayeredProfile};
use fluxprobe::solver_1d::reflection_coefficient;
use fluxprobe::spectral::lemma1_integral;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spaces() -> (Arc<FrequencyBand>, Arc<DirectionGrid>) {
    let band = Arc::new(FrequencyBand::uniform(0.5, 3.0, 6, 1.2).unwrap());
    let grid = Arc::new(
        DirectionGrid::polar_with_annulus(3, 6, 0.02, Some(AnnulusSpec { n_radial: 2, eta_max: 1.6 })).unwrap(),
    );
    (band, grid)
}

fn field(seed: u64, orientation: Orientation) -> AngularField {
    let (band, grid) = spaces();
    AngularField::random(band, grid, orientation, false, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * scale.max(1e-300)
}

fn profile() -> impl Strategy<Value = LayeredProfile> {
    (prop::collection::vec((0.05f64..2.0, 0.3f64..3.0), 0..4), 0.3f64..3.0).prop_map(|(layers, bottom)| {
        LayeredProfile {
            c0: 1.0,
            layers: layers.into_iter().map(|(thickness, speed)| Layer { thickness, speed }).collect(),
            bottom_speed: bottom,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent_and_flux_orthogonal(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (u, v) = (field(s1, Orientation::Down), field(s2, Orientation::Down));
        let pu = project_propagating(&u);
        let ppu = project_propagating(&pu);
        prop_assert_eq!(pu.amplitudes(), ppu.amplitudes());
        let scale = (w_norm_sq(&u) * w_norm_sq(&v)).sqrt();
        let a = flux_inner(&pu, &v).unwrap();
        let b = flux_inner(&u, &project_propagating(&v)).unwrap();
        prop_assert!(close(a, b, scale));
        prop_assert!(close(flux(&pu).value, flux(&u).value, w_norm_sq(&u)));
    }

    #[test]
    fn time_reversal_is_an_isometric_involution(s in any::<u64>()) {
        let u = field(s, Orientation::Down);
        let t = time_reverse(&u);
        prop_assert_eq!(t.orientation(), Orientation::Up);
        prop_assert!(close(flux(&t).value, flux(&u).value, flux(&u).value));
        let tt = time_reverse(&t);
        prop_assert_eq!(tt.orientation(), Orientation::Down);
        let d = tt.sub(&u).unwrap();
        prop_assert!(w_norm_sq(&d) <= 1e-24 * w_norm_sq(&u));
    }

    #[test]
    fn flux_pairing_obeys_cauchy_schwarz_and_triangle(s1 in any::<u64>(), s2 in any::<u64>(), a in -3.0f64..3.0) {
        let (u, v) = (field(s1, Orientation::Down), field(s2, Orientation::Down));
        let (fu, fv) = (flux(&u).value, flux(&v).value);
        let c = flux_inner(&u, &v).unwrap();
        prop_assert!(c * c <= fu * fv * (1.0 + 1e-12));
        let w = u.combine(1.0, &v, a).unwrap();
        prop_assert!(flux(&w).value.sqrt() <= fu.sqrt() + a.abs() * fv.sqrt() + 1e-12 * (fu + fv).sqrt());
    }

    #[test]
    fn flux_is_quadratic(s in any::<u64>(), c in -10.0f64..10.0) {
        let u = field(s, Orientation::Down);
        let fu = flux(&u).value;
        prop_assert!(close(flux(&u.scaled(c)).value, c * c * fu, c * c * fu));
    }

    #[test]
    fn reflection_is_bounded_by_one(p in profile(), k in 0.05f64..10.0, r in 0.0f64..0.999, th in 0.0f64..6.3) {
        let rc = reflection_coefficient(&p, k, [r * th.cos(), r * th.sin()]).unwrap();
        prop_assert!(rc.norm() <= 1.0 + 1e-12, "|R| = {}", rc.norm());
    }

    #[test]
    fn vertical_slowness_branches(k in prop_oneof![-5.0f64..-0.01, 0.01f64..5.0], r in 0.0f64..3.0, th in 0.0f64..6.3) {
        prop_assume!((r - 1.0).abs() > 1e-6);
        let e = [r * th.cos(), r * th.sin()];
        let a = eta3(k, e).unwrap();
        let b = eta3(-k, e).unwrap();
        prop_assert!((a.conj() - b).norm() < 1e-14);
        prop_assert!((a * a - (1.0 - r * r)).norm() < 1e-12);
        if r < 1.0 {
            prop_assert!(a.re > 0.0 && a.im == 0.0);
        } else {
            prop_assert!(a.re == 0.0 && a.im * k > 0.0);
        }
    }

    #[test]
    fn concentration_integral_decreases_in_n(n in 0.0f64..1e4, dn in 1.0f64..1e3, p in 1.0f64..4.0) {
        let a = lemma1_integral(n, p, 1.0, 1.0).unwrap();
        let b = lemma1_integral(n + dn, p, 1.0, 1.0).unwrap();
        prop_assert!(b < a && b > 0.0);
    }
}
