use proptest::prelude::*;
use trapwalk_core::field::sample_field;
use trapwalk_core::{ModelParams, PotentialSpec, Trap, TrapField, Window};

fn params(d: usize) -> ModelParams {
    ModelParams::new(d, d as f64 + 0.2, 0.2, 0.5).unwrap()
}

// Dyadic coordinates keep every squared distance exact, so transformed
// fields must agree to the last bit.
fn dyadic(k: i32) -> f64 {
    k as f64 / 8.0
}

fn arb_traps(d: usize, n: usize) -> impl Strategy<Value = Vec<(Vec<i32>, u32)>> {
    prop::collection::vec((prop::collection::vec(-160i32..160, d), 8u32..200), 0..n)
}

fn build(d: usize, raw: &[(Vec<i32>, u32)], shift: &[i32], perm: &[usize], flip: &[bool]) -> TrapField {
    let map = |c: &[i32]| -> Vec<f64> {
        (0..d)
            .map(|j| {
                let src = c[perm[j]];
                let v = if flip[j] { -src } else { src };
                dyadic(v + 8 * shift[j])
            })
            .collect()
    };
    let lo: Vec<f64> = (0..d).map(|j| dyadic(-160 + 8 * shift[j])).collect();
    let hi: Vec<f64> = (0..d).map(|j| dyadic(160 + 8 * shift[j])).collect();
    let window = Window::new(lo, hi).unwrap();
    let traps = raw
        .iter()
        .map(|(c, r)| Trap::new(map(c), dyadic(*r as i32)))
        .filter(|t| window.meets_ball(&t.center, t.radius))
        .collect();
    TrapField::from_traps(params(d), window, 32.0, 0, traps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_matches_scan_bitwise(seed in any::<u64>(), d in 1usize..4, pts in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 50)) {
        let w = Window::centered(d, 12.0).unwrap();
        let p = params(d);
        let f = sample_field(p, w, 64.0, seed).unwrap();
        let m = PotentialSpec::modified(&p, 16.0, 0.8).unwrap();
        for x in &pts {
            let x: Vec<f64> = x[..d].iter().map(|v| v * 12.0).collect();
            prop_assert_eq!(f.potential(&PotentialSpec::Raw, &x).unwrap().to_bits(), f.potential_scan(&PotentialSpec::Raw, &x).unwrap().to_bits());
            prop_assert_eq!(f.potential(&m, &x).unwrap().to_bits(), f.potential_scan(&m, &x).unwrap().to_bits());
            prop_assert_eq!(f.overlap_count(&x).unwrap(), f.overlap_count_scan(&x).unwrap());
        }
    }

    #[test]
    fn modified_is_dominated(seed in any::<u64>(), xs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 50), xi in 0.51f64..0.99) {
        let p = params(2);
        let f = sample_field(p, Window::centered(2, 20.0).unwrap(), 128.0, seed).unwrap();
        let m = PotentialSpec::modified(&p, 32.0, xi).unwrap();
        let ceiling = m.ceiling().unwrap();
        let series = 32f64.ln() / (1.0 - 2f64.powf(-p.gamma));
        prop_assert!(ceiling <= series);
        for (a, b) in xs {
            let x = [a * 20.0, b * 20.0];
            let raw = f.potential(&PotentialSpec::Raw, &x).unwrap();
            let v = f.potential(&m, &x).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert!(v <= raw);
            prop_assert!(v <= ceiling);
        }
    }

    #[test]
    fn euclidean_invariance(
        d in 1usize..4,
        raw in arb_traps(3, 40),
        shift in prop::collection::vec(-50i32..50, 3),
        perm_seed in 0usize..6,
        flip in prop::collection::vec(any::<bool>(), 3),
        q in prop::collection::vec(prop::collection::vec(-160i32..160, 3), 20),
    ) {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let perm: Vec<usize> = perms[if d == 3 { perm_seed } else if d == 2 { perm_seed % 2 * 2 } else { 0 }]
            .iter().copied().filter(|&j| j < d).collect();
        let raw: Vec<(Vec<i32>, u32)> = raw.into_iter().map(|(c, r)| (c[..d].to_vec(), r)).collect();
        let ident: Vec<usize> = (0..d).collect();
        let base = build(d, &raw, &vec![0; d], &ident, &vec![false; d]);
        let moved = build(d, &raw, &shift[..d], &perm, &flip[..d]);
        prop_assume!(base.len() == moved.len());
        for c in &q {
            let x: Vec<f64> = c[..d].iter().map(|&k| dyadic(k)).collect();
            let y: Vec<f64> = (0..d).map(|j| {
                let src = c[perm[j]];
                dyadic(if flip[j] { -src } else { src } + 8 * shift[j])
            }).collect();
            prop_assert_eq!(
                base.potential(&PotentialSpec::Raw, &x).unwrap().to_bits(),
                moved.potential(&PotentialSpec::Raw, &y).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn adding_a_trap_never_lowers_the_potential(seed in any::<u64>(), c in (-8.0f64..8.0, -8.0f64..8.0), r in 1.0f64..20.0, xs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 30)) {
        let p = params(2);
        let f = sample_field(p, Window::centered(2, 8.0).unwrap(), 32.0, seed).unwrap();
        let g = f.with_trap(Trap::new(vec![c.0, c.1], r)).unwrap();
        let m = PotentialSpec::modified(&p, 16.0, 0.9).unwrap();
        for (a, b) in xs {
            let x = [a * 8.0, b * 8.0];
            prop_assert!(g.potential(&PotentialSpec::Raw, &x).unwrap() >= f.potential(&PotentialSpec::Raw, &x).unwrap());
            prop_assert!(g.potential(&m, &x).unwrap() >= f.potential(&m, &x).unwrap());
        }
    }
}

#[test]
fn empty_field_has_no_overlap() {
    let f = TrapField::empty(params(2), Window::centered(2, 4.0).unwrap()).unwrap();
    assert_eq!(f.overlap_count(&[0.0, 0.0]).unwrap(), 0);
    assert_eq!(f.potential(&PotentialSpec::Raw, &[1.0, -1.0]).unwrap(), 0.0);
}
