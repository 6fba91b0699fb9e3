use num_complex::Complex64;
use proptest::prelude::*;

use wavekin_core::census::{count_exact, count_window, WindowQuery};
use wavekin_core::ensemble::run_ensemble;
use wavekin_core::evolver::{conserved, evolve, EvolveConfig};
use wavekin_core::fields::{NoiseLaw, SpectrumFamily, WaveField};
use wavekin_core::kinetic::{collision, KineticGrid};
use wavekin_core::lattice::{resonance, BoxSpec, ModeSet, WaveVector};

fn vector(d: usize) -> impl Strategy<Value = WaveVector> {
    prop::collection::vec(-30i32..=30, d).prop_map(|m| WaveVector::new(&m))
}

fn box_spec() -> impl Strategy<Value = BoxSpec> {
    (1usize..=3, prop::collection::vec(0.2f64..3.0, 3), 2.0f64..20.0)
        .prop_map(|(d, beta, l)| BoxSpec::new(d, l, beta[..d].to_vec(), 1.0, 0.5).unwrap())
}

proptest! {
    #[test]
    fn factored_resonance_matches_frequencies(spec in box_spec(), seed in vector(3), a in vector(3), b in vector(3)) {
        let d = spec.d;
        let trim = |v: WaveVector| WaveVector::new(v.components(d));
        let (k, k1, k3) = (trim(seed), trim(seed + a), trim(seed + b));
        let k2 = k1 + k3 - k;
        let direct = spec.omega(k1) - spec.omega(k2) + spec.omega(k3) - spec.omega(k);
        let scale = [k, k1, k2, k3].iter().map(|&v| spec.omega(v)).sum::<f64>().max(1e-300);
        let f = resonance(&spec, k1, k2, k3, k, true).unwrap();
        prop_assert!((f - direct).abs() <= 1e-12 * scale);
        // swapping the two incoming modes and reflecting everything leave Ω unchanged
        prop_assert!((resonance(&spec, k3, k2, k1, k, true).unwrap() - f).abs() <= 1e-12 * scale);
        prop_assert!((resonance(&spec, -k1, -k2, -k3, -k, true).unwrap() - f).abs() <= 1e-12 * scale);
    }

    #[test]
    fn strict_mode_rejects_momentum_violation(spec in box_spec(), k in vector(3)) {
        let k = WaveVector::new(k.components(spec.d));
        let mut e = [0i32; 3];
        e[0] = 1;
        prop_assert!(resonance(&spec, k, k, k + WaveVector(e), k, true).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn window_count_is_monotone(l in 2.0f64..6.0, b2 in 0.5f64..2.0, d1 in 0.0f64..1.0, d2 in 0.0f64..1.0) {
        let spec = BoxSpec::new(2, l, vec![1.0, b2], 1.0, 0.5).unwrap();
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let q = |delta: f64, spec: &BoxSpec| count_window(&WindowQuery { spec: spec.clone(), k: WaveVector::ZERO, delta }).unwrap();
        prop_assert!(q(lo, &spec) <= q(hi, &spec));
        let wider = BoxSpec { cutoff: 1.3, ..spec.clone() };
        prop_assert!(q(lo, &spec) <= q(lo, &wider));
        let modes = ModeSet::build(&spec).unwrap().len() as u64;
        prop_assert!(count_exact(&spec, WaveVector::ZERO).unwrap() >= 2 * modes - 1);
    }

    #[test]
    fn square_counts_respect_lattice_symmetry(l in 3.0f64..7.0, mx in -2i32..=2, my in -2i32..=2) {
        let spec = BoxSpec::square(2, l, 1.0, 0.5).unwrap();
        let count = |k: WaveVector| count_exact(&spec, k).unwrap();
        let base = count(WaveVector::new(&[mx, my]));
        prop_assert_eq!(base, count(WaveVector::new(&[my, mx])));
        prop_assert_eq!(base, count(WaveVector::new(&[-mx, my])));
        prop_assert_eq!(base, count(WaveVector::new(&[mx, -my])));
        let exact_window = count_window(&WindowQuery { spec: spec.clone(), k: WaveVector::new(&[mx, my]), delta: 0.0 }).unwrap();
        prop_assert_eq!(base, exact_window);
    }

    #[test]
    fn collision_conserves_mass_and_energy(values in prop::collection::vec(0.0f64..3.0, 49)) {
        let grid = KineticGrid::new(2, 0.25, vec![1.0, 1.3], 1.0).unwrap();
        prop_assume!(grid.len() == values.len());
        let k = collision(&grid, &values, &grid.default_broadening()).unwrap();
        let abs: f64 = k.iter().map(|x| x.abs()).sum();
        let mass: f64 = k.iter().sum();
        let energy: f64 = k.iter().enumerate().map(|(i, x)| grid.omega(i) * x).sum();
        let eabs: f64 = k.iter().enumerate().map(|(i, x)| (grid.omega(i) * x).abs()).sum();
        prop_assert!(mass.abs() <= 1e-12 * abs.max(1e-300));
        prop_assert!(energy.abs() <= 1e-12 * eabs.max(1e-300));
    }

    #[test]
    fn evolution_conserves_mass(re in prop::collection::vec(-1.0f64..1.0, 13), im in prop::collection::vec(-1.0f64..1.0, 13)) {
        let spec = BoxSpec::square(2, 2.0, 1.0, 0.0).unwrap();
        let modes = ModeSet::build(&spec).unwrap();
        prop_assume!(modes.len() == re.len());
        let amplitudes = re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let field = WaveField { spec: spec.clone(), amplitudes, t: 0.0 };
        let (m0, _) = conserved(&spec, &field).unwrap();
        let out = evolve(&spec, &field, &EvolveConfig::new(0.01, 1.0)).unwrap();
        let (m1, _) = conserved(&spec, out.last().unwrap()).unwrap();
        prop_assert!((m1 - m0).abs() <= 1e-12 * m0);
    }
}

#[test]
fn ensemble_is_independent_of_thread_count() {
    let spec = BoxSpec::square(2, 3.0, 1.0, 0.5).unwrap();
    let f = SpectrumFamily::gaussian(1.0, 0.6);
    let cfg = EvolveConfig::new(0.05, 0.5).with_snapshots(vec![0.25, 0.5]);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_ensemble(&spec, &f, NoiseLaw::UniformPhase, &cfg, 37, 11).unwrap())
    };
    assert_eq!(run(1), run(3));
}
