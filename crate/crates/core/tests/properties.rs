use num_complex::Complex64;
use proptest::prelude::*;

use chanmix::channelcore::{DecoherenceFunction, MixtureSpec};
use chanmix::dynamics::{mixture_eigenvalues, rates_at, spectrum_at, TimeGrid};
use chanmix::exprcalc::parse;
use chanmix::matrixlab::{
    apply_channel, apply_to_operator, choi, hermitian_eigen, psd_check, ComplexMatrix, DensityMatrix,
};
use chanmix::mubgen::weyl_set;

fn hermitian(n: usize, entries: &[f64]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n);
    let mut it = entries.iter().copied().cycle();
    for i in 0..n {
        m[(i, i)] = Complex64::new(it.next().unwrap(), 0.0);
        for j in i + 1..n {
            let z = Complex64::new(it.next().unwrap(), it.next().unwrap());
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Number of eigenvalues below `sigma`, from the pivots of an LDLᴴ
/// factorization of `m − σ𝟙` (Sylvester inertia).
#[allow(clippy::needless_range_loop)]
fn count_below(m: &ComplexMatrix, sigma: f64) -> usize {
    let n = m.dim();
    let mut a: Vec<Vec<Complex64>> = (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)] - if i == j { sigma } else { 0.0 }).collect())
        .collect();
    let mut neg = 0;
    for k in 0..n {
        let mut piv = a[k][k].re;
        if piv == 0.0 {
            piv = -1e-300;
        }
        if piv < 0.0 {
            neg += 1;
        }
        for i in k + 1..n {
            let f = a[i][k] / piv;
            for j in k + 1..n {
                let v = a[k][j];
                a[i][j] -= f * v;
            }
        }
    }
    neg
}

fn min_eigenvalue_oracle(m: &ComplexMatrix) -> f64 {
    let r = m.frobenius_norm() + 1.0;
    let (mut lo, mut hi) = (-r, r);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(m, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn decoherence() -> impl Strategy<Value = DecoherenceFunction> {
    prop_oneof![
        (0.05f64..1.0, 0.2f64..3.0).prop_map(|(s, c)| DecoherenceFunction::exp_relax(s, c)),
        (0.05f64..1.0, 0.3f64..3.0)
            .prop_map(|(s, w)| DecoherenceFunction::expression(&format!("{s}*sin({w}*t)^2")).unwrap()),
        (0.05f64..1.0, 0.2f64..3.0)
            .prop_map(|(s, k)| DecoherenceFunction::expression(&format!("{s}*t^2/({k}+t^2)")).unwrap()),
    ]
}

fn mixture(d: usize) -> impl Strategy<Value = MixtureSpec> {
    prop::collection::vec((0.01f64..1.0, 1..=d + 1, decoherence()), 1..=d + 2).prop_map(move |parts| {
        let total: f64 = parts.iter().map(|p| p.0).sum();
        MixtureSpec::new(d, parts.into_iter().map(|(w, b, p)| (w / total, b, p)))
    })
}

fn rk4_reconstruct(spec: &MixtureSpec, t_end: f64, steps: usize) -> Vec<f64> {
    let d = spec.dimension as f64;
    // Γ_β rebuilt from the rates: d/(d−1) Σ_{α≠β} γ_α
    let big_gamma = |t: f64| -> Vec<f64> {
        let g = rates_at(spec, t).unwrap();
        let total: f64 = g.iter().sum();
        g.iter().map(|ga| d / (d - 1.0) * (total - ga)).collect()
    };
    let h = t_end / steps as f64;
    let mut lam = vec![1.0; spec.dimension + 1];
    for s in 0..steps {
        let t = s as f64 * h;
        let f = |t: f64, l: &[f64]| -> Vec<f64> {
            big_gamma(t).iter().zip(l).map(|(g, x)| -g * x).collect()
        };
        let k1 = f(t, &lam);
        let y2: Vec<f64> = lam.iter().zip(&k1).map(|(y, k)| y + 0.5 * h * k).collect();
        let k2 = f(t + 0.5 * h, &y2);
        let y3: Vec<f64> = lam.iter().zip(&k2).map(|(y, k)| y + 0.5 * h * k).collect();
        let k3 = f(t + 0.5 * h, &y3);
        let y4: Vec<f64> = lam.iter().zip(&k3).map(|(y, k)| y + h * k).collect();
        let k4 = f(t + h, &y4);
        for i in 0..lam.len() {
            lam[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    lam
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobi_trace_and_residuals(n in 1usize..10, entries in prop::collection::vec(-2.0f64..2.0, 100)) {
        let m = hermitian(n, &entries);
        let e = hermitian_eigen(&m);
        let sum: f64 = e.values.iter().sum();
        prop_assert!((sum - m.trace().re).abs() <= 1e-11);
        for k in 0..n {
            let v: Vec<Complex64> = (0..n).map(|i| e.vectors[(i, k)]).collect();
            let mv = m.mul_vec(&v);
            let res: f64 = mv.iter().zip(&v).map(|(a, b)| (a - b * e.values[k]).norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(res <= 1e-10, "residual {res}");
        }
    }

    #[test]
    fn jacobi_matches_inertia_oracle(entries in prop::collection::vec(-2.0f64..2.0, 81)) {
        let m = hermitian(9, &entries);
        let min = hermitian_eigen(&m).values[0];
        prop_assert!((min - min_eigenvalue_oracle(&m)).abs() <= 1e-10);
    }

    #[test]
    fn parser_never_panics(s in "[-+*/^()t0-9. a-z]{0,24}") {
        if let Ok(e) = parse(&s) {
            let _ = e.eval_dual(0.7);
        }
    }

    #[test]
    fn display_round_trips(s in "[t0-9]([-+*/^][t0-9(]){0,6}") {
        if let Ok(e) = parse(&s) {
            let again = parse(&e.to_string()).unwrap();
            prop_assert_eq!(again, e);
        }
    }

    #[test]
    fn apply_preserves_trace_and_hermiticity(
        spec in prop_oneof![mixture(2), mixture(3)],
        t in 0.0f64..4.0,
        entries in prop::collection::vec(-1.0f64..1.0, 20),
    ) {
        let d = spec.dimension;
        let w = weyl_set(d).unwrap();
        let x = hermitian(d, &entries);
        let y = apply_to_operator(&w, &spec, t, &x).unwrap();
        prop_assert!((y.trace() - x.trace()).norm() <= 1e-12);
        prop_assert!(y.hermiticity_defect() <= 1e-12);
    }

    #[test]
    fn cptp_when_probabilities_in_range(spec in prop_oneof![mixture(2), mixture(3)], t in 0.0f64..4.0) {
        let w = weyl_set(spec.dimension).unwrap();
        let c = choi(&w, &spec, t).unwrap();
        prop_assert!(c.matrix().hermiticity_defect() <= 1e-12);
        prop_assert!(psd_check(c.matrix(), 1e-10).unwrap().psd);
        prop_assert!(c.trace_preservation_defect() <= 1e-10);
    }

    #[test]
    fn identity_at_origin(spec in prop_oneof![mixture(2), mixture(3), mixture(5)]) {
        let lams = spectrum_at(&spec, 0.0).unwrap();
        prop_assert!(lams.iter().all(|l| (l.value - 1.0).abs() <= 1e-9));
    }

    #[test]
    fn rk4_reconstructs_spectrum(spec in prop_oneof![mixture(2), mixture(3)]) {
        let t_end = 0.8;
        let exact = spectrum_at(&spec, t_end).unwrap();
        let g = TimeGrid::uniform(t_end, 33).unwrap();
        let traj = mixture_eigenvalues(&spec, &g).unwrap();
        prop_assume!((0..g.len()).all(|k| traj.at(k).iter().all(|l| l.value > 0.05)));
        let rebuilt = rk4_reconstruct(&spec, t_end, 400);
        for (r, e) in rebuilt.iter().zip(&exact) {
            prop_assert!((r - e.value).abs() <= 1e-6, "{r} vs {}", e.value);
        }
    }
}

#[test]
fn example_one_fully_dephases() {
    let w = weyl_set(2).unwrap();
    let spec = MixtureSpec::new(2, (1..=3).map(|b| (1.0 / 3.0, b, DecoherenceFunction::exp_relax(0.75, 1.0))));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi = [Complex64::new(s, 0.0), Complex64::new(0.5, 0.5)];
    let rho = DensityMatrix::pure(&psi).unwrap();
    let out = apply_channel(&w, &spec, 20.0, &rho).unwrap();
    assert!(out.is_state);
    let half = ComplexMatrix::identity(2).scale_real(0.5);
    assert!((&out.matrix - &half).max_abs() < 1e-6);
}

#[test]
fn jacobi_oracle_on_known_matrix() {
    let m = ComplexMatrix::diagonal(&[3.0, -1.25, 0.5].map(|v| Complex64::new(v, 0.0)));
    assert!((min_eigenvalue_oracle(&m) + 1.25).abs() < 1e-12);
}
