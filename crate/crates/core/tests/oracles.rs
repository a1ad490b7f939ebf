//! Independent numerical oracles for the spectral, stability and dynamics layers.

use nalgebra::{Complex, DMatrix, DVector};
use opdyn::dynamics::{field_jacobian, integrate, vector_field, IntegrateOptions, ScenarioSpec};
use opdyn::equilibria::{block_decompose, boundary_equilibrium, IndexPartition};
use opdyn::fixtures;
use opdyn::linalg;
use opdyn::signed_graph::is_irreducible;
use opdyn::spectral::{self, spectrum};
use opdyn::stability::{check_gamma, h_gamma};
use opdyn::tolerances;
use opdyn::SignedMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> SignedMatrix {
    SignedMatrix::new(DMatrix::from_fn(n, n, |_, _| rng.random_range(lo..hi))).unwrap()
}

/// Roots of `λ³ + aλ² + bλ + c` in closed form.
fn cubic_roots(a: f64, b: f64, c: f64) -> Vec<Complex<f64>> {
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc > 0.0 {
        let s = disc.sqrt();
        let u = (-q / 2.0 + s).cbrt();
        let v = (-q / 2.0 - s).cbrt();
        let re = -(u + v) / 2.0 + shift;
        let im = (u - v) * 3f64.sqrt() / 2.0;
        vec![
            Complex::new(u + v + shift, 0.0),
            Complex::new(re, im),
            Complex::new(re, -im),
        ]
    } else {
        let r = (-p / 3.0).max(0.0).sqrt();
        let arg = if r == 0.0 {
            0.0
        } else {
            (3.0 * q / (2.0 * p * r)).clamp(-1.0, 1.0)
        };
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| {
                let t = 2.0 * r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
                Complex::new(t + shift, 0.0)
            })
            .collect()
    }
}

fn sort_complex(v: &mut [Complex<f64>]) {
    v.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap()
            .then(x.im.partial_cmp(&y.im).unwrap())
    });
}

#[test]
fn spectrum_matches_closed_form_cubic() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let m = random_matrix(&mut rng, 3, -1.0, 1.0);
        let e = m.entries();
        let tr = e.trace();
        let minors = e[(0, 0)] * e[(1, 1)] - e[(0, 1)] * e[(1, 0)] + e[(0, 0)] * e[(2, 2)]
            - e[(0, 2)] * e[(2, 0)]
            + e[(1, 1)] * e[(2, 2)]
            - e[(1, 2)] * e[(2, 1)];
        let det = e.determinant();
        let mut oracle = cubic_roots(-tr, minors, -det);
        let mut got = spectrum(&m).unwrap();
        sort_complex(&mut oracle);
        sort_complex(&mut got);
        for (a, b) in oracle.iter().zip(&got) {
            // repeated roots are ill-conditioned; keep the tolerance for well-separated ones
            assert!(
                (a - b).norm() < 1e-9 || disc_small(&oracle),
                "{oracle:?} vs {got:?}"
            );
        }
    }
}

fn disc_small(r: &[Complex<f64>]) -> bool {
    let mut gap = f64::INFINITY;
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            gap = gap.min((r[i] - r[j]).norm());
        }
    }
    gap < 1e-4
}

/// Positive eigenvector by shifted inverse iteration.
fn inverse_iteration(a: &DMatrix<f64>, mu: f64, start: DVector<f64>) -> DVector<f64> {
    let n = a.nrows();
    let lu = (a - DMatrix::identity(n, n) * mu).lu();
    let mut v = start;
    for _ in 0..200 {
        v = lu.solve(&v).unwrap();
        v /= v.norm();
    }
    linalg::inf_normalize(&v)
}

#[test]
fn perron_vector_is_unique_up_to_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut mats = vec![
        fixtures::example2_system().shift.unwrap().c,
        fixtures::karate_signed(),
    ];
    while mats.len() < 12 {
        let m = random_matrix(&mut rng, 4, -0.3, 1.0);
        if spectral::is_eventually_positive(&m, tolerances::PERRON_POSITIVE)
            .unwrap()
            .eventually_positive
        {
            mats.push(m);
        }
    }
    for m in mats {
        let cert = spectral::is_eventually_positive(&m, tolerances::PERRON_POSITIVE).unwrap();
        assert!(cert.eventually_positive);
        let n = m.n();
        for _ in 0..20 {
            let start = DVector::from_fn(n, |_, _| rng.random_range(0.1..1.0));
            let v = inverse_iteration(m.entries(), cert.rho * (1.0 + 1e-3), start);
            let err = v
                .iter()
                .zip(&cert.v_right)
                .fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
            assert!(err < 1e-8, "inverse iteration differs by {err:e}");
        }
    }
}

#[test]
fn eventual_positivity_is_transpose_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for k in 0..200 {
        let lo = if k % 2 == 0 { -0.35 } else { -1.0 };
        let m = random_matrix(&mut rng, 4, lo, 1.0);
        if spectral::dominance_gap(&m).unwrap() < 1e-6 {
            continue;
        }
        let a = spectral::is_eventually_positive(&m, tolerances::PERRON_POSITIVE).unwrap();
        let b =
            spectral::is_eventually_positive(&m.transpose(), tolerances::PERRON_POSITIVE).unwrap();
        assert_eq!(a.eventually_positive, b.eventually_positive);
    }
}

#[test]
fn critical_systems_have_a_simple_zero_mode() {
    for sys in [fixtures::example2_system(), fixtures::karate_system()] {
        assert!(sys.regime.is_critical());
        let r = sys.e.mul_vec(sys.v_r());
        assert!(linalg::inf_norm(&r) <= 1e-8);
        let eigs = spectrum(&sys.e).unwrap();
        let zeros = eigs.iter().filter(|z| z.norm() < 1e-8).count();
        assert_eq!(zeros, 1);
        assert!(eigs.iter().filter(|z| z.norm() >= 1e-8).all(|z| z.re < 0.0));
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let sys = fixtures::example2_system();
    for s in [
        ScenarioSpec::positives(),
        ScenarioSpec::neutrals(),
        ScenarioSpec::extremists(),
    ] {
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-0.99..0.99)).collect();
            let j = field_jacobian(&sys, &s, &x).unwrap();
            let h = 1e-6;
            for c in 0..3 {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[c] += h;
                xm[c] -= h;
                let fp = vector_field(&sys, &s, &xp).unwrap();
                let fm = vector_field(&sys, &s, &xm).unwrap();
                for r in 0..3 {
                    let fd = (fp[r] - fm[r]) / (2.0 * h);
                    assert!((fd - j[(r, c)]).abs() < 1e-5, "{:?} ({r},{c})", s.kind);
                }
            }
        }
    }
}

fn reachable_closure(support: &[Vec<bool>]) -> bool {
    let n = support.len();
    let mut reach = support.to_vec();
    for i in 0..n {
        reach[i][i] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    reach.iter().all(|r| r.iter().all(|&b| b))
}

fn pattern_matrix(support: &[Vec<bool>], rng: &mut ChaCha8Rng) -> SignedMatrix {
    let n = support.len();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if support[i][j] {
            let v: f64 = rng.random_range(0.1..1.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        } else {
            0.0
        }
    });
    SignedMatrix::adjacency(m).unwrap()
}

#[test]
fn irreducibility_matches_transitive_closure() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for n in 1..=4usize {
        let slots: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        for mask in 0u32..(1 << slots.len()) {
            let mut support = vec![vec![false; n]; n];
            for (b, &(i, j)) in slots.iter().enumerate() {
                support[i][j] = mask >> b & 1 == 1;
            }
            let m = pattern_matrix(&support, &mut rng);
            assert_eq!(
                is_irreducible(&m),
                reachable_closure(&support),
                "n = {n}, mask = {mask:b}"
            );
        }
    }
    for _ in 0..200 {
        let n = rng.random_range(2..=8usize);
        let p = rng.random_range(0.1..0.6);
        let support: Vec<Vec<bool>> = (0..n)
            .map(|i| (0..n).map(|j| i != j && rng.random_bool(p)).collect())
            .collect();
        let m = pattern_matrix(&support, &mut rng);
        assert_eq!(is_irreducible(&m), reachable_closure(&support));
    }
}

#[test]
fn face_blocks_are_nonsingular_on_example2() {
    let sys = fixtures::example2_system();
    for mask in 1u32..7 {
        let zero: Vec<usize> = (0..3).filter(|i| mask >> i & 1 == 1).collect();
        let blocks = block_decompose(&sys.e, &IndexPartition::from_zero_set(3, &zero));
        let smin = *linalg::singular_values(&blocks.e22_matrix())
            .last()
            .unwrap();
        assert!(smin > 1e-9, "zero set {zero:?}: s_min = {smin:e}");
        let eq = boundary_equilibrium(&blocks, &vec![1.0; zero.len()]).unwrap();
        assert!(eq.y2_star.is_some());
    }
}

fn null_space_residuals(e: &SignedMatrix, gamma: &[f64]) -> (usize, usize, f64) {
    let h = h_gamma(e, gamma);
    let em = e.entries().clone();
    let rel = tolerances::RANK_REL;
    let ne = linalg::null_space(&em, rel);
    let nh = linalg::null_space(&h, rel);
    let r1 = ne.iter().fold(0.0f64, |m, v| m.max((&h * v).amax()));
    let r2 = nh.iter().fold(0.0f64, |m, v| m.max((&em * v).amax()));
    (ne.len(), nh.len(), r1.max(r2))
}

#[test]
fn searched_certificates_share_the_null_space_of_e() {
    let mut certified = Vec::new();
    for sys in [fixtures::example2_system(), fixtures::karate_system()] {
        certified.push((
            sys.e.clone(),
            opdyn::stability::search_gamma(&sys.e, tolerances::GAMMA_BUDGET, tolerances::NSD_REL)
                .unwrap(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut tries = 0;
    while certified.len() < 8 && tries < 500 {
        tries += 1;
        let b = DMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                0.0
            } else {
                rng.random_range(-0.3..1.0)
            }
        });
        let b = SignedMatrix::adjacency(b).unwrap();
        let Ok(sys) = spectral::build_system_a1_critical(&b) else {
            continue;
        };
        // eventual positivity alone does not guarantee a certificate
        if let Some(c) =
            opdyn::stability::search_gamma(&sys.e, tolerances::GAMMA_BUDGET, tolerances::NSD_REL)
        {
            certified.push((sys.e, c));
        }
    }
    assert_eq!(certified.len(), 8);
    for (e, cert) in certified {
        let (de, dh, r) = null_space_residuals(&e, &cert.gamma);
        assert_eq!(de, dh);
        assert!(r <= 1e-8, "cross-projection residual {r:e}");
    }
}

#[test]
fn reference_gamma_shares_the_null_space_of_e() {
    let sys = fixtures::example2_system();
    let cert = check_gamma(&sys.e, &fixtures::EXAMPLE2_GAMMA, tolerances::NSD_REL).unwrap();
    assert!(cert.valid);
    let (de, dh, r) = null_space_residuals(&sys.e, &cert.gamma);
    assert_eq!(de, dh);
    // the reference entries carry five significant digits
    assert!(
        r <= 1e-8,
        "cross-projection residual {r:e} for a valid certificate"
    );
}

#[test]
fn halving_the_step_is_stable() {
    let sys = fixtures::example2_system();
    let cases = [
        (ScenarioSpec::extremists(), vec![0.3, -0.2, 0.5]),
        (ScenarioSpec::extremists(), vec![0.1, 0.1, 1.0]),
        (ScenarioSpec::extremists(), vec![0.1, 0.1, -1.0]),
        (ScenarioSpec::positives(), vec![0.2, -0.4, 0.1]),
    ];
    for (s, x0) in cases {
        let coarse = IntegrateOptions {
            t_max: 50.0,
            convergence_tol: 0.0,
            ..IntegrateOptions::default()
        };
        let fine = IntegrateOptions {
            step: coarse.step / 2.0,
            ..coarse.clone()
        };
        let a = integrate(&sys, &s, &x0, &coarse).unwrap();
        let b = integrate(&sys, &s, &x0, &fine).unwrap();
        let d = a
            .final_state()
            .iter()
            .zip(b.final_state())
            .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        assert!(d <= 1e-6, "{:?} from {x0:?}: {d:e}", s.kind);
    }
}
