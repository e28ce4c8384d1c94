//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned here.
//! Runs without the libtest harness so the report is always printed.

use std::f64::consts::PI;
use std::time::Instant;

use layered_fronts::front::is_convex;
use layered_fronts::homog::HomogeneousModel;
use layered_fronts::medium::{
    BoundingBox, CompositeMedium, InitialSupport, LayerCoefficients, LocalMedium, RegimeBeta, SimplexWeights,
    ValidatedMedium, validate_medium,
};
use layered_fronts::numeric::maximize_concave;
use layered_fronts::oracles::{
    KppProfile, McConfig, PdeConfig, epsilon_convergence_table, kpp_pde_solve, linear_pde_solve, mc_feynman_kac,
    mc_occupation,
};
use layered_fronts::rates::occupation_rate;
use layered_fronts::spectral::{PotentialPair, invariant_proportions, principal_eigenvalue, principal_eigenvalue_oracle};
use layered_fronts::xdep::{
    DpConfig, XdepEngine, inclusion_jump_time, jump_bounds, jump_demo, jump_medium,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONSTANT_POTENTIAL_TOL: f64 = 1e-10;
const ORACLE_TOL: f64 = 1e-5;
const ORACLE_POINTS: usize = 2048;
const GRADIENT_TOL: f64 = 1e-5;
const S_ZERO_TOL: f64 = 1e-8;
const S_CORNER_TOL: f64 = 1e-6;
const S_CONVEXITY_TOL: f64 = 1e-8;
const LEGENDRE_TOL: f64 = 1e-6;
const HOMOGENEITY_TOL: f64 = 1e-10;
const SUPERADDITIVITY_TOL: f64 = 1e-8;
const NORM_TOL: f64 = 1e-8;
const TRIANGLE_TOL: f64 = 1e-8;
const JUMP_DELTA: f64 = 1e-3;
const JUMP_TOL: f64 = 5e-3;
const INCLUSION_TOL: f64 = 1e-12;
const XDEP_TOL: f64 = 1e-4;
const REFINEMENT_DROP: f64 = 1e-6;
const GAP_AT_SMALLEST: f64 = 0.15;
const Y_VARIATION_TOL: f64 = 2e-2;
const MC_SIGMAS: f64 = 3.0;

struct Check {
    ok: bool,
    details: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Self {
            ok: true,
            details: Vec::new(),
        }
    }

    fn expect(&mut self, ok: bool, what: String) {
        self.ok &= ok;
        self.details.push(format!("{} {what}", if ok { "ok  " } else { "FAIL" }));
    }
}

fn layer(alpha: f64, c: f64) -> LayerCoefficients {
    LayerCoefficients::isotropic(1, 1.0, alpha, c)
}

fn local(m: f64, a1: f64, a2: f64) -> LocalMedium {
    LocalMedium::new(m, layer(a1, 0.0), layer(a2, 0.0))
}

fn layered_1d() -> ValidatedMedium {
    validate_medium(&CompositeMedium::homogeneous(
        0.4,
        LayerCoefficients::isotropic(1, 1.0, 1.0, 0.5),
        LayerCoefficients::isotropic(1, 2.0, 3.0, 1.2),
    ))
    .unwrap()
}

fn layered_2d() -> ValidatedMedium {
    validate_medium(&CompositeMedium::homogeneous(
        0.4,
        LayerCoefficients::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.6]), 1.0, 0.5),
        LayerCoefficients::new(DMatrix::from_row_slice(2, 2, &[2.0, -0.4, -0.4, 1.0]), 3.0, 1.2),
    ))
    .unwrap()
}

fn spectral_closed_forms() -> Check {
    let mut c = Check::new();
    let mut worst: f64 = 0.0;
    for &(a1, a2, m) in &[(1.0, 1.0, 0.5), (0.3, 5.0, 0.2), (2.0, 0.7, 0.85)] {
        for &v in &[-3.0, 0.0, 0.7, 12.0] {
            let h = principal_eigenvalue(a1, a2, m, PotentialPair::new(v, v)).unwrap().h;
            worst = worst.max((h - v).abs());
        }
    }
    c.expect(worst <= CONSTANT_POTENTIAL_TOL, format!("H(c, c) = c: max error {worst:.3e}"));
    let f = PotentialPair::new(0.0, 1.0);
    let h = principal_eigenvalue(1.0, 1.0, 0.5, f).unwrap().h;
    let oracle = principal_eigenvalue_oracle(1.0, 1.0, 0.5, f, ORACLE_POINTS).unwrap();
    c.expect(
        (h - oracle).abs() <= ORACLE_TOL,
        format!("characteristic H = {h:.12} vs matrix oracle {oracle:.12} ({ORACLE_POINTS} points)"),
    );
    let mut worst: f64 = 0.0;
    for &(a1, a2, m, f1, f2) in &[(1.0, 1.0, 0.5, 0.0, 1.0), (0.5, 2.0, 0.3, -1.0, 2.0), (3.0, 0.2, 0.7, 4.0, -2.0)] {
        let sol = principal_eigenvalue(a1, a2, m, PotentialPair::new(f1, f2)).unwrap();
        let e = 1e-5;
        let d1 = (principal_eigenvalue(a1, a2, m, PotentialPair::new(f1 + e, f2)).unwrap().h
            - principal_eigenvalue(a1, a2, m, PotentialPair::new(f1 - e, f2)).unwrap().h)
            / (2.0 * e);
        let d2 = (principal_eigenvalue(a1, a2, m, PotentialPair::new(f1, f2 + e)).unwrap().h
            - principal_eigenvalue(a1, a2, m, PotentialPair::new(f1, f2 - e)).unwrap().h)
            / (2.0 * e);
        worst = worst.max((sol.occ_grad[0] - d1).abs()).max((sol.occ_grad[1] - d2).abs());
    }
    c.expect(worst <= GRADIENT_TOL, format!("occupation gradient vs finite differences: max error {worst:.3e}"));
    c
}

fn occupation_rate_checks() -> Check {
    let mut c = Check::new();
    let loc = local(0.5, 1.0, 1.0);
    let pi = invariant_proportions(1.0, 1.0, 0.5).unwrap();
    let s_pi = occupation_rate(&loc, pi).unwrap();
    c.expect(s_pi.abs() <= S_ZERO_TOL, format!("S(p_pi) = {s_pi:.3e}"));
    let corner = occupation_rate(&loc, SimplexWeights::new(0.0, 1.0).unwrap()).unwrap();
    let want = PI * PI / 2.0;
    c.expect(
        (corner - want).abs() <= S_CORNER_TOL,
        format!("S(0, 1) = {corner:.9} vs pi^2/2 = {want:.9}"),
    );
    let mut worst: f64 = 0.0;
    for loc in [local(0.5, 1.0, 1.0), local(0.3, 0.5, 2.0)] {
        let s: Vec<f64> = (0..=100)
            .map(|k| occupation_rate(&loc, SimplexWeights::from_p1(k as f64 / 100.0)).unwrap())
            .collect();
        for k in 1..100 {
            worst = worst.max(s[k] - 0.5 * (s[k - 1] + s[k + 1]));
        }
    }
    c.expect(worst <= S_CONVEXITY_TOL, format!("midpoint convexity on 101 points: max violation {worst:.3e}"));
    c
}

fn legendre_round_trip() -> Check {
    let mut c = Check::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (a1, a2, m) = (1.0, 2.0, 0.4);
    let loc = local(m, a1, a2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let f1: f64 = rng.random_range(-2.0..2.0);
        let f2: f64 = rng.random_range(-2.0..2.0);
        let (_, sup) = maximize_concave(
            |p1| {
                let p = SimplexWeights::from_p1(p1);
                p.p1 * f1 + p.p2 * f2 - occupation_rate(&loc, p).unwrap()
            },
            0.0,
            1.0,
            64,
            1e-12,
        );
        let h = principal_eigenvalue(a1, a2, m, PotentialPair::new(f1, f2)).unwrap().h;
        worst = worst.max((sup - h).abs());
    }
    c.expect(worst <= LEGENDRE_TOL, format!("sup_p(p.f - S(p)) vs H(f), 20 pairs: max error {worst:.3e}"));
    c
}

fn lambda_properties() -> Check {
    let mut c = Check::new();
    let med = layered_1d();
    let models: Vec<HomogeneousModel> = RegimeBeta::ALL
        .iter()
        .map(|&r| HomogeneousModel::new(&med, r).unwrap())
        .collect();
    let eq = &models[0];
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut homog: f64 = 0.0;
    let mut superadd: f64 = 0.0;
    let mut sandwich = 0usize;
    let mut monotone = 0usize;
    for _ in 0..1000 {
        let t1: f64 = rng.random_range(0.1..2.0);
        let t2: f64 = rng.random_range(0.1..2.0);
        let x1: f64 = rng.random_range(-3.0..3.0);
        let x2: f64 = rng.random_range(-3.0..3.0);
        let a: f64 = rng.random_range(0.2..5.0);
        let l1 = eq.lambda(t1, &[x1]).unwrap().value;
        let l2 = eq.lambda(t2, &[x2]).unwrap().value;
        let l12 = eq.lambda(t1 + t2, &[x1 + x2]).unwrap().value;
        superadd = superadd.max(l1 + l2 - l12);
        let la = eq.lambda(a * t1, &[a * x1]).unwrap().value;
        homog = homog.max((la - a * l1).abs() / (1.0 + l1.abs()));
        let fast = models[1].lambda(t1, &[x1]).unwrap().value;
        let slow = models[2].lambda(t1, &[x1]).unwrap().value;
        if !(fast <= l1 + 1e-12 && l1 <= slow + 1e-12) {
            sandwich += 1;
        }
        if !(eq.lambda(t1 + 0.01 * t2, &[x1]).unwrap().value > l1) {
            monotone += 1;
        }
    }
    c.expect(homog <= HOMOGENEITY_TOL, format!("homogeneity: max relative error {homog:.3e}"));
    c.expect(
        superadd <= SUPERADDITIVITY_TOL,
        format!("superadditivity on 1000 samples: max violation {superadd:.3e}"),
    );
    c.expect(sandwich == 0, format!("regime sandwich fast <= equal <= slow: {sandwich} violations"));
    c.expect(monotone == 0, format!("strict increase in t: {monotone} violations"));
    c
}

fn norm_properties() -> Check {
    let mut c = Check::new();
    let (a, ct) = (1.7, 0.8);
    let id = validate_medium(&CompositeMedium::homogeneous(
        0.35,
        LayerCoefficients::isotropic(2, a, 1.0, ct),
        LayerCoefficients::isotropic(2, a, 4.0, ct),
    ))
    .unwrap();
    let model = HomogeneousModel::new(&id, RegimeBeta::Equal).unwrap();
    let mut worst: f64 = 0.0;
    for x in [[1.0f64, 0.0], [0.3, -2.0], [-4.0, 1.5]] {
        let want = (x[0] * x[0] + x[1] * x[1]).sqrt() / (2.0 * ct * a).sqrt();
        worst = worst.max((model.norm(&x).unwrap() - want).abs());
    }
    c.expect(worst <= NORM_TOL, format!("identical layers |x|/sqrt(2 c a): max error {worst:.3e}"));
    let model = HomogeneousModel::new(&layered_2d(), RegimeBeta::Equal).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p: Vec<[f64; 2]> = (0..3)
            .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let d = |a: [f64; 2], b: [f64; 2]| model.norm(&[b[0] - a[0], b[1] - a[1]]).unwrap();
        worst = worst.max(d(p[0], p[2]) - d(p[0], p[1]) - d(p[1], p[2]));
    }
    c.expect(worst <= TRIANGLE_TOL, format!("triangle inequality on 1000 triples: max violation {worst:.3e}"));
    let ball = model.unit_ball(256).unwrap();
    let poly: Vec<[f64; 2]> = ball.iter().map(|v| [v[0], v[1]]).collect();
    c.expect(is_convex(&poly, 1e-9), format!("unit ball ({} vertices) convex", poly.len()));
    c
}

fn jump_example() -> Check {
    let mut c = Check::new();
    for t in [1.3, 1.5] {
        let r = jump_demo(JUMP_DELTA, t).unwrap();
        let want = t - 2.0 / 3f64.sqrt();
        c.expect(
            (r.lambda - want).abs() <= JUMP_TOL,
            format!(
                "lambda({t}, 0, -1) = {:.6} vs t - 2/sqrt(3) = {want:.6} (|diff| {:.2e}; two-region value at this delta {:.6})",
                r.lambda,
                (r.lambda - want).abs(),
                r.two_region_value
            ),
        );
    }
    let med = jump_medium(JUMP_DELTA, jump_bounds()).unwrap();
    let engine = XdepEngine::new(&med, RegimeBeta::Equal).unwrap();
    let cfg = DpConfig::default_for(1);
    let threshold = 2.0 / 3f64.sqrt();
    let below = engine.lambda(threshold - 0.05, &[0.0], &[-1.0], &cfg).unwrap().value;
    let above = engine.lambda(threshold + 0.05, &[0.0], &[-1.0], &cfg).unwrap().value;
    c.expect(
        below < 0.0 && above > 0.0,
        format!("sign around 2/sqrt(3): lambda = {below:.5} at t - 0.05, {above:.5} at t + 0.05"),
    );
    let g0 = InitialSupport::Interval { lo: -2.0, hi: -1.0 };
    let plus = *engine.membership(&g0, 1.2, &[JUMP_DELTA], &cfg).unwrap().last().unwrap();
    let minus = *engine.membership(&g0, 1.2, &[-0.05], &cfg).unwrap().last().unwrap();
    c.expect(plus, format!("+delta in G_1.2: {plus}"));
    c.expect(!minus, format!("-0.05 not in G_1.2: member = {minus}"));
    c
}

fn inclusion_formula() -> Check {
    let mut c = Check::new();
    let (t0, bound) = inclusion_jump_time(1.0, 4.0, 0.1).unwrap();
    let want = 0.9 * 6f64.sqrt() / 4.0;
    c.expect((t0 - want).abs() <= INCLUSION_TOL, format!("T0(1, 4, 0.1) = {t0:.15} vs {want:.15}"));
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut bad = 0;
    for _ in 0..1000 {
        let c0: f64 = rng.random_range(0.01..5.0);
        let c1: f64 = 2.0 * c0 * rng.random_range(1.0001..50.0);
        let d: f64 = rng.random_range(1e-6..0.999);
        match inclusion_jump_time(c0, c1, d) {
            Ok((t, b)) if t < b => {}
            _ => bad += 1,
        }
    }
    c.expect(t0 < bound && bad == 0, format!("T0 < 1/sqrt(2 c0) on 1000 samples: {bad} violations"));
    c
}

fn xdep_consistency() -> Check {
    let mut c = Check::new();
    let med = layered_1d();
    let model = HomogeneousModel::new(&med, RegimeBeta::Equal).unwrap();
    let field = med.as_field(BoundingBox::new(vec![-2.0], vec![2.0])).unwrap();
    let engine = XdepEngine::new(&field, RegimeBeta::Equal).unwrap();
    for &(t, x, xp) in &[(1.0, 0.3, -0.55), (0.7, -1.2, 0.9)] {
        let want = model.lambda(t, &[x - xp]).unwrap().value;
        let mut values = Vec::new();
        for level in 0..3 {
            let cfg = DpConfig::default_for(1).scaled(1 << level);
            values.push(engine.lambda(t, &[x], &[xp], &cfg).unwrap().value);
        }
        c.expect(
            (values[0] - want).abs() <= XDEP_TOL,
            format!("lambda_xdep({t}, {x}, {xp}) = {:.10} vs homogeneous {want:.10}", values[0]),
        );
        let errs: Vec<f64> = values.iter().map(|v| (v - want).abs()).collect();
        let drops_ok = values.windows(2).all(|w| w[1] >= w[0] - REFINEMENT_DROP);
        c.expect(
            drops_ok && errs[2] <= errs[0] + REFINEMENT_DROP,
            format!(
                "two doublings: values {}, errors {}",
                values.iter().map(|v| format!("{v:.10}")).collect::<Vec<_>>().join(" "),
                errs.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(" ")
            ),
        );
    }
    c
}

fn finite_epsilon_limit() -> Check {
    let mut c = Check::new();
    let l = layer(1.0, 1.0);
    let id = validate_medium(&CompositeMedium::homogeneous(0.5, l.clone(), l)).unwrap();
    let g0 = InitialSupport::Interval { lo: -0.25, hi: 0.25 };
    let xs = [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0];
    let table = epsilon_convergence_table(&id, 1.0, &g0, 1.0, &xs, &[0.08, 0.04, 0.02, 0.01], 0.25, (-3.5, 3.5)).unwrap();
    c.expect(table.monotone, format!("gaps non-increasing along epsilon: {:?}", table.violations));
    let worst = table
        .rows
        .iter()
        .filter(|r| r.epsilon == 0.01)
        .map(|r| r.gap)
        .fold(0.0, f64::max);
    c.expect(worst <= GAP_AT_SMALLEST, format!("max gap at epsilon = 0.01: {worst:.4}"));
    let fast = validate_medium(&CompositeMedium::homogeneous(0.5, layer(1.0, 0.0), layer(1.0, 2.0))).unwrap();
    let run = linear_pde_solve(&fast, 2.0, 0.01, &g0, 1.0, &PdeConfig::for_epsilon(0.01, -3.5, 3.5)).unwrap();
    let var = xs.iter().map(|&x| run.y_variation(x)).fold(0.0, f64::max);
    c.expect(var <= Y_VARIATION_TOL, format!("beta = 2: max y-variation of eps ln u = {var:.2e}"));
    c
}

fn kpp_fronts() -> Check {
    let mut c = Check::new();
    let med = validate_medium(&CompositeMedium::homogeneous(0.5, layer(1.0, 0.5), layer(2.0, 1.5))).unwrap();
    let g0 = InitialSupport::Interval { lo: -0.25, hi: 0.25 };
    let t = 1.0;
    let model = HomogeneousModel::new(&med, RegimeBeta::Equal).unwrap();
    let run = kpp_pde_solve(&med, 1.0, 0.01, &g0, t, &KppProfile::logistic(0.5, 1.5), &PdeConfig::for_epsilon(0.01, -3.0, 3.0))
        .unwrap();
    let (mut inside, mut outside, mut bad_in, mut bad_out) = (0, 0, 0, 0);
    for k in 0..=60 {
        let x = -3.0 + 0.1 * k as f64;
        let d = model.distance(&g0, &[x]).unwrap();
        let i = run.x_index(x);
        let us: Vec<f64> = (0..run.y.len()).map(|j| run.field.u(run.x.len(), i, j)).collect();
        if d <= 0.8 * t {
            inside += 1;
            bad_in += us.iter().filter(|&&u| !(u > 0.9)).count();
        } else if d >= 1.2 * t {
            outside += 1;
            bad_out += us.iter().filter(|&&u| !(u < 0.1)).count();
        }
    }
    c.expect(bad_in == 0, format!("u > 0.9 where d <= 0.8 t ({inside} points): {bad_in} violations"));
    c.expect(bad_out == 0, format!("u < 0.1 where d >= 1.2 t ({outside} points): {bad_out} violations"));
    c
}

fn monte_carlo() -> Check {
    let mut c = Check::new();
    let med = validate_medium(&CompositeMedium::homogeneous(
        0.5,
        LayerCoefficients::isotropic(1, 1.0, 1.0, 0.5),
        LayerCoefficients::isotropic(1, 2.0, 2.0, 1.0),
    ))
    .unwrap();
    let (mean, se) = mc_occupation(&med, 1.0, 0.05, 1.0, &[0.0], &McConfig::new(10_000, 2)).unwrap();
    let p1 = invariant_proportions(1.0, 2.0, 0.5).unwrap().p1;
    c.expect(
        (mean - p1).abs() <= MC_SIGMAS * se,
        format!("occupation {mean:.5} +- {se:.5} vs p_pi = {p1:.5}"),
    );
    let g0 = InitialSupport::Interval { lo: -0.25, hi: 0.25 };
    let (t, x, y, eps) = (0.5, 0.6, 0.3, 0.05);
    let mc = mc_feynman_kac(&med, 1.0, eps, &g0, t, &[x], y, &McConfig::new(10_000, 1)).unwrap();
    let pde = linear_pde_solve(&med, 1.0, eps, &g0, t, &PdeConfig::for_epsilon(eps, -2.5, 2.5).refined(1)).unwrap();
    let ln_pde = pde.eps_ln_u_at(x, y) / eps;
    let allowed = MC_SIGMAS * (mc.rel_std_error + mc.interface_bias_bound);
    c.expect(
        (mc.log_estimate - ln_pde).abs() <= allowed,
        format!(
            "ln u: MC {:.4} (rel se {:.3}, bias bound {:.3}) vs PDE {ln_pde:.4}",
            mc.log_estimate, mc.rel_std_error, mc.interface_bias_bound
        ),
    );
    let small = McConfig::new(2000, 99);
    let runs: Vec<_> = [1usize, 3]
        .iter()
        .map(|&k| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .unwrap()
                .install(|| mc_feynman_kac(&med, 1.0, 0.1, &g0, 0.3, &[0.4], 0.7, &small).unwrap())
        })
        .collect();
    let same = runs[0].log_estimate.to_bits() == runs[1].log_estimate.to_bits()
        && runs[0].rel_std_error.to_bits() == runs[1].rel_std_error.to_bits()
        && runs[0].occupation.0.to_bits() == runs[1].occupation.0.to_bits();
    c.expect(same, "identical results with 1 and 3 worker threads under one seed".into());
    c
}

fn main() {
    let criteria: Vec<(&str, fn() -> Check)> = vec![
        ("spectral closed forms", spectral_closed_forms),
        ("occupation rate", occupation_rate_checks),
        ("Legendre round-trip", legendre_round_trip),
        ("homogeneous exponent properties", lambda_properties),
        ("Finsler norm", norm_properties),
        ("interface jump example", jump_example),
        ("inclusion jump time", inclusion_formula),
        ("position-dependent consistency", xdep_consistency),
        ("finite-epsilon exponent", finite_epsilon_limit),
        ("KPP front location", kpp_fronts),
        ("Monte Carlo oracle", monte_carlo),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        if let Some(f) = &filter {
            if !name.contains(f.as_str()) {
                continue;
            }
        }
        let start = Instant::now();
        let check = run();
        println!(
            "criterion {:>2} {name}: {} ({:.1} s)",
            k + 1,
            if check.ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        for d in &check.details {
            println!("    {d}");
        }
        if !check.ok {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
