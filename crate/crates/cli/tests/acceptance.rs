//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::fmt::Write as _;
use std::process::Command;
use std::time::{Duration, Instant};

use owc_core::coupling::compatibility_check;
use owc_core::diagnostics::{
    chamber_identity, convergence_study, mass_drift, ode_scaling_test, MIN_SCALING_EXPONENT,
};
use owc_core::model::{BoundaryState, DomainLayout, DomainTag, FieldState, PhysicalParams};
use owc_core::solver::{
    low_norm_distance, picard_solve, run, Forcing, LeftBoundary, PicardMode, Problem, Scheme,
    SolverConfig,
};
use owc_core::swe::{
    boundary_matrix, eigen, jacobian, lopatinskii, symmetrizer, CellState, EigenScaling,
};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn params() -> PhysicalParams<f64> {
    PhysicalParams::reference()
}

fn closed(p: PhysicalParams<f64>, n_minus: usize, n_pl: usize, n_pr: usize) -> Problem<f64> {
    Problem::new(p, DomainLayout::new(&p, 8.0, n_minus, n_pl, n_pr).unwrap())
}

fn forced(p: PhysicalParams<f64>, n_minus: usize, n_pl: usize, n_pr: usize) -> Problem<f64> {
    closed(p, n_minus, n_pl, n_pr).with_forcing(
        LeftBoundary::Open,
        Forcing::Sine {
            amplitude: 0.01,
            omega: 2.0,
        },
    )
}

/// Gaussian elevation bump in the deep region, rest elsewhere.
fn bump(a: f64) -> impl Fn(DomainTag, f64) -> (f64, f64) + Sync + Copy {
    move |tag, x| {
        if tag == DomainTag::EMinus {
            (a * (-((x + 4.0) / 1.0f64).powi(2)).exp(), 0.0)
        } else {
            (0.0, 0.0)
        }
    }
}

fn algebraic_structure() -> Outcome {
    let start = Instant::now();
    let g = 9.81;
    let h_rest = 1.0;
    let (mut eig, mut sym, mut sa) = (0.0f64, 0.0f64, 0.0f64);
    let mut spd = true;
    for i in 0..50 {
        let zeta = -0.5 + 1.5 * i as f64 / 49.0;
        let h = h_rest + zeta;
        let c = (g * h).sqrt();
        for j in 0..50 {
            // Froude number in [-0.9, 0.9]
            let q = (-0.9 + 1.8 * j as f64 / 49.0) * h * c;
            let u = CellState::new(zeta, q, h_rest);
            let v = q / h;
            // oracle: A = [[0, 1], [c² - v², 2v]], λ± = v ± c
            let a = [[0.0, 1.0], [c * c - v * v, 2.0 * v]];
            let e = eigen(&u, g).unwrap();
            for (lam, ev, exact) in [
                (e.lambda_plus, e.e_plus, v + c),
                (e.lambda_minus, e.e_minus, v - c),
            ] {
                let av = [
                    a[0][0] * ev[0] + a[0][1] * ev[1],
                    a[1][0] * ev[0] + a[1][1] * ev[1],
                ];
                let scale = 1.0 + exact.abs();
                eig = eig
                    .max((av[0] - lam * ev[0]).abs() / scale)
                    .max((av[1] - lam * ev[1]).abs() / scale)
                    .max((lam - exact).abs() / scale);
            }
            let s = symmetrizer(&u, g).unwrap();
            let jm = jacobian(&u, g).unwrap();
            let sn = s.frobenius();
            sym = sym.max((s.0[0][1] - s.0[1][0]).abs() / sn);
            spd &= s.0[0][0] > 0.0 && s.det() > 0.0;
            let p = s * jm;
            sa = sa.max((p.0[0][1] - p.0[1][0]).abs() / (sn * jm.frobenius()));
        }
    }
    let m = boundary_matrix::<f64>();
    let m_ok = m.0 == [[0.0, -1.0, 0.0, 1.0], [0.0, 0.5, 0.0, 0.5]];
    let rest = CellState::new(0.0, 0.0, 1.0);
    let (l, _) = lopatinskii(&rest, &rest, g, EigenScaling::SecondComponentOne).unwrap();
    let l_ok = l.0 == [[-1.0, 1.0], [0.5, 0.5]] && l.det() == -1.0;
    let elapsed = start.elapsed();
    let ok = eig <= 1e-12
        && sym <= 1e-12
        && sa <= 1e-12
        && spd
        && m_ok
        && l_ok
        && elapsed < Duration::from_secs(1);
    (
        ok,
        format!(
            "eigen residual {eig:.1e}, S asym {sym:.1e}, SA asym {sa:.1e}, S > 0 {spd}, M exact {m_ok}, L = {:?} det {} ({elapsed:.2?})",
            l.0,
            l.det()
        ),
    )
}

fn rest_preservation() -> Outcome {
    let start = Instant::now();
    let pr = closed(params(), 400, 330, 270);
    let mut cfg = SolverConfig::new(1.0);
    cfg.fixed_dt = Some(1e-3);
    cfg.snapshot_every = 1;
    let res = run(
        &pr,
        &FieldState::rest(&pr.layout),
        &BoundaryState::default(),
        &cfg,
    )
    .unwrap();
    let mut change = 0.0f64;
    for s in &res.snapshots {
        for d in &s.domains {
            for k in 0..d.zeta.len() {
                change = change.max(d.zeta[k].abs()).max(d.q[k].abs());
            }
        }
    }
    let g_max = res
        .traces
        .g
        .iter()
        .fold(0.0f64, |a, g| a.max(g[0].abs()).max(g[1].abs()));
    let elapsed = start.elapsed();
    let ok = res.steps == 1000
        && pr.layout.total_cells() == 1000
        && change <= 1e-12
        && g_max <= 1e-14
        && elapsed < Duration::from_secs(10);
    (
        ok,
        format!(
            "{} steps on {} cells, max cell change {change:.1e}, max |G| {g_max:.1e} ({elapsed:.2?})",
            res.steps,
            pr.layout.total_cells()
        ),
    )
}

fn constant_pressure() -> Outcome {
    let mut p = params();
    p.h_ch = f64::INFINITY;
    let pr = forced(p, 100, 110, 200);
    let mut cfg = SolverConfig::new(1.0);
    cfg.record_every = 1;
    // the forced wave needs longer than t_end to reach the structure, so a bump
    // next to the front wall drives q_i within the run
    let u0 = FieldState::from_fn(&pr.layout, |tag, x| {
        if tag == DomainTag::EPlusLeft {
            (0.02 * (-((x - 4.0) / 0.5f64).powi(2)).exp(), 0.0)
        } else {
            (0.0, 0.0)
        }
    });
    let res = run(&pr, &u0, &BoundaryState::default(), &cfg).unwrap();
    let p_max = res.traces.g.iter().fold(0.0f64, |a, g| a.max(g[1].abs()));
    let q_max = res.traces.g.iter().fold(0.0f64, |a, g| a.max(g[0].abs()));
    (
        p.gamma_2() == 0.0 && p_max <= 1e-13 && q_max > 0.0,
        format!(
            "gamma_2 = {}, max |P_ch| = {p_max:.1e}, max |q_i| = {q_max:.2e}",
            p.gamma_2()
        ),
    )
}

fn chamber_identity_refinement() -> Outcome {
    let start = Instant::now();
    let p = params();
    let mut levels = Vec::new();
    for k in [1usize, 2, 4] {
        let pr = forced(p, 100 * k, 110 * k, 200 * k);
        let mut cfg = SolverConfig::new(4.0);
        cfg.cfl = 0.4;
        let res = run(
            &pr,
            &FieldState::rest(&pr.layout),
            &BoundaryState::default(),
            &cfg,
        )
        .unwrap();
        let ci = chamber_identity(&res, &p);
        levels.push((pr.layout.domains[2].n, ci.max_residual, ci.amplitude));
    }
    let factors: Vec<f64> = levels.windows(2).map(|w| w[0].1 / w[1].1).collect();
    let (_, finest, amp) = levels[2];
    let relative = finest / amp;
    let elapsed = start.elapsed();
    let ok =
        factors.iter().all(|&f| f >= 1.7) && relative <= 1e-3 && elapsed < Duration::from_secs(120);
    let mut s = String::new();
    for (n, r, _) in &levels {
        let _ = write!(s, "n_pr {n}: {r:.2e}; ");
    }
    let _ = write!(
        s,
        "factors {factors:.2?}, finest relative {relative:.1e} ({elapsed:.1?})"
    );
    (ok, s)
}

fn mass_conservation() -> Outcome {
    let pr = closed(params(), 160, 112, 72);
    let u0 = FieldState::from_fn(&pr.layout, bump(0.02));
    let res = run(&pr, &u0, &BoundaryState::default(), &SolverConfig::new(1.0)).unwrap();
    let drift = mass_drift(&res, &pr.layout);
    (
        drift <= 1e-8,
        format!("relative drift {drift:.1e} after {} steps", res.steps),
    )
}

fn compatibility_gate() -> Outcome {
    let pr = closed(params(), 40, 28, 18);
    let g0 = BoundaryState::default();
    let rest = compatibility_check(
        &pr.layout,
        &FieldState::rest(&pr.layout),
        &g0,
        1,
        &pr.params,
        1e-12,
    )
    .unwrap();
    let rest_ok =
        rest.passed() && rest.r0_norm() <= 1e-12 && rest.r1_norm().is_some_and(|r| r <= 1e-12);
    // q jumps from 0 to 0.1 across the front wall: M u = (q_r - q_l, (q_l + q_r)/2)
    let jump = FieldState::from_fn(&pr.layout, |t, _| {
        if t == DomainTag::EPlusRight {
            (0.0, 0.1)
        } else {
            (0.0, 0.0)
        }
    });
    let bad = compatibility_check(&pr.layout, &jump, &g0, 0, &pr.params, 1e-12).unwrap();
    let bad_ok =
        !bad.passed() && (bad.r0[0] - 0.1).abs() <= 1e-12 && (bad.r0[1] - 0.05).abs() <= 1e-12;
    (
        rest_ok && bad_ok,
        format!(
            "rest r0 {:?} r1 {:?}; jump rejected {} with r0 {:?}",
            rest.r0,
            rest.r1,
            !bad.passed(),
            bad.r0
        ),
    )
}

fn picard_contraction() -> Outcome {
    let start = Instant::now();
    let pr = closed(params(), 40, 28, 18);
    let u0 = FieldState::from_fn(&pr.layout, bump(0.05));
    let g0 = BoundaryState::default();
    let tol = 1e-13;
    let mut t_end = 0.2;
    let mut chosen = None;
    for _ in 0..6 {
        let mut cfg = SolverConfig::new(t_end);
        cfg.picard = PicardMode::On { max_iter: 40, tol };
        if let Ok(o) = picard_solve(&pr, &u0, &g0, &cfg) {
            if longest_run_at_most(&o.ratios, 0.5) >= 4 {
                chosen = Some((cfg, o));
                break;
            }
        }
        t_end /= 2.0;
    }
    let Some((cfg, o)) = chosen else {
        return (
            false,
            "no horizon down to 0.2/32 gave four contracting iterations".into(),
        );
    };
    let mut direct = cfg;
    direct.picard = PicardMode::Off;
    direct.fixed_dt = Some(o.dt);
    direct.snapshot_every = 1;
    direct.record_every = 1;
    let res = run(&pr, &u0, &g0, &direct).unwrap();
    let g: Vec<BoundaryState<f64>> = res
        .traces
        .t
        .iter()
        .zip(&res.traces.g)
        .map(|(&t, g)| BoundaryState {
            t,
            q_i: g[0],
            p_ch: g[1],
        })
        .collect();
    let same_grid = res.snapshots.len() == o.states.len() && g.len() == o.g.len();
    let dist = if same_grid {
        low_norm_distance(&pr, o.dt, (&o.states, &o.g), (&res.snapshots, &g))
    } else {
        f64::INFINITY
    };
    let run_len = longest_run_at_most(&o.ratios, 0.5);
    let elapsed = start.elapsed();
    let ok = run_len >= 4 && dist <= 10.0 * tol && elapsed < Duration::from_secs(120);
    (
        ok,
        format!(
            "t_end {t_end}, {} iterations, max ratio {:.1e}, {run_len} consecutive <= 0.5, distance to direct run {dist:.1e} ({elapsed:.1?})",
            o.iterations, o.ratios.iter().fold(0.0f64, |a, &r| a.max(r))
        ),
    )
}

fn longest_run_at_most(ratios: &[f64], bound: f64) -> usize {
    let (mut best, mut cur) = (0, 0);
    for &r in ratios {
        cur = if r <= bound { cur + 1 } else { 0 };
        best = best.max(cur);
    }
    best
}

fn ode_scaling() -> Outcome {
    let p = params();
    let t_list = [0.1, 0.05, 0.025, 0.0125];
    let traces = |t: f64| {
        (
            CellState::new(0.01 * (5.0 * t).sin(), 0.02 * (3.0 * t).cos(), p.h_0),
            CellState::new(0.01 * (4.0 * t).sin(), 0.01 * (2.0 * t).sin(), p.h_0),
        )
    };
    // off-equilibrium chamber pressure so that G'(0) != 0 and the sqrt(T) regime is visible
    let varying = ode_scaling_test(
        &p,
        traces,
        BoundaryState::new(0.0, 100.0),
        &t_list,
        10_000,
        false,
    )
    .unwrap();
    // from G = 0 the pressure starts with zero slope and the norm scales like T^1.5
    let from_rest =
        ode_scaling_test(&p, traces, BoundaryState::default(), &t_list, 10_000, false).unwrap();
    let left = CellState::new(0.01, 0.02, p.h_0);
    let right = CellState::new(-0.005, 0.01, p.h_0);
    let constant = ode_scaling_test(
        &p,
        |_| (left, right),
        BoundaryState::default(),
        &t_list,
        10_000,
        true,
    )
    .unwrap();
    let err = constant.analytic_error.unwrap_or(f64::INFINITY);
    (
        varying.exponent >= MIN_SCALING_EXPONENT && from_rest.exponent >= MIN_SCALING_EXPONENT && err <= 1e-6,
        format!(
            "exponent {:.4} from P_ch(0) = 100 (constant {:.3e}), {:.4} from rest, constant-input error vs closed form {err:.1e}",
            varying.exponent, varying.constant, from_rest.exponent
        ),
    )
}

fn convergence_order() -> Outcome {
    let start = Instant::now();
    let pr = closed(params(), 160, 112, 72);
    let mut orders = Vec::new();
    for (scheme, lo, hi) in [
        (Scheme::Rusanov, 0.8, 1.2),
        (Scheme::MusclRusanov, 1.6, 2.2),
    ] {
        let mut cfg = SolverConfig::new(0.5);
        cfg.scheme = scheme;
        cfg.cfl = 0.4;
        let rep = convergence_study(
            &pr,
            &cfg,
            &[1, 2, 4, 8, 16],
            bump(0.02),
            BoundaryState::default(),
        )
        .unwrap();
        orders.push((scheme, rep.observed_order, lo, hi, rep.cells.len()));
    }
    let elapsed = start.elapsed();
    let ok = orders
        .iter()
        .all(|&(_, o, lo, hi, n)| (lo..=hi).contains(&o) && n >= 3)
        && elapsed < Duration::from_secs(300);
    let mut s = String::new();
    for (scheme, o, lo, hi, n) in &orders {
        let _ = write!(
            s,
            "{}: {o:.3} in [{lo}, {hi}] over {n} grids; ",
            scheme.as_str()
        );
    }
    let _ = write!(s, "({elapsed:.1?})");
    (ok, s)
}

fn assumption_monitoring() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = params();
    let layout = DomainLayout::new(&p, 8.0, 80, 56, 36).unwrap();
    // discharge pulse in the deep region with g h - (q/h)² = 0.01 at its crest
    let qc = ((p.g * p.h_s - 0.01) * p.h_s * p.h_s).sqrt();
    let field = FieldState::from_fn(&layout, |tag, x| {
        if tag == DomainTag::EMinus {
            (0.0, -qc * (-((x + 4.0) / 1.5f64).powi(4)).exp())
        } else {
            (0.0, 0.0)
        }
    });
    let mut csv = String::from("x,zeta,q\n");
    for (d, f) in layout.domains.iter().zip(&field.domains) {
        for j in 0..d.n {
            let _ = writeln!(
                csv,
                "{:.17e},{:.17e},{:.17e}",
                d.cell_center(j),
                f.zeta[j],
                f.q[j]
            );
        }
    }
    std::fs::write(dir.path().join("pulse.csv"), csv).unwrap();
    let config = "\
[params]
g = 9.81
rho = 1000
h_s = 2
h_0 = 1
zeta_w = -0.5
l_0 = 6
r = 0.5
l_1 = 10
gamma = 1.4
P_atm = 101325
h_ch = 2
K = 50000

[domain]
l_ext = 8
n_minus = 80
n_pl = 56
n_pr = 36
left_boundary = open

[solver]
t_end = 2.0

[initial]
profile = file(pulse.csv)

[forcing]
inflow = none
";
    let cfg_path = dir.path().join("pulse.cfg");
    std::fs::write(&cfg_path, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_owc"))
        .arg("simulate")
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr
        .lines()
        .find(|l| l.contains("assumption violated"))
        .unwrap_or("")
        .to_string();
    let dump = std::fs::read_to_string(dir.path().join("run/dump/state.csv")).unwrap_or_default();
    let finite = !dump.is_empty() && !dump.contains("NaN") && !dump.contains("inf");
    let code = out.status.code();
    (
        code == Some(3) && line.contains("t = ") && line.contains("x = ") && finite,
        format!(
            "exit {code:?}, {}, dump finite {finite}",
            line.trim_start_matches("error: ")
        ),
    )
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored
    let criteria: [Criterion; 10] = [
        ("algebraic structure", algebraic_structure),
        ("rest-state preservation", rest_preservation),
        ("constant-pressure reduction", constant_pressure),
        ("chamber identity", chamber_identity_refinement),
        ("mass conservation", mass_conservation),
        ("compatibility gate", compatibility_gate),
        ("Picard contraction", picard_contraction),
        ("ODE sqrt(T) scaling", ode_scaling),
        ("convergence order", convergence_order),
        ("assumption monitoring", assumption_monitoring),
    ];
    let mut failed = Vec::new();
    for (k, (name, f)) in criteria.iter().enumerate() {
        let (ok, detail) = f();
        println!(
            "criterion {:>2} {name}: {}: {detail}",
            k + 1,
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            failed.push(k + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
