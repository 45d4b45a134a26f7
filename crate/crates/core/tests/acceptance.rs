//! One line per primary acceptance criterion; exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use heph_core::blueprint::parse_blueprint_bytes;
use heph_core::brief::{parse_brief_bytes, parse_brief_str, Brief};
use heph_core::checker::{grade_suite, CaseVerdict, Status, Verdict};
use heph_core::controller::{
    run_case, run_suite, AgentContext, AttemptRecord, CommandAgent, LoopConfig, Schedule, ScriptedAgent, SuiteCase,
    BRIEF_FILE, VIEWS_DIR,
};
use heph_core::fea::{
    buckling_factors, first_frequency, parse_solver_report_bytes, solve_static, AnalysisModel, FeaMaterial, LoadCase,
    LoadTarget, Member, NodalLoad, PointMass, Support,
};
use heph_core::feedback::{parse_feedback, FeedbackLevel, FEEDBACK_FILE};
use heph_core::geom::{mat_vec, rotation, Aabb, Vec3};
use heph_core::grade::{evaluate_path, EvalOptions};
use heph_core::mesh::shapes::{box_mesh, uv_sphere};
use heph_core::mesh::{sample_surface, TriMesh, ValidityReport, VoxelGrid};
use heph_core::metrics::{
    chamfer, chamfer_with, compare_meshes, f_score, f_score_with, invalidity_ratio, voxel_iou, MetricConfig, Strategy,
};
use heph_core::render::{render_bundle, view_set, RenderConfig, ViewGroup, VIEWS_MANIFEST_FILE, VIEW_NAMES};
use heph_core::sample_pack::{brief_text, CASES};
use heph_core::{Mesh, Point};

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn brief(case: &str) -> Brief {
    parse_brief_str(brief_text(case).unwrap()).unwrap()
}

fn grade_fixture(case: &str, variant: &str) -> CaseVerdict {
    evaluate_path(&brief(case), &fixtures().join(case).join(variant), &EvalOptions::default()).verdict
}

fn small_render() -> RenderConfig {
    RenderConfig {
        width: 96,
        height: 72,
        ..RenderConfig::default()
    }
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<Point> {
    (0..n)
        .map(|_| Vec3::new(rng.random_range(-spread..spread), rng.random_range(-spread..spread), rng.random_range(-spread..spread)))
        .collect()
}

/// Nearest squared distances by plain double loop.
fn brute_nn(from: &[Point], to: &[Point]) -> Vec<f64> {
    from.iter()
        .map(|p| to.iter().map(|q| p.dist2(*q)).fold(f64::INFINITY, f64::min))
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

// ---------------------------------------------------------------- metrics

fn metric_equations() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for pair in 0..200 {
        let n = rng.random_range(1..=512);
        let m = rng.random_range(1..=512);
        let p = random_cloud(&mut rng, n, 50.0);
        let q = random_cloud(&mut rng, m, 50.0);
        let (dp, dq) = (brute_nn(&p, &q), brute_nn(&q, &p));
        let cd_oracle = mean(&dp) + mean(&dq);
        let tau = rng.random_range(0.5..20.0);
        let within = |d: &[f64]| d.iter().filter(|&&x| x <= tau * tau).count() as f64 / d.len() as f64;
        let (po, ro) = (within(&dp), within(&dq));
        let f_oracle = if po + ro > 0.0 { 2.0 * po * ro / (po + ro) } else { 0.0 };
        for s in [Strategy::KdTree, Strategy::BruteForce, Strategy::Auto] {
            let cd = chamfer_with(&p, &q, s).map_err(|e| e.to_string())?;
            let f = f_score_with(&p, &q, tau, s).map_err(|e| e.to_string())?;
            worst = worst.max(rel(cd, cd_oracle));
            ensure(rel(cd, cd_oracle) <= 1e-12, || format!("pair {pair} {s:?}: chamfer {cd} vs {cd_oracle}"))?;
            ensure((f.f - f_oracle).abs() <= 1e-12, || format!("pair {pair} {s:?}: F {} vs {f_oracle}", f.f))?;
            ensure(f.precision == po && f.recall == ro, || format!("pair {pair} {s:?}: precision/recall"))?;
        }
    }

    let frame = Aabb::new(Vec3::splat(0.0), Vec3::of(1.0, 2.0, 3.0));
    for trial in 0..50u64 {
        let dims = [
            rng.random_range(1..12usize),
            rng.random_range(1..12usize),
            rng.random_range(1..12usize),
        ];
        let (ca, cb) = (Vec3::of(0.4, 0.9, 1.6), Vec3::of(0.6, 1.1, 1.3));
        let (ra, rb) = (rng.random_range(0.2..1.2), rng.random_range(0.2..1.2));
        let a = VoxelGrid::from_fn(frame, dims, |c| c.dist2(ca) <= ra * ra);
        let b = VoxelGrid::from_fn(frame, dims, |c| c.dist2(cb) <= rb * rb);
        let (mut inter, mut union) = (0usize, 0usize);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let c = a.cell_center(i, j, k);
                    let (x, y) = (c.dist2(ca) <= ra * ra, c.dist2(cb) <= rb * rb);
                    inter += (x && y) as usize;
                    union += (x || y) as usize;
                }
            }
        }
        let iou = voxel_iou(&a, &b).map_err(|e| e.to_string())?.iou;
        let oracle = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
        ensure(iou == oracle, || format!("voxel trial {trial}: {iou} vs {inter}/{union}"))?;
    }

    for trial in 0..100 {
        let n = rng.random_range(1..40);
        let reports: Vec<ValidityReport> = (0..n)
            .map(|_| {
                let ok = rng.random_bool(0.6);
                ValidityReport {
                    watertight: ok,
                    consistently_oriented: ok,
                    self_intersection_checked: false,
                    valid_solid: ok,
                }
            })
            .collect();
        let bad = reports.iter().filter(|r| !r.valid_solid).count();
        let ir = invalidity_ratio(&reports).map_err(|e| e.to_string())?;
        ensure(ir == bad as f64 / n as f64, || format!("IR trial {trial}: {ir} vs {bad}/{n}"))?;
    }
    Ok(format!("200 cloud pairs, worst chamfer rel err {worst:.1e}; 50 voxel grids; 100 IR lists"))
}

fn axis_rotations() -> Vec<[[f64; 3]; 3]> {
    // All 24 proper signed permutation matrices.
    let mut out = Vec::new();
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for p in perms {
        for signs in 0..8 {
            let mut m = [[0.0; 3]; 3];
            for r in 0..3 {
                m[r][p[r]] = if signs >> r & 1 == 1 { -1.0 } else { 1.0 };
            }
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            if det > 0.0 {
                out.push(m);
            }
        }
    }
    out
}

fn metric_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let p = random_cloud(&mut rng, 300, 10.0);
        let q = random_cloud(&mut rng, 200, 10.0);
        let (a, b) = (chamfer(&p, &q).unwrap(), chamfer(&q, &p).unwrap());
        ensure(a == b, || format!("chamfer asymmetric: {a} vs {b}"))?;
        let (fa, fb) = (f_score(&p, &q, 2.0).unwrap(), f_score(&q, &p, 2.0).unwrap());
        ensure(fa.f == fb.f && fa.precision == fb.recall, || "F-score asymmetric".into())?;
        let mut last = 0.0;
        for k in 1..=40 {
            let f = f_score(&p, &q, k as f64 * 0.25).unwrap().f;
            ensure(f >= last, || format!("F not monotone at tau {}", k as f64 * 0.25))?;
            last = f;
        }
        ensure(chamfer(&p, &p).unwrap() == 0.0 && f_score(&p, &p, 1e-9).unwrap().f == 1.0, || "cloud identity".into())?;
    }

    let reference: Mesh = TriMesh::merge(
        "ref",
        &[
            box_mesh(Vec3::of(0.0, 0.0, 0.0), Vec3::of(40.0, 20.0, 10.0)),
            uv_sphere(Vec3::of(20.0, 10.0, 18.0), 6.0, 16, 10),
        ],
    );
    let generated: Mesh = TriMesh::merge(
        "gen",
        &[
            box_mesh(Vec3::of(1.0, -1.0, 0.0), Vec3::of(41.0, 19.0, 11.0)),
            uv_sphere(Vec3::of(21.0, 10.0, 19.0), 5.5, 16, 10),
        ],
    );
    let cfg = MetricConfig {
        sample_n: 1024,
        voxel_res: 24,
        ..MetricConfig::default()
    };
    let me = compare_meshes(&reference, &reference, &cfg).map_err(|e| e.to_string())?;
    ensure(
        me.chamfer_sq_normalized == Some(0.0) && me.f_score == 1.0 && me.voxel_iou == 1.0,
        || format!("self comparison: {me:?}"),
    )?;
    let base = compare_meshes(&generated, &reference, &cfg).map_err(|e| e.to_string())?;
    let base_cd = base.chamfer_sq_normalized.unwrap();
    let swap = compare_meshes(&reference, &generated, &cfg).map_err(|e| e.to_string())?;
    ensure(swap.voxel_iou == base.voxel_iou, || "voxel IoU asymmetric".into())?;

    let mut worst = 0.0f64;
    let shift = Vec3::of(123.25, -77.5, 9.125);
    for r in axis_rotations() {
        let mv = |m: &Mesh| m.transformed(|p| mat_vec(&r, p) + shift);
        let moved = compare_meshes(&mv(&generated), &mv(&reference), &cfg).map_err(|e| e.to_string())?;
        let cd = moved.chamfer_sq_normalized.unwrap();
        worst = worst.max((cd - base_cd).abs());
        ensure((cd - base_cd).abs() < 1e-9, || format!("normalized chamfer moved: {cd} vs {base_cd}"))?;
        ensure((moved.f_score - base.f_score).abs() < 1e-9, || "normalized F moved".into())?;
        ensure((moved.voxel_iou - base.voxel_iou).abs() < 1e-9, || "voxel IoU moved".into())?;
    }

    // Raw tau follows the reference bbox diagonal, which is not rigid
    // invariant, so F is checked at a fixed absolute tau on sampled clouds.
    let raw = MetricConfig { normalize: false, ..cfg };
    let raw_cd = compare_meshes(&generated, &reference, &raw).map_err(|e| e.to_string())?.chamfer_sq_normalized.unwrap();
    let clouds = |g: &Mesh, r: &Mesh| (sample_surface(g, 1024, 0), sample_surface(r, 1024, 0));
    let (p0, q0) = clouds(&generated, &reference);
    let f0 = f_score(&p0, &q0, 0.8).unwrap().f;
    for k in 0..8 {
        let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let r = rotation(axis, rng.random_range(0.0..2.0 * PI));
        let mv = |m: &Mesh| m.transformed(|p| mat_vec(&r, p) + shift);
        let (g, rf) = (mv(&generated), mv(&reference));
        let moved = compare_meshes(&g, &rf, &raw).map_err(|e| e.to_string())?;
        let cd = moved.chamfer_sq_normalized.unwrap();
        ensure(rel(cd, raw_cd) < 1e-9, || format!("rotation {k}: raw chamfer {cd} vs {raw_cd}"))?;
        let (p, q) = clouds(&g, &rf);
        let f = f_score(&p, &q, 0.8).unwrap().f;
        ensure((f - f0).abs() < 1e-9, || format!("rotation {k}: F {f} vs {f0}"))?;
    }
    Ok(format!(
        "symmetry, identity, monotone F; 24 axis rotations + shift max |dCD| {worst:.1e}; 8 arbitrary rotations on raw metrics"
    ))
}

// ---------------------------------------------------------------- fea

fn material(e: f64, density: f64) -> FeaMaterial<f64> {
    FeaMaterial {
        name: "m".into(),
        e,
        density,
        yield_strength: 250.0,
    }
}

fn member(i: usize, j: usize, area: f64, i_min: f64, mat: &FeaMaterial<f64>) -> Member<f64> {
    Member {
        i,
        j,
        area,
        i_min,
        material: mat.clone(),
    }
}

fn support(node: usize, fixed: [bool; 3]) -> Support {
    Support { node, fixed }
}

fn point_load(node: usize, f: Vec3<f64>) -> NodalLoad<f64> {
    NodalLoad {
        target: LoadTarget::Node(node),
        force: f,
    }
}

fn model(nodes: Vec<Vec3<f64>>, members: Vec<Member<f64>>, supports: Vec<Support>, loads: Vec<NodalLoad<f64>>) -> AnalysisModel<f64> {
    AnalysisModel {
        name: "oracle".into(),
        nodes,
        members,
        supports,
        node_sets: BTreeMap::new(),
        load_cases: vec![LoadCase {
            id: "LC1".into(),
            loads,
            acceleration_g: None,
        }],
        point_masses: Vec::new(),
    }
}

fn det3(c: [Vec3<f64>; 3]) -> f64 {
    c[0].dot(c[1].cross(c[2]))
}

/// Cramer's rule for `[c0 c1 c2] x = b`.
fn cramer3(c: [Vec3<f64>; 3], b: Vec3<f64>) -> [f64; 3] {
    let d = det3(c);
    [det3([b, c[1], c[2]]) / d, det3([c[0], b, c[2]]) / d, det3([c[0], c[1], b]) / d]
}

fn cramer2(a: [[f64; 2]; 2], b: [f64; 2]) -> [f64; 2] {
    let d = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [(b[0] * a[1][1] - a[0][1] * b[1]) / d, (a[0][0] * b[1] - b[0] * a[1][0]) / d]
}

fn fea_oracles() -> Check {
    let steel = material(200_000.0, 7850.0);
    let roller = [false, true, true];

    // Axial stress.
    let (area, force) = (123.4, 5678.9);
    let bar = model(
        vec![Vec3::of(0.0, 0.0, 0.0), Vec3::of(750.0, 0.0, 0.0)],
        vec![member(0, 1, area, 1000.0, &steel)],
        vec![support(0, [true; 3]), support(1, roller)],
        vec![point_load(1, Vec3::of(force, 0.0, 0.0))],
    );
    let s = solve_static(&bar, "LC1").map_err(|e| e.to_string())?;
    ensure(rel(s.stresses[0], force / area) < 1e-12, || format!("F/A: {} vs {}", s.stresses[0], force / area))?;

    // Two-bar planar truss.
    let (a_pt, b_pt, c_pt) = (Vec3::of(0.0, 0.0, 0.0), Vec3::of(400.0, 0.0, 0.0), Vec3::of(300.0, 0.0, 300.0));
    let f = Vec3::of(1000.0, 0.0, -2000.0);
    let area2 = 150.0;
    let two = model(
        vec![a_pt, b_pt, c_pt],
        vec![member(2, 0, area2, 1000.0, &steel), member(2, 1, area2, 1000.0, &steel)],
        vec![support(0, [true; 3]), support(1, [true; 3]), support(2, [false, true, false])],
        vec![point_load(2, f)],
    );
    let s = solve_static(&two, "LC1").map_err(|e| e.to_string())?;
    let (ea, eb) = ((a_pt - c_pt).normalize(), (b_pt - c_pt).normalize());
    let n = cramer2([[ea.x, eb.x], [ea.z, eb.z]], [-f.x, -f.z]);
    let (la, lb) = ((a_pt - c_pt).norm(), (b_pt - c_pt).norm());
    let stretch = [n[0] * la / (200_000.0 * area2), n[1] * lb / (200_000.0 * area2)];
    let u = cramer2([[-ea.x, -ea.z], [-eb.x, -eb.z]], stretch);
    for k in 0..2 {
        ensure(rel(s.axial_forces[k], n[k]) < 1e-9, || format!("two-bar N{k}: {} vs {}", s.axial_forces[k], n[k]))?;
    }
    let uc = s.displacements[2];
    ensure(rel(uc.x, u[0]) < 1e-9 && rel(uc.z, u[1]) < 1e-9, || format!("two-bar u: {uc:?} vs {u:?}"))?;

    // Euler: pinned-pinned, E 200 GPa, I 1e4 mm⁴, L 1 m.
    let p = 1000.0;
    let strut = model(
        vec![Vec3::of(0.0, 0.0, 0.0), Vec3::of(1000.0, 0.0, 0.0)],
        vec![member(0, 1, 100.0, 10_000.0, &steel)],
        vec![support(0, [true; 3]), support(1, roller)],
        vec![point_load(1, Vec3::of(-p, 0.0, 0.0))],
    );
    let s = solve_static(&strut, "LC1").map_err(|e| e.to_string())?;
    let lf = buckling_factors(&strut, &s).first_mode;
    let p_cr = PI * PI * 200_000.0 * 10_000.0 / (1000.0 * 1000.0);
    ensure((p_cr - 19739.0).abs() < 1.0, || format!("P_cr {p_cr}"))?;
    ensure(rel(lf, p_cr / p) < 1e-9, || format!("Euler LF {lf} vs {}", p_cr / p))?;

    // Single-dof spring-mass.
    let mut sdof = bar.clone();
    sdof.point_masses.push(PointMass { node: 1, mass_kg: 2.5 });
    let modal = first_frequency(&sdof).map_err(|e| e.to_string())?;
    let k_si = 200_000.0 * area / 750.0 * 1000.0;
    let m_lumped = 2.5 + 0.5 * 7850.0 * area * 750.0 * 1e-9;
    let f_oracle = (k_si / m_lumped).sqrt() / (2.0 * PI);
    ensure(rel(modal.frequency_hz, f_oracle) < 1e-6, || format!("frequency {} vs {f_oracle}", modal.frequency_hz))?;

    // Random constrained trusses: equilibrium and linearity.
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut worst_res, mut worst_lin) = (0.0f64, 0.0f64);
    for t in 0..100 {
        let free = rng.random_range(1..12);
        let mut nodes = vec![Vec3::of(0.0, 0.0, 0.0), Vec3::of(1000.0, 0.0, 0.0), Vec3::of(400.0, 900.0, 0.0)];
        let mut members = Vec::new();
        for _ in 0..free {
            let p = Vec3::new(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0), rng.random_range(200.0..1200.0));
            let id = nodes.len();
            let mut picks = BTreeSet::new();
            while picks.len() < 3 {
                picks.insert(rng.random_range(0..id));
            }
            for j in picks {
                members.push(member(j, id, rng.random_range(50.0..500.0), 5000.0, &steel));
            }
            nodes.push(p);
        }
        let loads: Vec<NodalLoad<f64>> = (3..nodes.len())
            .map(|i| point_load(i, Vec3::new(rng.random_range(-5e3..5e3), rng.random_range(-5e3..5e3), rng.random_range(-5e3..5e3))))
            .collect();
        let supports = (0..3).map(|i| support(i, [true; 3])).collect();
        let m = model(nodes, members, supports, loads.clone());
        let s = solve_static(&m, "LC1").map_err(|e| format!("truss {t}: {e}"))?;
        worst_res = worst_res.max(s.residual);
        ensure(s.residual < 1e-6, || format!("truss {t}: solver residual {}", s.residual))?;

        // Independent nodal balance from member forces.
        let mut net = vec![Vec3::zero(); m.nodes.len()];
        for l in &loads {
            if let LoadTarget::Node(i) = l.target {
                net[i] = net[i] + l.force;
            }
        }
        for (mem, n) in m.members.iter().zip(&s.axial_forces) {
            let e = (m.nodes[mem.j] - m.nodes[mem.i]).normalize();
            net[mem.i] = net[mem.i] + e * *n;
            net[mem.j] = net[mem.j] - e * *n;
        }
        let scale = loads.iter().map(|l| l.force.norm()).fold(0.0, f64::max);
        let imbalance = net[3..].iter().map(|v| v.norm()).fold(0.0, f64::max) / scale;
        ensure(imbalance < 1e-6, || format!("truss {t}: nodal imbalance {imbalance}"))?;

        let mut scaled = m.clone();
        for l in &mut scaled.load_cases[0].loads {
            l.force = l.force * 2.5;
        }
        let s2 = solve_static(&scaled, "LC1").map_err(|e| e.to_string())?;
        let umax = s.max_displacement();
        for (a, b) in s.displacements.iter().zip(&s2.displacements) {
            let d = (*b - *a * 2.5).norm() / (2.5 * umax);
            worst_lin = worst_lin.max(d);
        }
        ensure(worst_lin < 1e-9, || format!("truss {t}: linearity {worst_lin}"))?;
    }
    Ok(format!(
        "F/A, two-bar, P_cr {p_cr:.1} N, f {f_oracle:.3} Hz; 100 trusses max residual {worst_res:.1e}, linearity {worst_lin:.1e}"
    ))
}

// ---------------------------------------------------------------- grading

/// Tripod roll-cage hand solution: member forces by Cramer's rule on apex
/// equilibrium, apex deflection from the 3x3 stiffness.
struct TripodOracle {
    stress: BTreeMap<String, f64>,
    deflection: BTreeMap<String, f64>,
    load_factor_lc4: f64,
}

fn tripod_oracle(wall: f64) -> TripodOracle {
    let (od, e_mod) = (25.4, 205_000.0);
    let id = od - 2.0 * wall;
    let area = PI / 4.0 * (od * od - id * id);
    let i_min = PI / 64.0 * (od.powi(4) - id.powi(4));
    let apex = Vec3::of(0.0, 0.0, 900.0);
    let bases = [90.0f64, 210.0, 330.0].map(|deg| {
        let t = deg.to_radians();
        Vec3::of(600.0 * t.cos(), 600.0 * t.sin(), 0.0)
    });
    let len = (bases[0] - apex).norm();
    let e = bases.map(|b| (b - apex).normalize());
    let loads = [
        ("LC1", Vec3::of(-12000.0, 0.0, -3000.0)),
        ("LC2", Vec3::of(0.0, 9000.0, -3000.0)),
        ("LC3", Vec3::of(0.0, 0.0, 9000.0)),
        ("LC4", Vec3::of(2000.0, 1500.0, -15000.0)),
    ];
    let k_axial = e_mod * area / len;
    let mut stress = BTreeMap::new();
    let mut deflection = BTreeMap::new();
    let mut load_factor_lc4 = f64::INFINITY;
    for (lc, f) in loads {
        let n = cramer3(e, f * -1.0);
        stress.insert(lc.to_string(), n.iter().map(|x| x.abs()).fold(0.0, f64::max) / area);
        // Rows of K = k Σ e eᵀ as columns (K is symmetric).
        let col = |c: usize| {
            let mut v = Vec3::zero();
            for ek in &e {
                let s = [ek.x, ek.y, ek.z][c] * k_axial;
                v = v + *ek * s;
            }
            v
        };
        let u = cramer3([col(0), col(1), col(2)], f);
        deflection.insert(lc.to_string(), Vec3::of(u[0], u[1], u[2]).norm());
        if lc == "LC4" {
            let p_cr = PI * PI * e_mod * i_min / (len * len);
            for nk in n.iter().filter(|x| **x < 0.0) {
                load_factor_lc4 = load_factor_lc4.min(p_cr / nk.abs());
            }
        }
    }
    TripodOracle {
        stress,
        deflection,
        load_factor_lc4,
    }
}

fn scope_margins(v: &Verdict) -> BTreeMap<String, Option<f64>> {
    v.scopes.iter().map(|s| (s.scope.clone(), s.margin)).collect()
}

fn check_tripod(variant: &str, wall: f64, pattern: [Status; 4]) -> std::result::Result<f64, String> {
    let cv = grade_fixture("baja", variant);
    let got: Vec<Status> = cv.verdicts.iter().map(|v| v.status).collect();
    ensure(got == pattern, || format!("{variant}: pattern {got:?}, want {pattern:?}"))?;
    ensure(cv.strict_pass == pattern.iter().all(|s| *s == Status::Pass), || format!("{variant}: strict flag"))?;

    let o = tripod_oracle(wall);
    let mut want: BTreeMap<&str, BTreeMap<String, Option<f64>>> = BTreeMap::new();
    want.insert("R1", [("design".to_string(), Some(1e-3))].into());
    want.insert(
        "R2",
        o.stress.iter().map(|(lc, s)| (lc.clone(), Some((246.7 - s) / 246.7))).collect(),
    );
    want.insert(
        "R3",
        ["LC1", "LC4"]
            .iter()
            .map(|lc| (lc.to_string(), Some((25.0 - o.deflection[*lc]) / 25.0)))
            .collect(),
    );
    want.insert("R4", [("LC4".to_string(), Some((o.load_factor_lc4 - 1.5) / 1.5))].into());

    // The brief thresholds applied to the hand values give the same pattern.
    let implied: Vec<Status> = ["R1", "R2", "R3", "R4"]
        .iter()
        .map(|r| {
            if want[r].values().all(|m| m.unwrap() >= 0.0) {
                Status::Pass
            } else {
                Status::Fail
            }
        })
        .collect();
    ensure(implied == pattern, || format!("{variant}: hand pattern {implied:?}"))?;

    let mut worst = 0.0f64;
    for v in &cv.verdicts {
        let got = scope_margins(v);
        let exp = &want[v.id.as_str()];
        ensure(got.keys().eq(exp.keys()), || format!("{variant} {}: scopes {:?}", v.id, got.keys()))?;
        for (scope, m) in exp {
            let (g, m) = (got[scope].unwrap(), m.unwrap());
            worst = worst.max(rel(g, m));
            ensure(rel(g, m) < 1e-9, || format!("{variant} {} {scope}: margin {g} vs hand {m}", v.id))?;
        }
        let worst_margin = exp.values().map(|m| m.unwrap()).fold(f64::INFINITY, f64::min);
        ensure(rel(v.margin.unwrap(), worst_margin) < 1e-9, || format!("{variant} {}: case margin", v.id))?;
    }
    Ok(worst)
}

fn roll_cage() -> Check {
    use Status::{Fail, Pass};
    let a = check_tripod("passing", 3.05, [Pass, Pass, Pass, Pass])?;
    let b = check_tripod("failing_stress", 0.5, [Pass, Fail, Pass, Fail])?;
    Ok(format!("passing and failing_stress patterns; margins vs hand max rel err {:.1e}", a.max(b)))
}

fn verdict(id: usize, status: Status) -> Verdict {
    Verdict {
        id: format!("R{id}"),
        metric: "m".into(),
        key: "m".into(),
        status,
        operator: "<=".into(),
        limit: 1.0,
        unit: "mm".into(),
        tolerance: None,
        measured: None,
        margin: None,
        worst_scope: None,
        provenance: None,
        binding_note: None,
        scopes: Vec::new(),
    }
}

fn grading_semantics() -> Check {
    use Status::*;
    let all = [Pass, Fail, Unbound, SolverError, NotEvaluable];
    let mut combos = 0;
    for len in 1..=4u32 {
        for code in 0..5usize.pow(len) {
            let statuses: Vec<Status> = (0..len).map(|k| all[code / 5usize.pow(k) % 5]).collect();
            let cv = CaseVerdict::from_verdicts(
                "c",
                statuses.iter().enumerate().map(|(k, s)| verdict(k + 1, *s)).collect(),
            );
            let evaluable: Vec<&Status> = statuses.iter().filter(|s| **s != NotEvaluable).collect();
            let blocked = statuses.iter().any(|s| matches!(s, Unbound | SolverError));
            let strict = evaluable.iter().all(|s| **s == Pass) && !blocked;
            ensure(cv.strict_pass == strict, || format!("{statuses:?}: strict {}", cv.strict_pass))?;
            let frac = if evaluable.is_empty() {
                1.0
            } else {
                evaluable.iter().filter(|s| ***s == Pass).count() as f64 / evaluable.len() as f64
            };
            ensure(cv.req_pass_fraction == frac, || format!("{statuses:?}: fraction {}", cv.req_pass_fraction))?;
            combos += 1;
        }
    }

    // Baja passing 4/4, bracket failing_stress 1/5, enclosure failing_unbound
    // 2/3 with four requirements not evaluable.
    let cases = vec![
        grade_fixture("baja", "passing"),
        grade_fixture("bracket", "failing_stress"),
        grade_fixture("enclosure", "failing_unbound"),
    ];
    let fr: Vec<f64> = cases.iter().map(|c| c.req_pass_fraction).collect();
    ensure(fr == [1.0, 1.0 / 5.0, 2.0 / 3.0], || format!("fractions {fr:?}"))?;
    ensure(cases[2].not_evaluable_count == 4, || "enclosure not-evaluable count".into())?;
    let groups: BTreeMap<String, String> = [
        ("baja", "competition"),
        ("bracket", "aerospace"),
        ("enclosure", "aerospace"),
    ]
    .iter()
    .map(|(c, g)| (c.to_string(), g.to_string()))
    .collect();
    let g = grade_suite(&cases, &groups).map_err(|e| e.to_string())?;
    let hand = (1.0 + 1.0 / 5.0 + 2.0 / 3.0) / 3.0;
    ensure(g.overall.mean_req_pass == hand, || format!("mean {} vs {hand}", g.overall.mean_req_pass))?;
    ensure(g.overall.strict == "1/3", || format!("strict {}", g.overall.strict))?;
    let aero = g.groups.iter().find(|x| x.group == "aerospace").unwrap();
    ensure(aero.mean_req_pass == (1.0 / 5.0 + 2.0 / 3.0) / 2.0 && aero.strict == "0/2", || "aerospace group".into())?;
    let mut rev = cases.clone();
    rev.reverse();
    ensure(grade_suite(&rev, &groups).unwrap() == g, || "order dependence".into())?;
    Ok(format!("{combos} status combinations; 3-case suite mean {hand:.6}, strict 1/3"))
}

// ---------------------------------------------------------------- loop

fn copy_variant(case: &str, variant: &str, out: &Path) -> heph_core::Result<()> {
    fs::create_dir_all(out).map_err(|e| heph_core::Error::io(out, e))?;
    for e in fs::read_dir(fixtures().join(case).join(variant)).map_err(|e| heph_core::Error::io(out, e))? {
        let e = e.map_err(|e| heph_core::Error::io(out, e))?;
        if e.file_name() != "expected.v1" {
            fs::copy(e.path(), out.join(e.file_name())).map_err(|err| heph_core::Error::io(e.path(), err))?;
        }
    }
    Ok(())
}

fn contract_flip() -> Check {
    let agent = ScriptedAgent {
        step: |ctx: &AgentContext| -> heph_core::Result<()> {
            let out = ctx.output();
            copy_variant("bracket", "failing_unbound", &out)?;
            if ctx.attempt >= 2 {
                let path = out.join("artifact_manifest.v1");
                let text = fs::read_to_string(&path).map_err(|e| heph_core::Error::io(&path, e))?;
                let mut doc: serde_json::Value = serde_json::from_str(&text).expect("manifest is JSON");
                doc["aliases"] = serde_json::json!({ "bracket_mass_kg": "mass" });
                fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).map_err(|e| heph_core::Error::io(&path, e))?;
            }
            Ok(())
        },
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = LoopConfig {
        schedule: Schedule {
            rich_view_from: Some(2),
            deep_from: Some(2),
        },
        render: small_render(),
        ..LoopConfig::default()
    };
    let recs = run_case(&brief("bracket"), &agent, &cfg, dir.path()).map_err(|e| e.to_string())?;
    ensure(recs.len() == 2 && recs[1].verdict.strict_pass, || format!("{} attempts, no strict pass", recs.len()))?;
    let r4 = |r: &AttemptRecord| r.verdict.verdict("R4").unwrap().status;
    ensure(r4(&recs[0]) == Status::Unbound && r4(&recs[1]) == Status::Pass, || "R4 did not flip".into())?;
    for f in ["output/part.obj", "output/model.yaml"] {
        ensure(recs[0].artifact_hashes[f] == recs[1].artifact_hashes[f], || format!("{f} changed"))?;
    }
    let fb = parse_feedback(&recs[1].workspace.join("input").join(FEEDBACK_FILE)).map_err(|e| e.to_string())?;
    ensure(fb.level == FeedbackLevel::Deep, || "attempt-2 feedback not deep".into())?;
    let issue = fb.issues.iter().find(|i| i.id == "R4").ok_or("no R4 issue")?;
    ensure(issue.key.as_deref() == Some("mass"), || format!("R4 issue key {:?}", issue.key))?;
    Ok("R4 unbound -> pass, geometry hashes unchanged, deep feedback names `mass`".into())
}

fn stub(case: &str, steps: &str) -> CommandAgent {
    let fx = fixtures();
    CommandAgent::new(format!("sh {0}/stub_agent.sh {0}/{case} {steps}", fx.display()))
}

fn loop_schedule() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = LoopConfig {
        max_attempts: 7,
        render: small_render(),
        ..LoopConfig::default()
    };
    let recs = run_case(&brief("baja"), &stub("baja", "failing_unbound"), &cfg, dir.path()).map_err(|e| e.to_string())?;
    ensure(recs.len() == 7, || format!("{} attempts", recs.len()))?;
    let input = |k: usize| recs[k - 1].workspace.join("input");
    ensure(input(1).join(BRIEF_FILE).is_file() && !input(1).join(FEEDBACK_FILE).exists(), || "attempt-1 input".into())?;
    let views = input(2).join(VIEWS_DIR);
    let mut names: Vec<String> = fs::read_dir(&views)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let mut want: Vec<String> = VIEW_NAMES.iter().map(|n| format!("{n}.ppm")).collect();
    want.push(VIEWS_MANIFEST_FILE.into());
    want.sort();
    ensure(names == want, || format!("attempt-2 views: {names:?}"))?;
    let level = |k: usize| parse_feedback(&input(k).join(FEEDBACK_FILE)).map(|f| f.level).map_err(|e| e.to_string());
    ensure(level(2)? == FeedbackLevel::Basic, || "attempt-2 feedback not basic".into())?;
    ensure(level(6)? == FeedbackLevel::Basic, || "attempt-6 feedback not basic".into())?;
    ensure(level(7)? == FeedbackLevel::Deep, || "attempt-7 feedback not deep".into())?;
    Ok("attempt 2: 21 views + manifest, basic feedback; attempt 7: deep feedback".into())
}

// ---------------------------------------------------------------- views

fn read_ppm(path: &Path) -> std::result::Result<(usize, usize, Vec<u8>), String> {
    let bytes = fs::read(path).map_err(|e| e.to_string())?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    let (w, h) = (fields[1].parse().unwrap(), fields[2].parse().unwrap());
    Ok((w, h, bytes[pos + 1..].to_vec()))
}

fn silhouette_width(img: &(usize, usize, Vec<u8>), bg: [u8; 3]) -> f64 {
    let (w, h, rgb) = img;
    let (mut lo, mut hi) = (usize::MAX, 0);
    for y in 0..*h {
        for x in 0..*w {
            let p = &rgb[3 * (y * w + x)..3 * (y * w + x) + 3];
            if p != bg {
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
    }
    (hi + 1 - lo) as f64
}

fn rich_views() -> Check {
    let outer: Mesh = box_mesh(Vec3::splat(-1.0), Vec3::splat(1.0));
    let inner: Mesh = box_mesh(Vec3::splat(-0.4), Vec3::splat(0.4));
    let mesh = TriMesh::merge("nested", &[outer, inner]);
    let cfg = RenderConfig::default();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let manifest = render_bundle(&mesh, a.path(), &cfg).map_err(|e| e.to_string())?;
    render_bundle(&mesh, b.path(), &cfg).map_err(|e| e.to_string())?;

    let names: BTreeSet<String> = manifest.views.iter().map(|v| v.name.clone()).collect();
    let want: BTreeSet<String> = VIEW_NAMES.iter().map(|s| s.to_string()).collect();
    ensure(manifest.views.len() == 21 && names == want, || format!("view names {names:?}"))?;
    let files: BTreeSet<String> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".ppm"))
        .collect();
    ensure(files.len() == 21, || format!("{} image files", files.len()))?;
    for f in &files {
        ensure(fs::read(a.path().join(f)).unwrap() == fs::read(b.path().join(f)).unwrap(), || format!("{f} differs"))?;
    }

    let img = |n: &str| read_ppm(&a.path().join(format!("{n}.ppm")));
    let mut worst = 0.0f64;
    for v in view_set().iter().filter(|v| v.group == ViewGroup::Closeup) {
        let base = v.name.strip_suffix("_close").unwrap();
        let ratio = silhouette_width(&img(&v.name)?, cfg.background) / silhouette_width(&img(base)?, cfg.background);
        let err = (ratio / v.zoom - 1.0).abs();
        worst = worst.max(err);
        ensure(err <= 0.02, || format!("{}: silhouette ratio {ratio} for zoom {}", v.name, v.zoom))?;
    }

    // Through the outer shell the inner body must change the pixels.
    let (w, h) = (cfg.width, cfg.height);
    for base in ["front", "right", "iso"] {
        let (opaque, xray) = (img(base)?, img(&format!("{base}_xray"))?);
        let px = |im: &(usize, usize, Vec<u8>), x: usize, y: usize| im.2[3 * (y * w + x)..3 * (y * w + x) + 3].to_vec();
        if base != "iso" {
            let (cx, cy) = (w / 2, h / 2);
            let (ox, oy) = (cx + h / 16, cy + h / 16);
            ensure(px(&opaque, cx, cy) == px(&opaque, ox, oy), || format!("{base}: opaque view shows the inner body"))?;
            ensure(px(&xray, cx, cy) != px(&xray, ox, oy), || format!("{base}_xray: inner body hidden"))?;
        }
        let differing = (0..w * h).filter(|i| opaque.2[3 * i..3 * i + 3] != xray.2[3 * i..3 * i + 3]).count();
        ensure(differing > 0, || format!("{base}: x-ray identical to opaque"))?;
    }
    Ok(format!("21 named views at {w}x{h}, byte-identical re-render, zoom error max {:.2}%, x-ray reveals inner body", worst * 100.0))
}

// ---------------------------------------------------------------- determinism

fn suite_fingerprint(root: &Path, jobs: usize) -> std::result::Result<String, String> {
    let cases: Vec<SuiteCase> = CASES
        .iter()
        .map(|c| SuiteCase {
            brief: brief(c),
            group: if *c == "baja" { "competition".into() } else { "aerospace".into() },
        })
        .collect();
    let fx = fixtures();
    let agent = CommandAgent::new(format!(
        "sh {0}/stub_agent.sh {0}/$HEPH_CASE_ID failing_unbound failing_stress passing",
        fx.display()
    ));
    let cfg = LoopConfig {
        jobs,
        render: small_render(),
        ..LoopConfig::default()
    };
    let out = run_suite(&cases, &agent, &cfg, root).map_err(|e| e.to_string())?;
    let mut s = serde_json::to_string(&out.grade).unwrap();
    s += &serde_json::to_string(&out.per_attempt).unwrap();
    for r in &out.scaling.rows {
        s += &format!("{},{},{},{},{}\n", r.case_id, r.attempt, r.req_pass_fraction, r.strict, r.termination);
    }
    s += &serde_json::to_string(&out.scaling.rollup).unwrap();
    for (id, recs) in &out.records {
        for r in recs {
            s += &format!("{id}/{} {:?} {:?}\n", r.attempt, r.termination, r.inputs);
            s += &serde_json::to_string(&r.verdict).unwrap();
            s += &serde_json::to_string(&r.artifact_hashes).unwrap();
        }
    }
    for f in ["suite_grade.v1"] {
        s += &fs::read_to_string(root.join(f)).map_err(|e| format!("{f}: {e}"))?;
    }
    Ok(s)
}

fn determinism() -> Check {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let one = suite_fingerprint(a.path(), 1)?;
    let eight = suite_fingerprint(b.path(), 8)?;
    ensure(one == eight, || "jobs=1 and jobs=8 outcomes differ".into())?;
    Ok(format!("4 cases, jobs 1 vs 8 identical ({} byte fingerprint, wall-clock columns excluded)", one.len()))
}

// ---------------------------------------------------------------- robustness

fn mutate(rng: &mut ChaCha8Rng, seed: &[u8]) -> Vec<u8> {
    let mut v = seed.to_vec();
    for _ in 0..rng.random_range(1..8) {
        match rng.random_range(0..4) {
            0 if !v.is_empty() => {
                let i = rng.random_range(0..v.len());
                v[i] = rng.random();
            }
            1 if !v.is_empty() => {
                let i = rng.random_range(0..v.len());
                let j = (i + rng.random_range(0..32)).min(v.len());
                v.drain(i..j);
            }
            2 => {
                let i = rng.random_range(0..=v.len());
                let chunk: Vec<u8> = (0..rng.random_range(1..16)).map(|_| rng.random()).collect();
                v.splice(i..i, chunk);
            }
            _ => {
                let i = rng.random_range(0..=v.len());
                let tok: &[u8] = [&b": "[..], b"\n- ", b"{", b"[", b"&a ", b"*a", b"!!binary ", b"'", b"1e999", b"-"]
                    [rng.random_range(0..10)];
                v.splice(i..i, tok.iter().copied());
            }
        }
    }
    v
}

fn fuzz_parsers() -> Check {
    let report = evaluate_path(&brief("baja"), &fixtures().join("baja/passing"), &EvalOptions::default())
        .report
        .ok_or("no solver report")?;
    let report_bytes = serde_json::to_vec_pretty(&report).map_err(|e| e.to_string())?;
    let blueprint_bytes = fs::read(fixtures().join("baja/blueprint.yaml")).map_err(|e| e.to_string())?;
    let brief_seeds: Vec<Vec<u8>> = CASES.iter().map(|c| brief_text(c).unwrap().as_bytes().to_vec()).collect();

    let prev = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut rng = ChaCha8Rng::seed_from_u64(97);
    let mut crashes = Vec::new();
    const N: usize = 100_000;
    for k in 0..N {
        let pick = k % 3;
        let input: Vec<u8> = if rng.random_bool(0.5) {
            (0..rng.random_range(0..256)).map(|_| rng.random()).collect()
        } else {
            let seed = match pick {
                0 => &brief_seeds[rng.random_range(0..brief_seeds.len())],
                1 => &blueprint_bytes,
                _ => &report_bytes,
            };
            mutate(&mut rng, seed)
        };
        let r = catch_unwind(AssertUnwindSafe(|| match pick {
            0 => {
                let _ = parse_brief_bytes(&input, "fuzz");
            }
            1 => {
                let _ = parse_blueprint_bytes(&input);
            }
            _ => {
                let _ = parse_solver_report_bytes(&input);
            }
        }));
        if r.is_err() && crashes.len() < 5 {
            crashes.push((pick, String::from_utf8_lossy(&input).into_owned()));
        }
    }
    std::panic::set_hook(prev);
    ensure(crashes.is_empty(), || format!("panics: {crashes:?}"))?;
    Ok(format!("{N} inputs across brief, blueprint and solver-report parsers, zero panics"))
}

// ---------------------------------------------------------------- runner

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Check, Option<Duration>);
    let criteria: [Criterion; 10] = [
        ("metric equations", metric_equations, Some(Duration::from_secs(30))),
        ("metric invariants", metric_invariants, Some(Duration::from_secs(10))),
        ("roll-cage reproduction", roll_cage, Some(Duration::from_secs(5))),
        ("truss solver oracles", fea_oracles, Some(Duration::from_secs(60))),
        ("grading semantics", grading_semantics, None),
        ("contract-repair flip", contract_flip, Some(Duration::from_secs(5))),
        ("loop schedule", loop_schedule, None),
        ("rich-view contract", rich_views, Some(Duration::from_secs(30))),
        ("end-to-end determinism", determinism, Some(Duration::from_secs(60))),
        ("parser robustness", fuzz_parsers, None),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let out = catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        let out = match (out, budget) {
            (Ok(_), Some(b)) if t.elapsed() > b => Err(format!("took {secs:.1}s, budget {}s", b.as_secs())),
            (o, _) => o,
        };
        match out {
            Ok(detail) => println!("PASS  {name:<24} {secs:>6.2}s  {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<24} {secs:>6.2}s  {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
