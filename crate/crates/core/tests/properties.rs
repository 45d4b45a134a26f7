use std::collections::BTreeMap;

use proptest::prelude::*;

use heph_core::brief::{parse_brief_bytes, Operator};
use heph_core::checker::{convert, grade_suite, margin, AliasTable, CaseVerdict, Entry, MetricNamespace, Provenance, Status, Verdict};
use heph_core::fea::{solve_static, AnalysisModel, FeaMaterial, LoadCase, LoadTarget, Member, NodalLoad, Support};
use heph_core::geom::Vec3;
use heph_core::mesh::shapes::box_mesh;
use heph_core::mesh::{load_mesh_bytes, to_obj, validity, MeshFormat};
use heph_core::metrics::{chamfer, chamfer_with, f_score, Strategy as Search};
use heph_core::{Mesh, Point};

fn cloud(max: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64, -100.0..100.0f64), 1..max)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect())
}

fn operator() -> impl Strategy<Value = Operator> {
    prop_oneof![Just(Operator::Le), Just(Operator::Ge), Just(Operator::Eq)]
}

fn status() -> impl Strategy<Value = Status> {
    prop_oneof![
        Just(Status::Pass),
        Just(Status::Fail),
        Just(Status::Unbound),
        Just(Status::SolverError),
        Just(Status::NotEvaluable),
    ]
}

fn provenance() -> impl Strategy<Value = Provenance> {
    prop_oneof![
        Just(Provenance::Solver),
        Just(Provenance::MeshDerived),
        Just(Provenance::Declared),
        Just(Provenance::Claim),
    ]
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

fn case(id: String, statuses: &[Status]) -> CaseVerdict {
    CaseVerdict::from_verdicts(&id, statuses.iter().enumerate().map(|(k, s)| verdict(k + 1, *s)).collect())
}

fn tripod(load: Vec3<f64>) -> AnalysisModel<f64> {
    let steel = FeaMaterial {
        name: "steel".into(),
        e: 200_000.0,
        density: 7850.0,
        yield_strength: 250.0,
    };
    let nodes = vec![
        Vec3::of(0.0, 0.0, 900.0),
        Vec3::of(0.0, 600.0, 0.0),
        Vec3::of(-519.6, -300.0, 0.0),
        Vec3::of(519.6, -300.0, 0.0),
    ];
    AnalysisModel {
        name: "tripod".into(),
        nodes,
        members: (1..4)
            .map(|j| Member {
                i: 0,
                j,
                area: 200.0,
                i_min: 1.0e4,
                material: steel.clone(),
            })
            .collect(),
        supports: (1..4).map(|node| Support { node, fixed: [true; 3] }).collect(),
        node_sets: BTreeMap::new(),
        load_cases: vec![LoadCase {
            id: "LC1".into(),
            loads: vec![NodalLoad {
                target: LoadTarget::Node(0),
                force: load,
            }],
            acceleration_g: None,
        }],
        point_masses: Vec::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn margin_sign_matches_satisfaction(op in operator(), v in -1e4..1e4f64, l in prop_oneof![-1e4..-1e-3f64, 1e-3..1e4f64], tol in 0.0..0.1f64) {
        let m = margin(op, v, l, tol).unwrap();
        let ok = match op {
            Operator::Le => v <= l,
            Operator::Ge => v >= l,
            Operator::Eq => (v - l).abs() / l.abs() <= tol,
        };
        // Away from the boundary the sign decides.
        if m.abs() > 1e-12 {
            prop_assert_eq!(m >= 0.0, ok);
        }
    }

    #[test]
    fn margin_is_none_only_for_infinite_values(op in operator(), l in 1.0..100.0f64) {
        prop_assert!(margin(op, f64::INFINITY, l, 1e-3).is_none());
        prop_assert!(margin(op, f64::NEG_INFINITY, l, 1e-3).is_none());
        prop_assert!(margin(op, l, l, 1e-3).unwrap() >= 0.0);
    }

    #[test]
    fn higher_provenance_wins_regardless_of_order(a in provenance(), b in provenance(), x in 0.0..100.0f64, y in 0.0..100.0f64) {
        prop_assume!(a != b);
        let entry = |p: Provenance, v: f64| Entry { value: v, unit: "kg".into(), provenance: p, source: p.as_str().into() };
        let mut fwd = MetricNamespace::new(AliasTable::builtin());
        fwd.insert("design", "dry_mass", entry(a, x)).unwrap();
        fwd.insert("design", "mass", entry(b, y)).unwrap();
        let mut rev = MetricNamespace::new(AliasTable::builtin());
        rev.insert("design", "mass", entry(b, y)).unwrap();
        rev.insert("design", "dry_mass", entry(a, x)).unwrap();
        let want = if a < b { (a, x) } else { (b, y) };
        for ns in [&fwd, &rev] {
            let got = ns.get("design", "self_weight_kg").unwrap();
            prop_assert_eq!((got.provenance, got.value), want);
        }
    }

    #[test]
    fn same_level_conflicts_are_ambiguous(p in provenance(), x in 0.0..100.0f64, d in 0.001..10.0f64) {
        let entry = |v: f64| Entry { value: v, unit: "mm".into(), provenance: p, source: "s".into() };
        let mut ns = MetricNamespace::new(AliasTable::default());
        ns.insert("LC1", "k", entry(x)).unwrap();
        prop_assert!(ns.insert("LC1", "k", entry(x)).is_ok());
        prop_assert!(ns.insert("LC1", "k", entry(x + d)).is_err());
    }

    #[test]
    fn alias_resolution_is_idempotent(chain in prop::collection::vec("[a-z]{1,4}", 1..6)) {
        let mut t = AliasTable::default();
        for w in chain.windows(2) {
            let _ = t.add(&w[0], &w[1]);
        }
        for name in &chain {
            let once = t.resolve(name).to_string();
            prop_assert_eq!(t.resolve(&once), once.as_str());
        }
    }

    #[test]
    fn unit_conversion_round_trips(v in -1e6..1e6f64, pair in prop_oneof![Just(("mm", "in")), Just(("MPa", "GPa")), Just(("kg", "g")), Just(("N", "kN")), Just(("Hz", "kHz"))]) {
        let there = convert(v, pair.0, pair.1).unwrap();
        let back = convert(there, pair.1, pair.0).unwrap();
        prop_assert!((back - v).abs() <= 1e-9 * v.abs().max(1.0));
        prop_assert!(convert(v, "mm", "MPa").is_none());
    }

    #[test]
    fn chamfer_symmetric_nonnegative_and_index_exact(p in cloud(200), q in cloud(200)) {
        let a = chamfer(&p, &q).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert_eq!(a, chamfer(&q, &p).unwrap());
        prop_assert_eq!(chamfer_with(&p, &q, Search::KdTree).unwrap(), chamfer_with(&p, &q, Search::BruteForce).unwrap());
        prop_assert_eq!(chamfer(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn f_score_bounded_and_monotone(p in cloud(120), q in cloud(120), t1 in 0.1..50.0f64, dt in 0.0..50.0f64) {
        let lo = f_score(&p, &q, t1).unwrap();
        let hi = f_score(&p, &q, t1 + dt).unwrap();
        prop_assert!((0.0..=1.0).contains(&lo.f));
        prop_assert!(hi.f >= lo.f && hi.precision >= lo.precision && hi.recall >= lo.recall);
        let swapped = f_score(&q, &p, t1).unwrap();
        prop_assert_eq!((lo.precision, lo.recall, lo.f), (swapped.recall, swapped.precision, swapped.f));
    }

    #[test]
    fn strict_pass_definition(statuses in prop::collection::vec(status(), 0..12)) {
        let cv = case("c".into(), &statuses);
        let blocked = statuses.iter().any(|s| matches!(s, Status::Unbound | Status::SolverError));
        let all_pass = statuses.iter().filter(|s| **s != Status::NotEvaluable).all(|s| *s == Status::Pass);
        prop_assert_eq!(cv.strict_pass, all_pass && !blocked);
        prop_assert!((0.0..=1.0).contains(&cv.req_pass_fraction));
        prop_assert_eq!(cv.evaluable_count + cv.not_evaluable_count, statuses.len());
    }

    #[test]
    fn suite_grade_ignores_case_order(sets in prop::collection::vec(prop::collection::vec(status(), 1..6), 1..8), rot in 0usize..8) {
        let cases: Vec<CaseVerdict> = sets.iter().enumerate().map(|(k, s)| case(format!("c{k}"), s)).collect();
        let groups: BTreeMap<String, String> = (0..cases.len()).map(|k| (format!("c{k}"), format!("g{}", k % 2))).collect();
        let mut rotated = cases.clone();
        rotated.rotate_left(rot % cases.len());
        let a = grade_suite(&cases, &groups).unwrap();
        prop_assert_eq!(&a, &grade_suite(&rotated, &groups).unwrap());
        let strict = cases.iter().filter(|c| c.strict_pass).count();
        prop_assert_eq!(a.overall.strict_count, strict);
    }

    #[test]
    fn truss_response_is_linear_and_balanced(fx in -1e4..1e4f64, fy in -1e4..1e4f64, fz in -1e4..1e4f64, k in -5.0..5.0f64) {
        prop_assume!(fx.abs() + fy.abs() + fz.abs() > 1.0);
        let f = Vec3::of(fx, fy, fz);
        let a = solve_static(&tripod(f), "LC1").unwrap();
        let b = solve_static(&tripod(f * k), "LC1").unwrap();
        prop_assert!(a.residual < 1e-9);
        let scale = a.max_displacement().max(1e-30);
        for (u, v) in a.displacements.iter().zip(&b.displacements) {
            prop_assert!((*v - *u * k).norm() <= 1e-9 * scale * k.abs().max(1.0));
        }
        let net = a.reaction_sum + a.applied_sum;
        prop_assert!(net.norm() <= 1e-9 * f.norm());
    }

    #[test]
    fn boxes_round_trip_through_obj(x in 0.5..50.0f64, y in 0.5..50.0f64, z in 0.5..50.0f64) {
        let m: Mesh = box_mesh(Vec3::zero(), Vec3::of(x, y, z));
        let back: Mesh = load_mesh_bytes(to_obj(&m).as_bytes(), Some(MeshFormat::Obj), "box").unwrap();
        prop_assert!(validity(&back).valid_solid);
        prop_assert_eq!(back.triangles.len(), 12);
    }

    #[test]
    fn brief_parser_never_panics(text in "\\PC{0,200}") {
        let _ = parse_brief_bytes(text.as_bytes(), "fuzz");
    }
}
