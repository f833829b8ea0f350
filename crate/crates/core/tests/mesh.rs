use dgfem::io::{mesh_to_string, parse_mesh};
use dgfem::mesh::{simplex_gamma, validate_conformity, Seed, Violation};
use dgfem::refine::{bisect, bisect_uniform, nvb_similarity_classes};
use dgfem::{BoxDomain, Error, Triangulation};
use proptest::prelude::*;

fn unit(dim: usize, m: usize) -> Triangulation {
    Triangulation::kuhn(dim, m, BoxDomain::unit()).unwrap()
}

fn node_at(mesh: &Triangulation, x: [f64; 3]) -> usize {
    (0..mesh.num_nodes())
        .find(|&i| (0..3).all(|k| (mesh.point(i)[k] - x[k]).abs() < 1e-12))
        .unwrap()
}

#[test]
fn kuhn_counts() {
    let m = unit(2, 1);
    assert_eq!((m.num_cells(), m.num_nodes()), (2, 4));
    let m = unit(3, 1);
    assert_eq!((m.num_cells(), m.num_nodes()), (6, 8));
    let m = unit(2, 2);
    assert_eq!((m.num_cells(), m.num_nodes()), (8, 9));
    let m = unit(3, 3);
    assert_eq!((m.num_cells(), m.num_nodes()), (6 * 27, 64));
    assert!(matches!(Triangulation::kuhn(4, 1, BoxDomain::unit()), Err(Error::UnsupportedDimension(4))));
}

#[test]
fn kuhn_volume_and_boundary() {
    for dim in [2, 3] {
        let m = unit(dim, 4);
        assert!((m.total_volume() - 1.0).abs() < 1e-13);
        let interior = (0..m.num_nodes()).filter(|&i| !m.is_boundary(i)).count();
        assert_eq!(interior, 3usize.pow(dim as u32));
        assert!(m.validate().is_conforming());
    }
}

#[test]
fn gamma_of_reference_shapes() {
    let right = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
    let g = simplex_gamma(&right, 2).unwrap();
    assert!((g - (2.0 + 2.0 * 2f64.sqrt())).abs() < 1e-12);

    let s3 = 3f64.sqrt();
    let equi = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, s3 / 2.0, 0.0]];
    assert!((simplex_gamma(&equi, 2).unwrap() - 2.0 * s3).abs() < 1e-12);

    let tet = [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.5, s3 / 2.0, 0.0],
        [0.5, s3 / 6.0, (2.0f64 / 3.0).sqrt()],
    ];
    assert!((simplex_gamma(&tet, 3).unwrap() - 2.0 * 6f64.sqrt()).abs() < 1e-12);

    let flat = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
    assert!(matches!(simplex_gamma(&flat, 2), Err(Error::DegenerateElement { .. })));
}

#[test]
fn patches_of_square_corners() {
    let m = unit(2, 1);
    let mut total = 0;
    for c in [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]] {
        let p = m.patch(node_at(&m, c));
        assert!(p.len() == 1 || p.len() == 2);
        total += p.len();
    }
    assert_eq!(total, 6);
}

#[test]
fn neighborhood_queries() {
    let m = unit(2, 8);
    let all = m.neighborhood(Seed::Ball {
        center: [0.5, 0.5, 0.0],
        radius: 2f64.sqrt(),
    });
    assert_eq!(all.len(), m.num_cells());
    let far = m.neighborhood(Seed::Ball {
        center: [5.0, 5.0, 0.0],
        radius: 0.1,
    });
    assert!(far.is_empty());
    let i = node_at(&m, [0.5, 0.5, 0.0]);
    let mut star = m.neighborhood(Seed::Node(i));
    star.sort_unstable();
    let mut patch = m.patch(i);
    patch.sort_unstable();
    assert!(patch.iter().all(|t| star.contains(t)));
}

#[test]
fn conformity_defects_are_reported() {
    let coords = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.5, 0.5, 0.0],
    ];
    let good = vec![vec![0, 1, 3], vec![0, 3, 2]];
    assert!(validate_conformity(2, &coords[..4], &good).is_conforming());

    let reversed = vec![vec![0, 3, 1], vec![0, 3, 2]];
    let r = validate_conformity(2, &coords[..4], &reversed);
    assert!(r.violations.iter().any(|v| matches!(v, Violation::InvertedElement { element: 0, .. })));

    let hanging = vec![vec![0, 1, 4], vec![1, 3, 4], vec![0, 3, 2]];
    let r = validate_conformity(2, &coords, &hanging);
    assert!(r.violations.iter().any(|v| matches!(v, Violation::HangingNode { node: 4, .. })), "{r:?}");
}

#[test]
fn bisection_examples() {
    let m = unit(2, 1);
    let both = bisect(&m, &[0, 1]).unwrap();
    assert_eq!(both.num_cells(), 4);
    assert!(both.validate().is_conforming());

    let same = bisect(&m, &[]).unwrap();
    assert_eq!(same.num_cells(), m.num_cells());
    assert_eq!(same.coords(), m.coords());
    for t in 0..m.num_cells() {
        assert_eq!(same.cell(t), m.cell(t));
    }
}

#[test]
fn corner_grading_stays_in_similarity_classes() {
    let mut m = unit(2, 1);
    let mut bound: f64 = 0.0;
    for t in 0..m.num_cells() {
        let (seed, tag) = m.refinement_seed(t);
        let classes = nvb_similarity_classes(&seed, 2, tag).unwrap();
        bound = bound.max(classes.iter().cloned().fold(0.0, f64::max));
    }
    let mut worst: f64 = m.gamma();
    for _ in 0..10 {
        let t = m.locate(&[1e-9, 1e-9, 0.0]).unwrap();
        m = bisect(&m, &[t]).unwrap();
        assert!(m.validate().is_conforming());
        worst = worst.max(m.gamma());
    }
    assert!(m.num_cells() > 10);
    assert!((worst - bound).abs() < 1e-9, "{worst} vs {bound}");
    assert!((bound - (2.0 + 2.0 * 2f64.sqrt())).abs() < 1e-9);
}

#[test]
fn uniform_bisection_halves_volumes() {
    for dim in [2, 3] {
        let m = unit(dim, 2);
        let r = bisect_uniform(&m, dim).unwrap();
        assert_eq!(r.num_cells(), m.num_cells() << dim);
        let v0 = m.volume(0) / (1 << dim) as f64;
        assert!((0..r.num_cells()).all(|t| (r.volume(t) - v0).abs() < 1e-14));
    }
}

#[test]
fn mesh_file_round_trip_and_errors() {
    let m = unit(2, 1);
    let text = mesh_to_string(&m);
    assert!(text.starts_with("dgfem-mesh 1\ndim 2\nnodes 4\n"));
    assert!(text.contains("elements 2\n"));
    let back = parse_mesh(&text).unwrap();
    assert_eq!(back.coords(), m.coords());

    let dim4 = "dgfem-mesh 1\ndim 4\nnodes 0\nelements 0\n";
    assert!(matches!(parse_mesh(dim4), Err(Error::UnsupportedDimension(4))));

    let dangling = "dgfem-mesh 1\ndim 2\nnodes 3\n0 0 0\n1 1 0\n2 0 1\nelements 1\n0 0 1 3\n";
    assert!(matches!(parse_mesh(dangling), Err(Error::Parse { line: 8, .. })));

    let version = text.replacen("dgfem-mesh 1", "dgfem-mesh 2", 1);
    assert!(matches!(parse_mesh(&version), Err(Error::Parse { line: 1, .. })));
}

fn random_refinement(dim: usize, picks: &[usize]) -> Triangulation {
    let mut m = unit(dim, 1);
    for &p in picks {
        let t = p % m.num_cells();
        m = bisect(&m, &[t]).unwrap();
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bisection_preserves_conformity_and_volume(
        dim in 2usize..=3,
        picks in prop::collection::vec(0usize..1000, 1..12),
    ) {
        let m = random_refinement(dim, &picks);
        prop_assert!(m.validate().is_conforming());
        prop_assert!((m.total_volume() - 1.0).abs() < 1e-12);
        prop_assert!((0..m.num_cells()).all(|t| m.volume(t) > 0.0));
    }

    #[test]
    fn refined_gamma_is_bounded_by_seed_classes(
        dim in 2usize..=3,
        picks in prop::collection::vec(0usize..1000, 1..10),
    ) {
        let root = unit(dim, 1);
        let mut bound: f64 = 0.0;
        for t in 0..root.num_cells() {
            let (seed, tag) = root.refinement_seed(t);
            let classes = nvb_similarity_classes(&seed, dim, tag).unwrap();
            bound = bound.max(classes.iter().cloned().fold(0.0, f64::max));
        }
        let m = random_refinement(dim, &picks);
        prop_assert!(m.gamma() <= bound * (1.0 + 1e-9));
    }

    #[test]
    fn mesh_text_round_trip(
        dim in 2usize..=3,
        picks in prop::collection::vec(0usize..1000, 0..8),
    ) {
        let m = random_refinement(dim, &picks);
        let back = parse_mesh(&mesh_to_string(&m)).unwrap();
        prop_assert_eq!(back.coords(), m.coords());
        prop_assert_eq!(back.num_cells(), m.num_cells());
        for t in 0..m.num_cells() {
            let mut a = m.cell(t).to_vec();
            let mut b = back.cell(t).to_vec();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
        }
        prop_assert_eq!(mesh_to_string(&back), mesh_to_string(&m));
    }

    #[test]
    fn locate_finds_containing_element(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let m = unit(2, 5);
        let t = m.locate(&[x, y, 0.0]).unwrap();
        let p = m.cell_points(t);
        let area = |a: [f64; 3], b: [f64; 3], c: [f64; 3]| {
            ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs() / 2.0
        };
        let q = [x, y, 0.0];
        let split = area(q, p[1], p[2]) + area(p[0], q, p[2]) + area(p[0], p[1], q);
        prop_assert!((split - m.volume(t)).abs() < 1e-12);
    }
}
