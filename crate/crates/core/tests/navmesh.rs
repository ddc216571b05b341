mod common;

use common::{in_poly, source_contains, world, Compressed, GridOracle, Raster};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wayfind_core::building::{ObstacleKind, PlacedPose};
use wayfind_core::error::NavError;
use wayfind_core::geometry::{Vec2, Vec3};

fn tri_area(v: &[Vec2; 3]) -> f64 {
    0.5 * ((v[1].x - v[0].x) * (v[2].y - v[0].y) - (v[2].x - v[0].x) * (v[1].y - v[0].y))
}

fn pose(floor: u8, x: f64, y: f64) -> PlacedPose {
    let w = world();
    PlacedPose { floor, point: Vec3::new(x, y, w.floor_z(floor)) }
}

/// Uniform random walkable point at least 10 cm from any boundary.
fn random_interior(rng: &mut ChaCha8Rng, raster: &Raster) -> Vec2 {
    loop {
        let p = Vec2::new(
            raster.origin.x + rng.gen::<f64>() * raster.cols as f64 * common::RASTER_CM,
            raster.origin.y + rng.gen::<f64>() * raster.rows as f64 * common::RASTER_CM,
        );
        if raster.get(p) && raster.clear_of_boundary(p, 10.0) {
            return p;
        }
    }
}

#[test]
fn mesh_area_matches_compressed_polygon_oracle() {
    let w = world();
    for f in w.spec.floor_ids() {
        let mesh: f64 = w.mesh.floor_triangles(f).map(|t| tri_area(&t.vertices)).sum();
        assert!(w.mesh.floor_triangles(f).all(|t| tri_area(&t.vertices) > 0.0), "floor {f} has a non-CCW triangle");
        let oracle = Compressed::new(&w.spec, f).area();
        assert!((mesh - oracle).abs() <= 1e-3 * oracle, "floor {f}: mesh {mesh} vs oracle {oracle}");
    }
}

#[test]
fn elevators_are_not_walkable() {
    let w = world();
    let mut n = 0;
    for f in &w.spec.floors {
        for o in f.obstacles.iter().filter(|o| o.kind == ObstacleKind::Elevator) {
            let c = o.polygon.iter().fold(Vec2::new(0.0, 0.0), |a, p| a + *p) * (1.0 / o.polygon.len() as f64);
            assert!(!w.mesh.contains(f.id, c), "elevator {} centroid is walkable", o.id);
            n += 1;
        }
    }
    assert_eq!(n, 20);
}

#[test]
fn containment_agrees_with_raster_away_from_boundaries() {
    let w = world();
    let raster = Raster::new(&w.spec, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut checked, mut inside) = (0, 0);
    for _ in 0..10_000 {
        let p = Vec2::new(
            raster.origin.x + rng.gen::<f64>() * raster.cols as f64 * common::RASTER_CM,
            raster.origin.y + rng.gen::<f64>() * raster.rows as f64 * common::RASTER_CM,
        );
        if !raster.clear_of_boundary(p, 5.0) {
            continue;
        }
        checked += 1;
        let expect = source_contains(&w.spec, 4, p);
        assert_eq!(w.mesh.contains(4, p), expect, "{p:?}");
        inside += usize::from(expect);
    }
    assert!(checked > 9_000 && inside > 1_000, "{checked} checked, {inside} inside");
}

#[test]
fn projection_matches_brute_force_edge_distance() {
    let w = world();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut n = 0;
    while n < 1_000 {
        let floor = rng.gen_range(1..=4u8);
        let p = Vec2::new(rng.gen_range(-600.0..15600.0), rng.gen_range(-600.0..1700.0));
        if w.mesh.contains(floor, p) {
            continue;
        }
        let mut best = f64::INFINITY;
        for t in w.mesh.floor_triangles(floor) {
            for i in 0..3 {
                let (a, b) = (t.vertices[i], t.vertices[(i + 1) % 3]);
                let ab = b - a;
                let s = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
                best = best.min(p.distance(a + ab * s));
            }
        }
        let q = w.mesh.project_to_walkable(floor, p);
        assert!((q.distance(p) - best).abs() <= 1e-3, "{p:?} on {floor}: {} vs {best}", q.distance(p));
        assert!(w.mesh.contains(floor, q));
        n += 1;
    }
}

#[test]
fn projection_examples() {
    let w = world();
    let inside = Vec2::new(2000.0, 0.0);
    assert_eq!(w.mesh.project_to_walkable(4, inside), inside);
    // Main corridor A on floor 4 spans y in [-120, 120].
    let q = w.mesh.project_to_walkable(4, Vec2::new(2010.0, -130.0));
    assert!(q.distance(Vec2::new(2010.0, -120.0)) < 1e-6, "{q:?}");
}

#[test]
fn straight_corridor_path_is_euclidean() {
    let w = world();
    let (a, b) = (pose(4, 1500.0, 0.0), pose(4, 3500.0, 0.0));
    let p = w.mesh.shortest_path(&a, &b).unwrap();
    assert!((p.length_cm - 2000.0).abs() <= 20.0, "{}", p.length_cm);
    assert_eq!(p.floors_visited, vec![4]);
}

#[test]
fn cross_floor_path_uses_stairs_and_matches_grid() {
    let w = world();
    let a = w.spec.lookup_place("4.99").unwrap();
    let b = w.spec.lookup_place("2.01").unwrap();
    let p = w.mesh.shortest_path(&a, &b).unwrap();
    assert!(p.floors_visited.contains(&4) && p.floors_visited.contains(&2));
    assert!(!p.stairs.is_empty());
    let oracle = GridOracle::shared().distance(&a, &b).unwrap();
    assert!((p.length_cm - oracle).abs() <= 0.02 * oracle, "mesh {} grid {oracle}", p.length_cm);
}

#[test]
fn elevator_interior_is_unreachable() {
    let w = world();
    let f4 = w.spec.floor(4).unwrap();
    let e = f4.obstacles.iter().find(|o| o.kind == ObstacleKind::Elevator).unwrap();
    let c = e.polygon.iter().fold(Vec2::new(0.0, 0.0), |a, p| a + *p) * (1.0 / e.polygon.len() as f64);
    assert!(in_poly(c, &e.polygon));
    let r = w.mesh.shortest_path(&pose(4, 2000.0, 0.0), &pose(4, c.x, c.y));
    assert!(matches!(r, Err(NavError::Unreachable) | Err(NavError::OffMesh { .. })), "{r:?}");
}

#[test]
fn random_pairs_match_grid_oracle() {
    let w = world();
    let grid = GridOracle::shared();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for i in 0..20 {
        let fa = rng.gen_range(1..=4u8);
        let fb = rng.gen_range(1..=4u8);
        let pa = random_interior(&mut rng, grid.raster(fa));
        let pb = random_interior(&mut rng, grid.raster(fb));
        let (a, b) = (pose(fa, pa.x, pa.y), pose(fb, pb.x, pb.y));
        let mesh = w.mesh.shortest_path(&a, &b).unwrap().length_cm;
        let oracle = grid.distance(&a, &b).unwrap();
        assert!((mesh - oracle).abs() <= 0.02 * oracle, "pair {i}: mesh {mesh} grid {oracle}");
    }
}

fn walkable_point() -> impl Strategy<Value = PlacedPose> {
    (1..=4u8, 0u64..u64::MAX).prop_map(|(floor, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_interior(&mut rng, GridOracle::shared().raster(floor));
        pose(floor, p.x, p.y)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn path_length_is_symmetric(a in walkable_point(), b in walkable_point()) {
        let w = world();
        let ab = w.mesh.shortest_path(&a, &b).unwrap().length_cm;
        let ba = w.mesh.shortest_path(&b, &a).unwrap().length_cm;
        prop_assert!((ab - ba).abs() <= 0.02 * ab.min(ba) + 1e-9, "{ab} vs {ba}");
    }

    #[test]
    fn triangle_inequality_with_slack(a in walkable_point(), b in walkable_point(), c in walkable_point()) {
        let w = world();
        let len = |x: &PlacedPose, y: &PlacedPose| w.mesh.shortest_path(x, y).unwrap().length_cm;
        let (ac, ab, bc) = (len(&a, &c), len(&a, &b), len(&b, &c));
        prop_assert!(ac <= (ab + bc) * 1.02 + 1e-9, "{ac} > {ab} + {bc}");
    }

    #[test]
    fn projection_lands_inside(floor in 1..=4u8, x in -500.0..15500.0f64, y in -500.0..1600.0f64) {
        let w = world();
        let q = w.mesh.project_to_walkable(floor, Vec2::new(x, y));
        prop_assert!(w.mesh.contains(floor, q));
    }
}
