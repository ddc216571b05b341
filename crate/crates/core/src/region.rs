//! Walkable region of a floor: union of walkable polygons minus obstacles.

use crate::building::Floor;
use crate::geometry::{orient, point_in_ring, signed_area, Segment, Vec2};
use geo::{BooleanOps, Coord, LineString, MultiPolygon, Polygon};

#[derive(Debug, Clone, PartialEq)]
pub struct RegionPolygon {
    /// Counter-clockwise outer ring (not closed).
    pub outer: Vec<Vec2>,
    /// Clockwise hole rings (not closed).
    pub holes: Vec<Vec<Vec2>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Region {
    pub polygons: Vec<RegionPolygon>,
}

impl Region {
    pub fn area(&self) -> f64 {
        self.polygons
            .iter()
            .map(|p| signed_area(&p.outer).abs() - p.holes.iter().map(|h| signed_area(h).abs()).sum::<f64>())
            .sum()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.polygons
            .iter()
            .any(|poly| point_in_ring(p, &poly.outer) && !poly.holes.iter().any(|h| point_in_ring(p, h)))
    }

    pub fn rings(&self) -> impl Iterator<Item = &Vec<Vec2>> {
        self.polygons
            .iter()
            .flat_map(|p| std::iter::once(&p.outer).chain(p.holes.iter()))
    }

    pub fn boundary_segments(&self) -> Vec<Segment> {
        let mut out = Vec::new();
        for ring in self.rings() {
            let n = ring.len();
            for i in 0..n {
                out.push(Segment::new(ring[i], ring[(i + 1) % n]));
            }
        }
        out
    }
}

fn to_geo(ring: &[Vec2]) -> Polygon<f64> {
    let coords: Vec<Coord<f64>> = ring.iter().map(|p| Coord { x: p.x, y: p.y }).collect();
    Polygon::new(LineString::from(coords), vec![])
}

fn from_ls(ls: &LineString<f64>) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = ls.0.iter().map(|c| Vec2::new(c.x, c.y)).collect();
    if pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    simplify_ring(pts)
}

/// Drop repeated and collinear vertices.
pub fn simplify_ring(mut pts: Vec<Vec2>) -> Vec<Vec2> {
    loop {
        let n = pts.len();
        if n < 3 {
            return pts;
        }
        let mut removed = false;
        for i in 0..n {
            let prev = pts[(i + n - 1) % n];
            let cur = pts[i];
            let next = pts[(i + 1) % n];
            let scale = (next - prev).length().max(1.0);
            if cur.distance(prev) < 1e-9 || orient(prev, cur, next).abs() / scale < 1e-7 {
                pts.remove(i);
                removed = true;
                break;
            }
        }
        if !removed {
            return pts;
        }
    }
}

pub fn floor_region(floor: &Floor) -> Region {
    let mut acc: MultiPolygon<f64> = MultiPolygon::new(vec![]);
    for w in &floor.walkable {
        acc = acc.union(&MultiPolygon::new(vec![to_geo(&w.polygon)]));
    }
    for o in &floor.obstacles {
        acc = acc.difference(&MultiPolygon::new(vec![to_geo(&o.polygon)]));
    }
    let polygons = acc
        .0
        .iter()
        .map(|p| {
            let mut outer = from_ls(p.exterior());
            if signed_area(&outer) < 0.0 {
                outer.reverse();
            }
            let holes = p
                .interiors()
                .iter()
                .map(|h| {
                    let mut ring = from_ls(h);
                    if signed_area(&ring) > 0.0 {
                        ring.reverse();
                    }
                    ring
                })
                .filter(|r| r.len() >= 3)
                .collect();
            RegionPolygon { outer, holes }
        })
        .filter(|p| p.outer.len() >= 3)
        .collect();
    Region { polygons }
}
