//! Independent oracles built straight from the fixture polygons. None of
//! these use the region, mesh or path code under test.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::{Arc, OnceLock};
use wayfind_core::building::{BuildingSpec, FloorId, PlacedPose};
use wayfind_core::geometry::{Vec2, Vec3};
use wayfind_core::sim::World;

pub fn world() -> Arc<World> {
    static W: OnceLock<Arc<World>> = OnceLock::new();
    W.get_or_init(|| Arc::new(World::ceg().expect("fixture world"))).clone()
}

/// Crossing-number point-in-polygon test.
pub fn in_poly(p: Vec2, poly: &[Vec2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Walkable by the source polygons: inside some walkable polygon and no obstacle.
pub fn source_contains(spec: &BuildingSpec, floor: FloorId, p: Vec2) -> bool {
    let f = spec.floor(floor).expect("floor");
    f.walkable.iter().any(|w| in_poly(p, &w.polygon)) && !f.obstacles.iter().any(|o| in_poly(p, &o.polygon))
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Coordinate-compressed grid over every polygon vertex of a floor. Exact for
/// axis-aligned polygons, which is all the fixture uses.
pub struct Compressed {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `inside[i][j]` for the cell `[xs[i], xs[i+1]] x [ys[j], ys[j+1]]`.
    pub inside: Vec<Vec<bool>>,
}

impl Compressed {
    pub fn new(spec: &BuildingSpec, floor: FloorId) -> Self {
        let f = spec.floor(floor).expect("floor");
        let pts: Vec<Vec2> = f
            .walkable
            .iter()
            .flat_map(|w| w.polygon.iter())
            .chain(f.obstacles.iter().flat_map(|o| o.polygon.iter()))
            .copied()
            .collect();
        let xs = sorted_unique(pts.iter().map(|p| p.x).collect());
        let ys = sorted_unique(pts.iter().map(|p| p.y).collect());
        let inside = (0..xs.len() - 1)
            .map(|i| {
                (0..ys.len() - 1)
                    .map(|j| {
                        let c = Vec2::new(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]));
                        source_contains(spec, floor, c)
                    })
                    .collect()
            })
            .collect();
        Compressed { xs, ys, inside }
    }

    pub fn area(&self) -> f64 {
        let mut a = 0.0;
        for i in 0..self.xs.len() - 1 {
            for j in 0..self.ys.len() - 1 {
                if self.inside[i][j] {
                    a += (self.xs[i + 1] - self.xs[i]) * (self.ys[j + 1] - self.ys[j]);
                }
            }
        }
        a
    }

    fn at(&self, i: isize, j: isize) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.inside.len()
            && (j as usize) < self.inside[0].len()
            && self.inside[i as usize][j as usize]
    }

    /// Number of maximal straight boundary pieces, split where the inside
    /// side flips or the boundary is interrupted.
    pub fn boundary_piece_count(&self) -> usize {
        let (nx, ny) = (self.xs.len() as isize - 1, self.ys.len() as isize - 1);
        let mut count = 0;
        // Vertical lines x = xs[i], between cells i-1 and i.
        for i in 0..=nx {
            let mut prev = 0i8;
            for j in 0..ny {
                let side = match (self.at(i - 1, j), self.at(i, j)) {
                    (true, false) => 1,
                    (false, true) => -1,
                    _ => 0,
                };
                if side != 0 && side != prev {
                    count += 1;
                }
                prev = side;
            }
        }
        for j in 0..=ny {
            let mut prev = 0i8;
            for i in 0..nx {
                let side = match (self.at(i, j - 1), self.at(i, j)) {
                    (true, false) => 1,
                    (false, true) => -1,
                    _ => 0,
                };
                if side != 0 && side != prev {
                    count += 1;
                }
                prev = side;
            }
        }
        count
    }
}

pub const RASTER_CM: f64 = 5.0;

/// Cell-centre containment bitmap at `RASTER_CM`.
pub struct Raster {
    pub origin: Vec2,
    pub cols: usize,
    pub rows: usize,
    pub bits: Vec<bool>,
}

impl Raster {
    pub fn new(spec: &BuildingSpec, floor: FloorId) -> Self {
        let f = spec.floor(floor).expect("floor");
        let all: Vec<Vec2> = f.walkable.iter().flat_map(|w| w.polygon.iter()).copied().collect();
        let (x0, y0) = all.iter().fold((f64::MAX, f64::MAX), |(x, y), p| (x.min(p.x), y.min(p.y)));
        let (x1, y1) = all.iter().fold((f64::MIN, f64::MIN), |(x, y), p| (x.max(p.x), y.max(p.y)));
        let cols = ((x1 - x0) / RASTER_CM).ceil() as usize;
        let rows = ((y1 - y0) / RASTER_CM).ceil() as usize;
        let mut walk = vec![false; cols * rows];
        let mut blocked = vec![false; cols * rows];
        let origin = Vec2::new(x0, y0);
        let fill = |poly: &[Vec2], target: &mut Vec<bool>| {
            let (px0, py0) = poly.iter().fold((f64::MAX, f64::MAX), |(x, y), p| (x.min(p.x), y.min(p.y)));
            let (px1, py1) = poly.iter().fold((f64::MIN, f64::MIN), |(x, y), p| (x.max(p.x), y.max(p.y)));
            let c0 = (((px0 - x0) / RASTER_CM).floor().max(0.0)) as usize;
            let c1 = (((px1 - x0) / RASTER_CM).ceil() as usize).min(cols);
            let r0 = (((py0 - y0) / RASTER_CM).floor().max(0.0)) as usize;
            let r1 = (((py1 - y0) / RASTER_CM).ceil() as usize).min(rows);
            for r in r0..r1 {
                for c in c0..c1 {
                    let p = Vec2::new(x0 + (c as f64 + 0.5) * RASTER_CM, y0 + (r as f64 + 0.5) * RASTER_CM);
                    if in_poly(p, poly) {
                        target[r * cols + c] = true;
                    }
                }
            }
        };
        for w in &f.walkable {
            fill(&w.polygon, &mut walk);
        }
        for o in &f.obstacles {
            fill(&o.polygon, &mut blocked);
        }
        let bits = walk.iter().zip(&blocked).map(|(w, b)| *w && !*b).collect();
        Raster { origin, cols, rows, bits }
    }

    pub fn get(&self, p: Vec2) -> bool {
        let c = ((p.x - self.origin.x) / RASTER_CM).floor();
        let r = ((p.y - self.origin.y) / RASTER_CM).floor();
        if c < 0.0 || r < 0.0 || c as usize >= self.cols || r as usize >= self.rows {
            return false;
        }
        self.bits[r as usize * self.cols + c as usize]
    }

    /// True when every raster cell within `margin` of `p` agrees.
    pub fn clear_of_boundary(&self, p: Vec2, margin: f64) -> bool {
        let v = self.get(p);
        let steps = (margin / RASTER_CM).ceil() as i32;
        for dx in -steps..=steps {
            for dy in -steps..=steps {
                let q = p + Vec2::new(dx as f64 * RASTER_CM, dy as f64 * RASTER_CM);
                if self.get(q) != v {
                    return false;
                }
            }
        }
        true
    }

    pub fn line_clear(&self, a: Vec2, b: Vec2) -> bool {
        self.get(a) && self.line_clear_after(a, b)
    }

    /// Like `line_clear` but `a` itself may sit on the boundary.
    pub fn line_clear_after(&self, a: Vec2, b: Vec2) -> bool {
        let n = (a.distance(b) / RASTER_CM).ceil().max(1.0) as usize;
        (1..=n).all(|i| self.get(a.lerp(b, i as f64 / n as f64)))
    }
}

pub const GRID_CM: f64 = 25.0;
const NEIGHBOUR_REACH: i32 = 4;
const ATTACH_RADIUS_CM: f64 = 100.0;

#[derive(Clone, Copy, PartialEq)]
struct Item(f64, usize);
impl Eq for Item {}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0)
    }
}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Any-angle-ish grid graph: 25 cm cell centres joined to every cell within
/// four steps in line of sight, plus one edge per stair flight taken from the
/// staircase ramps.
pub struct GridOracle {
    rasters: BTreeMap<FloorId, Raster>,
    nodes: Vec<(FloorId, Vec3)>,
    by_cell: BTreeMap<(FloorId, i64, i64), usize>,
    adj: Vec<Vec<(usize, f64)>>,
}

fn primitive_offsets() -> Vec<(i64, i64)> {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    let r = NEIGHBOUR_REACH as i64;
    let mut v = Vec::new();
    for dx in -r..=r {
        for dy in -r..=r {
            if (dx, dy) != (0, 0) && gcd(dx, dy) == 1 {
                v.push((dx, dy));
            }
        }
    }
    v
}

impl GridOracle {
    pub fn shared() -> &'static GridOracle {
        static G: OnceLock<GridOracle> = OnceLock::new();
        G.get_or_init(|| GridOracle::new(&world().spec))
    }

    pub fn raster(&self, floor: FloorId) -> &Raster {
        &self.rasters[&floor]
    }

    pub fn new(spec: &BuildingSpec) -> Self {
        let mut rasters = BTreeMap::new();
        let mut nodes = Vec::new();
        let mut by_cell = BTreeMap::new();
        for f in &spec.floors {
            let r = Raster::new(spec, f.id);
            let (x0, y0) = (r.origin.x, r.origin.y);
            let cols = (r.cols as f64 * RASTER_CM / GRID_CM).ceil() as i64;
            let rows = (r.rows as f64 * RASTER_CM / GRID_CM).ceil() as i64;
            for i in 0..cols {
                for j in 0..rows {
                    let p = Vec2::new(x0 + (i as f64 + 0.5) * GRID_CM, y0 + (j as f64 + 0.5) * GRID_CM);
                    if r.get(p) {
                        by_cell.insert((f.id, i, j), nodes.len());
                        nodes.push((f.id, Vec3::with_xy(p, f.z_cm)));
                    }
                }
            }
            rasters.insert(f.id, r);
        }
        let mut g = GridOracle { rasters, nodes, by_cell, adj: Vec::new() };
        g.adj = vec![Vec::new(); g.nodes.len()];
        let offsets = primitive_offsets();
        let cells: Vec<((FloorId, i64, i64), usize)> = g.by_cell.iter().map(|(k, v)| (*k, *v)).collect();
        for ((fl, i, j), a) in cells {
            for &(dx, dy) in &offsets {
                if let Some(&b) = g.by_cell.get(&(fl, i + dx, j + dy)) {
                    let (pa, pb) = (g.nodes[a].1.xy(), g.nodes[b].1.xy());
                    if g.rasters[&fl].line_clear(pa, pb) {
                        g.adj[a].push((b, pa.distance(pb)));
                    }
                }
            }
        }
        for s in &spec.staircases {
            for w in s.ramp.windows(2) {
                if (w[0].z - w[1].z).abs() < 1e-9 {
                    continue;
                }
                let (lo, hi) = if w[0].z < w[1].z { (w[0], w[1]) } else { (w[1], w[0]) };
                let floor_at = |z: f64| spec.floors.iter().find(|f| (f.z_cm - z).abs() < 1e-6).map(|f| f.id);
                let (Some(fl), Some(fh)) = (floor_at(lo.z), floor_at(hi.z)) else { continue };
                let a = g.attach(fl, lo);
                let b = g.attach(fh, hi);
                let len = lo.distance(hi);
                g.adj[a].push((b, len));
                g.adj[b].push((a, len));
            }
        }
        g
    }

    fn near_cells(&self, floor: FloorId, p: Vec2) -> Vec<usize> {
        let r = &self.rasters[&floor];
        let ci = ((p.x - r.origin.x) / GRID_CM - 0.5).round() as i64;
        let cj = ((p.y - r.origin.y) / GRID_CM - 0.5).round() as i64;
        let reach = (ATTACH_RADIUS_CM / GRID_CM).ceil() as i64;
        let mut out = Vec::new();
        for i in ci - reach..=ci + reach {
            for j in cj - reach..=cj + reach {
                if let Some(&n) = self.by_cell.get(&(floor, i, j)) {
                    let q = self.nodes[n].1.xy();
                    if q.distance(p) <= ATTACH_RADIUS_CM && r.line_clear_after(p, q) {
                        out.push(n);
                    }
                }
            }
        }
        out
    }

    /// Add a node at `p` joined both ways to nearby visible cells.
    fn attach(&mut self, floor: FloorId, p: Vec3) -> usize {
        let id = self.nodes.len();
        self.nodes.push((floor, p));
        self.adj.push(Vec::new());
        for n in self.near_cells(floor, p.xy()) {
            let d = self.nodes[n].1.xy().distance(p.xy());
            self.adj[id].push((n, d));
            self.adj[n].push((id, d));
        }
        id
    }

    /// Grid shortest-path length between two placed points.
    pub fn distance(&self, a: &PlacedPose, b: &PlacedPose) -> Option<f64> {
        let starts = self.near_cells(a.floor, a.point.xy());
        let goals: BTreeMap<usize, f64> = self
            .near_cells(b.floor, b.point.xy())
            .into_iter()
            .map(|n| (n, self.nodes[n].1.xy().distance(b.point.xy())))
            .collect();
        let mut best = if a.floor == b.floor && self.rasters[&a.floor].line_clear(a.point.xy(), b.point.xy()) {
            a.point.xy().distance(b.point.xy())
        } else {
            f64::INFINITY
        };
        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        for s in starts {
            let d = self.nodes[s].1.xy().distance(a.point.xy());
            dist[s] = d;
            heap.push(Item(d, s));
        }
        while let Some(Item(d, u)) = heap.pop() {
            if d > dist[u] || d >= best {
                continue;
            }
            if let Some(tail) = goals.get(&u) {
                best = best.min(d + tail);
            }
            for &(v, w) in &self.adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Item(nd, v));
                }
            }
        }
        best.is_finite().then_some(best)
    }
}
