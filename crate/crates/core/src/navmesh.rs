//! Walkable navigation mesh over all floors, linked by staircase flights.
//!
//! Each floor's walkable region is triangulated with a refined constrained
//! Delaunay triangulation. Path queries search a graph whose nodes are the
//! midpoints of shared triangle edges plus the staircase gate points, then
//! string-pull each floor leg through its portal channel.

use crate::building::{BuildingSpec, FloorId, PlacedPose};
use crate::error::NavError;
use crate::geometry::{polyline_length, Segment, Triangle, Vec2, Vec3};
use serde::Serialize;
use spade::{ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};

/// Containment tolerance to triangle boundaries.
pub const CONTAIN_EPS: f64 = 1e-6;
/// Points this close to the mesh are snapped onto it by path queries.
pub const SNAP_TOLERANCE_CM: f64 = 5.0;
const MAX_TRIANGLE_AREA: f64 = 30_000.0;
const GRID_CELL: f64 = 200.0;

#[derive(Debug, Clone, Serialize)]
pub struct NavTriangle {
    pub floor: FloorId,
    pub vertices: [Vec2; 3],
    /// Neighbor across edge `i` (vertices `i` and `i + 1`).
    pub neighbors: [Option<usize>; 3],
}

impl NavTriangle {
    pub fn triangle(&self) -> Triangle {
        Triangle { a: self.vertices[0], b: self.vertices[1], c: self.vertices[2] }
    }

    fn edge(&self, i: usize) -> (Vec2, Vec2) {
        (self.vertices[i], self.vertices[(i + 1) % 3])
    }
}

/// One flight of stairs between two vertically adjacent floor stops.
#[derive(Debug, Clone, Serialize)]
pub struct StairLink {
    pub staircase: String,
    pub lower_floor: FloorId,
    pub upper_floor: FloorId,
    pub lower_node: Vec2,
    pub upper_node: Vec2,
    /// Ascending 3D polyline from the lower node to the upper node.
    pub ramp: Vec<Vec3>,
    pub length_cm: f64,
    pub half_width_cm: f64,
    #[serde(skip)]
    lower_tri: usize,
    #[serde(skip)]
    upper_tri: usize,
}

impl StairLink {
    fn axis(&self) -> Vec2 {
        self.upper_node - self.lower_node
    }

    pub fn axis_length(&self) -> f64 {
        self.axis().length()
    }

    /// Normalized position along the flight (0 at the lower gate, 1 at the upper).
    pub fn param(&self, p: Vec2) -> f64 {
        let a = self.axis();
        (p - self.lower_node).dot(a) / a.dot(a)
    }

    /// Signed lateral offset from the flight axis.
    pub fn lateral(&self, p: Vec2) -> f64 {
        (p - self.lower_node).dot(self.axis().normalized().perp())
    }

    pub fn z_lower(&self) -> f64 {
        self.ramp[0].z
    }

    pub fn z_upper(&self) -> f64 {
        self.ramp[self.ramp.len() - 1].z
    }

    /// Feet elevation at a plan point on the flight.
    pub fn z_at(&self, p: Vec2) -> f64 {
        let t = self.param(p).clamp(0.0, 1.0);
        self.z_lower() + t * (self.z_upper() - self.z_lower())
    }

    /// Clamp a plan point to the flight band laterally.
    pub fn clamp_lateral(&self, p: Vec2) -> Vec2 {
        let n = self.axis().normalized().perp();
        let lat = self.lateral(p);
        let c = lat.clamp(-self.half_width_cm, self.half_width_cm);
        p + n * (c - lat)
    }

    pub fn node_on(&self, floor: FloorId) -> Option<Vec2> {
        if floor == self.lower_floor {
            Some(self.lower_node)
        } else if floor == self.upper_floor {
            Some(self.upper_node)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
struct FloorMesh {
    z_cm: f64,
    triangles: Vec<usize>,
    boundary: Vec<Segment>,
    grid_origin: Vec2,
    grid_dims: (usize, usize),
    grid: Vec<Vec<usize>>,
}

impl FloorMesh {
    fn cell_of(&self, p: Vec2) -> Option<usize> {
        let cx = ((p.x - self.grid_origin.x) / GRID_CELL).floor();
        let cy = ((p.y - self.grid_origin.y) / GRID_CELL).floor();
        if cx < 0.0 || cy < 0.0 {
            return None;
        }
        let (cx, cy) = (cx as usize, cy as usize);
        if cx >= self.grid_dims.0 || cy >= self.grid_dims.1 {
            return None;
        }
        Some(cy * self.grid_dims.0 + cx)
    }
}

#[derive(Debug, Clone)]
pub struct NavMesh {
    triangles: Vec<NavTriangle>,
    floors: BTreeMap<FloorId, FloorMesh>,
    stair_links: Vec<StairLink>,
    /// Interior edges: (triangle a, edge index in a, triangle b).
    portals: Vec<(usize, usize, usize)>,
    /// Per triangle, the search nodes lying on it.
    tri_nodes: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StairTraversal {
    pub link: usize,
    /// Index into `waypoints` where the flight starts.
    pub start_index: usize,
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    /// Feet-level 3D polyline.
    pub waypoints: Vec<Vec3>,
    pub length_cm: f64,
    pub floors_visited: Vec<FloorId>,
    pub stairs: Vec<StairTraversal>,
}

#[derive(Serialize)]
struct MeshDump<'a> {
    triangles: &'a [NavTriangle],
    stair_links: &'a [StairLink],
}

fn key(p: Vec2) -> (u64, u64) {
    (p.x.to_bits(), p.y.to_bits())
}

/// Build the navigation mesh for every floor of a building.
pub fn build_navmesh(spec: &BuildingSpec) -> Result<NavMesh, NavError> {
    let mut triangles = Vec::new();
    let mut floors = BTreeMap::new();
    for floor in &spec.floors {
        let region = spec.region(floor.id)?;
        let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
        for (ri, ring) in region.rings().enumerate() {
            let fail = || NavError::Triangulation(format!("floor {} ring {}", floor.id, ri));
            if ring.len() < 3 {
                return Err(fail());
            }
            let mut handles = Vec::with_capacity(ring.len());
            for p in ring {
                if !p.x.is_finite() || !p.y.is_finite() {
                    return Err(fail());
                }
                handles.push(cdt.insert(Point2::new(p.x, p.y)).map_err(|_| fail())?);
            }
            for i in 0..handles.len() {
                let (a, b) = (handles[i], handles[(i + 1) % handles.len()]);
                if a != b && cdt.can_add_constraint(a, b) {
                    cdt.add_constraint(a, b);
                }
            }
        }
        let result = cdt.refine(
            RefinementParameters::<f64>::new()
                .exclude_outer_faces(true)
                .with_max_allowed_area(MAX_TRIANGLE_AREA)
                .with_max_additional_vertices(200_000),
        );
        let excluded: HashSet<_> = result.excluded_faces.iter().copied().collect();
        let first = triangles.len();
        for face in cdt.inner_faces() {
            if excluded.contains(&face.fix()) {
                continue;
            }
            let [a, b, c] = face.positions();
            let mut v = [Vec2::new(a.x, a.y), Vec2::new(b.x, b.y), Vec2::new(c.x, c.y)];
            if crate::geometry::orient(v[0], v[1], v[2]) < 0.0 {
                v.swap(1, 2);
            }
            let tri = Triangle { a: v[0], b: v[1], c: v[2] };
            if tri.area() < 1e-9 || !region.contains(tri.centroid()) {
                continue;
            }
            triangles.push(NavTriangle { floor: floor.id, vertices: v, neighbors: [None; 3] });
        }
        if triangles.len() == first {
            return Err(NavError::Triangulation(format!("floor {} produced no triangles", floor.id)));
        }
        floors.insert(
            floor.id,
            FloorMesh {
                z_cm: floor.z_cm,
                triangles: (first..triangles.len()).collect(),
                boundary: Vec::new(),
                grid_origin: Vec2::default(),
                grid_dims: (0, 0),
                grid: Vec::new(),
            },
        );
    }

    // Adjacency through shared edges.
    let mut edge_map: HashMap<((u64, u64), (u64, u64)), (usize, usize)> = HashMap::new();
    let mut portals = Vec::new();
    for (ti, t) in triangles.clone().iter().enumerate() {
        for ei in 0..3 {
            let (a, b) = t.edge(ei);
            let k = if key(a) < key(b) { (key(a), key(b)) } else { (key(b), key(a)) };
            let k = (k.0, k.1);
            let full = ((k.0 .0 ^ (t.floor as u64)), k.0 .1);
            let k = (full, k.1);
            if let Some(&(tj, ej)) = edge_map.get(&k) {
                triangles[ti].neighbors[ei] = Some(tj);
                triangles[tj].neighbors[ej] = Some(ti);
                portals.push((ti, ei, tj));
            } else {
                edge_map.insert(k, (ti, ei));
            }
        }
    }

    for fm in floors.values_mut() {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &ti in &fm.triangles {
            let t = &triangles[ti];
            for v in t.vertices {
                lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
                hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
            }
            for ei in 0..3 {
                if t.neighbors[ei].is_none() {
                    let (a, b) = t.edge(ei);
                    fm.boundary.push(Segment::new(a, b));
                }
            }
        }
        fm.grid_origin = lo - Vec2::new(1.0, 1.0);
        let nx = (((hi.x - fm.grid_origin.x) / GRID_CELL).ceil() as usize).max(1) + 1;
        let ny = (((hi.y - fm.grid_origin.y) / GRID_CELL).ceil() as usize).max(1) + 1;
        fm.grid_dims = (nx, ny);
        fm.grid = vec![Vec::new(); nx * ny];
        for &ti in &fm.triangles {
            let t = &triangles[ti];
            let tlo = t.vertices.iter().fold(Vec2::new(f64::INFINITY, f64::INFINITY), |a, v| {
                Vec2::new(a.x.min(v.x), a.y.min(v.y))
            }) - Vec2::new(1e-3, 1e-3);
            let thi = t.vertices.iter().fold(Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |a, v| {
                Vec2::new(a.x.max(v.x), a.y.max(v.y))
            }) + Vec2::new(1e-3, 1e-3);
            let x0 = ((tlo.x - fm.grid_origin.x) / GRID_CELL).floor().max(0.0) as usize;
            let y0 = ((tlo.y - fm.grid_origin.y) / GRID_CELL).floor().max(0.0) as usize;
            let x1 = (((thi.x - fm.grid_origin.x) / GRID_CELL).floor() as usize).min(nx - 1);
            let y1 = (((thi.y - fm.grid_origin.y) / GRID_CELL).floor() as usize).min(ny - 1);
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    fm.grid[cy * nx + cx].push(ti);
                }
            }
        }
    }

    let mut mesh = NavMesh {
        triangles,
        floors,
        stair_links: Vec::new(),
        portals,
        tri_nodes: Vec::new(),
    };

    for s in &spec.staircases {
        let stops: Vec<(usize, FloorId)> = s
            .ramp
            .iter()
            .enumerate()
            .filter_map(|(i, p)| spec.floor_at_elevation(p.z, 1e-6).map(|f| (i, f)))
            .collect();
        for w in stops.windows(2) {
            let ((i0, f0), (i1, f1)) = (w[0], w[1]);
            if f0 == f1 {
                continue;
            }
            let ramp: Vec<Vec3> = s.ramp[i0..=i1].to_vec();
            let lower_node = ramp[0].xy();
            let upper_node = ramp[ramp.len() - 1].xy();
            let lower_tri = mesh.locate(f0, lower_node).ok_or(NavError::OffMesh {
                floor: f0,
                x: lower_node.x,
                y: lower_node.y,
            })?;
            let upper_tri = mesh.locate(f1, upper_node).ok_or(NavError::OffMesh {
                floor: f1,
                x: upper_node.x,
                y: upper_node.y,
            })?;
            mesh.stair_links.push(StairLink {
                staircase: s.label.clone(),
                lower_floor: f0,
                upper_floor: f1,
                lower_node,
                upper_node,
                length_cm: polyline_length(&ramp),
                ramp,
                half_width_cm: s.width_cm / 2.0,
                lower_tri,
                upper_tri,
            });
        }
    }

    // Search nodes: portals first, then two per stair link.
    let mut tri_nodes = vec![Vec::new(); mesh.triangles.len()];
    for (ni, &(a, _, b)) in mesh.portals.iter().enumerate() {
        tri_nodes[a].push(ni);
        tri_nodes[b].push(ni);
    }
    let base = mesh.portals.len();
    for (li, l) in mesh.stair_links.iter().enumerate() {
        tri_nodes[l.lower_tri].push(base + 2 * li);
        tri_nodes[l.upper_tri].push(base + 2 * li + 1);
    }
    mesh.tri_nodes = tri_nodes;
    Ok(mesh)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct QueueItem {
    f: f64,
    node: usize,
}

impl Eq for QueueItem {}

impl Ord for QueueItem {
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then_with(|| o.node.cmp(&self.node))
    }
}

impl PartialOrd for QueueItem {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl NavMesh {
    pub fn triangles(&self) -> &[NavTriangle] {
        &self.triangles
    }

    pub fn floor_triangles(&self, floor: FloorId) -> impl Iterator<Item = &NavTriangle> {
        self.floors
            .get(&floor)
            .into_iter()
            .flat_map(move |fm| fm.triangles.iter().map(move |&i| &self.triangles[i]))
    }

    pub fn floor_ids(&self) -> Vec<FloorId> {
        self.floors.keys().copied().collect()
    }

    pub fn floor_z(&self, floor: FloorId) -> Option<f64> {
        self.floors.get(&floor).map(|f| f.z_cm)
    }

    pub fn floor_area(&self, floor: FloorId) -> f64 {
        self.floor_triangles(floor).map(|t| t.triangle().area()).sum()
    }

    /// Boundary edges (triangle edges without a neighbor) of one floor.
    pub fn boundary_edges(&self, floor: FloorId) -> &[Segment] {
        self.floors.get(&floor).map(|f| f.boundary.as_slice()).unwrap_or(&[])
    }

    pub fn stair_links(&self) -> &[StairLink] {
        &self.stair_links
    }

    /// Stair link whose band holds plan point `p` with an eye elevation
    /// consistent with standing on it.
    pub fn ramp_at_eye(&self, p: Vec3, eye_min: f64, eye_max: f64) -> Option<usize> {
        self.stair_links.iter().position(|l| {
            let t = l.param(p.xy());
            let eye = p.z - l.z_at(p.xy());
            (-1e-9..=1.0 + 1e-9).contains(&t)
                && l.lateral(p.xy()).abs() <= l.half_width_cm + 1e-6
                && eye >= eye_min - 1e-6
                && eye <= eye_max + 1e-6
        })
    }

    /// Triangle containing `p` on `floor`, if any.
    pub fn locate(&self, floor: FloorId, p: Vec2) -> Option<usize> {
        let fm = self.floors.get(&floor)?;
        let cell = fm.cell_of(p)?;
        fm.grid[cell]
            .iter()
            .copied()
            .find(|&ti| self.triangles[ti].triangle().contains(p, CONTAIN_EPS))
    }

    pub fn contains(&self, floor: FloorId, p: Vec2) -> bool {
        self.locate(floor, p).is_some()
    }

    /// Nearest point of the floor's mesh to `p`.
    pub fn project_to_walkable(&self, floor: FloorId, p: Vec2) -> Vec2 {
        if self.contains(floor, p) {
            return p;
        }
        self.boundary_edges(floor)
            .iter()
            .map(|e| e.closest_point(p))
            .min_by(|a, b| a.distance(p).total_cmp(&b.distance(p)))
            .unwrap_or(p)
    }

    fn node_point(&self, node: usize) -> (Vec2, FloorId) {
        let np = self.portals.len();
        if node < np {
            let (a, ei, _) = self.portals[node];
            let t = &self.triangles[a];
            let (p, q) = t.edge(ei);
            ((p + q) * 0.5, t.floor)
        } else {
            let li = (node - np) / 2;
            let l = &self.stair_links[li];
            if (node - np) % 2 == 0 {
                (l.lower_node, l.lower_floor)
            } else {
                (l.upper_node, l.upper_floor)
            }
        }
    }

    fn node_z(&self, node: usize) -> f64 {
        let (_, f) = self.node_point(node);
        self.floors[&f].z_cm
    }

    fn snap(&self, pose: &PlacedPose) -> Result<(Vec2, usize), NavError> {
        if !self.floors.contains_key(&pose.floor) {
            return Err(NavError::UnknownFloor(pose.floor));
        }
        let p = pose.xy();
        if let Some(t) = self.locate(pose.floor, p) {
            return Ok((p, t));
        }
        let q = self.project_to_walkable(pose.floor, p);
        if q.distance(p) > SNAP_TOLERANCE_CM {
            return Err(NavError::Unreachable);
        }
        // Nudge inside along the projection direction to land in a triangle.
        let t = self
            .locate(pose.floor, q)
            .ok_or(NavError::OffMesh { floor: pose.floor, x: p.x, y: p.y })?;
        Ok((q, t))
    }

    /// Shortest walking route between two placed poses.
    pub fn shortest_path(&self, a: &PlacedPose, b: &PlacedPose) -> Result<PathResult, NavError> {
        self.shortest_path_with(a, b, &|_, _| true)
    }

    /// Shortest route that only uses stair links accepted by `allow`.
    pub fn shortest_path_with(
        &self,
        a: &PlacedPose,
        b: &PlacedPose,
        allow: &dyn Fn(usize, &StairLink) -> bool,
    ) -> Result<PathResult, NavError> {
        let (pa, ta) = self.snap(a)?;
        let (pb, tb) = self.snap(b)?;
        let za = self.floors[&a.floor].z_cm;
        let zb = self.floors[&b.floor].z_cm;
        let goal3 = Vec3::with_xy(pb, zb);

        // Node ids: graph nodes, then START and GOAL.
        let n_graph = self.portals.len() + 2 * self.stair_links.len();
        let start = n_graph;
        let goal = n_graph + 1;
        let point3 = |n: usize| -> Vec3 {
            if n == start {
                Vec3::with_xy(pa, za)
            } else if n == goal {
                goal3
            } else {
                let (p, _) = self.node_point(n);
                Vec3::with_xy(p, self.node_z(n))
            }
        };
        let h = |n: usize| point3(n).distance(goal3);

        let mut dist: HashMap<usize, f64> = HashMap::new();
        let mut prev: HashMap<usize, usize> = HashMap::new();
        let mut heap = BinaryHeap::new();
        dist.insert(start, 0.0);
        heap.push(QueueItem { f: h(start), node: start });
        let mut closed = HashSet::new();
        while let Some(QueueItem { node, .. }) = heap.pop() {
            if !closed.insert(node) {
                continue;
            }
            if node == goal {
                break;
            }
            let g = dist[&node];
            let here = point3(node);
            let mut relax = |next: usize, cost: f64, heap: &mut BinaryHeap<QueueItem>| {
                let ng = g + cost;
                if dist.get(&next).map_or(true, |&d| ng < d) {
                    dist.insert(next, ng);
                    prev.insert(next, node);
                    heap.push(QueueItem { f: ng + h(next), node: next });
                }
            };
            // Triangles this node lies on.
            let tris: Vec<usize> = if node == start {
                vec![ta]
            } else if node < self.portals.len() {
                let (x, _, y) = self.portals[node];
                vec![x, y]
            } else {
                let li = (node - self.portals.len()) / 2;
                let l = &self.stair_links[li];
                let (other, cost) = if (node - self.portals.len()) % 2 == 0 {
                    (node + 1, l.length_cm)
                } else {
                    (node - 1, l.length_cm)
                };
                if allow(li, l) {
                    relax(other, cost, &mut heap);
                }
                vec![if (node - self.portals.len()) % 2 == 0 { l.lower_tri } else { l.upper_tri }]
            };
            for t in tris {
                for &m in &self.tri_nodes[t] {
                    if m != node {
                        let c = point3(m).distance(here);
                        relax(m, c, &mut heap);
                    }
                }
                if t == tb {
                    relax(goal, here.distance(goal3), &mut heap);
                }
            }
        }
        if !dist.contains_key(&goal) {
            return Err(NavError::Unreachable);
        }
        let mut nodes = vec![goal];
        let mut cur = goal;
        while let Some(&p) = prev.get(&cur) {
            nodes.push(p);
            cur = p;
        }
        nodes.reverse();
        Ok(self.assemble(&nodes, start, goal, (pa, ta, a.floor), (pb, b.floor)))
    }

    fn assemble(
        &self,
        nodes: &[usize],
        start: usize,
        goal: usize,
        (pa, ta, fa): (Vec2, usize, FloorId),
        (pb, fb): (Vec2, FloorId),
    ) -> PathResult {
        let np = self.portals.len();
        let mut waypoints: Vec<Vec3> = Vec::new();
        let mut floors_visited = vec![fa];
        let mut stairs = Vec::new();
        let mut leg_start = pa;
        let mut leg_floor = fa;
        let mut cur_tri = ta;
        let mut portals: Vec<(Vec2, Vec2)> = Vec::new();
        let mut i = 0;
        while i < nodes.len() {
            let n = nodes[i];
            if n == start {
                i += 1;
                continue;
            }
            if n == goal {
                let pts = funnel(leg_start, pb, &portals);
                push_leg(&mut waypoints, &pts, self.floors[&leg_floor].z_cm);
                break;
            }
            if n < np {
                let (x, ex, y) = self.portals[n];
                let (p, q) = self.triangles[x].edge(ex);
                // Moving out of x through its CCW edge p->q: q is on the left.
                if cur_tri == x {
                    portals.push((q, p));
                    cur_tri = y;
                } else {
                    portals.push((p, q));
                    cur_tri = x;
                }
                i += 1;
                continue;
            }
            // Stair node; the next node must be its partner.
            let li = (n - np) / 2;
            let l = &self.stair_links[li];
            let entering_lower = (n - np) % 2 == 0;
            let (entry, exit_floor, exit_tri) = if entering_lower {
                (l.lower_node, l.upper_floor, l.upper_tri)
            } else {
                (l.upper_node, l.lower_floor, l.lower_tri)
            };
            let pts = funnel(leg_start, entry, &portals);
            push_leg(&mut waypoints, &pts, self.floors[&leg_floor].z_cm);
            portals.clear();
            let start_index = waypoints.len().saturating_sub(1);
            let ramp: Vec<Vec3> = if entering_lower {
                l.ramp.clone()
            } else {
                l.ramp.iter().rev().copied().collect()
            };
            for p in ramp.into_iter().skip(1) {
                waypoints.push(p);
            }
            stairs.push(StairTraversal { link: li, start_index, descending: !entering_lower });
            leg_start = if entering_lower { l.upper_node } else { l.lower_node };
            leg_floor = exit_floor;
            cur_tri = exit_tri;
            if floors_visited.last() != Some(&exit_floor) {
                floors_visited.push(exit_floor);
            }
            // Skip the partner node.
            i += 2;
        }
        if floors_visited.last() != Some(&fb) {
            floors_visited.push(fb);
        }
        let length_cm = polyline_length(&waypoints);
        PathResult { waypoints, length_cm, floors_visited, stairs }
    }

    /// JSON debug dump of triangles and stair links.
    pub fn dump_json(&self) -> String {
        serde_json::to_string_pretty(&MeshDump { triangles: &self.triangles, stair_links: &self.stair_links })
            .expect("mesh serializes")
    }
}

fn push_leg(out: &mut Vec<Vec3>, pts: &[Vec2], z: f64) {
    for p in pts {
        let q = Vec3::with_xy(*p, z);
        if out.last().map_or(true, |l| l.distance(q) > 1e-9) {
            out.push(q);
        }
    }
}

/// String-pulling through a channel of `(left, right)` portals.
pub fn funnel(start: Vec2, end: Vec2, portals: &[(Vec2, Vec2)]) -> Vec<Vec2> {
    let mut all = Vec::with_capacity(portals.len() + 2);
    all.push((start, start));
    all.extend_from_slice(portals);
    all.push((end, end));

    let left_of = |a: Vec2, b: Vec2, c: Vec2| (b - a).cross(c - a);
    let mut path = vec![start];
    let mut apex = start;
    let (mut left, mut right) = (start, start);
    let (mut li, mut ri) = (0usize, 0usize);
    let mut i = 1;
    while i < all.len() {
        let (pl, pr) = all[i];
        // Right side.
        if left_of(apex, right, pr) >= 0.0 {
            if apex == right || left_of(apex, left, pr) < 0.0 {
                right = pr;
                ri = i;
            } else {
                apex = left;
                if path.last() != Some(&apex) {
                    path.push(apex);
                }
                right = apex;
                ri = li;
                i = li + 1;
                continue;
            }
        }
        // Left side.
        if left_of(apex, left, pl) <= 0.0 {
            if apex == left || left_of(apex, right, pl) > 0.0 {
                left = pl;
                li = i;
            } else {
                apex = right;
                if path.last() != Some(&apex) {
                    path.push(apex);
                }
                left = apex;
                li = ri;
                i = ri + 1;
                continue;
            }
        }
        i += 1;
    }
    if path.last() != Some(&end) {
        path.push(end);
    }
    path
}
