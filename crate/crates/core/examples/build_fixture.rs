//! Regenerates `fixtures/ceg_fixture.json`.
//!
//! cargo run -p wayfind-core --example build_fixture > crates/core/fixtures/ceg_fixture.json

use wayfind_core::building::*;
use wayfind_core::geometry::{Vec2, Vec3};

const L: f64 = 15000.0;
const STORY: f64 = 400.0;
const STAIR_X: [f64; 5] = [750.0, 4125.0, 7500.0, 10875.0, 14250.0];
const STAIR_LABELS: [&str; 5] = ["A", "B", "C", "D", "E"];
const NARROW_CROSS: [f64; 6] = [1500.0, 3000.0, 6300.0, 8700.0, 12300.0, 13500.0];
const WIDE_CROSS: [f64; 2] = [4500.0, 10500.0];
const FIRE_DOORS: [f64; 4] = [2250.0, 6000.0, 9000.0, 12000.0];

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Vec2> {
    vec![Vec2::new(x0, y0), Vec2::new(x1, y0), Vec2::new(x1, y1), Vec2::new(x0, y1)]
}

fn z(floor: u8) -> f64 {
    (floor as f64 - 1.0) * STORY
}

/// Floors 1 and 3 land south (off corridor A), floors 2 and 4 north.
fn south_landing(floor: u8) -> bool {
    floor % 2 == 1
}

fn landing(xs: f64, floor: u8) -> Vec<Vec2> {
    if south_landing(floor) {
        rect(xs - 250.0, 0.0, xs + 250.0, 300.0)
    } else {
        rect(xs - 250.0, 700.0, xs + 250.0, 1000.0)
    }
}

fn floor(id: u8) -> Floor {
    let mut walkable = vec![WalkablePolygon {
        id: format!("f{id}-main-a"),
        kind: WalkableKind::MainCorridor,
        polygon: rect(-150.0, -120.0, L + 150.0, 120.0),
    }];
    let mut obstacles = Vec::new();
    let mut rooms = Vec::new();
    let mut signs = Vec::new();
    let experiment = id >= 2;
    if experiment {
        walkable.push(WalkablePolygon {
            id: format!("f{id}-main-b"),
            kind: WalkableKind::MainCorridor,
            polygon: rect(-150.0, 880.0, L + 150.0, 1120.0),
        });
        let mut cross: Vec<(f64, f64)> = NARROW_CROSS.iter().map(|x| (*x, 150.0)).collect();
        cross.extend(WIDE_CROSS.iter().map(|x| (*x, 400.0)));
        cross.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (i, (x, w)) in cross.iter().enumerate() {
            walkable.push(WalkablePolygon {
                id: format!("f{id}-cross-{}", i + 1),
                kind: WalkableKind::CrossCorridor,
                polygon: rect(x - w / 2.0, 0.0, x + w / 2.0, 1000.0),
            });
        }
        for x in WIDE_CROSS {
            obstacles.push(Obstacle {
                id: format!("f{id}-pillar-{x}"),
                kind: ObstacleKind::Pillar,
                polygon: rect(x - 20.0, 480.0, x + 20.0, 520.0),
            });
        }
        if id == 2 {
            walkable.push(WalkablePolygon {
                id: "f2-central-hall".to_string(),
                kind: WalkableKind::Hall,
                polygon: rect(12500.0, 0.0, 13300.0, 1000.0),
            });
        }
        for nn in 1..=99u32 {
            let x = (nn as f64 / 99.0 * L * 1000.0).round() / 1000.0;
            let even = nn % 2 == 0;
            let (y, facing) = if even { (1120.0, Vec2::new(0.0, -1.0)) } else { (-120.0, Vec2::new(0.0, 1.0)) };
            let label = format!("{id}.{nn:02}");
            rooms.push(RoomDef {
                label: label.clone(),
                floor: id,
                door_pos: Vec2::new(x, y),
                side: if even { Side::Even } else { Side::Uneven },
            });
            signs.push(SignDef {
                id: format!("rn-{label}"),
                kind: SignKind::RoomNumber,
                position: Vec2::new(x + 70.0, y),
                facing,
                target: label,
                width_cm: 40.0,
            });
        }
        for x in FIRE_DOORS {
            for (k, (y, fy)) in [(-120.0, 1.0), (120.0, -1.0), (880.0, 1.0), (1120.0, -1.0)].iter().enumerate() {
                signs.push(SignDef {
                    id: format!("f{id}-fire-{x}-{k}"),
                    kind: SignKind::FireDoor,
                    position: Vec2::new(x, *y),
                    facing: Vec2::new(0.0, *fy),
                    target: format!("fd{x}"),
                    width_cm: 20.0,
                });
            }
        }
        for w in STAIR_X.windows(2).zip(STAIR_LABELS.iter()) {
            let x = (w.0[0] + w.0[1]) / 2.0;
            signs.push(SignDef {
                id: format!("f{id}-evac-{x}"),
                kind: SignKind::EvacuationSign,
                position: Vec2::new(x, -120.0),
                facing: Vec2::new(0.0, 1.0),
                target: w.1.to_string(),
                width_cm: 60.0,
            });
        }
    }
    for (xs, label) in STAIR_X.iter().zip(STAIR_LABELS) {
        walkable.push(WalkablePolygon {
            id: format!("f{id}-landing-{label}"),
            kind: WalkableKind::Landing,
            polygon: landing(*xs, id),
        });
        let (ey0, ey1, back_y, back_facing, plan_y) = if south_landing(id) {
            (190.0, 280.0, 300.0, -1.0, 210.0)
        } else {
            (720.0, 810.0, 700.0, 1.0, 790.0)
        };
        obstacles.push(Obstacle {
            id: format!("f{id}-elevator-{label}"),
            kind: ObstacleKind::Elevator,
            polygon: rect(xs - 240.0, ey0, xs - 170.0, ey1),
        });
        signs.push(SignDef {
            id: format!("f{id}-exit-sign-{label}"),
            kind: SignKind::ExitSign,
            position: Vec2::new(*xs, back_y),
            facing: Vec2::new(0.0, back_facing),
            target: label.to_string(),
            width_cm: 60.0,
        });
        if experiment {
            signs.push(SignDef {
                id: format!("f{id}-plan-{label}"),
                kind: SignKind::FloorPlan,
                position: Vec2::new(xs + 250.0, plan_y),
                facing: Vec2::new(-1.0, 0.0),
                target: format!("floor{id}"),
                width_cm: 60.0,
            });
        } else {
            signs.push(SignDef {
                id: format!("exit-door-sign-{label}"),
                kind: SignKind::ExitSign,
                position: Vec2::new(*xs, -120.0),
                facing: Vec2::new(0.0, 1.0),
                target: label.to_string(),
                width_cm: 100.0,
            });
        }
    }
    Floor { id, z_cm: z(id), walkable, obstacles, rooms, signs }
}

fn staircase(xs: f64, label: &str) -> Staircase {
    let (l, r) = (xs - 80.0, xs + 80.0);
    Staircase {
        label: label.to_string(),
        lower_floor: 1,
        upper_floor: 4,
        width_cm: 150.0,
        footprints: (1..=4).map(|f| StairFootprint { floor: f, polygon: landing(xs, f) }).collect(),
        ramp: vec![
            Vec3::new(l, 300.0, z(1)),
            Vec3::new(l, 700.0, z(2)),
            Vec3::new(r, 700.0, z(2)),
            Vec3::new(r, 300.0, z(3)),
            Vec3::new(l, 300.0, z(3)),
            Vec3::new(l, 700.0, z(4)),
        ],
    }
}

fn door_zone(id: &str, floor: u8, x: f64, corridor_y: f64, purpose: ZonePurpose) -> Zone {
    Zone { id: id.to_string(), floor, polygon: rect(x - 150.0, corridor_y - 120.0, x + 150.0, corridor_y + 120.0), purpose }
}

fn room_x(nn: u32) -> f64 {
    (nn as f64 / 99.0 * L * 1000.0).round() / 1000.0
}

fn main() {
    let floors: Vec<Floor> = (1..=4).map(floor).collect();
    let staircases = STAIR_X.iter().zip(STAIR_LABELS).map(|(x, l)| staircase(*x, l)).collect();
    let exits = STAIR_X
        .iter()
        .zip(STAIR_LABELS)
        .map(|(x, l)| ExitDef {
            label: l.to_string(),
            position: Vec2::new(*x, -120.0),
            is_main_entrance: l == "C",
            zone: format!("exit-{l}"),
        })
        .collect();
    let mut zones: Vec<Zone> = STAIR_X
        .iter()
        .zip(STAIR_LABELS)
        .map(|(x, l)| Zone {
            id: format!("exit-{l}"),
            floor: 1,
            polygon: rect(x - 100.0, -120.0, x + 100.0, -40.0),
            purpose: ZonePurpose::Exit,
        })
        .collect();
    zones.push(door_zone("spawn-4.02", 4, room_x(2), 1000.0, ZonePurpose::Spawn));
    zones.push(door_zone("trigger-2", 4, room_x(99), 0.0, ZonePurpose::Trigger));
    zones.push(door_zone("trigger-3", 2, room_x(1), 0.0, ZonePurpose::Trigger));
    zones.push(door_zone("trigger-4", 4, room_x(64), 1000.0, ZonePurpose::Trigger));
    zones.push(Zone {
        id: "central-point".to_string(),
        floor: 2,
        polygon: rect(12600.0, 250.0, 13200.0, 750.0),
        purpose: ZonePurpose::CentralPoint,
    });
    for f in 2..=4u8 {
        for x in WIDE_CROSS {
            zones.push(Zone {
                id: format!("wide-{f}-{x}"),
                floor: f,
                polygon: rect(x - 200.0, 120.0, x + 200.0, 880.0),
                purpose: ZonePurpose::WideIntersection,
            });
        }
    }
    let spec = BuildingSpec { name: "ceg_fixture".to_string(), floors, staircases, exits, zones };
    println!("{}", serde_json::to_string_pretty(&spec).unwrap());
}
