//! Procedural apartments: rectangular rooms on a row layout, doorways in
//! shared walls, box-shaped furniture, and a ray-cast depth/instance renderer.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3};
use crate::plausibility::VetoTable;
use crate::scene::camera::{Intrinsics, Pose};
use crate::scene::frame::{hash_parts, Frame, BACKGROUND};
use crate::scene::partition::{LabeledRect, RegionPartition};

pub const DEFAULT_REGION_LABELS: &[&str] = &[
    "kitchen",
    "bedroom",
    "bathroom",
    "living room",
    "office",
    "lobby",
    "TV room",
    "dining room",
    "laundry",
    "study",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectClass {
    pub name: String,
    /// Nominal footprint width, depth and height in meters.
    pub size: [f64; 3],
}

impl ObjectClass {
    pub fn new(name: &str, w: f64, d: f64, h: f64) -> Self {
        ObjectClass {
            name: name.to_string(),
            size: [w, d, h],
        }
    }
}

pub fn default_object_classes() -> Vec<ObjectClass> {
    vec![
        ObjectClass::new("bed", 2.0, 1.6, 0.6),
        ObjectClass::new("sofa", 2.0, 0.9, 0.85),
        ObjectClass::new("table", 1.2, 0.8, 0.75),
        ObjectClass::new("chair", 0.55, 0.55, 0.9),
        ObjectClass::new("tv", 1.1, 0.4, 0.9),
        ObjectClass::new("cabinet", 1.0, 0.5, 1.8),
        ObjectClass::new("plant", 0.5, 0.5, 1.1),
        ObjectClass::new("sink", 0.7, 0.55, 0.9),
        ObjectClass::new("toilet", 0.5, 0.7, 0.8),
        ObjectClass::new("desk", 1.3, 0.65, 0.75),
        ObjectClass::new("lamp", 0.45, 0.45, 1.5),
        ObjectClass::new("bookshelf", 0.9, 0.4, 1.9),
        ObjectClass::new("bathtub", 1.6, 0.75, 0.6),
        ObjectClass::new("oven", 0.7, 0.65, 0.9),
        ObjectClass::new("refrigerator", 0.8, 0.75, 1.8),
        ObjectClass::new("cup", 0.4, 0.4, 0.4),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub rooms: usize,
    pub objects: usize,
    /// Number of classes placed twice, in two different rooms. Counted
    /// inside `objects`.
    pub paired_objects: usize,
    pub seed: u64,
    pub frames_per_room: usize,
    pub wall_height: f64,
    pub wall_thickness: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub focal_length: f64,
    pub camera_height: f64,
    pub camera_pitch_deg: f64,
    /// Pitch of every other view, steep enough to see the floor near the
    /// camera.
    pub low_pitch_deg: f64,
    pub region_labels: Vec<String>,
    pub object_classes: Vec<ObjectClass>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            rooms: 4,
            objects: 12,
            paired_objects: 0,
            seed: 7,
            frames_per_room: 16,
            wall_height: 2.6,
            wall_thickness: 0.1,
            image_width: 80,
            image_height: 60,
            focal_length: 60.0,
            camera_height: 1.4,
            camera_pitch_deg: -20.0,
            low_pitch_deg: -55.0,
            region_labels: DEFAULT_REGION_LABELS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            object_classes: default_object_classes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub label: String,
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Room {
    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }

    pub fn center(&self) -> [f64; 2] {
        [
            (self.min[0] + self.max[0]) / 2.0,
            (self.min[1] + self.max[1]) / 2.0,
        ]
    }
}

/// Which coordinate is constant along the wall holding the doorway.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallAxis {
    /// Wall on a line `x = const`.
    ConstX,
    /// Wall on a line `y = const`.
    ConstY,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Doorway {
    pub rooms: [usize; 2],
    pub center: [f64; 2],
    pub width: f64,
    pub axis: WallAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: i32,
    pub class: String,
    pub bbox: Aabb,
    pub room: usize,
    /// Synthetic detector confidence, fixed per object.
    pub confidence: f32,
}

pub const DOOR_HEIGHT: f64 = 2.1;
const DOOR_WIDTH: f64 = 1.0;
const MIN_DOOR_OVERLAP: f64 = 1.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    #[serde(default)]
    pub rooms: Vec<Room>,
    #[serde(default)]
    pub doorways: Vec<Doorway>,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    #[serde(default, with = "pose_list")]
    pub trajectory: Vec<Pose>,
    pub partition: RegionPartition,
    pub intrinsics: Intrinsics,
    pub bounds: Aabb,
    #[serde(default = "default_wall_thickness")]
    pub wall_thickness: f64,
}

fn default_wall_thickness() -> f64 {
    0.1
}

impl SyntheticScene {
    /// Assembles a scene from explicit parts; validates the invariants.
    pub fn from_parts(
        rooms: Vec<Room>,
        doorways: Vec<Doorway>,
        objects: Vec<SceneObject>,
        trajectory: Vec<Pose>,
        intrinsics: Intrinsics,
        wall_height: f64,
        wall_thickness: f64,
    ) -> Result<Self> {
        let rects: Vec<LabeledRect> = rooms
            .iter()
            .map(|r| LabeledRect {
                label: r.label.clone(),
                min: r.min,
                max: r.max,
            })
            .collect();
        let partition = RegionPartition::from_rects(&rects)?;
        let [x0, y0, x1, y1] = partition.bounds;
        let scene = SyntheticScene {
            rooms,
            doorways,
            objects,
            trajectory,
            partition,
            intrinsics,
            bounds: Aabb::new([x0, y0, 0.0], [x1, y1, wall_height]),
            wall_thickness,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn wall_height(&self) -> f64 {
        self.bounds.max[2]
    }

    pub fn validate(&self) -> Result<()> {
        self.partition.validate()?;
        self.intrinsics.validate()?;
        for pose in &self.trajectory {
            pose.validate()?;
        }
        for d in &self.doorways {
            if d.rooms[0] == d.rooms[1] || d.rooms.iter().any(|&r| r >= self.rooms.len()) {
                return Err(Error::GenerationFailed(format!(
                    "doorway joins rooms {:?}",
                    d.rooms
                )));
            }
        }
        for o in &self.objects {
            let room = self.rooms.get(o.room).ok_or_else(|| {
                Error::GenerationFailed(format!("object {} names room {}", o.id, o.room))
            })?;
            let inside = room.contains_xy(o.bbox.min[0], o.bbox.min[1])
                && room.contains_xy(o.bbox.max[0], o.bbox.max[1]);
            if !inside || o.id < 0 {
                return Err(Error::GenerationFailed(format!(
                    "object {} ({}) is not inside its room",
                    o.id, o.class
                )));
            }
        }
        for r in &self.rooms {
            let c = r.center();
            if self.partition.region_of(c[0], c[1])? != r.label {
                return Err(Error::GenerationFailed(format!(
                    "partition disagrees with room {}",
                    r.label
                )));
            }
        }
        Ok(())
    }

    pub fn region_labels(&self) -> &[String] {
        &self.partition.regions
    }

    pub fn object(&self, id: i32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Static geometry: walls, lintels, floor and ceiling slabs.
    pub fn structure_boxes(&self) -> Vec<Aabb> {
        let t = self.wall_thickness;
        let h = self.wall_height();
        let b = &self.bounds;
        let mut boxes = vec![
            Aabb::new(
                [b.min[0] - t, b.min[1] - t, -t],
                [b.max[0] + t, b.max[1] + t, 0.0],
            ),
            Aabb::new(
                [b.min[0] - t, b.min[1] - t, h],
                [b.max[0] + t, b.max[1] + t, h + t],
            ),
        ];
        for room in &self.rooms {
            // (constant coordinate, span start, span end, axis, outward sign)
            let edges = [
                (
                    room.min[0],
                    room.min[1],
                    room.max[1],
                    WallAxis::ConstX,
                    -1.0,
                ),
                (room.max[0], room.min[1], room.max[1], WallAxis::ConstX, 1.0),
                (
                    room.min[1],
                    room.min[0],
                    room.max[0],
                    WallAxis::ConstY,
                    -1.0,
                ),
                (room.max[1], room.min[0], room.max[0], WallAxis::ConstY, 1.0),
            ];
            for (c, s0, s1, axis, outward) in edges {
                let exterior = match axis {
                    WallAxis::ConstX => c == b.min[0] || c == b.max[0],
                    WallAxis::ConstY => c == b.min[1] || c == b.max[1],
                };
                let (lo, hi) = if exterior {
                    if outward < 0.0 {
                        (c - t, c)
                    } else {
                        (c, c + t)
                    }
                } else {
                    (c - t / 2.0, c + t / 2.0)
                };
                let mut gaps: Vec<(f64, f64)> = self
                    .doorways
                    .iter()
                    .filter(|d| d.axis == axis)
                    .filter(|d| {
                        let (dc, ds) = match axis {
                            WallAxis::ConstX => (d.center[0], d.center[1]),
                            WallAxis::ConstY => (d.center[1], d.center[0]),
                        };
                        dc == c && ds > s0 && ds < s1
                    })
                    .map(|d| {
                        let ds = match axis {
                            WallAxis::ConstX => d.center[1],
                            WallAxis::ConstY => d.center[0],
                        };
                        (ds - d.width / 2.0, ds + d.width / 2.0)
                    })
                    .collect();
                gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut cursor = s0;
                let mut push = |a: f64, bnd: f64, z0: f64, z1: f64| {
                    if bnd - a <= 1e-9 {
                        return;
                    }
                    boxes.push(match axis {
                        WallAxis::ConstX => Aabb::new([lo, a, z0], [hi, bnd, z1]),
                        WallAxis::ConstY => Aabb::new([a, lo, z0], [bnd, hi, z1]),
                    });
                };
                for (g0, g1) in gaps {
                    push(cursor, g0, 0.0, h);
                    push(g0, g1, DOOR_HEIGHT, h);
                    cursor = g1;
                }
                push(cursor, s1, 0.0, h);
            }
        }
        boxes
    }

    pub fn render_frame(&self, pose_index: usize) -> Result<Frame> {
        let pose = *self.trajectory.get(pose_index).ok_or_else(|| {
            Error::OutOfBounds(format!(
                "pose index {pose_index} outside trajectory of {}",
                self.trajectory.len()
            ))
        })?;
        Ok(render_with_pose(self, &self.structure_boxes(), pose))
    }

    pub fn render_all(&self) -> Vec<Frame> {
        use rayon::prelude::*;
        let structure = self.structure_boxes();
        self.trajectory
            .par_iter()
            .map(|pose| render_with_pose(self, &structure, *pose))
            .collect()
    }
}

/// Ray casts every pixel through `pose`; depth is the camera-frame z of the
/// nearest hit.
pub fn render_with_pose(scene: &SyntheticScene, structure: &[Aabb], pose: Pose) -> Frame {
    let intr = scene.intrinsics;
    let n = intr.pixel_count();
    let mut depth = vec![0.0f32; n];
    let mut ids = vec![BACKGROUND; n];
    let origin = pose.position();
    for v in 0..intr.height {
        for u in 0..intr.width {
            let cam = nalgebra::Vector3::new(
                (u as f64 - intr.cx) / intr.fx,
                (v as f64 - intr.cy) / intr.fy,
                1.0,
            );
            let w = pose.rotation * cam;
            let dir = [w.x, w.y, w.z];
            let mut best = f64::INFINITY;
            let mut best_id = BACKGROUND;
            for b in structure {
                if let Some(t) = b.ray_hit(origin, dir, 1e-9) {
                    if t < best {
                        best = t;
                    }
                }
            }
            for o in &scene.objects {
                if let Some(t) = o.bbox.ray_hit(origin, dir, 1e-9) {
                    if t < best {
                        best = t;
                        best_id = o.id;
                    }
                }
            }
            let idx = v as usize * intr.width as usize + u as usize;
            if best.is_finite() {
                depth[idx] = best as f32;
                ids[idx] = best_id;
            }
        }
    }
    let mut labels = BTreeMap::new();
    let mut confs = BTreeMap::new();
    for &id in ids.iter().filter(|&&id| id != BACKGROUND) {
        if let Some(o) = scene.object(id) {
            labels.entry(id).or_insert_with(|| o.class.clone());
            confs.entry(id).or_insert(o.confidence);
        }
    }
    Frame {
        depth,
        instance_ids: ids,
        instance_labels: labels,
        instance_confidences: confs,
        pose,
        intrinsics: intr,
    }
}

fn snap_wall(v: f64) -> f64 {
    (v * 10.0).round() / 10.0 + 0.0
}

fn round_cm(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Generates a reproducible apartment. The same config always yields the
/// same scene.
pub fn generate_scene(cfg: &SceneConfig) -> Result<SyntheticScene> {
    generate_scene_with_vetoes(cfg, &VetoTable::default())
}

pub fn generate_scene_with_vetoes(cfg: &SceneConfig, vetoes: &VetoTable) -> Result<SyntheticScene> {
    let n = cfg.rooms;
    if n == 0 {
        return Err(Error::GenerationFailed(
            "room count must be at least 1".into(),
        ));
    }
    if n > cfg.region_labels.len() {
        return Err(Error::GenerationFailed(format!(
            "{n} rooms requested but only {} region labels available",
            cfg.region_labels.len()
        )));
    }
    if cfg.paired_objects * 2 > cfg.objects {
        return Err(Error::GenerationFailed(
            "paired objects exceed object count".into(),
        ));
    }
    if cfg.paired_objects > 0 && n < 2 {
        return Err(Error::GenerationFailed(
            "paired objects need at least two rooms".into(),
        ));
    }
    if cfg.objects > 0 && cfg.object_classes.is_empty() {
        return Err(Error::GenerationFailed("object vocabulary is empty".into()));
    }
    if cfg.frames_per_room == 0 {
        return Err(Error::GenerationFailed(
            "frames_per_room must be at least 1".into(),
        ));
    }
    let intrinsics = Intrinsics::centered(cfg.focal_length, cfg.image_width, cfg.image_height)
        .map_err(|e| Error::GenerationFailed(e.to_string()))?;
    // Dense requests can leave no room for an object; retry with a derived
    // stream. Attempt 0 uses the seed itself.
    let mut last = None;
    for attempt in 0..MAX_LAYOUT_ATTEMPTS {
        let seed = if attempt == 0 {
            cfg.seed
        } else {
            hash_parts(&[
                &cfg.seed.to_le_bytes(),
                b"layout".as_slice(),
                &attempt.to_le_bytes(),
            ])
        };
        match layout(
            cfg,
            vetoes,
            intrinsics,
            &mut ChaCha8Rng::seed_from_u64(seed),
        ) {
            Ok(scene) => return Ok(scene),
            Err(e @ Error::GenerationFailed(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

const MAX_LAYOUT_ATTEMPTS: u32 = 32;

fn layout(
    cfg: &SceneConfig,
    vetoes: &VetoTable,
    intrinsics: Intrinsics,
    rng: &mut ChaCha8Rng,
) -> Result<SyntheticScene> {
    let n = cfg.rooms;

    // Row layout: `cols` rooms per row, the last row takes the remainder.
    // Walls sit on a 10 cm grid so they align with voxel cells of 5 or 10 cm.
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let total_w = snap_wall((0..cols).map(|_| rng.random_range(3.6..5.0)).sum::<f64>());
    let row_h: Vec<f64> = (0..rows)
        .map(|_| snap_wall(rng.random_range(3.6..5.0)))
        .collect();
    let total_h: f64 = row_h.iter().sum();
    let x0 = snap_wall(-total_w / 2.0);
    let mut y = snap_wall(-total_h / 2.0);
    let mut rooms = Vec::with_capacity(n);
    for (r, h) in row_h.iter().enumerate() {
        let k = if r + 1 == rows {
            n - cols * (rows - 1)
        } else {
            cols
        };
        let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.85..1.2)).collect();
        let wsum: f64 = weights.iter().sum();
        let mut x = x0;
        for (i, w) in weights.iter().enumerate() {
            let x_end = if i + 1 == k {
                snap_wall(x0 + total_w)
            } else {
                snap_wall(x + total_w * w / wsum)
            };
            rooms.push(Room {
                label: cfg.region_labels[rooms.len()].clone(),
                min: [x, y],
                max: [x_end, snap_wall(y + h)],
            });
            x = x_end;
        }
        y = snap_wall(y + h);
    }

    // A doorway in every shared wall long enough to hold one.
    let mut doorways = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let (ra, rb) = (&rooms[a], &rooms[b]);
            if ra.max[0] == rb.min[0] || rb.max[0] == ra.min[0] {
                let c = if ra.max[0] == rb.min[0] {
                    ra.max[0]
                } else {
                    ra.min[0]
                };
                let lo = ra.min[1].max(rb.min[1]);
                let hi = ra.max[1].min(rb.max[1]);
                if hi - lo >= MIN_DOOR_OVERLAP {
                    doorways.push(Doorway {
                        rooms: [a, b],
                        center: [c, round_cm((lo + hi) / 2.0)],
                        width: DOOR_WIDTH,
                        axis: WallAxis::ConstX,
                    });
                }
            } else if ra.max[1] == rb.min[1] || rb.max[1] == ra.min[1] {
                let c = if ra.max[1] == rb.min[1] {
                    ra.max[1]
                } else {
                    ra.min[1]
                };
                let lo = ra.min[0].max(rb.min[0]);
                let hi = ra.max[0].min(rb.max[0]);
                if hi - lo >= MIN_DOOR_OVERLAP {
                    doorways.push(Doorway {
                        rooms: [a, b],
                        center: [round_cm((lo + hi) / 2.0), c],
                        width: DOOR_WIDTH,
                        axis: WallAxis::ConstY,
                    });
                }
            }
        }
    }

    // Object placements: (class index, room).
    let classes = &cfg.object_classes;
    let allowed =
        |ci: usize, room: usize| !vetoes.is_implausible(&classes[ci].name, &rooms[room].label);
    let mut placements: Vec<(usize, usize)> = Vec::new();
    let mut paired_classes: Vec<usize> = Vec::new();
    let mut order: Vec<usize> = (0..classes.len()).collect();
    shuffle(&mut order, rng);
    for &ci in &order {
        if paired_classes.len() == cfg.paired_objects {
            break;
        }
        let ok_rooms: Vec<usize> = (0..n).filter(|&r| allowed(ci, r)).collect();
        if ok_rooms.len() < 2 {
            continue;
        }
        let first = ok_rooms[rng.random_range(0..ok_rooms.len())];
        let rest: Vec<usize> = ok_rooms.iter().copied().filter(|&r| r != first).collect();
        let second = rest[rng.random_range(0..rest.len())];
        paired_classes.push(ci);
        placements.push((ci, first));
        placements.push((ci, second));
    }
    if paired_classes.len() < cfg.paired_objects {
        return Err(Error::GenerationFailed(
            "not enough classes can be placed in two rooms".into(),
        ));
    }
    let singles = cfg.objects - placements.len();
    for i in 0..singles {
        let room = (i + rng.random_range(0..n)) % n;
        // Singles repeat a class only when the vocabulary runs out.
        let open: Vec<usize> = (0..classes.len())
            .filter(|ci| !paired_classes.contains(ci) && allowed(*ci, room))
            .collect();
        let fresh: Vec<usize> = open
            .iter()
            .copied()
            .filter(|ci| !placements.iter().any(|p| p.0 == *ci))
            .collect();
        let candidates = if fresh.is_empty() { open } else { fresh };
        if candidates.is_empty() {
            return Err(Error::GenerationFailed(format!(
                "no plausible class for room {}",
                rooms[room].label
            )));
        }
        placements.push((candidates[rng.random_range(0..candidates.len())], room));
    }

    // Large footprints first; a single that does not fit moves to the next
    // plausible room.
    placements.sort_by(|a, b| {
        let fa = classes[a.0].size[0] * classes[a.0].size[1];
        let fb = classes[b.0].size[0] * classes[b.0].size[1];
        fb.total_cmp(&fa)
    });
    let mut objects: Vec<SceneObject> = Vec::new();
    for (ci, home) in placements {
        let class = &classes[ci];
        let paired = paired_classes.contains(&ci);
        let mut size = class
            .size
            .map(|s| round_cm(s * rng.random_range(0.85..1.15)));
        if rng.random_bool(0.5) {
            size.swap(0, 1);
        }
        let tries: Vec<usize> = if paired {
            vec![home]
        } else {
            (0..n)
                .map(|k| (home + k) % n)
                .filter(|&r| allowed(ci, r))
                .collect()
        };
        let mut placed = None;
        for room_idx in tries {
            let room = &rooms[room_idx];
            if let Some(bbox) = place_box(room, size, &doorways, &objects, rng) {
                placed = Some((bbox, room_idx));
                break;
            }
        }
        let (bbox, room_idx) = placed.ok_or_else(|| {
            Error::GenerationFailed(format!(
                "could not place {} in {}",
                class.name, rooms[home].label
            ))
        })?;
        objects.push(SceneObject {
            id: objects.len() as i32,
            class: class.name.clone(),
            bbox,
            room: room_idx,
            confidence: rng.random_range(0.5f32..=1.0f32),
        });
    }

    // Each room is surveyed by a full turn of views from its most open spot.
    let pitches = [
        cfg.camera_pitch_deg.to_radians(),
        cfg.low_pitch_deg.to_radians(),
    ];
    let mut trajectory = Vec::with_capacity(n * cfg.frames_per_room);
    for (ri, room) in rooms.iter().enumerate() {
        let (anchor, clearance) = camera_anchor(room, objects.iter().filter(|o| o.room == ri));
        let jitter = (clearance - 0.3).clamp(0.0, 0.3);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        for k in 0..cfg.frames_per_room {
            let jx = rng.random_range(-1.0..1.0) * jitter / std::f64::consts::SQRT_2;
            let jy = rng.random_range(-1.0..1.0) * jitter / std::f64::consts::SQRT_2;
            let yaw = phase
                + std::f64::consts::TAU * k as f64 / cfg.frames_per_room as f64
                + rng.random_range(-0.1..0.1);
            let pitch = pitches[k % 2];
            trajectory.push(Pose::from_yaw_pitch(
                [anchor[0] + jx, anchor[1] + jy, cfg.camera_height],
                yaw,
                pitch,
            ));
        }
    }

    SyntheticScene::from_parts(
        rooms,
        doorways,
        objects,
        trajectory,
        intrinsics,
        cfg.wall_height,
        cfg.wall_thickness,
    )
}

fn place_box(
    room: &Room,
    size: [f64; 3],
    doorways: &[Doorway],
    objects: &[SceneObject],
    rng: &mut ChaCha8Rng,
) -> Option<Aabb> {
    let margin = 0.2;
    let lo_x = room.min[0] + margin + size[0] / 2.0;
    let hi_x = room.max[0] - margin - size[0] / 2.0;
    let lo_y = room.min[1] + margin + size[1] / 2.0;
    let hi_y = room.max[1] - margin - size[1] / 2.0;
    if lo_x >= hi_x || lo_y >= hi_y {
        return None;
    }
    for _ in 0..1000 {
        let cx = round_cm(rng.random_range(lo_x..hi_x));
        let cy = round_cm(rng.random_range(lo_y..hi_y));
        let bbox = Aabb::new(
            [cx - size[0] / 2.0, cy - size[1] / 2.0, 0.0],
            [cx + size[0] / 2.0, cy + size[1] / 2.0, size[2]],
        );
        if doorways
            .iter()
            .any(|d| bbox.distance_to([d.center[0], d.center[1], 0.5]) < 0.7)
        {
            continue;
        }
        let grown = Aabb::new(
            [bbox.min[0] - 0.15, bbox.min[1] - 0.15, 0.0],
            [bbox.max[0] + 0.15, bbox.max[1] + 0.15, 1.0],
        );
        if objects
            .iter()
            .any(|o| grown.intersection(&o.bbox).is_some())
        {
            continue;
        }
        return Some(bbox);
    }
    None
}

/// Point on a 10 cm lattice at least 0.8 m inside the room that is farthest
/// from every object footprint; ties go to the point nearest the center.
fn camera_anchor<'a>(
    room: &Room,
    objects: impl Iterator<Item = &'a SceneObject>,
) -> ([f64; 2], f64) {
    let objects: Vec<&SceneObject> = objects.collect();
    let c = room.center();
    let inset = 0.8;
    let steps = |lo: f64, hi: f64| ((hi - lo - 2.0 * inset) / 0.1).floor().max(0.0) as usize;
    let (nx, ny) = (
        steps(room.min[0], room.max[0]),
        steps(room.min[1], room.max[1]),
    );
    let mut best = (c, f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=nx {
        for j in 0..=ny {
            let p = [
                room.min[0] + inset + 0.1 * i as f64,
                room.min[1] + inset + 0.1 * j as f64,
            ];
            let clear = objects
                .iter()
                .map(|o| o.bbox.distance_to([p[0], p[1], o.bbox.center()[2]]))
                .fold(f64::INFINITY, f64::min);
            let off = (p[0] - c[0]).hypot(p[1] - c[1]);
            let clear_cap = clear.min(1.0);
            if clear_cap > best.2 + 1e-9 || (clear_cap > best.2 - 1e-9 && off < best.1) {
                best = (p, off, clear_cap);
            }
        }
    }
    let clearance = if objects.is_empty() { 1.0 } else { best.2 };
    (best.0, clearance)
}

fn shuffle<T>(v: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

/// Poses as row-major 4x4 matrices in JSON.
pub(crate) mod pose_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::scene::camera::Pose;

    pub fn serialize<S: Serializer>(poses: &[Pose], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<[[f64; 4]; 4]> = poses.iter().map(super::pose_rows).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Pose>, D::Error> {
        let rows: Vec<[[f64; 4]; 4]> = Vec::deserialize(d)?;
        rows.iter()
            .map(|m| super::pose_from_rows(m).map_err(serde::de::Error::custom))
            .collect()
    }
}

pub(crate) fn pose_rows(p: &Pose) -> [[f64; 4]; 4] {
    let m = p.to_matrix();
    let mut out = [[0.0; 4]; 4];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = m[(r, c)];
        }
    }
    out
}

pub(crate) fn pose_from_rows(rows: &[[f64; 4]; 4]) -> Result<Pose> {
    let m = nalgebra::Matrix4::from_fn(|r, c| rows[r][c]);
    Pose::from_matrix(&m)
}

pub fn point_in_any_room(scene: &SyntheticScene, p: Point3) -> bool {
    scene.rooms.iter().any(|r| r.contains_xy(p[0], p[1]))
}
