//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.
//!
//! Oracles here are independent of the code under test: region truth comes
//! from the generator's room rectangles, shortest paths from a plain
//! Dijkstra, and loss values from closed-form 2x2 arithmetic.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lopfield::embed::{
    build_feature_cloud, frame_view, voxel_key, EmbeddingProvider, EmbeddingVector, FeaturePoint,
    FeaturePointCloud, FusionConfig, SyntheticProvider,
};
use lopfield::field::{
    checkpoint_bytes, contrastive_loss, train, Activation, FieldHeads, LopField, LossConfig,
    TrainConfig,
};
use lopfield::geometry::distance;
use lopfield::hashgrid::{HashGrid, HashGridConfig};
use lopfield::numeric::Mat;
use lopfield::planner::astar;
use lopfield::query::{
    infer_batch, localize_image, localize_text, weighted_distance, LabelBank, DEFAULT_TOP_K,
    DEFAULT_VS_WEIGHT,
};
use lopfield::scene::synth::render_with_pose;
use lopfield::scene::{
    generate_scene, Frame, Intrinsics, Pose, SceneConfig, SyntheticScene, BACKGROUND,
};
use lopfield::topomap::{
    build_edges, build_map, compass, from_json, map_objects, quantize, to_json, Edge, EdgeType,
    MapperConfig, NodeType, ObservationRule, RuleDescriber, TopoGraph, Vertex,
};
use lopfield::{Aabb, Error, Point3};

type Check = Result<String, String>;

/// One trained synthetic apartment with its clouds.
struct Run {
    scene: SyntheticScene,
    frames: Vec<Frame>,
    train_cloud: FeaturePointCloud,
    holdout: FeaturePointCloud,
    field: LopField<f32>,
    bank: LabelBank,
    elapsed: Duration,
}

const HOLDOUT: usize = 1000;
const HOLDOUT_SEED: u64 = 99;

fn provider() -> SyntheticProvider {
    SyntheticProvider::new(1, 64, 64).unwrap()
}

fn scene_config(seed: u64) -> SceneConfig {
    SceneConfig {
        rooms: 4,
        objects: 14,
        paired_objects: 5,
        seed,
        ..Default::default()
    }
}

fn run_pipeline(seed: u64, fusion: &FusionConfig) -> Run {
    let t0 = Instant::now();
    let scene = generate_scene(&scene_config(seed)).unwrap();
    let frames = scene.render_all();
    let prov = provider();
    let full = build_feature_cloud(&frames, &scene.partition, &prov, fusion).unwrap();
    let (train_cloud, holdout) = full.split_holdout(HOLDOUT, HOLDOUT_SEED).unwrap();
    let (field, _) = train(
        &train_cloud,
        &HashGridConfig::desk(scene.bounds),
        &TrainConfig::default(),
        &LossConfig::default(),
    )
    .unwrap();
    let bank = LabelBank::from_provider(scene.region_labels(), &prov).unwrap();
    Run {
        scene,
        frames,
        train_cloud,
        holdout,
        field,
        bank,
        elapsed: t0.elapsed(),
    }
}

/// Room holding `p` in plan; wall points outside every room go to the
/// nearest one.
fn true_room(scene: &SyntheticScene, p: Point3) -> &str {
    let gap = |r: &lopfield::scene::Room| {
        let dx = (r.min[0] - p[0]).max(p[0] - r.max[0]).max(0.0);
        let dy = (r.min[1] - p[1]).max(p[1] - r.max[1]).max(0.0);
        dx.hypot(dy)
    };
    scene
        .rooms
        .iter()
        .min_by(|a, b| gap(a).total_cmp(&gap(b)))
        .map(|r| r.label.as_str())
        .unwrap()
}

fn accuracy(field: &LopField<f32>, run: &Run, points: &[Point3]) -> f64 {
    let inf = infer_batch(field, points, &run.bank, DEFAULT_VS_WEIGHT).unwrap();
    let hits = points
        .iter()
        .zip(&inf)
        .filter(|(p, i)| run.bank.labels[i.index] == true_room(&run.scene, **p))
        .count();
    hits as f64 / points.len() as f64
}

fn positions(cloud: &FeaturePointCloud) -> Vec<Point3> {
    cloud.points.iter().map(|p| p.position_f64()).collect()
}

fn region_inference(run: &Run) -> Check {
    let pts = positions(&run.holdout);
    let acc = accuracy(&run.field, run, &pts);
    let secs = run.elapsed.as_secs_f64();
    let detail = format!(
        "held-out accuracy {acc:.4} on {} points (>= 0.95), pipeline {secs:.0} s (<= 300 s)",
        pts.len()
    );
    if pts.len() == HOLDOUT && acc >= 0.95 && secs <= 300.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Pairs of same-class objects in different rooms; each pair passes when
/// both "<class> in the <room>" queries land within 0.5 m of their own
/// instance and in its room.
fn text_pairs(run: &Run) -> (usize, usize, Vec<String>) {
    let prov = provider();
    let samples = positions(&run.train_cloud);
    let mut by_class: BTreeMap<&str, Vec<&lopfield::scene::SceneObject>> = BTreeMap::new();
    for o in &run.scene.objects {
        by_class.entry(o.class.as_str()).or_default().push(o);
    }
    let (mut good, mut total, mut misses) = (0, 0, Vec::new());
    for (class, objs) in by_class {
        if objs.len() != 2 || objs[0].room == objs[1].room {
            continue;
        }
        total += 1;
        let mut pair_ok = true;
        for o in objs {
            let room = &run.scene.rooms[o.room].label;
            let q = format!("{class} in the {room}");
            let map = localize_text(&run.field, &q, &prov, &samples, DEFAULT_VS_WEIGHT).unwrap();
            let c = map.predicted_position(DEFAULT_TOP_K);
            let d = o.bbox.distance_to(c);
            let r = true_room(&run.scene, c);
            if d > 0.5 || r != room {
                pair_ok = false;
                misses.push(format!("'{q}' off by {d:.2} m in {r}"));
            }
        }
        if pair_ok {
            good += 1;
        }
    }
    (good, total, misses)
}

fn text_disambiguation(a: &Run, b: &Run) -> Check {
    let (ga, ta, mut ma) = text_pairs(a);
    let (gb, tb, mb) = text_pairs(b);
    ma.extend(mb);
    let (good, total) = (ga + gb, ta + tb);
    let detail = format!(
        "{good} of {total} same-class pairs resolved (>= 9 of 10){}",
        if ma.is_empty() {
            String::new()
        } else {
            format!("; misses: {}", ma.join(", "))
        }
    );
    if total == 10 && good >= 9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Twenty views from poses not on the training trajectory: five per room,
/// embedded from their visible content.
fn image_queries(run: &Run) -> Check {
    let prov = provider();
    let samples = positions(&run.train_cloud);
    let structure = run.scene.structure_boxes();
    let height = SceneConfig::default().camera_height;
    let mut dists = Vec::new();
    for (ri, room) in run.scene.rooms.iter().enumerate() {
        let c = room.center();
        for k in 0..5 {
            let yaw = (k as f64 * 72.0 + 17.0 * ri as f64).to_radians();
            let back = 0.3 * (room.max[0] - room.min[0]).min(room.max[1] - room.min[1]);
            let pos = [c[0] - back * yaw.cos(), c[1] - back * yaw.sin(), height];
            let frame = render_with_pose(
                &run.scene,
                &structure,
                Pose::from_yaw_pitch(pos, yaw, (-35f64).to_radians()),
            );
            let view = frame_view(&frame, &run.scene.partition).unwrap();
            let e = prov.embed_image(&view).unwrap();
            let map = localize_image(&run.field, &e, &samples).unwrap();
            let reference: Vec<Point3> = (0..frame.depth.len())
                .step_by(5)
                .filter_map(|i| frame.world_point(i))
                .collect();
            dists.push(weighted_distance(&map, DEFAULT_TOP_K, &reference).unwrap());
        }
    }
    let mean = dists.iter().sum::<f64>() / dists.len() as f64;
    let worst = dists.iter().cloned().fold(0.0, f64::max);
    let detail = format!(
        "mean similarity-weighted distance {mean:.3} m over {} views (<= 1.0), worst {worst:.3} m",
        dists.len()
    );
    if dists.len() == 20 && mean <= 1.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn unit_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn gradient_check() -> Check {
    let t0 = Instant::now();
    let bounds = Aabb::new([-2.0; 3], [2.0; 3]);
    let grid_cfg = HashGridConfig {
        levels: 4,
        features_per_level: 2,
        log2_table_size: 10,
        base_resolution: 4,
        finest_resolution: 32,
        bounds,
    };
    let grid = HashGrid::<f64>::new(grid_cfg, 3).unwrap();
    // Table values large enough that perturbations move the loss.
    let mut grid = grid;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for v in grid.tables.iter_mut() {
        *v = rng.random_range(-0.5..0.5);
    }
    let heads = FieldHeads::<f64>::new(grid.output_dim(), 16, 8, 8, Activation::Softplus, 4);
    let mut field = LopField::new(grid, heads, LossConfig::default()).unwrap();
    field.log_tau = 2.0;
    let batch: Vec<FeaturePoint> = (0..8)
        .map(|_| FeaturePoint {
            position: [0, 1, 2].map(|_| rng.random_range(-1.9f32..1.9)),
            e_v: EmbeddingVector(unit_vec(&mut rng, 8).iter().map(|&x| x as f32).collect()),
            e_s: EmbeddingVector(unit_vec(&mut rng, 8).iter().map(|&x| x as f32).collect()),
            weight: 1.0,
            dist: rng.random_range(0.5f32..3.0),
            conf: rng.random_range(0.6f32..1.0),
        })
        .collect();
    let refs: Vec<&FeaturePoint> = batch.iter().collect();
    let (_, g) = field.loss_and_gradients(&refs).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut check = |analytic: f64, perturb: &dyn Fn(&mut LopField<f64>, f64)| {
        let mut up = field.clone();
        perturb(&mut up, h);
        let mut down = field.clone();
        perturb(&mut down, -h);
        let fd = (up.loss_value(&refs).unwrap().total - down.loss_value(&refs).unwrap().total)
            / (2.0 * h);
        let denom = fd.abs().max(analytic.abs()).max(1e-8);
        worst = worst.max((fd - analytic).abs() / denom);
        checked += 1;
    };
    for i in 0..10 {
        let row = g.tables.rows[(i * 13) % g.tables.rows.len()];
        let j = i % 2;
        check(g.tables.get(row)[j], &|f, d| f.grid.row_mut(row)[j] += d);
    }
    for _ in 0..10 {
        let k = rng.random_range(0..field.heads.trunk_w.data.len());
        check(g.trunk_w.data[k], &|f, d| f.heads.trunk_w.data[k] += d);
    }
    for i in 0..5 {
        if i % 2 == 0 {
            let k = rng.random_range(0..field.heads.head_v_w.data.len());
            check(g.head_v_w.data[k], &|f, d| f.heads.head_v_w.data[k] += d);
        } else {
            let k = rng.random_range(0..field.heads.head_s_w.data.len());
            check(g.head_s_w.data[k], &|f, d| f.heads.head_s_w.data[k] += d);
        }
    }
    check(g.log_tau, &|f, d| f.log_tau += d);
    let secs = t0.elapsed().as_secs_f64();
    let detail =
        format!("{checked} parameters, worst relative error {worst:.2e} (< 1e-3), {secs:.2} s");
    if checked == 26 && worst < 1e-3 && secs < 60.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn unit_rows(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> Mat<f64> {
    let data = (0..rows).flat_map(|_| unit_vec(rng, dim)).collect();
    Mat::from_vec(rows, dim, data)
}

fn permute(m: &Mat<f64>, perm: &[usize]) -> Mat<f64> {
    let data = perm.iter().flat_map(|&i| m.row(i).to_vec()).collect();
    Mat::from_vec(m.rows, m.cols, data)
}

fn loss_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut min_loss = f64::INFINITY;
    let mut worst_perm: f64 = 0.0;
    for _ in 0..200 {
        let b = rng.random_range(2..12);
        let d = rng.random_range(2..10);
        let p = unit_rows(&mut rng, b, d);
        let e = unit_rows(&mut rng, b, d);
        let w: Vec<f64> = (0..b).map(|_| rng.random_range(0.0..1.0)).collect();
        let tau = rng.random_range(1.0..100.0);
        let l = contrastive_loss(&p, &e, &w, tau).unwrap();
        min_loss = min_loss.min(l);
        let mut perm: Vec<usize> = (0..b).collect();
        for i in (1..b).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let wp: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
        let lp = contrastive_loss(&permute(&p, &perm), &permute(&e, &perm), &wp, tau).unwrap();
        worst_perm = worst_perm.max((l - lp).abs());
    }

    // B = 2 by hand: rows/columns of S = tau * P E^T.
    let (a, c) = (0.6f64, 0.8f64);
    let p = Mat::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
    let e = Mat::from_vec(2, 2, vec![a, c, c, a]);
    let (w1, w2, tau) = (0.7, 0.4, 3.0);
    let (s11, s12, s21, s22) = (tau * a, tau * c, tau * c, tau * a);
    let lse = |x: f64, y: f64| (x.exp() + y.exp()).ln();
    let rows = (w1 * (lse(s11, s12) - s11) + w2 * (lse(s21, s22) - s22)) / 2.0;
    let cols = (w1 * (lse(s11, s21) - s11) + w2 * (lse(s12, s22) - s22)) / 2.0;
    let hand = rows + cols;
    let got = contrastive_loss(&p, &e, &[w1, w2], tau).unwrap();
    let hand_err = (got - hand).abs();

    let detail = format!(
        "min loss {min_loss:.3e} (>= 0), permutation drift {worst_perm:.1e} (<= 1e-6), \
         2x2 oracle error {hand_err:.1e} (<= 1e-9)"
    );
    if min_loss >= 0.0 && worst_perm <= 1e-6 && hand_err <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn region_vertex(id: u32, center: Point3) -> Vertex {
    Vertex::new(
        id,
        NodeType::Region,
        &Aabb::from_center_extent(center, [1.0, 1.0, 2.5]),
        &format!("room{id}"),
        &format!("the room{id}"),
    )
}

fn rr_edge(id: u32, a: &Vertex, b: &Vertex) -> Edge {
    Edge {
        id,
        edge_type: EdgeType::RegionRegion,
        start_node: a.clone(),
        end_node: b.clone(),
        relationship: "connected".into(),
        position_relation: compass(a.bbox_center, b.bbox_center),
        caption: String::new(),
    }
}

fn dijkstra(n: usize, adj: &[Vec<(usize, f64)>], s: usize, t: usize) -> Option<f64> {
    let mut dist = vec![f64::INFINITY; n];
    dist[s] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((Cost(0.0), s)));
    while let Some(Reverse((Cost(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if u == t {
            return Some(d);
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((Cost(nd), v)));
            }
        }
    }
    None
}

struct Cost(f64);
impl PartialEq for Cost {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o).is_eq()
    }
}
impl Eq for Cost {}
impl PartialOrd for Cost {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cost {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

fn astar_optimality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut mismatches = Vec::new();
    for trial in 0..100 {
        let n = rng.random_range(2..=30);
        let vertices: Vec<Vertex> = (0..n)
            .map(|i| {
                region_vertex(
                    i as u32,
                    [
                        rng.random_range(0.0..20.0),
                        rng.random_range(0.0..20.0),
                        1.25,
                    ],
                )
            })
            .collect();
        let mut pairs = BTreeSet::new();
        for i in 1..n {
            pairs.insert((rng.random_range(0..i), i));
        }
        for _ in 0..rng.random_range(0..2 * n) {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            if a != b {
                pairs.insert((a.min(b), a.max(b)));
            }
        }
        let edges: Vec<Edge> = pairs
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| rr_edge(k as u32, &vertices[a], &vertices[b]))
            .collect();
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &pairs {
            let w = distance(vertices[a].bbox_center, vertices[b].bbox_center);
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        let graph = TopoGraph {
            vertices,
            edges,
            ..Default::default()
        };
        let (s, t) = (rng.random_range(0..n), rng.random_range(0..n));
        let want = dijkstra(n, &adj, s, t).expect("connected");
        let path = astar(&graph, s as u32, t as u32).unwrap();
        let walked: f64 = path
            .vertices
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0] as usize, w[1] as usize);
                adj[a]
                    .iter()
                    .find(|(v, _)| *v == b)
                    .map(|(_, c)| *c)
                    .unwrap_or(f64::NAN)
            })
            .sum();
        let ends_ok =
            path.vertices.first() == Some(&(s as u32)) && path.vertices.last() == Some(&(t as u32));
        if path.cost != want || !ends_ok || (walked - want).abs() > 1e-9 {
            mismatches.push(format!("trial {trial}: {} vs {want}", path.cost));
        }
    }

    // Two components: no route between them.
    let vs: Vec<Vertex> = (0..4)
        .map(|i| region_vertex(i, [i as f64, 0.0, 1.25]))
        .collect();
    let g = TopoGraph {
        edges: vec![rr_edge(0, &vs[0], &vs[1]), rr_edge(1, &vs[2], &vs[3])],
        vertices: vs,
        ..Default::default()
    };
    let disconnected = matches!(
        astar(&g, 0, 3),
        Err(Error::NoPathFound { start: 0, goal: 3 })
    );

    let detail = format!(
        "{} of 100 random graphs match Dijkstra exactly; disconnected goal raises NoPathFound: {disconnected}",
        100 - mismatches.len()
    );
    if mismatches.is_empty() && disconnected {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", mismatches.join(", ")))
    }
}

fn topomap_schema() -> Check {
    let listing_extent = [4.163309999999999, 4.207343, 2.53566175];
    let listing_center = [-8.821845, 2.6915385, 1.259409125];
    let entrance_center = [-3.244, -0.276, 0.487];
    let bedroom = Vertex {
        id: 0,
        node_type: NodeType::Region,
        bbox_extent: listing_extent.map(quantize),
        bbox_center: listing_center.map(quantize),
        class: "bedroom".into(),
        caption: "A bedroom with a bed in the center.".into(),
    };
    let living = Vertex::new(
        1,
        NodeType::Region,
        &Aabb::new([-6.7, -3.0, 0.0], [0.3, 2.0, 2.54]),
        "living room",
        "the living room",
    );
    let bed = Vertex::new(
        2,
        NodeType::Object,
        &Aabb::new([-9.5, 2.0, 0.0], [-8.0, 3.5, 0.6]),
        "bed",
        "a bed",
    );
    let (vertices, edges) = build_edges(
        &[bedroom.clone(), living, bed],
        &RuleDescriber::default(),
        &MapperConfig::default(),
    )
    .unwrap();
    let graph = TopoGraph {
        vertices,
        edges,
        ..Default::default()
    };
    let text = to_json(&graph);
    let back = from_json(&text).unwrap();
    let again = to_json(&back);
    let byte_identical = text == again;
    let v0 = back.vertex(0).unwrap();
    let values_ok = v0 == &bedroom
        && text.contains("\"bbox_extent\": [4.16331, 4.20734, 2.53566]")
        && v0
            .bbox_extent
            .iter()
            .chain(&v0.bbox_center)
            .zip(listing_extent.iter().chain(&listing_center))
            .all(|(got, want)| (got - want).abs() <= 5e-6 * want.abs());
    let relation = compass(listing_center, entrance_center);
    let detail = format!(
        "round trip byte-identical: {byte_identical}; listing region values kept: {values_ok}; \
         compass: \"{relation}\""
    );
    if byte_identical && values_ok && relation == "b to the southeast of a" {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// 4x4 view at depth 1 whose left half shows one chair.
fn detection_frame(confidence: f32) -> Frame {
    let ids: Vec<i32> = (0..16)
        .map(|i| if i % 4 < 2 { 7 } else { BACKGROUND })
        .collect();
    Frame {
        depth: vec![1.0; 16],
        instance_ids: ids,
        instance_labels: BTreeMap::from([(7, "chair".to_string())]),
        instance_confidences: BTreeMap::from([(7, confidence)]),
        pose: Pose::identity(),
        intrinsics: Intrinsics::centered(4.0, 4, 4).unwrap(),
    }
}

fn mapping_thresholds() -> Check {
    let cfg = MapperConfig::default();
    let frames = |conf: f32, n: usize| vec![detection_frame(conf); n];
    let low = map_objects(&frames(0.59, 5), &cfg, 0).len();
    let high = map_objects(&frames(0.61, 5), &cfg, 0).len();
    let two = map_objects(&frames(0.9, 2), &cfg, 0).len();
    let three = map_objects(&frames(0.9, 3), &cfg, 0).len();
    let strict = MapperConfig {
        observation_rule: ObservationRule::MoreThan,
        ..cfg.clone()
    };
    let strict_three = map_objects(&frames(0.9, 3), &strict, 0).len();
    let detail = format!(
        "vertices: conf 0.59 -> {low}, 0.61 -> {high}; 2 obs -> {two}, 3 obs -> {three} \
         (strict rule: 3 obs -> {strict_three})"
    );
    if (low, high, two, three, strict_three) == (0, 1, 0, 1, 0) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ablation(full: &Run) -> Check {
    let prov = provider();
    let cfg = FusionConfig {
        encode_background: false,
        context_prompt: false,
        ..Default::default()
    };
    let ablated = build_feature_cloud(&full.frames, &full.scene.partition, &prov, &cfg).unwrap();
    // Withhold the same voxels the full run held out.
    let voxel = f64::from(full.holdout.voxel_size);
    let held: BTreeSet<[i64; 3]> = full
        .holdout
        .points
        .iter()
        .map(|p| voxel_key(p.position_f64(), voxel))
        .collect();
    let train_cloud = FeaturePointCloud {
        points: ablated
            .points
            .into_iter()
            .filter(|p| !held.contains(&voxel_key(p.position_f64(), voxel)))
            .collect(),
        ..ablated
    };
    let (field, _) = train(
        &train_cloud,
        &HashGridConfig::desk(full.scene.bounds),
        &TrainConfig::default(),
        &LossConfig::default(),
    )
    .unwrap();
    let pts = positions(&full.holdout);
    let base = accuracy(&full.field, full, &pts);
    let off = accuracy(&field, full, &pts);
    let detail = format!("held-out accuracy full {base:.4}, background and context off {off:.4}");
    if off < base {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn topomap_of(run: &Run) -> String {
    let (graph, _) = build_map(
        &run.field,
        &run.scene.bounds,
        &run.bank,
        &run.frames,
        &MapperConfig::default(),
        &RuleDescriber::default(),
        None,
    )
    .unwrap();
    to_json(&graph)
}

fn determinism(first: &Run, second: &Run) -> Check {
    let same_cloud =
        first.train_cloud.to_bytes().unwrap() == second.train_cloud.to_bytes().unwrap();
    let ca = checkpoint_bytes(&first.field).unwrap();
    let same_ckpt = ca == checkpoint_bytes(&second.field).unwrap();
    let same_map = topomap_of(first) == topomap_of(second);
    let detail = format!(
        "clouds identical: {same_cloud}; checkpoints identical: {same_ckpt} ({} bytes); \
         topomap JSON identical: {same_map}",
        ca.len()
    );
    if same_cloud && same_ckpt && same_map {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn guarded(f: impl FnOnce() -> Check) -> Check {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    })
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Check)> = Vec::new();
    let mut report = |name: &'static str, r: Check| {
        match &r {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(d) => println!("FAIL  {name}: {d}"),
        }
        results.push((name, r));
    };

    report("gradient correctness", guarded(gradient_check));
    report("loss properties", guarded(loss_properties));
    report("A* optimality", guarded(astar_optimality));
    report("topomap schema", guarded(topomap_schema));
    report("mapping thresholds", guarded(mapping_thresholds));

    let full = FusionConfig::default();
    let a = catch_unwind(|| run_pipeline(7, &full)).ok();
    let b1 = catch_unwind(|| run_pipeline(3, &full)).ok();
    let b2 = catch_unwind(|| run_pipeline(3, &full)).ok();
    let missing = || Err("pipeline run panicked".to_string());
    match &a {
        Some(a) => {
            report("region inference", guarded(|| region_inference(a)));
            match &b1 {
                Some(b) => report(
                    "text-query disambiguation",
                    guarded(|| text_disambiguation(a, b)),
                ),
                None => report("text-query disambiguation", missing()),
            }
            report("image-query localization", guarded(|| image_queries(a)));
            report("ablation toggles", guarded(|| ablation(a)));
        }
        None => {
            for name in [
                "region inference",
                "text-query disambiguation",
                "image-query localization",
                "ablation toggles",
            ] {
                report(name, missing());
            }
        }
    }
    match (&b1, &b2) {
        (Some(x), Some(y)) => report("determinism", guarded(|| determinism(x, y))),
        _ => report("determinism", missing()),
    }

    let failed = results.iter().filter(|(_, r)| r.is_err()).count();
    println!(
        "{} of {} criteria pass",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
