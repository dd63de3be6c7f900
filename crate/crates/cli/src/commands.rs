use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use lopfield::embed::{build_feature_cloud, validate_lopf, EmbeddingVector, FeaturePointCloud};
use lopfield::field::{checkpoint_digest, load_checkpoint, save_checkpoint, LopField};
use lopfield::planner::{self, Goal, PlanRequest, Start};
use lopfield::plausibility::VetoTable;
use lopfield::query::{
    grid_samples, infer_batch, localize_image, localize_text, Heatmap, LabelBank,
};
use lopfield::scene::{self, generate_scene, SyntheticScene};
use lopfield::topomap::{self, DescriberKind, MapState, RuleDescriber, TopoGraph};
use lopfield::{Aabb, Error, Point3, Result};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::metrics::region_report;

pub const CLOUD_FILE: &str = "cloud.lopf";
pub const HOLDOUT_FILE: &str = "holdout.lopf";
pub const FIELD_FILE: &str = "field.lopc";
pub const MAP_FILE: &str = "topomap.json";
pub const STATE_FILE: &str = "map_state.json";

pub enum LabelSource {
    Scene(PathBuf),
    List(Vec<String>),
}

pub enum Query {
    Text(String),
    Image(PathBuf),
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "missing input {}",
            path.display()
        )))
    }
}

fn load_scene(dir: &Path) -> Result<SyntheticScene> {
    require(&dir.join("scene.json"))?;
    scene::io::read_scene(dir)
}

fn load_field(path: &Path) -> Result<LopField<f32>> {
    require(path)?;
    load_checkpoint(path)
}

fn load_cloud(path: &Path) -> Result<FeaturePointCloud> {
    require(path)?;
    FeaturePointCloud::load(path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn begin(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.write_resolved(out)
}

fn label_bank(cfg: &RunConfig, source: &LabelSource) -> Result<LabelBank> {
    let provider = cfg.provider.build()?;
    let labels = match source {
        LabelSource::Scene(dir) => load_scene(dir)?.region_labels().to_vec(),
        LabelSource::List(v) => v.clone(),
    };
    LabelBank::from_provider(&labels, provider.as_ref())
}

fn describer(cfg: &RunConfig) -> Result<RuleDescriber> {
    match cfg.mapper.describer {
        DescriberKind::RuleBased => Ok(RuleDescriber::new(VetoTable::default())),
        DescriberKind::External => Err(Error::InvalidConfig(
            "the external describer needs a language-model adapter; use \"rule_based\"".into(),
        )),
    }
}

pub fn gen_scene(cfg: &RunConfig, out: &Path) -> Result<()> {
    begin(cfg, out)?;
    let scene = generate_scene(&cfg.scene)?;
    let frames = scene.render_all();
    scene::io::write_scene_dir(out, &scene, &frames)?;
    println!(
        "scene: {} rooms, {} objects, {} frames -> {}",
        scene.rooms.len(),
        scene.objects.len(),
        frames.len(),
        out.display()
    );
    Ok(())
}

pub fn build_cloud(cfg: &RunConfig, scene_dir: &Path, out: &Path) -> Result<()> {
    let scene = load_scene(scene_dir)?;
    let frames = scene::io::read_frames(scene_dir)?;
    begin(cfg, out)?;
    let provider = cfg.provider.build()?;
    let full = build_feature_cloud(&frames, &scene.partition, provider.as_ref(), &cfg.fusion)?;
    let (train, held) = if cfg.eval.holdout_points > 0 {
        full.split_holdout(cfg.eval.holdout_points, cfg.eval.holdout_seed)?
    } else {
        let empty = FeaturePointCloud {
            points: Vec::new(),
            ..full.clone()
        };
        (full, empty)
    };
    train.save(&out.join(CLOUD_FILE))?;
    if !held.is_empty() {
        held.save(&out.join(HOLDOUT_FILE))?;
    }
    println!(
        "cloud: {} training points, {} held out, dims ({}, {}) -> {}",
        train.len(),
        held.len(),
        train.dv,
        train.ds,
        out.display()
    );
    Ok(())
}

pub fn check_cloud(path: &Path) -> Result<()> {
    require(path)?;
    let bytes = fs::read(path)?;
    validate_lopf(&bytes)?;
    let cloud = FeaturePointCloud::from_bytes(&bytes)?;
    println!(
        "ok: {} points, dims ({}, {}), voxel {}",
        cloud.len(),
        cloud.dv,
        cloud.ds,
        cloud.voxel_size
    );
    Ok(())
}

pub fn train(
    cfg: &RunConfig,
    cloud_path: &Path,
    scene_dir: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let cloud = load_cloud(cloud_path)?;
    let bounds = match scene_dir {
        Some(dir) => load_scene(dir)?.bounds,
        None => {
            let b = cloud
                .bounds()
                .ok_or_else(|| Error::NoData("empty cloud".into()))?;
            let pad = [f64::from(cloud.voxel_size); 3];
            Aabb::new(sub(b.min, pad), add(b.max, pad))
        }
    };
    begin(cfg, out)?;
    let grid = cfg.hashgrid.with_bounds(bounds);
    let (field, report) = lopfield::field::train(&cloud, &grid, &cfg.train, &cfg.loss)?;
    save_checkpoint(&field, &out.join(FIELD_FILE))?;
    write_json(&out.join("train_report.json"), &report)?;
    println!(
        "trained {} epochs: loss {:.4} -> {:.4}, temperature {:.3} -> {}",
        report.epoch_losses.len(),
        report.epoch_losses.first().copied().unwrap_or(f64::NAN),
        report.epoch_losses.last().copied().unwrap_or(f64::NAN),
        report.final_temperature,
        out.join(FIELD_FILE).display()
    );
    Ok(())
}

pub fn infer(
    cfg: &RunConfig,
    field_path: &Path,
    point: Point3,
    labels: &LabelSource,
    out: &Path,
) -> Result<()> {
    let field = load_field(field_path)?;
    let bank = label_bank(cfg, labels)?;
    begin(cfg, out)?;
    let inf = infer_batch(&field, &[point], &bank, cfg.query.vs_weight)?
        .pop()
        .expect("one point in, one inference out");
    let label = &bank.labels[inf.index];
    let scores: serde_json::Map<String, serde_json::Value> = bank
        .labels
        .iter()
        .zip(&inf.scores)
        .map(|(l, s)| (l.clone(), json!(s)))
        .collect();
    write_json(
        &out.join("infer.json"),
        &json!({ "point": point, "label": label, "scores": scores }),
    )?;
    println!("{label}");
    Ok(())
}

fn read_embedding(path: &Path) -> Result<EmbeddingVector> {
    require(path)?;
    let values: Vec<f32> = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(EmbeddingVector(values))
}

fn samples(cfg: &RunConfig, field: &LopField<f32>, cloud: Option<&Path>) -> Result<Vec<Point3>> {
    match cloud {
        Some(p) => Ok(load_cloud(p)?
            .points
            .iter()
            .map(|p| p.position_f64())
            .collect()),
        None => grid_samples(&field.grid.config().bounds, cfg.query.grid_step, None),
    }
}

pub fn localize(
    cfg: &RunConfig,
    field_path: &Path,
    query: &Query,
    cloud: Option<&Path>,
    scene_dir: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let field = load_field(field_path)?;
    let scene = scene_dir.map(load_scene).transpose()?;
    let points = samples(cfg, &field, cloud)?;
    begin(cfg, out)?;
    let (map, query_json): (Heatmap, _) = match query {
        Query::Text(t) => {
            let provider = cfg.provider.build()?;
            let m = localize_text(&field, t, provider.as_ref(), &points, cfg.query.vs_weight)?;
            (m, json!({ "text": t }))
        }
        Query::Image(p) => (
            localize_image(&field, &read_embedding(p)?, &points)?,
            json!({ "image_emb": p }),
        ),
    };
    let centroid = map.predicted_position(cfg.query.top_k);
    let region = scene
        .as_ref()
        .map(|s| {
            s.partition
                .region_of(centroid[0], centroid[1])
                .map(str::to_string)
        })
        .transpose()?;
    map.write_csv(BufWriter::new(fs::File::create(out.join("heatmap.csv"))?))?;
    if cfg.query.plot_cell > 0.0 {
        map.write_grid_csv(
            cfg.query.plot_cell,
            BufWriter::new(fs::File::create(out.join("heatmap_grid.csv"))?),
        )?;
    }
    write_json(
        &out.join("localize.json"),
        &json!({
            "query": query_json,
            "best_point": map.best_point(),
            "best_score": map.scores[map.best],
            "centroid": centroid,
            "top_k": cfg.query.top_k,
            "region": region,
        }),
    )?;
    println!(
        "centroid {:.3},{:.3},{:.3}{}",
        centroid[0],
        centroid[1],
        centroid[2],
        region.map(|r| format!(" in {r}")).unwrap_or_default()
    );
    Ok(())
}

fn write_map(out: &Path, graph: &TopoGraph, state: &MapState) -> Result<()> {
    fs::write(out.join(MAP_FILE), topomap::to_json(graph))?;
    write_json(&out.join(STATE_FILE), state)
}

fn count_summary(graph: &TopoGraph) -> String {
    use lopfield::topomap::NodeType;
    format!(
        "{} regions, {} objects, {} entrances, {} edges",
        graph.vertices_of(NodeType::Region).count(),
        graph.vertices_of(NodeType::Object).count(),
        graph.vertices_of(NodeType::Entrance).count(),
        graph.edges.len()
    )
}

pub fn build_map(cfg: &RunConfig, field_path: &Path, scene_dir: &Path, out: &Path) -> Result<()> {
    let field = load_field(field_path)?;
    let scene = load_scene(scene_dir)?;
    let frames = scene::io::read_frames(scene_dir)?;
    let describer = describer(cfg)?;
    begin(cfg, out)?;
    let provider = cfg.provider.build()?;
    let bank = LabelBank::from_provider(scene.region_labels(), provider.as_ref())?;
    let (graph, state) = topomap::build_map(
        &field,
        &field.grid.config().bounds,
        &bank,
        &frames,
        &cfg.mapper,
        &describer,
        Some(checkpoint_digest(&field)?),
    )?;
    write_map(out, &graph, &state)?;
    println!(
        "map: {} -> {}",
        count_summary(&graph),
        out.join(MAP_FILE).display()
    );
    Ok(())
}

fn load_map(dir: &Path) -> Result<(TopoGraph, MapState)> {
    let (g, s) = (dir.join(MAP_FILE), dir.join(STATE_FILE));
    require(&g)?;
    require(&s)?;
    let graph = topomap::from_json(&fs::read_to_string(g)?)?;
    let state = serde_json::from_str(&fs::read_to_string(s)?)?;
    Ok((graph, state))
}

pub fn update_map(
    cfg: &RunConfig,
    map_dir: &Path,
    field_path: &Path,
    scene_dir: &Path,
    first_frame: usize,
    out: &Path,
) -> Result<()> {
    let (mut graph, mut state) = load_map(map_dir)?;
    let field = load_field(field_path)?;
    let scene = load_scene(scene_dir)?;
    let frames = scene::io::read_frames(scene_dir)?;
    let new = frames.get(first_frame..).ok_or_else(|| {
        Error::InvalidInput(format!(
            "first frame {first_frame} beyond the {} frames in {}",
            frames.len(),
            scene_dir.display()
        ))
    })?;
    let describer = describer(cfg)?;
    begin(cfg, out)?;
    let provider = cfg.provider.build()?;
    let bank = LabelBank::from_provider(scene.region_labels(), provider.as_ref())?;
    topomap::update(
        &mut graph,
        &mut state,
        new,
        &field,
        &bank,
        &cfg.mapper,
        &describer,
    )?;
    write_map(out, &graph, &state)?;
    println!(
        "updated with {} frames: {} -> {}",
        new.len(),
        count_summary(&graph),
        out.join(MAP_FILE).display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn plan(
    cfg: &RunConfig,
    map_dir: &Path,
    field_path: &Path,
    start: Point3,
    goal: &str,
    region: Option<&str>,
    labels: &LabelSource,
    out: &Path,
) -> Result<()> {
    let (graph, _) = load_map(map_dir)?;
    let field = load_field(field_path)?;
    let bank = label_bank(cfg, labels)?;
    begin(cfg, out)?;
    let provider = cfg.provider.build()?;
    let mut pcfg = cfg.planner.clone();
    if pcfg.waypoint_height.is_none() {
        pcfg.waypoint_height = Some(field.grid.config().bounds.min[2] + cfg.mapper.sample_height);
    }
    let request = PlanRequest {
        start: Start::Point(start),
        goal: Goal::Query(goal.to_string()),
        region_hint: region.map(str::to_string),
    };
    let path = planner::plan(&graph, &request, &field, &bank, provider.as_ref(), &pcfg)?;
    let mut text = path.to_json()?;
    text.push('\n');
    fs::write(out.join("path.json"), text)?;
    let names: Vec<String> = path
        .vertices
        .iter()
        .map(|id| {
            let v = graph
                .vertex(*id)
                .expect("path vertices come from the graph");
            format!("{}({})", v.class, id)
        })
        .collect();
    println!(
        "path cost {:.3} m over {} waypoints: {}",
        path.cost,
        path.waypoints.len(),
        names.join(" -> ")
    );
    Ok(())
}

pub fn eval_region(
    cfg: &RunConfig,
    field_path: &Path,
    cloud_path: &Path,
    scene_dir: &Path,
    out: &Path,
) -> Result<()> {
    let field = load_field(field_path)?;
    let cloud = load_cloud(cloud_path)?;
    let scene = load_scene(scene_dir)?;
    begin(cfg, out)?;
    let provider = cfg.provider.build()?;
    let labels = scene.region_labels().to_vec();
    let bank = LabelBank::from_provider(&labels, provider.as_ref())?;
    let points: Vec<Point3> = cloud.points.iter().map(|p| p.position_f64()).collect();
    if points.is_empty() {
        return Err(Error::NoData("held-out cloud is empty".into()));
    }
    let predicted: Vec<usize> = infer_batch(&field, &points, &bank, cfg.eval.vs_weight)?
        .into_iter()
        .map(|i| i.index)
        .collect();
    let truth = points
        .iter()
        .map(|p| scene.partition.region_index_clamped(p[0], p[1]))
        .collect::<Result<Vec<_>>>()?;
    let report = region_report(&labels, &truth, &predicted);
    write_json(&out.join("eval.json"), &report)?;
    print!("{}", report.table());
    Ok(())
}

fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
