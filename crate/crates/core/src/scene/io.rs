//! Scene sequence directories:
//!
//! ```text
//! scene.json                 rooms, doorways, objects, partition, intrinsics
//! labels.json                instance_id -> {class, confidence}
//! frames/NNNNNN.depth.bin    little-endian f32, row-major
//! frames/NNNNNN.inst.bin     little-endian i32, row-major
//! frames/NNNNNN.pose.txt     4x4 row-major camera-to-world
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::camera::Pose;
use crate::scene::frame::{Frame, BACKGROUND};
use crate::scene::synth::{pose_from_rows, pose_rows, SyntheticScene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceLabel {
    pub class: String,
    pub confidence: f32,
}

fn frame_path(dir: &Path, index: usize, suffix: &str) -> PathBuf {
    dir.join("frames").join(format!("{index:06}.{suffix}"))
}

pub fn write_scene_dir(dir: &Path, scene: &SyntheticScene, frames: &[Frame]) -> Result<()> {
    fs::create_dir_all(dir.join("frames"))?;
    fs::write(dir.join("scene.json"), serde_json::to_string_pretty(scene)?)?;
    let mut labels: BTreeMap<i32, InstanceLabel> = BTreeMap::new();
    for (i, frame) in frames.iter().enumerate() {
        frame.validate()?;
        write_frame(dir, i, frame)?;
        for (id, class) in &frame.instance_labels {
            labels.entry(*id).or_insert_with(|| InstanceLabel {
                class: class.clone(),
                confidence: frame.instance_confidences[id],
            });
        }
    }
    // Objects never seen in any frame still get a label entry.
    for o in &scene.objects {
        labels.entry(o.id).or_insert_with(|| InstanceLabel {
            class: o.class.clone(),
            confidence: o.confidence,
        });
    }
    fs::write(
        dir.join("labels.json"),
        serde_json::to_string_pretty(&labels)?,
    )?;
    Ok(())
}

pub fn write_frame(dir: &Path, index: usize, frame: &Frame) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(frame_path(dir, index, "depth.bin"))?);
    for &d in &frame.depth {
        w.write_f32::<LittleEndian>(d)?;
    }
    w.flush()?;
    let mut w = BufWriter::new(fs::File::create(frame_path(dir, index, "inst.bin"))?);
    for &id in &frame.instance_ids {
        w.write_i32::<LittleEndian>(id)?;
    }
    w.flush()?;
    let rows = pose_rows(&frame.pose);
    let text: String = rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join(" ")
                + "\n"
        })
        .collect();
    fs::write(frame_path(dir, index, "pose.txt"), text)?;
    Ok(())
}

pub fn read_scene(dir: &Path) -> Result<SyntheticScene> {
    let text = fs::read_to_string(dir.join("scene.json"))?;
    let scene: SyntheticScene = serde_json::from_str(&text)?;
    scene.partition.validate()?;
    scene.intrinsics.validate()?;
    Ok(scene)
}

pub fn read_labels(dir: &Path) -> Result<BTreeMap<i32, InstanceLabel>> {
    let text = fs::read_to_string(dir.join("labels.json"))?;
    Ok(serde_json::from_str(&text)?)
}

/// Number of frames stored in the directory (contiguous from 0).
pub fn frame_count(dir: &Path) -> usize {
    (0..)
        .take_while(|&i| frame_path(dir, i, "depth.bin").exists())
        .count()
}

pub fn read_frames(dir: &Path) -> Result<Vec<Frame>> {
    let scene = read_scene(dir)?;
    let labels = read_labels(dir)?;
    (0..frame_count(dir))
        .map(|i| read_frame(dir, i, &scene, &labels))
        .collect()
}

pub fn read_frame(
    dir: &Path,
    index: usize,
    scene: &SyntheticScene,
    labels: &BTreeMap<i32, InstanceLabel>,
) -> Result<Frame> {
    let intr = scene.intrinsics;
    let n = intr.pixel_count();
    let depth_bytes = fs::read(frame_path(dir, index, "depth.bin"))?;
    let inst_bytes = fs::read(frame_path(dir, index, "inst.bin"))?;
    if depth_bytes.len() != 4 * n || inst_bytes.len() != 4 * n {
        return Err(Error::InvalidInput(format!(
            "frame {index}: raster files hold {} / {} bytes, expected {}",
            depth_bytes.len(),
            inst_bytes.len(),
            4 * n
        )));
    }
    let mut depth = vec![0f32; n];
    BufReader::new(&depth_bytes[..]).read_f32_into::<LittleEndian>(&mut depth)?;
    let mut ids = vec![0i32; n];
    BufReader::new(&inst_bytes[..]).read_i32_into::<LittleEndian>(&mut ids)?;
    let pose = parse_pose(&fs::read_to_string(frame_path(dir, index, "pose.txt"))?)?;
    let mut instance_labels = BTreeMap::new();
    let mut instance_confidences = BTreeMap::new();
    for &id in ids.iter().filter(|&&id| id != BACKGROUND) {
        if instance_labels.contains_key(&id) {
            continue;
        }
        let l = labels.get(&id).ok_or_else(|| {
            Error::InvalidInput(format!(
                "frame {index}: instance {id} missing from labels.json"
            ))
        })?;
        instance_labels.insert(id, l.class.clone());
        instance_confidences.insert(id, l.confidence);
    }
    let frame = Frame {
        depth,
        instance_ids: ids,
        instance_labels,
        instance_confidences,
        pose,
        intrinsics: intr,
    };
    frame.validate()?;
    Ok(frame)
}

pub fn parse_pose(text: &str) -> Result<Pose> {
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("pose value {t:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != 16 {
        return Err(Error::InvalidInput(format!(
            "pose file holds {} values, expected 16",
            vals.len()
        )));
    }
    let mut rows = [[0.0; 4]; 4];
    for (i, v) in vals.into_iter().enumerate() {
        rows[i / 4][i % 4] = v;
    }
    pose_from_rows(&rows)
}
