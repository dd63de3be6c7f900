use std::io::Write;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::heads::{Activation, FieldHeads};
use crate::field::loss::LossConfig;
use crate::field::model::LopField;
use crate::geometry::Aabb;
use crate::hashgrid::{HashGrid, HashGridConfig};
use crate::numeric::Mat;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LOPC";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serializes a field:
///
/// ```text
/// "LOPC" u32 version
/// grid:  u32 levels, u32 features, u32 log2 table size, u32 base res,
///        u32 finest res, 6 x f64 bounds (min xyz, max xyz)
/// dims:  u32 d, u32 hidden, u32 dv, u32 ds, u32 activation code
/// loss:  f64 init, f64 min, f64 max temperature, u32 learn flag,
///        f64 vision weight, f64 semantic weight
/// f32 blocks: tables, trunk w, trunk b, head_v w, head_v b,
///             head_s w, head_s b, log temperature
/// ```
///
/// All values little-endian; weights are stored input-major.
pub fn checkpoint_bytes(field: &LopField<f32>) -> Result<Vec<u8>> {
    let mut w = Vec::new();
    let g = field.grid.config();
    let h = &field.heads;
    let (d, dv, ds) = field.dims();
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    for v in [
        g.levels as u32,
        g.features_per_level as u32,
        g.log2_table_size,
        g.base_resolution,
        g.finest_resolution,
    ] {
        w.write_u32::<LittleEndian>(v)?;
    }
    for v in g.bounds.min.iter().chain(&g.bounds.max) {
        w.write_f64::<LittleEndian>(*v)?;
    }
    for v in [d, h.hidden_dim(), dv, ds] {
        w.write_u32::<LittleEndian>(v as u32)?;
    }
    w.write_u32::<LittleEndian>(h.activation.code())?;
    let l = &field.loss;
    w.write_f64::<LittleEndian>(l.init_temperature)?;
    w.write_f64::<LittleEndian>(l.min_temperature)?;
    w.write_f64::<LittleEndian>(l.max_temperature)?;
    w.write_u32::<LittleEndian>(l.learn_temperature as u32)?;
    w.write_f64::<LittleEndian>(l.vision_weight)?;
    w.write_f64::<LittleEndian>(l.semantic_weight)?;
    let blocks: [&[f32]; 7] = [
        &field.grid.tables,
        &h.trunk_w.data,
        &h.trunk_b,
        &h.head_v_w.data,
        &h.head_v_b,
        &h.head_s_w.data,
        &h.head_s_b,
    ];
    w.reserve(blocks.iter().map(|b| b.len() * 4).sum::<usize>() + 4);
    for block in blocks {
        for &v in block {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    w.write_f32::<LittleEndian>(field.log_tau)?;
    Ok(w)
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<LopField<f32>> {
    let corrupt = |m: String| Error::CorruptCheckpoint(m);
    if bytes.len() < 8 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    let mut r = &bytes[4..];
    let short = |_| Error::CorruptCheckpoint("truncated header".into());
    let version = r.read_u32::<LittleEndian>().map_err(short)?;
    if version != CHECKPOINT_VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let mut u = [0u32; 5];
    for v in &mut u {
        *v = r.read_u32::<LittleEndian>().map_err(short)?;
    }
    let mut b = [0f64; 6];
    for v in &mut b {
        *v = r.read_f64::<LittleEndian>().map_err(short)?;
    }
    let config = HashGridConfig {
        levels: u[0] as usize,
        features_per_level: u[1] as usize,
        log2_table_size: u[2],
        base_resolution: u[3],
        finest_resolution: u[4],
        bounds: Aabb::new([b[0], b[1], b[2]], [b[3], b[4], b[5]]),
    };
    config
        .validate()
        .map_err(|e| corrupt(format!("grid config: {e}")))?;
    let mut dims = [0usize; 4];
    for v in &mut dims {
        *v = r.read_u32::<LittleEndian>().map_err(short)? as usize;
    }
    let [d, hidden, dv, ds] = dims;
    if d != config.output_dim() {
        return Err(corrupt(format!(
            "input dim {d} does not match grid ({})",
            config.output_dim()
        )));
    }
    let activation = Activation::from_code(r.read_u32::<LittleEndian>().map_err(short)?)?;
    let loss = LossConfig {
        init_temperature: r.read_f64::<LittleEndian>().map_err(short)?,
        min_temperature: r.read_f64::<LittleEndian>().map_err(short)?,
        max_temperature: r.read_f64::<LittleEndian>().map_err(short)?,
        learn_temperature: r.read_u32::<LittleEndian>().map_err(short)? != 0,
        vision_weight: r.read_f64::<LittleEndian>().map_err(short)?,
        semantic_weight: r.read_f64::<LittleEndian>().map_err(short)?,
    };
    loss.validate().map_err(|e| corrupt(e.to_string()))?;
    let sizes = [
        config.param_count(),
        d * hidden,
        hidden,
        hidden * dv,
        dv,
        hidden * ds,
        ds,
        1,
    ];
    let total: usize = sizes.iter().sum();
    if r.len() != total * 4 {
        return Err(corrupt(format!(
            "parameter payload is {} bytes, expected {}",
            r.len(),
            total * 4
        )));
    }
    let mut read = |n: usize| -> Result<Vec<f32>> {
        let mut v = vec![0f32; n];
        r.read_f32_into::<LittleEndian>(&mut v)
            .map_err(|_| corrupt("truncated parameters".into()))?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(corrupt("non-finite parameter".into()));
        }
        Ok(v)
    };
    let tables = read(sizes[0])?;
    let heads = FieldHeads {
        activation,
        trunk_w: Mat::from_vec(d, hidden, read(sizes[1])?),
        trunk_b: read(sizes[2])?,
        head_v_w: Mat::from_vec(hidden, dv, read(sizes[3])?),
        head_v_b: read(sizes[4])?,
        head_s_w: Mat::from_vec(hidden, ds, read(sizes[5])?),
        head_s_b: read(sizes[6])?,
    };
    let log_tau = read(1)?[0];
    let grid = HashGrid::from_tables(config, tables)?;
    let mut field = LopField::new(grid, heads, loss)?;
    field.log_tau = log_tau;
    Ok(field)
}

pub fn save_checkpoint(field: &LopField<f32>, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(field)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<LopField<f32>> {
    parse_checkpoint(&std::fs::read(path)?)
}

/// Hex SHA-256 of the serialized field.
pub fn checkpoint_digest(field: &LopField<f32>) -> Result<String> {
    let digest = Sha256::digest(checkpoint_bytes(field)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
