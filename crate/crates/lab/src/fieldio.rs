//! Binary field snapshot format plus JSON sidecar.
//!
//! One `.fld` file per time slice: magic `FLD1`, version `u32`, rank `u8`,
//! per-axis cell counts `u64`, then the cell values as little-endian `f64`
//! in row-major order. The sidecar records the grid extents, `t0` and `dt`
//! and lists the slice files. All writes go through a temporary file and a
//! rename.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sktlab_core::{Field, Grid, SpaceTimeField, TimeAxis};

pub const MAGIC: &[u8; 4] = b"FLD1";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Sidecar {
    pub version: u32,
    pub rank: u8,
    pub cells: Vec<u64>,
    /// Per-axis `[min, max]`.
    pub extent: Vec<[f64; 2]>,
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
    /// Slice file names relative to the sidecar location.
    pub slices: Vec<String>,
}

/// Write bytes atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("field")
    ));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("create {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("rename into {}", path.display()))?;
    Ok(())
}

fn encode_field(field: &Field) -> Vec<u8> {
    let grid = field.grid();
    let rank = grid.dim() as u8;
    let mut out = Vec::with_capacity(13 + 8 * (rank as usize + field.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(rank);
    for d in 0..grid.dim() {
        out.extend_from_slice(&(grid.cells(d) as u64).to_le_bytes());
    }
    for &v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_field(path: &Path, field: &Field) -> Result<()> {
    write_atomic(path, &encode_field(field))
}

pub fn read_field(path: &Path, grid: &Grid) -> Result<Field> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .with_context(|| format!("open {}", path.display()))?
        .read_to_end(&mut bytes)?;
    decode_field(&bytes, grid)
}

fn decode_field(bytes: &[u8], grid: &Grid) -> Result<Field> {
    if bytes.len() < 9 || &bytes[0..4] != MAGIC {
        bail!("bad magic");
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        bail!("unsupported version {version}");
    }
    let rank = bytes[8] as usize;
    if rank != grid.dim() {
        bail!("rank {rank} does not match grid dimension {}", grid.dim());
    }
    let mut off = 9;
    for d in 0..rank {
        let n = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()) as usize;
        if n != grid.cells(d) {
            bail!("axis {d} has {n} cells, grid expects {}", grid.cells(d));
        }
        off += 8;
    }
    let want = grid.cell_count();
    if bytes.len() != off + 8 * want {
        bail!("payload holds {} bytes, expected {}", bytes.len() - off, 8 * want);
    }
    let mut values = Vec::with_capacity(want);
    for i in 0..want {
        let s = off + 8 * i;
        values.push(f64::from_le_bytes(bytes[s..s + 8].try_into().unwrap()));
    }
    Ok(Field::from_values(*grid, values)?)
}

/// Write every slice plus the sidecar; returns the emitted file names
/// (sidecar first) relative to `dir`.
pub fn write_spacetime(dir: &Path, stem: &str, u: &SpaceTimeField) -> Result<Vec<String>> {
    let grid = u.grid();
    let time = u.time();
    let mut slice_names = Vec::with_capacity(time.slice_count());
    for m in 0..time.slice_count() {
        let name = format!("{stem}_{m:04}.fld");
        write_field(&dir.join(&name), u.slice(m))?;
        slice_names.push(name);
    }
    let sidecar = Sidecar {
        version: VERSION,
        rank: grid.dim() as u8,
        cells: (0..grid.dim()).map(|d| grid.cells(d) as u64).collect(),
        extent: (0..grid.dim())
            .map(|d| {
                let (lo, hi) = grid.extent(d);
                [lo, hi]
            })
            .collect(),
        t0: time.t0(),
        dt: time.dt(),
        steps: time.steps(),
        slices: slice_names.clone(),
    };
    let sidecar_name = format!("{stem}.json");
    write_atomic(&dir.join(&sidecar_name), serde_json::to_string_pretty(&sidecar)?.as_bytes())?;
    let mut files = vec![sidecar_name];
    files.extend(slice_names);
    Ok(files)
}

/// Load a field set from its sidecar.
pub fn read_spacetime(sidecar_path: &Path) -> Result<SpaceTimeField> {
    let text = fs::read_to_string(sidecar_path)
        .with_context(|| format!("read {}", sidecar_path.display()))?;
    let sidecar: Sidecar = serde_json::from_str(&text)?;
    let grid = match sidecar.rank {
        1 => Grid::line(sidecar.extent[0][0], sidecar.extent[0][1], sidecar.cells[0] as usize)?,
        2 => Grid::rect(
            (sidecar.extent[0][0], sidecar.extent[0][1]),
            (sidecar.extent[1][0], sidecar.extent[1][1]),
            sidecar.cells[0] as usize,
            sidecar.cells[1] as usize,
        )?,
        r => bail!("unsupported rank {r}"),
    };
    let t_end = sidecar.t0 + sidecar.dt * sidecar.steps as f64;
    let time = TimeAxis::span(sidecar.t0, t_end, sidecar.steps)?;
    if sidecar.slices.len() != time.slice_count() {
        bail!("sidecar lists {} slices, expected {}", sidecar.slices.len(), time.slice_count());
    }
    let dir = sidecar_path.parent().unwrap_or_else(|| Path::new("."));
    let mut slices = Vec::with_capacity(sidecar.slices.len());
    for name in &sidecar.slices {
        slices.push(read_field(&dir.join(name), &grid)?);
    }
    Ok(SpaceTimeField::from_slices(time, slices)?)
}

/// Monitor CSV with the fixed header
/// `t,normW1p_u,normW1p_v,min_u,max_u,min_v,max_v,mass_u,mass_v`.
pub fn write_monitor_csv(path: &Path, rows: &[MonitorRow]) -> Result<()> {
    let mut text = String::from("t,normW1p_u,normW1p_v,min_u,max_u,min_v,max_v,mass_u,mass_v\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.t, r.norm_u, r.norm_v, r.min_u, r.max_u, r.min_v, r.max_v, r.mass_u, r.mass_v
        ));
    }
    write_atomic(path, text.as_bytes())
}

#[derive(Clone, Copy, Debug)]
pub struct MonitorRow {
    pub t: f64,
    pub norm_u: f64,
    pub norm_v: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub mass_u: f64,
    pub mass_v: f64,
}

pub fn default_output_dir() -> PathBuf {
    PathBuf::from("sktlab-out")
}
