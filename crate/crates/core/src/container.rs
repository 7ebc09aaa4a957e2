//! On-disk container for models and shapes.
//!
//! A file is a single-line JSON manifest, a newline, and a binary payload.
//! The manifest names the format, version, dimensions, and a table of
//! blocks (offset, byte length, CRC-32 within the payload); each block is a
//! flat array of IEEE-754 binary64 values, little endian, matrices
//! column-major. Shape files reuse the same container with zero component
//! counts and a single `mean` block.
//!
//! Writes go through a temporary file in the target directory and a final
//! rename, so readers never observe a half-written file.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FaceShape, ShapeModel};

/// Format marker in every manifest.
pub const FORMAT_NAME: &str = "idexp-model";

/// Container version this build reads and writes.
pub const FORMAT_VERSION: u32 = 1;

/// Payload encoding marker; a different marker means the bytes cannot be
/// interpreted by this reader.
pub const LAYOUT: &str = "f64-le-column-major";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    name: String,
    vertex_count: usize,
    id_count: usize,
    exp_count: usize,
    units: String,
    layout: String,
    blocks: Vec<BlockEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BlockEntry {
    name: String,
    offset: u64,
    len: u64,
    crc32: u32,
}

/// Serializes a model and writes it atomically.
pub fn save_model(model: &ShapeModel, path: &Path) -> Result<()> {
    let mut payload = Vec::new();
    let mut blocks = Vec::new();
    append_block(&mut payload, &mut blocks, "mean", model.mean().as_slice());
    append_block(
        &mut payload,
        &mut blocks,
        "id_basis",
        model.id_basis().as_slice(),
    );
    append_block(
        &mut payload,
        &mut blocks,
        "exp_basis",
        model.exp_basis().as_slice(),
    );
    append_block(
        &mut payload,
        &mut blocks,
        "id_stddev",
        model.id_stddev().as_slice(),
    );
    append_block(
        &mut payload,
        &mut blocks,
        "exp_stddev",
        model.exp_stddev().as_slice(),
    );

    let manifest = Manifest {
        format: FORMAT_NAME.to_string(),
        version: FORMAT_VERSION,
        name: model.name().to_string(),
        vertex_count: model.vertex_count(),
        id_count: model.id_count(),
        exp_count: model.exp_count(),
        units: "mm".to_string(),
        layout: LAYOUT.to_string(),
        blocks,
    };
    write_container(&manifest, &payload, path)
}

/// Reads a model, verifying the manifest, per-block checksums, and the
/// model invariants.
pub fn load_model(path: &Path) -> Result<ShapeModel> {
    let (manifest, payload) = read_container(path)?;
    let n = 3 * manifest.vertex_count;
    let (m, k) = (manifest.id_count, manifest.exp_count);

    let mean = read_block(&manifest, &payload, "mean", n)?;
    let id_basis = read_block(&manifest, &payload, "id_basis", n * m)?;
    let exp_basis = read_block(&manifest, &payload, "exp_basis", n * k)?;
    let id_stddev = read_block(&manifest, &payload, "id_stddev", m)?;
    let exp_stddev = read_block(&manifest, &payload, "exp_stddev", k)?;

    ShapeModel::new(
        manifest.name,
        DVector::from_vec(mean),
        DMatrix::from_vec(n, m, id_basis),
        DMatrix::from_vec(n, k, exp_basis),
        DVector::from_vec(id_stddev),
        DVector::from_vec(exp_stddev),
    )
}

/// Writes a single shape as a container with only a `mean` block.
pub fn save_shape(shape: &FaceShape, path: &Path) -> Result<()> {
    if !shape.len().is_multiple_of(3) {
        return Err(Error::Dimension {
            what: "shape coordinate count divisible by 3",
            expected: shape.len() / 3 * 3,
            actual: shape.len(),
        });
    }
    let mut payload = Vec::new();
    let mut blocks = Vec::new();
    append_block(&mut payload, &mut blocks, "mean", shape.coords().as_slice());

    let manifest = Manifest {
        format: FORMAT_NAME.to_string(),
        version: FORMAT_VERSION,
        name: "shape".to_string(),
        vertex_count: shape.len() / 3,
        id_count: 0,
        exp_count: 0,
        units: "mm".to_string(),
        layout: LAYOUT.to_string(),
        blocks,
    };
    write_container(&manifest, &payload, path)
}

/// Reads a shape container (zero component counts, single `mean` block).
pub fn load_shape(path: &Path) -> Result<FaceShape> {
    let (manifest, payload) = read_container(path)?;
    if manifest.id_count != 0 || manifest.exp_count != 0 {
        return Err(Error::MalformedManifest(format!(
            "expected a shape file but found a model with {} + {} components",
            manifest.id_count, manifest.exp_count
        )));
    }
    let coords = read_block(&manifest, &payload, "mean", 3 * manifest.vertex_count)?;
    FaceShape::new(DVector::from_vec(coords))
}

fn append_block(payload: &mut Vec<u8>, blocks: &mut Vec<BlockEntry>, name: &str, values: &[f64]) {
    let offset = payload.len() as u64;
    for value in values {
        payload.extend_from_slice(&value.to_le_bytes());
    }
    let bytes = &payload[offset as usize..];
    blocks.push(BlockEntry {
        name: name.to_string(),
        offset,
        len: bytes.len() as u64,
        crc32: crc32fast::hash(bytes),
    });
}

fn write_container(manifest: &Manifest, payload: &[u8], path: &Path) -> Result<()> {
    let manifest_line =
        serde_json::to_string(manifest).expect("manifest serialization cannot fail");
    debug_assert!(!manifest_line.contains('\n'));

    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut temp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    temp.write_all(manifest_line.as_bytes())?;
    temp.write_all(b"\n")?;
    temp.write_all(payload)?;
    temp.flush()?;
    temp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn read_container(path: &Path) -> Result<(Manifest, Vec<u8>)> {
    let bytes = std::fs::read(path)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedManifest("no newline after manifest line".into()))?;
    let manifest: Manifest = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::MalformedManifest(e.to_string()))?;
    if manifest.format != FORMAT_NAME {
        return Err(Error::MalformedManifest(format!(
            "unrecognized format marker {:?}",
            manifest.format
        )));
    }
    if manifest.version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(manifest.version));
    }
    if manifest.layout != LAYOUT {
        return Err(Error::MalformedManifest(format!(
            "unsupported payload layout {:?}",
            manifest.layout
        )));
    }
    Ok((manifest, bytes[newline + 1..].to_vec()))
}

/// Locates a block, verifies its bounds, length, and CRC-32, and decodes it
/// as little-endian f64 values.
fn read_block(
    manifest: &Manifest,
    payload: &[u8],
    name: &str,
    expected_values: usize,
) -> Result<Vec<f64>> {
    let corrupt = |reason: String| Error::CorruptModel {
        block: name.to_string(),
        reason,
    };
    let entry = manifest
        .blocks
        .iter()
        .find(|b| b.name == name)
        .ok_or_else(|| corrupt("block missing from manifest".into()))?;

    let start = entry.offset as usize;
    let end = start
        .checked_add(entry.len as usize)
        .filter(|&e| e <= payload.len())
        .ok_or_else(|| corrupt("block extends past end of file".into()))?;
    let bytes = &payload[start..end];
    if !bytes.len().is_multiple_of(8) || bytes.len() / 8 != expected_values {
        // The manifest's declared dimensions disagree with its own block
        // table, so the file is self-inconsistent rather than damaged.
        return Err(Error::MalformedManifest(format!(
            "block {name}: expected {expected_values} values ({} bytes), manifest declares {}",
            expected_values * 8,
            bytes.len()
        )));
    }
    let computed = crc32fast::hash(bytes);
    if computed != entry.crc32 {
        return Err(corrupt(format!(
            "crc mismatch: stored {:08x}, computed {computed:08x}",
            entry.crc32
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}
