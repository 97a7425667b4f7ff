//! Little-endian binary payloads, JSON sidecars and mesh files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_f64_bin(path: &Path, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads raw little-endian f64 values, rejecting NaN/inf with their byte offset.
pub fn read_f64_bin(path: &Path, expected_len: Option<usize>) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_f64(path, &bytes, expected_len)
}

fn decode_f64(path: &Path, bytes: &[u8], expected_len: Option<usize>) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::format(path, format!("{} bytes is not a multiple of 8", bytes.len())));
    }
    if let Some(n) = expected_len {
        if bytes.len() != n * 8 {
            return Err(Error::format(
                path,
                format!("expected {n} float64 values, found {}", bytes.len() / 8),
            ));
        }
    }
    let mut out = Vec::with_capacity(bytes.len() / 8);
    for (k, chunk) in bytes.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
        if !v.is_finite() {
            return Err(Error::NonFiniteInFile {
                path: path.to_path_buf(),
                offset: k * 8,
            });
        }
        out.push(v);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct MeshJson {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    #[serde(default)]
    groups: BTreeMap<String, Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MeshMeta {
    n_nodes: usize,
    n_triangles: usize,
    #[serde(default)]
    groups: BTreeMap<String, Vec<usize>>,
}

/// On-disk mesh encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeshFormat {
    Json,
    #[default]
    Binary,
}

/// Writes `mesh.json`, or `mesh.bin` + `mesh.meta.json`, into `dir`.
pub fn write_mesh(dir: &Path, mesh: &Mesh, format: MeshFormat) -> Result<()> {
    match format {
        MeshFormat::Json => write_json(
            &dir.join("mesh.json"),
            &MeshJson {
                nodes: mesh.nodes().to_vec(),
                triangles: mesh.triangles().to_vec(),
                groups: mesh.groups().clone(),
            },
        ),
        MeshFormat::Binary => {
            let path = dir.join("mesh.bin");
            let mut bytes = Vec::with_capacity(mesh.n_nodes() * 16 + mesh.n_triangles() * 12);
            for p in mesh.nodes() {
                bytes.extend_from_slice(&p[0].to_le_bytes());
                bytes.extend_from_slice(&p[1].to_le_bytes());
            }
            for t in mesh.triangles() {
                for &i in t {
                    let i = u32::try_from(i)
                        .map_err(|_| Error::format(&path, "node index exceeds u32"))?;
                    bytes.extend_from_slice(&i.to_le_bytes());
                }
            }
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            write_json(
                &dir.join("mesh.meta.json"),
                &MeshMeta {
                    n_nodes: mesh.n_nodes(),
                    n_triangles: mesh.n_triangles(),
                    groups: mesh.groups().clone(),
                },
            )
        }
    }
}

/// Reads whichever mesh encoding `dir` holds (JSON preferred when both exist).
pub fn read_mesh(dir: &Path) -> Result<Mesh> {
    let json = dir.join("mesh.json");
    if json.exists() {
        let m: MeshJson = read_json(&json)?;
        for (k, p) in m.nodes.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::NonFinite(format!("{} node {k}", json.display())));
            }
        }
        return Mesh::new(m.nodes, m.triangles, m.groups);
    }
    let bin = dir.join("mesh.bin");
    let meta_path = dir.join("mesh.meta.json");
    if !bin.exists() {
        return Err(Error::format(dir, "no mesh.json or mesh.bin"));
    }
    let meta: MeshMeta = read_json(&meta_path)?;
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    let node_bytes = meta.n_nodes * 16;
    if bytes.len() != node_bytes + meta.n_triangles * 12 {
        return Err(Error::format(&bin, "size disagrees with mesh.meta.json"));
    }
    let coords = decode_f64(&bin, &bytes[..node_bytes], None)?;
    let nodes = coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let triangles = bytes[node_bytes..]
        .chunks_exact(12)
        .map(|c| {
            let at = |o: usize| u32::from_le_bytes(c[o..o + 4].try_into().unwrap()) as usize;
            [at(0), at(4), at(8)]
        })
        .collect();
    Mesh::new(nodes, triangles, meta.groups)
}
