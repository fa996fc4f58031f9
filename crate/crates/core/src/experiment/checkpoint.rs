//! Flat binary parameter files.
//!
//! Layout, all integers little-endian u32:
//! magic `CHNT`, version, tensor count, then per tensor the name length,
//! UTF-8 name, rank, dimensions, and the values as f32.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::models::{ArchitectureSpec, Model};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"CHNT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(model: &Model<f32>, mut w: W) -> Result<()> {
    let params = model.params();
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    w.write_u32::<LittleEndian>(params.len() as u32)?;
    for id in params.ids() {
        let name = params.name(id).as_bytes();
        let t = params.get(id);
        w.write_u32::<LittleEndian>(name.len() as u32)?;
        w.write_all(name)?;
        w.write_u32::<LittleEndian>(t.shape().len() as u32)?;
        for &d in t.shape() {
            w.write_u32::<LittleEndian>(d as u32)?;
        }
        for &v in t.values() {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

pub fn save_checkpoint(model: &Model<f32>, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(model, file)
}

fn data_err(msg: String) -> Error {
    Error::Data(format!("checkpoint: {msg}"))
}

/// Rebuilds a model for `spec` and fills it with the stored values. Names
/// and shapes must match the architecture exactly.
pub fn read_checkpoint<R: Read>(spec: ArchitectureSpec, mut r: R) -> Result<Model<f32>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(data_err(format!("bad magic {magic:?}")));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != CHECKPOINT_VERSION {
        return Err(data_err(format!("unsupported version {version}")));
    }
    let mut model = Model::<f32>::build(spec, 0)?;
    let count = r.read_u32::<LittleEndian>()? as usize;
    if count != model.params().len() {
        return Err(data_err(format!(
            "{count} tensors stored, architecture has {}",
            model.params().len()
        )));
    }
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        let len = r.read_u32::<LittleEndian>()? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| data_err("name is not UTF-8".into()))?;
        let rank = r.read_u32::<LittleEndian>()? as usize;
        let shape = (0..rank)
            .map(|_| r.read_u32::<LittleEndian>().map(|d| d as usize))
            .collect::<std::io::Result<Vec<_>>>()?;
        let expected = model.params().get(id);
        if name != model.params().name(id) || shape != expected.shape() {
            return Err(data_err(format!(
                "stored `{name}` {shape:?} does not match `{}` {:?}",
                model.params().name(id),
                expected.shape()
            )));
        }
        let n = expected.len();
        let mut values = vec![0f32; n];
        r.read_f32_into::<LittleEndian>(&mut values)?;
        let loaded = Tensor::new(shape, values)?;
        model.params_mut().get_mut(id).values_mut().copy_from_slice(loaded.values());
    }
    Ok(model)
}

pub fn load_checkpoint(spec: ArchitectureSpec, path: &Path) -> Result<Model<f32>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_checkpoint(spec, file)
}
