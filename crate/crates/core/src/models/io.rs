//! Binary model container: magic, architecture tag, layer sizes,
//! normalisation statistics, training metadata, a shape table and one
//! little-endian f64 block with every parameter in [`Stage1Model::tensors`]
//! order.

use std::io::{Read, Write};

use super::{build_model_with_dims, Architecture, ModelDims, ModelError, Stage1Model, TrainingMeta};
use crate::binio::{get_f64, get_norm, get_u64, put_f64, put_norm, put_u64};

const MAGIC: &[u8; 8] = b"WCSTAGE1";
const VERSION: u32 = 1;

pub fn save_model<W: Write>(model: &Stage1Model, mut w: W) -> Result<(), ModelError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[model.architecture.code()])?;
    let d = &model.dims;
    for v in [d.history, d.lstm_hidden, d.conv1_kernels, d.conv2_kernels, d.fc[0], d.fc[1], d.fc[2]] {
        put_u64(&mut w, v as u64)?;
    }
    put_norm(&mut w, &model.norm_stats)?;
    put_u64(&mut w, model.meta.epochs_run as u64)?;
    put_f64(&mut w, model.meta.best_val_rmse)?;
    put_u64(&mut w, model.meta.seed)?;
    let tensors = model.tensors();
    put_u64(&mut w, tensors.len() as u64)?;
    for t in &tensors {
        put_u64(&mut w, t.shape().len() as u64)?;
        for &s in t.shape() {
            put_u64(&mut w, s as u64)?;
        }
    }
    for t in &tensors {
        for &v in t.data() {
            put_f64(&mut w, v)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Format(msg.into())
}

pub fn load_model<R: Read>(mut r: R) -> Result<Stage1Model, ModelError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != MAGIC {
        return Err(bad("not a stage-1 model file"));
    }
    let mut ver = [0u8; 4];
    r.read_exact(&mut ver)?;
    if u32::from_le_bytes(ver) != VERSION {
        return Err(bad(format!("unsupported version {}", u32::from_le_bytes(ver))));
    }
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let arch = Architecture::from_code(tag[0]).ok_or_else(|| bad(format!("unknown architecture tag {}", tag[0])))?;
    let mut d = [0usize; 7];
    for v in &mut d {
        *v = usize::try_from(get_u64(&mut r)?).map_err(|_| bad("dimension overflow"))?;
    }
    let dims = ModelDims {
        history: d[0],
        lstm_hidden: d[1],
        conv1_kernels: d[2],
        conv2_kernels: d[3],
        fc: [d[4], d[5], d[6]],
    };
    let norm = get_norm(&mut r)?;
    let meta = TrainingMeta {
        epochs_run: get_u64(&mut r)? as usize,
        best_val_rmse: get_f64(&mut r)?,
        seed: get_u64(&mut r)?,
    };
    let mut model = build_model_with_dims(arch, 0, norm, dims)?;
    model.meta = meta;
    let count = get_u64(&mut r)? as usize;
    let expected: Vec<Vec<usize>> = model.tensors().iter().map(|t| t.shape().to_vec()).collect();
    if count != expected.len() {
        return Err(bad(format!("{count} tensors, expected {}", expected.len())));
    }
    for (i, want) in expected.iter().enumerate() {
        let nd = get_u64(&mut r)? as usize;
        if nd != want.len() {
            return Err(bad(format!("tensor {i}: rank {nd}, expected {}", want.len())));
        }
        for &w in want {
            if get_u64(&mut r)? as usize != w {
                return Err(bad(format!("tensor {i}: shape differs from {want:?}")));
            }
        }
    }
    for t in model.tensors_mut() {
        for v in t.data_mut() {
            *v = get_f64(&mut r).map_err(|_| bad("truncated parameter block"))?;
        }
    }
    Ok(model)
}
