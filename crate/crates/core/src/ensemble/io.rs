//! Binary blender container: magic, method tag, selected hyperparameter,
//! CV score, then length-prefixed little-endian f64 sections.

use std::io::{Read, Write};

use windcast_nn::{FcParams, Tensor};

use super::{BlendMethod, Blender, EnsembleError, FittedBlender, GprModel, MlpModel, Result, SvrModel};
use crate::binio::{get_f64, get_u64, put_f64, put_u64};

const MAGIC: &[u8; 8] = b"WCBLEND1";

fn put_section<W: Write>(w: &mut W, values: &[f64]) -> std::io::Result<()> {
    put_u64(w, values.len() as u64)?;
    values.iter().try_for_each(|v| put_f64(w, *v))
}

fn get_section<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let n = get_u64(r)? as usize;
    if n > 1 << 32 {
        return Err(EnsembleError::Format(format!("section of {n} values")));
    }
    (0..n).map(|_| Ok(get_f64(r)?)).collect()
}

fn flatten(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![rows.len() as f64, rows.first().map_or(0, Vec::len) as f64];
    out.extend(rows.iter().flatten());
    out
}

fn unflatten(v: &[f64]) -> Result<Vec<Vec<f64>>> {
    let bad = || EnsembleError::Format("malformed matrix section".into());
    if v.len() < 2 {
        return Err(bad());
    }
    let (n, d) = (v[0] as usize, v[1] as usize);
    if v.len() != 2 + n * d {
        return Err(bad());
    }
    Ok(if d == 0 {
        vec![Vec::new(); n]
    } else {
        v[2..].chunks(d).map(<[f64]>::to_vec).collect()
    })
}

fn sections(model: &FittedBlender) -> Vec<Vec<f64>> {
    match model {
        FittedBlender::Ridge(w) => vec![w.clone()],
        FittedBlender::Svr(m) => vec![
            vec![m.gamma, m.epsilon, m.c, m.bias, m.objective, m.iterations as f64],
            flatten(&m.support),
            m.coef.clone(),
        ],
        FittedBlender::Gpr(m) => vec![
            vec![m.length_scale, m.noise_alpha],
            m.feature_mean.clone(),
            m.feature_scale.clone(),
            flatten(&m.train),
            m.dual_coef.clone(),
        ],
        FittedBlender::Mlp(m) => {
            let mut s = vec![vec![m.epochs_run as f64]];
            for l in &m.layers {
                s.push(vec![l.in_dim as f64, l.out_dim as f64]);
                s.push(l.weights.data().to_vec());
                s.push(l.biases.data().to_vec());
            }
            s
        }
    }
}

pub fn save_blender<W: Write>(b: &Blender, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[b.method().code()])?;
    put_f64(&mut w, b.hyper)?;
    put_f64(&mut w, b.cv_score)?;
    let s = sections(&b.model);
    put_u64(&mut w, s.len() as u64)?;
    for sec in &s {
        put_section(&mut w, sec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_blender<R: Read>(mut r: R) -> Result<Blender> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| EnsembleError::Format("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(EnsembleError::Format("not a blender file".into()));
    }
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let method =
        BlendMethod::from_code(tag[0]).ok_or_else(|| EnsembleError::Format(format!("unknown method tag {}", tag[0])))?;
    let hyper = get_f64(&mut r)?;
    let cv_score = get_f64(&mut r)?;
    let count = get_u64(&mut r)? as usize;
    if count > 64 {
        return Err(EnsembleError::Format(format!("{count} sections")));
    }
    let s: Vec<Vec<f64>> = (0..count).map(|_| get_section(&mut r)).collect::<Result<_>>()?;
    let want = |k: usize| {
        if s.len() == k {
            Ok(())
        } else {
            Err(EnsembleError::Format(format!("{method} blender needs {k} sections, found {}", s.len())))
        }
    };
    let model = match method {
        BlendMethod::Rr => {
            want(1)?;
            FittedBlender::Ridge(s[0].clone())
        }
        BlendMethod::Svr => {
            want(3)?;
            let h = &s[0];
            if h.len() != 6 {
                return Err(EnsembleError::Format("SVR header".into()));
            }
            FittedBlender::Svr(SvrModel {
                gamma: h[0],
                epsilon: h[1],
                c: h[2],
                bias: h[3],
                objective: h[4],
                iterations: h[5] as usize,
                support: unflatten(&s[1])?,
                coef: s[2].clone(),
            })
        }
        BlendMethod::Gpr => {
            want(5)?;
            if s[0].len() != 2 {
                return Err(EnsembleError::Format("GPR header".into()));
            }
            FittedBlender::Gpr(GprModel {
                length_scale: s[0][0],
                noise_alpha: s[0][1],
                feature_mean: s[1].clone(),
                feature_scale: s[2].clone(),
                train: unflatten(&s[3])?,
                dual_coef: s[4].clone(),
            })
        }
        BlendMethod::Ann => {
            want(10)?;
            let layer = |k: usize| -> Result<FcParams> {
                let dims = &s[1 + 3 * k];
                if dims.len() != 2 {
                    return Err(EnsembleError::Format("MLP layer header".into()));
                }
                let (i, o) = (dims[0] as usize, dims[1] as usize);
                let w = Tensor::new(&[o, i], s[2 + 3 * k].clone())?;
                let b = Tensor::new(&[o], s[3 + 3 * k].clone())?;
                Ok(FcParams::from_weights(w, b)?)
            };
            FittedBlender::Mlp(MlpModel {
                layers: [layer(0)?, layer(1)?, layer(2)?],
                epochs_run: s[0].first().copied().unwrap_or(0.0) as usize,
            })
        }
    };
    Ok(Blender {
        model,
        hyper,
        cv_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{grid_search, BlendDataset, GridConfig, MlpConfig};

    #[test]
    fn round_trip_all_methods() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![f64::from(i), f64::from(i % 7), 1.0, 2.0]).collect();
        let y: Vec<f64> = (0..20).map(|i| f64::from(i) * 0.5 + 1.0).collect();
        let d = BlendDataset::new(x, y).unwrap();
        let cfg = GridConfig {
            mlp: MlpConfig {
                max_epochs: 3,
                ..MlpConfig::default()
            },
            ..GridConfig::default()
        };
        for m in BlendMethod::ALL {
            let b = grid_search(m, &d, &[0.5], &cfg).unwrap();
            let mut buf = Vec::new();
            save_blender(&b, &mut buf).unwrap();
            let back = load_blender(buf.as_slice()).unwrap();
            assert_eq!(back, b, "{m}");
            assert_eq!(back.predict(&d.features).unwrap(), b.predict(&d.features).unwrap());
        }
        assert!(load_blender(&b"nope"[..]).is_err());
    }
}
