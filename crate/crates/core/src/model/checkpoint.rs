// Checkpoint layout: a directory holding `manifest.txt` and one raw
// little-endian f64 file per tensor. The manifest is line oriented:
//
//   actorgraph-checkpoint 1
//   d_in 768
//   hidden 512
//   layers 2
//   activation leaky_relu:0.01
//   variant gated
//   tensor input.weight 768 512
//   ...
//
// Tensor lines appear in `named_tensors` order; the file for tensor `name`
// is `<name>.bin`.

use std::fs;
use std::path::Path;

use super::{ModelConfig, ModelError, ModelParams};
use crate::numkit::Matrix;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "actorgraph-checkpoint";

fn err(path: &Path, message: impl Into<String>) -> ModelError {
    ModelError::Checkpoint {
        path: path.display().to_string(),
        message: message.into(),
    }
}

pub fn save_checkpoint(params: &ModelParams, dir: &Path) -> Result<(), ModelError> {
    fs::create_dir_all(dir).map_err(|e| err(dir, e.to_string()))?;
    let c = &params.config;
    let mut manifest = format!(
        "{MAGIC} {CHECKPOINT_VERSION}\nd_in {}\nhidden {}\nlayers {}\nactivation {}\nvariant {}\n",
        c.d_in, c.hidden, c.layers, c.activation, c.variant
    );
    for (name, m) in params.named_tensors() {
        manifest.push_str(&format!("tensor {name} {} {}\n", m.rows(), m.cols()));
        let bytes: Vec<u8> = m.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect();
        let path = dir.join(format!("{name}.bin"));
        fs::write(&path, bytes).map_err(|e| err(&path, e.to_string()))?;
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| err(&path, e.to_string()))
}

pub fn load_checkpoint(dir: &Path) -> Result<ModelParams, ModelError> {
    let mpath = dir.join("manifest.txt");
    let text = fs::read_to_string(&mpath).map_err(|e| err(&mpath, e.to_string()))?;
    let mut lines = text.lines().enumerate();

    let header = lines.next().map(|(_, l)| l).unwrap_or("");
    match header.split_once(' ') {
        Some((MAGIC, v)) if v.parse() == Ok(CHECKPOINT_VERSION) => {}
        _ => return Err(err(&mpath, format!("unrecognised header {header:?}"))),
    }

    let mut field = |key: &str| -> Result<String, ModelError> {
        match lines.next() {
            Some((_, l)) => match l.split_once(' ') {
                Some((k, v)) if k == key => Ok(v.to_string()),
                _ => Err(err(&mpath, format!("expected {key:?}, found {l:?}"))),
            },
            None => Err(err(&mpath, format!("missing {key:?}"))),
        }
    };
    let num = |s: String, key: &str| {
        s.parse::<usize>()
            .map_err(|_| err(&mpath, format!("bad {key} {s:?}")))
    };
    let config = ModelConfig {
        d_in: num(field("d_in")?, "d_in")?,
        hidden: num(field("hidden")?, "hidden")?,
        layers: num(field("layers")?, "layers")?,
        activation: field("activation")?.parse()?,
        variant: field("variant")?.parse()?,
    };

    // Shapes come from the config; the manifest must agree with them.
    let mut params = ModelParams::init(config, 0)?;
    let names: Vec<(String, (usize, usize))> = params
        .named_tensors()
        .into_iter()
        .map(|(n, m)| (n, m.shape()))
        .collect();
    let tensor_lines: Vec<(usize, &str)> = lines.filter(|(_, l)| !l.trim().is_empty()).collect();
    if tensor_lines.len() != names.len() {
        return Err(err(
            &mpath,
            format!(
                "{} tensors listed, configuration needs {}",
                tensor_lines.len(),
                names.len()
            ),
        ));
    }
    for ((slot, (name, shape)), (lineno, line)) in params
        .tensors_mut()
        .into_iter()
        .zip(&names)
        .zip(tensor_lines)
    {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let listed = match parts.as_slice() {
            ["tensor", n, r, c] => (
                n.to_string(),
                r.parse::<usize>().ok(),
                c.parse::<usize>().ok(),
            ),
            _ => {
                return Err(err(
                    &mpath,
                    format!("line {}: malformed tensor entry", lineno + 1),
                ))
            }
        };
        if listed != (name.clone(), Some(shape.0), Some(shape.1)) {
            return Err(err(
                &mpath,
                format!(
                    "line {}: expected tensor {name} {}x{}",
                    lineno + 1,
                    shape.0,
                    shape.1
                ),
            ));
        }
        let path = dir.join(format!("{name}.bin"));
        let bytes = fs::read(&path).map_err(|e| err(&path, e.to_string()))?;
        if bytes.len() != shape.0 * shape.1 * 8 {
            return Err(err(
                &path,
                format!("{} bytes, expected {}", bytes.len(), shape.0 * shape.1 * 8),
            ));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
            .collect();
        *slot = Matrix::from_vec(shape.0, shape.1, data)?;
    }
    Ok(params)
}
