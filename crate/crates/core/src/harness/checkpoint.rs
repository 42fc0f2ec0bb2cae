//! `.prnn` checkpoints: a line-oriented text header naming every tensor and
//! its shape, followed by little-endian `f64` payloads (parameters, then
//! Adam first moments, then Adam second moments, each in header order).

use std::fs;
use std::path::Path;

use super::config::Task;
use crate::cells::CellKind;
use crate::error::{Error, Result};
use crate::optim::{AdamConfig, AdamState};
use crate::tensor::Tensor;

const MAGIC: &str = "prnn-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub task: Task,
    pub cell: CellKind,
    pub input_size: usize,
    pub hidden_size: usize,
    pub output_size: usize,
    pub seed: u64,
    /// Completed training iterations.
    pub iteration: u64,
    /// Validation loss measured at `iteration`, if any.
    pub valid_loss: Option<f64>,
    pub params: Vec<(String, Tensor)>,
    pub adam: AdamState,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn dims(shape: &[usize]) -> String {
    shape.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let n = self.params.len();
        if self.adam.m.len() != n || self.adam.v.len() != n {
            return Err(bad("optimizer state does not match the parameter list"));
        }
        for ((_, p), (m, v)) in self.params.iter().zip(self.adam.m.iter().zip(&self.adam.v)) {
            if m.shape() != p.shape() || v.shape() != p.shape() {
                return Err(Error::dim("checkpoint", p.shape(), m.shape()));
            }
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.adam.config;
        let valid = self.valid_loss.map_or("none".to_string(), |v| format!("{v:?}"));
        let mut header = format!(
            "{MAGIC} v{FORMAT_VERSION}\ntask {}\ncell {}\ninput_size {}\nhidden_size {}\noutput_size {}\n\
             seed {}\niteration {}\nvalid_loss {valid}\nadam_t {}\nadam_lr {lr:?}\nadam_beta1 {beta1:?}\n\
             adam_beta2 {beta2:?}\nadam_eps {eps:?}\ntensors {n}\n",
            self.task,
            self.cell,
            self.input_size,
            self.hidden_size,
            self.output_size,
            self.seed,
            self.iteration,
            self.adam.t,
        );
        for (name, t) in &self.params {
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(bad(format!("invalid tensor name '{name}'")));
            }
            header.push_str(&format!("{name} f64 {}\n", dims(t.shape())));
        }
        header.push_str("end\n");

        let mut out = header.into_bytes();
        let tensors = self
            .params
            .iter()
            .map(|(_, t)| t)
            .chain(&self.adam.m)
            .chain(&self.adam.v);
        for t in tensors {
            for x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let end = bytes
            .windows(5)
            .position(|w| w == b"\nend\n")
            .ok_or_else(|| bad("missing header terminator"))?;
        let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8"))?;
        let mut payload = &bytes[end + 5..];
        let mut lines = header.lines();

        let first = lines.next().unwrap_or("");
        if first != format!("{MAGIC} v{FORMAT_VERSION}") {
            return Err(bad(format!("unsupported header '{first}'")));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(format!("missing field {key}")))?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok(v.to_string()),
                _ => Err(bad(format!("expected field {key}, found '{line}'"))),
            }
        };
        fn num<T: std::str::FromStr>(key: &str, v: String) -> Result<T> {
            v.parse().map_err(|_| bad(format!("bad value '{v}' for {key}")))
        }
        let task: Task = field("task")?.parse().map_err(|e: Error| bad(e.to_string()))?;
        let cell: CellKind = field("cell")?.parse().map_err(|e: Error| bad(e.to_string()))?;
        let input_size = num("input_size", field("input_size")?)?;
        let hidden_size = num("hidden_size", field("hidden_size")?)?;
        let output_size = num("output_size", field("output_size")?)?;
        let seed = num("seed", field("seed")?)?;
        let iteration = num("iteration", field("iteration")?)?;
        let valid_loss = match field("valid_loss")?.as_str() {
            "none" => None,
            v => Some(num("valid_loss", v.to_string())?),
        };
        let t = num("adam_t", field("adam_t")?)?;
        let config = AdamConfig {
            lr: num("adam_lr", field("adam_lr")?)?,
            beta1: num("adam_beta1", field("adam_beta1")?)?,
            beta2: num("adam_beta2", field("adam_beta2")?)?,
            eps: num("adam_eps", field("adam_eps")?)?,
        };
        let count: usize = num("tensors", field("tensors")?)?;

        let mut specs = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines.next().ok_or_else(|| bad("truncated tensor list"))?;
            let parts: Vec<&str> = line.split(' ').collect();
            let [name, "f64", shape] = parts.as_slice() else {
                return Err(bad(format!("bad tensor line '{line}'")));
            };
            let shape: Vec<usize> = shape
                .split('x')
                .map(|d| d.parse().map_err(|_| bad(format!("bad shape in '{line}'"))))
                .collect::<Result<_>>()?;
            specs.push((name.to_string(), shape));
        }
        if let Some(extra) = lines.next() {
            return Err(bad(format!("unexpected header line '{extra}'")));
        }

        let total: usize = specs.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
        if payload.len() != 3 * total * 8 {
            return Err(bad(format!(
                "payload holds {} bytes, header describes {}",
                payload.len(),
                3 * total * 8
            )));
        }
        let mut take = |shape: &[usize]| -> Result<Tensor> {
            let n: usize = shape.iter().product();
            let (chunk, rest) = payload.split_at(n * 8);
            payload = rest;
            let data = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                .collect();
            Tensor::new(shape.to_vec(), data).map_err(|e| bad(e.to_string()))
        };
        let mut params = Vec::with_capacity(count);
        for (name, shape) in &specs {
            params.push((name.clone(), take(shape)?));
        }
        let m = specs.iter().map(|(_, s)| take(s)).collect::<Result<_>>()?;
        let v = specs.iter().map(|(_, s)| take(s)).collect::<Result<_>>()?;

        Ok(Checkpoint {
            task,
            cell,
            input_size,
            hidden_size,
            output_size,
            seed,
            iteration,
            valid_loss,
            params,
            adam: AdamState { config, t, m, v },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}
