//! Checkpoint files: `TAXELNN1`, a `u32` header length, a JSON header
//! describing every network and tensor, then the parameters as one
//! little-endian `f64` blob. Writing a loaded checkpoint reproduces the
//! original bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Network, NetworkSpec};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"TAXELNN1";
pub const VERSION: &str = "taxel-nn-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset into the blob, in values.
    offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkEntry {
    spec: NetworkSpec,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: String,
    networks: Vec<NetworkEntry>,
    total_values: usize,
    metadata: serde_json::Value,
}

/// Networks plus free-form metadata, as stored on disk.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub networks: Vec<Network>,
    pub metadata: serde_json::Value,
}

impl Checkpoint {
    pub fn network(&self, name: &str) -> Option<&Network> {
        self.networks.iter().find(|n| n.name() == name)
    }

    pub fn take(&mut self, name: &str) -> Result<Network> {
        let i = self
            .networks
            .iter()
            .position(|n| n.name() == name)
            .ok_or_else(|| Error::Config(format!("checkpoint has no network named {name}")))?;
        Ok(self.networks.remove(i))
    }
}

pub fn encode_checkpoint(networks: &[&Network], metadata: &serde_json::Value) -> Result<Vec<u8>> {
    let mut entries = Vec::with_capacity(networks.len());
    let mut offset = 0;
    for net in networks {
        if entries.iter().any(|e: &NetworkEntry| e.spec.name == net.name()) {
            return Err(Error::Config(format!("duplicate network name {}", net.name())));
        }
        let tensors = net
            .param_names()
            .iter()
            .zip(net.params())
            .map(|(name, t)| {
                let e = TensorEntry { name: name.clone(), shape: t.shape().to_vec(), offset };
                offset += t.len();
                e
            })
            .collect();
        entries.push(NetworkEntry { spec: net.spec().clone(), tensors });
    }
    let header =
        Header { version: VERSION.into(), networks: entries, total_values: offset, metadata: metadata.clone() };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = Vec::with_capacity(12 + json.len() + offset * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for net in networks {
        for t in net.params() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> std::result::Result<Checkpoint, String> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err("missing checkpoint magic".into());
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = 12usize.checked_add(hlen).filter(|b| *b <= bytes.len()).ok_or("truncated header")?;
    let header: Header = serde_json::from_slice(&bytes[12..body]).map_err(|e| e.to_string())?;
    if header.version != VERSION {
        return Err(format!("unsupported checkpoint version {}", header.version));
    }
    if bytes.len() - body != header.total_values * 8 {
        return Err(format!("expected {} parameter values, found {} bytes", header.total_values, bytes.len() - body));
    }
    let values: Vec<f64> =
        bytes[body..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let mut networks = Vec::with_capacity(header.networks.len());
    for entry in header.networks {
        let mut params = Vec::with_capacity(entry.tensors.len());
        for t in &entry.tensors {
            let n: usize = t.shape.iter().product();
            let end = t.offset.checked_add(n).filter(|e| *e <= values.len()).ok_or("tensor outside blob")?;
            params.push(Tensor::new(t.shape.clone(), values[t.offset..end].to_vec()).map_err(|e| e.to_string())?);
        }
        let net = Network::from_params(entry.spec, params).map_err(|e| e.to_string())?;
        if net.param_names().iter().ne(entry.tensors.iter().map(|t| &t.name)) {
            return Err(format!("tensor names of {} do not match its layers", net.name()));
        }
        networks.push(net);
    }
    Ok(Checkpoint { networks, metadata: header.metadata })
}

pub fn save_checkpoint(path: &Path, networks: &[&Network], metadata: &serde_json::Value) -> Result<()> {
    let bytes = encode_checkpoint(networks, metadata)?;
    std::fs::write(path, bytes).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    decode_checkpoint(&bytes).map_err(|msg| Error::Format { path: path.to_path_buf(), msg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::LayerSpec;

    fn nets() -> (Network, Network) {
        let a = Network::new(
            NetworkSpec::new(
                "enc",
                &[1, 8],
                vec![
                    LayerSpec::Conv1d { in_channels: 1, out_channels: 3, kernel: 3 },
                    LayerSpec::Relu,
                    LayerSpec::GlobalAvgPool,
                ],
            ),
            1,
        )
        .unwrap();
        let b =
            Network::new(NetworkSpec::new("head", &[3], vec![LayerSpec::Dense { inputs: 3, outputs: 2 }]), 2).unwrap();
        (a, b)
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let (a, b) = nets();
        let meta = serde_json::json!({"classes": ["x", "y"], "epoch": 3, "scale": 0.1});
        let bytes = encode_checkpoint(&[&a, &b], &meta).unwrap();
        let ck = decode_checkpoint(&bytes).unwrap();
        assert_eq!(ck.network("enc").unwrap().params(), a.params());
        assert_eq!(ck.metadata, meta);
        let again = encode_checkpoint(&ck.networks.iter().collect::<Vec<_>>(), &ck.metadata).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn file_round_trip() {
        let (a, _) = nets();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &[&a], &serde_json::Value::Null).unwrap();
        let mut ck = load_checkpoint(&path).unwrap();
        let x = Tensor::new(vec![1, 8], (0..8).map(f64::from).collect()).unwrap();
        assert_eq!(ck.take("enc").unwrap().infer(&x).unwrap(), a.infer(&x).unwrap());
        assert!(ck.take("enc").is_err());
    }

    #[test]
    fn corruption_is_reported() {
        let (a, b) = nets();
        let bytes = encode_checkpoint(&[&a, &b], &serde_json::Value::Null).unwrap();
        assert!(decode_checkpoint(&bytes[..bytes.len() - 8]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad).is_err());
        assert!(encode_checkpoint(&[&a, &a], &serde_json::Value::Null).is_err());
    }
}
