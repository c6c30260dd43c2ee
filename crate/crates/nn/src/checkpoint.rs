//! Binary parameter checkpoints.
//!
//! Layout: the magic `QSTNN1`, a little-endian `u64` manifest length, the
//! JSON manifest, then every layer's parameters as little-endian `f64` in
//! layer order.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::layers::LayerSpec;
use crate::network::Network;
use crate::{NnError, Result};

pub const MAGIC: &[u8; 6] = b"QSTNN1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub inputs: Vec<Vec<usize>>,
    pub layers: Vec<LayerSpec>,
    pub param_counts: Vec<usize>,
}

impl Manifest {
    pub fn of(net: &Network) -> Self {
        Self {
            inputs: net.input_shapes().to_vec(),
            layers: net.specs().to_vec(),
            param_counts: net.layer_param_counts(),
        }
    }

    fn json(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }
}

pub fn to_bytes(net: &Network) -> Vec<u8> {
    let manifest = Manifest::of(net).json();
    let params = net.params();
    let mut out = Vec::with_capacity(14 + manifest.len() + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

/// Splits a checkpoint into its manifest and parameter vector.
pub fn parse(bytes: &[u8]) -> Result<(Manifest, Vec<f64>)> {
    let bad = |msg: &str| NnError::Checkpoint(msg.to_string());
    if bytes.len() < 14 || &bytes[..6] != MAGIC {
        return Err(bad("missing QSTNN1 header"));
    }
    let len = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(14..).ok_or_else(|| bad("truncated header"))?;
    if body.len() < len {
        return Err(bad("truncated manifest"));
    }
    let manifest: Manifest =
        serde_json::from_slice(&body[..len]).map_err(|e| NnError::Checkpoint(format!("manifest: {e}")))?;
    let blocks = &body[len..];
    let expected: usize = manifest.param_counts.iter().sum();
    if blocks.len() != 8 * expected {
        return Err(NnError::Checkpoint(format!(
            "manifest declares {expected} parameters, file holds {} bytes of parameters",
            blocks.len()
        )));
    }
    let params = blocks.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((manifest, params))
}

/// Loads parameters into a network whose manifest must match the file's.
pub fn load_into(net: &mut Network, bytes: &[u8]) -> Result<()> {
    let (manifest, params) = parse(bytes)?;
    if manifest.json() != Manifest::of(net).json() {
        return Err(NnError::Checkpoint("layer manifest does not match the network".into()));
    }
    net.set_params(&params)
}

/// Rebuilds a network from a checkpoint. Expectation layers carry no
/// operators in the manifest, so networks containing them must be built by
/// the caller and filled with [`load_into`].
pub fn restore(bytes: &[u8]) -> Result<Network> {
    let (manifest, params) = parse(bytes)?;
    let mut net = Network::new(&manifest.inputs, manifest.layers.clone(), 0)?;
    if net.layer_param_counts() != manifest.param_counts {
        return Err(NnError::Checkpoint("parameter counts do not match the layer specs".into()));
    }
    net.set_params(&params)?;
    Ok(net)
}

pub fn save(net: &Network, path: &Path) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&to_bytes(net))?;
    f.sync_all()
}

pub fn load(path: &Path) -> Result<Network> {
    let bytes = std::fs::read(path).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
    restore(&bytes)
}
