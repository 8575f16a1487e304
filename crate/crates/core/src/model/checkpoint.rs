//! Checkpoint container: a text header terminated by an empty line, then for each
//! parameter `u32 name_len | name | u32 ndim | u32 dims.. | f64 data..`, all little-endian.

use std::fs;
use std::path::Path;

use super::encoder::EncoderConfig;
use super::net::{NetKind, Network};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &str = "WSSCOD-CKPT v1";

pub fn checkpoint_bytes(net: &Network) -> Vec<u8> {
    let cfg = net.config();
    let ps = net.params();
    let sc = cfg.stage_channels.map(|c| c.to_string()).join(",");
    let header = format!(
        "{CHECKPOINT_MAGIC}\nkind={}\nseed={}\nstage_channels={sc}\nunified_channels={}\nblocks_per_stage={}\nparams={}\n\n",
        net.kind().name(),
        net.seed(),
        cfg.unified_channels,
        cfg.blocks_per_stage,
        ps.len()
    );
    let mut out = header.into_bytes();
    for (name, p) in ps.names().iter().zip(ps.params()) {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        let shape = p.value.shape();
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_bytes(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&bytes, path)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(malformed(self.path, "truncated parameter data"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }
}

fn malformed(path: &Path, msg: impl Into<String>) -> Error {
    Error::Malformed {
        what: "checkpoint",
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn parse_checkpoint(bytes: &[u8], path: &Path) -> Result<Network> {
    let end = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| malformed(path, "missing header terminator"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| malformed(path, "header is not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next() != Some(CHECKPOINT_MAGIC) {
        return Err(malformed(path, "bad magic"));
    }
    let mut field = |key: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| malformed(path, format!("missing `{key}`")))?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| malformed(path, format!("expected `{key}=`, got `{line}`")))
    };
    let num = |s: String, key: &str| -> Result<usize> {
        s.parse().map_err(|_| malformed(path, format!("`{key}` is not an integer")))
    };
    let kind = match field("kind")?.as_str() {
        "anet" => NetKind::Anet,
        "pnet" => NetKind::Pnet,
        other => return Err(malformed(path, format!("unknown kind `{other}`"))),
    };
    let seed: u64 = field("seed")?.parse().map_err(|_| malformed(path, "bad seed"))?;
    let sc: Vec<usize> = field("stage_channels")?
        .split(',')
        .map(|s| s.parse().map_err(|_| malformed(path, "bad stage_channels")))
        .collect::<Result<_>>()?;
    let stage_channels: [usize; 4] = sc.try_into().map_err(|_| malformed(path, "need four stage channels"))?;
    let unified_channels = num(field("unified_channels")?, "unified_channels")?;
    let blocks_per_stage = num(field("blocks_per_stage")?, "blocks_per_stage")?;
    let count = num(field("params")?, "params")?;
    let cfg = EncoderConfig {
        stage_channels,
        unified_channels,
        blocks_per_stage,
    };
    let mut net = Network::new(kind, cfg, seed)?;
    if count != net.params().len() {
        return Err(malformed(
            path,
            format!("{count} parameters listed, architecture has {}", net.params().len()),
        ));
    }
    let mut r = Reader {
        bytes,
        pos: end + 2,
        path,
    };
    for i in 0..count {
        let n = r.u32()?;
        let name = String::from_utf8(r.take(n)?.to_vec()).map_err(|_| malformed(path, "name is not UTF-8"))?;
        if name != net.params().names()[i] {
            return Err(malformed(
                path,
                format!("parameter {i} is `{name}`, expected `{}`", net.params().names()[i]),
            ));
        }
        let ndim = r.u32()?;
        let shape = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let len: usize = shape.iter().product();
        let data = r
            .take(len * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Tensor::new(shape, data)?;
        let id = net.params().find(&name).expect("name checked");
        net.params_mut()
            .set_value(id, t)
            .map_err(|e| malformed(path, format!("`{name}`: {e}")))?;
    }
    if r.pos != bytes.len() {
        return Err(malformed(path, "trailing bytes"));
    }
    Ok(net)
}
