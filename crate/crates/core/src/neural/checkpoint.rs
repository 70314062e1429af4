//! Versioned binary container for networks, optimizer state and run metadata.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! offset   size  field
//! 0        8     magic b"FDDPGCKP"
//! 8        4     format version, u32 (currently 1)
//! 12       4     entry count, u32
//! 16       ..    entries, sorted by name
//! len-8    8     FNV-1a 64 digest of every preceding byte, u64
//!
//! entry    := name_len u16 | name utf-8 | kind u8 | payload_len u64 | payload
//! kind 1   network: n_sizes u32 | n_sizes × u32 | (n_sizes-1) × u8 activation
//!          | n_params u64 | n_params × f64            (flatten order)
//! kind 2   adam:    t u64 | beta1 f64 | beta2 f64 | eps f64 | n u64 | n × f64 m | n × f64 v
//! kind 3   u64
//! kind 4   f64
//! kind 5   text:    utf-8 bytes
//! ```
//!
//! Activation tags: 0 relu, 1 tanh, 2 identity.

use std::collections::BTreeMap;
use std::path::Path;

use super::adam::AdamState;
use super::mlp::{Activation, MlpParams};
use crate::error::{Error, Result};
use crate::seed::fnv1a64;

pub const MAGIC: &[u8; 8] = b"FDDPGCKP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Network(MlpParams),
    Adam(AdamState),
    U64(u64),
    F64(f64),
    Text(String),
}

impl Entry {
    fn kind(&self) -> u8 {
        match self {
            Entry::Network(_) => 1,
            Entry::Adam(_) => 2,
            Entry::U64(_) => 3,
            Entry::F64(_) => 4,
            Entry::Text(_) => 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    entries: BTreeMap<String, Entry>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, entry: Entry) -> &mut Self {
        self.entries.insert(name.into(), entry);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.get(name)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &Entry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn network(&self, name: &str) -> Result<&MlpParams> {
        match self.get(name) {
            Some(Entry::Network(p)) => Ok(p),
            _ => Err(Error::Checkpoint(format!("no network entry `{name}`"))),
        }
    }

    pub fn adam(&self, name: &str) -> Result<&AdamState> {
        match self.get(name) {
            Some(Entry::Adam(s)) => Ok(s),
            _ => Err(Error::Checkpoint(format!("no optimizer entry `{name}`"))),
        }
    }

    pub fn u64(&self, name: &str) -> Result<u64> {
        match self.get(name) {
            Some(Entry::U64(v)) => Ok(*v),
            _ => Err(Error::Checkpoint(format!("no integer entry `{name}`"))),
        }
    }

    pub fn f64(&self, name: &str) -> Result<f64> {
        match self.get(name) {
            Some(Entry::F64(v)) => Ok(*v),
            _ => Err(Error::Checkpoint(format!("no real entry `{name}`"))),
        }
    }

    pub fn text(&self, name: &str) -> Result<&str> {
        match self.get(name) {
            Some(Entry::Text(v)) => Ok(v),
            _ => Err(Error::Checkpoint(format!("no text entry `{name}`"))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, entry) in &self.entries {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(entry.kind());
            let payload = encode_payload(entry);
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(&payload);
        }
        let digest = fnv1a64(&out);
        out.extend_from_slice(&digest.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 24 || &bytes[..8] != MAGIC {
            return Err(Error::Checkpoint(
                "not a checkpoint (bad magic or truncated header)".into(),
            ));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().unwrap());
        if fnv1a64(body) != stored {
            return Err(Error::Checkpoint("digest mismatch (corrupt or truncated file)".into()));
        }
        let mut r = Reader::new(&body[12..]);
        let count = r.u32()?;
        let mut entries = BTreeMap::new();
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Checkpoint("entry name is not utf-8".into()))?;
            let kind = r.u8()?;
            let len = r.u64()? as usize;
            let payload = r.take(len)?;
            let entry = decode_payload(kind, payload).map_err(|e| Error::Checkpoint(format!("entry `{name}`: {e}")))?;
            entries.insert(name, entry);
        }
        if !r.is_empty() {
            return Err(Error::Checkpoint("trailing bytes after last entry".into()));
        }
        Ok(Checkpoint { entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_f64s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn encode_payload(entry: &Entry) -> Vec<u8> {
    let mut out = Vec::new();
    match entry {
        Entry::Network(p) => {
            let sizes = p.layer_sizes();
            out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
            for s in &sizes {
                out.extend_from_slice(&(*s as u32).to_le_bytes());
            }
            out.extend(p.activations().iter().map(|a| a.tag()));
            out.extend_from_slice(&(p.param_count() as u64).to_le_bytes());
            out.reserve(p.param_count() * 8);
            put_f64s(&mut out, p.flatten());
        }
        Entry::Adam(s) => {
            out.extend_from_slice(&s.t.to_le_bytes());
            put_f64s(&mut out, [s.beta1, s.beta2, s.eps]);
            out.extend_from_slice(&(s.m.len() as u64).to_le_bytes());
            put_f64s(&mut out, s.m.iter().copied());
            put_f64s(&mut out, s.v.iter().copied());
        }
        Entry::U64(v) => out.extend_from_slice(&v.to_le_bytes()),
        Entry::F64(v) => out.extend_from_slice(&v.to_le_bytes()),
        Entry::Text(s) => out.extend_from_slice(s.as_bytes()),
    }
    out
}

fn decode_payload(kind: u8, payload: &[u8]) -> Result<Entry, String> {
    let mut r = Reader::new(payload);
    let entry = match kind {
        1 => {
            let n = r.u32().map_err(|e| e.to_string())? as usize;
            let sizes = (0..n)
                .map(|_| r.u32().map(|v| v as usize))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.to_string())?;
            let acts = (0..n.saturating_sub(1))
                .map(|_| {
                    let tag = r.u8().map_err(|e| e.to_string())?;
                    Activation::from_tag(tag).ok_or_else(|| format!("unknown activation tag {tag}"))
                })
                .collect::<Result<Vec<_>, String>>()?;
            let count = r.u64().map_err(|e| e.to_string())? as usize;
            let flat = r.f64s(count).map_err(|e| e.to_string())?;
            Entry::Network(MlpParams::from_flat(&sizes, &acts, &flat).map_err(|e| e.to_string())?)
        }
        2 => {
            let err = |e: Error| e.to_string();
            let t = r.u64().map_err(err)?;
            let beta1 = r.f64().map_err(err)?;
            let beta2 = r.f64().map_err(err)?;
            let eps = r.f64().map_err(err)?;
            let n = r.u64().map_err(err)? as usize;
            let m = r.f64s(n).map_err(err)?;
            let v = r.f64s(n).map_err(err)?;
            Entry::Adam(AdamState {
                m,
                v,
                t,
                beta1,
                beta2,
                eps,
            })
        }
        3 => Entry::U64(r.u64().map_err(|e| e.to_string())?),
        4 => Entry::F64(r.f64().map_err(|e| e.to_string())?),
        5 => Entry::Text(
            String::from_utf8(r.take(payload.len()).map_err(|e| e.to_string())?.to_vec())
                .map_err(|_| "text is not utf-8".to_string())?,
        ),
        other => return Err(format!("unknown entry kind {other}")),
    };
    if !r.is_empty() {
        return Err("payload longer than its contents".into());
    }
    Ok(entry)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Checkpoint("unexpected end of data".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Checkpoint("length overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let net = MlpParams::init(&[3, 4, 1], &[Activation::Relu, Activation::Tanh], 3).unwrap();
        let mut adam = AdamState::new(net.param_count());
        adam.t = 7;
        adam.m[0] = 0.25;
        let mut ck = Checkpoint::new();
        ck.insert("actor", Entry::Network(net))
            .insert("actor_adam", Entry::Adam(adam))
            .insert("round", Entry::U64(3))
            .insert("gamma", Entry::F64(0.99))
            .insert("config_hash", Entry::Text("abc".into()));
        ck
    }

    #[test]
    fn round_trip() {
        let ck = sample();
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.u64("round").unwrap(), 3);
        assert_eq!(back.network("actor").unwrap().layer_sizes(), vec![3, 4, 1]);
    }

    #[test]
    fn header_layout() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..8], b"FDDPGCKP");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 5);
    }

    #[test]
    fn truncation_is_detected() {
        let bytes = sample().to_bytes();
        for cut in [0, 10, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(Checkpoint::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
    }

    #[test]
    fn bit_flip_is_detected() {
        let mut bytes = sample().to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x10;
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }

    #[test]
    fn unsupported_version() {
        let mut bytes = sample().to_bytes();
        bytes[8] = 9;
        let err = Checkpoint::from_bytes(&bytes).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
    }
}
