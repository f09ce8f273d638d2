//! Parameter checkpoints: one ASCII header line describing the shape, then
//! the flat parameter vector as little-endian `f64`s.
//!
//! ```text
//! ssrl-policy input=<n> hidden=<h1>,<h2> output=<n> head=<categorical|gaussian>\n
//! ```

use std::path::Path;

use super::net::{HeadKind, Layout, PolicyParams};
use crate::error::{Error, Result};
use crate::io::atomic_write;

const MAGIC: &str = "ssrl-policy";

pub fn encode(params: &PolicyParams) -> Vec<u8> {
    let l = params.layout();
    let header = format!(
        "{MAGIC} input={} hidden={},{} output={} head={}\n",
        l.input_dim,
        l.hidden[0],
        l.hidden[1],
        l.output_dim,
        params.head().as_str()
    );
    let mut bytes = header.into_bytes();
    bytes.reserve(params.theta().len() * 8);
    for x in params.theta() {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    bytes
}

pub fn decode(bytes: &[u8]) -> Result<PolicyParams> {
    let newline =
        bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::Parse("checkpoint has no header line".into()))?;
    let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| Error::Parse("header is not UTF-8".into()))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(MAGIC) {
        return Err(Error::Parse("not a policy checkpoint".into()));
    }
    let (mut input, mut hidden, mut output, mut head) = (None, None, None, None);
    for field in fields {
        let (key, value) = field.split_once('=').ok_or_else(|| Error::Parse(format!("bad header field {field:?}")))?;
        let num = |v: &str| v.parse::<usize>().map_err(|e| Error::Parse(format!("{key}: {e}")));
        match key {
            "input" => input = Some(num(value)?),
            "output" => output = Some(num(value)?),
            "hidden" => {
                let (a, b) = value.split_once(',').ok_or_else(|| Error::Parse("hidden needs two widths".into()))?;
                hidden = Some([num(a)?, num(b)?]);
            }
            "head" => head = Some(HeadKind::parse(value)?),
            other => return Err(Error::Parse(format!("unknown header key {other:?}"))),
        }
    }
    let missing = |k: &str| Error::Parse(format!("header missing {k}"));
    let layout = Layout::with_hidden(
        input.ok_or_else(|| missing("input"))?,
        hidden.ok_or_else(|| missing("hidden"))?,
        output.ok_or_else(|| missing("output"))?,
    );
    let head = head.ok_or_else(|| missing("head"))?;
    let body = &bytes[newline + 1..];
    if body.len() != layout.param_count() * 8 {
        return Err(Error::Parse(format!(
            "checkpoint body has {} bytes, layout needs {}",
            body.len(),
            layout.param_count() * 8
        )));
    }
    let theta = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunks of 8"))).collect();
    PolicyParams::new(layout, head, theta)
}

pub fn save(params: &PolicyParams, path: &Path) -> Result<()> {
    atomic_write(path, &encode(params))
}

pub fn load(path: &Path) -> Result<PolicyParams> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn header_is_readable_and_body_little_endian() {
        let layout = Layout::with_hidden(2, [3, 3], 1);
        let mut p = PolicyParams::zeros(layout, HeadKind::GaussianMean);
        p.theta_mut()[0] = 1.5;
        let bytes = encode(&p);
        let text = String::from_utf8_lossy(&bytes[..bytes.iter().position(|&b| b == b'\n').unwrap()]).to_string();
        assert_eq!(text, "ssrl-policy input=2 hidden=3,3 output=1 head=gaussian");
        let body = &bytes[text.len() + 1..];
        assert_eq!(&body[..8], &1.5f64.to_le_bytes());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        let p = PolicyParams::init(Layout::new(4, 2), HeadKind::Categorical, &mut ChaCha8Rng::seed_from_u64(5));
        save(&p, &path).unwrap();
        assert_eq!(load(&path).unwrap(), p);
    }

    #[test]
    fn truncated_body_rejected() {
        let p = PolicyParams::zeros(Layout::new(1, 1), HeadKind::Categorical);
        let mut bytes = encode(&p);
        bytes.pop();
        assert!(decode(&bytes).is_err());
        assert!(decode(b"garbage\n").is_err());
    }
}
