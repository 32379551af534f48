//! The `.mcs1` container: a minimal little-endian format for channel
//! stacks. Layout: magic `MCS1`, version `u16` (currently 1), height and
//! width and channel count as `u32`, then per channel a `u16` name length
//! followed by UTF-8 name bytes, then all pixel data as `f32`,
//! channel-major with each channel row-major.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::stacks::ChannelStack;

const MAGIC: &[u8; 4] = b"MCS1";
const VERSION: u16 = 1;

/// Serializes a stack. Writing the same stack twice produces identical
/// bytes.
pub fn save_raw(stack: &ChannelStack<f32>, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + stack.data().len() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&dim_u32(stack.height(), "height")?.to_le_bytes());
    buf.extend_from_slice(&dim_u32(stack.width(), "width")?.to_le_bytes());
    buf.extend_from_slice(&dim_u32(stack.channel_count(), "channel count")?.to_le_bytes());
    for name in stack.channel_names() {
        let bytes = name.as_bytes();
        if bytes.len() > u16::MAX as usize {
            return Err(Error::validation(format!(
                "channel name longer than {} bytes",
                u16::MAX
            )));
        }
        buf.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
        buf.extend_from_slice(bytes);
    }
    for v in stack.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Reads a `.mcs1` file back into a stack satisfying every
/// `ChannelStack` invariant.
pub fn load_raw(path: &Path) -> Result<ChannelStack<f32>> {
    let bytes = fs::read(path)?;
    decode(&bytes)
}

fn dim_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::validation(format!("{what} {v} exceeds u32 range")))
}

fn decode(bytes: &[u8]) -> Result<ChannelStack<f32>> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::format("bad magic, not an MCS1 file"));
    }
    let version = cur.u16("version")?;
    if version != VERSION {
        return Err(Error::format(format!("unsupported container version {version}")));
    }
    let height = cur.u32("height")? as usize;
    let width = cur.u32("width")? as usize;
    let channels = cur.u32("channel count")? as usize;
    if height == 0 || width == 0 || channels == 0 {
        return Err(Error::validation("stack dimensions must all be non-zero"));
    }

    let mut names = Vec::with_capacity(channels.min(4096));
    for i in 0..channels {
        let len = cur.u16(&format!("name length of channel {i}"))? as usize;
        let raw = cur.take(len, &format!("name of channel {i}"))?;
        let name = std::str::from_utf8(raw)
            .map_err(|_| Error::format(format!("channel {i} name is not valid UTF-8")))?;
        names.push(name.to_string());
    }

    let pixel_count = (height as u128) * (width as u128) * (channels as u128);
    let byte_count = pixel_count * 4;
    let remaining = (cur.bytes.len() - cur.pos) as u128;
    if remaining < byte_count {
        return Err(Error::truncated(format!(
            "pixel data needs {byte_count} bytes, found {remaining}"
        )));
    }
    if remaining > byte_count {
        return Err(Error::format("trailing bytes after pixel data"));
    }

    let mut data = Vec::with_capacity(pixel_count as usize);
    for _ in 0..pixel_count {
        let raw = cur.take(4, "pixel")?;
        data.push(f32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]));
    }
    ChannelStack::new(height, width, names, data)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::truncated(format!("unexpected end of file reading {what}")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
