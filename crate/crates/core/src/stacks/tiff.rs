//! Minimal TIFF import: multi-page, uncompressed, single-sample
//! grayscale, 8 or 16 bits per sample, either byte order. Each page
//! becomes one channel; 8-bit samples are scaled by 1/255 and 16-bit by
//! 1/65535. Anything fancier (compression, tiles, colour) is rejected
//! rather than guessed at.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::stacks::ChannelStack;

const TAG_IMAGE_WIDTH: u16 = 0x100;
const TAG_IMAGE_LENGTH: u16 = 0x101;
const TAG_BITS_PER_SAMPLE: u16 = 0x102;
const TAG_COMPRESSION: u16 = 0x103;
const TAG_PHOTOMETRIC: u16 = 0x106;
const TAG_STRIP_OFFSETS: u16 = 0x111;
const TAG_SAMPLES_PER_PIXEL: u16 = 0x115;
const TAG_STRIP_BYTE_COUNTS: u16 = 0x117;
const TAG_PLANAR_CONFIG: u16 = 0x11C;
const TAG_PAGE_NAME: u16 = 0x11D;
const TAG_TILE_WIDTH: u16 = 0x142;
const TAG_TILE_LENGTH: u16 = 0x143;
const TAG_TILE_OFFSETS: u16 = 0x144;
const TAG_SAMPLE_FORMAT: u16 = 0x153;

/// Reads every page of `path` into one stack. Pages must share
/// dimensions; pages without a page-name tag are called `ch<index>`.
pub fn import_tiff(path: &Path) -> Result<ChannelStack<f32>> {
    let bytes = fs::read(path)?;
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> Result<ChannelStack<f32>> {
    if bytes.len() < 8 {
        return Err(Error::truncated("file shorter than a TIFF header"));
    }
    let big_endian = match &bytes[0..2] {
        b"II" => false,
        b"MM" => true,
        _ => return Err(Error::format("not a TIFF file: bad byte-order mark")),
    };
    let r = Reader { bytes, big_endian };
    if r.u16(2)? != 42 {
        return Err(Error::format("not a TIFF file: bad magic number"));
    }

    let mut ifd_offset = r.u32(4)? as usize;
    let mut visited = Vec::new();
    let mut pages: Vec<Page> = Vec::new();
    while ifd_offset != 0 {
        if visited.contains(&ifd_offset) {
            return Err(Error::format("cyclic page directory chain"));
        }
        visited.push(ifd_offset);
        let (page, next) = read_page(&r, ifd_offset, pages.len())?;
        pages.push(page);
        ifd_offset = next;
    }
    if pages.is_empty() {
        return Err(Error::format("TIFF contains no pages"));
    }

    let (h, w) = (pages[0].height, pages[0].width);
    for (i, p) in pages.iter().enumerate() {
        if (p.height, p.width) != (h, w) {
            return Err(Error::validation(format!(
                "page {i} is {}x{}, expected {h}x{w}: all pages must share dimensions",
                p.height, p.width
            )));
        }
    }

    let mut names = Vec::with_capacity(pages.len());
    let mut data = Vec::with_capacity(pages.len() * h * w);
    for p in pages {
        names.push(p.name);
        data.extend_from_slice(&p.pixels);
    }
    ChannelStack::new(h, w, names, data)
}

struct Page {
    height: usize,
    width: usize,
    name: String,
    pixels: Vec<f32>,
}

fn read_page(r: &Reader, offset: usize, index: usize) -> Result<(Page, usize)> {
    let entry_count = r.u16(offset)? as usize;
    let mut entries = Vec::with_capacity(entry_count);
    for i in 0..entry_count {
        entries.push(r.entry(offset + 2 + i * 12)?);
    }
    let next = r.u32(offset + 2 + entry_count * 12)? as usize;

    let find = |tag: u16| entries.iter().find(|e| e.tag == tag);
    if find(TAG_TILE_WIDTH).is_some() || find(TAG_TILE_LENGTH).is_some() || find(TAG_TILE_OFFSETS).is_some() {
        return Err(Error::unsupported("tiled TIFF pages"));
    }

    let width = required_scalar(r, find(TAG_IMAGE_WIDTH), "image width")? as usize;
    let height = required_scalar(r, find(TAG_IMAGE_LENGTH), "image length")? as usize;
    if width == 0 || height == 0 {
        return Err(Error::format("page has zero dimension"));
    }

    let compression = optional_scalar(r, find(TAG_COMPRESSION))?.unwrap_or(1);
    if compression != 1 {
        return Err(Error::unsupported(format!("compression scheme {compression}")));
    }
    let samples = optional_scalar(r, find(TAG_SAMPLES_PER_PIXEL))?.unwrap_or(1);
    if samples != 1 {
        return Err(Error::unsupported(format!("{samples} samples per pixel, expected grayscale")));
    }
    let photometric = optional_scalar(r, find(TAG_PHOTOMETRIC))?.unwrap_or(1);
    if photometric > 1 {
        return Err(Error::unsupported(format!("photometric interpretation {photometric}")));
    }
    let planar = optional_scalar(r, find(TAG_PLANAR_CONFIG))?.unwrap_or(1);
    if planar != 1 {
        return Err(Error::unsupported(format!("planar configuration {planar}")));
    }
    let sample_format = optional_scalar(r, find(TAG_SAMPLE_FORMAT))?.unwrap_or(1);
    if sample_format != 1 {
        return Err(Error::unsupported(format!("sample format {sample_format}, expected unsigned")));
    }
    let bits = match find(TAG_BITS_PER_SAMPLE) {
        Some(e) => {
            let all = r.values_u32(e)?;
            let first = *all.first().ok_or_else(|| Error::format("empty bits-per-sample"))?;
            if all.iter().any(|&b| b != first) {
                return Err(Error::unsupported("mixed bit depths in one page"));
            }
            first
        }
        None => 1,
    };
    if bits != 8 && bits != 16 {
        return Err(Error::unsupported(format!("{bits} bits per sample, expected 8 or 16")));
    }
    let bytes_per_sample = (bits / 8) as usize;

    let offsets = r.values_u32(
        find(TAG_STRIP_OFFSETS).ok_or_else(|| Error::format("page missing strip offsets"))?,
    )?;
    let counts = r.values_u32(
        find(TAG_STRIP_BYTE_COUNTS).ok_or_else(|| Error::format("page missing strip byte counts"))?,
    )?;
    if offsets.len() != counts.len() {
        return Err(Error::format("strip offset and byte-count lists differ in length"));
    }

    let mut raw = Vec::with_capacity(height * width * bytes_per_sample);
    for (&off, &cnt) in offsets.iter().zip(&counts) {
        raw.extend_from_slice(r.slice(off as usize, cnt as usize, "strip data")?);
    }
    let expected = height * width * bytes_per_sample;
    if raw.len() != expected {
        return Err(Error::format(format!(
            "page holds {} bytes of samples, expected {expected}",
            raw.len()
        )));
    }

    let pixels: Vec<f32> = match bits {
        8 => raw.iter().map(|&b| b as f32 / 255.0).collect(),
        _ => raw
            .chunks_exact(2)
            .map(|c| {
                let v = if r.big_endian {
                    u16::from_be_bytes([c[0], c[1]])
                } else {
                    u16::from_le_bytes([c[0], c[1]])
                };
                v as f32 / 65535.0
            })
            .collect(),
    };

    let name = match find(TAG_PAGE_NAME) {
        Some(e) => {
            let s = r.ascii(e)?;
            if s.is_empty() {
                format!("ch{index}")
            } else {
                s
            }
        }
        None => format!("ch{index}"),
    };

    Ok((Page { height, width, name, pixels }, next))
}

fn required_scalar(r: &Reader, entry: Option<&Entry>, what: &str) -> Result<u32> {
    let e = entry.ok_or_else(|| Error::format(format!("page missing {what}")))?;
    let vals = r.values_u32(e)?;
    vals.first().copied().ok_or_else(|| Error::format(format!("{what} has no value")))
}

fn optional_scalar(r: &Reader, entry: Option<&Entry>) -> Result<Option<u32>> {
    match entry {
        Some(e) => Ok(r.values_u32(e)?.first().copied()),
        None => Ok(None),
    }
}

#[derive(Debug)]
struct Entry {
    tag: u16,
    field_type: u16,
    count: usize,
    /// Raw 4 value bytes: inline payload or offset, per the TIFF rule.
    value: [u8; 4],
}

// TIFF field types used here.
const TYPE_BYTE: u16 = 1;
const TYPE_ASCII: u16 = 2;
const TYPE_SHORT: u16 = 3;
const TYPE_LONG: u16 = 4;

fn type_size(field_type: u16) -> Result<usize> {
    match field_type {
        TYPE_BYTE | TYPE_ASCII => Ok(1),
        TYPE_SHORT => Ok(2),
        TYPE_LONG => Ok(4),
        5 => Ok(8), // RATIONAL, tolerated in directories we skip over
        other => Err(Error::unsupported(format!("TIFF field type {other}"))),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    big_endian: bool,
}

impl<'a> Reader<'a> {
    fn slice(&self, at: usize, len: usize, what: &str) -> Result<&'a [u8]> {
        if at.checked_add(len).is_none_or(|end| end > self.bytes.len()) {
            return Err(Error::truncated(format!("unexpected end of file reading {what}")));
        }
        Ok(&self.bytes[at..at + len])
    }

    fn u16(&self, at: usize) -> Result<u16> {
        let b = self.slice(at, 2, "u16")?;
        Ok(if self.big_endian {
            u16::from_be_bytes([b[0], b[1]])
        } else {
            u16::from_le_bytes([b[0], b[1]])
        })
    }

    fn u32(&self, at: usize) -> Result<u32> {
        let b = self.slice(at, 4, "u32")?;
        Ok(if self.big_endian {
            u32::from_be_bytes([b[0], b[1], b[2], b[3]])
        } else {
            u32::from_le_bytes([b[0], b[1], b[2], b[3]])
        })
    }

    fn entry(&self, at: usize) -> Result<Entry> {
        let tag = self.u16(at)?;
        let field_type = self.u16(at + 2)?;
        let count = self.u32(at + 4)? as usize;
        let raw = self.slice(at + 8, 4, "entry value")?;
        Ok(Entry { tag, field_type, count, value: [raw[0], raw[1], raw[2], raw[3]] })
    }

    /// Integer values of an entry, resolving the inline-vs-offset rule:
    /// payloads of four bytes or fewer live inside the entry itself.
    fn values_u32(&self, e: &Entry) -> Result<Vec<u32>> {
        let size = type_size(e.field_type)?;
        let total = size * e.count;
        let inline;
        let bytes: &[u8] = if total <= 4 {
            inline = e.value;
            &inline[..total]
        } else {
            let off = if self.big_endian {
                u32::from_be_bytes(e.value)
            } else {
                u32::from_le_bytes(e.value)
            };
            self.slice(off as usize, total, "entry values")?
        };
        let mut out = Vec::with_capacity(e.count);
        for i in 0..e.count {
            let v = match e.field_type {
                TYPE_BYTE => bytes[i] as u32,
                TYPE_SHORT => {
                    let b = [bytes[i * 2], bytes[i * 2 + 1]];
                    if self.big_endian { u16::from_be_bytes(b) as u32 } else { u16::from_le_bytes(b) as u32 }
                }
                TYPE_LONG => {
                    let b = [bytes[i * 4], bytes[i * 4 + 1], bytes[i * 4 + 2], bytes[i * 4 + 3]];
                    if self.big_endian { u32::from_be_bytes(b) } else { u32::from_le_bytes(b) }
                }
                other => {
                    return Err(Error::format(format!(
                        "tag {} has field type {other}, expected an integer type",
                        e.tag
                    )))
                }
            };
            out.push(v);
        }
        Ok(out)
    }

    fn ascii(&self, e: &Entry) -> Result<String> {
        if e.field_type != TYPE_ASCII {
            return Err(Error::format(format!("tag {} is not ASCII", e.tag)));
        }
        let inline;
        let bytes: &[u8] = if e.count <= 4 {
            inline = e.value;
            &inline[..e.count]
        } else {
            let off = if self.big_endian {
                u32::from_be_bytes(e.value)
            } else {
                u32::from_le_bytes(e.value)
            };
            self.slice(off as usize, e.count, "ascii value")?
        };
        let end = bytes.iter().position(|&b| b == 0).unwrap_or(bytes.len());
        std::str::from_utf8(&bytes[..end])
            .map(|s| s.to_string())
            .map_err(|_| Error::format(format!("tag {} holds invalid UTF-8", e.tag)))
    }
}
