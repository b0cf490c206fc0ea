//! Firmware image: raw byte segments plus a structured-text manifest carrying
//! the entry point, interrupt vectors, IPE bounds and symbol table.
//!
//! The manifest is deliberately plain text so bit-exactness checks diff
//! cleanly. Serialization is deterministic: segments ordered by base address,
//! symbols and vectors by name. An image with IPE bounds is padded so the
//! whole protected range is segment-backed.

use crate::machine::MachineState;
use crate::mem::{IpeConfig, MemFault, Memory, VEC_RESET, VEC_TIMER};
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

const MANIFEST_MAGIC: &str = "ipesim-firmware v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirmwareImage {
    /// Non-overlapping (base, payload) runs sorted by base.
    pub segments: Vec<(u32, Vec<u8>)>,
    /// Protected-region bounds (start inclusive, end exclusive).
    pub ipe: Option<(u32, u32)>,
    pub symbols: BTreeMap<String, u32>,
    pub entry: u32,
    pub vectors: BTreeMap<String, u32>,
}

#[derive(Debug)]
pub enum ImageError {
    Overlap(u32),
    UnknownVector(String),
    Io(std::io::Error),
    Parse(String),
    Fault(MemFault),
    Ipe(crate::mem::IpeConfigError),
}

impl fmt::Display for ImageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageError::Overlap(a) => write!(f, "overlapping segments at 0x{:05X}", a),
            ImageError::UnknownVector(n) => write!(f, "unknown vector `{}`", n),
            ImageError::Io(e) => write!(f, "io: {}", e),
            ImageError::Parse(m) => write!(f, "manifest: {}", m),
            ImageError::Fault(e) => write!(f, "{}", e),
            ImageError::Ipe(e) => write!(f, "{}", e),
        }
    }
}

impl std::error::Error for ImageError {}

impl From<std::io::Error> for ImageError {
    fn from(e: std::io::Error) -> Self {
        ImageError::Io(e)
    }
}

impl From<MemFault> for ImageError {
    fn from(e: MemFault) -> Self {
        ImageError::Fault(e)
    }
}

fn vector_addr(name: &str) -> Option<u32> {
    match name {
        "timer" => Some(VEC_TIMER),
        "reset" => Some(VEC_RESET),
        _ => None,
    }
}

impl FirmwareImage {
    /// Build from assembler chunks: merge into maximal segments, reject
    /// overlaps (reporting the offending source line), pad the IPE range.
    pub fn from_chunks(
        mut chunks: Vec<(usize, u32, Vec<u8>)>,
        entry: u32,
        ipe: Option<(u32, u32)>,
        symbols: BTreeMap<String, u32>,
        vectors: BTreeMap<String, u32>,
    ) -> Result<Self, (usize, String)> {
        chunks.sort_by_key(|(_, base, _)| *base);
        let mut map: BTreeMap<u32, (usize, u8)> = BTreeMap::new();
        for (line, base, bytes) in &chunks {
            for (i, b) in bytes.iter().enumerate() {
                let a = base + i as u32;
                if let Some((prev, _)) = map.get(&a) {
                    return Err((
                        *line,
                        format!(
                            "overlapping segments at 0x{:05X} (also written at line {})",
                            a, prev
                        ),
                    ));
                }
                map.insert(a, (*line, *b));
            }
        }
        if let Some((s, e)) = ipe {
            for a in s..e {
                map.entry(a).or_insert((0, 0));
            }
        }
        let mut segments: Vec<(u32, Vec<u8>)> = Vec::new();
        for (a, (_, b)) in map {
            match segments.last_mut() {
                Some((base, bytes)) if *base + bytes.len() as u32 == a => bytes.push(b),
                _ => segments.push((a, vec![b])),
            }
        }
        Ok(FirmwareImage {
            segments,
            ipe,
            symbols,
            entry,
            vectors,
        })
    }

    pub fn ipe_config(&self) -> Result<Option<IpeConfig>, ImageError> {
        match self.ipe {
            Some((s, e)) => Ok(Some(IpeConfig::new(s, e).map_err(ImageError::Ipe)?)),
            None => Ok(None),
        }
    }

    /// Bytes of the image inside `lo..hi`, zero-filled where unbacked.
    pub fn bytes_in_range(&self, lo: u32, hi: u32) -> Vec<u8> {
        let mut out = vec![0u8; (hi - lo) as usize];
        for (base, bytes) in &self.segments {
            for (i, b) in bytes.iter().enumerate() {
                let a = base + i as u32;
                if a >= lo && a < hi {
                    out[(a - lo) as usize] = *b;
                }
            }
        }
        out
    }

    /// Write segment payloads and vectors into a memory, without touching
    /// CPU state.
    pub fn write_to(&self, mem: &mut Memory) -> Result<(), ImageError> {
        for (base, bytes) in &self.segments {
            for (i, b) in bytes.iter().enumerate() {
                mem.raw_write_byte(base + i as u32, *b)?;
            }
        }
        for (name, target) in &self.vectors {
            let at = vector_addr(name).ok_or_else(|| ImageError::UnknownVector(name.clone()))?;
            mem.raw_write_word(at, *target as u16)?;
        }
        mem.ipe = self.ipe_config()?;
        Ok(())
    }

    /// Initialize a machine from the image: memory, IPE bounds, PC at the
    /// entry point and SP at the given top of SRAM.
    pub fn load(&self, state: &mut MachineState, sp_init: u32) -> Result<(), ImageError> {
        self.write_to(&mut state.mem)?;
        state.set_pc(self.entry);
        state.regs[crate::isa::SP.index()] = sp_init & 0xFFFE;
        Ok(())
    }

    /// Deterministic manifest text. Segment payloads are referenced by file
    /// name (`<stem>.seg<N>.bin`).
    pub fn manifest_text(&self, stem: &str) -> String {
        let mut s = String::new();
        s.push_str(MANIFEST_MAGIC);
        s.push('\n');
        s.push_str(&format!("entry 0x{:04X}\n", self.entry));
        if let Some((lo, hi)) = self.ipe {
            s.push_str(&format!("ipe 0x{:04X} 0x{:04X}\n", lo, hi));
        }
        for (name, target) in &self.vectors {
            s.push_str(&format!("vector {} 0x{:04X}\n", name, target));
        }
        for (i, (base, bytes)) in self.segments.iter().enumerate() {
            s.push_str(&format!(
                "segment 0x{:04X} {} {}.seg{}.bin\n",
                base,
                bytes.len(),
                stem,
                i
            ));
        }
        for (name, addr) in &self.symbols {
            s.push_str(&format!("symbol {} 0x{:04X}\n", name, addr));
        }
        s
    }

    /// Write the manifest and segment files. `path` is the manifest path;
    /// segment files land next to it.
    pub fn save(&self, path: &Path) -> Result<(), ImageError> {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("firmware")
            .to_string();
        fs::write(path, self.manifest_text(&stem))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for (i, (_, bytes)) in self.segments.iter().enumerate() {
            fs::write(dir.join(format!("{}.seg{}.bin", stem, i)), bytes)?;
        }
        Ok(())
    }

    pub fn load_manifest(path: &Path) -> Result<Self, ImageError> {
        let text = fs::read_to_string(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::parse_manifest(&text, dir)
    }

    fn parse_manifest(text: &str, dir: &Path) -> Result<Self, ImageError> {
        let mut lines = text.lines();
        if lines.next() != Some(MANIFEST_MAGIC) {
            return Err(ImageError::Parse("bad magic".into()));
        }
        let mut entry = None;
        let mut ipe = None;
        let mut vectors = BTreeMap::new();
        let mut symbols = BTreeMap::new();
        let mut segments = Vec::new();
        let num = |s: &str| -> Result<u32, ImageError> {
            let h = s
                .strip_prefix("0x")
                .ok_or_else(|| ImageError::Parse(format!("bad number `{}`", s)))?;
            u32::from_str_radix(h, 16).map_err(|e| ImageError::Parse(e.to_string()))
        };
        for line in lines {
            let mut f = line.split_whitespace();
            match f.next() {
                None => continue,
                Some("entry") => {
                    entry = Some(num(f
                        .next()
                        .ok_or_else(|| ImageError::Parse("entry needs an address".into()))?)?)
                }
                Some("ipe") => {
                    let lo = num(f.next().ok_or_else(|| ImageError::Parse("ipe lo".into()))?)?;
                    let hi = num(f.next().ok_or_else(|| ImageError::Parse("ipe hi".into()))?)?;
                    ipe = Some((lo, hi));
                }
                Some("vector") => {
                    let name = f
                        .next()
                        .ok_or_else(|| ImageError::Parse("vector name".into()))?;
                    let target = num(f
                        .next()
                        .ok_or_else(|| ImageError::Parse("vector addr".into()))?)?;
                    vectors.insert(name.to_string(), target);
                }
                Some("segment") => {
                    let base = num(f
                        .next()
                        .ok_or_else(|| ImageError::Parse("segment base".into()))?)?;
                    let len: usize = f
                        .next()
                        .ok_or_else(|| ImageError::Parse("segment len".into()))?
                        .parse()
                        .map_err(|_| ImageError::Parse("segment len".into()))?;
                    let file = f
                        .next()
                        .ok_or_else(|| ImageError::Parse("segment file".into()))?;
                    let bytes = fs::read(dir.join(file))?;
                    if bytes.len() != len {
                        return Err(ImageError::Parse(format!(
                            "segment {} length mismatch",
                            file
                        )));
                    }
                    segments.push((base, bytes));
                }
                Some("symbol") => {
                    let name = f
                        .next()
                        .ok_or_else(|| ImageError::Parse("symbol name".into()))?;
                    let addr = num(f
                        .next()
                        .ok_or_else(|| ImageError::Parse("symbol addr".into()))?)?;
                    symbols.insert(name.to_string(), addr);
                }
                Some(other) => {
                    return Err(ImageError::Parse(format!("unknown record `{}`", other)))
                }
            }
        }
        segments.sort_by_key(|(b, _)| *b);
        Ok(FirmwareImage {
            segments,
            ipe,
            symbols,
            entry: entry.ok_or_else(|| ImageError::Parse("missing entry".into()))?,
            vectors,
        })
    }

    /// Short content id over manifest and payload bytes (FNV-1a).
    pub fn id(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |b: u8| {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        };
        for b in self.manifest_text("x").bytes() {
            eat(b);
        }
        format!("{:016x}", h)
    }
}
