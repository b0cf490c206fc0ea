//! Register-dump records and the trace container, with the two persisted
//! encodings: a fixed-layout binary record for the UART channel and a
//! line-oriented text file for analysis tooling.
//!
//! Binary record layout (little-endian): a 2-byte sync marker `A5 5A`, then
//! `timer_count:u32`, `r0..r15` each `u32` (20-bit values zero-extended),
//! and `flags:u16`: 70 payload bytes, 72 on the wire.

use std::fmt::Write as _;

/// Sync marker preceding every UART record.
pub const SYNC: [u8; 2] = [0xA5, 0x5A];
/// Payload length excluding the sync marker.
pub const RECORD_PAYLOAD_BYTES: usize = 4 + 16 * 4 + 2;
/// Full on-wire record length.
pub const RECORD_WIRE_BYTES: usize = RECORD_PAYLOAD_BYTES + 2;

pub mod dump_flags {
    /// A denied read was observed during this iteration.
    pub const READ_VIOLATION: u16 = 1 << 0;
    /// A denied write was observed during this iteration.
    pub const WRITE_VIOLATION: u16 = 1 << 1;
    /// The victim returned before the timer fired; this record terminates
    /// the trace.
    pub const TERMINATED: u16 = 1 << 2;
}

/// One per-interrupt register-file snapshot. `r[0]` (PC) and `r[2]` (SR) are
/// the values recovered from the interrupt stack frame; `r[1]` is the
/// victim's SP with the frame popped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegisterDump {
    pub timer_count: u32,
    pub r: [u32; 16],
    pub flags: u16,
}

impl RegisterDump {
    pub fn pc(&self) -> u32 {
        self.r[0]
    }

    pub fn sp(&self) -> u32 {
        self.r[1]
    }

    pub fn sr(&self) -> u32 {
        self.r[2]
    }

    pub fn terminated(&self) -> bool {
        self.flags & dump_flags::TERMINATED != 0
    }

    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(RECORD_WIRE_BYTES);
        out.extend_from_slice(&SYNC);
        out.extend_from_slice(&self.timer_count.to_le_bytes());
        for v in self.r {
            out.extend_from_slice(&(v & 0xF_FFFF).to_le_bytes());
        }
        out.extend_from_slice(&self.flags.to_le_bytes());
        out
    }

    pub fn from_wire(buf: &[u8]) -> Option<RegisterDump> {
        if buf.len() < RECORD_WIRE_BYTES || buf[..2] != SYNC {
            return None;
        }
        let word = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().unwrap());
        let mut r = [0u32; 16];
        for (k, slot) in r.iter_mut().enumerate() {
            *slot = word(6 + 4 * k);
        }
        Some(RegisterDump {
            timer_count: word(2),
            r,
            flags: u16::from_le_bytes(buf[70..72].try_into().unwrap()),
        })
    }
}

/// Ordered dump collection from a side-channel run: gap-free timer counts
/// starting at 1, optionally closed by a termination record.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceDb {
    pub image_id: String,
    pub dumps: Vec<RegisterDump>,
    pub terminated: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace not gap-free at index {0}")]
    Gap(usize),
    #[error("trace parse: {0}")]
    Parse(String),
}

impl TraceDb {
    pub fn validate(&self) -> Result<(), TraceError> {
        for (i, d) in self.dumps.iter().enumerate() {
            if d.timer_count != i as u32 + 1 {
                return Err(TraceError::Gap(i));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dumps.is_empty()
    }

    /// Text serialization, one record per line mirroring the UART record.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# ipesim trace v1\n");
        let _ = writeln!(s, "# image: {}", self.image_id);
        s.push_str("# timer_count unit: victim execution cycles (ISR and dispatch overhead excluded)\n");
        s.push_str("# columns: timer_count r0..r15 flags\n");
        for d in &self.dumps {
            let _ = write!(s, "{}", d.timer_count);
            for v in d.r {
                let _ = write!(s, " {:05x}", v & 0xF_FFFF);
            }
            let _ = writeln!(s, " {:04x}", d.flags);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<TraceDb, TraceError> {
        let mut db = TraceDb::default();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("# image: ") {
                db.image_id = rest.trim().to_string();
                continue;
            }
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 18 {
                return Err(TraceError::Parse(format!(
                    "expected 18 fields, got {}",
                    fields.len()
                )));
            }
            let timer_count = fields[0]
                .parse::<u32>()
                .map_err(|e| TraceError::Parse(e.to_string()))?;
            let mut r = [0u32; 16];
            for (k, slot) in r.iter_mut().enumerate() {
                *slot = u32::from_str_radix(fields[1 + k], 16)
                    .map_err(|e| TraceError::Parse(e.to_string()))?;
            }
            let flags = u16::from_str_radix(fields[17], 16)
                .map_err(|e| TraceError::Parse(e.to_string()))?;
            let d = RegisterDump {
                timer_count,
                r,
                flags,
            };
            if d.terminated() {
                db.terminated = true;
            }
            db.dumps.push(d);
        }
        db.validate()?;
        Ok(db)
    }

    /// Concatenated wire records, as sent over the UART.
    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.dumps.len() * RECORD_WIRE_BYTES);
        for d in &self.dumps {
            out.extend(d.to_wire());
        }
        out
    }

    pub fn from_wire(buf: &[u8]) -> Result<TraceDb, TraceError> {
        let mut db = TraceDb::default();
        let mut at = 0;
        while at + RECORD_WIRE_BYTES <= buf.len() {
            let d = RegisterDump::from_wire(&buf[at..])
                .ok_or_else(|| TraceError::Parse(format!("bad record at byte {}", at)))?;
            if d.terminated() {
                db.terminated = true;
            }
            db.dumps.push(d);
            at += RECORD_WIRE_BYTES;
        }
        if at != buf.len() {
            return Err(TraceError::Parse("trailing bytes".into()));
        }
        db.validate()?;
        Ok(db)
    }
}
