//! Address space plus the MPU's IPE enforcement.
//!
//! The MPU checks the origin of every data access: an access that targets the
//! IPE region is granted only when the accessing program counter itself lies
//! inside the region. Denied reads see the bus driven with `0x3FFF`; denied
//! writes are dropped and flagged. Execution entry is never gated, which is
//! the modeled vulnerability: any code may jump to any instruction inside the
//! IPE region.

use thiserror::Error;

/// Word driven onto the data bus for a denied read.
pub const BUS_DENIED_WORD: u16 = 0x3FFF;
/// Low byte of the bus-denial word, returned for denied byte reads.
pub const BUS_DENIED_BYTE: u8 = 0xFF;

/// IPE bounds granularity.
pub const IPE_ALIGN: u32 = 0x400;

pub const SRAM_START: u32 = 0x1C00;
pub const SRAM_END: u32 = 0x2C00;
pub const FRAM_START: u32 = 0x4000;
pub const FRAM_END: u32 = 0x1_0000;

/// Interrupt vector locations (word entries at the top of FRAM).
pub const VEC_TIMER: u32 = 0xFFF0;
pub const VEC_RESET: u32 = 0xFFFE;

#[derive(Debug, Error)]
pub enum MemFault {
    #[error("access to unmapped address 0x{0:05X}")]
    Unmapped(u32),
}

/// Protected-region boundaries and violation policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IpeConfig {
    /// Inclusive start, 1 KB aligned.
    pub start: u32,
    /// Exclusive end, 1 KB aligned.
    pub end: u32,
    pub enabled: bool,
}

#[derive(Debug, Error)]
pub enum IpeConfigError {
    #[error("IPE bounds 0x{0:05X}..0x{1:05X} not ordered")]
    Unordered(u32, u32),
    #[error("IPE bound 0x{0:05X} not aligned to 0x{1:X}")]
    Unaligned(u32, u32),
    #[error("IPE region 0x{0:05X}..0x{1:05X} outside nonvolatile memory")]
    NotNonvolatile(u32, u32),
}

impl IpeConfig {
    pub fn new(start: u32, end: u32) -> Result<Self, IpeConfigError> {
        if start >= end {
            return Err(IpeConfigError::Unordered(start, end));
        }
        if !start.is_multiple_of(IPE_ALIGN) {
            return Err(IpeConfigError::Unaligned(start, IPE_ALIGN));
        }
        if !end.is_multiple_of(IPE_ALIGN) {
            return Err(IpeConfigError::Unaligned(end, IPE_ALIGN));
        }
        if start < FRAM_START || end > FRAM_END {
            return Err(IpeConfigError::NotNonvolatile(start, end));
        }
        Ok(IpeConfig {
            start,
            end,
            enabled: true,
        })
    }

    pub fn contains(&self, addr: u32) -> bool {
        addr >= self.start && addr < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
    Execute,
}

/// One gating decision, as observable on the address bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessRecord {
    pub addr: u32,
    pub accessor_pc: u32,
    pub kind: AccessKind,
    pub granted: bool,
}

/// Pure gating function: granted iff the MPU is off, the target is outside
/// the region, or the accessor executes from inside it.
pub fn mpu_grants(ipe: Option<&IpeConfig>, addr: u32, accessor_pc: u32) -> bool {
    match ipe {
        Some(cfg) if cfg.enabled => !cfg.contains(addr) || cfg.contains(accessor_pc),
        _ => true,
    }
}

/// Simulated address space with MPU gating and violation accounting.
#[derive(Debug, Clone)]
pub struct Memory {
    bytes: Vec<u8>,
    pub ipe: Option<IpeConfig>,
    /// Violations observed since the last `clear_violations`.
    pub read_denied: u32,
    pub write_denied: u32,
    log: Option<Vec<AccessRecord>>,
}

impl Default for Memory {
    fn default() -> Self {
        Self::new()
    }
}

impl Memory {
    pub fn new() -> Self {
        Memory {
            bytes: vec![0; 0x1_0000],
            ipe: None,
            read_denied: 0,
            write_denied: 0,
            log: None,
        }
    }

    pub fn is_mapped(&self, addr: u32) -> bool {
        (SRAM_START..SRAM_END).contains(&addr) || (FRAM_START..FRAM_END).contains(&addr)
    }

    /// Enable per-access logging. Intended for tests and small runs.
    pub fn enable_log(&mut self) {
        self.log = Some(Vec::new());
    }

    pub fn take_log(&mut self) -> Vec<AccessRecord> {
        self.log.take().unwrap_or_default()
    }

    pub fn clear_violations(&mut self) {
        self.read_denied = 0;
        self.write_denied = 0;
    }

    fn record(&mut self, rec: AccessRecord) {
        if let Some(log) = &mut self.log {
            log.push(rec);
        }
    }

    /// Raw byte read with no MPU involvement. Used for instruction fetch
    /// (always performed with the fetching PC as accessor) and by loaders.
    pub fn raw_read_byte(&self, addr: u32) -> Result<u8, MemFault> {
        if !self.is_mapped(addr) {
            return Err(MemFault::Unmapped(addr));
        }
        Ok(self.bytes[addr as usize])
    }

    pub fn raw_read_word(&self, addr: u32) -> Result<u16, MemFault> {
        let a = addr & !1;
        let lo = self.raw_read_byte(a)? as u16;
        let hi = self.raw_read_byte(a + 1)? as u16;
        Ok(hi << 8 | lo)
    }

    pub fn raw_write_byte(&mut self, addr: u32, value: u8) -> Result<(), MemFault> {
        if !self.is_mapped(addr) {
            return Err(MemFault::Unmapped(addr));
        }
        self.bytes[addr as usize] = value;
        Ok(())
    }

    pub fn raw_write_word(&mut self, addr: u32, value: u16) -> Result<(), MemFault> {
        let a = addr & !1;
        self.raw_write_byte(a, (value & 0xFF) as u8)?;
        self.raw_write_byte(a + 1, (value >> 8) as u8)
    }

    /// MPU-gated byte read.
    pub fn read_byte(&mut self, addr: u32, accessor_pc: u32) -> Result<u8, MemFault> {
        let granted = mpu_grants(self.ipe.as_ref(), addr, accessor_pc);
        let v = if granted {
            self.raw_read_byte(addr)?
        } else {
            if !self.is_mapped(addr) {
                return Err(MemFault::Unmapped(addr));
            }
            self.read_denied += 1;
            BUS_DENIED_BYTE
        };
        self.record(AccessRecord {
            addr,
            accessor_pc,
            kind: AccessKind::Read,
            granted,
        });
        Ok(v)
    }

    /// MPU-gated word read. A denied read sees `0x3FFF` on the bus.
    pub fn read_word(&mut self, addr: u32, accessor_pc: u32) -> Result<u16, MemFault> {
        let a = addr & !1;
        let granted = mpu_grants(self.ipe.as_ref(), a, accessor_pc);
        let v = if granted {
            self.raw_read_word(a)?
        } else {
            if !self.is_mapped(a) {
                return Err(MemFault::Unmapped(a));
            }
            self.read_denied += 1;
            BUS_DENIED_WORD
        };
        self.record(AccessRecord {
            addr: a,
            accessor_pc,
            kind: AccessKind::Read,
            granted,
        });
        Ok(v)
    }

    /// MPU-gated byte write. Returns whether the store was granted; denied
    /// stores are dropped.
    pub fn write_byte(&mut self, addr: u32, value: u8, accessor_pc: u32) -> Result<bool, MemFault> {
        if !self.is_mapped(addr) {
            return Err(MemFault::Unmapped(addr));
        }
        let granted = mpu_grants(self.ipe.as_ref(), addr, accessor_pc);
        if granted {
            self.bytes[addr as usize] = value;
        } else {
            self.write_denied += 1;
        }
        self.record(AccessRecord {
            addr,
            accessor_pc,
            kind: AccessKind::Write,
            granted,
        });
        Ok(granted)
    }

    pub fn write_word(
        &mut self,
        addr: u32,
        value: u16,
        accessor_pc: u32,
    ) -> Result<bool, MemFault> {
        let a = addr & !1;
        if !self.is_mapped(a) || !self.is_mapped(a + 1) {
            return Err(MemFault::Unmapped(a));
        }
        let granted = mpu_grants(self.ipe.as_ref(), a, accessor_pc);
        if granted {
            self.bytes[a as usize] = (value & 0xFF) as u8;
            self.bytes[a as usize + 1] = (value >> 8) as u8;
        } else {
            self.write_denied += 1;
        }
        self.record(AccessRecord {
            addr: a,
            accessor_pc,
            kind: AccessKind::Write,
            granted,
        });
        Ok(granted)
    }

    /// Execution gate. Entry into the IPE region is always granted; only
    /// unmapped fetches fail.
    pub fn fetch_gate(&self, pc: u32) -> bool {
        self.is_mapped(pc)
    }
}
