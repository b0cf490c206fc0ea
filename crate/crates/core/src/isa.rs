//! MSP430 instruction forms: registers, addressing modes, sizes, cycles and
//! word encodings.
//!
//! The supported subset is the 27 core instructions plus the address
//! instructions `MOVA`, `ADDA`, `SUBA`, `CMPA`, `CALLA` and `RETA`. Sizes and
//! cycle counts are a function of the operand configuration alone, never of
//! which operation within a format; the emulator and the trace analyzer both
//! read this one table.

use std::fmt;

/// Register id, 0..=15. R0=PC, R1=SP, R2=SR/CG1, R3=CG2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Reg(pub u8);

pub const PC: Reg = Reg(0);
pub const SP: Reg = Reg(1);
pub const SR: Reg = Reg(2);
pub const CG2: Reg = Reg(3);

impl Reg {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => write!(f, "PC"),
            1 => write!(f, "SP"),
            2 => write!(f, "SR"),
            n => write!(f, "R{}", n),
        }
    }
}

/// Status register bit positions.
pub mod sr_bits {
    pub const C: u32 = 0x0001;
    pub const Z: u32 = 0x0002;
    pub const N: u32 = 0x0004;
    pub const GIE: u32 = 0x0008;
    pub const CPUOFF: u32 = 0x0010;
    pub const V: u32 = 0x0100;
    /// Mask of the arithmetic flags.
    pub const FLAGS: u32 = C | Z | N | V;
}

/// Operand width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Width {
    Byte,
    Word,
    /// 20-bit address width used by the MOVA/ADDA/SUBA/CMPA family.
    Addr,
}

impl Width {
    pub fn mask(self) -> u32 {
        match self {
            Width::Byte => 0xFF,
            Width::Word => 0xFFFF,
            Width::Addr => 0xF_FFFF,
        }
    }

    pub fn sign_bit(self) -> u32 {
        match self {
            Width::Byte => 0x80,
            Width::Word => 0x8000,
            Width::Addr => 0x8_0000,
        }
    }

    /// Autoincrement step for `@Rn+`.
    pub fn step(self) -> u32 {
        match self {
            Width::Byte => 1,
            Width::Word => 2,
            Width::Addr => 4,
        }
    }
}

/// A resolved operand: addressing mode plus its register / constant payload.
///
/// Constant-generator encodings decode to `Imm { cg: true }`; R2/R3 never
/// surface as ordinary source operands of those modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    /// `Rn` register direct.
    Reg(Reg),
    /// `@Rn` register indirect.
    Indirect(Reg),
    /// `@Rn+` indirect autoincrement.
    IndirectInc(Reg),
    /// `#N`. `cg` marks a constant-generator encoding (no extension word).
    Imm { value: u32, cg: bool },
    /// `x(Rn)` indexed.
    Indexed { reg: Reg, offset: i32 },
    /// `EDE` symbolic (PC-relative encoding, stored resolved).
    Symbolic { addr: u32 },
    /// `&EDE` absolute.
    Absolute { addr: u32 },
}

impl Operand {
    /// Number of extension words this operand consumes in the encoding.
    pub fn ext_words(&self) -> u8 {
        match self {
            Operand::Reg(_) | Operand::Indirect(_) | Operand::IndirectInc(_) => 0,
            Operand::Imm { cg, .. } => {
                if *cg {
                    0
                } else {
                    1
                }
            }
            Operand::Indexed { .. } | Operand::Symbolic { .. } | Operand::Absolute { .. } => 1,
        }
    }

    pub fn is_memory(&self) -> bool {
        matches!(
            self,
            Operand::Indirect(_)
                | Operand::IndirectInc(_)
                | Operand::Indexed { .. }
                | Operand::Symbolic { .. }
                | Operand::Absolute { .. }
        )
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg(r) => write!(f, "{}", r),
            Operand::Indirect(r) => write!(f, "@{}", r),
            Operand::IndirectInc(r) => write!(f, "@{}+", r),
            Operand::Imm { value, .. } => {
                if *value > 9 {
                    write!(f, "#0x{:X}", value)
                } else {
                    write!(f, "#{}", value)
                }
            }
            Operand::Indexed { reg, offset } => {
                if *offset < 0 {
                    write!(f, "-0x{:X}({})", -offset, reg)
                } else {
                    write!(f, "0x{:X}({})", offset, reg)
                }
            }
            Operand::Symbolic { addr } => write!(f, "0x{:04X}", addr),
            Operand::Absolute { addr } => write!(f, "&0x{:04X}", addr),
        }
    }
}

/// Operation identity. Jump conditions are separate variants so a decoded
/// form is self-contained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mnemonic {
    // Double operand (format I).
    Mov,
    Add,
    Addc,
    Subc,
    Sub,
    Cmp,
    Dadd,
    Bit,
    Bic,
    Bis,
    Xor,
    And,
    // Single operand (format II).
    Rrc,
    Swpb,
    Rra,
    Sxt,
    Push,
    Call,
    Reti,
    // Jumps (format III).
    Jnz,
    Jz,
    Jnc,
    Jc,
    Jn,
    Jge,
    Jl,
    Jmp,
    // Address instructions.
    Mova,
    Cmpa,
    Adda,
    Suba,
    Calla,
    Reta,
}

impl Mnemonic {
    pub fn is_two_op(self) -> bool {
        use Mnemonic::*;
        matches!(
            self,
            Mov | Add | Addc | Subc | Sub | Cmp | Dadd | Bit | Bic | Bis | Xor | And
        )
    }

    pub fn is_jump(self) -> bool {
        use Mnemonic::*;
        matches!(self, Jnz | Jz | Jnc | Jc | Jn | Jge | Jl | Jmp)
    }

    pub fn two_op_code(self) -> Option<u16> {
        use Mnemonic::*;
        Some(match self {
            Mov => 0x4,
            Add => 0x5,
            Addc => 0x6,
            Subc => 0x7,
            Sub => 0x8,
            Cmp => 0x9,
            Dadd => 0xA,
            Bit => 0xB,
            Bic => 0xC,
            Bis => 0xD,
            Xor => 0xE,
            And => 0xF,
            _ => return None,
        })
    }

    pub fn from_two_op_code(code: u16) -> Option<Mnemonic> {
        use Mnemonic::*;
        Some(match code {
            0x4 => Mov,
            0x5 => Add,
            0x6 => Addc,
            0x7 => Subc,
            0x8 => Sub,
            0x9 => Cmp,
            0xA => Dadd,
            0xB => Bit,
            0xC => Bic,
            0xD => Bis,
            0xE => Xor,
            0xF => And,
            _ => return None,
        })
    }

    pub fn one_op_code(self) -> Option<u16> {
        use Mnemonic::*;
        Some(match self {
            Rrc => 0,
            Swpb => 1,
            Rra => 2,
            Sxt => 3,
            Push => 4,
            Call => 5,
            _ => return None,
        })
    }

    pub fn jump_cond(self) -> Option<u16> {
        use Mnemonic::*;
        Some(match self {
            Jnz => 0,
            Jz => 1,
            Jnc => 2,
            Jc => 3,
            Jn => 4,
            Jge => 5,
            Jl => 6,
            Jmp => 7,
            _ => return None,
        })
    }

    pub fn from_jump_cond(cond: u16) -> Option<Mnemonic> {
        use Mnemonic::*;
        Some(match cond {
            0 => Jnz,
            1 => Jz,
            2 => Jnc,
            3 => Jc,
            4 => Jn,
            5 => Jge,
            6 => Jl,
            7 => Jmp,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        use Mnemonic::*;
        match self {
            Mov => "MOV",
            Add => "ADD",
            Addc => "ADDC",
            Subc => "SUBC",
            Sub => "SUB",
            Cmp => "CMP",
            Dadd => "DADD",
            Bit => "BIT",
            Bic => "BIC",
            Bis => "BIS",
            Xor => "XOR",
            And => "AND",
            Rrc => "RRC",
            Swpb => "SWPB",
            Rra => "RRA",
            Sxt => "SXT",
            Push => "PUSH",
            Call => "CALL",
            Reti => "RETI",
            Jnz => "JNZ",
            Jz => "JZ",
            Jnc => "JNC",
            Jc => "JC",
            Jn => "JN",
            Jge => "JGE",
            Jl => "JL",
            Jmp => "JMP",
            Mova => "MOVA",
            Cmpa => "CMPA",
            Adda => "ADDA",
            Suba => "SUBA",
            Calla => "CALLA",
            Reta => "RETA",
        }
    }
}

/// One fully decoded instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DecodedForm {
    pub mnemonic: Mnemonic,
    pub width: Width,
    pub src: Option<Operand>,
    pub dst: Option<Operand>,
    /// Absolute branch target for format III jumps.
    pub jump_target: Option<u32>,
    pub size_bytes: u8,
    pub cycles: u32,
}

impl DecodedForm {
    pub fn two_op(mnemonic: Mnemonic, width: Width, src: Operand, dst: Operand) -> Self {
        let size = 2 + 2 * (src.ext_words() + dst.ext_words());
        let cycles = cycle_cost(mnemonic, Some(&src), Some(&dst));
        DecodedForm {
            mnemonic,
            width,
            src: Some(src),
            dst: Some(dst),
            jump_target: None,
            size_bytes: size,
            cycles,
        }
    }

    pub fn one_op(mnemonic: Mnemonic, width: Width, operand: Operand) -> Self {
        let size = 2 + 2 * operand.ext_words();
        let cycles = cycle_cost(mnemonic, Some(&operand), None);
        DecodedForm {
            mnemonic,
            width,
            src: Some(operand),
            dst: None,
            jump_target: None,
            size_bytes: size,
            cycles,
        }
    }

    pub fn jump(mnemonic: Mnemonic, target: u32) -> Self {
        DecodedForm {
            mnemonic,
            width: Width::Word,
            src: None,
            dst: None,
            jump_target: Some(target),
            size_bytes: 2,
            cycles: cycle_cost(mnemonic, None, None),
        }
    }

    pub fn reti() -> Self {
        DecodedForm {
            mnemonic: Mnemonic::Reti,
            width: Width::Word,
            src: None,
            dst: None,
            jump_target: None,
            size_bytes: 2,
            cycles: cycle_cost(Mnemonic::Reti, None, None),
        }
    }

    pub fn reta() -> Self {
        DecodedForm {
            mnemonic: Mnemonic::Reta,
            width: Width::Addr,
            src: None,
            dst: None,
            jump_target: None,
            size_bytes: 2,
            cycles: cycle_cost(Mnemonic::Reta, None, None),
        }
    }

    pub fn addr_op(mnemonic: Mnemonic, src: Operand, dst: Operand) -> Self {
        let size = 2 + 2 * (src.ext_words() + dst.ext_words());
        let cycles = cycle_cost(mnemonic, Some(&src), Some(&dst));
        DecodedForm {
            mnemonic,
            width: Width::Addr,
            src: Some(src),
            dst: Some(dst),
            jump_target: None,
            size_bytes: size,
            cycles,
        }
    }

    pub fn calla(operand: Operand) -> Self {
        let size = 2 + 2 * operand.ext_words();
        let cycles = cycle_cost(Mnemonic::Calla, Some(&operand), None);
        DecodedForm {
            mnemonic: Mnemonic::Calla,
            width: Width::Addr,
            src: Some(operand),
            dst: None,
            jump_target: None,
            size_bytes: size,
            cycles,
        }
    }

    pub fn is_pc_dest(&self) -> bool {
        matches!(self.dst, Some(Operand::Reg(r)) if r == PC)
    }
}

fn src_fetch_cycles(op: &Operand) -> u32 {
    match op {
        Operand::Reg(_) => 0,
        Operand::Imm { cg: true, .. } => 0,
        Operand::Indirect(_) | Operand::IndirectInc(_) | Operand::Imm { cg: false, .. } => 1,
        Operand::Indexed { .. } | Operand::Symbolic { .. } | Operand::Absolute { .. } => 2,
    }
}

/// Cycle cost of an instruction form.
///
/// Format I: reg->reg 1; @Rn/@Rn+/#N -> Rm 2; x(Rn)/EDE/&EDE -> Rm 3;
/// Rn -> x(Rm) 4; memory source -> memory destination 5-6; +1 when the
/// destination is the PC. Format II and the address instructions are charged
/// structurally from the same operand costs. All jumps take 2 cycles whether
/// taken or not; RETI takes 5.
pub fn cycle_cost(mnemonic: Mnemonic, src: Option<&Operand>, dst: Option<&Operand>) -> u32 {
    use Mnemonic::*;
    if mnemonic.is_jump() {
        return 2;
    }
    match mnemonic {
        Reti => 5,
        Reta => 3,
        Push => 1 + src.map_or(0, src_fetch_cycles) + 2,
        Call => 1 + src.map_or(0, src_fetch_cycles) + 3,
        Calla => 1 + src.map_or(0, src_fetch_cycles) + 3,
        Rrc | Swpb | Rra | Sxt => {
            let op = src.expect("one-op form has an operand");
            1 + src_fetch_cycles(op) + if op.is_memory() { 1 } else { 0 }
        }
        Mova | Cmpa | Adda | Suba => {
            let s = 1 + src.map_or(0, src_fetch_cycles);
            let d = match dst {
                Some(Operand::Reg(_)) | None => 0,
                Some(_) => 2,
            };
            s + d
        }
        _ => {
            // Format I.
            let s = src.expect("two-op form has a source");
            let d = dst.expect("two-op form has a destination");
            let dst_extra = match d {
                Operand::Reg(_) => 0,
                _ => 3,
            };
            let pc_pen = if matches!(d, Operand::Reg(r) if *r == PC) {
                1
            } else {
                0
            };
            1 + src_fetch_cycles(s) + dst_extra + pc_pen
        }
    }
}

/// Constant-generator lookup: returns (register, As) for an immediate value
/// that has a generator encoding.
pub fn cg_encoding(value: u32) -> Option<(Reg, u16)> {
    match value & 0xFFFF {
        0 => Some((CG2, 0)),
        1 => Some((CG2, 1)),
        2 => Some((CG2, 2)),
        4 => Some((SR, 2)),
        8 => Some((SR, 3)),
        0xFFFF => Some((CG2, 3)),
        _ => None,
    }
}

/// Value produced by a constant-generator (reg, As) pair, if it is one.
pub fn cg_value(reg: Reg, a_s: u16) -> Option<u32> {
    match (reg, a_s) {
        (r, 0) if r == CG2 => Some(0),
        (r, 1) if r == CG2 => Some(1),
        (r, 2) if r == CG2 => Some(2),
        (r, 3) if r == CG2 => Some(0xFFFF),
        (r, 2) if r == SR => Some(4),
        (r, 3) if r == SR => Some(8),
        _ => None,
    }
}

/// Encoding error for forms that cannot be expressed in machine words.
#[derive(Debug, thiserror::Error)]
pub enum EncodeError {
    #[error("jump offset {0} out of range")]
    JumpOffset(i32),
    #[error("operand not encodable for {0}: {1}")]
    Operand(&'static str, String),
    #[error("immediate 0x{0:X} exceeds 20 bits")]
    ImmRange(u32),
}

fn src_bits(op: &Operand, at: u32, ext: &mut Vec<u16>) -> Result<(u16, u16), EncodeError> {
    // Returns (reg field, As). `at` is the address where this operand's
    // extension word will sit.
    Ok(match op {
        Operand::Reg(r) => (r.0 as u16, 0),
        Operand::Indirect(r) => (r.0 as u16, 2),
        Operand::IndirectInc(r) => (r.0 as u16, 3),
        Operand::Imm { value, cg } => {
            if *cg {
                let (r, a_s) = cg_encoding(*value)
                    .ok_or_else(|| EncodeError::Operand("imm", format!("#{}", value)))?;
                (r.0 as u16, a_s)
            } else {
                ext.push((*value & 0xFFFF) as u16);
                (PC.0 as u16, 3)
            }
        }
        Operand::Indexed { reg, offset } => {
            ext.push((*offset as i64 as u64 & 0xFFFF) as u16);
            (reg.0 as u16, 1)
        }
        Operand::Symbolic { addr } => {
            let x = addr.wrapping_sub(at) & 0xFFFF;
            ext.push(x as u16);
            (PC.0 as u16, 1)
        }
        Operand::Absolute { addr } => {
            ext.push((*addr & 0xFFFF) as u16);
            (SR.0 as u16, 1)
        }
    })
}

fn dst_bits(op: &Operand, at: u32, ext: &mut Vec<u16>) -> Result<(u16, u16), EncodeError> {
    Ok(match op {
        Operand::Reg(r) => (r.0 as u16, 0),
        Operand::Indexed { reg, offset } => {
            ext.push((*offset as i64 as u64 & 0xFFFF) as u16);
            (reg.0 as u16, 1)
        }
        Operand::Symbolic { addr } => {
            let x = addr.wrapping_sub(at) & 0xFFFF;
            ext.push(x as u16);
            (PC.0 as u16, 1)
        }
        Operand::Absolute { addr } => {
            ext.push((*addr & 0xFFFF) as u16);
            (SR.0 as u16, 1)
        }
        other => return Err(EncodeError::Operand("dst", format!("{}", other))),
    })
}

/// Encode a decoded form back to machine words. `addr` is the instruction's
/// address (needed for PC-relative operands and jump offsets).
pub fn encode(form: &DecodedForm, addr: u32) -> Result<Vec<u16>, EncodeError> {
    use Mnemonic::*;
    let byte_bit = match form.width {
        Width::Byte => 1u16 << 6,
        _ => 0,
    };
    if form.mnemonic.is_two_op() {
        let src = form.src.as_ref().expect("two-op src");
        let dst = form.dst.as_ref().expect("two-op dst");
        let mut ext = Vec::new();
        let src_ext_at = addr + 2;
        let (sreg, a_s) = src_bits(src, src_ext_at, &mut ext)?;
        let dst_ext_at = addr + 2 + 2 * ext.len() as u32;
        let (dreg, a_d) = dst_bits(dst, dst_ext_at, &mut ext)?;
        let op = form.mnemonic.two_op_code().unwrap();
        let mut words = vec![op << 12 | sreg << 8 | a_d << 7 | byte_bit | a_s << 4 | dreg];
        words.extend(ext);
        return Ok(words);
    }
    if let Some(code) = form.mnemonic.one_op_code() {
        let opnd = form.src.as_ref().expect("one-op operand");
        let mut ext = Vec::new();
        let (reg, a_s) = src_bits(opnd, addr + 2, &mut ext)?;
        let mut words = vec![0x1000 | code << 7 | byte_bit | a_s << 4 | reg];
        words.extend(ext);
        return Ok(words);
    }
    if form.mnemonic.is_jump() {
        let target = form.jump_target.expect("jump target");
        let delta = target as i64 - (addr as i64 + 2);
        let off = delta / 2;
        if delta % 2 != 0 || !(-512..=511).contains(&off) {
            return Err(EncodeError::JumpOffset(delta as i32));
        }
        let cond = form.mnemonic.jump_cond().unwrap();
        return Ok(vec![0x2000 | cond << 10 | (off as u16 & 0x3FF)]);
    }
    match form.mnemonic {
        Reti => Ok(vec![0x1300]),
        Reta => Ok(vec![0x0110]),
        Calla => {
            let opnd = form.src.as_ref().expect("calla operand");
            Ok(match opnd {
                Operand::Reg(r) => vec![0x1340 | r.0 as u16],
                Operand::Indexed { reg, offset } => {
                    vec![0x1350 | reg.0 as u16, (*offset as i64 as u64 & 0xFFFF) as u16]
                }
                Operand::Indirect(r) => vec![0x1360 | r.0 as u16],
                Operand::IndirectInc(r) => vec![0x1370 | r.0 as u16],
                Operand::Imm { value, .. } => {
                    if *value > 0xF_FFFF {
                        return Err(EncodeError::ImmRange(*value));
                    }
                    vec![0x13B0 | (value >> 16) as u16, (*value & 0xFFFF) as u16]
                }
                other => {
                    return Err(EncodeError::Operand("CALLA", format!("{}", other)));
                }
            })
        }
        Mova | Cmpa | Adda | Suba => {
            let src = form.src.as_ref().expect("addr-op src");
            let dst = form.dst.as_ref().expect("addr-op dst");
            let reg_nibble = |m: Mnemonic| match m {
                Mova => 0xCu16,
                Cmpa => 0xD,
                Adda => 0xE,
                Suba => 0xF,
                _ => unreachable!(),
            };
            let imm_nibble = |m: Mnemonic| match m {
                Mova => 0x8u16,
                Cmpa => 0x9,
                Adda => 0xA,
                Suba => 0xB,
                _ => unreachable!(),
            };
            match (src, dst) {
                (Operand::Reg(s), Operand::Reg(d)) => {
                    Ok(vec![(s.0 as u16) << 8 | reg_nibble(form.mnemonic) << 4 | d.0 as u16])
                }
                (Operand::Imm { value, .. }, Operand::Reg(d)) => {
                    if *value > 0xF_FFFF {
                        return Err(EncodeError::ImmRange(*value));
                    }
                    Ok(vec![
                        ((value >> 16) as u16) << 8 | imm_nibble(form.mnemonic) << 4 | d.0 as u16,
                        (value & 0xFFFF) as u16,
                    ])
                }
                (Operand::Indirect(s), Operand::Reg(d)) if form.mnemonic == Mova => {
                    Ok(vec![(s.0 as u16) << 8 | d.0 as u16])
                }
                (Operand::IndirectInc(s), Operand::Reg(d)) if form.mnemonic == Mova => {
                    Ok(vec![(s.0 as u16) << 8 | 1 << 4 | d.0 as u16])
                }
                (Operand::Indexed { reg, offset }, Operand::Reg(d)) if form.mnemonic == Mova => {
                    Ok(vec![
                        (reg.0 as u16) << 8 | 3 << 4 | d.0 as u16,
                        (*offset as i64 as u64 & 0xFFFF) as u16,
                    ])
                }
                (Operand::Reg(s), Operand::Indexed { reg, offset }) if form.mnemonic == Mova => {
                    Ok(vec![
                        (s.0 as u16) << 8 | 7 << 4 | reg.0 as u16,
                        (*offset as i64 as u64 & 0xFFFF) as u16,
                    ])
                }
                _ => Err(EncodeError::Operand(
                    form.mnemonic.name(),
                    format!("{} -> {}", src, dst),
                )),
            }
        }
        _ => unreachable!("all mnemonics covered"),
    }
}

/// Emulated-alias rendering. The decoder produces canonical forms; this
/// prints the familiar assembler alias where one exists.
pub fn display_form(form: &DecodedForm) -> String {
    use Mnemonic::*;
    let suffix = match form.width {
        Width::Byte => ".B",
        _ => "",
    };
    // Alias table for constant-generator and register idioms.
    if let (m, Some(src), Some(dst)) = (form.mnemonic, form.src, form.dst) {
        if let Operand::Imm { value, cg: true } = src {
            match (m, value) {
                (Mov, 0) => {
                    if dst == Operand::Reg(CG2) {
                        return "NOP".to_string();
                    }
                    return format!("CLR{} {}", suffix, dst);
                }
                (Sub, 1) => return format!("DEC{} {}", suffix, dst),
                (Sub, 2) => return format!("DECD{} {}", suffix, dst),
                (Add, 1) => return format!("INC{} {}", suffix, dst),
                (Add, 2) => return format!("INCD{} {}", suffix, dst),
                (Cmp, 0) => return format!("TST{} {}", suffix, dst),
                (Xor, 0xFFFF) => return format!("INV{} {}", suffix, dst),
                (Bic, 8) if dst == Operand::Reg(SR) => return "DINT".to_string(),
                (Bis, 8) if dst == Operand::Reg(SR) => return "EINT".to_string(),
                _ => {}
            }
        }
        if m == Mov && dst == Operand::Reg(PC) {
            if src == Operand::IndirectInc(SP) {
                return "RET".to_string();
            }
            return format!("BR {}", src);
        }
        if m == Mov && src == Operand::IndirectInc(SP) {
            return format!("POP{} {}", suffix, dst);
        }
    }
    match (form.src, form.dst) {
        (Some(s), Some(d)) => format!("{}{} {}, {}", form.mnemonic.name(), suffix, s, d),
        (Some(s), None) => format!("{}{} {}", form.mnemonic.name(), suffix, s),
        _ => {
            if let Some(t) = form.jump_target {
                format!("{} 0x{:04X}", form.mnemonic.name(), t)
            } else {
                form.mnemonic.name().to_string()
            }
        }
    }
}
