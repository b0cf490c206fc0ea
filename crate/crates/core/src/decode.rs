//! Instruction decoder.
//!
//! Decoding performs raw fetches (no MPU gating): it is only used for the
//! simulator's own execution fetch, which always happens with the fetching PC
//! as the accessor. Constant-generator encodings come back as immediate
//! operands; R2/R3 never appear as ordinary operands of the generator modes.

use crate::isa::{cg_value, DecodedForm, Mnemonic, Operand, Reg, Width, PC, SR};
use crate::mem::{MemFault, Memory};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("undefined opcode 0x{word:04X} at 0x{addr:05X}")]
    Undefined { word: u16, addr: u32 },
    #[error(transparent)]
    Fault(#[from] MemFault),
}

struct Cursor<'a> {
    mem: &'a Memory,
    next: u32,
}

impl<'a> Cursor<'a> {
    fn take(&mut self) -> Result<(u16, u32), DecodeError> {
        let at = self.next;
        let w = self.mem.raw_read_word(at)?;
        self.next += 2;
        Ok((w, at))
    }
}

fn src_operand(
    reg: Reg,
    a_s: u16,
    cursor: &mut Cursor<'_>,
) -> Result<Operand, DecodeError> {
    if let Some(value) = cg_value(reg, a_s) {
        return Ok(Operand::Imm { value, cg: true });
    }
    Ok(match a_s {
        0 => Operand::Reg(reg),
        1 => {
            let (x, at) = cursor.take()?;
            if reg == PC {
                Operand::Symbolic {
                    addr: (x as u32).wrapping_add(at) & 0xFFFF,
                }
            } else if reg == SR {
                Operand::Absolute { addr: x as u32 }
            } else {
                Operand::Indexed {
                    reg,
                    offset: x as i16 as i32,
                }
            }
        }
        2 => Operand::Indirect(reg),
        3 => {
            if reg == PC {
                let (x, _) = cursor.take()?;
                Operand::Imm {
                    value: x as u32,
                    cg: false,
                }
            } else {
                Operand::IndirectInc(reg)
            }
        }
        _ => unreachable!("As is two bits"),
    })
}

fn dst_operand(reg: Reg, a_d: u16, cursor: &mut Cursor<'_>) -> Result<Operand, DecodeError> {
    Ok(match a_d {
        0 => Operand::Reg(reg),
        _ => {
            let (x, at) = cursor.take()?;
            if reg == PC {
                Operand::Symbolic {
                    addr: (x as u32).wrapping_add(at) & 0xFFFF,
                }
            } else if reg == SR {
                Operand::Absolute { addr: x as u32 }
            } else {
                Operand::Indexed {
                    reg,
                    offset: x as i16 as i32,
                }
            }
        }
    })
}

/// Decode the instruction at `addr`. Consumes extension words for the
/// `#N`, `x(Rn)`, symbolic and absolute modes.
pub fn decode(mem: &Memory, addr: u32) -> Result<DecodedForm, DecodeError> {
    debug_assert_eq!(addr & 1, 0, "instruction addresses are even");
    let mut cursor = Cursor { mem, next: addr };
    let (word, _) = cursor.take()?;
    match word >> 12 {
        0x0 => decode_addr_family(word, addr, &mut cursor),
        0x1 => decode_one_op(word, addr, &mut cursor),
        0x2 | 0x3 => {
            let cond = (word >> 10) & 0x7;
            let off = ((word & 0x3FF) as i32) << 22 >> 22; // sign-extend 10 bits
            let target = (addr as i64 + 2 + 2 * off as i64) as u32 & 0xFFFF;
            Ok(DecodedForm::jump(
                Mnemonic::from_jump_cond(cond).unwrap(),
                target,
            ))
        }
        code => {
            let mnemonic = Mnemonic::from_two_op_code(code).unwrap();
            let src_reg = Reg(((word >> 8) & 0xF) as u8);
            let a_d = (word >> 7) & 1;
            let width = if word & 0x40 != 0 {
                Width::Byte
            } else {
                Width::Word
            };
            let a_s = (word >> 4) & 0x3;
            let dst_reg = Reg((word & 0xF) as u8);
            let src = src_operand(src_reg, a_s, &mut cursor)?;
            let dst = dst_operand(dst_reg, a_d, &mut cursor)?;
            Ok(DecodedForm::two_op(mnemonic, width, src, dst))
        }
    }
}

fn decode_one_op(
    word: u16,
    addr: u32,
    cursor: &mut Cursor<'_>,
) -> Result<DecodedForm, DecodeError> {
    if word & 0xFC00 != 0x1000 {
        return Err(DecodeError::Undefined { word, addr });
    }
    if word & 0xFFC0 == 0x1300 {
        return Ok(DecodedForm::reti());
    }
    if word & 0xFFF0 == 0x1340 {
        return Ok(DecodedForm::calla(Operand::Reg(Reg((word & 0xF) as u8))));
    }
    if word & 0xFFF0 == 0x1350 {
        let (x, _) = cursor.take()?;
        return Ok(DecodedForm::calla(Operand::Indexed {
            reg: Reg((word & 0xF) as u8),
            offset: x as i16 as i32,
        }));
    }
    if word & 0xFFF0 == 0x1360 {
        return Ok(DecodedForm::calla(Operand::Indirect(Reg(
            (word & 0xF) as u8
        ))));
    }
    if word & 0xFFF0 == 0x1370 {
        return Ok(DecodedForm::calla(Operand::IndirectInc(Reg(
            (word & 0xF) as u8,
        ))));
    }
    if word & 0xFFF0 == 0x13B0 {
        let (x, _) = cursor.take()?;
        let value = ((word & 0xF) as u32) << 16 | x as u32;
        return Ok(DecodedForm::calla(Operand::Imm { value, cg: false }));
    }
    let code = (word >> 7) & 0x7;
    let mnemonic = match code {
        0 => Mnemonic::Rrc,
        1 => Mnemonic::Swpb,
        2 => Mnemonic::Rra,
        3 => Mnemonic::Sxt,
        4 => Mnemonic::Push,
        5 => Mnemonic::Call,
        _ => return Err(DecodeError::Undefined { word, addr }),
    };
    let width = if word & 0x40 != 0 {
        if matches!(mnemonic, Mnemonic::Swpb | Mnemonic::Sxt | Mnemonic::Call) {
            return Err(DecodeError::Undefined { word, addr });
        }
        Width::Byte
    } else {
        Width::Word
    };
    let a_s = (word >> 4) & 0x3;
    let reg = Reg((word & 0xF) as u8);
    let operand = src_operand(reg, a_s, cursor)?;
    Ok(DecodedForm::one_op(mnemonic, width, operand))
}

fn decode_addr_family(
    word: u16,
    addr: u32,
    cursor: &mut Cursor<'_>,
) -> Result<DecodedForm, DecodeError> {
    if word == 0x0110 {
        return Ok(DecodedForm::reta());
    }
    let hi = Reg(((word >> 8) & 0xF) as u8);
    let lo = Reg((word & 0xF) as u8);
    let nibble = (word >> 4) & 0xF;
    let imm20 = |cursor: &mut Cursor<'_>| -> Result<u32, DecodeError> {
        let (x, _) = cursor.take()?;
        Ok((hi.0 as u32) << 16 | x as u32)
    };
    Ok(match nibble {
        0x0 => DecodedForm::addr_op(Mnemonic::Mova, Operand::Indirect(hi), Operand::Reg(lo)),
        0x1 => DecodedForm::addr_op(Mnemonic::Mova, Operand::IndirectInc(hi), Operand::Reg(lo)),
        0x2 => {
            let a = imm20(cursor)?;
            DecodedForm::addr_op(Mnemonic::Mova, Operand::Absolute { addr: a }, Operand::Reg(lo))
        }
        0x3 => {
            let (x, _) = cursor.take()?;
            DecodedForm::addr_op(
                Mnemonic::Mova,
                Operand::Indexed {
                    reg: hi,
                    offset: x as i16 as i32,
                },
                Operand::Reg(lo),
            )
        }
        0x7 => {
            let (x, _) = cursor.take()?;
            DecodedForm::addr_op(
                Mnemonic::Mova,
                Operand::Reg(hi),
                Operand::Indexed {
                    reg: lo,
                    offset: x as i16 as i32,
                },
            )
        }
        0x8..=0xB => {
            let value = imm20(cursor)?;
            let m = match nibble {
                0x8 => Mnemonic::Mova,
                0x9 => Mnemonic::Cmpa,
                0xA => Mnemonic::Adda,
                _ => Mnemonic::Suba,
            };
            DecodedForm::addr_op(m, Operand::Imm { value, cg: false }, Operand::Reg(lo))
        }
        0xC..=0xF => {
            let m = match nibble {
                0xC => Mnemonic::Mova,
                0xD => Mnemonic::Cmpa,
                0xE => Mnemonic::Adda,
                _ => Mnemonic::Suba,
            };
            DecodedForm::addr_op(m, Operand::Reg(hi), Operand::Reg(lo))
        }
        _ => return Err(DecodeError::Undefined { word, addr }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::encode;

    fn mem_with(words: &[u16], at: u32) -> Memory {
        let mut m = Memory::new();
        for (i, w) in words.iter().enumerate() {
            m.raw_write_word(at + 2 * i as u32, *w).unwrap();
        }
        m
    }

    #[test]
    fn decodes_mov_b_r10_r13() {
        // Bytes 4D 4A little-endian = word 0x4A4D.
        let m = mem_with(&[0x4A4D], 0x4400);
        let f = decode(&m, 0x4400).unwrap();
        assert_eq!(f.mnemonic, Mnemonic::Mov);
        assert_eq!(f.width, Width::Byte);
        assert_eq!(f.src, Some(Operand::Reg(Reg(10))));
        assert_eq!(f.dst, Some(Operand::Reg(Reg(13))));
        assert_eq!(f.size_bytes, 2);
    }

    #[test]
    fn decodes_indirect_source() {
        // MOV.W @R10, R15
        let f = DecodedForm::two_op(
            Mnemonic::Mov,
            Width::Word,
            Operand::Indirect(Reg(10)),
            Operand::Reg(Reg(15)),
        );
        let words = encode(&f, 0x4400).unwrap();
        let m = mem_with(&words, 0x4400);
        let d = decode(&m, 0x4400).unwrap();
        assert_eq!(d, f);
        assert_eq!(d.size_bytes, 2);
    }

    #[test]
    fn decodes_indexed_source_with_extension_word() {
        // MOV.W 4(R10), R15: one extension word, size 4, 3 cycles.
        let f = DecodedForm::two_op(
            Mnemonic::Mov,
            Width::Word,
            Operand::Indexed {
                reg: Reg(10),
                offset: 4,
            },
            Operand::Reg(Reg(15)),
        );
        let words = encode(&f, 0x4400).unwrap();
        let m = mem_with(&words, 0x4400);
        let d = decode(&m, 0x4400).unwrap();
        assert_eq!(d, f);
        assert_eq!(d.size_bytes, 4);
        assert_eq!(d.cycles, 3);
    }

    #[test]
    fn constant_generator_maps_to_immediates() {
        for (value, text) in [(0u32, "CLR"), (1, "DEC-src"), (2, "two"), (4, "four"), (8, "eight"), (0xFFFF, "minus one")] {
            let f = DecodedForm::two_op(
                Mnemonic::Add,
                Width::Word,
                Operand::Imm { value, cg: true },
                Operand::Reg(Reg(5)),
            );
            let words = encode(&f, 0x4400).unwrap();
            assert_eq!(words.len(), 1, "{text} should use the generator");
            let m = mem_with(&words, 0x4400);
            let d = decode(&m, 0x4400).unwrap();
            assert_eq!(d.src, Some(Operand::Imm { value, cg: true }));
            assert_eq!(d.size_bytes, 2);
        }
    }

    #[test]
    fn undefined_opcodes_fault() {
        let m = mem_with(&[0x1400], 0x4400);
        assert!(matches!(
            decode(&m, 0x4400),
            Err(DecodeError::Undefined { .. })
        ));
        let m = mem_with(&[0x13C0], 0x4400);
        assert!(decode(&m, 0x4400).is_err());
        let m = mem_with(&[0x0040], 0x4400);
        assert!(decode(&m, 0x4400).is_err());
    }

    #[test]
    fn jump_targets_resolve() {
        // JMP -4 words back from 0x4410.
        let f = DecodedForm::jump(Mnemonic::Jmp, 0x4408);
        let words = encode(&f, 0x4410).unwrap();
        let m = mem_with(&words, 0x4410);
        let d = decode(&m, 0x4410).unwrap();
        assert_eq!(d.jump_target, Some(0x4408));
        assert_eq!(d.cycles, 2);
    }

    #[test]
    fn reta_is_canonical() {
        let m = mem_with(&[0x0110], 0x4400);
        let d = decode(&m, 0x4400).unwrap();
        assert_eq!(d.mnemonic, Mnemonic::Reta);
        assert_eq!(encode(&d, 0x4400).unwrap(), vec![0x0110]);
    }
}
