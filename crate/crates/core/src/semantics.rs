//! Value-level operation semantics, shared between the emulator and the
//! trace analyzer's hypothesis testing.
//!
//! Each function is total over its operand domain and returns the result
//! (when the operation writes one) together with the updated status register.

use crate::isa::{sr_bits, Mnemonic, Width};

fn set_flags(sr: u32, c: bool, z: bool, n: bool, v: bool) -> u32 {
    let mut s = sr & !sr_bits::FLAGS;
    if c {
        s |= sr_bits::C;
    }
    if z {
        s |= sr_bits::Z;
    }
    if n {
        s |= sr_bits::N;
    }
    if v {
        s |= sr_bits::V;
    }
    s
}

fn add_core(width: Width, src: u32, dst: u32, carry_in: u32, sr: u32) -> (u32, u32) {
    let mask = width.mask();
    let sign = width.sign_bit();
    let full = (dst & mask) as u64 + (src & mask) as u64 + carry_in as u64;
    let r = (full as u32) & mask;
    let c = full > mask as u64;
    let v = ((dst ^ r) & (src ^ r) & sign) != 0;
    (r, set_flags(sr, c, r == 0, r & sign != 0, v))
}

/// Binary-coded-decimal add with carry, nibble-serial like the hardware.
fn dadd_core(width: Width, src: u32, dst: u32, sr: u32) -> (u32, u32) {
    let nibbles = match width {
        Width::Byte => 2,
        Width::Word => 4,
        Width::Addr => 5,
    };
    let mut carry = (sr & sr_bits::C != 0) as u32;
    let mut r = 0u32;
    for i in 0..nibbles {
        let a = (dst >> (4 * i)) & 0xF;
        let b = (src >> (4 * i)) & 0xF;
        let mut s = a + b + carry;
        if s > 9 {
            s += 6;
        }
        carry = (s >> 4) & 1;
        r |= (s & 0xF) << (4 * i);
    }
    let sign = width.sign_bit();
    // V is undefined on hardware after DADD; modeled as cleared.
    (
        r,
        set_flags(sr, carry != 0, r == 0, r & sign != 0, false),
    )
}

/// Apply a two-operand operation. Returns `(result, sr)`; `result` is `None`
/// for CMP/BIT, which only set status.
pub fn apply_two_op(
    op: Mnemonic,
    width: Width,
    src: u32,
    dst: u32,
    sr: u32,
) -> (Option<u32>, u32) {
    use Mnemonic::*;
    let mask = width.mask();
    let sign = width.sign_bit();
    let src = src & mask;
    let dst = dst & mask;
    match op {
        Mov => (Some(src), sr),
        Add => {
            let (r, s) = add_core(width, src, dst, 0, sr);
            (Some(r), s)
        }
        Addc => {
            let cin = (sr & sr_bits::C != 0) as u32;
            let (r, s) = add_core(width, src, dst, cin, sr);
            (Some(r), s)
        }
        Sub => {
            let (r, s) = add_core(width, !src & mask, dst, 1, sr);
            (Some(r), s)
        }
        Subc => {
            let cin = (sr & sr_bits::C != 0) as u32;
            let (r, s) = add_core(width, !src & mask, dst, cin, sr);
            (Some(r), s)
        }
        Cmp => {
            let (_, s) = add_core(width, !src & mask, dst, 1, sr);
            (None, s)
        }
        Dadd => {
            let (r, s) = dadd_core(width, src, dst, sr);
            (Some(r), s)
        }
        Bit => {
            let r = src & dst;
            (
                None,
                set_flags(sr, r != 0, r == 0, r & sign != 0, false),
            )
        }
        Bic => (Some(dst & !src), sr),
        Bis => (Some(dst | src), sr),
        Xor => {
            let r = src ^ dst;
            let v = (src & sign != 0) && (dst & sign != 0);
            (Some(r), set_flags(sr, r != 0, r == 0, r & sign != 0, v))
        }
        And => {
            let r = src & dst;
            (
                Some(r),
                set_flags(sr, r != 0, r == 0, r & sign != 0, false),
            )
        }
        _ => unreachable!("not a two-operand mnemonic: {:?}", op),
    }
}

/// Apply a register-style single-operand operation (RRC/RRA/SWPB/SXT).
pub fn apply_one_op(op: Mnemonic, width: Width, val: u32, sr: u32) -> (u32, u32) {
    use Mnemonic::*;
    let mask = width.mask();
    let sign = width.sign_bit();
    let val = val & mask;
    match op {
        Rra => {
            let r = (val >> 1) | (val & sign);
            (
                r,
                set_flags(sr, val & 1 != 0, r == 0, r & sign != 0, false),
            )
        }
        Rrc => {
            let cin = if sr & sr_bits::C != 0 { sign } else { 0 };
            let r = (val >> 1) | cin;
            (
                r,
                set_flags(sr, val & 1 != 0, r == 0, r & sign != 0, false),
            )
        }
        Swpb => ((val >> 8 | val << 8) & 0xFFFF, sr),
        Sxt => {
            let r = if val & 0x80 != 0 {
                val & 0xFF | 0xFF00
            } else {
                val & 0xFF
            };
            (r, set_flags(sr, r != 0, r == 0, r & 0x8000 != 0, false))
        }
        _ => unreachable!("not a register one-op mnemonic: {:?}", op),
    }
}

/// 20-bit arithmetic for ADDA/SUBA/CMPA.
pub fn apply_addr_op(op: Mnemonic, src: u32, dst: u32, sr: u32) -> (Option<u32>, u32) {
    use Mnemonic::*;
    match op {
        Mova => (Some(src & 0xF_FFFF), sr),
        Adda => {
            let (r, s) = add_core(Width::Addr, src, dst, 0, sr);
            (Some(r), s)
        }
        Suba => {
            let (r, s) = add_core(Width::Addr, !src & 0xF_FFFF, dst, 1, sr);
            (Some(r), s)
        }
        Cmpa => {
            let (_, s) = add_core(Width::Addr, !src & 0xF_FFFF, dst, 1, sr);
            (None, s)
        }
        _ => unreachable!("not an address mnemonic: {:?}", op),
    }
}

/// Whether a conditional jump is taken under the given status register.
pub fn jump_taken(op: Mnemonic, sr: u32) -> bool {
    use Mnemonic::*;
    let c = sr & sr_bits::C != 0;
    let z = sr & sr_bits::Z != 0;
    let n = sr & sr_bits::N != 0;
    let v = sr & sr_bits::V != 0;
    match op {
        Jnz => !z,
        Jz => z,
        Jnc => !c,
        Jc => c,
        Jn => n,
        Jge => n == v,
        Jl => n != v,
        Jmp => true,
        _ => unreachable!("not a jump: {:?}", op),
    }
}
