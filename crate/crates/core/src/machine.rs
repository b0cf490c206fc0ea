//! CPU state and the fetch-decode-execute step.
//!
//! One `MachineState` owns its memory and peripherals; distinct instances are
//! independent. Registers store 20 bits: word operations write the low 16
//! bits and clear bits 16..19 of a register destination, byte operations
//! clear bits 8..19.

use crate::decode::{decode, DecodeError};
use crate::isa::{sr_bits, DecodedForm, Mnemonic, Operand, Reg, Width, PC, SP, SR};
use crate::mem::{MemFault, Memory, VEC_TIMER};
use crate::periph::{Timer, UartChannel};
use crate::semantics::{apply_addr_op, apply_one_op, apply_two_op, jump_taken};

/// Default cycles charged between timer expiry and ISR entry.
pub const DEFAULT_IRQ_LATENCY: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepEventKind {
    Executed,
    InterruptEntered,
    /// The retired instruction had at least one access denied by the MPU.
    MpuViolation,
    Halt,
    DecodeFault,
}

/// Exactly one event per step call.
#[derive(Debug, Clone, Copy)]
pub struct StepEvent {
    pub kind: StepEventKind,
    pub pc_before: u32,
    pub pc_after: u32,
    pub retired: Option<DecodedForm>,
}

#[derive(Debug, Clone)]
pub struct MachineState {
    pub regs: [u32; 16],
    pub cycles: u64,
    pub halted: bool,
    pub mem: Memory,
    pub timer: Timer,
    pub uart: UartChannel,
    pub irq_latency: u32,
}

impl Default for MachineState {
    fn default() -> Self {
        Self::new()
    }
}

impl MachineState {
    pub fn new() -> Self {
        MachineState {
            regs: [0; 16],
            cycles: 0,
            halted: false,
            mem: Memory::new(),
            timer: Timer::default(),
            uart: UartChannel::default(),
            irq_latency: DEFAULT_IRQ_LATENCY,
        }
    }

    pub fn pc(&self) -> u32 {
        self.regs[PC.index()]
    }

    pub fn set_pc(&mut self, pc: u32) {
        self.regs[PC.index()] = pc & 0xF_FFFE;
    }

    pub fn sp(&self) -> u32 {
        self.regs[SP.index()]
    }

    pub fn sr(&self) -> u32 {
        self.regs[SR.index()]
    }

    pub fn set_sr(&mut self, sr: u32) {
        self.regs[SR.index()] = sr & 0xFFFF;
    }

    pub fn reg(&self, r: Reg) -> u32 {
        self.regs[r.index()]
    }

    pub fn set_reg(&mut self, r: Reg, value: u32) {
        if r == PC {
            self.set_pc(value);
        } else {
            self.regs[r.index()] = value & 0xF_FFFF;
        }
    }

    fn reg_read(&self, r: Reg, width: Width) -> u32 {
        self.regs[r.index()] & width.mask()
    }

    fn reg_write(&mut self, r: Reg, value: u32, width: Width) {
        // Width masking clears the high bits of the destination register.
        let v = value & width.mask();
        if r == PC {
            self.set_pc(v);
        } else {
            self.regs[r.index()] = v;
        }
    }

    fn operand_addr(&mut self, op: &Operand, width: Width) -> Option<u32> {
        match op {
            Operand::Indirect(r) | Operand::IndirectInc(r) => Some(self.reg(*r) & 0xFFFF),
            Operand::Indexed { reg, offset } => {
                Some(((self.reg(*reg) & 0xFFFF) as i64 + *offset as i64) as u32 & 0xFFFF)
            }
            Operand::Symbolic { addr } | Operand::Absolute { addr } => Some(*addr),
            _ => {
                let _ = width;
                None
            }
        }
    }

    fn mem_read(&mut self, addr: u32, width: Width, accessor: u32) -> Result<u32, MemFault> {
        Ok(match width {
            Width::Byte => self.mem.read_byte(addr, accessor)? as u32,
            Width::Word => self.mem.read_word(addr, accessor)? as u32,
            Width::Addr => {
                let lo = self.mem.read_word(addr, accessor)? as u32;
                let hi = self.mem.read_word(addr.wrapping_add(2), accessor)? as u32;
                (hi & 0xF) << 16 | lo
            }
        })
    }

    fn mem_write(
        &mut self,
        addr: u32,
        value: u32,
        width: Width,
        accessor: u32,
    ) -> Result<(), MemFault> {
        match width {
            Width::Byte => {
                self.mem.write_byte(addr, value as u8, accessor)?;
            }
            Width::Word => {
                self.mem.write_word(addr, value as u16, accessor)?;
            }
            Width::Addr => {
                self.mem.write_word(addr, value as u16, accessor)?;
                self.mem
                    .write_word(addr.wrapping_add(2), (value >> 16 & 0xF) as u16, accessor)?;
            }
        }
        Ok(())
    }

    /// Read a source operand; autoincrement advances its register by the
    /// operand width immediately after the read.
    fn read_operand(&mut self, op: &Operand, width: Width, accessor: u32) -> Result<u32, MemFault> {
        match op {
            Operand::Reg(r) => Ok(self.reg_read(*r, width)),
            Operand::Imm { value, .. } => Ok(*value & width.mask()),
            Operand::IndirectInc(r) => {
                let addr = self.reg(*r) & 0xFFFF;
                let v = self.mem_read(addr, width, accessor)?;
                let next = (self.reg(*r) + width.step()) & 0xF_FFFF;
                self.set_reg(*r, next);
                Ok(v)
            }
            _ => {
                let addr = self.operand_addr(op, width).expect("memory operand");
                self.mem_read(addr, width, accessor)
            }
        }
    }

    fn push_word(&mut self, value: u16, accessor: u32) -> Result<(), MemFault> {
        let sp = (self.sp().wrapping_sub(2)) & 0xFFFF;
        self.regs[SP.index()] = sp;
        self.mem.write_word(sp, value, accessor)?;
        Ok(())
    }

    fn pop_word(&mut self, accessor: u32) -> Result<u16, MemFault> {
        let sp = self.sp() & 0xFFFF;
        let v = self.mem.read_word(sp, accessor)?;
        self.regs[SP.index()] = (sp + 2) & 0xFFFF;
        Ok(v)
    }

    /// Take the pending timer interrupt: push the return PC then the SR,
    /// clear SR (dropping GIE), vector, and charge the entry latency. The
    /// latency is charged to `cycles` but never to the timer.
    fn interrupt_enter(&mut self) -> Result<StepEvent, MemFault> {
        let pc_next = self.pc();
        let accessor = pc_next;
        self.push_word(pc_next as u16, accessor)?;
        self.push_word(self.sr() as u16, accessor)?;
        self.set_sr(0);
        let vector = self.mem.raw_read_word(VEC_TIMER)? as u32;
        self.set_pc(vector);
        self.cycles += self.irq_latency as u64;
        self.timer.acknowledge();
        Ok(StepEvent {
            kind: StepEventKind::InterruptEntered,
            pc_before: pc_next,
            pc_after: self.pc(),
            retired: None,
        })
    }

    /// Execute one step: take a pending enabled interrupt at this instruction
    /// boundary, or fetch-decode-execute exactly one instruction.
    pub fn step(&mut self) -> Result<StepEvent, MemFault> {
        let pc_before = self.pc();
        if self.halted {
            return Ok(StepEvent {
                kind: StepEventKind::Halt,
                pc_before,
                pc_after: pc_before,
                retired: None,
            });
        }
        if self.timer.pending() && self.sr() & sr_bits::GIE != 0 {
            return self.interrupt_enter();
        }
        if !self.mem.fetch_gate(pc_before) {
            return Err(MemFault::Unmapped(pc_before));
        }
        let form = match decode(&self.mem, pc_before) {
            Ok(f) => f,
            Err(DecodeError::Undefined { .. }) => {
                self.halted = true;
                return Ok(StepEvent {
                    kind: StepEventKind::DecodeFault,
                    pc_before,
                    pc_after: pc_before,
                    retired: None,
                });
            }
            Err(DecodeError::Fault(f)) => return Err(f),
        };
        let denied_before = self.mem.read_denied + self.mem.write_denied;
        self.set_pc(pc_before + form.size_bytes as u32);
        self.execute(&form, pc_before)?;
        self.cycles += form.cycles as u64;
        self.timer.tick(form.cycles);
        let kind = if self.mem.read_denied + self.mem.write_denied > denied_before {
            StepEventKind::MpuViolation
        } else {
            StepEventKind::Executed
        };
        Ok(StepEvent {
            kind,
            pc_before,
            pc_after: self.pc(),
            retired: Some(form),
        })
    }

    fn execute(&mut self, form: &DecodedForm, accessor: u32) -> Result<(), MemFault> {
        use Mnemonic::*;
        match form.mnemonic {
            m if m.is_two_op() => {
                let src = form.src.expect("two-op src");
                let dst = form.dst.expect("two-op dst");
                let src_val = self.read_operand(&src, form.width, accessor)?;
                let needs_old = m != Mov;
                let (dst_addr, dst_old) = match dst {
                    Operand::Reg(r) => (None, self.reg_read(r, form.width)),
                    _ => {
                        let addr = self.operand_addr(&dst, form.width).expect("mem dst");
                        let old = if needs_old {
                            self.mem_read(addr, form.width, accessor)?
                        } else {
                            0
                        };
                        (Some(addr), old)
                    }
                };
                let (result, new_sr) = apply_two_op(m, form.width, src_val, dst_old, self.sr());
                self.set_sr(new_sr);
                if let Some(r) = result {
                    match (dst_addr, dst) {
                        (None, Operand::Reg(reg)) => self.reg_write(reg, r, form.width),
                        (Some(addr), _) => self.mem_write(addr, r, form.width, accessor)?,
                        _ => unreachable!(),
                    }
                }
            }
            Rrc | Swpb | Rra | Sxt => {
                let opnd = form.src.expect("one-op operand");
                match opnd {
                    Operand::Reg(r) => {
                        let v = self.reg_read(r, form.width);
                        let (res, sr) = apply_one_op(form.mnemonic, form.width, v, self.sr());
                        self.set_sr(sr);
                        self.reg_write(r, res, form.width);
                    }
                    _ => {
                        let addr = self.operand_addr(&opnd, form.width).expect("mem operand");
                        let v = self.mem_read(addr, form.width, accessor)?;
                        let (res, sr) = apply_one_op(form.mnemonic, form.width, v, self.sr());
                        self.set_sr(sr);
                        self.mem_write(addr, res, form.width, accessor)?;
                    }
                }
            }
            Push => {
                let opnd = form.src.expect("push operand");
                let v = self.read_operand(&opnd, form.width, accessor)?;
                // Byte pushes still decrement SP by 2.
                let sp = (self.sp().wrapping_sub(2)) & 0xFFFF;
                self.regs[SP.index()] = sp;
                match form.width {
                    Width::Byte => {
                        self.mem.write_byte(sp, v as u8, accessor)?;
                    }
                    _ => {
                        self.mem.write_word(sp, v as u16, accessor)?;
                    }
                }
            }
            Call => {
                let opnd = form.src.expect("call operand");
                let target = match opnd {
                    Operand::Reg(r) => self.reg_read(r, Width::Word),
                    Operand::Imm { value, .. } => value & 0xFFFF,
                    _ => {
                        let addr = self.operand_addr(&opnd, Width::Word).expect("mem operand");
                        self.mem_read(addr, Width::Word, accessor)?
                    }
                };
                // @Rn+ call operands advance like any autoincrement source.
                if let Operand::IndirectInc(r) = opnd {
                    let next = (self.reg(r) + Width::Word.step()) & 0xF_FFFF;
                    self.set_reg(r, next);
                }
                let ret = self.pc() as u16;
                self.push_word(ret, accessor)?;
                self.set_pc(target);
            }
            Reti => {
                let sr = self.pop_word(accessor)?;
                let pc = self.pop_word(accessor)?;
                self.set_sr(sr as u32);
                self.set_pc(pc as u32);
            }
            m if m.is_jump() => {
                if jump_taken(m, self.sr()) {
                    self.set_pc(form.jump_target.expect("jump target"));
                }
            }
            Mova | Cmpa | Adda | Suba => {
                let src = form.src.expect("addr-op src");
                let dst = form.dst.expect("addr-op dst");
                let src_val = self.read_operand(&src, Width::Addr, accessor)?;
                let dst_old = match dst {
                    Operand::Reg(r) => self.reg_read(r, Width::Addr),
                    _ => 0,
                };
                let (result, sr) = apply_addr_op(form.mnemonic, src_val, dst_old, self.sr());
                self.set_sr(sr);
                if let Some(v) = result {
                    match dst {
                        Operand::Reg(r) => self.reg_write(r, v, Width::Addr),
                        _ => {
                            let addr = self.operand_addr(&dst, Width::Addr).expect("mem dst");
                            self.mem_write(addr, v, Width::Addr, accessor)?;
                        }
                    }
                }
            }
            Calla => {
                let opnd = form.src.expect("calla operand");
                let target = match opnd {
                    Operand::Reg(r) => self.reg_read(r, Width::Addr),
                    Operand::Imm { value, .. } => value & 0xF_FFFF,
                    _ => {
                        let addr = self.operand_addr(&opnd, Width::Addr).expect("mem operand");
                        self.mem_read(addr, Width::Addr, accessor)?
                    }
                };
                let ret = self.pc();
                self.push_word((ret >> 16) as u16, accessor)?;
                self.push_word(ret as u16, accessor)?;
                self.set_pc(target);
            }
            Reta => {
                let lo = self.pop_word(accessor)? as u32;
                let hi = self.pop_word(accessor)? as u32;
                self.set_pc((hi & 0xF) << 16 | lo);
            }
            _ => unreachable!("unhandled mnemonic {:?}", form.mnemonic),
        }
        Ok(())
    }

    /// Step until the predicate accepts an event, the machine halts, or a
    /// decode fault occurs. `max_steps` bounds runaway executions.
    pub fn run_until_fuel<F>(&mut self, max_steps: u64, mut stop: F) -> Result<StepEvent, MemFault>
    where
        F: FnMut(&MachineState, &StepEvent) -> bool,
    {
        let mut last = None;
        for _ in 0..max_steps {
            let ev = self.step()?;
            if stop(self, &ev)
                || matches!(ev.kind, StepEventKind::Halt | StepEventKind::DecodeFault)
            {
                return Ok(ev);
            }
            last = Some(ev);
        }
        Ok(last.unwrap_or(StepEvent {
            kind: StepEventKind::Halt,
            pc_before: self.pc(),
            pc_after: self.pc(),
            retired: None,
        }))
    }

    pub fn run_until<F>(&mut self, stop: F) -> Result<StepEvent, MemFault>
    where
        F: FnMut(&MachineState, &StepEvent) -> bool,
    {
        self.run_until_fuel(50_000_000, stop)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::encode;

    fn machine_with(words: &[u16], at: u32) -> MachineState {
        let mut m = MachineState::new();
        for (i, w) in words.iter().enumerate() {
            m.mem.raw_write_word(at + 2 * i as u32, *w).unwrap();
        }
        m.set_pc(at);
        m.regs[SP.index()] = 0x2400;
        m
    }

    fn asm_words(text_forms: &[DecodedForm], at: u32) -> Vec<u16> {
        let mut words = Vec::new();
        let mut addr = at;
        for f in text_forms {
            let w = encode(f, addr).unwrap();
            addr += 2 * w.len() as u32;
            words.extend(w);
        }
        words
    }

    #[test]
    fn add_wraparound_flags() {
        use crate::isa::Operand::*;
        let f = DecodedForm::two_op(Mnemonic::Add, Width::Word, Reg(crate::isa::Reg(4)), Reg(crate::isa::Reg(5)));
        let mut m = machine_with(&asm_words(&[f], 0x4400), 0x4400);
        m.set_reg(crate::isa::Reg(4), 0xFFFF);
        m.set_reg(crate::isa::Reg(5), 0x0001);
        let ev = m.step().unwrap();
        assert_eq!(ev.kind, StepEventKind::Executed);
        assert_eq!(m.reg(crate::isa::Reg(5)), 0);
        assert_ne!(m.sr() & sr_bits::C, 0);
        assert_ne!(m.sr() & sr_bits::Z, 0);
        assert_eq!(m.sr() & sr_bits::N, 0);
        assert_eq!(m.cycles, 1);
    }

    #[test]
    fn byte_autoincrement_advances_by_one() {
        use crate::isa::Operand;
        let f = DecodedForm::two_op(
            Mnemonic::Mov,
            Width::Byte,
            Operand::IndirectInc(crate::isa::Reg(10)),
            Operand::Reg(crate::isa::Reg(13)),
        );
        let mut m = machine_with(&asm_words(&[f], 0x4400), 0x4400);
        m.mem.raw_write_word(0x2000, 0xA1B2).unwrap();
        m.set_reg(crate::isa::Reg(10), 0x2000);
        m.set_reg(crate::isa::Reg(13), 0xFFFF);
        m.step().unwrap();
        assert_eq!(m.reg(crate::isa::Reg(13)), 0xB2, "one byte moved, high bits cleared");
        assert_eq!(m.reg(crate::isa::Reg(10)), 0x2001);
    }

    #[test]
    fn interrupt_enter_stack_frame() {
        // Arm the timer so that it fires after the first (1-cycle)
        // instruction, with a 2-cycle entry latency for the example numbers.
        use crate::isa::Operand;
        let nop = DecodedForm::two_op(
            Mnemonic::Mov,
            Width::Word,
            Operand::Reg(crate::isa::Reg(4)),
            Operand::Reg(crate::isa::Reg(4)),
        );
        let mut m = machine_with(&asm_words(&[nop, nop], 0x4410), 0x4410);
        m.mem.raw_write_word(VEC_TIMER, 0x5000).unwrap();
        m.mem.raw_write_word(0x5000, 0x4303).unwrap(); // NOP at the handler
        m.regs[SP.index()] = 0x2400;
        m.set_sr(sr_bits::GIE | sr_bits::C | sr_bits::N);
        m.timer.arm(1).unwrap();
        let ev = m.step().unwrap();
        assert_eq!(ev.kind, StepEventKind::Executed);
        let ev = m.step().unwrap();
        assert_eq!(ev.kind, StepEventKind::InterruptEntered);
        assert_eq!(m.sp(), 0x23FC);
        assert_eq!(m.mem.raw_read_word(0x23FE).unwrap(), 0x4412);
        assert_eq!(m.mem.raw_read_word(0x23FC).unwrap(), 0x0005 | sr_bits::GIE as u16);
        assert_eq!(m.pc(), 0x5000);
        assert_eq!(m.sr() & sr_bits::GIE, 0);
    }

    #[test]
    fn reti_round_trips_interrupt_entry() {
        use crate::isa::Operand;
        let nop = DecodedForm::two_op(
            Mnemonic::Mov,
            Width::Word,
            Operand::Reg(crate::isa::Reg(4)),
            Operand::Reg(crate::isa::Reg(4)),
        );
        let mut m = machine_with(&asm_words(&[nop, nop, nop], 0x4410), 0x4410);
        m.mem.raw_write_word(VEC_TIMER, 0x5000).unwrap();
        m.mem.raw_write_word(0x5000, 0x1300).unwrap(); // RETI immediately
        m.set_sr(sr_bits::GIE | sr_bits::C);
        m.timer.arm(1).unwrap();
        m.step().unwrap();
        let sp0 = m.sp();
        let sr0 = sr_bits::GIE | sr_bits::C;
        m.step().unwrap(); // interrupt entry
        let ev = m.step().unwrap(); // RETI
        assert_eq!(ev.kind, StepEventKind::Executed);
        assert_eq!(m.pc(), 0x4412);
        assert_eq!(m.sr(), sr0);
        assert_eq!(m.sp(), sp0);
    }

    #[test]
    fn decode_fault_halts() {
        let mut m = machine_with(&[0x1400], 0x4400);
        let ev = m.step().unwrap();
        assert_eq!(ev.kind, StepEventKind::DecodeFault);
        let ev = m.step().unwrap();
        assert_eq!(ev.kind, StepEventKind::Halt);
    }

    #[test]
    fn call_ret_round_trip() {
        use crate::isa::Operand;
        // 0x4400: CALL #0x4500 ; 0x4404: NOP    0x4500: RET
        let call = DecodedForm::one_op(
            Mnemonic::Call,
            Width::Word,
            Operand::Imm {
                value: 0x4500,
                cg: false,
            },
        );
        let mut m = machine_with(&asm_words(&[call], 0x4400), 0x4400);
        m.mem.raw_write_word(0x4404, 0x4303).unwrap();
        let ret = DecodedForm::two_op(
            Mnemonic::Mov,
            Width::Word,
            Operand::IndirectInc(SP),
            Operand::Reg(PC),
        );
        let w = encode(&ret, 0x4500).unwrap();
        m.mem.raw_write_word(0x4500, w[0]).unwrap();
        let sp0 = m.sp();
        m.step().unwrap();
        assert_eq!(m.pc(), 0x4500);
        assert_eq!(m.sp(), sp0 - 2);
        let ev = m.run_until(|_, e| e.pc_after == 0x4404).unwrap();
        assert_eq!(ev.pc_after, 0x4404);
        assert_eq!(m.sp(), sp0, "SP restored after return");
        assert_eq!(m.cycles, 5 + 3);
    }

    #[test]
    fn mpu_violation_event_on_denied_data_access() {
        use crate::isa::Operand;
        // Victim data inside IPE, read from outside.
        let f = DecodedForm::two_op(
            Mnemonic::Mov,
            Width::Word,
            Operand::Absolute { addr: 0x4500 },
            Operand::Reg(crate::isa::Reg(7)),
        );
        let mut m = machine_with(&asm_words(&[f], 0x5000), 0x5000);
        m.mem.ipe = Some(crate::mem::IpeConfig::new(0x4400, 0x4800).unwrap());
        m.mem.raw_write_word(0x4500, 0x1234).unwrap();
        let ev = m.step().unwrap();
        assert_eq!(ev.kind, StepEventKind::MpuViolation);
        assert_eq!(m.reg(crate::isa::Reg(7)), 0x3FFF);
    }

    #[test]
    fn address_instructions_move_twenty_bits() {
        use crate::isa::Operand;
        let r = |n: u8| crate::isa::Reg(n);
        // MOVA #0x12345, R4 ; ADDA #0x00223, R4 ; MOVA R4, R5 ;
        // CMPA R4, R5 ; MOVA @R6+, R7
        let forms = [
            DecodedForm::addr_op(
                Mnemonic::Mova,
                Operand::Imm {
                    value: 0x1_2345,
                    cg: false,
                },
                Operand::Reg(r(4)),
            ),
            DecodedForm::addr_op(
                Mnemonic::Adda,
                Operand::Imm {
                    value: 0x0_0223,
                    cg: false,
                },
                Operand::Reg(r(4)),
            ),
            DecodedForm::addr_op(Mnemonic::Mova, Operand::Reg(r(4)), Operand::Reg(r(5))),
            DecodedForm::addr_op(Mnemonic::Cmpa, Operand::Reg(r(4)), Operand::Reg(r(5))),
            DecodedForm::addr_op(Mnemonic::Mova, Operand::IndirectInc(r(6)), Operand::Reg(r(7))),
        ];
        let mut m = machine_with(&asm_words(&forms, 0x4400), 0x4400);
        // 20-bit operand in memory: low word then the high nibble word.
        m.mem.raw_write_word(0x2000, 0xBEEF).unwrap();
        m.mem.raw_write_word(0x2002, 0x000A).unwrap();
        m.set_reg(r(6), 0x2000);
        for _ in 0..5 {
            m.step().unwrap();
        }
        assert_eq!(m.reg(r(4)), 0x1_2568);
        assert_eq!(m.reg(r(5)), 0x1_2568);
        assert_ne!(m.sr() & sr_bits::Z, 0, "CMPA of equal values sets Z");
        assert_eq!(m.reg(r(7)), 0xA_BEEF, "20-bit indirect load");
        assert_eq!(m.reg(r(6)), 0x2004, "address-width autoincrement is 4");
    }

    #[test]
    fn calla_reta_round_trip() {
        use crate::isa::Operand;
        let calla = DecodedForm::calla(Operand::Imm {
            value: 0x4500,
            cg: false,
        });
        let mut m = machine_with(&asm_words(&[calla], 0x4400), 0x4400);
        m.mem.raw_write_word(0x4404, 0x4303).unwrap(); // NOP after the call
        let reta = DecodedForm::reta();
        let w = crate::isa::encode(&reta, 0x4500).unwrap();
        m.mem.raw_write_word(0x4500, w[0]).unwrap();
        let sp0 = m.sp();
        m.step().unwrap();
        assert_eq!(m.pc(), 0x4500);
        assert_eq!(m.sp(), sp0 - 4, "two words pushed");
        m.step().unwrap();
        assert_eq!(m.pc(), 0x4404);
        assert_eq!(m.sp(), sp0, "frame fully popped");
    }

    #[test]
    fn run_until_cycle_bound() {
        use crate::isa::Operand;
        let nop = DecodedForm::two_op(
            Mnemonic::Mov,
            Width::Word,
            Operand::Reg(crate::isa::Reg(4)),
            Operand::Reg(crate::isa::Reg(4)),
        );
        let jmp = DecodedForm::jump(Mnemonic::Jmp, 0x4400);
        let mut words = asm_words(&[nop], 0x4400);
        words.extend(encode(&jmp, 0x4402).unwrap());
        let mut m = machine_with(&words, 0x4400);
        m.run_until(|s, _| s.cycles >= 100).unwrap();
        assert!(m.cycles >= 100);
    }
}
