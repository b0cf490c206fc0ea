//! Offline reconstruction of the protected assembly from a register trace.
//!
//! Boundary segmentation turns runs of identical dump PCs into instruction
//! records carrying address, size and cycle count. Register-mode operations
//! are recovered by searching for an operation and source that explain every
//! observed destination transition; indexed and indirect operations are
//! resolved by re-entering the victim at the suspect instruction with all
//! pointer registers aimed at seeded attacker memory and reading the deltas.
//! Status-bit behavior prunes candidates throughout, and adaptive probes
//! split surviving candidate sets within a fixed budget of four runs per
//! suspect.
//!
//! Confidence follows the addressing-mode decode matrix: register, indirect,
//! autoincrement and small-offset indexed forms can reach `Decoded`;
//! immediate-source forms are never better than `Ambiguous` (an immediate is
//! indistinguishable from a protected constant); symbolic- and absolute-mode
//! operands are `Unknown`. Single-operand and control-flow forms sit outside
//! that matrix and decode on a best-effort basis from stack-pointer behavior
//! and probes.

use crate::attack::{GadgetDescriptor, GadgetForm, ProbeExecutor, ProbeRequest, ScratchLayout};
use crate::isa::{self, sr_bits, DecodedForm, Mnemonic, Operand, Reg, Width, PC, SP, SR};
use crate::semantics::{apply_one_op, apply_two_op, jump_taken};
use crate::trace::{RegisterDump, TraceDb};
use std::collections::BTreeMap;
use std::fmt::Write as _;

const FLAG_MASK: u32 = sr_bits::FLAGS;

/// One executed-instruction record from boundary segmentation.
#[derive(Debug, Clone)]
pub struct InstructionRecord {
    pub addr: u32,
    pub next_pc: u32,
    pub cycle_count: u32,
    /// Dump index whose register file is the state after this instruction.
    pub dump_after: usize,
    /// Dump index holding the state before, if any (the first record's
    /// before-state is the attacker's entry context).
    pub dump_before: Option<usize>,
    /// False for the trailing record of an unterminated trace, whose cycle
    /// count may be cut short.
    pub complete: bool,
}

impl InstructionRecord {
    /// Forward size implied by the PC delta, when it looks like fall-through.
    pub fn linear_size(&self) -> Option<u8> {
        let delta = self.next_pc as i64 - self.addr as i64;
        if (2..=8).contains(&delta) && delta % 2 == 0 {
            Some(delta as u8)
        } else {
            None
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("malformed trace: {0}")]
    Malformed(String),
}

/// Segment a gap-free trace into instruction records. `start_addr` is the
/// address the attacker jumped to (the entry bypass).
pub fn segment_boundaries(
    trace: &TraceDb,
    start_addr: u32,
) -> Result<Vec<InstructionRecord>, AnalysisError> {
    trace
        .validate()
        .map_err(|e| AnalysisError::Malformed(e.to_string()))?;
    let mut records = Vec::new();
    let mut addr = start_addr;
    let mut i = 0;
    let dumps = &trace.dumps;
    while i < dumps.len() {
        let pc = dumps[i].pc();
        let mut j = i;
        while j + 1 < dumps.len() && dumps[j + 1].pc() == pc {
            j += 1;
        }
        let terminal = dumps[j].terminated();
        records.push(InstructionRecord {
            addr,
            next_pc: pc,
            cycle_count: (j - i + 1) as u32,
            dump_after: i,
            dump_before: if i == 0 { None } else { Some(i - 1) },
            // The final group of an unterminated trace may have been cut off
            // mid-instruction; a terminal record closes the group exactly.
            complete: j + 1 < dumps.len() || trace.terminated || terminal,
        });
        addr = pc;
        i = j + 1;
    }
    Ok(records)
}

/// Register file view around one execution of an instruction.
#[derive(Debug, Clone)]
pub struct Observation {
    pub before: [u32; 16],
    pub after: [u32; 16],
    /// Scratch-memory deltas, known only for probe observations.
    pub mem_delta: Option<Vec<(u32, u8, u8)>>,
    /// True when memory pointed to by registers carries known seeds.
    pub seeded: bool,
}

impl Observation {
    fn sr_before(&self) -> u32 {
        self.before[SR.index()]
    }

    fn sr_after(&self) -> u32 {
        self.after[SR.index()]
    }

    fn sp_delta(&self) -> i64 {
        self.after[SP.index()] as i64 - self.before[SP.index()] as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Confidence {
    Decoded,
    Ambiguous,
    Unknown,
}

impl Confidence {
    pub fn label(self) -> &'static str {
        match self {
            Confidence::Decoded => "DECODED",
            Confidence::Ambiguous => "AMBIGUOUS",
            Confidence::Unknown => "UNKNOWN",
        }
    }
}

/// Broad structural category from stack and PC behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    DataOp,
    Jump,
    Call,
    Push,
    Pop,
    Ret,
    Reti,
    StackAdjust,
}

impl RecordKind {
    pub fn label(self) -> &'static str {
        match self {
            RecordKind::DataOp => "data",
            RecordKind::Jump => "jump",
            RecordKind::Call => "call",
            RecordKind::Push => "push",
            RecordKind::Pop => "pop",
            RecordKind::Ret => "ret",
            RecordKind::Reti => "reti",
            RecordKind::StackAdjust => "stack-adjust",
        }
    }
}

/// One reconstructed instruction: merged evidence for a single address.
#[derive(Debug, Clone)]
pub struct ReconstructedInstruction {
    pub addr: u32,
    pub size_bytes: Option<u8>,
    pub cycle_count: u32,
    pub occurrences: usize,
    pub kind: RecordKind,
    pub confidence: Confidence,
    /// Exact form when `Decoded`.
    pub form: Option<DecodedForm>,
    /// Candidate renderings when `Ambiguous`.
    pub alternatives: Vec<String>,
    pub note: String,
}

impl ReconstructedInstruction {
    pub fn display(&self) -> String {
        match (&self.form, self.confidence) {
            (Some(f), _) => isa::display_form(f),
            (None, Confidence::Ambiguous) => self
                .alternatives
                .first()
                .cloned()
                .unwrap_or_else(|| "?".to_string()),
            _ => "?".to_string(),
        }
    }
}

/// Analyzer inputs describing the attacker context the trace was taken in.
#[derive(Debug, Clone)]
pub struct Phase2Config {
    pub start_addr: u32,
    pub initial_regs: [u32; 12],
    pub initial_sp: u32,
    pub initial_sr: u32,
    /// Probes allowed per suspect instruction.
    pub probe_budget: usize,
}

impl Phase2Config {
    pub fn new(start_addr: u32) -> Self {
        Phase2Config {
            start_addr,
            initial_regs: [0; 12],
            initial_sp: 0,
            initial_sr: sr_bits::GIE,
            probe_budget: 4,
        }
    }
}

/// Full reconstruction output.
#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    pub image_id: String,
    pub instructions: Vec<ReconstructedInstruction>,
    pub records_total: usize,
    pub decoded: usize,
}

// ---------------------------------------------------------------------------
// Candidate machinery
// ---------------------------------------------------------------------------

/// A hypothesis for one record: a complete instruction form.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub form: DecodedForm,
}

/// Predicted observable effect of a candidate under a known before-state.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Effect {
    /// Expected r3..r15 after the instruction.
    regs: [u32; 13],
    /// Expected arithmetic flag bits.
    flags: u32,
    /// Expected byte writes (address, value).
    writes: Vec<(u32, u8)>,
    /// Expected next PC when the candidate controls it.
    pc: Option<u32>,
}

fn seeded_read(scratch: &ScratchLayout, addr: u32, width: Width) -> Option<u32> {
    match width {
        Width::Byte => scratch.seed_byte(addr).map(|b| b as u32),
        _ => {
            let a = addr & !1;
            let lo = scratch.seed_byte(a)?;
            let hi = scratch.seed_byte(a + 1)?;
            Some(lo as u32 | (hi as u32) << 8)
        }
    }
}

/// Compute the full expected effect of a candidate given the before-state of
/// a seeded run. Returns None when some operand value cannot be known.
fn expected_effect(c: &Candidate, before: &[u32; 16], scratch: &ScratchLayout) -> Option<Effect> {
    let form = &c.form;
    let width = form.width;
    let sr0 = before[SR.index()];
    let mut regs = [0u32; 13];
    regs.copy_from_slice(&before[3..16]);
    let reg_get = |rs: &[u32; 13], r: Reg| -> u32 {
        match r.index() {
            i if i >= 3 => rs[i - 3],
            i => before[i],
        }
    };
    let set_gpr = |rs: &mut [u32; 13], r: Reg, v: u32| {
        if r.index() >= 3 {
            rs[r.index() - 3] = v;
        }
    };
    let operand_addr = |rs: &[u32; 13], op: &Operand| -> Option<u32> {
        match op {
            Operand::Indirect(r) | Operand::IndirectInc(r) => Some(reg_get(rs, *r) & 0xFFFF),
            Operand::Indexed { reg, offset } => {
                Some(((reg_get(rs, *reg) & 0xFFFF) as i64 + *offset as i64) as u32 & 0xFFFF)
            }
            _ => None,
        }
    };

    if form.mnemonic.is_jump() {
        let taken = jump_taken(form.mnemonic, sr0);
        return Some(Effect {
            regs,
            flags: sr0 & FLAG_MASK,
            writes: Vec::new(),
            pc: if taken { form.jump_target } else { None },
        });
    }

    match form.mnemonic {
        m if m.is_two_op() => {
            let src = form.src.as_ref()?;
            let dst = form.dst.as_ref()?;
            let sv = match src {
                Operand::Reg(r) => reg_get(&regs, *r) & width.mask(),
                Operand::Imm { value, .. } => value & width.mask(),
                Operand::Symbolic { .. } | Operand::Absolute { .. } => return None,
                _ => {
                    let a = operand_addr(&regs, src)?;
                    seeded_read(scratch, a, width)?
                }
            };
            if let Operand::IndirectInc(r) = src {
                let next = (reg_get(&regs, *r) + width.step()) & 0xF_FFFF;
                set_gpr(&mut regs, *r, next);
            }
            match dst {
                Operand::Reg(d) if *d == SR || *d == SP => None,
                Operand::Reg(d) => {
                    let old = reg_get(&regs, *d) & width.mask();
                    let (res, sr) = apply_two_op(m, width, sv, old, sr0);
                    let mut pc = None;
                    if let Some(v) = res {
                        if *d == PC {
                            pc = Some(v & 0xFFFE);
                        } else {
                            set_gpr(&mut regs, *d, v & width.mask());
                        }
                    }
                    Some(Effect {
                        regs,
                        flags: sr & FLAG_MASK,
                        writes: Vec::new(),
                        pc,
                    })
                }
                Operand::Indexed { .. } => {
                    let a = operand_addr(&regs, dst)?;
                    let old = seeded_read(scratch, a, width)?;
                    let (res, sr) = apply_two_op(m, width, sv, old, sr0);
                    let mut writes = Vec::new();
                    if let Some(v) = res {
                        match width {
                            Width::Byte => writes.push((a, v as u8)),
                            _ => {
                                writes.push((a & !1, v as u8));
                                writes.push(((a & !1) + 1, (v >> 8) as u8));
                            }
                        }
                    }
                    Some(Effect {
                        regs,
                        flags: sr & FLAG_MASK,
                        writes,
                        pc: None,
                    })
                }
                _ => None,
            }
        }
        Mnemonic::Rrc | Mnemonic::Rra | Mnemonic::Swpb | Mnemonic::Sxt => {
            let Some(Operand::Reg(d)) = form.src else {
                return None;
            };
            if d == SR || d == SP || d == PC {
                return None;
            }
            let old = reg_get(&regs, d) & width.mask();
            let (res, sr) = apply_one_op(form.mnemonic, width, old, sr0);
            set_gpr(&mut regs, d, res);
            Some(Effect {
                regs,
                flags: sr & FLAG_MASK,
                writes: Vec::new(),
                pc: None,
            })
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Check {
    Consistent,
    Inconsistent,
    /// Cannot be fully evaluated against this observation (unknown memory).
    Unknown,
}

fn check_candidate(c: &Candidate, obs: &Observation, scratch: &ScratchLayout) -> Check {
    if obs.seeded {
        let Some(effect) = expected_effect(c, &obs.before, scratch) else {
            return check_against_trace(c, obs);
        };
        for (r, want) in effect.regs.iter().enumerate() {
            if obs.after[r + 3] & 0xF_FFFF != want & 0xF_FFFF {
                return Check::Inconsistent;
            }
        }
        if obs.sr_after() & FLAG_MASK != effect.flags {
            return Check::Inconsistent;
        }
        if let Some(pc) = effect.pc {
            if obs.after[PC.index()] & 0xFFFE != pc & 0xFFFE {
                return Check::Inconsistent;
            }
        }
        if let Some(delta) = &obs.mem_delta {
            // Writes of the seed value itself are invisible in the delta.
            let mut want: Vec<(u32, u8, u8)> = effect
                .writes
                .iter()
                .filter_map(|(a, v)| {
                    scratch
                        .seed_byte(*a)
                        .filter(|s| s != v)
                        .map(|s| (*a, s, *v))
                })
                .collect();
            want.sort_by_key(|(a, _, _)| *a);
            let mut got = delta.clone();
            got.sort_by_key(|(a, _, _)| *a);
            if want != got {
                return Check::Inconsistent;
            }
        }
        return Check::Consistent;
    }
    check_against_trace(c, obs)
}

/// Partial consistency check for trace occurrences, where pointed-to memory
/// is unknown: register side effects and flag discipline only.
fn check_against_trace(c: &Candidate, obs: &Observation) -> Check {
    let form = &c.form;
    let width = form.width;
    let mut expect = obs.before;
    let mut evaluable = true;

    if form.mnemonic.is_jump() {
        return Check::Unknown;
    }
    if !form.mnemonic.is_two_op()
        && !matches!(
            form.mnemonic,
            Mnemonic::Rrc | Mnemonic::Rra | Mnemonic::Swpb | Mnemonic::Sxt
        )
    {
        return Check::Unknown;
    }

    let src = match form.src {
        Some(s) => s,
        None => return Check::Unknown,
    };
    // Autoincrement advance is trace-visible.
    if let Operand::IndirectInc(r) = src {
        expect[r.index()] = (expect[r.index()] + width.step()) & 0xF_FFFF;
    }
    let sv = match src {
        Operand::Reg(r) => Some(obs.before[r.index()] & width.mask()),
        Operand::Imm { value, .. } => Some(value & width.mask()),
        _ => None,
    };
    let flags_preserving = matches!(form.mnemonic, Mnemonic::Mov | Mnemonic::Bic | Mnemonic::Bis);
    match form.dst {
        Some(Operand::Reg(d)) if d != PC && d != SR && d != SP => {
            let old = obs.before[d.index()] & width.mask();
            match sv {
                Some(sv) => {
                    let (res, sr) = apply_two_op(form.mnemonic, width, sv, old, obs.sr_before());
                    if let Some(v) = res {
                        expect[d.index()] = v;
                    }
                    if obs.sr_after() & FLAG_MASK != sr & FLAG_MASK {
                        return Check::Inconsistent;
                    }
                }
                None => {
                    // Memory source: the loaded value is unknowable, but a
                    // flag-preserving op must leave SR alone and byte-width
                    // destinations clear the high bits.
                    expect[d.index()] = obs.after[d.index()];
                    if flags_preserving
                        && obs.sr_after() & FLAG_MASK != obs.sr_before() & FLAG_MASK
                    {
                        return Check::Inconsistent;
                    }
                    if width == Width::Byte && obs.after[d.index()] & 0xF_FF00 != 0 {
                        return Check::Inconsistent;
                    }
                    evaluable = false;
                }
            }
        }
        Some(Operand::Indexed { .. })
        | Some(Operand::Symbolic { .. })
        | Some(Operand::Absolute { .. }) => {
            if flags_preserving && obs.sr_after() & FLAG_MASK != obs.sr_before() & FLAG_MASK {
                return Check::Inconsistent;
            }
            evaluable = false;
        }
        Some(Operand::Reg(d)) if d == PC => {
            evaluable = false;
        }
        None => match src {
            Operand::Reg(d) if d != PC && d != SR && d != SP => {
                let old = obs.before[d.index()] & width.mask();
                let (res, sr) = apply_one_op(form.mnemonic, width, old, obs.sr_before());
                expect[d.index()] = res;
                if obs.sr_after() & FLAG_MASK != sr & FLAG_MASK {
                    return Check::Inconsistent;
                }
            }
            _ => return Check::Unknown,
        },
        _ => return Check::Unknown,
    }
    for (r, want) in expect.iter().enumerate().take(16).skip(3) {
        if obs.after[r] != *want {
            return Check::Inconsistent;
        }
    }
    if evaluable {
        Check::Consistent
    } else {
        Check::Unknown
    }
}

/// Keep candidates consistent with the observed status-bit transitions and
/// register effects of every observation.
pub fn status_bit_refine(
    candidates: Vec<Candidate>,
    observations: &[Observation],
    scratch: &ScratchLayout,
) -> Vec<Candidate> {
    candidates
        .into_iter()
        .filter(|c| {
            observations
                .iter()
                .all(|o| check_candidate(c, o, scratch) != Check::Inconsistent)
        })
        .collect()
}

/// Behavioral fingerprint for collapsing alias encodings (the constant
/// generator makes e.g. one decrement expressible two ways).
fn fingerprint(c: &Candidate) -> Option<Vec<u64>> {
    let form = &c.form;
    if !form.mnemonic.is_two_op() {
        return None;
    }
    let (Some(Operand::Imm { value, .. }), Some(dst)) = (form.src, form.dst) else {
        return None;
    };
    let samples = [
        0u32, 1, 2, 0x7FFF, 0x8000, 0xFFFE, 0xFFFF, 0x1234, 0xA5A5, 0x00FF,
    ];
    let mut out = Vec::new();
    for &old in &samples {
        for sr in [0, sr_bits::C] {
            let (r, f) = apply_two_op(form.mnemonic, form.width, value, old, sr);
            out.push(((r.unwrap_or(0xF_FFFF) as u64) << 32) | f as u64);
        }
    }
    out.push(match dst {
        Operand::Reg(r) => r.0 as u64,
        _ => 0xFF,
    });
    Some(out)
}

/// Preference order for the canonical representative of an alias class.
fn alias_rank(c: &Candidate) -> u32 {
    use Mnemonic::*;
    if let (Some(Operand::Imm { value, cg: true }), Some(_)) = (c.form.src, c.form.dst) {
        return match (c.form.mnemonic, value) {
            (Sub, 1) | (Sub, 2) => 0, // DEC / DECD
            (Add, 1) | (Add, 2) => 0, // INC / INCD
            (Mov, 0) => 0,            // CLR
            (Cmp, 0) => 0,            // TST
            (Xor, 0xFFFF) => 0,       // INV
            _ => 1,
        };
    }
    2
}

/// Collapse behaviorally identical candidates into one canonical form.
fn collapse_equivalents(mut candidates: Vec<Candidate>) -> Vec<Candidate> {
    if candidates.len() < 2 {
        return candidates;
    }
    let mut groups: BTreeMap<String, Vec<Candidate>> = BTreeMap::new();
    for c in candidates.drain(..) {
        let key = match fingerprint(&c) {
            Some(fp) => format!("{:?}|{:?}|{}", fp, c.form.width, c.form.size_bytes),
            None => format!("self|{:?}", c.form),
        };
        groups.entry(key).or_default().push(c);
    }
    groups
        .into_values()
        .map(|mut g| {
            g.sort_by_key(|c| (alias_rank(c), format!("{:?}", c.form)));
            g.into_iter().next().unwrap()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Per-address aggregation and control flow
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AddressEvidence {
    pub addr: u32,
    pub cycle_count: u32,
    pub linear_size: Option<u8>,
    pub next_pcs: Vec<u32>,
    pub observations: Vec<Observation>,
    pub record_indexes: Vec<usize>,
    pub conflict: bool,
}

/// Merge per-execution records by address, attaching before/after register
/// views. Loop iterations become additional observations of one address.
pub fn merge_by_address(
    trace: &TraceDb,
    records: &[InstructionRecord],
    cfg: &Phase2Config,
) -> Vec<AddressEvidence> {
    let mut initial = [0u32; 16];
    initial[PC.index()] = cfg.start_addr;
    initial[SP.index()] = cfg.initial_sp;
    initial[SR.index()] = cfg.initial_sr;
    for (k, v) in cfg.initial_regs.iter().enumerate() {
        initial[4 + k] = *v;
    }
    let mut map: BTreeMap<u32, AddressEvidence> = BTreeMap::new();
    for (idx, rec) in records.iter().enumerate() {
        if !rec.complete {
            continue;
        }
        let before = match rec.dump_before {
            Some(i) => trace.dumps[i].r,
            None => initial,
        };
        let after = trace.dumps[rec.dump_after].r;
        let entry = map.entry(rec.addr).or_insert_with(|| AddressEvidence {
            addr: rec.addr,
            cycle_count: rec.cycle_count,
            linear_size: rec.linear_size(),
            next_pcs: Vec::new(),
            observations: Vec::new(),
            record_indexes: Vec::new(),
            conflict: false,
        });
        if entry.cycle_count != rec.cycle_count {
            entry.conflict = true;
            entry.cycle_count = entry.cycle_count.min(rec.cycle_count);
        }
        match (entry.linear_size, rec.linear_size()) {
            (Some(a), Some(b)) if a != b => entry.conflict = true,
            (None, Some(b)) => entry.linear_size = Some(b),
            _ => {}
        }
        entry.next_pcs.push(rec.next_pc);
        entry.record_indexes.push(idx);
        entry.observations.push(Observation {
            before,
            after,
            mem_delta: None,
            seeded: false,
        });
    }
    map.into_values().collect()
}

/// Stack- and PC-based structural classification.
pub fn detect_control_flow(ev: &AddressEvidence) -> RecordKind {
    let linear = |next: u32| {
        let d = next as i64 - ev.addr as i64;
        (2..=8).contains(&d) && d % 2 == 0
    };
    let mut kinds = Vec::new();
    for o in &ev.observations {
        let next = o.after[PC.index()];
        let discont = !linear(next);
        let kind = match (o.sp_delta(), discont) {
            (0, false) => RecordKind::DataOp,
            (0, true) => RecordKind::Jump,
            (-2, true) => RecordKind::Call,
            (-2, false) => RecordKind::Push,
            (2, false) => RecordKind::Pop,
            (2, true) => RecordKind::Ret,
            (4, true) => RecordKind::Reti,
            _ => RecordKind::StackAdjust,
        };
        kinds.push(kind);
    }
    // A conditional jump mixes taken (discontinuity) and fall-through
    // occurrences.
    if kinds.contains(&RecordKind::Jump)
        && kinds
            .iter()
            .all(|k| matches!(k, RecordKind::Jump | RecordKind::DataOp))
    {
        return RecordKind::Jump;
    }
    kinds[0]
}

/// Condition inference for jump records: conditions consistent with every
/// (flags, taken) pair survive.
pub fn infer_jump(ev: &AddressEvidence) -> (Vec<Mnemonic>, Option<u32>) {
    use Mnemonic::*;
    let mut target = None;
    let mut evidence = Vec::new();
    for o in &ev.observations {
        let next = o.after[PC.index()];
        let taken = next as i64 - ev.addr as i64 != 2;
        if taken {
            match target {
                None => target = Some(next),
                Some(t) if t != next => return (Vec::new(), None),
                _ => {}
            }
        }
        evidence.push((o.sr_before(), taken));
    }
    let conds = [Jnz, Jz, Jnc, Jc, Jn, Jge, Jl, Jmp];
    let survivors = conds
        .into_iter()
        .filter(|c| {
            evidence
                .iter()
                .all(|(sr, taken)| jump_taken(*c, *sr) == *taken)
        })
        .collect();
    (survivors, target)
}

// ---------------------------------------------------------------------------
// Candidate generation
// ---------------------------------------------------------------------------

const GPRS: [u8; 12] = [4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15];
const CG_VALUES: [u32; 6] = [0, 1, 2, 4, 8, 0xFFFF];
const TWO_OPS: [Mnemonic; 12] = [
    Mnemonic::Mov,
    Mnemonic::Add,
    Mnemonic::Addc,
    Mnemonic::Subc,
    Mnemonic::Sub,
    Mnemonic::Cmp,
    Mnemonic::Dadd,
    Mnemonic::Bit,
    Mnemonic::Bic,
    Mnemonic::Bis,
    Mnemonic::Xor,
    Mnemonic::And,
];
/// Indexed-operand displacements the solver searches; probe pointers sit
/// mid-window so small positive and negative offsets stay observable.
const SEARCH_OFFSETS: [i32; 9] = [0, 2, 4, 6, 8, -2, -4, -6, -8];

fn widths() -> [Width; 2] {
    [Width::Word, Width::Byte]
}

fn push_sized(out: &mut Vec<Candidate>, ev: &AddressEvidence, form: DecodedForm) {
    if let Some(sz) = ev.linear_size {
        if form.size_bytes != sz {
            return;
        }
    }
    if form.cycles != ev.cycle_count {
        return;
    }
    out.push(Candidate { form });
}

/// Register- and generator-source hypotheses over register destinations.
fn reg_dst_candidates(ev: &AddressEvidence, dst_regs: &[Reg], src_regs: &[Reg]) -> Vec<Candidate> {
    let mut out = Vec::new();
    for &d in dst_regs {
        for width in widths() {
            for op in TWO_OPS {
                for &s in src_regs {
                    push_sized(
                        &mut out,
                        ev,
                        DecodedForm::two_op(op, width, Operand::Reg(s), Operand::Reg(d)),
                    );
                }
                for v in CG_VALUES {
                    push_sized(
                        &mut out,
                        ev,
                        DecodedForm::two_op(
                            op,
                            width,
                            Operand::Imm { value: v, cg: true },
                            Operand::Reg(d),
                        ),
                    );
                }
            }
            for op in [Mnemonic::Rrc, Mnemonic::Rra, Mnemonic::Swpb, Mnemonic::Sxt] {
                if width == Width::Byte && matches!(op, Mnemonic::Swpb | Mnemonic::Sxt) {
                    continue;
                }
                push_sized(&mut out, ev, DecodedForm::one_op(op, width, Operand::Reg(d)));
            }
        }
    }
    out
}

/// Memory-source hypotheses over a register destination: indirect,
/// autoincrement and window-sized indexed forms, every operation.
fn mem_src_candidates(ev: &AddressEvidence, dst: Reg) -> Vec<Candidate> {
    let mut out = Vec::new();
    for width in widths() {
        for &sidx in &GPRS {
            let s = Reg(sidx);
            for op in TWO_OPS {
                push_sized(
                    &mut out,
                    ev,
                    DecodedForm::two_op(op, width, Operand::Indirect(s), Operand::Reg(dst)),
                );
                push_sized(
                    &mut out,
                    ev,
                    DecodedForm::two_op(op, width, Operand::IndirectInc(s), Operand::Reg(dst)),
                );
                for off in SEARCH_OFFSETS {
                    push_sized(
                        &mut out,
                        ev,
                        DecodedForm::two_op(
                            op,
                            width,
                            Operand::Indexed { reg: s, offset: off },
                            Operand::Reg(dst),
                        ),
                    );
                }
            }
        }
    }
    out
}

/// Hypotheses that write memory: any source form into window-sized indexed
/// destinations.
fn mem_dst_candidates(ev: &AddressEvidence) -> Vec<Candidate> {
    let store_ops = [
        Mnemonic::Mov,
        Mnemonic::Add,
        Mnemonic::Sub,
        Mnemonic::Xor,
        Mnemonic::And,
        Mnemonic::Bis,
        Mnemonic::Bic,
        Mnemonic::Addc,
        Mnemonic::Subc,
        Mnemonic::Dadd,
    ];
    let mut out = Vec::new();
    for width in widths() {
        for &didx in &GPRS {
            let d = Reg(didx);
            for doff in SEARCH_OFFSETS {
                let dst = Operand::Indexed {
                    reg: d,
                    offset: doff,
                };
                for op in store_ops {
                    for &sidx in &GPRS {
                        push_sized(
                            &mut out,
                            ev,
                            DecodedForm::two_op(op, width, Operand::Reg(Reg(sidx)), dst),
                        );
                    }
                    for v in CG_VALUES {
                        push_sized(
                            &mut out,
                            ev,
                            DecodedForm::two_op(
                                op,
                                width,
                                Operand::Imm { value: v, cg: true },
                                dst,
                            ),
                        );
                    }
                    for &sidx in &GPRS {
                        let s = Reg(sidx);
                        push_sized(
                            &mut out,
                            ev,
                            DecodedForm::two_op(op, width, Operand::Indirect(s), dst),
                        );
                        push_sized(
                            &mut out,
                            ev,
                            DecodedForm::two_op(op, width, Operand::IndirectInc(s), dst),
                        );
                        for soff in SEARCH_OFFSETS {
                            push_sized(
                                &mut out,
                                ev,
                                DecodedForm::two_op(
                                    op,
                                    width,
                                    Operand::Indexed {
                                        reg: s,
                                        offset: soff,
                                    },
                                    dst,
                                ),
                            );
                        }
                    }
                }
            }
        }
    }
    out
}

/// Register- and memory-to-PC branch hypotheses.
fn pc_dst_candidates(ev: &AddressEvidence) -> Vec<Candidate> {
    let mut out = Vec::new();
    for &sidx in &GPRS {
        let s = Reg(sidx);
        push_sized(
            &mut out,
            ev,
            DecodedForm::two_op(Mnemonic::Mov, Width::Word, Operand::Reg(s), Operand::Reg(PC)),
        );
        push_sized(
            &mut out,
            ev,
            DecodedForm::two_op(
                Mnemonic::Mov,
                Width::Word,
                Operand::Indirect(s),
                Operand::Reg(PC),
            ),
        );
        push_sized(
            &mut out,
            ev,
            DecodedForm::two_op(
                Mnemonic::Mov,
                Width::Word,
                Operand::IndirectInc(s),
                Operand::Reg(PC),
            ),
        );
        for off in SEARCH_OFFSETS {
            push_sized(
                &mut out,
                ev,
                DecodedForm::two_op(
                    Mnemonic::Mov,
                    Width::Word,
                    Operand::Indexed { reg: s, offset: off },
                    Operand::Reg(PC),
                ),
            );
        }
    }
    out
}

/// Immediate-source hypotheses with the constant solved from an observation
/// by inverting the operation.
// TODO: AND constants are not uniquely invertible from one observation;
// accumulating bit constraints across all probes would recover them and
// lift AND-immediate records from UNKNOWN to AMBIGUOUS.
fn immediate_candidates(ev: &AddressEvidence, obs: &[Observation]) -> Vec<Candidate> {
    let mut out = Vec::new();
    let Some(first) = obs.first() else {
        return out;
    };
    let mut changed = Vec::new();
    for r in 4..16 {
        if first.before[r] != first.after[r] {
            changed.push(r);
        }
    }
    if changed.len() != 1 {
        return out;
    }
    let d = changed[0];
    for width in widths() {
        let old = first.before[d] & width.mask();
        let new = first.after[d] & width.mask();
        let carry = (first.sr_before() & sr_bits::C != 0) as u32;
        let mask = width.mask();
        let solves: [(Mnemonic, Option<u32>); 7] = [
            (Mnemonic::Mov, Some(new)),
            (Mnemonic::Add, Some(new.wrapping_sub(old) & mask)),
            (Mnemonic::Sub, Some(old.wrapping_sub(new) & mask)),
            (Mnemonic::Xor, Some(old ^ new)),
            (
                Mnemonic::Addc,
                Some(new.wrapping_sub(old).wrapping_sub(carry) & mask),
            ),
            (Mnemonic::Bis, (old | new == new).then_some(new & !old)),
            (Mnemonic::Bic, (old & new == new).then_some(old & !new)),
        ];
        for (op, c) in solves {
            let Some(c) = c else { continue };
            push_sized(
                &mut out,
                ev,
                DecodedForm::two_op(
                    op,
                    width,
                    Operand::Imm {
                        value: c,
                        cg: false,
                    },
                    Operand::Reg(Reg(d as u8)),
                ),
            );
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Probe planning
// ---------------------------------------------------------------------------

fn probe_request(scratch: &ScratchLayout, layout: u8, carry: bool) -> ProbeRequest {
    ProbeRequest {
        target: 0,
        timer_compare: 1,
        regs: scratch.probe_regs(layout),
        sp: scratch.probe_sp(),
        carry,
    }
}

/// Deterministic value-pattern family for adaptive disambiguation of
/// register-only candidate sets. The first trials lean on the sentinel set
/// {0x0000, 0xFFFF, 0xFE00, 0xA5A5}; later trials mix the register index
/// hard so that no two register pairs share a value relationship.
fn adaptive_values(trial: u32) -> [u32; 12] {
    const SENTINELS: [u32; 4] = [0x0000, 0xFFFF, 0xFE00, 0xA5A5];
    let base = SENTINELS[(trial % 4) as usize];
    let mut out = [0u32; 12];
    for (k, v) in out.iter_mut().enumerate() {
        let mut h = (k as u32 + 1)
            .wrapping_mul(0x9E37_79B1)
            .wrapping_add(trial.wrapping_mul(0x85EB_CA6B));
        h ^= h >> 13;
        h = h.wrapping_mul(0xC2B2_AE35);
        h ^= h >> 16;
        *v = (base ^ h) & 0xFFFF;
    }
    out
}

fn outcome_fingerprint(
    c: &Candidate,
    regs: &[u32; 12],
    sp: u32,
    carry: bool,
    scratch: &ScratchLayout,
) -> String {
    let mut before = [0u32; 16];
    before[SP.index()] = sp;
    before[SR.index()] = sr_bits::GIE | if carry { sr_bits::C } else { 0 };
    for (k, v) in regs.iter().enumerate() {
        before[4 + k] = *v;
    }
    match expected_effect(c, &before, scratch) {
        Some(e) => format!("{:?}", e),
        None => format!("opaque:{:?}", c.form),
    }
}

/// Registers any candidate uses as a memory pointer; these must stay aimed
/// at scratch during adaptive probes so stores stay observable and harmless.
fn pointer_regs(cands: &[Candidate]) -> Vec<Reg> {
    let mut out = Vec::new();
    let mut add = |r: Reg| {
        if !out.contains(&r) {
            out.push(r);
        }
    };
    for c in cands {
        for op in [c.form.src, c.form.dst].into_iter().flatten() {
            match op {
                Operand::Indirect(r) | Operand::IndirectInc(r) => add(r),
                Operand::Indexed { reg, .. } => add(reg),
                _ => {}
            }
        }
    }
    out
}

/// Choose the probe whose worst-case surviving candidate class is smallest.
/// Candidate sets that use memory keep their pointer registers on scratch
/// layouts while the remaining registers take sentinel values.
fn plan_split(
    cands: &[Candidate],
    scratch: &ScratchLayout,
    next_layout: &mut u8,
) -> Option<([u32; 12], bool)> {
    let sp = scratch.probe_sp();
    let pointers = pointer_regs(cands);
    // (largest class, -class count) minimized.
    let mut best: Option<((usize, i64), [u32; 12], bool)> = None;
    let consider = |regs: [u32; 12], carry: bool, best: &mut Option<((usize, i64), [u32; 12], bool)>| {
        let mut classes: BTreeMap<String, usize> = BTreeMap::new();
        for c in cands {
            *classes
                .entry(outcome_fingerprint(c, &regs, sp, carry, scratch))
                .or_default() += 1;
        }
        if classes.len() < 2 {
            return;
        }
        let largest = classes.values().copied().max().unwrap_or(cands.len());
        let key = (largest, -(classes.len() as i64));
        if best.as_ref().map(|(b, _, _)| key < *b).unwrap_or(true) {
            *best = Some((key, regs, carry));
        }
    };
    if pointers.is_empty() {
        for trial in 0..256u32 {
            for carry in [false, true] {
                consider(adaptive_values(trial), carry, &mut best);
            }
        }
    } else {
        // Hybrid patterns: pointers on fresh scratch layouts, everything
        // else on sentinel values.
        let start = *next_layout;
        for layout in [start, start + 1] {
            let base = scratch.probe_regs(layout);
            for trial in 0..64u32 {
                let values = adaptive_values(trial);
                for carry in [false, true] {
                    let mut regs = [0u32; 12];
                    for k in 0..12 {
                        let r = Reg(4 + k as u8);
                        regs[k] = if pointers.contains(&r) {
                            base[k]
                        } else {
                            values[k]
                        };
                    }
                    consider(regs, carry, &mut best);
                }
            }
        }
        if best.is_some() {
            *next_layout = next_layout.wrapping_add(1);
        }
    }
    best.map(|(_, regs, carry)| (regs, carry))
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

fn changed_gprs(ev: &AddressEvidence) -> Vec<Reg> {
    let mut set = Vec::new();
    for o in &ev.observations {
        for r in 4..16 {
            if o.before[r] != o.after[r] && !set.contains(&Reg(r as u8)) {
                set.push(Reg(r as u8));
            }
        }
    }
    set
}

fn describe_candidates(cands: &[Candidate]) -> Vec<String> {
    let mut v: Vec<String> = cands.iter().map(|c| isa::display_form(&c.form)).collect();
    v.sort();
    v.dedup();
    v
}

/// Classify register-mode operations from trace evidence alone (the first
/// sorting pass). Probe-backed refinement happens in `reconstruct`.
pub fn classify_register_mode(ev: &AddressEvidence, scratch: &ScratchLayout) -> Vec<Candidate> {
    let changed = changed_gprs(ev);
    let dst_regs: Vec<Reg> = if changed.is_empty() {
        GPRS.iter().map(|r| Reg(*r)).collect()
    } else {
        changed
    };
    let srcs: Vec<Reg> = GPRS.iter().map(|r| Reg(*r)).collect();
    let cands = reg_dst_candidates(ev, &dst_regs, &srcs);
    status_bit_refine(cands, &ev.observations, scratch)
}

/// Classify indexed/indirect/PC-destination operations against probe
/// results (the second sorting pass).
pub fn classify_indirect(
    ev: &AddressEvidence,
    probe_obs: &[Observation],
    scratch: &ScratchLayout,
) -> Vec<Candidate> {
    let mut cands = Vec::new();
    if let Some(first) = probe_obs.first() {
        let mut dst_changed = Vec::new();
        for r in 4..16 {
            if first.after[r] != first.before[r] {
                dst_changed.push(Reg(r as u8));
            }
        }
        for d in &dst_changed {
            cands.extend(mem_src_candidates(ev, *d));
        }
        let srcs: Vec<Reg> = GPRS.iter().map(|r| Reg(*r)).collect();
        let dsts = if dst_changed.is_empty() {
            srcs.clone()
        } else {
            dst_changed
        };
        cands.extend(reg_dst_candidates(ev, &dsts, &srcs));
        if first.mem_delta.as_ref().is_some_and(|d| !d.is_empty()) {
            cands.extend(mem_dst_candidates(ev));
        }
        cands.extend(pc_dst_candidates(ev));
        cands.extend(immediate_candidates(ev, probe_obs));
    }
    let mut all: Vec<Observation> = ev.observations.clone();
    all.extend(probe_obs.iter().cloned());
    status_bit_refine(cands, &all, scratch)
}

/// Run the full reconstruction: boundaries, structural classification,
/// register-mode sort, probe-backed indirect sort, status-bit refinement and
/// the confidence policy.
pub fn reconstruct(
    trace: &TraceDb,
    cfg: &Phase2Config,
    mut probes: Option<&mut dyn ProbeExecutor>,
) -> Result<ReconstructionReport, AnalysisError> {
    let records = segment_boundaries(trace, cfg.start_addr)?;
    let merged = merge_by_address(trace, &records, cfg);
    let scratch = probes
        .as_ref()
        .map(|p| p.scratch())
        .unwrap_or(ScratchLayout::new(0x1C00));
    let mut out = Vec::new();
    for ev in &merged {
        let kind = detect_control_flow(ev);
        let reborrow: Option<&mut dyn ProbeExecutor> = match probes {
            Some(ref mut p) => Some(&mut **p),
            None => None,
        };
        let rec = match kind {
            RecordKind::Jump => classify_jump(ev),
            RecordKind::Call
            | RecordKind::Push
            | RecordKind::Pop
            | RecordKind::Ret
            | RecordKind::Reti
            | RecordKind::StackAdjust => classify_stack(ev, kind, reborrow, &scratch),
            RecordKind::DataOp => classify_data(ev, reborrow, &scratch, cfg.probe_budget),
        };
        out.push(rec);
    }
    let decoded = out
        .iter()
        .filter(|r| r.confidence == Confidence::Decoded)
        .count();
    Ok(ReconstructionReport {
        image_id: trace.image_id.clone(),
        records_total: out.len(),
        decoded,
        instructions: out,
    })
}

fn base_rec(ev: &AddressEvidence, kind: RecordKind) -> ReconstructedInstruction {
    ReconstructedInstruction {
        addr: ev.addr,
        size_bytes: ev.linear_size,
        cycle_count: ev.cycle_count,
        occurrences: ev.observations.len(),
        kind,
        confidence: Confidence::Unknown,
        form: None,
        alternatives: Vec::new(),
        note: String::new(),
    }
}

fn classify_jump(ev: &AddressEvidence) -> ReconstructedInstruction {
    let mut rec = base_rec(ev, RecordKind::Jump);
    rec.size_bytes = Some(2);
    let (conds, target) = infer_jump(ev);
    match (conds.len(), target) {
        (0, _) => {
            rec.note = "inconsistent branch evidence".into();
        }
        (1, Some(t)) => {
            rec.confidence = Confidence::Decoded;
            rec.form = Some(DecodedForm::jump(conds[0], t));
        }
        (_, Some(t)) => {
            rec.confidence = Confidence::Ambiguous;
            rec.alternatives = conds
                .iter()
                .map(|c| format!("{} 0x{:04X}", c.name(), t))
                .collect();
            rec.note = "condition not separated by observed flag states".into();
        }
        (_, None) => {
            rec.note = "jump never taken with a visible target".into();
        }
    }
    rec
}

fn probe_observation(
    req: &ProbeRequest,
    dump: &RegisterDump,
    mem_delta: Vec<(u32, u8, u8)>,
) -> Observation {
    let mut before = [0u32; 16];
    before[SP.index()] = req.sp;
    before[SR.index()] = sr_bits::GIE | if req.carry { sr_bits::C } else { 0 };
    for (k, v) in req.regs.iter().enumerate() {
        before[4 + k] = *v;
    }
    Observation {
        before,
        after: dump.r,
        mem_delta: Some(mem_delta),
        seeded: true,
    }
}

/// Stack-shaped records: calls, pushes, pops, returns. Probes pin the exact
/// operand when available.
fn classify_stack(
    ev: &AddressEvidence,
    kind: RecordKind,
    probes: Option<&mut dyn ProbeExecutor>,
    scratch: &ScratchLayout,
) -> ReconstructedInstruction {
    let mut rec = base_rec(ev, kind);
    let Some(exec) = probes else {
        rec.note = "stack-shaped record; no probes available".into();
        return rec;
    };
    let mut reqs = vec![
        probe_request(scratch, 0, false),
        probe_request(scratch, 1, true),
    ];
    for r in &mut reqs {
        r.target = ev.addr;
        r.timer_compare = ev.cycle_count.max(1) as u64;
    }
    let mut obs = Vec::new();
    for req in &reqs {
        let o = exec.probe(req);
        if let Some(dump) = &o.dump {
            obs.push(probe_observation(req, dump, o.mem_delta.clone()));
        }
    }
    if obs.len() < 2 {
        rec.note = "probe runs faulted".into();
        return rec;
    }
    // Interrupt-return signature: SP rises by four and both the status
    // register and the return PC read back as the words the probe seeded on
    // the stack. Checked for the plain +4 adjustment shape too, since a
    // crafted frame can return to the next address and look sequential.
    let reti_signature = |obs: &[Observation]| {
        obs.iter().all(|o| {
            let sp0 = o.before[SP.index()] & 0xFFFF;
            o.sp_delta() == 4
                && seeded_read(scratch, sp0, Width::Word)
                    .map(|v| o.after[SR.index()] == v)
                    .unwrap_or(false)
                && seeded_read(scratch, sp0 + 2, Width::Word)
                    .map(|v| o.after[PC.index()] & 0xFFFE == v & 0xFFFE)
                    .unwrap_or(false)
        })
    };
    match kind {
        RecordKind::Reti => {
            if reti_signature(&obs) {
                rec.confidence = Confidence::Decoded;
                rec.form = Some(DecodedForm::reti());
                rec.size_bytes = Some(2);
                rec.kind = RecordKind::Reti;
            } else {
                rec.note = "stack frame did not read back as an interrupt return".into();
            }
        }
        RecordKind::Ret => {
            let ok = obs.iter().all(|o| {
                o.sp_delta() == 2
                    && scratch
                        .identify_word((o.after[PC.index()] & 0xFFFE) as u16)
                        .map(|a| a == (o.before[SP.index()] & 0xFFFF))
                        .unwrap_or(false)
            });
            if ok {
                rec.confidence = Confidence::Decoded;
                rec.form = Some(DecodedForm::two_op(
                    Mnemonic::Mov,
                    Width::Word,
                    Operand::IndirectInc(SP),
                    Operand::Reg(PC),
                ));
                rec.size_bytes = Some(2);
            } else {
                rec.note = "pop-to-PC signature not confirmed".into();
            }
        }
        RecordKind::Call => {
            let mut forms = Vec::new();
            let fixed_target = {
                let t0 = obs[0].after[PC.index()];
                obs.iter().all(|o| o.after[PC.index()] == t0).then_some(t0)
            };
            if let Some(t) = fixed_target {
                let form = DecodedForm::one_op(
                    Mnemonic::Call,
                    Width::Word,
                    Operand::Imm {
                        value: t,
                        cg: false,
                    },
                );
                if form.cycles == ev.cycle_count {
                    forms.push(form);
                }
            } else {
                for &sidx in &GPRS {
                    let s = Reg(sidx);
                    if obs
                        .iter()
                        .all(|o| o.after[PC.index()] == (o.before[s.index()] & 0xFFFE))
                    {
                        forms.push(DecodedForm::one_op(
                            Mnemonic::Call,
                            Width::Word,
                            Operand::Reg(s),
                        ));
                    }
                }
            }
            match forms.len() {
                1 => {
                    rec.confidence = Confidence::Decoded;
                    rec.size_bytes = Some(forms[0].size_bytes);
                    rec.form = Some(forms.remove(0));
                }
                0 => rec.note = "call target not explained".into(),
                _ => {
                    rec.confidence = Confidence::Ambiguous;
                    rec.alternatives = forms.iter().map(isa::display_form).collect();
                }
            }
        }
        RecordKind::Push => {
            let mut forms = Vec::new();
            // Expected visible deltas for pushing `value` at the new SP;
            // bytes that happen to equal the seed stay invisible.
            let push_delta = |at: u32, value: u32, width: Width| -> Vec<(u32, u8, u8)> {
                let mut out = Vec::new();
                let bytes: Vec<(u32, u8)> = match width {
                    Width::Byte => vec![(at, value as u8)],
                    _ => vec![(at, value as u8), (at + 1, (value >> 8) as u8)],
                };
                for (a, v) in bytes {
                    if let Some(seed) = scratch.seed_byte(a) {
                        if seed != v {
                            out.push((a, seed, v));
                        }
                    }
                }
                out
            };
            let matches_all = |value_of: &dyn Fn(&Observation) -> u32, width: Width| {
                obs.iter().all(|o| {
                    let at = o.after[SP.index()] & 0xFFFF;
                    let mut want = push_delta(at, value_of(o) & width.mask(), width);
                    want.sort_by_key(|(a, _, _)| *a);
                    let mut got = o.mem_delta.clone().unwrap_or_default();
                    got.sort_by_key(|(a, _, _)| *a);
                    want == got
                })
            };
            for &sidx in &GPRS {
                let s = Reg(sidx);
                for w in widths() {
                    let f = DecodedForm::one_op(Mnemonic::Push, w, Operand::Reg(s));
                    if f.cycles == ev.cycle_count
                        && matches_all(&|o: &Observation| o.before[s.index()], w)
                    {
                        forms.push(f);
                    }
                }
            }
            if forms.is_empty() {
                // A constant push: recover the value from the first delta.
                let at0 = obs[0].after[SP.index()] & 0xFFFF;
                let delta0 = obs[0].mem_delta.clone().unwrap_or_default();
                let byte_at = |a: u32| {
                    delta0
                        .iter()
                        .find(|(x, _, _)| *x == a)
                        .map(|(_, _, v)| *v)
                        .or_else(|| scratch.seed_byte(a))
                };
                if let (Some(lo), Some(hi)) = (byte_at(at0), byte_at(at0 + 1)) {
                    let v0 = lo as u32 | (hi as u32) << 8;
                    let f = DecodedForm::one_op(
                        Mnemonic::Push,
                        Width::Word,
                        Operand::Imm {
                            value: v0,
                            cg: false,
                        },
                    );
                    if f.cycles == ev.cycle_count && matches_all(&|_| v0, Width::Word) {
                        forms.push(f);
                    }
                }
            }
            match forms.len() {
                1 => {
                    rec.confidence = Confidence::Decoded;
                    rec.size_bytes = Some(forms[0].size_bytes);
                    rec.form = Some(forms.remove(0));
                }
                0 => rec.note = "pushed value not explained".into(),
                _ => {
                    rec.confidence = Confidence::Ambiguous;
                    rec.alternatives = forms.iter().map(isa::display_form).collect();
                }
            }
        }
        RecordKind::Pop => {
            let mut forms = Vec::new();
            for &didx in &GPRS {
                let d = Reg(didx);
                if obs.iter().all(|o| {
                    let sp0 = o.before[SP.index()] & 0xFFFF;
                    seeded_read(scratch, sp0, Width::Word)
                        .map(|v| o.after[d.index()] == v)
                        .unwrap_or(false)
                }) {
                    forms.push(DecodedForm::two_op(
                        Mnemonic::Mov,
                        Width::Word,
                        Operand::IndirectInc(SP),
                        Operand::Reg(d),
                    ));
                }
            }
            if forms.len() == 1 {
                rec.confidence = Confidence::Decoded;
                rec.size_bytes = Some(2);
                rec.form = Some(forms.remove(0));
            } else if !forms.is_empty() {
                rec.confidence = Confidence::Ambiguous;
                rec.alternatives = forms.iter().map(isa::display_form).collect();
            } else {
                rec.note = "popped destination not identified".into();
            }
        }
        RecordKind::StackAdjust => {
            if reti_signature(&obs) {
                rec.confidence = Confidence::Decoded;
                rec.form = Some(DecodedForm::reti());
                rec.size_bytes = Some(2);
                rec.kind = RecordKind::Reti;
            } else {
                let d0 = obs[0].sp_delta();
                if obs.iter().all(|o| o.sp_delta() == d0) {
                    let (m, ma, n) = if d0 < 0 {
                        (Mnemonic::Sub, Mnemonic::Suba, -d0)
                    } else {
                        (Mnemonic::Add, Mnemonic::Adda, d0)
                    };
                    // Offer only forms whose size and cycles fit the record.
                    let mut alts = Vec::new();
                    for (op, width) in [(m, Width::Word), (ma, Width::Addr)] {
                        for cg in [true, false] {
                            if cg && isa::cg_encoding(n as u32 & 0xFFFF).is_none() {
                                continue;
                            }
                            if op == ma && cg {
                                continue;
                            }
                            let f = if op == ma {
                                DecodedForm::addr_op(
                                    op,
                                    Operand::Imm {
                                        value: n as u32,
                                        cg: false,
                                    },
                                    Operand::Reg(SP),
                                )
                            } else {
                                DecodedForm::two_op(
                                    op,
                                    width,
                                    Operand::Imm {
                                        value: n as u32,
                                        cg,
                                    },
                                    Operand::Reg(SP),
                                )
                            };
                            if f.cycles == ev.cycle_count
                                && ev.linear_size.map(|sz| sz == f.size_bytes).unwrap_or(true)
                            {
                                alts.push(format!("{} #{}, SP", op.name(), n));
                            }
                        }
                    }
                    alts.dedup();
                    if alts.is_empty() {
                        rec.note = format!(
                            "stack pointer adjusted by {} with no size-consistent form",
                            d0
                        );
                    } else {
                        rec.confidence = Confidence::Ambiguous;
                        rec.alternatives = alts;
                        rec.note = format!("stack pointer adjusted by {}", d0);
                    }
                } else {
                    rec.note = "inconsistent stack adjustment".into();
                }
            }
        }
        _ => unreachable!(),
    }
    rec
}

fn classify_data(
    ev: &AddressEvidence,
    probes: Option<&mut dyn ProbeExecutor>,
    scratch: &ScratchLayout,
    budget: usize,
) -> ReconstructedInstruction {
    let mut rec = base_rec(ev, RecordKind::DataOp);
    let mut cands = collapse_equivalents(classify_register_mode(ev, scratch));
    let Some(exec) = probes else {
        return finish_data(rec, cands);
    };
    // Structural probes: two pointer layouts, carry varied.
    let mut reqs = vec![
        probe_request(scratch, 0, false),
        probe_request(scratch, 1, true),
    ];
    for r in &mut reqs {
        r.target = ev.addr;
        r.timer_compare = ev.cycle_count.max(1) as u64;
    }
    let mut probe_obs = Vec::new();
    let mut probe_errors = Vec::new();
    for req in &reqs {
        let o = exec.probe(req);
        match (&o.dump, &o.error) {
            (Some(d), _) => probe_obs.push(probe_observation(req, d, o.mem_delta.clone())),
            (None, Some(e)) => probe_errors.push(e.clone()),
            _ => {}
        }
    }
    if probe_obs.is_empty() {
        rec.note = format!("probe runs faulted: {}", probe_errors.join("; "));
        return finish_data(rec, cands);
    }
    let mut all_obs: Vec<Observation> = ev.observations.clone();
    all_obs.extend(probe_obs.iter().cloned());
    cands = status_bit_refine(cands, &all_obs, scratch);
    for c in classify_indirect(ev, &probe_obs, scratch) {
        if !cands.contains(&c) {
            cands.push(c);
        }
    }
    cands = collapse_equivalents(cands);
    // Adaptive disambiguation probes within the remaining budget.
    let mut remaining = budget.saturating_sub(reqs.len());
    let mut next_layout = 2u8;
    while cands.len() > 1 && remaining > 0 {
        let Some((regs, carry)) = plan_split(&cands, scratch, &mut next_layout) else {
            break;
        };
        let mut req = probe_request(scratch, 0, carry);
        req.regs = regs;
        req.target = ev.addr;
        req.timer_compare = ev.cycle_count.max(1) as u64;
        let o = exec.probe(&req);
        remaining -= 1;
        let Some(d) = &o.dump else { break };
        let obs = probe_observation(&req, d, o.mem_delta.clone());
        all_obs.push(obs.clone());
        cands = status_bit_refine(cands, std::slice::from_ref(&obs), scratch);
        cands = collapse_equivalents(cands);
    }
    if cands.is_empty() {
        return unexplained(rec, &probe_obs, &all_obs);
    }
    finish_data(rec, cands)
}

/// Close a record that no in-window hypothesis explains: distinguish the
/// protected-operand shapes for the report.
fn unexplained(
    mut rec: ReconstructedInstruction,
    probe_obs: &[Observation],
    all_obs: &[Observation],
) -> ReconstructedInstruction {
    let mut changed = Vec::new();
    if let Some(first) = probe_obs.first() {
        for r in 4..16 {
            if first.before[r] != first.after[r] {
                changed.push(r);
            }
        }
    }
    let any_flags = all_obs
        .iter()
        .any(|o| o.sr_after() & FLAG_MASK != o.sr_before() & FLAG_MASK);
    rec.confidence = Confidence::Unknown;
    rec.note = match changed.as_slice() {
        [] if any_flags => {
            "status bits change but no destination is visible (protected destination)".into()
        }
        [] => "no observable effect: operands lie in protected memory".into(),
        [d] => format!(
            "R{} takes values from protected memory (symbolic, absolute, or out-of-window indexed source)",
            d
        ),
        _ => "multiple register effects with no consistent explanation".into(),
    };
    rec
}

/// Apply the decode-matrix confidence policy and close the record.
fn finish_data(
    mut rec: ReconstructedInstruction,
    cands: Vec<Candidate>,
) -> ReconstructedInstruction {
    if cands.is_empty() {
        rec.confidence = Confidence::Unknown;
        if rec.note.is_empty() {
            rec.note = "no candidate explains the observations".into();
        }
        return rec;
    }
    if cands.len() == 1 {
        let c = &cands[0];
        if matches!(c.form.src, Some(Operand::Imm { cg: false, .. })) {
            // An immediate cannot be told from a protected constant; the
            // decode matrix caps these at ambiguous.
            rec.confidence = Confidence::Ambiguous;
            rec.alternatives = vec![
                isa::display_form(&c.form),
                "same operation with a protected constant source".into(),
            ];
            rec.note = "immediate-source form".into();
            rec.size_bytes = Some(c.form.size_bytes);
            return rec;
        }
        rec.confidence = Confidence::Decoded;
        rec.size_bytes = Some(c.form.size_bytes);
        rec.form = Some(c.form);
        return rec;
    }
    // Several survivors. If every survivor is an immediate-source form the
    // record is ambiguous by policy anyway; otherwise the probe budget ran
    // out.
    rec.confidence = Confidence::Ambiguous;
    rec.alternatives = describe_candidates(&cands);
    if rec.note.is_empty() {
        rec.note = format!(
            "{} candidates not separated within the probe budget",
            cands.len()
        );
    }
    rec
}

// ---------------------------------------------------------------------------
// Report rendering and gadget extraction
// ---------------------------------------------------------------------------

impl ReconstructionReport {
    pub fn decoded_fraction(&self) -> f64 {
        if self.records_total == 0 {
            0.0
        } else {
            self.decoded as f64 / self.records_total as f64
        }
    }

    /// Human-readable listing.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# reconstruction report\n");
        let _ = writeln!(s, "# image: {}", self.image_id);
        let _ = writeln!(
            s,
            "# decoded: {}/{} ({:.1}%) [denominator: all boundary records]",
            self.decoded,
            self.records_total,
            100.0 * self.decoded_fraction()
        );
        for r in &self.instructions {
            let size = r
                .size_bytes
                .map(|b| b.to_string())
                .unwrap_or_else(|| "?".to_string());
            let _ = writeln!(
                s,
                "0x{:04X}  {:<24} {:<9} size={} cycles={} kind={}{}",
                r.addr,
                r.display(),
                r.confidence.label(),
                size,
                r.cycle_count,
                r.kind.label(),
                if r.note.is_empty() {
                    String::new()
                } else {
                    format!("  ; {}", r.note)
                }
            );
            if r.confidence == Confidence::Ambiguous && !r.alternatives.is_empty() {
                let shown: Vec<&str> =
                    r.alternatives.iter().take(8).map(|a| a.as_str()).collect();
                let more = r.alternatives.len().saturating_sub(shown.len());
                let _ = writeln!(
                    s,
                    "        alternatives: {}{}",
                    shown.join(" | "),
                    if more > 0 {
                        format!(" | ... {} more", more)
                    } else {
                        String::new()
                    }
                );
            }
        }
        s
    }

    /// Machine-readable listing: address, size, cycles, bytes (when the form
    /// is known), text, confidence, kind.
    pub fn to_tsv(&self) -> String {
        let mut s =
            String::from("addr\tsize\tcycles\tbytes\ttext\tconfidence\tkind\talternatives\n");
        for r in &self.instructions {
            let bytes = r
                .form
                .and_then(|f| isa::encode(&f, r.addr).ok())
                .map(|ws| {
                    ws.iter()
                        .flat_map(|w| [(*w & 0xFF) as u8, (*w >> 8) as u8])
                        .map(|b| format!("{:02x}", b))
                        .collect::<String>()
                })
                .unwrap_or_default();
            let _ = writeln!(
                s,
                "0x{:04X}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.addr,
                r.size_bytes.map(|b| b.to_string()).unwrap_or_default(),
                r.cycle_count,
                bytes,
                r.display(),
                r.confidence.label(),
                r.kind.label(),
                r.alternatives.join("|")
            );
        }
        s
    }

    /// Usable interrupt-oriented gadgets among the decoded instructions.
    pub fn gadgets(&self) -> Vec<GadgetDescriptor> {
        let mut out = Vec::new();
        for r in &self.instructions {
            let Some(form) = r.form else { continue };
            if r.confidence != Confidence::Decoded || form.mnemonic != Mnemonic::Mov {
                continue;
            }
            let (Some(src), Some(dst)) = (form.src, form.dst) else {
                continue;
            };
            match (src, dst) {
                (Operand::Indirect(s), Operand::Reg(d))
                | (Operand::IndirectInc(s), Operand::Reg(d))
                    if d != PC && d != SP && d != SR && s != SP =>
                {
                    out.push(GadgetDescriptor {
                        addr: r.addr,
                        form: GadgetForm::Read,
                        src_reg: s,
                        dst_reg: d,
                        offset: 0,
                        width: form.width,
                        cycles_required: r.cycle_count as u64,
                    });
                }
                (Operand::Indexed { reg, offset }, Operand::Reg(d))
                    if d != PC && d != SP && d != SR && reg != SP =>
                {
                    out.push(GadgetDescriptor {
                        addr: r.addr,
                        form: GadgetForm::Read,
                        src_reg: reg,
                        dst_reg: d,
                        offset,
                        width: form.width,
                        cycles_required: r.cycle_count as u64,
                    });
                }
                (Operand::Reg(s), Operand::Indexed { reg, offset })
                    if s != PC && s != SP && s != SR && reg != SP && reg != PC =>
                {
                    out.push(GadgetDescriptor {
                        addr: r.addr,
                        form: GadgetForm::Write,
                        src_reg: s,
                        dst_reg: reg,
                        offset,
                        width: form.width,
                        cycles_required: r.cycle_count as u64,
                    });
                }
                _ => {}
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{dump_flags, RegisterDump};

    fn dump(tc: u32, pc: u32, regs: &[(usize, u32)], sr: u32, flags: u16) -> RegisterDump {
        let mut r = [0u32; 16];
        r[0] = pc;
        r[1] = 0x23FE;
        r[2] = sr;
        for (i, v) in regs {
            r[*i] = *v;
        }
        RegisterDump {
            timer_count: tc,
            r,
            flags,
        }
    }

    #[test]
    fn boundaries_group_repeating_pcs() {
        // Instruction at 0x4400 (2 cycles, next 0x4402), then a 1-cycle one.
        let db = TraceDb {
            image_id: "t".into(),
            dumps: vec![
                dump(1, 0x4402, &[], 8, 0),
                dump(2, 0x4402, &[], 8, 0),
                dump(3, 0x4404, &[], 8, dump_flags::TERMINATED),
            ],
            terminated: true,
        };
        let recs = segment_boundaries(&db, 0x4400).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].addr, 0x4400);
        assert_eq!(recs[0].next_pc, 0x4402);
        assert_eq!(recs[0].cycle_count, 2);
        assert_eq!(recs[0].linear_size(), Some(2));
        assert_eq!(recs[1].addr, 0x4402);
        assert_eq!(recs[1].cycle_count, 1);
    }

    #[test]
    fn backward_pc_marks_control_transfer() {
        let db = TraceDb {
            image_id: "t".into(),
            dumps: vec![
                dump(1, 0x4410, &[], 8, 0),
                dump(2, 0x4400, &[], 8, 0),
                dump(3, 0x4402, &[], 8, dump_flags::TERMINATED),
            ],
            terminated: true,
        };
        let recs = segment_boundaries(&db, 0x440E).unwrap();
        assert!(recs[1].linear_size().is_none(), "backward delta -> transfer");
    }

    #[test]
    fn single_dump_trace_yields_one_open_record() {
        let db = TraceDb {
            image_id: "t".into(),
            dumps: vec![dump(1, 0x4404, &[], 8, 0)],
            terminated: false,
        };
        let recs = segment_boundaries(&db, 0x4402).unwrap();
        assert_eq!(recs.len(), 1);
        assert!(!recs[0].complete);
    }

    #[test]
    fn decrement_classifies_as_dec() {
        // A countdown loop: DEC at 0x4400 (1 cycle), JNZ back (2 cycles).
        // Multiple loop iterations kill the one-shot coincidences (AND #4,
        // XOR #1, SUBC with a zero register); the generator aliases collapse
        // onto the canonical decrement, leaving only the width open, which a
        // probe closes.
        let sr_run = sr_bits::GIE | sr_bits::C;
        let sr_done = sr_bits::GIE | sr_bits::C | sr_bits::Z;
        let mut dumps = Vec::new();
        for v in (0..5u32).rev() {
            let sr = if v == 0 { sr_done } else { sr_run };
            dumps.push(dump(0, 0x4402, &[(12, v)], sr, 0));
            if v == 0 {
                dumps.push(dump(0, 0x4404, &[(12, v)], sr, 0));
                dumps.push(dump(0, 0x4404, &[(12, v)], sr, dump_flags::TERMINATED));
            } else {
                dumps.push(dump(0, 0x4400, &[(12, v)], sr, 0));
                dumps.push(dump(0, 0x4400, &[(12, v)], sr, 0));
            }
        }
        for (i, d) in dumps.iter_mut().enumerate() {
            d.timer_count = i as u32 + 1;
        }
        let db = TraceDb {
            image_id: "t".into(),
            dumps,
            terminated: true,
        };
        let recs = segment_boundaries(&db, 0x4400).unwrap();
        let mut cfg = Phase2Config::new(0x4400);
        cfg.initial_regs[12 - 4] = 5;
        let merged = merge_by_address(&db, &recs, &cfg);
        let ev = merged.iter().find(|e| e.addr == 0x4400).unwrap();
        let scratch = ScratchLayout::new(0x1C00);
        let cands = collapse_equivalents(classify_register_mode(ev, &scratch));
        let names = describe_candidates(&cands);
        assert!(
            names.iter().all(|n| n.starts_with("DEC")),
            "only the canonical decrement survives the loop evidence: {:?}",
            names
        );
        assert!(names.contains(&"DEC R12".to_string()));
    }

    #[test]
    fn unique_xor_is_found_from_register_deltas() {
        // R5 := R5 ^ R4 with operand values no other operation maps the same
        // way (0x0F0F ^ 0x00FF = 0x0FF0; add, sub and the bit ops all land
        // elsewhere).
        let r4 = 0x00FFu32;
        let r5a = 0x0F0Fu32;
        let r5b = r5a ^ r4;
        let (_, sr_after) = apply_two_op(Mnemonic::Xor, Width::Word, r4, r5a, sr_bits::GIE);
        let db = TraceDb {
            image_id: "t".into(),
            dumps: vec![
                dump(1, 0x4402, &[(4, r4), (5, r5a)], sr_bits::GIE, 0),
                dump(2, 0x4404, &[(4, r4), (5, r5b)], sr_after, 0),
                dump(
                    3,
                    0x4406,
                    &[(4, r4), (5, r5b)],
                    sr_after,
                    dump_flags::TERMINATED,
                ),
            ],
            terminated: true,
        };
        let recs = segment_boundaries(&db, 0x4400).unwrap();
        let cfg = Phase2Config::new(0x4400);
        let merged = merge_by_address(&db, &recs, &cfg);
        let ev = merged.iter().find(|e| e.addr == 0x4402).unwrap();
        let scratch = ScratchLayout::new(0x1C00);
        let cands = collapse_equivalents(classify_register_mode(ev, &scratch));
        assert_eq!(cands.len(), 1, "{:?}", describe_candidates(&cands));
        assert_eq!(cands[0].form.mnemonic, Mnemonic::Xor);
        assert_eq!(cands[0].form.src, Some(Operand::Reg(Reg(4))));
    }

    #[test]
    fn mov_xor_add_bis_clash_stays_ambiguous_without_probes() {
        // dst 0x00 -> 0xFE with a source register holding 0xFE and MOV-like
        // flags: several flag-preserving explanations remain.
        let db = TraceDb {
            image_id: "t".into(),
            dumps: vec![
                dump(1, 0x4402, &[(4, 0xFE), (5, 0x00)], sr_bits::GIE, 0),
                dump(2, 0x4404, &[(4, 0xFE), (5, 0xFE)], sr_bits::GIE, 0),
                dump(
                    3,
                    0x4406,
                    &[(4, 0xFE), (5, 0xFE)],
                    sr_bits::GIE,
                    dump_flags::TERMINATED,
                ),
            ],
            terminated: true,
        };
        let recs = segment_boundaries(&db, 0x4400).unwrap();
        let cfg = Phase2Config::new(0x4400);
        let merged = merge_by_address(&db, &recs, &cfg);
        let ev = merged.iter().find(|e| e.addr == 0x4402).unwrap();
        let scratch = ScratchLayout::new(0x1C00);
        let cands = collapse_equivalents(classify_register_mode(ev, &scratch));
        let names = describe_candidates(&cands);
        assert!(names.len() > 1, "{:?}", names);
        assert!(names.iter().any(|n| n.contains("MOV")));
        assert!(names.iter().any(|n| n.contains("BIS")));
    }

    #[test]
    fn status_bits_prune_contradicted_candidates() {
        // Nonzero result with Z=1 claimed: nothing survives.
        let bad_sr = sr_bits::GIE | sr_bits::Z;
        let db = TraceDb {
            image_id: "t".into(),
            dumps: vec![
                dump(1, 0x4402, &[(4, 1), (5, 5)], sr_bits::GIE, 0),
                dump(2, 0x4404, &[(4, 1), (5, 6)], bad_sr, 0),
                dump(3, 0x4406, &[(4, 1), (5, 6)], bad_sr, dump_flags::TERMINATED),
            ],
            terminated: true,
        };
        let recs = segment_boundaries(&db, 0x4400).unwrap();
        let cfg = Phase2Config::new(0x4400);
        let merged = merge_by_address(&db, &recs, &cfg);
        let ev = merged.iter().find(|e| e.addr == 0x4402).unwrap();
        let scratch = ScratchLayout::new(0x1C00);
        let cands = classify_register_mode(ev, &scratch);
        assert!(
            cands.is_empty(),
            "Z set after a nonzero result contradicts every op: {:?}",
            describe_candidates(&cands)
        );
    }

    #[test]
    fn jump_condition_inference_pins_jnz() {
        let sr_taken = sr_bits::GIE | sr_bits::C;
        let sr_done = sr_bits::GIE | sr_bits::C | sr_bits::Z;
        let mk = |tc, pc, r12, sr| dump(tc, pc, &[(12, r12)], sr, 0);
        let db = TraceDb {
            image_id: "t".into(),
            dumps: vec![
                mk(1, 0x4402, 2, sr_bits::GIE),
                mk(2, 0x4404, 1, sr_taken),
                mk(3, 0x4402, 1, sr_taken),
                mk(4, 0x4404, 0, sr_done),
                mk(5, 0x4406, 0, sr_done),
                dump(6, 0x4408, &[(12, 0)], sr_done, dump_flags::TERMINATED),
            ],
            terminated: true,
        };
        let recs = segment_boundaries(&db, 0x4400).unwrap();
        let cfg = Phase2Config::new(0x4400);
        let merged = merge_by_address(&db, &recs, &cfg);
        let ev = merged.iter().find(|e| e.addr == 0x4404).unwrap();
        assert_eq!(detect_control_flow(ev), RecordKind::Jump);
        let (conds, target) = infer_jump(ev);
        assert_eq!(conds, vec![Mnemonic::Jnz]);
        assert_eq!(target, Some(0x4402));
    }

    #[test]
    fn empty_trace_yields_empty_report() {
        let db = TraceDb {
            image_id: "t".into(),
            dumps: Vec::new(),
            terminated: false,
        };
        let report = reconstruct(&db, &Phase2Config::new(0x4400), None).unwrap();
        assert_eq!(report.records_total, 0);
        assert!(report.instructions.is_empty());
        assert_eq!(report.decoded_fraction(), 0.0);
    }

    #[test]
    fn call_push_pop_ret_shapes_from_sp() {
        let mk = |tc, pc, sp, sr| {
            let mut d = dump(tc, pc, &[], sr, 0);
            d.r[1] = sp;
            d
        };
        let db = TraceDb {
            image_id: "t".into(),
            dumps: vec![
                mk(1, 0x4500, 0x23FC, 8),
                mk(2, 0x4500, 0x23FC, 8),
                mk(3, 0x4500, 0x23FC, 8),
                mk(4, 0x4500, 0x23FC, 8),
                mk(5, 0x4500, 0x23FC, 8),
                mk(6, 0x4404, 0x23FE, 8),
                mk(7, 0x4404, 0x23FE, 8),
                {
                    let mut d = mk(8, 0x4404, 0x23FE, 8);
                    d.flags = dump_flags::TERMINATED;
                    d
                },
            ],
            terminated: true,
        };
        let recs = segment_boundaries(&db, 0x4400).unwrap();
        let cfg = Phase2Config {
            initial_sp: 0x23FE,
            ..Phase2Config::new(0x4400)
        };
        let merged = merge_by_address(&db, &recs, &cfg);
        let call = merged.iter().find(|e| e.addr == 0x4400).unwrap();
        assert_eq!(detect_control_flow(call), RecordKind::Call);
        let ret = merged.iter().find(|e| e.addr == 0x4500).unwrap();
        assert_eq!(detect_control_flow(ret), RecordKind::Ret);
    }
}
