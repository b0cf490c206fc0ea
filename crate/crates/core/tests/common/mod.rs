#![allow(dead_code)] // each integration test uses a subset of this module

//! Shared test support: the single-step oracle and fixture attack setup.
//!
//! The oracle is the simulator's own instrumented execution, run without
//! interrupts from the same entry context the attacker uses. It provides
//! ground truth for trace equivalence and is available only to tests.

use ipesim::asm::Assembled;
use ipesim::attack::{AttackConfig, Attacker};
use ipesim::fixtures;
use ipesim::image::FirmwareImage;
use ipesim::machine::{MachineState, StepEventKind};
use ipesim::trace::RegisterDump;

pub const SP_INIT: u32 = 0x2C00;

/// Register file after each retired instruction, plus cumulative victim
/// cycles at that boundary.
#[derive(Debug, Clone)]
pub struct OracleStep {
    pub cycles_end: u64,
    pub regs: [u32; 16],
}

pub struct Fixture {
    pub assembled: Assembled,
    pub image: FirmwareImage,
    pub attacker: Attacker,
}

pub fn fixture(name: &str) -> Fixture {
    let assembled = fixtures::build(name);
    let image = assembled.image.clone();
    let entry = image.entry;
    // All shipped fixtures open with a 2-byte interrupt disable.
    let cfg = AttackConfig::new(entry, entry + 2, 100_000);
    Fixture {
        assembled,
        image,
        attacker: Attacker::new(cfg),
    }
}

pub fn fresh_machine(f: &Fixture) -> MachineState {
    let mut state = MachineState::new();
    f.image.load(&mut state, SP_INIT).unwrap();
    state
}

/// Single-step the victim from the attack entry context with no timer,
/// recording the register file at every instruction boundary until the
/// victim returns to the attacker.
pub fn oracle_trace(f: &Fixture, state: &mut MachineState) -> Vec<OracleStep> {
    f.attacker.install(state).unwrap();
    f.attacker.reset_for_run(state).unwrap();
    state.timer.stop();
    state.set_pc(f.attacker.cfg.dint_bypass);
    let ret = f.attacker.cfg.scratch.return_site();
    let mut steps = Vec::new();
    let mut cycles = 0u64;
    for _ in 0..1_000_000 {
        let before = state.cycles;
        let ev = state.step().unwrap();
        assert!(
            matches!(ev.kind, StepEventKind::Executed | StepEventKind::MpuViolation),
            "oracle run hit {:?} at 0x{:04X}",
            ev.kind,
            ev.pc_before
        );
        cycles += state.cycles - before;
        steps.push(OracleStep {
            cycles_end: cycles,
            regs: state.regs,
        });
        if ev.pc_after == ret {
            return steps;
        }
    }
    panic!("oracle run did not terminate");
}

/// Expected dump at a timer count: the register file at the first boundary
/// where at least `tc` victim cycles have elapsed.
pub fn oracle_dump_at(steps: &[OracleStep], tc: u64) -> Option<&OracleStep> {
    steps.iter().find(|s| s.cycles_end >= tc)
}

/// Compare a phase-1 dump against the oracle: every register, with PC and SR
/// as the oracle's live values.
pub fn dump_matches_oracle(dump: &RegisterDump, step: &OracleStep) -> bool {
    dump.r == step.regs
}
