//! End-to-end pipeline integration: phase 1 against each fixture, phase 2
//! with live probes, and reconstruction quality against the assembler's own
//! listing as ground truth.

mod common;

use common::{dump_matches_oracle, fixture, fresh_machine, oracle_dump_at, oracle_trace};
use ipesim::analysis::{reconstruct, Confidence, Phase2Config, ReconstructionReport};
use ipesim::attack::MachineProbes;
use ipesim::isa::{display_form, Operand};
use ipesim::machine::MachineState;

fn phase2_config(f: &common::Fixture) -> Phase2Config {
    let mut cfg = Phase2Config::new(f.attacker.cfg.dint_bypass);
    cfg.initial_sp = (f.attacker.cfg.stack_top - 2) & 0xFFFF;
    cfg.initial_regs = f.attacker.cfg.initial_regs;
    cfg
}

fn run_pipeline(name: &str) -> (common::Fixture, MachineState, ReconstructionReport) {
    let f = fixture(name);
    let mut state = fresh_machine(&f);
    let db = f
        .attacker
        .phase1_collect(&mut state, &f.image.id())
        .unwrap();
    assert!(db.terminated, "{name}: phase 1 should observe the return");
    let cfg = phase2_config(&f);
    let mut probes = MachineProbes {
        attacker: &f.attacker,
        state: &mut state,
    };
    let report = reconstruct(&db, &cfg, Some(&mut probes)).unwrap();
    ipesim::attack::restore_run(&f.attacker, &mut state).unwrap();
    (f, state, report)
}

#[test]
fn phase1_matches_oracle_on_every_fixture() {
    for (name, _) in ipesim::fixtures::all() {
        let f = fixture(name);
        let mut state = fresh_machine(&f);
        let db = f
            .attacker
            .phase1_collect(&mut state, &f.image.id())
            .unwrap();
        let mut oracle_state = fresh_machine(&f);
        let steps = oracle_trace(&f, &mut oracle_state);
        for dump in &db.dumps {
            if dump.terminated() {
                continue;
            }
            let step = oracle_dump_at(&steps, dump.timer_count as u64)
                .unwrap_or_else(|| panic!("{name}: no oracle step for tc {}", dump.timer_count));
            assert!(
                dump_matches_oracle(dump, step),
                "{name}: dump {} diverges\n dump: {:04x?}\n oracle: {:04x?}",
                dump.timer_count,
                dump.r,
                step.regs
            );
        }
    }
}

#[test]
fn repeating_a_timer_count_reproduces_its_dump() {
    // Runs are independent: after the per-iteration reset, attacker state
    // fully determines the outcome, so replaying any timer count yields the
    // identical dump even after the full collection ran.
    let f = fixture("aes_keyexpand");
    let mut state = fresh_machine(&f);
    let db = f
        .attacker
        .phase1_collect(&mut state, &f.image.id())
        .unwrap();
    for tc in [1u32, 7, 42, 425, db.len() as u32 / 2] {
        let mut replay = f.attacker.cfg.clone();
        replay.desired_dumps = tc;
        let replay_attacker = ipesim::attack::Attacker::new(replay);
        let re = replay_attacker
            .phase1_collect(&mut state, &f.image.id())
            .unwrap();
        assert_eq!(
            re.dumps.last().unwrap(),
            &db.dumps[tc as usize - 1],
            "timer count {tc} must reproduce"
        );
    }
}

#[test]
fn stack_shapes_classify_from_sp_and_probes() {
    let (f, _state, _db, report) = {
        let f = fixture("stack_ops");
        let mut state = fresh_machine(&f);
        let db = f
            .attacker
            .phase1_collect(&mut state, &f.image.id())
            .unwrap();
        let cfg = phase2_config(&f);
        let report = {
            let mut probes = MachineProbes {
                attacker: &f.attacker,
                state: &mut state,
            };
            reconstruct(&db, &cfg, Some(&mut probes)).unwrap()
        };
        ipesim::attack::restore_run(&f.attacker, &mut state).unwrap();
        (f, state, db, report)
    };
    use ipesim::analysis::RecordKind;
    let by_text = |needle: &str| {
        let addr = f
            .assembled
            .listing
            .iter()
            .find(|e| e.text.contains(needle))
            .unwrap_or_else(|| panic!("no `{needle}` in listing"))
            .addr;
        report
            .instructions
            .iter()
            .find(|r| r.addr == addr)
            .unwrap_or_else(|| panic!("`{needle}` not reconstructed"))
    };
    // Call with its immediate target; the pushed word is the return address.
    let call = by_text("CALL #leaf");
    assert_eq!(call.kind, RecordKind::Call);
    assert_eq!(call.confidence, Confidence::Decoded);
    // Push and pop with exact operands.
    let push = by_text("PUSH R12");
    assert_eq!(push.kind, RecordKind::Push);
    assert_eq!(push.confidence, Confidence::Decoded, "{:?}", push.alternatives);
    let pop = by_text("POP R13");
    assert_eq!(pop.kind, RecordKind::Pop);
    assert_eq!(pop.confidence, Confidence::Decoded);
    // The crafted-frame interrupt return, which lands sequentially here.
    let reti = by_text("RETI");
    assert_eq!(reti.kind, RecordKind::Reti);
    assert_eq!(reti.confidence, Confidence::Decoded);
    // Address-instruction stack adjustments stay honest: both widths fit.
    let suba = by_text("SUBA #4, SP");
    assert_eq!(suba.kind, RecordKind::StackAdjust);
    assert_eq!(suba.confidence, Confidence::Ambiguous);
    assert!(suba.alternatives.iter().any(|a| a.contains("SUBA")));
    // Returns, both the leaf's and the victim's terminal one.
    let leaf_ret = report
        .instructions
        .iter()
        .find(|r| r.addr == f.image.symbols["leaf"] + 2)
        .unwrap();
    assert_eq!(leaf_ret.kind, RecordKind::Ret);
    assert_eq!(leaf_ret.confidence, Confidence::Decoded);
}

#[test]
fn memory_to_memory_is_blind_to_register_deltas() {
    // A store from memory to memory leaves the register file unchanged
    // (beyond pointer autoincrement), so the register-delta sort alone
    // cannot classify it; only its boundary record and probes surface it.
    let f = fixture("mode_matrix");
    let mut state = fresh_machine(&f);
    let db = f
        .attacker
        .phase1_collect(&mut state, &f.image.id())
        .unwrap();
    let cfg = phase2_config(&f);
    let records = ipesim::analysis::segment_boundaries(&db, cfg.start_addr).unwrap();
    let merged = ipesim::analysis::merge_by_address(&db, &records, &cfg);
    let mm_addr = f
        .assembled
        .listing
        .iter()
        .find(|e| e.text.contains("@R4, 6(R6)"))
        .unwrap()
        .addr;
    let ev = merged.iter().find(|e| e.addr == mm_addr).unwrap();
    let scratch = f.attacker.cfg.scratch;
    let cands = ipesim::analysis::classify_register_mode(ev, &scratch);
    assert!(
        cands.is_empty(),
        "register-delta sort must not explain a memory-to-memory move"
    );
}

#[test]
fn matrix_reconstruction_against_ground_truth() {
    let (f, _state, report) = run_pipeline("mode_matrix");
    let mut failures = Vec::new();
    for entry in &f.assembled.listing {
        if entry.addr < f.attacker.cfg.dint_bypass {
            // The attack jumps past the interrupt disable; it never executes.
            continue;
        }
        let Some(rec) = report.instructions.iter().find(|r| r.addr == entry.addr) else {
            failures.push(format!("0x{:04X} `{}` never observed", entry.addr, entry.text));
            continue;
        };
        let truth = &entry.form;
        let src_is = |pred: fn(&Operand) -> bool| truth.src.as_ref().map(pred).unwrap_or(false);
        let imm_source = src_is(|o| matches!(o, Operand::Imm { cg: false, .. }));
        let sym_abs = src_is(|o| matches!(o, Operand::Symbolic { .. } | Operand::Absolute { .. }))
            || truth
                .dst
                .as_ref()
                .map(|o| matches!(o, Operand::Symbolic { .. } | Operand::Absolute { .. }))
                .unwrap_or(false);
        let expected = if sym_abs {
            Confidence::Unknown
        } else if imm_source {
            Confidence::Ambiguous
        } else {
            Confidence::Decoded
        };
        if rec.confidence != expected {
            failures.push(format!(
                "0x{:04X} `{}`: expected {:?}, got {:?} ({} / {})",
                entry.addr,
                entry.text,
                expected,
                rec.confidence,
                rec.display(),
                rec.note
            ));
            continue;
        }
        if expected == Confidence::Decoded {
            let got = rec.form.expect("decoded record has a form");
            if got != *truth {
                failures.push(format!(
                    "0x{:04X} `{}`: decoded as `{}` ({:?})",
                    entry.addr,
                    entry.text,
                    display_form(&got),
                    got
                ));
            }
        }
    }
    assert!(failures.is_empty(), "\n{}", failures.join("\n"));
}
