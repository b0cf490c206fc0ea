//! Command-line front end: assemble victim firmware, run the attack phases
//! against it, and estimate exfiltration timing.
//!
//! Exit codes: 0 success, 1 usage or input problem, 2 assembly error,
//! 3 attack-phase failure.

use clap::{Args, Parser, Subcommand};
use ipesim::analysis::{reconstruct, Phase2Config};
use ipesim::asm::assemble;
use ipesim::attack::{restore_run, AttackConfig, Attacker, GadgetForm, MachineProbes};
use ipesim::image::FirmwareImage;
use ipesim::keyrec;
use ipesim::machine::MachineState;
use ipesim::periph::estimate_transfer_seconds;
use ipesim::trace::{TraceDb, RECORD_WIRE_BYTES};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const SP_INIT: u32 = 0x2C00;

#[derive(Parser)]
#[command(name = "ipesim", about = "Protected-region attack simulator for the MSP430 subset")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble a victim source file into a firmware image.
    Assemble {
        /// Assembly source path.
        src: PathBuf,
        /// Output manifest path; segment files land next to it.
        out: PathBuf,
    },
    /// Run the attack phases against a firmware image.
    Attack(AttackArgs),
    /// Estimate serial transfer time for a collected trace.
    Estimate {
        /// Trace file written by the attack command.
        #[arg(long)]
        trace: PathBuf,
        /// Baud rate of the exfiltration channel.
        #[arg(long)]
        baud: u32,
    },
    /// List the victim fixtures shipped with the simulator.
    Fixtures,
}

#[derive(Args)]
struct AttackArgs {
    /// Firmware manifest to attack.
    #[arg(long)]
    firmware: PathBuf,
    /// Phase selection: 1, 1,2 or 1,2,3.
    #[arg(long, default_value = "1,2,3")]
    phases: String,
    /// Register dumps to collect before giving up (phase 1 stops early when
    /// the victim returns).
    #[arg(long, default_value_t = 100_000)]
    dumps: u32,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Seed recorded with the run; the pipeline is deterministic for a given
    /// firmware and seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Assemble { src, out } => cmd_assemble(&src, &out),
        Command::Attack(args) => cmd_attack(&args),
        Command::Estimate { trace, baud } => cmd_estimate(&trace, baud),
        Command::Fixtures => {
            for (name, _) in ipesim::fixtures::all() {
                println!("{}", name);
            }
            ExitCode::SUCCESS
        }
    }
}

fn cmd_assemble(src: &Path, out: &Path) -> ExitCode {
    let text = match fs::read_to_string(src) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {}", src.display(), e);
            return ExitCode::from(1);
        }
    };
    let assembled = match assemble(&text) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{}: {}", src.display(), e);
            return ExitCode::from(2);
        }
    };
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            if let Err(e) = fs::create_dir_all(dir) {
                eprintln!("error: {}", e);
                return ExitCode::from(1);
            }
        }
    }
    if let Err(e) = assembled.image.save(out) {
        eprintln!("error: {}", e);
        return ExitCode::from(1);
    }
    println!(
        "assembled {} instructions, {} segment(s), image {}",
        assembled.listing.len(),
        assembled.image.segments.len(),
        assembled.image.id()
    );
    ExitCode::SUCCESS
}

fn parse_phases(s: &str) -> Option<u32> {
    match s.replace(' ', "").as_str() {
        "1" => Some(1),
        "1,2" => Some(2),
        "1,2,3" => Some(3),
        _ => None,
    }
}

fn attack_fail(phase: u32, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("phase {}: {}", phase, msg);
    ExitCode::from(3)
}

fn cmd_attack(args: &AttackArgs) -> ExitCode {
    let Some(max_phase) = parse_phases(&args.phases) else {
        eprintln!("error: --phases must be a prefix of 1,2,3");
        return ExitCode::from(1);
    };
    let image = match FirmwareImage::load_manifest(&args.firmware) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("error: {}: {}", args.firmware.display(), e);
            return ExitCode::from(1);
        }
    };
    if let Err(e) = fs::create_dir_all(&args.out) {
        eprintln!("error: {}", e);
        return ExitCode::from(1);
    }
    let mut state = MachineState::new();
    if let Err(e) = image.load(&mut state, SP_INIT) {
        eprintln!("error: {}", e);
        return ExitCode::from(1);
    }

    // Phase 1: discover the entry bypass, then collect dumps.
    let mut cfg = AttackConfig::new(image.entry, image.entry, args.dumps);
    let probe_attacker = Attacker::new(cfg.clone());
    let bypass = match probe_attacker.find_dint_bypass(&mut state, image.entry) {
        Ok(b) => b,
        Err(e) => return attack_fail(1, e),
    };
    cfg.dint_bypass = bypass;
    let attacker = Attacker::new(cfg);
    let db = match attacker.phase1_collect(&mut state, &image.id()) {
        Ok(db) => db,
        Err(e) => return attack_fail(1, e),
    };
    let write_out = |name: &str, bytes: &[u8]| -> std::io::Result<()> {
        fs::write(args.out.join(name), bytes)
    };
    if let Err(e) = write_out("trace.txt", db.to_text().as_bytes()) {
        return attack_fail(1, e);
    }
    if let Err(e) = write_out("uart.bin", &state.uart.bytes) {
        return attack_fail(1, e);
    }

    let mut run_summary = String::new();
    let _ = writeln!(run_summary, "firmware: {}", image.id());
    let _ = writeln!(run_summary, "seed: {}", args.seed);
    let _ = writeln!(run_summary, "entry: 0x{:04X}", image.entry);
    let _ = writeln!(run_summary, "entry bypass: 0x{:04X}", bypass);
    let _ = writeln!(
        run_summary,
        "phase 1: {} dumps, terminated={}",
        db.len(),
        db.terminated
    );

    let mut timing = String::new();
    let uart_secs =
        estimate_transfer_seconds(state.uart.bytes.len() as u64, state.uart.baud).unwrap();
    let _ = writeln!(
        timing,
        "phase-1 serial transfer: {} bytes at {} baud = {:.2}s",
        state.uart.bytes.len(),
        state.uart.baud,
        uart_secs
    );
    let _ = writeln!(
        timing,
        "reference: 10000 dumps = {:.1}s at 115200 baud",
        estimate_transfer_seconds(10_000 * RECORD_WIRE_BYTES as u64, 115_200).unwrap()
    );

    if max_phase >= 2 {
        let mut p2 = Phase2Config::new(attacker.cfg.dint_bypass);
        p2.initial_sp = (attacker.cfg.stack_top - 2) & 0xFFFF;
        p2.initial_regs = attacker.cfg.initial_regs;
        let report = {
            let mut probes = MachineProbes {
                attacker: &attacker,
                state: &mut state,
            };
            match reconstruct(&db, &p2, Some(&mut probes)) {
                Ok(r) => r,
                Err(e) => return attack_fail(2, e),
            }
        };
        if let Err(e) = restore_run(&attacker, &mut state) {
            return attack_fail(2, e);
        }
        let mut report_text = report.to_text();
        let _ = writeln!(
            run_summary,
            "phase 2: {}/{} decoded",
            report.decoded, report.records_total
        );

        // Key-schedule recovery, when the reconstruction shows one.
        match keyrec::extract_schedule(&db, &report, &p2) {
            Some(ex) => {
                report_text.push_str("\n# key-schedule leak\n");
                let sites: Vec<String> = ex
                    .byte_load_addrs
                    .iter()
                    .map(|a| format!("0x{:04X}", a))
                    .collect();
                let _ = writeln!(report_text, "# byte-load leak sites: {}", sites.join(", "));
                let _ = writeln!(
                    report_text,
                    "# schedule words observed: {} (stores at 0x{:04X}/0x{:04X})",
                    ex.words.len(),
                    ex.store_addrs.0,
                    ex.store_addrs.1
                );
                match keyrec::recover_key_from_schedule(&ex) {
                    Ok(key) => {
                        let hex = keyrec::key_to_hex(&key);
                        let _ = writeln!(report_text, "# recovered key: {}", hex);
                        let _ = writeln!(run_summary, "recovered key: {}", hex);
                        if let Err(e) = write_out("key.txt", format!("{}\n", hex).as_bytes()) {
                            return attack_fail(2, e);
                        }
                        if let Ok(records) =
                            ipesim::analysis::segment_boundaries(&db, p2.start_addr)
                        {
                            let occs: Vec<_> = records
                                .iter()
                                .filter(|r| r.addr == ex.store_addrs.1)
                                .collect();
                            if occs.len() >= 8 {
                                let tc = db.dumps[occs[7].dump_after].timer_count;
                                let secs = estimate_transfer_seconds(
                                    tc as u64 * RECORD_WIRE_BYTES as u64,
                                    state.uart.baud,
                                )
                                .unwrap();
                                let _ = writeln!(
                                    timing,
                                    "second round key on the wire after {} dumps = {:.2}s",
                                    tc, secs
                                );
                            }
                        }
                    }
                    Err(e) => {
                        let _ = writeln!(report_text, "# key recovery failed: {}", e);
                    }
                }
            }
            None => {
                let _ = writeln!(run_summary, "no key-schedule loop identified");
            }
        }
        if let Err(e) = write_out("report.txt", report_text.as_bytes()) {
            return attack_fail(2, e);
        }
        if let Err(e) = write_out("listing.tsv", report.to_tsv().as_bytes()) {
            return attack_fail(2, e);
        }

        if max_phase >= 3 {
            let gadgets = report.gadgets();
            let read = gadgets
                .iter()
                .find(|g| g.form == GadgetForm::Read && g.offset == 0)
                .or_else(|| gadgets.iter().find(|g| g.form == GadgetForm::Read));
            let Some(gadget) = read else {
                return attack_fail(
                    3,
                    "no indirect- or indexed-mode read gadget was decoded in phase 2",
                );
            };
            let Some((lo, hi)) = image.ipe else {
                return attack_fail(3, "image declares no protected region to exfiltrate");
            };
            let bytes = match attacker.phase3_exfiltrate(&mut state, gadget, lo..hi) {
                Ok(b) => b,
                Err(e) => return attack_fail(3, e),
            };
            if let Err(e) = write_out("exfiltrated.bin", &bytes) {
                return attack_fail(3, e);
            }
            let secs = estimate_transfer_seconds(bytes.len() as u64, state.uart.baud).unwrap();
            let _ = writeln!(
                run_summary,
                "phase 3: {} bytes via gadget at 0x{:04X}",
                bytes.len(),
                gadget.addr
            );
            let _ = writeln!(
                timing,
                "phase-3 payload transfer: {} bytes = {:.2}s",
                bytes.len(),
                secs
            );
        }
    }

    if let Err(e) = write_out("timing.txt", timing.as_bytes()) {
        return attack_fail(1, e);
    }
    if let Err(e) = write_out("run.txt", run_summary.as_bytes()) {
        return attack_fail(1, e);
    }
    print!("{}", run_summary);
    ExitCode::SUCCESS
}

fn cmd_estimate(trace: &Path, baud: u32) -> ExitCode {
    let text = match fs::read_to_string(trace) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {}", trace.display(), e);
            return ExitCode::from(1);
        }
    };
    let db = match TraceDb::from_text(&text) {
        Ok(db) => db,
        Err(e) => {
            eprintln!("error: {}", e);
            return ExitCode::from(1);
        }
    };
    let bytes = db.len() as u64 * RECORD_WIRE_BYTES as u64;
    match estimate_transfer_seconds(bytes, baud) {
        Ok(secs) => {
            println!(
                "{} records, {} bytes on the wire, {:.3}s at {} baud",
                db.len(),
                bytes,
                secs,
                baud
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(1)
        }
    }
}
