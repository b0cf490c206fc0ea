//! Command-line behavior: exit codes, output files, and determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ipesim"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ipesim-cli-{}-{}", tag, std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_fixture(dir: &Path, name: &str) -> PathBuf {
    let src = ipesim::fixtures::source(name).unwrap();
    let path = dir.join(format!("{}.s", name));
    fs::write(&path, src).unwrap();
    path
}

#[test]
fn assemble_round_trip_is_identical() {
    let dir = workdir("asm");
    let src = write_fixture(&dir, "mode_matrix");
    let out1 = dir.join("a.fw");
    let out2 = dir.join("b.fw");
    for out in [&out1, &out2] {
        let status = bin().args(["assemble"]).arg(&src).arg(out).status().unwrap();
        assert!(status.success());
    }
    // Same source twice: manifests differ only in their stem references.
    let m1 = fs::read_to_string(&out1).unwrap().replace("a.seg", "X.seg");
    let m2 = fs::read_to_string(&out2).unwrap().replace("b.seg", "X.seg");
    assert_eq!(m1, m2);
    assert_eq!(
        fs::read(dir.join("a.seg0.bin")).unwrap(),
        fs::read(dir.join("b.seg0.bin")).unwrap()
    );
}

#[test]
fn bad_mnemonic_exits_2_with_line_number() {
    let dir = workdir("badasm");
    let src = dir.join("bad.s");
    fs::write(&src, ".org 0x4400\n  FROB R4\n").unwrap();
    let out = bin()
        .args(["assemble"])
        .arg(&src)
        .arg(dir.join("bad.fw"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn usage_errors_exit_1() {
    let out = bin().args(["attack", "--phases", "9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn attack_pipeline_outputs_and_determinism() {
    let dir = workdir("attack");
    let src = write_fixture(&dir, "aes_keyexpand");
    let fw = dir.join("aes.fw");
    assert!(bin().args(["assemble"]).arg(&src).arg(&fw).status().unwrap().success());
    for run in ["out1", "out2"] {
        let status = bin()
            .args(["attack", "--firmware"])
            .arg(&fw)
            .args(["--phases", "1,2,3", "--seed", "7", "--out"])
            .arg(dir.join(run))
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in [
        "trace.txt",
        "uart.bin",
        "report.txt",
        "listing.tsv",
        "key.txt",
        "exfiltrated.bin",
        "timing.txt",
        "run.txt",
    ] {
        let a = fs::read(dir.join("out1").join(name)).unwrap();
        let b = fs::read(dir.join("out2").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    // The recovered key is the one the image carries.
    let key = fs::read_to_string(dir.join("out1/key.txt")).unwrap();
    assert_eq!(key.trim(), "2b7e151628aed2a6abf7158809cf4f3c");
    // The exfiltrated range equals the protected segment payload.
    let exfil = fs::read(dir.join("out1/exfiltrated.bin")).unwrap();
    let seg = fs::read(dir.join("aes.seg0.bin")).unwrap();
    assert_eq!(exfil, seg);
}

#[test]
fn phase1_only_skips_later_outputs() {
    let dir = workdir("p1");
    let src = write_fixture(&dir, "dint_entry");
    let fw = dir.join("fw.fw");
    assert!(bin().args(["assemble"]).arg(&src).arg(&fw).status().unwrap().success());
    let status = bin()
        .args(["attack", "--firmware"])
        .arg(&fw)
        .args(["--phases", "1", "--out"])
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.join("out/trace.txt").exists());
    assert!(!dir.join("out/report.txt").exists());
    assert!(!dir.join("out/exfiltrated.bin").exists());
}

#[test]
fn phase3_without_a_read_gadget_fails_gracefully() {
    // A victim with only register operations offers nothing to read through.
    let dir = workdir("nogadget");
    let src = dir.join("regs_only.s");
    fs::write(
        &src,
        "        .org 0x4400
        .entry entry
        .ipe_start
entry:  DINT
        MOV #5, R4
        ADD R4, R4
        XOR R4, R5
        RET
        .ipe_end
",
    )
    .unwrap();
    let fw = dir.join("fw.fw");
    assert!(bin().args(["assemble"]).arg(&src).arg(&fw).status().unwrap().success());
    let out = bin()
        .args(["attack", "--firmware"])
        .arg(&fw)
        .args(["--phases", "1,2,3", "--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("read gadget"), "{err}");
    // Phases 1 and 2 still produced their outputs.
    assert!(dir.join("out/trace.txt").exists());
    assert!(dir.join("out/report.txt").exists());
    assert!(!dir.join("out/exfiltrated.bin").exists());
}

#[test]
fn estimate_scales_linearly_in_baud() {
    let dir = workdir("est");
    let src = write_fixture(&dir, "loop_counter");
    let fw = dir.join("fw.fw");
    assert!(bin().args(["assemble"]).arg(&src).arg(&fw).status().unwrap().success());
    assert!(bin()
        .args(["attack", "--firmware"])
        .arg(&fw)
        .args(["--phases", "1", "--out"])
        .arg(dir.join("out"))
        .status()
        .unwrap()
        .success());
    let secs = |baud: &str| -> f64 {
        let out = bin()
            .args(["estimate", "--trace"])
            .arg(dir.join("out/trace.txt"))
            .args(["--baud", baud])
            .output()
            .unwrap();
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        let field = text.split(',').nth(2).unwrap();
        field.trim().split('s').next().unwrap().parse().unwrap()
    };
    let slow = secs("57600");
    let fast = secs("115200");
    assert!((slow - 2.0 * fast).abs() < 1e-6, "{slow} vs {fast}");
}
