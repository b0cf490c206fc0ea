//! Cycle-counting MSP430-subset simulator with IP-Encapsulation (IPE)
//! modeling, plus the attack toolkit that drives it: timer-interrupt
//! single-stepping of protected code, register-trace reconstruction of the
//! protected assembly, gadget-based memory exfiltration, and AES-128
//! key-schedule inversion.

pub mod analysis;
pub mod asm;
pub mod attack;
pub mod decode;
pub mod fixtures;
pub mod image;
pub mod isa;
pub mod keyrec;
pub mod machine;
pub mod mem;
pub mod periph;
pub mod semantics;
pub mod trace;

pub use analysis::{Confidence, Phase2Config, ReconstructedInstruction, ReconstructionReport};
pub use asm::{assemble, Assembled};
pub use attack::{AttackConfig, Attacker, GadgetDescriptor, GadgetForm};
pub use decode::{decode, DecodeError};
pub use image::FirmwareImage;
pub use isa::{DecodedForm, Mnemonic, Operand, Reg, Width};
pub use machine::{MachineState, StepEvent, StepEventKind};
pub use mem::{AccessKind, AccessRecord, IpeConfig, Memory};
pub use periph::{estimate_transfer_seconds, Timer, UartChannel};
pub use trace::{RegisterDump, TraceDb};
